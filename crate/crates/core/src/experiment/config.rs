//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Nested settings use dotted keys (`arch.activation = sine`). Every key is
//! validated and unknown keys are rejected. [`ExperimentConfig::to_cfg`] writes
//! every resolved key, so a manifest re-parses to the identical config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::net::{ActivationKind, ArchSpec, EncodingSpec};
use crate::optim::{Schedule, ScheduleKind, DEFAULT_LR_MIN, DEFAULT_MOMENTUM};
use crate::tasks::TaskKind;

/// Raw key/value pairs with the line each key came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                detail: format!("expected 'key = value', found '{content}'"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line: line_no,
                    detail: format!("invalid key '{k}'"),
                });
            }
            if let Some((_, prev)) = entries.insert(k.to_string(), (v.to_string(), line_no)) {
                return Err(Error::Parse {
                    line: line_no,
                    detail: format!("duplicate key '{k}' (first set on line {prev})"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Removes and returns all keys starting with `prefix`.
    pub fn take_prefixed(&mut self, prefix: &str) -> RawConfig {
        let keys: Vec<String> = self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        let mut out = RawConfig::default();
        for k in keys {
            let v = self.entries.remove(&k).unwrap();
            out.entries.insert(k, v);
        }
        out
    }
}

/// Typed lookups that record which keys were consumed.
pub(crate) struct Reader<'a> {
    raw: &'a RawConfig,
    used: Vec<&'static str>,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(raw: &'a RawConfig) -> Self {
        Self { raw, used: Vec::new() }
    }

    fn describe(&self, key: &str) -> String {
        match self.raw.entries.get(key) {
            Some((_, line)) if *line > 0 => format!("'{key}' (line {line})"),
            _ => format!("'{key}'"),
        }
    }

    pub(crate) fn opt<T: FromStr>(&mut self, key: &'static str) -> Result<Option<T>> {
        self.used.push(key);
        match self.raw.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value '{v}' for {}", self.describe(key)))),
        }
    }

    pub(crate) fn or<T: FromStr>(&mut self, key: &'static str, default: T) -> Result<T> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    pub(crate) fn string(&mut self, key: &'static str) -> Option<String> {
        self.used.push(key);
        self.raw.get(key).map(str::to_string)
    }

    pub(crate) fn list(&mut self, key: &'static str) -> Result<Option<Vec<f64>>> {
        self.used.push(key);
        let Some(v) = self.raw.get(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|_| Error::Config(format!("invalid number list '{v}' for {}", self.describe(key))))
    }

    /// Fails on any key that was never looked up.
    pub(crate) fn finish(self) -> Result<()> {
        let unknown: Vec<String> = self
            .raw
            .entries
            .iter()
            .filter(|(k, _)| !self.used.contains(&k.as_str()))
            .map(|(k, (_, line))| if *line > 0 { format!("'{k}' (line {line})") } else { format!("'{k}'") })
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}

fn parse_task_kind(s: &str) -> Result<TaskKind> {
    Ok(match s {
        "image" => TaskKind::Image,
        "audio" => TaskKind::Audio,
        "ct" => TaskKind::Ct,
        "sisr" => TaskKind::Sisr,
        "sdf" => TaskKind::Sdf,
        other => return Err(Error::Config(format!("unknown task '{other}' (image, audio, ct, sisr, sdf)"))),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationName {
    Relu,
    Sine,
    Gaussian,
    Gabor,
    Finer,
}

impl FromStr for ActivationName {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Ok(match s {
            "relu" => Self::Relu,
            "sine" | "siren" => Self::Sine,
            "gaussian" => Self::Gaussian,
            "gabor" | "wire" => Self::Gabor,
            "finer" => Self::Finer,
            _ => return Err(()),
        })
    }
}

impl ActivationName {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Sine => "sine",
            Self::Gaussian => "gaussian",
            Self::Gabor => "gabor",
            Self::Finer => "finer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingName {
    None,
    Fourier,
    Positional,
}

impl FromStr for EncodingName {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Ok(match s {
            "none" | "identity" => Self::None,
            "fourier" => Self::Fourier,
            "positional" => Self::Positional,
            _ => return Err(()),
        })
    }
}

impl EncodingName {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Fourier => "fourier",
            Self::Positional => "positional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimName {
    Adam,
    Muon,
}

impl FromStr for OptimName {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "adam" => Ok(Self::Adam),
            "muon" => Ok(Self::Muon),
            _ => Err(()),
        }
    }
}

impl OptimName {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Adam => "adam",
            Self::Muon => "muon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleName {
    Constant,
    Cosine,
    Exponential,
}

impl FromStr for ScheduleName {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Ok(match s {
            "constant" => Self::Constant,
            "cosine" => Self::Cosine,
            "exponential" => Self::Exponential,
            _ => return Err(()),
        })
    }
}

impl ScheduleName {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Cosine => "cosine",
            Self::Exponential => "exponential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomName {
    SheppLogan,
    Disk,
}

impl FromStr for PhantomName {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "shepp_logan" => Ok(Self::SheppLogan),
            "disk" => Ok(Self::Disk),
            _ => Err(()),
        }
    }
}

impl PhantomName {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SheppLogan => "shepp_logan",
            Self::Disk => "disk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeName {
    SphereAndTorus,
    Sphere,
}

impl FromStr for ShapeName {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "sphere_and_torus" => Ok(Self::SphereAndTorus),
            "sphere" => Ok(Self::Sphere),
            _ => Err(()),
        }
    }
}

impl ShapeName {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SphereAndTorus => "sphere_and_torus",
            Self::Sphere => "sphere",
        }
    }
}

macro_rules! named_opt {
    ($r:expr, $key:literal, $default:expr, $what:literal) => {{
        let v: Option<String> = $r.string($key);
        match v {
            None => Ok($default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("invalid {} '{}' for '{}'", $what, s, $key))),
        }
    }};
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Input file (image, audio or CT phantom); empty for synthetic inputs.
    pub path: String,
    /// `top,left,height,width` crop applied to loaded images.
    pub crop: Option<[usize; 4]>,
    pub gray: bool,
    pub phantom: PhantomName,
    pub size: usize,
    pub angles: usize,
    pub factor: usize,
    pub duration: f64,
    pub sample_rate: u32,
    pub f0: f64,
    pub f1: f64,
    pub amplitude: f64,
    pub extent: f64,
    pub shape: ShapeName,
    pub n_fine: usize,
    pub n_coarse: usize,
    pub iou_res: usize,
    pub grid_res: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub activation: ActivationName,
    pub depth: usize,
    pub width: usize,
    pub omega0: f64,
    pub omega: f64,
    pub a: f64,
    pub s: f64,
    pub encoding: EncodingName,
    pub fourier_features: usize,
    pub fourier_sigma: f64,
    pub bands: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub kind: OptimName,
    /// Adam learning rate, or the Muon-group rate for Muon.
    pub lr: f64,
    /// Auxiliary Adam rate for Muon.
    pub aux_lr: f64,
    pub schedule: ScheduleName,
    pub lr_min: f64,
    pub gamma: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub ns_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    pub arch: ArchConfig,
    pub optim: OptimConfig,
    pub pretrain_steps: usize,
    pub pretrain_lr: f64,
    pub epochs: usize,
    pub eval_every: usize,
    pub rank_every: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// Gaussian width matching WIRE's `s₀ = 30`: `a = 1 / (√2 · 30)`.
pub const DEFAULT_GAUSSIAN_A: f64 = 0.023570226039551584;

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_raw(&RawConfig::load(path)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut r = Reader::new(raw);
        let cfg = Self::read(&mut r)?;
        r.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let kind = match r.string("task") {
            Some(s) => parse_task_kind(&s)?,
            None => return Err(Error::Config("missing required key 'task'".into())),
        };
        let activation: ActivationName = named_opt!(r, "arch.activation", ActivationName::Relu, "activation")?;
        let periodic = matches!(activation, ActivationName::Sine | ActivationName::Finer);
        let default_omega = match activation {
            ActivationName::Gabor => 20.0,
            _ => 40.0,
        };
        let crop = match r.string("task.crop") {
            None => None,
            Some(s) if s.is_empty() || s == "none" => None,
            Some(s) => {
                let v: Vec<usize> = s
                    .split(',')
                    .map(|x| x.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Config(format!("invalid task.crop '{s}' (expected top,left,height,width)")))?;
                if v.len() != 4 {
                    return Err(Error::Config(format!("task.crop needs 4 values, got {}", v.len())));
                }
                Some([v[0], v[1], v[2], v[3]])
            }
        };
        let task = TaskConfig {
            kind,
            path: r.string("task.path").unwrap_or_default(),
            crop,
            gray: r.or("task.gray", false)?,
            phantom: named_opt!(r, "task.phantom", PhantomName::SheppLogan, "phantom")?,
            size: r.or("task.size", 64)?,
            angles: r.or("task.angles", 100)?,
            factor: r.or("task.factor", 4)?,
            duration: r.or("task.duration", 0.2)?,
            sample_rate: r.or("task.sample_rate", 16_000)?,
            f0: r.or("task.f0", 200.0)?,
            f1: r.or("task.f1", 2000.0)?,
            amplitude: r.or("task.amplitude", 0.8)?,
            extent: r.or("task.extent", if periodic { 100.0 } else { 1.0 })?,
            shape: named_opt!(r, "task.shape", ShapeName::SphereAndTorus, "shape")?,
            n_fine: r.or("task.n_fine", 2048)?,
            n_coarse: r.or("task.n_coarse", 2048)?,
            iou_res: r.or("task.iou_res", 64)?,
            grid_res: r.or("task.grid_res", 32)?,
        };
        let arch = ArchConfig {
            activation,
            depth: r.or("arch.depth", 5)?,
            width: r.or("arch.width", 128)?,
            omega0: r.or("arch.omega0", default_omega)?,
            omega: r.or("arch.omega", default_omega)?,
            a: r.or("arch.a", DEFAULT_GAUSSIAN_A)?,
            s: r.or("arch.s", 10.0)?,
            encoding: named_opt!(r, "arch.encoding", EncodingName::None, "encoding")?,
            fourier_features: r.or("arch.fourier_features", 128)?,
            fourier_sigma: r.or("arch.fourier_sigma", 10.0)?,
            bands: r.or("arch.bands", 8)?,
        };
        let default_schedule = if kind == TaskKind::Sdf {
            ScheduleName::Exponential
        } else {
            ScheduleName::Cosine
        };
        let optim = OptimConfig {
            kind: named_opt!(r, "optim.kind", OptimName::Adam, "optimizer")?,
            lr: r.or("optim.lr", 1e-3)?,
            aux_lr: r.or("optim.aux_lr", 1e-3)?,
            schedule: named_opt!(r, "optim.schedule", default_schedule, "schedule")?,
            lr_min: r.or("optim.lr_min", DEFAULT_LR_MIN)?,
            gamma: r.or("optim.gamma", 0.999)?,
            momentum: r.or("optim.momentum", DEFAULT_MOMENTUM)?,
            nesterov: r.or("optim.nesterov", true)?,
            ns_steps: r.or("optim.ns_steps", crate::linalg::DEFAULT_NS_STEPS)?,
        };
        let eval_every = r.or("train.eval_every", 100)?;
        Ok(Self {
            task,
            arch,
            optim,
            pretrain_steps: r.or("pretrain.steps", 0)?,
            pretrain_lr: r.or("pretrain.lr", 0.05)?,
            epochs: r.or("train.epochs", 1000)?,
            eval_every,
            rank_every: r.or("train.rank_every", eval_every)?,
            seed: r.or("seed", 0)?,
            output_dir: PathBuf::from(r.string("output_dir").unwrap_or_else(|| format!("runs/{}", kind.name()))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let t = &self.task;
        if matches!(t.kind, TaskKind::Image | TaskKind::Sisr) && t.path.is_empty() {
            return bad(format!("task.path is required for the {} task", t.kind.name()));
        }
        if t.kind == TaskKind::Sisr && t.factor == 0 {
            return bad("task.factor must be >= 1".into());
        }
        if t.kind == TaskKind::Ct && (t.angles == 0 || t.size == 0) {
            return bad("task.angles and task.size must be >= 1".into());
        }
        if t.kind == TaskKind::Audio && t.path.is_empty() && !(t.duration > 0.0 && t.sample_rate > 0) {
            return bad("synthetic audio needs task.duration > 0 and task.sample_rate > 0".into());
        }
        if !(t.extent > 0.0) {
            return bad(format!("task.extent must be > 0, got {}", t.extent));
        }
        if t.kind == TaskKind::Sdf && (t.n_fine + t.n_coarse == 0 || t.iou_res == 0) {
            return bad("sdf needs task.n_fine + task.n_coarse >= 1 and task.iou_res >= 1".into());
        }
        if self.eval_every == 0 || self.rank_every == 0 {
            return bad("train.eval_every and train.rank_every must be >= 1".into());
        }
        let o = &self.optim;
        if !(o.lr > 0.0) || !(o.aux_lr > 0.0) {
            return bad(format!("learning rates must be > 0 (optim.lr = {}, optim.aux_lr = {})", o.lr, o.aux_lr));
        }
        if o.ns_steps == 0 {
            return bad("optim.ns_steps must be >= 1".into());
        }
        if !(0.0..1.0).contains(&o.momentum) {
            return bad(format!("optim.momentum must be in [0, 1), got {}", o.momentum));
        }
        if self.pretrain_steps > 0 && !(self.pretrain_lr > 0.0) {
            return bad("pretrain.lr must be > 0".into());
        }
        self.schedule(o.lr)?;
        self.arch_spec(2, 1)?.validate()
    }

    pub fn first_activation(&self) -> ActivationKind {
        self.activation(self.arch.omega0)
    }

    pub fn hidden_activation(&self) -> ActivationKind {
        self.activation(self.arch.omega)
    }

    fn activation(&self, omega: f64) -> ActivationKind {
        match self.arch.activation {
            ActivationName::Relu => ActivationKind::Relu,
            ActivationName::Sine => ActivationKind::Sine { omega },
            ActivationName::Finer => ActivationKind::Finer { omega },
            ActivationName::Gaussian => ActivationKind::Gaussian { a: self.arch.a },
            ActivationName::Gabor => ActivationKind::GaborReal { omega, s: self.arch.s },
        }
    }

    pub fn arch_spec(&self, in_dim: usize, out_dim: usize) -> Result<ArchSpec> {
        let encoding = match self.arch.encoding {
            EncodingName::None => EncodingSpec::Identity,
            EncodingName::Fourier => EncodingSpec::Fourier {
                features: self.arch.fourier_features,
                sigma: self.arch.fourier_sigma,
            },
            EncodingName::Positional => EncodingSpec::Positional { bands: self.arch.bands },
        };
        Ok(ArchSpec {
            in_dim,
            out_dim,
            depth: self.arch.depth,
            hidden_dim: self.arch.width,
            first_activation: self.first_activation(),
            hidden_activation: self.hidden_activation(),
            encoding,
        })
    }

    /// Schedule with base rate `base`.
    pub fn schedule(&self, base: f64) -> Result<Schedule> {
        let kind = match self.optim.schedule {
            ScheduleName::Constant => ScheduleKind::Constant,
            ScheduleName::Cosine => ScheduleKind::CosineAnnealing {
                lr_min: self.optim.lr_min,
                total_steps: self.epochs,
            },
            ScheduleName::Exponential => ScheduleKind::ExponentialDecay { gamma: self.optim.gamma },
        };
        Schedule::new(kind, base)
    }

    /// Every resolved key, one per line, in a fixed order.
    pub fn to_cfg(&self) -> String {
        let t = &self.task;
        let a = &self.arch;
        let o = &self.optim;
        let crop = match t.crop {
            Some([a, b, c, d]) => format!("{a},{b},{c},{d}"),
            None => "none".into(),
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("task", t.kind.name().into());
        kv("task.path", t.path.clone());
        kv("task.crop", crop);
        kv("task.gray", t.gray.to_string());
        kv("task.phantom", t.phantom.name().into());
        kv("task.size", t.size.to_string());
        kv("task.angles", t.angles.to_string());
        kv("task.factor", t.factor.to_string());
        kv("task.duration", t.duration.to_string());
        kv("task.sample_rate", t.sample_rate.to_string());
        kv("task.f0", t.f0.to_string());
        kv("task.f1", t.f1.to_string());
        kv("task.amplitude", t.amplitude.to_string());
        kv("task.extent", t.extent.to_string());
        kv("task.shape", t.shape.name().into());
        kv("task.n_fine", t.n_fine.to_string());
        kv("task.n_coarse", t.n_coarse.to_string());
        kv("task.iou_res", t.iou_res.to_string());
        kv("task.grid_res", t.grid_res.to_string());
        kv("arch.activation", a.activation.name().into());
        kv("arch.depth", a.depth.to_string());
        kv("arch.width", a.width.to_string());
        kv("arch.omega0", a.omega0.to_string());
        kv("arch.omega", a.omega.to_string());
        kv("arch.a", a.a.to_string());
        kv("arch.s", a.s.to_string());
        kv("arch.encoding", a.encoding.name().into());
        kv("arch.fourier_features", a.fourier_features.to_string());
        kv("arch.fourier_sigma", a.fourier_sigma.to_string());
        kv("arch.bands", a.bands.to_string());
        kv("optim.kind", o.kind.name().into());
        kv("optim.lr", o.lr.to_string());
        kv("optim.aux_lr", o.aux_lr.to_string());
        kv("optim.schedule", o.schedule.name().into());
        kv("optim.lr_min", o.lr_min.to_string());
        kv("optim.gamma", o.gamma.to_string());
        kv("optim.momentum", o.momentum.to_string());
        kv("optim.nesterov", o.nesterov.to_string());
        kv("optim.ns_steps", o.ns_steps.to_string());
        kv("pretrain.steps", self.pretrain_steps.to_string());
        kv("pretrain.lr", self.pretrain_lr.to_string());
        kv("train.epochs", self.epochs.to_string());
        kv("train.eval_every", self.eval_every.to_string());
        kv("train.rank_every", self.rank_every.to_string());
        kv("seed", self.seed.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        s
    }
}
