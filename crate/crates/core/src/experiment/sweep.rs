use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{ExperimentConfig, OptimName, RawConfig, Reader};
use super::run::{build_task, run_on_task};
use crate::error::{Error, Result};
use crate::tasks::{Task, TaskKind};

pub const RESULTS_HEADER: &str = "index,optimizer,lr,aux_lr,seed,status,metric,value,loss,best,error";

/// Adam learning-rate grid: `{1, 3} x 10^k` from `1e-5` to `1e-1`.
pub const ADAM_GRID: [f64; 9] = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
/// Muon and auxiliary grid: `{1, 5} x 10^k` from `1e-5` to `1e-1`.
pub const MUON_GRID: [f64; 9] = [1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1];
pub const AUX_GRID: [f64; 9] = MUON_GRID;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub optimizers: Vec<OptimName>,
    pub adam_lr: Vec<f64>,
    pub muon_lr: Vec<f64>,
    pub aux_lr: Vec<f64>,
    /// One of the metrics the task logs, or `loss`.
    pub metric: String,
    pub workers: usize,
}

fn default_metric(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Image | TaskKind::Ct | TaskKind::Sisr => "psnr",
        TaskKind::Audio => "snr",
        TaskKind::Sdf => "iou",
    }
}

fn allowed_metrics(kind: TaskKind) -> &'static [&'static str] {
    match kind {
        TaskKind::Image | TaskKind::Ct | TaskKind::Sisr => &["psnr", "ssim", "loss"],
        TaskKind::Audio => &["snr", "si_snr", "loss"],
        TaskKind::Sdf => &["iou", "loss"],
    }
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_raw(RawConfig::load(path)?)
    }

    pub fn from_raw(mut raw: RawConfig) -> Result<Self> {
        let sweep = raw.take_prefixed("sweep.");
        let base = ExperimentConfig::from_raw(&raw)?;
        let mut r = Reader::new(&sweep);
        let optimizers = match r.string("sweep.optimizers") {
            None => vec![base.optim.kind],
            Some(s) => s
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("unknown optimizer '{}' in sweep.optimizers", x.trim())))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let spec = Self {
            optimizers,
            adam_lr: r.list("sweep.adam_lr")?.unwrap_or_else(|| ADAM_GRID.to_vec()),
            muon_lr: r.list("sweep.muon_lr")?.unwrap_or_else(|| MUON_GRID.to_vec()),
            aux_lr: r.list("sweep.aux_lr")?.unwrap_or_else(|| AUX_GRID.to_vec()),
            metric: r.string("sweep.metric").unwrap_or_else(|| default_metric(base.task.kind).into()),
            workers: r.or("sweep.workers", 1)?,
            base,
        };
        r.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.optimizers.is_empty() {
            return Err(Error::Config("sweep.optimizers is empty".into()));
        }
        for (name, list) in [("sweep.adam_lr", &self.adam_lr), ("sweep.muon_lr", &self.muon_lr), ("sweep.aux_lr", &self.aux_lr)] {
            if list.is_empty() || list.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config(format!("{name} must be a non-empty list of positive rates")));
            }
        }
        let allowed = allowed_metrics(self.base.task.kind);
        if !allowed.contains(&self.metric.as_str()) {
            return Err(Error::Config(format!(
                "sweep.metric '{}' is not logged by the {} task ({})",
                self.metric,
                self.base.task.kind.name(),
                allowed.join(", ")
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("sweep.workers must be >= 1".into()));
        }
        Ok(())
    }

    /// The grid in index order: Adam rates, then the Muon cross product
    /// (Muon rate outer, auxiliary rate inner).
    pub fn grid(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for kind in &self.optimizers {
            let pairs: Vec<(f64, f64)> = match kind {
                OptimName::Adam => self.adam_lr.iter().map(|&lr| (lr, lr)).collect(),
                OptimName::Muon => self
                    .muon_lr
                    .iter()
                    .flat_map(|&m| self.aux_lr.iter().map(move |&a| (m, a)))
                    .collect(),
            };
            for (lr, aux) in pairs {
                let index = out.len();
                let mut c = self.base.clone();
                c.optim.kind = *kind;
                c.optim.lr = lr;
                c.optim.aux_lr = aux;
                c.seed = self.base.seed + index as u64;
                c.output_dir = self.base.output_dir.join(format!("run_{index:03}"));
                out.push(c);
            }
        }
        out
    }

    fn maximize(&self) -> bool {
        self.metric != "loss"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub optimizer: OptimName,
    pub lr: f64,
    pub aux_lr: Option<f64>,
    pub seed: u64,
    /// Selection metric and final loss; `None` for failed runs.
    pub value: Option<f64>,
    pub loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub metric: String,
    pub rows: Vec<SweepRow>,
    /// Index of the best successful row.
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RESULTS_HEADER);
        s.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let error = r.error.as_deref().unwrap_or("").replace([',', '\n', '\r'], ";");
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.optimizer.name(),
                r.lr,
                opt(r.aux_lr),
                r.seed,
                if r.error.is_some() { "failed" } else { "ok" },
                self.metric,
                opt(r.value),
                opt(r.loss),
                u8::from(self.best == Some(r.index)),
                error
            )
            .unwrap();
        }
        s
    }
}

/// Best row by `metric`; ties go to the lower rate, then the lower auxiliary rate.
pub fn select_best(rows: &[SweepRow], maximize: bool) -> Option<usize> {
    let key = |r: &SweepRow| {
        let v = r.value.unwrap();
        (if maximize { -v } else { v }, r.lr, r.aux_lr.unwrap_or(0.0), r.index)
    };
    rows.iter()
        .filter(|r| r.value.is_some_and(f64::is_finite))
        .min_by(|a, b| key(a).partial_cmp(&key(b)).unwrap())
        .map(|r| r.index)
}

fn run_cell(cfg: &ExperimentConfig, task: &Task, metric: &str) -> std::result::Result<(f64, f64), String> {
    let out = run_on_task(cfg, task).map_err(|e| e.to_string())?;
    let get = |m: &str| {
        out.final_metrics
            .get(m)
            .copied()
            .ok_or_else(|| format!("metric '{m}' was not logged"))
    };
    Ok((get(metric)?, get("loss")?))
}

/// Runs every grid point and writes `results.csv` and `best.cfg` under the
/// base `output_dir`. Failed cells are recorded and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let task = build_task(&spec.base)?;
    let grid = spec.grid();
    let slots: Vec<Mutex<Option<SweepRow>>> = grid.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(cfg) = grid.get(i) else { break };
        let result = run_cell(cfg, &task, &spec.metric);
        let (value, loss, error) = match result {
            Ok((v, l)) => (Some(v), Some(l), None),
            Err(e) => (None, None, Some(e)),
        };
        *slots[i].lock().unwrap() = Some(SweepRow {
            index: i,
            optimizer: cfg.optim.kind,
            lr: cfg.optim.lr,
            aux_lr: (cfg.optim.kind == OptimName::Muon).then_some(cfg.optim.aux_lr),
            seed: cfg.seed,
            value,
            loss,
            error,
        });
    };
    let workers = spec.workers.min(grid.len()).max(1);
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    let rows: Vec<SweepRow> = slots.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect();
    let result = SweepResult {
        metric: spec.metric.clone(),
        best: select_best(&rows, spec.maximize()),
        rows,
    };
    let dir = &spec.base.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("results.csv");
    std::fs::write(&path, result.to_csv()).map_err(|e| Error::io(&path, e))?;
    if let Some(b) = result.best {
        let path = dir.join("best.cfg");
        std::fs::write(&path, grid[b].to_cfg()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(result)
}
