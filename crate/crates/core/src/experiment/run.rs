use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, OptimName, PhantomName, ShapeName};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{occupancy_grid, occupancy_iou, psnr, psnr_image, record_ranks, si_snr, snr, ssim, ssim_gray, MetricsLog, RankTrace};
use crate::net::{build_network, Network};
use crate::optim::{rank_pretrain, MuonState, Optimizer, UniformSampler};
use crate::tasks::{disk_phantom, sdf_sample, shepp_logan, AudioSignal, ImageSignal, SdfBatch, Shape, Task, TaskLoss};

const SSIM_MIN_SIDE: usize = 11;
const PRETRAIN_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const SDF_STREAM: u64 = 0xd1b5_4a32_d192_ed03;

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub network: Network,
    pub metrics: MetricsLog,
    pub ranks: RankTrace,
    /// Training loss at every epoch, before that epoch's update.
    pub losses: Vec<f64>,
    /// Metrics of the final network.
    pub final_metrics: BTreeMap<String, f64>,
    /// `(loss before, loss after)` of rank pretraining on its probe batch.
    pub pretrain: Option<(f64, f64)>,
    pub skipped_updates: usize,
    /// Files written under `output_dir`; empty for [`train`].
    pub artifacts: Vec<PathBuf>,
}

/// Loads or synthesizes the task described by `cfg`.
pub fn build_task(cfg: &ExperimentConfig) -> Result<Task> {
    let t = &cfg.task;
    let load_image = || -> Result<ImageSignal> {
        let mut img = ImageSignal::load(Path::new(&t.path))?;
        if let Some([top, left, h, w]) = t.crop {
            img = img.crop(top, left, h, w)?;
        }
        Ok(if t.gray { img.to_gray() } else { img })
    };
    match t.kind {
        crate::tasks::TaskKind::Image => Ok(Task::Image { image: load_image()? }),
        crate::tasks::TaskKind::Sisr => Task::sisr(load_image()?, t.factor),
        crate::tasks::TaskKind::Audio => {
            let audio = if t.path.is_empty() {
                AudioSignal::chirp(t.duration, t.sample_rate, t.f0, t.f1, t.amplitude)?
            } else {
                AudioSignal::load(Path::new(&t.path))?
            };
            Ok(Task::Audio { audio, extent: t.extent })
        }
        crate::tasks::TaskKind::Ct => {
            let phantom = if !t.path.is_empty() {
                load_image()?.to_gray().channel(0)
            } else {
                match t.phantom {
                    PhantomName::SheppLogan => shepp_logan(t.size),
                    PhantomName::Disk => disk_phantom(t.size, 0.35 * t.size as f64, 1.0),
                }
            };
            Task::ct(phantom, t.angles)
        }
        crate::tasks::TaskKind::Sdf => Ok(Task::Sdf {
            shape: match t.shape {
                ShapeName::SphereAndTorus => Shape::sphere_and_torus(),
                ShapeName::Sphere => Shape::sphere(0.5),
            },
            n_fine: t.n_fine,
            n_coarse: t.n_coarse,
        }),
    }
}

fn make_optimizer(cfg: &ExperimentConfig, net: &Network) -> Result<Optimizer> {
    let o = &cfg.optim;
    Ok(match o.kind {
        OptimName::Adam => Optimizer::adam(net, cfg.schedule(o.lr)?),
        OptimName::Muon => {
            let mut state = MuonState::new(net).with_momentum(o.momentum, o.nesterov);
            state.ns_steps = o.ns_steps;
            Optimizer::Muon {
                state,
                muon: cfg.schedule(o.lr)?,
                aux: cfg.schedule(o.aux_lr)?,
            }
        }
    })
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::Numeric { step: None, layer, detail } => Error::Numeric {
            step: Some(step),
            layer,
            detail,
        },
        other => other,
    }
}

/// Task metrics for the current network. `pred` is the prediction on the
/// task's coordinate set when one exists.
pub fn evaluate(task: &Task, cfg: &ExperimentConfig, net: &Network, pred: Option<&Matrix>) -> Result<Vec<(&'static str, f64)>> {
    let owned;
    let pred = match (pred, task.coords()) {
        (Some(p), _) => Some(p),
        (None, Some(c)) => {
            owned = net.predict(&c)?;
            Some(&owned)
        }
        (None, None) => None,
    };
    let mut out = Vec::new();
    let image_metrics = |out: &mut Vec<(&'static str, f64)>, recon: &ImageSignal, gt: &ImageSignal| -> Result<()> {
        out.push(("psnr", psnr_image(recon, gt)?));
        if gt.height() >= SSIM_MIN_SIDE && gt.width() >= SSIM_MIN_SIDE {
            out.push(("ssim", ssim(recon, gt)?));
        }
        Ok(())
    };
    match task {
        Task::Image { image } => {
            let recon = ImageSignal::from_targets(image.height(), image.width(), pred.unwrap())?;
            image_metrics(&mut out, &recon, image)?;
        }
        Task::Sisr { high_res, .. } => {
            let recon = ImageSignal::from_targets(high_res.height(), high_res.width(), pred.unwrap())?;
            image_metrics(&mut out, &recon, high_res)?;
        }
        Task::Audio { audio, .. } => {
            let p = pred.unwrap().data();
            out.push(("snr", snr(p, audio.samples())?));
            out.push(("si_snr", si_snr(p, audio.samples())?));
        }
        Task::Ct { phantom, .. } => {
            let p = pred.unwrap();
            out.push(("psnr", psnr(p.data(), phantom.data(), 1.0)?));
            if phantom.rows() >= SSIM_MIN_SIDE && phantom.cols() >= SSIM_MIN_SIDE {
                let img = Matrix::new(phantom.rows(), phantom.cols(), p.data().iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
                out.push(("ssim", ssim_gray(&img, phantom)?));
            }
        }
        Task::Sdf { shape, .. } => {
            out.push(("iou", occupancy_iou(net, shape, cfg.task.iou_res)?));
        }
    }
    Ok(out)
}

/// Trains without touching the filesystem.
pub fn train(cfg: &ExperimentConfig, task: &Task) -> Result<RunOutput> {
    let spec = cfg.arch_spec(task.in_dim(), task.out_dim())?;
    let mut net = build_network(&spec, cfg.seed)?;
    let mut pretrain = None;
    if cfg.pretrain_steps > 0 {
        let extent = match task {
            Task::Audio { extent, .. } => *extent,
            _ => 1.0,
        };
        let mut sampler = UniformSampler::new(task.in_dim(), -extent, extent, cfg.seed ^ PRETRAIN_STREAM);
        let report = rank_pretrain(&net, &mut sampler, cfg.pretrain_steps, cfg.pretrain_lr)?;
        pretrain = Some((report.probe_loss_before, report.probe_loss_after));
        net = report.net;
    }
    let mut opt = make_optimizer(cfg, &net)?;

    let coords = task.coords();
    let fixed_loss = match task {
        Task::Sdf { .. } => None,
        _ => Some(task.loss()?),
    };
    let mut sdf_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SDF_STREAM);
    let sdf_eval = match task {
        Task::Sdf { shape, n_fine, n_coarse } => Some(sdf_sample(shape, *n_fine, *n_coarse, &mut sdf_rng)?),
        _ => None,
    };

    let mut metrics = MetricsLog::new();
    let mut ranks = RankTrace::new();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let depth = net.depth();

    for step in 0..=cfg.epochs {
        let last = step == cfg.epochs;
        // The final pass evaluates the trained network on the fixed evaluation batch.
        let batch: Option<SdfBatch> = match task {
            Task::Sdf { shape, n_fine, n_coarse } if !last => Some(sdf_sample(shape, *n_fine, *n_coarse, &mut sdf_rng)?),
            _ => None,
        };
        let (x, loss_fn) = match (&coords, &batch, &sdf_eval) {
            (Some(c), _, _) => (c, fixed_loss.clone().unwrap()),
            (None, Some(b), _) => (&b.points, TaskLoss::for_sdf_batch(b)),
            (None, None, Some(b)) => (&b.points, TaskLoss::for_sdf_batch(b)),
            _ => unreachable!(),
        };
        let (out, cache) = net.forward(x, true).map_err(|e| at_step(e, step))?;
        let (loss, grad_out) = loss_fn.evaluate(&out)?;
        if !loss.is_finite() {
            return Err(Error::Numeric {
                step: Some(step),
                layer: depth - 1,
                detail: format!("loss is {loss}"),
            });
        }
        let cache = cache.expect("capture requested");
        let grads = net.backward(&cache, &grad_out).map_err(|e| at_step(e, step))?;
        if step % cfg.rank_every == 0 || last {
            record_ranks(&net, &cache, &grads, step, &mut ranks)?;
        }
        if step % cfg.eval_every == 0 || last {
            let pred = coords.as_ref().map(|_| &out);
            for (name, v) in evaluate(task, cfg, &net, pred)? {
                metrics.push(step, name, v);
            }
            metrics.push(step, "loss", loss);
        }
        if last {
            break;
        }
        losses.push(loss);
        opt.step(&mut net, &grads, step).map_err(|e| at_step(e, step))?;
    }

    let final_metrics = metrics
        .rows()
        .iter()
        .filter(|(s, _, _)| *s == cfg.epochs)
        .map(|(_, m, v)| (m.clone(), *v))
        .collect();
    Ok(RunOutput {
        skipped_updates: opt.skipped_updates(),
        network: net,
        metrics,
        ranks,
        losses,
        final_metrics,
        pretrain,
        artifacts: Vec::new(),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `x,y,z,sdf` on the cell centres of a `res³` grid over `[-1, 1]³`.
pub fn sdf_grid_csv(net: &Network, res: usize) -> Result<String> {
    let grid = occupancy_grid(res);
    let values = net.predict(&grid)?;
    let mut s = String::from("x,y,z,sdf\n");
    for j in 0..grid.cols() {
        writeln!(s, "{},{},{},{}", grid[(0, j)], grid[(1, j)], grid[(2, j)], values[(0, j)]).unwrap();
    }
    Ok(s)
}

/// Writes reconstruction, CSVs and `resolved.cfg` under `cfg.output_dir`.
pub fn write_artifacts(cfg: &ExperimentConfig, task: &Task, run: &RunOutput) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    let net = &run.network;
    let recon = match task {
        Task::Image { image } => {
            let p = dir.join("reconstruction.png");
            let pred = net.predict(&task.coords().unwrap())?;
            ImageSignal::from_targets(image.height(), image.width(), &pred)?.save(&p)?;
            p
        }
        Task::Sisr { high_res, .. } => {
            let p = dir.join("reconstruction.png");
            let pred = net.predict(&task.coords().unwrap())?;
            ImageSignal::from_targets(high_res.height(), high_res.width(), &pred)?.save(&p)?;
            p
        }
        Task::Ct { phantom, .. } => {
            let p = dir.join("reconstruction.png");
            let pred = net.predict(&task.coords().unwrap())?;
            ImageSignal::from_targets(phantom.rows(), phantom.cols(), &pred)?.save(&p)?;
            p
        }
        Task::Audio { audio, .. } => {
            let p = dir.join("reconstruction.wav");
            let pred = net.predict(&task.coords().unwrap())?;
            let samples = pred.data().iter().map(|v| v.clamp(-1.0, 1.0)).collect();
            AudioSignal::new(samples, audio.sample_rate)?.save(&p)?;
            p
        }
        Task::Sdf { .. } => {
            let p = dir.join("sdf_grid.csv");
            write_file(&p, &sdf_grid_csv(net, cfg.task.grid_res)?)?;
            p
        }
    };
    paths.push(recon);
    for (name, contents) in [
        ("metrics.csv", run.metrics.to_csv()),
        ("ranks.csv", run.ranks.to_csv()),
        ("resolved.cfg", cfg.to_cfg()),
    ] {
        let p = dir.join(name);
        write_file(&p, &contents)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Builds the task, trains, and writes all artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let task = build_task(cfg)?;
    run_on_task(cfg, &task)
}

/// [`run_experiment`] with a prebuilt task.
pub fn run_on_task(cfg: &ExperimentConfig, task: &Task) -> Result<RunOutput> {
    let mut run = train(cfg, task)?;
    run.artifacts = write_artifacts(cfg, task, &run)?;
    Ok(run)
}
