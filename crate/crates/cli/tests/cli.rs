use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use inrlab::experiment::ExperimentConfig;
use inrlab::metrics::RankTrace;
use inrlab::tasks::ImageSignal;

fn inrlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inrlab")).args(args).output().unwrap()
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const SMALL_NET: &str = "arch.width = 16\narch.depth = 3\ntrain.epochs = 6\ntrain.eval_every = 3\n";

#[test]
fn fit_audio_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let cfg = write_cfg(
        dir.path(),
        "a.cfg",
        &format!("{SMALL_NET}task.duration = 0.01\noptim.kind = muon\noutput_dir = {}\n", out_dir.display()),
    );
    let out = inrlab(&["fit-audio", "--config", &cfg, "--seed", "4"]);
    ok(&out);
    for f in ["reconstruction.wav", "metrics.csv", "ranks.csv", "resolved.cfg"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let resolved = ExperimentConfig::load(&out_dir.join("resolved.cfg")).unwrap();
    assert_eq!(resolved.seed, 4);
    assert_eq!(resolved.to_cfg(), fs::read_to_string(out_dir.join("resolved.cfg")).unwrap());
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,metric,value\n"));
    assert!(metrics.contains("6,snr,"));
    let ranks = RankTrace::from_csv(&fs::read_to_string(out_dir.join("ranks.csv")).unwrap()).unwrap();
    assert_eq!(ranks.keys().len(), 3);
}

#[test]
fn reruns_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["x", "y"] {
        let out_dir = dir.path().join(run);
        let cfg = write_cfg(
            dir.path(),
            &format!("{run}.cfg"),
            &format!("{SMALL_NET}task.size = 16\ntask.angles = 10\noutput_dir = {}\n", out_dir.display()),
        );
        ok(&inrlab(&["ct", "--config", &cfg]));
        outputs.push((
            fs::read(out_dir.join("metrics.csv")).unwrap(),
            fs::read(out_dir.join("ranks.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn image_sisr_and_sdf_commands() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("img.png");
    ImageSignal::from_fn(16, 16, 3, |r, c, k| ((r + 2 * c + k) % 7) as f64 / 6.0)
        .unwrap()
        .save(&img)
        .unwrap();
    for (cmd, extra, artifact) in [
        ("fit-image", format!("task.path = {}\n", img.display()), "reconstruction.png"),
        ("sisr", format!("task.path = {}\ntask.factor = 2\n", img.display()), "reconstruction.png"),
        ("sdf", "task.n_fine = 64\ntask.n_coarse = 64\ntask.iou_res = 8\ntask.grid_res = 4\n".into(), "sdf_grid.csv"),
    ] {
        let out_dir = dir.path().join(cmd);
        let cfg = write_cfg(dir.path(), &format!("{cmd}.cfg"), &format!("{SMALL_NET}{extra}output_dir = {}\n", out_dir.display()));
        ok(&inrlab(&[cmd, "--config", &cfg]));
        assert!(out_dir.join(artifact).exists(), "{cmd}: {artifact}");
    }
    let grid = fs::read_to_string(dir.path().join("sdf/sdf_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 64);
    let recon = ImageSignal::load(&dir.path().join("sisr/reconstruction.png")).unwrap();
    assert_eq!(recon.dims(), (16, 16, 3));
}

#[test]
fn epochs_zero_reports_the_untrained_network() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = inrlab(&[
        "fit-audio",
        "--set",
        "train.epochs=0",
        "--set",
        "task.duration=0.01",
        "--set",
        &format!("output_dir={}", out_dir.display()),
    ]);
    ok(&out);
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(metrics.lines().skip(1).all(|l| l.starts_with("0,")));
    assert!(metrics.contains("0,loss,"));
}

#[test]
fn sweep_toy_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let cfg = write_cfg(
        dir.path(),
        "s.cfg",
        &format!(
            "task = audio\ntask.duration = 0.01\n{SMALL_NET}optim.kind = muon\nsweep.muon_lr = 1e-3, 1e-2\nsweep.aux_lr = 1e-4, 1e-3\nsweep.workers = 2\noutput_dir = {}\n",
            out_dir.display()
        ),
    );
    ok(&inrlab(&["sweep", "--config", &cfg]));
    let table = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r[9] == "1").count(), 1);
    let best = rows.iter().find(|r| r[9] == "1").unwrap();
    let max = rows.iter().map(|r| r[7].parse::<f64>().unwrap()).fold(f64::MIN, f64::max);
    assert_eq!(best[7].parse::<f64>().unwrap(), max);
    for i in 0..4 {
        assert!(out_dir.join(format!("run_{i:03}/metrics.csv")).exists());
    }
    assert!(out_dir.join("best.cfg").exists());

    // Sequential execution gives the same table.
    let seq = write_cfg(dir.path(), "s2.cfg", &fs::read_to_string(&cfg).unwrap().replace("sweep.workers = 2", "sweep.workers = 1"));
    ok(&inrlab(&["sweep", "--config", &seq]));
    assert_eq!(fs::read_to_string(out_dir.join("results.csv")).unwrap(), table);
}

#[test]
fn rank_report_compares_two_runs() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["adam", "muon"] {
        let out_dir = dir.path().join(kind);
        ok(&inrlab(&[
            "fit-audio",
            "--set",
            "task.duration=0.01",
            "--set",
            &format!("optim.kind={kind}"),
            "--set",
            "train.epochs=3",
            "--set",
            &format!("output_dir={}", out_dir.display()),
        ]));
    }
    let report_dir = dir.path().join("report");
    let out = inrlab(&[
        "rank-report",
        dir.path().join("adam/ranks.csv").to_str().unwrap(),
        dir.path().join("muon/ranks.csv").to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("preserves more rank") || stdout.contains("equal"), "{stdout}");
    let long = fs::read_to_string(report_dir.join("rank_long.csv")).unwrap();
    assert!(long.starts_with("trace,step,layer,quantity,stable_rank\n"));
    assert!(long.contains("\nadam,") && long.contains("\nmuon,"));
    assert!(report_dir.join("rank_comparison.csv").exists());
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let o = |name: &str| format!("output_dir={}", dir.path().join(name).display());

    let out = inrlab(&["fit-audio", "--set", "arch.widht=3", "--set", &o("a")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("arch.widht"));

    let out = inrlab(&["fit-image", "--set", "task=audio", "--set", &o("b")]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nope.png");
    let out = inrlab(&["fit-image", "--set", &format!("task.path={}", missing.display()), "--set", &o("c")]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.png"));

    let out = inrlab(&[
        "fit-audio",
        "--set",
        "task.duration=0.01",
        "--set",
        "optim.lr=1e200",
        "--set",
        "optim.schedule=constant",
        "--set",
        "train.epochs=20",
        "--set",
        &o("d"),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = inrlab(&["rank-report", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "step,layer,quantity,stable_rank\n0,1,weight,1.0\n0,1,weight\n").unwrap();
    let out = inrlab(&["rank-report", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    assert_eq!(inrlab(&["fit-audio", "--config", dir.path().join("none.cfg").to_str().unwrap()]).status.code(), Some(4));
}
