use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{Quantity, RankTrace};

pub const SUMMARY_HEADER: &str = "trace,layer,quantity,initial,final,min";
pub const COMPARISON_HEADER: &str = "layer,quantity,final_a,final_b,verdict";
pub const LONG_HEADER: &str = "trace,step,layer,quantity,stable_rank";

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub trace: String,
    pub layer: usize,
    pub quantity: Quantity,
    pub initial: f64,
    pub final_value: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub layer: usize,
    pub quantity: Quantity,
    pub final_a: f64,
    pub final_b: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub labels: Vec<String>,
    pub summary: Vec<SeriesSummary>,
    /// Present when two traces were given.
    pub comparison: Vec<Comparison>,
    long: String,
}

/// Summarizes one trace, or compares two (`a` then `b`) series by series.
pub fn rank_report(traces: &[(String, RankTrace)]) -> Result<RankReport> {
    if traces.is_empty() || traces.len() > 2 {
        return Err(Error::Config(format!("rank report takes one or two traces, got {}", traces.len())));
    }
    let mut summary = Vec::new();
    let mut long = String::from(LONG_HEADER);
    long.push('\n');
    for (label, trace) in traces {
        if trace.is_empty() {
            return Err(Error::EmptyInput(format!("trace '{label}' has no entries")));
        }
        for (layer, quantity) in trace.keys() {
            let series = trace.series(layer, quantity);
            summary.push(SeriesSummary {
                trace: label.clone(),
                layer,
                quantity,
                initial: series[0].stable_rank,
                final_value: series.last().unwrap().stable_rank,
                min: series.iter().map(|e| e.stable_rank).fold(f64::INFINITY, f64::min),
            });
        }
        for e in trace.entries() {
            writeln!(long, "{label},{},{},{},{}", e.step, e.layer, e.quantity, e.stable_rank).unwrap();
        }
    }
    let mut comparison = Vec::new();
    if let [(la, a), (lb, b)] = traces {
        for (layer, quantity) in a.keys() {
            let (Some(fa), Some(fb)) = (a.final_value(layer, quantity), b.final_value(layer, quantity)) else {
                continue;
            };
            let verdict = if fb > fa {
                format!("{lb} preserves more rank")
            } else if fa > fb {
                format!("{la} preserves more rank")
            } else {
                "equal".to_string()
            };
            comparison.push(Comparison {
                layer,
                quantity,
                final_a: fa,
                final_b: fb,
                verdict,
            });
        }
    }
    Ok(RankReport {
        labels: traces.iter().map(|(l, _)| l.clone()).collect(),
        summary,
        comparison,
        long,
    })
}

impl RankReport {
    pub fn summary_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for r in &self.summary {
            writeln!(s, "{},{},{},{},{},{}", r.trace, r.layer, r.quantity, r.initial, r.final_value, r.min).unwrap();
        }
        s
    }

    pub fn comparison_csv(&self) -> String {
        let mut s = String::from(COMPARISON_HEADER);
        s.push('\n');
        for c in &self.comparison {
            writeln!(s, "{},{},{},{},{}", c.layer, c.quantity, c.final_a, c.final_b, c.verdict).unwrap();
        }
        s
    }

    /// Plot-ready long format: one row per logged value.
    pub fn long_csv(&self) -> &str {
        &self.long
    }

    /// Aligned text table for the terminal.
    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<12} {:>5} {:<10} {:>10} {:>10} {:>10}", "trace", "layer", "quantity", "initial", "final", "min").unwrap();
        for r in &self.summary {
            writeln!(
                s,
                "{:<12} {:>5} {:<10} {:>10.3} {:>10.3} {:>10.3}",
                r.trace, r.layer, r.quantity, r.initial, r.final_value, r.min
            )
            .unwrap();
        }
        if !self.comparison.is_empty() {
            s.push('\n');
            writeln!(s, "{:>5} {:<10} {:>10} {:>10}  verdict", "layer", "quantity", &self.labels[0], &self.labels[1]).unwrap();
            for c in &self.comparison {
                writeln!(s, "{:>5} {:<10} {:>10.3} {:>10.3}  {}", c.layer, c.quantity, c.final_a, c.final_b, c.verdict).unwrap();
            }
        }
        s
    }

    /// Writes `rank_summary.csv`, `rank_long.csv` and, for two traces,
    /// `rank_comparison.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![("rank_summary.csv", self.summary_csv()), ("rank_long.csv", self.long.clone())];
        if !self.comparison.is_empty() {
            files.push(("rank_comparison.csv", self.comparison_csv()));
        }
        files
            .into_iter()
            .map(|(name, text)| {
                let p = dir.join(name);
                std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                Ok(p)
            })
            .collect()
    }
}

/// Reads a trace file; the label is the parent directory name, else the file stem.
pub fn load_trace(path: &Path) -> Result<(String, RankTrace)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyInput(format!("{} is empty", path.display())));
    }
    let trace = RankTrace::from_csv(&text)?;
    let label = path
        .parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    Ok((label, trace))
}
