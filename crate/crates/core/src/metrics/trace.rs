use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{stable_rank, Matrix};
use crate::net::{ForwardCache, Gradients, Network};

pub const RANK_HEADER: &str = "step,layer,quantity,stable_rank";
pub const METRICS_HEADER: &str = "step,metric,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Weight,
    Activation,
    Gradient,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::Weight, Quantity::Activation, Quantity::Gradient];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Weight => "weight",
            Quantity::Activation => "activation",
            Quantity::Gradient => "gradient",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "weight" => Ok(Quantity::Weight),
            "activation" => Ok(Quantity::Activation),
            "gradient" => Ok(Quantity::Gradient),
            other => Err(format!("unknown quantity '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub step: usize,
    pub layer: usize,
    pub quantity: Quantity,
    pub stable_rank: f64,
}

/// Stable-rank time series keyed by `(layer, quantity)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankTrace {
    entries: Vec<RankEntry>,
}

impl RankTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends an entry; steps must not go backwards within a series.
    pub fn push(&mut self, entry: RankEntry) -> Result<()> {
        if let Some(prev) = self
            .entries
            .iter()
            .rev()
            .find(|e| e.layer == entry.layer && e.quantity == entry.quantity)
        {
            if entry.step < prev.step {
                return Err(Error::Config(format!(
                    "rank trace step {} precedes {} for layer {} {}",
                    entry.step, prev.step, entry.layer, entry.quantity
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Entries of one series in order.
    pub fn series(&self, layer: usize, quantity: Quantity) -> Vec<RankEntry> {
        self.entries
            .iter()
            .filter(|e| e.layer == layer && e.quantity == quantity)
            .copied()
            .collect()
    }

    /// The `(layer, quantity)` keys present, sorted.
    pub fn keys(&self) -> Vec<(usize, Quantity)> {
        let mut k: Vec<_> = self.entries.iter().map(|e| (e.layer, e.quantity)).collect();
        k.sort();
        k.dedup();
        k
    }

    /// Last recorded value of a series.
    pub fn final_value(&self, layer: usize, quantity: Quantity) -> Option<f64> {
        self.series(layer, quantity).last().map(|e| e.stable_rank)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(RANK_HEADER);
        s.push('\n');
        for e in &self.entries {
            writeln!(s, "{},{},{},{}", e.step, e.layer, e.quantity, e.stable_rank).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            None => return Err(Error::EmptyInput("rank trace has no header".into())),
            Some((i, h)) if h.trim() != RANK_HEADER => {
                return Err(Error::Parse {
                    line: i + 1,
                    detail: format!("expected header '{RANK_HEADER}', found '{}'", h.trim()),
                })
            }
            _ => {}
        }
        let mut trace = RankTrace::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                return Err(parse_err(line_no, format!("expected 4 fields, found {}", f.len())));
            }
            let step = f[0].parse().map_err(|_| parse_err(line_no, format!("bad step '{}'", f[0])))?;
            let layer = f[1].parse().map_err(|_| parse_err(line_no, format!("bad layer '{}'", f[1])))?;
            let quantity = f[2].parse().map_err(|e| parse_err(line_no, e))?;
            let stable_rank: f64 = f[3].parse().map_err(|_| parse_err(line_no, format!("bad value '{}'", f[3])))?;
            trace
                .push(RankEntry {
                    step,
                    layer,
                    quantity,
                    stable_rank,
                })
                .map_err(|e| parse_err(line_no, e.to_string()))?;
        }
        Ok(trace)
    }
}

fn parse_err(line: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        line,
        detail: detail.into(),
    }
}

fn stable_rank_or_zero(m: &Matrix) -> Result<f64> {
    if m.is_zero() {
        Ok(0.0)
    } else {
        stable_rank(m)
    }
}

/// Appends the stable rank of every hidden weight `W_l`, its input
/// activation `H_l` and its gradient `∇W_l`. All-zero matrices record 0.
pub fn record_ranks(net: &Network, cache: &ForwardCache, grads: &Gradients, step: usize, trace: &mut RankTrace) -> Result<()> {
    for l in net.hidden_layer_indices() {
        let values = [
            (Quantity::Weight, &net.layers[l].weight),
            (Quantity::Activation, &cache.inputs[l]),
            (Quantity::Gradient, &grads.weights[l]),
        ];
        for (quantity, m) in values {
            trace.push(RankEntry {
                step,
                layer: l,
                quantity,
                stable_rank: stable_rank_or_zero(m)?,
            })?;
        }
    }
    Ok(())
}

/// Scalar metrics logged at evaluation steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    rows: Vec<(usize, String, f64)>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: usize, metric: &str, value: f64) {
        self.rows.push((step, metric.to_string(), value));
    }

    pub fn rows(&self) -> &[(usize, String, f64)] {
        &self.rows
    }

    /// Most recent value of each metric.
    pub fn latest(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (_, m, v) in &self.rows {
            out.insert(m.clone(), *v);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for (step, m, v) in &self.rows {
            writeln!(s, "{step},{m},{v}").unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            None => return Err(Error::EmptyInput("metrics file has no header".into())),
            Some((i, h)) if h.trim() != METRICS_HEADER => {
                return Err(parse_err(i + 1, format!("expected header '{METRICS_HEADER}'")))
            }
            _ => {}
        }
        let mut log = MetricsLog::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 3 {
                return Err(parse_err(i + 1, format!("expected 3 fields, found {}", f.len())));
            }
            let step = f[0].parse().map_err(|_| parse_err(i + 1, format!("bad step '{}'", f[0])))?;
            let v = f[2].parse().map_err(|_| parse_err(i + 1, format!("bad value '{}'", f[2])))?;
            log.push(step, f[1], v);
        }
        Ok(log)
    }
}
