//! Per-(config, dialogues-trained) box statistics across seeds.
//!
//! Quartiles use linear interpolation between order statistics: the p-quantile
//! of n sorted values sits at position p·(n−1). Whiskers reach the most extreme
//! values within 1.5 IQR of the quartiles (never inside the box); anything
//! beyond is an outlier.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use super::run::{read_metrics, MetricsRow, METRICS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of already sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::Invalid("box statistics of no values".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Invalid("box statistics of NaN".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let fence = 1.5 * (q3 - q1);
    let (lo, hi) = (q1 - fence, q3 + fence);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    Ok(BoxStats {
        n: v.len(),
        q1,
        median,
        q3,
        whisker_low: inside.first().map_or(q1, |&x| x.min(q1)),
        whisker_high: inside.last().map_or(q3, |&x| x.max(q3)),
        outliers: v.into_iter().filter(|x| !(lo..=hi).contains(x)).collect(),
    })
}

/// One line of the aggregate CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub config: String,
    #[serde(rename = "dialogues-trained")]
    pub dialogues_trained: usize,
    pub metric: String,
    pub seeds: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    #[serde(rename = "whisker-low")]
    pub whisker_low: f64,
    #[serde(rename = "whisker-high")]
    pub whisker_high: f64,
    /// Semicolon-separated.
    pub outliers: String,
}

/// Groups rows by config and evaluation point.
///
/// Every (config, seed) must report the same evaluation points.
pub fn aggregate_rows(rows: &[MetricsRow]) -> Result<Vec<AggregateRow>> {
    if rows.is_empty() {
        return Err(Error::Invalid("nothing to aggregate".into()));
    }
    let mut schedules: BTreeMap<(&str, u64), BTreeSet<usize>> = BTreeMap::new();
    let mut groups: BTreeMap<(&str, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        if !schedules.entry((&r.config, r.seed)).or_default().insert(r.dialogues_trained) {
            return Err(Error::Invalid(format!(
                "duplicate row for config {} seed {} at {} dialogues",
                r.config, r.seed, r.dialogues_trained
            )));
        }
        groups.entry((&r.config, r.dialogues_trained)).or_default().push(r);
    }
    let mut iter = schedules.iter();
    let (first_key, first) = iter.next().expect("non-empty");
    for (key, s) in iter {
        if s != first {
            return Err(Error::Invalid(format!(
                "mismatched schedules: {}/seed {} has {:?}, {}/seed {} has {:?}",
                first_key.0, first_key.1, first, key.0, key.1, s
            )));
        }
    }
    let mut out = Vec::new();
    for ((config, dialogues), members) in groups {
        for (k, (metric, _)) in members[0].values().iter().enumerate() {
            let vals: Vec<f64> = members.iter().map(|r| r.values()[k].1).collect();
            let b = box_stats(&vals)?;
            out.push(AggregateRow {
                config: config.to_string(),
                dialogues_trained: dialogues,
                metric: metric.to_string(),
                seeds: b.n,
                q1: b.q1,
                median: b.median,
                q3: b.q3,
                whisker_low: b.whisker_low,
                whisker_high: b.whisker_high,
                outliers: b.outliers.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            });
        }
    }
    Ok(out)
}

/// Reads `metrics.csv` from each run directory (or a metrics file given directly).
pub fn aggregate(runs: &[PathBuf]) -> Result<Vec<AggregateRow>> {
    if runs.is_empty() {
        return Err(Error::Invalid("no run directories given".into()));
    }
    let mut rows = Vec::new();
    for run in runs {
        let path = if run.is_dir() { run.join(METRICS) } else { run.clone() };
        rows.extend(read_metrics(&path)?);
    }
    aggregate_rows(&rows)
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let err = |e: csv::Error| Error::Invalid(format!("writing aggregate: {e}"));
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing aggregate: {e}")))
}
