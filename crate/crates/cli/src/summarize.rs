use std::io::{Read, Write};

use serde::Serialize;

use crate::error::CliResult;
use crate::harness::CsvRow;

/// Per-cell aggregate of a results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub algo: String,
    pub k: usize,
    pub d: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub scale_eta: f64,
    #[serde(rename = "scale_T")]
    pub scale_t: f64,
    #[serde(rename = "scale_T1")]
    pub scale_t1: f64,
    pub trials: usize,
    pub gap_mean: f64,
    pub gap_q50: f64,
    pub gap_q90: f64,
    pub gap_max: f64,
    /// Fraction of trials with `gap <= eps`.
    pub success_frac: Option<f64>,
    pub samples_total_mean: f64,
    pub samples_total_q50: f64,
    pub samples_total_q90: f64,
    pub traj_norm_mean: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

type CellKey = (String, usize, usize, usize, Option<u64>, Option<u64>, u64, u64, u64);

fn key(row: &CsvRow) -> CellKey {
    (
        row.algo.to_string(),
        row.k,
        row.d,
        row.r,
        row.eps.map(f64::to_bits),
        row.delta.map(f64::to_bits),
        row.scale_eta.to_bits(),
        row.scale_t.to_bits(),
        row.scale_t1.to_bits(),
    )
}

/// Groups rows by configuration (in order of first appearance) and aggregates.
pub fn summarize_rows(rows: &[CsvRow]) -> Vec<CellSummary> {
    let mut groups: Vec<(CellKey, Vec<&CsvRow>)> = Vec::new();
    for row in rows {
        let k = key(row);
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, members)) => members.push(row),
            None => groups.push((k, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let first = members[0];
            let gaps = sorted(members.iter().map(|r| r.gap).collect());
            let totals = sorted(members.iter().map(|r| r.samples_total as f64).collect());
            let norms: Vec<f64> = members.iter().filter_map(|r| r.traj_norm).collect();
            CellSummary {
                algo: first.algo.to_string(),
                k: first.k,
                d: first.d,
                r: first.r,
                eps: first.eps,
                delta: first.delta,
                scale_eta: first.scale_eta,
                scale_t: first.scale_t,
                scale_t1: first.scale_t1,
                trials: members.len(),
                gap_mean: mean(&gaps),
                gap_q50: quantile(&gaps, 0.5),
                gap_q90: quantile(&gaps, 0.9),
                gap_max: *gaps.last().expect("nonempty group"),
                success_frac: first
                    .eps
                    .map(|e| gaps.iter().filter(|&&g| g <= e).count() as f64 / gaps.len() as f64),
                samples_total_mean: mean(&totals),
                samples_total_q50: quantile(&totals, 0.5),
                samples_total_q90: quantile(&totals, 0.9),
                traj_norm_mean: (!norms.is_empty()).then(|| mean(&norms)),
            }
        })
        .collect()
}

pub fn read_rows(input: impl Read) -> CliResult<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize()
        .collect::<Result<Vec<CsvRow>, _>>()
        .map_err(Into::into)
}

pub fn write_summary(summary: &[CellSummary], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
