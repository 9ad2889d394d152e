//! Pooled RMSE tables and their CSV form.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Method, SweepAxis};
use super::trial::{Quantity, TrialResult};
use super::HarnessError;

pub const RMSE_COLUMNS: [&str; 7] = [
    "sweep_axis",
    "sweep_value",
    "method",
    "quantity",
    "rmse",
    "sqrt_crb",
    "trials",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub method: Method,
    pub quantity: Quantity,
    pub rmse: f64,
    /// Square root of the pooled mean CRB variance, when every pooled error
    /// has one.
    pub sqrt_crb: Option<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissRow {
    pub sweep_value: f64,
    pub method: Method,
    pub quantity: Quantity,
    pub misses: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub axis: SweepAxis,
    pub rows: Vec<RmseRow>,
    pub misses: Vec<MissRow>,
}

impl RmseReport {
    pub fn empty(axis: SweepAxis) -> Self {
        Self {
            axis,
            rows: Vec::new(),
            misses: Vec::new(),
        }
    }

    pub fn row(&self, sweep_value: f64, method: Method, quantity: Quantity) -> Option<&RmseRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.method == method && r.quantity == quantity)
    }
}

/// `√(mean e²)`.
pub fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

#[derive(Default)]
struct Pool {
    sum_sq: f64,
    count: usize,
    crb_sum: f64,
    crb_count: usize,
}

/// Pools the squared errors of all trials and targets at one sweep point.
pub fn aggregate(axis: SweepAxis, sweep_value: f64, results: &[TrialResult]) -> (Vec<RmseRow>, Vec<MissRow>) {
    let mut pools: BTreeMap<(Method, Quantity), Pool> = BTreeMap::new();
    let mut misses: BTreeMap<(Method, Quantity), usize> = BTreeMap::new();
    for r in results {
        for s in &r.samples {
            let p = pools.entry((s.method, s.quantity)).or_default();
            p.sum_sq += s.error * s.error;
            p.count += 1;
            if let Some(v) = s.crb_var {
                p.crb_sum += v;
                p.crb_count += 1;
            }
        }
        for m in &r.misses {
            *misses.entry((m.method, m.quantity)).or_default() += 1;
        }
    }
    let trials = results.len();
    let rows = pools
        .into_iter()
        .map(|((method, quantity), p)| RmseRow {
            sweep_axis: axis,
            sweep_value,
            method,
            quantity,
            rmse: (p.sum_sq / p.count as f64).sqrt(),
            sqrt_crb: (p.crb_count == p.count).then(|| (p.crb_sum / p.crb_count as f64).sqrt()),
            trials,
        })
        .collect();
    let misses = misses
        .into_iter()
        .map(|((method, quantity), n)| MissRow {
            sweep_value,
            method,
            quantity,
            misses: n,
            trials,
        })
        .collect();
    (rows, misses)
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e))
}

pub fn write_csv<W: Write>(report: &RmseReport, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RMSE_COLUMNS).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            r.sweep_axis.to_string(),
            format!("{:e}", r.sweep_value),
            r.method.to_string(),
            r.quantity.to_string(),
            format!("{:e}", r.rmse),
            r.sqrt_crb.map(|v| format!("{v:e}")).unwrap_or_default(),
            r.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(report: &RmseReport, path: &Path) -> Result<(), HarnessError> {
    write_csv(report, std::fs::File::create(path)?)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RmseRow>, HarnessError> {
    let mut rd = csv::Reader::from_reader(input);
    let parse_err = |m: String| HarnessError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, m));
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != RMSE_COLUMNS {
        return Err(parse_err(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| parse_err(format!("column {i}: {e}")));
        rows.push(RmseRow {
            sweep_axis: rec[0].parse().map_err(parse_err)?,
            sweep_value: num(1)?,
            method: rec[2].parse().map_err(parse_err)?,
            quantity: rec[3].parse().map_err(parse_err)?,
            rmse: num(4)?,
            sqrt_crb: if rec[5].is_empty() { None } else { Some(num(5)?) },
            trials: rec[6].parse().map_err(|e| parse_err(format!("trials: {e}")))?,
        });
    }
    Ok(rows)
}

pub fn write_misses_csv<W: Write>(report: &RmseReport, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep_axis", "sweep_value", "method", "quantity", "misses", "trials"])
        .map_err(csv_err)?;
    for m in &report.misses {
        w.write_record([
            report.axis.to_string(),
            format!("{:e}", m.sweep_value),
            m.method.to_string(),
            m.quantity.to_string(),
            m.misses.to_string(),
            m.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
