use super::config::ExperimentConfig;
use super::report::{aggregate, RmseReport};
use super::trial::{calibrate, run_trial_at, TrialResult};
use super::HarnessError;
use crate::exec::{map_indexed, Exec};

/// All trials at every sweep point, indexed `[point][trial]`. Trials are the
/// unit of parallel work; each one runs its own loops serially, so the
/// results do not depend on the execution policy.
pub fn run_trials(cfg: &ExperimentConfig, exec: Exec) -> Result<Vec<Vec<TrialResult>>, HarnessError> {
    cfg.validate()?;
    let axis = cfg.sweep.axis;
    let values = &cfg.sweep.points;
    let points: Vec<ExperimentConfig> = values.iter().map(|&v| cfg.at(axis, v)).collect();
    let calibrations = map_indexed(points.len(), exec, |i| calibrate(&points[i]))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let n = cfg.trials;
    let flat = map_indexed(points.len() * n, exec, |i| {
        let p = i / n;
        run_trial_at(&points[p], values[p], (i % n) as u64, &calibrations[p], Exec::Serial)
    });
    let mut out: Vec<Vec<TrialResult>> = Vec::with_capacity(points.len());
    let mut it = flat.into_iter();
    for _ in 0..points.len() {
        out.push(it.by_ref().take(n).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(out)
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RmseReport, HarnessError> {
    run_sweep_with(cfg, Exec::default())
}

pub fn run_sweep_with(cfg: &ExperimentConfig, exec: Exec) -> Result<RmseReport, HarnessError> {
    let results = run_trials(cfg, exec)?;
    Ok(report_from(cfg, &results))
}

pub fn report_from(cfg: &ExperimentConfig, results: &[Vec<TrialResult>]) -> RmseReport {
    let mut report = RmseReport::empty(cfg.sweep.axis);
    for (value, trials) in cfg.sweep.points.iter().zip(results) {
        let (rows, misses) = aggregate(cfg.sweep.axis, *value, trials);
        report.rows.extend(rows);
        report.misses.extend(misses);
    }
    report
}
