use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::trial::{run_trial, Method, TrialConfig, TrialMetrics, Variant};
use crate::rigidbody::RobotModel;
use crate::Result;

#[derive(Debug, Clone)]
pub struct AblationConfig {
    pub trials: usize,
    pub first_seed: u64,
    pub variants: Vec<Variant>,
    /// Trial settings; the variant and seed are overwritten per trial.
    pub template: TrialConfig,
    /// Run trials on the rayon pool. Per-step timings are then measured
    /// under contention.
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub method: String,
    pub variant: String,
    pub k: usize,
    pub eta: Option<f64>,
    pub trials: usize,
    pub solve_time_ms_mean: f64,
    pub solve_time_ms_std: f64,
    pub error_mm_mean: f64,
    pub error_mm_std: f64,
    pub final_error_mm_mean: f64,
    pub final_error_mm_std: f64,
    pub final_error_mm_median: f64,
    pub collisions: usize,
    pub singularities: usize,
    pub stagnations: usize,
    pub certificate_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// Per-trial metrics grouped by variant, seeds ascending.
    pub metrics: Vec<TrialMetrics>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregate per-trial metrics of one variant.
pub fn summarize(variant: &Variant, metrics: &[TrialMetrics]) -> AblationRow {
    let pick = |f: fn(&TrialMetrics) -> f64| metrics.iter().map(f).collect::<Vec<_>>();
    let time = pick(|m| m.solve_time_per_step * 1e3);
    let err = pick(|m| m.mean_error * 1e3);
    let fin = pick(|m| m.final_error * 1e3);
    let (solve_time_ms_mean, solve_time_ms_std) = mean_std(&time);
    let (error_mm_mean, error_mm_std) = mean_std(&err);
    let (final_error_mm_mean, final_error_mm_std) = mean_std(&fin);
    AblationRow {
        method: variant.method_name().to_string(),
        variant: variant.to_string(),
        k: variant.k,
        eta: variant.eta.filter(|_| variant.certificate),
        trials: metrics.len(),
        solve_time_ms_mean,
        solve_time_ms_std,
        error_mm_mean,
        error_mm_std,
        final_error_mm_mean,
        final_error_mm_std,
        final_error_mm_median: median(&fin),
        collisions: metrics.iter().filter(|m| m.self_collision).count(),
        singularities: metrics.iter().filter(|m| m.singularity).count(),
        stagnations: metrics.iter().filter(|m| m.stagnation).count(),
        certificate_violations: metrics.iter().map(|m| m.certificate_violations).sum(),
    }
}

pub fn run_ablation(model: &RobotModel, config: &AblationConfig) -> Result<AblationReport> {
    let jobs: Vec<(usize, u64)> = (0..config.variants.len())
        .flat_map(|v| (0..config.trials as u64).map(move |s| (v, config.first_seed + s)))
        .collect();
    let run = |&(v, seed): &(usize, u64)| {
        let mut cfg = config.template.clone();
        cfg.variant = config.variants[v];
        cfg.seed = seed;
        run_trial(model, &cfg)
    };
    let metrics: Vec<TrialMetrics> = if config.parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    let rows = config
        .variants
        .iter()
        .enumerate()
        .map(|(v, variant)| {
            summarize(
                variant,
                &metrics[v * config.trials..(v + 1) * config.trials],
            )
        })
        .collect();
    Ok(AblationReport { rows, metrics })
}

impl AblationReport {
    /// One CSV row per trial.
    pub fn write_metrics_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for m in &self.metrics {
            w.serialize(m)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Markdown table: method, batch size, η, solve time, mean error,
    /// final error, collision, singularity and stagnation counts.
    pub fn markdown(&self) -> String {
        let mut out = String::from(
            "| Method | Batch K | η | Solve time [ms] | Mean error [mm] | Final error [mm] | Self collision | Singularity | Stagnation |\n\
             |---|---|---|---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let eta = r.eta.map_or("--".to_string(), |e| format!("{e}"));
            out.push_str(&format!(
                "| {} | {} | {} | {:.2} ± {:.2} | {:.2} ± {:.2} | {:.2} ± {:.2} | {}/{} | {}/{} | {}/{} |\n",
                r.method,
                r.k,
                eta,
                r.solve_time_ms_mean,
                r.solve_time_ms_std,
                r.error_mm_mean,
                r.error_mm_std,
                r.final_error_mm_mean,
                r.final_error_mm_std,
                r.collisions,
                r.trials,
                r.singularities,
                r.trials,
                r.stagnations,
                r.trials,
            ));
        }
        out
    }
}

/// Variant set of the desk-scale ablation.
pub fn default_variants() -> Vec<Variant> {
    vec![
        Variant::global_sqp(),
        Variant::monolithic_qp(),
        Variant::distributed_qp(),
        Variant::parallel_dist(64, None),
        Variant::parallel_dist(256, None),
        Variant::parallel_mono(64, 0.0005),
        Variant::parallel_mono(256, 0.0005),
        Variant::parallel_dist(64, Some(0.0005)),
        Variant::parallel_dist(256, Some(0.0005)),
        Variant::parallel_dist(256, Some(0.005)),
        Variant::parallel_dist(256, Some(0.001)),
    ]
}

pub fn is_differential(v: &Variant) -> bool {
    v.method != Method::GlobalSqp
}
