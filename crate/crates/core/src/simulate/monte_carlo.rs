//! Monte Carlo over simulated panels. Replication `r` draws its panel with
//! seed `seed ^ r`, so reports do not depend on the number of threads.

use serde::Serialize;

use super::{simulate, SimConfig, SimTruth};
use crate::crc::bootstrap::{sample_sd, BootTarget, Sample};
use crate::crc::CrcOptions;
use crate::error::{Error, Result};
use crate::instrument::build_bartik;
use crate::par::map_indexed;

/// Estimand each estimator is compared with, computed from the replication's truth:
/// first-stage targets use `(1/G)Σβ_g`, reduced-form targets `(1/G)Σβ_gα_g`,
/// second-stage targets `Σ_g (β_g/Σβ) α_g`.
pub fn estimand(target: BootTarget, truth: &SimTruth) -> f64 {
    match target {
        BootTarget::FsFe | BootTarget::CrcAvgBeta | BootTarget::DebiasedFs => truth.avg_beta(),
        BootTarget::RfFe | BootTarget::CrcAvgGamma | BootTarget::DebiasedRf => truth.avg_gamma(),
        BootTarget::TslsFe | BootTarget::CrcRatio | BootTarget::DebiasedSs => truth.ratio_estimand(),
        BootTarget::DebiasedMinusTsls => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimator {
    pub target: BootTarget,
    pub mean: f64,
    pub mean_estimand: f64,
    /// Mean of `estimate − estimand`.
    pub bias: f64,
    /// Standard deviation of `estimate − estimand` over `√R`.
    pub mc_se: f64,
    /// `bias / mc_se`.
    pub z_score: f64,
    pub draws: Vec<f64>,
    pub estimands: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub config: SimConfig,
    pub reps: usize,
    pub seed: u64,
    pub n_failed: usize,
    pub failed_reps: Vec<usize>,
    pub estimators: Vec<McEstimator>,
}

pub fn monte_carlo(
    config: &SimConfig,
    reps: usize,
    seed: u64,
    targets: &[BootTarget],
    options: &CrcOptions,
) -> Result<McReport> {
    if reps < 2 {
        return Err(Error::InvalidConfig("monte carlo needs at least 2 replications".into()));
    }
    if targets.is_empty() {
        return Err(Error::InvalidConfig("no estimators selected".into()));
    }
    config.validate()?;
    let runs = map_indexed(reps, |r| -> Result<(Vec<f64>, Vec<f64>)> {
        let (ds, truth) = simulate(config, seed ^ r as u64)?;
        let bartik = build_bartik(&ds, config.location_weights)?;
        let sample = Sample {
            z: bartik.z,
            d: ds.d_evol,
            y: ds.y_evol,
            w: bartik.location_weights,
        };
        let est = sample.evaluate(targets, options)?;
        let tru = targets.iter().map(|t| estimand(*t, &truth)).collect();
        Ok((est, tru))
    });
    let mut ok = Vec::new();
    let mut failed_reps = Vec::new();
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(v) => ok.push(v),
            Err(Error::InvalidConfig(m)) => return Err(Error::InvalidConfig(m)),
            Err(_) => failed_reps.push(r),
        }
    }
    let estimators = targets
        .iter()
        .enumerate()
        .map(|(j, &target)| {
            let draws: Vec<f64> = ok.iter().map(|(e, _)| e[j]).collect();
            let estimands: Vec<f64> = ok.iter().map(|(_, t)| t[j]).collect();
            let n = draws.len() as f64;
            let diffs = draws.iter().zip(&estimands).map(|(e, t)| e - t);
            let bias = diffs.clone().sum::<f64>() / n;
            let mc_se = sample_sd(diffs) / n.sqrt();
            McEstimator {
                target,
                mean: draws.iter().sum::<f64>() / n,
                mean_estimand: estimands.iter().sum::<f64>() / n,
                bias,
                mc_se,
                z_score: bias / mc_se,
                draws,
                estimands,
            }
        })
        .collect();
    Ok(McReport {
        config: config.clone(),
        reps,
        seed,
        n_failed: failed_reps.len(),
        failed_reps,
        estimators,
    })
}
