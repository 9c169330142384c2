//! Location bootstrap. Each draw resamples whole locations with replacement,
//! keeping every location's instrument, evolutions and weight together.
//! Draw `i` uses its own ChaCha stream seeded with `seed ^ i`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{debiased_from_matrices, gmm_from_matrices, CrcOptions};
use crate::dataset::ShiftShareDataset;
use crate::error::{Error, Result};
use crate::instrument::BartikPanel;
use crate::par::map_indexed;
use crate::regress::{fit_bartik_matrices, FitSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootTarget {
    FsFe,
    RfFe,
    TslsFe,
    CrcAvgBeta,
    CrcAvgGamma,
    CrcRatio,
    DebiasedFs,
    DebiasedRf,
    DebiasedSs,
    /// Debiased 2SLS minus period-effects Bartik 2SLS.
    DebiasedMinusTsls,
}

impl BootTarget {
    pub const ALL: [BootTarget; 10] = [
        BootTarget::FsFe,
        BootTarget::RfFe,
        BootTarget::TslsFe,
        BootTarget::CrcAvgBeta,
        BootTarget::CrcAvgGamma,
        BootTarget::CrcRatio,
        BootTarget::DebiasedFs,
        BootTarget::DebiasedRf,
        BootTarget::DebiasedSs,
        BootTarget::DebiasedMinusTsls,
    ];

    fn needs_bartik(self) -> bool {
        matches!(
            self,
            BootTarget::FsFe | BootTarget::RfFe | BootTarget::TslsFe | BootTarget::DebiasedMinusTsls
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub targets: Vec<BootTarget>,
    /// Successful draws only, each with one value per target.
    pub draws: Vec<Vec<f64>>,
    pub point: Vec<f64>,
    pub se: Vec<f64>,
    pub seed: u64,
    pub n_requested: usize,
    pub n_failed: usize,
    pub failed_draws: Vec<usize>,
}

pub(crate) struct Sample {
    pub(crate) z: DMatrix<f64>,
    pub(crate) d: DMatrix<f64>,
    pub(crate) y: DMatrix<f64>,
    pub(crate) w: Option<Vec<f64>>,
}

impl Sample {
    fn rows(&self, idx: &[usize]) -> Sample {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(idx.len(), m.ncols(), |i, t| m[(idx[i], t)]);
        Sample {
            z: pick(&self.z),
            d: pick(&self.d),
            y: pick(&self.y),
            w: self.w.as_ref().map(|w| idx.iter().map(|&g| w[g]).collect()),
        }
    }

    pub(crate) fn evaluate(&self, targets: &[BootTarget], options: &CrcOptions) -> Result<Vec<f64>> {
        let tsls = if targets.iter().any(|t| t.needs_bartik()) {
            let panel = BartikPanel::from_matrix(self.z.clone(), self.w.clone());
            Some(fit_bartik_matrices(&self.d, &self.y, &panel, FitSpec::PeriodFe)?)
        } else {
            None
        };
        let (crc, deb) = if targets.iter().any(|t| !matches!(t, BootTarget::FsFe | BootTarget::RfFe | BootTarget::TslsFe)) {
            let crc = gmm_from_matrices(&self.z, &self.d, &self.y, options)?;
            let deb = debiased_from_matrices(&self.z, &self.d, &self.y, &crc.trends.mu_d, &crc.trends.mu_y)?;
            (Some(crc), Some(deb))
        } else {
            (None, None)
        };
        let (tsls, crc, deb) = (tsls.as_ref(), crc.as_ref(), deb.as_ref());
        Ok(targets
            .iter()
            .map(|t| match t {
                BootTarget::FsFe => tsls.unwrap().fs.slope,
                BootTarget::RfFe => tsls.unwrap().rf.slope,
                BootTarget::TslsFe => tsls.unwrap().beta_2sls,
                BootTarget::CrcAvgBeta => crc.unwrap().avg_beta,
                BootTarget::CrcAvgGamma => crc.unwrap().avg_gamma,
                BootTarget::CrcRatio => crc.unwrap().ratio,
                BootTarget::DebiasedFs => deb.unwrap().fs_debiased,
                BootTarget::DebiasedRf => deb.unwrap().rf_debiased,
                BootTarget::DebiasedSs => deb.unwrap().ss_debiased,
                BootTarget::DebiasedMinusTsls => deb.unwrap().ss_debiased - tsls.unwrap().beta_2sls,
            })
            .collect())
    }
}

/// Resample locations `n_draws` times and recompute `targets`. Draws whose
/// estimators fail are recorded and left out of the standard errors.
pub fn bootstrap(
    ds: &ShiftShareDataset,
    bartik: &BartikPanel,
    targets: &[BootTarget],
    n_draws: usize,
    seed: u64,
    options: &CrcOptions,
) -> Result<BootstrapResult> {
    if n_draws < 2 {
        return Err(Error::InvalidConfig("bootstrap needs at least 2 draws".into()));
    }
    if targets.is_empty() {
        return Err(Error::InvalidConfig("no bootstrap targets selected".into()));
    }
    let sample = Sample {
        z: bartik.z.clone(),
        d: ds.d_evol.clone(),
        y: ds.y_evol.clone(),
        w: bartik.location_weights.clone(),
    };
    let point = sample.evaluate(targets, options)?;
    let g_n = bartik.n_locations();
    let results = map_indexed(n_draws, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
        let idx: Vec<usize> = (0..g_n).map(|_| rng.random_range(0..g_n)).collect();
        sample.rows(&idx).evaluate(targets, options)
    });

    let mut draws = Vec::with_capacity(n_draws);
    let mut failed_draws = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => draws.push(v),
            Err(_) => failed_draws.push(i),
        }
    }
    let se = (0..targets.len())
        .map(|j| sample_sd(draws.iter().map(|d| d[j])))
        .collect();
    Ok(BootstrapResult {
        targets: targets.to_vec(),
        draws,
        point,
        se,
        seed,
        n_requested: n_draws,
        n_failed: failed_draws.len(),
        failed_draws,
    })
}

/// Welford standard deviation with the `n − 1` divisor; NaN below two values.
pub(crate) fn sample_sd(values: impl Iterator<Item = f64>) -> f64 {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in values {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    if n < 2 {
        f64::NAN
    } else {
        (m2 / (n - 1) as f64).sqrt()
    }
}
