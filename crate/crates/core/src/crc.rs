//! Correlated-random-coefficients estimator.
//!
//! Within each location `g`, `ΔD_g = μ^D + β_g ΔZ_g + ε_g` over the `P`
//! evolution periods. Projecting with `M_g = I − ΔZ_g ΔZ_g'/ΔZ_g'ΔZ_g`
//! removes the location's own slope, so the common trends solve
//! `(Σ_g M_g) μ = Σ_g M_g ΔD_g`. The per-location slopes are then
//! `ΔZ_g'(ΔD_g − μ)/ΔZ_g'ΔZ_g` and their mean is the average effect.
//! Stacking the two trend blocks and the two averages gives a just-identified
//! linear GMM system whose sandwich variance is reported.
//!
//! Location weights are ignored here: every location counts once.

pub mod bootstrap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::ShiftShareDataset;
use crate::error::{Error, Result};
use crate::instrument::BartikPanel;
use crate::linalg::{lstsq, solve_psd};

/// Relative eigenvalue floor for `Σ_g M_g`.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Treatment of locations whose instrument vector is (almost) zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum NearZeroPolicy {
    /// Refuse with `DegenerateInstrument`.
    Error,
    /// Leave those locations out and report them.
    Drop,
    /// Floor every `ΔZ_g'ΔZ_g` at this quantile of its cross-location distribution.
    Winsorize { quantile: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrcOptions {
    pub near_zero: NearZeroPolicy,
    /// `‖ΔZ_g‖²` below this counts as near zero.
    pub tol: f64,
    /// Also fit the homogeneous-first-stage, `α_{g,t} = α_g + λ_t` variant.
    pub additive_time: bool,
}

impl Default for CrcOptions {
    fn default() -> Self {
        CrcOptions {
            near_zero: NearZeroPolicy::Error,
            tol: 1e-10,
            additive_time: false,
        }
    }
}

/// `I − z z'/z'z`; the identity when `z = 0`.
pub fn annihilator(z: &DVector<f64>) -> DMatrix<f64> {
    annihilator_with(z, z.norm_squared())
}

fn annihilator_with(z: &DVector<f64>, denom: f64) -> DMatrix<f64> {
    let p = z.len();
    if denom == 0.0 {
        return DMatrix::identity(p, p);
    }
    DMatrix::identity(p, p) - z * z.transpose() / denom
}

/// Per-location projectors after applying the near-zero policy.
#[derive(Debug, Clone)]
pub struct Annihilators {
    /// Locations kept, in order.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// One matrix per kept location.
    pub m: Vec<DMatrix<f64>>,
    /// `ΔZ_g'ΔZ_g` after flooring, per kept location.
    pub denom: Vec<f64>,
}

pub fn annihilators(z: &DMatrix<f64>, options: &CrcOptions) -> Result<Annihilators> {
    let norms: Vec<f64> = z.row_iter().map(|r| r.norm_squared()).collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut floor = 0.0;
    match options.near_zero {
        NearZeroPolicy::Error => {
            if let Some(g) = norms.iter().position(|n| *n < options.tol) {
                return Err(Error::DegenerateInstrument { location: g });
            }
            kept.extend(0..norms.len());
        }
        NearZeroPolicy::Drop => {
            for (g, n) in norms.iter().enumerate() {
                if *n < options.tol {
                    dropped.push(g);
                } else {
                    kept.push(g);
                }
            }
        }
        NearZeroPolicy::Winsorize { quantile } => {
            if !(0.0..=1.0).contains(&quantile) {
                return Err(Error::InvalidConfig(format!("winsorize quantile {quantile} outside [0, 1]")));
            }
            floor = quantile_of(&norms, quantile);
            kept.extend(0..norms.len());
        }
    }
    let denom: Vec<f64> = kept.iter().map(|&g| norms[g].max(floor)).collect();
    let m = kept
        .iter()
        .zip(&denom)
        .map(|(&g, &d)| annihilator_with(&z.row(g).transpose(), d))
        .collect();
    Ok(Annihilators { kept, dropped, m, denom })
}

/// Linear-interpolation sample quantile.
fn quantile_of(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return 0.0;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendEstimates {
    pub mu_d: Vec<f64>,
    pub mu_y: Vec<f64>,
    /// `2P × 2P` block of the GMM variance for `(μ^D, μ^Y)`.
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub vcov: DMatrix<f64>,
    /// Locations left out under the `drop` policy.
    pub dropped: Vec<usize>,
}

/// Homogeneous first stage with `α_{g,t} = α_g + λ_t`, normalized `λ_1 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditiveTimeEstimates {
    pub beta: f64,
    pub mu_y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub avg_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrcEstimates {
    pub avg_beta: f64,
    pub avg_gamma: f64,
    pub ratio: f64,
    pub se_avg_beta: f64,
    pub se_avg_gamma: f64,
    pub se_ratio: f64,
    pub trends: TrendEstimates,
    /// `2(P+1) × 2(P+1)` variance of `(μ^D, μ^Y, avg_beta, avg_gamma)`.
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub vcov_full: DMatrix<f64>,
    pub n_locations_used: usize,
    pub additive_time: Option<AdditiveTimeEstimates>,
}

fn check_inputs(z: &DMatrix<f64>, d: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if d.shape() != z.shape() || y.shape() != z.shape() {
        return Err(Error::DimensionMismatch(format!(
            "instrument {:?}, treatment {:?}, outcome {:?}",
            z.shape(),
            d.shape(),
            y.shape()
        )));
    }
    if z.ncols() < 2 {
        return Err(Error::TooFewPeriods { evolutions: z.ncols() });
    }
    Ok(())
}

fn solve_trend(ann: &Annihilators, v: &DMatrix<f64>) -> Result<DVector<f64>> {
    let p = v.ncols();
    let mut a = DMatrix::zeros(p, p);
    let mut rhs = DMatrix::zeros(p, 1);
    for (m, &g) in ann.m.iter().zip(&ann.kept) {
        a += m;
        rhs += m * v.row(g).transpose();
    }
    let mu = solve_psd(&a, &rhs, SINGULAR_TOL).ok_or(Error::SingularDesign)?;
    Ok(mu.column(0).into_owned())
}

/// Common trends `μ̂^D`, `μ̂^Y` with their GMM variance block.
pub fn estimate_trends(
    bartik: &BartikPanel,
    d_evol: &DMatrix<f64>,
    y_evol: &DMatrix<f64>,
    options: &CrcOptions,
) -> Result<TrendEstimates> {
    Ok(gmm_from_matrices(&bartik.z, d_evol, y_evol, options)?.trends)
}

/// Average effects given trends, with the GMM sandwich evaluated at those trends.
pub fn estimate_avg_effects(
    bartik: &BartikPanel,
    d_evol: &DMatrix<f64>,
    y_evol: &DMatrix<f64>,
    trends: &TrendEstimates,
    options: &CrcOptions,
) -> Result<CrcEstimates> {
    check_inputs(&bartik.z, d_evol, y_evol)?;
    let ann = annihilators(&bartik.z, options)?;
    let mu_d = DVector::from_row_slice(&trends.mu_d);
    let mu_y = DVector::from_row_slice(&trends.mu_y);
    finish(&bartik.z, d_evol, y_evol, &ann, mu_d, mu_y, options)
}

/// Full just-identified GMM fit: trends, average effects, ratio and variance.
pub fn gmm_fit(ds: &ShiftShareDataset, bartik: &BartikPanel, options: &CrcOptions) -> Result<CrcEstimates> {
    gmm_from_matrices(&bartik.z, &ds.d_evol, &ds.y_evol, options)
}

pub(crate) fn gmm_from_matrices(
    z: &DMatrix<f64>,
    d: &DMatrix<f64>,
    y: &DMatrix<f64>,
    options: &CrcOptions,
) -> Result<CrcEstimates> {
    check_inputs(z, d, y)?;
    let ann = annihilators(z, options)?;
    let mu_d = solve_trend(&ann, d)?;
    let mu_y = solve_trend(&ann, y)?;
    finish(z, d, y, &ann, mu_d, mu_y, options)
}

fn finish(
    z: &DMatrix<f64>,
    d: &DMatrix<f64>,
    y: &DMatrix<f64>,
    ann: &Annihilators,
    mu_d: DVector<f64>,
    mu_y: DVector<f64>,
    options: &CrcOptions,
) -> Result<CrcEstimates> {
    let p = z.ncols();
    let n = ann.kept.len();
    if n == 0 {
        return Err(Error::SingularDesign);
    }
    let nf = n as f64;
    let k = 2 * p + 2;

    let mut avg_beta = 0.0;
    let mut avg_gamma = 0.0;
    let mut slopes = Vec::with_capacity(n);
    for (&g, &den) in ann.kept.iter().zip(&ann.denom) {
        let zg = z.row(g).transpose();
        let bg = if den > 0.0 { zg.dot(&(d.row(g).transpose() - &mu_d)) / den } else { 0.0 };
        let cg = if den > 0.0 { zg.dot(&(y.row(g).transpose() - &mu_y)) / den } else { 0.0 };
        avg_beta += bg / nf;
        avg_gamma += cg / nf;
        slopes.push((bg, cg));
    }
    if avg_beta.abs() < crate::regress::WEAK_DENOMINATOR_TOL {
        return Err(Error::WeakDenominator { value: avg_beta });
    }
    let ratio = avg_gamma / avg_beta;

    // Jacobian (averaged) and outer product of per-location moments.
    let mut jac = DMatrix::zeros(k, k);
    let mut omega = DMatrix::zeros(k, k);
    for (i, (&g, &den)) in ann.kept.iter().zip(&ann.denom).enumerate() {
        let m = &ann.m[i];
        let zg = z.row(g).transpose();
        let zs = if den > 0.0 { &zg / den } else { DVector::zeros(p) };
        let mut moment = DVector::zeros(k);
        moment
            .rows_mut(0, p)
            .copy_from(&(m * (d.row(g).transpose() - &mu_d)));
        moment
            .rows_mut(p, p)
            .copy_from(&(m * (y.row(g).transpose() - &mu_y)));
        moment[2 * p] = slopes[i].0 - avg_beta;
        moment[2 * p + 1] = slopes[i].1 - avg_gamma;
        omega += &moment * moment.transpose();

        let mut blk = jac.view_mut((0, 0), (p, p));
        blk -= m;
        let mut blk = jac.view_mut((p, p), (p, p));
        blk -= m;
        for t in 0..p {
            jac[(2 * p, t)] -= zs[t];
            jac[(2 * p + 1, p + t)] -= zs[t];
        }
    }
    jac /= nf;
    omega /= nf;
    for j in 2 * p..k {
        jac[(j, j)] = -1.0;
    }
    let jinv = jac.try_inverse().ok_or(Error::SingularDesign)?;
    let mut vcov_full = &jinv * omega * jinv.transpose() / nf;
    vcov_full = (&vcov_full + vcov_full.transpose()) * 0.5;

    let (ib, ic) = (2 * p, 2 * p + 1);
    let grad_b = -avg_gamma / avg_beta.powi(2);
    let grad_c = 1.0 / avg_beta;
    let var_ratio = grad_b * grad_b * vcov_full[(ib, ib)]
        + 2.0 * grad_b * grad_c * vcov_full[(ib, ic)]
        + grad_c * grad_c * vcov_full[(ic, ic)];

    let additive_time = if options.additive_time {
        Some(additive_time_fit(z, y, ann, avg_beta)?)
    } else {
        None
    };

    Ok(CrcEstimates {
        avg_beta,
        avg_gamma,
        ratio,
        se_avg_beta: vcov_full[(ib, ib)].max(0.0).sqrt(),
        se_avg_gamma: vcov_full[(ic, ic)].max(0.0).sqrt(),
        se_ratio: var_ratio.max(0.0).sqrt(),
        trends: TrendEstimates {
            mu_d: mu_d.iter().copied().collect(),
            mu_y: mu_y.iter().copied().collect(),
            vcov: vcov_full.view((0, 0), (2 * p, 2 * p)).into_owned(),
            dropped: ann.dropped.clone(),
        },
        vcov_full,
        n_locations_used: n,
        additive_time,
    })
}

/// Stack `M_g ΔY_g` on `[M_g, M_g diag(ΔZ_g)]` (first `θ` column dropped)
/// and read off `μ^Y` and `θ_t = β λ_t`.
fn additive_time_fit(z: &DMatrix<f64>, y: &DMatrix<f64>, ann: &Annihilators, beta: f64) -> Result<AdditiveTimeEstimates> {
    let p = z.ncols();
    let n = ann.kept.len();
    let cols = 2 * p - 1;
    let mut x = DMatrix::zeros(n * p, cols);
    let mut rhs = DVector::zeros(n * p);
    for (i, &g) in ann.kept.iter().enumerate() {
        let m = &ann.m[i];
        let mz = m * DMatrix::from_diagonal(&z.row(g).transpose());
        x.view_mut((i * p, 0), (p, p)).copy_from(m);
        x.view_mut((i * p, p), (p, p - 1)).copy_from(&mz.columns(1, p - 1));
        rhs.rows_mut(i * p, p).copy_from(&(m * y.row(g).transpose()));
    }
    let fit = lstsq(&x, &rhs, None).map_err(|_| Error::SingularDesign)?;
    let mu_y: DVector<f64> = fit.coef.rows(0, p).into_owned();
    let mut theta = vec![0.0; p];
    for t in 1..p {
        theta[t] = fit.coef[p + t - 1];
    }
    let mut avg_gamma = 0.0;
    for (&g, &den) in ann.kept.iter().zip(&ann.denom) {
        if den > 0.0 {
            let zg = z.row(g);
            let resid: f64 = (0..p)
                .map(|t| zg[t] * (y[(g, t)] - mu_y[t] - zg[t] * theta[t]))
                .sum();
            avg_gamma += resid / den / n as f64;
        }
    }
    Ok(AdditiveTimeEstimates {
        beta,
        mu_y: mu_y.iter().copied().collect(),
        lambda: theta.iter().map(|t| t / beta).collect(),
        avg_alpha: avg_gamma / beta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebiasedEstimates {
    pub fs_debiased: f64,
    pub rf_debiased: f64,
    pub ss_debiased: f64,
    pub fs_nc: f64,
    pub rf_nc: f64,
    pub bias_d: f64,
    pub bias_y: f64,
    /// Bootstrap SEs of `(fs, rf, ss)` when a bootstrap was run.
    pub se_bootstrap: Vec<f64>,
    pub n_draws: usize,
}

/// No-constant Bartik slopes minus their trend bias `Σ_t μ_t Σ_g ΔZ_{g,t} / Σ ΔZ²`.
pub fn debiased_estimators(
    ds: &ShiftShareDataset,
    bartik: &BartikPanel,
    trends: &TrendEstimates,
) -> Result<DebiasedEstimates> {
    debiased_from_matrices(&bartik.z, &ds.d_evol, &ds.y_evol, &trends.mu_d, &trends.mu_y)
}

pub(crate) fn debiased_from_matrices(
    z: &DMatrix<f64>,
    d: &DMatrix<f64>,
    y: &DMatrix<f64>,
    mu_d: &[f64],
    mu_y: &[f64],
) -> Result<DebiasedEstimates> {
    check_inputs(z, d, y)?;
    let zz = z.norm_squared();
    if zz == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let fs_nc = z.dot(d) / zz;
    let rf_nc = z.dot(y) / zz;
    let col_sums: Vec<f64> = z.column_iter().map(|c| c.sum() / zz).collect();
    let bias = |mu: &[f64]| col_sums.iter().zip(mu).map(|(b, m)| b * m).sum::<f64>();
    let (bias_d, bias_y) = (bias(mu_d), bias(mu_y));
    let fs = fs_nc - bias_d;
    let rf = rf_nc - bias_y;
    if fs.abs() < crate::regress::WEAK_DENOMINATOR_TOL {
        return Err(Error::WeakDenominator { value: fs });
    }
    Ok(DebiasedEstimates {
        fs_debiased: fs,
        rf_debiased: rf,
        ss_debiased: rf / fs,
        fs_nc,
        rf_nc,
        bias_d,
        bias_y,
        se_bootstrap: Vec::new(),
        n_draws: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn projector_examples() {
        let m = annihilator(&DVector::from_row_slice(&[1.0, 0.0]));
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        let z = DVector::from_row_slice(&[1.0, 2.0]);
        let m = annihilator(&z);
        let want = DMatrix::from_row_slice(2, 2, &[0.8, -0.4, -0.4, 0.2]);
        assert!((&m - want).abs().max() < 1e-15);
        assert!((m * z).norm() < 1e-15);
    }

    #[test]
    fn two_location_exact_recovery() {
        let z = panel(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let beta = [3.0, 1.0];
        let d = DMatrix::from_fn(2, 2, |g, t| 0.5 + beta[g] * z[(g, t)]);
        let y = d.map(|v| 0.5 * v);
        let est = gmm_from_matrices(&z, &d, &y, &CrcOptions::default()).unwrap();
        assert!((est.trends.mu_d[0] - 0.5).abs() < 1e-12);
        assert!((est.trends.mu_d[1] - 0.5).abs() < 1e-12);
        assert!((est.avg_beta - 2.0).abs() < 1e-12);
        assert!((est.ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_instruments_are_singular() {
        let z = panel(&[&[1.0, 2.0], &[2.0, 4.0], &[-1.0, -2.0]]);
        let d = DMatrix::from_element(3, 2, 1.0);
        let err = gmm_from_matrices(&z, &d, &d, &CrcOptions::default());
        assert!(matches!(err, Err(Error::SingularDesign)));
    }

    #[test]
    fn one_period_is_too_few() {
        let z = panel(&[&[1.0], &[2.0]]);
        let err = gmm_from_matrices(&z, &z, &z, &CrcOptions::default());
        assert!(matches!(err, Err(Error::TooFewPeriods { evolutions: 1 })));
    }

    #[test]
    fn near_zero_policies() {
        let z = panel(&[&[1.0, 2.0], &[2.0, 1.0], &[0.0, 0.0], &[1.0, -1.0]]);
        let d = DMatrix::from_fn(4, 2, |g, t| 0.1 * t as f64 + z[(g, t)]);
        let err = gmm_from_matrices(&z, &d, &d, &CrcOptions::default());
        assert!(matches!(err, Err(Error::DegenerateInstrument { location: 2 })));
        let drop = CrcOptions {
            near_zero: NearZeroPolicy::Drop,
            ..Default::default()
        };
        let est = gmm_from_matrices(&z, &d, &d, &drop).unwrap();
        assert_eq!(est.trends.dropped, vec![2]);
        assert_eq!(est.n_locations_used, 3);
        assert!((est.avg_beta - 1.0).abs() < 1e-12);
        let win = CrcOptions {
            near_zero: NearZeroPolicy::Winsorize { quantile: 0.5 },
            ..Default::default()
        };
        let est = gmm_from_matrices(&z, &d, &d, &win).unwrap();
        assert_eq!(est.n_locations_used, 4);
    }

    #[test]
    fn additive_time_variant_recovers_lambda() {
        let z = panel(&[
            &[1.0, 2.0, 0.5],
            &[2.0, 1.0, 1.5],
            &[-1.0, 0.5, 2.0],
            &[0.3, -1.2, 1.0],
            &[1.1, 0.4, -0.7],
        ]);
        let beta = 2.0;
        let alpha = [0.5, -0.2, 1.0, 0.3, 0.8];
        let lambda = [0.0, 0.4, -0.3];
        let mu_d = [0.1, 0.2, 0.3];
        let mu_y = [-0.5, 0.1, 0.2];
        let d = DMatrix::from_fn(5, 3, |g, t| mu_d[t] + beta * z[(g, t)]);
        let y = DMatrix::from_fn(5, 3, |g, t| mu_y[t] + (alpha[g] + lambda[t]) * beta * z[(g, t)]);
        let opts = CrcOptions {
            additive_time: true,
            ..Default::default()
        };
        let est = gmm_from_matrices(&z, &d, &y, &opts).unwrap();
        let add = est.additive_time.unwrap();
        assert!((add.beta - beta).abs() < 1e-10);
        for t in 0..3 {
            assert!((add.lambda[t] - lambda[t]).abs() < 1e-10);
            assert!((add.mu_y[t] - mu_y[t]).abs() < 1e-10);
        }
        let mean_alpha = alpha.iter().sum::<f64>() / 5.0;
        assert!((add.avg_alpha - mean_alpha).abs() < 1e-10);
    }

    #[test]
    fn debiased_with_zero_trends_is_raw_slope() {
        let z = panel(&[&[1.0, 2.0], &[2.0, 1.0], &[0.5, -1.0]]);
        let d = panel(&[&[1.5, 2.5], &[0.2, 1.0], &[0.1, -0.3]]);
        let y = d.map(|v| 2.0 * v);
        let est = debiased_from_matrices(&z, &d, &y, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(est.fs_debiased, z.dot(&d) / z.norm_squared());
        assert!((est.ss_debiased - 2.0).abs() < 1e-12);
    }
}
