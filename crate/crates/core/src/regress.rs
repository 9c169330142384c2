//! Bartik first-stage, reduced-form, 2SLS, placebo and shock-exogeneity
//! regressions with location-clustered inference.
//!
//! All panel fits pool the `G × P` location-period observations, partial out
//! the intercept structure through the QR solve, and cluster by location with
//! the conventional small-sample factor `G/(G−1) · (n−1)/(n−k)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::dataset::ShiftShareDataset;
use crate::error::{Error, Result};
use crate::instrument::BartikPanel;
use crate::linalg::lstsq;

/// Intercept structure of a panel fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSpec {
    None,
    Intercept,
    PeriodFe,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercepts: Vec<f64>,
    pub se_cluster: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub spec: FitSpec,
    pub weighted: bool,
    /// `G × P` residuals.
    #[serde(skip)]
    pub residuals: DMatrix<f64>,
    /// Per-observation slope influence `h` with `slope = Σ h·y`.
    #[serde(skip)]
    pub(crate) influence: DMatrix<f64>,
    pub(crate) small_sample_factor: f64,
}

impl RegressionFit {
    pub fn t_stat(&self) -> f64 {
        self.slope / self.se_cluster
    }

    /// Two-sided p-value against a t distribution with `G − 1` degrees of freedom.
    pub fn p_value(&self) -> f64 {
        t_p_value(self.t_stat(), self.n_clusters as f64 - 1.0)
    }
}

pub(crate) fn t_p_value(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    match StudentsT::new(0.0, 1.0, df) {
        Ok(dist) => (2.0 * dist.sf(t.abs())).min(1.0),
        Err(_) => f64::NAN,
    }
}

/// Pooled (weighted) least squares of `y` on `x` plus the intercept structure,
/// clustered by row (location).
pub fn fit_linear(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    spec: FitSpec,
    weights: Option<&[f64]>,
) -> Result<RegressionFit> {
    let (g_n, p_n) = x.shape();
    if y.shape() != (g_n, p_n) {
        return Err(Error::DimensionMismatch(format!(
            "y is {:?}, x is {:?}",
            y.shape(),
            x.shape()
        )));
    }
    if let Some(w) = weights {
        if w.len() != g_n {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {g_n} locations",
                w.len()
            )));
        }
    }
    let n = g_n * p_n;
    let k = match spec {
        FitSpec::None => 1,
        FitSpec::Intercept => 2,
        FitSpec::PeriodFe => 1 + p_n,
    };
    let obs = |i: usize| (i / p_n, i % p_n);
    let design = DMatrix::from_fn(n, k, |i, j| {
        let (g, t) = obs(i);
        match (j, spec) {
            (0, _) => x[(g, t)],
            (_, FitSpec::Intercept) => 1.0,
            (j, _) => f64::from(u8::from(j - 1 == t)),
        }
    });
    let yv = DVector::from_fn(n, |i, _| {
        let (g, t) = obs(i);
        y[(g, t)]
    });
    let wv = weights.map(|w| DVector::from_fn(n, |i, _| w[obs(i).0]));
    let fit = lstsq(&design, &yv, wv.as_ref()).map_err(|_| Error::CollinearRegressor)?;

    let a = fit.xtwx_inv.row(0).transpose();
    let influence = DMatrix::from_fn(g_n, p_n, |g, t| {
        let i = g * p_n + t;
        let wi = wv.as_ref().map_or(1.0, |w| w[i]);
        wi * design.row(i).dot(&a.transpose())
    });
    let residuals = DMatrix::from_fn(g_n, p_n, |g, t| fit.residuals[g * p_n + t]);
    let small_sample_factor = clustered_factor(g_n, n, k);
    let se_cluster = cluster_variance(&influence, &residuals, small_sample_factor).sqrt();

    Ok(RegressionFit {
        slope: fit.coef[0],
        intercepts: fit.coef.iter().skip(1).copied().collect(),
        se_cluster,
        n_obs: n,
        n_clusters: g_n,
        spec,
        weighted: weights.is_some(),
        residuals,
        influence,
        small_sample_factor,
    })
}

fn clustered_factor(clusters: usize, n: usize, k: usize) -> f64 {
    if clusters < 2 || n <= k {
        return f64::NAN;
    }
    let (c, n, k) = (clusters as f64, n as f64, k as f64);
    c / (c - 1.0) * (n - 1.0) / (n - k)
}

/// `factor · Σ_g (Σ_t h_{g,t} e_{g,t})²`.
fn cluster_variance(h: &DMatrix<f64>, e: &DMatrix<f64>, factor: f64) -> f64 {
    let meat: f64 = h
        .row_iter()
        .zip(e.row_iter())
        .map(|(hr, er)| hr.dot(&er).powi(2))
        .sum();
    factor * meat
}

#[derive(Debug, Clone, Serialize)]
pub struct TslsFit {
    pub beta_2sls: f64,
    pub fs: RegressionFit,
    pub rf: RegressionFit,
    /// Delta-method SE from the stacked cluster-level (rf, fs) moments.
    pub se_cluster: f64,
}

/// Threshold on `|first-stage slope|` below which 2SLS is refused.
pub const WEAK_DENOMINATOR_TOL: f64 = 1e-12;

/// First stage (`ΔD` on `ΔZ`), reduced form (`ΔY` on `ΔZ`) and their ratio.
pub fn fit_bartik_system(ds: &ShiftShareDataset, bartik: &BartikPanel, spec: FitSpec) -> Result<TslsFit> {
    fit_bartik_matrices(&ds.d_evol, &ds.y_evol, bartik, spec)
}

pub(crate) fn fit_bartik_matrices(
    d: &DMatrix<f64>,
    y: &DMatrix<f64>,
    bartik: &BartikPanel,
    spec: FitSpec,
) -> Result<TslsFit> {
    let w = bartik.location_weights.as_deref();
    let fs = fit_linear(d, &bartik.z, spec, w)?;
    let rf = fit_linear(y, &bartik.z, spec, w)?;
    if fs.slope.abs() < WEAK_DENOMINATOR_TOL {
        return Err(Error::WeakDenominator { value: fs.slope });
    }
    let beta = rf.slope / fs.slope;
    // ψ_g = Σ_t h (e^Y − β e^D) / b_D
    let combined = &rf.residuals - &fs.residuals * beta;
    let var = cluster_variance(&fs.influence, &combined, fs.small_sample_factor) / fs.slope.powi(2);
    Ok(TslsFit {
        beta_2sls: beta,
        se_cluster: var.sqrt(),
        fs,
        rf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaceboOptions {
    /// Refuse to run when pre-period shocks exceed `shock_tol` in absolute value.
    pub strict: bool,
    pub shock_tol: f64,
}

impl Default for PlaceboOptions {
    fn default() -> Self {
        PlaceboOptions {
            strict: true,
            shock_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlaceboResult {
    pub coef_d: f64,
    pub coef_y: f64,
    pub se_d: f64,
    pub se_y: f64,
    pub p_value_d: f64,
    pub p_value_y: f64,
    pub t_pre: Vec<String>,
    pub t_instrument: String,
    pub max_abs_pre_shock: f64,
    pub warnings: Vec<String>,
}

/// Regress pre-period evolutions on a later period's instrument. Several
/// pre-periods are pooled with period intercepts.
pub fn placebo(
    ds: &ShiftShareDataset,
    bartik: &BartikPanel,
    t_pre: &[usize],
    t_instrument: usize,
    options: PlaceboOptions,
) -> Result<PlaceboResult> {
    let p_n = ds.n_periods();
    if t_pre.is_empty() || t_instrument >= p_n || t_pre.iter().any(|&t| t >= t_instrument) {
        return Err(Error::Invalid(
            "placebo needs pre-periods strictly before the instrument period".into(),
        ));
    }
    let mut max_abs = 0.0f64;
    for &t in t_pre {
        for s in 0..ds.n_sectors() {
            for g in 0..ds.n_locations() {
                max_abs = max_abs.max(ds.shock(s, g, t).abs());
            }
        }
    }
    let mut warnings = Vec::new();
    if max_abs > options.shock_tol {
        if options.strict {
            return Err(Error::ShocksNotZeroAtPrePeriod { max_abs });
        }
        warnings.push(format!(
            "pre-period shocks are not zero (max |shock| = {max_abs:e}); common-trends premise only approximate"
        ));
    }
    let g_n = ds.n_locations();
    let cols = |m: &DMatrix<f64>| DMatrix::from_fn(g_n, t_pre.len(), |g, j| m[(g, t_pre[j])]);
    let x = DMatrix::from_fn(g_n, t_pre.len(), |g, _| bartik.z[(g, t_instrument)]);
    let spec = if t_pre.len() == 1 {
        FitSpec::Intercept
    } else {
        FitSpec::PeriodFe
    };
    let w = bartik.location_weights.as_deref();
    let fd = fit_linear(&cols(&ds.d_evol), &x, spec, w)?;
    let fy = fit_linear(&cols(&ds.y_evol), &x, spec, w)?;
    Ok(PlaceboResult {
        coef_d: fd.slope,
        coef_y: fy.slope,
        se_d: fd.se_cluster,
        se_y: fy.se_cluster,
        p_value_d: fd.p_value(),
        p_value_y: fy.p_value(),
        t_pre: t_pre.iter().map(|&t| ds.periods[t].clone()).collect(),
        t_instrument: ds.periods[t_instrument].clone(),
        max_abs_pre_shock: max_abs,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Hc1,
    Cluster,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExogeneityTestResult {
    pub coefficients: Vec<f64>,
    pub ses: Vec<f64>,
    pub intercept: f64,
    pub intercept_se: f64,
    pub f_stat: f64,
    pub df_num: usize,
    pub df_den: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub n: usize,
    pub covariance: CovarianceKind,
}

/// Regress sector shocks on sector covariates plus an intercept and test that
/// every covariate coefficient is zero. Without clusters the covariance is
/// HC1 and the reference is `F(K, n−K−1)`; with clusters it is the clustered
/// sandwich and the reference is `F(K, C−1)`.
pub fn shock_exogeneity_test(
    shocks: &[f64],
    covariates: &DMatrix<f64>,
    weights: Option<&[f64]>,
    clusters: Option<&[usize]>,
) -> Result<ExogeneityTestResult> {
    let (n, k) = covariates.shape();
    if shocks.len() != n
        || weights.is_some_and(|w| w.len() != n)
        || clusters.is_some_and(|c| c.len() != n)
    {
        return Err(Error::DimensionMismatch(
            "shocks, covariates, weights and clusters must have one row per sector".into(),
        ));
    }
    if k == 0 || k + 1 >= n {
        return Err(Error::RankDeficientCovariates);
    }
    let x = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { covariates[(i, j - 1)] });
    let y = DVector::from_row_slice(shocks);
    let wv = weights.map(DVector::from_row_slice);
    let fit = lstsq(&x, &y, wv.as_ref()).map_err(|_| Error::RankDeficientCovariates)?;
    let w_of = |i: usize| wv.as_ref().map_or(1.0, |w| w[i]);

    // score contributions u_i = w_i x_i e_i, summed within clusters
    let mut groups: std::collections::BTreeMap<usize, DVector<f64>> = Default::default();
    for i in 0..n {
        let key = clusters.map_or(i, |c| c[i]);
        let u = x.row(i).transpose() * (w_of(i) * fit.residuals[i]);
        *groups.entry(key).or_insert_with(|| DVector::zeros(k + 1)) += u;
    }
    let meat = groups
        .values()
        .fold(DMatrix::zeros(k + 1, k + 1), |acc, u| acc + u * u.transpose());
    let (factor, df_den, covariance) = match clusters {
        Some(_) => {
            let c = groups.len();
            (clustered_factor(c, n, k + 1), c as f64 - 1.0, CovarianceKind::Cluster)
        }
        None => (
            n as f64 / (n - k - 1) as f64,
            (n - k - 1) as f64,
            CovarianceKind::Hc1,
        ),
    };
    let vcov = &fit.xtwx_inv * meat * &fit.xtwx_inv * factor;

    let b = fit.coef.rows(1, k).into_owned();
    let v = vcov.view((1, 1), (k, k)).into_owned();
    let f_stat = match v.clone().try_inverse() {
        Some(vi) if b.iter().any(|c| *c != 0.0) => (b.transpose() * vi * &b)[(0, 0)] / k as f64,
        _ => f64::INFINITY,
    };
    let f_stat = if f_stat.is_finite() && f_stat >= 0.0 { f_stat } else { f64::INFINITY };
    let p_value = if f_stat.is_infinite() {
        0.0
    } else {
        FisherSnedecor::new(k as f64, df_den).map_or(f64::NAN, |d| d.sf(f_stat).clamp(0.0, 1.0))
    };

    let total_w: f64 = (0..n).map(w_of).sum();
    let y_bar = (0..n).map(|i| w_of(i) * y[i]).sum::<f64>() / total_w;
    let tss: f64 = (0..n).map(|i| w_of(i) * (y[i] - y_bar).powi(2)).sum();
    let rss: f64 = (0..n).map(|i| w_of(i) * fit.residuals[i].powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN };

    Ok(ExogeneityTestResult {
        coefficients: b.iter().copied().collect(),
        ses: (1..=k).map(|j| vcov[(j, j)].max(0.0).sqrt()).collect(),
        intercept: fit.coef[0],
        intercept_se: vcov[(0, 0)].max(0.0).sqrt(),
        f_stat,
        df_num: k,
        df_den,
        p_value,
        r_squared,
        n,
        covariance,
    })
}
