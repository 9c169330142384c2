//! Synthetic shift-share panels with known effects.
//!
//! `ΔD_{g,t} = μ^D_t + ε^D_{g,t} + Σ_s Q_{s,g} ΔZ_{s,t} β_{s,g,t}` and
//! `ΔY_{g,t} = μ^Y_t + ε^Y_{g,t} + Σ_s Q_{s,g} ΔZ_{s,t} α_{g,t} β_{s,g,t}`.
//! The idiosyncratic terms are drawn independently of the shocks.

pub mod monte_carlo;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Covariates, Shares, Shocks, ShiftShareDataset};
use crate::error::{Error, Result};
use crate::instrument::BartikPanel;
use crate::regress::{fit_linear, FitSpec};
use crate::weights::{fs_rf_cell_weights, WeightDecomposition, WeightSpec};

/// Sector shock distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShockLaw {
    /// `ΔZ_{s,t} = m_s + scale·N(0,1)` with
    /// `m_s = mean + mean_gradient·(s/(S−1) − 1/2) + covariate_loading·x_{s,1}`,
    /// or `m_s = means[s]` when `means` is given.
    Normal {
        #[serde(default)]
        mean: f64,
        #[serde(default)]
        mean_gradient: f64,
        #[serde(default)]
        means: Vec<f64>,
        #[serde(default)]
        covariate_loading: f64,
        #[serde(default = "one")]
        scale: f64,
        /// Evolution-period indices whose shocks are exactly zero.
        #[serde(default)]
        zero_periods: Vec<usize>,
    },
    /// `values[t][s]`.
    Fixed { values: Vec<Vec<f64>> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShareLaw {
    /// Independent `Gamma(concentration, 1)` draws normalized per location.
    Simplex { concentration: f64 },
    /// `Q = I`; needs `S = G`.
    Identity,
    /// `values[s][g]`.
    Matrix { values: Vec<Vec<f64>> },
}

/// Effect heterogeneity. Random draws are `mean + sd·(ρ·strength_g + √(1−ρ²)·ξ)`
/// where `strength_g` is the standardized expected instrument `Σ_s Q_{s,g} m_s`
/// and `ρ` the configured exposure correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectSpec {
    Constant { value: f64 },
    PerLocation { mean: f64, sd: f64 },
    PerLocationPeriod { mean: f64, sd: f64 },
    /// Varies over `(s, g, t)`; first-stage effects only.
    PerCell { mean: f64, sd: f64 },
    /// `values[g][t]`.
    Values { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_locations: usize,
    pub n_sectors: usize,
    /// Number of level periods `T`; the panel has `T − 1` evolutions.
    pub n_periods: usize,
    pub shock_law: ShockLaw,
    pub share_law: ShareLaw,
    pub beta: EffectSpec,
    pub alpha: EffectSpec,
    /// `μ^D_t` per evolution; empty means zero.
    pub mu_d: Vec<f64>,
    pub mu_y: Vec<f64>,
    pub noise_d: f64,
    pub noise_y: f64,
    /// Loading of `ε^Y` on `ε^D`.
    pub endogeneity: f64,
    pub correlate_beta_with_exposure: f64,
    pub correlate_alpha_with_exposure: f64,
    pub n_sector_covariates: usize,
    pub n_location_covariates: usize,
    /// Draw `N_g ~ U(1, 10)`.
    pub location_weights: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_locations: 50,
            n_sectors: 10,
            n_periods: 3,
            shock_law: ShockLaw::Normal {
                mean: 0.0,
                mean_gradient: 0.0,
                means: Vec::new(),
                covariate_loading: 0.0,
                scale: 1.0,
                zero_periods: Vec::new(),
            },
            share_law: ShareLaw::Simplex { concentration: 1.0 },
            beta: EffectSpec::Constant { value: 1.0 },
            alpha: EffectSpec::Constant { value: 1.0 },
            mu_d: Vec::new(),
            mu_y: Vec::new(),
            noise_d: 1.0,
            noise_y: 1.0,
            endogeneity: 0.0,
            correlate_beta_with_exposure: 0.0,
            correlate_alpha_with_exposure: 0.0,
            n_sector_covariates: 0,
            n_location_covariates: 0,
            location_weights: false,
        }
    }
}

impl SimConfig {
    pub fn n_evolutions(&self) -> usize {
        self.n_periods.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let (g, s, p) = (self.n_locations, self.n_sectors, self.n_evolutions());
        if g < 2 || s < 1 || self.n_periods < 2 {
            return bad(format!("need G ≥ 2, S ≥ 1, T ≥ 2 (got {g}, {s}, {})", self.n_periods));
        }
        for (name, v) in [("mu_d", &self.mu_d), ("mu_y", &self.mu_y)] {
            if !v.is_empty() && v.len() != p {
                return bad(format!("{name} has {} values for {p} evolutions", v.len()));
            }
        }
        for (name, v) in [
            ("noise_d", self.noise_d),
            ("noise_y", self.noise_y),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a nonnegative number"));
            }
        }
        for (name, rho) in [
            ("correlate_beta_with_exposure", self.correlate_beta_with_exposure),
            ("correlate_alpha_with_exposure", self.correlate_alpha_with_exposure),
        ] {
            if !(-1.0..=1.0).contains(&rho) {
                return bad(format!("{name} must lie in [-1, 1]"));
            }
        }
        match &self.shock_law {
            ShockLaw::Normal {
                means,
                covariate_loading,
                scale,
                zero_periods,
                ..
            } => {
                if !(*scale >= 0.0) {
                    return bad("shock scale must be nonnegative".into());
                }
                if !means.is_empty() && means.len() != s {
                    return bad(format!("{} shock means for {s} sectors", means.len()));
                }
                if *covariate_loading != 0.0 && self.n_sector_covariates == 0 {
                    return bad("covariate_loading needs n_sector_covariates ≥ 1".into());
                }
                if zero_periods.iter().any(|&t| t >= p) {
                    return bad("zero_periods index out of range".into());
                }
            }
            ShockLaw::Fixed { values } => {
                if values.len() != p || values.iter().any(|r| r.len() != s) {
                    return bad(format!("fixed shocks must be {p} periods × {s} sectors"));
                }
            }
        }
        match &self.share_law {
            ShareLaw::Simplex { concentration } if !(*concentration > 0.0) => {
                return bad("simplex concentration must be positive".into())
            }
            ShareLaw::Identity if s != g => return bad("identity shares need S = G".into()),
            ShareLaw::Matrix { values } if values.len() != s || values.iter().any(|r| r.len() != g) => {
                return bad(format!("share matrix must be {s} × {g}"))
            }
            _ => {}
        }
        for (name, spec) in [("beta", &self.beta), ("alpha", &self.alpha)] {
            match spec {
                EffectSpec::PerCell { .. } if name == "alpha" => {
                    return bad("second-stage effects cannot vary by sector".into())
                }
                EffectSpec::Values { values } if values.len() != g || values.iter().any(|r| r.len() != p) => {
                    return bad(format!("{name} values must be {g} × {p}"))
                }
                EffectSpec::PerLocation { sd, .. }
                | EffectSpec::PerLocationPeriod { sd, .. }
                | EffectSpec::PerCell { sd, .. }
                    if !(*sd >= 0.0) =>
                {
                    return bad(format!("{name} sd must be nonnegative"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// True when both idiosyncratic components are switched off.
    pub fn zero_noise(&self) -> bool {
        self.noise_d == 0.0 && self.noise_y == 0.0
    }
}

/// Everything the generator drew, indexed `[s][g][t]`, `[g][t]`, `[t][s]`, `[s][g]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub beta: Vec<Vec<Vec<f64>>>,
    pub alpha: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub mu_d: Vec<f64>,
    pub mu_y: Vec<f64>,
    pub shocks: Vec<Vec<f64>>,
    pub shares: Vec<Vec<f64>>,
    pub sector_means: Vec<f64>,
    pub eps_d: Vec<Vec<f64>>,
    pub eps_y: Vec<Vec<f64>>,
}

impl SimTruth {
    pub fn has_noise(&self) -> bool {
        self.eps_d.iter().chain(&self.eps_y).flatten().any(|e| *e != 0.0)
    }

    /// `β_g`: mean first-stage effect of location `g` over sectors and periods.
    pub fn location_beta(&self, g: usize) -> f64 {
        let s_n = self.beta.len();
        let p = self.beta[0][g].len();
        self.beta.iter().map(|b| b[g].iter().sum::<f64>()).sum::<f64>() / (s_n * p) as f64
    }

    /// `α_g`: mean second-stage effect of location `g` over periods.
    pub fn location_alpha(&self, g: usize) -> f64 {
        self.alpha[g].iter().sum::<f64>() / self.alpha[g].len() as f64
    }

    /// `(1/G) Σ_g β_g`.
    pub fn avg_beta(&self) -> f64 {
        let g_n = self.alpha.len();
        (0..g_n).map(|g| self.location_beta(g)).sum::<f64>() / g_n as f64
    }

    /// `(1/G) Σ_g β_g α_g`.
    pub fn avg_gamma(&self) -> f64 {
        let g_n = self.alpha.len();
        (0..g_n)
            .map(|g| self.location_beta(g) * self.location_alpha(g))
            .sum::<f64>()
            / g_n as f64
    }

    /// `Σ_g (β_g / Σβ) α_g`.
    pub fn ratio_estimand(&self) -> f64 {
        self.avg_gamma() / self.avg_beta()
    }
}

fn format_ids(prefix: &str, range: impl Iterator<Item = usize>, max: usize) -> Vec<String> {
    let width = max.to_string().len().max(if prefix == "t" { 2 } else { 3 });
    range.map(|i| format!("{prefix}{i:0width$}")).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.iter().map(|x| (x - mean) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Draw a dataset and its truth. Deterministic in `seed`.
pub fn simulate(config: &SimConfig, seed: u64) -> Result<(ShiftShareDataset, SimTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (g_n, s_n, p) = (config.n_locations, config.n_sectors, config.n_evolutions());
    let sector_cov = DMatrix::from_fn(s_n, config.n_sector_covariates, |_, _| normal(&mut rng));
    let location_cov = DMatrix::from_fn(g_n, config.n_location_covariates, |_, _| normal(&mut rng));

    let (shocks, sector_means) = match &config.shock_law {
        ShockLaw::Normal {
            mean,
            mean_gradient,
            means,
            covariate_loading,
            scale,
            zero_periods,
        } => {
            let m: Vec<f64> = (0..s_n)
                .map(|s| {
                    let base = if means.is_empty() {
                        let pos = if s_n > 1 { s as f64 / (s_n - 1) as f64 - 0.5 } else { 0.0 };
                        mean + mean_gradient * pos
                    } else {
                        means[s]
                    };
                    let cov = if *covariate_loading != 0.0 { covariate_loading * sector_cov[(s, 0)] } else { 0.0 };
                    base + cov
                })
                .collect();
            let z: Vec<Vec<f64>> = (0..p)
                .map(|t| {
                    (0..s_n)
                        .map(|s| {
                            let draw = m[s] + scale * normal(&mut rng);
                            if zero_periods.contains(&t) { 0.0 } else { draw }
                        })
                        .collect()
                })
                .collect();
            (z, m)
        }
        ShockLaw::Fixed { values } => {
            let m = (0..s_n)
                .map(|s| values.iter().map(|r| r[s]).sum::<f64>() / p as f64)
                .collect();
            (values.clone(), m)
        }
    };

    let shares: Vec<Vec<f64>> = match &config.share_law {
        ShareLaw::Simplex { concentration } => {
            let gamma = Gamma::new(*concentration, 1.0)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let mut q = vec![vec![0.0; g_n]; s_n];
            for g in 0..g_n {
                let draws: Vec<f64> = (0..s_n).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = draws.iter().sum();
                for s in 0..s_n {
                    q[s][g] = if total > 0.0 { draws[s] / total } else { 1.0 / s_n as f64 };
                }
            }
            q
        }
        ShareLaw::Identity => (0..s_n)
            .map(|s| (0..g_n).map(|g| f64::from(u8::from(s == g))).collect())
            .collect(),
        ShareLaw::Matrix { values } => values.clone(),
    };

    let strength = standardize(
        &(0..g_n)
            .map(|g| (0..s_n).map(|s| shares[s][g] * sector_means[s]).sum())
            .collect::<Vec<f64>>(),
    );
    let draw_effect = |spec: &EffectSpec, rho: f64, rng: &mut ChaCha8Rng| -> Vec<Vec<Vec<f64>>> {
        let mixed = |mean: f64, sd: f64, g: usize, rng: &mut ChaCha8Rng| {
            mean + sd * (rho * strength[g] + (1.0 - rho * rho).sqrt() * normal(rng))
        };
        // [s][g][t]; second-stage effects use a single sector slot
        let s_slots = if matches!(spec, EffectSpec::PerCell { .. }) { s_n } else { 1 };
        let mut out = vec![vec![vec![0.0; p]; g_n]; s_slots];
        match spec {
            EffectSpec::Constant { value } => out[0].iter_mut().for_each(|r| r.fill(*value)),
            EffectSpec::PerLocation { mean, sd } => {
                for g in 0..g_n {
                    let v = mixed(*mean, *sd, g, rng);
                    out[0][g].fill(v);
                }
            }
            EffectSpec::PerLocationPeriod { mean, sd } => {
                for g in 0..g_n {
                    for t in 0..p {
                        out[0][g][t] = mixed(*mean, *sd, g, rng);
                    }
                }
            }
            EffectSpec::PerCell { mean, sd } => {
                for s in 0..s_n {
                    for g in 0..g_n {
                        for t in 0..p {
                            out[s][g][t] = mixed(*mean, *sd, g, rng);
                        }
                    }
                }
            }
            EffectSpec::Values { values } => out[0] = values.clone(),
        }
        out
    };
    let beta_raw = draw_effect(&config.beta, config.correlate_beta_with_exposure, &mut rng);
    let alpha = draw_effect(&config.alpha, config.correlate_alpha_with_exposure, &mut rng).swap_remove(0);
    let beta: Vec<Vec<Vec<f64>>> = if beta_raw.len() == s_n {
        beta_raw
    } else {
        vec![beta_raw[0].clone(); s_n]
    };
    let gamma: Vec<Vec<Vec<f64>>> = beta
        .iter()
        .map(|bs| bs.iter().zip(&alpha).map(|(bg, ag)| bg.iter().zip(ag).map(|(b, a)| a * b).collect()).collect())
        .collect();

    let mu_d = if config.mu_d.is_empty() { vec![0.0; p] } else { config.mu_d.clone() };
    let mu_y = if config.mu_y.is_empty() { vec![0.0; p] } else { config.mu_y.clone() };
    let mut eps_d = vec![vec![0.0; p]; g_n];
    let mut eps_y = vec![vec![0.0; p]; g_n];
    for g in 0..g_n {
        for t in 0..p {
            let ed = if config.noise_d > 0.0 { config.noise_d * normal(&mut rng) } else { 0.0 };
            let ey = if config.noise_y > 0.0 { config.noise_y * normal(&mut rng) } else { 0.0 };
            eps_d[g][t] = ed;
            eps_y[g][t] = ey + config.endogeneity * ed;
        }
    }
    let location_weights = config
        .location_weights
        .then(|| (0..g_n).map(|_| rng.random_range(1.0..10.0)).collect());

    let d_evol = DMatrix::from_fn(g_n, p, |g, t| {
        let shift: f64 = (0..s_n).map(|s| shares[s][g] * shocks[t][s] * beta[s][g][t]).sum();
        mu_d[t] + eps_d[g][t] + shift
    });
    let y_evol = DMatrix::from_fn(g_n, p, |g, t| {
        let shift: f64 = (0..s_n).map(|s| shares[s][g] * shocks[t][s] * gamma[s][g][t]).sum();
        mu_y[t] + eps_y[g][t] + shift
    });

    let named = |prefix: &str, values: DMatrix<f64>| {
        (values.ncols() > 0).then(|| Covariates {
            names: (1..=values.ncols()).map(|k| format!("{prefix}{k}")).collect(),
            values,
        })
    };
    let ds = ShiftShareDataset {
        locations: format_ids("g", 1..=g_n, g_n),
        sectors: format_ids("s", 1..=s_n, s_n),
        periods: format_ids("t", 2..=config.n_periods, config.n_periods),
        d_evol,
        y_evol,
        shocks: Shocks::Sector(DMatrix::from_fn(s_n, p, |s, t| shocks[t][s])),
        shares: Shares::Fixed(DMatrix::from_fn(s_n, g_n, |s, g| shares[s][g])),
        location_weights,
        sector_covariates: named("x", sector_cov),
        location_covariates: named("w", location_cov),
    };
    let truth = SimTruth {
        beta,
        alpha,
        gamma,
        mu_d,
        mu_y,
        shocks,
        shares,
        sector_means,
        eps_d,
        eps_y,
    };
    Ok((ds, truth))
}

/// Deterministic single-period panel where every second-stage effect is at
/// least 0.1 yet the period-effects 2SLS coefficient is negative: locations
/// with below-average instrument get large first-stage effects.
pub fn planted_sign_reversal() -> (ShiftShareDataset, SimTruth) {
    let shocks = [0.5, 0.75, 1.0, 1.25, 2.0, 3.0, 4.0, 6.0];
    let n = shocks.len();
    let mean = shocks.iter().sum::<f64>() / n as f64;
    let numer: Vec<f64> = shocks.iter().map(|z| z * (z - mean)).collect();
    let neg_mass: f64 = -numer.iter().filter(|w| **w < 0.0).sum::<f64>();
    let pos_mass: f64 = numer.iter().filter(|w| **w > 0.0).sum::<f64>();
    // β = 1 on negative cells; positive cells carry twice the negative first-stage mass
    let beta_pos = 2.0 * neg_mass / pos_mass;
    let beta: Vec<f64> = numer.iter().map(|w| if *w < 0.0 { 1.0 } else { beta_pos }).collect();
    let alpha: Vec<f64> = numer.iter().map(|w| if *w < 0.0 { 1.0 } else { 0.1 }).collect();
    let config = SimConfig {
        n_locations: n,
        n_sectors: n,
        n_periods: 2,
        shock_law: ShockLaw::Fixed {
            values: vec![shocks.to_vec()],
        },
        share_law: ShareLaw::Identity,
        beta: EffectSpec::Values {
            values: beta.iter().map(|b| vec![*b]).collect(),
        },
        alpha: EffectSpec::Values {
            values: alpha.iter().map(|a| vec![*a]).collect(),
        },
        noise_d: 0.0,
        noise_y: 0.0,
        ..SimConfig::default()
    };
    simulate(&config, 0).expect("fixed configuration is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleGap {
    pub identity: String,
    pub regression: f64,
    pub decomposition: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub gaps: Vec<OracleGap>,
    pub max_gap: f64,
    pub zero_noise: bool,
}

/// Compare every regression slope with its weighted sum of true effects.
/// With `strict`, refuses noisy data, where the gaps are noise contributions.
pub fn decomposition_oracle(
    ds: &ShiftShareDataset,
    bartik: &BartikPanel,
    truth: &SimTruth,
    strict: bool,
) -> Result<OracleReport> {
    if strict && truth.has_noise() {
        return Err(Error::NoiseNotZero);
    }
    let w = bartik.location_weights.as_deref();
    let mut gaps = Vec::new();
    let mut push = |identity: &str, regression: f64, decomposition: f64| {
        gaps.push(OracleGap {
            identity: identity.to_string(),
            regression,
            decomposition,
            gap: (regression - decomposition).abs(),
        })
    };
    let cell_sum = |dec: &WeightDecomposition, eff: &Vec<Vec<Vec<f64>>>| {
        dec.weighted_sum(|k| eff[k.sector.unwrap()][k.location][k.period.unwrap()])
    };
    for (spec, wspec, label) in [
        (FitSpec::PeriodFe, WeightSpec::PeriodFe, "period_fe"),
        (FitSpec::None, WeightSpec::NoFe, "no_constant"),
    ] {
        let dec = fs_rf_cell_weights(ds, bartik, wspec)?;
        let fs = fit_linear(&ds.d_evol, &bartik.z, spec, w)?;
        let rf = fit_linear(&ds.y_evol, &bartik.z, spec, w)?;
        let wb = cell_sum(&dec, &truth.beta) + dec.bias_term(&truth.mu_d);
        let wg = cell_sum(&dec, &truth.gamma) + dec.bias_term(&truth.mu_y);
        push(&format!("first_stage_{label}"), fs.slope, wb);
        push(&format!("reduced_form_{label}"), rf.slope, wg);
        if wb != 0.0 && fs.slope != 0.0 {
            push(&format!("tsls_{label}"), rf.slope / fs.slope, wg / wb);
        }
    }
    let max_gap = gaps.iter().map(|g| g.gap).fold(0.0, f64::max);
    Ok(OracleReport {
        gaps,
        max_gap,
        zero_noise: !truth.has_noise(),
    })
}
