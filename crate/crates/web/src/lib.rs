//! Browser bindings for the demo page. Every export takes and returns JSON
//! text; failures come back as `{"error": "..."}` so the page never has to
//! catch exceptions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

use shiftshare_core::crc::{gmm_fit, CrcOptions};
use shiftshare_core::dataset::{Shares, Shocks, ShiftShareDataset};
use shiftshare_core::simulate::{planted_sign_reversal, simulate, EffectSpec, ShareLaw, ShockLaw, SimConfig};
use shiftshare_core::weights::{aggregate, fs_rf_cell_weights, sign_summary, SignSummary, WeightLevel, WeightSpec};
use shiftshare_core::{build_bartik, fit_bartik_system, FitSpec};

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Deserialize)]
struct ToyInput {
    shocks: Vec<f64>,
    /// `shares[s][g]`; identity when absent.
    #[serde(default)]
    shares: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    no_fe: bool,
}

#[derive(Serialize)]
struct Cell {
    location: usize,
    sector: usize,
    weight: f64,
}

#[derive(Serialize)]
struct ToyOutput {
    z: Vec<f64>,
    z_bar: f64,
    denominator: f64,
    cells: Vec<Cell>,
    locations: Vec<f64>,
    signs: SignSummary,
}

fn toy_dataset(shocks: &[f64], shares: Option<&[Vec<f64>]>) -> Result<ShiftShareDataset, String> {
    let s_n = shocks.len();
    let q = match shares {
        None => DMatrix::identity(s_n, s_n),
        Some(rows) => {
            if rows.len() != s_n || rows.is_empty() {
                return Err(format!("shares need one row per sector ({s_n})"));
            }
            let g_n = rows[0].len();
            if rows.iter().any(|r| r.len() != g_n) {
                return Err("share rows differ in length".into());
            }
            DMatrix::from_fn(s_n, g_n, |s, g| rows[s][g])
        }
    };
    let g_n = q.ncols();
    if g_n < 2 {
        return Err("need at least two locations".into());
    }
    Ok(ShiftShareDataset {
        locations: (1..=g_n).map(|g| format!("g{g}")).collect(),
        sectors: (1..=s_n).map(|s| format!("s{s}")).collect(),
        periods: vec!["t2".into()],
        d_evol: DMatrix::zeros(g_n, 1),
        y_evol: DMatrix::zeros(g_n, 1),
        shocks: Shocks::Sector(DMatrix::from_column_slice(s_n, 1, shocks)),
        shares: Shares::Fixed(q),
        location_weights: None,
        sector_covariates: None,
        location_covariates: None,
    })
}

fn toy_weights_impl(input: &str) -> Result<ToyOutput, String> {
    let inp: ToyInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    if inp.shocks.is_empty() || inp.shocks.iter().any(|v| !v.is_finite()) {
        return Err("shocks must be a non-empty list of finite numbers".into());
    }
    let ds = toy_dataset(&inp.shocks, inp.shares.as_deref())?;
    let b = build_bartik(&ds, false).map_err(|e| e.to_string())?;
    let spec = if inp.no_fe { WeightSpec::NoFe } else { WeightSpec::PeriodFe };
    let dec = fs_rf_cell_weights(&ds, &b, spec).map_err(|e| e.to_string())?;
    let by_loc = aggregate(&dec, WeightLevel::Location).map_err(|e| e.to_string())?;
    let mut locations = vec![0.0; ds.n_locations()];
    for (k, w) in by_loc.iter() {
        locations[k.location] = *w;
    }
    Ok(ToyOutput {
        z: b.z.column(0).iter().copied().collect(),
        z_bar: b.z_bar[0],
        denominator: dec.denominator,
        cells: dec
            .iter()
            .map(|(k, w)| Cell {
                location: k.location,
                sector: k.sector.unwrap_or(0),
                weight: *w,
            })
            .collect(),
        locations,
        signs: sign_summary(&dec, "first-stage and reduced-form weights"),
    })
}

/// Cell and location weights of the period-effects Bartik regression for a
/// single-period toy design. Input: `{"shocks": [..], "shares": [[..]]?, "no_fe": bool?}`.
#[wasm_bindgen]
pub fn toy_weights(input: &str) -> String {
    respond(toy_weights_impl(input))
}

#[derive(Serialize)]
struct Reversal {
    shocks: Vec<f64>,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    weights: Vec<f64>,
    first_stage: f64,
    reduced_form: f64,
    tsls: f64,
    min_alpha: f64,
}

fn sign_reversal_impl() -> Result<Reversal, String> {
    let (ds, truth) = planted_sign_reversal();
    let b = build_bartik(&ds, false).map_err(|e| e.to_string())?;
    let fit = fit_bartik_system(&ds, &b, FitSpec::PeriodFe).map_err(|e| e.to_string())?;
    let dec = fs_rf_cell_weights(&ds, &b, WeightSpec::PeriodFe).map_err(|e| e.to_string())?;
    let dec = aggregate(&dec, WeightLevel::Location).map_err(|e| e.to_string())?;
    let mut weights = vec![0.0; ds.n_locations()];
    for (k, w) in dec.iter() {
        weights[k.location] = *w;
    }
    let alpha: Vec<f64> = (0..ds.n_locations()).map(|g| truth.alpha[g][0]).collect();
    Ok(Reversal {
        shocks: truth.shocks[0].clone(),
        beta: (0..ds.n_locations()).map(|g| truth.location_beta(g)).collect(),
        min_alpha: alpha.iter().copied().fold(f64::INFINITY, f64::min),
        alpha,
        weights,
        first_stage: fit.fs.slope,
        reduced_form: fit.rf.slope,
        tsls: fit.beta_2sls,
    })
}

/// The planted panel where every second-stage effect is positive and the
/// 2SLS coefficient is negative.
#[wasm_bindgen]
pub fn sign_reversal() -> String {
    respond(sign_reversal_impl())
}

#[derive(Deserialize)]
#[serde(default)]
struct ContrastInput {
    n_locations: usize,
    n_sectors: usize,
    /// Spread of sector shock means.
    mean_gradient: f64,
    /// Correlation of first-stage effects with instrument strength.
    rho_beta: f64,
    noise: f64,
    seed: u64,
}

impl Default for ContrastInput {
    fn default() -> Self {
        ContrastInput {
            n_locations: 200,
            n_sectors: 30,
            mean_gradient: 2.0,
            rho_beta: 0.5,
            noise: 0.5,
            seed: 7,
        }
    }
}

#[derive(Serialize)]
struct Contrast {
    estimand: f64,
    tsls: f64,
    tsls_se: f64,
    crc_ratio: f64,
    crc_se: f64,
    mu_d: Vec<f64>,
    mu_y: Vec<f64>,
}

fn crc_vs_bartik_impl(input: &str) -> Result<Contrast, String> {
    let inp: ContrastInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    if inp.n_locations > 5000 || inp.n_sectors > 500 {
        return Err("keep the demo under 5000 locations and 500 sectors".into());
    }
    let config = SimConfig {
        n_locations: inp.n_locations,
        n_sectors: inp.n_sectors,
        n_periods: 4,
        shock_law: ShockLaw::Normal {
            mean: 1.0,
            mean_gradient: inp.mean_gradient,
            means: Vec::new(),
            covariate_loading: 0.0,
            scale: 0.5,
            zero_periods: Vec::new(),
        },
        share_law: ShareLaw::Simplex { concentration: 0.2 },
        beta: EffectSpec::PerLocation { mean: 1.0, sd: 0.3 },
        alpha: EffectSpec::PerLocation { mean: 0.5, sd: 0.3 },
        mu_d: vec![0.2, -0.1, 0.3],
        mu_y: vec![-0.1, 0.2, 0.0],
        noise_d: inp.noise,
        noise_y: inp.noise,
        correlate_beta_with_exposure: inp.rho_beta,
        correlate_alpha_with_exposure: 0.8,
        ..SimConfig::default()
    };
    let (ds, truth) = simulate(&config, inp.seed).map_err(|e| e.to_string())?;
    let b = build_bartik(&ds, false).map_err(|e| e.to_string())?;
    let fit = fit_bartik_system(&ds, &b, FitSpec::PeriodFe).map_err(|e| e.to_string())?;
    let crc = gmm_fit(&ds, &b, &CrcOptions::default()).map_err(|e| e.to_string())?;
    Ok(Contrast {
        estimand: truth.ratio_estimand(),
        tsls: fit.beta_2sls,
        tsls_se: fit.se_cluster,
        crc_ratio: crc.ratio,
        crc_se: crc.se_ratio,
        mu_d: crc.trends.mu_d,
        mu_y: crc.trends.mu_y,
    })
}

/// One simulated panel with heterogeneous sector shock means: Bartik 2SLS
/// and the correlated-random-coefficient ratio against the true estimand.
#[wasm_bindgen]
pub fn crc_vs_bartik(input: &str) -> String {
    respond(crc_vs_bartik_impl(input))
}
