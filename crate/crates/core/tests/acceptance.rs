//! Acceptance suite. Each test prints one line
//! `criterion N [name]: PASS|FAIL (detail)` and fails when the criterion does.
//! Run with `cargo test -p shiftshare-core --test acceptance -- --nocapture`
//! to see the lines.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use rayon::prelude::*;
use shiftshare_core::crc::bootstrap::{bootstrap, BootTarget};
use shiftshare_core::crc::{debiased_estimators, estimate_avg_effects, estimate_trends, gmm_fit, CrcOptions};
use shiftshare_core::dataset::{load_dataset, write_dataset, LoadOptions, ShiftShareDataset};
use shiftshare_core::instrument::build_bartik;
use shiftshare_core::regress::{fit_bartik_system, fit_linear, placebo, shock_exogeneity_test, FitSpec, PlaceboOptions};
use shiftshare_core::report::to_json_string;
use shiftshare_core::simulate::monte_carlo::monte_carlo;
use shiftshare_core::simulate::{planted_sign_reversal, simulate, EffectSpec, ShareLaw, ShockLaw, SimConfig};
use shiftshare_core::weights::{
    aggregate, akm_weights, fs_rf_cell_weights, sign_summary, tsls_weights_homogeneous_fs, ShockVariances, WeightLevel,
    WeightSpec,
};
use shiftshare_core::Error;

fn normal_shocks(mean: f64, mean_gradient: f64, scale: f64) -> ShockLaw {
    ShockLaw::Normal {
        mean,
        mean_gradient,
        means: Vec::new(),
        covariate_loading: 0.0,
        scale,
        zero_periods: Vec::new(),
    }
}

#[test]
fn c01_weight_normalization() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    let mut decompositions = 0;
    let mut degenerate = 0;
    for _ in 0..100 {
        let inst = random_instance(&mut r, 50, 20, 4);
        let ds = &inst.ds;
        let bartik = build_bartik(ds, ds.location_weights.is_some()).unwrap();
        for spec in [WeightSpec::NoFe, WeightSpec::PeriodFe] {
            let cell = match fs_rf_cell_weights(ds, &bartik, spec) {
                Ok(d) => d,
                Err(Error::ZeroDenominator) => {
                    degenerate += 1;
                    continue;
                }
                Err(e) => panic!("{e}"),
            };
            let mut all = vec![
                aggregate(&cell, WeightLevel::LocationPeriod).unwrap(),
                aggregate(&cell, WeightLevel::Location).unwrap(),
            ];
            if spec == WeightSpec::PeriodFe {
                all.push(tsls_weights_homogeneous_fs(&cell).unwrap());
            }
            all.push(cell);
            for dec in &all {
                worst = worst.max((dec.sum() - 1.0).abs());
                decompositions += 1;
            }
        }
        let variances = ShockVariances::PerSector((0..ds.n_sectors()).map(|_| r.random_range(0.0..2.0)).collect());
        let akm = akm_weights(ds, &variances).unwrap();
        worst = worst.max((akm.sum() - 1.0).abs());
        decompositions += 1;
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-10 && elapsed < Duration::from_secs(10);
    report(
        1,
        "weight normalization",
        pass,
        &format!(
            "{decompositions} decompositions over 100 instances, max |Σw − 1| = {worst:.2e}, {degenerate} degenerate specs, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c02_zero_noise_reconstruction() {
    let start = Instant::now();
    let mut r = rng(202);
    let mut worst = 0.0f64;
    let mut worst_library_weights = 0.0f64;
    for _ in 0..50 {
        let inst = random_instance(&mut r, 50, 20, 4);
        let ds = &inst.ds;
        let weighted = ds.location_weights.is_some();
        let bartik = build_bartik(ds, weighted).unwrap();
        let w = weights_of(ds, weighted);
        for (fit_spec, spec, fe) in [
            (FitSpec::PeriodFe, WeightSpec::PeriodFe, true),
            (FitSpec::None, WeightSpec::NoFe, false),
        ] {
            let (cells, bias) = brute_cell_weights(ds, weighted, fe);
            let lib = fs_rf_cell_weights(ds, &bartik, spec).unwrap();
            for (outcome, effect, mu) in [
                (&ds.d_evol, 0usize, &inst.mu_d),
                (&ds.y_evol, 1usize, &inst.mu_y),
            ] {
                let eff = |s: usize, g: usize, t: usize| {
                    if effect == 0 { inst.beta[s][g][t] } else { inst.gamma(s, g, t) }
                };
                let slope = fit_linear(outcome, &bartik.z, fit_spec, Some(&w)).unwrap().slope;
                let bias_term: f64 = bias.iter().zip(mu).map(|(b, m)| b * m).sum();
                let oracle: f64 = cells.iter().map(|(&(g, t, s), wt)| wt * eff(s, g, t)).sum::<f64>() + bias_term;
                let via_lib = lib.weighted_sum(|k| eff(k.sector.unwrap(), k.location, k.period.unwrap()))
                    + lib.bias_term(mu);
                worst = worst.max((slope - oracle).abs());
                worst_library_weights = worst_library_weights.max((slope - via_lib).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-8 && worst_library_weights <= 1e-8 && elapsed < Duration::from_secs(30);
    report(
        2,
        "zero-noise reconstruction",
        pass,
        &format!(
            "50 datasets, ΔD and ΔY, both specs: max gap {worst:.2e} (brute-force weights), {worst_library_weights:.2e} (library weights), {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c03_ratio_and_partialling_identities() {
    let mut r = rng(303);
    let mut worst_ratio = 0.0f64;
    let mut worst_fwl = 0.0f64;
    let mut n = 0;
    let mut datasets: Vec<ShiftShareDataset> = (0..25).map(|_| random_instance(&mut r, 50, 20, 4).ds).collect();
    for seed in 0..25 {
        let c = SimConfig {
            n_locations: 40,
            n_sectors: 12,
            n_periods: 4,
            shock_law: normal_shocks(0.5, 1.0, 1.0),
            beta: EffectSpec::PerLocation { mean: 1.0, sd: 0.5 },
            alpha: EffectSpec::PerLocationPeriod { mean: 0.3, sd: 0.5 },
            mu_d: vec![0.1, 0.2, 0.3],
            location_weights: seed % 2 == 0,
            ..SimConfig::default()
        };
        datasets.push(simulate(&c, seed).unwrap().0);
    }
    for ds in &datasets {
        let weighted = ds.location_weights.is_some();
        let bartik = build_bartik(ds, weighted).unwrap();
        let w = weights_of(ds, weighted);
        let z = rows(&bartik.z);
        for spec in [FitSpec::None, FitSpec::Intercept, FitSpec::PeriodFe] {
            let fit = fit_bartik_system(ds, &bartik, spec).unwrap();
            worst_ratio = worst_ratio.max(rel_gap(fit.beta_2sls, fit.rf.slope / fit.fs.slope));
            worst_ratio = worst_ratio.max(rel_gap(fit.beta_2sls * fit.fs.slope, fit.rf.slope));
            for (fit_slope, outcome) in [(fit.fs.slope, &ds.d_evol), (fit.rf.slope, &ds.y_evol)] {
                let y = rows(outcome);
                let oracle = match spec {
                    FitSpec::None => demeaned_slope(&y, &z, &w, false),
                    FitSpec::Intercept => intercept_slope(&y, &z, &w),
                    FitSpec::PeriodFe => demeaned_slope(&y, &z, &w, true),
                };
                worst_fwl = worst_fwl.max(rel_gap(fit_slope, oracle));
            }
            n += 1;
        }
    }
    let pass = worst_ratio <= 1e-10 && worst_fwl <= 1e-10;
    report(
        3,
        "2SLS ratio and partialling-out",
        pass,
        &format!("{n} fits: max relative ratio gap {worst_ratio:.2e}, max relative demeaned-slope gap {worst_fwl:.2e}"),
    );
    assert!(pass);
}

#[test]
fn c04_crc_exact_recovery() {
    let mut worst_truth = 0.0f64;
    let mut worst_paths = 0.0f64;
    let reps = 20;
    for seed in 0..reps {
        let c = SimConfig {
            n_locations: 50,
            n_sectors: 10,
            n_periods: 4,
            shock_law: normal_shocks(1.0, 1.0, 1.0),
            share_law: ShareLaw::Simplex { concentration: 0.5 },
            beta: EffectSpec::PerLocation { mean: 1.0, sd: 0.4 },
            alpha: EffectSpec::PerLocation { mean: 0.5, sd: 0.3 },
            mu_d: vec![0.4, -0.2, 0.7],
            mu_y: vec![-0.3, 0.5, 0.1],
            noise_d: 0.0,
            noise_y: 0.0,
            ..SimConfig::default()
        };
        let (ds, truth) = simulate(&c, seed).unwrap();
        let bartik = build_bartik(&ds, false).unwrap();
        let opts = CrcOptions::default();

        // construction truth, from the raw draws
        let g_n = ds.n_locations();
        let beta: Vec<f64> = (0..g_n).map(|g| truth.beta[0][g][0]).collect();
        let gamma: Vec<f64> = (0..g_n).map(|g| truth.beta[0][g][0] * truth.alpha[g][0]).collect();
        let avg_beta = beta.iter().sum::<f64>() / g_n as f64;
        let avg_gamma = gamma.iter().sum::<f64>() / g_n as f64;
        let z = bartik_loop(&ds);
        let zz_g: Vec<f64> = z.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
        let zz: f64 = zz_g.iter().sum();
        let fs_true: f64 = (0..g_n).map(|g| zz_g[g] / zz * beta[g]).sum();
        let rf_true: f64 = (0..g_n).map(|g| zz_g[g] / zz * gamma[g]).sum();

        let est = gmm_fit(&ds, &bartik, &opts).unwrap();
        let deb = debiased_estimators(&ds, &bartik, &est.trends).unwrap();
        let mut gaps = vec![
            (est.avg_beta - avg_beta).abs(),
            (est.avg_gamma - avg_gamma).abs(),
            (est.ratio - avg_gamma / avg_beta).abs(),
            (deb.fs_debiased - fs_true).abs(),
            (deb.rf_debiased - rf_true).abs(),
            (deb.ss_debiased - rf_true / fs_true).abs(),
        ];
        for t in 0..3 {
            gaps.push((est.trends.mu_d[t] - c.mu_d[t]).abs());
            gaps.push((est.trends.mu_y[t] - c.mu_y[t]).abs());
        }
        worst_truth = gaps.into_iter().fold(worst_truth, f64::max);

        let trends = estimate_trends(&bartik, &ds.d_evol, &ds.y_evol, &opts).unwrap();
        let two_step = estimate_avg_effects(&bartik, &ds.d_evol, &ds.y_evol, &trends, &opts).unwrap();
        for (a, b) in [
            (two_step.avg_beta, est.avg_beta),
            (two_step.avg_gamma, est.avg_gamma),
            (two_step.ratio, est.ratio),
        ]
        .into_iter()
        .chain(trends.mu_d.iter().copied().zip(est.trends.mu_d.iter().copied()))
        .chain(trends.mu_y.iter().copied().zip(est.trends.mu_y.iter().copied()))
        {
            worst_paths = worst_paths.max((a - b).abs());
        }
    }
    let pass = worst_truth <= 1e-8 && worst_paths <= 1e-10;
    report(
        4,
        "CRC exact recovery",
        pass,
        &format!(
            "{reps} datasets G=50 T=4: max gap to truth {worst_truth:.2e} (trends, averages, ratio, 3 debiased), GMM vs two-step {worst_paths:.2e}"
        ),
    );
    assert!(pass);
}

#[test]
fn c05_sign_reversal() {
    let (ds, truth) = planted_sign_reversal();
    let min_alpha = truth.alpha.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let bartik = build_bartik(&ds, false).unwrap();
    let fit = fit_bartik_system(&ds, &bartik, FitSpec::PeriodFe).unwrap();
    let w = weights_of(&ds, false);
    let z = rows(&bartik.z);
    let oracle = demeaned_slope(&rows(&ds.y_evol), &z, &w, true) / demeaned_slope(&rows(&ds.d_evol), &z, &w, true);
    let dec = fs_rf_cell_weights(&ds, &bartik, WeightSpec::PeriodFe).unwrap();
    let signs = sign_summary(&dec, "");
    let pass = min_alpha >= 0.1 && fit.beta_2sls <= -0.05 && oracle <= -0.05 && fit.fs.slope > 0.0;
    report(
        5,
        "sign reversal",
        pass,
        &format!(
            "min α = {min_alpha}, first stage {:.4}, 2SLS {:.6} (oracle {:.6}), {} negative / {} positive weights",
            fit.fs.slope, fit.beta_2sls, oracle, signs.n_negative, signs.n_positive
        ),
    );
    assert!(pass);
}

fn placebo_config(noise: f64) -> SimConfig {
    SimConfig {
        n_locations: 200,
        n_sectors: 10,
        n_periods: 3,
        shock_law: ShockLaw::Normal {
            mean: 0.5,
            mean_gradient: 1.0,
            means: Vec::new(),
            covariate_loading: 0.0,
            scale: 1.0,
            zero_periods: vec![0],
        },
        beta: EffectSpec::PerLocationPeriod { mean: 1.0, sd: 0.5 },
        alpha: EffectSpec::PerLocation { mean: 0.5, sd: 0.3 },
        mu_d: vec![0.3, -0.1],
        mu_y: vec![0.2, 0.4],
        noise_d: noise,
        noise_y: noise,
        ..SimConfig::default()
    }
}

#[test]
fn c06_placebo() {
    let start = Instant::now();
    let opts = PlaceboOptions::default();
    let mut worst_coef = 0.0f64;
    for seed in 0..20 {
        let (ds, _) = simulate(&placebo_config(0.0), seed).unwrap();
        let bartik = build_bartik(&ds, false).unwrap();
        let p = placebo(&ds, &bartik, &[0], 1, opts).unwrap();
        worst_coef = worst_coef.max(p.coef_d.abs()).max(p.coef_y.abs());
    }
    let reps = 1000u64;
    let rejections: Vec<(bool, bool)> = (0..reps)
        .into_par_iter()
        .map(|seed| {
            let (ds, _) = simulate(&placebo_config(1.0), 60_000 + seed).unwrap();
            let bartik = build_bartik(&ds, false).unwrap();
            let p = placebo(&ds, &bartik, &[0], 1, opts).unwrap();
            (p.p_value_d < 0.05, p.p_value_y < 0.05)
        })
        .collect();
    let rate_d = rejections.iter().filter(|r| r.0).count() as f64 / reps as f64;
    let rate_y = rejections.iter().filter(|r| r.1).count() as f64 / reps as f64;
    let elapsed = start.elapsed();
    let in_band = |r: f64| (0.03..=0.07).contains(&r);
    let pass = worst_coef <= 1e-10 && in_band(rate_d) && in_band(rate_y) && elapsed < Duration::from_secs(120);
    report(
        6,
        "placebo",
        pass,
        &format!(
            "zero-noise max |coef| {worst_coef:.2e}; null rejection at 5% over {reps} reps: ΔD {:.1}%, ΔY {:.1}%; {:.1}s",
            100.0 * rate_d,
            100.0 * rate_y,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn contrast_config() -> SimConfig {
    SimConfig {
        n_locations: 200,
        n_sectors: 30,
        n_periods: 4,
        shock_law: normal_shocks(1.0, 2.0, 0.5),
        share_law: ShareLaw::Simplex { concentration: 0.2 },
        beta: EffectSpec::PerLocation { mean: 1.0, sd: 0.3 },
        alpha: EffectSpec::PerLocation { mean: 0.5, sd: 0.3 },
        correlate_beta_with_exposure: 0.5,
        correlate_alpha_with_exposure: 0.8,
        mu_d: vec![0.5, -0.3, 0.2],
        mu_y: vec![0.1, 0.4, -0.2],
        noise_d: 0.5,
        noise_y: 0.5,
        ..SimConfig::default()
    }
}

#[test]
fn c07_monte_carlo_contrast() {
    let start = Instant::now();
    let reps = 500;
    let report_mc = monte_carlo(
        &contrast_config(),
        reps,
        7,
        &[BootTarget::CrcRatio, BootTarget::TslsFe],
        &CrcOptions::default(),
    )
    .unwrap();
    // recompute bias and MC-SE from the raw draws
    let z_score = |j: usize| {
        let e = &report_mc.estimators[j];
        let diffs: Vec<f64> = e.draws.iter().zip(&e.estimands).map(|(a, b)| a - b).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (mean, sd / n.sqrt(), mean / (sd / n.sqrt()))
    };
    let (crc_bias, crc_se, crc_z) = z_score(0);
    let (tsls_bias, tsls_se, tsls_z) = z_score(1);
    let elapsed = start.elapsed();
    let pass = report_mc.n_failed == 0
        && crc_z.abs() <= 3.0
        && tsls_z.abs() > 5.0
        && elapsed < Duration::from_secs(300);
    report(
        7,
        "Monte Carlo robustness contrast",
        pass,
        &format!(
            "{reps} reps G=200 S=30 T=4, {} failed; CRC ratio bias {crc_bias:.5} (MC-SE {crc_se:.5}, z {crc_z:.2}); Bartik 2SLS bias {tsls_bias:.5} (MC-SE {tsls_se:.5}, z {tsls_z:.2}); {:.1}s",
            report_mc.n_failed,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

fn exogeneity_rejections(loading: f64, reps: u64, level: f64, seed_base: u64) -> f64 {
    let config = SimConfig {
        n_locations: 5,
        n_sectors: 100,
        n_periods: 2,
        shock_law: ShockLaw::Normal {
            mean: 0.0,
            mean_gradient: 0.0,
            means: Vec::new(),
            covariate_loading: loading,
            scale: 1.0,
            zero_periods: Vec::new(),
        },
        n_sector_covariates: 3,
        ..SimConfig::default()
    };
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let (ds, truth) = simulate(&config, seed_base + r).unwrap();
            let shocks: Vec<f64> = truth.shocks[0].clone();
            let cov = &ds.sector_covariates.as_ref().unwrap().values;
            let test = shock_exogeneity_test(&shocks, cov, None, None).unwrap();
            usize::from(test.p_value < level)
        })
        .sum();
    hits as f64 / reps as f64
}

#[test]
fn c08_shock_exogeneity_test() {
    let power = exogeneity_rejections(0.5, 200, 0.01, 80_000);
    let size = exogeneity_rejections(0.0, 200, 0.05, 90_000);
    let pass = power >= 0.95 && (0.03..=0.07).contains(&size);
    report(
        8,
        "shock exogeneity test",
        pass,
        &format!(
            "S=100, K=3, HC1: planted dependence rejected at 1% in {:.1}% of 200 reps; null rejected at 5% in {:.1}% of 200 reps",
            100.0 * power,
            100.0 * size
        ),
    );
    assert!(pass);
}

fn artifacts_with_threads(threads: usize) -> Vec<(String, Vec<u8>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let mut out = Vec::new();
        let config = SimConfig {
            n_locations: 60,
            n_sectors: 8,
            n_periods: 4,
            shock_law: normal_shocks(1.0, 1.0, 1.0),
            beta: EffectSpec::PerLocation { mean: 1.0, sd: 0.3 },
            alpha: EffectSpec::PerLocation { mean: 0.4, sd: 0.2 },
            n_sector_covariates: 2,
            location_weights: true,
            ..SimConfig::default()
        };
        let (ds, truth) = simulate(&config, 99).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let mut names: Vec<PathBuf> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
        }
        out.push(("truth.json".into(), to_json_string(&truth).into_bytes()));

        let mc = monte_carlo(&config, 40, 5, &BootTarget::ALL, &CrcOptions::default()).unwrap();
        out.push(("mc.json".into(), to_json_string(&mc).into_bytes()));

        let bartik = build_bartik(&ds, true).unwrap();
        let boot = bootstrap(&ds, &bartik, &BootTarget::ALL, 100, 17, &CrcOptions::default()).unwrap();
        out.push(("bootstrap.json".into(), to_json_string(&boot).into_bytes()));
        out
    })
}

#[test]
fn c09_determinism() {
    let one = artifacts_with_threads(1);
    let four = artifacts_with_threads(4);
    let again = artifacts_with_threads(4);
    let differing: Vec<&str> = one
        .iter()
        .zip(&four)
        .zip(&again)
        .filter(|((a, b), c)| a != b || b != c)
        .map(|((a, _), _)| a.0.as_str())
        .collect();
    let pass = one.len() == four.len() && differing.is_empty();
    let total: usize = one.iter().map(|a| a.1.len()).sum();
    report(
        9,
        "determinism",
        pass,
        &format!(
            "{} artifacts ({total} bytes) compared across 1 and 4 threads; differing: {differing:?}",
            one.len()
        ),
    );
    assert!(pass);
}

/// Location of the public replication data converted to the canonical CSV
/// layout (`panel.csv`, `shocks.csv`, `shares.csv` in one directory).
const REPLICATION_ENV: &str = "SHIFTSHARE_REPLICATION_DIR";

#[test]
fn c10_replication() {
    let Some(dir) = std::env::var_os(REPLICATION_ENV).map(PathBuf::from) else {
        log_line(&format!("criterion 10 [replication]: SKIP ({REPLICATION_ENV} not set; replication data not available)"));
        return;
    };
    let [panel, shocks, shares] = shiftshare_core::dataset::canonical_paths(&dir);
    let ds = load_dataset(&panel, &shocks, &shares, &LoadOptions::default()).unwrap().dataset;
    let bartik = build_bartik(&ds, false).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 0.001;
    let fit = fit_bartik_system(&ds, &bartik, FitSpec::PeriodFe).unwrap();
    let table5 = close(fit.fs.slope, 0.867) && close(fit.rf.slope, -0.539) && close(fit.beta_2sls, -0.622);
    let crc = gmm_fit(&ds, &bartik, &CrcOptions::default());
    let (trends_ok, debiased_ok, crc_detail) = match &crc {
        Ok(est) => {
            let t = &est.trends;
            let trends_ok = t.mu_d.len() == 2
                && close(t.mu_d[0], 0.742)
                && close(t.mu_d[1], 1.469)
                && close(t.mu_y[0], -0.332)
                && close(t.mu_y[1], -1.016);
            let deb = debiased_estimators(&ds, &bartik, t).unwrap();
            let deb_ok = close(deb.fs_debiased, 0.668) && close(deb.rf_debiased, -0.533) && close(deb.ss_debiased, -0.798);
            (trends_ok, deb_ok, format!("trends {:?}/{:?}, debiased ({:.4}, {:.4}, {:.4})", t.mu_d, t.mu_y, deb.fs_debiased, deb.rf_debiased, deb.ss_debiased))
        }
        Err(e) => (false, false, format!("CRC failed: {e}")),
    };
    let dec = aggregate(&fs_rf_cell_weights(&ds, &bartik, WeightSpec::PeriodFe).unwrap(), WeightLevel::LocationPeriod).unwrap();
    let signs = sign_summary(&dec, "");
    let weights_ok = signs.n_negative == 854
        && signs.n_positive == 588
        && signs.sum_negative.is_some_and(|s| (s - -0.084).abs() <= 0.0005);
    let pass = table5 && trends_ok && debiased_ok && weights_ok;
    report(
        10,
        "replication",
        pass,
        &format!(
            "Bartik ({:.4}, {:.4}, {:.4}); {crc_detail}; weights {} negative / {} positive, negative sum {:?}",
            fit.fs.slope, fit.rf.slope, fit.beta_2sls, signs.n_negative, signs.n_positive, signs.sum_negative
        ),
    );
    assert!(pass);
}
