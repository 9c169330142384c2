use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;
use shiftshare_core::crc::bootstrap::{bootstrap, BootTarget, BootstrapResult};
use shiftshare_core::crc::{debiased_estimators, gmm_fit, CrcEstimates, CrcOptions, DebiasedEstimates, NearZeroPolicy};
use shiftshare_core::dataset::{write_dataset, Issue, ShiftShareDataset, Shocks, ValidationReport};
use shiftshare_core::instrument::{demean_shocks, leave_one_out_shocks, ShockTransform};
use shiftshare_core::regress::{placebo, shock_exogeneity_test, ExogeneityTestResult, PlaceboOptions, PlaceboResult, TslsFit};
use shiftshare_core::simulate::monte_carlo::monte_carlo;
use shiftshare_core::simulate::{simulate, SimConfig, SimTruth};
use shiftshare_core::weights::{
    aggregate, akm_weights, fs_rf_cell_weights, tsls_weight_signs, tsls_weights_homogeneous_fs, weight_summary,
    ShockVariances, SignSummary, WeightDecomposition, WeightLevel, WeightSpec, WeightSummary,
};
use shiftshare_core::{build_bartik, fit_bartik_system, load_dataset, validate_dataset, BartikPanel, FitSpec, LoadOptions};

use crate::args::*;
use crate::output::{num, Row, Writer};
use crate::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut w = Writer::new(cli);
    match &cli.command {
        Command::Validate(a) => validate(&mut w, a),
        Command::Instrument(a) => instrument(&mut w, a),
        Command::Regress(a) => regress(&mut w, a),
        Command::Weights(a) => weights(&mut w, a),
        Command::Crc(a) => crc(&mut w, a),
        Command::Debias(a) => debias(&mut w, a),
        Command::Placebo(a) => run_placebo(&mut w, a),
        Command::ShockTest(a) => shock_test(&mut w, a),
        Command::Simulate(a) => run_simulate(&mut w, a),
        Command::Mc(a) => mc(&mut w, a),
        Command::Report(a) => report(&mut w, a),
    }
}

struct Loaded {
    ds: ShiftShareDataset,
    validation: ValidationReport,
    load_warnings: Vec<Issue>,
}

fn load_unchecked(w: &mut Writer, a: &DataArgs) -> Result<Loaded, CliError> {
    w.inputs.add("panel", &a.panel)?;
    w.inputs.add("shocks", &a.shocks)?;
    w.inputs.add("shares", &a.shares)?;
    if let Some(p) = &a.sector_covariates {
        w.inputs.add("sector_covariates", p)?;
    }
    if let Some(p) = &a.location_covariates {
        w.inputs.add("location_covariates", p)?;
    }
    let options = LoadOptions {
        sector_covariates: a.sector_covariates.clone(),
        location_covariates: a.location_covariates.clone(),
    };
    let loaded = load_dataset(&a.panel, &a.shocks, &a.shares, &options)?;
    for issue in &loaded.warnings {
        eprintln!("warning: {}", issue.message);
    }
    let validation = validate_dataset(&loaded.dataset);
    Ok(Loaded {
        ds: loaded.dataset,
        validation,
        load_warnings: loaded.warnings,
    })
}

/// Load, validate and refuse rejected datasets.
fn load(w: &mut Writer, a: &DataArgs) -> Result<ShiftShareDataset, CliError> {
    let l = load_unchecked(w, a)?;
    for issue in &l.validation.warnings {
        eprintln!("warning: {}", issue.message);
    }
    if let Some(first) = l.validation.errors.first() {
        for issue in &l.validation.errors {
            eprintln!("error: {}", issue.message);
        }
        return Err(CliError::Usage(format!(
            "dataset rejected with {} error(s), first: {}",
            l.validation.errors.len(),
            first.message
        )));
    }
    if w.cli.global.weighted && l.ds.location_weights.is_none() {
        return Err(CliError::Usage("--weighted needs a `weight` column in the panel".into()));
    }
    Ok(l.ds)
}

fn bartik_for(w: &Writer, ds: &ShiftShareDataset) -> Result<BartikPanel, CliError> {
    Ok(build_bartik(ds, w.cli.global.weighted)?)
}

fn period(ds: &ShiftShareDataset, label: &str) -> Result<usize, CliError> {
    ds.period_index(label)
        .ok_or_else(|| CliError::Usage(format!("unknown period `{label}`; known: {}", ds.periods.join(", "))))
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path, required: &[&str]) -> Result<Table, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let perr = |e: csv::Error| CliError::Parse(path.to_path_buf(), e.to_string());
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let headers: Vec<String> = rdr.headers().map_err(perr)?.iter().map(str::to_string).collect();
    for r in required {
        if !headers.iter().any(|h| h == r) {
            return Err(CliError::Parse(path.to_path_buf(), format!("missing required column `{r}`")));
        }
    }
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()
        .map_err(perr)?;
    Ok(Table { headers, rows })
}

impl Table {
    fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn number(&self, path: &Path, row: &[String], col: usize) -> Result<f64, CliError> {
        let raw = &row[col];
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::Parse(path.to_path_buf(), format!("`{raw}` is not a finite number")))
    }
}

fn index<'a>(ids: &'a [String], path: &Path, kind: &str, id: &str) -> Result<usize, CliError> {
    ids.iter()
        .position(|x| x == id)
        .ok_or_else(|| CliError::Parse(path.to_path_buf(), format!("unknown {kind} `{id}`")))
}

// ---------------------------------------------------------------- validate

#[derive(Serialize)]
struct ValidateOut<'a> {
    n_locations: usize,
    n_sectors: usize,
    n_periods: usize,
    periods: &'a [String],
    per_location_shocks: bool,
    time_varying_shares: bool,
    has_location_weights: bool,
    accepted: bool,
    load_warnings: &'a [Issue],
    validation: &'a ValidationReport,
}

fn validate(w: &mut Writer, a: &DataArgs) -> Result<(), CliError> {
    let l = load_unchecked(w, a)?;
    let ds = &l.ds;
    let out = ValidateOut {
        n_locations: ds.n_locations(),
        n_sectors: ds.n_sectors(),
        n_periods: ds.n_periods(),
        periods: &ds.periods,
        per_location_shocks: matches!(ds.shocks, Shocks::PerLocation(_)),
        time_varying_shares: matches!(ds.shares, shiftshare_core::Shares::TimeVarying(_)),
        has_location_weights: ds.location_weights.is_some(),
        accepted: l.validation.is_accepted(),
        load_warnings: &l.load_warnings,
        validation: &l.validation,
    };
    w.json("validation.json", &out)?;
    for issue in &l.validation.warnings {
        eprintln!("warning: {}", issue.message);
    }
    for issue in &l.validation.errors {
        eprintln!("error: {}", issue.message);
    }
    if l.validation.is_accepted() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("dataset rejected with {} error(s)", l.validation.errors.len())))
    }
}

// ---------------------------------------------------------------- instrument

#[derive(Serialize)]
struct InstrumentOut<'a> {
    n_locations: usize,
    n_periods: usize,
    weighted: bool,
    leave_one_out: bool,
    demeaned: bool,
    z_bar: &'a [f64],
    z_min: f64,
    z_max: f64,
}

/// Per-location shocks from a long levels file.
fn loo_from_levels(ds: &ShiftShareDataset, path: &Path, transform: Transform) -> Result<Vec<DMatrix<f64>>, CliError> {
    let t = read_table(path, &["sector", "location", "period", "level"])?;
    let (cs, cg, cp, cl) = (t.col("sector").unwrap(), t.col("location").unwrap(), t.col("period").unwrap(), t.col("level").unwrap());
    let mut labels: Vec<String> = t.rows.iter().map(|r| r[cp].clone()).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != ds.n_periods() + 1 || labels[1..] != ds.periods[..] {
        return Err(CliError::Parse(
            path.to_path_buf(),
            format!(
                "level periods {:?} must be one base period followed by the evolution periods {:?}",
                labels, ds.periods
            ),
        ));
    }
    let mut levels = vec![DMatrix::zeros(ds.n_sectors(), ds.n_locations()); labels.len()];
    for r in &t.rows {
        let s = index(&ds.sectors, path, "sector", &r[cs])?;
        let g = index(&ds.locations, path, "location", &r[cg])?;
        let p = labels.iter().position(|l| *l == r[cp]).unwrap();
        levels[p][(s, g)] = t.number(path, r, cl)?;
    }
    let transform = match transform {
        Transform::LogDiff => ShockTransform::LogDiff,
        Transform::Diff => ShockTransform::Diff,
        Transform::GrowthRate => ShockTransform::GrowthRate,
    };
    Ok(leave_one_out_shocks(&levels, transform)?)
}

fn instrument(w: &mut Writer, a: &InstrumentArgs) -> Result<(), CliError> {
    let mut ds = load(w, &a.data)?;
    if a.levels.is_some() && a.demean {
        return Err(CliError::Usage("--demean applies to sector shocks, not leave-one-out shocks".into()));
    }
    if let Some(path) = &a.levels {
        w.inputs.add("levels", path)?;
        ds.shocks = Shocks::PerLocation(loo_from_levels(&ds, path, a.transform)?);
        let mut out = String::from("sector,period,shock,location\n");
        if let Shocks::PerLocation(zs) = &ds.shocks {
            for (s, sector) in ds.sectors.iter().enumerate() {
                for (t, z) in zs.iter().enumerate() {
                    for (g, loc) in ds.locations.iter().enumerate() {
                        writeln!(out, "{sector},{},{},{loc}", ds.periods[t], z[(s, g)]).unwrap();
                    }
                }
            }
        }
        w.write_file("shocks_loo.csv", &out)?;
    }
    if a.demean {
        ds = demean_shocks(&ds)?;
    }
    let b = bartik_for(w, &ds)?;
    let mut out = String::from("location,period,z\n");
    for (g, loc) in ds.locations.iter().enumerate() {
        for (t, per) in ds.periods.iter().enumerate() {
            writeln!(out, "{loc},{per},{}", b.z[(g, t)]).unwrap();
        }
    }
    w.write_file("bartik.csv", &out)?;
    let summary = InstrumentOut {
        n_locations: b.n_locations(),
        n_periods: b.n_periods(),
        weighted: b.weighted(),
        leave_one_out: a.levels.is_some(),
        demeaned: a.demean,
        z_bar: &b.z_bar,
        z_min: b.z.min(),
        z_max: b.z.max(),
    };
    if w.cli.global.format.json() {
        w.json("instrument.json", &summary)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- regress

const AKM_NOTE: &str = "exposure-robust (AKM) standard errors are not computed; reported SEs cluster by location";

#[derive(Serialize)]
struct RegressOut<'a> {
    #[serde(flatten)]
    fit: &'a TslsFit,
    exposure_robust_se: Option<f64>,
    exposure_robust_se_note: &'static str,
}

fn fit_spec(s: RegSpec) -> FitSpec {
    match s {
        RegSpec::None => FitSpec::None,
        RegSpec::Intercept => FitSpec::Intercept,
        RegSpec::Fe => FitSpec::PeriodFe,
    }
}

fn regress(w: &mut Writer, a: &RegressArgs) -> Result<(), CliError> {
    let ds = load(w, &a.data)?;
    let b = bartik_for(w, &ds)?;
    let fit = fit_bartik_system(&ds, &b, fit_spec(a.spec))?;
    let rows = [
        Row::new("first_stage", fit.fs.slope, fit.fs.se_cluster),
        Row::new("reduced_form", fit.rf.slope, fit.rf.se_cluster),
        Row::new("2sls", fit.beta_2sls, fit.se_cluster),
    ];
    let out = RegressOut {
        fit: &fit,
        exposure_robust_se: None,
        exposure_robust_se_note: AKM_NOTE,
    };
    w.report("regress", &out, &rows)
}

// ---------------------------------------------------------------- weights

#[derive(Serialize)]
struct WeightsOut {
    spec: WeightSpec,
    level: WeightLevel,
    assume: Assume,
    denominator: f64,
    bias_factors: Vec<f64>,
    first_stage_sign: Option<f64>,
    summary: Option<WeightSummary>,
    signs: Option<SignSummary>,
    akm: Option<WeightSummary>,
}

fn level_of(l: Level) -> WeightLevel {
    match l {
        Level::Cell => WeightLevel::Cell,
        Level::Gt => WeightLevel::LocationPeriod,
        Level::G => WeightLevel::Location,
    }
}

fn at_level(dec: &WeightDecomposition, level: WeightLevel) -> Result<WeightDecomposition, CliError> {
    Ok(if dec.level == level { dec.clone() } else { aggregate(dec, level)? })
}

fn weights_csv(ds: &ShiftShareDataset, dec: &WeightDecomposition, signs_only: bool) -> String {
    let mut out = String::from(if signs_only { "location,period,sector,sign\n" } else { "location,period,sector,weight\n" });
    for (k, v) in dec.iter() {
        let per = k.period.map_or("", |t| ds.periods[t].as_str());
        let sec = k.sector.map_or("", |s| ds.sectors[s].as_str());
        if signs_only {
            writeln!(out, "{},{per},{sec},{}", ds.locations[k.location], v.signum()).unwrap();
        } else {
            writeln!(out, "{},{per},{sec},{}", ds.locations[k.location], num(*v)).unwrap();
        }
    }
    out
}

fn read_variances(ds: &ShiftShareDataset, path: &Path) -> Result<ShockVariances, CliError> {
    let t = read_table(path, &["sector", "variance"])?;
    let (cs, cv) = (t.col("sector").unwrap(), t.col("variance").unwrap());
    match t.col("period") {
        None => {
            let mut v = vec![f64::NAN; ds.n_sectors()];
            for r in &t.rows {
                v[index(&ds.sectors, path, "sector", &r[cs])?] = t.number(path, r, cv)?;
            }
            if v.iter().any(|x| x.is_nan()) {
                return Err(CliError::Parse(path.to_path_buf(), "every sector needs a variance".into()));
            }
            Ok(ShockVariances::PerSector(v))
        }
        Some(cp) => {
            let mut v = vec![vec![f64::NAN; ds.n_sectors()]; ds.n_periods()];
            for r in &t.rows {
                let s = index(&ds.sectors, path, "sector", &r[cs])?;
                let p = index(&ds.periods, path, "period", &r[cp])?;
                v[p][s] = t.number(path, r, cv)?;
            }
            if v.iter().flatten().any(|x| x.is_nan()) {
                return Err(CliError::Parse(path.to_path_buf(), "every sector and period needs a variance".into()));
            }
            Ok(ShockVariances::PerSectorPeriod(v))
        }
    }
}

fn weights(w: &mut Writer, a: &WeightsArgs) -> Result<(), CliError> {
    let ds = load(w, &a.data)?;
    let b = bartik_for(w, &ds)?;
    let level = match (a.level, a.assume) {
        (Some(l), _) => level_of(l),
        (None, Assume::None) => WeightLevel::Cell,
        (None, Assume::Bg) => WeightLevel::Location,
        (None, _) => WeightLevel::LocationPeriod,
    };
    w.resolve("level", match level {
        WeightLevel::Cell => Level::Cell,
        WeightLevel::LocationPeriod => Level::Gt,
        WeightLevel::Location => Level::G,
    });
    let spec = match a.spec {
        WSpec::Fe => WeightSpec::PeriodFe,
        WSpec::None => WeightSpec::NoFe,
    };
    let covariates = a
        .covariates
        .iter()
        .map(|name| {
            let col = ds.location_covariates.as_ref().and_then(|c| c.column(name));
            col.map(|v| (name.clone(), v))
                .ok_or_else(|| CliError::Usage(format!("location covariate `{name}` not found")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let cells = fs_rf_cell_weights(&ds, &b, spec)?;
    let dec = at_level(&cells, level)?;
    let mut out = WeightsOut {
        spec,
        level,
        assume: a.assume,
        denominator: cells.denominator,
        bias_factors: cells.bias_factors.clone(),
        first_stage_sign: None,
        summary: None,
        signs: None,
        akm: None,
    };
    let csv = match a.assume {
        Assume::None => {
            out.summary = Some(weight_summary(&dec, "first-stage and reduced-form weights", &covariates)?);
            weights_csv(&ds, &dec, false)
        }
        Assume::BgT | Assume::Bg => {
            let want = if a.assume == Assume::BgT { WeightLevel::LocationPeriod } else { WeightLevel::Location };
            if level != want || spec != WeightSpec::PeriodFe {
                return Err(CliError::Usage(format!(
                    "--assume {} needs --spec fe at level {}",
                    if a.assume == Assume::BgT { "bg_t" } else { "bg" },
                    if a.assume == Assume::BgT { "gt" } else { "g" }
                )));
            }
            let fs = fit_bartik_system(&ds, &b, FitSpec::PeriodFe)?.fs.slope.signum();
            let signs = tsls_weight_signs(&dec, fs)?;
            out.first_stage_sign = Some(fs);
            out.signs = Some(signs);
            let flipped = WeightDecomposition {
                weights: dec.iter().map(|(k, v)| (*k, v * fs)).collect(),
                ..dec.clone()
            };
            weights_csv(&ds, &flipped, true)
        }
        Assume::B => {
            let tsls = tsls_weights_homogeneous_fs(&at_level(&cells, WeightLevel::LocationPeriod)?)?;
            let tsls = at_level(&tsls, level.max(WeightLevel::LocationPeriod))?;
            out.level = tsls.level;
            out.summary = Some(weight_summary(&tsls, "2SLS weights, beta_sgt = beta", &covariates)?);
            weights_csv(&ds, &tsls, false)
        }
    };
    w.write_file("weights.csv", &csv)?;
    if let Some(path) = &a.shock_variances {
        w.inputs.add("shock_variances", path)?;
        let akm = akm_weights(&ds, &read_variances(&ds, path)?)?;
        w.write_file("akm_weights.csv", &weights_csv(&ds, &akm, false))?;
        out.akm = Some(weight_summary(&akm, "exposure-variance weights", &[])?);
    }
    if w.cli.global.format.json() {
        w.json("weights.json", &out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- crc / debias

fn crc_options(f: &CrcFlags) -> Result<CrcOptions, CliError> {
    let near_zero = match f.near_zero_policy {
        Policy::Error => NearZeroPolicy::Error,
        Policy::Drop => NearZeroPolicy::Drop,
        Policy::Winsorize => {
            if !(0.0..1.0).contains(&f.winsorize_quantile) {
                return Err(CliError::Usage("--winsorize-quantile must lie in [0, 1)".into()));
            }
            NearZeroPolicy::Winsorize {
                quantile: f.winsorize_quantile,
            }
        }
    };
    if !(f.tol >= 0.0) {
        return Err(CliError::Usage("--tol must be nonnegative".into()));
    }
    Ok(CrcOptions {
        near_zero,
        tol: f.tol,
        additive_time: f.additive_time,
    })
}

#[derive(Serialize)]
struct CrcOut<'a> {
    options: CrcOptions,
    periods: &'a [String],
    locations_dropped: Vec<&'a str>,
    estimates: &'a CrcEstimates,
    bootstrap: Option<BootstrapResult>,
}

fn unweighted_note(w: &mut Writer) {
    if w.cli.global.weighted {
        w.notes.push("correlated-random-coefficient estimators are unweighted; --weighted is ignored".into());
        eprintln!("note: --weighted is ignored by this estimator");
    }
}

fn crc(w: &mut Writer, a: &CrcArgs) -> Result<(), CliError> {
    let ds = load(w, &a.data)?;
    unweighted_note(w);
    let b = build_bartik(&ds, false)?;
    let options = crc_options(&a.crc)?;
    let est = gmm_fit(&ds, &b, &options)?;
    let boot = if a.bootstrap > 0 {
        let targets = [BootTarget::CrcAvgBeta, BootTarget::CrcAvgGamma, BootTarget::CrcRatio];
        Some(bootstrap(&ds, &b, &targets, a.bootstrap, a.seed, &options)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for (t, per) in ds.periods.iter().enumerate() {
        let p = ds.n_periods();
        rows.push(Row::new(format!("mu_d[{per}]"), est.trends.mu_d[t], est.trends.vcov[(t, t)].sqrt()));
        rows.push(Row::new(format!("mu_y[{per}]"), est.trends.mu_y[t], est.trends.vcov[(p + t, p + t)].sqrt()));
    }
    rows.push(Row::new("avg_beta", est.avg_beta, est.se_avg_beta));
    rows.push(Row::new("avg_gamma", est.avg_gamma, est.se_avg_gamma));
    rows.push(Row::new("ratio", est.ratio, est.se_ratio));
    if let Some(bt) = &boot {
        for (name, (p, se)) in ["avg_beta", "avg_gamma", "ratio"].iter().zip(bt.point.iter().zip(&bt.se)) {
            rows.push(Row::new(format!("{name}_bootstrap"), *p, *se));
        }
    }
    let out = CrcOut {
        options,
        periods: &ds.periods,
        locations_dropped: est.trends.dropped.iter().map(|&g| ds.locations[g].as_str()).collect(),
        estimates: &est,
        bootstrap: boot,
    };
    w.report("crc", &out, &rows)
}

#[derive(Serialize)]
struct DebiasOut<'a> {
    options: CrcOptions,
    mu_d: &'a [f64],
    mu_y: &'a [f64],
    estimates: &'a DebiasedEstimates,
    bootstrap: Option<BootstrapResult>,
}

fn debias(w: &mut Writer, a: &CrcArgs) -> Result<(), CliError> {
    let ds = load(w, &a.data)?;
    unweighted_note(w);
    let b = build_bartik(&ds, false)?;
    let options = crc_options(&a.crc)?;
    let est = gmm_fit(&ds, &b, &options)?;
    let mut deb = debiased_estimators(&ds, &b, &est.trends)?;
    let boot = if a.bootstrap > 0 {
        let targets = [
            BootTarget::DebiasedFs,
            BootTarget::DebiasedRf,
            BootTarget::DebiasedSs,
            BootTarget::DebiasedMinusTsls,
        ];
        let r = bootstrap(&ds, &b, &targets, a.bootstrap, a.seed, &options)?;
        deb.se_bootstrap = r.se[..3].to_vec();
        deb.n_draws = r.draws.len();
        Some(r)
    } else {
        None
    };
    let se = |i: usize| deb.se_bootstrap.get(i).copied().unwrap_or(f64::NAN);
    let mut rows = vec![
        Row::new("fs_debiased", deb.fs_debiased, se(0)),
        Row::new("rf_debiased", deb.rf_debiased, se(1)),
        Row::new("ss_debiased", deb.ss_debiased, se(2)),
    ];
    if let Some(r) = &boot {
        rows.push(Row::new("ss_debiased_minus_2sls", r.point[3], r.se[3]));
    }
    let out = DebiasOut {
        options,
        mu_d: &est.trends.mu_d,
        mu_y: &est.trends.mu_y,
        estimates: &deb,
        bootstrap: boot,
    };
    w.report("debias", &out, &rows)
}

// ---------------------------------------------------------------- placebo

fn run_placebo(w: &mut Writer, a: &PlaceboArgs) -> Result<(), CliError> {
    let ds = load(w, &a.data)?;
    let b = bartik_for(w, &ds)?;
    let pre = a.pre.iter().map(|l| period(&ds, l)).collect::<Result<Vec<_>, _>>()?;
    let inst = period(&ds, &a.instrument)?;
    let options = PlaceboOptions {
        strict: !a.allow_pre_shocks,
        shock_tol: a.shock_tol,
    };
    let r: PlaceboResult = placebo(&ds, &b, &pre, inst, options)?;
    for warning in &r.warnings {
        eprintln!("warning: {warning}");
    }
    let rows = [Row::new("coef_d", r.coef_d, r.se_d), Row::new("coef_y", r.coef_y, r.se_y)];
    w.report("placebo", &r, &rows)
}

// ---------------------------------------------------------------- shock-test

#[derive(Serialize)]
struct ShockTestOut<'a> {
    covariates: &'a [String],
    periods: Vec<&'a str>,
    weighted_by_exposure: bool,
    clustered: bool,
    #[serde(flatten)]
    test: &'a ExogeneityTestResult,
}

fn shock_test(w: &mut Writer, a: &ShockTestArgs) -> Result<(), CliError> {
    if a.data.sector_covariates.is_none() {
        return Err(CliError::Usage("shock-test needs --sector-covariates".into()));
    }
    let ds = load(w, &a.data)?;
    let Shocks::Sector(z) = &ds.shocks else {
        return Err(CliError::Core(shiftshare_core::Error::PerLocationShocksUnsupported));
    };
    let cov = ds.sector_covariates.as_ref().expect("loaded with covariates");
    let names: Vec<String> = if a.covariates.is_empty() { cov.names.clone() } else { a.covariates.clone() };
    let cols = names
        .iter()
        .map(|n| cov.column(n).ok_or_else(|| CliError::Usage(format!("sector covariate `{n}` not found"))))
        .collect::<Result<Vec<_>, _>>()?;
    let periods: Vec<usize> = if a.periods.is_empty() {
        (0..ds.n_periods()).collect()
    } else {
        a.periods.iter().map(|l| period(&ds, l)).collect::<Result<_, _>>()?
    };
    let s_n = ds.n_sectors();
    let n = s_n * periods.len();
    let shocks: Vec<f64> = periods.iter().flat_map(|&t| (0..s_n).map(move |s| z[(s, t)])).collect();
    let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i % s_n]);
    let exposure = ds.mean_sector_exposure();
    let weights: Option<Vec<f64>> = (a.weight_by == SectorWeight::Exposure).then(|| (0..n).map(|i| exposure[i % s_n]).collect());
    let clusters: Option<Vec<usize>> = match &a.clusters {
        Some(path) => {
            w.inputs.add("clusters", path)?;
            let t = read_table(path, &["sector", "cluster"])?;
            let (cs, cc) = (t.col("sector").unwrap(), t.col("cluster").unwrap());
            let mut ids: BTreeMap<String, usize> = BTreeMap::new();
            let mut of_sector = vec![None; s_n];
            for r in &t.rows {
                let next = ids.len();
                let id = *ids.entry(r[cc].clone()).or_insert(next);
                of_sector[index(&ds.sectors, path, "sector", &r[cs])?] = Some(id);
            }
            let of_sector = of_sector
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| CliError::Parse(path.to_path_buf(), "every sector needs a cluster".into()))?;
            Some((0..n).map(|i| of_sector[i % s_n]).collect())
        }
        None if periods.len() > 1 => {
            w.notes.push("several periods stacked; standard errors cluster by sector".into());
            Some((0..n).map(|i| i % s_n).collect())
        }
        None => None,
    };
    let r = shock_exogeneity_test(&shocks, &x, weights.as_deref(), clusters.as_deref())?;
    let mut rows: Vec<Row> = names
        .iter()
        .zip(r.coefficients.iter().zip(&r.ses))
        .map(|(n, (c, s))| Row::new(n.clone(), *c, *s))
        .collect();
    rows.insert(0, Row::new("intercept", r.intercept, r.intercept_se));
    rows.push(Row::new("joint_f", r.f_stat, f64::NAN));
    rows.push(Row::new("joint_p_value", r.p_value, f64::NAN));
    let out = ShockTestOut {
        covariates: &names,
        periods: periods.iter().map(|&t| ds.periods[t].as_str()).collect(),
        weighted_by_exposure: weights.is_some(),
        clustered: clusters.is_some(),
        test: &r,
    };
    w.report("shock_test", &out, &rows)
}

// ---------------------------------------------------------------- simulate / mc

fn sim_config(w: &mut Writer, path: Option<&Path>) -> Result<SimConfig, CliError> {
    let Some(path) = path else {
        return Ok(SimConfig::default());
    };
    w.inputs.add("config", path)?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let config: SimConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse(path.to_path_buf(), e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct TruthOut<'a> {
    sim_config: &'a SimConfig,
    seed: u64,
    avg_beta: f64,
    avg_gamma: f64,
    ratio_estimand: f64,
    truth: &'a SimTruth,
}

fn run_simulate(w: &mut Writer, a: &SimulateArgs) -> Result<(), CliError> {
    let config = sim_config(w, a.config.as_deref())?;
    let (ds, truth) = simulate(&config, a.seed)?;
    write_dataset(&ds, w.dir()?)?;
    let out = TruthOut {
        sim_config: &config,
        seed: a.seed,
        avg_beta: truth.avg_beta(),
        avg_gamma: truth.avg_gamma(),
        ratio_estimand: truth.ratio_estimand(),
        truth: &truth,
    };
    w.json("truth.json", &out)
}

fn mc(w: &mut Writer, a: &McArgs) -> Result<(), CliError> {
    let config = sim_config(w, a.config.as_deref())?;
    let targets: Vec<BootTarget> = if a.estimators.is_empty() {
        BootTarget::ALL.to_vec()
    } else {
        a.estimators
            .iter()
            .map(|e| {
                serde_json::from_value(Value::String(e.clone()))
                    .map_err(|_| CliError::Usage(format!("unknown estimator `{e}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let options = crc_options(&a.crc)?;
    let r = monte_carlo(&config, a.reps, a.seed, &targets, &options)?;
    if r.n_failed > 0 {
        eprintln!("warning: {} of {} replications failed and were skipped", r.n_failed, r.reps);
    }
    let rows: Vec<Row> = r
        .estimators
        .iter()
        .map(|e| {
            let name = serde_json::to_value(e.target).unwrap();
            Row::new(format!("{}_bias", name.as_str().unwrap()), e.bias, e.mc_se)
        })
        .collect();
    if w.cli.global.format.json() {
        w.json("mc_report.json", &r)?;
    }
    if w.cli.global.format.csv() {
        w.table("mc_report", &rows)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- report

#[derive(Serialize, Default)]
struct Summary {
    /// Bartik regressions: first stage, reduced form, 2SLS.
    bartik: Vec<Entry>,
    /// Correlated-random-coefficient averages and their ratio.
    crc_averages: Vec<Entry>,
    crc_trends: Vec<Entry>,
    debiased: Vec<Entry>,
    placebo: Vec<Entry>,
    weights: Vec<WeightEntry>,
}

#[derive(Serialize)]
struct Entry {
    name: String,
    estimate: Option<f64>,
    se: Option<f64>,
    source: String,
}

#[derive(Serialize)]
struct WeightEntry {
    source: String,
    assume: Value,
    level: Value,
    spec: Value,
    n_negative: Value,
    n_positive: Value,
    sum_negative: Value,
    sum_positive: Value,
}

fn report(w: &mut Writer, a: &ReportArgs) -> Result<(), CliError> {
    let mut s = Summary::default();
    let mut found = 0;
    for dir in &a.dirs {
        let mut read = |name: &str| -> Result<Option<(String, Value)>, CliError> {
            let path = dir.join(name);
            if !path.exists() {
                return Ok(None);
            }
            w.inputs.add(name.trim_end_matches(".json"), &path)?;
            let text = fs::read_to_string(&path).map_err(|e| CliError::Io(path.clone(), e))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(path.clone(), e.to_string()))?;
            found += 1;
            Ok(Some((path.display().to_string(), v["result"].clone())))
        };
        let entry = |src: &str, name: &str, est: &Value, se: &Value| Entry {
            name: name.into(),
            estimate: est.as_f64(),
            se: se.as_f64(),
            source: src.into(),
        };
        if let Some((src, r)) = read("regress.json")? {
            s.bartik.push(entry(&src, "first_stage", &r["fs"]["slope"], &r["fs"]["se_cluster"]));
            s.bartik.push(entry(&src, "reduced_form", &r["rf"]["slope"], &r["rf"]["se_cluster"]));
            s.bartik.push(entry(&src, "2sls", &r["beta_2sls"], &r["se_cluster"]));
        }
        if let Some((src, r)) = read("crc.json")? {
            let e = &r["estimates"];
            for k in ["avg_beta", "avg_gamma", "ratio"] {
                s.crc_averages.push(entry(&src, k, &e[k], &e[format!("se_{k}").as_str()]));
            }
            let t = &e["trends"];
            let p = t["mu_d"].as_array().map_or(0, Vec::len);
            for (key, off) in [("mu_d", 0), ("mu_y", p)] {
                for (i, v) in t[key].as_array().into_iter().flatten().enumerate() {
                    let var = &t["vcov"][off + i][off + i];
                    let se = var.as_f64().map(f64::sqrt).map_or(Value::Null, Value::from);
                    let label = r["periods"][i].as_str().map_or_else(|| i.to_string(), str::to_string);
                    s.crc_trends.push(entry(&src, &format!("{key}[{label}]"), v, &se));
                }
            }
        }
        if let Some((src, r)) = read("debias.json")? {
            let e = &r["estimates"];
            for (i, k) in ["fs_debiased", "rf_debiased", "ss_debiased"].iter().enumerate() {
                s.debiased.push(entry(&src, k, &e[*k], &e["se_bootstrap"][i]));
            }
        }
        if let Some((src, r)) = read("placebo.json")? {
            s.placebo.push(entry(&src, "coef_d", &r["coef_d"], &r["se_d"]));
            s.placebo.push(entry(&src, "coef_y", &r["coef_y"], &r["se_y"]));
        }
        if let Some((src, r)) = read("weights.json")? {
            let signs = if r["signs"].is_null() { &r["summary"] } else { &r["signs"] };
            s.weights.push(WeightEntry {
                source: src,
                assume: r["assume"].clone(),
                level: r["level"].clone(),
                spec: r["spec"].clone(),
                n_negative: signs["n_negative"].clone(),
                n_positive: signs["n_positive"].clone(),
                sum_negative: signs["sum_negative"].clone(),
                sum_positive: signs["sum_positive"].clone(),
            });
        }
    }
    if found == 0 {
        return Err(CliError::Usage("no reports (regress, crc, debias, placebo, weights) found in the given directories".into()));
    }
    let rows: Vec<Row> = [&s.bartik, &s.crc_averages, &s.crc_trends, &s.debiased, &s.placebo]
        .into_iter()
        .flatten()
        .map(|e| Row::new(e.name.clone(), e.estimate.unwrap_or(f64::NAN), e.se.unwrap_or(f64::NAN)))
        .collect();
    w.report("summary", &s, &rows)
}
