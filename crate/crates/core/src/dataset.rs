//! In-memory model of a shift-share design and its delimited-file format.
//!
//! A design is a balanced panel of `G` locations observed over `P = T − 1`
//! evolution periods, `S` sectors with period shocks, and a sector × location
//! exposure-share matrix. Identifiers are strings; dense indices are assigned
//! in lexicographic order of the identifiers so that two loads of the same
//! files always agree.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance used to decide whether a location's shares sum to one.
pub const SHARE_SUM_TOL: f64 = 1e-9;

/// Sector shocks, either common to all locations or recomputed per location
/// (leave-one-out national shocks).
#[derive(Debug, Clone, PartialEq)]
pub enum Shocks {
    /// `S × P` matrix of `ΔZ_{s,t}`.
    Sector(DMatrix<f64>),
    /// One `S × G` matrix per period holding `ΔZ^{(−g)}_{s,t}`.
    PerLocation(Vec<DMatrix<f64>>),
}

/// Exposure shares, fixed at the start of the panel or one matrix per period.
#[derive(Debug, Clone, PartialEq)]
pub enum Shares {
    /// `S × G` matrix of `Q_{s,g}`.
    Fixed(DMatrix<f64>),
    /// One `S × G` matrix per period.
    TimeVarying(Vec<DMatrix<f64>>),
}

/// Named covariate columns; one row per entity (sector or location).
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl Covariates {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.column(j).iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftShareDataset {
    pub locations: Vec<String>,
    pub sectors: Vec<String>,
    /// Evolution-period labels; label `t` denotes the change from `t − 1` to `t`.
    pub periods: Vec<String>,
    /// `G × P` treatment evolutions `ΔD_{g,t}`.
    pub d_evol: DMatrix<f64>,
    /// `G × P` outcome evolutions `ΔY_{g,t}`.
    pub y_evol: DMatrix<f64>,
    pub shocks: Shocks,
    pub shares: Shares,
    /// Location weights `N_g`; `None` means every location weighs one.
    pub location_weights: Option<Vec<f64>>,
    pub sector_covariates: Option<Covariates>,
    pub location_covariates: Option<Covariates>,
}

impl ShiftShareDataset {
    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn n_sectors(&self) -> usize {
        self.sectors.len()
    }

    /// Number of evolution periods `P = T − 1`.
    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    #[inline]
    pub fn share(&self, s: usize, g: usize, t: usize) -> f64 {
        match &self.shares {
            Shares::Fixed(q) => q[(s, g)],
            Shares::TimeVarying(qs) => qs[t][(s, g)],
        }
    }

    #[inline]
    pub fn shock(&self, s: usize, g: usize, t: usize) -> f64 {
        match &self.shocks {
            Shocks::Sector(z) => z[(s, t)],
            Shocks::PerLocation(zs) => zs[t][(s, g)],
        }
    }

    pub fn location_weight(&self, g: usize) -> f64 {
        self.location_weights.as_ref().map_or(1.0, |w| w[g])
    }

    /// Whether every location's shares sum to one (every period if time-varying).
    pub fn share_sum_flag(&self) -> bool {
        let check = |q: &DMatrix<f64>| {
            q.column_iter()
                .all(|col| (col.sum() - 1.0).abs() <= SHARE_SUM_TOL)
        };
        match &self.shares {
            Shares::Fixed(q) => check(q),
            Shares::TimeVarying(qs) => qs.iter().all(check),
        }
    }

    /// Average exposure of each sector across locations (and periods).
    pub fn mean_sector_exposure(&self) -> Vec<f64> {
        let (g_n, p_n) = (self.n_locations(), self.n_periods());
        (0..self.n_sectors())
            .map(|s| {
                let mut acc = 0.0;
                for t in 0..p_n {
                    for g in 0..g_n {
                        acc += self.share(s, g, t);
                    }
                }
                acc / (g_n * p_n) as f64
            })
            .collect()
    }

    pub fn period_index(&self, label: &str) -> Option<usize> {
        self.periods.iter().position(|p| p == label)
    }

    /// Keep only the listed locations, in the given order (repeats allowed).
    pub fn select_locations(&self, idx: &[usize]) -> ShiftShareDataset {
        let pick_cols = |m: &DMatrix<f64>| {
            DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
        };
        let pick_rows = |m: &DMatrix<f64>| {
            DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
        };
        ShiftShareDataset {
            locations: idx.iter().map(|&g| self.locations[g].clone()).collect(),
            sectors: self.sectors.clone(),
            periods: self.periods.clone(),
            d_evol: pick_rows(&self.d_evol),
            y_evol: pick_rows(&self.y_evol),
            shocks: match &self.shocks {
                Shocks::Sector(z) => Shocks::Sector(z.clone()),
                Shocks::PerLocation(zs) => Shocks::PerLocation(zs.iter().map(pick_cols).collect()),
            },
            shares: match &self.shares {
                Shares::Fixed(q) => Shares::Fixed(pick_cols(q)),
                Shares::TimeVarying(qs) => Shares::TimeVarying(qs.iter().map(pick_cols).collect()),
            },
            location_weights: self
                .location_weights
                .as_ref()
                .map(|w| idx.iter().map(|&g| w[g]).collect()),
            sector_covariates: self.sector_covariates.clone(),
            location_covariates: self.location_covariates.as_ref().map(|c| Covariates {
                names: c.names.clone(),
                values: pick_rows(&c.values),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueCode {
    NonFinite,
    NegativeShare,
    NonPositiveWeight,
    TooFewLocations,
    NoSectors,
    TooFewPeriods,
    DimensionMismatch,
    MissingShareCells,
    ZeroExposure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
    pub coordinates: Vec<String>,
}

impl Issue {
    fn new(code: IssueCode, message: impl Into<String>, coordinates: Vec<String>) -> Self {
        Issue {
            code,
            message: message.into(),
            coordinates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub share_sum_flag: bool,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Check a dataset against the model's invariants. Never fails; problems are
/// collected as report entries.
pub fn validate_dataset(ds: &ShiftShareDataset) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let (g_n, s_n, p_n) = (ds.n_locations(), ds.n_sectors(), ds.n_periods());

    if g_n < 2 {
        errors.push(Issue::new(
            IssueCode::TooFewLocations,
            format!("need at least 2 locations, got {g_n}"),
            vec![],
        ));
    }
    if s_n < 1 {
        errors.push(Issue::new(IssueCode::NoSectors, "no sectors", vec![]));
    }
    if p_n < 1 {
        errors.push(Issue::new(
            IssueCode::TooFewPeriods,
            "need at least one evolution period (T >= 2)",
            vec![],
        ));
    }

    let mut dims_ok = ds.d_evol.shape() == (g_n, p_n) && ds.y_evol.shape() == (g_n, p_n);
    dims_ok &= match &ds.shocks {
        Shocks::Sector(z) => z.shape() == (s_n, p_n),
        Shocks::PerLocation(zs) => zs.len() == p_n && zs.iter().all(|z| z.shape() == (s_n, g_n)),
    };
    dims_ok &= match &ds.shares {
        Shares::Fixed(q) => q.shape() == (s_n, g_n),
        Shares::TimeVarying(qs) => qs.len() == p_n && qs.iter().all(|q| q.shape() == (s_n, g_n)),
    };
    if let Some(w) = &ds.location_weights {
        dims_ok &= w.len() == g_n;
    }
    if !dims_ok {
        errors.push(Issue::new(
            IssueCode::DimensionMismatch,
            "matrix shapes disagree with identifier lists",
            vec![],
        ));
        return ValidationReport {
            errors,
            warnings,
            share_sum_flag: false,
        };
    }

    for (name, m) in [("d", &ds.d_evol), ("y", &ds.y_evol)] {
        for g in 0..g_n {
            for t in 0..p_n {
                if !m[(g, t)].is_finite() {
                    errors.push(Issue::new(
                        IssueCode::NonFinite,
                        format!("{name} is not finite"),
                        vec![ds.locations[g].clone(), ds.periods[t].clone()],
                    ));
                }
            }
        }
    }
    for t in 0..p_n {
        for s in 0..s_n {
            for g in 0..g_n {
                let z = ds.shock(s, g, t);
                let per_loc = matches!(ds.shocks, Shocks::PerLocation(_));
                if !z.is_finite() && (per_loc || g == 0) {
                    let mut coords = vec![ds.sectors[s].clone(), ds.periods[t].clone()];
                    if per_loc {
                        coords.push(ds.locations[g].clone());
                    }
                    errors.push(Issue::new(IssueCode::NonFinite, "shock is not finite", coords));
                }
                let q = ds.share(s, g, t);
                let tv = matches!(ds.shares, Shares::TimeVarying(_));
                if t == 0 || tv {
                    let mut coords = vec![ds.sectors[s].clone(), ds.locations[g].clone()];
                    if tv {
                        coords.push(ds.periods[t].clone());
                    }
                    if !q.is_finite() {
                        errors.push(Issue::new(IssueCode::NonFinite, "share is not finite", coords));
                    } else if q < 0.0 {
                        errors.push(Issue::new(
                            IssueCode::NegativeShare,
                            format!("share {q} is negative"),
                            coords,
                        ));
                    }
                }
            }
        }
    }
    if let Some(w) = &ds.location_weights {
        for (g, &wg) in w.iter().enumerate() {
            if !(wg > 0.0 && wg.is_finite()) {
                errors.push(Issue::new(
                    IssueCode::NonPositiveWeight,
                    format!("location weight {wg} must be positive"),
                    vec![ds.locations[g].clone()],
                ));
            }
        }
    }
    for g in 0..g_n {
        let exposed = (0..p_n).any(|t| (0..s_n).any(|s| ds.share(s, g, t) != 0.0));
        if !exposed {
            warnings.push(Issue::new(
                IssueCode::ZeroExposure,
                "location has no exposure to any sector",
                vec![ds.locations[g].clone()],
            ));
        }
    }

    let share_sum_flag = ds.share_sum_flag();
    ValidationReport {
        errors,
        warnings,
        share_sum_flag,
    }
}

/// Optional side files accompanying the three canonical CSVs.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub sector_covariates: Option<PathBuf>,
    pub location_covariates: Option<PathBuf>,
}

/// A loaded dataset plus non-fatal observations made while reading it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: ShiftShareDataset,
    pub warnings: Vec<Issue>,
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let file = path.display().to_string();
        let bytes = fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let csv_err = |e: csv::Error| Error::Csv {
            file: file.clone(),
            message: e.to_string(),
        };
        let headers = rdr
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(csv_err)?;
        Ok(Table {
            file,
            headers,
            rows,
        })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.opt_col(name).ok_or_else(|| Error::MissingColumn {
            file: self.file.clone(),
            column: name.to_string(),
        })
    }

    fn opt_col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn text<'a>(&self, row: &'a csv::StringRecord, col: usize, name: &str) -> Result<&'a str> {
        match row.get(col) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(Error::MissingCell {
                file: self.file.clone(),
                coordinates: format!("column `{name}` at line {}", line_of(row)),
            }),
        }
    }

    fn number(&self, row: &csv::StringRecord, col: usize, name: &str, coords: &str) -> Result<f64> {
        let raw = self.text(row, col, name)?;
        let v: f64 = raw.parse().map_err(|_| Error::Csv {
            file: self.file.clone(),
            message: format!("cannot parse `{raw}` as a number in column `{name}` at {coords}"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                file: self.file.clone(),
                coordinates: format!("{name} at {coords}"),
                value: raw.to_string(),
            });
        }
        Ok(v)
    }
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map_or(0, |p| p.line())
}

fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

/// Load a design from its long-format CSVs.
pub fn load_dataset(
    panel_path: &Path,
    shocks_path: &Path,
    shares_path: &Path,
    options: &LoadOptions,
) -> Result<Loaded> {
    let mut warnings = Vec::new();

    // panel.csv: location,period,d,y[,weight]
    let panel = Table::read(panel_path)?;
    let (c_loc, c_per, c_d, c_y) = (
        panel.col("location")?,
        panel.col("period")?,
        panel.col("d")?,
        panel.col("y")?,
    );
    let c_w = panel.opt_col("weight");
    let mut cells: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for row in &panel.rows {
        let loc = panel.text(row, c_loc, "location")?.to_string();
        let per = panel.text(row, c_per, "period")?.to_string();
        let coords = format!("({loc}, {per})");
        let d = panel.number(row, c_d, "d", &coords)?;
        let y = panel.number(row, c_y, "y", &coords)?;
        if let Some(c_w) = c_w {
            let w = panel.number(row, c_w, "weight", &coords)?;
            if let Some(prev) = weights.insert(loc.clone(), w) {
                if prev != w {
                    return Err(Error::Invalid(format!(
                        "{}: location `{loc}` has inconsistent weights {prev} and {w}",
                        panel.file
                    )));
                }
            }
        }
        if cells.insert((loc, per), (d, y)).is_some() {
            return Err(Error::DuplicateKey {
                file: panel.file.clone(),
                key: coords,
            });
        }
    }
    let locations: Vec<String> = cells
        .keys()
        .map(|(l, _)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let periods: Vec<String> = cells
        .keys()
        .map(|(_, p)| p.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let loc_idx = index_of(&locations);
    let per_idx = index_of(&periods);
    let (g_n, p_n) = (locations.len(), periods.len());
    let mut d_evol = DMatrix::zeros(g_n, p_n);
    let mut y_evol = DMatrix::zeros(g_n, p_n);
    for (g, loc) in locations.iter().enumerate() {
        for (t, per) in periods.iter().enumerate() {
            let (d, y) = cells
                .get(&(loc.clone(), per.clone()))
                .ok_or_else(|| Error::MissingCell {
                    file: panel.file.clone(),
                    coordinates: format!("({loc}, {per})"),
                })?;
            d_evol[(g, t)] = *d;
            y_evol[(g, t)] = *y;
        }
    }
    let location_weights = c_w.map(|_| locations.iter().map(|l| weights[l]).collect());

    // shocks.csv: sector,period,shock[,location]
    let shocks_t = Table::read(shocks_path)?;
    let (c_sec, c_sper, c_shock) = (
        shocks_t.col("sector")?,
        shocks_t.col("period")?,
        shocks_t.col("shock")?,
    );
    let c_sloc = shocks_t.opt_col("location");
    let mut shock_cells: BTreeMap<(String, usize, usize), f64> = BTreeMap::new();
    let mut sector_set = BTreeSet::new();
    for row in &shocks_t.rows {
        let sec = shocks_t.text(row, c_sec, "sector")?.to_string();
        let per = shocks_t.text(row, c_sper, "period")?;
        let t = *per_idx.get(per).ok_or_else(|| Error::UnknownIdentifier {
            file: shocks_t.file.clone(),
            kind: "period",
            id: per.to_string(),
        })?;
        let g = match c_sloc {
            Some(c) => {
                let loc = shocks_t.text(row, c, "location")?;
                *loc_idx.get(loc).ok_or_else(|| Error::UnknownIdentifier {
                    file: shocks_t.file.clone(),
                    kind: "location",
                    id: loc.to_string(),
                })?
            }
            None => 0,
        };
        let coords = format!("({sec}, {per}, line {})", line_of(row));
        let v = shocks_t.number(row, c_shock, "shock", &coords)?;
        sector_set.insert(sec.clone());
        if shock_cells.insert((sec, t, g), v).is_some() {
            return Err(Error::DuplicateKey {
                file: shocks_t.file.clone(),
                key: coords,
            });
        }
    }
    let sectors: Vec<String> = sector_set.into_iter().collect();
    let sec_idx = index_of(&sectors);
    let s_n = sectors.len();
    let missing_shock = |s: usize, t: usize, g: Option<usize>| Error::MissingCell {
        file: shocks_t.file.clone(),
        coordinates: match g {
            Some(g) => format!("({}, {}, {})", sectors[s], periods[t], locations[g]),
            None => format!("({}, {})", sectors[s], periods[t]),
        },
    };
    let shocks = if c_sloc.is_some() {
        let mut zs = vec![DMatrix::zeros(s_n, g_n); p_n];
        for (t, z) in zs.iter_mut().enumerate() {
            for s in 0..s_n {
                for g in 0..g_n {
                    z[(s, g)] = *shock_cells
                        .get(&(sectors[s].clone(), t, g))
                        .ok_or_else(|| missing_shock(s, t, Some(g)))?;
                }
            }
        }
        Shocks::PerLocation(zs)
    } else {
        let mut z = DMatrix::zeros(s_n, p_n);
        for s in 0..s_n {
            for t in 0..p_n {
                z[(s, t)] = *shock_cells
                    .get(&(sectors[s].clone(), t, 0))
                    .ok_or_else(|| missing_shock(s, t, None))?;
            }
        }
        Shocks::Sector(z)
    };

    // shares.csv: sector,location,share[,period]
    let shares_t = Table::read(shares_path)?;
    let (c_qs, c_ql, c_q) = (
        shares_t.col("sector")?,
        shares_t.col("location")?,
        shares_t.col("share")?,
    );
    let c_qp = shares_t.opt_col("period");
    let n_mats = if c_qp.is_some() { p_n } else { 1 };
    let mut qs = vec![DMatrix::zeros(s_n, g_n); n_mats];
    let mut seen = vec![vec![false; s_n * g_n]; n_mats];
    for row in &shares_t.rows {
        let sec = shares_t.text(row, c_qs, "sector")?;
        let loc = shares_t.text(row, c_ql, "location")?;
        let s = *sec_idx.get(sec).ok_or_else(|| Error::UnknownIdentifier {
            file: shares_t.file.clone(),
            kind: "sector",
            id: sec.to_string(),
        })?;
        let g = *loc_idx.get(loc).ok_or_else(|| Error::UnknownIdentifier {
            file: shares_t.file.clone(),
            kind: "location",
            id: loc.to_string(),
        })?;
        let (t, coords) = match c_qp {
            Some(c) => {
                let per = shares_t.text(row, c, "period")?;
                let t = *per_idx.get(per).ok_or_else(|| Error::UnknownIdentifier {
                    file: shares_t.file.clone(),
                    kind: "period",
                    id: per.to_string(),
                })?;
                (t, format!("({sec}, {loc}, {per})"))
            }
            None => (0, format!("({sec}, {loc})")),
        };
        let v = shares_t.number(row, c_q, "share", &coords)?;
        if std::mem::replace(&mut seen[t][s * g_n + g], true) {
            return Err(Error::DuplicateKey {
                file: shares_t.file.clone(),
                key: coords,
            });
        }
        qs[t][(s, g)] = v;
    }
    let mut absent = Vec::new();
    for (t, seen_t) in seen.iter().enumerate() {
        for s in 0..s_n {
            for g in 0..g_n {
                if !seen_t[s * g_n + g] {
                    let mut c = vec![sectors[s].clone(), locations[g].clone()];
                    if c_qp.is_some() {
                        c.push(periods[t].clone());
                    }
                    absent.push(c.join("/"));
                }
            }
        }
    }
    if !absent.is_empty() {
        let n = absent.len();
        absent.truncate(20);
        warnings.push(Issue::new(
            IssueCode::MissingShareCells,
            format!("{n} share cell(s) absent from {}; treated as exact zeros", shares_t.file),
            absent,
        ));
    }
    let shares = if c_qp.is_some() {
        Shares::TimeVarying(qs)
    } else {
        Shares::Fixed(qs.pop().expect("one share matrix"))
    };

    let sector_covariates = options
        .sector_covariates
        .as_deref()
        .map(|p| read_covariates(p, &sectors, "sector"))
        .transpose()?;
    let location_covariates = options
        .location_covariates
        .as_deref()
        .map(|p| read_covariates(p, &locations, "location"))
        .transpose()?;

    Ok(Loaded {
        dataset: ShiftShareDataset {
            locations,
            sectors,
            periods,
            d_evol,
            y_evol,
            shocks,
            shares,
            location_weights,
            sector_covariates,
            location_covariates,
        },
        warnings,
    })
}

/// Wide covariate file: first column is the identifier, the rest are numeric.
pub fn read_covariates(path: &Path, ids: &[String], kind: &'static str) -> Result<Covariates> {
    let table = Table::read(path)?;
    if table.headers.len() < 2 {
        return Err(Error::MissingColumn {
            file: table.file.clone(),
            column: "<at least one covariate>".into(),
        });
    }
    let names: Vec<String> = table.headers[1..].to_vec();
    let idx = index_of(ids);
    let mut values = DMatrix::from_element(ids.len(), names.len(), f64::NAN);
    let mut seen = vec![false; ids.len()];
    for row in &table.rows {
        let id = table.text(row, 0, &table.headers[0])?;
        let i = *idx.get(id).ok_or_else(|| Error::UnknownIdentifier {
            file: table.file.clone(),
            kind,
            id: id.to_string(),
        })?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::DuplicateKey {
                file: table.file.clone(),
                key: id.to_string(),
            });
        }
        for (j, name) in names.iter().enumerate() {
            values[(i, j)] = table.number(row, j + 1, name, id)?;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::MissingCell {
            file: table.file.clone(),
            coordinates: ids[i].clone(),
        });
    }
    Ok(Covariates { names, values })
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Paths of the canonical files inside a directory.
pub fn canonical_paths(dir: &Path) -> [PathBuf; 3] {
    [
        dir.join("panel.csv"),
        dir.join("shocks.csv"),
        dir.join("shares.csv"),
    ]
}

/// Write the dataset as canonical CSVs into `dir`. Floats use the shortest
/// representation that parses back to the same bits, so a reload is exact.
pub fn write_dataset(ds: &ShiftShareDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let [panel_p, shocks_p, shares_p] = canonical_paths(dir);

    let mut w = create(&panel_p)?;
    let weighted = ds.location_weights.is_some();
    let mut out = String::from(if weighted {
        "location,period,d,y,weight\n"
    } else {
        "location,period,d,y\n"
    });
    for g in 0..ds.n_locations() {
        for t in 0..ds.n_periods() {
            out.push_str(&format!(
                "{},{},{},{}",
                ds.locations[g],
                ds.periods[t],
                ds.d_evol[(g, t)],
                ds.y_evol[(g, t)]
            ));
            if weighted {
                out.push_str(&format!(",{}", ds.location_weight(g)));
            }
            out.push('\n');
        }
    }
    w.write_all(out.as_bytes()).map_err(io_err(&panel_p))?;

    let mut w = create(&shocks_p)?;
    let mut out = String::new();
    match &ds.shocks {
        Shocks::Sector(z) => {
            out.push_str("sector,period,shock\n");
            for s in 0..ds.n_sectors() {
                for t in 0..ds.n_periods() {
                    out.push_str(&format!("{},{},{}\n", ds.sectors[s], ds.periods[t], z[(s, t)]));
                }
            }
        }
        Shocks::PerLocation(zs) => {
            out.push_str("sector,period,shock,location\n");
            for s in 0..ds.n_sectors() {
                for (t, z) in zs.iter().enumerate() {
                    for g in 0..ds.n_locations() {
                        out.push_str(&format!(
                            "{},{},{},{}\n",
                            ds.sectors[s], ds.periods[t], z[(s, g)], ds.locations[g]
                        ));
                    }
                }
            }
        }
    }
    w.write_all(out.as_bytes()).map_err(io_err(&shocks_p))?;

    let mut w = create(&shares_p)?;
    let mut out = String::new();
    match &ds.shares {
        Shares::Fixed(q) => {
            out.push_str("sector,location,share\n");
            for s in 0..ds.n_sectors() {
                for g in 0..ds.n_locations() {
                    out.push_str(&format!("{},{},{}\n", ds.sectors[s], ds.locations[g], q[(s, g)]));
                }
            }
        }
        Shares::TimeVarying(qs) => {
            out.push_str("sector,location,share,period\n");
            for s in 0..ds.n_sectors() {
                for g in 0..ds.n_locations() {
                    for (t, q) in qs.iter().enumerate() {
                        out.push_str(&format!(
                            "{},{},{},{}\n",
                            ds.sectors[s], ds.locations[g], q[(s, g)], ds.periods[t]
                        ));
                    }
                }
            }
        }
    }
    w.write_all(out.as_bytes()).map_err(io_err(&shares_p))?;

    if let Some(c) = &ds.sector_covariates {
        write_covariates(&dir.join("sector_covariates.csv"), "sector", &ds.sectors, c)?;
    }
    if let Some(c) = &ds.location_covariates {
        write_covariates(&dir.join("location_covariates.csv"), "location", &ds.locations, c)?;
    }
    Ok(())
}

fn write_covariates(path: &Path, id_col: &str, ids: &[String], c: &Covariates) -> Result<()> {
    let mut out = String::from(id_col);
    for n in &c.names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for j in 0..c.names.len() {
            out.push_str(&format!(",{}", c.values[(i, j)]));
        }
        out.push('\n');
    }
    let mut w = create(path)?;
    w.write_all(out.as_bytes()).map_err(io_err(path))
}
