//! Realized decomposition weights of the Bartik first stage and reduced form,
//! their aggregation, 2SLS sign diagnostics, and exposure-variance weights.

use std::collections::BTreeMap;

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::ShiftShareDataset;
use crate::error::{Error, Result};
use crate::instrument::BartikPanel;
use crate::par::map_indexed;

/// Relative size under which a weight denominator counts as zero.
pub const ZERO_DENOMINATOR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLevel {
    Cell,
    LocationPeriod,
    Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    NoFe,
    PeriodFe,
}

/// Index of a weight. Coarser levels leave `period` and/or `sector` empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct WeightKey {
    pub location: usize,
    pub period: Option<usize>,
    pub sector: Option<usize>,
}

impl WeightKey {
    fn coarsen(self, to: WeightLevel) -> WeightKey {
        match to {
            WeightLevel::Cell => self,
            WeightLevel::LocationPeriod => WeightKey { sector: None, ..self },
            WeightLevel::Location => WeightKey {
                location: self.location,
                period: None,
                sector: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightDecomposition {
    pub level: WeightLevel,
    pub spec: WeightSpec,
    #[serde(serialize_with = "serialize_entries")]
    pub weights: BTreeMap<WeightKey, f64>,
    /// `Σ_g N_g ΔZ_{g,t} / Σ_{g,t} N_g ΔZ_{g,t}²`; empty under period effects.
    pub bias_factors: Vec<f64>,
    pub denominator: f64,
    pub weighted: bool,
}

fn serialize_entries<S: Serializer>(map: &BTreeMap<WeightKey, f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Entry<'a> {
        #[serde(flatten)]
        key: &'a WeightKey,
        weight: f64,
    }
    let mut seq = ser.serialize_seq(Some(map.len()))?;
    for (key, weight) in map {
        seq.serialize_element(&Entry { key, weight: *weight })?;
    }
    seq.end()
}

impl WeightDecomposition {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WeightKey, &f64)> {
        self.weights.iter()
    }

    /// `Σ w·f(key)`.
    pub fn weighted_sum(&self, f: impl Fn(&WeightKey) -> f64) -> f64 {
        self.weights.iter().map(|(k, w)| w * f(k)).sum()
    }

    /// `Σ_t μ_t · bias_factors[t]`; zero under period effects.
    pub fn bias_term(&self, mu: &[f64]) -> f64 {
        self.bias_factors.iter().zip(mu).map(|(b, m)| b * m).sum()
    }
}

/// Cell weights `w_{s,g,t}` of the first-stage and reduced-form Bartik slopes.
/// Cells whose numerator is exactly zero are left out of the map.
pub fn fs_rf_cell_weights(ds: &ShiftShareDataset, bartik: &BartikPanel, spec: WeightSpec) -> Result<WeightDecomposition> {
    let (g_n, s_n, p_n) = (ds.n_locations(), ds.n_sectors(), ds.n_periods());
    if bartik.z.shape() != (g_n, p_n) {
        return Err(Error::DimensionMismatch(format!(
            "instrument is {:?}, dataset has G={g_n}, P={p_n}",
            bartik.z.shape()
        )));
    }
    let rows = map_indexed(g_n, |g| {
        let n_g = bartik.weight(g);
        let mut cells = Vec::new();
        for t in 0..p_n {
            let dev = match spec {
                WeightSpec::PeriodFe => bartik.z[(g, t)] - bartik.z_bar[t],
                WeightSpec::NoFe => bartik.z[(g, t)],
            };
            for s in 0..s_n {
                let num = n_g * ds.share(s, g, t) * ds.shock(s, g, t) * dev;
                if num != 0.0 {
                    cells.push((t, s, num));
                }
            }
        }
        cells
    });
    let scale: f64 = (0..g_n)
        .map(|g| bartik.weight(g) * bartik.z.row(g).norm_squared())
        .sum();
    let denominator: f64 = rows.iter().flatten().map(|c| c.2).sum();
    if !(scale > 0.0) || !(denominator.abs() >= ZERO_DENOMINATOR_TOL * scale) {
        return Err(Error::ZeroDenominator);
    }
    let mut weights = BTreeMap::new();
    for (g, cells) in rows.into_iter().enumerate() {
        for (t, s, num) in cells {
            let key = WeightKey {
                location: g,
                period: Some(t),
                sector: Some(s),
            };
            weights.insert(key, num / denominator);
        }
    }
    let bias_factors = match spec {
        WeightSpec::PeriodFe => Vec::new(),
        WeightSpec::NoFe => (0..p_n)
            .map(|t| (0..g_n).map(|g| bartik.weight(g) * bartik.z[(g, t)]).sum::<f64>() / denominator)
            .collect(),
    };
    Ok(WeightDecomposition {
        level: WeightLevel::Cell,
        spec,
        weights,
        bias_factors,
        denominator,
        weighted: bartik.weighted(),
    })
}

/// Sum weights within a coarser index.
pub fn aggregate(dec: &WeightDecomposition, to: WeightLevel) -> Result<WeightDecomposition> {
    if to <= dec.level {
        return Err(Error::LevelMismatch(format!(
            "cannot aggregate {:?} weights to {:?}",
            dec.level, to
        )));
    }
    let mut weights = BTreeMap::new();
    for (key, w) in &dec.weights {
        *weights.entry(key.coarsen(to)).or_insert(0.0) += w;
    }
    Ok(WeightDecomposition {
        level: to,
        weights,
        ..dec.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignSummary {
    pub n_negative: usize,
    pub n_positive: usize,
    /// `None` when the magnitude is not identified.
    pub sum_negative: Option<f64>,
    pub sum_positive: Option<f64>,
    pub assumption_label: String,
}

/// Counts and sums of the nonzero weights.
pub fn sign_summary(dec: &WeightDecomposition, assumption_label: &str) -> SignSummary {
    let mut out = SignSummary {
        n_negative: 0,
        n_positive: 0,
        sum_negative: Some(0.0),
        sum_positive: Some(0.0),
        assumption_label: assumption_label.to_string(),
    };
    for &w in dec.weights.values() {
        if w < 0.0 {
            out.n_negative += 1;
            *out.sum_negative.as_mut().unwrap() += w;
        } else if w > 0.0 {
            out.n_positive += 1;
            *out.sum_positive.as_mut().unwrap() += w;
        }
    }
    out
}

/// Signs of the 2SLS weights on second-stage effects when first-stage effects
/// are sector-invariant and nonnegative. Magnitudes are not identified.
pub fn tsls_weight_signs(dec_fe: &WeightDecomposition, fs_slope_sign: f64) -> Result<SignSummary> {
    if dec_fe.spec != WeightSpec::PeriodFe {
        return Err(Error::WrongSpec("2SLS weight signs need period fixed effects".into()));
    }
    let label = match dec_fe.level {
        WeightLevel::LocationPeriod => "beta_sgt = beta_gt >= 0",
        WeightLevel::Location => "beta_sgt = beta_g >= 0, alpha_gt = alpha_g",
        WeightLevel::Cell => {
            return Err(Error::LevelMismatch(
                "2SLS weight signs are defined at location_period or location level".into(),
            ))
        }
    };
    let sign = if fs_slope_sign < 0.0 { -1.0 } else { 1.0 };
    let flipped = WeightDecomposition {
        weights: dec_fe.weights.iter().map(|(k, w)| (*k, w * sign)).collect(),
        ..dec_fe.clone()
    };
    let mut summary = sign_summary(&flipped, label);
    summary.sum_negative = None;
    summary.sum_positive = None;
    Ok(summary)
}

/// 2SLS weights on `α_{g,t}` under a homogeneous first stage: the
/// location-period first-stage weights.
pub fn tsls_weights_homogeneous_fs(dec_fe: &WeightDecomposition) -> Result<WeightDecomposition> {
    if dec_fe.spec != WeightSpec::PeriodFe {
        return Err(Error::WrongSpec("homogeneous-first-stage 2SLS weights need period fixed effects".into()));
    }
    match dec_fe.level {
        WeightLevel::Cell => aggregate(dec_fe, WeightLevel::LocationPeriod),
        WeightLevel::LocationPeriod => Ok(dec_fe.clone()),
        WeightLevel::Location => Err(Error::LevelMismatch(
            "location weights already collapse periods".into(),
        )),
    }
}

/// Sector shock variances for exposure-variance weights.
#[derive(Debug, Clone, PartialEq)]
pub enum ShockVariances {
    /// One variance per sector, applied in every period.
    PerSector(Vec<f64>),
    /// `variances[t][s]`.
    PerSectorPeriod(Vec<Vec<f64>>),
}

/// Exposure-variance weights `Q²_{s,g} V_s / Σ Q² V`. With fixed shares and
/// per-sector variances the weights carry no period; otherwise one weight per
/// `(s, g, t)`.
pub fn akm_weights(ds: &ShiftShareDataset, variances: &ShockVariances) -> Result<WeightDecomposition> {
    let (g_n, s_n, p_n) = (ds.n_locations(), ds.n_sectors(), ds.n_periods());
    let all: Vec<&f64> = match variances {
        ShockVariances::PerSector(v) => {
            if v.len() != s_n {
                return Err(Error::DimensionMismatch(format!("{} variances for {s_n} sectors", v.len())));
            }
            v.iter().collect()
        }
        ShockVariances::PerSectorPeriod(v) => {
            if v.len() != p_n || v.iter().any(|r| r.len() != s_n) {
                return Err(Error::DimensionMismatch(format!(
                    "variances must be {p_n} periods × {s_n} sectors"
                )));
            }
            v.iter().flatten().collect()
        }
    };
    if all.iter().any(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Invalid("shock variances must be finite and nonnegative".into()));
    }
    let fixed = matches!(ds.shares, crate::dataset::Shares::Fixed(_));
    let periods: Vec<Option<usize>> = match variances {
        ShockVariances::PerSector(_) if fixed => vec![None],
        _ => (0..p_n).map(Some).collect(),
    };
    let var = |s: usize, t: Option<usize>| match (variances, t) {
        (ShockVariances::PerSector(v), _) => v[s],
        (ShockVariances::PerSectorPeriod(v), Some(t)) => v[t][s],
        (ShockVariances::PerSectorPeriod(_), None) => unreachable!(),
    };
    let mut weights = BTreeMap::new();
    let mut total = 0.0;
    for g in 0..g_n {
        for &t in &periods {
            for s in 0..s_n {
                let num = ds.share(s, g, t.unwrap_or(0)).powi(2) * var(s, t);
                if num != 0.0 {
                    total += num;
                    weights.insert(
                        WeightKey {
                            location: g,
                            period: t,
                            sector: Some(s),
                        },
                        num,
                    );
                }
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::AllZeroVariance);
    }
    weights.values_mut().for_each(|w| *w /= total);
    Ok(WeightDecomposition {
        level: WeightLevel::Cell,
        spec: WeightSpec::NoFe,
        weights,
        bias_factors: Vec::new(),
        denominator: total,
        weighted: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateCorrelation {
    pub name: String,
    pub pearson_r: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSummary {
    #[serde(flatten)]
    pub signs: SignSummary,
    pub n_weights: usize,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
    pub correlations: Vec<CovariateCorrelation>,
}

/// Sign counts and sums, plus the Pearson correlation of location weights with
/// each covariate. Locations absent from the map count as weight zero.
pub fn weight_summary(
    dec: &WeightDecomposition,
    label: &str,
    covariates: &[(String, Vec<f64>)],
) -> Result<WeightSummary> {
    if !covariates.is_empty() && dec.level != WeightLevel::Location {
        return Err(Error::LevelMismatch(
            "covariate correlations need location-level weights".into(),
        ));
    }
    let mut correlations = Vec::new();
    for (name, cov) in covariates {
        if dec.weights.keys().any(|k| k.location >= cov.len()) {
            return Err(Error::DimensionMismatch(format!(
                "covariate {name} has {} values",
                cov.len()
            )));
        }
        let mut w = vec![0.0; cov.len()];
        for (k, v) in &dec.weights {
            w[k.location] = *v;
        }
        let r = pearson(&w, cov);
        correlations.push(CovariateCorrelation {
            name: name.clone(),
            pearson_r: r,
            p_value: correlation_p_value(r, cov.len()),
            n: cov.len(),
        });
    }
    let values = dec.weights.values();
    Ok(WeightSummary {
        signs: sign_summary(dec, label),
        n_weights: dec.len(),
        sum: dec.sum(),
        min: values.clone().cloned().fold(f64::INFINITY, f64::min),
        max: values.cloned().fold(f64::NEG_INFINITY, f64::max),
        correlations,
    })
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Two-sided p-value of `t = r √((n−2)/(1−r²))` against `t(n−2)`.
pub(crate) fn correlation_p_value(r: f64, n: usize) -> f64 {
    if n < 3 || r.is_nan() {
        return f64::NAN;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    StudentsT::new(0.0, 1.0, df).map_or(f64::NAN, |d| (2.0 * d.sf(t.abs())).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Shares, Shocks};
    use crate::instrument::build_bartik;
    use nalgebra::DMatrix;

    fn identity_ds(shocks: &[f64]) -> ShiftShareDataset {
        let n = shocks.len();
        ShiftShareDataset {
            locations: (0..n).map(|i| format!("g{i}")).collect(),
            sectors: (0..n).map(|i| format!("s{i}")).collect(),
            periods: vec!["t1".into()],
            d_evol: DMatrix::zeros(n, 1),
            y_evol: DMatrix::zeros(n, 1),
            shocks: Shocks::Sector(DMatrix::from_column_slice(n, 1, shocks)),
            shares: Shares::Fixed(DMatrix::identity(n, n)),
            location_weights: None,
            sector_covariates: None,
            location_covariates: None,
        }
    }

    #[test]
    fn three_location_example() {
        let ds = identity_ds(&[0.2, 1.0, 3.0]);
        let b = build_bartik(&ds, false).unwrap();
        let dec = fs_rf_cell_weights(&ds, &b, WeightSpec::PeriodFe).unwrap();
        let w: Vec<f64> = dec.weights.values().copied().collect();
        for (got, want) in w.iter().zip([-0.24 / 4.16, -0.4 / 4.16, 4.8 / 4.16]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((dec.denominator - 4.16).abs() < 1e-12);
        let signs = tsls_weight_signs(&aggregate(&dec, WeightLevel::LocationPeriod).unwrap(), 1.0).unwrap();
        assert_eq!((signs.n_negative, signs.n_positive), (2, 1));
        assert!(signs.sum_negative.is_none());
    }

    #[test]
    fn symmetric_pair() {
        let ds = identity_ds(&[1.0, -1.0]);
        let b = build_bartik(&ds, false).unwrap();
        let dec = fs_rf_cell_weights(&ds, &b, WeightSpec::PeriodFe).unwrap();
        assert!(dec.weights.values().all(|w| (w - 0.5).abs() < 1e-15));
    }

    #[test]
    fn zero_variation_is_refused() {
        let ds = identity_ds(&[0.0, 0.0]);
        let b = build_bartik(&ds, false).unwrap();
        assert!(matches!(
            fs_rf_cell_weights(&ds, &b, WeightSpec::NoFe),
            Err(Error::ZeroDenominator)
        ));
        let ds = identity_ds(&[2.0, 2.0]);
        let b = build_bartik(&ds, false).unwrap();
        assert!(matches!(
            fs_rf_cell_weights(&ds, &b, WeightSpec::PeriodFe),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn aggregation_direction_is_checked() {
        let ds = identity_ds(&[0.2, 1.0, 3.0]);
        let b = build_bartik(&ds, false).unwrap();
        let dec = fs_rf_cell_weights(&ds, &b, WeightSpec::NoFe).unwrap();
        let loc = aggregate(&dec, WeightLevel::Location).unwrap();
        assert!(matches!(aggregate(&loc, WeightLevel::Cell), Err(Error::LevelMismatch(_))));
        assert!(matches!(tsls_weight_signs(&loc, 1.0), Err(Error::WrongSpec(_))));
    }

    #[test]
    fn akm_identity_equal_variances() {
        let ds = identity_ds(&[1.0, 2.0]);
        let dec = akm_weights(&ds, &ShockVariances::PerSector(vec![1.0, 1.0])).unwrap();
        assert!(dec.weights.values().all(|w| (w - 0.5).abs() < 1e-15));
        let dec = akm_weights(&ds, &ShockVariances::PerSector(vec![0.0, 3.0])).unwrap();
        assert_eq!(dec.len(), 1);
        assert!(matches!(
            akm_weights(&ds, &ShockVariances::PerSector(vec![0.0, 0.0])),
            Err(Error::AllZeroVariance)
        ));
    }

    #[test]
    fn summary_and_correlation() {
        let ds = identity_ds(&[0.5, 1.0, 3.0, 4.0]);
        let b = build_bartik(&ds, false).unwrap();
        let dec = aggregate(&fs_rf_cell_weights(&ds, &b, WeightSpec::NoFe).unwrap(), WeightLevel::Location).unwrap();
        // NoFe weights are ΔZ_g²/ΣΔZ², proportional to this covariate
        let cov = vec![0.25, 1.0, 9.0, 16.0];
        let s = weight_summary(&dec, "none", &[("c".into(), cov)]).unwrap();
        assert_eq!(s.signs.n_negative, 0);
        assert_eq!(s.signs.sum_negative, Some(0.0));
        assert!((s.correlations[0].pearson_r - 1.0).abs() < 1e-12);
        let cell = fs_rf_cell_weights(&ds, &b, WeightSpec::NoFe).unwrap();
        assert!(weight_summary(&cell, "none", &[("c".into(), vec![0.0; 4])]).is_err());
    }

    #[test]
    fn serializes_entries_as_records() {
        let ds = identity_ds(&[1.0, -1.0]);
        let b = build_bartik(&ds, false).unwrap();
        let dec = fs_rf_cell_weights(&ds, &b, WeightSpec::PeriodFe).unwrap();
        let json = serde_json::to_value(&dec).unwrap();
        assert_eq!(json["weights"][0]["location"], 0);
        assert_eq!(json["weights"][1]["sector"], 1);
        assert_eq!(json["level"], "cell");
    }
}
