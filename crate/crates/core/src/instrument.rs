//! Bartik instrument construction and shock transformations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{Shares, Shocks, ShiftShareDataset};
use crate::error::{Error, Result};

/// Realized instrument values `ΔZ_{g,t}` and their per-period cross-location
/// mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BartikPanel {
    /// `G × P`.
    pub z: DMatrix<f64>,
    /// `ΔZ̄_{.,t}`: plain mean, or `Σ_g (N_g/N) ΔZ_{g,t}` when weighted.
    pub z_bar: Vec<f64>,
    /// Location weights used for `z_bar`; `Some` iff downstream fits are weighted.
    pub location_weights: Option<Vec<f64>>,
}

impl BartikPanel {
    /// Wrap an instrument matrix, computing the (weighted) period means.
    pub fn from_matrix(z: DMatrix<f64>, location_weights: Option<Vec<f64>>) -> Self {
        let z_bar = period_means(&z, location_weights.as_deref());
        BartikPanel {
            z,
            z_bar,
            location_weights,
        }
    }

    pub fn n_locations(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.z.ncols()
    }

    pub fn weighted(&self) -> bool {
        self.location_weights.is_some()
    }

    pub fn weight(&self, g: usize) -> f64 {
        self.location_weights.as_ref().map_or(1.0, |w| w[g])
    }
}

pub(crate) fn period_means(m: &DMatrix<f64>, weights: Option<&[f64]>) -> Vec<f64> {
    m.column_iter()
        .map(|col| match weights {
            Some(w) => {
                let total: f64 = w.iter().sum();
                col.iter().zip(w).map(|(v, wg)| v * wg).sum::<f64>() / total
            }
            None => col.sum() / col.len() as f64,
        })
        .collect()
}

/// `ΔZ_{g,t} = Σ_s Q_{s,g(,t)} ΔZ_{s,t}` (or the location's own leave-one-out
/// shocks). With `weighted`, the period means use the dataset's location
/// weights (all ones when the dataset has none).
pub fn build_bartik(ds: &ShiftShareDataset, weighted: bool) -> Result<BartikPanel> {
    let (g_n, s_n, p_n) = (ds.n_locations(), ds.n_sectors(), ds.n_periods());
    let shocks_ok = match &ds.shocks {
        Shocks::Sector(z) => z.shape() == (s_n, p_n),
        Shocks::PerLocation(zs) => zs.len() == p_n && zs.iter().all(|z| z.shape() == (s_n, g_n)),
    };
    let shares_ok = match &ds.shares {
        Shares::Fixed(q) => q.shape() == (s_n, g_n),
        Shares::TimeVarying(qs) => qs.len() == p_n && qs.iter().all(|q| q.shape() == (s_n, g_n)),
    };
    if !shocks_ok || !shares_ok {
        return Err(Error::DimensionMismatch(format!(
            "shocks/shares do not match G={g_n}, S={s_n}, P={p_n}"
        )));
    }
    let z = match (&ds.shares, &ds.shocks) {
        // Q' Z in one product for the common layout.
        (Shares::Fixed(q), Shocks::Sector(zs)) => q.transpose() * zs,
        _ => DMatrix::from_fn(g_n, p_n, |g, t| {
            (0..s_n).map(|s| ds.share(s, g, t) * ds.shock(s, g, t)).sum()
        }),
    };
    let weights = weighted.then(|| (0..g_n).map(|g| ds.location_weight(g)).collect());
    Ok(BartikPanel::from_matrix(z, weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockTransform {
    /// `log(A_t) − log(A_{t−1})`.
    LogDiff,
    /// `A_t − A_{t−1}`.
    Diff,
    /// `A_t / A_{t−1} − 1`.
    GrowthRate,
}

impl ShockTransform {
    fn apply(self, prev: f64, cur: f64) -> f64 {
        match self {
            ShockTransform::LogDiff => cur.ln() - prev.ln(),
            ShockTransform::Diff => cur - prev,
            ShockTransform::GrowthRate => cur / prev - 1.0,
        }
    }

    fn needs_positive_base(self) -> bool {
        !matches!(self, ShockTransform::Diff)
    }
}

fn check_levels(levels: &[DMatrix<f64>]) -> Result<(usize, usize)> {
    if levels.len() < 2 {
        return Err(Error::DimensionMismatch(
            "need levels for at least two periods".into(),
        ));
    }
    let shape = levels[0].shape();
    if levels.iter().any(|m| m.shape() != shape) {
        return Err(Error::DimensionMismatch(
            "level matrices differ in shape".into(),
        ));
    }
    for (t, m) in levels.iter().enumerate() {
        for s in 0..shape.0 {
            for g in 0..shape.1 {
                let v = m[(s, g)];
                if !(v >= 0.0) {
                    return Err(Error::NonPositiveLevel {
                        sector: s,
                        period: t,
                        value: v,
                    });
                }
            }
        }
    }
    Ok(shape)
}

/// Per-location shocks `ΔZ^{(−g)}_{s,t}` built from sector × location levels
/// (one `S × G` matrix per level period) by aggregating every location except
/// `g` and applying `transform` between consecutive periods. The output has one
/// `S × G` matrix per evolution period.
pub fn leave_one_out_shocks(
    levels: &[DMatrix<f64>],
    transform: ShockTransform,
) -> Result<Vec<DMatrix<f64>>> {
    let (s_n, g_n) = check_levels(levels)?;
    let totals: Vec<Vec<f64>> = levels
        .iter()
        .map(|m| m.row_iter().map(|r| r.sum()).collect())
        .collect();
    let mut out = Vec::with_capacity(levels.len() - 1);
    for t in 1..levels.len() {
        let mut z = DMatrix::zeros(s_n, g_n);
        for s in 0..s_n {
            for g in 0..g_n {
                let prev = totals[t - 1][s] - levels[t - 1][(s, g)];
                let cur = totals[t][s] - levels[t][(s, g)];
                let empty = g_n < 2
                    || (transform.needs_positive_base() && (prev <= 0.0 || (cur <= 0.0 && transform == ShockTransform::LogDiff)));
                if empty {
                    return Err(Error::AllMassInOneLocation {
                        sector: s,
                        location: g,
                        period: t,
                    });
                }
                z[(s, g)] = transform.apply(prev, cur);
            }
        }
        out.push(z);
    }
    Ok(out)
}

/// National shocks from all locations (no exclusion): `S × (T−1)`.
pub fn national_shocks(levels: &[DMatrix<f64>], transform: ShockTransform) -> Result<DMatrix<f64>> {
    let (s_n, _) = check_levels(levels)?;
    let totals: Vec<Vec<f64>> = levels
        .iter()
        .map(|m| m.row_iter().map(|r| r.sum()).collect())
        .collect();
    let mut z = DMatrix::zeros(s_n, levels.len() - 1);
    for t in 1..levels.len() {
        for s in 0..s_n {
            let (prev, cur) = (totals[t - 1][s], totals[t][s]);
            if transform.needs_positive_base() && (prev <= 0.0 || (cur <= 0.0 && transform == ShockTransform::LogDiff)) {
                return Err(Error::NonPositiveLevel {
                    sector: s,
                    period: t,
                    value: prev.min(cur),
                });
            }
            z[(s, t - 1)] = transform.apply(prev, cur);
        }
    }
    Ok(z)
}

/// Center the sector shocks within each period.
pub fn demean_shocks(ds: &ShiftShareDataset) -> Result<ShiftShareDataset> {
    let Shocks::Sector(z) = &ds.shocks else {
        return Err(Error::PerLocationShocksUnsupported);
    };
    let mut z = z.clone();
    for mut col in z.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(ShiftShareDataset {
        shocks: Shocks::Sector(z),
        ..ds.clone()
    })
}
