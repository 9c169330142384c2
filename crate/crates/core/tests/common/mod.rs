//! Independent oracles and instance generators shared by the integration tests.
//! Nothing here calls the library's estimators; everything is recomputed from
//! raw arrays with plain loops.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use shiftshare_core::dataset::{Shares, Shocks, ShiftShareDataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Zero-noise panel with known `(s, g, t)` effects and trends.
pub struct Instance {
    pub ds: ShiftShareDataset,
    /// `[s][g][t]`.
    pub beta: Vec<Vec<Vec<f64>>>,
    /// `[g][t]`.
    pub alpha: Vec<Vec<f64>>,
    pub mu_d: Vec<f64>,
    pub mu_y: Vec<f64>,
}

impl Instance {
    pub fn gamma(&self, s: usize, g: usize, t: usize) -> f64 {
        self.alpha[g][t] * self.beta[s][g][t]
    }
}

/// Random instance with `G ∈ [3, max_g]`, `S ∈ [2, max_s]`, `T ∈ [2, max_t]`
/// level periods. Mixes fixed and time-varying shares, shares that do and do
/// not sum to one, sparse shares, sector and per-location shocks, and
/// optional location weights.
pub fn random_instance(rng: &mut ChaCha8Rng, max_g: usize, max_s: usize, max_t: usize) -> Instance {
    let g_n = rng.random_range(3..=max_g);
    let s_n = rng.random_range(2..=max_s);
    let p = rng.random_range(2..=max_t) - 1;
    let normalize = rng.random_bool(0.5);
    let share_matrix = |rng: &mut ChaCha8Rng| {
        let mut q = DMatrix::from_fn(s_n, g_n, |_, _| {
            if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() }
        });
        for g in 0..g_n {
            let total: f64 = q.column(g).sum();
            let scale = if normalize && total > 0.0 { 1.0 / total } else { rng.random_range(0.2..1.0) / total.max(1e-12) };
            q.column_mut(g).scale_mut(scale);
        }
        q
    };
    let shares = if rng.random_bool(0.5) {
        Shares::TimeVarying((0..p).map(|_| share_matrix(rng)).collect())
    } else {
        Shares::Fixed(share_matrix(rng))
    };
    let means: Vec<f64> = (0..s_n).map(|_| rng.random_range(-1.0..2.0)).collect();
    let shocks = if rng.random_bool(0.25) {
        Shocks::PerLocation(
            (0..p)
                .map(|_| DMatrix::from_fn(s_n, g_n, |s, _| means[s] + normal(rng)))
                .collect(),
        )
    } else {
        Shocks::Sector(DMatrix::from_fn(s_n, p, |s, _| means[s] + normal(rng)))
    };
    let location_weights = rng
        .random_bool(0.5)
        .then(|| (0..g_n).map(|_| rng.random_range(1.0..10.0)).collect());
    let beta: Vec<Vec<Vec<f64>>> = (0..s_n)
        .map(|_| (0..g_n).map(|_| (0..p).map(|_| 1.0 + 0.5 * normal(rng)).collect()).collect())
        .collect();
    let alpha: Vec<Vec<f64>> = (0..g_n).map(|_| (0..p).map(|_| 0.5 + 0.5 * normal(rng)).collect()).collect();
    let mu_d: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
    let mu_y: Vec<f64> = (0..p).map(|_| normal(rng)).collect();

    let mut ds = ShiftShareDataset {
        locations: (0..g_n).map(|g| format!("g{g:03}")).collect(),
        sectors: (0..s_n).map(|s| format!("s{s:03}")).collect(),
        periods: (0..p).map(|t| format!("t{t:02}")).collect(),
        d_evol: DMatrix::zeros(g_n, p),
        y_evol: DMatrix::zeros(g_n, p),
        shocks,
        shares,
        location_weights,
        sector_covariates: None,
        location_covariates: None,
    };
    for g in 0..g_n {
        for t in 0..p {
            let mut d = mu_d[t];
            let mut y = mu_y[t];
            for s in 0..s_n {
                let qz = ds.share(s, g, t) * ds.shock(s, g, t);
                d += qz * beta[s][g][t];
                y += qz * alpha[g][t] * beta[s][g][t];
            }
            ds.d_evol[(g, t)] = d;
            ds.y_evol[(g, t)] = y;
        }
    }
    Instance { ds, beta, alpha, mu_d, mu_y }
}

/// `ΔZ_{g,t}` by the defining triple loop, `[g][t]`.
pub fn bartik_loop(ds: &ShiftShareDataset) -> Vec<Vec<f64>> {
    (0..ds.n_locations())
        .map(|g| {
            (0..ds.n_periods())
                .map(|t| (0..ds.n_sectors()).map(|s| ds.share(s, g, t) * ds.shock(s, g, t)).sum())
                .collect()
        })
        .collect()
}

pub fn weights_of(ds: &ShiftShareDataset, weighted: bool) -> Vec<f64> {
    (0..ds.n_locations())
        .map(|g| if weighted { ds.location_weight(g) } else { 1.0 })
        .collect()
}

/// Per-period weighted means of `[g][t]` data.
pub fn period_means(v: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    (0..v[0].len())
        .map(|t| v.iter().zip(w).map(|(r, wg)| wg * r[t]).sum::<f64>() / total)
        .collect()
}

/// Cell weights by brute force: `{(g, t, s) → w}` plus the no-constant bias factors.
pub fn brute_cell_weights(ds: &ShiftShareDataset, weighted: bool, fe: bool) -> (BTreeMap<(usize, usize, usize), f64>, Vec<f64>) {
    let z = bartik_loop(ds);
    let w = weights_of(ds, weighted);
    let zbar = period_means(&z, &w);
    let mut num = BTreeMap::new();
    let mut den = 0.0;
    for g in 0..ds.n_locations() {
        for t in 0..ds.n_periods() {
            let dev = if fe { z[g][t] - zbar[t] } else { z[g][t] };
            for s in 0..ds.n_sectors() {
                let v = w[g] * ds.share(s, g, t) * ds.shock(s, g, t) * dev;
                den += v;
                if v != 0.0 {
                    num.insert((g, t, s), v);
                }
            }
        }
    }
    let cells = num.into_iter().map(|(k, v)| (k, v / den)).collect();
    let bias = if fe {
        Vec::new()
    } else {
        let zz: f64 = (0..z.len()).map(|g| w[g] * z[g].iter().map(|v| v * v).sum::<f64>()).sum();
        (0..ds.n_periods())
            .map(|t| (0..z.len()).map(|g| w[g] * z[g][t]).sum::<f64>() / zz)
            .collect()
    };
    (cells, bias)
}

/// Pooled weighted slope of `y` on `x` after (optionally) removing
/// per-period weighted means: `Σ w x̃ ỹ / Σ w x̃²`.
pub fn demeaned_slope(y: &[Vec<f64>], x: &[Vec<f64>], w: &[f64], fe: bool) -> f64 {
    let (xb, yb) = if fe {
        (period_means(x, w), period_means(y, w))
    } else {
        (vec![0.0; x[0].len()], vec![0.0; y[0].len()])
    };
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for g in 0..x.len() {
        for t in 0..x[0].len() {
            let xt = x[g][t] - xb[t];
            sxy += w[g] * xt * (y[g][t] - yb[t]);
            sxx += w[g] * xt * xt;
        }
    }
    sxy / sxx
}

/// Simple-regression slope with an intercept, pooled over all cells.
pub fn intercept_slope(y: &[Vec<f64>], x: &[Vec<f64>], w: &[f64]) -> f64 {
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for g in 0..x.len() {
        for t in 0..x[0].len() {
            sw += w[g];
            sx += w[g] * x[g][t];
            sy += w[g] * y[g][t];
        }
    }
    let (xm, ym) = (sx / sw, sy / sw);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for g in 0..x.len() {
        for t in 0..x[0].len() {
            sxy += w[g] * (x[g][t] - xm) * (y[g][t] - ym);
            sxx += w[g] * (x[g][t] - xm).powi(2);
        }
    }
    sxy / sxx
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Result line for the acceptance log. Written to the process stdout directly
/// so it shows up without `--nocapture`.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    log_line(&format!(
        "criterion {id:>2} [{name}]: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    ));
}

pub fn log_line(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
