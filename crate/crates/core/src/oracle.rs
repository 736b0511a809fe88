//! Brute-force reference solvers for the test suites.
//!
//! These deliberately avoid the production algorithms: the sorted-l1 prox is
//! cross-checked by exhaustive pattern enumeration and by a projected
//! subgradient method with a duality certificate, the square-root sorted
//! Huber value by grid and path scans, and noiseless fits by a dense least
//! squares solve. Each result carries a certified bound on how far its value
//! can sit from the true optimum.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::norms::{self, WeightSequence};
use crate::prox;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    /// Exact enumeration of sign/order/pooling patterns (dimension <= 6).
    ExhaustivePattern,
    /// Subgradient descent with structured polishing (dimension <= 50).
    ProjectedSubgradient,
    /// Dense grid or fixed-point path scan.
    Grid,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    pub minimizer: Vec<f64>,
    /// Upper bound on `value - true optimum`, from a dual certificate or the
    /// enumeration being exact.
    pub certified_gap: f64,
    pub method: OracleMethod,
}

const EXHAUSTIVE_DIM_CAP: usize = 6;
const SUBGRADIENT_DIM_CAP: usize = 50;
const SUBGRADIENT_MAX_ITERS: usize = 100_000;

fn prox_objective(x: &[f64], v: &[f64], w: &WeightSequence) -> f64 {
    let quad: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * quad + norms::slope_norm(x, w).expect("validated lengths")
}

/// Stable nonincreasing order of `|v|` (ties keep original index order).
fn magnitude_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).expect("non-finite input"));
    idx
}

fn signed_unsort(v: &[f64], idx: &[usize], sorted_vals: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; v.len()];
    for (j, &i) in idx.iter().enumerate() {
        let mag = sorted_vals[j];
        x[i] = if mag == 0.0 {
            0.0
        } else if v[i] < 0.0 {
            -mag
        } else {
            mag
        };
    }
    x
}

/// One valid subgradient of the sorted-l1 norm: assign weights to entries in
/// magnitude order, zero entries get zero (they sort last, so feasibility of
/// the cumulative sums is preserved).
fn slope_subgradient(x: &[f64], ws: &[f64]) -> Vec<f64> {
    let idx = magnitude_order(x);
    let mut g = vec![0.0; x.len()];
    for (j, &i) in idx.iter().enumerate() {
        if x[i] != 0.0 {
            g[i] = if x[i] < 0.0 { -ws[j] } else { ws[j] };
        }
    }
    g
}

/// Duality gap of a candidate prox solution. The dual of
/// `min_x 0.5||x-v||^2 + slope(x)` is `max {<g,v> - 0.5||g||^2}` over the
/// dual-norm unit ball, and any scaled-feasible point gives a lower bound.
fn prox_duality_gap(x: &[f64], v: &[f64], w: &WeightSequence) -> (f64, f64) {
    let primal = prox_objective(x, v, w);
    let g0: Vec<f64> = v.iter().zip(x).map(|(a, b)| a - b).collect();
    let scale = norms::slope_dual_norm(&g0, w).expect("validated lengths").max(1.0);
    let mut inner = 0.0;
    let mut sq = 0.0;
    for (gi, vi) in g0.iter().zip(v) {
        let g = gi / scale;
        inner += g * vi;
        sq += g * g;
    }
    let dual = inner - 0.5 * sq;
    (primal, (primal - dual).max(0.0))
}

/// Reference solver for the sorted-l1 prox.
pub fn brute_prox_slope(v: &[f64], w: &WeightSequence, method: OracleMethod) -> Result<OracleResult> {
    if v.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "vector has length {}, weights have length {}",
            v.len(),
            w.len()
        )));
    }
    if v.is_empty() {
        return Err(Error::InvalidParam("empty input".into()));
    }
    match method {
        OracleMethod::ExhaustivePattern => exhaustive_prox(v, w),
        OracleMethod::ProjectedSubgradient => subgradient_prox(v, w),
        OracleMethod::Grid => Err(Error::InvalidParam("grid method is for the infimal convolution oracle".into())),
    }
}

/// Every minimizer is, in the magnitude order of `v`, a nonincreasing
/// nonnegative step vector whose blocks take the mean of `|v|_i - w_i`; we
/// enumerate all block compositions and nonzero prefix lengths and keep the
/// best true objective. Candidates from wrong patterns are valid points, so
/// the minimum over all of them is exact.
fn exhaustive_prox(v: &[f64], w: &WeightSequence) -> Result<OracleResult> {
    let m = v.len();
    if m > EXHAUSTIVE_DIM_CAP {
        return Err(Error::DimCap(format!("exhaustive prox oracle capped at {EXHAUSTIVE_DIM_CAP}, got {m}")));
    }
    let idx = magnitude_order(v);
    let a: Vec<f64> = idx.iter().map(|&i| v[i].abs()).collect();
    let ws = w.weights();

    let mut best_val = f64::INFINITY;
    let mut best_x = vec![0.0; m];
    let mut sorted_vals = vec![0.0; m];
    for k in 0..=m {
        let gaps = k.saturating_sub(1);
        for mask in 0..(1u32 << gaps) {
            for s in sorted_vals.iter_mut() {
                *s = 0.0;
            }
            let mut start = 0;
            for pos in 0..k {
                let is_break = pos + 1 == k || (mask >> pos) & 1 == 1;
                if is_break {
                    let block = start..=pos;
                    let mean = block.clone().map(|i| a[i] - ws[i]).sum::<f64>() / (pos - start + 1) as f64;
                    for i in block {
                        sorted_vals[i] = mean;
                    }
                    start = pos + 1;
                }
            }
            let x = signed_unsort(v, &idx, &sorted_vals);
            let val = prox_objective(&x, v, w);
            if val < best_val {
                best_val = val;
                best_x = x;
            }
        }
    }
    Ok(OracleResult {
        value: best_val,
        minimizer: best_x,
        certified_gap: 1e-12 * (1.0 + best_val.abs()),
        method: OracleMethod::ExhaustivePattern,
    })
}

/// Closed-form refit of a candidate: read off the zero cut and tie blocks (in
/// the magnitude order of `v`) within `tol`, then set each block to the mean
/// of `|v|_i - w_i`.
fn structured_polish(cand: &[f64], v: &[f64], idx: &[usize], a: &[f64], ws: &[f64], tol: f64) -> Vec<f64> {
    let m = v.len();
    let xs: Vec<f64> = idx.iter().map(|&i| cand[i].abs()).collect();
    let scale = a[0].max(1.0);
    let cut = tol * scale;
    let mut k = m;
    for (j, &x) in xs.iter().enumerate() {
        if x < cut {
            k = j;
            break;
        }
    }
    let mut sorted_vals = vec![0.0; m];
    let mut start = 0;
    for pos in 0..k {
        let is_break = pos + 1 == k || xs[pos] - xs[pos + 1] > cut;
        if is_break {
            let block = start..=pos;
            let mean = block.clone().map(|i| a[i] - ws[i]).sum::<f64>() / (pos - start + 1) as f64;
            for i in block {
                sorted_vals[i] = mean.max(0.0);
            }
            start = pos + 1;
        }
    }
    signed_unsort(v, idx, &sorted_vals)
}

fn subgradient_prox(v: &[f64], w: &WeightSequence) -> Result<OracleResult> {
    let m = v.len();
    if m > SUBGRADIENT_DIM_CAP {
        return Err(Error::DimCap(format!("subgradient prox oracle capped at {SUBGRADIENT_DIM_CAP}, got {m}")));
    }
    let ws = w.weights();
    let idx = magnitude_order(v);
    let a: Vec<f64> = idx.iter().map(|&i| v[i].abs()).collect();

    let mut x: Vec<f64> = v.to_vec();
    let mut avg = vec![0.0; m];
    let mut avg_mass = 0.0;
    let mut best_val = f64::INFINITY;
    let mut best_x = x.clone();
    let mut best_gap = f64::INFINITY;

    let polish_tols = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let consider = |cand: &[f64], best_val: &mut f64, best_x: &mut Vec<f64>, best_gap: &mut f64| {
        let (val, gap) = prox_duality_gap(cand, v, w);
        if val < *best_val {
            *best_val = val;
            *best_x = cand.to_vec();
            *best_gap = gap;
        }
    };

    for k in 0..SUBGRADIENT_MAX_ITERS {
        let sub = slope_subgradient(&x, ws);
        let step = 2.0 / (k as f64 + 2.0);
        for i in 0..m {
            x[i] -= step * ((x[i] - v[i]) + sub[i]);
        }
        let mass = (k + 1) as f64;
        avg_mass += mass;
        for i in 0..m {
            avg[i] += mass * x[i];
        }
        if (k + 1) % 2000 == 0 || k + 1 == SUBGRADIENT_MAX_ITERS {
            let mean: Vec<f64> = avg.iter().map(|s| s / avg_mass).collect();
            consider(&x, &mut best_val, &mut best_x, &mut best_gap);
            consider(&mean, &mut best_val, &mut best_x, &mut best_gap);
            for &tol in &polish_tols {
                let p1 = structured_polish(&mean, v, &idx, &a, ws, tol);
                consider(&p1, &mut best_val, &mut best_x, &mut best_gap);
                let p2 = structured_polish(&x, v, &idx, &a, ws, tol);
                consider(&p2, &mut best_val, &mut best_x, &mut best_gap);
            }
            if best_gap <= 5e-12 * (1.0 + best_val.abs()) {
                break;
            }
        }
    }
    Ok(OracleResult {
        value: best_val,
        minimizer: best_x,
        certified_gap: best_gap,
        method: OracleMethod::ProjectedSubgradient,
    })
}

fn infconv_objective(z: &[f64], u: &[f64], w: &WeightSequence, tau: f64) -> f64 {
    let quad: f64 = z.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
    quad.sqrt() + tau * norms::slope_norm(z, w).expect("validated lengths")
}

/// Dual lower bound for `min_z ||u-z||_2 + tau * slope(z)`: maximize `<g,u>`
/// over the intersection of the l2 unit ball and the tau-scaled dual ball.
fn infconv_dual_bound(candidates: &[Vec<f64>], u: &[f64], w: &WeightSequence, tau: f64) -> f64 {
    let mut best = 0.0f64;
    for g0 in candidates {
        let l2 = g0.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dual = norms::slope_dual_norm(g0, w).expect("validated lengths");
        let mut scale = 1.0f64.max(l2);
        if tau > 0.0 {
            scale = scale.max(dual / tau);
        } else if dual > 0.0 {
            continue;
        }
        let val: f64 = g0.iter().zip(u).map(|(g, ui)| g / scale * ui).sum();
        best = best.max(val);
    }
    best
}

/// Reference solver for the square-root sorted Huber value
/// `min_z ||u-z||_2 + tau * slope(z)`. Dimension <= 2 uses a refined dense
/// grid over `z`; higher dimensions scan the prox path `z(t)`, which contains
/// every minimizer. The certified gap comes from a dual certificate.
pub fn brute_infconv_q1(u: &[f64], w: &WeightSequence, tau: f64) -> Result<OracleResult> {
    if u.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "vector has length {}, weights have length {}",
            u.len(),
            w.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::InvalidParam("empty input".into()));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParam(format!("tau = {tau} must be finite and >= 0")));
    }

    let mut best_z = u.to_vec();
    let mut best_val = infconv_objective(&best_z, u, w, tau);
    let mut consider = |z: Vec<f64>, best_val: &mut f64, best_z: &mut Vec<f64>| {
        let val = infconv_objective(&z, u, w, tau);
        if val < *best_val {
            *best_val = val;
            *best_z = z;
        }
    };
    consider(vec![0.0; u.len()], &mut best_val, &mut best_z);

    if u.len() <= 2 {
        grid_search(u, w, tau, &mut consider, &mut best_val, &mut best_z);
    } else {
        path_scan(u, w, tau, &mut consider, &mut best_val, &mut best_z)?;
    }

    // Dual candidates: normalized residual direction and a scaled slope
    // subgradient at the candidate (covers interior and boundary optima).
    let r: Vec<f64> = u.iter().zip(&best_z).map(|(a, b)| a - b).collect();
    let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut duals: Vec<Vec<f64>> = Vec::new();
    if rn > 0.0 {
        duals.push(r.iter().map(|x| x / rn).collect());
    }
    duals.push(slope_subgradient(&best_z, w.weights()).iter().map(|g| tau * g).collect());
    duals.push(slope_subgradient(u, w.weights()).iter().map(|g| tau * g).collect());
    let dual = infconv_dual_bound(&duals, u, w, tau);
    Ok(OracleResult {
        value: best_val,
        minimizer: best_z,
        certified_gap: (best_val - dual).max(0.0),
        method: OracleMethod::Grid,
    })
}

fn grid_search(
    u: &[f64],
    w: &WeightSequence,
    tau: f64,
    consider: &mut impl FnMut(Vec<f64>, &mut f64, &mut Vec<f64>),
    best_val: &mut f64,
    best_z: &mut Vec<f64>,
) {
    let m = u.len();
    let mut center: Vec<f64> = u.iter().map(|x| x / 2.0).collect();
    let mut half: Vec<f64> = u.iter().map(|x| x.abs() / 2.0 + 1.0).collect();
    let pts = if m == 1 { 512 } else { 96 };
    for _round in 0..9 {
        let mut local_best = center.clone();
        let mut local_val = f64::INFINITY;
        let mut z = vec![0.0; m];
        let total = if m == 1 { pts } else { pts * pts };
        for lin in 0..total {
            let (i, j) = (lin % pts, lin / pts);
            z[0] = center[0] - half[0] + 2.0 * half[0] * i as f64 / (pts - 1) as f64;
            if m == 2 {
                z[1] = center[1] - half[1] + 2.0 * half[1] * j as f64 / (pts - 1) as f64;
            }
            let val = infconv_objective(&z, u, w, tau);
            if val < local_val {
                local_val = val;
                local_best = z.clone();
            }
        }
        consider(local_best.clone(), best_val, best_z);
        center = local_best;
        for h in half.iter_mut() {
            *h = (*h * 4.0 / (pts - 1) as f64).max(1e-12);
        }
    }
}

fn path_scan(
    u: &[f64],
    w: &WeightSequence,
    tau: f64,
    consider: &mut impl FnMut(Vec<f64>, &mut f64, &mut Vec<f64>),
    best_val: &mut f64,
    best_z: &mut Vec<f64>,
) -> Result<()> {
    if tau == 0.0 {
        return Ok(());
    }
    let norm_u = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let t_sat = norms::slope_dual_norm(u, w)? / tau;
    let t_max = norm_u.max(t_sat) * 1.000001;
    let mut lo = 0.0;
    let mut hi = t_max;
    let mut pts = 2001usize;
    for round in 0..6 {
        let mut local_t = lo;
        let mut local_val = f64::INFINITY;
        for i in 0..pts {
            let t = lo + (hi - lo) * i as f64 / (pts - 1) as f64;
            let z = if t == 0.0 {
                u.to_vec()
            } else {
                prox::prox_sorted_l1(u, &w.scaled(t * tau)?)?
            };
            let val = infconv_objective(&z, u, w, tau);
            if val < local_val {
                local_val = val;
                local_t = t;
            }
        }
        let z = if local_t == 0.0 { u.to_vec() } else { prox::prox_sorted_l1(u, &w.scaled((local_t * tau).max(f64::MIN_POSITIVE))?)? };
        consider(z, best_val, best_z);
        let cell = (hi - lo) / (pts - 1) as f64;
        lo = (local_t - 2.0 * cell).max(0.0);
        hi = (local_t + 2.0 * cell).min(t_max);
        if round == 0 {
            pts = 201;
        }
    }
    Ok(())
}

/// Dense least squares over the stacked design, via SVD with a rank check.
/// The returned vector is the row-major flattening of the coefficient matrix.
pub fn dense_least_squares(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    linalg::lstsq(x, y)
}
