//! Proximal operators and the sorted Huber losses built from them.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::norms::{self, WeightSequence};

/// Value and inner minimizer of a sorted Huber loss evaluation.
#[derive(Debug, Clone)]
pub struct SortedHuberValue {
    pub value: f64,
    /// The shift `z` attaining the infimal convolution.
    pub z: Vec<f64>,
}

/// Prox of the sorted-l1 norm: `argmin_x 0.5||x - v||^2 + sum_i w_i x#_i`.
///
/// Sorts `|v|` (stable, so ties keep index order), subtracts the weights, and
/// pools adjacent violators with a stack so the result is nonincreasing; the
/// positive part is then unsorted and re-signed. `O(m log m)` and exact.
pub fn prox_sorted_l1(v: &[f64], w: &WeightSequence) -> Result<Vec<f64>> {
    if v.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "vector has length {}, weights have length {}",
            v.len(),
            w.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParam("non-finite entry in prox input".into()));
    }
    Ok(prox_sorted_l1_raw(v, w.weights()))
}

/// Core stack-based pool-adjacent-violators pass over validated inputs.
pub(crate) fn prox_sorted_l1_raw(v: &[f64], ws: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).expect("non-finite input"));

    // Blocks of (sum, count); merge while averages fail to decrease.
    let mut sums: Vec<f64> = Vec::with_capacity(m);
    let mut counts: Vec<usize> = Vec::with_capacity(m);
    for (j, &i) in idx.iter().enumerate() {
        sums.push(v[i].abs() - ws[j]);
        counts.push(1);
        while sums.len() >= 2 {
            let l = sums.len();
            let prev_avg = sums[l - 2] / counts[l - 2] as f64;
            let top_avg = sums[l - 1] / counts[l - 1] as f64;
            if prev_avg > top_avg {
                break;
            }
            sums[l - 2] += sums[l - 1];
            counts[l - 2] += counts[l - 1];
            sums.pop();
            counts.pop();
        }
    }

    let mut x = vec![0.0; m];
    let mut pos = 0;
    for (sum, count) in sums.iter().zip(&counts) {
        let val = (sum / *count as f64).max(0.0);
        for _ in 0..*count {
            let i = idx[pos];
            x[i] = if val == 0.0 {
                0.0
            } else if v[i] < 0.0 {
                -val
            } else {
                val
            };
            pos += 1;
        }
    }
    x
}

/// Entrywise soft threshold at level `eta >= 0`.
pub fn prox_soft_threshold(v: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParam(format!("threshold {eta} must be finite and >= 0")));
    }
    Ok(v.iter()
        .map(|&x| {
            let mag = x.abs() - eta;
            if mag <= 0.0 {
                0.0
            } else if x < 0.0 {
                -mag
            } else {
                mag
            }
        })
        .collect())
}

/// Singular value soft thresholding at `eta`, followed by entrywise clipping
/// to `[-box_a, box_a]`. With `box_a = inf` this is the exact nuclear prox;
/// with a finite box it is the clipped variant used by the decomposition
/// solver, not the exact prox of the sum.
pub fn prox_nuclear_box(m: ArrayView2<'_, f64>, eta: f64, box_a: f64) -> Result<Array2<f64>> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParam(format!("threshold {eta} must be finite and >= 0")));
    }
    if !(box_a > 0.0) {
        return Err(Error::InvalidParam(format!("box bound {box_a} must be positive")));
    }
    let (u, mut s, v_t) = linalg::svd(m);
    for si in s.iter_mut() {
        *si = (*si - eta).max(0.0);
    }
    let mut out = linalg::recompose(&u, &s, &v_t);
    if box_a.is_finite() {
        out.mapv_inplace(|x| x.clamp(-box_a, box_a));
    }
    Ok(out)
}

/// Quadratic sorted Huber loss `min_z 0.5||u - z||^2 + tau * slope(z)`,
/// evaluated exactly through the sorted-l1 prox.
pub fn sorted_huber_q2(u: &[f64], w: &WeightSequence, tau: f64) -> Result<SortedHuberValue> {
    check_tau(tau)?;
    if u.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "vector has length {}, weights have length {}",
            u.len(),
            w.len()
        )));
    }
    if tau == 0.0 {
        return Ok(SortedHuberValue { value: 0.0, z: u.to_vec() });
    }
    let z = prox_sorted_l1(u, &w.scaled(tau)?)?;
    let quad: f64 = u.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
    let value = 0.5 * quad + tau * norms::slope_norm(&z, w)?;
    Ok(SortedHuberValue { value, z })
}

/// Square-root sorted Huber loss `min_z ||u - z||_2 + tau * slope(z)`.
///
/// Every minimizer with nonzero residual lies on the prox path
/// `z(t) = prox(u, t * tau * w)` at the fixed point `t = ||u - z(t)||_2`,
/// found by bisection; the two boundary regimes (`z = 0` when the dual norm
/// condition holds, `z = u` when the penalty is too cheap to move) are
/// detected directly.
pub fn sorted_huber_q1(u: &[f64], w: &WeightSequence, tau: f64) -> Result<SortedHuberValue> {
    check_tau(tau)?;
    if u.len() != w.len() {
        return Err(Error::LengthMismatch(format!(
            "vector has length {}, weights have length {}",
            u.len(),
            w.len()
        )));
    }
    let norm_u = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_u == 0.0 {
        return Ok(SortedHuberValue { value: 0.0, z: vec![0.0; u.len()] });
    }
    if tau == 0.0 {
        return Ok(SortedHuberValue { value: 0.0, z: u.to_vec() });
    }

    let evaluate = |z: Vec<f64>| -> Result<SortedHuberValue> {
        let quad: f64 = u.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
        let value = quad.sqrt() + tau * norms::slope_norm(&z, w)?;
        Ok(SortedHuberValue { value, z })
    };

    // Stationarity at z = 0: the residual direction must be dominated by the
    // penalty, i.e. dual-slope(u) <= tau * ||u||_2.
    if norms::slope_dual_norm(u, w)? <= tau * norm_u {
        return evaluate(vec![0.0; u.len()]);
    }

    let ws = w.weights();
    let residual_gap = |t: f64| -> f64 {
        let scaled: Vec<f64> = ws.iter().map(|wi| wi * t * tau).collect();
        let z = prox_sorted_l1_raw(u, &scaled);
        let quad: f64 = u.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
        quad.sqrt() - t
    };

    // Bracket the fixed point: the gap is <= 0 at t = ||u||_2; walk down
    // geometrically until it turns positive. If it never does, shrinkage is
    // cheaper than any move and the minimizer collapses to z = u.
    let mut hi = norm_u;
    let mut lo = 0.0;
    let mut found = false;
    let mut t = norm_u / 2.0;
    while t > 1e-14 * norm_u {
        if residual_gap(t) > 0.0 {
            lo = t;
            found = true;
            break;
        }
        hi = t;
        t /= 2.0;
    }

    let mut candidates: Vec<SortedHuberValue> = vec![evaluate(u.to_vec())?];
    if found {
        for _ in 0..200 {
            if hi - lo <= 1e-10 * norm_u.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if residual_gap(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_star = 0.5 * (lo + hi);
        let z = prox_sorted_l1(u, &w.scaled(t_star * tau)?)?;
        candidates.push(evaluate(z)?);
    }
    Ok(candidates
        .into_iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).expect("finite loss values"))
        .expect("nonempty candidate set"))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParam(format!("tau = {tau} must be finite and >= 0")));
    }
    Ok(())
}

/// Scalar Huber function `min(t^2/2, |t| - 1/2)`; the quadratic sorted Huber
/// loss with constant unit weights separates into `tau^2 * sum Phi(u_i/tau)`.
pub fn huber_phi(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        0.5 * t * t
    } else {
        a - 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{slope_norm, slope_weights};
    use crate::oracle::{brute_infconv_q1, brute_prox_slope, OracleMethod};
    use crate::rng::GaussianStream;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn linf(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn prox_hand_examples() {
        let w = WeightSequence::from_weights(vec![2.0, 1.0]).unwrap();
        assert_eq!(prox_sorted_l1(&[3.0, 1.0], &w).unwrap(), vec![1.0, 0.0]);
        assert_eq!(prox_sorted_l1(&[2.0, 2.0], &w).unwrap(), vec![0.5, 0.5]);
        assert_eq!(prox_sorted_l1(&[-3.0, 1.0], &w).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn prox_pools_across_sign_and_order() {
        // v = (2, -2, 1), w = (3, 1, 0.5) pools everything into one block of
        // average 1/6 and restores signs and positions.
        let w = WeightSequence::from_weights(vec![3.0, 1.0, 0.5]).unwrap();
        let x = prox_sorted_l1(&[2.0, -2.0, 1.0], &w).unwrap();
        let e = 1.0 / 6.0;
        assert_abs_diff_eq!(x[0], e, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], -e, epsilon = 1e-12);
        assert_abs_diff_eq!(x[2], e, epsilon = 1e-12);
    }

    #[test]
    fn prox_matches_exhaustive_oracle_small_dims() {
        let mut stream = GaussianStream::from_key(2024, &[1]);
        for m in 1..=6 {
            let w = slope_weights(m, 10.0).unwrap();
            for rep in 0..200 {
                let scale = if rep % 3 == 0 { 0.5 } else { 4.0 };
                let mut v: Vec<f64> = (0..m).map(|_| scale * stream.standard_normal()).collect();
                if rep % 5 == 0 && m > 1 {
                    v[m / 2] = v[0]; // force magnitude ties
                }
                if rep % 7 == 0 {
                    v[0] = 0.0;
                }
                let x = prox_sorted_l1(&v, &w).unwrap();
                let oracle = brute_prox_slope(&v, &w, OracleMethod::ExhaustivePattern).unwrap();
                assert!(
                    linf(&x, &oracle.minimizer) <= 1e-8,
                    "m={m} rep={rep} v={v:?} impl={x:?} oracle={:?}",
                    oracle.minimizer
                );
            }
        }
    }

    #[test]
    fn prox_matches_subgradient_oracle_medium_dims() {
        let mut stream = GaussianStream::from_key(55, &[7]);
        for &m in &[10usize, 50] {
            let w = slope_weights(m, 10.0).unwrap();
            for _ in 0..20 {
                let v: Vec<f64> = (0..m).map(|_| 3.0 * stream.standard_normal()).collect();
                let x = prox_sorted_l1(&v, &w).unwrap();
                let oracle = brute_prox_slope(&v, &w, OracleMethod::ProjectedSubgradient).unwrap();
                let tol = (2.0 * oracle.certified_gap).sqrt() + 1e-8;
                assert!(linf(&x, &oracle.minimizer) <= tol, "m={m} diff {} tol {tol}", linf(&x, &oracle.minimizer));
            }
        }
    }

    #[test]
    fn prox_output_satisfies_optimality_certificate() {
        // v - x must be a subgradient of the weighted sorted-l1 norm at x:
        // dual feasible and aligned.
        let mut stream = GaussianStream::from_key(9, &[3]);
        for &m in &[5usize, 20, 100] {
            let w = slope_weights(m, 10.0).unwrap();
            for _ in 0..50 {
                let v: Vec<f64> = (0..m).map(|_| 2.0 * stream.standard_normal()).collect();
                let x = prox_sorted_l1(&v, &w).unwrap();
                let g: Vec<f64> = v.iter().zip(&x).map(|(a, b)| a - b).collect();
                let dual = crate::norms::slope_dual_norm(&g, &w).unwrap();
                assert!(dual <= 1.0 + 1e-9, "dual norm {dual}");
                let inner: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
                let sn = slope_norm(&x, &w).unwrap();
                assert!((inner - sn).abs() <= 1e-8 * (1.0 + sn), "alignment {inner} vs {sn}");
            }
        }
    }

    #[test]
    fn soft_threshold_matches_constant_weight_prox() {
        let mut stream = GaussianStream::from_key(31, &[4]);
        let w = WeightSequence::constant(8, 0.7).unwrap();
        for _ in 0..50 {
            let v: Vec<f64> = (0..8).map(|_| 2.0 * stream.standard_normal()).collect();
            let a = prox_sorted_l1(&v, &w).unwrap();
            let b = prox_soft_threshold(&v, 0.7).unwrap();
            assert!(linf(&a, &b) <= 1e-12);
        }
        assert!(prox_soft_threshold(&[1.0], -0.1).is_err());
    }

    #[test]
    fn nuclear_box_on_diagonal() {
        let m = array![[3.0, 0.0], [0.0, 1.0]];
        let out = prox_nuclear_box(m.view(), 2.0, f64::INFINITY).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(out[[0, 1]], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(out[[1, 1]], 0.0, epsilon = 1e-10);
        let clipped = prox_nuclear_box(m.view(), 2.0, 0.25).unwrap();
        assert_abs_diff_eq!(clipped[[0, 0]], 0.25, epsilon = 1e-10);
    }

    #[test]
    fn nuclear_box_zero_threshold_clips_only() {
        let m = array![[1.5, -0.2], [0.3, 0.9]];
        let out = prox_nuclear_box(m.view(), 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(out[[0, 1]], -0.2, epsilon = 1e-10);
        assert_abs_diff_eq!(out[[1, 0]], 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(out[[1, 1]], 0.9, epsilon = 1e-10);
        assert!(prox_nuclear_box(m.view(), 1.0, 0.0).is_err());
    }

    #[test]
    fn huber_q2_scalar_cases() {
        let w = WeightSequence::constant(1, 1.0).unwrap();
        let r = sorted_huber_q2(&[2.0], &w, 1.0).unwrap();
        assert_abs_diff_eq!(r.value, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.z[0], 1.0, epsilon = 1e-12);
        let r = sorted_huber_q2(&[0.5], &w, 1.0).unwrap();
        assert_abs_diff_eq!(r.value, 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(r.z[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn huber_q2_reduces_to_separable_huber_for_unit_weights() {
        let mut stream = GaussianStream::from_key(8, &[8]);
        for _ in 0..200 {
            let n = 1 + stream.uniform_index(12);
            let w = WeightSequence::constant(n, 1.0).unwrap();
            let tau = 0.1 + 3.0 * stream.uniform01();
            let u: Vec<f64> = (0..n).map(|_| 4.0 * stream.standard_normal()).collect();
            let got = sorted_huber_q2(&u, &w, tau).unwrap().value;
            let expect: f64 = tau * tau * u.iter().map(|&x| huber_phi(x / tau)).sum::<f64>();
            assert!(
                (got - expect).abs() <= 1e-10 * (1.0 + expect.abs()),
                "got {got} expect {expect}"
            );
        }
    }

    #[test]
    fn huber_q1_boundary_and_interior_cases() {
        let w = WeightSequence::from_weights(vec![1.0, 0.5]).unwrap();
        // Penalty so heavy that z = 0: value is ||u||_2.
        let r = sorted_huber_q1(&[1.0, 0.0], &w, 1.1).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-10);
        assert!(r.z.iter().all(|&z| z == 0.0));
        // Penalty so cheap that z = u.
        let r = sorted_huber_q1(&[10.0, 0.0], &w, 0.01).unwrap();
        assert_abs_diff_eq!(r.value, 0.1, epsilon = 1e-10);
        assert_abs_diff_eq!(r.z[0], 10.0, epsilon = 1e-10);
        // Interior fixed point against the closed form.
        let w2 = WeightSequence::from_weights(vec![2.0, 1.0]).unwrap();
        let tau = 0.45f64;
        let rnorm = 1.0 / (1.0 - 4.0 * tau * tau).sqrt();
        let z1 = 3.0 - 2.0 * tau * rnorm;
        let expect = rnorm + tau * 2.0 * z1;
        let r = sorted_huber_q1(&[3.0, 1.0], &w2, tau).unwrap();
        assert!((r.value - expect).abs() <= 1e-8, "value {} expect {expect}", r.value);
        assert!((r.z[0] - z1).abs() <= 1e-6);
    }

    #[test]
    fn huber_q1_matches_grid_oracle() {
        let mut stream = GaussianStream::from_key(666, &[2]);
        for rep in 0..30 {
            let m = if rep % 2 == 0 { 2 } else { 5 };
            let w = slope_weights(m, 10.0).unwrap();
            let tau = 0.05 + 0.5 * stream.uniform01();
            let u: Vec<f64> = (0..m).map(|_| 3.0 * stream.standard_normal()).collect();
            let got = sorted_huber_q1(&u, &w, tau).unwrap();
            let oracle = brute_infconv_q1(&u, &w, tau).unwrap();
            let tol = oracle.certified_gap + 1e-6;
            assert!(
                got.value <= oracle.value + 1e-8 && got.value >= oracle.value - tol,
                "rep={rep} got {} oracle {} gap {}",
                got.value,
                oracle.value,
                oracle.certified_gap
            );
        }
    }

    #[test]
    fn huber_values_reevaluate_exactly() {
        let mut stream = GaussianStream::from_key(12, &[12]);
        let w = slope_weights(6, 10.0).unwrap();
        for _ in 0..50 {
            let u: Vec<f64> = (0..6).map(|_| 3.0 * stream.standard_normal()).collect();
            let tau = 0.2 + stream.uniform01();
            let q2 = sorted_huber_q2(&u, &w, tau).unwrap();
            let quad: f64 = u.iter().zip(&q2.z).map(|(a, b)| (a - b) * (a - b)).sum();
            let re = 0.5 * quad + tau * slope_norm(&q2.z, &w).unwrap();
            assert_abs_diff_eq!(q2.value, re, epsilon = 1e-12);
            let q1 = sorted_huber_q1(&u, &w, tau).unwrap();
            let quad: f64 = u.iter().zip(&q1.z).map(|(a, b)| (a - b) * (a - b)).sum();
            let re = quad.sqrt() + tau * slope_norm(&q1.z, &w).unwrap();
            assert_abs_diff_eq!(q1.value, re, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn prop_prox_is_nonexpansive(
            v1 in proptest::collection::vec(-10.0f64..10.0, 2..10),
            shift in -2.0f64..2.0
        ) {
            let m = v1.len();
            let w = slope_weights(m, 10.0).unwrap();
            let v2: Vec<f64> = v1.iter().enumerate().map(|(i, x)| x + shift * (i as f64 + 1.0) / m as f64).collect();
            let x1 = prox_sorted_l1(&v1, &w).unwrap();
            let x2 = prox_sorted_l1(&v2, &w).unwrap();
            let dx: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let dv: f64 = v1.iter().zip(&v2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!(dx <= dv + 1e-9);
        }

        #[test]
        fn prop_prox_preserves_order_and_signs(v in proptest::collection::vec(-10.0f64..10.0, 2..10)) {
            let m = v.len();
            let w = slope_weights(m, 10.0).unwrap();
            let x = prox_sorted_l1(&v, &w).unwrap();
            // Magnitudes follow v's stable magnitude order.
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).unwrap());
            for j in 1..m {
                prop_assert!(x[idx[j - 1]].abs() >= x[idx[j]].abs() - 1e-12);
            }
            for i in 0..m {
                prop_assert!(x[i].abs() <= v[i].abs() + 1e-12);
                if x[i] != 0.0 {
                    prop_assert!(x[i] * v[i] > 0.0);
                }
            }
        }

        #[test]
        fn prop_huber_q1_value_bounds(
            u in proptest::collection::vec(-5.0f64..5.0, 1..8),
            tau in 0.01f64..2.0
        ) {
            let w = slope_weights(u.len(), 10.0).unwrap();
            let r = sorted_huber_q1(&u, &w, tau).unwrap();
            let l2: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let pen = tau * slope_norm(&u, &w).unwrap();
            prop_assert!(r.value <= l2.min(pen) + 1e-10);
            prop_assert!(r.value >= 0.0);
        }

        #[test]
        fn prop_huber_q2_value_bounds_and_tau_monotone(
            u in proptest::collection::vec(-5.0f64..5.0, 1..8),
            tau in 0.01f64..2.0
        ) {
            let w = slope_weights(u.len(), 10.0).unwrap();
            let r = sorted_huber_q2(&u, &w, tau).unwrap();
            let half_sq: f64 = 0.5 * u.iter().map(|x| x * x).sum::<f64>();
            let pen = tau * slope_norm(&u, &w).unwrap();
            prop_assert!(r.value <= half_sq.min(pen) + 1e-10);
            let r2 = sorted_huber_q2(&u, &w, tau * 1.5).unwrap();
            prop_assert!(r2.value >= r.value - 1e-10);
        }
    }
}
