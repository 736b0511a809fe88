//! Computable theory-side quantities: the contamination rate function
//! `omega(eps)`, effective dimensions, finite-sample error-rate predictors,
//! and default tuning levels for every estimator/regularizer pairing.
//!
//! The scalings here are exact; the absolute constants in front of them are
//! not pinned by the analysis, so they live in `RateConstants` as declared
//! engineering knobs (default 2 for regularization levels, 1 for design
//! surrogates).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structured dimension regime of a single-block estimation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DimCase {
    /// `s`-sparse vector in dimension `p` under an l1 penalty.
    SparseL1 { s: usize, p: usize },
    /// `s`-sparse vector in dimension `p` under the sorted-l1 penalty.
    SparseSlope { s: usize, p: usize },
    /// Rank-`r` matrix of shape `d1 x d2` under the nuclear penalty.
    Trace { r: usize, d1: usize, d2: usize },
}

impl DimCase {
    fn validate(&self) -> Result<()> {
        match *self {
            DimCase::SparseL1 { s, p } | DimCase::SparseSlope { s, p } => {
                if p == 0 {
                    return Err(Error::InvalidParam("ambient dimension p must be >= 1".into()));
                }
                if s > p {
                    return Err(Error::InvalidParam(format!("sparsity {s} exceeds dimension {p}")));
                }
            }
            DimCase::Trace { r, d1, d2 } => {
                if d1 == 0 || d2 == 0 {
                    return Err(Error::InvalidParam("matrix sides must be >= 1".into()));
                }
                if r > d1.min(d2) {
                    return Err(Error::InvalidParam(format!(
                        "rank {r} exceeds min side {}",
                        d1.min(d2)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Estimator configuration a default tuning is requested for.
///
/// `Decomp` is the additive low-rank plus sparse estimator (quadratic data
/// term); the `Single*` cases are the one-block estimators with a quadratic
/// (`q2`) or root-mean-square (`q1`) data term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TuningCase {
    Decomp { d1: usize, d2: usize, p: usize, a_star: f64 },
    SingleQ2 { dim: DimCase },
    SingleQ1 { dim: DimCase },
}

/// Multiplicative constants sitting in front of the theoretical scalings.
///
/// `rho1` and `rho_nuclear` are design surrogates (1 for isotropic designs;
/// callers may substitute empirical column norms).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateConstants {
    pub c_lambda: f64,
    pub c_chi: f64,
    pub c_tau: f64,
    pub c1: f64,
    pub rho1: f64,
    pub rho_nuclear: f64,
}

impl Default for RateConstants {
    fn default() -> Self {
        RateConstants {
            c_lambda: 2.0,
            c_chi: 2.0,
            c_tau: 2.0,
            c1: 1.0,
            rho1: 1.0,
            rho_nuclear: 1.0,
        }
    }
}

impl RateConstants {
    fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.c_lambda, "c_lambda"),
            (self.c_chi, "c_chi"),
            (self.c_tau, "c_tau"),
            (self.c1, "c1"),
            (self.rho1, "rho1"),
            (self.rho_nuclear, "rho_nuclear"),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParam(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Constants a tuning was computed with, echoed back for provenance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TuningConstants {
    pub c_lambda: f64,
    pub c_chi: f64,
    pub c_tau: f64,
    pub l: f64,
    pub sigma_guess: f64,
}

/// Default regularization levels for one estimator configuration.
///
/// `chi` is only meaningful for the decomposition estimator and is 0 for the
/// single-block cases.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TuningDefaults {
    pub lambda: f64,
    pub chi: f64,
    pub tau: f64,
    pub constants: TuningConstants,
}

fn require_prob(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::InvalidParam(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(())
}

fn require_nonneg(x: f64, name: &str) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidParam(format!("{name} must be finite and >= 0, got {x}")));
    }
    Ok(())
}

/// Contamination rate function `omega(eps) = eps * ln(1/eps)` on `[0, 1]`,
/// with `omega(0) = omega(1) = 0` by continuity.
///
/// Concave, maximized at `eps = 1/e` with value `1/e`.
pub fn omega_eps(eps: f64) -> Result<f64> {
    if !eps.is_finite() || eps < 0.0 || eps > 1.0 {
        return Err(Error::InvalidParam(format!("eps must lie in [0,1], got {eps}")));
    }
    if eps == 0.0 || eps == 1.0 {
        return Ok(0.0);
    }
    Ok(eps * (1.0 / eps).ln())
}

/// Effective dimension of a structured regime: `s ln p` for l1-sparse,
/// `s ln(e p / s)` for slope-sparse, `r (d1 + d2)` for low rank.
pub fn effective_dim(case: &DimCase) -> Result<f64> {
    case.validate()?;
    Ok(match *case {
        DimCase::SparseL1 { s, p } => s as f64 * (p as f64).ln(),
        DimCase::SparseSlope { s, p } => {
            if s == 0 {
                0.0
            } else {
                s as f64 * (1.0 + (p as f64 / s as f64).ln())
            }
        }
        DimCase::Trace { r, d1, d2 } => (r * (d1 + d2)) as f64,
    })
}

/// Error-rate predictor for the single-block estimators:
/// `L (1 + sqrt(ln(1/delta))) / sqrt(n) + L^2 rho mu sqrt(d_eff / n)`.
pub fn rate_single(n: usize, d_eff: f64, delta: f64, rho: f64, mu: f64, l: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    require_prob(delta)?;
    require_nonneg(d_eff, "d_eff")?;
    require_nonneg(rho, "rho")?;
    require_nonneg(mu, "mu")?;
    require_nonneg(l, "L")?;
    let sn = (n as f64).sqrt();
    Ok(l * (1.0 + (1.0 / delta).ln().sqrt()) / sn + l * l * rho * mu * (d_eff / n as f64).sqrt())
}

/// Inputs for the decomposition-estimator rate predictor.
#[derive(Debug, Clone, Copy)]
pub struct DecompRate {
    pub n: usize,
    pub r: usize,
    pub s: usize,
    pub d1: usize,
    pub d2: usize,
    pub p: usize,
    pub delta: f64,
    pub a_star: f64,
    pub c1: f64,
    pub l: f64,
    pub sigma: f64,
}

/// Error-rate predictor for the additive low-rank plus sparse estimator:
///
/// `L (1 + sqrt(ln(1/delta))) / sqrt(n)
///  + L^2 [ sqrt(r(d1+d2)/n) + sqrt(s ln p / n) ]
///  + (1 + 1/(C1 sigma L)) a* sqrt(s/n)`.
pub fn rate_decomp(params: &DecompRate) -> Result<f64> {
    let DecompRate { n, r, s, d1, d2, p, delta, a_star, c1, l, sigma } = *params;
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    require_prob(delta)?;
    DimCase::Trace { r, d1, d2 }.validate()?;
    DimCase::SparseL1 { s, p }.validate()?;
    require_nonneg(a_star, "a_star")?;
    for (v, name) in [(c1, "C1"), (l, "L"), (sigma, "sigma")] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidParam(format!("{name} must be finite and > 0, got {v}")));
        }
    }
    let nf = n as f64;
    let sn = nf.sqrt();
    let noise = l * (1.0 + (1.0 / delta).ln().sqrt()) / sn;
    let structure =
        l * l * ((r as f64 * (d1 + d2) as f64 / nf).sqrt() + (s as f64 * (p as f64).ln() / nf).sqrt());
    let spike = (1.0 + 1.0 / (c1 * sigma * l)) * a_star * (s as f64 / nf).sqrt();
    Ok(noise + structure + spike)
}

/// Theorem-shaped default tuning for one estimator configuration.
///
/// Scalings, with `c_*` from `constants`:
/// - decomposition (`q2`): `lambda = c_lambda sigma L^2 sqrt((d1+d2)/n)`,
///   `chi = c_chi (sigma L^2 sqrt(ln p / n) + a*/sqrt(n))`,
///   `tau = c_tau C1 L^2 sigma / sqrt(n)`;
/// - single `q2`: `tau` as above, `lambda` by regime: l1
///   `c_lambda L^2 sigma rho1 sqrt(ln p / n)`, slope
///   `c_lambda L^2 sigma rho1 / sqrt(n)` (the log lives in the weights),
///   nuclear `c_lambda L^2 sigma rho_nuclear sqrt((d1+d2)/n)`;
/// - single `q1`: sigma-free, one power of `L` lower:
///   `tau = c_tau L / sqrt(n)` and `lambda` as in `q2` with `L^2 sigma`
///   replaced by `L`.
pub fn default_tuning(
    case: &TuningCase,
    n: usize,
    sigma: f64,
    l: f64,
    constants: &RateConstants,
) -> Result<TuningDefaults> {
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParam(format!("sigma must be finite and > 0, got {sigma}")));
    }
    if !l.is_finite() || l < 1.0 {
        return Err(Error::InvalidParam(format!("L must be finite and >= 1, got {l}")));
    }
    constants.validate()?;
    let nf = n as f64;
    let sn = nf.sqrt();
    let (lambda, chi, tau) = match *case {
        TuningCase::Decomp { d1, d2, p, a_star } => {
            DimCase::Trace { r: 0, d1, d2 }.validate()?;
            if p == 0 {
                return Err(Error::InvalidParam("ambient dimension p must be >= 1".into()));
            }
            require_nonneg(a_star, "a_star")?;
            let lambda = constants.c_lambda * sigma * l * l * ((d1 + d2) as f64 / nf).sqrt();
            let chi = constants.c_chi * (sigma * l * l * ((p as f64).ln() / nf).sqrt() + a_star / sn);
            let tau = constants.c_tau * constants.c1 * l * l * sigma / sn;
            (lambda, chi, tau)
        }
        TuningCase::SingleQ2 { dim } => {
            dim.validate()?;
            let lambda = match dim {
                DimCase::SparseL1 { p, .. } => {
                    constants.c_lambda * l * l * sigma * constants.rho1 * ((p as f64).ln() / nf).sqrt()
                }
                DimCase::SparseSlope { .. } => constants.c_lambda * l * l * sigma * constants.rho1 / sn,
                DimCase::Trace { d1, d2, .. } => {
                    constants.c_lambda * l * l * sigma * constants.rho_nuclear
                        * ((d1 + d2) as f64 / nf).sqrt()
                }
            };
            let tau = constants.c_tau * constants.c1 * l * l * sigma / sn;
            (lambda, 0.0, tau)
        }
        TuningCase::SingleQ1 { dim } => {
            dim.validate()?;
            let lambda = match dim {
                DimCase::SparseL1 { p, .. } => {
                    constants.c_lambda * l * constants.rho1 * ((p as f64).ln() / nf).sqrt()
                }
                DimCase::SparseSlope { .. } => constants.c_lambda * l * constants.rho1 / sn,
                DimCase::Trace { d1, d2, .. } => {
                    constants.c_lambda * l * constants.rho_nuclear * ((d1 + d2) as f64 / nf).sqrt()
                }
            };
            let tau = constants.c_tau * l / sn;
            (lambda, 0.0, tau)
        }
    };
    Ok(TuningDefaults {
        lambda,
        chi,
        tau,
        constants: TuningConstants {
            c_lambda: constants.c_lambda,
            c_chi: constants.c_chi,
            c_tau: constants.c_tau,
            l,
            sigma_guess: sigma,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn omega_endpoints_and_pinned_values() {
        assert_eq!(omega_eps(0.0).unwrap(), 0.0);
        assert_eq!(omega_eps(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(omega_eps(0.1).unwrap(), 0.2302585092994046, epsilon = 1e-15);
        let inv_e = (-1.0f64).exp();
        assert_relative_eq!(omega_eps(inv_e).unwrap(), inv_e, max_relative = 1e-12);
        assert!(omega_eps(-0.1).is_err());
        assert!(omega_eps(1.5).is_err());
        assert!(omega_eps(f64::NAN).is_err());
    }

    #[test]
    fn omega_is_concave_with_max_at_inv_e() {
        let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&e| omega_eps(e).unwrap()).collect();
        for w in vals.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] <= 1e-12, "convex kink at {:?}", w);
        }
        let argmax = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax + 1, 368); // nearest grid point to 1/e
        let peak = omega_eps((-1.0f64).exp()).unwrap();
        assert!(vals.iter().all(|&v| v <= peak + 1e-15));
    }

    #[test]
    fn effective_dim_matches_closed_forms() {
        let v = effective_dim(&DimCase::SparseL1 { s: 15, p: 100 }).unwrap();
        assert_abs_diff_eq!(v, 69.07755278982138, epsilon = 1e-12);
        assert_eq!(effective_dim(&DimCase::Trace { r: 1, d1: 10, d2: 10 }).unwrap(), 20.0);
        for p in [5usize, 50, 641] {
            let v = effective_dim(&DimCase::SparseSlope { s: p, p }).unwrap();
            assert_relative_eq!(v, p as f64, max_relative = 1e-12);
        }
        assert_eq!(effective_dim(&DimCase::SparseL1 { s: 0, p: 100 }).unwrap(), 0.0);
        assert_eq!(effective_dim(&DimCase::SparseSlope { s: 0, p: 100 }).unwrap(), 0.0);
        assert_eq!(effective_dim(&DimCase::Trace { r: 0, d1: 7, d2: 9 }).unwrap(), 0.0);
    }

    #[test]
    fn effective_dim_rejects_bad_dims() {
        assert!(effective_dim(&DimCase::SparseL1 { s: 101, p: 100 }).is_err());
        assert!(effective_dim(&DimCase::SparseSlope { s: 3, p: 0 }).is_err());
        assert!(effective_dim(&DimCase::Trace { r: 11, d1: 10, d2: 10 }).is_err());
        assert!(effective_dim(&DimCase::Trace { r: 1, d1: 0, d2: 10 }).is_err());
    }

    #[test]
    fn rate_single_pinned_value_and_decay() {
        let delta = (-1.0f64).exp();
        let v = rate_single(100, 25.0, delta, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, 0.7, epsilon = 1e-15);
        let seq: Vec<f64> = [100usize, 10_000, 1_000_000]
            .iter()
            .map(|&n| rate_single(n, 25.0, delta, 1.0, 1.0, 1.0).unwrap())
            .collect();
        assert!(seq[0] > seq[1] && seq[1] > seq[2]);
        assert!(rate_single(100, 25.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(rate_single(100, 25.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(rate_single(0, 25.0, 0.5, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rate_single_homogeneity_in_l() {
        let (n, d_eff, delta, rho, mu) = (400usize, 30.0, 0.05f64, 0.8, 1.3);
        let t1 = (1.0 + (1.0 / delta).ln().sqrt()) / (n as f64).sqrt();
        let t2 = rho * mu * (d_eff / n as f64).sqrt();
        let doubled = rate_single(n, d_eff, delta, rho, mu, 2.0).unwrap();
        assert_relative_eq!(doubled, 2.0 * t1 + 4.0 * t2, max_relative = 1e-12);
    }

    fn decomp_example() -> DecompRate {
        DecompRate {
            n: 100,
            r: 1,
            s: 4,
            d1: 10,
            d2: 10,
            p: 100,
            delta: (-1.0f64).exp(),
            a_star: 1.0,
            c1: 1.0,
            l: 1.0,
            sigma: 1.0,
        }
    }

    #[test]
    fn rate_decomp_pinned_value() {
        let v = rate_decomp(&decomp_example()).unwrap();
        assert_abs_diff_eq!(v, 1.4764068007578275, epsilon = 1e-12);
    }

    #[test]
    fn rate_decomp_noise_only_when_structure_vanishes() {
        let mut params = decomp_example();
        params.r = 0;
        params.s = 0;
        let v = rate_decomp(&params).unwrap();
        assert_relative_eq!(v, 2.0 / 10.0, max_relative = 1e-14);
    }

    #[test]
    fn rates_monotone_in_n_and_confidence() {
        let mut prev = f64::INFINITY;
        for n in [50usize, 100, 200, 400, 1600, 25_600] {
            let mut params = decomp_example();
            params.n = n;
            let v = rate_decomp(&params).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut prev = 0.0;
        let mut prev_s = 0.0;
        for delta in [0.9, 0.5, 0.1, 0.01, 1e-6] {
            let mut params = decomp_example();
            params.delta = delta;
            let v = rate_decomp(&params).unwrap();
            assert!(v > prev, "rate should grow as delta shrinks");
            prev = v;
            let vs = rate_single(100, 25.0, delta, 1.0, 1.0, 1.0).unwrap();
            assert!(vs > prev_s);
            prev_s = vs;
        }
    }

    #[test]
    fn rate_decomp_rejects_degenerate_inputs() {
        let mut params = decomp_example();
        params.sigma = 0.0;
        assert!(rate_decomp(&params).is_err());
        let mut params = decomp_example();
        params.delta = 1.0;
        assert!(rate_decomp(&params).is_err());
        let mut params = decomp_example();
        params.r = 11;
        assert!(rate_decomp(&params).is_err());
        let mut params = decomp_example();
        params.s = 101;
        assert!(rate_decomp(&params).is_err());
    }

    #[test]
    fn tuning_pinned_lambda_values() {
        let consts = RateConstants::default();
        let t = default_tuning(
            &TuningCase::SingleQ2 { dim: DimCase::SparseL1 { s: 10, p: 100 } },
            1000,
            1.0,
            1.0,
            &consts,
        )
        .unwrap();
        assert_abs_diff_eq!(t.lambda, 0.13572280848830223, epsilon = 1e-15);
        assert!((t.lambda - 0.13577).abs() < 1e-4);
        assert_eq!(t.chi, 0.0);
        assert_relative_eq!(t.tau, 2.0 / 1000f64.sqrt(), max_relative = 1e-14);

        let t = default_tuning(
            &TuningCase::SingleQ2 { dim: DimCase::Trace { r: 2, d1: 10, d2: 10 } },
            1000,
            1.0,
            1.0,
            &consts,
        )
        .unwrap();
        assert_abs_diff_eq!(t.lambda, 0.282842712474619, epsilon = 1e-15);
    }

    #[test]
    fn tuning_decomp_formulas() {
        let consts = RateConstants::default();
        let n = 400usize;
        let a_star = 1.0;
        let t = default_tuning(
            &TuningCase::Decomp { d1: 10, d2: 10, p: 100, a_star },
            n,
            0.5,
            1.0,
            &consts,
        )
        .unwrap();
        let nf = n as f64;
        assert_relative_eq!(t.lambda, 2.0 * 0.5 * (20.0 / nf).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(
            t.chi,
            2.0 * (0.5 * (100f64.ln() / nf).sqrt() + a_star / nf.sqrt()),
            max_relative = 1e-14
        );
        assert_relative_eq!(t.tau, 2.0 * 0.5 / nf.sqrt(), max_relative = 1e-14);
        assert!(t.lambda > 0.0 && t.chi > 0.0 && t.tau > 0.0);
        assert_eq!(t.constants.sigma_guess, 0.5);
        assert_eq!(t.constants.l, 1.0);
    }

    #[test]
    fn q1_tuning_ignores_sigma_q2_is_linear_in_it() {
        let consts = RateConstants::default();
        for dim in [
            DimCase::SparseL1 { s: 10, p: 100 },
            DimCase::SparseSlope { s: 10, p: 100 },
            DimCase::Trace { r: 2, d1: 10, d2: 10 },
        ] {
            let lo = default_tuning(&TuningCase::SingleQ1 { dim }, 500, 0.5, 1.0, &consts).unwrap();
            let hi = default_tuning(&TuningCase::SingleQ1 { dim }, 500, 5.0, 1.0, &consts).unwrap();
            assert_eq!(lo.lambda, hi.lambda);
            assert_eq!(lo.tau, hi.tau);

            let one = default_tuning(&TuningCase::SingleQ2 { dim }, 500, 1.0, 1.0, &consts).unwrap();
            let three = default_tuning(&TuningCase::SingleQ2 { dim }, 500, 3.0, 1.0, &consts).unwrap();
            assert_relative_eq!(three.lambda, 3.0 * one.lambda, max_relative = 1e-14);
            assert_relative_eq!(three.tau, 3.0 * one.tau, max_relative = 1e-14);
        }
        let case = TuningCase::Decomp { d1: 10, d2: 10, p: 100, a_star: 1.0 };
        let one = default_tuning(&case, 500, 1.0, 1.0, &consts).unwrap();
        let three = default_tuning(&case, 500, 3.0, 1.0, &consts).unwrap();
        assert_relative_eq!(three.lambda, 3.0 * one.lambda, max_relative = 1e-14);
        assert_relative_eq!(three.tau, 3.0 * one.tau, max_relative = 1e-14);
        // chi is affine in sigma: the spike part a*/sqrt(n) does not scale.
        let spike = 2.0 / 500f64.sqrt();
        assert_relative_eq!(three.chi - spike, 3.0 * (one.chi - spike), max_relative = 1e-12);
    }

    #[test]
    fn tuning_q1_is_one_power_of_l_lower() {
        let consts = RateConstants::default();
        let dim = DimCase::SparseL1 { s: 5, p: 200 };
        let q1 = default_tuning(&TuningCase::SingleQ1 { dim }, 300, 1.0, 2.0, &consts).unwrap();
        let q2 = default_tuning(&TuningCase::SingleQ2 { dim }, 300, 1.0, 2.0, &consts).unwrap();
        assert_relative_eq!(q2.lambda, 2.0 * q1.lambda, max_relative = 1e-14);
        assert_relative_eq!(q2.tau, 2.0 * q1.tau, max_relative = 1e-14);
    }

    #[test]
    fn tuning_rejects_bad_inputs() {
        let consts = RateConstants::default();
        let dim = DimCase::SparseL1 { s: 5, p: 100 };
        let case = TuningCase::SingleQ2 { dim };
        assert!(default_tuning(&case, 0, 1.0, 1.0, &consts).is_err());
        assert!(default_tuning(&case, 100, 0.0, 1.0, &consts).is_err());
        assert!(default_tuning(&case, 100, 1.0, 0.5, &consts).is_err());
        let mut bad = consts;
        bad.c_lambda = -1.0;
        assert!(default_tuning(&case, 100, 1.0, 1.0, &bad).is_err());
        let decomp = TuningCase::Decomp { d1: 10, d2: 10, p: 100, a_star: -1.0 };
        assert!(default_tuning(&decomp, 100, 1.0, 1.0, &consts).is_err());
    }

    #[test]
    fn case_serialization_is_stable() {
        let dim = DimCase::SparseL1 { s: 15, p: 100 };
        let json = serde_json::to_string(&dim).unwrap();
        assert_eq!(json, r#"{"SPARSE_L1":{"s":15,"p":100}}"#);
        let back: DimCase = serde_json::from_str(&json).unwrap();
        assert_eq!(back, dim);
        let case = TuningCase::SingleQ1 { dim: DimCase::Trace { r: 1, d1: 4, d2: 6 } };
        let json = serde_json::to_string(&case).unwrap();
        assert_eq!(json, r#"{"SINGLE_Q1":{"dim":{"TRACE":{"r":1,"d1":4,"d2":6}}}}"#);
        let back: TuningCase = serde_json::from_str(&json).unwrap();
        assert_eq!(back, case);
    }
}
