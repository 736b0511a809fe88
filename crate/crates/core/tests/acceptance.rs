//! Acceptance gate: one test per release criterion, each printing a
//! `criterion N (...): PASS` line (visible with `--nocapture`; failures
//! always show their measurements). Heavy desk-scale experiment runs are
//! shared across criteria through a leaked registry, so the suite runs each
//! preset exactly once. All tolerances are pinned here, not configurable.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use ndarray::{Array1, ArrayView1, ArrayView2};
use sorted_huber::cli::{self, CurveRow, ExperimentConfig, ExperimentSummary, Variant};
use sorted_huber::datagen::{self, GroundTruthSpec, TruthKind};
use sorted_huber::norms::{self, NormTag, WeightSequence};
use sorted_huber::oracle::{self, OracleMethod};
use sorted_huber::prox;
use sorted_huber::rng::GaussianStream;
use sorted_huber::solvers::{self, Problem, SolveMode, SolverOptions};

const ALL_PRESETS: [char; 11] = ['a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k'];

fn tmp_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

/// Desk-scale run of a preset with harness defaults, computed once per
/// process and shared by every criterion that reads it.
fn desk(preset: char) -> &'static ExperimentSummary {
    static RUNS: OnceLock<Mutex<HashMap<char, &'static ExperimentSummary>>> = OnceLock::new();
    let map = RUNS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap();
    if let Some(s) = guard.get(&preset) {
        return s;
    }
    let mut cfg = ExperimentConfig::for_preset(preset);
    cfg.overrides.desk = true;
    cfg.out_dir = tmp_dir(&format!("desk_{preset}"));
    let summary = cli::cmd_experiment(&cfg)
        .unwrap_or_else(|e| panic!("desk preset {preset} run failed: {e}"));
    let leaked: &'static ExperimentSummary = Box::leak(Box::new(summary));
    guard.insert(preset, leaked);
    leaked
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    sxy / (sxx * syy).sqrt()
}

fn r_squared_linear(xs: &[f64], ys: &[f64]) -> f64 {
    let rho = pearson(xs, ys);
    rho * rho
}

fn curve<'a>(summary: &'a ExperimentSummary, variant: Variant) -> Vec<&'a CurveRow> {
    let mut rows: Vec<&CurveRow> =
        summary.curves.iter().filter(|c| c.variant == variant).collect();
    rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    rows
}

fn random_vector(len: usize, key: &[u64], scale: f64) -> Vec<f64> {
    let mut stream = GaussianStream::from_key(0xFA57_C0DE, key);
    let mut v = vec![0.0; len];
    stream.fill_standard_normal(&mut v);
    for x in &mut v {
        *x *= scale;
    }
    v
}

#[test]
fn criterion_1_prox_matches_bruteforce_oracles() {
    let start = Instant::now();
    let mut max_dev = 0.0f64;
    for dim in 2..=6usize {
        let w = norms::slope_weights(dim, 10.0).unwrap();
        for i in 0..1000u64 {
            let v = random_vector(dim, &[1, dim as u64, i], 3.0);
            let fast = prox::prox_sorted_l1(&v, &w).unwrap();
            let exact =
                oracle::brute_prox_slope(&v, &w, OracleMethod::ExhaustivePattern).unwrap();
            let dev = fast
                .iter()
                .zip(&exact.minimizer)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            max_dev = max_dev.max(dev);
            assert!(dev <= 1e-8, "dim {dim} instance {i}: position deviation {dev:.3e}");
        }
    }
    let mut max_gap = 0.0f64;
    for &dim in &[10usize, 50] {
        let w = norms::slope_weights(dim, 10.0).unwrap();
        for i in 0..200u64 {
            let v = random_vector(dim, &[2, dim as u64, i], 3.0);
            let fast = prox::prox_sorted_l1(&v, &w).unwrap();
            let quad: f64 = fast.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
            let fast_value = 0.5 * quad + norms::slope_norm(&fast, &w).unwrap();
            let sub =
                oracle::brute_prox_slope(&v, &w, OracleMethod::ProjectedSubgradient).unwrap();
            let gap = (fast_value - sub.value).abs();
            max_gap = max_gap.max(gap);
            assert!(
                fast_value <= sub.value + 1e-9,
                "dim {dim} instance {i}: fast value {fast_value} above oracle {}",
                sub.value
            );
            assert!(
                gap <= sub.certified_gap + 1e-9,
                "dim {dim} instance {i}: gap {gap:.3e} exceeds certificate {:.3e}",
                sub.certified_gap
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "oracle comparison took {elapsed:.1}s, budget 60s");
    println!(
        "criterion 1 (prox oracle agreement): PASS, max position dev {max_dev:.2e}, \
         max value gap {max_gap:.2e}, {elapsed:.1}s"
    );
}

fn huber_phi_reference(t: f64) -> f64 {
    if t.abs() <= 1.0 { t * t / 2.0 } else { t.abs() - 0.5 }
}

#[test]
fn criterion_2_constant_weights_reduce_to_huber() {
    let taus = [0.3, 1.0, 2.5];
    let mut max_rel = 0.0f64;
    let mut check = |u: &[f64], tau: f64, tag: &str| {
        let w = WeightSequence::constant(u.len(), 1.0).unwrap();
        let got = prox::sorted_huber_q2(u, &w, tau).unwrap().value;
        let want: f64 = u.iter().map(|&x| tau * tau * huber_phi_reference(x / tau)).sum();
        let rel = (got - want).abs() / want.abs().max(1e-30);
        max_rel = max_rel.max(rel);
        assert!(rel <= 1e-10, "{tag}: relative error {rel:.3e} (got {got}, want {want})");
    };
    for i in 0..10_000u64 {
        let u = random_vector(1, &[3, i], 2.0);
        check(&u, taus[(i % 3) as usize], "scalar");
    }
    for i in 0..1000u64 {
        let u = random_vector(40, &[4, i], 2.0);
        check(&u, taus[(i % 3) as usize], "vector");
    }
    println!("criterion 2 (constant-weight Huber reduction): PASS, max rel err {max_rel:.2e}");
}

/// Independent coordinate-descent solver for
/// `min_b ||y - X b||^2 / (2n) + lambda ||b||_1`, written against no code
/// from the library under test.
fn cd_lasso(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, lambda: f64, passes: usize) -> Array1<f64> {
    let (n, p) = x.dim();
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).iter().map(|v| v * v).sum::<f64>() / nf).collect();
    let mut b = Array1::<f64>::zeros(p);
    let mut resid = y.to_owned();
    for _ in 0..passes {
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let rho = x.column(j).iter().zip(resid.iter()).map(|(a, r)| a * r).sum::<f64>() / nf
                + col_sq[j] * b[j];
            let new = (rho.abs() - lambda).max(0.0) * rho.signum() / col_sq[j];
            let delta = new - b[j];
            if delta != 0.0 {
                for (r, xij) in resid.iter_mut().zip(x.column(j).iter()) {
                    *r -= delta * xij;
                }
                b[j] = new;
            }
        }
    }
    b
}

fn lasso_objective(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, lambda: f64, b: &Array1<f64>) -> f64 {
    let n = y.len() as f64;
    let fitted = x.dot(b);
    let quad: f64 = y.iter().zip(fitted.iter()).map(|(yi, fi)| (yi - fi) * (yi - fi)).sum();
    quad / (2.0 * n) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

#[test]
fn criterion_3_solver_soundness() {
    // Every desk-scale preset: monotone objective traces, tight stationarity.
    for &p in &ALL_PRESETS {
        let s = desk(p);
        for row in &s.rows {
            assert!(
                row.converged && row.kkt <= 1e-6,
                "preset {p} cell eps={} r={} s={} rep={} variant={}: kkt {:.3e}, converged {}",
                row.epsilon,
                row.r,
                row.s,
                row.rep,
                row.variant.label(),
                row.kkt,
                row.converged
            );
            assert!(
                row.trace_monotone,
                "preset {p} cell eps={} rep={} variant={}: objective trace rose above 1e-10 slack",
                row.epsilon,
                row.rep,
                row.variant.label()
            );
        }
    }

    // Huge threshold turns the loss quadratic; the fit must agree with an
    // independent lasso solve on the same data.
    let spec = GroundTruthSpec {
        kind: TruthKind::SparseVector,
        s: 5,
        r: 0,
        entry_value: 1.0,
        spikeness_a: 0.0,
        outlier_value: 0.0,
        sigma: 0.5,
    };
    let data = datagen::make_dataset(&spec, 30, 1, 120, 0.0, 314).unwrap();
    let (x, y) = (data.design.clone(), data.y.clone());
    let lambda = 0.05;
    let omega = norms::slope_weights(120, 10.0).unwrap();
    let problem = Problem::new(
        data,
        SolveMode::SingleQ2,
        NormTag::L1,
        lambda,
        0.0,
        1e9,
        f64::INFINITY,
        omega,
    )
    .unwrap();
    let (est, report) = solvers::fit(&problem, &SolverOptions::default(), None).unwrap();
    assert!(report.converged);
    assert!(est.theta_hat.iter().all(|&t| t == 0.0), "theta must stay zero when tau is huge");
    let ours: Array1<f64> = Array1::from_iter(est.b_hat.iter().copied());
    let independent = cd_lasso(x.view(), y.view(), lambda, 20_000);
    let f_ours = lasso_objective(x.view(), y.view(), lambda, &ours);
    let f_ind = lasso_objective(x.view(), y.view(), lambda, &independent);
    let lasso_gap = (f_ours - f_ind).abs();
    assert!(
        lasso_gap <= 1e-6,
        "objective gap vs independent lasso: {lasso_gap:.3e} (ours {f_ours}, cd {f_ind})"
    );

    // Effectively noiseless tall problem with a vanishing penalty recovers
    // the dense least-squares solution.
    let spec = GroundTruthSpec {
        kind: TruthKind::SparseVector,
        s: 8,
        r: 0,
        entry_value: 3.0,
        spikeness_a: 0.0,
        outlier_value: 0.0,
        sigma: 1e-8,
    };
    let data = datagen::make_dataset(&spec, 25, 1, 300, 0.0, 2718).unwrap();
    let (x, y) = (data.design.clone(), data.y.clone());
    let omega = norms::slope_weights(300, 10.0).unwrap();
    let problem = Problem::new(
        data,
        SolveMode::SingleQ2,
        NormTag::L1,
        1e-9,
        0.0,
        0.0,
        f64::INFINITY,
        omega,
    )
    .unwrap();
    let options = SolverOptions { max_sweeps: 50_000, tol_kkt: 1e-9, ..SolverOptions::default() };
    let (est, report) = solvers::fit(&problem, &options, None).unwrap();
    assert!(report.converged);
    let ls = oracle::dense_least_squares(x.view(), y.view()).unwrap();
    let num: f64 = est
        .b_hat
        .iter()
        .zip(ls.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = ls.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ls_rel = num / den;
    assert!(ls_rel <= 1e-4, "noiseless recovery error {ls_rel:.3e} vs dense least squares");

    println!(
        "criterion 3 (solver soundness): PASS, all desk presets converged with monotone \
         traces; lasso gap {lasso_gap:.2e}; noiseless recovery {ls_rel:.2e}"
    );
}

#[test]
fn criterion_4_sorted_beats_huber_under_contamination() {
    let s = desk('b');
    assert!(
        s.wall_time_s <= 900.0,
        "desk contamination run took {:.0}s, budget 900s",
        s.wall_time_s
    );
    let sorted = curve(s, Variant::SortedHuber);
    let huber = curve(s, Variant::Huber);
    assert_eq!(sorted.len(), huber.len());
    let s0 = sorted[0].mean_rmse;
    let h0 = huber[0].mean_rmse;
    assert_eq!(sorted[0].epsilon, 0.0);
    for (sc, hc) in sorted.iter().zip(&huber) {
        assert_eq!(sc.epsilon, hc.epsilon);
        if sc.epsilon >= 0.10 {
            assert!(
                sc.mean_rmse <= hc.mean_rmse,
                "eps {}: sorted {:.4} above huber {:.4}",
                sc.epsilon,
                sc.mean_rmse,
                hc.mean_rmse
            );
        }
        assert!(
            sc.mean_rmse <= 5.0 * s0,
            "eps {}: sorted {:.4} above 5x clean value {:.4}",
            sc.epsilon,
            sc.mean_rmse,
            s0
        );
        assert!(
            hc.mean_rmse <= 5.0 * h0,
            "eps {}: huber {:.4} above 5x clean value {:.4}",
            hc.epsilon,
            hc.mean_rmse,
            h0
        );
    }
    let worst: f64 = sorted
        .iter()
        .zip(&huber)
        .map(|(sc, hc)| sc.mean_rmse / hc.mean_rmse)
        .fold(0.0, f64::max);
    println!(
        "criterion 4 (sorted vs plain Huber trend): PASS, worst sorted/huber ratio {worst:.3}, \
         run {:.0}s",
        s.wall_time_s
    );
}

#[test]
fn criterion_5_error_growth_approximately_linear() {
    let s = desk('b');
    let sorted = curve(s, Variant::SortedHuber);
    let eps: Vec<f64> = sorted.iter().map(|c| c.epsilon).collect();
    let rmse: Vec<f64> = sorted.iter().map(|c| c.mean_rmse).collect();
    let r2 = r_squared_linear(&eps, &rmse);
    assert!(r2 >= 0.85, "R^2 of mean rmse vs eps is {r2:.4}, need >= 0.85");
    println!("criterion 5 (approximately linear error growth): PASS, R^2 = {r2:.4}");
}

#[test]
fn criterion_6_robustness_gap_vs_nonrobust() {
    let s = desk('c');
    let at = |variant: Variant, eps: f64| -> f64 {
        s.curves
            .iter()
            .find(|c| c.variant == variant && (c.epsilon - eps).abs() < 1e-9)
            .unwrap_or_else(|| panic!("missing curve point {variant:?} at eps {eps}"))
            .mean_rmse
    };
    let ratio = at(Variant::NonRobust, 0.2) / at(Variant::SortedHuber, 0.2);
    assert!(ratio >= 3.0, "non-robust / sorted rmse ratio at eps 0.2 is {ratio:.2}, need >= 3");
    println!("criterion 6 (robustness gap): PASS, ratio {ratio:.1} at eps 0.2");
}

#[test]
fn criterion_7_structure_scaling_correlations() {
    let g = desk('g');
    let h = desk('h');
    // Rank effect at each fixed sparsity level of the rank-sweep study.
    let mut r_corrs = Vec::new();
    let mut s_levels: Vec<usize> = g.curves.iter().map(|c| c.s).collect();
    s_levels.sort_unstable();
    s_levels.dedup();
    for &s_fix in &s_levels {
        let mut pts: Vec<(usize, f64)> = g
            .curves
            .iter()
            .filter(|c| c.s == s_fix)
            .map(|c| (c.r, c.mean_mse))
            .collect();
        pts.sort_unstable_by_key(|p| p.0);
        let xs: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        r_corrs.push((s_fix, pearson(&xs, &ys)));
    }
    // Sparsity effect in the sparsity-sweep study (rank held fixed).
    let mut pts: Vec<(usize, f64)> = h.curves.iter().map(|c| (c.s, c.mean_mse)).collect();
    pts.sort_unstable_by_key(|p| p.0);
    let xs: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let s_corr = pearson(&xs, &ys);
    let r_ok = r_corrs.iter().all(|&(_, c)| c >= 0.9);
    let s_ok = s_corr >= 0.9;
    let verdict = if r_ok && s_ok { "PASS" } else { "FAIL" };
    println!(
        "criterion 7 (structure scaling): {verdict}, rank correlations {:?} (need each >= 0.9), \
         sparsity correlation {s_corr:.4} (need >= 0.9)",
        r_corrs
            .iter()
            .map(|&(s_fix, c)| format!("s={s_fix}: {c:.4}"))
            .collect::<Vec<_>>()
    );
    assert!(
        s_ok,
        "sparsity correlation {s_corr:.4} below 0.9"
    );
    // The rank half does not hold for this data-generating process: the
    // low-rank part is rescaled so its largest entry is exactly a*/sqrt(n),
    // and since a rank-r product of orthonormal factors has squared
    // Frobenius norm r while its peak entry also grows like sqrt(r), the
    // low-rank signal energy is essentially rank-independent. The pair MSE
    // therefore carries no rank trend for any tuning, which this assertion
    // documents rather than hides.
    assert!(
        r_ok,
        "rank correlations {:?} below 0.9 at fixed sparsity",
        r_corrs
    );
}

#[test]
fn criterion_8_sigma_adaptivity() {
    let run = |name: &str, estimator: cli::EstimatorChoice, sigma: f64, tuning_sigma: Option<f64>| {
        let mut cfg = ExperimentConfig::for_preset('b');
        cfg.overrides.desk = true;
        cfg.overrides.sigma = Some(sigma);
        cfg.overrides.eps_grid = Some(vec![0.0]);
        cfg.estimator = estimator;
        cfg.variants = Some(vec![Variant::SortedHuber]);
        cfg.tuning_sigma = tuning_sigma;
        cfg.out_dir = tmp_dir(name);
        let s = cli::cmd_experiment(&cfg).unwrap();
        assert!(s.all_converged, "{name}: not all cells converged");
        let rmse: Vec<f64> = s.rows.iter().filter_map(|r| r.rmse_total).collect();
        mean(&rmse)
    };
    // Same sigma-free tuning at both noise levels: error scales with sigma.
    let q1_lo = run("c8_q1_lo", cli::EstimatorChoice::SingleQ1, 0.5, None);
    let q1_hi = run("c8_q1_hi", cli::EstimatorChoice::SingleQ1, 5.0, None);
    let q1_ratio = q1_hi / q1_lo;
    assert!(
        (5.0..=20.0).contains(&q1_ratio),
        "sqrt-loss rmse ratio across sigma 0.5 -> 5 is {q1_ratio:.3}, need within [5, 20]"
    );
    // The quadratic loss needs the right sigma in its tuning.
    let q2_matched = run("c8_q2_matched", cli::EstimatorChoice::SingleQ2, 0.5, Some(0.5));
    let q2_mis = run("c8_q2_mis", cli::EstimatorChoice::SingleQ2, 0.5, Some(5.0));
    let q2_ratio = q2_mis / q2_matched;
    assert!(
        q2_ratio >= 1.5,
        "mis-specified tuning degraded rmse only {q2_ratio:.3}x, need >= 1.5x"
    );
    println!(
        "criterion 8 (sigma adaptivity): PASS, sigma-free ratio {q1_ratio:.2} in [5, 20], \
         mis-specification cost {q2_ratio:.2}x"
    );
}

#[test]
fn criterion_9_reruns_are_byte_identical() {
    let first = desk('b');
    let mut cfg = ExperimentConfig::for_preset('b');
    cfg.overrides.desk = true;
    cfg.out_dir = tmp_dir("desk_b_again");
    let second = cli::cmd_experiment(&cfg).unwrap();
    let bytes_a = std::fs::read(first.out_dir.join("results.csv")).unwrap();
    let bytes_b = std::fs::read(second.out_dir.join("results.csv")).unwrap();
    assert_eq!(
        bytes_a, bytes_b,
        "results.csv differs between two runs with the same master seed"
    );
    println!(
        "criterion 9 (determinism): PASS, results.csv byte-identical across reruns ({} bytes)",
        bytes_a.len()
    );
}
