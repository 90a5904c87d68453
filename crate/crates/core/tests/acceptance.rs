//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_2_PI, PI};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use subexp_lasso::complexity::*;
use subexp_lasso::distributions::*;
use subexp_lasso::geometry::*;
use subexp_lasso::harness::config::ExperimentConfig;
use subexp_lasso::harness::experiment::{excess_certificate, run_error_curve, ExperimentResult};
use subexp_lasso::models::*;
use subexp_lasso::seed;
use subexp_lasso::solver::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn random_unit(rng: &mut seed::Rng, p: usize) -> Vec<f64> {
    unit((0..p).map(|_| rng.sample(StandardNormal)).collect())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn median_at(res: &ExperimentResult, n: usize) -> f64 {
    res.aggregates.iter().find(|a| a.n == n).map(|a| a.median).unwrap()
}

const LINEAR_BASE: &str = r#"
n_grid = [200, 400, 800, 1600, 3200]
trials_per_n = 30
master_seed = 2024

[spec]
kind = "laplace"
dim = 100

[model]
kind = "linear"
beta0 = { rule = "sparse", k = 5 }
noise = { kind = "laplace", scale = 0.35355339059327373 }

[target]
rule = "beta0"
"#;

fn tuned_config() -> ExperimentConfig {
    let text = format!("name = \"tuned\"\n{LINEAR_BASE}\n[set]\nrule = \"tuned_l1\"\n");
    ExperimentConfig::from_toml_str(&text).unwrap()
}

fn global_config() -> ExperimentConfig {
    let radius = 5f64.sqrt();
    let text = format!(
        "name = \"global\"\n{LINEAR_BASE}\n[set]\nrule = \"fixed\"\nset = {{ kind = \"l1_ball\", radius = {radius}, dim = 100 }}\n"
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}

fn c1_exact_recovery() -> Outcome {
    let mut cfg = tuned_config();
    cfg.name = "exact".into();
    cfg.model.noise = Noise::None;
    cfg.n_grid = vec![400];
    cfg.trials_per_n = 20;
    let start = Instant::now();
    let res = run_error_curve(&cfg).unwrap();
    let elapsed = start.elapsed();
    let worst = res.records.iter().map(|r| r.error).fold(0.0, f64::max);
    outcome(
        worst < 1e-5 && elapsed < Duration::from_secs(60),
        format!("max error {worst:.2e} over 20 trials, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn c2_c3_decay() -> (Outcome, Outcome) {
    let start = Instant::now();
    let tuned = run_error_curve(&tuned_config()).unwrap();
    let t_tuned = start.elapsed();
    let start = Instant::now();
    let global = run_error_curve(&global_config()).unwrap();
    let t_global = start.elapsed();
    let ft = tuned.decay.unwrap();
    let fg = global.decay.unwrap();
    let c2 = outcome(
        (-0.65..=-0.35).contains(&ft.slope) && t_tuned < Duration::from_secs(600),
        format!("tuned slope {:.4} ± {:.4}, {:.1}s", ft.slope, ft.std_error, t_tuned.as_secs_f64()),
    );
    let (tl, th) = ft.interval();
    let (gl, gh) = fg.interval();
    let separated = th < gl || gh < tl;
    let shallower = separated || ft.slope < fg.slope;
    let c3 = outcome(
        (-0.55..=-0.15).contains(&fg.slope) && shallower && t_global < Duration::from_secs(600),
        format!(
            "global slope {:.4} ± {:.4} vs tuned {:.4} ± {:.4} (intervals {}), {:.1}s",
            fg.slope,
            fg.std_error,
            ft.slope,
            ft.std_error,
            if separated { "disjoint" } else { "overlap" },
            t_global.as_secs_f64()
        ),
    );
    (c2, c3)
}

fn c4_mismatch() -> Outcome {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
name = "tanh"
n_grid = [400, 3200]
trials_per_n = 20
master_seed = 11

[spec]
kind = "gaussian"
dim = 50

[model]
kind = "single_index"
link = "tanh"
beta0 = { rule = "sparse", k = 5 }

[set]
rule = "tuned_l1"

[target]
rule = "mu_beta0"
mc_budget = 10000000
"#,
    )
    .unwrap();
    let res = run_error_curve(&cfg).unwrap();
    let (m400, m3200) = (median_at(&res, 400), median_at(&res, 3200));
    let r = cfg.resolve().unwrap();
    let q = MismatchQuery { beta_nat: &r.beta_nat, set: None, t: None, mc_budget: 200_000, n_dirs: 0, seed: 5 };
    let report = mismatch_report(&r.model, &r.spec, &q).unwrap();
    outcome(
        m3200 < 0.5 * m400 && report.rho_global < report.allowance(),
        format!(
            "median error {m400:.4} -> {m3200:.4}; rho_global {:.2e} < {:.2e}",
            report.rho_global,
            report.allowance()
        ),
    )
}

fn c5_lifted() -> Outcome {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
name = "phase_retrieval"
n_grid = [600]
trials_per_n = 10
master_seed = 5

[spec]
kind = "gaussian"
dim = 10

[model]
kind = "quadratic"
lifted = true
beta0 = { rule = "sparse", k = 10 }

[set]
rule = "tuned_lifted"

[target]
rule = "beta0"
"#,
    )
    .unwrap();
    let start = Instant::now();
    let res = run_error_curve(&cfg).unwrap();
    let elapsed = start.elapsed();
    let good = res.records.iter().filter(|r| r.error < 0.1).count();
    let errors: Vec<String> = res.records.iter().map(|r| format!("{:.3}", r.error)).collect();
    outcome(
        good >= 8 && elapsed < Duration::from_secs(300),
        format!("{good}/10 below 0.1 [{}], {:.1}s", errors.join(" "), elapsed.as_secs_f64()),
    )
}

fn c6_lifted_target() -> Outcome {
    let sq = lifted_target_scale(Link::Square, 10_000_000, 61).unwrap();
    let id = lifted_target_scale(Link::Identity, 10_000_000, 62).unwrap();
    outcome(
        (sq.value - 1.0).abs() <= 0.01 && id.value.abs() <= 0.01,
        format!("square {:.5} (se {:.1e}), identity {:.5}", sq.value, sq.std_error, id.value),
    )
}

fn c7_widths() -> Outcome {
    let ball = HypothesisSet::l2_ball(1.0, vec![0.0]);
    let w = gaussian_width(&ball, 100_000, 71).unwrap();
    let target = (2.0 / PI).sqrt();
    let ok_ball = (w.mean - target).abs() <= 3.0 * w.std_error;

    let spec = DistributionSpec::isotropic(DistributionKind::Gaussian, 12);
    let mut ok_skel = true;
    let mut worst_z: f64 = 0.0;
    for i in 0..5 {
        let skel = sparse_skeleton_sampler(3, 12, 40, 700 + i).unwrap();
        let g = gaussian_width(&skel, 20_000, 710 + i).unwrap();
        let e = empirical_width(&skel, &spec, 30, 20_000, 720 + i).unwrap();
        let z = (g.mean - e.mean).abs() / (g.std_error.powi(2) + e.std_error.powi(2)).sqrt();
        worst_z = worst_z.max(z);
        ok_skel &= z <= 3.0;
    }

    let mut rng = seed::rng(73);
    let poly = HypothesisSet::polytope((0..8).map(|_| random_unit(&mut rng, 4)).collect());
    let sets = [
        HypothesisSet::l1_ball(1.0, 10),
        HypothesisSet::l2_ball(1.0, vec![0.0; 10]),
        HypothesisSet::hypercube(1.0, 6),
        poly,
        HypothesisSet::l1_ball(2.0, 200),
    ];
    let mut worst_ratio: f64 = 0.0;
    for (i, set) in sets.iter().enumerate() {
        let p = set.ambient_dim() as f64;
        let g = gaussian_width(set, 5_000, 80 + i as u64).unwrap();
        let e = exponential_width(set, 5_000, 90 + i as u64).unwrap();
        worst_ratio = worst_ratio.max(e.mean / (p.ln().sqrt() * g.mean));
    }
    let ok_exp = worst_ratio <= EXP_WIDTH_FACTOR;
    outcome(
        ok_ball && ok_skel && ok_exp,
        format!(
            "w(B1)={:.4}±{:.4} vs {target:.4}; empirical-vs-gaussian max z {worst_z:.2}; max exp/(sqrt(log p)·gauss) {worst_ratio:.3}",
            w.mean, w.std_error
        ),
    )
}

fn c8_paley_zygmund() -> Outcome {
    let p = 10;
    let spec = DistributionSpec::isotropic(DistributionKind::Gaussian, p);
    let mut rng = seed::rng(81);
    let dirs: Vec<Vec<f64>> = (0..200).map(|_| random_unit(&mut rng, p)).collect();
    let sb = small_ball_report(&spec, &dirs, ThetaRule::PaleyZygmund, 100_000, 82).unwrap();
    let tau = sb.tau.unwrap_or(0.0);
    let lhs = tau * sb.q_hat;
    let target = FRAC_2_PI.sqrt();
    let rel = (sb.alpha_hat - target).abs() / target;
    outcome(
        lhs >= sb.pz_bound - sb.mc_allowance && rel <= 0.02,
        format!("tau*q = {lhs:.4} vs pz {:.4} - {:.1e}; alpha {:.4} ({:.2}% off)", sb.pz_bound, sb.mc_allowance, sb.alpha_hat, 100.0 * rel),
    )
}

fn c9_tails() -> Outcome {
    let p = 5;
    let mut rng = seed::rng(91);
    let matrix: Vec<Vec<f64>> = (0..p).map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal) / (p as f64).sqrt()).collect()).collect();
    let specs = [
        ("gaussian", DistributionSpec::isotropic(DistributionKind::Gaussian, p)),
        ("rademacher", DistributionSpec::isotropic(DistributionKind::Rademacher, p)),
        ("laplace", DistributionSpec::isotropic(DistributionKind::Laplace, p)),
        ("mixed", DistributionSpec::mixed(matrix, DistributionKind::Laplace, DistributionKind::Laplace.unit_variance_scale())),
    ];
    let thresholds: Vec<f64> = (1..=16).map(|i| 0.5 * i as f64).collect();
    let mut total = 0;
    let mut parts = Vec::new();
    for (i, (name, spec)) in specs.iter().enumerate() {
        let profile = profile_for(spec);
        let mut violations = 0;
        for d in 0..20 {
            let v = random_unit(&mut rng, p);
            let rep = verify_bernstein_tail(spec, &profile, &v, &thresholds, 100_000, (i * 100 + d) as u64).unwrap();
            violations += rep.violations;
        }
        total += violations;
        parts.push(format!("{name}:{violations}"));
    }
    outcome(total == 0, format!("violations {}", parts.join(" ")))
}

/// Exhaustive ℓ1-ball projection: best feasible point over all faces of the
/// cross-polytope.
fn l1_oracle(v: &[f64], r: f64) -> Vec<f64> {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= r {
        return v.to_vec();
    }
    let p = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    // each coordinate: 0 = off, 1 = +, 2 = −
    for code in 1..3usize.pow(p as u32) {
        let mut signs = vec![0.0; p];
        let mut c = code;
        for s in signs.iter_mut() {
            *s = match c % 3 {
                0 => 0.0,
                1 => 1.0,
                _ => -1.0,
            };
            c /= 3;
        }
        let size = signs.iter().filter(|s| **s != 0.0).count() as f64;
        let lambda = (signs.iter().zip(v).map(|(s, x)| s * x).sum::<f64>() - r) / size;
        let x: Vec<f64> = signs.iter().zip(v).map(|(s, vi)| if *s == 0.0 { 0.0 } else { vi - lambda * s }).collect();
        if signs.iter().zip(&x).any(|(s, xi)| s * xi < -1e-12) {
            continue;
        }
        let d = dist(&x, v);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.unwrap().1
}

fn c10_oracles() -> Outcome {
    let mut rng = seed::rng(101);
    let mut proj_err: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.random_range(1..=6);
        let v: Vec<f64> = (0..p).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let r = rng.random_range(0.1..3.0);
        let l1 = HypothesisSet::l1_ball(r, p).project(&v).unwrap();
        proj_err = proj_err.max(dist(&l1, &l1_oracle(&v, r)));

        let center: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let diff: Vec<f64> = v.iter().zip(&center).map(|(a, c)| a - c).collect();
        let len = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        let ball_oracle: Vec<f64> = center.iter().zip(&diff).map(|(c, d)| c + d * r / len.max(r)).collect();
        let ball = HypothesisSet::l2_ball(r, center).project(&v).unwrap();
        proj_err = proj_err.max(dist(&ball, &ball_oracle));

        let cube_oracle: Vec<f64> = v.iter().map(|x| x.clamp(-r, r)).collect();
        let cube = HypothesisSet::hypercube(r, p).project(&v).unwrap();
        proj_err = proj_err.max(dist(&cube, &cube_oracle));
    }

    let mut ols_err: f64 = 0.0;
    for i in 0..50 {
        let (n, p) = (rng.random_range(8..40), rng.random_range(1..=6));
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let oracle = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * &y));
        let data = Dataset::new(x, y).unwrap();
        let set = HypothesisSet::l2_ball(1e3, vec![0.0; p]);
        let res = solve_lasso(&data, &set, &SolverConfig { seed: i, ..SolverConfig::default() }).unwrap();
        ols_err = ols_err.max(dist(&res.estimate, oracle.as_slice()));
    }

    let mut ident_err: f64 = 0.0;
    for _ in 0..1000 {
        let (n, p) = (rng.random_range(2..30), rng.random_range(1..8));
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = Dataset::new(x, y).unwrap();
        let b: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let bn: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let (q, m) = excess_decomposition(&data, &b, &bn).unwrap();
        let e = empirical_risk(&data, &b).unwrap() - empirical_risk(&data, &bn).unwrap();
        ident_err = ident_err.max((q + m - e).abs());
    }
    outcome(
        proj_err <= 1e-8 && ols_err <= 1e-6 && ident_err <= 1e-10,
        format!("projection {proj_err:.1e}, normal equations {ols_err:.1e}, Q+M=E {ident_err:.1e}"),
    )
}

fn c11_certificates() -> Outcome {
    let p = 2;
    let set = HypothesisSet::l1_ball(1.0, p);
    let spec = DistributionSpec::isotropic(DistributionKind::Laplace, p);
    let (mut positive, mut incoherent, mut empty) = (0, 0, 0);
    for inst in 0..100u64 {
        let mut rng = seed::child_rng(1100, "instance", inst);
        let beta0: Vec<f64> = random_unit(&mut rng, p).iter().map(|b| 0.5 * b / 2f64.sqrt()).collect();
        let model = ObservationModel::linear(beta0.clone(), Noise::Gaussian { std: 0.5 });
        let data = generate_dataset(&model, &spec, 20, 1200 + inst).unwrap();
        for t in [0.05, 0.1, 0.2, 0.4] {
            let rep = excess_certificate(&data, &set, &beta0, t, 2000, 1300 + inst, &SolverConfig::default()).unwrap();
            if rep.empty_slice {
                empty += 1;
            }
            assert_eq!(rep.positive, rep.min_excess.is_some_and(|m| m > 0.0));
            if rep.positive {
                positive += 1;
                if rep.coherent != Some(true) {
                    incoherent += 1;
                }
            }
        }
    }
    outcome(
        incoherent == 0 && positive > 0,
        format!("{positive} positive certificates of 400, {incoherent} incoherent, {empty} empty slices"),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c12_formulas() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut check = |got: f64, want: f64| worst = worst.max(rel(got, want));
    let b = |regime| sparse_cone_bound(4, 256, 10_000, regime).unwrap().value;
    check(b(SparseRegime::ZeroTwoQ), 4.246);
    check(b(SparseRegime::ZeroTwoQ), 4.245023284009623);
    check(b(SparseRegime::TwoZero), 4.078667960675236);
    check(b(SparseRegime::TwoInf), 9.60452907082355);
    check(b(SparseRegime::ZeroTwoM), 16.635532333438686);
    check(dudley_sparse_bound(4, 256, 1).unwrap(), 88.27329192835067);
    check(dudley_sparse_bound(4, 256, 2).unwrap(), 16.239431545514428);
    check(dudley_sparse_bound(1, 10, 1).unwrap(), 16.499429010990802);
    check(dudley_sparse_bound(1, 10, 2).unwrap(), 7.009971648280862);
    check(dudley_sparse_bound(10, 1000, 2).unwrap(), 26.450115179706764);

    let simplex = HypothesisSet::polytope(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    let profile = ConcentrationProfile::new(SemiNorm::EuclideanScaled { c: 1.0 }, SemiNorm::InfinityScaled { c: 1.0 }).unwrap();
    let pc = polytope_complexity(&simplex, &profile, 100).unwrap();
    check(pc.q_bound, 2.640312110202527);
    check(pc.m_bound, 2.5809160960356214);

    let skel = Skeleton::new(vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 0.0]], "three points").unwrap();
    let metric = SemiNorm::EuclideanScaled { c: 1.0 };
    check(finite_gamma_bound(&skel, 2, &metric).unwrap(), 5.240735369841025);
    check(finite_gamma_bound(&skel, 1, &metric).unwrap(), 5.493061443340549);

    let mut ratios = Vec::new();
    for k in [1usize, 2, 4, 8, 16] {
        for p in [64usize, 256, 1024, 4096] {
            let kf = k as f64;
            ratios.push(dudley_sparse_bound(k, p, 2).unwrap() / (kf * (p as f64 / kf).ln()).sqrt());
        }
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    outcome(
        worst <= 1e-3 && hi <= 6.0 && lo > 0.0,
        format!("max relative deviation {worst:.1e}; dudley/sqrt(k log(p/k)) in [{lo:.3}, {hi:.3}]"),
    )
}

fn report(id: usize, name: &str, start: Instant, o: Outcome, failures: &mut usize) {
    if !o.pass {
        *failures += 1;
    }
    println!(
        "criterion {id:>2} {:<4} {name}: {} ({:.1}s total)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful for this target.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    let run = |id: usize, name: &str, f: fn() -> Outcome, failures: &mut usize| {
        let s = Instant::now();
        report(id, name, s, f(), failures);
    };
    run(1, "exact recovery", c1_exact_recovery, &mut failures);
    let s = Instant::now();
    let (c2, c3) = c2_c3_decay();
    report(2, "tuned decay rate", s, c2, &mut failures);
    report(3, "global decay rate", s, c3, &mut failures);
    run(4, "mismatch consistency", c4_mismatch, &mut failures);
    run(5, "lifted phase retrieval", c5_lifted, &mut failures);
    run(6, "lifted even-link target", c6_lifted_target, &mut failures);
    run(7, "width sanity", c7_widths, &mut failures);
    run(8, "Paley-Zygmund", c8_paley_zygmund, &mut failures);
    run(9, "tail soundness", c9_tails, &mut failures);
    run(10, "oracle equivalence", c10_oracles, &mut failures);
    run(11, "certificate coherence", c11_certificates, &mut failures);
    run(12, "formula bounds", c12_formulas, &mut failures);
    println!("acceptance: {} of 12 criteria passed", 12 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
