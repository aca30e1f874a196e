//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_fit::experiments::{
    run_condition_study, run_convergence, run_interpolation_limit, run_kh_check, ConditionConfig,
    ConvergenceConfig, ZetaSource,
};
use torus_fit::kernel::{eval_g, eval_s_r, KernelSpec, TruncationPolicy};
use torus_fit::oracle::{direct_minimize_for, functional_value};
use torus_fit::persist::{load_model, save_model};
use torus_fit::sampling::{generate, star_discrepancy, PointSetKind};
use torus_fit::schedule::{instantiate, margin, margin_terms, suggest, ScheduleParams};
use torus_fit::solver::{assemble, condition_diagnostics, evaluate, evaluate_many, fit, eigen_diagnostics, ScatteredData};
use torus_fit::targets::{by_name, sample};
use torus_fit::torus::{FrequencyBound, TorusPoint};
use torus_fit::trig::TrigPolynomial;
use torus_fit::Error;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<TorusPoint> {
    (0..n)
        .map(|_| TorusPoint::wrap(&(0..m).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()).unwrap())
        .collect()
}

struct Instance {
    data: ScatteredData,
    spec: KernelSpec,
}

/// 20 one-dimensional and 5 two-dimensional random problems.
fn instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let lambdas = [1.0, 10.0, 100.0];
    let mut out = Vec::new();
    for i in 0..25 {
        let (m, omega, n_max, k) = if i < 20 {
            (1, FrequencyBound::new(vec![rng.gen_range(1..=16)]), 32, 1)
        } else {
            (2, FrequencyBound::new(vec![4, 4]), 20, 2)
        };
        let n = rng.gen_range(2..=n_max);
        let points = random_points(&mut rng, n, m);
        let values = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lambda = lambdas[rng.gen_range(0..3)];
        out.push(Instance {
            data: ScatteredData::new(points, values).unwrap(),
            spec: KernelSpec::truncated(omega, k, lambda).unwrap(),
        });
    }
    out
}

#[test]
fn c01_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for inst in instances() {
        let model = fit(&inst.data, &inst.spec).unwrap();
        let direct = direct_minimize_for(&inst.data, &inst.spec).unwrap();
        let queries = random_points(&mut rng, 100, inst.data.dim());
        let rep = evaluate_many(&model, &queries).unwrap();
        for (q, r) in queries.iter().zip(rep) {
            worst = worst.max((r - direct.coeffs.evaluate(q).unwrap()).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-8 && secs < 30.0;
    report(1, "oracle equivalence", pass, &format!("max diff {worst:.2e}, {secs:.2} s"));
    assert!(pass);
}

fn random_perturbation(rng: &mut ChaCha8Rng, omega: &FrequencyBound, scale: f64) -> TrigPolynomial {
    let draws: Vec<(f64, f64)> =
        (0..omega.box_size().unwrap()).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let next = std::cell::Cell::new(0usize);
    TrigPolynomial::from_complex(omega, |l| {
        let (re, im) = draws[next.replace(next.get() + 1)];
        (scale * re, if l.is_zero() { 0.0 } else { scale * im })
    })
    .unwrap()
}

#[test]
fn c02_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    let mut checks = 0;
    for inst in instances() {
        let (lambda, k) = (inst.spec.lambda(), inst.spec.k());
        let omega = inst.spec.omega().unwrap().clone();
        let u = fit(&inst.data, &inst.spec).unwrap().to_trig().unwrap();
        let d0 = functional_value(&u, Some(&inst.data), lambda, k).unwrap();
        for j in 0..100 {
            let scale = 10f64.powi(-(j % 7));
            let delta = random_perturbation(&mut rng, &omega, scale);
            let d1 = functional_value(&u.add_scaled(&delta, 1.0).unwrap(), Some(&inst.data), lambda, k).unwrap();
            checks += 1;
            if d1 < d0 - 1e-10 * d0.abs() {
                violations += 1;
            }
        }
    }
    let pass = violations == 0;
    report(2, "optimality", pass, &format!("{violations} violations in {checks} perturbations"));
    assert!(pass);
}

#[test]
fn c03_spd_and_condition_bound() {
    let mut failures = Vec::new();
    let mut check = |label: String, lambda: f64, factorized: bool, min_e: f64, kappa: f64, bound: f64| {
        if !factorized || min_e < 1.0 / (lambda * lambda) - 1e-12 || kappa > bound {
            failures.push(format!("{label}: factorized={factorized} min={min_e:e} κ={kappa:e} bound={bound:e}"));
        }
    };
    let mut matrices = 0;
    for (i, inst) in instances().iter().enumerate() {
        let lambda = inst.spec.lambda();
        let matrix = assemble(inst.data.points(), &inst.spec).unwrap();
        let factorized = fit(&inst.data, &inst.spec).is_ok();
        let d = condition_diagnostics(&matrix, lambda).unwrap();
        check(format!("instance {i}"), lambda, factorized, d.min_eigenvalue, d.kappa_measured, d.kappa_bound);
        matrices += 1;
    }
    let sweeps = [
        ConditionConfig {
            m: 1,
            k: 1,
            omega: None,
            truncation: TruncationPolicy::Radius(256),
            lambdas: vec![10.0],
            n_list: vec![16, 64, 256, 1024],
            sampler: PointSetKind::Halton,
        },
        ConditionConfig {
            m: 1,
            k: 1,
            omega: Some(FrequencyBound::new(vec![32])),
            truncation: TruncationPolicy::default(),
            lambdas: vec![1.0, 10.0, 100.0],
            n_list: vec![16, 64, 256, 1024],
            sampler: PointSetKind::Halton,
        },
        ConditionConfig {
            m: 2,
            k: 2,
            omega: Some(FrequencyBound::new(vec![6, 6])),
            truncation: TruncationPolicy::default(),
            lambdas: vec![10.0, 100.0],
            n_list: vec![64, 256],
            sampler: PointSetKind::Halton,
        },
    ];
    let mut slope = f64::NAN;
    for (s, cfg) in sweeps.iter().enumerate() {
        let rep = run_condition_study(cfg).unwrap();
        for r in &rep.rows {
            check(format!("sweep {s} λ={} n={}", r.lambda, r.n), r.lambda, r.factorized, r.min_eigenvalue, r.kappa_measured, r.kappa_bound);
            matrices += 1;
        }
        if s == 0 {
            slope = rep.slopes_in_n[0];
        }
    }
    let pass = failures.is_empty() && slope.abs() < 0.2;
    report(3, "SPD and condition bound", pass, &format!("{matrices} matrices, {} failures, κ slope in n {slope:.4}", failures.len()));
    assert!(failures.is_empty(), "{failures:?}");
    assert!(slope.abs() < 0.2);
}

#[test]
fn c04_eigenvalue_asymptotics() {
    let points = generate(&PointSetKind::Halton, 8, 1).unwrap();
    let n = points.len() as f64;
    let lambdas = [1e2, 1e3, 1e4, 1e5];
    let rows = eigen_diagnostics(&points, 1, &lambdas, TruncationPolicy::Radius(1 << 20)).unwrap();
    let top: Vec<f64> = rows.iter().map(|r| (r.eigenvalues[0] - n).abs() * r.lambda).collect();
    let mut ok = top.windows(2).all(|w| (0.5..=2.0).contains(&(w[1] / w[0])));
    for l in 1..points.len() {
        let scaled: Vec<f64> = rows.iter().map(|r| r.lambda * r.eigenvalues[l]).collect();
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        ok &= lo > 0.0 && hi / lo <= 2.0;
    }
    report(4, "eigenvalue asymptotics", ok, &format!("|ρ₁-n|·λ = {top:.4?}"));
    assert!(ok);
}

#[test]
fn c05_interpolation_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points = random_points(&mut rng, 16, 1);
    let values = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let data = ScatteredData::new(points, values).unwrap();
    let spec = KernelSpec::truncated(FrequencyBound::new(vec![32]), 1, 16.0).unwrap();
    let lambdas: Vec<f64> = (4..=14).map(|e| 2f64.powi(e)).collect();
    let rep = run_interpolation_limit(&data, &spec, &lambdas).unwrap();
    let monotone = rep.rows.windows(2).all(|w| w[1].max_residual <= 1.05 * w[0].max_residual);
    let last = rep.rows.last().unwrap().max_residual;
    let pass = monotone && rep.floor_doubled < last;
    report(
        5,
        "interpolation limit",
        pass,
        &format!("residual {:.3e} -> {last:.3e}, floor with ω doubled {:.3e}", rep.rows[0].max_residual, rep.floor_doubled),
    );
    assert!(pass);
}

#[test]
fn c06_kernel_asymptotics() {
    // matching radii make the truncated tails of g and s₁ cancel to O(1/(λ² R³))
    let trunc = TruncationPolicy::Radius(4096);
    let grid: Vec<TorusPoint> = (0..256).map(|i| TorusPoint::wrap(&[i as f64 / 256.0]).unwrap()).collect();
    let mut cs = Vec::new();
    for lambda in [10.0, 100.0, 1000.0] {
        let spec = KernelSpec::full(1, 1, lambda).unwrap().with_truncation(trunc).unwrap();
        let sup = grid
            .iter()
            .map(|x| (eval_g(x, &spec).unwrap() - (1.0 + eval_s_r(x, 1, &spec, trunc).unwrap() / lambda)).abs())
            .fold(0.0, f64::max);
        cs.push(sup * lambda * lambda);
    }
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let stable = hi / lo <= 2.0;
    let spec = KernelSpec::full(1, 1, 1.0).unwrap().with_truncation(TruncationPolicy::Radius(4_000_000)).unwrap();
    let g0 = eval_g(&TorusPoint::zero(1), &spec).unwrap();
    let pi = std::f64::consts::PI;
    let exact = pi / pi.tanh();
    let pass = stable && (g0 - exact).abs() <= 1e-6 && (g0 - 3.153348).abs() < 1e-6;
    report(6, "kernel asymptotics", pass, &format!("C = {cs:.4?}, g(0) = {g0:.9}"));
    assert!(pass);
}

#[test]
fn c07_bv_convergence() {
    let start = Instant::now();
    let n_list = vec![64, 256, 1024, 4096];
    let run = |name: &str| {
        let target = by_name(name).unwrap();
        let mut cfg = ConvergenceConfig::new(&target, suggest(1).unwrap(), n_list.clone(), PointSetKind::Halton);
        cfg.zeta_source = ZetaSource::Measured;
        run_convergence(&target, &cfg).unwrap()
    };
    let square = run("square-wave");
    let errs: Vec<f64> = square.rows.iter().map(|r| r.l2_error).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let ratio = errs[3] / errs[0];
    let smooth = run("smooth");
    let smooth_err = smooth.rows.last().unwrap().l2_error;
    let secs = start.elapsed().as_secs_f64();
    let pass = decreasing && ratio < 0.5 && smooth_err <= 1e-3 && secs < 300.0;
    report(
        7,
        "BV convergence",
        pass,
        &format!("square-wave l2 {errs:.4?} (ratio {ratio:.3}), smooth l2 {smooth_err:.2e}, {secs:.1} s"),
    );
    assert!(decreasing, "square-wave errors not strictly decreasing: {errs:?}");
    assert!(smooth_err <= 1e-3, "smooth target error {smooth_err}");
    assert!(secs < 300.0);
    assert!(ratio < 0.5, "square-wave error ratio {ratio} between n = 4096 and n = 64");
}

#[test]
fn c08_koksma_hlawka() {
    let target = by_name("sawtooth").unwrap();
    let mut violations = Vec::new();
    for n in [64, 256, 1024] {
        let centered: Vec<TorusPoint> =
            (0..n).map(|i| TorusPoint::wrap(&[(i as f64 + 0.5) / n as f64]).unwrap()).collect();
        let halton = generate(&PointSetKind::Halton, n, 1).unwrap();
        for (label, pts) in [("centered", centered), ("halton", halton)] {
            let r = run_kh_check(&target, &pts).unwrap();
            if !r.holds {
                violations.push(format!("{label} n={n}: {} > {}", r.qmc_error, r.bound));
            }
        }
    }
    let single = star_discrepancy(&[TorusPoint::wrap(&[0.5]).unwrap()]).unwrap();
    let pass = violations.is_empty() && single.upper == 0.5 && single.lower == 0.5;
    report(8, "Koksma-Hlawka", pass, &format!("{} violations, D*({{0.5}}) = {}", violations.len(), single.upper));
    assert!(pass, "{violations:?}");
}

#[test]
fn c09_feasibility_margin() {
    let r = margin(0.2, 0.5, 1).unwrap();
    let exact = r == 0.3;
    // each triple sits on the boundary: the smallest term is exactly zero
    let boundary = [(0.5, 0.5, 1), (1.0, 1.0, 1), (0.25, 1.5, 1), (0.5, 1.5, 1), (0.25, 0.75, 2), (0.2, 1.4, 1)];
    let mut refused = 0;
    for &(a, b, k) in &boundary {
        let terms = margin_terms(a, b, k);
        assert_eq!(terms.iter().copied().fold(f64::INFINITY, f64::min), 0.0, "({a}, {b}, {k}): {terms:?}");
        let p = ScheduleParams::new(a, b, k, vec![1.0]).unwrap();
        if matches!(instantiate(&p, 0.1, false), Err(Error::InfeasibleSchedule { .. })) && instantiate(&p, 0.1, true).is_ok() {
            refused += 1;
        }
    }
    let pass = exact && refused == boundary.len();
    report(9, "feasibility margin", pass, &format!("margin(0.2, 0.5, 1) = {r}, {refused}/{} boundary cases refused", boundary.len()));
    assert!(pass);
}

fn run_cli(args: &[&str]) -> i32 {
    let mut full = vec!["torus-fit"];
    full.extend_from_slice(args);
    torus_fit::cli::run_from_args(full, &mut std::io::sink())
}

#[test]
fn c10_round_trip_persistence() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches = 0;
    let specs = [
        KernelSpec::truncated(FrequencyBound::new(vec![12]), 1, 25.0).unwrap(),
        KernelSpec::full(1, 1, 5.0).unwrap().with_truncation(TruncationPolicy::Radius(2048)).unwrap(),
        KernelSpec::truncated(FrequencyBound::new(vec![5, 3]), 2, 40.0).unwrap(),
    ];
    for (i, spec) in specs.iter().enumerate() {
        let m = spec.dim();
        let points = random_points(&mut rng, 30, m);
        let target = by_name(if m == 1 { "square-wave" } else { "box-2d" }).unwrap();
        let data = sample(&target, &points).unwrap();
        let model = fit(&data, spec).unwrap();
        let path = dir.path().join(format!("model{i}.json"));
        save_model(&model, "acceptance", &path).unwrap();
        let back = load_model(&path).unwrap();
        for q in random_points(&mut rng, 1000, m) {
            if evaluate(&model, &q).unwrap().to_bits() != evaluate(&back, &q).unwrap().to_bits() {
                mismatches += 1;
            }
        }
    }
    let mut reports = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("conv{run}.csv"));
        let code = run_cli(&["convergence", "--target", "square-wave", "--n-list", "32,64,128", "--zeta", "measured", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        reports.push(std::fs::read(&out).unwrap());
    }
    let identical = reports[0] == reports[1];
    let pass = mismatches == 0 && identical;
    report(10, "round-trip persistence", pass, &format!("{mismatches} mismatches in 3000 queries, reports identical: {identical}"));
    assert!(pass);
}
