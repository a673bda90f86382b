//! Acceptance criteria 1-9, one PASS/FAIL line each. Runs with its own
//! harness so the summary is always printed.

use std::process::ExitCode;
use std::time::Instant;

use fracmild::heat::{build_heat_example, compute_kernel_constants, HeatExampleParams};
use fracmild::noise::{ito_integral, sample_path_indexed};
use fracmild::phase_space::ExpTerm;
use fracmild::problem::{CoefficientSet, Impulse, ImpulseMap};
use fracmild::solver::Solver;
use fracmild::stability::{loglog_slope, mean_and_standard_error, write_sweep_csv, StabilityExperiment};
use fracmild::{
    a_priori_bound, bihari_bound, check_existence_condition, check_apriori_condition, check_stability_condition,
    epsilon_time, ml_scalar, BihariInput, BihariResult, GridSpec, HypothesisConstants, Kappa, MLOrder,
    Perturbation, PhaseSpaceSpec, PicardConfig, Prehistory, ProblemSpec, QWienerSpec, SpectralOperator,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn ml(q: f64, b: f64, z: f64) -> f64 {
    ml_scalar(MLOrder::new(q, b).unwrap(), z).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst_exp = 0.0f64;
    for k in 0..100 {
        let z = -30.0 + 60.0 * k as f64 / 99.0;
        worst_exp = worst_exp.max((ml(1.0, 1.0, z) - z.exp()).abs() / z.exp());
    }
    let mut worst_cos = 0.0f64;
    for k in 0..=200 {
        let x = 20.0 * k as f64 / 200.0;
        worst_cos = worst_cos.max((ml(2.0, 1.0, -x * x) - x.cos()).abs());
    }
    let mut worst_grid = 0.0f64;
    for line in include_str!("fixtures/mittag_reference.csv").lines().skip(1) {
        let c: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let allowed = (1e-9 * c[3].abs()).max(1e-12);
        worst_grid = worst_grid.max((ml(c[0], c[1], c[2]) - c[3]).abs() / allowed);
    }
    ensure(
        worst_exp <= 1e-10 && worst_cos <= 1e-10 && worst_grid <= 1.0,
        format!("exp rel {worst_exp:.2e}, cos abs {worst_cos:.2e}, oracle grid error/tolerance {worst_grid:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let (phi0, x1) = (0.8, -0.3);
    let spec = ProblemSpec::linear(
        SpectralOperator::diagonal(vec![-1.0]).unwrap(),
        0.5,
        1.0,
        PhaseSpaceSpec::exponential(1.0).unwrap(),
        QWienerSpec::new(vec![1.0], 1).unwrap(),
        Prehistory::constant(&DVector::from_element(1, phi0)),
        DVector::from_element(1, x1),
    )
    .unwrap();
    let solver = Solver::new(&spec, &GridSpec::new(1.0, 200)).unwrap();
    let (traj, diag) = solver
        .picard_solve(&solver.noise_path(0).unwrap(), &PicardConfig::default())
        .unwrap();
    let mut err = 0.0f64;
    for (t, v) in traj.times().iter().zip(traj.values()) {
        let z = -t.powf(1.5);
        let exact = ml(1.5, 1.0, z) * phi0 + t * ml(1.5, 2.0, z) * x1;
        err = err.max((v[0] - exact).abs());
    }
    ensure(
        err <= 1e-7 && diag.converged && diag.iterations <= 2,
        format!("sup-node error {err:.2e}, {} iterations", diag.iterations),
    )
}

fn criterion_3() -> Outcome {
    let eigs = [-1.0, -2.0, -3.0];
    let lambdas = vec![0.5, 0.3, 0.2];
    let spec = QWienerSpec::new(lambdas.clone(), 77).unwrap();
    let steps = 100;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let q = 1.5;
    let tq = |lam: f64, r: f64| r.powf(q - 1.0) * ml(q, q, lam * r.powf(q));
    let table: Vec<DMatrix<f64>> = times
        .iter()
        .map(|s| DMatrix::from_diagonal(&DVector::from_iterator(3, eigs.iter().map(|&l| tq(l, 1.0 - s)))))
        .collect();
    let kernel = |_: f64, s: f64| table[(s * steps as f64).round() as usize].clone();
    let paths = 10_000u64;
    let samples: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let w = sample_path_indexed(&spec, &times, k).unwrap();
            ito_integral(&kernel, |_| DMatrix::identity(3, 3), &w, 1.0).unwrap().norm_squared()
        })
        .collect();
    let (mean, se) = mean_and_standard_error(&samples);
    let dt = 1.0 / steps as f64;
    let isometry: f64 = times[..steps]
        .iter()
        .map(|s| eigs.iter().zip(&lambdas).map(|(&l, &lam)| lam * tq(l, 1.0 - s).powi(2)).sum::<f64>() * dt)
        .sum();
    let gap = (mean - isometry).abs();
    ensure(
        gap <= 3.0 * se && gap <= 0.05 * isometry,
        format!("MC {mean:.5} vs isometry sum {isometry:.5} (SE {se:.1e})"),
    )
}

fn heat_solver() -> (ProblemSpec, Solver) {
    let spec = build_heat_example(&HeatExampleParams::default()).unwrap();
    let solver = Solver::new(&spec, &GridSpec::new(1.0, 200)).unwrap();
    (spec, solver)
}

fn criterion_4() -> Outcome {
    let (spec, solver) = heat_solver();
    let consts = spec.resolve_constants(400).unwrap();
    let cond = check_existence_condition(&spec, &consts).value();
    let config = PicardConfig {
        tolerance: 1e-8,
        max_iterations: 25,
    };
    let runs = solver.solve_paths(0, 100, &config).unwrap();
    let all_converged = runs.iter().all(|(_, d)| d.converged && d.iterations <= 25);
    let shortest = runs.iter().map(|(_, d)| d.diffs.len()).min().unwrap();
    let means: Vec<f64> = (0..shortest)
        .map(|k| runs.iter().map(|(_, d)| d.diffs[k]).sum::<f64>() / runs.len() as f64)
        .collect();
    let decreasing = means.windows(2).skip(1).all(|w| w[1] < w[0]);
    let worst = runs.iter().map(|(_, d)| d.iterations).max().unwrap();
    ensure(
        cond < 0.5 && all_converged && decreasing && shortest >= 3,
        format!("condition {cond:.3}, max iterations {worst}, mean diffs [{}]", sci(&means)),
    )
}

fn criterion_5() -> Outcome {
    let (spec, solver) = heat_solver();
    let runs = solver.solve_paths(0, 1000, &PicardConfig::default()).unwrap();
    let sups: Vec<f64> = runs.iter().map(|(t, _)| t.sup_norm_sq()).collect();
    let (mean, se) = mean_and_standard_error(&sups);
    let consts = spec.resolve_constants(400).unwrap();
    let norm_phi = spec.norm_phi().unwrap();
    let bound = a_priori_bound(&spec, &consts, norm_phi * norm_phi, spec.coefficients.kappa.affine_bound())
        .unwrap()
        .bound;
    ensure(
        mean <= bound + 3.0 * se,
        format!("E sup|x|^2 = {mean:.4} (SE {se:.1e}) vs bound {bound:.3e}"),
    )
}

fn heat_direction(spec: &ProblemSpec) -> Perturbation {
    let n = spec.dimension();
    let mut amp = vec![0.0; n];
    amp[0] = 1.0;
    amp[1] = -0.5;
    Perturbation {
        dphi: Prehistory::new(vec![ExpTerm {
            rate: 1.0,
            amplitude: amp,
        }])
        .unwrap(),
        dx1: DVector::from_fn(n, |i, _| if i == 0 { 0.5 } else { 0.0 }),
    }
}

fn criterion_6() -> Outcome {
    let spec = build_heat_example(&HeatExampleParams::default()).unwrap();
    let exp = StabilityExperiment::new(&spec, &GridSpec::new(1.0, 200), 500, 11, &PicardConfig::default()).unwrap();
    let deltas = [1e-4, 1e-3, 1e-2, 1e-1];
    let reports = exp.sweep(&heat_direction(&spec), &deltas).unwrap();
    let est: Vec<f64> = reports.iter().map(|r| r.estimate).collect();
    let zero = exp.run(&Perturbation::zero(spec.dimension())).unwrap().estimate;
    let monotone = est.windows(2).all(|w| w[1] >= w[0]);
    let slope = loglog_slope(&deltas, &est);
    ensure(
        monotone && slope >= 0.9 && zero == 0.0,
        format!("estimates [{}], slope {slope:.4}, delta=0 gives {zero}", sci(&est)),
    )
}

fn criterion_7() -> Outcome {
    let times: Vec<f64> = (0..=300).map(|k| k as f64 / 100.0).collect();
    let mut gronwall = 0.0f64;
    for (u0, c) in [(0.3, 0.7), (1.0, 1.0), (2.5, 0.2)] {
        let input = BihariInput {
            u0,
            times: times.clone(),
            v: vec![c; times.len()],
            kappa: Kappa::Linear { l: 1.0 },
        };
        for t in [0.0, 0.5, 1.7, 3.0] {
            let want = u0 * (c * t).exp();
            gronwall = gronwall.max((bihari_bound(&input, t).unwrap().value() - want).abs() / want);
        }
    }
    let sqrt_input = BihariInput {
        u0: 1.0,
        times: times.clone(),
        v: vec![1.0; times.len()],
        kappa: Kappa::Sqrt { l: 1.0 },
    };
    let mut sqrt_err = 0.0f64;
    for t in [0.0, 0.25, 1.0, 2.2, 3.0] {
        let got = match bihari_bound(&sqrt_input, t).unwrap() {
            BihariResult::Finite(v) => v,
            BihariResult::Unbounded => f64::INFINITY,
        };
        sqrt_err = sqrt_err.max((got - (1.0 + t / 2.0).powi(2)).abs());
    }
    let h = 1e-3;
    let fine: Vec<f64> = (0..=3000).map(|k| k as f64 * h).collect();
    let t1 = epsilon_time(&Kappa::Linear { l: 1.0 }, 0.1, 0.01, &fine, &vec![1.0; fine.len()])
        .unwrap()
        .unwrap_or(f64::NAN);
    let target = 3.0 - 10f64.ln();
    ensure(
        gronwall <= 1e-12 && sqrt_err <= 1e-10 && (t1 - target).abs() <= h && t1 >= target,
        format!("Gronwall rel {gronwall:.1e}, sqrt abs {sqrt_err:.1e}, t1 = {t1} (budget point {target:.4})"),
    )
}

fn toy(m: usize, p: &[f64], q: &[f64], k1: Option<f64>) -> ProblemSpec {
    let mut spec = ProblemSpec::linear(
        SpectralOperator::diagonal(vec![-1.0]).unwrap(),
        0.5,
        1.0,
        PhaseSpaceSpec::exponential(1.0).unwrap(),
        QWienerSpec::new(vec![1.0], 0).unwrap(),
        Prehistory::zero(1),
        DVector::zeros(1),
    )
    .unwrap();
    spec.coefficients = CoefficientSet { k1, ..CoefficientSet::zero() };
    spec.impulses = (0..m)
        .map(|i| Impulse {
            time: (i + 1) as f64 / (m + 1) as f64,
            jump_i: ImpulseMap::Zero,
            jump_j: ImpulseMap::Zero,
            p: p[i],
            q: q[i],
        })
        .collect();
    spec
}

fn criterion_8() -> Outcome {
    let one = HypothesisConstants::user(1.0, 1.0, 1.0, 1.0).unwrap();
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64, sat: bool, want_sat: bool| {
        if (got - want).abs() > 1e-15 || sat != want_sat {
            failures.push(format!("{name}: {got} ({sat})"));
        }
    };
    let s = toy(1, &[0.01], &[0.001], Some(0.0));
    let r = check_existence_condition(&s, &one);
    check("existence a", r.value_a, 0.084, r.satisfied, true);
    check("existence b", r.value_b, 0.077, r.satisfied, true);
    let r = check_apriori_condition(&s, &one);
    check("a-priori", r.value(), 0.084, r.satisfied, true);
    let r = check_existence_condition(&toy(1, &[0.2], &[0.0], None), &one);
    check("violated", r.value_a, 1.4, r.satisfied, false);
    let r = check_existence_condition(&toy(1, &[1.0 / 7.0], &[0.0], None), &one);
    check("boundary", r.value(), 1.0, r.satisfied, false);
    let r = check_stability_condition(&toy(1, &[0.01], &[0.01], Some(0.0)), &one).unwrap();
    check("stability", r.value(), 0.42, r.satisfied, true);
    let r = check_stability_condition(&toy(2, &[0.02, 0.02], &[0.0, 0.0], Some(0.0)), &one).unwrap();
    check("stability violated", r.value(), 1.68, r.satisfied, false);
    let h4 = check_stability_condition(&toy(1, &[0.01], &[0.0], None), &one).is_err();

    let heat = build_heat_example(&HeatExampleParams::default()).unwrap();
    let hc = HypothesisConstants::user(1.0, 1.0, 0.5, 1.0).unwrap();
    let r = check_existence_condition(&heat, &hc);
    check("heat a", r.value_a, 0.21, r.satisfied, true);
    check("heat b", r.value_b, 0.28, r.satisfied, true);
    let r = check_stability_condition(&heat, &hc).unwrap();
    check("heat stability", r.value(), 0.84, r.satisfied, true);
    let mut params = HeatExampleParams::default();
    params.impulses[0].p_scale = 1.0;
    let kc = compute_kernel_constants(&params).unwrap();
    check("kernel l", kc.l, 0.5, true, true);
    check("kernel p", kc.p[0], 0.5, true, true);
    ensure(
        failures.is_empty() && h4,
        if failures.is_empty() {
            "0.084/0.077, 1.4, boundary 1.0 rejected, 0.42, 1.68, heat 0.21/0.28/0.84, l = p = 1/2".into()
        } else {
            failures.join("; ")
        },
    )
}

fn heat_outputs() -> Vec<u8> {
    let (_, solver) = heat_solver();
    let mut out = Vec::new();
    for (traj, _) in solver.solve_paths(0, 16, &PicardConfig::default()).unwrap() {
        traj.write_csv(&mut out).unwrap();
    }
    let spec = solver.spec().clone();
    let exp = StabilityExperiment::new(&spec, &GridSpec::new(1.0, 100), 24, 5, &PicardConfig::default()).unwrap();
    let reports = exp.sweep(&heat_direction(&spec), &[1e-3, 1e-1]).unwrap();
    write_sweep_csv(&reports, &mut out).unwrap();
    out
}

fn criterion_9() -> Outcome {
    let pool = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let a = pool(1).install(heat_outputs);
    let b = pool(4).install(heat_outputs);
    let c = pool(4).install(heat_outputs);
    ensure(
        a == b && b == c,
        format!("{} bytes of trajectory and sweep CSV, identical across 1 and 4 worker threads", a.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Mittag-Leffler identities and oracle grid", criterion_1),
        ("closed-form linear solve", criterion_2),
        ("Ito isometry", criterion_3),
        ("Picard contraction on the heat example", criterion_4),
        ("a-priori bound", criterion_5),
        ("mean-square stability sweep", criterion_6),
        ("Bihari suite", criterion_7),
        ("condition arithmetic", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {} PASS {name}: {msg} [{secs:.1}s]", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {msg} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
