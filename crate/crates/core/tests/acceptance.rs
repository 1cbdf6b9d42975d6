//! Acceptance suite. Each criterion prints one PASS/FAIL line; run with
//! `--test-threads=1` to read them in order.

use std::io::Write;
use std::process::Command;
use std::time::Instant;

use ametric_lab::contraction::{
    classify_az, corpus, estimate_delta, verify_contraction_inequalities, SelfMap,
};
use ametric_lab::convexity::{
    check_convexity, weighted_mean_structure, ConvexStructure, WeightVector,
};
use ametric_lab::iteration::{mann_run, mann_step, picard_run, IterationTrace, Schedule, StopRule};
use ametric_lab::metric::{check_axioms, example_space, AMetricSpace, Point};
use ametric_lab::numeric::tail_mean;
use ametric_lab::sampling::{GridSampler, Sampler, UniformBox};
use ametric_lab::stability::{
    berinde_limit_check, berinde_sequence, epsilon_sequence, forward_bound_check, perturbed_run,
    BerindeInput, Perturbation, Verdict,
};
use ametric_lab::Error;
use rand::Rng;

const TOL: f64 = 1e-9;
const LIMIT_TOL: f64 = 1e-6;
const WINDOW: usize = 20;

/// Writes to the process stdout directly, past the test harness capture.
#[cfg(unix)]
fn emit(line: &str) {
    use std::os::fd::AsFd;
    match std::io::stdout().as_fd().try_clone_to_owned() {
        Ok(fd) => {
            let _ = std::fs::File::from(fd).write_all(line.as_bytes());
        }
        Err(_) => print!("{line}"),
    }
}

#[cfg(not(unix))]
fn emit(line: &str) {
    print!("{line}");
}

fn verdict(id: u32, title: &str, passed: bool, detail: impl AsRef<str>) {
    emit(&format!(
        "[{}] criterion {id:>2} {title}: {}\n",
        if passed { "PASS" } else { "FAIL" },
        detail.as_ref()
    ));
    assert!(
        passed,
        "criterion {id} ({title}) failed: {}",
        detail.as_ref()
    );
}

/// Runs exactly `n` steps unless the iterate becomes stationary.
fn exact_steps(n: usize) -> StopRule {
    StopRule::new(n, f64::MIN_POSITIVE, 5).unwrap()
}

fn spaces() -> impl Iterator<Item = (usize, usize)> {
    (2..=5).flat_map(|t| (1..=3).map(move |d| (t, d)))
}

fn az_corpus(space: &AMetricSpace) -> Vec<SelfMap> {
    corpus(space.dim())
        .unwrap()
        .into_iter()
        .filter(|f| {
            let sampler = anchored(space.dim(), f, 11);
            classify_az(space, f, None, &sampler, 2_000, TOL)
                .unwrap()
                .is_az
        })
        .collect()
}

fn anchored(dim: usize, f: &SelfMap, seed: u64) -> UniformBox {
    let b = UniformBox::new(dim, -10.0, 10.0, seed).unwrap();
    match f.known_fixed_point() {
        Some(u) => b.with_anchor(u.clone()),
        None => b,
    }
}

#[test]
fn criterion_01_axiom_suite() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checked = 0;
    for (t, d) in spaces() {
        let space = example_space(t, d).unwrap();
        let sampler = UniformBox::new(d, -10.0, 10.0, 1000 + (10 * t + d) as u64).unwrap();
        let report = check_axioms(&space, &sampler, 10_000, TOL).unwrap();
        checked += report.samples_checked;
        if !report.passed {
            failures.push(format!(
                "t={t} d={d}: {} violations",
                report.violations.len()
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "axiom suite",
        failures.is_empty() && secs < 10.0,
        format!("12 spaces, {checked} instances, {secs:.2}s (limit 10s), failures {failures:?}"),
    );
}

#[test]
fn criterion_02_convexity_suite() {
    let mut failures = Vec::new();
    let mut checked = 0;
    for (t, d) in spaces() {
        let space = example_space(t, d).unwrap();
        let w = weighted_mean_structure(t, d).unwrap();
        let sampler = UniformBox::new(d, -10.0, 10.0, 2000 + (10 * t + d) as u64).unwrap();
        let report = check_convexity(&space, &w, &sampler, 10_000, TOL).unwrap();
        checked += report.samples_checked;
        if !report.passed {
            failures.push(format!(
                "t={t} d={d}: {} violations",
                report.violations.len()
            ));
        }
    }
    verdict(
        2,
        "convexity suite",
        failures.is_empty(),
        format!("{checked} instances incl. corners, failures {failures:?}"),
    );
}

#[test]
fn criterion_03_rate_bound() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for lambda in [0.25, 0.5, 0.9] {
        for t in [2, 3, 5] {
            for alpha in [0.1, 0.5, 1.0] {
                let space = example_space(t, 1).unwrap();
                let w = weighted_mean_structure(t, 1).unwrap();
                let f = SelfMap::linear(lambda, 1).unwrap();
                let schedule = Schedule::constant(t, alpha).unwrap();
                let trace = mann_run(
                    &space,
                    &w,
                    &f,
                    &Point::scalar(1.0),
                    &schedule,
                    &exact_steps(200),
                    Some(lambda),
                    None,
                )
                .unwrap();
                for s in &trace.steps {
                    let (dist, bound) = (s.dist_to_u.unwrap(), s.bound.unwrap());
                    if bound > 0.0 {
                        worst = worst.max(dist / bound);
                    }
                    if dist > bound * (1.0 + TOL) {
                        failures.push(format!("lambda={lambda} t={t} alpha={alpha} n={}", s.n));
                    }
                }
            }
        }
    }
    let space = example_space(3, 1).unwrap();
    let trace = mann_run(
        &space,
        &weighted_mean_structure(3, 1).unwrap(),
        &SelfMap::linear(0.5, 1).unwrap(),
        &Point::scalar(1.0),
        &Schedule::constant(3, 0.5).unwrap(),
        &exact_steps(200),
        Some(0.5),
        None,
    )
    .unwrap();
    let exact_err = trace
        .steps
        .iter()
        .map(|s| (s.dist_to_u.unwrap() - 2.0 * 0.75f64.powi(s.n as i32)).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        3,
        "rate bound",
        failures.is_empty() && exact_err < 1e-9 && trace.steps.len() == 201 && secs < 1.0,
        format!(
            "27 runs x 200 steps, max dist/bound {worst:.12}, max |dist - 2*0.75^n| {exact_err:.1e}, {secs:.3}s, failures {failures:?}"
        ),
    );
}

#[test]
fn criterion_04_delta_estimation() {
    let mut lines = Vec::new();
    let mut ok = true;
    for lambda in [0.25, 0.5, 0.9] {
        for t in [2, 3, 5] {
            let space = example_space(t, 1).unwrap();
            let f = SelfMap::linear(lambda, 1).unwrap();
            let grid = GridSampler::regular(1, -5.0, 5.0, 41, 4).unwrap();
            assert!(grid.points().contains(&Point::scalar(0.0)));
            let est = estimate_delta(&space, &f, &grid, 2_000).unwrap();
            let at = verify_contraction_inequalities(&space, &f, est.delta_hat, &grid, 2_000, TOL)
                .unwrap();
            let below = est.delta_hat - 0.1;
            let fails_below = if below > 0.0 {
                let check =
                    verify_contraction_inequalities(&space, &f, below, &grid, 2_000, TOL).unwrap();
                !check.passed && !check.violations.is_empty()
            } else {
                true
            };
            let this = (est.delta_hat - lambda).abs() < 1e-6 && at.passed && fails_below;
            ok &= this;
            lines.push(format!("l={lambda},t={t}:{:.9}", est.delta_hat));
        }
    }
    verdict(4, "delta estimation", ok, lines.join(" "));
}

#[test]
fn criterion_05_picard_uniqueness() {
    let mut ok = true;
    let mut lines = Vec::new();
    for (t, d) in [(3, 1), (2, 2)] {
        let space = example_space(t, d).unwrap();
        for f in az_corpus(&space) {
            let limits: Vec<Point> = (0..5u64)
                .map(|seed| {
                    let sampler = UniformBox::new(d, -10.0, 10.0, seed).unwrap();
                    let x0 = sampler.draw(&mut sampler.rng_for(0));
                    let trace =
                        picard_run(&space, &f, &x0, &StopRule::new(10_000, 1e-14, 5).unwrap())
                            .unwrap();
                    assert!(trace.converged, "{} from {x0:?}", f.label());
                    trace.limit.unwrap()
                })
                .collect();
            let spread = limits
                .iter()
                .flat_map(|a| {
                    limits
                        .iter()
                        .map(|b| space.repeated_distance(a, b).unwrap())
                })
                .fold(0.0, f64::max);
            ok &= spread < 1e-8;
            lines.push(format!("{}(t={t},d={d}):{spread:.1e}", f.label()));
        }
    }
    verdict(5, "picard uniqueness", ok, lines.join(" "));
}

#[test]
fn criterion_06_schedule_necessity() {
    let space = example_space(3, 1).unwrap();
    let w = weighted_mean_structure(3, 1).unwrap();
    let f = SelfMap::linear(0.5, 1).unwrap();
    let final_dist = |schedule: &Schedule| {
        let trace = mann_run(
            &space,
            &w,
            &f,
            &Point::scalar(1.0),
            schedule,
            &exact_steps(1_000),
            None,
            None,
        )
        .unwrap();
        trace.steps.last().unwrap().dist_to_u.unwrap()
    };
    let geometric = final_dist(&Schedule::geometric(3, 0.5).unwrap());
    let constant = final_dist(&Schedule::constant(3, 0.5).unwrap());
    let harmonic = final_dist(&Schedule::harmonic(3).unwrap());
    verdict(
        6,
        "schedule necessity",
        geometric > 0.1 && constant < 1e-8 && harmonic < 1e-8,
        format!("after 1000 steps: geometric {geometric:.6} (> 0.1), constant {constant:.1e}, harmonic {harmonic:.3e} (< 1e-8)"),
    );
}

fn halving_setup(t: usize, d: usize) -> (AMetricSpace, ConvexStructure, SelfMap, Schedule) {
    (
        example_space(t, d).unwrap(),
        weighted_mean_structure(t, d).unwrap(),
        SelfMap::linear(0.5, d).unwrap(),
        Schedule::constant(t, 0.5).unwrap(),
    )
}

#[test]
fn criterion_07_stability_forward() {
    let (space, w, f, schedule) = halving_setup(3, 1);
    let p = Perturbation::decaying_geometric(1, 0.5).unwrap();
    let report = perturbed_run(&space, &w, &f, &Point::scalar(1.0), &schedule, &p, 200).unwrap();
    let eps_tail = tail_mean(&report.eps_series(), WINDOW).unwrap();
    let dist_tail = tail_mean(&report.dist_series(), WINDOW).unwrap();
    verdict(
        7,
        "stability forward",
        eps_tail < LIMIT_TOL
            && dist_tail < LIMIT_TOL
            && report.verdict == Verdict::ConsistentStable,
        format!(
            "eps tail {eps_tail:.1e}, dist tail {dist_tail:.1e}, verdict {:?}",
            report.verdict
        ),
    );
}

#[test]
fn criterion_08_stability_converse() {
    let (space, w, f, schedule) = halving_setup(3, 1);
    let ys: Vec<Point> = (0..=200).map(|n| Point::scalar(0.5f64.powi(n))).collect();
    let eps = epsilon_sequence(&space, &w, &f, &schedule, &ys).unwrap();
    let tail = tail_mean(&eps, WINDOW).unwrap();
    verdict(
        8,
        "stability converse",
        tail < LIMIT_TOL,
        format!("y_n = 2^-n, eps tail {tail:.1e} over {} terms", eps.len()),
    );
}

#[test]
fn criterion_09_stability_contrapositive() {
    let mut ok = true;
    let mut lines = Vec::new();
    for t in [2usize, 3, 5] {
        for d in [1usize, 2] {
            let (space, w, f, schedule) = halving_setup(t, d);
            let p = Perturbation::constant(d, 1.0).unwrap();
            let report =
                perturbed_run(&space, &w, &f, &Point::splat(d, 1.0), &schedule, &p, 200).unwrap();
            let expected = (t - 1) as f64;
            let err = report
                .eps_series()
                .iter()
                .map(|e| (e - expected).abs())
                .fold(0.0, f64::max);
            let this = err <= TOL && !report.y_converges_to_u;
            ok &= this;
            lines.push(format!("t={t},d={d}:err {err:.1e}"));
        }
    }
    verdict(9, "stability contrapositive", ok, lines.join(" "));
}

#[test]
fn criterion_10_per_step_recursion() {
    let mut runs = 0;
    let mut failures = Vec::new();
    for (t, d) in [(3, 1), (2, 2), (4, 1)] {
        let space = example_space(t, d).unwrap();
        let w = weighted_mean_structure(t, d).unwrap();
        for f in az_corpus(&space) {
            let est = estimate_delta(&space, &f, &anchored(d, &f, 5), 5_000).unwrap();
            assert!(est.contraction, "{}", f.label());
            let perturbations = [
                Perturbation::none(d).unwrap(),
                Perturbation::decaying_geometric(d, 0.5).unwrap(),
                Perturbation::decaying_harmonic(d).unwrap(),
                Perturbation::constant(d, 1.0).unwrap(),
            ];
            for schedule in [
                Schedule::constant(t, 0.5).unwrap(),
                Schedule::constant(t, 1.0).unwrap(),
                Schedule::harmonic(t).unwrap(),
            ] {
                for p in &perturbations {
                    let report =
                        perturbed_run(&space, &w, &f, &Point::splat(d, 1.0), &schedule, p, 200)
                            .unwrap();
                    let check = forward_bound_check(&report, est.delta_hat, &schedule, t).unwrap();
                    runs += 1;
                    if !check.passed {
                        failures.push(format!(
                            "{} t={t} {:?} {:?}: {:?}",
                            f.label(),
                            schedule.kind(),
                            p.kind(),
                            check.witness
                        ));
                    }
                }
            }
        }
    }
    verdict(
        10,
        "per-step recursion",
        failures.is_empty(),
        format!("{runs} runs, failures {failures:?}"),
    );
}

#[test]
fn criterion_11_berinde_lemma() {
    let mut ok = true;
    let mut lines = Vec::new();
    for delta in [0.5, 0.9] {
        let cases: [(&str, BerindeInput); 2] = [
            (
                "2^-n",
                BerindeInput::new(delta, |n| 0.5f64.powi(n.min(2000) as i32), 1.0).unwrap(),
            ),
            (
                "1/(n+1)",
                BerindeInput::new(delta, |n| 1.0 / (n as f64 + 1.0), 1.0).unwrap(),
            ),
        ];
        for (name, input) in cases {
            let passed = berinde_limit_check(&input, 1_000_000).unwrap();
            let last = *berinde_sequence(&input, 1_000_000).unwrap().last().unwrap();
            ok &= passed;
            lines.push(format!(
                "delta={delta},eps={name}:{} (u_1e6 = {last:.3e})",
                if passed { "ok" } else { "fail" }
            ));
        }
    }
    verdict(
        11,
        "berinde lemma",
        ok,
        format!("horizon 1e6, tol 1e-6: {}", lines.join(" ")),
    );
}

fn same_trace(a: &IterationTrace, b: &IterationTrace) -> bool {
    a.steps.len() == b.steps.len()
        && a.steps.iter().zip(&b.steps).all(|(x, y)| {
            x.n == y.n
                && x.x
                    .coords()
                    .iter()
                    .zip(y.x.coords())
                    .all(|(p, q)| p.to_bits() == q.to_bits())
                && x.dist_to_u.map(f64::to_bits) == y.dist_to_u.map(f64::to_bits)
        })
}

#[test]
fn criterion_12_degenerations() {
    let mut rng = UniformBox::new(1, 0.0, 1.0, 0).unwrap().rng_for(0);
    let w2 = weighted_mean_structure(2, 1).unwrap();
    let maps = corpus(1).unwrap();
    let mut bitwise_steps = 0;
    let mut step_ok = true;
    for _ in 0..2_000 {
        let alpha: f64 = rng.random();
        let x = Point::scalar(rng.random_range(-10.0..10.0));
        for f in &maps {
            let got = mann_step(&w2, f, &x, &WeightVector::mann(2, alpha).unwrap()).unwrap();
            let classical = (1.0 - alpha) * x[0] + alpha * f.apply(&x)[0];
            step_ok &= got[0].to_bits() == classical.to_bits();
            bitwise_steps += 1;
        }
    }

    let mut trace_ok = true;
    let mut traces = 0;
    for (t, d) in [(2, 1), (3, 1), (3, 2), (5, 1)] {
        let space = example_space(t, d).unwrap();
        let w = weighted_mean_structure(t, d).unwrap();
        let one = Schedule::constant(t, 1.0).unwrap();
        for f in corpus(d).unwrap() {
            let x0 = Point::splat(d, 1.5);
            let stop = StopRule::new(500, 1e-12, 5).unwrap();
            let mann = mann_run(&space, &w, &f, &x0, &one, &stop, None, None);
            let picard = picard_run(&space, &f, &x0, &stop);
            traces += 1;
            trace_ok &= match (mann, picard) {
                (Ok(a), Ok(b)) => same_trace(&a, &b) && a.converged == b.converged,
                (
                    Err(Error::Diverged { step: s1, trace: a }),
                    Err(Error::Diverged { step: s2, trace: b }),
                ) => s1 == s2 && same_trace(&a, &b),
                _ => false,
            };
        }
    }
    verdict(
        12,
        "degenerations",
        step_ok && trace_ok,
        format!("{bitwise_steps} t=2 steps bitwise classical: {step_ok}; {traces} alpha=1 traces bitwise Picard: {trace_ok}"),
    );
}

#[test]
fn criterion_13_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        r#"[space]
kind = "example"
t = 3
d = 2

[map]
kind = "kannan"

[schedule]
kind = "constant"
params = { alpha = 0.5 }

[run]
mode = "stability"
x0 = [1.0, -2.0]
n_steps = 300
seed = 42

[perturbation]
kind = "harmonic"

[output]
format = "csv"
"#,
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_ametric-lab");
    let outputs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let out = dir.path().join(format!("trace{i}.csv"));
            let status = Command::new(bin)
                .args(["stability", "--config"])
                .arg(&config)
                .args(["--seed", "42", "--out"])
                .arg(&out)
                .status()
                .unwrap();
            assert_eq!(status.code(), Some(0));
            std::fs::read(&out).unwrap()
        })
        .collect();
    verdict(
        13,
        "cli determinism",
        outputs[0] == outputs[1] && !outputs[0].is_empty(),
        format!(
            "two invocations, {} bytes each, identical: {}",
            outputs[0].len(),
            outputs[0] == outputs[1]
        ),
    );
}
