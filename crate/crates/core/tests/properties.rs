use ametric_lab::contraction::{
    classify_az, corpus, estimate_delta, verify_contraction_inequalities, SelfMap,
};
use ametric_lab::convexity::{
    check_convexity, weighted_mean_structure, ConvexStructure, WeightVector,
};
use ametric_lab::iteration::{mann_run, picard_run, theoretical_bound, Schedule, StopRule};
use ametric_lab::metric::{example_space, lift_metric, AMetricSpace, BaseMetric, Point};
use ametric_lab::numeric::{approx_eq, approx_le};
use ametric_lab::sampling::UniformBox;
use ametric_lab::stability::{perturbed_run, Perturbation, Verdict};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn base(kind: u8, d: usize) -> BaseMetric {
    match kind {
        0 => BaseMetric::l1(d),
        1 => BaseMetric::l2(d),
        _ => BaseMetric::discrete(d),
    }
    .unwrap()
}

fn point(d: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(-50.0f64..50.0, d).prop_map(|v| Point::new(v).unwrap())
}

/// `(t, d, metric kind)` together with `n` points of dimension `d`.
fn lifted_with_points(n: usize) -> impl Strategy<Value = (usize, usize, u8, Vec<Point>)> {
    (2usize..=6, 1usize..=3, 0u8..3).prop_flat_map(move |(t, d, k)| {
        (
            Just(t),
            Just(d),
            Just(k),
            prop::collection::vec(point(d), n.max(t)),
        )
    })
}

fn repeated(space: &AMetricSpace, x: &Point, y: &Point) -> f64 {
    space.repeated_distance(x, y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn repeated_distance_is_symmetric((t, d, k, pts) in lifted_with_points(2)) {
        let space = lift_metric(&base(k, d), t).unwrap();
        let (x, y) = (&pts[0], &pts[1]);
        prop_assert!(approx_eq(repeated(&space, x, y), repeated(&space, y, x), TOL));
    }

    #[test]
    fn repeated_distance_triangle_forms((t, d, k, pts) in lifted_with_points(3)) {
        let space = lift_metric(&base(k, d), t).unwrap();
        let (x, y, z) = (&pts[0], &pts[1], &pts[2]);
        let tm1 = (t - 1) as f64;
        let lhs = repeated(&space, x, z);
        prop_assert!(approx_le(lhs, tm1 * repeated(&space, x, y) + repeated(&space, z, y), TOL));
        prop_assert!(approx_le(lhs, tm1 * repeated(&space, x, y) + repeated(&space, y, z), TOL));
    }

    #[test]
    fn lift_repeats_base_distance((t, d, k, pts) in lifted_with_points(2)) {
        let b = base(k, d);
        let space = lift_metric(&b, t).unwrap();
        let expected = (t - 1) as f64 * b.distance(&pts[0], &pts[1]);
        prop_assert!(approx_eq(repeated(&space, &pts[0], &pts[1]), expected, 1e-12));
    }

    #[test]
    fn lift_is_permutation_invariant((t, d, k, pts) in lifted_with_points(0), seed in any::<u64>()) {
        let space = lift_metric(&base(k, d), t).unwrap();
        let tuple = &pts[..t];
        let mut shuffled: Vec<&Point> = tuple.iter().collect();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert!(approx_eq(space.evaluate(tuple).unwrap(), space.evaluate(&shuffled).unwrap(), 1e-12));
    }

    #[test]
    fn basis_weights_select_their_point((t, d, _k, pts) in lifted_with_points(0), i in 0usize..6) {
        let i = i % t;
        let w = weighted_mean_structure(t, d).unwrap();
        let got = w.combine(&pts[..t], &WeightVector::basis(t, i).unwrap()).unwrap();
        prop_assert_eq!(&got, &pts[i]);
    }

    #[test]
    fn coincident_points_are_fixed(t in 2usize..=6, x in point(2), raw in prop::collection::vec(0.001f64..1.0, 6)) {
        let w = weighted_mean_structure(t, 2).unwrap();
        let total: f64 = raw[..t].iter().sum();
        let weights = WeightVector::new(raw[..t].iter().map(|v| v / total).collect()).unwrap();
        let got = w.combine(&vec![x.clone(); t], &weights).unwrap();
        prop_assert!(got.l1_distance(&x) <= 1e-12 * (1.0 + x.max_abs()));
    }

    #[test]
    fn mann_weights_are_stochastic(t in 2usize..=8, alpha in 0.0f64..=1.0) {
        let w = WeightVector::mann(t, alpha).unwrap();
        prop_assert_eq!(w.last(), alpha);
        prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.as_slice().iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn rate_bound_is_monotone(delta in 0.0f64..0.999, alpha in 0.0f64..=1.0, a0 in 0.0f64..1e6, t in 2usize..=5) {
        let schedule = Schedule::constant(t, alpha).unwrap();
        let bound = theoretical_bound(delta, &schedule, a0, 300).unwrap();
        prop_assert!(bound.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(bound.iter().all(|&b| b >= 0.0 && b <= a0));
    }

    #[test]
    fn harmonic_bound_is_monotone(delta in 0.0f64..0.999, a0 in 0.0f64..1e6) {
        let bound = theoretical_bound(delta, &Schedule::harmonic(3).unwrap(), a0, 300).unwrap();
        prop_assert!(bound.windows(2).all(|w| w[1] <= w[0]));
    }
}

fn mann_setup(t: usize, d: usize) -> (AMetricSpace, ConvexStructure) {
    (
        example_space(t, d).unwrap(),
        weighted_mean_structure(t, d).unwrap(),
    )
}

fn anchored(d: usize, f: &SelfMap, seed: u64) -> UniformBox {
    let b = UniformBox::new(d, -10.0, 10.0, seed).unwrap();
    match f.known_fixed_point() {
        Some(u) => b.with_anchor(u.clone()),
        None => b,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn convexity_failures_persist_with_more_samples(t in 2usize..=4, seed in any::<u64>(), n in 1usize..200, extra in 1usize..200) {
        let space = example_space(t, 1).unwrap();
        let sampler = UniformBox::new(1, -5.0, 5.0, seed).unwrap();
        for w in [weighted_mean_structure(t, 1).unwrap(), ConvexStructure::first_slot_selector(t, 1).unwrap()] {
            let small = check_convexity(&space, &w, &sampler, n, TOL).unwrap();
            let large = check_convexity(&space, &w, &sampler, n + extra, TOL).unwrap();
            prop_assert!(small.passed || !large.passed);
            prop_assert!(large.violations.len() >= small.violations.len());
        }
    }

    #[test]
    fn delta_hat_grows_with_samples(seed in any::<u64>(), n in 1usize..300, extra in 1usize..300, which in 0usize..7) {
        let space = example_space(3, 1).unwrap();
        let f = &corpus(1).unwrap()[which];
        let sampler = UniformBox::new(1, -10.0, 10.0, seed).unwrap();
        let small = estimate_delta(&space, f, &sampler, n).unwrap();
        let large = estimate_delta(&space, f, &sampler, n + extra).unwrap();
        prop_assert!(large.delta_hat >= small.delta_hat);
    }

    #[test]
    fn az_maps_satisfy_their_estimated_modulus(seed in any::<u64>(), which in 0usize..7, d in 1usize..=2) {
        let space = example_space(3, d).unwrap();
        let f = &corpus(d).unwrap()[which];
        let sampler = anchored(d, f, seed);
        let az = classify_az(&space, f, None, &sampler, 500, TOL).unwrap();
        if az.is_az {
            let est = estimate_delta(&space, f, &sampler, 500).unwrap();
            prop_assert!(est.contraction);
            let check = verify_contraction_inequalities(&space, f, est.delta_hat, &sampler, 500, TOL).unwrap();
            prop_assert!(check.passed, "{}: {:?}", f.label(), check.violations.first());
        }
    }

    #[test]
    fn rate_bound_dominates_for_az_maps(
        seed in any::<u64>(),
        which in 0usize..7,
        t in 2usize..=4,
        alpha in 0.05f64..=1.0,
        x0 in point(1),
    ) {
        let (space, w) = mann_setup(t, 1);
        let f = &corpus(1).unwrap()[which];
        let sampler = anchored(1, f, seed);
        if !classify_az(&space, f, None, &sampler, 500, TOL).unwrap().is_az {
            return Ok(());
        }
        let est = estimate_delta(&space, f, &sampler, 500).unwrap();
        let schedule = Schedule::constant(t, alpha).unwrap();
        let trace = mann_run(&space, &w, f, &x0, &schedule, &StopRule::new(200, 1e-14, 5).unwrap(), Some(est.delta_hat), None).unwrap();
        // iterates cannot approach u closer than its rounding grid
        let floor = 16.0 * f64::EPSILON * (1.0 + f.known_fixed_point().unwrap().max_abs());
        for s in &trace.steps {
            prop_assert!(s.dist_to_u.unwrap() <= s.bound.unwrap() * (1.0 + TOL) + floor, "{} n={}", f.label(), s.n);
        }
    }

    #[test]
    fn full_step_mann_is_picard(which in 0usize..7, t in 2usize..=5, x0 in point(2)) {
        let (space, w) = mann_setup(t, 2);
        let f = &corpus(2).unwrap()[which];
        let stop = StopRule::new(400, 1e-12, 5).unwrap();
        let mann = mann_run(&space, &w, f, &x0, &Schedule::constant(t, 1.0).unwrap(), &stop, None, None);
        let picard = picard_run(&space, f, &x0, &stop);
        match (mann, picard) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a.partial_trace(), b.partial_trace()),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn decaying_perturbations_are_stable(rate in 0.05f64..0.9, t in 2usize..=4, alpha in 0.2f64..=1.0, x0 in -10.0f64..10.0) {
        let (space, w) = mann_setup(t, 1);
        let f = SelfMap::linear(0.5, 1).unwrap();
        let p = Perturbation::decaying_geometric(1, rate).unwrap();
        let schedule = Schedule::constant(t, alpha).unwrap();
        let report = perturbed_run(&space, &w, &f, &Point::scalar(x0), &schedule, &p, 400).unwrap();
        prop_assert_eq!(report.verdict, Verdict::ConsistentStable);
    }

    #[test]
    fn constant_perturbations_are_unstable_input(m in 0.01f64..5.0, t in 2usize..=4, alpha in 0.2f64..=1.0, x0 in -10.0f64..10.0) {
        let (space, w) = mann_setup(t, 1);
        let f = SelfMap::linear(0.5, 1).unwrap();
        let p = Perturbation::constant(1, m).unwrap();
        let schedule = Schedule::constant(t, alpha).unwrap();
        let report = perturbed_run(&space, &w, &f, &Point::scalar(x0), &schedule, &p, 200).unwrap();
        prop_assert_eq!(report.verdict, Verdict::ConsistentUnstableInput);
        let expected = (t - 1) as f64 * m;
        prop_assert!(report.eps_series().iter().all(|e| approx_eq(*e, expected, TOL)));
    }
}
