use bellman_grid::bellman::{check_max_principle, eval_f, stencil_weights, weights_from, MaxPrinciple, StencilWeights};
use bellman_grid::lattice::{signed_indices, ByDirection, DirectionSet, Point};
use bellman_grid::problem::{catalog, validate_assumptions, Assumption};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stencils of every catalog problem that passes the upwind balance, at random points.
fn passing_stencils(samples: usize, seed: u64) -> Vec<StencilWeights<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for name in catalog::NAMES {
        let entry = catalog::get::<f64>(name).unwrap();
        let domain = entry.domain(0.25, 0.25).unwrap();
        let report = validate_assumptions(&entry.problem, &domain, &[Assumption::UpwindBalance], 50, seed);
        if !report.all_pass() {
            continue;
        }
        let h0 = entry.problem.constants.h0;
        for h in [h0, h0 / 2.0, h0 / 4.0] {
            let dirs = entry.directions(h).unwrap();
            for _ in 0..samples {
                let x: Vec<f64> = entry
                    .lower
                    .iter()
                    .zip(&entry.upper)
                    .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
                    .collect();
                let t = rng.gen_range(0.0..entry.problem.constants.horizon);
                let psi = rng.gen_range(-1.0..1.0);
                for alpha in 0..entry.problem.controls() {
                    out.push(stencil_weights(&entry.problem, &dirs, alpha, t, &x, psi).unwrap());
                }
            }
        }
    }
    out
}

#[test]
fn catalog_stencils_respect_the_maximum_principle() {
    let stencils = passing_stencils(40, 1);
    assert!(stencils.len() > 500);
    for w in &stencils {
        assert!(check_max_principle(w).passed(), "{w:?}");
    }
}

#[test]
fn seeded_violation_has_negative_forward_weight() {
    let entry = catalog::get::<f64>("violation1d").unwrap();
    let dirs = entry.directions(entry.problem.constants.h0).unwrap();
    let w = stencil_weights(&entry.problem, &dirs, 0, 0.0, &[2.0], 0.0).unwrap();
    match check_max_principle(&w) {
        MaxPrinciple::NegativeWeight { offset, weight } => {
            assert_eq!(offset, dirs.offset(1));
            // a_1 + a_{-1} + b_1 h = 1 + 1 - 3.
            assert!((weight + 1.0).abs() < 1e-12, "{weight}");
        }
        other => panic!("expected a negative weight, got {other:?}"),
    }
    let finer = entry.directions(entry.problem.constants.h0 / 2.0).unwrap();
    let w = stencil_weights(&entry.problem, &finer, 0, 0.0, &[2.0], 0.0).unwrap();
    assert!(check_max_principle(&w).passed());
}

#[test]
fn stencils_are_nonnegative_on_admissible_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let stencils = passing_stencils(4, 2);
    for i in 0..200 {
        let w = &stencils[i % stencils.len()];
        let center: f64 = rng.gen_range(-3.0..3.0);
        let values: Vec<(Point, f64)> = w
            .weights
            .keys()
            .map(|y| {
                let v = if y.iter().all(|&c| c == 0) {
                    center
                } else {
                    center + rng.gen_range(0.0..2.0)
                };
                (y.clone(), v)
            })
            .collect();
        let phi = |y: &Point| values.iter().find(|(z, _)| z == y).unwrap().1;
        let s = w.apply(phi);
        let scale = 1.0 + w.max_abs() * (center.abs() + 2.0);
        assert!(s >= -1e-12 * scale, "{s}");
    }
}

#[test]
fn stencils_respect_the_maximum_principle_at_a_point() {
    // For φ(x0) ≤ 0: -Sφ(x0) ≤ S(φ⁻)(x0).
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let stencils = passing_stencils(4, 3);
    for i in 0..200 {
        let w = &stencils[i % stencils.len()];
        let values: Vec<(Point, f64)> = w
            .weights
            .keys()
            .map(|y| {
                let v = if y.iter().all(|&c| c == 0) {
                    -rng.gen_range(0.0..3.0)
                } else {
                    rng.gen_range(-3.0..3.0)
                };
                (y.clone(), v)
            })
            .collect();
        let phi = |y: &Point| values.iter().find(|(z, _)| z == y).unwrap().1;
        let lhs = -w.apply(phi);
        let rhs = w.apply(|y| (-phi(y)).max(0.0));
        assert!(lhs <= rhs + 1e-12 * (1.0 + w.max_abs() * 3.0), "{lhs} > {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn zero_direction_stencil_ignores_its_coefficients(
        a in prop::collection::vec(0.0f64..3.0, 3),
        b in prop::collection::vec(0.0f64..3.0, 6),
        a_zero in -10.0f64..10.0,
        b_zero in -10.0f64..10.0,
    ) {
        let dirs = DirectionSet::new(1, vec![vec![1], vec![0], vec![1]], 0.5, 1.0).unwrap();
        let mut aa = ByDirection::from_fn(3, |k| a[(k.unsigned_abs() - 1) as usize]);
        let mut bb = ByDirection::from_fn(3, |k| b[(k.unsigned_abs() as usize - 1) * 2 + usize::from(k < 0)]);
        let before = weights_from(&dirs, &aa, &bb);
        for k in [2, -2] {
            aa.set(k, a_zero);
            bb.set(k, b_zero);
        }
        prop_assert_eq!(before, weights_from(&dirs, &aa, &bb));
    }

    #[test]
    fn f_is_nondecreasing_in_second_differences(
        which in 0usize..catalog::NAMES.len(),
        q in prop::collection::vec(-5.0f64..5.0, 8),
        bump in 0.0f64..3.0,
        k_pick in 0usize..8,
        x in prop::collection::vec(-0.5f64..0.5, 2),
    ) {
        let entry = catalog::get::<f64>(catalog::NAMES[which]).unwrap();
        let d1 = entry.problem.d1();
        let dim = entry.lower.len();
        let q0 = ByDirection::from_fn(d1, |k| q[(k.unsigned_abs() as usize - 1) * 2 % 8]);
        let p = ByDirection::filled(d1, 0.1);
        let labels: Vec<i32> = signed_indices(d1).collect();
        let k = labels[k_pick % labels.len()];
        let mut q1 = q0.clone();
        q1.set(k, q0.get(k) + bump);
        let x = &x[..dim];
        let f0 = eval_f(&entry.problem, 0.3, &q0, &p, 0.2, 0.1, x).unwrap().value;
        let f1 = eval_f(&entry.problem, 0.3, &q1, &p, 0.2, 0.1, x).unwrap().value;
        prop_assert!(f1 >= f0 - 1e-12 * (1.0 + f0.abs()), "{} < {}", f1, f0);
    }
}
