use bellman_grid::calculus::{
    delta, delta2, delta_at, dtau_t, laplace_at, laplace_bound_slack, laplace_dir, mixed_difference_bound_slack,
    product_rule_residuals, GridFunction, Step,
};
use bellman_grid::estimates::{conjugation_residual, Weights};
use bellman_grid::lattice::{DirectionSet, Node, TimeGrid};
use bellman_grid::problem::spanning_split;
use proptest::prelude::*;

fn cube(dim: usize, n: i64, levels: u32) -> Vec<Node> {
    let mut out = vec![];
    let side: Vec<i64> = (-n..=n).collect();
    let mut idx = vec![0usize; dim];
    loop {
        for level in 0..levels {
            out.push(Node::new(level, idx.iter().map(|&i| side[i])));
        }
        let mut d = 0;
        loop {
            if d == dim {
                return out;
            }
            idx[d] += 1;
            if idx[d] < side.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn random_function(nodes: &[Node], values: &[f64]) -> GridFunction<f64> {
    GridFunction::from_fn(nodes, |n| {
        let i = nodes.iter().position(|m| m == n).unwrap();
        values[i % values.len()]
    })
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

fn step_strategy(dim: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-1i64..=1, dim).prop_filter("nonzero", |v| v.iter().any(|&c| c != 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn operators_are_linear(
        dim in 1usize..=2,
        a in prop::collection::vec(-5.0f64..5.0, 64),
        b in prop::collection::vec(-5.0f64..5.0, 64),
        s in -3.0f64..3.0,
        eta in 0.05f64..1.0,
        l in step_strategy(2),
    ) {
        let nodes = cube(dim, 2, 2);
        let u = random_function(&nodes, &a);
        let v = random_function(&nodes, &b);
        let w = u.axpy(s, &v);
        let step = Step::new(l[..dim].iter().copied().chain(std::iter::repeat(1)).take(dim), eta);
        let ops: Vec<Box<dyn Fn(&GridFunction<f64>) -> GridFunction<f64>>> = vec![
            Box::new(|f| delta(f, &step)),
            Box::new(|f| laplace_dir(f, &step)),
            Box::new(|f| delta2(f, &step, &step.reversed())),
            Box::new(|f| dtau_t(f, &TimeGrid::new(0.3, 0.6).unwrap())),
        ];
        for op in &ops {
            let (ou, ov, ow) = (op(&u), op(&v), op(&w));
            prop_assert_eq!(ou.len(), ow.len());
            for (n, x) in ow.iter() {
                let expect = ou.get(n).unwrap() + s * ov.get(n).unwrap();
                let scale = ou.get(n).unwrap().abs() + (s * ov.get(n).unwrap()).abs();
                prop_assert!(close(*x, expect, scale), "{} vs {}", x, expect);
            }
        }
    }

    #[test]
    fn laplacian_factors_through_first_differences(
        a in prop::collection::vec(-5.0f64..5.0, 64),
        eta in 0.05f64..1.0,
        l in step_strategy(2),
    ) {
        let nodes = cube(2, 2, 1);
        let u = random_function(&nodes, &a);
        let step = Step::new(l.clone(), eta);
        let back = step.reversed();
        for n in &nodes {
            let Ok(lap) = laplace_at(&u, n, &step) else { continue };
            let fwd = delta_at(&u, n, &step).unwrap();
            let bwd = delta_at(&u, n, &back).unwrap();
            let scale = fwd.abs() + bwd.abs();
            prop_assert!(close(eta * lap, fwd + bwd, scale));
            let composed = -(delta_at(&u, &n.shifted(&back.offset), &step).unwrap() - fwd) / eta;
            prop_assert!(close(lap, composed, scale / eta));
        }
    }

    #[test]
    fn exactness_on_affine_and_quadratic(
        c in prop::collection::vec(-3.0f64..3.0, 3),
        q in -2.0f64..2.0,
        units in 1i64..4,
        l in step_strategy(2),
    ) {
        // u(x) = c0 + c·x + q (l·x)^2 in base units g = 0.1; Δ_l u = 2 q |l|^2 per unit² exactly.
        let g = 0.1;
        let nodes = cube(2, 6, 1);
        let affine = GridFunction::from_fn(&nodes, |n| c[0] + g * (c[1] * n.x[0] as f64 + c[2] * n.x[1] as f64));
        let lx = |n: &Node| (l[0] * n.x[0] + l[1] * n.x[1]) as f64 * g;
        let ll = (l[0] * l[0] + l[1] * l[1]) as f64;
        let quad = GridFunction::from_fn(&nodes, |n| q * lx(n) * lx(n));
        let step = Step::new(l.iter().map(|v| v * units), g * units as f64);
        let slope = c[1] * l[0] as f64 + c[2] * l[1] as f64;
        for (_, d) in delta(&affine, &step).iter() {
            prop_assert!((d - slope).abs() < 1e-12);
        }
        for (_, d) in laplace_dir(&quad, &step).iter() {
            prop_assert!((d - 2.0 * q * ll * ll).abs() < 1e-10, "{} vs {}", d, 2.0 * q * ll * ll);
        }
    }

    #[test]
    fn product_rules_hold(
        dim in 1usize..=3,
        a in prop::collection::vec(-5.0f64..5.0, 125),
        psi in prop::collection::vec(-5.0f64..5.0, 125),
        nu in 0.01f64..=1.0,
        l1 in step_strategy(3),
        l2 in step_strategy(3),
    ) {
        let nodes = cube(dim, 2, 1);
        let a = random_function(&nodes, &a);
        let psi = random_function(&nodes, &psi);
        let fix = |l: &[i64]| -> Vec<i64> {
            let mut v = l[..dim].to_vec();
            if v.iter().all(|&c| c == 0) {
                v[0] = 1;
            }
            v
        };
        let s1 = Step::new(fix(&l1), nu);
        let s2 = Step::new(fix(&l2), nu);
        let r = product_rule_residuals(&a, &psi, &s1, &s2).unwrap();
        prop_assert!(r.max() <= 1e-12, "{:?}", r);
    }

    #[test]
    fn laplacian_is_bounded_by_differences_of_negative_parts(
        values in prop::collection::vec(-5.0f64..5.0, 25),
        kink in -2i64..=2,
        slope in -3.0f64..3.0,
        nu in 0.01f64..=1.0,
    ) {
        // Random values plus a |x - kink| ridge.
        let nodes = cube(1, 12, 1);
        let psi = GridFunction::from_fn(&nodes, |n| {
            let i = (n.x[0] + 12) as usize;
            values[i % values.len()] + slope * (n.x[0] - kink).abs() as f64
        });
        let slack = laplace_bound_slack(&psi, &Step::new([1], nu)).unwrap();
        prop_assert!(slack >= -1e-12, "{}", slack);
    }

    #[test]
    fn mixed_differences_bounded_by_four_pure_ones(
        values in prop::collection::vec(-5.0f64..5.0, 200),
        h in 0.05f64..1.0,
    ) {
        let dirs = DirectionSet::new(2, vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]], h, 1.0).unwrap();
        let d0 = spanning_split(&dirs).unwrap().d0;
        let nodes = cube(2, 4, 1);
        let phi = random_function(&nodes, &values);
        let slack = mixed_difference_bound_slack(&phi, &dirs, d0).unwrap();
        prop_assert!(slack >= -1e-12, "{}", slack);
    }

    #[test]
    fn time_weight_conjugation_is_exact(
        values in prop::collection::vec(-5.0f64..5.0, 40),
        m in -2.0f64..2.0,
        tau in 0.05f64..0.5,
    ) {
        let time = TimeGrid::new(tau, 1.0).unwrap();
        let levels = time.terminal_level() + 1;
        let nodes = cube(1, 1, levels);
        let u = random_function(&nodes, &values);
        let w = Weights::new(m, &time);
        for n in nodes.iter().filter(|n| n.level < time.terminal_level()) {
            let r = conjugation_residual(&u, &time, &w, n).unwrap();
            let scale = 1.0 + w.xi(n.level + 1).max(w.xi(n.level)) * u.max_abs() / tau;
            prop_assert!(r.abs() <= 1e-12 * scale, "{} at {}", r, n);
        }
    }
}
