use bellman_grid::calculus::GridFunction;
use bellman_grid::estimates::{diff_norms, estimate_ratio, DiffNorms, Maximum, Theorem, Weights};
use bellman_grid::lattice::{DirectionSet, DomainShape, Node, StencilDomain, TimeGrid};
use bellman_grid::problem::{catalog, validate_assumptions};
use bellman_grid::solver::{sample_data, solve_parabolic, SolveConfig};
use proptest::prelude::*;

fn line_domain(h: f64, tau: f64, hi: i64) -> StencilDomain<f64> {
    let dirs = DirectionSet::new(1, vec![vec![1]], h, 1.0).unwrap();
    let time = TimeGrid::new(tau, 3.0 * tau).unwrap();
    StencilDomain::build(dirs, time, &DomainShape::Box { levels: (0, 2), lo: vec![0], hi: vec![hi] }).unwrap()
}

/// Literal max of `f` over `set`, counting points where `f` has no value.
fn brute(set: &[Node], f: impl Fn(&Node) -> Option<f64>) -> Maximum<f64> {
    let mut value: Option<f64> = None;
    let mut unsupported = 0;
    for n in set {
        match f(n) {
            Some(v) => value = Some(value.map_or(v, |m| m.max(v))),
            None => unsupported += 1,
        }
    }
    Maximum { value, unsupported }
}

fn close(a: &Maximum<f64>, b: &Maximum<f64>) -> bool {
    a.unsupported == b.unsupported
        && match (a.value, b.value) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * (1.0 + x.abs()),
            (None, None) => true,
            _ => false,
        }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn norms_match_an_independent_loop(
        values in prop::collection::vec(-3.0f64..3.0, 40),
        m in -1.5f64..1.5,
        h in 0.05f64..0.5,
        tau in 0.05f64..0.5,
    ) {
        let domain = line_domain(h, tau, 8);
        let nodes: Vec<Node> = domain.qbar().cloned().collect();
        let u = GridFunction::from_fn(&nodes, |n| values[(n.level as usize * 11 + n.x[0] as usize) % values.len()]);
        let w = Weights::new(m, domain.time());
        let norms = diff_norms(&u, &w, &domain);

        let val = |n: &Node| u.get(n).ok();
        let shift = |n: &Node, s: i64| Node::new(n.level, [n.x[0] + s]);
        let xm = |n: &Node| w.xi_minus(n.level);
        let d = |n: &Node, s: i64| Some((val(&shift(n, s))? - val(n)?) / h);
        let q: Vec<Node> = domain.q().cloned().collect();
        let q0: Vec<Node> = domain.q0().cloned().collect();

        prop_assert!(close(&norms.u, &brute(&nodes, |n| Some((xm(n) * val(n)?).abs()))));
        for s in [1i64, -1] {
            let expect = brute(&nodes, |n| Some((xm(n) * d(n, s)?).abs()));
            prop_assert!(close(&norms.first[&(s as i32)], &expect), "{:?} vs {:?}", norms.first[&(s as i32)], expect);
        }
        let second = brute(&q0, |n| {
            let mut best = 0.0f64;
            for i in [1i64, -1] {
                for j in [1i64, -1] {
                    best = best.max(((d(&shift(n, j), i)? - d(n, i)?) / h).abs());
                }
            }
            Some(best)
        });
        prop_assert!(close(&norms.second_initial, &second));
        let lap = brute(&q0, |n| Some(((d(n, 1)? + d(n, -1)?) / h).abs()));
        prop_assert!(close(&norms.laplace_initial[&1], &lap));
        let dtau = brute(&q, |n| {
            let next = val(&Node::new(n.level + 1, [n.x[0]]))?;
            Some((-(xm(n) * (next - val(n)?) / tau)).max(0.0))
        });
        prop_assert!(close(&norms.dtau_neg, &dtau));
    }

    #[test]
    fn weight_parts_multiply_back(m in -3.0f64..3.0, tau in 0.01f64..0.5) {
        let time = TimeGrid::new(tau, 1.0).unwrap();
        let w = Weights::new(m, &time);
        for level in 0..=time.terminal_level() {
            prop_assert_eq!(w.xi_minus(level) * w.xi_plus(level), w.xi(level));
            prop_assert_eq!(w.xi_minus(level), w.xi(level).min(1.0));
        }
    }

    #[test]
    fn shrinking_the_domain_never_increases_a_norm(
        values in prop::collection::vec(-3.0f64..3.0, 40),
        m in -1.0f64..1.0,
        cut in 2i64..8,
    ) {
        let big = line_domain(0.2, 0.2, 10);
        let small = line_domain(0.2, 0.2, cut);
        let u = GridFunction::from_fn(big.nodes(), |n| values[(n.level as usize * 7 + n.x[0] as usize) % values.len()]);
        let w = Weights::new(m, big.time());
        let (nb, ns) = (diff_norms(&u, &w, &big), diff_norms(&u, &w, &small));
        let le = |a: &Maximum<f64>, b: &Maximum<f64>| match (a.value, b.value) {
            (Some(x), Some(y)) => x <= y,
            (None, _) => true,
            (Some(_), None) => false,
        };
        let fields = |n: &DiffNorms<f64>| {
            let mut out = vec![n.u, n.second_initial, n.dtau_neg];
            out.extend(n.first.values().copied());
            out.extend(n.laplace_initial.values().copied());
            out
        };
        for (s, b) in fields(&ns).iter().zip(fields(&nb).iter()) {
            prop_assert!(le(s, b), "{:?} > {:?}", s, b);
        }
    }
}

#[test]
fn affine_function_has_exact_slopes_and_no_curvature() {
    let domain = line_domain(0.25, 0.25, 8);
    let u = GridFunction::from_fn(domain.nodes(), |n| 2.0 - 3.0 * 0.25 * n.x[0] as f64);
    let norms = diff_norms(&u, &Weights::new(0.0, domain.time()), &domain);
    assert!((norms.first[&1].value.unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(norms.second_initial.value, Some(0.0));
    assert_eq!(norms.laplace_initial[&1].value, Some(0.0));
    assert_eq!(norms.dtau_neg.value, Some(0.0));
}

#[test]
fn ratio_reports_are_bit_reproducible() {
    let entry = catalog::get::<f64>("degenerate2d").unwrap();
    let domain = entry.domain(0.1, 0.05).unwrap();
    let data = sample_data(&domain, |t, x| (entry.data)(t, x));
    let validation = validate_assumptions(&entry.problem, &domain, Theorem::ExtraDirectionLipschitz.assumptions(), 50, 1);
    let run = || {
        let u = solve_parabolic(&entry.problem, &domain, &data, &SolveConfig::default()).unwrap().u;
        let u = bellman_grid::estimates::extend_with_data(&u, &domain, |t, x| (entry.data)(t, x));
        estimate_ratio(Theorem::ExtraDirectionLipschitz, &u, &entry.problem, &domain, &validation, 0.0).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.lhs.to_bits(), b.lhs.to_bits());
    assert_eq!(a.rhs.to_bits(), b.rhs.to_bits());
    assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
    assert!(a.lhs.is_finite() && a.lhs > 0.0);
}
