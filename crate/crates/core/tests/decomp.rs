use bellman_grid::bellman::{check_max_principle, weights_from};
use bellman_grid::decomp2d::{decompose, lipschitz_probe, reconstruct, Matrix2, SmoothAbs};
use bellman_grid::lattice::{ByDirection, DirectionSet};
use proptest::prelude::*;

/// A smooth dominant field: `a11, a22 ∈ [0.5, 1.5]`, `|a12| ≤ 0.45`.
#[derive(Debug, Clone)]
struct Field {
    freq: [f64; 3],
    phase: [f64; 3],
    amp: f64,
}

impl Field {
    fn at(&self, x: &[f64]) -> Matrix2<f64> {
        let wave = |i: usize| (self.freq[i] * (x[0] + 0.7 * x[1]) + self.phase[i]).sin();
        let a11 = 1.0 + 0.5 * wave(0);
        let a22 = 1.0 + 0.5 * wave(1);
        let a12 = self.amp * wave(2);
        [[a11, a12], [a12, a22]]
    }

    fn sample(&self, n: usize) -> (Vec<Vec<f64>>, Vec<Matrix2<f64>>) {
        let points: Vec<Vec<f64>> = (0..=n)
            .flat_map(|i| (0..=n).map(move |j| vec![i as f64 / n as f64, j as f64 / n as f64]))
            .collect();
        let field = points.iter().map(|p| self.at(p)).collect();
        (points, field)
    }
}

fn field_strategy() -> impl Strategy<Value = Field> {
    (
        prop::array::uniform3(0.5f64..4.0),
        prop::array::uniform3(0.0f64..6.3),
        0.0f64..0.45,
    )
        .prop_map(|(freq, phase, amp)| Field { freq, phase, amp })
}

/// Horizontal and vertical neighbor pairs on an `(n+1)²` grid.
fn neighbor_pairs(n: usize) -> Vec<(usize, usize)> {
    let idx = |i: usize, j: usize| i * (n + 1) + j;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            if i < n {
                out.push((idx(i, j), idx(i + 1, j)));
            }
            if j < n {
                out.push((idx(i, j), idx(i, j + 1)));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn random_fields_reconstruct_with_nonnegative_coefficients(
        field in field_strategy(),
        psi in prop::sample::select(vec![SmoothAbs::Quartic, SmoothAbs::Mollified]),
    ) {
        let (points, a) = field.sample(6);
        let d = decompose(points, &a, psi).unwrap();
        for (orig, back) in a.iter().zip(reconstruct(&d)) {
            let norm = orig.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for r in 0..2 {
                for s in 0..2 {
                    prop_assert!((orig[r][s] - back[r][s]).abs() <= 1e-12 * norm);
                }
            }
        }
        for c in &d.coeffs {
            prop_assert!(c.values().iter().all(|v| *v >= -1e-12), "{:?}", c);
        }
    }

    #[test]
    fn decomposed_coefficients_give_monotone_stencils(
        field in field_strategy(),
        h in 0.01f64..1.0,
    ) {
        let dirs = DirectionSet::new(2, vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]], h, 1.0).unwrap();
        let (points, a) = field.sample(4);
        let d = decompose(points, &a, SmoothAbs::Quartic).unwrap();
        let zero = ByDirection::filled(4, 0.0);
        for c in &d.coeffs {
            let ak = c.stencil_coefficients();
            let aa = ByDirection::from_fn(4, |k| ak[k.unsigned_abs() as usize - 1]);
            let w = weights_from(&dirs, &aa, &zero);
            prop_assert!(check_max_principle(&w).passed(), "{:?}", w);
        }
    }
}

#[test]
fn stencil_second_order_part_matches_the_matrix() {
    // Σ_{±k} a_k ℓ_k ℓ_kᵀ recovers the input matrix.
    let ells = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]];
    let field = Field { freq: [1.3, 2.1, 0.7], phase: [0.2, 1.0, 2.5], amp: 0.4 };
    let (points, a) = field.sample(5);
    let d = decompose(points, &a, SmoothAbs::Quartic).unwrap();
    for (orig, c) in a.iter().zip(&d.coeffs) {
        let ak = c.stencil_coefficients();
        let mut sum = [[0.0; 2]; 2];
        for (k, l) in ells.iter().enumerate() {
            for r in 0..2 {
                for s in 0..2 {
                    sum[r][s] += 2.0 * ak[k] * l[r] * l[s];
                }
            }
        }
        for r in 0..2 {
            for s in 0..2 {
                assert!((sum[r][s] - orig[r][s]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn square_root_lipschitz_ratios_stay_bounded_under_refinement() {
    let field = Field { freq: [2.0, 3.0, 3.5], phase: [0.3, 1.1, 0.0], amp: 0.45 };
    let ratios: Vec<[f64; 4]> = [20, 40, 80]
        .into_iter()
        .map(|n| {
            let (points, a) = field.sample(n);
            let d = decompose(points, &a, SmoothAbs::Quartic).unwrap();
            lipschitz_probe(&d, &neighbor_pairs(n)).unwrap()
        })
        .collect();
    for k in 0..4 {
        assert!(ratios[0][k].is_finite() && ratios[0][k] > 0.0);
        for w in ratios.windows(2) {
            assert!(w[1][k] <= 2.0 * w[0][k], "coefficient {k}: {:?}", ratios);
        }
    }
}

#[test]
fn constant_field_has_zero_lipschitz_ratio() {
    let points: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 0.0]).collect();
    let a = vec![[[2.0, 0.5], [0.5, 1.0]]; 5];
    let d = decompose(points, &a, SmoothAbs::Quartic).unwrap();
    let pairs: Vec<_> = (0..4).map(|i| (i, i + 1)).collect();
    assert_eq!(lipschitz_probe(&d, &pairs).unwrap(), [0.0; 4]);
}

#[test]
fn quadratic_touching_zero_has_the_slope_of_its_root() {
    // a = diag(2x², 3): s = 2x², g = 0, h = x²/4, so â^{11} = 7x²/8 and â^{12} = x²/8.
    let n = 400;
    let points: Vec<Vec<f64>> = (0..=n).map(|i| vec![-1.0 + 2.0 * i as f64 / n as f64, 0.0]).collect();
    let a: Vec<Matrix2<f64>> = points.iter().map(|p| [[2.0 * p[0] * p[0], 0.0], [0.0, 3.0]]).collect();
    let d = decompose(points, &a, SmoothAbs::Quartic).unwrap();
    let pairs: Vec<_> = (0..n).map(|i| (i, i + 1)).collect();
    let probe = lipschitz_probe(&d, &pairs).unwrap();
    assert!((probe[0] - (7.0f64 / 8.0).sqrt()).abs() < 1e-12, "{}", probe[0]);
    assert!((probe[2] - (1.0f64 / 8.0).sqrt()).abs() < 1e-12, "{}", probe[2]);
}
