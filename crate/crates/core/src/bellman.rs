//! The nonlinear operator `F`, the scheme residual, and linear stencils per control.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{delta_at, dtau_at, laplace_at, CalcError, GridFunction, Step};
use crate::lattice::{signed_indices, ByDirection, DirectionSet, Node, Point, StencilDomain};
use crate::problem::{eval_coeffs, eval_free, ControlProblem, ProblemError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum BellmanError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Calc(#[from] CalcError),
}

/// Value of `F` and the maximizing control (lowest index on ties).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FValue<F> {
    pub value: F,
    pub control: usize,
}

/// `F(φ, q, p, ψ, t, x) = max_α [r φ + Σ_k (a_k q_k + b_k p_k) - c ψ + f(p, ψ, t, x)]`.
pub fn eval_f<F: Real>(
    problem: &ControlProblem<F>,
    phi: F,
    q: &ByDirection<F>,
    p: &ByDirection<F>,
    psi: F,
    t: F,
    x: &[F],
) -> Result<FValue<F>, BellmanError> {
    let mut best: Option<FValue<F>> = None;
    for alpha in 0..problem.controls() {
        let value = control_value(problem, alpha, phi, q, p, psi, t, x)?;
        if best.is_none_or(|b| value > b.value) {
            best = Some(FValue { value, control: alpha });
        }
    }
    Ok(best.expect("a problem has at least one control"))
}

/// The bracket of `F` for one control.
#[allow(clippy::too_many_arguments)]
pub fn control_value<F: Real>(
    problem: &ControlProblem<F>,
    alpha: usize,
    phi: F,
    q: &ByDirection<F>,
    p: &ByDirection<F>,
    psi: F,
    t: F,
    x: &[F],
) -> Result<F, BellmanError> {
    let co = eval_coeffs(problem, alpha, t, x, psi)?;
    let mut value = co.r * phi - co.c * psi + eval_free(problem, alpha, p, psi, t, x)?;
    for k in signed_indices(problem.d1()) {
        value = value + *co.a.get(k) * *q.get(k) + *co.b.get(k) * *p.get(k);
    }
    Ok(value)
}

/// Arguments of `F` computed from a grid function at a node.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDifferences<F> {
    /// `δ^T_τ u`, or zero for the stationary equation.
    pub phi: F,
    /// `Δ_{h,ℓ_k} u`.
    pub q: ByDirection<F>,
    /// `δ_{h,ℓ_k} u`.
    pub p: ByDirection<F>,
    pub psi: F,
}

pub fn local_differences<F: Real>(
    domain: &StencilDomain<F>,
    u: &GridFunction<F>,
    node: &Node,
    stationary: bool,
) -> Result<LocalDifferences<F>, BellmanError> {
    let dirs = domain.directions();
    let d1 = dirs.d1();
    let mut q = ByDirection::filled(d1, F::zero());
    let mut p = ByDirection::filled(d1, F::zero());
    for k in signed_indices(d1) {
        let step = Step::along(dirs, k);
        q.set(k, laplace_at(u, node, &step)?);
        p.set(k, delta_at(u, node, &step)?);
    }
    let phi = if stationary {
        F::zero()
    } else {
        dtau_at(u, domain.time(), node)?
    };
    Ok(LocalDifferences {
        phi,
        q,
        p,
        psi: u.get(node)?,
    })
}

/// Left side of the scheme at `node`; zero iff the equation holds there.
pub fn scheme_residual<F: Real>(
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    u: &GridFunction<F>,
    node: &Node,
) -> Result<F, BellmanError> {
    residual_with(problem, domain, u, node, false)
}

/// The stationary residual (no time difference), for `r ≡ 0`.
pub fn stationary_residual<F: Real>(
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    u: &GridFunction<F>,
    node: &Node,
) -> Result<F, BellmanError> {
    residual_with(problem, domain, u, node, true)
}

fn residual_with<F: Real>(
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    u: &GridFunction<F>,
    node: &Node,
    stationary: bool,
) -> Result<F, BellmanError> {
    let diffs = local_differences(domain, u, node, stationary)?;
    let t = domain.time_of(node);
    let x = domain.position(node);
    Ok(eval_f(problem, diffs.phi, &diffs.q, &diffs.p, diffs.psi, t, &x)?.value)
}

/// A linear operator `Sφ(x0) = Σ_y w(y) φ(x0 + y)` over base-step offsets `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilWeights<F> {
    pub weights: BTreeMap<Point, F>,
}

impl<F: Real> StencilWeights<F> {
    pub fn zero_offset(&self) -> Option<&Point> {
        self.weights.keys().find(|y| y.iter().all(|&v| v == 0))
    }

    pub fn center(&self) -> F {
        self.zero_offset()
            .and_then(|y| self.weights.get(y))
            .copied()
            .unwrap_or_else(F::zero)
    }

    pub fn row_sum(&self) -> F {
        self.weights.values().copied().sum()
    }

    pub fn max_abs(&self) -> F {
        self.weights.values().fold(F::zero(), |m, w| m.max(w.abs()))
    }

    /// Off-center weights in offset order.
    pub fn neighbors(&self) -> impl Iterator<Item = (&Point, F)> {
        self.weights
            .iter()
            .filter(|(y, _)| y.iter().any(|&v| v != 0))
            .map(|(y, w)| (y, *w))
    }

    pub fn apply(&self, phi: impl Fn(&Point) -> F) -> F {
        self.weights.iter().map(|(y, &w)| w * phi(y)).sum()
    }
}

fn add<F: Real>(map: &mut BTreeMap<Point, F>, y: Point, w: F) {
    let slot = map.entry(y).or_insert_with(F::zero);
    *slot = *slot + w;
}

/// Weights of `L^α_h + c^α` at `(t, x)`; zero directions are skipped.
pub fn stencil_weights<F: Real>(
    problem: &ControlProblem<F>,
    dirs: &DirectionSet<F>,
    alpha: usize,
    t: F,
    x: &[F],
    psi: F,
) -> Result<StencilWeights<F>, BellmanError> {
    let co = eval_coeffs(problem, alpha, t, x, psi)?;
    Ok(weights_from(dirs, &co.a, &co.b))
}

/// Weights of `Σ_k a_k Δ_{h,ℓ_k} + b_k δ_{h,ℓ_k}` for given coefficients.
pub fn weights_from<F: Real>(dirs: &DirectionSet<F>, a: &ByDirection<F>, b: &ByDirection<F>) -> StencilWeights<F> {
    let h = dirs.h();
    let h2 = h * h;
    let zero = Point::from_elem(0, dirs.dim());
    let mut weights = BTreeMap::new();
    weights.insert(zero.clone(), F::zero());
    for k in signed_indices(dirs.d1()) {
        let off = dirs.offset(k);
        if off.iter().all(|&v| v == 0) {
            continue;
        }
        let back: Point = off.iter().map(|v| -v).collect();
        let ak = *a.get(k) / h2;
        let bk = *b.get(k) / h;
        add(&mut weights, off, ak + bk);
        add(&mut weights, back, ak);
        add(&mut weights, zero.clone(), -(ak + ak + bk));
    }
    StencilWeights { weights }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "result")]
pub enum MaxPrinciple<F> {
    Pass,
    /// The most negative off-center weight.
    NegativeWeight { offset: Point, weight: F },
    NonzeroRowSum { sum: F },
}

impl<F> MaxPrinciple<F> {
    pub fn passed(&self) -> bool {
        matches!(self, MaxPrinciple::Pass)
    }
}

/// Off-center weights nonnegative and zero row sum, up to `1e-12 (1 + max|w|)`.
pub fn check_max_principle<F: Real>(w: &StencilWeights<F>) -> MaxPrinciple<F> {
    let tol = F::of(1e-12) * (F::one() + w.max_abs());
    let worst = w
        .neighbors()
        .fold(None::<(&Point, F)>, |acc, (y, v)| match acc {
            Some((_, best)) if best <= v => acc,
            _ => Some((y, v)),
        });
    if let Some((y, v)) = worst {
        if v < -tol {
            return MaxPrinciple::NegativeWeight {
                offset: y.clone(),
                weight: v,
            };
        }
    }
    let sum = w.row_sum();
    if sum.abs() > tol {
        return MaxPrinciple::NonzeroRowSum { sum };
    }
    MaxPrinciple::Pass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FnCoefficients;
    use smallvec::smallvec;

    fn one_d(a: f64, b_plus: f64, b_minus: f64) -> ControlProblem<f64> {
        ControlProblem::new(
            "t",
            FnCoefficients::new(1, 1)
                .with_r(|_, _| 1.0)
                .with_a(move |_, _, _, _, _| a)
                .with_b(move |_, k, _, _| if k == 1 { b_plus } else { b_minus }),
        )
    }

    #[test]
    fn f_for_pure_diffusion_is_phi_plus_q() {
        let pr = one_d(1.0, 0.0, 0.0);
        let q = ByDirection::from_fn(1, |k| if k == 1 { 2.0 } else { 5.0 });
        let p = ByDirection::filled(1, 0.0);
        let v = eval_f(&pr, 0.5, &q, &p, 0.0, 0.0, &[0.0]).unwrap();
        assert_eq!(v.value, 0.5 + 2.0 + 5.0);
    }

    #[test]
    fn stencil_matches_hand_evaluation() {
        // Both Δ_{h,ℓ_1} and Δ_{h,ℓ_{-1}} carry a_{±1} = 1/2.
        let pr = one_d(0.5, 1.0, 0.0);
        let dirs = DirectionSet::new(1, vec![vec![1]], 0.5, 1.0).unwrap();
        let w = stencil_weights(&pr, &dirs, 0, 0.0, &[0.0], 0.0).unwrap();
        let p = |v: i64| -> Point { smallvec![v] };
        assert_eq!(w.weights[&p(1)], 6.0);
        assert_eq!(w.weights[&p(-1)], 4.0);
        assert_eq!(w.weights[&p(0)], -10.0);
        assert!(check_max_principle(&w).passed());
    }

    #[test]
    fn negative_drift_beyond_threshold_fails_forward() {
        let pr = one_d(0.0, -1.0, 0.0);
        let dirs = DirectionSet::new(1, vec![vec![1]], 1.0, 1.0).unwrap();
        let w = stencil_weights(&pr, &dirs, 0, 0.0, &[0.0], 0.0).unwrap();
        match check_max_principle(&w) {
            MaxPrinciple::NegativeWeight { offset, weight } => {
                assert_eq!(offset.as_slice(), &[1]);
                assert_eq!(weight, -1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn upwind_threshold_is_monotone() {
        // a = h0 b^- with h = h0 = 1.
        let pr = one_d(1.0, -1.0, 0.0);
        let dirs = DirectionSet::new(1, vec![vec![1]], 1.0, 1.0).unwrap();
        let w = stencil_weights(&pr, &dirs, 0, 0.0, &[0.0], 0.0).unwrap();
        assert!(check_max_principle(&w).passed());
        assert_eq!(w.weights[&Point::from_slice(&[1])], 1.0);
    }

    #[test]
    fn zero_direction_is_ignored() {
        let pr = ControlProblem::new(
            "z",
            FnCoefficients::new(2, 1)
                .with_a(|_, k, _, _, _| if k == 2 { 7.0 } else { 1.0 })
                .with_b(|_, k, _, _| if k.abs() == 2 { -3.0 } else { 0.0 }),
        );
        let dirs = DirectionSet::new(1, vec![vec![1], vec![0]], 0.5, 1.0).unwrap();
        let w = stencil_weights(&pr, &dirs, 0, 0.0, &[0.0], 0.0).unwrap();
        let plain = weights_from(&dirs, &ByDirection::filled(2, 1.0), &ByDirection::filled(2, 0.0));
        assert_eq!(w, plain);
    }

    #[test]
    fn scheme_residual_vanishes_for_telescoping_data() {
        use crate::lattice::{DomainShape, TimeGrid};
        let pr = ControlProblem::new(
            "tel",
            FnCoefficients::new(1, 1).with_r(|_, _| 1.0).with_f(|_, _, _, _, _| 2.0),
        );
        let dirs = DirectionSet::new(1, vec![vec![1]], 1.0, 1.0).unwrap();
        let time = TimeGrid::new(0.25, 1.0).unwrap();
        let domain = StencilDomain::build(
            dirs,
            time,
            &DomainShape::Box { levels: (0, 3), lo: vec![-1], hi: vec![1] },
        )
        .unwrap();
        // u(t) = u(t + τ) + τ g with g = 2.
        let u = GridFunction::from_fn(domain.nodes(), |n| 2.0 * 0.25 * (4.0 - n.level as f64));
        for node in domain.interior1() {
            assert!(scheme_residual(&pr, &domain, &u, node).unwrap().abs() < 1e-14);
        }
    }
}
