//! Quantities in the statements of the a priori estimates, and mesh-refinement
//! studies built on them.
//!
//! The estimates hold with constants the analysis leaves unspecified, so
//! nothing here passes or fails: each report gives the left-hand maximand, the
//! right-hand side without its constant, and their ratio.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{delta2_at, delta_at, dtau_at, laplace_at, CalcError, GridFunction, Step};
use crate::lattice::{signed_indices, LatticeError, Node, StencilDomain, TimeGrid};
use crate::problem::catalog::CatalogEntry;
use crate::problem::{
    eval_coeffs, validate_assumptions, Assumption, ControlProblem, ProblemError, Status, ValidationReport,
};
use crate::scalar::Real;
use crate::solver::{sample_data, solve_elliptic, solve_parabolic, SolveConfig, SolveError};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("no support for {0}")]
    MissingSupport(&'static str),
    #[error("the direction set has no extra direction")]
    NoExtraDirection,
    #[error("a ladder needs at least {need} rungs, got {got}")]
    LadderTooShort { need: usize, got: usize },
    #[error("no reference solution and no finer rung to compare with")]
    NoReference,
}

/// The time weight `ξ` and the constants derived from `m` and `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights<F> {
    pub m: F,
    pub tau: F,
    pub horizon: F,
    pub t_prime: F,
    pub terminal_level: u32,
    pub c_m: F,
    /// `inf (c + r c_m)` over the sampled points; `+∞` when nothing was sampled.
    pub lambda: F,
    pub samples: usize,
}

impl<F: Real> Weights<F> {
    /// Weights with no coefficient samples yet.
    pub fn new(m: F, time: &TimeGrid<F>) -> Self {
        let tau = time.tau();
        Self {
            m,
            tau,
            horizon: time.horizon(),
            t_prime: time.t_prime(),
            terminal_level: time.terminal_level(),
            c_m: (F::one() - (-m * tau).exp()) / tau,
            lambda: F::infinity(),
            samples: 0,
        }
    }

    /// `ξ` at a level: `e^{m n τ}` below the horizon, `e^{m T'}` at it.
    pub fn xi(&self, level: u32) -> F {
        if level >= self.terminal_level {
            (self.m * self.t_prime).exp()
        } else {
            (self.m * F::of_i64(level as i64) * self.tau).exp()
        }
    }

    pub fn xi_plus(&self, level: u32) -> F {
        self.xi(level).max(F::one())
    }

    pub fn xi_minus(&self, level: u32) -> F {
        self.xi(level).min(F::one())
    }

    /// `e^{m^+ (T + τ)}`.
    pub fn growth(&self) -> F {
        (self.m.max(F::zero()) * (self.horizon + self.tau)).exp()
    }

    /// Lowers `λ` with one sample of `c + r c_m`.
    pub fn observe(&mut self, r: F, c: F) {
        self.lambda = self.lambda.min(c + r * self.c_m);
        self.samples += 1;
    }
}

/// Weights for the problem's `m`, with `λ` taken over every control and every node of `Q`.
pub fn weights_of<F: Real>(problem: &ControlProblem<F>, domain: &StencilDomain<F>) -> Result<Weights<F>, ProblemError> {
    let mut w = Weights::new(problem.constants.m, domain.time());
    let nodes: Vec<&Node> = domain.q().collect();
    let pairs: Vec<(F, F)> = nodes
        .par_iter()
        .map(|node| {
            let (t, x) = (domain.time_of(node), domain.position(node));
            (0..problem.controls())
                .map(|alpha| {
                    let co = eval_coeffs(problem, alpha, t, &x, F::zero())?;
                    Ok((co.r, co.c))
                })
                .collect::<Result<Vec<_>, ProblemError>>()
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    for (r, c) in pairs {
        w.observe(r, c);
    }
    Ok(w)
}

/// Residual of `ξ δ^T_τ u = e^{-mτ} δ^T_τ(ξ u) - c_m ξ u` at a node below the horizon.
pub fn conjugation_residual<F: Real>(
    u: &GridFunction<F>,
    time: &TimeGrid<F>,
    w: &Weights<F>,
    node: &Node,
) -> Result<F, CalcError> {
    let xi = w.xi(node.level);
    let xi_u = GridFunction::from_fn(
        [node.clone(), node.at_level(node.level + 1)].iter(),
        |n| w.xi(n.level) * u.get(n).unwrap_or_else(|_| F::nan()),
    );
    let lhs = xi * dtau_at(u, time, node)?;
    let rhs = (-w.m * w.tau).exp() * dtau_at(&xi_u, time, node)? - w.c_m * xi * u.get(node)?;
    Ok(lhs - rhs)
}

/// Largest value of a maximand over a set, with the count of points lacking support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maximum<F> {
    pub value: Option<F>,
    pub unsupported: usize,
}

impl<F: Real> Maximum<F> {
    fn over(nodes: &[&Node], f: impl Fn(&Node) -> Result<F, CalcError> + Sync) -> Self {
        let (value, unsupported) = nodes
            .par_iter()
            .map(|n| match f(n) {
                Ok(v) => (Some(v), 0),
                Err(_) => (None, 1),
            })
            .reduce(|| (None, 0), |(a, m), (b, n)| (max_opt(a, b), m + n));
        Self { value, unsupported }
    }

    /// The maximum, absent when some point lacked support.
    pub fn complete(&self) -> Option<F> {
        if self.unsupported == 0 {
            self.value
        } else {
            None
        }
    }
}

fn max_opt<F: Real>(a: Option<F>, b: Option<F>) -> Option<F> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

fn max_all<F: Real>(items: impl IntoIterator<Item = Option<F>>) -> Option<F> {
    let mut out: Option<F> = None;
    for item in items {
        let v = item?;
        out = Some(out.map_or(v, |o: F| o.max(v)));
    }
    out
}

/// Maxima of weighted differences of `u` over the domain sets.
///
/// Maps are keyed by the signed direction label; the extra direction carries
/// label `±(d1 + 1)`. A maximum is complete only if every point of its set has
/// the support the difference needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffNorms<F> {
    /// `|ξ₋ u|` on `Q̄`.
    pub u: Maximum<F>,
    /// `|ξ₋ δ_k u|` on `Q̄`.
    pub first: BTreeMap<i32, Maximum<F>>,
    /// `|ξ₋ δ_k u|` on `∂₁Q`.
    pub first_boundary1: BTreeMap<i32, Maximum<F>>,
    /// `|δ_{η,l} u|` on `Q|₀`.
    pub extra_initial: Option<Maximum<F>>,
    /// `|δ_j δ_i u|` on `Q|₀` over `|i|, |j| ≤ d1`.
    pub second_initial: Maximum<F>,
    /// `|ξ₋ δ_j δ_i u|` on `∂₂Q` over `|i|, |j| ≤ d1`.
    pub second_boundary2: Maximum<F>,
    /// `|Δ_k u|` on `Q|₀`, `k ≥ 1`.
    pub laplace_initial: BTreeMap<i32, Maximum<F>>,
    /// `|ξ₋ Δ_k u|` on `∂₁Q`, `k ≥ 1`.
    pub laplace_boundary1: BTreeMap<i32, Maximum<F>>,
    /// `(Δ_{η,l} u)⁻` on `Q|₀`.
    pub extra_laplace_neg_initial: Option<Maximum<F>>,
    /// `(ξ₋ δ^T_τ u)⁻` on `Q`.
    pub dtau_neg: Maximum<F>,
}

/// Computes every maximand appearing in the estimates.
pub fn diff_norms<F: Real>(u: &GridFunction<F>, w: &Weights<F>, domain: &StencilDomain<F>) -> DiffNorms<F> {
    let dirs = domain.directions();
    let d1 = dirs.d1() as i32;
    let top = dirs.max_label() as i32;
    let time = domain.time();
    let qbar: Vec<&Node> = domain.qbar().collect();
    let q: Vec<&Node> = domain.q().collect();
    let q0: Vec<&Node> = domain.q0().collect();
    let b1: Vec<&Node> = domain.boundary1().collect();
    let b2: Vec<&Node> = domain.boundary2().collect();
    let xm = |n: &Node| w.xi_minus(n.level);

    let step = |k: i32| Step::along(dirs, k);
    let first_on = |set: &[&Node]| -> BTreeMap<i32, Maximum<F>> {
        signed_indices(top as usize)
            .map(|k| {
                let s = step(k);
                (k, Maximum::over(set, |n| Ok((xm(n) * delta_at(u, n, &s)?).abs())))
            })
            .collect()
    };
    let laplace_on = |set: &[&Node], weighted: bool| -> BTreeMap<i32, Maximum<F>> {
        (1..=top)
            .map(|k| {
                let s = step(k);
                let max = Maximum::over(set, |n| {
                    let scale = if weighted { xm(n) } else { F::one() };
                    Ok((scale * laplace_at(u, n, &s)?).abs())
                });
                (k, max)
            })
            .collect()
    };
    let pairs: Vec<(Step<F>, Step<F>)> = signed_indices(d1 as usize)
        .flat_map(|i| signed_indices(d1 as usize).map(move |j| (i, j)))
        .map(|(i, j)| (step(i), step(j)))
        .collect();
    let second_on = |set: &[&Node], weighted: bool| {
        Maximum::over(set, |n| {
            let scale = if weighted { xm(n) } else { F::one() };
            let mut best = F::zero();
            for (si, sj) in &pairs {
                best = best.max((scale * delta2_at(u, n, si, sj)?).abs());
            }
            Ok(best)
        })
    };
    let extra = dirs.extra().map(|_| step(d1 + 1));

    DiffNorms {
        u: Maximum::over(&qbar, |n| Ok((xm(n) * u.get(n)?).abs())),
        first: first_on(&qbar),
        first_boundary1: first_on(&b1),
        extra_initial: extra
            .as_ref()
            .map(|s| Maximum::over(&q0, |n| Ok(delta_at(u, n, s)?.abs()))),
        second_initial: second_on(&q0, false),
        second_boundary2: second_on(&b2, true),
        laplace_initial: laplace_on(&q0, false),
        laplace_boundary1: laplace_on(&b1, true),
        extra_laplace_neg_initial: extra
            .as_ref()
            .map(|s| Maximum::over(&q0, |n| Ok(laplace_at(u, n, s)?.neg_part()))),
        dtau_neg: Maximum::over(&q, |n| Ok((xm(n) * dtau_at(u, time, n)?).neg_part())),
    }
}

impl<F: Real> DiffNorms<F> {
    fn first_upto(&self, top: i32) -> Option<F> {
        max_all(self.first.iter().filter(|(k, _)| k.abs() <= top).map(|(_, m)| m.complete()))
    }

    fn laplace_boundary_upto(&self, top: i32) -> Option<F> {
        max_all(
            self.laplace_boundary1
                .iter()
                .filter(|(k, _)| **k <= top)
                .map(|(_, m)| m.complete()),
        )
    }

    /// `1 + |ξ₋u| + (ξ₋δ^T_τu)⁻ + |ξ₋δ_iδ_ju|_{∂₂Q} + max_i |ξ₋δ_iu|` for `|i|, |j| ≤ d1`.
    pub fn r_second(&self, d1: usize) -> Option<F> {
        Some(
            F::one()
                + self.u.complete()?
                + self.dtau_neg.complete()?
                + self.second_boundary2.complete()?
                + self.first_upto(d1 as i32)?,
        )
    }

    /// `1 + |ξ₋u| + (ξ₋δ^T_τu)⁻ + max_i |ξ₋Δ_iu|_{∂₁Q} + max_i |ξ₋δ_iu|` for `|i| ≤ top`.
    pub fn r_laplace(&self, top: usize) -> Option<F> {
        if !self.first.contains_key(&(top as i32)) {
            return None;
        }
        Some(
            F::one()
                + self.u.complete()?
                + self.dtau_neg.complete()?
                + self.laplace_boundary_upto(top as i32)?
                + self.first_upto(top as i32)?,
        )
    }
}

/// The estimates a ratio can be formed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// `|δ_{η,l} u|` on `Q|₀` for degenerate linear-in-`u` equations.
    ExtraDirectionLipschitz,
    /// `|δ_k u|` on `Q̄` for uniformly nondegenerate quasilinear equations.
    QuasilinearGradient,
    /// `|δ_j δ_i u|` on `Q|₀`.
    SecondDifferences,
    /// `|Δ_k u|` on `Q|₀` when `a` is independent of `x`.
    PureSecondDifferences,
}

impl Theorem {
    pub const ALL: [Theorem; 4] = [
        Theorem::ExtraDirectionLipschitz,
        Theorem::QuasilinearGradient,
        Theorem::SecondDifferences,
        Theorem::PureSecondDifferences,
    ];

    /// The assumptions the estimate is stated under.
    pub fn assumptions(self) -> &'static [Assumption] {
        use Assumption::*;
        match self {
            Theorem::ExtraDirectionLipschitz => &[Structure, SqrtLipschitz, UpwindBalance, FreeTermGradient],
            Theorem::QuasilinearGradient => &[Structure, QuasilinearGrowth, SmallOscillation],
            Theorem::SecondDifferences => &[
                Structure,
                SqrtLipschitz,
                UpwindBalance,
                SecondDifferences,
                BoundedCoefficients,
                NeighborSpanning,
            ],
            Theorem::PureSecondDifferences => {
                &[Structure, SqrtLipschitz, UpwindBalance, SecondDifferences, BoundedCoefficients]
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Theorem::ExtraDirectionLipschitz => "extra-direction-lipschitz",
            Theorem::QuasilinearGradient => "quasilinear-gradient",
            Theorem::SecondDifferences => "second-differences",
            Theorem::PureSecondDifferences => "pure-second-differences",
        }
    }
}

impl std::str::FromStr for Theorem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown estimate {s:?}"))
    }
}

/// Conditions under which a ratio is not an instance of the estimate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "detail")]
pub enum Caveat {
    AssumptionsUnmet(Vec<Assumption>),
    LambdaBelowMargin,
    EmptyInitialInterior,
    /// A hypothesis on `u` itself (a bound on `|u|` or on boundary differences) fails.
    HypothesisUnmet(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport<F> {
    pub theorem: Theorem,
    pub lhs: F,
    /// Right-hand side without its unspecified constant.
    pub rhs: F,
    pub ratio: F,
    /// The companion one-sided bound on `(Δ_{η,l} u)⁻`, when the estimate has one.
    pub companion: Option<(F, F)>,
    pub lambda: F,
    pub lambda_margin: F,
    pub lambda_samples: usize,
    pub caveats: Vec<Caveat>,
}

/// Forms the ratio of the estimate's left side to its right side without constant.
///
/// `validation` should cover `theorem.assumptions()`; unchecked or failing
/// assumptions are reported as a caveat. `lambda_margin` is the threshold the
/// estimate's `λ ≥ N` is taken with.
pub fn estimate_ratio<F: Real>(
    theorem: Theorem,
    u: &GridFunction<F>,
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    validation: &ValidationReport<F>,
    lambda_margin: F,
) -> Result<EstimateReport<F>, EstimateError> {
    let w = weights_of(problem, domain)?;
    let norms = diff_norms(u, &w, domain);
    let dirs = domain.directions();
    let d1 = dirs.d1();
    let growth = w.growth();
    let mut caveats = Vec::new();
    let mut companion = None;

    let unmet: Vec<Assumption> = theorem
        .assumptions()
        .iter()
        .copied()
        .filter(|a| validation.get(*a).is_none_or(|c| c.status != Status::Pass))
        .collect();
    if !unmet.is_empty() {
        caveats.push(Caveat::AssumptionsUnmet(unmet));
    }
    if w.lambda < lambda_margin {
        caveats.push(Caveat::LambdaBelowMargin);
    }
    if !domain.q0().any(|n| domain.is_interior1(n)) {
        caveats.push(Caveat::EmptyInitialInterior);
    }

    let (lhs, rhs) = match theorem {
        Theorem::ExtraDirectionLipschitz => {
            let lhs = norms
                .extra_initial
                .ok_or(EstimateError::NoExtraDirection)?
                .complete()
                .ok_or(EstimateError::MissingSupport("extra-direction differences on Q|0"))?;
            let boundary = boundary_sum(u, &w, domain)?;
            let bracket = F::one()
                + norms.u.complete().ok_or(EstimateError::MissingSupport("u on the closure"))?
                + boundary;
            (lhs, growth * bracket)
        }
        Theorem::QuasilinearGradient => {
            let lhs = norms
                .first_upto(d1 as i32)
                .ok_or(EstimateError::MissingSupport("first differences on the closure"))?;
            let k1 = problem.constants.k1;
            let k3 = problem.constants.k3;
            let umax = max_all(domain.qbar().map(|n| u.try_get(n).map(|v| v.abs())))
                .ok_or(EstimateError::MissingSupport("u on the closure"))?;
            if umax > k1 {
                caveats.push(Caveat::HypothesisUnmet(format!("max |u| = {umax} exceeds K1 = {k1}")));
            }
            let edge = max_all(
                norms
                    .first_boundary1
                    .iter()
                    .filter(|(k, _)| k.unsigned_abs() as usize <= d1)
                    .map(|(_, m)| m.complete()),
            );
            match edge {
                Some(e) if e > k3 => caveats.push(Caveat::HypothesisUnmet(format!(
                    "boundary differences reach {e}, above K3 = {k3}"
                ))),
                None => caveats.push(Caveat::HypothesisUnmet("boundary differences lack support".into())),
                _ => {}
            }
            (lhs, F::one())
        }
        Theorem::SecondDifferences => {
            let lhs = norms
                .second_initial
                .complete()
                .ok_or(EstimateError::MissingSupport("second differences on Q|0"))?;
            let r = norms
                .r_second(d1)
                .ok_or(EstimateError::MissingSupport("terms of R"))?;
            (lhs, growth * r)
        }
        Theorem::PureSecondDifferences => {
            let lhs = max_all(
                norms
                    .laplace_initial
                    .iter()
                    .filter(|(k, _)| **k as usize <= d1)
                    .map(|(_, m)| m.complete()),
            )
            .ok_or(EstimateError::MissingSupport("pure second differences on Q|0"))?;
            let r0 = norms
                .r_laplace(d1)
                .ok_or(EstimateError::MissingSupport("terms of R0"))?;
            if let Some(neg) = norms.extra_laplace_neg_initial.and_then(|m| m.complete()) {
                if let Some(r) = norms.r_laplace(d1 + 1) {
                    companion = Some((neg, growth * r));
                }
            }
            (lhs, growth * r0)
        }
    };
    Ok(EstimateReport {
        theorem,
        lhs,
        rhs,
        ratio: lhs / rhs,
        companion,
        lambda: w.lambda,
        lambda_margin,
        lambda_samples: w.samples,
        caveats,
    })
}

/// `max_{k, ∂₁Q} (|ξ₋ δ_k u| + |ξ₋ δ_{η,l} u|)` over `|k| ≤ d1`, taken pointwise.
fn boundary_sum<F: Real>(u: &GridFunction<F>, w: &Weights<F>, domain: &StencilDomain<F>) -> Result<F, EstimateError> {
    let dirs = domain.directions();
    if dirs.extra().is_none() {
        return Err(EstimateError::NoExtraDirection);
    }
    let extra = Step::along(dirs, dirs.d1() as i32 + 1);
    let steps: Vec<Step<F>> = signed_indices(dirs.d1()).map(|k| Step::along(dirs, k)).collect();
    let nodes: Vec<&Node> = domain.boundary1().collect();
    let max = Maximum::over(&nodes, |n| {
        let xm = w.xi_minus(n.level);
        let e = (xm * delta_at(u, n, &extra)?).abs();
        let mut best = F::zero();
        for s in &steps {
            best = best.max((xm * delta_at(u, n, s)?).abs());
        }
        Ok(best + e)
    });
    max.complete()
        .ok_or(EstimateError::MissingSupport("boundary differences on the first boundary"))
}

/// Adds `g` at every node reachable from `Q̄` by one or two stencil steps where `u` is undefined.
///
/// Outside `Q̄` a solution of the scheme is data, so this gives difference
/// quotients on the boundary sets the support they need.
pub fn extend_with_data<F: Real>(
    u: &GridFunction<F>,
    domain: &StencilDomain<F>,
    g: impl Fn(F, &[F]) -> F,
) -> GridFunction<F> {
    let dirs = domain.directions();
    let lambda = dirs.lambda();
    let mut offsets = vec![vec![0i64; dirs.dim()]];
    for a in &lambda {
        offsets.push(a.to_vec());
        for b in &lambda {
            offsets.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
        }
    }
    let mut out = u.clone();
    for node in domain.qbar() {
        for o in &offsets {
            let n = node.shifted(o);
            if !out.contains(&n) {
                let t = domain.time_of(&n);
                let value = g(t, &dirs.physical(&n.x));
                out.insert(n, value);
            }
        }
    }
    out
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_order<F: Real>(hs: &[F], errors: &[F]) -> Option<F> {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > F::zero() && **e > F::zero())
        .map(|(h, e)| (h.as_f64().ln(), e.as_f64().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(F::of(sxy / sxx))
}

/// One rung of a refinement ladder, in the column order of the CSV tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow<F> {
    pub h: F,
    pub error: Option<F>,
    pub lhs: Option<F>,
    pub rhs: Option<F>,
    pub ratio: Option<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable<F> {
    pub rows: Vec<RateRow<F>>,
    /// Fitted order of the errors, for convergence studies.
    pub order: Option<F>,
    /// `max / min` of the left sides, for boundedness studies.
    pub spread: Option<F>,
}

fn solve_entry<F: Real>(
    entry: &CatalogEntry<F>,
    domain: &StencilDomain<F>,
    cfg: &SolveConfig<F>,
) -> Result<GridFunction<F>, EstimateError> {
    let data = sample_data(domain, |t, x| (entry.data)(t, x));
    let report = if entry.elliptic {
        solve_elliptic(&entry.problem, domain, &data, cfg)?
    } else {
        solve_parabolic(&entry.problem, domain, &data, cfg)?
    };
    Ok(report.u)
}

/// Sup-norm errors over `Q̄` along a ladder of mesh sizes, and their fitted order.
///
/// The reference is the entry's exact solution; without one, the finest rung
/// serves as reference at the nodes it shares with each coarser rung.
pub fn convergence_study<F: Real>(
    entry: &CatalogEntry<F>,
    ladder: &[F],
    tau_of: impl Fn(F) -> F,
    cfg: &SolveConfig<F>,
) -> Result<RateTable<F>, EstimateError> {
    if ladder.len() < 3 {
        return Err(EstimateError::LadderTooShort {
            need: 3,
            got: ladder.len(),
        });
    }
    let mut solved = Vec::with_capacity(ladder.len());
    for &h in ladder {
        let domain = entry.domain(h, tau_of(h))?;
        let u = solve_entry(entry, &domain, cfg)?;
        solved.push((domain, u));
    }
    let mut rows = Vec::new();
    match &entry.solution {
        Some(exact) => {
            for (&h, (domain, u)) in ladder.iter().zip(&solved) {
                let err = domain
                    .qbar()
                    .map(|n| (u.get(n).map(|v| v - exact(domain.time_of(n), &domain.position(n)))).map(|e| e.abs()))
                    .collect::<Result<Vec<F>, _>>()?
                    .into_iter()
                    .fold(F::zero(), F::max);
                rows.push(row(h, Some(err)));
            }
        }
        None => {
            let finest = ladder
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite mesh sizes"))
                .map(|(i, _)| i)
                .ok_or(EstimateError::NoReference)?;
            let (fine_domain, fine_u) = &solved[finest];
            let key = |d: &StencilDomain<F>, n: &Node| -> Vec<i64> {
                let mut k = vec![(d.time_of(n).as_f64() * 1e9).round() as i64];
                k.extend(d.position(n).iter().map(|v| (v.as_f64() * 1e9).round() as i64));
                k
            };
            let reference: HashMap<Vec<i64>, F> = fine_domain
                .qbar()
                .filter_map(|n| fine_u.try_get(n).map(|v| (key(fine_domain, n), v)))
                .collect();
            for (i, (&h, (domain, u))) in ladder.iter().zip(&solved).enumerate() {
                if i == finest {
                    continue;
                }
                let mut err: Option<F> = None;
                for n in domain.qbar() {
                    if let (Some(r), Some(v)) = (reference.get(&key(domain, n)), u.try_get(n)) {
                        err = Some(err.map_or((v - *r).abs(), |e| e.max((v - *r).abs())));
                    }
                }
                rows.push(row(h, Some(err.ok_or(EstimateError::NoReference)?)));
            }
        }
    }
    let hs: Vec<F> = rows.iter().map(|r| r.h).collect();
    let errs: Vec<F> = rows.iter().filter_map(|r| r.error).collect();
    let order = if errs.len() == hs.len() { fit_order(&hs, &errs) } else { None };
    Ok(RateTable {
        rows,
        order,
        spread: None,
    })
}

fn row<F: Real>(h: F, error: Option<F>) -> RateRow<F> {
    RateRow {
        h,
        error,
        lhs: None,
        rhs: None,
        ratio: None,
    }
}

/// Settings shared by every rung of a boundedness study.
#[derive(Debug, Clone)]
pub struct StudySettings<F> {
    pub tau: F,
    pub solve: SolveConfig<F>,
    pub samples: usize,
    pub seed: u64,
    pub lambda_margin: F,
}

/// Solves at each mesh size, forms the estimate ratio, and reports the spread of the left sides.
pub fn boundedness_study<F: Real>(
    entry: &CatalogEntry<F>,
    theorem: Theorem,
    ladder: &[F],
    settings: &StudySettings<F>,
) -> Result<(RateTable<F>, Vec<EstimateReport<F>>), EstimateError> {
    if ladder.len() < 2 {
        return Err(EstimateError::LadderTooShort {
            need: 2,
            got: ladder.len(),
        });
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &h in ladder {
        let domain = entry.domain(h, settings.tau)?;
        let u = solve_entry(entry, &domain, &settings.solve)?;
        let u = extend_with_data(&u, &domain, |t, x| (entry.data)(t, x));
        let validation = validate_assumptions(
            &entry.problem,
            &domain,
            theorem.assumptions(),
            settings.samples,
            settings.seed,
        );
        let report = estimate_ratio(theorem, &u, &entry.problem, &domain, &validation, settings.lambda_margin)?;
        rows.push(RateRow {
            h,
            error: None,
            lhs: Some(report.lhs),
            rhs: Some(report.rhs),
            ratio: Some(report.ratio),
        });
        reports.push(report);
    }
    let lhs: Vec<F> = rows.iter().filter_map(|r| r.lhs).collect();
    let max = lhs.iter().copied().fold(F::neg_infinity(), F::max);
    let min = lhs.iter().copied().fold(F::infinity(), F::min);
    let spread = if min > F::zero() { Some(max / min) } else { None };
    Ok((
        RateTable {
            rows,
            order: None,
            spread,
        },
        reports,
    ))
}
