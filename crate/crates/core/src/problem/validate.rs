//! Machine checks of the structural assumptions.
//!
//! Conditions on derivatives are probed with difference quotients at sampled
//! points of `Q` and are reported as sampled. Conditions on the direction list
//! and on the constants alone are decided exactly.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eval_coeffs, eval_free, ControlProblem, FreeTerm, ProblemError};
use crate::lattice::{signed_indices, ByDirection, DirectionSet, Node, StencilDomain};
use crate::scalar::Real;

/// The checkable assumptions, named by what they require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assumption {
    /// `r, a ≥ 0`, `|ℓ_k| ≤ K0`, `b` Lipschitz with `K0`, `c` with `K3`.
    Structure,
    /// `|δ_{η,l} a_k| ≤ K0 (√a_k + η)`.
    SqrtLipschitz,
    /// `a_k ≥ h0 b_k^-`.
    UpwindBalance,
    /// `|D_{p_k} f| ≤ K0 √a_k`, `|D_ψ f| ≤ K0`, `|D_x f| ≤ K3`.
    FreeTermGradient,
    /// Uniform nondegeneracy and quadratic growth of a quasilinear free term.
    QuasilinearGrowth,
    /// `C K1 (1 + K1) ω ≤ δ`.
    SmallOscillation,
    /// `f` independent of `(p, ψ)` and bounded second differences of the data.
    SecondDifferences,
    /// `δ ≤ sup_α a_k ≤ K0` and `r, |b|, |c|, |f| ≤ K3`.
    BoundedCoefficients,
    /// Every `ℓ_k` beyond the first `d0` is a sum of two of the first `d0`.
    NeighborSpanning,
}

impl Assumption {
    pub const ALL: [Assumption; 9] = [
        Assumption::Structure,
        Assumption::SqrtLipschitz,
        Assumption::UpwindBalance,
        Assumption::FreeTermGradient,
        Assumption::QuasilinearGrowth,
        Assumption::SmallOscillation,
        Assumption::SecondDifferences,
        Assumption::BoundedCoefficients,
        Assumption::NeighborSpanning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Assumption::Structure => "structure",
            Assumption::SqrtLipschitz => "sqrt-lipschitz",
            Assumption::UpwindBalance => "upwind-balance",
            Assumption::FreeTermGradient => "free-term-gradient",
            Assumption::QuasilinearGrowth => "quasilinear-growth",
            Assumption::SmallOscillation => "small-oscillation",
            Assumption::SecondDifferences => "second-differences",
            Assumption::BoundedCoefficients => "bounded-coefficients",
            Assumption::NeighborSpanning => "neighbor-spanning",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Assumption {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Assumption::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown assumption {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

/// Outcome for one assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check<F> {
    pub assumption: Assumption,
    pub status: Status,
    /// True when the verdict rests on sampled difference quotients.
    pub sampled: bool,
    pub evaluations: usize,
    /// Smallest `bound - quantity` seen; negative means violated.
    pub worst_margin: Option<F>,
    pub witness: Option<String>,
    /// Direction label of the worst witness, when it has one.
    pub label: Option<i32>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport<F> {
    pub problem: String,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<Check<F>>,
}

impl<F: Real> ValidationReport<F> {
    pub fn get(&self, assumption: Assumption) -> Option<&Check<F>> {
        self.checks.iter().find(|c| c.assumption == assumption)
    }

    pub fn passed(&self) -> Vec<Assumption> {
        self.checks
            .iter()
            .filter(|c| c.status == Status::Pass)
            .map(|c| c.assumption)
            .collect()
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }
}

/// Witness of the spanning condition: `ℓ_k = ℓ_i + ℓ_j` for each `k > d0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanningSplit {
    pub d0: usize,
    pub pairs: Vec<(i32, i32, i32)>,
}

impl fmt::Display for SpanningSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d0 = {}", self.d0)?;
        for (k, i, j) in &self.pairs {
            write!(f, "; l{k} = l{i} + l{j}")?;
        }
        Ok(())
    }
}

/// Smallest `d0 < d1` for which every `ℓ_k`, `d0 < k ≤ d1`, splits as
/// `l1 + l2` with `l1, l2` among `ℓ_{±1..±d0}`, `l1 ≠ l2` and `l1 ≠ -l2`.
pub fn spanning_split<F: Real>(dirs: &DirectionSet<F>) -> Option<SpanningSplit> {
    let d1 = dirs.d1();
    (1..d1).find_map(|d0| {
        let small: Vec<i32> = signed_indices(d0).collect();
        let mut pairs = Vec::new();
        for k in (d0 + 1)..=d1 {
            let target = dirs.ell(k as i32);
            let found = small.iter().find_map(|&i| {
                let li = dirs.ell(i);
                small.iter().find_map(|&j| {
                    let lj = dirs.ell(j);
                    let neg_j: Vec<i64> = lj.iter().map(|v| -v).collect();
                    let sum: Vec<i64> = li.iter().zip(&lj).map(|(a, b)| a + b).collect();
                    (li != lj && li.as_slice() != neg_j.as_slice() && sum.as_slice() == target.as_slice())
                        .then_some((k as i32, i, j))
                })
            });
            pairs.push(found?);
        }
        Some(SpanningSplit { d0, pairs })
    })
}

/// One observation `bound - quantity`.
#[derive(Debug, Clone)]
struct Obs<F> {
    margin: F,
    tol: F,
    what: &'static str,
    alpha: usize,
    label: Option<i32>,
    step: Option<F>,
}

fn obs<F: Real>(bound: F, value: F, what: &'static str, alpha: usize, label: Option<i32>, step: Option<F>) -> Obs<F> {
    let margin = if value.is_finite() && bound.is_finite() {
        bound - value
    } else {
        F::neg_infinity()
    };
    Obs {
        margin,
        tol: F::of(1e-9) * (F::one() + bound.abs()),
        what,
        alpha,
        label,
        step,
    }
}

/// A random probe: a node of `Q`, a unit direction and unit-free draws.
#[derive(Debug, Clone)]
struct Draw {
    node: usize,
    l: Vec<f64>,
    psi: f64,
    p: Vec<f64>,
    p_dir: Vec<f64>,
    radius: f64,
    psi2: f64,
    p2: Vec<f64>,
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn draws(count: usize, nodes: usize, dim: usize, d1: usize, seed: u64) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Draw {
            node: rng.gen_range(0..nodes),
            l: unit(&mut rng, dim),
            psi: rng.gen_range(-1.0..1.0),
            p: (0..2 * d1).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            p_dir: unit(&mut rng, 2 * d1),
            radius: rng.gen_range(0.0..1.0),
            psi2: rng.gen_range(-1.0..1.0),
            p2: (0..2 * d1).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect()
}

struct Ctx<'a, F> {
    problem: &'a ControlProblem<F>,
    dirs: &'a DirectionSet<F>,
    steps: [F; 3],
}

fn to_p<F: Real>(d1: usize, values: &[f64], scale: F) -> ByDirection<F> {
    let mut p = ByDirection::filled(d1, F::zero());
    for (slot, k) in signed_indices(d1).enumerate() {
        p.set(k, F::of(values[slot]) * scale);
    }
    p
}

fn p_norm<F: Real>(p: &ByDirection<F>) -> F {
    p.values().iter().map(|&v| v * v).sum::<F>().sqrt()
}

fn moved<F: Real>(x: &[F], l: &[F], s: F) -> Vec<F> {
    x.iter().zip(l).map(|(&a, &b)| a + s * b).collect()
}

fn bumped<F: Real>(p: &ByDirection<F>, k: i32, eps: F) -> ByDirection<F> {
    let mut q = p.clone();
    q.set(k, *p.get(k) + eps);
    q
}

type Probe<F> = Result<Vec<Obs<F>>, ProblemError>;

fn structure<F: Real>(ctx: &Ctx<F>, t: F, x: &[F], l: &[F], d: &Draw) -> Probe<F> {
    let c = ctx.problem.constants;
    let d1 = ctx.problem.d1();
    let psi = F::of(d.psi) * c.k1.max(F::one());
    let mut out = Vec::new();
    for alpha in 0..ctx.problem.controls() {
        let base = eval_coeffs(ctx.problem, alpha, t, x, psi)?;
        out.push(obs(base.r, F::zero(), "r >= 0", alpha, None, None));
        for k in 1..=d1 as i32 {
            out.push(obs(*base.a.get(k), F::zero(), "a_k >= 0", alpha, Some(k), None));
        }
        for &eta in &ctx.steps {
            let shifted = eval_coeffs(ctx.problem, alpha, t, &moved(x, l, eta), psi)?;
            for k in signed_indices(d1) {
                let q = ((*shifted.b.get(k) - *base.b.get(k)) / eta).abs();
                out.push(obs(c.k0, q, "|delta b_k| <= K0", alpha, Some(k), Some(eta)));
            }
            let q = ((shifted.c - base.c) / eta).abs();
            out.push(obs(c.k3, q, "|delta c| <= K3", alpha, None, Some(eta)));
        }
    }
    Ok(out)
}

fn sqrt_lipschitz<F: Real>(ctx: &Ctx<F>, t: F, x: &[F], l: &[F], d: &Draw) -> Probe<F> {
    let c = ctx.problem.constants;
    let psi = F::of(d.psi) * c.k1.max(F::one());
    let mut out = Vec::new();
    for alpha in 0..ctx.problem.controls() {
        let base = eval_coeffs(ctx.problem, alpha, t, x, psi)?;
        for &eta in &ctx.steps {
            let shifted = eval_coeffs(ctx.problem, alpha, t, &moved(x, l, eta), psi)?;
            for k in 1..=ctx.problem.d1() as i32 {
                let a0 = *base.a.get(k);
                let q = ((*shifted.a.get(k) - a0) / eta).abs();
                let bound = c.k0 * (a0.max(F::zero()).sqrt() + eta);
                out.push(obs(bound, q, "|delta a_k| <= K0 (sqrt a_k + eta)", alpha, Some(k), Some(eta)));
            }
        }
    }
    Ok(out)
}

fn upwind<F: Real>(ctx: &Ctx<F>, t: F, x: &[F], d: &Draw) -> Probe<F> {
    let c = ctx.problem.constants;
    let psi = F::of(d.psi) * c.k1.max(F::one());
    let mut out = Vec::new();
    for alpha in 0..ctx.problem.controls() {
        let co = eval_coeffs(ctx.problem, alpha, t, x, psi)?;
        for k in signed_indices(ctx.problem.d1()) {
            let need = c.h0 * co.b.get(k).neg_part();
            out.push(obs(*co.a.get(k), need, "a_k >= h0 b_k^-", alpha, Some(k), None));
        }
    }
    Ok(out)
}

fn free_gradient<F: Real>(ctx: &Ctx<F>, t: F, x: &[F], l: &[F], d: &Draw) -> Probe<F> {
    let c = ctx.problem.constants;
    let d1 = ctx.problem.d1();
    let psi = F::of(d.psi) * c.k1.max(F::one());
    let p = to_p(d1, &d.p, F::of(2.0) * c.k2.max(F::one()));
    let mut out = Vec::new();
    for alpha in 0..ctx.problem.controls() {
        let co = eval_coeffs(ctx.problem, alpha, t, x, psi)?;
        let f0 = eval_free(ctx.problem, alpha, &p, psi, t, x)?;
        out.push(obs(F::zero(), if f0.is_finite() { F::zero() } else { F::infinity() }, "f finite", alpha, None, None));
        for &eps in &ctx.steps {
            for k in signed_indices(d1) {
                let f1 = eval_free(ctx.problem, alpha, &bumped(&p, k, eps), psi, t, x)?;
                let bound = c.k0 * co.a.get(k).max(F::zero()).sqrt();
                out.push(obs(bound, ((f1 - f0) / eps).abs(), "|D_p_k f| <= K0 sqrt a_k", alpha, Some(k), Some(eps)));
            }
            let f1 = eval_free(ctx.problem, alpha, &p, psi + eps, t, x)?;
            out.push(obs(c.k0, ((f1 - f0) / eps).abs(), "|D_psi f| <= K0", alpha, None, Some(eps)));
            let f1 = eval_free(ctx.problem, alpha, &p, psi, t, &moved(x, l, eps))?;
            out.push(obs(c.k3, ((f1 - f0) / eps).abs(), "|D_x f| <= K3", alpha, None, Some(eps)));
        }
    }
    Ok(out)
}

fn quasilinear<F: Real>(ctx: &Ctx<F>, t: F, x: &[F], l: &[F], d: &Draw) -> Probe<F> {
    let c = ctx.problem.constants;
    let d1 = ctx.problem.d1();
    let mut out = Vec::new();
    let psi = F::of(d.psi) * c.k1;
    // Large |p| for the growth bound.
    let big = c.k2 + F::of(4.0 * d.radius) * c.k2.max(F::one());
    let p_big = to_p(d1, &d.p_dir, big);
    let p = to_p(d1, &d.p, F::of(2.0) * c.k2.max(F::one()));
    let pn = p_norm(&p);
    for alpha in 0..ctx.problem.controls() {
        let co = eval_coeffs(ctx.problem, alpha, t, x, psi)?;
        out.push(obs(co.c, -c.k3, "c >= -K3", alpha, None, None));
        for k in 1..=d1 as i32 {
            out.push(obs(*co.a.get(k), c.delta, "a_k >= delta", alpha, Some(k), None));
        }
        let fb = eval_free(ctx.problem, alpha, &p_big, psi, t, x)?;
        let pb = p_norm(&p_big);
        out.push(obs(c.omega * pb * pb + c.k3, fb.abs(), "|f| <= omega |p|^2 + K3", alpha, None, None));

        let f0 = eval_free(ctx.problem, alpha, &p, psi, t, x)?;
        for &eps in &ctx.steps {
            let moved_x = moved(x, l, eps);
            let shifted = eval_coeffs(ctx.problem, alpha, t, &moved_x, psi)?;
            for k in 1..=d1 as i32 {
                let q = ((*shifted.a.get(k) - *co.a.get(k)) / eps).abs();
                out.push(obs(c.k3, q, "|D_x a_k| <= K3", alpha, Some(k), Some(eps)));
            }
            let up = eval_coeffs(ctx.problem, alpha, t, x, psi + eps)?;
            for k in 1..=d1 as i32 {
                let q = ((*up.a.get(k) - *co.a.get(k)) / eps).abs();
                out.push(obs(c.omega, q, "|D_psi a_k| <= omega", alpha, Some(k), Some(eps)));
            }
            for k in signed_indices(d1) {
                let f1 = eval_free(ctx.problem, alpha, &bumped(&p, k, eps), psi, t, x)?;
                let bound = c.omega * (pn + eps) + c.k3;
                out.push(obs(bound, ((f1 - f0) / eps).abs(), "|D_p f| <= omega |p| + K3", alpha, Some(k), Some(eps)));
            }
            if eps <= c.k1 + c.k1 {
                // Keep both ψ and ψ + ε inside [-K1, K1].
                let lo = -c.k1 + (c.k1 + c.k1 - eps) * F::of(0.5 * (d.psi2 + 1.0));
                let g0 = eval_free(ctx.problem, alpha, &p, lo, t, x)?;
                let g1 = eval_free(ctx.problem, alpha, &p, lo + eps, t, x)?;
                out.push(obs(c.omega * pn * pn + c.k3, ((g1 - g0) / eps).abs(), "|D_psi f| <= omega |p|^2 + K3", alpha, None, Some(eps)));
            }
            let f1 = eval_free(ctx.problem, alpha, &p, psi, t, &moved_x)?;
            out.push(obs(c.omega * pn * pn * pn + c.k3, ((f1 - f0) / eps).abs(), "|D_x f| <= omega |p|^3 + K3", alpha, None, Some(eps)));
        }
    }
    Ok(out)
}

fn second_differences<F: Real>(ctx: &Ctx<F>, t: F, x: &[F], d: &Draw) -> Probe<F> {
    let c = ctx.problem.constants;
    let d1 = ctx.problem.d1();
    let dirs = ctx.dirs;
    let g = dirs.base_step();
    let labels: Vec<i32> = signed_indices(dirs.max_label()).collect();
    let disp: Vec<Vec<F>> = labels
        .iter()
        .map(|&k| dirs.offset(k).iter().map(|&v| F::of_i64(v) * g).collect())
        .collect();
    let sizes: Vec<F> = labels.iter().map(|&k| dirs.step_size(k)).collect();
    let zero_p = ByDirection::filled(d1, F::zero());
    let mut out = Vec::new();

    for alpha in 0..ctx.problem.controls() {
        let p1 = to_p(d1, &d.p, c.k2.max(F::one()));
        let p2 = to_p(d1, &d.p2, c.k2.max(F::one()));
        let f1 = eval_free(ctx.problem, alpha, &p1, F::of(d.psi), t, x)?;
        let f2 = eval_free(ctx.problem, alpha, &p2, F::of(d.psi2), t, x)?;
        out.push(obs(F::zero(), (f1 - f2).abs(), "f independent of (p, psi)", alpha, None, None));

        // Values of (b_{±k}, c, f, a_k) at a point.
        let values = |y: &[F]| -> Result<Vec<F>, ProblemError> {
            let co = eval_coeffs(ctx.problem, alpha, t, y, F::zero())?;
            let mut v: Vec<F> = co.b.values().to_vec();
            v.push(co.c);
            v.push(eval_free(ctx.problem, alpha, &zero_p, F::zero(), t, y)?);
            v.extend((1..=d1 as i32).map(|k| *co.a.get(k)));
            Ok(v)
        };
        let n_b = 2 * d1;
        let v0 = values(x)?;
        let single: Vec<Vec<F>> = disp.iter().map(|s| values(&moved(x, s, F::one()))).collect::<Result<_, _>>()?;
        for (i, si) in labels.iter().enumerate() {
            let q = ((single[i][n_b + 1] - v0[n_b + 1]) / sizes[i]).abs();
            out.push(obs(c.k3, q, "|delta_i f| <= K3", alpha, Some(*si), Some(sizes[i])));
            for (j, _) in labels.iter().enumerate().skip(i) {
                let corner: Vec<F> = x.iter().zip(&disp[i]).zip(&disp[j]).map(|((&a, &b), &e)| a + b + e).collect();
                let vij = values(&corner)?;
                let den = sizes[i] * sizes[j];
                for (n, (((&w, &wi), &wj), &w0)) in vij.iter().zip(&single[i]).zip(&single[j]).zip(&v0).enumerate() {
                    let q = ((w - wi - wj + w0) / den).abs();
                    if n < n_b + 2 {
                        let what = if n < n_b {
                            "|delta_j delta_i b_k| <= K3"
                        } else if n == n_b {
                            "|delta_j delta_i c| <= K3"
                        } else {
                            "|delta_j delta_i f| <= K3"
                        };
                        out.push(obs(c.k3, q, what, alpha, Some(*si), Some(sizes[i])));
                    } else {
                        let bound = c.k0 + c.k3 * w0.max(F::zero()).sqrt();
                        out.push(obs(bound, q, "|delta_j delta_i a_k| <= K0 + K3 sqrt a_k", alpha, Some(*si), Some(sizes[i])));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn bounded<F: Real>(ctx: &Ctx<F>, t: F, x: &[F], d: &Draw) -> Probe<F> {
    let c = ctx.problem.constants;
    let d1 = ctx.problem.d1();
    let psi = F::of(d.psi) * c.k1.max(F::one());
    let p = to_p(d1, &d.p, F::of(2.0) * c.k2.max(F::one()));
    let mut out = Vec::new();
    let mut sup = vec![F::neg_infinity(); d1];
    for alpha in 0..ctx.problem.controls() {
        let co = eval_coeffs(ctx.problem, alpha, t, x, psi)?;
        for k in 1..=d1 {
            sup[k - 1] = sup[k - 1].max(*co.a.get(k as i32));
        }
        out.push(obs(c.k3, co.r, "r <= K3", alpha, None, None));
        for k in signed_indices(d1) {
            out.push(obs(c.k3, co.b.get(k).abs(), "|b_k| <= K3", alpha, Some(k), None));
        }
        out.push(obs(c.k3, co.c.abs(), "|c| <= K3", alpha, None, None));
        let f = eval_free(ctx.problem, alpha, &p, psi, t, x)?;
        out.push(obs(c.k3, f.abs(), "|f| <= K3", alpha, None, None));
    }
    for (k, &s) in sup.iter().enumerate() {
        out.push(obs(s, c.delta, "sup_alpha a_k >= delta", 0, Some(k as i32 + 1), None));
        out.push(obs(c.k0, s, "sup_alpha a_k <= K0", 0, Some(k as i32 + 1), None));
    }
    Ok(out)
}

fn exact<F: Real>(assumption: Assumption, margin: F, witness: Option<String>, notes: Vec<String>) -> Check<F> {
    let tol = F::of(1e-12);
    Check {
        assumption,
        status: if margin >= -tol { Status::Pass } else { Status::Fail },
        sampled: false,
        evaluations: 1,
        worst_margin: Some(margin),
        witness,
        label: None,
        notes,
    }
}

fn sampled<F: Real>(
    assumption: Assumption,
    ctx: &Ctx<F>,
    domain: &StencilDomain<F>,
    q: &[&Node],
    draws: &[Draw],
    probe: impl Fn(&Ctx<F>, F, &[F], &[F], &Draw) -> Probe<F> + Sync,
) -> Check<F> {
    let results: Vec<Probe<F>> = draws
        .par_iter()
        .map(|d| {
            let node = q[d.node];
            let t = domain.time_of(node);
            let x = domain.position(node);
            let l: Vec<F> = d.l.iter().map(|&v| F::of(v)).collect();
            probe(ctx, t, &x, &l, d)
        })
        .collect();
    let mut check = Check {
        assumption,
        status: Status::Pass,
        sampled: true,
        evaluations: 0,
        worst_margin: None,
        witness: None,
        label: None,
        notes: Vec::new(),
    };
    let mut failed = false;
    for (d, result) in draws.iter().zip(results) {
        let observations = match result {
            Ok(o) => o,
            Err(e) => {
                check.status = Status::NotApplicable;
                check.notes.push(format!("coefficient evaluation failed: {e}"));
                return check;
            }
        };
        for o in observations {
            check.evaluations += 1;
            failed |= o.margin < -o.tol;
            if check.worst_margin.is_none_or(|w| o.margin < w) {
                check.worst_margin = Some(o.margin);
                check.label = o.label;
                let mut text = format!("{} alpha={}", q[d.node], o.alpha);
                if let Some(k) = o.label {
                    text.push_str(&format!(" k={k}"));
                }
                if let Some(s) = o.step {
                    text.push_str(&format!(" step={s}"));
                }
                text.push_str(&format!(": {}", o.what));
                check.witness = Some(text);
            }
        }
    }
    if failed {
        check.status = Status::Fail;
    }
    check
}

/// Checks each assumption in `which` at `samples` random nodes of `Q`.
pub fn validate_assumptions<F: Real>(
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    which: &[Assumption],
    samples: usize,
    seed: u64,
) -> ValidationReport<F> {
    let dirs = domain.directions();
    let h = dirs.h();
    let ctx = Ctx {
        problem,
        dirs,
        steps: [h, h / F::of(4.0), h / F::of(16.0)],
    };
    let q: Vec<&Node> = domain.q().collect();
    let draws = draws(samples.max(1), q.len(), dirs.dim(), problem.d1(), seed);
    let c = problem.constants;
    let finite_a = "continuity in the control is vacuous for a finite control list".to_string();

    let checks = which
        .iter()
        .map(|&a| match a {
            Assumption::Structure => {
                let mut check = sampled(a, &ctx, domain, &q, &draws, structure);
                check.notes.push(finite_a.clone());
                for k in 1..=dirs.d1() as i32 {
                    let len = dirs.ell(k).iter().map(|&v| F::of_i64(v * v)).sum::<F>().sqrt();
                    let margin = c.k0 - len;
                    if margin < -F::of(1e-12) {
                        check.status = Status::Fail;
                    }
                    if check.worst_margin.is_none_or(|w| margin < w) {
                        check.worst_margin = Some(margin);
                        check.label = Some(k);
                        check.witness = Some(format!("|l{k}| <= K0"));
                    }
                }
                check
            }
            Assumption::SqrtLipschitz => sampled(a, &ctx, domain, &q, &draws, sqrt_lipschitz),
            Assumption::UpwindBalance => {
                sampled(a, &ctx, domain, &q, &draws, |ctx, t, x, _, d| upwind(ctx, t, x, d))
            }
            Assumption::FreeTermGradient => {
                let mut check = sampled(a, &ctx, domain, &q, &draws, free_gradient);
                check.notes.push(finite_a.clone());
                check
            }
            Assumption::QuasilinearGrowth => sampled(a, &ctx, domain, &q, &draws, quasilinear),
            Assumption::SmallOscillation => {
                let margin = c.delta - c.c_struct * c.k1 * (F::one() + c.k1) * c.omega;
                exact(a, margin, Some("C K1 (1 + K1) omega <= delta".into()), vec![])
            }
            Assumption::SecondDifferences => {
                let mut check =
                    sampled(a, &ctx, domain, &q, &draws, |ctx, t, x, _, d| second_differences(ctx, t, x, d));
                if problem.free_term != FreeTerm::Independent {
                    check.status = Status::Fail;
                    check.notes.push("free term declared dependent on (p, psi)".into());
                }
                check
            }
            Assumption::BoundedCoefficients => {
                sampled(a, &ctx, domain, &q, &draws, |ctx, t, x, _, d| bounded(ctx, t, x, d))
            }
            Assumption::NeighborSpanning => match spanning_split(dirs) {
                Some(split) => exact(a, F::zero(), Some(split.to_string()), vec![]),
                None => exact(
                    a,
                    -F::one(),
                    Some(format!("no d0 < {} splits the remaining directions", dirs.d1())),
                    vec![],
                ),
            },
        })
        .collect();

    ValidationReport {
        problem: problem.name.clone(),
        samples: samples.max(1),
        seed,
        checks,
    }
}
