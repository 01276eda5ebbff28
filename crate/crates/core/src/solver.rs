//! Backward-in-time solution of the discrete Bellman equation.
//!
//! Each time level is a finite system `max_α [N_α(x) - D_α(x) u(x) + Σ_y w_α(x, y) u(x + y)] = 0`
//! over the unknown nodes, where `w_α ≥ 0` are the off-center weights of
//! `L^α_h + c^α`, `D_α = r^α / τ + c^α - w_α(x, 0)` and `N_α` collects the
//! successor value, the free term and known neighbors. The unknowns are the
//! nodes of `Q°_1` (parabolic) or the spatial interior of `Q|_0` (stationary).
//! Free-term arguments `(p, ψ)` and a `ψ`-dependent diffusion are frozen at the
//! previous iterate and refreshed in an outer loop.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellman::{check_max_principle, weights_from, BellmanError};
use crate::calculus::GridFunction;
use crate::lattice::{signed_indices, ByDirection, Node, StencilDomain};
use crate::problem::{eval_coeffs, eval_free, ControlProblem, FreeTerm, ProblemError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no data at {0}")]
    MissingData(Node),
    #[error("singular level system at {0}")]
    Singular(Node),
    #[error("level {level} did not converge: residual {residual} after {iterations} iterations")]
    NotConverged { level: u32, iterations: usize, residual: f64 },
    #[error("stationary solve needs r = 0, control {0} has r ≠ 0")]
    NotStationary(usize),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Bellman(#[from] BellmanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PolicyIteration,
    ValueIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolver {
    /// Banded LU without pivoting; the systems are strictly diagonally dominant.
    Direct,
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig<F> {
    pub method: Method,
    pub linear: LinearSolver,
    /// Bound on the scheme residual at every unknown.
    pub tol: F,
    /// Policy updates per frozen system.
    pub max_outer: usize,
    /// Sweeps of value iteration or of Gauss-Seidel.
    pub max_inner: usize,
    /// Refreshes of the frozen free-term and diffusion arguments.
    pub picard_max: usize,
    /// Relaxation `θ` of value iteration.
    pub damping: F,
}

impl<F: Real> Default for SolveConfig<F> {
    fn default() -> Self {
        Self {
            method: Method::PolicyIteration,
            linear: LinearSolver::Direct,
            tol: F::of(1e-9),
            max_outer: 100,
            max_inner: 100_000,
            picard_max: 200,
            damping: F::one(),
        }
    }
}

impl<F: Real> SolveConfig<F> {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > F::zero()) {
            return Err(SolveError::InvalidConfig("tol must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.picard_max == 0 {
            return Err(SolveError::InvalidConfig("iteration caps must be at least 1".into()));
        }
        if !(self.damping > F::zero() && self.damping <= F::one()) {
            return Err(SolveError::InvalidConfig("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats<F> {
    pub level: u32,
    pub unknowns: usize,
    /// Refreshes of the frozen arguments.
    pub picard: usize,
    /// Policy updates or value-iteration sweeps, summed over refreshes.
    pub inner: usize,
    pub residual: F,
}

#[derive(Debug, Clone)]
pub struct SolveReport<F> {
    pub u: GridFunction<F>,
    /// Maximizing control at every unknown.
    pub controls: BTreeMap<Node, usize>,
    /// Levels in the order solved (top level first).
    pub levels: Vec<LevelStats<F>>,
    pub max_residual: F,
    pub converged: bool,
    /// Every assembled stencil respected the maximum principle with `D > Σ w`.
    pub monotone: bool,
}

/// One control's row: `N - D u_i + Σ w_j u_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row<F> {
    pub diag: F,
    pub rhs: F,
    pub couplings: Vec<(usize, F)>,
}

impl<F: Real> Row<F> {
    pub fn value(&self, i: usize, u: &[F]) -> F {
        self.couplings
            .iter()
            .fold(self.rhs - self.diag * u[i], |acc, &(j, w)| acc + w * u[j])
    }
}

/// The frozen system of one level: `rows[i][α]` for unknown `i`.
#[derive(Debug, Clone)]
pub struct LevelSystem<F> {
    pub rows: Vec<Vec<Row<F>>>,
    pub monotone: bool,
}

impl<F: Real> LevelSystem<F> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Best control and value at unknown `i`; lowest index wins ties.
    pub fn best(&self, i: usize, u: &[F]) -> (usize, F) {
        let mut best = (0, self.rows[i][0].value(i, u));
        for (alpha, row) in self.rows[i].iter().enumerate().skip(1) {
            let v = row.value(i, u);
            if v > best.1 {
                best = (alpha, v);
            }
        }
        best
    }

    pub fn residual(&self, u: &[F]) -> F {
        (0..self.len()).fold(F::zero(), |m, i| m.max(self.best(i, u).1.abs()))
    }

    /// Sup-norm Lipschitz bound of one damped value-iteration sweep:
    /// `max (1 - θ (D - Σ w) / D)` over rows and controls, where `D - Σ w`
    /// is at least `r/τ + c` for a monotone row.
    pub fn sweep_contraction(&self, theta: F) -> F {
        self.rows
            .iter()
            .flatten()
            .map(|row| {
                let spread: F = row.couplings.iter().map(|&(_, w)| w.abs()).sum();
                (F::one() - theta) + theta * spread / row.diag
            })
            .fold(F::zero(), F::max)
    }

    /// One damped Gauss-Seidel sweep of `u_i ← max_α N_α / D_α`; errors with the row index
    /// of a nonpositive diagonal.
    pub fn sweep(&self, u: &mut [F], theta: F) -> Result<(), usize> {
        value_sweep(self, u, theta)
    }

    fn bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, rs)| rs.iter().flat_map(move |r| r.couplings.iter().map(move |&(j, _)| i.abs_diff(j))))
            .max()
            .unwrap_or(0)
    }

    /// Solves the linear system of a fixed policy.
    pub fn solve_policy(
        &self,
        policy: &[usize],
        u: &mut [F],
        linear: LinearSolver,
        tol: F,
        max_sweeps: usize,
    ) -> Result<usize, usize> {
        match linear {
            LinearSolver::Direct => {
                let n = self.len();
                let bw = self.bandwidth();
                let mut band = Band::new(n, bw);
                let mut b = vec![F::zero(); n];
                for i in 0..n {
                    let row = &self.rows[i][policy[i]];
                    *band.at(i, i) = row.diag;
                    for &(j, w) in &row.couplings {
                        *band.at(i, j) = *band.at(i, j) - w;
                    }
                    b[i] = row.rhs;
                }
                let x = band.solve(b)?;
                u[..n].copy_from_slice(&x);
                Ok(1)
            }
            LinearSolver::GaussSeidel => {
                for sweep in 1..=max_sweeps {
                    for i in 0..self.len() {
                        let row = &self.rows[i][policy[i]];
                        if !(row.diag > F::zero()) {
                            return Err(i);
                        }
                        let s = row.couplings.iter().fold(row.rhs, |acc, &(j, w)| acc + w * u[j]);
                        u[i] = s / row.diag;
                    }
                    let res = (0..self.len()).fold(F::zero(), |m, i| m.max(self.rows[i][policy[i]].value(i, u).abs()));
                    if res <= tol {
                        return Ok(sweep);
                    }
                }
                Ok(max_sweeps)
            }
        }
    }
}

/// Dense band storage for `|i - j| ≤ bw`.
struct Band<F> {
    n: usize,
    bw: usize,
    data: Vec<F>,
}

impl<F: Real> Band<F> {
    fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![F::zero(); n * (2 * bw + 1)],
        }
    }

    fn at(&mut self, i: usize, j: usize) -> &mut F {
        &mut self.data[i * (2 * self.bw + 1) + (j + self.bw - i)]
    }

    fn solve(mut self, mut b: Vec<F>) -> Result<Vec<F>, usize> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = *self.at(k, k);
            if !(pivot.abs() > F::min_positive_value()) {
                return Err(k);
            }
            let end = n.min(k + bw + 1);
            for i in (k + 1)..end {
                let l = *self.at(i, k) / pivot;
                if l == F::zero() {
                    continue;
                }
                *self.at(i, k) = l;
                for j in (k + 1)..end {
                    let v = *self.at(k, j);
                    let slot = self.at(i, j);
                    *slot = *slot - l * v;
                }
                b[i] = b[i] - l * b[k];
            }
        }
        let mut x = vec![F::zero(); n];
        for i in (0..n).rev() {
            let end = n.min(i + bw + 1);
            let mut s = b[i];
            for (j, xj) in x.iter().enumerate().take(end).skip(i + 1) {
                s = s - *self.at(i, j) * *xj;
            }
            x[i] = s / *self.at(i, i);
        }
        Ok(x)
    }
}

/// Iterate of one level: values on every node of the level and the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelState<F> {
    /// Unknown values first, in unknown order; the system indexes into this.
    pub values: Vec<F>,
    pub policy: Vec<usize>,
}

/// One Howard step: solve for the current policy, then improve it.
/// Returns whether the policy changed.
pub fn policy_iteration_step<F: Real>(
    sys: &LevelSystem<F>,
    state: &mut LevelState<F>,
    linear: LinearSolver,
    tol: F,
    max_sweeps: usize,
) -> Result<bool, usize> {
    sys.solve_policy(&state.policy, &mut state.values, linear, tol, max_sweeps)?;
    Ok(improve_policy(sys, state))
}

fn improve_policy<F: Real>(sys: &LevelSystem<F>, state: &mut LevelState<F>) -> bool {
    let mut changed = false;
    for i in 0..sys.len() {
        let current = sys.rows[i][state.policy[i]].value(i, &state.values);
        let (alpha, best) = sys.best(i, &state.values);
        // Switch only on a real improvement, so rounding cannot cycle.
        let slack = F::of(1e-13) * (F::one() + sys.rows[i][alpha].diag * state.values[i].abs());
        if alpha != state.policy[i] && best > current + slack {
            state.policy[i] = alpha;
            changed = true;
        }
    }
    changed
}

fn value_sweep<F: Real>(sys: &LevelSystem<F>, u: &mut [F], theta: F) -> Result<(), usize> {
    for i in 0..sys.len() {
        let mut target = F::neg_infinity();
        for row in &sys.rows[i] {
            if !(row.diag > F::zero()) {
                return Err(i);
            }
            let s = row.couplings.iter().fold(row.rhs, |acc, &(j, w)| acc + w * u[j]);
            target = target.max(s / row.diag);
        }
        u[i] = u[i] + theta * (target - u[i]);
    }
    Ok(())
}

fn initial_policy<F: Real>(sys: &LevelSystem<F>, u: &[F]) -> Vec<usize> {
    (0..sys.len()).map(|i| sys.best(i, u).0).collect()
}

/// Layout of one level: unknowns first, then known nodes, with a lookup.
struct Layout<'a> {
    nodes: Vec<&'a Node>,
    unknowns: usize,
    index: HashMap<&'a Node, usize>,
}

impl<'a> Layout<'a> {
    fn new(unknown: Vec<&'a Node>, known: Vec<&'a Node>) -> Self {
        let unknowns = unknown.len();
        let nodes: Vec<&Node> = unknown.into_iter().chain(known).collect();
        let index = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        Self { nodes, unknowns, index }
    }
}

/// Builds `LevelSystem` with arguments frozen at `frozen` (indexed like the layout).
fn assemble<F: Real>(
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    layout: &Layout,
    frozen: &[F],
    successor: &[F],
    stationary: bool,
) -> Result<LevelSystem<F>, SolveError> {
    let dirs = domain.directions();
    let d1 = dirs.d1();
    let h = dirs.h();
    let tau = domain.time().tau();
    let rows: Vec<Result<(Vec<Row<F>>, bool), SolveError>> = (0..layout.unknowns)
        .into_par_iter()
        .map(|i| {
            let node = layout.nodes[i];
            let t = domain.time_of(node);
            let x = domain.position(node);
            let psi = frozen[i];
            let neighbor = |k: i32| -> Result<usize, SolveError> {
                let y = node.shifted(&dirs.offset(k));
                layout.index.get(&y).copied().ok_or(SolveError::MissingData(y))
            };
            let mut p = ByDirection::filled(d1, F::zero());
            for k in signed_indices(d1) {
                p.set(k, (frozen[neighbor(k)?] - psi) / h);
            }
            let mut monotone = true;
            let mut out = Vec::with_capacity(problem.controls());
            for alpha in 0..problem.controls() {
                let co = eval_coeffs(problem, alpha, t, &x, psi)?;
                let f = eval_free(problem, alpha, &p, psi, t, &x)?;
                let w = weights_from(dirs, &co.a, &co.b);
                let time_rate = if stationary { F::zero() } else { co.r / tau };
                let diag = time_rate + co.c - w.center();
                monotone &= check_max_principle(&w).passed() && time_rate + co.c > F::zero();
                let mut rhs = f + time_rate * successor[i];
                let mut couplings = Vec::new();
                for (y, wy) in w.neighbors() {
                    let target = node.shifted(y);
                    let j = *layout
                        .index
                        .get(&target)
                        .ok_or_else(|| SolveError::MissingData(target.clone()))?;
                    if j < layout.unknowns {
                        couplings.push((j, wy));
                    } else {
                        rhs = rhs + wy * frozen[j];
                    }
                }
                out.push(Row { diag, rhs, couplings });
            }
            Ok((out, monotone))
        })
        .collect();
    let mut sys = LevelSystem {
        rows: Vec::with_capacity(rows.len()),
        monotone: true,
    };
    for r in rows {
        let (row, mono) = r?;
        sys.monotone &= mono;
        sys.rows.push(row);
    }
    Ok(sys)
}

/// Solves one frozen system starting from `u`; returns iterations and the policy.
fn solve_frozen<F: Real>(
    sys: &LevelSystem<F>,
    u: &mut [F],
    cfg: &SolveConfig<F>,
    nodes: &[&Node],
) -> Result<(usize, Vec<usize>), SolveError> {
    let singular = |i: usize| SolveError::Singular(nodes[i].clone());
    match cfg.method {
        Method::PolicyIteration => {
            let mut state = LevelState {
                values: u.to_vec(),
                policy: initial_policy(sys, u),
            };
            let mut steps = 0;
            loop {
                steps += 1;
                let changed = policy_iteration_step(sys, &mut state, cfg.linear, cfg.tol * F::of(0.1), cfg.max_inner)
                    .map_err(singular)?;
                if !changed || steps >= cfg.max_outer {
                    break;
                }
            }
            u.copy_from_slice(&state.values[..u.len()]);
            Ok((steps, state.policy))
        }
        Method::ValueIteration => {
            let mut sweeps = 0;
            while sweeps < cfg.max_inner {
                sweeps += 1;
                value_sweep(sys, u, cfg.damping).map_err(singular)?;
                if sys.residual(u) <= cfg.tol {
                    break;
                }
            }
            Ok((sweeps, initial_policy(sys, u)))
        }
    }
}

fn needs_refresh<F: Real>(problem: &ControlProblem<F>) -> bool {
    problem.free_term != FreeTerm::Independent || problem.a_depends_on_psi
}

struct LevelOutcome<F> {
    values: Vec<F>,
    policy: Vec<usize>,
    stats: LevelStats<F>,
    monotone: bool,
}

fn solve_level<F: Real>(
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    layout: &Layout,
    mut values: Vec<F>,
    successor: &[F],
    stationary: bool,
    cfg: &SolveConfig<F>,
    level: u32,
) -> Result<LevelOutcome<F>, SolveError> {
    let n = layout.unknowns;
    let refresh = needs_refresh(problem);
    let mut inner = 0;
    let mut picard = 0;
    let mut monotone = true;
    loop {
        picard += 1;
        let sys = assemble(problem, domain, layout, &values, successor, stationary)?;
        monotone &= sys.monotone;
        let residual = sys.residual(&values[..n]);
        let done_refreshing = !refresh || picard > cfg.picard_max;
        if residual <= cfg.tol || (done_refreshing && picard > 1) {
            let policy = initial_policy(&sys, &values[..n]);
            let stats = LevelStats {
                level,
                unknowns: n,
                picard: picard - 1,
                inner,
                residual,
            };
            if residual > cfg.tol {
                return Err(SolveError::NotConverged {
                    level,
                    iterations: inner,
                    residual: residual.as_f64(),
                });
            }
            return Ok(LevelOutcome {
                values,
                policy,
                stats,
                monotone,
            });
        }
        let (iters, _) = solve_frozen(&sys, &mut values[..n], cfg, &layout.nodes)?;
        inner += iters;
    }
}

/// Samples `g` on every node of `Q̄`.
pub fn sample_data<F: Real>(domain: &StencilDomain<F>, g: impl Fn(F, &[F]) -> F) -> GridFunction<F> {
    GridFunction::from_fn(domain.nodes(), |n| g(domain.time_of(n), &domain.position(n)))
}

/// Solves the scheme on `Q°_1` backward from the horizon, with `data` on `∂_1 Q`.
pub fn solve_parabolic<F: Real>(
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    data: &GridFunction<F>,
    cfg: &SolveConfig<F>,
) -> Result<SolveReport<F>, SolveError> {
    cfg.validate()?;
    let mut u = GridFunction::new();
    let mut controls = BTreeMap::new();
    let mut levels = Vec::new();
    let mut monotone = true;
    let mut max_residual = F::zero();
    let top = domain.time().terminal_level();
    for node in domain.level_nodes(top) {
        u.insert(node.clone(), data.get(node).map_err(|_| SolveError::MissingData(node.clone()))?);
    }
    for level in (0..top).rev() {
        let (unknown, known): (Vec<&Node>, Vec<&Node>) =
            domain.level_nodes(level).partition(|n| domain.is_interior1(n));
        if known.is_empty() && unknown.is_empty() {
            continue;
        }
        let layout = Layout::new(unknown, known);
        let mut values = Vec::with_capacity(layout.nodes.len());
        let mut successor = Vec::with_capacity(layout.unknowns);
        for (i, node) in layout.nodes.iter().enumerate() {
            if i < layout.unknowns {
                let next = u
                    .get(&node.at_level(level + 1))
                    .map_err(|_| SolveError::MissingData(node.at_level(level + 1)))?;
                successor.push(next);
                values.push(next);
            } else {
                values.push(data.get(node).map_err(|_| SolveError::MissingData((*node).clone()))?);
            }
        }
        let outcome = solve_level(problem, domain, &layout, values, &successor, false, cfg, level)?;
        monotone &= outcome.monotone;
        max_residual = max_residual.max(outcome.stats.residual);
        for (i, node) in layout.nodes.iter().enumerate() {
            u.insert((*node).clone(), outcome.values[i]);
            if i < layout.unknowns {
                controls.insert((*node).clone(), outcome.policy[i]);
            }
        }
        levels.push(outcome.stats);
    }
    Ok(SolveReport {
        u,
        controls,
        levels,
        max_residual,
        converged: true,
        monotone,
    })
}

/// Unknowns of the stationary problem: nodes of `Q|_0` whose `Λ`-neighbors lie in `Q|_0`.
pub fn stationary_unknowns<F: Real>(domain: &StencilDomain<F>) -> Vec<&Node> {
    let lambda = domain.directions().lambda();
    domain
        .q0()
        .filter(|n| lambda.iter().all(|o| domain.in_q(&n.shifted(o))))
        .collect()
}

/// Solves the stationary equation (`r ≡ 0`) on the level-0 slice.
pub fn solve_elliptic<F: Real>(
    problem: &ControlProblem<F>,
    domain: &StencilDomain<F>,
    data: &GridFunction<F>,
    cfg: &SolveConfig<F>,
) -> Result<SolveReport<F>, SolveError> {
    cfg.validate()?;
    for alpha in 0..problem.controls() {
        if problem.coefficients.r(alpha, F::zero())? != F::zero() {
            return Err(SolveError::NotStationary(alpha));
        }
    }
    let unknown = stationary_unknowns(domain);
    let known: Vec<&Node> = domain.q0().filter(|n| !unknown.contains(n)).collect();
    let layout = Layout::new(unknown, known);
    let mut values = Vec::with_capacity(layout.nodes.len());
    for (i, node) in layout.nodes.iter().enumerate() {
        let v = data.get(node);
        values.push(if i < layout.unknowns {
            v.unwrap_or_else(|_| F::zero())
        } else {
            v.map_err(|_| SolveError::MissingData((*node).clone()))?
        });
    }
    let successor = vec![F::zero(); layout.unknowns];
    let outcome = solve_level(problem, domain, &layout, values, &successor, true, cfg, 0)?;
    let mut u = GridFunction::new();
    let mut controls = BTreeMap::new();
    for (i, node) in layout.nodes.iter().enumerate() {
        u.insert((*node).clone(), outcome.values[i]);
        if i < layout.unknowns {
            controls.insert((*node).clone(), outcome.policy[i]);
        }
    }
    Ok(SolveReport {
        u,
        controls,
        max_residual: outcome.stats.residual,
        levels: vec![outcome.stats],
        converged: true,
        monotone: outcome.monotone,
    })
}
