//! Directions, the space-time mesh, and the finite domain sets of the scheme.
//!
//! Spatial points are stored exactly as integer vectors in units of the base
//! step `g = h / M`, where `h` is the mesh size and `M` a positive refinement
//! factor. The direction `ℓ_k` moves a point by `M ℓ_k` base steps (a physical
//! displacement of `h ℓ_k`); the optional extra direction `l` with step
//! `η = e g` moves it by `e l` base steps. Lattice membership, coincident
//! directions and neighbor lookups are therefore exact.
//!
//! Time levels are integers `n` with physical time `min(n τ, T)`. The last
//! level `N` (the least `n ≥ 1` with `n τ ≥ T`) is the horizon `T` itself.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::scalar::Real;

/// Integer lattice coordinates in units of the base step.
pub type Point = SmallVec<[i64; 4]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("spatial dimension must be at least 1")]
    ZeroDimension,
    #[error("direction list is empty")]
    NoDirections,
    #[error("vector {index} has {got} coordinates, expected {dim}")]
    DimensionMismatch { index: usize, got: usize, dim: usize },
    #[error("mesh steps must be positive and finite")]
    InvalidStep,
    #[error("refinement factor must be a positive integer, got {0}")]
    InvalidRefinement(i64),
    #[error("extra step of {eta_units} base steps is outside (0, h] for refinement {refine}")]
    ExtraStepOutOfRange { eta_units: i64, refine: i64 },
    #[error("time step and horizon must be positive and finite")]
    InvalidTimeGrid,
    #[error("domain is empty")]
    EmptyDomain,
    #[error("domain has no point at time level 0")]
    NoInitialLevel,
    #[error("point {0} is not on the lattice generated by the directions")]
    OffLattice(Node),
    #[error("point {node} is not strictly before the horizon (level {horizon})")]
    BeyondHorizon { node: Node, horizon: u32 },
    #[error("box corner {lo:?} exceeds {hi:?}")]
    InvertedBox { lo: Vec<i64>, hi: Vec<i64> },
    #[error("integer coordinate overflow")]
    Overflow,
}

/// Iterates the signed direction labels `1, -1, 2, -2, ..., d1, -d1`.
pub fn signed_indices(d1: usize) -> impl Iterator<Item = i32> + Clone {
    (1..=d1 as i32).flat_map(|k| [k, -k])
}

/// Values indexed by a signed direction label `k = ±1..±d1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByDirection<T> {
    values: Vec<T>,
}

impl<T> ByDirection<T> {
    #[inline]
    fn slot(k: i32) -> usize {
        debug_assert!(k != 0, "direction label 0 does not exist");
        2 * (k.unsigned_abs() as usize - 1) + usize::from(k < 0)
    }

    pub fn from_fn(d1: usize, mut f: impl FnMut(i32) -> T) -> Self {
        Self {
            values: signed_indices(d1).map(&mut f).collect(),
        }
    }

    pub fn d1(&self) -> usize {
        self.values.len() / 2
    }

    #[inline]
    pub fn get(&self, k: i32) -> &T {
        &self.values[Self::slot(k)]
    }

    #[inline]
    pub fn set(&mut self, k: i32, value: T) {
        let slot = Self::slot(k);
        self.values[slot] = value;
    }

    /// Pairs `(k, value)` in the order `1, -1, 2, -2, ...`.
    pub fn iter(&self) -> impl Iterator<Item = (i32, &T)> {
        signed_indices(self.d1()).zip(self.values.iter())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

impl<T: Clone> ByDirection<T> {
    pub fn filled(d1: usize, value: T) -> Self {
        Self {
            values: vec![value; 2 * d1],
        }
    }
}

/// The extra direction `l` with its step `η = eta_units · g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraDirection {
    pub l: Point,
    pub eta_units: i64,
}

/// The direction vectors `ℓ_k`, the mesh size and the optional extra direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionSet<F> {
    dim: usize,
    ells: Vec<Point>,
    h: F,
    h0: F,
    refine: i64,
    extra: Option<ExtraDirection>,
}

impl<F: Real> DirectionSet<F> {
    /// Directions `ℓ_1..ℓ_d1` (the negative labels are implied by `ℓ_{-k} = -ℓ_k`).
    pub fn new(dim: usize, ells: Vec<Vec<i64>>, h: F, h0: F) -> Result<Self, LatticeError> {
        if dim == 0 {
            return Err(LatticeError::ZeroDimension);
        }
        if ells.is_empty() {
            return Err(LatticeError::NoDirections);
        }
        for (index, ell) in ells.iter().enumerate() {
            if ell.len() != dim {
                return Err(LatticeError::DimensionMismatch {
                    index,
                    got: ell.len(),
                    dim,
                });
            }
        }
        if !(h > F::zero() && h.is_finite() && h0 > F::zero() && h0.is_finite()) {
            return Err(LatticeError::InvalidStep);
        }
        Ok(Self {
            dim,
            ells: ells.into_iter().map(Point::from_vec).collect(),
            h,
            h0,
            refine: 1,
            extra: None,
        })
    }

    /// Sets the number `M` of base steps per mesh step.
    pub fn with_refinement(mut self, refine: i64) -> Result<Self, LatticeError> {
        if refine < 1 {
            return Err(LatticeError::InvalidRefinement(refine));
        }
        if let Some(extra) = &self.extra {
            if extra.eta_units > refine {
                return Err(LatticeError::ExtraStepOutOfRange {
                    eta_units: extra.eta_units,
                    refine,
                });
            }
        }
        self.refine = refine;
        Ok(self)
    }

    /// Adds the extra direction `l` with step `η = eta_units · h / M`.
    pub fn with_extra(mut self, l: Vec<i64>, eta_units: i64) -> Result<Self, LatticeError> {
        if l.len() != self.dim {
            return Err(LatticeError::DimensionMismatch {
                index: self.ells.len(),
                got: l.len(),
                dim: self.dim,
            });
        }
        if eta_units < 1 || eta_units > self.refine {
            return Err(LatticeError::ExtraStepOutOfRange {
                eta_units,
                refine: self.refine,
            });
        }
        self.extra = Some(ExtraDirection {
            l: Point::from_vec(l),
            eta_units,
        });
        Ok(self)
    }

    /// Same directions on a different mesh size.
    pub fn with_h(&self, h: F) -> Result<Self, LatticeError> {
        if !(h > F::zero() && h.is_finite()) {
            return Err(LatticeError::InvalidStep);
        }
        let mut out = self.clone();
        out.h = h;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn d1(&self) -> usize {
        self.ells.len()
    }

    pub fn h(&self) -> F {
        self.h
    }

    pub fn h0(&self) -> F {
        self.h0
    }

    pub fn refine(&self) -> i64 {
        self.refine
    }

    pub fn extra(&self) -> Option<&ExtraDirection> {
        self.extra.as_ref()
    }

    /// Physical length of one base step.
    pub fn base_step(&self) -> F {
        self.h / F::of_i64(self.refine)
    }

    pub fn eta(&self) -> Option<F> {
        self.extra
            .as_ref()
            .map(|e| F::of_i64(e.eta_units) * self.base_step())
    }

    /// Largest label: `d1`, or `d1 + 1` when the extra direction is present.
    pub fn max_label(&self) -> usize {
        self.d1() + usize::from(self.extra.is_some())
    }

    /// The unscaled vector `ℓ_k` (or `±l` for `|k| = d1 + 1`).
    pub fn ell(&self, k: i32) -> Point {
        let abs = k.unsigned_abs() as usize;
        let base = if abs <= self.d1() {
            self.ells[abs - 1].clone()
        } else {
            self.extra
                .as_ref()
                .expect("label beyond d1 requires the extra direction")
                .l
                .clone()
        };
        if k < 0 {
            base.iter().map(|v| -v).collect()
        } else {
            base
        }
    }

    /// Displacement `h_k ℓ_k` in base steps.
    pub fn offset(&self, k: i32) -> Point {
        let abs = k.unsigned_abs() as usize;
        let scale = if abs <= self.d1() {
            self.refine
        } else {
            self.extra
                .as_ref()
                .expect("label beyond d1 requires the extra direction")
                .eta_units
        };
        self.ell(k).iter().map(|v| v * scale).collect()
    }

    /// Step size `h_k`: `h` for `|k| ≤ d1`, `η` for the extra direction.
    pub fn step_size(&self, k: i32) -> F {
        if (k.unsigned_abs() as usize) <= self.d1() {
            self.h
        } else {
            self.eta()
                .expect("label beyond d1 requires the extra direction")
        }
    }

    /// The list `Λ_0 = {h ℓ_k : |k| ≤ d1}` as base-step offsets, duplicates kept.
    pub fn lambda0(&self) -> Vec<Point> {
        signed_indices(self.d1()).map(|k| self.offset(k)).collect()
    }

    /// The list `Λ`: `Λ_0` plus `±η l` when the extra direction is present.
    pub fn lambda(&self) -> Vec<Point> {
        signed_indices(self.max_label())
            .map(|k| self.offset(k))
            .collect()
    }

    /// Physical coordinates `g · n` of base-step coordinates `n`.
    pub fn physical(&self, p: &[i64]) -> Vec<F> {
        let g = self.base_step();
        p.iter().map(|&v| g * F::of_i64(v)).collect()
    }

    /// Base-step coordinates of `Σ_j counts_j · (h_j ℓ_j)` over the generators
    /// `ℓ_1..ℓ_d1` (and `l` when present), with overflow checking.
    pub fn combine(&self, counts: &[i64]) -> Result<Point, LatticeError> {
        if counts.len() != self.max_label() {
            return Err(LatticeError::DimensionMismatch {
                index: 0,
                got: counts.len(),
                dim: self.max_label(),
            });
        }
        let mut out: Point = SmallVec::from_elem(0, self.dim);
        for (j, &n) in counts.iter().enumerate() {
            let gen = self.offset(j as i32 + 1);
            for (o, g) in out.iter_mut().zip(gen.iter()) {
                let term = g.checked_mul(n).ok_or(LatticeError::Overflow)?;
                *o = o.checked_add(term).ok_or(LatticeError::Overflow)?;
            }
        }
        Ok(out)
    }

    /// Physical position of `Σ_j counts_j · (h_j ℓ_j)`.
    pub fn lattice_point(&self, counts: &[i64]) -> Result<Vec<F>, LatticeError> {
        Ok(self.physical(&self.combine(counts)?))
    }

    /// Whether `p` lies in `Λ_∞`, the set of finite sums of elements of `Λ`.
    pub fn on_lattice(&self, p: &[i64]) -> bool {
        IntegerSpan::new(&self.lambda(), self.dim).contains(p)
    }
}

/// Row-echelon basis of the integer span of a family of vectors.
///
/// `Λ` is symmetric, so its finite sums form exactly this span.
#[derive(Debug, Clone)]
pub(crate) struct IntegerSpan {
    rows: Vec<Vec<i128>>,
    pivots: Vec<usize>,
}

impl IntegerSpan {
    pub(crate) fn new(generators: &[Point], dim: usize) -> Self {
        let mut rows: Vec<Vec<i128>> = generators
            .iter()
            .filter(|g| g.iter().any(|&v| v != 0))
            .map(|g| g.iter().map(|&v| v as i128).collect())
            .collect();
        let mut pivots = Vec::new();
        let mut top = 0;
        for col in 0..dim {
            loop {
                let smallest = (top..rows.len())
                    .filter(|&r| rows[r][col] != 0)
                    .min_by_key(|&r| rows[r][col].abs());
                let Some(best) = smallest else { break };
                rows.swap(top, best);
                let mut cleared = true;
                for r in top + 1..rows.len() {
                    let q = rows[r][col] / rows[top][col];
                    if q != 0 {
                        let (head, tail) = rows.split_at_mut(r);
                        for (x, y) in tail[0].iter_mut().zip(head[top].iter()) {
                            *x -= q * y;
                        }
                    }
                    if rows[r][col] != 0 {
                        cleared = false;
                    }
                }
                if cleared {
                    pivots.push(col);
                    top += 1;
                    break;
                }
            }
        }
        rows.truncate(top);
        Self { rows, pivots }
    }

    pub(crate) fn contains(&self, p: &[i64]) -> bool {
        let mut v: Vec<i128> = p.iter().map(|&x| x as i128).collect();
        for (row, &col) in self.rows.iter().zip(&self.pivots) {
            if v[col] % row[col] != 0 {
                return false;
            }
            let q = v[col] / row[col];
            for (x, y) in v.iter_mut().zip(row) {
                *x -= q * y;
            }
        }
        v.iter().all(|&x| x == 0)
    }
}

/// Time step, horizon and the derived number of levels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimeGrid<F> {
    tau: F,
    horizon: F,
    steps: u32,
}

impl<F: Real> TimeGrid<F> {
    pub fn new(tau: F, horizon: F) -> Result<Self, LatticeError> {
        if !(tau > F::zero() && tau.is_finite() && horizon > F::zero() && horizon.is_finite()) {
            return Err(LatticeError::InvalidTimeGrid);
        }
        // Ratios within rounding of an integer count as exact multiples.
        let ratio = (horizon / tau).as_f64();
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        };
        if steps > u32::MAX as f64 {
            return Err(LatticeError::InvalidTimeGrid);
        }
        Ok(Self {
            tau,
            horizon,
            steps: (steps as u32).max(1),
        })
    }

    pub fn tau(&self) -> F {
        self.tau
    }

    pub fn horizon(&self) -> F {
        self.horizon
    }

    /// The level `N` whose time is the horizon.
    pub fn terminal_level(&self) -> u32 {
        self.steps
    }

    /// `T'`, the least `n τ ≥ T`.
    pub fn t_prime(&self) -> F {
        F::of_i64(self.steps as i64) * self.tau
    }

    /// Physical time `min(n τ, T)`.
    pub fn time(&self, level: u32) -> F {
        if level >= self.steps {
            self.horizon
        } else {
            F::of_i64(level as i64) * self.tau
        }
    }

    /// `τ_T(t) = min(τ, (T - t)^+)` at a level.
    pub fn step_to_next(&self, level: u32) -> F {
        if level >= self.steps {
            F::zero()
        } else {
            self.time(level + 1) - self.time(level)
        }
    }
}

/// A space-time lattice node: time level and base-step coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub level: u32,
    pub x: Point,
}

impl Node {
    pub fn new(level: u32, x: impl IntoIterator<Item = i64>) -> Self {
        Self {
            level,
            x: x.into_iter().collect(),
        }
    }

    /// Same level, spatial coordinates moved by `offset`.
    #[inline]
    pub fn shifted(&self, offset: &[i64]) -> Node {
        Node {
            level: self.level,
            x: self.x.iter().zip(offset).map(|(a, b)| a + b).collect(),
        }
    }

    #[inline]
    pub fn at_level(&self, level: u32) -> Node {
        Node {
            level,
            x: self.x.clone(),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};", self.level)?;
        for (i, v) in self.x.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, " {v}")?;
        }
        write!(f, ")")
    }
}

/// How the finite set `Q` is given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainShape {
    /// Explicit node list.
    Points(Vec<Node>),
    /// Levels `levels.0..=levels.1` times the base-step box `lo..=hi`.
    Box {
        levels: (u32, u32),
        lo: Vec<i64>,
        hi: Vec<i64>,
    },
}

/// Where a node sits relative to the domain sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    /// In both `Q°_1` and `Q°_2`.
    Interior2,
    /// In `Q°_1` but on the fat boundary `∂_2 Q`.
    Interior1,
    /// In `Q`, on both `∂_1 Q` and `∂_2 Q`.
    Boundary1,
    /// In `Q°_2` but on `∂_1 Q`: only the one-step stencil leaves the set.
    Boundary2Only,
    /// Added in `Q̄` at the horizon.
    Terminal,
    Outside,
}

const IN_Q: u8 = 1;
const INTERIOR1: u8 = 2;
const INTERIOR2: u8 = 4;

/// The finite set `Q` with its closure, interiors and boundaries.
#[derive(Debug, Clone)]
pub struct StencilDomain<F> {
    directions: DirectionSet<F>,
    time: TimeGrid<F>,
    nodes: Vec<Node>,
    index: HashMap<Node, usize>,
    flags: Vec<u8>,
}

impl<F: Real> StencilDomain<F> {
    pub fn build(
        directions: DirectionSet<F>,
        time: TimeGrid<F>,
        shape: &DomainShape,
    ) -> Result<Self, LatticeError> {
        let dim = directions.dim();
        let q: BTreeSet<Node> = match shape {
            DomainShape::Points(points) => points.iter().cloned().collect(),
            DomainShape::Box { levels, lo, hi } => box_nodes(dim, *levels, lo, hi)?,
        };
        if q.is_empty() {
            return Err(LatticeError::EmptyDomain);
        }
        let span = IntegerSpan::new(&directions.lambda(), dim);
        let horizon = time.terminal_level();
        for node in &q {
            if node.x.len() != dim {
                return Err(LatticeError::DimensionMismatch {
                    index: 0,
                    got: node.x.len(),
                    dim,
                });
            }
            if node.level >= horizon {
                return Err(LatticeError::BeyondHorizon {
                    node: node.clone(),
                    horizon,
                });
            }
            if !span.contains(&node.x) {
                return Err(LatticeError::OffLattice(node.clone()));
            }
        }
        if !q.iter().any(|n| n.level == 0) {
            return Err(LatticeError::NoInitialLevel);
        }

        let mut closure = q.clone();
        for node in &q {
            if node.level + 1 == horizon {
                closure.insert(node.at_level(horizon));
            }
        }
        let nodes: Vec<Node> = closure.into_iter().collect();
        let index: HashMap<Node, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();

        let lambda = directions.lambda();
        let lambda0 = directions.lambda0();
        let mut double: Vec<Point> = Vec::with_capacity(lambda0.len() * lambda0.len());
        for y in &lambda0 {
            for z in &lambda0 {
                double.push(y.iter().zip(z).map(|(a, b)| a + b).collect());
            }
        }

        let in_q = |n: &Node| q.contains(n);
        let flags = nodes
            .iter()
            .map(|node| {
                if !in_q(node) {
                    return 0;
                }
                let mut flag = IN_Q;
                let has_successor = index.contains_key(&node.at_level(node.level + 1));
                if has_successor {
                    if lambda.iter().all(|o| in_q(&node.shifted(o))) {
                        flag |= INTERIOR1;
                    }
                    if double.iter().all(|o| in_q(&node.shifted(o))) {
                        flag |= INTERIOR2;
                    }
                }
                flag
            })
            .collect();

        Ok(Self {
            directions,
            time,
            nodes,
            index,
            flags,
        })
    }

    pub fn directions(&self) -> &DirectionSet<F> {
        &self.directions
    }

    pub fn time(&self) -> &TimeGrid<F> {
        &self.time
    }

    /// All nodes of `Q̄` in lexicographic (level, coordinates) order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn index_of(&self, node: &Node) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn contains(&self, node: &Node) -> bool {
        self.index.contains_key(node)
    }

    fn flag(&self, node: &Node) -> u8 {
        self.index.get(node).map_or(0, |&i| self.flags[i])
    }

    pub fn in_q(&self, node: &Node) -> bool {
        self.flag(node) & IN_Q != 0
    }

    pub fn is_interior1(&self, node: &Node) -> bool {
        self.flag(node) & INTERIOR1 != 0
    }

    pub fn is_interior2(&self, node: &Node) -> bool {
        self.flag(node) & INTERIOR2 != 0
    }

    fn select(&self, pred: impl Fn(u8) -> bool) -> impl Iterator<Item = &Node> {
        self.nodes
            .iter()
            .zip(&self.flags)
            .filter(move |(_, &f)| pred(f))
            .map(|(n, _)| n)
    }

    /// `Q`.
    pub fn q(&self) -> impl Iterator<Item = &Node> {
        self.select(|f| f & IN_Q != 0)
    }

    /// `Q̄`.
    pub fn qbar(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter()
    }

    /// `Q|_0`, the points of `Q` at time zero.
    pub fn q0(&self) -> impl Iterator<Item = &Node> {
        self.q().filter(|n| n.level == 0)
    }

    /// `Q°_1`, where the scheme is imposed.
    pub fn interior1(&self) -> impl Iterator<Item = &Node> {
        self.select(|f| f & INTERIOR1 != 0)
    }

    /// `∂_1 Q = Q̄ \ Q°_1`.
    pub fn boundary1(&self) -> impl Iterator<Item = &Node> {
        self.select(|f| f & INTERIOR1 == 0)
    }

    /// `Q°_2`.
    pub fn interior2(&self) -> impl Iterator<Item = &Node> {
        self.select(|f| f & INTERIOR2 != 0)
    }

    /// `∂_2 Q = Q \ Q°_2`.
    pub fn boundary2(&self) -> impl Iterator<Item = &Node> {
        self.select(|f| f & IN_Q != 0 && f & INTERIOR2 == 0)
    }

    /// `Q̄ \ Q`, the horizon points.
    pub fn terminal(&self) -> impl Iterator<Item = &Node> {
        self.select(|f| f & IN_Q == 0)
    }

    pub fn classify(&self, node: &Node) -> Class {
        if !self.contains(node) {
            return Class::Outside;
        }
        let f = self.flag(node);
        match (f & IN_Q != 0, f & INTERIOR1 != 0, f & INTERIOR2 != 0) {
            (false, _, _) => Class::Terminal,
            (true, true, true) => Class::Interior2,
            (true, true, false) => Class::Interior1,
            (true, false, true) => Class::Boundary2Only,
            (true, false, false) => Class::Boundary1,
        }
    }

    /// Physical spatial coordinates of a node.
    pub fn position(&self, node: &Node) -> Vec<F> {
        self.directions.physical(&node.x)
    }

    /// Physical time of a node.
    pub fn time_of(&self, node: &Node) -> F {
        self.time.time(node.level)
    }

    /// Nodes of `Q̄` at one level.
    pub fn level_nodes(&self, level: u32) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.level == level)
    }

    /// Highest level present in `Q`.
    pub fn max_q_level(&self) -> u32 {
        self.q().map(|n| n.level).max().unwrap_or(0)
    }

    /// Set sizes `(|Q̄|, |Q|, |Q°_1|, |∂_1 Q|, |Q°_2|, |∂_2 Q|)`.
    pub fn cardinalities(&self) -> [usize; 6] {
        [
            self.nodes.len(),
            self.q().count(),
            self.interior1().count(),
            self.boundary1().count(),
            self.interior2().count(),
            self.boundary2().count(),
        ]
    }
}

fn box_nodes(
    dim: usize,
    levels: (u32, u32),
    lo: &[i64],
    hi: &[i64],
) -> Result<BTreeSet<Node>, LatticeError> {
    for (index, v) in [lo, hi].iter().enumerate() {
        if v.len() != dim {
            return Err(LatticeError::DimensionMismatch {
                index,
                got: v.len(),
                dim,
            });
        }
    }
    if levels.0 > levels.1 || lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Err(LatticeError::InvertedBox {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        });
    }
    let mut out = BTreeSet::new();
    let mut cursor: Vec<i64> = lo.to_vec();
    loop {
        for level in levels.0..=levels.1 {
            out.insert(Node::new(level, cursor.iter().copied()));
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return Ok(out);
            }
            if cursor[axis] < hi[axis] {
                cursor[axis] += 1;
                break;
            }
            cursor[axis] = lo[axis];
            axis += 1;
        }
    }
}
