//! Difference operators on lattice functions.
//!
//! Every operator reads values through [`GridFunction::get`], which fails
//! outside the declared support: nothing is ever extrapolated.

mod identities;

use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{DirectionSet, Node, Point, TimeGrid};
use crate::scalar::Real;

pub use identities::{
    laplace_bound_slack, mixed_difference_bound_slack, product_rule_residuals, verify_identities,
    IdentityReport, ProductRuleResiduals,
};

#[derive(Debug, Error)]
pub enum CalcError {
    #[error("value requested outside the support at {0}")]
    OutsideSupport(Node),
    #[error("forward time difference requested at or after the horizon: {0}")]
    AtHorizon(Node),
    #[error("steps must share the same size for this identity")]
    StepMismatch,
    #[error("no point carries the full stencil")]
    NoSupport,
    #[error("grid function csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for CalcError {
    fn from(e: csv::Error) -> Self {
        CalcError::Csv(e.to_string())
    }
}

/// A displacement `η l` in base steps together with the divisor `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<F> {
    pub offset: Point,
    pub eta: F,
}

impl<F: Real> Step<F> {
    pub fn new(offset: impl IntoIterator<Item = i64>, eta: F) -> Self {
        Self {
            offset: offset.into_iter().collect(),
            eta,
        }
    }

    /// The step `(h_k, ℓ_k)` of a direction set.
    pub fn along(dirs: &DirectionSet<F>, k: i32) -> Self {
        Self {
            offset: dirs.offset(k),
            eta: dirs.step_size(k),
        }
    }

    /// `(η, -l)`.
    pub fn reversed(&self) -> Self {
        Self {
            offset: self.offset.iter().map(|v| -v).collect(),
            eta: self.eta,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.offset.iter().all(|&v| v == 0)
    }
}

/// Real values on a finite set of space-time nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridFunction<F> {
    values: HashMap<Node, F>,
}

impl<F: Real> GridFunction<F> {
    pub fn new() -> Self {
        Self {
            values: HashMap::new(),
        }
    }

    pub fn from_fn<'a>(nodes: impl IntoIterator<Item = &'a Node>, mut f: impl FnMut(&Node) -> F) -> Self {
        Self {
            values: nodes.into_iter().map(|n| (n.clone(), f(n))).collect(),
        }
    }

    pub fn insert(&mut self, node: Node, value: F) {
        self.values.insert(node, value);
    }

    pub fn get(&self, node: &Node) -> Result<F, CalcError> {
        self.values
            .get(node)
            .copied()
            .ok_or_else(|| CalcError::OutsideSupport(node.clone()))
    }

    pub fn try_get(&self, node: &Node) -> Option<F> {
        self.values.get(node).copied()
    }

    pub fn contains(&self, node: &Node) -> bool {
        self.values.contains_key(node)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entries in arbitrary order.
    pub fn iter(&self) -> impl Iterator<Item = (&Node, &F)> {
        self.values.iter()
    }

    /// Entries sorted by node.
    pub fn sorted(&self) -> Vec<(&Node, F)> {
        let mut out: Vec<_> = self.values.iter().map(|(n, v)| (n, *v)).collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            values: self.values.iter().map(|(n, v)| (n.clone(), f(*v))).collect(),
        }
    }

    /// Pointwise `self + scale · other` on the common support.
    pub fn axpy(&self, scale: F, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .filter_map(|(n, v)| other.try_get(n).map(|w| (n.clone(), *v + scale * w)))
                .collect(),
        }
    }

    /// Largest `|value|`, zero when empty.
    pub fn max_abs(&self) -> F {
        self.values
            .values()
            .fold(F::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Builds the function `x ↦ op(x)` at every node of the support where `op` succeeds.
    fn derived(&self, op: impl Fn(&Node) -> Result<F, CalcError> + Sync) -> Self {
        let nodes: Vec<&Node> = self.values.keys().collect();
        let values = nodes
            .par_iter()
            .filter_map(|n| op(n).ok().map(|v| ((*n).clone(), v)))
            .collect();
        Self { values }
    }

    /// Writes `time_index, x0.., value` rows sorted by node.
    pub fn write_csv<W: Write>(&self, writer: W, dim: usize) -> Result<(), CalcError> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["time_index".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.push("value".into());
        out.write_record(&header)?;
        for (node, value) in self.sorted() {
            let mut row = vec![node.level.to_string()];
            row.extend(node.x.iter().map(|v| v.to_string()));
            row.push(value.as_f64().to_string());
            out.write_record(&row)?;
        }
        out.flush().map_err(|e| CalcError::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, CalcError> {
        let mut input = csv::Reader::from_reader(reader);
        let width = input.headers()?.len();
        if width < 3 {
            return Err(CalcError::Csv("expected time_index, coordinates and value".into()));
        }
        let mut values = HashMap::new();
        for record in input.records() {
            let record = record?;
            let parse_int = |s: &str| {
                s.trim()
                    .parse::<i64>()
                    .map_err(|e| CalcError::Csv(format!("{s:?}: {e}")))
            };
            let level = parse_int(&record[0])?;
            let level = u32::try_from(level).map_err(|e| CalcError::Csv(e.to_string()))?;
            let x: Result<Point, _> = (1..width - 1).map(|i| parse_int(&record[i])).collect();
            let value: f64 = record[width - 1]
                .trim()
                .parse()
                .map_err(|e| CalcError::Csv(format!("{:?}: {e}", &record[width - 1])))?;
            values.insert(Node { level, x: x? }, F::of(value));
        }
        Ok(Self { values })
    }
}

/// `δ_{η,l} u(x) = (u(x + η l) - u(x)) / η`.
pub fn delta_at<F: Real>(u: &GridFunction<F>, node: &Node, step: &Step<F>) -> Result<F, CalcError> {
    Ok((u.get(&node.shifted(&step.offset))? - u.get(node)?) / step.eta)
}

/// `Δ_{η,l} u(x) = (u(x + η l) - 2u(x) + u(x - η l)) / η²`.
pub fn laplace_at<F: Real>(u: &GridFunction<F>, node: &Node, step: &Step<F>) -> Result<F, CalcError> {
    let up = u.get(&node.shifted(&step.offset))?;
    let down = u.get(&node.shifted(&step.reversed().offset))?;
    let here = u.get(node)?;
    Ok((up - (here + here) + down) / (step.eta * step.eta))
}

/// `δ^T_τ u(t, x) = (u(t + τ_T(t), x) - u(t, x)) / τ`; the divisor is always `τ`.
pub fn dtau_at<F: Real>(u: &GridFunction<F>, time: &TimeGrid<F>, node: &Node) -> Result<F, CalcError> {
    if node.level >= time.terminal_level() {
        return Err(CalcError::AtHorizon(node.clone()));
    }
    Ok((u.get(&node.at_level(node.level + 1))? - u.get(node)?) / time.tau())
}

/// `δ_{η_j,l_j} δ_{η_i,l_i} u(x)`.
pub fn delta2_at<F: Real>(
    u: &GridFunction<F>,
    node: &Node,
    first: &Step<F>,
    second: &Step<F>,
) -> Result<F, CalcError> {
    let moved = node.shifted(&second.offset);
    Ok((delta_at(u, &moved, first)? - delta_at(u, node, first)?) / second.eta)
}

pub fn delta<F: Real>(u: &GridFunction<F>, step: &Step<F>) -> GridFunction<F> {
    u.derived(|n| delta_at(u, n, step))
}

pub fn laplace_dir<F: Real>(u: &GridFunction<F>, step: &Step<F>) -> GridFunction<F> {
    u.derived(|n| laplace_at(u, n, step))
}

pub fn dtau_t<F: Real>(u: &GridFunction<F>, time: &TimeGrid<F>) -> GridFunction<F> {
    u.derived(|n| dtau_at(u, time, n))
}

pub fn delta2<F: Real>(u: &GridFunction<F>, first: &Step<F>, second: &Step<F>) -> GridFunction<F> {
    u.derived(|n| delta2_at(u, n, first, second))
}

/// Translation `T ψ(x) = ψ(x + offset)`, defined where the shifted node is in the support.
pub fn shift<F: Real>(u: &GridFunction<F>, offset: &[i64]) -> GridFunction<F> {
    u.derived(|n| u.get(&n.shifted(offset)))
}
