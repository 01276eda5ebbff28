//! Finite-difference schemes for Bellman equations on lattices generated by a
//! finite direction set, with an empirical harness for their a priori estimates.

pub mod bellman;
pub mod calculus;
pub mod decomp2d;
pub mod estimates;
pub mod lattice;
pub mod problem;
pub mod scalar;
pub mod solver;

pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type GridFunction64 = calculus::GridFunction<f64>;
pub type DirectionSet64 = lattice::DirectionSet<f64>;
pub type TimeGrid64 = lattice::TimeGrid<f64>;
pub type StencilDomain64 = lattice::StencilDomain<f64>;
pub type ControlProblem64 = problem::ControlProblem<f64>;
pub type SolveConfig64 = solver::SolveConfig<f64>;
pub type SolveReport64 = solver::SolveReport<f64>;
pub type Weights64 = estimates::Weights<f64>;

pub type GridFunction32 = calculus::GridFunction<f32>;
pub type DirectionSet32 = lattice::DirectionSet<f32>;
pub type TimeGrid32 = lattice::TimeGrid<f32>;
pub type StencilDomain32 = lattice::StencilDomain<f32>;
pub type ControlProblem32 = problem::ControlProblem<f32>;
pub type SolveConfig32 = solver::SolveConfig<f32>;
pub type SolveReport32 = solver::SolveReport<f32>;
pub type Weights32 = estimates::Weights<f32>;
