//! Built-in problems with their domains, data and declared assumption sets.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{Assumption, Constants, ControlProblem, FnCoefficients, FreeTerm, ProblemError};
use crate::lattice::{DirectionSet, DomainShape, LatticeError, StencilDomain, TimeGrid};
use crate::scalar::Real;

/// A function of `(t, x)`.
pub type Field<F> = Arc<dyn Fn(F, &[F]) -> F + Send + Sync>;

pub const NAMES: [&str; 8] = [
    "const1d",
    "affine1d",
    "twocontrol",
    "twocontrol-elliptic",
    "degenerate2d",
    "smooth2d8",
    "violation1d",
    "quasilinear1d",
];

/// A catalog problem together with everything needed to set it up.
#[derive(Clone)]
pub struct CatalogEntry<F> {
    pub problem: ControlProblem<F>,
    pub ells: Vec<Vec<i64>>,
    /// Extra direction `l` with `η = h`.
    pub extra: Option<Vec<i64>>,
    pub lower: Vec<F>,
    pub upper: Vec<F>,
    /// Data on the boundary and at the horizon.
    pub data: Field<F>,
    /// Exact solution of the continuous (or, for affine data, the discrete) problem.
    pub solution: Option<Field<F>>,
    /// Whether the solution is exact for the scheme itself at every mesh.
    pub scheme_exact: bool,
    pub elliptic: bool,
    pub declared: Vec<Assumption>,
}

impl<F: Real> CatalogEntry<F> {
    pub fn directions(&self, h: F) -> Result<DirectionSet<F>, LatticeError> {
        let dim = self.lower.len();
        let dirs = DirectionSet::new(dim, self.ells.clone(), h, self.problem.constants.h0)?;
        match &self.extra {
            Some(l) => dirs.with_extra(l.clone(), 1),
            None => Ok(dirs),
        }
    }

    /// Box domain covering the entry's extent at step `h`, all levels below the horizon.
    pub fn domain(&self, h: F, tau: F) -> Result<StencilDomain<F>, LatticeError> {
        let dirs = self.directions(h)?;
        let time = TimeGrid::new(tau, self.problem.constants.horizon)?;
        let to_units = |v: F| -> Result<i64, LatticeError> {
            let n = (v / h).round();
            if (n * h - v).abs() > F::of(1e-9) * (F::one() + v.abs()) {
                return Err(LatticeError::InvalidStep);
            }
            n.to_i64().ok_or(LatticeError::Overflow)
        };
        let lo = self.lower.iter().map(|&v| to_units(v)).collect::<Result<Vec<_>, _>>()?;
        let hi = self.upper.iter().map(|&v| to_units(v)).collect::<Result<Vec<_>, _>>()?;
        let top = if self.elliptic { 0 } else { time.terminal_level() - 1 };
        StencilDomain::build(dirs, time, &DomainShape::Box { levels: (0, top), lo, hi })
    }
}

pub fn get<F: Real>(name: &str) -> Result<CatalogEntry<F>, ProblemError> {
    match name {
        "const1d" => Ok(const1d(false)),
        "affine1d" => Ok(const1d(true)),
        "twocontrol" => Ok(twocontrol(false)),
        "twocontrol-elliptic" => Ok(twocontrol(true)),
        "degenerate2d" => Ok(degenerate2d()),
        "smooth2d8" => Ok(smooth2d8()),
        "violation1d" => Ok(violation1d()),
        "quasilinear1d" => Ok(quasilinear1d()),
        _ => Err(ProblemError::UnknownProblem(name.to_string())),
    }
}

fn v<F: Real>(x: f64) -> F {
    F::of(x)
}

fn field<F: Real>(f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Field<F> {
    Arc::new(move |t: F, x: &[F]| {
        let xs: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        F::of(f(t.as_f64(), &xs))
    })
}

fn xs<F: Real>(x: &[F]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

fn all_but(skip: &[Assumption]) -> Vec<Assumption> {
    Assumption::ALL.into_iter().filter(|a| !skip.contains(a)).collect()
}

const CONST1D_FREQ: f64 = PI / 2.0;

/// One control, `a = 1`, upwind drift `b_1 = 1`, `c = r = 1` on `[0, 1]`.
/// The smooth variant has solution `e^{-t} sin(πx/2) + x`; the affine one has `u = x`,
/// which the scheme reproduces exactly.
fn const1d<F: Real>(affine: bool) -> CatalogEntry<F> {
    let coeffs = FnCoefficients::new(1, 1)
        .with_r(|_, _| F::one())
        .with_a(|_, _, _, _, _| F::one())
        .with_b(|_, k, _, _| if k == 1 { F::one() } else { F::zero() })
        .with_c(|_, _, _| F::one())
        .with_f(move |_, _, _, t, x| {
            let (t, x) = (t.as_f64(), x[0].as_f64());
            if affine {
                F::of(x - 1.0)
            } else {
                let (e, w) = ((-t).exp(), CONST1D_FREQ);
                F::of(e * (w * x).sin() * (2.0 + 2.0 * w * w) - e * w * (w * x).cos() - 1.0 + x)
            }
        });
    let constants = Constants {
        horizon: F::one(),
        h0: F::one(),
        delta: F::one(),
        k0: F::one(),
        k1: v(2.0),
        k2: F::one(),
        k3: v(250.0),
        m: F::zero(),
        omega: v(0.01),
        c_struct: v(4.0),
    };
    let solution: Field<F> = if affine {
        field(|_, x| x[0])
    } else {
        field(|t, x| (-t).exp() * (CONST1D_FREQ * x[0]).sin() + x[0])
    };
    CatalogEntry {
        problem: ControlProblem::new(if affine { "affine1d" } else { "const1d" }, coeffs)
            .with_constants(constants),
        ells: vec![vec![1]],
        extra: None,
        lower: vec![F::zero()],
        upper: vec![F::one()],
        data: solution.clone(),
        solution: Some(solution),
        scheme_exact: affine,
        elliptic: false,
        declared: all_but(&[Assumption::NeighborSpanning]),
    }
}

/// Two controls on `[0, 1]` whose optimal choice switches inside the domain.
fn twocontrol<F: Real>(elliptic: bool) -> CatalogEntry<F> {
    let coeffs = FnCoefficients::new(1, 2)
        .with_r(move |_, _| if elliptic { F::zero() } else { F::one() })
        .with_a(|alpha, _, _, _, _| if alpha == 0 { F::one() } else { v(0.25) })
        .with_b(|alpha, k, _, _| match (alpha, k) {
            (0, 1) | (1, -1) => F::one(),
            _ => F::zero(),
        })
        .with_c(|alpha, _, _| if alpha == 0 { F::one() } else { v(1.5) })
        .with_f(|alpha, _, _, _, x| {
            let x = x[0].as_f64();
            F::of(if alpha == 0 { (PI * x).sin() } else { (PI * x).cos() + 0.5 })
        });
    let constants = Constants {
        horizon: F::one(),
        h0: F::one(),
        delta: v(0.25),
        k0: F::one(),
        k1: F::one(),
        k2: F::one(),
        k3: v(20.0),
        m: F::zero(),
        omega: v(0.01),
        c_struct: v(4.0),
    };
    let name = if elliptic { "twocontrol-elliptic" } else { "twocontrol" };
    CatalogEntry {
        problem: ControlProblem::new(name, coeffs).with_constants(constants),
        ells: vec![vec![1]],
        extra: None,
        lower: vec![F::zero()],
        upper: vec![F::one()],
        data: field(|t, x| x[0] * (1.0 - x[0]) + 0.5 * t),
        solution: None,
        scheme_exact: false,
        elliptic,
        declared: all_but(&[Assumption::NeighborSpanning]),
    }
}

fn degenerate2d_a(alpha: usize, k: usize, x: &[f64]) -> f64 {
    match (alpha, k) {
        (0, 1) => x[1] * x[1],
        (0, _) => 0.25 * x[0] * x[0],
        (1, 1) => 2.0 * x[1] * x[1],
        _ => 0.0,
    }
}

fn degenerate2d_b(alpha: usize, k: i32) -> f64 {
    match (alpha, k) {
        (0, 1) | (1, 2) => 0.5,
        _ => 0.0,
    }
}

fn degenerate2d_u(t: f64, x: &[f64]) -> f64 {
    (1.0 + 0.2 * t) * (x[0] + 0.5 * x[1]).sin() + 0.1 * t
}

/// Free term making `degenerate2d_u` solve the continuous equation, with control 1
/// strictly suboptimal.
fn degenerate2d_f(alpha: usize, t: f64, x: &[f64]) -> f64 {
    let amp = 1.0 + 0.2 * t;
    let s = x[0] + 0.5 * x[1];
    let u_t = 0.2 * s.sin() + 0.1;
    let first = [amp * s.cos(), 0.5 * amp * s.cos()];
    let second = [-amp * s.sin(), -0.25 * amp * s.sin()];
    let mut lu = -8.0 * degenerate2d_u(t, x);
    for k in 1..=2 {
        lu += 2.0 * degenerate2d_a(alpha, k, x) * second[k - 1];
        lu += (degenerate2d_b(alpha, k as i32) - degenerate2d_b(alpha, -(k as i32))) * first[k - 1];
    }
    let gap = if alpha == 0 { 0.0 } else { 0.3 + 0.1 * x[1].cos() };
    -(u_t + lu) - gap
}

/// Two controls on `[-1/2, 1/2]^2` with diffusion vanishing on the axes,
/// `√a` Lipschitz, and a large killing rate. Extra direction `l = e1 + e2`.
/// The data is a manufactured smooth solution.
fn degenerate2d<F: Real>() -> CatalogEntry<F> {
    let coeffs = FnCoefficients::new(2, 2)
        .with_r(|_, _| F::one())
        .with_a(|alpha, k, _, _, x| F::of(degenerate2d_a(alpha, k, &xs(x))))
        .with_b(|alpha, k, _, _| F::of(degenerate2d_b(alpha, k)))
        .with_c(|_, _, _| v(8.0))
        .with_f(|alpha, _, _, t, x| F::of(degenerate2d_f(alpha, t.as_f64(), &xs(x))));
    let constants = Constants {
        horizon: v(0.5),
        h0: F::one(),
        delta: v(0.5),
        k0: v(5.0),
        k1: F::one(),
        k2: F::one(),
        k3: v(40.0),
        m: F::zero(),
        omega: F::one(),
        c_struct: v(4.0),
    };
    CatalogEntry {
        problem: ControlProblem::new("degenerate2d", coeffs).with_constants(constants),
        ells: vec![vec![1, 0], vec![0, 1]],
        extra: Some(vec![1, 1]),
        lower: vec![v(-0.5), v(-0.5)],
        upper: vec![v(0.5), v(0.5)],
        data: field(degenerate2d_u),
        solution: Some(field(degenerate2d_u)),
        scheme_exact: false,
        elliptic: false,
        declared: vec![
            Assumption::Structure,
            Assumption::SqrtLipschitz,
            Assumption::UpwindBalance,
            Assumption::FreeTermGradient,
            Assumption::SecondDifferences,
        ],
    }
}

fn smooth2d8_a(alpha: usize, k: usize, x: &[f64]) -> f64 {
    match (alpha, k) {
        (0, 1) => 1.0 + 0.25 * (x[0] + x[1]).sin(),
        (0, 2) => 1.0 + 0.25 * x[0].cos(),
        (0, 3) => 0.5,
        (0, _) => 0.25 + 0.25 * x[0] * x[0],
        (_, 1) => 0.8,
        (_, 2) => 1.2 + 0.1 * x[1].sin(),
        (_, 3) => 0.25,
        _ => 0.5,
    }
}

fn smooth2d8_b(alpha: usize, k: i32) -> f64 {
    match (alpha, k) {
        (0, 1) => 0.5,
        (1, 2) => 0.3,
        _ => 0.0,
    }
}

fn smooth2d8_c(alpha: usize) -> f64 {
    if alpha == 0 {
        2.0
    } else {
        2.5
    }
}

fn smooth2d8_u(t: f64, x: &[f64]) -> f64 {
    (1.0 + 0.5 * t) * (2.0 * x[0] + x[1]).sin() + x[0] * x[0]
}

/// Free term making `smooth2d8_u` solve the continuous equation, with control 1
/// strictly suboptimal.
fn smooth2d8_f(alpha: usize, t: f64, x: &[f64]) -> f64 {
    let amp = 1.0 + 0.5 * t;
    let s = 2.0 * x[0] + x[1];
    let u_t = 0.5 * s.sin();
    let u1 = 2.0 * amp * s.cos() + 2.0 * x[0];
    let u2 = amp * s.cos();
    let u11 = -4.0 * amp * s.sin() + 2.0;
    let u12 = -2.0 * amp * s.sin();
    let u22 = -amp * s.sin();
    let second = [u11, u22, u11 + 2.0 * u12 + u22, u11 - 2.0 * u12 + u22];
    let first = [u1, u2, u1 + u2, u1 - u2];
    let mut lu = -smooth2d8_c(alpha) * smooth2d8_u(t, x);
    for k in 1..=4 {
        lu += 2.0 * smooth2d8_a(alpha, k, x) * second[k - 1];
        lu += (smooth2d8_b(alpha, k as i32) - smooth2d8_b(alpha, -(k as i32))) * first[k - 1];
    }
    let gap = if alpha == 0 { 0.0 } else { 0.2 + 0.1 * (3.0 * x[0]).sin() };
    -(u_t + lu) - gap
}

/// Two nondegenerate controls on `[0, 1]^2` over the eight-neighbor directions
/// `e1, e2, e1 + e2, e1 - e2`, with a manufactured smooth solution.
fn smooth2d8<F: Real>() -> CatalogEntry<F> {
    let coeffs = FnCoefficients::new(4, 2)
        .with_r(|_, _| F::one())
        .with_a(|alpha, k, _, _, x| F::of(smooth2d8_a(alpha, k, &xs(x))))
        .with_b(|alpha, k, _, _| F::of(smooth2d8_b(alpha, k)))
        .with_c(|alpha, _, _| F::of(smooth2d8_c(alpha)))
        .with_f(|alpha, _, _, t, x| F::of(smooth2d8_f(alpha, t.as_f64(), &xs(x))));
    let constants = Constants {
        horizon: v(0.5),
        h0: F::one(),
        delta: v(0.2),
        k0: v(2.0),
        k1: v(0.05),
        k2: F::one(),
        k3: v(400.0),
        m: F::zero(),
        omega: v(0.5),
        c_struct: v(4.0),
    };
    let solution = field(smooth2d8_u);
    CatalogEntry {
        problem: ControlProblem::new("smooth2d8", coeffs).with_constants(constants),
        ells: vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]],
        extra: None,
        lower: vec![F::zero(), F::zero()],
        upper: vec![F::one(), F::one()],
        data: solution.clone(),
        solution: Some(solution),
        scheme_exact: false,
        elliptic: false,
        declared: Assumption::ALL.to_vec(),
    }
}

/// `a = 1` with drift `b_1 = -3` against `h0 = 1`: the upwind balance fails and
/// the stencil at `h = h0` has a negative weight towards `+ℓ_1`.
fn violation1d<F: Real>() -> CatalogEntry<F> {
    let coeffs = FnCoefficients::new(1, 1)
        .with_r(|_, _| F::one())
        .with_a(|_, _, _, _, _| F::one())
        .with_b(|_, k, _, _| if k == 1 { v(-3.0) } else { F::zero() })
        .with_c(|_, _, _| F::one());
    let constants = Constants {
        horizon: F::one(),
        h0: F::one(),
        delta: F::one(),
        k0: v(3.0),
        k1: F::one(),
        k2: F::one(),
        k3: v(5.0),
        m: F::zero(),
        omega: v(0.01),
        c_struct: v(4.0),
    };
    CatalogEntry {
        problem: ControlProblem::new("violation1d", coeffs).with_constants(constants),
        ells: vec![vec![1]],
        extra: None,
        lower: vec![F::zero()],
        upper: vec![v(4.0)],
        data: field(|_, x| x[0]),
        solution: None,
        scheme_exact: false,
        elliptic: false,
        declared: all_but(&[Assumption::UpwindBalance, Assumption::NeighborSpanning]),
    }
}

/// Diffusion depending on the solution value and a free term depending on `(p, ψ)`.
fn quasilinear1d<F: Real>() -> CatalogEntry<F> {
    let coeffs = FnCoefficients::new(1, 1)
        .with_r(|_, _| F::one())
        .with_a(|_, _, psi, _, _| F::of(1.0 + 0.2 * psi.as_f64().sin()))
        .with_c(|_, _, _| F::one())
        .with_f(|_, p, psi, _, x| {
            let (p1, pm) = (p.get(1).as_f64(), p.get(-1).as_f64());
            F::of(0.1 * p1.tanh() - 0.1 * pm.tanh() - 0.2 * psi.as_f64() + (PI * x[0].as_f64()).sin())
        });
    let constants = Constants {
        horizon: F::one(),
        h0: F::one(),
        delta: v(0.8),
        k0: v(1.5),
        k1: v(0.3),
        k2: F::one(),
        k3: v(10.0),
        m: F::zero(),
        omega: v(0.25),
        c_struct: v(4.0),
    };
    CatalogEntry {
        problem: ControlProblem::new("quasilinear1d", coeffs)
            .with_constants(constants)
            .with_free_term(FreeTerm::Quasilinear)
            .with_a_depending_on_psi(true),
        ells: vec![vec![1]],
        extra: None,
        lower: vec![F::zero()],
        upper: vec![F::one()],
        data: field(|t, x| 0.25 * (PI * x[0]).sin() * (1.0 - 0.5 * t)),
        solution: None,
        scheme_exact: false,
        elliptic: false,
        declared: all_but(&[Assumption::SecondDifferences, Assumption::NeighborSpanning]),
    }
}
