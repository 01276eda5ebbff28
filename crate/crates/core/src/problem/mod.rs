//! Control-indexed coefficient families and their structural constants.

pub mod catalog;
mod tabulated;
mod validate;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::ByDirection;
use crate::scalar::Real;

pub use tabulated::TabulatedCoefficients;
pub use validate::{
    spanning_split, validate_assumptions, Assumption, Check, SpanningSplit, Status,
    ValidationReport,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown control index {0}")]
    UnknownControl(usize),
    #[error("unknown catalog problem {0:?}")]
    UnknownProblem(String),
    #[error("no tabulated value for {what} at {at}")]
    NotTabulated { what: &'static str, at: String },
    #[error("coefficient table: {0}")]
    Table(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The constants every assumption is stated with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants<F> {
    pub horizon: F,
    pub h0: F,
    pub delta: F,
    pub k0: F,
    pub k1: F,
    pub k2: F,
    pub k3: F,
    pub m: F,
    pub omega: F,
    /// The structural constant `C ≥ 4` of the small-oscillation condition.
    pub c_struct: F,
}

impl<F: Real> Default for Constants<F> {
    fn default() -> Self {
        Self {
            horizon: F::one(),
            h0: F::one(),
            delta: F::one(),
            k0: F::one(),
            k1: F::one(),
            k2: F::one(),
            k3: F::one(),
            m: F::zero(),
            omega: F::one(),
            c_struct: F::of(4.0),
        }
    }
}

/// How the free term depends on the difference vector `p` and the value `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeTerm {
    /// Affine in `(p, ψ)`.
    Linear,
    /// General dependence on `(p, ψ)`.
    Quasilinear,
    /// A function of `(t, x)` only.
    Independent,
}

/// Coefficient evaluators of a finite control family.
///
/// Diffusion is supplied for `k = 1..=d1` only; the mirrored `a_{-k} = a_k`
/// is produced by [`eval_coeffs`]. Drift uses signed labels.
pub trait Coefficients<F: Real>: Send + Sync {
    fn d1(&self) -> usize;
    fn controls(&self) -> usize;
    fn r(&self, alpha: usize, t: F) -> Result<F, ProblemError>;
    fn a(&self, alpha: usize, k: usize, psi: F, t: F, x: &[F]) -> Result<F, ProblemError>;
    fn b(&self, alpha: usize, k: i32, t: F, x: &[F]) -> Result<F, ProblemError>;
    fn c(&self, alpha: usize, t: F, x: &[F]) -> Result<F, ProblemError>;
    fn f(&self, alpha: usize, p: &ByDirection<F>, psi: F, t: F, x: &[F]) -> Result<F, ProblemError>;
}

type RFn<F> = Arc<dyn Fn(usize, F) -> F + Send + Sync>;
type AFn<F> = Arc<dyn Fn(usize, usize, F, F, &[F]) -> F + Send + Sync>;
type BFn<F> = Arc<dyn Fn(usize, i32, F, &[F]) -> F + Send + Sync>;
type CFn<F> = Arc<dyn Fn(usize, F, &[F]) -> F + Send + Sync>;
type FFn<F> = Arc<dyn Fn(usize, &ByDirection<F>, F, F, &[F]) -> F + Send + Sync>;

/// Coefficients given by closures; every closure defaults to zero.
#[derive(Clone)]
pub struct FnCoefficients<F> {
    d1: usize,
    controls: usize,
    r: RFn<F>,
    a: AFn<F>,
    b: BFn<F>,
    c: CFn<F>,
    f: FFn<F>,
}

impl<F: Real> FnCoefficients<F> {
    pub fn new(d1: usize, controls: usize) -> Self {
        Self {
            d1,
            controls,
            r: Arc::new(|_, _| F::zero()),
            a: Arc::new(|_, _, _, _, _| F::zero()),
            b: Arc::new(|_, _, _, _| F::zero()),
            c: Arc::new(|_, _, _| F::zero()),
            f: Arc::new(|_, _, _, _, _| F::zero()),
        }
    }

    /// `r(α, t)`.
    pub fn with_r(mut self, r: impl Fn(usize, F) -> F + Send + Sync + 'static) -> Self {
        self.r = Arc::new(r);
        self
    }

    /// `a(α, k, ψ, t, x)` for `k = 1..=d1`.
    pub fn with_a(mut self, a: impl Fn(usize, usize, F, F, &[F]) -> F + Send + Sync + 'static) -> Self {
        self.a = Arc::new(a);
        self
    }

    /// `b(α, k, t, x)` for signed `k`.
    pub fn with_b(mut self, b: impl Fn(usize, i32, F, &[F]) -> F + Send + Sync + 'static) -> Self {
        self.b = Arc::new(b);
        self
    }

    pub fn with_c(mut self, c: impl Fn(usize, F, &[F]) -> F + Send + Sync + 'static) -> Self {
        self.c = Arc::new(c);
        self
    }

    /// `f(α, p, ψ, t, x)`.
    pub fn with_f(
        mut self,
        f: impl Fn(usize, &ByDirection<F>, F, F, &[F]) -> F + Send + Sync + 'static,
    ) -> Self {
        self.f = Arc::new(f);
        self
    }

    fn check(&self, alpha: usize) -> Result<(), ProblemError> {
        if alpha < self.controls {
            Ok(())
        } else {
            Err(ProblemError::UnknownControl(alpha))
        }
    }
}

impl<F: Real> Coefficients<F> for FnCoefficients<F> {
    fn d1(&self) -> usize {
        self.d1
    }

    fn controls(&self) -> usize {
        self.controls
    }

    fn r(&self, alpha: usize, t: F) -> Result<F, ProblemError> {
        self.check(alpha)?;
        Ok((self.r)(alpha, t))
    }

    fn a(&self, alpha: usize, k: usize, psi: F, t: F, x: &[F]) -> Result<F, ProblemError> {
        self.check(alpha)?;
        Ok((self.a)(alpha, k, psi, t, x))
    }

    fn b(&self, alpha: usize, k: i32, t: F, x: &[F]) -> Result<F, ProblemError> {
        self.check(alpha)?;
        Ok((self.b)(alpha, k, t, x))
    }

    fn c(&self, alpha: usize, t: F, x: &[F]) -> Result<F, ProblemError> {
        self.check(alpha)?;
        Ok((self.c)(alpha, t, x))
    }

    fn f(&self, alpha: usize, p: &ByDirection<F>, psi: F, t: F, x: &[F]) -> Result<F, ProblemError> {
        self.check(alpha)?;
        Ok((self.f)(alpha, p, psi, t, x))
    }
}

/// A Bellman problem: coefficients, constants and dependence flags.
#[derive(Clone)]
pub struct ControlProblem<F> {
    pub name: String,
    pub labels: Vec<String>,
    pub coefficients: Arc<dyn Coefficients<F>>,
    pub constants: Constants<F>,
    pub free_term: FreeTerm,
    /// Whether `a_k` depends on the solution value `ψ`.
    pub a_depends_on_psi: bool,
}

impl<F: Real> fmt::Debug for ControlProblem<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("name", &self.name)
            .field("labels", &self.labels)
            .field("constants", &self.constants)
            .field("free_term", &self.free_term)
            .field("a_depends_on_psi", &self.a_depends_on_psi)
            .finish_non_exhaustive()
    }
}

impl<F: Real> ControlProblem<F> {
    pub fn new(name: impl Into<String>, coefficients: impl Coefficients<F> + 'static) -> Self {
        let labels = (0..coefficients.controls()).map(|i| format!("alpha{i}")).collect();
        Self {
            name: name.into(),
            labels,
            coefficients: Arc::new(coefficients),
            constants: Constants::default(),
            free_term: FreeTerm::Independent,
            a_depends_on_psi: false,
        }
    }

    pub fn with_constants(mut self, constants: Constants<F>) -> Self {
        self.constants = constants;
        self
    }

    pub fn with_free_term(mut self, free_term: FreeTerm) -> Self {
        self.free_term = free_term;
        self
    }

    pub fn with_a_depending_on_psi(mut self, yes: bool) -> Self {
        self.a_depends_on_psi = yes;
        self
    }

    pub fn controls(&self) -> usize {
        self.coefficients.controls()
    }

    pub fn d1(&self) -> usize {
        self.coefficients.d1()
    }
}

/// Coefficients of the linear operator for one control at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Coeffs<F> {
    pub r: F,
    pub a: ByDirection<F>,
    pub b: ByDirection<F>,
    pub c: F,
}

/// Evaluates `(r, a_k, b_k, c)`; `a_{-k}` is copied from `a_k`.
pub fn eval_coeffs<F: Real>(
    problem: &ControlProblem<F>,
    alpha: usize,
    t: F,
    x: &[F],
    psi: F,
) -> Result<Coeffs<F>, ProblemError> {
    let co = &problem.coefficients;
    if alpha >= co.controls() {
        return Err(ProblemError::UnknownControl(alpha));
    }
    let d1 = co.d1();
    let mut a = ByDirection::filled(d1, F::zero());
    let mut b = ByDirection::filled(d1, F::zero());
    for k in 1..=d1 {
        let value = co.a(alpha, k, psi, t, x)?;
        a.set(k as i32, value);
        a.set(-(k as i32), value);
        b.set(k as i32, co.b(alpha, k as i32, t, x)?);
        b.set(-(k as i32), co.b(alpha, -(k as i32), t, x)?);
    }
    Ok(Coeffs {
        r: co.r(alpha, t)?,
        a,
        b,
        c: co.c(alpha, t, x)?,
    })
}

/// Evaluates the free term `f(α, p, ψ, t, x)`.
pub fn eval_free<F: Real>(
    problem: &ControlProblem<F>,
    alpha: usize,
    p: &ByDirection<F>,
    psi: F,
    t: F,
    x: &[F],
) -> Result<F, ProblemError> {
    problem.coefficients.f(alpha, p, psi, t, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn const1d_returns_its_constants() {
        let entry = catalog::get::<f64>("const1d").unwrap();
        for (t, x) in [(0.0, 0.3), (0.7, 0.9)] {
            let co = eval_coeffs(&entry.problem, 0, t, &[x], 0.0).unwrap();
            assert_eq!(co.r, 1.0);
            assert_eq!(*co.a.get(1), 1.0);
            assert_eq!(*co.a.get(-1), 1.0);
            assert_eq!(*co.b.get(1), 1.0);
            assert_eq!(*co.b.get(-1), 0.0);
            assert_eq!(co.c, 1.0);
        }
    }

    #[test]
    fn unknown_control_is_an_error() {
        let entry = catalog::get::<f64>("const1d").unwrap();
        assert!(matches!(
            eval_coeffs(&entry.problem, 3, 0.0, &[0.0], 0.0),
            Err(ProblemError::UnknownControl(3))
        ));
    }

    #[test]
    fn psi_dependent_diffusion_matches_closure() {
        let entry = catalog::get::<f64>("quasilinear1d").unwrap();
        assert!(entry.problem.a_depends_on_psi);
        for psi in [-1.0, 0.0, 0.4] {
            let co = eval_coeffs(&entry.problem, 0, 0.0, &[0.5], psi).unwrap();
            let expected = 1.0 + 0.2 * f64::sin(psi);
            assert!((co.a.get(1) - expected).abs() < 1e-15);
            assert_eq!(co.a.get(1), co.a.get(-1));
        }
    }

    #[test]
    fn diffusion_is_symmetric_for_every_catalog_entry() {
        for name in catalog::NAMES {
            let entry = catalog::get::<f64>(name).unwrap();
            let p = &entry.problem;
            let x: Vec<f64> = entry.lower.iter().zip(&entry.upper).map(|(a, b)| 0.37 * a + 0.63 * b).collect();
            for alpha in 0..p.controls() {
                let co = eval_coeffs(p, alpha, 0.1, &x, 0.2).unwrap();
                for k in 1..=p.d1() as i32 {
                    assert_eq!(co.a.get(k), co.a.get(-k), "{name}");
                }
            }
        }
    }
}
