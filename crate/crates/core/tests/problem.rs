use std::sync::Arc;

use bellman_grid::lattice::{signed_indices, ByDirection};
use bellman_grid::problem::{
    catalog, eval_coeffs, validate_assumptions, Assumption, Coefficients, Constants, ControlProblem, ProblemError,
};
use proptest::prelude::*;

/// Delegates to a catalog problem, overriding drift and killing rate of one control.
struct Perturbed {
    inner: Arc<dyn Coefficients<f64>>,
    drift: Option<(i32, f64)>,
    killing: Option<f64>,
}

impl Coefficients<f64> for Perturbed {
    fn d1(&self) -> usize {
        self.inner.d1()
    }
    fn controls(&self) -> usize {
        self.inner.controls()
    }
    fn r(&self, alpha: usize, t: f64) -> Result<f64, ProblemError> {
        self.inner.r(alpha, t)
    }
    fn a(&self, alpha: usize, k: usize, psi: f64, t: f64, x: &[f64]) -> Result<f64, ProblemError> {
        self.inner.a(alpha, k, psi, t, x)
    }
    fn b(&self, alpha: usize, k: i32, t: f64, x: &[f64]) -> Result<f64, ProblemError> {
        match self.drift {
            Some((label, value)) if alpha == 1 && k == label => Ok(value),
            _ => self.inner.b(alpha, k, t, x),
        }
    }
    fn c(&self, alpha: usize, t: f64, x: &[f64]) -> Result<f64, ProblemError> {
        match self.killing {
            Some(value) if alpha == 1 => Ok(value),
            _ => self.inner.c(alpha, t, x),
        }
    }
    fn f(&self, alpha: usize, p: &ByDirection<f64>, psi: f64, t: f64, x: &[f64]) -> Result<f64, ProblemError> {
        self.inner.f(alpha, p, psi, t, x)
    }
}

fn flipped(problem: ControlProblem<f64>) -> Vec<Assumption> {
    let entry = catalog::get::<f64>("smooth2d8").unwrap();
    let domain = entry.domain(0.25, 0.25).unwrap();
    let base = validate_assumptions(&entry.problem, &domain, &Assumption::ALL, 200, 3);
    let after = validate_assumptions(&problem, &domain, &Assumption::ALL, 200, 3);
    Assumption::ALL
        .into_iter()
        .filter(|a| base.get(*a).unwrap().status != after.get(*a).unwrap().status)
        .collect()
}

fn perturbed(drift: Option<(i32, f64)>, killing: Option<f64>) -> ControlProblem<f64> {
    let mut problem = catalog::get::<f64>("smooth2d8").unwrap().problem;
    problem.coefficients = Arc::new(Perturbed {
        inner: problem.coefficients.clone(),
        drift,
        killing,
    });
    problem
}

#[test]
fn seeded_drift_violation_flips_only_upwind_balance() {
    // a_3 = 0.25 for control 1, so b_{-3} = -2 breaks a_k ≥ h0 b_k^- at h0 = 1.
    assert_eq!(flipped(perturbed(Some((-3, -2.0)), None)), vec![Assumption::UpwindBalance]);
}

#[test]
fn seeded_large_killing_rate_flips_only_boundedness() {
    assert_eq!(flipped(perturbed(None, Some(500.0))), vec![Assumption::BoundedCoefficients]);
}

#[test]
fn seeded_large_oscillation_constant_flips_only_small_oscillation() {
    let mut problem = catalog::get::<f64>("smooth2d8").unwrap().problem;
    problem.constants = Constants {
        omega: 50.0,
        ..problem.constants
    };
    assert_eq!(flipped(problem), vec![Assumption::SmallOscillation]);
}

#[test]
fn every_catalog_entry_passes_its_declared_set() {
    for name in catalog::NAMES {
        let entry = catalog::get::<f64>(name).unwrap();
        let domain = entry.domain(0.25, 0.25).unwrap();
        let report = validate_assumptions(&entry.problem, &domain, &Assumption::ALL, 200, 11);
        let mut declared = entry.declared.clone();
        declared.sort();
        assert_eq!(report.passed(), declared, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn diffusion_is_even_in_the_label(
        which in 0usize..catalog::NAMES.len(),
        t in 0.0f64..0.5,
        x in prop::collection::vec(-0.5f64..0.5, 2),
        psi in -1.0f64..1.0,
    ) {
        let entry = catalog::get::<f64>(catalog::NAMES[which]).unwrap();
        let dim = entry.lower.len();
        for alpha in 0..entry.problem.controls() {
            let co = eval_coeffs(&entry.problem, alpha, t, &x[..dim], psi).unwrap();
            for k in signed_indices(entry.problem.d1()) {
                prop_assert_eq!(co.a.get(k), co.a.get(-k));
            }
        }
    }
}
