//! Residuals of the discrete product rules and slacks of the difference inequalities.
//!
//! Residuals are relative: `|lhs - rhs| / max(1, |each term|)` at every point,
//! maximised over the points carrying the full stencil.

use serde::{Deserialize, Serialize};

use super::{delta2_at, delta_at, laplace_at, CalcError, GridFunction, Step};
use crate::lattice::{DirectionSet, Node, Point};
use crate::scalar::Real;

/// Maximum relative residual of each product rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductRuleResiduals<F> {
    /// `δ(aψ) = (δa)ψ + (Ta)δψ`.
    pub forward_shift: F,
    /// `δ(aψ) = aδψ + ψδa + ν(δa)(δψ)`.
    pub forward_symmetric: F,
    /// The two-direction rule for `δ_{ν,l2}δ_{ν,l1}(aψ)`.
    pub mixed: F,
    /// `Δ(aψ) = aΔψ + ψΔa + (δ_l a)(δ_l ψ) + (δ_{-l} a)(δ_{-l} ψ)`.
    pub laplace: F,
    /// `Δ(ψ²) = 2ψΔψ + (δ_l ψ)² + (δ_{-l} ψ)²`.
    pub square: F,
    pub points: usize,
}

impl<F: Real> ProductRuleResiduals<F> {
    pub fn max(&self) -> F {
        [
            self.forward_shift,
            self.forward_symmetric,
            self.mixed,
            self.laplace,
            self.square,
        ]
        .into_iter()
        .fold(F::zero(), F::max)
    }
}

fn relative<F: Real>(lhs: F, terms: &[F]) -> F {
    let sum = terms.iter().fold(F::zero(), |acc, &t| acc + t);
    let scale = terms
        .iter()
        .fold(F::one().max(lhs.abs()), |acc, t| acc.max(t.abs()));
    (lhs - sum).abs() / scale
}

fn product<F: Real>(a: &GridFunction<F>, psi: &GridFunction<F>) -> GridFunction<F> {
    let mut out = GridFunction::new();
    for (n, v) in psi.iter() {
        if let Some(w) = a.try_get(n) {
            out.insert(n.clone(), *v * w);
        }
    }
    out
}

fn product_rules_at<F: Real>(
    a: &GridFunction<F>,
    psi: &GridFunction<F>,
    a_psi: &GridFunction<F>,
    squared: &GridFunction<F>,
    x: &Node,
    s1: &Step<F>,
    s2: &Step<F>,
) -> Result<[F; 5], CalcError> {
    let nu = s1.eta;
    let back = s1.reversed();
    let a0 = a.get(x)?;
    let p0 = psi.get(x)?;
    let d1a = delta_at(a, x, s1)?;
    let d1p = delta_at(psi, x, s1)?;
    let d2a = delta_at(a, x, s2)?;
    let d2p = delta_at(psi, x, s2)?;
    let shifted_a = a.get(&x.shifted(&s1.offset))?;

    let d1ap = delta_at(a_psi, x, s1)?;
    let forward_shift = relative(d1ap, &[d1a * p0, shifted_a * d1p]);
    let forward_symmetric = relative(d1ap, &[a0 * d1p, p0 * d1a, nu * d1a * d1p]);

    let d21p = delta2_at(psi, x, s1, s2)?;
    let d21a = delta2_at(a, x, s1, s2)?;
    let diagonal: Point = s1.offset.iter().zip(&s2.offset).map(|(p, q)| p + q).collect();
    let far_psi = psi.get(&x.shifted(&diagonal))?;
    let mixed = relative(
        delta2_at(a_psi, x, s1, s2)?,
        &[
            a0 * d21p,
            d2a * d1p,
            d1a * d2p,
            nu * (d1a + d2a) * d21p,
            d21a * far_psi,
        ],
    );

    let dma = delta_at(a, x, &back)?;
    let dmp = delta_at(psi, x, &back)?;
    let laplace = relative(
        laplace_at(a_psi, x, s1)?,
        &[
            a0 * laplace_at(psi, x, s1)?,
            p0 * laplace_at(a, x, s1)?,
            d1a * d1p,
            dma * dmp,
        ],
    );
    let lap_p = laplace_at(psi, x, s1)?;
    let square = relative(
        laplace_at(squared, x, s1)?,
        &[(p0 + p0) * lap_p, d1p * d1p, dmp * dmp],
    );
    Ok([forward_shift, forward_symmetric, mixed, laplace, square])
}

/// Checks the product rules for `a`, `ψ` and two steps of equal size `ν`.
pub fn product_rule_residuals<F: Real>(
    a: &GridFunction<F>,
    psi: &GridFunction<F>,
    s1: &Step<F>,
    s2: &Step<F>,
) -> Result<ProductRuleResiduals<F>, CalcError> {
    if s1.eta != s2.eta {
        return Err(CalcError::StepMismatch);
    }
    let a_psi = product(a, psi);
    let squared = product(psi, psi);
    let mut worst = [F::zero(); 5];
    let mut points = 0;
    for (x, _) in psi.sorted() {
        if let Ok(res) = product_rules_at(a, psi, &a_psi, &squared, x, s1, s2) {
            points += 1;
            for (w, r) in worst.iter_mut().zip(res) {
                *w = w.max(r);
            }
        }
    }
    if points == 0 {
        return Err(CalcError::NoSupport);
    }
    Ok(ProductRuleResiduals {
        forward_shift: worst[0],
        forward_symmetric: worst[1],
        mixed: worst[2],
        laplace: worst[3],
        square: worst[4],
        points,
    })
}

/// Smallest relative slack of
/// `|Δ_{ν,l} ψ| ≤ |δ_{ν,-l}((δ_{ν,l} ψ)^-)| + |δ_{ν,l}((δ_{ν,-l} ψ)^-)|`.
pub fn laplace_bound_slack<F: Real>(psi: &GridFunction<F>, step: &Step<F>) -> Result<F, CalcError> {
    let back = step.reversed();
    let mut worst: Option<F> = None;
    for (x, _) in psi.sorted() {
        let at = || -> Result<F, CalcError> {
            let lap = laplace_at(psi, x, step)?.abs();
            let neg_fwd = |n: &Node| delta_at(psi, n, step).map(Real::neg_part);
            let neg_bwd = |n: &Node| delta_at(psi, n, &back).map(Real::neg_part);
            let first = ((neg_fwd(&x.shifted(&back.offset))? - neg_fwd(x)?) / step.eta).abs();
            let second = ((neg_bwd(&x.shifted(&step.offset))? - neg_bwd(x)?) / step.eta).abs();
            let scale = F::one().max(lap).max(first).max(second);
            Ok((first + second - lap) / scale)
        };
        if let Ok(slack) = at() {
            worst = Some(worst.map_or(slack, |w| w.min(slack)));
        }
    }
    worst.ok_or(CalcError::NoSupport)
}

/// Smallest relative slack of the bound of every mixed second difference
/// `δ_{h,ℓ_i} δ_{h,ℓ_j} φ` by four times the pure second differences along the
/// first `d0` directions (over `(Λ_0 + L) ∪ {0}`) plus four times those along
/// the remaining directions (over `Λ_0 ∪ {0}`), where `L` collects the offsets
/// of the first `d0` directions.
pub fn mixed_difference_bound_slack<F: Real>(
    phi: &GridFunction<F>,
    dirs: &DirectionSet<F>,
    d0: usize,
) -> Result<F, CalcError> {
    let d1 = dirs.d1();
    let labels: Vec<i32> = crate::lattice::signed_indices(d1).collect();
    let steps: Vec<(i32, Step<F>)> = labels.iter().map(|&k| (k, Step::along(dirs, k))).collect();
    let lambda0 = dirs.lambda0();
    let small: Vec<Point> = crate::lattice::signed_indices(d0).map(|k| dirs.offset(k)).collect();
    let mut near: Vec<Point> = vec![Point::from_elem(0, dirs.dim())];
    near.extend(lambda0.iter().cloned());
    let mut wide = near.clone();
    for y in &lambda0 {
        for z in &small {
            wide.push(y.iter().zip(z).map(|(a, b)| a + b).collect());
        }
    }

    let mut worst: Option<F> = None;
    for (x, _) in phi.sorted() {
        let at = || -> Result<F, CalcError> {
            let mut lhs = F::zero();
            for (_, si) in &steps {
                for (_, sj) in &steps {
                    lhs = lhs.max(delta2_at(phi, x, si, sj)?.abs());
                }
            }
            let mut inner = F::zero();
            let mut outer = F::zero();
            for (k, s) in &steps {
                let (set, acc) = if (k.unsigned_abs() as usize) <= d0 {
                    (&wide, &mut inner)
                } else {
                    (&near, &mut outer)
                };
                for y in set {
                    *acc = acc.max(laplace_at(phi, &x.shifted(y), s)?.abs());
                }
            }
            let four = F::of(4.0);
            let rhs = four * inner + four * outer;
            Ok((rhs - lhs) / F::one().max(lhs).max(rhs))
        };
        if let Ok(slack) = at() {
            worst = Some(worst.map_or(slack, |w| w.min(slack)));
        }
    }
    worst.ok_or(CalcError::NoSupport)
}

/// Product-rule residuals and inequality slacks for one `(a, ψ)` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport<F> {
    pub product_rules: ProductRuleResiduals<F>,
    pub laplace_bound_slack: F,
    pub mixed_bound_slack: Option<F>,
}

/// Runs every identity check. The mixed-difference bound needs the direction
/// set and the count `d0` of spanning directions.
pub fn verify_identities<F: Real>(
    a: &GridFunction<F>,
    psi: &GridFunction<F>,
    s1: &Step<F>,
    s2: &Step<F>,
    spanning: Option<(&DirectionSet<F>, usize)>,
) -> Result<IdentityReport<F>, CalcError> {
    let product_rules = product_rule_residuals(a, psi, s1, s2)?;
    let laplace_bound_slack = laplace_bound_slack(psi, s1)?;
    let mixed_bound_slack = match spanning {
        Some((dirs, d0)) => Some(mixed_difference_bound_slack(psi, dirs, d0)?),
        None => None,
    };
    Ok(IdentityReport {
        product_rules,
        laplace_bound_slack,
        mixed_bound_slack,
    })
}
