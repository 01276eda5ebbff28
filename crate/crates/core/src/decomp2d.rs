//! Decomposition of a diagonally dominant 2×2 diffusion into coefficients along
//! `e1, e2, e1 + e2, e1 - e2` whose square roots are Lipschitz.
//!
//! With `s = a11 ∧ a22`, `g = a12 / s` (`g = 0` when `s = 0`) and `h = s ψ(g)`:
//! `2 â^{1,±2} = h ± a12`, `2 â^{ii} = a^{ii} - h`, and
//! `a = (1/4) Σ_{i,j ∈ {±1,±2}} â^{ij} ℓ_{ij} ℓ_{ij}^T` with `ℓ_{ij} = e_i + e_j`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("matrix {index} is not symmetric")]
    Asymmetric { index: usize },
    #[error("matrix {index} has a negative diagonal entry")]
    NegativeDiagonal { index: usize },
    #[error("matrix {index} is not diagonally dominant: |a12| = {a12} > {s}")]
    NotDominant { index: usize, a12: f64, s: f64 },
    #[error("sample points {0} and {1} coincide")]
    CoincidentPair(usize, usize),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for DecompError {
    fn from(e: csv::Error) -> Self {
        DecompError::Csv(e.to_string())
    }
}

/// An even convex function equal to `|y|` for `|y| ≥ κ`, with `κ = 1/3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothAbs {
    /// `3κ/8 + 3y²/(4κ) - y⁴/(8κ³)` inside, twice continuously differentiable.
    #[default]
    Quartic,
    /// `|·|` averaged against a smooth bump supported in `[-κ, κ]`; infinitely
    /// differentiable, evaluated by quadrature.
    Mollified,
}

pub const KAPPA: f64 = 1.0 / 3.0;

fn bump(z: f64) -> f64 {
    let s = z / KAPPA;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let step = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + step * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * step / 3.0
}

impl SmoothAbs {
    pub fn eval<F: Real>(self, y: F) -> F {
        let k = F::of(KAPPA);
        let ay = y.abs();
        if ay >= k {
            return ay;
        }
        match self {
            SmoothAbs::Quartic => {
                let y2 = y * y;
                F::of(3.0) * k / F::of(8.0) + F::of(3.0) * y2 / (F::of(4.0) * k) - y2 * y2 / (F::of(8.0) * k * k * k)
            }
            SmoothAbs::Mollified => {
                // ∫|y - z| ρ(z) dz = 2 ∫_{z<y} (y - z) ρ(z) dz - y for even ρ of unit mass.
                let y = ay.as_f64();
                let mass = simpson(bump, -KAPPA, KAPPA, 4000);
                let below = simpson(|z| (y - z) * bump(z), -KAPPA, y, 4000);
                F::of(2.0 * below / mass - y)
            }
        }
    }
}

/// A symmetric 2×2 matrix `[[a11, a12], [a21, a22]]`.
pub type Matrix2<F> = [[F; 2]; 2];

/// Coefficients along `e1` (`â^{11}`), `e2` (`â^{22}`), `e1 + e2` (`â^{12}`), `e1 - e2` (`â^{1,-2}`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalCoeffs<F> {
    pub a11: F,
    pub a22: F,
    pub a12: F,
    pub a1m2: F,
}

impl<F: Real> DirectionalCoeffs<F> {
    pub fn values(&self) -> [F; 4] {
        [self.a11, self.a22, self.a12, self.a1m2]
    }

    /// `a_k` for `ℓ = e1, e2, e1 + e2, e1 - e2` with `Σ_{±k} a_k ℓ_k ℓ_k^T` equal to the input matrix.
    pub fn stencil_coefficients(&self) -> [F; 4] {
        let half = F::of(0.5);
        [self.a11, self.a22, half * self.a12, half * self.a1m2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalField<F> {
    pub points: Vec<Vec<F>>,
    pub coeffs: Vec<DirectionalCoeffs<F>>,
}

pub fn decompose_matrix<F: Real>(a: &Matrix2<F>, psi: SmoothAbs, index: usize) -> Result<DirectionalCoeffs<F>, DecompError> {
    let tol = F::of(1e-12) * (F::one() + a[0][0].abs().max(a[1][1].abs()));
    if (a[0][1] - a[1][0]).abs() > tol {
        return Err(DecompError::Asymmetric { index });
    }
    if a[0][0] < F::zero() || a[1][1] < F::zero() {
        return Err(DecompError::NegativeDiagonal { index });
    }
    let a12 = a[0][1];
    let s = a[0][0].min(a[1][1]);
    if a12.abs() > s + tol {
        return Err(DecompError::NotDominant {
            index,
            a12: a12.as_f64(),
            s: s.as_f64(),
        });
    }
    let g = if s == F::zero() { F::zero() } else { (a12 / s).max(-F::one()).min(F::one()) };
    let h = s * psi.eval(g);
    let half = F::of(0.5);
    Ok(DirectionalCoeffs {
        a11: half * (a[0][0] - h),
        a22: half * (a[1][1] - h),
        a12: half * (h + a12),
        a1m2: half * (h - a12),
    })
}

pub fn decompose<F: Real>(
    points: Vec<Vec<F>>,
    field: &[Matrix2<F>],
    psi: SmoothAbs,
) -> Result<DirectionalField<F>, DecompError> {
    let coeffs = field
        .iter()
        .enumerate()
        .map(|(i, a)| decompose_matrix(a, psi, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DirectionalField { points, coeffs })
}

/// `(1/4) Σ_{i,j ∈ {±1,±2}} â^{ij} ℓ_{ij} ℓ_{ij}^T`, summed literally over ordered pairs.
pub fn reconstruct_matrix<F: Real>(c: &DirectionalCoeffs<F>) -> Matrix2<F> {
    let unit = |i: i32| -> [F; 2] {
        let v = if i > 0 { F::one() } else { -F::one() };
        if i.abs() == 1 {
            [v, F::zero()]
        } else {
            [F::zero(), v]
        }
    };
    let coeff = |i: i32, j: i32| -> F {
        if i == -j {
            return F::zero();
        }
        match (i.abs(), j.abs()) {
            (1, 1) => c.a11,
            (2, 2) => c.a22,
            // ℓ_{ij} is ±(e1 + e2) when i and j carry the same sign.
            _ if i.signum() == j.signum() => c.a12,
            _ => c.a1m2,
        }
    };
    let mut out = [[F::zero(); 2]; 2];
    let labels = [1, -1, 2, -2];
    for &i in &labels {
        for &j in &labels {
            let (ei, ej) = (unit(i), unit(j));
            let l = [ei[0] + ej[0], ei[1] + ej[1]];
            let w = coeff(i, j) / F::of(4.0);
            for r in 0..2 {
                for s in 0..2 {
                    out[r][s] = out[r][s] + w * l[r] * l[s];
                }
            }
        }
    }
    out
}

pub fn reconstruct<F: Real>(field: &DirectionalField<F>) -> Vec<Matrix2<F>> {
    field.coeffs.iter().map(reconstruct_matrix).collect()
}

/// Largest `|√â(x) - √â(y)| / |x - y|` per coefficient over the given pairs.
pub fn lipschitz_probe<F: Real>(field: &DirectionalField<F>, pairs: &[(usize, usize)]) -> Result<[F; 4], DecompError> {
    let mut out = [F::zero(); 4];
    for &(i, j) in pairs {
        let dist = field.points[i]
            .iter()
            .zip(&field.points[j])
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<F>()
            .sqrt();
        if dist == F::zero() {
            return Err(DecompError::CoincidentPair(i, j));
        }
        let (vi, vj) = (field.coeffs[i].values(), field.coeffs[j].values());
        for k in 0..4 {
            let r = (vi[k].max(F::zero()).sqrt() - vj[k].max(F::zero()).sqrt()).abs() / dist;
            out[k] = out[k].max(r);
        }
    }
    Ok(out)
}

/// Reads rows `coords.., a11, a12, a22`.
pub fn read_field_csv<F: Real, R: Read>(reader: R) -> Result<(Vec<Vec<F>>, Vec<Matrix2<F>>), DecompError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut points = Vec::new();
    let mut field = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() < 4 {
            return Err(DecompError::Csv("need coordinates and a11, a12, a22".into()));
        }
        let values = record
            .iter()
            .map(|s| s.trim().parse::<f64>().map(F::of).map_err(|e| DecompError::Csv(e.to_string())))
            .collect::<Result<Vec<F>, _>>()?;
        let dim = values.len() - 3;
        points.push(values[..dim].to_vec());
        let (a11, a12, a22) = (values[dim], values[dim + 1], values[dim + 2]);
        field.push([[a11, a12], [a12, a22]]);
    }
    Ok((points, field))
}

/// Writes rows `x0.., a11hat, a22hat, a12hat, a1m2hat`.
pub fn write_field_csv<F: Real, W: Write>(writer: W, field: &DirectionalField<F>) -> Result<(), DecompError> {
    let dim = field.points.first().map_or(0, Vec::len);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    header.extend(["a11hat", "a22hat", "a12hat", "a1m2hat"].map(String::from));
    wtr.write_record(&header)?;
    for (p, c) in field.points.iter().zip(&field.coeffs) {
        let row: Vec<String> = p.iter().chain(c.values().iter()).map(|v| v.to_string()).collect();
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| DecompError::Csv(e.to_string()))?;
    Ok(())
}
