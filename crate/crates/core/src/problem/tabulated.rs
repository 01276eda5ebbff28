//! Coefficients read from CSV tables over the grid.
//!
//! One table per coefficient (`r`, `a`, `b`, `c`, `f`), each with columns
//! `alpha,k,time_index,x0,..,value`. Coordinates are in base steps. A missing
//! table means the coefficient vanishes; a missing row inside a present table
//! is an error. Tabulated free terms do not depend on `(p, ψ)`.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use super::{Coefficients, ProblemError};
use crate::lattice::{ByDirection, TimeGrid};
use crate::scalar::Real;

pub const TABLES: [&str; 5] = ["r", "a", "b", "c", "f"];

type Key = (usize, i32, u32, Vec<i64>);

#[derive(Debug, Clone)]
pub struct TabulatedCoefficients<F> {
    d1: usize,
    controls: usize,
    base_step: F,
    time: TimeGrid<F>,
    tables: HashMap<&'static str, HashMap<Key, F>>,
}

fn parse_table<F: Real, R: Read>(reader: R, dim: usize) -> Result<HashMap<Key, F>, ProblemError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let bad = |e: &dyn std::fmt::Display| ProblemError::Table(e.to_string());
    let mut out = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| bad(&e))?;
        if record.len() != dim + 4 {
            return Err(ProblemError::Table(format!(
                "expected {} columns, found {}",
                dim + 4,
                record.len()
            )));
        }
        let field = |i: usize| record[i].trim().to_string();
        let alpha: usize = field(0).parse().map_err(|e| bad(&e))?;
        let k: i32 = field(1).parse().map_err(|e| bad(&e))?;
        let level: u32 = field(2).parse().map_err(|e| bad(&e))?;
        let x = (0..dim)
            .map(|j| field(3 + j).parse::<i64>().map_err(|e| bad(&e)))
            .collect::<Result<Vec<_>, _>>()?;
        let value: f64 = field(3 + dim).parse().map_err(|e| bad(&e))?;
        out.insert((alpha, k, level, x), F::of(value));
    }
    Ok(out)
}

impl<F: Real> TabulatedCoefficients<F> {
    /// Builds from named readers; names outside `TABLES` are rejected.
    pub fn from_readers<R: Read>(
        d1: usize,
        controls: usize,
        dim: usize,
        base_step: F,
        time: TimeGrid<F>,
        readers: impl IntoIterator<Item = (String, R)>,
    ) -> Result<Self, ProblemError> {
        let mut tables = HashMap::new();
        for (name, reader) in readers {
            let slot = TABLES
                .iter()
                .find(|t| **t == name)
                .ok_or_else(|| ProblemError::Table(format!("unknown table {name:?}")))?;
            tables.insert(*slot, parse_table(reader, dim)?);
        }
        Ok(Self {
            d1,
            controls,
            base_step,
            time,
            tables,
        })
    }

    /// Reads `r.csv`, `a.csv`, `b.csv`, `c.csv`, `f.csv` from `dir` when present.
    pub fn load(
        dir: &Path,
        d1: usize,
        controls: usize,
        dim: usize,
        base_step: F,
        time: TimeGrid<F>,
    ) -> Result<Self, ProblemError> {
        let mut readers = Vec::new();
        for name in TABLES {
            let path = dir.join(format!("{name}.csv"));
            if path.exists() {
                readers.push((name.to_string(), std::fs::File::open(path)?));
            }
        }
        Self::from_readers(d1, controls, dim, base_step, time, readers)
    }

    fn level(&self, t: F) -> Result<u32, ProblemError> {
        let n = self.time.terminal_level();
        if (t - self.time.horizon()).abs() <= F::of(1e-9) * (F::one() + t.abs()) {
            return Ok(n);
        }
        let k = (t / self.time.tau()).round();
        if (k * self.time.tau() - t).abs() > F::of(1e-9) * (F::one() + t.abs()) {
            return Err(ProblemError::NotTabulated {
                what: "time",
                at: format!("t={t}"),
            });
        }
        k.to_u32().ok_or_else(|| ProblemError::NotTabulated {
            what: "time",
            at: format!("t={t}"),
        })
    }

    fn coords(&self, x: &[F]) -> Result<Vec<i64>, ProblemError> {
        x.iter()
            .map(|&v| {
                let n = (v / self.base_step).round();
                if (n * self.base_step - v).abs() > F::of(1e-9) * self.base_step {
                    return Err(ProblemError::NotTabulated {
                        what: "point",
                        at: format!("{x:?}"),
                    });
                }
                n.to_i64().ok_or(ProblemError::NotTabulated {
                    what: "point",
                    at: format!("{x:?}"),
                })
            })
            .collect()
    }

    fn lookup(&self, name: &'static str, alpha: usize, k: i32, t: F, x: Option<&[F]>) -> Result<F, ProblemError> {
        if alpha >= self.controls {
            return Err(ProblemError::UnknownControl(alpha));
        }
        let Some(table) = self.tables.get(name) else {
            return Ok(F::zero());
        };
        let level = self.level(t)?;
        let found = match x {
            Some(x) => table.get(&(alpha, k, level, self.coords(x)?)).copied(),
            None => table
                .iter()
                .find(|((a, _, n, _), _)| *a == alpha && *n == level)
                .map(|(_, v)| *v),
        };
        found.ok_or_else(|| ProblemError::NotTabulated {
            what: name,
            at: format!("alpha={alpha} k={k} t={t} x={x:?}"),
        })
    }
}

impl<F: Real> Coefficients<F> for TabulatedCoefficients<F> {
    fn d1(&self) -> usize {
        self.d1
    }

    fn controls(&self) -> usize {
        self.controls
    }

    fn r(&self, alpha: usize, t: F) -> Result<F, ProblemError> {
        self.lookup("r", alpha, 0, t, None)
    }

    fn a(&self, alpha: usize, k: usize, _psi: F, t: F, x: &[F]) -> Result<F, ProblemError> {
        self.lookup("a", alpha, k as i32, t, Some(x))
    }

    fn b(&self, alpha: usize, k: i32, t: F, x: &[F]) -> Result<F, ProblemError> {
        self.lookup("b", alpha, k, t, Some(x))
    }

    fn c(&self, alpha: usize, t: F, x: &[F]) -> Result<F, ProblemError> {
        self.lookup("c", alpha, 0, t, Some(x))
    }

    fn f(&self, alpha: usize, _p: &ByDirection<F>, _psi: F, t: F, x: &[F]) -> Result<F, ProblemError> {
        self.lookup("f", alpha, 0, t, Some(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TabulatedCoefficients<f64> {
        let a = "alpha,k,time_index,x0,value\n0,1,0,0,2.0\n0,1,0,1,3.0\n";
        let r = "alpha,k,time_index,x0,value\n0,0,0,0,1.0\n";
        let time = TimeGrid::new(0.5, 1.0).unwrap();
        TabulatedCoefficients::from_readers(
            1,
            1,
            1,
            0.25,
            time,
            vec![("a".to_string(), a.as_bytes()), ("r".to_string(), r.as_bytes())],
        )
        .unwrap()
    }

    #[test]
    fn reads_grid_values() {
        let tab = sample();
        assert_eq!(tab.a(0, 1, 0.0, 0.0, &[0.25]).unwrap(), 3.0);
        assert_eq!(tab.r(0, 0.0).unwrap(), 1.0);
        assert_eq!(tab.c(0, 0.0, &[0.25]).unwrap(), 0.0);
    }

    #[test]
    fn off_grid_queries_fail() {
        let tab = sample();
        assert!(matches!(tab.a(0, 1, 0.0, 0.0, &[0.1]), Err(ProblemError::NotTabulated { .. })));
        assert!(matches!(tab.a(0, 1, 0.0, 0.0, &[0.5]), Err(ProblemError::NotTabulated { .. })));
        assert!(matches!(tab.a(1, 1, 0.0, 0.0, &[0.0]), Err(ProblemError::UnknownControl(1))));
    }
}
