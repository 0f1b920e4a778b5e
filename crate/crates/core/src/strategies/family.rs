use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::game::SignVector;
use crate::linalg::{random_contraction, ComplexMatrix};
use crate::rng::SeededRng;

/// Contractivity slack allowed on every strategy block.
pub const CONTRACTION_TOL: f64 = 1e-9;

/// A block of a strategy that may depend on the sign vector `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsFamily {
    /// The same matrix for every `ε`.
    Fixed(ComplexMatrix),
    /// Explicit lookup table; sign vectors missing from the table use the
    /// fallback family.
    Table {
        entries: BTreeMap<SignVector, ComplexMatrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<Box<EpsFamily>>,
    },
    /// A seeded random contraction per `ε`, drawn from the child stream
    /// keyed by the lexicographic index of `ε`.
    Seeded { rows: usize, cols: usize, rng: SeededRng },
    /// `base` with its `n` row blocks scaled by the column-majority signs
    /// `sign(Σ_i ε_ij)` (ties give `+1`).
    ColumnMajority { base: ComplexMatrix, n: usize },
}

/// `sign(Σ_i ε_ij)` for each column `j`, with ties mapped to `+1`.
pub fn column_majority_signs(eps: &SignVector, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let s: i64 = (0..n).map(|i| eps.get(i * n + j) as i64).sum();
            if s >= 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

impl EpsFamily {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            EpsFamily::Fixed(m) => m.shape(),
            EpsFamily::Table { entries, fallback } => entries
                .values()
                .next()
                .map(|m| m.shape())
                .or_else(|| fallback.as_ref().map(|f| f.shape()))
                .unwrap_or((0, 0)),
            EpsFamily::Seeded { rows, cols, .. } => (*rows, *cols),
            EpsFamily::ColumnMajority { base, .. } => base.shape(),
        }
    }

    /// True when the block provably does not depend on `ε`.
    pub fn is_constant(&self) -> bool {
        match self {
            EpsFamily::Fixed(_) => true,
            EpsFamily::Table { entries, fallback } => {
                entries.is_empty() && fallback.as_ref().is_some_and(|f| f.is_constant())
            }
            _ => false,
        }
    }

    pub fn at(&self, eps: &SignVector) -> Result<Cow<'_, ComplexMatrix>> {
        match self {
            EpsFamily::Fixed(m) => Ok(Cow::Borrowed(m)),
            EpsFamily::Table { entries, fallback } => match entries.get(eps) {
                Some(m) => Ok(Cow::Borrowed(m)),
                None => match fallback {
                    Some(f) => f.at(eps),
                    None => Err(LabError::InvalidStrategy(format!("no block stored for ε = {eps}"))),
                },
            },
            EpsFamily::Seeded { rows, cols, rng } => {
                Ok(Cow::Owned(random_contraction(*rows, *cols, &rng.child(eps.index()))))
            }
            EpsFamily::ColumnMajority { base, n } => {
                let block = base.rows() / n;
                let signs = column_majority_signs(eps, *n);
                let mut m = base.clone();
                for (j, &s) in signs.iter().enumerate() {
                    if s < 0.0 {
                        for r in j * block..(j + 1) * block {
                            for c in 0..m.cols() {
                                m.set(r, c, -m.get(r, c));
                            }
                        }
                    }
                }
                Ok(Cow::Owned(m))
            }
        }
    }

    /// Materializes the family as a table over the given sign vectors, with
    /// `self` kept as the fallback for everything else.
    pub fn tabulate<'a>(&self, signs: impl IntoIterator<Item = &'a SignVector>) -> Result<EpsFamily> {
        let mut entries = BTreeMap::new();
        for eps in signs {
            entries.insert(eps.clone(), self.at(eps)?.into_owned());
        }
        let fallback = match self {
            EpsFamily::Table { fallback, .. } => fallback.clone(),
            other => Some(Box::new(other.clone())),
        };
        Ok(EpsFamily::Table { entries, fallback })
    }

    /// Every block has the given shape and operator norm at most
    /// `1 + CONTRACTION_TOL`.
    pub fn validate(&self, name: &str, rows: usize, cols: usize) -> Result<()> {
        let check = |m: &ComplexMatrix, label: &str| -> Result<()> {
            if m.shape() != (rows, cols) {
                return Err(LabError::Shape(format!(
                    "block {name}{label} has shape {}x{}, expected {rows}x{cols}",
                    m.rows(),
                    m.cols()
                )));
            }
            let norm = m.op_norm()?;
            if norm > 1.0 + CONTRACTION_TOL {
                return Err(LabError::InvalidStrategy(format!(
                    "block {name}{label} has operator norm {norm} > 1"
                )));
            }
            Ok(())
        };
        match self {
            EpsFamily::Fixed(m) => check(m, ""),
            EpsFamily::Table { entries, fallback } => {
                for (eps, m) in entries {
                    check(m, &format!("[{eps}]"))?;
                }
                match fallback {
                    Some(f) => f.validate(name, rows, cols),
                    None => Ok(()),
                }
            }
            EpsFamily::Seeded { rows: r, cols: c, .. } => {
                if (*r, *c) != (rows, cols) {
                    return Err(LabError::Shape(format!(
                        "block {name} has shape {r}x{c}, expected {rows}x{cols}"
                    )));
                }
                Ok(())
            }
            EpsFamily::ColumnMajority { base, n } => {
                if *n == 0 || base.rows() % n != 0 {
                    return Err(LabError::Shape(format!(
                        "block {name}: {} rows do not split into {n} blocks",
                        base.rows()
                    )));
                }
                check(base, "")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::enumerate_signs;

    #[test]
    fn column_majority_ties_go_positive() {
        let eps: SignVector = "+-+-".parse().unwrap();
        // columns: (ε_00, ε_10) = (+,+) and (ε_01, ε_11) = (-,-)
        assert_eq!(column_majority_signs(&eps, 2), vec![1.0, -1.0]);
        let tie: SignVector = "++--".parse().unwrap();
        assert_eq!(column_majority_signs(&tie, 2), vec![1.0, 1.0]);
    }

    #[test]
    fn tabulate_agrees_with_source() {
        let fam = EpsFamily::Seeded {
            rows: 3,
            cols: 2,
            rng: SeededRng::new(5, 0),
        };
        let all: Vec<_> = enumerate_signs(2).unwrap().collect();
        let table = fam.tabulate(&all[..8]).unwrap();
        for eps in &all {
            assert_eq!(table.at(eps).unwrap().into_owned(), fam.at(eps).unwrap().into_owned());
        }
        table.validate("W", 3, 2).unwrap();
        assert!(table.validate("W", 2, 2).is_err());
    }

    #[test]
    fn oversized_block_is_rejected() {
        let fam = EpsFamily::Fixed(ComplexMatrix::identity(2).scale_real(1.0 + 1e-6));
        assert!(matches!(fam.validate("V", 2, 2), Err(LabError::InvalidStrategy(_))));
        let ok = EpsFamily::Fixed(ComplexMatrix::identity(2).scale_real(1.0 + 1e-12));
        ok.validate("V", 2, 2).unwrap();
    }

    #[test]
    fn missing_table_entry_is_an_error() {
        let fam = EpsFamily::Table {
            entries: BTreeMap::new(),
            fallback: None,
        };
        assert!(fam.at(&SignVector::ones(4)).is_err());
    }
}
