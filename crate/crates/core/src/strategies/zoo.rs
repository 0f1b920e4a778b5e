use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::family::EpsFamily;
use super::pure::{product_phi, Dims, PureStrategy};
use crate::error::{LabError, Result};
use crate::linalg::{gaussian_matrix, random_contraction, ComplexMatrix, ComplexVector, ONE};
use crate::rng::SeededRng;

/// Reference strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZooKind {
    /// Alice keeps the first question register and forwards the second;
    /// each party answers with what it holds.
    DoNothing,
    /// As `DoNothing`, with Bob flipping his answer on every column whose
    /// sign majority is negative.
    ColumnMajority,
    /// Seeded contractions with an `ε`-independent second round.
    EpsIndependentRandom,
    /// Seeded contractions drawn afresh for every `ε`.
    Random,
}

impl ZooKind {
    pub const ALL: [ZooKind; 4] = [
        ZooKind::DoNothing,
        ZooKind::ColumnMajority,
        ZooKind::EpsIndependentRandom,
        ZooKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ZooKind::DoNothing => "do_nothing",
            ZooKind::ColumnMajority => "column_majority",
            ZooKind::EpsIndependentRandom => "eps_independent_random",
            ZooKind::Random => "random",
        }
    }
}

impl fmt::Display for ZooKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ZooKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        ZooKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::Format(format!("unknown zoo strategy {s:?}")))
    }
}

fn random_unit(dim: usize, rng: &SeededRng) -> ComplexVector {
    let g: ComplexVector = gaussian_matrix(dim, 1, rng).into();
    let norm = g.norm();
    g.scale_real(1.0 / norm)
}

/// Builds the named reference strategy. `rng` only matters for the random
/// kinds.
pub fn zoo(kind: ZooKind, dims: Dims, rng: &SeededRng) -> Result<PureStrategy> {
    let Dims { n, k, kt, r, keep, send } = dims;
    match kind {
        ZooKind::DoNothing | ZooKind::ColumnMajority => {
            if keep < n || send < n {
                return Err(LabError::Shape(format!(
                    "{kind} needs keep ≥ n and send ≥ n (got keep = {keep}, send = {send}, n = {n})"
                )));
            }
            // V|ij, 0⟩ = |keep = i, send = j⟩.
            let mut v = ComplexMatrix::zeros(kt, n * n * k);
            for i in 0..n {
                for j in 0..n {
                    v.set(i * send + j, (i * n + j) * k, ONE);
                }
            }
            // W|0⟩ = |keep = 0, send = 0⟩.
            let mut w = ComplexMatrix::zeros(kt, k);
            w.set(0, 0, ONE);
            // Alice answers i from (a_keep = i, b_send = 0); Bob answers j
            // from (b_keep = 0, a_send = j).
            let mut vt = ComplexMatrix::zeros(n * r, kt);
            let mut wt = ComplexMatrix::zeros(n * r, kt);
            for i in 0..n {
                vt.set(i * r, i * send, ONE);
                wt.set(i * r, i, ONE);
            }
            let wt = match kind {
                ZooKind::DoNothing => EpsFamily::Fixed(wt),
                _ => EpsFamily::ColumnMajority { base: wt, n },
            };
            PureStrategy::new(dims, kind.name(), v, EpsFamily::Fixed(w), EpsFamily::Fixed(vt), wt, product_phi(k))
        }
        ZooKind::EpsIndependentRandom => PureStrategy::new(
            dims,
            kind.name(),
            random_contraction(kt, n * n * k, &rng.labelled("V", 0)),
            EpsFamily::Fixed(random_contraction(kt, k, &rng.labelled("W", 0))),
            EpsFamily::Fixed(random_contraction(n * r, kt, &rng.labelled("Vt", 0))),
            EpsFamily::Fixed(random_contraction(n * r, kt, &rng.labelled("Wt", 0))),
            random_unit(k * k, &rng.labelled("phi", 0)),
        ),
        ZooKind::Random => PureStrategy::new(
            dims,
            kind.name(),
            random_contraction(kt, n * n * k, &rng.labelled("V", 0)),
            EpsFamily::Seeded {
                rows: kt,
                cols: k,
                rng: rng.labelled("W", 0),
            },
            EpsFamily::Seeded {
                rows: n * r,
                cols: kt,
                rng: rng.labelled("Vt", 0),
            },
            EpsFamily::Seeded {
                rows: n * r,
                cols: kt,
                rng: rng.labelled("Wt", 0),
            },
            random_unit(k * k, &rng.labelled("phi", 0)),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::SignVector;

    fn dims(n: usize) -> Dims {
        Dims::new(n, 1, n * n, 1).unwrap()
    }

    #[test]
    fn do_nothing_amplitudes() {
        let s = zoo(ZooKind::DoNothing, dims(2), &SeededRng::new(0, 0)).unwrap();
        let plus = s.amplitude(&SignVector::ones(4)).unwrap();
        assert!((plus.norm_sqr() - 1.0).abs() < 1e-14);
        let one_minus: SignVector = "+++-".parse().unwrap();
        assert!((s.amplitude(&one_minus).unwrap().norm_sqr() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn do_nothing_needs_room() {
        let d = Dims::with_split(3, 1, 6, 1, 3, 2).unwrap();
        assert!(zoo(ZooKind::DoNothing, d, &SeededRng::new(0, 0)).is_err());
    }

    #[test]
    fn names_round_trip() {
        for kind in ZooKind::ALL {
            assert_eq!(kind.name().parse::<ZooKind>().unwrap(), kind);
        }
        assert!("nothing".parse::<ZooKind>().is_err());
    }

    #[test]
    fn random_kinds_are_seed_deterministic() {
        let d = Dims::new(2, 2, 4, 2).unwrap();
        for kind in [ZooKind::Random, ZooKind::EpsIndependentRandom] {
            let a = zoo(kind, d, &SeededRng::new(4, 1)).unwrap();
            let b = zoo(kind, d, &SeededRng::new(4, 1)).unwrap();
            assert_eq!(a, b);
            let c = zoo(kind, d, &SeededRng::new(5, 1)).unwrap();
            assert_ne!(a, c);
        }
    }
}
