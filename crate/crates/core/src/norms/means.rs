use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{norm_value, sign_matrix, NormOptions, NormTag};
use crate::error::{LabError, Result};
use crate::game::{check_enumerable, SignVector};
use crate::linalg::{gaussian_matrix, ComplexVector};
use crate::rng::SeededRng;
use crate::strategies::{EvalMode, ValueMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanNorm {
    pub mean: f64,
    pub stderr: f64,
    pub mode: ValueMode,
    pub samples: u64,
}

fn summarize(vals: &[f64], mode: ValueMode) -> MeanNorm {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let stderr = match mode {
        ValueMode::Exact => 0.0,
        ValueMode::MonteCarlo => {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        }
    };
    MeanNorm {
        mean,
        stderr,
        mode,
        samples: vals.len() as u64,
    }
}

/// `E_ε ‖Σ ε_ij |i⟩⟨j|‖_X` over `n × n` sign matrices.
pub fn rademacher_mean_norm(space: &NormTag, n: usize, mode: &EvalMode, opts: &NormOptions) -> Result<MeanNorm> {
    if space.ambient_dim() != n * n {
        return Err(LabError::Shape(format!("{} does not hold {n}x{n} matrices", space.name())));
    }
    let m = n * n;
    let eval = |e: &SignVector| norm_value(space, &sign_matrix(e), opts);
    match mode {
        EvalMode::Exact => {
            check_enumerable(m)?;
            // The norm is even, so half the cube suffices.
            let half = if m == 0 { 1 } else { 1u64 << (m - 1) };
            let vals = (0..half)
                .into_par_iter()
                .map(|idx| eval(&SignVector::from_index(m, idx)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(summarize(&vals, ValueMode::Exact))
        }
        EvalMode::MonteCarlo { samples, rng } => {
            if *samples < 2 {
                return Err(LabError::Precondition("Monte Carlo needs at least 2 samples".into()));
            }
            let vals = (0..*samples as u64)
                .into_par_iter()
                .map(|t| eval(&SignVector::random(m, &rng.child(t))))
                .collect::<Result<Vec<f64>>>()?;
            Ok(summarize(&vals, ValueMode::MonteCarlo))
        }
    }
}

/// Monte Carlo `E‖G‖_X` for a standard complex Gaussian element of `X`.
pub fn gaussian_mean_norm(space: &NormTag, samples: usize, rng: &SeededRng, opts: &NormOptions) -> Result<MeanNorm> {
    if samples < 2 {
        return Err(LabError::Precondition("Monte Carlo needs at least 2 samples".into()));
    }
    let dim = space.ambient_dim();
    let vals = (0..samples as u64)
        .into_par_iter()
        .map(|t| {
            let g: ComplexVector = gaussian_matrix(dim, 1, &rng.child(t)).into();
            norm_value(space, &g, opts)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(&vals, ValueMode::MonteCarlo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m2_exact_mean() {
        let r = rademacher_mean_norm(&NormTag::Operator { rows: 2, cols: 2 }, 2, &EvalMode::Exact, &NormOptions::default())
            .unwrap();
        assert!((r.mean - (2.0 + 2f64.sqrt()) / 2.0).abs() < 1e-12);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn m3_monte_carlo_agrees_with_enumeration() {
        let tag = NormTag::Operator { rows: 3, cols: 3 };
        let exact = rademacher_mean_norm(&tag, 3, &EvalMode::Exact, &NormOptions::default()).unwrap();
        let mc = rademacher_mean_norm(
            &tag,
            3,
            &EvalMode::MonteCarlo {
                samples: 2000,
                rng: SeededRng::new(5, 0),
            },
            &NormOptions::default(),
        )
        .unwrap();
        assert!((mc.mean - exact.mean).abs() <= 3.0 * mc.stderr);
    }

    #[test]
    fn euclidean_gaussian_mean() {
        let r = gaussian_mean_norm(&NormTag::Euclidean { dim: 100 }, 200, &SeededRng::new(1, 0), &NormOptions::default())
            .unwrap();
        assert!((r.mean / 10.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn preconditions() {
        let tag = NormTag::Operator { rows: 2, cols: 2 };
        assert!(rademacher_mean_norm(&tag, 3, &EvalMode::Exact, &NormOptions::default()).is_err());
        assert!(gaussian_mean_norm(&tag, 1, &SeededRng::new(0, 0), &NormOptions::default()).is_err());
    }
}
