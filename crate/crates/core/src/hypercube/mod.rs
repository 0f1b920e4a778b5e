//! Vector-valued functions on the hypercube `Q_m = {±1}^m`.
//!
//! For `F: Q_m → X` the discrete derivative is
//! `∂_i F(ε) = (F(ε) − F(ε with ε_i flipped)) / 2` and the regularity
//! parameter is `σ_F = log(m) · E_ε (Σ_i ‖∂_i F(ε)‖²)^{1/2}` (natural log).

mod maps;

pub use maps::{
    appendix_bounds, lemma_main1_gap, phi, phi_i_matrix, phi_ii_tensor, phi_iii_tensor, AppendixBounds, GapReport,
    PhiVariant,
};

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::game::{check_enumerable, SignVector};
use crate::linalg::{ComplexVector, C64, ZERO};
use crate::norms::{evaluate, Certification, NormOptions, NormResult, NormTag};
use crate::strategies::{EvalMode, ValueMode};

type Eval = dyn Fn(&SignVector) -> Result<ComplexVector> + Send + Sync;

/// `F: Q_m → X` with `X` given by a norm tag. The evaluator must be pure.
#[derive(Clone)]
pub struct HypercubeFunction {
    m: usize,
    space: NormTag,
    eval: Arc<Eval>,
}

impl fmt::Debug for HypercubeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HypercubeFunction")
            .field("m", &self.m)
            .field("space", &self.space)
            .finish_non_exhaustive()
    }
}

impl HypercubeFunction {
    pub fn new<F>(m: usize, space: NormTag, eval: F) -> Self
    where
        F: Fn(&SignVector) -> Result<ComplexVector> + Send + Sync + 'static,
    {
        Self {
            m,
            space,
            eval: Arc::new(eval),
        }
    }

    /// `ε ↦ scale · Σ_j ε_j x_j`.
    pub fn linear(space: NormTag, xs: Vec<ComplexVector>, scale: f64) -> Result<Self> {
        let dim = space.ambient_dim();
        if xs.iter().any(|x| x.dim() != dim) {
            return Err(LabError::Shape(format!("linear map vectors must live in {}", space.name())));
        }
        let m = xs.len();
        Ok(Self::new(m, space, move |eps| {
            let mut acc = vec![ZERO; dim];
            for (j, x) in xs.iter().enumerate() {
                let s = eps.sign(j) * scale;
                for (a, z) in acc.iter_mut().zip(x.as_slice()) {
                    *a += z * s;
                }
            }
            Ok(ComplexVector::new(acc))
        }))
    }

    pub fn constant(m: usize, space: NormTag, x: ComplexVector) -> Result<Self> {
        if x.dim() != space.ambient_dim() {
            return Err(LabError::Shape(format!("constant must live in {}", space.name())));
        }
        Ok(Self::new(m, space, move |_| Ok(x.clone())))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn space(&self) -> NormTag {
        self.space
    }

    pub fn eval(&self, eps: &SignVector) -> Result<ComplexVector> {
        if eps.len() != self.m {
            return Err(LabError::Shape(format!("sign vector of length {} on Q_{}", eps.len(), self.m)));
        }
        let y = (self.eval)(eps)?;
        if y.dim() != self.space.ambient_dim() {
            return Err(LabError::Shape(format!(
                "evaluator returned dimension {} for {}",
                y.dim(),
                self.space.name()
            )));
        }
        Ok(y)
    }

    /// All values in enumeration order.
    fn table(&self) -> Result<Vec<ComplexVector>> {
        check_enumerable(self.m)?;
        (0..1u64 << self.m)
            .into_par_iter()
            .map(|idx| self.eval(&SignVector::from_index(self.m, idx)))
            .collect()
    }
}

fn half_difference(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    ComplexVector::new(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * 0.5).collect())
}

fn flip_index(m: usize, idx: u64, i: usize) -> u64 {
    idx ^ (1u64 << (m - 1 - i))
}

pub fn derivative(f: &HypercubeFunction, eps: &SignVector, i: usize) -> Result<ComplexVector> {
    if i >= f.m {
        return Err(LabError::Precondition(format!("direction {i} out of range for Q_{}", f.m)));
    }
    Ok(half_difference(&f.eval(eps)?, &f.eval(&eps.flipped(i))?))
}

fn norm_with_cert(tag: &NormTag, x: &ComplexVector, opts: &NormOptions) -> Result<(f64, Certification)> {
    let r = evaluate(tag, x, opts)?;
    Ok((r.value, r.certification))
}

fn fold_cert(certs: impl IntoIterator<Item = Certification>) -> Certification {
    certs.into_iter().fold(Certification::Exact, Certification::combine)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    pub sigma: f64,
    pub mode: ValueMode,
    pub samples: u64,
    pub stderr: f64,
    /// `E_ε ‖∂_i F(ε)‖²` for each direction.
    pub per_direction: Vec<f64>,
    pub log_prefactor: f64,
    pub certification: Certification,
}

/// `σ_F`, exact by enumeration or Monte Carlo over `ε`.
pub fn sigma(f: &HypercubeFunction, mode: &EvalMode, opts: &NormOptions) -> Result<SigmaReport> {
    let m = f.m;
    let log_prefactor = (m as f64).ln();
    if m == 0 {
        return Ok(SigmaReport {
            sigma: 0.0,
            mode: ValueMode::Exact,
            samples: 1,
            stderr: 0.0,
            per_direction: vec![],
            log_prefactor,
            certification: Certification::Exact,
        });
    }
    let tag = f.space;
    // rows[s][i] = ‖∂_i F(ε_s)‖ for each sampled ε.
    let (rows, certs, value_mode): (Vec<Vec<f64>>, Vec<Certification>, ValueMode) = match mode {
        EvalMode::Exact => {
            let table = f.table()?;
            let size = table.len() as u64;
            // ∂_i F is odd in ε_i, so only points with ε_i = +1 are evaluated.
            let pairs: Vec<(u64, usize)> = (0..size)
                .flat_map(|idx| (0..m).filter(move |&i| idx & (1u64 << (m - 1 - i)) == 0).map(move |i| (idx, i)))
                .collect();
            let norms = pairs
                .par_iter()
                .map(|&(idx, i)| {
                    let d = half_difference(&table[idx as usize], &table[flip_index(m, idx, i) as usize]);
                    norm_with_cert(&tag, &d, opts)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rows = vec![vec![0.0; m]; size as usize];
            let mut certs = Vec::with_capacity(norms.len());
            for (&(idx, i), &(v, c)) in pairs.iter().zip(&norms) {
                rows[idx as usize][i] = v;
                rows[flip_index(m, idx, i) as usize][i] = v;
                certs.push(c);
            }
            (rows, certs, ValueMode::Exact)
        }
        EvalMode::MonteCarlo { samples, rng } => {
            if *samples < 2 {
                return Err(LabError::Precondition("Monte Carlo needs at least 2 samples".into()));
            }
            let out = (0..*samples as u64)
                .into_par_iter()
                .map(|t| {
                    let eps = SignVector::random(m, &rng.child(t));
                    let base = f.eval(&eps)?;
                    (0..m)
                        .map(|i| {
                            let d = half_difference(&base, &f.eval(&eps.flipped(i))?);
                            norm_with_cert(&tag, &d, opts)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let certs = out.iter().flatten().map(|&(_, c)| c).collect();
            let rows = out.into_iter().map(|r| r.into_iter().map(|(v, _)| v).collect()).collect();
            (rows, certs, ValueMode::MonteCarlo)
        }
    };
    let count = rows.len() as f64;
    let roots: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mean = roots.iter().sum::<f64>() / count;
    let stderr = match value_mode {
        ValueMode::Exact => 0.0,
        ValueMode::MonteCarlo => {
            let var = roots.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
            log_prefactor * (var / count).sqrt()
        }
    };
    let per_direction = (0..m).map(|i| rows.iter().map(|r| r[i] * r[i]).sum::<f64>() / count).collect();
    let mut certification = fold_cert(certs);
    if value_mode == ValueMode::MonteCarlo {
        certification = Certification::Heuristic;
    }
    Ok(SigmaReport {
        sigma: log_prefactor * mean,
        mode: value_mode,
        samples: rows.len() as u64,
        stderr,
        per_direction,
        log_prefactor,
        certification,
    })
}

/// Both sides of Pisier's inequality with `p = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PisierReport {
    /// `E_ε ‖F(ε) − E F‖`.
    pub lhs: f64,
    /// `log(m) · E_{ε,ε̃} ‖Σ_i ε̃_i ∂_i F(ε)‖`.
    pub rhs: f64,
    /// `lhs / rhs`; `None` when `rhs` vanishes.
    pub ratio: Option<f64>,
    pub mode: ValueMode,
    pub samples: u64,
    pub certification: Certification,
}

/// Exact when `2m` is within the enumeration cap and the mode is exact.
pub fn pisier_check(f: &HypercubeFunction, mode: &EvalMode, opts: &NormOptions) -> Result<PisierReport> {
    let m = f.m;
    let tag = f.space;
    let dim = tag.ambient_dim();
    let combine = |derivs: &[ComplexVector], signs: &SignVector| {
        let mut acc = vec![ZERO; dim];
        for (i, d) in derivs.iter().enumerate() {
            let s = signs.sign(i);
            for (a, z) in acc.iter_mut().zip(d.as_slice()) {
                *a += z * s;
            }
        }
        ComplexVector::new(acc)
    };
    let centered = |y: &ComplexVector, mean: &ComplexVector| {
        ComplexVector::new(y.as_slice().iter().zip(mean.as_slice()).map(|(a, b)| a - b).collect())
    };
    let (lhs_vals, rhs_vals, value_mode) = match mode {
        EvalMode::Exact => {
            check_enumerable(2 * m)?;
            let table = f.table()?;
            let mean = coordinate_mean(&table, dim);
            let size = table.len() as u64;
            let derivs: Vec<Vec<ComplexVector>> = (0..size)
                .map(|idx| {
                    (0..m)
                        .map(|i| half_difference(&table[idx as usize], &table[flip_index(m, idx, i) as usize]))
                        .collect()
                })
                .collect();
            let lhs = table
                .par_iter()
                .map(|y| norm_with_cert(&tag, &centered(y, &mean), opts))
                .collect::<Result<Vec<_>>>()?;
            let rhs = (0..size * size)
                .into_par_iter()
                .map(|p| {
                    let signs = SignVector::from_index(m, p % size);
                    norm_with_cert(&tag, &combine(&derivs[(p / size) as usize], &signs), opts)
                })
                .collect::<Result<Vec<_>>>()?;
            (lhs, rhs, ValueMode::Exact)
        }
        EvalMode::MonteCarlo { samples, rng } => {
            if *samples < 2 {
                return Err(LabError::Precondition("Monte Carlo needs at least 2 samples".into()));
            }
            // The centering uses the exact mean where it is enumerable.
            let mean = if check_enumerable(m).is_ok() {
                coordinate_mean(&f.table()?, dim)
            } else {
                let draws = (0..*samples as u64)
                    .into_par_iter()
                    .map(|t| f.eval(&SignVector::random(m, &rng.labelled("mean", t))))
                    .collect::<Result<Vec<_>>>()?;
                coordinate_mean(&draws, dim)
            };
            let out = (0..*samples as u64)
                .into_par_iter()
                .map(|t| {
                    let eps = SignVector::random(m, &rng.labelled("eps", t));
                    let other = SignVector::random(m, &rng.labelled("tilde", t));
                    let base = f.eval(&eps)?;
                    let derivs = (0..m)
                        .map(|i| Ok(half_difference(&base, &f.eval(&eps.flipped(i))?)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((norm_with_cert(&tag, &centered(&base, &mean), opts)?, norm_with_cert(&tag, &combine(&derivs, &other), opts)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let (l, r): (Vec<_>, Vec<_>) = out.into_iter().unzip();
            (l, r, ValueMode::MonteCarlo)
        }
    };
    let mean_of = |v: &[(f64, Certification)]| v.iter().map(|x| x.0).sum::<f64>() / v.len() as f64;
    let lhs = mean_of(&lhs_vals);
    let rhs = (m as f64).ln() * mean_of(&rhs_vals);
    let certification = match value_mode {
        ValueMode::Exact => fold_cert(lhs_vals.iter().chain(&rhs_vals).map(|x| x.1)),
        ValueMode::MonteCarlo => Certification::Heuristic,
    };
    Ok(PisierReport {
        lhs,
        rhs,
        ratio: (rhs > 0.0).then(|| lhs / rhs),
        mode: value_mode,
        samples: rhs_vals.len() as u64,
        certification,
    })
}

fn coordinate_mean(values: &[ComplexVector], dim: usize) -> ComplexVector {
    let mut acc = vec![ZERO; dim];
    for y in values {
        for (a, z) in acc.iter_mut().zip(y.as_slice()) {
            *a += z;
        }
    }
    let w = 1.0 / values.len() as f64;
    ComplexVector::new(acc.into_iter().map(|z| z * C64::new(w, 0.0)).collect())
}

/// `E_ε F(ε)` in coordinates, by enumeration.
pub fn mean_value(f: &HypercubeFunction) -> Result<ComplexVector> {
    Ok(coordinate_mean(&f.table()?, f.space.ambient_dim()))
}

/// `‖E_ε F(ε)‖` in the tagged norm.
pub fn norm_of_mean(f: &HypercubeFunction, opts: &NormOptions) -> Result<NormResult> {
    evaluate(&f.space, &mean_value(f)?, opts)
}
