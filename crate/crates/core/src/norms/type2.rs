//! Type-2 constants with `m` vectors and the 2-summing norm of identities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Certification, NormOptions, NormTag};
use crate::error::{LabError, Result};
use crate::game::{check_enumerable, SignVector};
use crate::linalg::{gaussian_matrix, ComplexVector, C64, ONE};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeMode {
    /// Expectation over all `2^m` signs.
    ExactExpectation,
    /// A fixed seeded sample of sign vectors.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Certified lower bound on `T₂^{(m)}(X)` with its witness family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeEstimate {
    pub space: NormTag,
    pub m: usize,
    pub lower: f64,
    pub witness: Vec<ComplexVector>,
    pub mode: TypeMode,
    pub budget: NormOptions,
    pub certification: Certification,
}

/// Sign sample used for the expectation: half the cube (first sign fixed,
/// the norm is even) in exact mode.
fn sign_sample(m: usize, mode: &TypeMode) -> Result<Vec<SignVector>> {
    match mode {
        TypeMode::ExactExpectation => {
            check_enumerable(m)?;
            let half = if m == 0 { 1 } else { 1u64 << (m - 1) };
            Ok((0..half).map(|idx| SignVector::from_index(m, idx)).collect())
        }
        TypeMode::MonteCarlo { samples, seed } => {
            let root = SeededRng::new(*seed, 0x7e);
            Ok((0..*samples as u64).map(|t| SignVector::random(m, &root.child(t))).collect())
        }
    }
}

fn norm_of(tag: &NormTag, x: &ComplexVector) -> Result<f64> {
    tag.exact_norm(x)?
        .ok_or_else(|| LabError::Unsupported(format!("type-2 search needs a closed-form norm, got {}", tag.name())))
}

fn signed_sum(xs: &[ComplexVector], eps: &SignVector) -> ComplexVector {
    let dim = xs.first().map(|x| x.dim()).unwrap_or(0);
    let mut acc = vec![C64::new(0.0, 0.0); dim];
    for (t, x) in xs.iter().enumerate() {
        let s = eps.sign(t);
        for (a, z) in acc.iter_mut().zip(x.as_slice()) {
            *a += z * s;
        }
    }
    ComplexVector::new(acc)
}

/// `(E‖Σ ε_i x_i‖² / Σ‖x_i‖²)^{1/2}` over the given signs.
fn ratio(tag: &NormTag, xs: &[ComplexVector], signs: &[SignVector]) -> Result<f64> {
    let den: f64 = xs.iter().map(|x| norm_of(tag, x).map(|v| v * v)).sum::<Result<f64>>()?;
    if den == 0.0 {
        return Ok(0.0);
    }
    let num = signs
        .par_iter()
        .map(|e| norm_of(tag, &signed_sum(xs, e)).map(|v| v * v))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / signs.len() as f64;
    Ok((num / den).sqrt())
}

/// Gradient of `log(E‖S_ε‖²) − log(Σ‖x_i‖²)` in each `x_t`.
fn log_ratio_gradient(tag: &NormTag, xs: &[ComplexVector], signs: &[SignVector]) -> Result<Vec<ComplexVector>> {
    let m = xs.len();
    let dim = xs[0].dim();
    let parts = signs
        .par_iter()
        .map(|e| {
            let s = signed_sum(xs, e);
            let v = norm_of(tag, &s)?;
            let f = tag.subgradient(&s)?.expect("closed-form tag");
            Ok((v, e.clone(), f))
        })
        .collect::<Result<Vec<_>>>()?;
    let q: f64 = parts.iter().map(|(v, _, _)| v * v).sum::<f64>() / signs.len() as f64;
    let mut d = 0.0;
    let mut grads = vec![vec![C64::new(0.0, 0.0); dim]; m];
    for (v, e, f) in &parts {
        for (t, g) in grads.iter_mut().enumerate() {
            let w = 2.0 * v * e.sign(t) / signs.len() as f64 / q.max(f64::MIN_POSITIVE);
            for (gi, fi) in g.iter_mut().zip(f.as_slice()) {
                *gi += fi * w;
            }
        }
    }
    let norms: Vec<f64> = xs.iter().map(|x| norm_of(tag, x)).collect::<Result<_>>()?;
    for v in &norms {
        d += v * v;
    }
    for (t, x) in xs.iter().enumerate() {
        if norms[t] > 0.0 {
            let f = tag.subgradient(x)?.expect("closed-form tag");
            let w = 2.0 * norms[t] / d;
            for (gi, fi) in grads[t].iter_mut().zip(f.as_slice()) {
                *gi -= fi * w;
            }
        }
    }
    Ok(grads.into_iter().map(ComplexVector::new).collect())
}

fn normalize_family(tag: &NormTag, xs: Vec<ComplexVector>) -> Result<Vec<ComplexVector>> {
    let d: f64 = xs.iter().map(|x| norm_of(tag, x).map(|v| v * v)).sum::<Result<f64>>()?;
    if d == 0.0 {
        return Ok(xs);
    }
    let s = 1.0 / d.sqrt();
    Ok(xs.into_iter().map(|x| x.scale_real(s)).collect())
}

/// Gradient ascent with backtracking; a step is taken only if it raises
/// the ratio.
fn ascend(tag: &NormTag, mut xs: Vec<ComplexVector>, signs: &[SignVector], opts: &NormOptions) -> Result<(f64, Vec<ComplexVector>)> {
    xs = normalize_family(tag, xs)?;
    let mut value = ratio(tag, &xs, signs)?;
    let mut step = 0.5;
    for _ in 0..opts.iters {
        let grads = log_ratio_gradient(tag, &xs, signs)?;
        let gnorm: f64 = grads.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
        if gnorm < 1e-14 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<ComplexVector> = xs
                .iter()
                .zip(&grads)
                .map(|(x, g)| {
                    ComplexVector::new(x.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a + b * (step / gnorm)).collect())
                })
                .collect();
            let trial = normalize_family(tag, trial)?;
            let v = ratio(tag, &trial, signs)?;
            if v > value {
                improved = v - value > opts.tol;
                value = v;
                xs = trial;
                step = (step * 2.0).min(2.0);
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((value, xs))
}

/// Structured starting families: ambient basis vectors and, for matrix
/// spaces, diagonal matrix units.
fn canonical_families(tag: &NormTag, m: usize) -> Vec<Vec<ComplexVector>> {
    let dim = tag.ambient_dim();
    let mut out = vec![];
    let basis: Vec<ComplexVector> = (0..m)
        .map(|t| if t < dim { ComplexVector::basis(dim, t) } else { ComplexVector::zeros(dim) })
        .collect();
    out.push(basis);
    let diag = |rows: usize, cols: usize| -> Vec<ComplexVector> {
        (0..m)
            .map(|t| {
                let mut v = ComplexVector::zeros(rows * cols);
                if t < rows.min(cols) {
                    v.as_mut_slice()[t * cols + t] = ONE;
                }
                v
            })
            .collect()
    };
    match *tag {
        NormTag::Operator { rows, cols } | NormTag::TraceClass { rows, cols } => out.push(diag(rows, cols)),
        NormTag::InjectiveL1L1 { n } => out.push(diag(n, n)),
        _ => {}
    }
    out
}

/// Lower bound on the type-2 constant of `space` with `m` vectors.
///
/// `mc_samples = None` takes the exact expectation over signs (requires
/// `2^m` within the enumeration cap).
pub fn type2_lower(space: &NormTag, m: usize, opts: &NormOptions, mc_samples: Option<usize>) -> Result<TypeEstimate> {
    if m == 0 {
        return Err(LabError::Precondition("type-2 estimate needs m ≥ 1".into()));
    }
    norm_of(space, &ComplexVector::zeros(space.ambient_dim()))?;
    let mode = match mc_samples {
        None => TypeMode::ExactExpectation,
        Some(samples) => TypeMode::MonteCarlo {
            samples: samples.max(2),
            seed: opts.rng.seed,
        },
    };
    let signs = sign_sample(m, &mode)?;
    let dim = space.ambient_dim();
    let mut starts = canonical_families(space, m);
    for restart in 0..opts.restarts {
        let rng = opts.rng.labelled("type2", restart as u64);
        starts.push(
            (0..m)
                .map(|t| gaussian_matrix(dim, 1, &rng.child(t as u64)).into())
                .collect(),
        );
    }
    let mut best: Option<(f64, Vec<ComplexVector>)> = None;
    for start in starts {
        let cand = ascend(space, start, &signs, opts)?;
        if best.as_ref().is_none_or(|b| cand.0 > b.0) {
            best = Some(cand);
        }
    }
    let (_, witness) = best.expect("at least one start");
    let lower = ratio(space, &witness, &signs)?;
    Ok(TypeEstimate {
        space: *space,
        m,
        lower,
        witness,
        mode,
        budget: *opts,
        certification: match mode {
            TypeMode::ExactExpectation => Certification::LowerBound,
            TypeMode::MonteCarlo { .. } => Certification::Heuristic,
        },
    })
}

impl TypeEstimate {
    /// Ratio of the stored witness under the stored expectation mode.
    pub fn reevaluate(&self) -> Result<f64> {
        ratio(&self.space, &self.witness, &sign_sample(self.m, &self.mode)?)
    }
}

/// `π₂(Id: X → ℓ₂^d) = √d / ‖Id: ℓ₂^d → X‖` for spaces with enough
/// symmetries.
pub fn pi2_enough_symmetries(d: usize, id_into_norm: f64) -> Result<f64> {
    if !(id_into_norm > 0.0) {
        return Err(LabError::Precondition(format!(
            "‖Id: ℓ₂ → X‖ must be positive, got {id_into_norm}"
        )));
    }
    Ok((d as f64).sqrt() / id_into_norm)
}

/// Lower bound on `‖Id: ℓ₂^d → X‖ = max_{‖x‖₂ = 1} ‖x‖_X` by the iteration
/// `x ← f(x) / ‖f(x)‖₂` with `f` a norming functional; each step does not
/// decrease `‖x‖_X`.
pub fn identity_norm_lower(space: &NormTag, opts: &NormOptions) -> Result<(f64, ComplexVector)> {
    let dim = space.ambient_dim();
    let mut best = (-1.0, ComplexVector::zeros(dim));
    for restart in 0..opts.restarts.max(1) {
        let g: ComplexVector = gaussian_matrix(dim, 1, &opts.rng.labelled("id-norm", restart as u64)).into();
        let mut x = g.scale_real(1.0 / g.norm());
        let mut value = norm_of(space, &x)?;
        for _ in 0..opts.iters {
            let f = space
                .subgradient(&x)?
                .ok_or_else(|| LabError::Unsupported(format!("no norming functional for {}", space.name())))?;
            let fnorm = f.norm();
            if fnorm == 0.0 {
                break;
            }
            let next = f.scale_real(1.0 / fnorm);
            let v = norm_of(space, &next)?;
            if v <= value + opts.tol {
                if v > value {
                    value = v;
                    x = next;
                }
                break;
            }
            value = v;
            x = next;
        }
        if value > best.0 {
            best = (value, x);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(seed: u64) -> NormOptions {
        NormOptions {
            restarts: 3,
            iters: 60,
            r_max: 1,
            tol: 1e-12,
            rng: SeededRng::new(seed, 0),
        }
    }

    #[test]
    fn hilbert_space_has_type_constant_one() {
        for seed in 0..5 {
            let est = type2_lower(&NormTag::Euclidean { dim: 4 }, 4, &opts(seed), None).unwrap();
            assert!(est.lower <= 1.0 + 1e-9);
            assert!((est.lower - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn l1_witness_reaches_sqrt_m() {
        for m in [2usize, 4] {
            let est = type2_lower(&NormTag::L1 { dim: m }, m, &opts(1), None).unwrap();
            assert!(est.lower >= 0.999 * (m as f64).sqrt());
            assert!((est.reevaluate().unwrap() - est.lower).abs() < 1e-12);
        }
    }

    #[test]
    fn pi2_values() {
        assert_eq!(pi2_enough_symmetries(9, 1.0).unwrap(), 3.0);
        assert!(pi2_enough_symmetries(4, 0.0).is_err());
        let (v, _) = identity_norm_lower(&NormTag::TraceClass { rows: 2, cols: 2 }, &opts(2)).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-9);
        assert!((pi2_enough_symmetries(4, v).unwrap() - 2f64.sqrt()).abs() < 1e-9);
        let (e, _) = identity_norm_lower(&NormTag::Euclidean { dim: 5 }, &opts(2)).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimization_tags_are_unsupported() {
        let r = type2_lower(&NormTag::WSchatten2cb { kt: 1, n: 2 }, 2, &opts(0), None);
        assert!(matches!(r, Err(LabError::Unsupported(_))));
    }
}
