//! The maps `Φ^i, Φ^ii, Φ^iii: Q_{n²} → X` built from a pure strategy.
//!
//! All three are normalized by `c_ij = ε_ij / n²`. With `Z_ij` the
//! exchanged first-round block of `(V|ij⟩ ⊗ W_ε)|φ⟩` and `α = (a_keep,
//! b_send)`, `β = (b_keep, a_send)`:
//!
//! * `Φ^i(ε)` is the `r² × k k̃` matrix sending `(Id ⊗ W_ε)|φ⟩` to `a(ε)`;
//! * `Φ^ii(ε)[(i,α),(j,β)] = c_ij Z_ij[α,β]`;
//! * `Φ^iii(ε)` is the linear map `x ↦ [c_ij (exchange(V_ij x))[α,β]]`
//!   from `ℓ₂^{k k̃}` with `Φ^iii(ε)((Id ⊗ W_ε)|φ⟩) = Φ^ii(ε)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HypercubeFunction;
use crate::error::{LabError, Result};
use crate::game::{check_enumerable, SignVector};
use crate::linalg::{kron, ComplexMatrix, ComplexVector, ZERO};
use crate::norms::{wcb_schatten2_lower, Certification, NormOptions, NormTag, WcbWitness, WeakTensor};
use crate::strategies::{Dims, EvalMode, PureStrategy, ValueMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiVariant {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    Ii,
    #[serde(rename = "iii")]
    Iii,
}

impl FromStr for PhiVariant {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i" | "1" => Ok(PhiVariant::I),
            "ii" | "2" => Ok(PhiVariant::Ii),
            "iii" | "3" => Ok(PhiVariant::Iii),
            other => Err(LabError::Format(format!("unknown map variant {other:?} (expected i, ii or iii)"))),
        }
    }
}

impl fmt::Display for PhiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhiVariant::I => "i",
            PhiVariant::Ii => "ii",
            PhiVariant::Iii => "iii",
        })
    }
}

impl PhiVariant {
    pub fn space(&self, d: &Dims) -> NormTag {
        match self {
            PhiVariant::I => NormTag::Operator {
                rows: d.r * d.r,
                cols: d.k * d.kt,
            },
            PhiVariant::Ii => NormTag::WSchatten2cb { kt: d.kt, n: d.n },
            PhiVariant::Iii => NormTag::WSchatten2cbState {
                kt: d.kt,
                n: d.n,
                state_dim: d.k * d.kt,
            },
        }
    }
}

/// `Φ^i(ε)`, column index `m · k̃ + y`.
pub fn phi_i_matrix(s: &PureStrategy, eps: &SignVector) -> Result<ComplexMatrix> {
    let Dims {
        n, k, kt, r, keep, send, ..
    } = s.dims();
    check_len(s, eps)?;
    let vt = s.vt().at(eps)?;
    let wt = s.wt().at(eps)?;
    let w = 1.0 / (n * n) as f64;
    let mut out = ComplexMatrix::zeros(r * r, k * kt);
    for i in 0..n {
        for j in 0..n {
            let ij = i * n + j;
            let c = eps.sign(ij) * w;
            let vij = s.v_slice(ij);
            for a in 0..r {
                for b in 0..r {
                    let row = a * r + b;
                    for bk in 0..keep {
                        for bs in 0..send {
                            let y = bk * send + bs;
                            for m in 0..k {
                                let mut acc = ZERO;
                                for ak in 0..keep {
                                    let left = vt.get(i * r + a, ak * send + bs);
                                    if left == ZERO {
                                        continue;
                                    }
                                    for asend in 0..send {
                                        acc += left
                                            * wt.get(j * r + b, bk * send + asend)
                                            * vij.get(ak * send + asend, m);
                                    }
                                }
                                out.add_at(row, m * kt + y, acc * c);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `Φ^ii(ε)` as an `(n k̃) × (n k̃)` matrix.
pub fn phi_ii_tensor(s: &PureStrategy, eps: &SignVector) -> Result<ComplexMatrix> {
    let Dims { n, kt, .. } = s.dims();
    let z = s.first_round(eps)?;
    let w = 1.0 / (n * n) as f64;
    Ok(ComplexMatrix::from_fn(n * kt, n * kt, |row, col| {
        let (i, j) = (row / kt, col / kt);
        z[i * n + j].get(row % kt, col % kt) * (eps.sign(i * n + j) * w)
    }))
}

/// `Φ^iii(ε)` in the flat layout `(row · n k̃ + col) · k k̃ + c`.
pub fn phi_iii_tensor(s: &PureStrategy, eps: &SignVector) -> Result<ComplexVector> {
    let Dims {
        n, k, kt, keep, send, ..
    } = s.dims();
    check_len(s, eps)?;
    let big = n * kt;
    let state = k * kt;
    let w = 1.0 / (n * n) as f64;
    let mut out = vec![ZERO; big * big * state];
    for i in 0..n {
        for j in 0..n {
            let ij = i * n + j;
            let c = eps.sign(ij) * w;
            let vij = s.v_slice(ij);
            for ak in 0..keep {
                for asend in 0..send {
                    for bk in 0..keep {
                        for bs in 0..send {
                            let row = i * kt + ak * send + bs;
                            let col = j * kt + bk * send + asend;
                            let y = bk * send + bs;
                            for m in 0..k {
                                out[(row * big + col) * state + m * kt + y] = vij.get(ak * send + asend, m) * c;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ComplexVector::new(out))
}

fn check_len(s: &PureStrategy, eps: &SignVector) -> Result<()> {
    let n = s.dims().n;
    if eps.len() != n * n {
        return Err(LabError::Shape(format!("sign vector of length {} for n = {n}", eps.len())));
    }
    Ok(())
}

/// The hypercube map of `variant` on `Q_{n²}`.
pub fn phi(s: &PureStrategy, variant: PhiVariant) -> Result<HypercubeFunction> {
    s.validate()?;
    let d = s.dims();
    let space = variant.space(&d);
    let s = Arc::new(s.clone());
    Ok(match variant {
        PhiVariant::I => HypercubeFunction::new(d.n * d.n, space, move |e| Ok(phi_i_matrix(&s, e)?.into())),
        PhiVariant::Ii => HypercubeFunction::new(d.n * d.n, space, move |e| Ok(phi_ii_tensor(&s, e)?.into())),
        PhiVariant::Iii => HypercubeFunction::new(d.n * d.n, space, move |e| phi_iii_tensor(&s, e)),
    })
}

/// `ω` against its bounds `E‖Φ^i‖_∞` and `E‖Φ^ii‖_{w-cb}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub omega: f64,
    /// `E_ε ‖Φ^i(ε)‖_∞`.
    pub mean_norm_phi_i: f64,
    /// Certified lower estimate of `E_ε ‖Φ^ii(ε)‖_{w-cb}`.
    pub mean_norm_phi_ii_lb: f64,
    pub slack_i: f64,
    pub slack_ii: f64,
    pub mode: ValueMode,
    pub samples: u64,
    pub stderr_omega: f64,
}

/// Evaluates `ω` and both bounds. The weak-cb search for `Φ^ii(ε)`
/// starts from the strategy's own second round `(Ṽ_ε, W̃_ε)`, which already
/// attains `‖a(ε)‖`.
pub fn lemma_main1_gap(s: &PureStrategy, mode: &EvalMode, opts: &NormOptions) -> Result<GapReport> {
    s.validate()?;
    let d = s.dims();
    let m = d.n * d.n;
    let signs: Vec<SignVector> = match mode {
        EvalMode::Exact => {
            check_enumerable(m)?;
            (0..1u64 << m).map(|idx| SignVector::from_index(m, idx)).collect()
        }
        EvalMode::MonteCarlo { samples, rng } => {
            if *samples < 2 {
                return Err(LabError::Precondition("Monte Carlo needs at least 2 samples".into()));
            }
            (0..*samples as u64).map(|t| SignVector::random(m, &rng.child(t))).collect()
        }
    };
    let rows = signs
        .par_iter()
        .map(|e| {
            let p = s.success_probability(e)?;
            let a = phi_i_matrix(s, e)?.op_norm()?;
            let t = WeakTensor::plain(phi_ii_tensor(s, e)?, d.kt, d.n)?;
            let warm = WcbWitness {
                r: d.r,
                h: s.vt().at(e)?.into_owned(),
                g: s.wt().at(e)?.into_owned(),
                x: None,
            };
            let b = wcb_schatten2_lower(&t, opts, Some(&warm))?.value;
            Ok((p, a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = rows.len() as f64;
    let omega = rows.iter().map(|r| r.0).sum::<f64>() / count;
    let phi_i = rows.iter().map(|r| r.1).sum::<f64>() / count;
    let phi_ii = rows.iter().map(|r| r.2).sum::<f64>() / count;
    let (value_mode, stderr_omega) = match mode {
        EvalMode::Exact => (ValueMode::Exact, 0.0),
        EvalMode::MonteCarlo { .. } => {
            let var = rows.iter().map(|r| (r.0 - omega).powi(2)).sum::<f64>() / (count - 1.0);
            (ValueMode::MonteCarlo, (var / count).sqrt())
        }
    };
    Ok(GapReport {
        omega,
        mean_norm_phi_i: phi_i,
        mean_norm_phi_ii_lb: phi_ii,
        slack_i: phi_i - omega,
        slack_ii: phi_ii - omega,
        mode: value_mode,
        samples: rows.len() as u64,
        stderr_omega,
    })
}

/// Closed-form upper bounds on `σ^i` and `σ^ii`:
///
/// ```text
/// σ^i  ≤ log(n²) E_ε (Σ_ij (½‖Ṽ_ε⊗W̃_ε − Ṽ_ε̄⊗W̃_ε̄‖_∞ + 2/n²)²)^{1/2}
/// σ^ii ≤ log(n²) E_ε (Σ_ij (½‖(Id ⊗ (W_ε − W_ε̄))|φ⟩‖₂ + 2/n²)²)^{1/2}
/// ```
///
/// with `ε̄ = ε` flipped at `ij`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixBounds {
    pub sigma_i_upper: f64,
    pub sigma_ii_upper: f64,
    pub mode: ValueMode,
    pub samples: u64,
    pub certification: Certification,
}

pub fn appendix_bounds(s: &PureStrategy, mode: &EvalMode) -> Result<AppendixBounds> {
    s.validate()?;
    let d = s.dims();
    let m = d.n * d.n;
    let extra = 2.0 / m as f64;
    let signs: Vec<SignVector> = match mode {
        EvalMode::Exact => {
            check_enumerable(m)?;
            (0..1u64 << m).map(|idx| SignVector::from_index(m, idx)).collect()
        }
        EvalMode::MonteCarlo { samples, rng } => {
            if *samples < 2 {
                return Err(LabError::Precondition("Monte Carlo needs at least 2 samples".into()));
            }
            (0..*samples as u64).map(|t| SignVector::random(m, &rng.child(t))).collect()
        }
    };
    let phi_mat = s.phi_matrix();
    let second = |e: &SignVector| -> Result<ComplexMatrix> { kron(&*s.vt().at(e)?, &*s.wt().at(e)?) };
    let first = |e: &SignVector| -> Result<ComplexMatrix> { Ok(phi_mat.matmul(&s.w().at(e)?.transpose())) };
    let constant_second = s.vt().is_constant() && s.wt().is_constant();
    let rows = signs
        .par_iter()
        .map(|e| {
            let base2 = if constant_second { None } else { Some(second(e)?) };
            let base1 = first(e)?;
            let mut acc_i = 0.0;
            let mut acc_ii = 0.0;
            for ij in 0..m {
                let flipped = e.flipped(ij);
                let di = match &base2 {
                    None => 0.0,
                    Some(b) => b.sub(&second(&flipped)?).op_norm()?,
                };
                let dii = base1.sub(&first(&flipped)?).fro_norm();
                acc_i += (0.5 * di + extra).powi(2);
                acc_ii += (0.5 * dii + extra).powi(2);
            }
            Ok((acc_i.sqrt(), acc_ii.sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = rows.len() as f64;
    let log = (m as f64).ln();
    let (value_mode, certification) = match mode {
        EvalMode::Exact => (ValueMode::Exact, Certification::UpperBound),
        EvalMode::MonteCarlo { .. } => (ValueMode::MonteCarlo, Certification::Heuristic),
    };
    Ok(AppendixBounds {
        sigma_i_upper: log * rows.iter().map(|r| r.0).sum::<f64>() / count,
        sigma_ii_upper: log * rows.iter().map(|r| r.1).sum::<f64>() / count,
        mode: value_mode,
        samples: rows.len() as u64,
        certification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::{derivative, norm_of_mean, sigma};
    use crate::rng::SeededRng;
    use crate::strategies::{zoo, ZooKind};

    fn random_strategy(n: usize, k: usize, kt: usize, r: usize, seed: u64) -> PureStrategy {
        zoo(ZooKind::Random, Dims::new(n, k, kt, r).unwrap(), &SeededRng::new(seed, 0)).unwrap()
    }

    #[test]
    fn phi_i_maps_the_first_round_state_to_the_amplitude() {
        let s = random_strategy(2, 2, 4, 2, 3);
        let d = s.dims();
        for idx in [0u64, 5, 11] {
            let e = SignVector::from_index(4, idx);
            let x = s.phi_matrix().matmul(&s.w().at(&e).unwrap().transpose());
            let xv: ComplexVector = ComplexMatrix::from_fn(d.k * d.kt, 1, |c, _| x.get(c / d.kt, c % d.kt)).into();
            let a = phi_i_matrix(&s, &e).unwrap().matvec(&xv);
            let want = s.amplitude(&e).unwrap();
            let diff: f64 = a.as_slice().iter().zip(want.as_slice()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn phi_iii_contracts_to_phi_ii() {
        let s = random_strategy(2, 2, 4, 2, 4);
        let d = s.dims();
        let e = SignVector::from_index(4, 9);
        let x = s.phi_matrix().matmul(&s.w().at(&e).unwrap().transpose());
        let flat = phi_iii_tensor(&s, &e).unwrap();
        let t = WeakTensor::from_flat(flat.as_slice(), d.kt, d.n, d.k * d.kt).unwrap();
        let mut acc = ComplexMatrix::zeros(d.n * d.kt, d.n * d.kt);
        for (c, slice) in t.slices().iter().enumerate() {
            acc.axpy(x.get(c / d.kt, c % d.kt), slice);
        }
        assert!(acc.max_abs_diff(&phi_ii_tensor(&s, &e).unwrap()) < 1e-12);
    }

    #[test]
    fn phi_i_is_normalized() {
        for seed in 0..5 {
            let s = random_strategy(2, 1, 4, 2, seed);
            for idx in 0..16 {
                let e = SignVector::from_index(4, idx);
                assert!(phi_i_matrix(&s, &e).unwrap().op_norm().unwrap() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn phi_iii_is_linear_and_centered() {
        let s = random_strategy(2, 1, 4, 2, 8);
        let f = phi(&s, PhiVariant::Iii).unwrap();
        let opts = NormOptions::default();
        let mean = norm_of_mean(&f, &opts).unwrap();
        assert!(mean.value <= 1e-12);
        for i in 0..4 {
            let a = derivative(&f, &SignVector::from_index(4, 0), i).unwrap();
            let b = derivative(&f, &SignVector::from_index(4, 13), i).unwrap();
            let same = a.as_slice().iter().zip(b.as_slice()).all(|(p, q)| (p - q).norm() < 1e-14 || (p + q).norm() < 1e-14);
            assert!(same);
        }
        let sg = sigma(&f, &EvalMode::Exact, &opts).unwrap();
        assert!(sg.sigma <= 4f64.ln() / 2.0 * (1.0 + 1e-6));
        assert_eq!(sg.certification, Certification::Exact);
    }

    #[test]
    fn gap_on_zoo_strategies() {
        let opts = NormOptions {
            restarts: 1,
            iters: 30,
            ..NormOptions::default()
        };
        let d = Dims::new(2, 1, 4, 2).unwrap();
        let rng = SeededRng::new(0, 0);
        let g = lemma_main1_gap(&zoo(ZooKind::DoNothing, d, &rng).unwrap(), &EvalMode::Exact, &opts).unwrap();
        assert!((g.omega - 0.25).abs() < 1e-12);
        assert!(g.slack_i >= -1e-9 && g.slack_ii >= -1e-9);
        let g = lemma_main1_gap(&zoo(ZooKind::ColumnMajority, d, &rng).unwrap(), &EvalMode::Exact, &opts).unwrap();
        assert!((g.omega - 0.375).abs() < 1e-12);
        assert!(g.slack_i > 0.0);
    }

    #[test]
    fn appendix_bounds_dominate_sigma() {
        let d = Dims::new(2, 1, 4, 2).unwrap();
        let s = zoo(ZooKind::EpsIndependentRandom, d, &SeededRng::new(2, 0)).unwrap();
        let b = appendix_bounds(&s, &EvalMode::Exact).unwrap();
        let si = sigma(&phi(&s, PhiVariant::I).unwrap(), &EvalMode::Exact, &NormOptions::default()).unwrap();
        assert!(si.sigma <= b.sigma_i_upper + 1e-12);
        assert!((b.sigma_i_upper - 4f64.ln()).abs() < 1e-12);
    }
}
