//! Banach-space norms on finite-dimensional coordinate spaces.
//!
//! Elements are flat complex vectors; a [`NormTag`] fixes their shape and
//! the norm. Optimization-based norms return certified lower (or upper)
//! bounds together with a witness that reproduces the value.

mod injective;
mod means;
mod type2;
mod weak;

pub use injective::{l1_injective_norm, l1_injective_norm_complex, InjectiveResult, PhaseInjectiveResult};
pub use means::{gaussian_mean_norm, rademacher_mean_norm, MeanNorm};
pub use type2::{identity_norm_lower, pi2_enough_symmetries, type2_lower, TypeEstimate, TypeMode};
pub use weak::{
    projective_upper, wcb_evaluate, wcb_schatten2_lower, wcb_state_lower, w_schatten2_lower, WcbResult,
    WcbWitness, WeakTensor,
};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{ComplexVector, C64, ZERO};
use crate::rng::SeededRng;

/// The normed space an element lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormTag {
    Euclidean { dim: usize },
    L1 { dim: usize },
    LInf { dim: usize },
    /// `M_{rows,cols}` with the operator norm.
    Operator { rows: usize, cols: usize },
    /// `S₁^{rows,cols}`.
    TraceClass { rows: usize, cols: usize },
    /// `ℓ₁^n ⊗_ε ℓ₁^n`, elements are `n × n` matrices.
    InjectiveL1L1 { n: usize },
    /// `S₁^{n,k̃} ⊗ S₁^{n,k̃}` with the weak-cb Schatten-2 norm. Elements
    /// are `(n·k̃) × (n·k̃)` matrices with row index `(i, α) = i·k̃ + α`.
    WSchatten2cb { kt: usize, n: usize },
    /// The weak Schatten-2 norm on the same space.
    WSchatten2 { kt: usize, n: usize },
    /// Weak-cb Schatten-2 norm composed injectively with a Euclidean state
    /// slot: `sup_{‖x‖ ≤ 1} ‖T(x)‖`, where `T(x) = Σ_c x_c T_c`. Flat index
    /// `(row · n k̃ + col) · state_dim + c`.
    WSchatten2cbState { kt: usize, n: usize, state_dim: usize },
    /// Upper bound on the projective norm of `S₁^{n,k̃} ⊗ S₁^{n,k̃}`.
    ProjectiveUpper { kt: usize, n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Exact,
    LowerBound,
    UpperBound,
    Heuristic,
}

impl Certification {
    /// Certification of a quantity that is monotone in several norm values.
    pub fn combine(self, other: Certification) -> Certification {
        use Certification::*;
        match (self, other) {
            (Exact, c) | (c, Exact) => c,
            (a, b) if a == b => a,
            _ => Heuristic,
        }
    }
}

/// Optimizer budget for the optimization-based norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    pub restarts: usize,
    pub iters: usize,
    pub r_max: usize,
    pub tol: f64,
    pub rng: SeededRng,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            restarts: 4,
            iters: 200,
            r_max: 2,
            tol: 1e-12,
            rng: SeededRng::new(0, 0),
        }
    }
}

/// Witness of an optimization-based value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    Signs { s: Vec<f64>, t: Vec<f64> },
    Phases { s: ComplexVector, t: ComplexVector },
    Contractions(WcbWitness),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub tag: NormTag,
    pub value: f64,
    pub certification: Certification,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<NormOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl NormTag {
    /// Number of complex coordinates of an element.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            NormTag::Euclidean { dim } | NormTag::L1 { dim } | NormTag::LInf { dim } => dim,
            NormTag::Operator { rows, cols } | NormTag::TraceClass { rows, cols } => rows * cols,
            NormTag::InjectiveL1L1 { n } => n * n,
            NormTag::WSchatten2cb { kt, n } | NormTag::WSchatten2 { kt, n } | NormTag::ProjectiveUpper { kt, n } => {
                (n * kt) * (n * kt)
            }
            NormTag::WSchatten2cbState { kt, n, state_dim } => (n * kt) * (n * kt) * state_dim,
        }
    }

    /// Certification level of a plain evaluation.
    pub fn certification(&self) -> Certification {
        match self {
            NormTag::Euclidean { .. }
            | NormTag::L1 { .. }
            | NormTag::LInf { .. }
            | NormTag::Operator { .. }
            | NormTag::TraceClass { .. }
            | NormTag::InjectiveL1L1 { .. } => Certification::Exact,
            NormTag::WSchatten2cb { .. } | NormTag::WSchatten2 { .. } | NormTag::WSchatten2cbState { .. } => {
                Certification::LowerBound
            }
            NormTag::ProjectiveUpper { .. } => Certification::UpperBound,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            NormTag::Euclidean { dim } => format!("l2^{dim}"),
            NormTag::L1 { dim } => format!("l1^{dim}"),
            NormTag::LInf { dim } => format!("linf^{dim}"),
            NormTag::Operator { rows, cols } => format!("M_{{{rows},{cols}}}"),
            NormTag::TraceClass { rows, cols } => format!("S1^{{{rows},{cols}}}"),
            NormTag::InjectiveL1L1 { n } => format!("l1^{n} (x)eps l1^{n}"),
            NormTag::WSchatten2cb { kt, n } => format!("S2^w-cb(kt={kt}, n={n})"),
            NormTag::WSchatten2 { kt, n } => format!("S2^w(kt={kt}, n={n})"),
            NormTag::WSchatten2cbState { kt, n, state_dim } => {
                format!("S2^w-cb(kt={kt}, n={n}) (x)eps l2^{state_dim}")
            }
            NormTag::ProjectiveUpper { kt, n } => format!("S1 (x)pi S1 upper (kt={kt}, n={n})"),
        }
    }

    fn check(&self, x: &ComplexVector) -> Result<()> {
        if x.dim() != self.ambient_dim() {
            return Err(LabError::Shape(format!(
                "element of dimension {} for space {} (needs {})",
                x.dim(),
                self.name(),
                self.ambient_dim()
            )));
        }
        Ok(())
    }

    /// Fast evaluation for the tags with closed-form norms; `None` for the
    /// optimization-based ones.
    pub fn exact_norm(&self, x: &ComplexVector) -> Result<Option<f64>> {
        self.check(x)?;
        let s = x.as_slice();
        Ok(match *self {
            NormTag::Euclidean { .. } => Some(x.norm()),
            NormTag::L1 { .. } => Some(s.iter().map(|z| z.norm()).sum()),
            NormTag::LInf { .. } => Some(s.iter().map(|z| z.norm()).fold(0.0, f64::max)),
            NormTag::Operator { rows, cols } => Some(x.to_matrix(rows, cols).op_norm()?),
            NormTag::TraceClass { rows, cols } => Some(x.to_matrix(rows, cols).trace_norm()?),
            NormTag::InjectiveL1L1 { n } if s.iter().all(|z| z.im == 0.0) && n <= injective::ENUM_MAX_N => {
                let re: Vec<f64> = s.iter().map(|z| z.re).collect();
                Some(l1_injective_norm(&re, n)?.value)
            }
            _ => None,
        })
    }

    /// A norming functional: `f` with `Re⟨f, x⟩ = ‖x‖` and dual norm at
    /// most one. Available for the tags with closed-form norms.
    pub fn subgradient(&self, x: &ComplexVector) -> Result<Option<ComplexVector>> {
        self.check(x)?;
        let s = x.as_slice();
        let phase = |z: &C64| if z.norm() > 0.0 { z / z.norm() } else { ZERO };
        Ok(match *self {
            NormTag::Euclidean { .. } => {
                let nrm = x.norm();
                Some(if nrm > 0.0 { x.scale_real(1.0 / nrm) } else { ComplexVector::zeros(x.dim()) })
            }
            NormTag::L1 { .. } => Some(ComplexVector::new(s.iter().map(phase).collect())),
            NormTag::LInf { dim } => {
                let (idx, _) = s
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
                let mut f = ComplexVector::zeros(dim);
                if dim > 0 {
                    f.as_mut_slice()[idx] = phase(&s[idx]);
                }
                Some(f)
            }
            NormTag::Operator { rows, cols } => {
                let (_, u, v) = x.to_matrix(rows, cols).top_singular_triple()?;
                Some(u.outer(&v).into())
            }
            NormTag::TraceClass { rows, cols } => Some(x.to_matrix(rows, cols).polar_factor()?.into()),
            NormTag::InjectiveL1L1 { n } if s.iter().all(|z| z.im == 0.0) && n <= injective::ENUM_MAX_N => {
                let re: Vec<f64> = s.iter().map(|z| z.re).collect();
                let res = l1_injective_norm(&re, n)?;
                Some(ComplexVector::new(
                    (0..n * n).map(|t| C64::new(res.s[t / n] * res.t[t % n], 0.0)).collect(),
                ))
            }
            _ => None,
        })
    }
}

/// Evaluates the tagged norm of `x`, running the optimizer where needed.
pub fn evaluate(tag: &NormTag, x: &ComplexVector, opts: &NormOptions) -> Result<NormResult> {
    if let Some(value) = tag.exact_norm(x)? {
        return Ok(NormResult {
            tag: *tag,
            value,
            certification: Certification::Exact,
            budget: None,
            witness: None,
        });
    }
    let plain = |x: &ComplexVector, kt: usize, n: usize| WeakTensor::plain(x.to_matrix(n * kt, n * kt), kt, n);
    match *tag {
        NormTag::InjectiveL1L1 { n } => {
            let m = x.to_matrix(n, n);
            let res = l1_injective_norm_complex(&m, opts)?;
            Ok(NormResult {
                tag: *tag,
                value: res.value,
                certification: Certification::Heuristic,
                budget: Some(*opts),
                witness: Some(Witness::Phases { s: res.s, t: res.t }),
            })
        }
        NormTag::WSchatten2cb { kt, n } => {
            let res = wcb_schatten2_lower(&plain(x, kt, n)?, opts, None)?;
            Ok(res.into_norm_result(*tag, *opts))
        }
        NormTag::WSchatten2cbState { kt, n, state_dim } => {
            let t = WeakTensor::from_flat(x.as_slice(), kt, n, state_dim)?;
            let res = wcb_state_lower(&t, opts, None)?;
            Ok(res.into_norm_result(*tag, *opts))
        }
        NormTag::WSchatten2 { kt, n } => {
            let res = w_schatten2_lower(&plain(x, kt, n)?, opts)?;
            Ok(res.into_norm_result(*tag, *opts))
        }
        NormTag::ProjectiveUpper { kt, n } => Ok(NormResult {
            tag: *tag,
            value: projective_upper(&x.to_matrix(n * kt, n * kt), kt, n)?,
            certification: Certification::UpperBound,
            budget: None,
            witness: None,
        }),
        _ => unreachable!("closed-form tags handled above"),
    }
}

/// Norm value only.
pub fn norm_value(tag: &NormTag, x: &ComplexVector, opts: &NormOptions) -> Result<f64> {
    Ok(evaluate(tag, x, opts)?.value)
}

/// `n × n` matrix `Σ ε_ij |i⟩⟨j|` as a flat vector.
pub fn sign_matrix(eps: &crate::game::SignVector) -> ComplexVector {
    ComplexVector::new(eps.entries().iter().map(|&e| C64::new(e as f64, 0.0)).collect())
}
