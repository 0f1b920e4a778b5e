//! Attacks in the simultaneous two-way model, in pure and Kraus form.
//!
//! A pure strategy acts as follows. Alice applies `V` to the question
//! register and her share of `|φ⟩`; Bob applies `W_ε`. Each then sends the
//! `send` factor of its output to the other. The second round applies
//! `Ṽ_ε` and `W̃_ε`, whose outputs are an answer register of dimension `n`
//! and an ancilla of dimension `r`. The success probability for `ε` is
//! `‖a(ε)‖²` with
//!
//! ```text
//! a(ε) = (1/n²) Σ_ij ε_ij (⟨i|Ṽ_ε ⊗ ⟨j|W̃_ε) · Exchange · (V|ij⟩ ⊗ W_ε)|φ⟩.
//! ```

mod channel;
mod family;
mod pure;
mod zoo;

pub use channel::{random_channel, ChannelStrategy, KrausFamily, PurifyOutcome};
pub use family::{column_majority_signs, EpsFamily, CONTRACTION_TOL};
pub use pure::{default_split, exchange, maximally_entangled_phi, product_phi, Dims, PureStrategy};
pub use zoo::{zoo, ZooKind};

pub(crate) use pure::{contract_answers, exchanged_blocks};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rng::SeededRng;

/// How expectations over `ε` are taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: usize, rng: SeededRng },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMode {
    Exact,
    MonteCarlo,
}

/// A strategy value with its estimation mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub value: f64,
    pub mode: ValueMode,
    pub samples: u64,
    pub stderr: f64,
    pub seed: Option<u64>,
}

impl ValueReport {
    pub fn exact(value: f64, samples: u64) -> Self {
        Self {
            value,
            mode: ValueMode::Exact,
            samples,
            stderr: 0.0,
            seed: None,
        }
    }

    /// Sample mean with standard error `s / √N` (unbiased sample deviation).
    pub fn from_samples(vals: &[f64], seed: u64) -> Result<Self> {
        if vals.len() < 2 {
            return Err(LabError::Precondition(format!(
                "Monte Carlo needs at least 2 samples, got {}",
                vals.len()
            )));
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            value: mean,
            mode: ValueMode::MonteCarlo,
            samples: vals.len() as u64,
            stderr: (var / n).sqrt(),
            seed: Some(seed),
        })
    }
}

/// Dimension beyond which extra classical communication cannot help:
/// `n⁴ k²`.
pub fn classical_budget(n: usize, k: usize) -> Result<usize> {
    if n == 0 || k == 0 {
        return Err(LabError::Precondition("classical budget needs n, k ≥ 1".into()));
    }
    n.checked_pow(4)
        .and_then(|x| x.checked_mul(k * k))
        .ok_or_else(|| LabError::Shape("classical budget overflows".into()))
}
