use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::EpsFamily;
use super::{EvalMode, ValueMode, ValueReport};
use crate::error::{LabError, Result};
use crate::game::{check_enumerable, map_cube, GameInstance, SignVector};
use crate::linalg::{ComplexMatrix, ComplexVector, C64, ZERO};
use crate::rng::SeededRng;

const PHI_NORM_TOL: f64 = 1e-9;

/// Dimensions of a pure strategy.
///
/// The first-round output space `C^{k̃}` of either party splits as
/// `keep ⊗ send`; the `send` factor is what crosses to the other party in
/// the simultaneous exchange.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub k: usize,
    pub kt: usize,
    pub r: usize,
    pub keep: usize,
    pub send: usize,
}

/// Split `kt = keep * send` with `send` the largest divisor not above `√kt`.
pub fn default_split(kt: usize) -> (usize, usize) {
    let mut send = 1;
    let mut d = 1;
    while d * d <= kt {
        if kt % d == 0 {
            send = d;
        }
        d += 1;
    }
    (kt / send, send)
}

impl Dims {
    pub fn new(n: usize, k: usize, kt: usize, r: usize) -> Result<Self> {
        let (keep, send) = default_split(kt.max(1));
        Self::with_split(n, k, kt, r, keep, send)
    }

    pub fn with_split(n: usize, k: usize, kt: usize, r: usize, keep: usize, send: usize) -> Result<Self> {
        GameInstance::new(n)?;
        if k == 0 || kt == 0 || r == 0 {
            return Err(LabError::Shape(format!("dimensions must be positive (k={k}, k̃={kt}, r={r})")));
        }
        if keep * send != kt {
            return Err(LabError::Shape(format!("k̃ = {kt} is not keep ({keep}) × send ({send})")));
        }
        Ok(Self { n, k, kt, r, keep, send })
    }
}

/// Register exchange on a `k̃ × k̃` joint first-round output: entry
/// `(a_keep, a_send; b_keep, b_send)` moves to
/// `(a_keep, b_send; b_keep, a_send)`. The map is an involution.
pub fn exchange(y: &ComplexMatrix, keep: usize, send: usize) -> ComplexMatrix {
    let kt = keep * send;
    debug_assert_eq!(y.shape(), (kt, kt));
    let mut z = ComplexMatrix::zeros(kt, kt);
    for ak in 0..keep {
        for asend in 0..send {
            let x = ak * send + asend;
            for bk in 0..keep {
                for bsend in 0..send {
                    z.set(ak * send + bsend, bk * send + asend, y.get(x, bk * send + bsend));
                }
            }
        }
    }
    z
}

/// `V_ij X` with the exchange applied, for every `(i, j)` in row-major order.
///
/// `v` is `k̃ × n²k`, `w` is `k̃ × k` and `phi_mat` is the `k × k` reshaping
/// of the shared state.
pub(crate) fn exchanged_blocks(
    n: usize,
    k: usize,
    keep: usize,
    send: usize,
    v: &ComplexMatrix,
    w: &ComplexMatrix,
    phi_mat: &ComplexMatrix,
) -> Vec<ComplexMatrix> {
    let x = phi_mat.matmul(&w.transpose());
    (0..n * n)
        .map(|ij| exchange(&v_slice(v, ij, k).matmul(&x), keep, send))
        .collect()
}

/// `Σ_ij (ε_ij / n²) Ṽ_i Z_ij W̃_jᵀ`, where `Ṽ_i` is row block `i` of `vt`.
pub(crate) fn contract_answers(
    n: usize,
    r: usize,
    eps: &SignVector,
    z: &[ComplexMatrix],
    vt: &ComplexMatrix,
    wt: &ComplexMatrix,
) -> ComplexMatrix {
    let w = 1.0 / (n * n) as f64;
    let wt_t: Vec<ComplexMatrix> = (0..n).map(|j| wt.row_block(j * r, r).transpose()).collect();
    let mut acc = ComplexMatrix::zeros(r, r);
    for i in 0..n {
        let vt_i = vt.row_block(i * r, r);
        for j in 0..n {
            let ij = i * n + j;
            let term = vt_i.matmul(&z[ij]).matmul(&wt_t[j]);
            acc.axpy(C64::new(eps.sign(ij) * w, 0.0), &term);
        }
    }
    acc
}

/// Slice `V|ij⟩`: columns `ij·k .. (ij+1)·k` of `v`.
pub(crate) fn v_slice(v: &ComplexMatrix, ij: usize, k: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(v.rows(), k, |p, m| v.get(p, ij * k + m))
}

/// A pure simultaneous two-way strategy `{Ṽ_ε, W̃_ε, V, W_ε, |φ⟩}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureStrategy {
    dims: Dims,
    kind: String,
    v: ComplexMatrix,
    w: EpsFamily,
    vt: EpsFamily,
    wt: EpsFamily,
    phi: ComplexVector,
}

impl PureStrategy {
    pub fn new(
        dims: Dims,
        kind: impl Into<String>,
        v: ComplexMatrix,
        w: EpsFamily,
        vt: EpsFamily,
        wt: EpsFamily,
        phi: ComplexVector,
    ) -> Result<Self> {
        let s = Self {
            dims,
            kind: kind.into(),
            v,
            w,
            vt,
            wt,
            phi,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let Dims { n, k, kt, r, .. } = self.dims;
        EpsFamily::Fixed(self.v.clone()).validate("V", kt, n * n * k)?;
        self.w.validate("W", kt, k)?;
        self.vt.validate("Vt", n * r, kt)?;
        self.wt.validate("Wt", n * r, kt)?;
        self.validate_phi(&self.phi)
    }

    fn validate_phi(&self, phi: &ComplexVector) -> Result<()> {
        let k = self.dims.k;
        if phi.dim() != k * k {
            return Err(LabError::Shape(format!("phi has dimension {}, expected {}", phi.dim(), k * k)));
        }
        if !phi.is_finite() || (phi.norm() - 1.0).abs() > PHI_NORM_TOL {
            return Err(LabError::InvalidStrategy(format!("phi has norm {}, expected 1", phi.norm())));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn game(&self) -> GameInstance {
        GameInstance::new(self.dims.n).expect("validated at construction")
    }

    pub fn v(&self) -> &ComplexMatrix {
        &self.v
    }

    pub fn w(&self) -> &EpsFamily {
        &self.w
    }

    pub fn vt(&self) -> &EpsFamily {
        &self.vt
    }

    pub fn wt(&self) -> &EpsFamily {
        &self.wt
    }

    pub fn phi(&self) -> &ComplexVector {
        &self.phi
    }

    /// `|φ⟩` as a `k × k` matrix, row index on Alice's factor.
    pub fn phi_matrix(&self) -> ComplexMatrix {
        self.phi.to_matrix(self.dims.k, self.dims.k)
    }

    pub fn v_slice(&self, ij: usize) -> ComplexMatrix {
        v_slice(&self.v, ij, self.dims.k)
    }

    pub fn with_kind(mut self, kind: impl Into<String>) -> Self {
        self.kind = kind.into();
        self
    }

    pub fn set_v(&mut self, v: ComplexMatrix) -> Result<()> {
        let Dims { n, k, kt, .. } = self.dims;
        let fam = EpsFamily::Fixed(v);
        fam.validate("V", kt, n * n * k)?;
        if let EpsFamily::Fixed(v) = fam {
            self.v = v;
        }
        Ok(())
    }

    pub fn set_w(&mut self, w: EpsFamily) -> Result<()> {
        w.validate("W", self.dims.kt, self.dims.k)?;
        self.w = w;
        Ok(())
    }

    pub fn set_vt(&mut self, vt: EpsFamily) -> Result<()> {
        vt.validate("Vt", self.dims.n * self.dims.r, self.dims.kt)?;
        self.vt = vt;
        Ok(())
    }

    pub fn set_wt(&mut self, wt: EpsFamily) -> Result<()> {
        wt.validate("Wt", self.dims.n * self.dims.r, self.dims.kt)?;
        self.wt = wt;
        Ok(())
    }

    pub fn set_phi(&mut self, phi: ComplexVector) -> Result<()> {
        self.validate_phi(&phi)?;
        self.phi = phi;
        Ok(())
    }

    fn check_signs(&self, eps: &SignVector) -> Result<()> {
        if eps.len() != self.dims.n * self.dims.n {
            return Err(LabError::Shape(format!(
                "sign vector of length {} for a strategy with n = {}",
                eps.len(),
                self.dims.n
            )));
        }
        Ok(())
    }

    /// Exchanged first-round blocks `Perm(V_ij X_ε)` with `X_ε = Φ W_εᵀ`.
    pub fn first_round(&self, eps: &SignVector) -> Result<Vec<ComplexMatrix>> {
        self.check_signs(eps)?;
        let Dims { n, k, keep, send, .. } = self.dims;
        let w = self.w.at(eps)?;
        Ok(exchanged_blocks(n, k, keep, send, &self.v, &w, &self.phi_matrix()))
    }

    /// The amplitude `a(ε)` as an `r × r` matrix, row index on Alice's
    /// ancilla.
    pub fn amplitude_matrix(&self, eps: &SignVector) -> Result<ComplexMatrix> {
        let z = self.first_round(eps)?;
        let vt = self.vt.at(eps)?;
        let wt = self.wt.at(eps)?;
        Ok(contract_answers(self.dims.n, self.dims.r, eps, &z, &vt, &wt))
    }

    /// `a(ε) ∈ ℓ₂^{r²}`, flat index `a·r + b`.
    pub fn amplitude(&self, eps: &SignVector) -> Result<ComplexVector> {
        Ok(self.amplitude_matrix(eps)?.into())
    }

    pub fn success_probability(&self, eps: &SignVector) -> Result<f64> {
        Ok(self.amplitude_matrix(eps)?.fro_norm_sqr())
    }

    /// `ω(G_Rad; S)` by full enumeration of the sign vectors.
    pub fn value_exact(&self) -> Result<ValueReport> {
        let bits = self.dims.n * self.dims.n;
        check_enumerable(bits)?;
        let vals = map_cube(bits, |eps| self.success_probability(eps))?;
        Ok(ValueReport {
            value: vals.iter().sum::<f64>() / vals.len() as f64,
            mode: ValueMode::Exact,
            samples: vals.len() as u64,
            stderr: 0.0,
            seed: None,
        })
    }

    /// Monte Carlo estimate of `ω(G_Rad; S)`; sample `t` draws its sign
    /// vector from child stream `t` of `rng`.
    pub fn value_mc(&self, samples: usize, rng: &SeededRng) -> Result<ValueReport> {
        let bits = self.dims.n * self.dims.n;
        let vals = (0..samples as u64)
            .into_par_iter()
            .map(|t| self.success_probability(&SignVector::random(bits, &rng.child(t))))
            .collect::<Result<Vec<f64>>>()?;
        ValueReport::from_samples(&vals, rng.seed)
    }

    pub fn value(&self, mode: &EvalMode) -> Result<ValueReport> {
        match mode {
            EvalMode::Exact => self.value_exact(),
            EvalMode::MonteCarlo { samples, rng } => self.value_mc(*samples, rng),
        }
    }

    /// Multiplies `|φ⟩` by a scalar phase.
    pub fn with_phi_phase(&self, phase: C64) -> Result<Self> {
        let mut s = self.clone();
        s.set_phi(self.phi.scale(phase))?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StrategyFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StrategyFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyMeta {
    n: usize,
    k: usize,
    kt: usize,
    r: usize,
    keep: usize,
    send: usize,
    kind: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyBlocks {
    v: ComplexMatrix,
    w: EpsFamily,
    vt: EpsFamily,
    wt: EpsFamily,
    phi: ComplexVector,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyFile {
    meta: StrategyMeta,
    blocks: StrategyBlocks,
}

impl From<&PureStrategy> for StrategyFile {
    fn from(s: &PureStrategy) -> Self {
        let Dims { n, k, kt, r, keep, send } = s.dims;
        StrategyFile {
            meta: StrategyMeta {
                n,
                k,
                kt,
                r,
                keep,
                send,
                kind: s.kind.clone(),
            },
            blocks: StrategyBlocks {
                v: s.v.clone(),
                w: s.w.clone(),
                vt: s.vt.clone(),
                wt: s.wt.clone(),
                phi: s.phi.clone(),
            },
        }
    }
}

impl TryFrom<StrategyFile> for PureStrategy {
    type Error = LabError;

    fn try_from(f: StrategyFile) -> Result<Self> {
        let m = f.meta;
        let dims = Dims::with_split(m.n, m.k, m.kt, m.r, m.keep, m.send)?;
        let b = f.blocks;
        PureStrategy::new(dims, m.kind, b.v, b.w, b.vt, b.wt, b.phi)
    }
}

/// Unit vector `|0⟩|0⟩` in `C^k ⊗ C^k`.
pub fn product_phi(k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(k * k);
    v.as_mut_slice()[0] = C64::new(1.0, 0.0);
    v
}

/// Maximally entangled unit vector in `C^k ⊗ C^k`.
pub fn maximally_entangled_phi(k: usize) -> ComplexVector {
    let amp = C64::new(1.0 / (k as f64).sqrt(), 0.0);
    ComplexVector::new((0..k * k).map(|t| if t / k == t % k { amp } else { ZERO }).collect())
}
