use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::EpsFamily;
use super::pure::{contract_answers, exchanged_blocks, Dims, PureStrategy};
use super::ValueReport;
use crate::error::{LabError, Result};
use crate::game::{check_enumerable, enumerate_signs, GameInstance, SignVector};
use crate::linalg::{gaussian_matrix, hermitian_eigen, random_contraction, ComplexMatrix, ComplexVector, C64, RANK_TOL};
use crate::rng::SeededRng;

const KRAUS_TOL: f64 = 1e-9;
const STATE_TOL: f64 = 1e-9;

/// A Kraus list that may depend on `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrausFamily {
    Fixed(Vec<ComplexMatrix>),
    Table(BTreeMap<SignVector, Vec<ComplexMatrix>>),
}

impl KrausFamily {
    pub fn at(&self, eps: &SignVector) -> Result<&[ComplexMatrix]> {
        match self {
            KrausFamily::Fixed(ops) => Ok(ops),
            KrausFamily::Table(t) => t
                .get(eps)
                .map(Vec::as_slice)
                .ok_or_else(|| LabError::InvalidStrategy(format!("no Kraus list stored for ε = {eps}"))),
        }
    }

    fn lists(&self) -> Vec<&[ComplexMatrix]> {
        match self {
            KrausFamily::Fixed(ops) => vec![ops.as_slice()],
            KrausFamily::Table(t) => t.values().map(Vec::as_slice).collect(),
        }
    }

    fn map(&self, f: impl Fn(&[ComplexMatrix]) -> Result<Vec<ComplexMatrix>>) -> Result<Self> {
        Ok(match self {
            KrausFamily::Fixed(ops) => KrausFamily::Fixed(f(ops)?),
            KrausFamily::Table(t) => KrausFamily::Table(
                t.iter()
                    .map(|(eps, ops)| Ok((eps.clone(), f(ops)?)))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn max_len(&self) -> usize {
        self.lists().iter().map(|l| l.len()).max().unwrap_or(0)
    }
}

/// Checks shapes and `Σ K†K = Id` within tolerance.
fn validate_kraus(name: &str, ops: &[ComplexMatrix], rows: usize, cols: usize) -> Result<()> {
    if ops.is_empty() {
        return Err(LabError::InvalidStrategy(format!("channel {name} has no Kraus operators")));
    }
    let mut sum = ComplexMatrix::zeros(cols, cols);
    for op in ops {
        if op.shape() != (rows, cols) {
            return Err(LabError::Shape(format!(
                "Kraus operator of {name} has shape {}x{}, expected {rows}x{cols}",
                op.rows(),
                op.cols()
            )));
        }
        sum = sum.add(&op.adjoint().matmul(op));
    }
    let dev = sum.max_abs_diff(&ComplexMatrix::identity(cols));
    if dev > KRAUS_TOL {
        return Err(LabError::InvalidStrategy(format!(
            "channel {name} violates Kraus completeness by {dev:e}"
        )));
    }
    Ok(())
}

/// Minimal Kraus representation of the same channel, obtained from the SVD
/// of the stacked vectorized operators.
pub fn compress_kraus(ops: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    let (rows, cols) = ops[0].shape();
    let stacked = ComplexMatrix::from_fn(ops.len(), rows * cols, |a, t| ops[a].as_slice()[t]);
    let svd = stacked.svd()?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let out: Vec<ComplexMatrix> = svd
        .s
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > RANK_TOL * smax && s > 0.0)
        .map(|(t, &s)| ComplexMatrix::from_fn(rows, cols, |p, q| svd.vh.get(t, p * cols + q) * s))
        .collect();
    if out.is_empty() {
        return Err(LabError::InvalidStrategy("channel with only zero Kraus operators".into()));
    }
    Ok(out)
}

/// Stacks second-round Kraus operators `K_μ: C^{k̃} → C^n` into one
/// `n·N × k̃` matrix with row `i·N + μ` equal to row `i` of `K_μ`.
fn stack_answers(ops: &[ComplexMatrix], n: usize) -> ComplexMatrix {
    let count = ops.len();
    let kt = ops[0].cols();
    ComplexMatrix::from_fn(n * count, kt, |row, c| ops[row % count].get(row / count, c))
}

/// A general strategy `S_ε = (Ã_ε ⊗ B̃_ε) ∘ Exchange ∘ (A ⊗ B_ε)` in Kraus
/// form, with a possibly mixed shared state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStrategy {
    pub n: usize,
    pub k: usize,
    pub kt: usize,
    pub keep: usize,
    pub send: usize,
    /// Operators `C^{n²k} → C^{k̃}`.
    pub kraus_a: Vec<ComplexMatrix>,
    /// Operators `C^k → C^{k̃}`.
    pub kraus_b: KrausFamily,
    /// Operators `C^{k̃} → C^n`.
    pub kraus_at: KrausFamily,
    pub kraus_bt: KrausFamily,
    /// Density matrix on `C^k ⊗ C^k`.
    pub phi: ComplexMatrix,
}

/// A purified strategy together with its first-round dimension.
#[derive(Clone, Debug)]
pub struct PurifyOutcome {
    pub strategy: PureStrategy,
    pub kt_prime: usize,
    /// `n² k k̃⁴`.
    pub bound: usize,
}

impl ChannelStrategy {
    pub fn validate(&self) -> Result<()> {
        let n = GameInstance::new(self.n)?.n();
        let (k, kt) = (self.k, self.kt);
        if self.keep * self.send != kt {
            return Err(LabError::Shape(format!("k̃ = {kt} is not keep × send")));
        }
        validate_kraus("A", &self.kraus_a, kt, n * n * k)?;
        for ops in self.kraus_b.lists() {
            validate_kraus("B", ops, kt, k)?;
        }
        for ops in self.kraus_at.lists() {
            validate_kraus("At", ops, n, kt)?;
        }
        for ops in self.kraus_bt.lists() {
            validate_kraus("Bt", ops, n, kt)?;
        }
        if self.phi.shape() != (k * k, k * k) {
            return Err(LabError::Shape("shared state has the wrong dimension".into()));
        }
        let herm_dev = self.phi.max_abs_diff(&self.phi.adjoint());
        let trace = self.phi.trace();
        if herm_dev > STATE_TOL || (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(LabError::InvalidStrategy("shared state is not a unit-trace Hermitian matrix".into()));
        }
        let (vals, _) = hermitian_eigen(&self.phi)?;
        if vals.iter().any(|&v| v < -STATE_TOL) {
            return Err(LabError::InvalidStrategy("shared state is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// Eigen-decomposition of the shared state, numerically zero weights
    /// dropped.
    fn state_components(&self) -> Result<Vec<(f64, ComplexVector)>> {
        let (vals, vecs) = hermitian_eigen(&self.phi)?;
        let pmax = vals.first().copied().unwrap_or(0.0);
        Ok(vals
            .into_iter()
            .zip(vecs)
            .filter(|(p, _)| *p > RANK_TOL * pmax && *p > 0.0)
            .collect())
    }

    /// Success probability for one `ε`, summing over Kraus tuples and the
    /// components of the shared state.
    pub fn success_probability(&self, eps: &SignVector) -> Result<f64> {
        let comps = self.state_components()?;
        self.success_with(eps, &comps)
    }

    fn success_with(&self, eps: &SignVector, comps: &[(f64, ComplexVector)]) -> Result<f64> {
        let (n, k) = (self.n, self.k);
        let vt = stack_answers(self.kraus_at.at(eps)?, n);
        let wt = stack_answers(self.kraus_bt.at(eps)?, n);
        let (ra, rb) = (vt.rows() / n, wt.rows() / n);
        // Pad the smaller ancilla so both answers share one ancilla size.
        let r = ra.max(rb);
        let pad = |m: &ComplexMatrix, have: usize| {
            ComplexMatrix::from_fn(n * r, m.cols(), |row, c| {
                let (i, a) = (row / r, row % r);
                if a < have {
                    m.get(i * have + a, c)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        };
        let (vt, wt) = (pad(&vt, ra), pad(&wt, rb));
        let mut total = 0.0;
        for (p, state) in comps {
            let phi_mat = state.to_matrix(k, k);
            for a in &self.kraus_a {
                for b in self.kraus_b.at(eps)? {
                    let z = exchanged_blocks(n, k, self.keep, self.send, a, b, &phi_mat);
                    total += p * contract_answers(n, r, eps, &z, &vt, &wt).fro_norm_sqr();
                }
            }
        }
        Ok(total)
    }

    /// `E_ε Tr[|ψ_ε⟩⟨ψ_ε| (Id_C ⊗ S_ε)(|ψ⟩⟨ψ|)]` by enumeration.
    pub fn value_channel(&self) -> Result<ValueReport> {
        self.validate()?;
        let bits = self.n * self.n;
        check_enumerable(bits)?;
        let comps = self.state_components()?;
        let vals = (0..1u64 << bits)
            .into_par_iter()
            .map(|idx| self.success_with(&SignVector::from_index(bits, idx), &comps))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ValueReport::exact(vals.iter().sum::<f64>() / vals.len() as f64, vals.len() as u64))
    }

    /// Stinespring dilation of every channel plus purification of the shared
    /// state. Kraus lists are first compressed to minimal length; ancillas of
    /// the first round join the kept register.
    pub fn purify(&self) -> Result<PurifyOutcome> {
        self.validate()?;
        let (n, k, kt, keep, send) = (self.n, self.k, self.kt, self.keep, self.send);
        check_enumerable(n * n)?;
        let a_ops = compress_kraus(&self.kraus_a)?;
        let b_fam = self.kraus_b.map(compress_kraus)?;
        let at_fam = self.kraus_at.map(compress_kraus)?;
        let bt_fam = self.kraus_bt.map(compress_kraus)?;
        let comps = self.state_components()?;

        let big_n = a_ops.len().max(b_fam.max_len());
        let big_m = at_fam.max_len().max(bt_fam.max_len());
        let big_r = comps.len();
        let keep_p = keep * big_n * big_r;
        let kt_p = keep_p * send;
        let k_p = k * big_r;
        let r_p = big_m * big_n * big_r;
        let first_index = |kk: usize, kappa: usize, lambda: usize, s: usize| ((kk * big_n + kappa) * big_r + lambda) * send + s;

        let mut v = ComplexMatrix::zeros(kt_p, n * n * k_p);
        for (kappa, op) in a_ops.iter().enumerate() {
            for ij in 0..n * n {
                for a in 0..k {
                    for lambda in 0..big_r {
                        for kk in 0..keep {
                            for s in 0..send {
                                let val = op.get(kk * send + s, ij * k + a);
                                v.set(first_index(kk, kappa, lambda, s), ij * k_p + a * big_r + lambda, val);
                            }
                        }
                    }
                }
            }
        }
        let bob_first = |ops: &[ComplexMatrix]| -> Result<ComplexMatrix> {
            let mut w = ComplexMatrix::zeros(kt_p, k_p);
            for (kappa, op) in ops.iter().enumerate() {
                for b in 0..k {
                    for kk in 0..keep {
                        for s in 0..send {
                            w.set(first_index(kk, kappa, 0, s), b * big_r, op.get(kk * send + s, b));
                        }
                    }
                }
            }
            Ok(w)
        };
        // Second round: `pass_lambda` says whether the state label passes
        // through (Alice) or is pinned to zero (Bob).
        let second = |ops: &[ComplexMatrix], pass_lambda: bool| -> Result<ComplexMatrix> {
            let mut out = ComplexMatrix::zeros(n * r_p, kt_p);
            let lambdas = if pass_lambda { big_r } else { 1 };
            for (mu, op) in ops.iter().enumerate() {
                for kappa in 0..big_n {
                    for lambda in 0..lambdas {
                        for i in 0..n {
                            let row = i * r_p + (mu * big_n + kappa) * big_r + lambda;
                            for kk in 0..keep {
                                for s in 0..send {
                                    out.set(row, first_index(kk, kappa, lambda, s), op.get(i, kk * send + s));
                                }
                            }
                        }
                    }
                }
            }
            Ok(out)
        };
        let lift = |fam: &KrausFamily, f: &dyn Fn(&[ComplexMatrix]) -> Result<ComplexMatrix>| -> Result<EpsFamily> {
            Ok(match fam {
                KrausFamily::Fixed(ops) => EpsFamily::Fixed(f(ops)?),
                KrausFamily::Table(_) => {
                    let mut entries = BTreeMap::new();
                    for eps in enumerate_signs(n)? {
                        let m = f(fam.at(&eps)?)?;
                        entries.insert(eps, m);
                    }
                    EpsFamily::Table { entries, fallback: None }
                }
            })
        };
        let w = lift(&b_fam, &bob_first)?;
        let vt = lift(&at_fam, &|ops| second(ops, true))?;
        let wt = lift(&bt_fam, &|ops| second(ops, false))?;

        let mut phi = ComplexVector::zeros(k_p * k_p);
        for (lambda, (p, state)) in comps.iter().enumerate() {
            let amp = p.sqrt();
            for a in 0..k {
                for b in 0..k {
                    phi.as_mut_slice()[(a * big_r + lambda) * k_p + b * big_r] = state.as_slice()[a * k + b] * amp;
                }
            }
        }
        // Renormalize away the rounding of the dropped eigenvalues.
        let norm = phi.norm();
        let phi = phi.scale_real(1.0 / norm);

        let dims = Dims::with_split(n, k_p, kt_p, r_p, keep_p, send)?;
        let strategy = PureStrategy::new(dims, "purified", v, w, vt, wt, phi)?;
        let bound = n * n * k * kt.pow(4);
        Ok(PurifyOutcome {
            strategy,
            kt_prime: kt_p,
            bound,
        })
    }
}

impl PureStrategy {
    /// Kraus form of a pure strategy. Requires isometric blocks so that the
    /// resulting maps are trace preserving; the second round becomes the
    /// list `(Id_n ⊗ ⟨a|) Ṽ_ε`, `a < r`.
    pub fn to_channel(&self) -> Result<ChannelStrategy> {
        let Dims { n, k, kt, r, keep, send } = self.dims();
        let answers = |m: &ComplexMatrix| -> Vec<ComplexMatrix> {
            (0..r)
                .map(|a| ComplexMatrix::from_fn(n, kt, |i, c| m.get(i * r + a, c)))
                .collect()
        };
        let lift = |fam: &EpsFamily, f: &dyn Fn(&ComplexMatrix) -> Vec<ComplexMatrix>| -> Result<KrausFamily> {
            if let EpsFamily::Fixed(m) = fam {
                return Ok(KrausFamily::Fixed(f(m)));
            }
            let mut t = BTreeMap::new();
            for eps in enumerate_signs(n)? {
                t.insert(eps.clone(), f(&*fam.at(&eps)?));
            }
            Ok(KrausFamily::Table(t))
        };
        let ch = ChannelStrategy {
            n,
            k,
            kt,
            keep,
            send,
            kraus_a: vec![self.v().clone()],
            kraus_b: lift(self.w(), &|m| vec![m.clone()])?,
            kraus_at: lift(self.vt(), &answers)?,
            kraus_bt: lift(self.wt(), &answers)?,
            phi: self.phi().outer(self.phi()),
        };
        ch.validate()?;
        Ok(ch)
    }
}

/// Random Kraus list of the given length: the blocks of a seeded isometry
/// `C^cols → C^{rows·count}`.
fn random_kraus(rows: usize, cols: usize, count: usize, rng: &SeededRng) -> Vec<ComplexMatrix> {
    let iso = random_contraction(rows * count, cols, rng);
    (0..count).map(|t| iso.row_block(t * rows, rows)).collect()
}

/// Seeded channel strategy. Each channel has `kraus_rank` Kraus operators
/// and the shared state has rank `phi_rank`. Requires `kraus_rank · k̃ ≥ n²k`
/// for the first round to be an isometric dilation.
pub fn random_channel(
    n: usize,
    k: usize,
    kt: usize,
    kraus_rank: usize,
    phi_rank: usize,
    rng: &SeededRng,
) -> Result<ChannelStrategy> {
    let dims = Dims::new(n, k, kt, 1)?;
    if kraus_rank * kt < n * n * k || kraus_rank * n < kt || phi_rank == 0 || phi_rank > k * k {
        return Err(LabError::Shape(format!(
            "random channel with rank {kraus_rank} needs rank·k̃ ≥ n²k and rank·n ≥ k̃, state rank in 1..=k²"
        )));
    }
    let table = |label: &str, rows: usize, cols: usize| -> Result<KrausFamily> {
        let mut t = BTreeMap::new();
        for eps in enumerate_signs(n)? {
            let ops = random_kraus(rows, cols, kraus_rank, &rng.labelled(label, eps.index()));
            t.insert(eps, ops);
        }
        Ok(KrausFamily::Table(t))
    };
    let basis = random_contraction(k * k, phi_rank, &rng.labelled("phi", 0));
    let weights: Vec<f64> = {
        let g = gaussian_matrix(phi_rank, 1, &rng.labelled("weights", 0));
        let w: Vec<f64> = g.as_slice().iter().map(|z| z.norm_sqr() + 0.1).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    };
    let mut phi = ComplexMatrix::zeros(k * k, k * k);
    for (t, &p) in weights.iter().enumerate() {
        let col = ComplexVector::new((0..k * k).map(|r| basis.get(r, t)).collect());
        phi.axpy(C64::new(p, 0.0), &col.outer(&col));
    }
    let ch = ChannelStrategy {
        n,
        k,
        kt,
        keep: dims.keep,
        send: dims.send,
        kraus_a: random_kraus(kt, n * n * k, kraus_rank, &rng.labelled("A", 0)),
        kraus_b: table("B", kt, k)?,
        kraus_at: table("At", n, kt)?,
        kraus_bt: table("Bt", n, kt)?,
        phi,
    };
    ch.validate()?;
    Ok(ch)
}
