//! Weak-cb and weak Schatten-2 norms on `S₁^{n,k̃} ⊗ S₁^{n,k̃}`.
//!
//! The weak-cb norm of `T` is `sup ‖(h ⊗ g)(T)‖_{ℓ₂^{r²}}` over `r ≥ 1` and
//! contractions `h, g ∈ M_{nr,k̃}`, where
//!
//! ```text
//! (h ⊗ g)(T)[a, b] = Σ h[(i,a), α] g[(j,b), β] T[(i,α), (j,β)].
//! ```
//!
//! Writing `H[a, (i,α)] = h[(i,a), α]`, this is the matrix `H T Gᵀ`. The
//! objective is convex in each factor, so maximizing the linearization over
//! the operator-norm ball (a polar factor) never decreases it.

use serde::{Deserialize, Serialize};

use super::{Certification, NormOptions, NormResult, NormTag, Witness};
use crate::error::{LabError, Result};
use crate::linalg::{gaussian_matrix, random_contraction, ComplexMatrix, ComplexVector, C64, ONE, ZERO};
use crate::rng::SeededRng;

/// A tensor `T(x) = Σ_c x_c T_c` with `(n·k̃) × (n·k̃)` slices. A plain tensor
/// has one slice and no state slot.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakTensor {
    kt: usize,
    n: usize,
    slices: Vec<ComplexMatrix>,
}

/// Contractions `h, g` (and for tensors with a state slot, a unit `x`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WcbWitness {
    pub r: usize,
    pub h: ComplexMatrix,
    pub g: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<ComplexVector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WcbResult {
    pub value: f64,
    pub certification: Certification,
    pub witness: Option<WcbWitness>,
}

impl WcbResult {
    pub(crate) fn into_norm_result(self, tag: NormTag, opts: NormOptions) -> NormResult {
        NormResult {
            tag,
            value: self.value,
            certification: self.certification,
            budget: Some(opts),
            witness: self.witness.map(Witness::Contractions),
        }
    }

    fn zero() -> Self {
        Self {
            value: 0.0,
            certification: Certification::Exact,
            witness: None,
        }
    }
}

impl WeakTensor {
    pub fn plain(t: ComplexMatrix, kt: usize, n: usize) -> Result<Self> {
        Self::new(vec![t], kt, n)
    }

    pub fn new(slices: Vec<ComplexMatrix>, kt: usize, n: usize) -> Result<Self> {
        let big = n * kt;
        if slices.is_empty() || slices.iter().any(|s| s.shape() != (big, big)) {
            return Err(LabError::Shape(format!("weak tensor slices must be {big}x{big}")));
        }
        Ok(Self { kt, n, slices })
    }

    /// From the flat layout `(row · N + col) · state_dim + c`.
    pub fn from_flat(data: &[C64], kt: usize, n: usize, state_dim: usize) -> Result<Self> {
        let big = n * kt;
        if data.len() != big * big * state_dim {
            return Err(LabError::Shape("flat tensor has the wrong length".into()));
        }
        let slices = (0..state_dim)
            .map(|c| ComplexMatrix::from_fn(big, big, |row, col| data[(row * big + col) * state_dim + c]))
            .collect();
        Self::new(slices, kt, n)
    }

    pub fn state_dim(&self) -> usize {
        self.slices.len()
    }

    pub fn slices(&self) -> &[ComplexMatrix] {
        &self.slices
    }

    fn apply_state(&self, x: Option<&ComplexVector>) -> ComplexMatrix {
        match x {
            None => self.slices[0].clone(),
            Some(x) => {
                let mut acc = ComplexMatrix::zeros(self.slices[0].rows(), self.slices[0].cols());
                for (c, s) in self.slices.iter().enumerate() {
                    acc.axpy(x.as_slice()[c], s);
                }
                acc
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.slices.iter().all(|s| s.as_slice().iter().all(|z| *z == ZERO))
    }

    /// The `(i, j)` block if every nonzero entry lies in one block.
    fn single_block(&self) -> Option<(usize, usize)> {
        let kt = self.kt;
        let mut found = None;
        for s in &self.slices {
            for row in 0..s.rows() {
                for col in 0..s.cols() {
                    if s.get(row, col) != ZERO {
                        let b = (row / kt, col / kt);
                        match found {
                            None => found = Some(b),
                            Some(f) if f != b => return None,
                            _ => {}
                        }
                    }
                }
            }
        }
        found
    }
}

/// `H[a, (i,α)] = h[(i,a), α]`.
fn to_wide(h: &ComplexMatrix, n: usize, r: usize, kt: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(r, n * kt, |a, col| h.get((col / kt) * r + a, col % kt))
}

fn from_wide(w: &ComplexMatrix, n: usize, r: usize, kt: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n * r, kt, |row, alpha| w.get(row % r, (row / r) * kt + alpha))
}

/// `(h ⊗ g)(T(x))` as an `r × r` matrix.
pub fn wcb_apply(t: &WeakTensor, w: &WcbWitness) -> ComplexMatrix {
    let (n, kt) = (t.n, t.kt);
    let hw = to_wide(&w.h, n, w.r, kt);
    let gw = to_wide(&w.g, n, w.r, kt);
    hw.matmul(&t.apply_state(w.x.as_ref())).matmul(&gw.transpose())
}

/// Objective value of a witness.
pub fn wcb_evaluate(t: &WeakTensor, w: &WcbWitness) -> f64 {
    wcb_apply(t, w).fro_norm()
}

struct Ascent {
    iters: usize,
    tol: f64,
}

impl Ascent {
    /// Monotone alternating ascent from `w`.
    fn run(&self, t: &WeakTensor, mut w: WcbWitness) -> Result<(f64, WcbWitness)> {
        let (n, kt, r) = (t.n, t.kt, w.r);
        let mut value = wcb_evaluate(t, &w);
        for _ in 0..self.iters {
            let start = value;
            // h-step
            {
                let gw = to_wide(&w.g, n, r, kt);
                let m = t.apply_state(w.x.as_ref()).matmul(&gw.transpose());
                let hw = to_wide(&w.h, n, r, kt);
                let a = hw.matmul(&m);
                let grad = from_wide(&a.matmul(&m.adjoint()), n, r, kt);
                let cand = WcbWitness {
                    h: grad.polar_factor()?,
                    ..w.clone()
                };
                let v = wcb_evaluate(t, &cand);
                if v > value {
                    value = v;
                    w = cand;
                }
            }
            // g-step
            {
                let hw = to_wide(&w.h, n, r, kt);
                let d = hw.matmul(&t.apply_state(w.x.as_ref()));
                let gw = to_wide(&w.g, n, r, kt);
                let a = d.matmul(&gw.transpose());
                let grad = from_wide(&a.transpose().matmul(&d.conj()), n, r, kt);
                let cand = WcbWitness {
                    g: grad.polar_factor()?,
                    ..w.clone()
                };
                let v = wcb_evaluate(t, &cand);
                if v > value {
                    value = v;
                    w = cand;
                }
            }
            // x-step
            if w.x.is_some() {
                let hw = to_wide(&w.h, n, r, kt);
                let gwt = to_wide(&w.g, n, r, kt).transpose();
                let parts: Vec<ComplexMatrix> = t.slices.iter().map(|s| hw.matmul(s).matmul(&gwt)).collect();
                let a = wcb_apply(t, &w);
                let grad = ComplexVector::new(parts.iter().map(|p| a.inner(p).conj()).collect());
                let gn = grad.norm();
                if gn > 0.0 {
                    let cand = WcbWitness {
                        x: Some(grad.scale_real(1.0 / gn)),
                        ..w.clone()
                    };
                    let v = wcb_evaluate(t, &cand);
                    if v > value {
                        value = v;
                        w = cand;
                    }
                }
            }
            if value - start <= self.tol * value.max(1.0) {
                break;
            }
        }
        Ok((value, w))
    }
}

fn random_unit(dim: usize, rng: &SeededRng) -> ComplexVector {
    let g: ComplexVector = gaussian_matrix(dim, 1, rng).into();
    let nrm = g.norm();
    g.scale_real(1.0 / nrm)
}

fn random_witness(t: &WeakTensor, r: usize, rng: &SeededRng) -> WcbWitness {
    let (n, kt) = (t.n, t.kt);
    WcbWitness {
        r,
        h: random_contraction(n * r, kt, &rng.child(0)),
        g: random_contraction(n * r, kt, &rng.child(1)),
        x: (t.state_dim() > 1).then(|| random_unit(t.state_dim(), &rng.child(2))),
    }
}

/// Embedding witness for a single-block tensor: `h` maps block `i` onto
/// `C^{k̃}` isometrically, `g` does the same for block `j`.
fn block_witness(t: &WeakTensor, i: usize, j: usize, x: Option<ComplexVector>) -> WcbWitness {
    let (n, kt) = (t.n, t.kt);
    let embed = |blk: usize| ComplexMatrix::from_fn(n * kt, kt, |row, c| if row == blk * kt + c { ONE } else { ZERO });
    WcbWitness {
        r: kt,
        h: embed(i),
        g: embed(j),
        x,
    }
}

fn optimize(t: &WeakTensor, opts: &NormOptions, warm: Option<&WcbWitness>) -> Result<WcbResult> {
    let ascent = Ascent {
        iters: opts.iters,
        tol: opts.tol,
    };
    let mut best: Option<(f64, WcbWitness)> = None;
    let mut consider = |cand: (f64, WcbWitness)| {
        if best.as_ref().is_none_or(|b| cand.0 > b.0) {
            best = Some(cand);
        }
    };
    if let Some(w) = warm {
        consider(ascent.run(t, w.clone())?);
    }
    for r in 1..=opts.r_max.max(1) {
        for restart in 0..opts.restarts.max(1) {
            let start = random_witness(t, r, &opts.rng.labelled("wcb", r as u64).child(restart as u64));
            consider(ascent.run(t, start)?);
        }
    }
    let (_, w) = best.expect("at least one start");
    // Report the re-evaluated objective so the witness reproduces it.
    Ok(WcbResult {
        value: wcb_evaluate(t, &w),
        certification: Certification::LowerBound,
        witness: Some(w),
    })
}

/// Lower bound on the weak-cb Schatten-2 norm: best ascent over
/// `r ∈ 1..=r_max` and seeded restarts, plus an optional warm start. Tensors
/// supported on a single block are evaluated exactly (`‖block‖_F`).
pub fn wcb_schatten2_lower(t: &WeakTensor, opts: &NormOptions, warm: Option<&WcbWitness>) -> Result<WcbResult> {
    if t.state_dim() != 1 {
        return Err(LabError::Shape("plain weak-cb norm needs a tensor without a state slot".into()));
    }
    if t.is_zero() {
        return Ok(WcbResult::zero());
    }
    if let Some((i, j)) = t.single_block() {
        let w = block_witness(t, i, j, None);
        return Ok(WcbResult {
            value: wcb_evaluate(t, &w),
            certification: Certification::Exact,
            witness: Some(w),
        });
    }
    optimize(t, opts, warm)
}

/// Lower bound on `sup_{‖x‖ ≤ 1} ‖T(x)‖_{w-cb}`. For a single-block tensor
/// the value is the operator norm of the block viewed as a map from the
/// state slot, and is exact.
pub fn wcb_state_lower(t: &WeakTensor, opts: &NormOptions, warm: Option<&WcbWitness>) -> Result<WcbResult> {
    if t.is_zero() {
        return Ok(WcbResult::zero());
    }
    if let Some((i, j)) = t.single_block() {
        let kt = t.kt;
        let m = ComplexMatrix::from_fn(kt * kt, t.state_dim(), |ab, c| t.slices[c].get(i * kt + ab / kt, j * kt + ab % kt));
        let (_, _, v) = m.top_singular_triple()?;
        let w = block_witness(t, i, j, Some(v));
        return Ok(WcbResult {
            value: wcb_evaluate(t, &w),
            certification: Certification::Exact,
            witness: Some(w),
        });
    }
    let warm = warm.map(|w| {
        let mut w = w.clone();
        if w.x.is_none() {
            w.x = Some(random_unit(t.state_dim(), &opts.rng.labelled("wcb-x", 0)));
        }
        w
    });
    optimize(t, opts, warm.as_ref())
}

/// Upper bound on the Banach norm of `h` as a map `S₁^{n,k̃} → ℓ₂^r`: the
/// smaller of its cb norm (`‖h‖_∞`) and its norm from `S₂`.
fn banach_bound(h: &ComplexMatrix, n: usize, r: usize, kt: usize) -> Result<f64> {
    Ok(h.op_norm()?.min(to_wide(h, n, r, kt).op_norm()?))
}

/// Lower bound on the weak Schatten-2 norm. The feasible maps are those of
/// Banach norm at most one, which contains the weak-cb feasible set; the
/// search starts from the weak-cb witness and each candidate is normalized
/// by an upper bound on its Banach norm, so the value stays certified.
pub fn w_schatten2_lower(t: &WeakTensor, opts: &NormOptions) -> Result<WcbResult> {
    let (n, kt) = (t.n, t.kt);
    if n > 6 || kt > 6 {
        return Err(LabError::Unsupported(format!(
            "weak Schatten-2 search is limited to n, k̃ ≤ 6 (got n = {n}, k̃ = {kt})"
        )));
    }
    let cb = wcb_schatten2_lower(t, opts, None)?;
    let Some(start) = cb.witness.clone() else {
        return Ok(cb);
    };
    let ratio = |w: &WcbWitness| -> Result<(f64, WcbWitness)> {
        let bh = banach_bound(&w.h, n, w.r, kt)?;
        let bg = banach_bound(&w.g, n, w.r, kt)?;
        if bh <= 0.0 || bg <= 0.0 {
            return Ok((0.0, w.clone()));
        }
        let normed = WcbWitness {
            r: w.r,
            h: w.h.scale_real(1.0 / bh),
            g: w.g.scale_real(1.0 / bg),
            x: None,
        };
        Ok((wcb_evaluate(t, &normed), normed))
    };
    let climb = |w0: WcbWitness| -> Result<(f64, WcbWitness)> {
        let (mut value, mut w) = ratio(&w0)?;
        let r = w.r;
        for _ in 0..opts.iters {
            let before = value;
            for side in 0..2 {
                let (own, other) = if side == 0 { (&w.h, &w.g) } else { (&w.g, &w.h) };
                let own_w = to_wide(own, n, r, kt);
                let other_w = to_wide(other, n, r, kt);
                // Linearization of ‖H T Gᵀ‖_F in the moving factor, in wide form.
                let grad_wide = if side == 0 {
                    let m = t.slices[0].matmul(&other_w.transpose());
                    own_w.matmul(&m).matmul(&m.adjoint())
                } else {
                    let d = other_w.matmul(&t.slices[0]);
                    let a = d.matmul(&own_w.transpose());
                    a.transpose().matmul(&d.conj())
                };
                let cands = [
                    from_wide(&grad_wide, n, r, kt).polar_factor()?,
                    from_wide(&grad_wide.polar_factor()?, n, r, kt),
                ];
                for c in cands {
                    let mut trial = w.clone();
                    if side == 0 {
                        trial.h = c;
                    } else {
                        trial.g = c;
                    }
                    let (v, normed) = ratio(&trial)?;
                    if v > value {
                        value = v;
                        w = normed;
                    }
                }
            }
            if value - before <= opts.tol * value.max(1.0) {
                break;
            }
        }
        Ok((value, w))
    };
    let mut best = climb(start)?;
    for r in 1..=opts.r_max.max(1) {
        for restart in 0..opts.restarts.max(1) {
            let cand = climb(random_witness(t, r, &opts.rng.labelled("w", r as u64).child(restart as u64)))?;
            if cand.0 > best.0 {
                best = cand;
            }
        }
    }
    let value = wcb_evaluate(t, &best.1).max(cb.value);
    let witness = if wcb_evaluate(t, &best.1) >= cb.value { best.1 } else { cb.witness.expect("present") };
    Ok(WcbResult {
        value,
        certification: Certification::LowerBound,
        witness: Some(witness),
    })
}

/// Upper bound on the projective norm: the best of the canonical basis
/// expansion and the row-block and column-block expansions.
pub fn projective_upper(t: &ComplexMatrix, kt: usize, n: usize) -> Result<f64> {
    let big = n * kt;
    if t.shape() != (big, big) {
        return Err(LabError::Shape(format!("projective bound needs a {big}x{big} tensor")));
    }
    let canonical: f64 = t.as_slice().iter().map(|z| z.norm()).sum();
    let mut rows = 0.0;
    let mut cols = 0.0;
    for p in 0..big {
        rows += ComplexMatrix::from_fn(n, kt, |j, b| t.get(p, j * kt + b)).trace_norm()?;
        cols += ComplexMatrix::from_fn(n, kt, |i, a| t.get(i * kt + a, p)).trace_norm()?;
    }
    Ok(canonical.min(rows).min(cols))
}
