//! Block-coordinate ascent over pure strategies.
//!
//! The value is a convex quadratic in each matrix block, so replacing a
//! block by the polar factor of the gradient never decreases it. The
//! `φ`-block is solved exactly as the top eigenvector of `E_ε A_ε†A_ε`,
//! where `a(ε) = A_ε φ`. Blocks indexed by `ε` have decoupled objectives and
//! are updated independently.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::game::{check_enumerable, SignVector};
use crate::linalg::{hermitian_top_eigen, ComplexMatrix, ComplexVector, C64};
use crate::rng::SeededRng;
use crate::strategies::{contract_answers, exchange, exchanged_blocks, zoo, Dims, EpsFamily, PureStrategy, ZooKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    #[serde(rename = "phi")]
    Phi,
    #[serde(rename = "V")]
    V,
    #[serde(rename = "W")]
    W,
    #[serde(rename = "Vt")]
    Vt,
    #[serde(rename = "Wt")]
    Wt,
}

impl Block {
    pub const DEFAULT_SCHEDULE: [Block; 5] = [Block::Wt, Block::Vt, Block::W, Block::V, Block::Phi];

    pub fn name(self) -> &'static str {
        match self {
            Block::Phi => "phi",
            Block::V => "V",
            Block::W => "W",
            Block::Vt => "Vt",
            Block::Wt => "Wt",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Block {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi" => Ok(Block::Phi),
            "V" | "v" => Ok(Block::V),
            "W" | "w" => Ok(Block::W),
            "Vt" | "vt" => Ok(Block::Vt),
            "Wt" | "wt" => Ok(Block::Wt),
            other => Err(LabError::Format(format!("unknown block {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsSampling {
    Exact,
    /// A fixed seeded sample of sign vectors replaces the full cube.
    MonteCarlo { samples: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeesawConfig {
    pub n: usize,
    pub k: usize,
    pub kt: usize,
    pub r: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub eps_mode: EpsSampling,
    pub block_schedule: Vec<Block>,
    /// Starting point of restart 0; the other restarts start at random.
    pub warm_start: Option<PureStrategy>,
}

impl SeesawConfig {
    pub fn new(n: usize, k: usize, kt: usize, r: usize) -> Self {
        Self {
            n,
            k,
            kt,
            r,
            restarts: 4,
            max_iters: 100,
            tol: 1e-9,
            seed: 0,
            eps_mode: EpsSampling::Exact,
            block_schedule: Block::DEFAULT_SCHEDULE.to_vec(),
            warm_start: None,
        }
    }

    pub fn with_zoo_warm_start(mut self, kind: ZooKind) -> Result<Self> {
        let dims = Dims::new(self.n, self.k, self.kt, self.r)?;
        self.warm_start = Some(zoo(kind, dims, &SeededRng::new(self.seed, 0x5ee))?);
        Ok(self)
    }

    fn validate(&self) -> Result<Dims> {
        if !(self.tol > 0.0) {
            return Err(LabError::Precondition("see-saw tolerance must be positive".into()));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(LabError::Precondition("restarts and max_iters must be at least 1".into()));
        }
        if self.block_schedule.is_empty() {
            return Err(LabError::Precondition("block schedule is empty".into()));
        }
        let dims = Dims::new(self.n, self.k, self.kt, self.r)?;
        if let Some(w) = &self.warm_start {
            let wd = w.dims();
            if (wd.n, wd.k, wd.kt, wd.r) != (dims.n, dims.k, dims.kt, dims.r) {
                return Err(LabError::Shape("warm start has different dimensions".into()));
            }
            w.validate()?;
        }
        Ok(dims)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeesawTrace {
    /// Value after each sweep, with the starting value first.
    pub values: Vec<Vec<f64>>,
    pub best: PureStrategy,
    pub best_value: f64,
    pub best_restart: usize,
}

/// Working copy with every `ε`-indexed block tabulated on the sample.
#[derive(Clone)]
struct State {
    dims: Dims,
    signs: Vec<SignVector>,
    v: ComplexMatrix,
    w: Vec<ComplexMatrix>,
    vt: Vec<ComplexMatrix>,
    wt: Vec<ComplexMatrix>,
    phi: ComplexVector,
}

/// Cached pieces of `a(ε)` for one sign vector.
struct Parts {
    x: ComplexMatrix,
    z: Vec<ComplexMatrix>,
    a: ComplexMatrix,
}

impl State {
    fn from_strategy(s: &PureStrategy, signs: Vec<SignVector>) -> Result<Self> {
        let tab = |f: &EpsFamily| -> Result<Vec<ComplexMatrix>> { signs.iter().map(|e| Ok(f.at(e)?.into_owned())).collect() };
        Ok(Self {
            dims: s.dims(),
            v: s.v().clone(),
            w: tab(s.w())?,
            vt: tab(s.vt())?,
            wt: tab(s.wt())?,
            phi: s.phi().clone(),
            signs,
        })
    }

    fn phi_matrix(&self) -> ComplexMatrix {
        self.phi.to_matrix(self.dims.k, self.dims.k)
    }

    fn parts_with(&self, idx: usize, v: &ComplexMatrix, w: &ComplexMatrix, phi_mat: &ComplexMatrix) -> Parts {
        let Dims {
            n, k, r, keep, send, ..
        } = self.dims;
        let x = phi_mat.matmul(&w.transpose());
        let z = exchanged_blocks(n, k, keep, send, v, w, phi_mat);
        let a = contract_answers(n, r, &self.signs[idx], &z, &self.vt[idx], &self.wt[idx]);
        Parts { x, z, a }
    }

    fn parts(&self, idx: usize) -> Parts {
        self.parts_with(idx, &self.v, &self.w[idx], &self.phi_matrix())
    }

    fn prob(&self, idx: usize) -> f64 {
        self.parts(idx).a.fro_norm_sqr()
    }

    fn value(&self) -> f64 {
        let vals: Vec<f64> = (0..self.signs.len()).into_par_iter().map(|i| self.prob(i)).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    fn coeff(&self, idx: usize, ij: usize) -> f64 {
        let n = self.dims.n;
        self.signs[idx].sign(ij) / (n * n) as f64
    }

    /// `Q_ij = Exchange(Ṽ_i† a conj(W̃_j))`, the gradient of `Re⟨a, ·⟩` at `Z_ij`.
    fn back_blocks(&self, idx: usize, a: &ComplexMatrix) -> Vec<ComplexMatrix> {
        let Dims { n, r, keep, send, .. } = self.dims;
        let vt = &self.vt[idx];
        let wt = &self.wt[idx];
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let left = vt.row_block(i * r, r).adjoint().matmul(a);
            for j in 0..n {
                let q = left.matmul(&wt.row_block(j * r, r).conj());
                out.push(exchange(&q, keep, send));
            }
        }
        out
    }

    fn grad_vt(&self, idx: usize, p: &Parts) -> ComplexMatrix {
        let Dims { n, kt, r, .. } = self.dims;
        let wt = &self.wt[idx];
        let mut g = ComplexMatrix::zeros(n * r, kt);
        for i in 0..n {
            let mut b = ComplexMatrix::zeros(kt, r);
            for j in 0..n {
                let term = p.z[i * n + j].matmul(&wt.row_block(j * r, r).transpose());
                b.axpy(C64::new(self.coeff(idx, i * n + j), 0.0), &term);
            }
            let gi = p.a.matmul(&b.adjoint());
            for row in 0..r {
                for col in 0..kt {
                    g.set(i * r + row, col, gi.get(row, col));
                }
            }
        }
        g
    }

    fn grad_wt(&self, idx: usize, p: &Parts) -> ComplexMatrix {
        let Dims { n, kt, r, .. } = self.dims;
        let vt = &self.vt[idx];
        let mut g = ComplexMatrix::zeros(n * r, kt);
        for j in 0..n {
            let mut d = ComplexMatrix::zeros(r, kt);
            for i in 0..n {
                let term = vt.row_block(i * r, r).matmul(&p.z[i * n + j]);
                d.axpy(C64::new(self.coeff(idx, i * n + j), 0.0), &term);
            }
            let gj = p.a.transpose().matmul(&d.conj());
            for row in 0..r {
                for col in 0..kt {
                    g.set(j * r + row, col, gj.get(row, col));
                }
            }
        }
        g
    }

    fn grad_w(&self, idx: usize, p: &Parts) -> ComplexMatrix {
        let Dims { n, k, kt, .. } = self.dims;
        let q = self.back_blocks(idx, &p.a);
        let phi_adj = self.phi_matrix().adjoint();
        let mut g = ComplexMatrix::zeros(k, kt);
        for ij in 0..n * n {
            let vij = ComplexMatrix::from_fn(kt, k, |row, m| self.v.get(row, ij * k + m));
            let term = phi_adj.matmul(&vij.adjoint()).matmul(&q[ij]);
            g.axpy(C64::new(self.coeff(idx, ij), 0.0), &term);
        }
        g.transpose()
    }

    /// Gradient of `Σ_ε ‖a(ε)‖²` in `V` (up to a positive factor).
    fn grad_v(&self) -> ComplexMatrix {
        let Dims { n, k, kt, .. } = self.dims;
        let parts: Vec<ComplexMatrix> = (0..self.signs.len())
            .into_par_iter()
            .map(|idx| {
                let p = self.parts(idx);
                let q = self.back_blocks(idx, &p.a);
                let x_adj = p.x.adjoint();
                let mut g = ComplexMatrix::zeros(kt, n * n * k);
                for (ij, qij) in q.iter().enumerate() {
                    let gij = qij.matmul(&x_adj);
                    let c = self.coeff(idx, ij);
                    for row in 0..kt {
                        for m in 0..k {
                            g.add_at(row, ij * k + m, gij.get(row, m) * c);
                        }
                    }
                }
                g
            })
            .collect();
        let mut total = ComplexMatrix::zeros(kt, n * n * k);
        for g in &parts {
            total.axpy(C64::new(1.0, 0.0), g);
        }
        total
    }

    /// `E_ε A_ε†A_ε` with `a(ε) = A_ε φ`.
    fn phi_form(&self) -> ComplexMatrix {
        let k = self.dims.k;
        let kk = k * k;
        let forms: Vec<ComplexMatrix> = (0..self.signs.len())
            .into_par_iter()
            .map(|idx| {
                let cols: Vec<ComplexVector> = (0..kk)
                    .map(|c| {
                        let basis = ComplexVector::basis(kk, c).to_matrix(k, k);
                        self.parts_with(idx, &self.v, &self.w[idx], &basis).a.into()
                    })
                    .collect();
                let rr = cols[0].dim();
                let amat = ComplexMatrix::from_fn(rr, kk, |row, c| cols[c].as_slice()[row]);
                amat.adjoint().matmul(&amat)
            })
            .collect();
        let mut m = ComplexMatrix::zeros(kk, kk);
        for f in &forms {
            m.axpy(C64::new(1.0 / forms.len() as f64, 0.0), f);
        }
        // Symmetrize against rounding.
        m.add(&m.adjoint()).scale_real(0.5)
    }

    fn update(&mut self, block: Block) -> Result<()> {
        match block {
            Block::Phi => {
                let (_, top) = hermitian_top_eigen(&self.phi_form())?;
                let old = self.value();
                let prev = std::mem::replace(&mut self.phi, top);
                if self.value() < old {
                    self.phi = prev;
                }
            }
            Block::V => {
                let g = self.grad_v();
                if g.fro_norm() > 0.0 {
                    let old = self.value();
                    let cand = g.polar_factor()?;
                    let prev = std::mem::replace(&mut self.v, cand);
                    if self.value() < old {
                        self.v = prev;
                    }
                }
            }
            Block::W | Block::Vt | Block::Wt => {
                let next: Vec<Option<ComplexMatrix>> = (0..self.signs.len())
                    .into_par_iter()
                    .map(|idx| self.local_step(block, idx))
                    .collect::<Result<_>>()?;
                for (idx, m) in next.into_iter().enumerate() {
                    if let Some(m) = m {
                        match block {
                            Block::W => self.w[idx] = m,
                            Block::Vt => self.vt[idx] = m,
                            _ => self.wt[idx] = m,
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Polar step for one `ε`; `None` keeps the block.
    fn local_step(&self, block: Block, idx: usize) -> Result<Option<ComplexMatrix>> {
        let p = self.parts(idx);
        let old = p.a.fro_norm_sqr();
        let g = match block {
            Block::W => self.grad_w(idx, &p),
            Block::Vt => self.grad_vt(idx, &p),
            _ => self.grad_wt(idx, &p),
        };
        if g.fro_norm() == 0.0 {
            return Ok(None);
        }
        let cand = g.polar_factor()?;
        let mut trial = self.clone_local(idx);
        match block {
            Block::W => trial.w[0] = cand.clone(),
            Block::Vt => trial.vt[0] = cand.clone(),
            _ => trial.wt[0] = cand.clone(),
        }
        Ok((trial.prob(0) >= old).then_some(cand))
    }

    fn clone_local(&self, idx: usize) -> State {
        State {
            dims: self.dims,
            signs: vec![self.signs[idx].clone()],
            v: self.v.clone(),
            w: vec![self.w[idx].clone()],
            vt: vec![self.vt[idx].clone()],
            wt: vec![self.wt[idx].clone()],
            phi: self.phi.clone(),
        }
    }

    fn into_strategy(self, fallback: Option<&PureStrategy>, kind: &str) -> Result<PureStrategy> {
        let table = |blocks: Vec<ComplexMatrix>, fb: Option<&EpsFamily>| EpsFamily::Table {
            entries: self.signs.iter().cloned().zip(blocks).collect::<BTreeMap<_, _>>(),
            fallback: fb.map(|f| Box::new(f.clone())),
        };
        let w = table(self.w.clone(), fallback.map(|s| s.w()));
        let vt = table(self.vt.clone(), fallback.map(|s| s.vt()));
        let wt = table(self.wt.clone(), fallback.map(|s| s.wt()));
        PureStrategy::new(self.dims, kind, self.v, w, vt, wt, self.phi)
    }
}

fn sample_signs(m: usize, mode: EpsSampling, seed: u64) -> Result<Vec<SignVector>> {
    match mode {
        EpsSampling::Exact => {
            check_enumerable(m)?;
            Ok((0..1u64 << m).map(|idx| SignVector::from_index(m, idx)).collect())
        }
        EpsSampling::MonteCarlo { samples } => {
            if samples < 2 {
                return Err(LabError::Precondition("Monte Carlo needs at least 2 samples".into()));
            }
            let rng = SeededRng::new(seed, 0x5a);
            Ok((0..samples as u64).map(|t| SignVector::random(m, &rng.child(t))).collect())
        }
    }
}

/// One block-coordinate update, evaluated on the full cube.
pub fn update_block(s: &PureStrategy, block: Block) -> Result<PureStrategy> {
    s.validate()?;
    let m = s.dims().n * s.dims().n;
    let mut st = State::from_strategy(s, sample_signs(m, EpsSampling::Exact, 0)?)?;
    st.update(block)?;
    st.into_strategy(None, s.kind())
}

fn run_restart(cfg: &SeesawConfig, dims: Dims, restart: usize, signs: &[SignVector]) -> Result<(Vec<f64>, PureStrategy)> {
    let start = match (&cfg.warm_start, restart) {
        (Some(w), 0) => w.clone(),
        _ => zoo(ZooKind::Random, dims, &SeededRng::new(cfg.seed, 0).labelled("seesaw-restart", restart as u64))?,
    };
    let mut st = State::from_strategy(&start, signs.to_vec())?;
    let mut values = vec![st.value()];
    let mut stalls = 0;
    for _ in 0..cfg.max_iters {
        for &b in &cfg.block_schedule {
            st.update(b)?;
        }
        let v = st.value();
        let gain = v - values.last().copied().unwrap_or(0.0);
        values.push(v);
        stalls = if gain < cfg.tol { stalls + 1 } else { 0 };
        if stalls >= 3 {
            break;
        }
    }
    let fallback = matches!(cfg.eps_mode, EpsSampling::MonteCarlo { .. }).then_some(&start);
    let s = st.into_strategy(fallback, "seesaw")?;
    Ok((values, s))
}

/// Runs all restarts (in parallel) and keeps the best final strategy; ties
/// go to the lowest restart index.
pub fn optimize(cfg: &SeesawConfig) -> Result<SeesawTrace> {
    let dims = cfg.validate()?;
    let signs = sample_signs(dims.n * dims.n, cfg.eps_mode, cfg.seed)?;
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(cfg, dims, r, &signs))
        .collect::<Result<Vec<_>>>()?;
    let mut best_restart = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.0.last() > runs[best_restart].0.last() {
            best_restart = r;
        }
    }
    let values: Vec<Vec<f64>> = runs.iter().map(|r| r.0.clone()).collect();
    let best_value = *values[best_restart].last().expect("trace starts with the initial value");
    let best = runs.into_iter().nth(best_restart).expect("restart exists").1;
    Ok(SeesawTrace {
        values,
        best,
        best_value,
        best_restart,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(n: usize, k: usize, kt: usize, r: usize, seed: u64) -> PureStrategy {
        zoo(ZooKind::Random, Dims::new(n, k, kt, r).unwrap(), &SeededRng::new(seed, 0)).unwrap()
    }

    /// Directional derivative of the total value against `Re⟨G, D⟩`.
    fn check_gradient(block: Block) {
        let s = random(2, 2, 4, 2, 11);
        let st = State::from_strategy(&s, sample_signs(4, EpsSampling::Exact, 0).unwrap()).unwrap();
        let idx = 5;
        let p = st.parts(idx);
        let (g, base) = match block {
            Block::V => (st.grad_v(), st.v.clone()),
            Block::W => (st.grad_w(idx, &p), st.w[idx].clone()),
            Block::Vt => (st.grad_vt(idx, &p), st.vt[idx].clone()),
            _ => (st.grad_wt(idx, &p), st.wt[idx].clone()),
        };
        let dir = crate::linalg::gaussian_matrix(base.rows(), base.cols(), &SeededRng::new(3, 3));
        let h = 1e-6;
        let eval = |t: f64| {
            let mut trial = st.clone();
            let m = base.add(&dir.scale_real(t));
            match block {
                Block::V => {
                    trial.v = m;
                    trial.value() * trial.signs.len() as f64
                }
                Block::W => {
                    trial.w[idx] = m;
                    trial.prob(idx)
                }
                Block::Vt => {
                    trial.vt[idx] = m;
                    trial.prob(idx)
                }
                _ => {
                    trial.wt[idx] = m;
                    trial.prob(idx)
                }
            }
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let analytic = 2.0 * g.inner(&dir).re;
        assert!((fd - analytic).abs() < 1e-6 * (1.0 + analytic.abs()), "{block}: {fd} vs {analytic}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        for b in [Block::V, Block::W, Block::Vt, Block::Wt] {
            check_gradient(b);
        }
    }

    #[test]
    fn phi_step_reaches_the_top_eigenvalue() {
        let s = random(2, 2, 4, 2, 6);
        let before = s.value_exact().unwrap().value;
        let st = State::from_strategy(&s, sample_signs(4, EpsSampling::Exact, 0).unwrap()).unwrap();
        let (lambda, _) = hermitian_top_eigen(&st.phi_form()).unwrap();
        let after = update_block(&s, Block::Phi).unwrap().value_exact().unwrap().value;
        assert!((after - lambda).abs() < 1e-9);
        assert!(after >= before - 1e-12);
    }

    #[test]
    fn block_updates_never_decrease() {
        let s = random(2, 1, 4, 2, 9);
        let mut v = s.value_exact().unwrap().value;
        let mut cur = s;
        for b in Block::DEFAULT_SCHEDULE {
            cur = update_block(&cur, b).unwrap();
            let nv = cur.value_exact().unwrap().value;
            assert!(nv >= v - 1e-12, "{b}");
            v = nv;
        }
    }

    #[test]
    fn small_run_is_monotone_and_reproducible() {
        let mut cfg = SeesawConfig::new(2, 1, 4, 2);
        cfg.restarts = 2;
        cfg.max_iters = 15;
        cfg.seed = 4;
        let a = optimize(&cfg).unwrap();
        let b = optimize(&cfg).unwrap();
        assert_eq!(a.values, b.values);
        for vals in &a.values {
            assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-10));
        }
        assert!(a.best_value <= 1.0 + 1e-9);
        assert!((a.best.value_exact().unwrap().value - a.best_value).abs() < 1e-9);
    }

    #[test]
    fn config_is_checked() {
        let mut cfg = SeesawConfig::new(2, 1, 1, 1);
        cfg.tol = 0.0;
        assert!(optimize(&cfg).is_err());
    }
}
