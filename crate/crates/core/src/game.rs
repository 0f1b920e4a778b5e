//! The game `G_Rad^{(n)}`: question state, sign-indexed target states and
//! game tensors, plus exact enumeration of the sign hypercube.
//!
//! Basis convention: `|i⟩ ⊗ |j⟩` on registers A, B is the flat index
//! `i * n + j`, and the reference register C uses the same index, so the
//! game tensors are diagonal in storage.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{LabError, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, C64, ZERO};
use crate::rng::SeededRng;

/// Exact enumeration covers at most `2^ENUMERATION_CAP_BITS` sign vectors.
pub const ENUMERATION_CAP_BITS: usize = 20;

/// A point of the Boolean hypercube `{±1}^m`.
///
/// For the game, `m = n²` and entry `(i, j)` lives at position `i * n + j`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignVector {
    entries: Vec<i8>,
}

impl SignVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.iter().any(|&e| e != 1 && e != -1) {
            return Err(LabError::Format("sign vector entries must be +1 or -1".into()));
        }
        if entries.len() > 64 {
            return Err(LabError::Precondition("sign vectors longer than 64 are not indexable".into()));
        }
        Ok(Self { entries })
    }

    pub fn ones(m: usize) -> Self {
        Self { entries: vec![1; m] }
    }

    /// Sign vector at position `index` of the lexicographic enumeration:
    /// the last coordinate varies fastest and a set bit means `-1`.
    pub fn from_index(m: usize, index: u64) -> Self {
        debug_assert!(m <= 64);
        let entries = (0..m)
            .map(|t| if (index >> (m - 1 - t)) & 1 == 1 { -1 } else { 1 })
            .collect();
        Self { entries }
    }

    pub fn index(&self) -> u64 {
        let m = self.entries.len();
        self.entries
            .iter()
            .enumerate()
            .fold(0u64, |acc, (t, &e)| if e < 0 { acc | (1 << (m - 1 - t)) } else { acc })
    }

    /// Uniformly random sign vector.
    pub fn random(m: usize, rng: &SeededRng) -> Self {
        let mut g = rng.generator();
        Self {
            entries: (0..m).map(|_| if g.random::<bool>() { 1 } else { -1 }).collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn get(&self, t: usize) -> i8 {
        self.entries[t]
    }

    #[inline]
    pub fn sign(&self, t: usize) -> f64 {
        self.entries[t] as f64
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    /// Copy with coordinate `t` negated.
    pub fn flipped(&self, t: usize) -> Self {
        let mut out = self.clone();
        out.entries[t] = -out.entries[t];
        out
    }

    /// Coordinate-wise product.
    pub fn hadamard(&self, other: &Self) -> Self {
        Self {
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).collect(),
        }
    }

    /// Grid dimension `n` when the length is a perfect square.
    pub fn grid_side(&self) -> Option<usize> {
        let m = self.entries.len();
        let n = (m as f64).sqrt().round() as usize;
        (n * n == m).then_some(n)
    }

    pub fn sum(&self) -> i64 {
        self.entries.iter().map(|&e| e as i64).sum()
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &e in &self.entries {
            f.write_str(if e > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignVector({self})")
    }
}

impl FromStr for SignVector {
    type Err = LabError;

    /// Accepts `+` and either `-` or the Unicode minus `−`.
    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' | '−' => Ok(-1),
                other => Err(LabError::Format(format!("invalid sign character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        SignVector::new(entries)
    }
}

impl Serialize for SignVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SignVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fails unless `2^bits` is within the exact-enumeration cap.
pub fn check_enumerable(bits: usize) -> Result<()> {
    if bits > ENUMERATION_CAP_BITS {
        Err(LabError::EnumerationTooLarge {
            bits,
            cap_bits: ENUMERATION_CAP_BITS,
        })
    } else {
        Ok(())
    }
}

/// All `2^m` points of `{±1}^m` in lexicographic order.
pub fn enumerate_cube(m: usize) -> Result<impl Iterator<Item = SignVector>> {
    check_enumerable(m)?;
    Ok((0..(1u64 << m)).map(move |idx| SignVector::from_index(m, idx)))
}

/// All sign vectors of the game of size `n` (length `n²`).
pub fn enumerate_signs(n: usize) -> Result<impl Iterator<Item = SignVector>> {
    enumerate_cube(n * n)
}

/// Evaluates `f` on every point of `{±1}^m` in parallel and returns the
/// results in enumeration order.
pub fn map_cube<T, F>(m: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SignVector) -> Result<T> + Sync,
{
    check_enumerable(m)?;
    (0..(1u64 << m))
        .into_par_iter()
        .map(|idx| f(&SignVector::from_index(m, idx)))
        .collect()
}

/// Exact mean of `f` over `{±1}^m`; summation order is fixed so the result
/// does not depend on the thread pool.
pub fn cube_mean<F>(m: usize, f: F) -> Result<f64>
where
    F: Fn(&SignVector) -> Result<f64> + Sync,
{
    let vals = map_cube(m, f)?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// `G_Rad^{(n)}`, identified by its security parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameInstance {
    n: usize,
}

/// `Ĝ_ε = Tr_C |ψ_ε⟩⟨ψ|`, stored by its diagonal `ε_ij / n²`.
#[derive(Clone, Debug, PartialEq)]
pub struct GameTensor {
    n: usize,
    diagonal: Vec<f64>,
}

impl GameTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::diag_real(&self.diagonal)
    }

    /// Trace norm, exact for a diagonal matrix.
    pub fn trace_norm(&self) -> f64 {
        self.diagonal.iter().map(|d| d.abs()).sum()
    }

    pub fn op_norm(&self) -> f64 {
        self.diagonal.iter().map(|d| d.abs()).fold(0.0, f64::max)
    }
}

impl GameInstance {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(LabError::Precondition(format!("game size n must be at least 2, got {n}")));
        }
        if n * n > 64 {
            return Err(LabError::Precondition(format!("game size n = {n} exceeds the supported maximum 8")));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sign coordinates, `n²`.
    #[inline]
    pub fn bits(&self) -> usize {
        self.n * self.n
    }

    fn check_signs(&self, eps: &SignVector) -> Result<()> {
        if eps.len() != self.bits() {
            return Err(LabError::Shape(format!(
                "sign vector of length {} for a game with n = {} (needs {})",
                eps.len(),
                self.n,
                self.bits()
            )));
        }
        Ok(())
    }

    /// `|ψ⟩ = (1/n) Σ_ij |ij⟩_AB ⊗ |ij⟩_C`, AB index major.
    pub fn psi(&self) -> ComplexVector {
        self.psi_eps(&SignVector::ones(self.bits())).expect("length matches")
    }

    /// `|ψ_ε⟩ = (U_ε ⊗ Id_C)|ψ⟩`.
    pub fn psi_eps(&self, eps: &SignVector) -> Result<ComplexVector> {
        self.check_signs(eps)?;
        let d = self.bits();
        let amp = 1.0 / self.n as f64;
        let mut v = vec![ZERO; d * d];
        for ab in 0..d {
            v[ab * d + ab] = C64::new(eps.sign(ab) * amp, 0.0);
        }
        Ok(ComplexVector::new(v))
    }

    pub fn game_tensor(&self, eps: &SignVector) -> Result<GameTensor> {
        self.check_signs(eps)?;
        let w = 1.0 / self.bits() as f64;
        Ok(GameTensor {
            n: self.n,
            diagonal: (0..self.bits()).map(|t| eps.sign(t) * w).collect(),
        })
    }

    /// `E_ε ‖Ĝ_ε‖²_{S₁}`: the value reached by the honest prover.
    pub fn honest_value(&self) -> Result<f64> {
        let bits = self.bits();
        if bits <= ENUMERATION_CAP_BITS {
            cube_mean(bits, |eps| Ok(self.game_tensor(eps)?.trace_norm().powi(2)))
        } else {
            // Every term equals one; a fixed sample is enough to evaluate it.
            let root = SeededRng::new(0, 0);
            let vals = (0..1024u64)
                .into_par_iter()
                .map(|t| Ok(self.game_tensor(&SignVector::random(bits, &root.child(t)))?.trace_norm().powi(2)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn signs(s: &str) -> SignVector {
        s.parse().unwrap()
    }

    #[test]
    fn psi_structure_and_normalization() {
        let g = GameInstance::new(2).unwrap();
        let psi = g.psi();
        let nonzero: Vec<usize> = psi
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero, vec![0, 5, 10, 15]);
        for &i in &nonzero {
            assert_abs_diff_eq!(psi.as_slice()[i].re, 0.5);
        }
        for n in 2..=4 {
            assert_abs_diff_eq!(GameInstance::new(n).unwrap().psi().norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn overlap_is_mean_sign() {
        let g = GameInstance::new(3).unwrap();
        let psi = g.psi();
        for idx in [0u64, 7, 100, 511] {
            let eps = SignVector::from_index(9, idx);
            let overlap = psi.dot(&g.psi_eps(&eps).unwrap());
            assert_abs_diff_eq!(overlap.re, eps.sum() as f64 / 9.0, epsilon = 1e-14);
            assert_abs_diff_eq!(overlap.im, 0.0);
        }
        let g2 = GameInstance::new(2).unwrap();
        let o = g2.psi().dot(&g2.psi_eps(&signs("+++-")).unwrap());
        assert_abs_diff_eq!(o.re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn psi_eps_special_cases() {
        let g = GameInstance::new(2).unwrap();
        assert_eq!(g.psi_eps(&signs("++++")).unwrap(), g.psi());
        let minus = g.psi_eps(&signs("----")).unwrap();
        assert_eq!(minus, g.psi().scale_real(-1.0));
        assert_abs_diff_eq!(minus.dot(&g.psi()).norm_sqr(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn psi_eps_is_sign_unitary_applied_to_psi() {
        for n in [2usize, 3] {
            let g = GameInstance::new(n).unwrap();
            let d = n * n;
            let eps = SignVector::from_index(d, 0b1011 % (1 << d));
            let u = ComplexMatrix::diag_real(&(0..d).map(|t| eps.sign(t)).collect::<Vec<_>>());
            let full = crate::linalg::kron(&u, &ComplexMatrix::identity(d)).unwrap();
            let applied = full.matvec(&g.psi());
            assert_eq!(applied, g.psi_eps(&eps).unwrap());
        }
    }

    #[test]
    fn mean_squared_overlap_is_inverse_bits() {
        for n in [2usize, 3] {
            let g = GameInstance::new(n).unwrap();
            let psi = g.psi();
            let mean = cube_mean(n * n, |eps| Ok(psi.dot(&g.psi_eps(eps)?).norm_sqr())).unwrap();
            assert_abs_diff_eq!(mean, 1.0 / (n * n) as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn game_tensor_is_partial_trace() {
        // Independent partial trace over C of |ψ_ε⟩⟨ψ|.
        let g = GameInstance::new(2).unwrap();
        let d = 4;
        let eps = signs("+-+-");
        let outer = g.psi_eps(&eps).unwrap().outer(&g.psi());
        let mut reduced = ComplexMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let mut acc = ZERO;
                for c in 0..d {
                    acc += outer.get(a * d + c, b * d + c);
                }
                reduced.set(a, b, acc);
            }
        }
        assert!(reduced.max_abs_diff(&g.game_tensor(&eps).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn game_tensor_norms() {
        let g = GameInstance::new(3).unwrap();
        let root = SeededRng::new(3, 3);
        for t in 0..100 {
            let tensor = g.game_tensor(&SignVector::random(9, &root.child(t))).unwrap();
            assert_abs_diff_eq!(tensor.trace_norm(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(tensor.op_norm(), 1.0 / 9.0, epsilon = 1e-15);
            assert_abs_diff_eq!(tensor.matrix().trace_norm().unwrap(), 1.0, epsilon = 1e-12);
        }
        let g2 = GameInstance::new(2).unwrap();
        let all_plus = g2.game_tensor(&signs("++++")).unwrap().matrix();
        assert_eq!(all_plus, ComplexMatrix::identity(4).scale_real(0.25));
    }

    #[test]
    fn honest_value_is_one() {
        for n in [2, 3] {
            assert_abs_diff_eq!(GameInstance::new(n).unwrap().honest_value().unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn enumeration_counts_and_cap() {
        assert_eq!(enumerate_signs(2).unwrap().count(), 16);
        let all: Vec<_> = enumerate_signs(3).unwrap().collect();
        assert_eq!(all.len(), 512);
        let distinct: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(distinct.len(), 512);
        assert_eq!(all[0].to_string(), "+++++++++");
        assert_eq!(all[1].to_string(), "++++++++-");
        assert!(matches!(enumerate_signs(5), Err(LabError::EnumerationTooLarge { bits: 25, .. })));
    }

    #[test]
    fn sign_strings_round_trip() {
        let v = signs("+−-+");
        assert_eq!(v.to_string(), "+--+");
        assert_eq!(SignVector::from_index(4, v.index()), v);
        assert!("+x".parse::<SignVector>().is_err());
        assert!(GameInstance::new(1).is_err());
        let g = GameInstance::new(2).unwrap();
        assert!(matches!(g.psi_eps(&signs("+++")), Err(LabError::Shape(_))));
    }
}
