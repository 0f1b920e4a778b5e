//! `ℓ₁^n ⊗_ε ℓ₁^n`: the norm `sup_{s,t ∈ B_{ℓ∞}} |Σ a_ij s_i t_j|`.

use super::NormOptions;
use crate::error::{LabError, Result};
use crate::linalg::{gaussian_matrix, ComplexMatrix, ComplexVector, C64, ZERO};

/// Largest side for sign enumeration (`2^{n-1}` row-sign patterns).
pub const ENUM_MAX_N: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct InjectiveResult {
    pub value: f64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseInjectiveResult {
    pub value: f64,
    pub s: ComplexVector,
    pub t: ComplexVector,
}

/// Exact norm of a real `n × n` matrix (row-major) by enumerating row
/// signs; the optimal column signs follow in closed form.
pub fn l1_injective_norm(a: &[f64], n: usize) -> Result<InjectiveResult> {
    if a.len() != n * n {
        return Err(LabError::Shape(format!("{} entries for a {n}x{n} matrix", a.len())));
    }
    if n > ENUM_MAX_N {
        return Err(LabError::Precondition(format!(
            "sign enumeration supports n ≤ {ENUM_MAX_N}; use the heuristic complex routine for n = {n}"
        )));
    }
    if n == 0 {
        return Ok(InjectiveResult {
            value: 0.0,
            s: vec![],
            t: vec![],
        });
    }
    let mut best = (-1.0, 0u64);
    let mut col = vec![0.0; n];
    // s_0 = +1 by the symmetry (s, t) -> (-s, -t).
    for pattern in 0..(1u64 << (n - 1)) {
        col.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..n {
            let s = if i > 0 && (pattern >> (i - 1)) & 1 == 1 { -1.0 } else { 1.0 };
            for j in 0..n {
                col[j] += s * a[i * n + j];
            }
        }
        let v: f64 = col.iter().map(|c| c.abs()).sum();
        if v > best.0 {
            best = (v, pattern);
        }
    }
    let s: Vec<f64> = (0..n)
        .map(|i| if i > 0 && (best.1 >> (i - 1)) & 1 == 1 { -1.0 } else { 1.0 })
        .collect();
    let t: Vec<f64> = (0..n)
        .map(|j| {
            let c: f64 = (0..n).map(|i| s[i] * a[i * n + j]).sum();
            if c >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(InjectiveResult { value: best.0, s, t })
}

fn phase(z: C64) -> C64 {
    if z.norm() > 0.0 {
        z / z.norm()
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Alternating maximization over unimodular `s, t` from seeded starts. The
/// value is attained by its witness, so it never exceeds the norm, but it is
/// not certified to reach it.
pub fn l1_injective_norm_complex(a: &ComplexMatrix, opts: &NormOptions) -> Result<PhaseInjectiveResult> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LabError::Shape("injective norm needs a square matrix".into()));
    }
    let bilinear = |s: &[C64], t: &[C64]| -> C64 {
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += a.get(i, j) * s[i] * t[j];
            }
        }
        acc
    };
    let mut best = PhaseInjectiveResult {
        value: -1.0,
        s: ComplexVector::zeros(n),
        t: ComplexVector::zeros(n),
    };
    for restart in 0..opts.restarts.max(1) {
        let g = gaussian_matrix(n, 1, &opts.rng.labelled("injective", restart as u64));
        let mut t: Vec<C64> = g.as_slice().iter().map(|&z| phase(z)).collect();
        let mut s = vec![C64::new(1.0, 0.0); n];
        let mut value = -1.0;
        for _ in 0..opts.iters.max(1) {
            for i in 0..n {
                let at: C64 = (0..n).map(|j| a.get(i, j) * t[j]).sum();
                s[i] = phase(at).conj();
            }
            for j in 0..n {
                let sa: C64 = (0..n).map(|i| s[i] * a.get(i, j)).sum();
                t[j] = phase(sa).conj();
            }
            let v = bilinear(&s, &t).norm();
            if v <= value + opts.tol {
                break;
            }
            value = v;
        }
        let value = bilinear(&s, &t).norm();
        if value > best.value {
            best = PhaseInjectiveResult {
                value,
                s: ComplexVector::new(s),
                t: ComplexVector::new(t),
            };
        }
    }
    Ok(best)
}
