use approx::assert_abs_diff_eq;

use pvlab_core::game::{enumerate_signs, GameInstance, SignVector};
use pvlab_core::hypercube::{appendix_bounds, lemma_main1_gap, phi, sigma, PhiVariant};
use pvlab_core::linalg::ComplexMatrix;
use pvlab_core::norms::{rademacher_mean_norm, NormOptions, NormTag};
use pvlab_core::rng::SeededRng;
use pvlab_core::strategies::{exchange, zoo, Dims, EvalMode, PureStrategy, ZooKind};

/// Brute-force `E_ε |⟨ψ, ψ_ε⟩|²` from the diagonal form of the state.
fn overlap_oracle(n: usize) -> f64 {
    let all: Vec<SignVector> = enumerate_signs(n).unwrap().collect();
    all.iter().map(|e| (e.sum() as f64 / (n * n) as f64).powi(2)).sum::<f64>() / all.len() as f64
}

#[test]
fn do_nothing_matches_mean_squared_overlap() {
    for n in [2usize, 3] {
        let s = zoo(ZooKind::DoNothing, Dims::new(n, 1, n * n, 1).unwrap(), &SeededRng::new(0, 0)).unwrap();
        assert_abs_diff_eq!(s.value_exact().unwrap().value, overlap_oracle(n), epsilon = 1e-12);
        assert_abs_diff_eq!(overlap_oracle(n), 1.0 / (n * n) as f64, epsilon = 1e-12);
    }
}

#[test]
fn psi_overlaps_by_hand() {
    let g = GameInstance::new(2).unwrap();
    let e: SignVector = "+-++".parse().unwrap();
    let overlap = g.psi().dot(&g.psi_eps(&e).unwrap());
    assert_abs_diff_eq!(overlap.re, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(g.game_tensor(&e).unwrap().trace_norm(), 1.0, epsilon = 1e-15);
}

#[test]
fn exchange_on_basis_elements() {
    // keep = 1, send = 2: the exchange is the transpose.
    let y = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(exchange(&y, 1, 2), y.transpose());
    // send = 1: nothing moves.
    assert_eq!(exchange(&y, 2, 1), y);
}

#[test]
fn grothendieck_means_at_n2() {
    // E‖ε‖_{M_2} over the sixteen sign matrices: eight of rank one with
    // norm 2, eight with norm √2.
    let opts = NormOptions::default();
    let m = rademacher_mean_norm(&NormTag::Operator { rows: 2, cols: 2 }, 2, &EvalMode::Exact, &opts).unwrap();
    assert_abs_diff_eq!(m.mean, (8.0 * 2.0 + 8.0 * 2f64.sqrt()) / 16.0, epsilon = 1e-12);
    // ℓ₁ ⊗_ε ℓ₁: rank-one sign matrices give 4, the others 2.
    let inj = rademacher_mean_norm(&NormTag::InjectiveL1L1 { n: 2 }, 2, &EvalMode::Exact, &opts).unwrap();
    assert_abs_diff_eq!(inj.mean, 3.0, epsilon = 1e-12);
}

#[test]
fn column_majority_gap_and_bounds() {
    let s = zoo(ZooKind::ColumnMajority, Dims::new(2, 1, 4, 2).unwrap(), &SeededRng::new(0, 0)).unwrap();
    let opts = NormOptions { restarts: 1, iters: 30, r_max: 1, ..NormOptions::default() };
    let gap = lemma_main1_gap(&s, &EvalMode::Exact, &opts).unwrap();
    assert_abs_diff_eq!(gap.omega, 0.375, epsilon = 1e-12);
    assert!(gap.slack_i >= -1e-9);
    let sg = sigma(&phi(&s, PhiVariant::I).unwrap(), &EvalMode::Exact, &opts).unwrap();
    let up = appendix_bounds(&s, &EvalMode::Exact).unwrap();
    assert!(sg.sigma <= up.sigma_i_upper + 1e-9);
}

#[test]
fn strategy_json_round_trip() {
    let s = zoo(ZooKind::Random, Dims::new(2, 2, 4, 2).unwrap(), &SeededRng::new(3, 1)).unwrap();
    let path = std::env::temp_dir().join(format!("pvlab-oracle-{}.json", std::process::id()));
    s.save(&path).unwrap();
    let back = PureStrategy::load(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_abs_diff_eq!(back.value_exact().unwrap().value, s.value_exact().unwrap().value, epsilon = 1e-12);
    let tampered = s.to_json().unwrap().replacen('{', "{\"bogus\": 1,", 1);
    assert!(PureStrategy::from_json(&tampered).is_err());
}
