//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use pvlab_core::game::{enumerate_signs, GameInstance, SignVector};
use pvlab_core::hypercube::{norm_of_mean, phi, phi_i_matrix, pisier_check, sigma, HypercubeFunction, PhiVariant};
use pvlab_core::linalg::{gaussian_matrix, ComplexVector};
use pvlab_core::norms::{gaussian_mean_norm, rademacher_mean_norm, type2_lower, NormOptions, NormTag};
use pvlab_core::report::{summarize, ImpliedReport, SummaryBudget};
use pvlab_core::rng::SeededRng;
use pvlab_core::seesaw::{optimize, SeesawConfig};
use pvlab_core::strategies::{random_channel, zoo, Dims, EvalMode, PureStrategy, ZooKind};
use pvlab_core::Result;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(
        elapsed <= limit,
        format!("{detail}; {:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn lift(r: Result<Outcome>) -> Outcome {
    r.unwrap_or_else(|e| Err(format!("error: {e}")))
}

fn c1() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [2, 3, 4] {
        match GameInstance::new(n).and_then(|g| g.honest_value()) {
            Ok(v) => worst = worst.max((v - 1.0).abs()),
            Err(e) => return Err(format!("n = {n}: {e}")),
        }
    }
    if worst > 1e-9 {
        return Err(format!("max |honest - 1| = {worst:e}"));
    }
    within(t.elapsed(), Duration::from_secs(1), format!("max |honest - 1| = {worst:e}"))
}

fn c2() -> Outcome {
    lift((|| {
        let t = Instant::now();
        let mut detail = vec![];
        for n in [2usize, 3] {
            let d = Dims::new(n, 1, n * n, 1)?;
            let v = zoo(ZooKind::DoNothing, d, &SeededRng::new(0, 0))?.value_exact()?.value;
            let want = 1.0 / (n * n) as f64;
            if (v - want).abs() > 1e-12 {
                return Ok(Err(format!("n = {n}: {v} vs {want}")));
            }
            detail.push(format!("n={n}: {v:.12}"));
        }
        Ok(within(t.elapsed(), Duration::from_secs(5), detail.join(", ")))
    })())
}

/// Independent oracle: Bob's column sign makes the amplitude
/// `(1/n²) Σ_j |Σ_i ε_ij|`.
fn column_oracle(n: usize) -> f64 {
    let all: Vec<SignVector> = enumerate_signs(n).unwrap().collect();
    let total: f64 = all
        .iter()
        .map(|e| {
            let s: f64 = (0..n).map(|j| (0..n).map(|i| e.sign(i * n + j)).sum::<f64>().abs()).sum();
            (s / (n * n) as f64).powi(2)
        })
        .sum();
    total / all.len() as f64
}

fn c3() -> Outcome {
    lift((|| {
        let t = Instant::now();
        let d = Dims::new(2, 1, 4, 2)?;
        let v = zoo(ZooKind::ColumnMajority, d, &SeededRng::new(0, 0))?.value_exact()?.value;
        let oracle = column_oracle(2);
        if (v - 0.375).abs() > 1e-12 || (oracle - 0.375).abs() > 1e-12 {
            return Ok(Err(format!("value {v}, oracle {oracle}")));
        }
        Ok(within(t.elapsed(), Duration::from_secs(1), format!("value {v:.12}, oracle {oracle:.12}")))
    })())
}

fn mean_phi_i_norm(s: &PureStrategy) -> Result<f64> {
    let n = s.dims().n;
    let mut acc = 0.0;
    let mut count = 0.0;
    for e in enumerate_signs(n)? {
        acc += phi_i_matrix(s, &e)?.op_norm()?;
        count += 1.0;
    }
    Ok(acc / count)
}

fn c4() -> Outcome {
    lift((|| {
        let t = Instant::now();
        let shapes = [(1, 1, 1), (1, 2, 2), (1, 4, 2), (2, 2, 2), (2, 4, 2), (2, 3, 1), (1, 4, 1), (2, 4, 1)];
        let mut worst = f64::NEG_INFINITY;
        for (count, n) in [(100u64, 2usize), (20, 3)] {
            for seed in 0..count {
                let (k, kt, r) = shapes[seed as usize % shapes.len()];
                let s = zoo(ZooKind::Random, Dims::new(n, k, kt, r)?, &SeededRng::new(seed, n as u64))?;
                let omega = s.value_exact()?.value;
                let rhs = mean_phi_i_norm(&s)?;
                worst = worst.max(omega - rhs);
                if omega > rhs + 1e-9 {
                    return Ok(Err(format!("n = {n}, seed {seed}: omega {omega} > {rhs}")));
                }
            }
        }
        Ok(within(t.elapsed(), Duration::from_secs(120), format!("120 strategies, max(omega - E|Phi^i|) = {worst:.3e}")))
    })())
}

fn unit_family(m: usize, dim: usize, seed: u64) -> Vec<ComplexVector> {
    (0..m)
        .map(|j| {
            let g: ComplexVector = gaussian_matrix(dim, 1, &SeededRng::new(seed, j as u64)).into();
            g.scale_real(1.0 / g.norm())
        })
        .collect()
}

fn c5() -> Outcome {
    lift((|| {
        let opts = NormOptions::default();
        let mut detail = vec![];
        for m in [4usize, 9, 16] {
            let f = HypercubeFunction::linear(NormTag::Euclidean { dim: 3 }, unit_family(m, 3, m as u64), 1.0 / m as f64)?;
            let s = sigma(&f, &EvalMode::Exact, &opts)?.sigma;
            let want = (m as f64).ln() / (m as f64).sqrt();
            if (s - want).abs() > 1e-9 {
                return Ok(Err(format!("m = {m}: {s} vs {want}")));
            }
            detail.push(format!("m={m}: {:.1e}", (s - want).abs()));
        }
        let c = HypercubeFunction::constant(4, NormTag::Euclidean { dim: 3 }, unit_family(1, 3, 0).remove(0))?;
        let s = sigma(&c, &EvalMode::Exact, &opts)?.sigma;
        Ok(check(s == 0.0, format!("deviations {}, constant map sigma = {s}", detail.join(", "))))
    })())
}

fn c6() -> Outcome {
    lift((|| {
        let mut detail = vec![];
        for (m, seed) in [(4usize, 1u64), (4, 2), (9, 3), (9, 4)] {
            let xs: Vec<ComplexVector> = (0..m).map(|j| gaussian_matrix(6, 1, &SeededRng::new(seed, j as u64)).into()).collect();
            let f = HypercubeFunction::linear(NormTag::Operator { rows: 2, cols: 3 }, xs, 1.0 / m as f64)?;
            let p = pisier_check(&f, &EvalMode::Exact, &NormOptions::default())?;
            let Some(ratio) = p.ratio else {
                return Ok(Err(format!("m = {m}: vanishing rhs")));
            };
            let x = ratio * (m as f64).ln();
            if (x - 1.0).abs() > 1e-9 {
                return Ok(Err(format!("m = {m}, seed {seed}: ratio·log m = {x}")));
            }
            detail.push(format!("{:.1e}", (x - 1.0).abs()));
        }
        Ok(Ok(format!("|ratio·log m - 1| = {}", detail.join(", "))))
    })())
}

fn c7() -> Outcome {
    lift((|| {
        let opts = NormOptions::default();
        let mut detail = vec![];
        for (n, kt) in [(2usize, 4usize), (3, 4)] {
            for seed in 0..3u64 {
                for kind in [ZooKind::Random, ZooKind::EpsIndependentRandom] {
                    let s = zoo(kind, Dims::new(n, 1, kt, 2)?, &SeededRng::new(seed, 7))?;
                    let f = phi(&s, PhiVariant::Iii)?;
                    let sg = sigma(&f, &EvalMode::Exact, &opts)?.sigma;
                    let bound = ((n * n) as f64).ln() / n as f64;
                    let mean = norm_of_mean(&f, &opts)?.value;
                    if sg > bound * (1.0 + 1e-6) || mean > 1e-12 {
                        return Ok(Err(format!("n = {n}, {kind}, seed {seed}: sigma {sg} (bound {bound}), |E Phi| {mean}")));
                    }
                }
            }
            detail.push(format!("n={n} ok"));
        }
        Ok(Ok(format!("12 strategies; {}", detail.join(", "))))
    })())
}

fn c8() -> Outcome {
    lift((|| {
        let t = Instant::now();
        let mut worst_l2: f64 = 0.0;
        for seed in 0..50u64 {
            let opts = NormOptions {
                restarts: 2,
                iters: 40,
                rng: SeededRng::new(seed, 8),
                ..NormOptions::default()
            };
            let e = type2_lower(&NormTag::Euclidean { dim: 4 }, 4, &opts, None)?;
            worst_l2 = worst_l2.max(e.lower);
        }
        if worst_l2 > 1.0 + 1e-6 {
            return Ok(Err(format!("l2^4 lower bound {worst_l2} exceeds 1")));
        }
        let opts = NormOptions {
            restarts: 2,
            iters: 40,
            ..NormOptions::default()
        };
        let mut detail = vec![format!("l2 max {worst_l2:.9}")];
        for m in [2usize, 4, 8] {
            let e = type2_lower(&NormTag::L1 { dim: m }, m, &opts, None)?;
            if e.lower < 0.999 * (m as f64).sqrt() {
                return Ok(Err(format!("l1^{m}: {} < 0.999·√{m}", e.lower)));
            }
            detail.push(format!("l1^{m} {:.6}", e.lower));
        }
        let e = type2_lower(&NormTag::TraceClass { rows: 2, cols: 2 }, 2, &opts, None)?;
        if e.lower < 0.999 * 2f64.sqrt() {
            return Ok(Err(format!("S1^{{2,2}}: {}", e.lower)));
        }
        detail.push(format!("S1 {:.6}", e.lower));
        Ok(within(t.elapsed(), Duration::from_secs(60), detail.join(", ")))
    })())
}

fn c9() -> Outcome {
    lift((|| {
        let opts = NormOptions::default();
        let m2 = rademacher_mean_norm(&NormTag::Operator { rows: 2, cols: 2 }, 2, &EvalMode::Exact, &opts)?.mean;
        let want = (2.0 + 2f64.sqrt()) / 2.0;
        if (m2 - want).abs() > 1e-12 {
            return Ok(Err(format!("E|sign|_M2 = {m2} vs {want}")));
        }
        let mut detail = vec![format!("E|sign|_M2 = {m2:.12}")];
        for n in [2usize, 3] {
            let inj = rademacher_mean_norm(&NormTag::InjectiveL1L1 { n }, n, &EvalMode::Exact, &opts)?.mean / (n * n) as f64;
            let op = rademacher_mean_norm(&NormTag::Operator { rows: n, cols: n }, n, &EvalMode::Exact, &opts)?.mean / n as f64;
            if inj > op {
                return Ok(Err(format!("n = {n}: {inj} > {op}")));
            }
            detail.push(format!("n={n}: {inj:.4} <= {op:.4}"));
        }
        Ok(Ok(detail.join(", ")))
    })())
}

fn c10() -> Outcome {
    lift((|| {
        let mut worst: f64 = 0.0;
        let mut max_kt = 0;
        let shapes = [(1usize, 4usize, 2usize, 1usize), (1, 4, 4, 1), (1, 2, 2, 1), (2, 4, 2, 2), (2, 4, 2, 4)];
        for seed in 0..10u64 {
            let (k, kt, rank, phi_rank) = shapes[seed as usize % shapes.len()];
            let ch = random_channel(2, k, kt, rank, phi_rank, &SeededRng::new(seed, 10))?;
            let p = ch.purify()?;
            let bound = 4 * k * kt.pow(4);
            if p.kt_prime > bound || p.bound != bound {
                return Ok(Err(format!("seed {seed}: k̃' = {} exceeds {bound}", p.kt_prime)));
            }
            max_kt = max_kt.max(p.kt_prime);
            worst = worst.max((ch.value_channel()?.value - p.strategy.value_exact()?.value).abs());
        }
        if worst > 1e-9 {
            return Ok(Err(format!("purification changes the value by {worst:e}")));
        }
        let mut single: f64 = 0.0;
        for seed in 0..5u64 {
            for kind in [ZooKind::EpsIndependentRandom, ZooKind::Random] {
                let s = zoo(kind, Dims::new(2, 1, 4, 2)?, &SeededRng::new(seed, 11))?;
                single = single.max((s.to_channel()?.value_channel()?.value - s.value_exact()?.value).abs());
            }
        }
        Ok(check(
            single <= 1e-9,
            format!("purify max dev {worst:.1e}, max k̃' {max_kt}; single-Kraus max dev {single:.1e}"),
        ))
    })())
}

fn c11() -> Outcome {
    lift((|| {
        let t = Instant::now();
        let mut cfg = SeesawConfig::new(2, 1, 4, 2);
        cfg.restarts = 8;
        cfg.max_iters = 200;
        cfg.seed = 11;
        let cfg = cfg.with_zoo_warm_start(ZooKind::ColumnMajority)?;
        let a = optimize(&cfg)?;
        let b = optimize(&cfg)?;
        let monotone = a.values.iter().all(|v| v.windows(2).all(|w| w[1] >= w[0] - 1e-10));
        let reeval = a.best.value_exact()?.value;
        let ok = monotone && a.values == b.values && a.best_value >= 0.375 && (reeval - a.best_value).abs() < 1e-9;
        let detail = format!(
            "best {:.6} (restart {}), monotone {monotone}, reproducible {}",
            a.best_value,
            a.best_restart,
            a.values == b.values
        );
        if !ok {
            return Ok(Err(detail));
        }
        Ok(within(t.elapsed(), Duration::from_secs(300), detail))
    })())
}

fn c12() -> Outcome {
    lift((|| {
        let t = Instant::now();
        let mut worst: f64 = 0.0;
        for seed in 0..20u64 {
            let s = zoo(ZooKind::Random, Dims::new(2, 1, 4, 2)?, &SeededRng::new(seed, 12))?;
            let exact = s.value_exact()?.value;
            let mc = s.value_mc(10_000, &SeededRng::new(seed, 1200))?;
            let z = (mc.value - exact).abs() / mc.stderr;
            worst = worst.max(z);
            if z > 3.0 {
                return Ok(Err(format!("seed {seed}: |mc - exact| = {z:.2} stderr")));
            }
        }
        let g = gaussian_mean_norm(&NormTag::Operator { rows: 50, cols: 50 }, 500, &SeededRng::new(0, 12), &NormOptions::default())?;
        let ratio = g.mean / 50f64.sqrt();
        if !(1.8..=2.2).contains(&ratio) {
            return Ok(Err(format!("E|G|_M50/√50 = {ratio}")));
        }
        Ok(within(
            t.elapsed(),
            Duration::from_secs(120),
            format!("max deviation {worst:.2} stderr, E|G|/√50 = {ratio:.4}"),
        ))
    })())
}

fn c13() -> Outcome {
    lift((|| {
        let norms = NormOptions {
            restarts: 1,
            iters: 25,
            r_max: 1,
            ..NormOptions::default()
        };
        let mut entries = vec![];
        for n in [2usize, 3] {
            let d = Dims::new(n, 1, n * n, 2)?;
            let budget = SummaryBudget {
                mode: EvalMode::Exact,
                sigma_ii_mode: if n == 2 {
                    EvalMode::Exact
                } else {
                    EvalMode::MonteCarlo {
                        samples: 24,
                        rng: SeededRng::new(13, n as u64),
                    }
                },
                norms,
            };
            for kind in ZooKind::ALL {
                let s = zoo(kind, d, &SeededRng::new(13, 0))?;
                entries.push(summarize(&format!("{kind}_n{n}"), &s, &budget)?);
            }
            let mut cfg = SeesawConfig::new(n, 1, n * n, 2);
            cfg.restarts = 2;
            cfg.max_iters = if n == 2 { 30 } else { 8 };
            cfg.seed = 13;
            let trace = optimize(&cfg.with_zoo_warm_start(ZooKind::ColumnMajority)?)?;
            entries.push(summarize(&format!("seesaw_n{n}"), &trace.best, &budget)?);
        }
        let report = ImpliedReport::new(entries);
        let text = serde_json::to_string_pretty(&report)?;
        let parsed = ImpliedReport::validate_json(&text)?;
        Ok(check(
            parsed == report,
            format!("{} strategies summarized, report validates ({} bytes)", report.entries.len(), text.len()),
        ))
    })())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("honest value is 1", c1),
        ("do-nothing value 1/n²", c2),
        ("column-majority value 0.375", c3),
        ("value bounded by E|Phi^i|", c4),
        ("sigma of linear and constant maps", c5),
        ("linear-map Pisier identity", c6),
        ("regularity and centering of Phi^iii", c7),
        ("type-2 lower bounds", c8),
        ("Rademacher means and Grothendieck chain", c9),
        ("purification", c10),
        ("see-saw", c11),
        ("Monte Carlo consistency", c12),
        ("implied-constant report", c13),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{secs:.2}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
