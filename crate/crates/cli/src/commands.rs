use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use pvlab_core::game::GameInstance;
use pvlab_core::hypercube::{appendix_bounds, lemma_main1_gap, phi, pisier_check, sigma, PhiVariant};
use pvlab_core::linalg::{gaussian_matrix, ComplexVector, C64};
use pvlab_core::norms::{evaluate, gaussian_mean_norm, rademacher_mean_norm, type2_lower, NormOptions, NormTag};
use pvlab_core::report::{summarize, ImpliedReport, SummaryBudget};
use pvlab_core::rng::SeededRng;
use pvlab_core::seesaw::{optimize, Block, EpsSampling, SeesawConfig};
use pvlab_core::strategies::{zoo, Dims, EvalMode, PureStrategy, ValueMode, ZooKind};

use crate::config::{Entries, ExperimentConfig, ModeName, Params};
use crate::report::Row;

/// Stream ids keep the draws of different consumers of one seed apart.
mod stream {
    pub const STRATEGY: u64 = 1;
    pub const MODE: u64 = 2;
    pub const NORMS: u64 = 3;
    pub const ELEMENT: u64 = 4;
    pub const SIGMA_II: u64 = 5;
}

const DEFAULT_SAMPLES: usize = 10_000;

pub struct Output {
    pub results: Value,
    pub rows: Vec<Row>,
}

struct Ctx<'a> {
    command: &'a str,
    seed: u64,
    p: &'a Params,
}

fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("config field `{key}` is required"))
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

impl Ctx<'_> {
    fn row(&self, dims: Option<Dims>, n: Option<usize>, quantity: &str, value: f64, stderr: f64) -> Row {
        Row {
            command: self.command.to_string(),
            n: dims.map(|d| d.n).or(n),
            k: dims.map(|d| d.k),
            kt: dims.map(|d| d.kt),
            r: dims.map(|d| d.r),
            quantity: quantity.to_string(),
            value,
            stderr,
            seed: Some(self.seed),
        }
    }

    fn rng(&self, stream: u64) -> SeededRng {
        SeededRng::new(self.seed, stream)
    }

    fn mode_from(&self, mode: Option<ModeName>, samples: Option<usize>, stream: u64) -> EvalMode {
        match mode.unwrap_or(ModeName::Exact) {
            ModeName::Exact => EvalMode::Exact,
            ModeName::Mc => EvalMode::MonteCarlo {
                samples: samples.unwrap_or(DEFAULT_SAMPLES),
                rng: self.rng(stream),
            },
        }
    }

    fn mode(&self) -> EvalMode {
        self.mode_from(self.p.mode, self.p.samples, stream::MODE)
    }

    fn norms(&self) -> NormOptions {
        let d = NormOptions::default();
        NormOptions {
            restarts: self.p.norm_restarts.unwrap_or(d.restarts),
            iters: self.p.norm_iters.unwrap_or(d.iters),
            r_max: self.p.r_max.unwrap_or(d.r_max),
            rng: self.rng(stream::NORMS),
            ..d
        }
    }

    fn zoo_rng(&self) -> SeededRng {
        SeededRng::new(self.p.strategy_seed.unwrap_or(self.seed), stream::STRATEGY)
    }

    fn dims(&self, default_r: usize) -> Result<Dims> {
        let n = need(self.p.n, "n")?;
        Ok(Dims::new(n, self.p.k.unwrap_or(1), self.p.kt.unwrap_or(n * n), self.p.r.unwrap_or(default_r))?)
    }

    fn strategy(&self) -> Result<(String, PureStrategy)> {
        let p = self.p;
        match (&p.strategy, &p.strategy_file) {
            (Some(_), Some(_)) => bail!("config fields `strategy` and `strategy_file` are mutually exclusive"),
            (None, Some(path)) => {
                if p.n.is_some() || p.k.is_some() || p.kt.is_some() || p.r.is_some() {
                    bail!("dimensions come from `strategy_file`; drop `n`, `k`, `kt` and `r`");
                }
                let s = PureStrategy::load(path).with_context(|| format!("loading strategy {}", path.display()))?;
                Ok((s.kind().to_string(), s))
            }
            (Some(name), None) => {
                let kind: ZooKind = name.parse().context("config field `strategy`")?;
                Ok((kind.name().to_string(), zoo(kind, self.dims(1)?, &self.zoo_rng())?))
            }
            (None, None) => bail!("one of the config fields `strategy` or `strategy_file` is required"),
        }
    }

    fn space(&self) -> Result<NormTag> {
        let p = self.p;
        let name = p.space.as_deref().ok_or_else(|| anyhow!("config field `space` is required"))?;
        let rows = || need(p.rows.or(p.n), "rows");
        let tag = match name {
            "l2" | "euclidean" => NormTag::Euclidean { dim: need(p.dim, "dim")? },
            "l1" => NormTag::L1 { dim: need(p.dim, "dim")? },
            "linf" => NormTag::LInf { dim: need(p.dim, "dim")? },
            "operator" => {
                let rows = rows()?;
                NormTag::Operator { rows, cols: p.cols.unwrap_or(rows) }
            }
            "trace" => {
                let rows = rows()?;
                NormTag::TraceClass { rows, cols: p.cols.unwrap_or(rows) }
            }
            "injective" => NormTag::InjectiveL1L1 { n: need(p.n, "n")? },
            "w_schatten2_cb" => NormTag::WSchatten2cb { kt: need(p.kt, "kt")?, n: need(p.n, "n")? },
            "w_schatten2" => NormTag::WSchatten2 { kt: need(p.kt, "kt")?, n: need(p.n, "n")? },
            "w_schatten2_cb_state" => NormTag::WSchatten2cbState {
                kt: need(p.kt, "kt")?,
                n: need(p.n, "n")?,
                state_dim: need(p.state_dim, "state_dim")?,
            },
            "projective_upper" => NormTag::ProjectiveUpper { kt: need(p.kt, "kt")?, n: need(p.n, "n")? },
            other => bail!(
                "config field `space`: unknown space {other:?} (expected l2, l1, linf, operator, trace, injective, \
                 w_schatten2_cb, w_schatten2, w_schatten2_cb_state or projective_upper)"
            ),
        };
        Ok(tag)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Output> {
    let ctx = Ctx {
        command: &cfg.command,
        seed: cfg.seed,
        p: &cfg.params,
    };
    match cfg.command.as_str() {
        "honest" => honest(&ctx),
        "eval" => eval(&ctx),
        "zoo" => zoo_table(&ctx),
        "sigma" => sigma_cmd(&ctx),
        "pisier" => pisier(&ctx),
        "gap" => gap(&ctx),
        "norm" => norm(&ctx),
        "type2" => type2(&ctx),
        "radnorm" => radnorm(&ctx),
        "gaussnorm" => gaussnorm(&ctx),
        "seesaw" => seesaw(&ctx),
        "report" => report(&ctx),
        other => bail!("unknown command {other:?}"),
    }
}

fn honest(ctx: &Ctx) -> Result<Output> {
    let n = need(ctx.p.n, "n")?;
    let value = GameInstance::new(n)?.honest_value()?;
    Ok(Output {
        results: json!({ "n": n, "value": value }),
        rows: vec![ctx.row(None, Some(n), "honest_value", value, 0.0)],
    })
}

fn eval(ctx: &Ctx) -> Result<Output> {
    let (label, s) = ctx.strategy()?;
    let v = s.value(&ctx.mode())?;
    if let Some(path) = &ctx.p.save_strategy {
        s.save(path).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut results = to_json(&v);
    results["strategy"] = json!(label);
    results["dims"] = to_json(&s.dims());
    Ok(Output {
        rows: vec![ctx.row(Some(s.dims()), None, "value", v.value, v.stderr)],
        results,
    })
}

fn zoo_table(ctx: &Ctx) -> Result<Output> {
    let dims = ctx.dims(1)?;
    let mode = ctx.mode();
    let mut entries = vec![];
    let mut rows = vec![];
    for kind in ZooKind::ALL {
        let s = match zoo(kind, dims, &ctx.zoo_rng()) {
            Ok(s) => s,
            Err(e) => {
                entries.push(json!({ "strategy": kind.name(), "skipped": e.to_string() }));
                continue;
            }
        };
        let v = s.value(&mode)?;
        rows.push(ctx.row(Some(dims), None, &format!("{kind}/value"), v.value, v.stderr));
        let mut entry = to_json(&v);
        entry["strategy"] = json!(kind.name());
        entries.push(entry);
    }
    Ok(Output {
        results: json!({ "dims": dims, "entries": entries }),
        rows,
    })
}

fn sigma_cmd(ctx: &Ctx) -> Result<Output> {
    let (label, s) = ctx.strategy()?;
    let variant = ctx.p.variant.unwrap_or(PhiVariant::I);
    let mode = ctx.mode();
    let rep = sigma(&phi(&s, variant)?, &mode, &ctx.norms())?;
    let upper = match variant {
        PhiVariant::I => Some(appendix_bounds(&s, &mode)?.sigma_i_upper),
        PhiVariant::Ii => Some(appendix_bounds(&s, &mode)?.sigma_ii_upper),
        PhiVariant::Iii => None,
    };
    let d = s.dims();
    let mut rows = vec![ctx.row(Some(d), None, &format!("sigma_{variant}"), rep.sigma, rep.stderr)];
    if let Some(u) = upper {
        rows.push(ctx.row(Some(d), None, &format!("sigma_{variant}_upper"), u, 0.0));
    }
    Ok(Output {
        results: json!({ "strategy": label, "dims": d, "variant": variant, "sigma": rep, "upper": upper }),
        rows,
    })
}

fn pisier(ctx: &Ctx) -> Result<Output> {
    let (label, s) = ctx.strategy()?;
    let variant = ctx.p.variant.unwrap_or(PhiVariant::I);
    let rep = pisier_check(&phi(&s, variant)?, &ctx.mode(), &ctx.norms())?;
    let d = s.dims();
    let mut rows = vec![
        ctx.row(Some(d), None, "lhs", rep.lhs, 0.0),
        ctx.row(Some(d), None, "rhs", rep.rhs, 0.0),
    ];
    if let Some(ratio) = rep.ratio {
        rows.push(ctx.row(Some(d), None, "ratio", ratio, 0.0));
    }
    Ok(Output {
        results: json!({ "strategy": label, "dims": d, "variant": variant, "pisier": rep }),
        rows,
    })
}

fn gap(ctx: &Ctx) -> Result<Output> {
    let (label, s) = ctx.strategy()?;
    let g = lemma_main1_gap(&s, &ctx.mode(), &ctx.norms())?;
    let d = s.dims();
    let rows = vec![
        ctx.row(Some(d), None, "omega", g.omega, g.stderr_omega),
        ctx.row(Some(d), None, "mean_norm_phi_i", g.mean_norm_phi_i, 0.0),
        ctx.row(Some(d), None, "mean_norm_phi_ii_lb", g.mean_norm_phi_ii_lb, 0.0),
        ctx.row(Some(d), None, "slack_i", g.slack_i, 0.0),
        ctx.row(Some(d), None, "slack_ii", g.slack_ii, 0.0),
    ];
    Ok(Output {
        results: json!({ "strategy": label, "dims": d, "gap": g }),
        rows,
    })
}

fn element(ctx: &Ctx, dim: usize) -> Result<ComplexVector> {
    let x = match (&ctx.p.element, &ctx.p.element_im) {
        (None, None) => gaussian_matrix(dim, 1, &ctx.rng(stream::ELEMENT)).into(),
        (None, Some(_)) => bail!("config field `element_im` needs `element`"),
        (Some(Entries::Real(re)), im) => {
            let im = match im {
                Some(im) if im.len() != re.len() => bail!("config field `element_im` must match `element` in length"),
                Some(im) => im.clone(),
                None => vec![0.0; re.len()],
            };
            ComplexVector::new(re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect())
        }
        (Some(Entries::Complex(_)), Some(_)) => bail!("config field `element_im` conflicts with [re, im] pairs"),
        (Some(Entries::Complex(z)), None) => ComplexVector::new(z.iter().map(|[a, b]| C64::new(*a, *b)).collect()),
    };
    if x.dim() != dim {
        bail!("config field `element`: {} entries for a space of dimension {dim}", x.dim());
    }
    Ok(x)
}

fn norm(ctx: &Ctx) -> Result<Output> {
    let tag = ctx.space()?;
    let x = element(ctx, tag.ambient_dim())?;
    let r = evaluate(&tag, &x, &ctx.norms())?;
    Ok(Output {
        rows: vec![ctx.row(None, None, "norm", r.value, 0.0)],
        results: json!({ "space": tag.name(), "norm": r }),
    })
}

fn type2(ctx: &Ctx) -> Result<Output> {
    let tag = ctx.space()?;
    let m = need(ctx.p.m, "m")?;
    let mc = match ctx.p.mode.unwrap_or(ModeName::Exact) {
        ModeName::Exact => None,
        ModeName::Mc => Some(ctx.p.samples.unwrap_or(DEFAULT_SAMPLES)),
    };
    let e = type2_lower(&tag, m, &ctx.norms(), mc)?;
    Ok(Output {
        rows: vec![ctx.row(None, None, "type2_lower", e.lower, 0.0)],
        results: json!({ "space": tag.name(), "type2": e }),
    })
}

fn radnorm(ctx: &Ctx) -> Result<Output> {
    let tag = ctx.space()?;
    let dim = tag.ambient_dim();
    let n = (dim as f64).sqrt().round() as usize;
    if n * n != dim {
        bail!("{} does not hold square sign matrices", tag.name());
    }
    let r = rademacher_mean_norm(&tag, n, &ctx.mode(), &ctx.norms())?;
    Ok(Output {
        rows: vec![ctx.row(None, Some(n), "rademacher_mean", r.mean, r.stderr)],
        results: json!({ "space": tag.name(), "n": n, "mean": r }),
    })
}

fn gaussnorm(ctx: &Ctx) -> Result<Output> {
    let tag = ctx.space()?;
    let samples = ctx.p.samples.unwrap_or(500);
    let r = gaussian_mean_norm(&tag, samples, &ctx.rng(stream::MODE), &ctx.norms())?;
    Ok(Output {
        rows: vec![ctx.row(None, None, "gaussian_mean", r.mean, r.stderr)],
        results: json!({ "space": tag.name(), "mean": r }),
    })
}

fn write_trace(path: &Path, values: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["restart", "iter", "value"])?;
    for (restart, vals) in values.iter().enumerate() {
        for (iter, v) in vals.iter().enumerate() {
            w.write_record([restart.to_string(), iter.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn seesaw(ctx: &Ctx) -> Result<Output> {
    let p = ctx.p;
    let d = ctx.dims(2)?;
    let mut cfg = SeesawConfig::new(d.n, d.k, d.kt, d.r);
    cfg.restarts = p.restarts.unwrap_or(cfg.restarts);
    cfg.max_iters = p.max_iters.unwrap_or(cfg.max_iters);
    cfg.tol = p.tol.unwrap_or(cfg.tol);
    cfg.seed = ctx.seed;
    cfg.eps_mode = match p.mode.unwrap_or(ModeName::Exact) {
        ModeName::Exact => EpsSampling::Exact,
        ModeName::Mc => EpsSampling::MonteCarlo {
            samples: p.samples.unwrap_or(256),
        },
    };
    if let Some(schedule) = &p.schedule {
        cfg.block_schedule = schedule
            .iter()
            .map(|b| b.parse::<Block>())
            .collect::<std::result::Result<_, _>>()
            .context("config field `schedule`")?;
    }
    let cfg = match p.warm_start.as_deref() {
        None | Some("none") => cfg,
        Some(name) => cfg.with_zoo_warm_start(name.parse().context("config field `warm_start`")?)?,
    };
    let trace = optimize(&cfg)?;
    if let Some(path) = &p.save_strategy {
        trace.best.save(path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &p.trace_csv {
        write_trace(path, &trace.values)?;
    }
    let mut rows = vec![ctx.row(Some(d), None, "best_value", trace.best_value, 0.0)];
    for (r, vals) in trace.values.iter().enumerate() {
        if let Some(v) = vals.last() {
            rows.push(ctx.row(Some(d), None, &format!("restart_{r}/final_value"), *v, 0.0));
        }
    }
    let best: Value = serde_json::from_str(&trace.best.to_json()?)?;
    Ok(Output {
        results: json!({
            "dims": d,
            "best_value": trace.best_value,
            "best_restart": trace.best_restart,
            "values": trace.values,
            "best": best,
        }),
        rows,
    })
}

fn report(ctx: &Ctx) -> Result<Output> {
    let p = ctx.p;
    let ns = p.ns.clone().unwrap_or_else(|| vec![2, 3]);
    if ns.is_empty() {
        bail!("config field `ns` is empty");
    }
    let mode = ctx.mode();
    let value_mode = match mode {
        EvalMode::Exact => ValueMode::Exact,
        EvalMode::MonteCarlo { .. } => ValueMode::MonteCarlo,
    };
    let mut entries = vec![];
    for &n in &ns {
        let d = Dims::new(n, p.k.unwrap_or(1), p.kt.unwrap_or(n * n), p.r.unwrap_or(2))?;
        let sigma_ii_mode = match (p.sigma_ii_mode, n) {
            (Some(m), _) => ctx.mode_from(Some(m), Some(p.sigma_ii_samples.unwrap_or(24)), stream::SIGMA_II),
            (None, n) if n <= 2 => EvalMode::Exact,
            (None, _) => ctx.mode_from(Some(ModeName::Mc), Some(p.sigma_ii_samples.unwrap_or(24)), stream::SIGMA_II),
        };
        let budget = SummaryBudget {
            mode,
            sigma_ii_mode,
            norms: ctx.norms(),
        };
        for kind in ZooKind::ALL {
            let s = zoo(kind, d, &ctx.zoo_rng())?;
            entries.push(summarize(&format!("{kind}_n{n}"), &s, &budget)?);
        }
        if p.include_seesaw.unwrap_or(true) {
            let mut cfg = SeesawConfig::new(n, d.k, d.kt, d.r);
            cfg.restarts = p.seesaw_restarts.unwrap_or(2);
            cfg.max_iters = p.seesaw_iters.unwrap_or(30);
            cfg.seed = ctx.seed;
            let trace = optimize(&cfg.with_zoo_warm_start(ZooKind::ColumnMajority)?)?;
            entries.push(summarize(&format!("seesaw_n{n}"), &trace.best, &budget)?);
        }
    }
    let rows = entries
        .iter()
        .flat_map(|e| e.records(value_mode, Some(ctx.seed)))
        .map(|q| ctx.row(Some(q.dims), None, &q.quantity, q.value, q.stderr))
        .collect();
    let rep = ImpliedReport::new(entries);
    Ok(Output {
        results: to_json(&rep),
        rows,
    })
}
