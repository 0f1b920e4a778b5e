//! Per-strategy summaries and implied constants.
//!
//! The constants of the main bounds are not specified, so for a given
//! strategy the report solves each bound for its constant:
//!
//! ```text
//! prop_i      = √n (‖E Φ^i‖ − 3/4)
//! prop_ii     = √n (‖E Φ^ii‖ − √3/2)
//! lemma_i     = (ω − ‖E Φ^i‖)  / (σ^i  · t_i),   t_i  = max(1, log^{1/2}(k k̃))
//! lemma_ii    = (ω − ‖E Φ^ii‖) / (σ^ii · t_ii),  t_ii = max(1, n^{3/4} log(n) log^{1/2}(n k̃))
//! ```
//!
//! `t_i` and `t_ii` stand in for the type-2 constants of the target spaces.
//! A constant is `None` when its denominator vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::hypercube::{appendix_bounds, lemma_main1_gap, norm_of_mean, phi, sigma, PhiVariant};
use crate::norms::{Certification, NormOptions};
use crate::strategies::{Dims, EvalMode, PureStrategy, ValueMode};

pub const SCHEMA_VERSION: u32 = 1;

/// One reported number in the interchange row format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityRecord {
    pub quantity: String,
    pub mode: ValueMode,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub dims: Dims,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpliedConstants {
    pub prop_i: f64,
    pub prop_ii: f64,
    pub lemma_i: Option<f64>,
    pub lemma_ii: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySummary {
    pub label: String,
    pub dims: Dims,
    pub omega: f64,
    pub sigma_i: f64,
    pub sigma_i_certification: Certification,
    pub sigma_ii: f64,
    pub sigma_ii_certification: Certification,
    pub sigma_i_upper: f64,
    pub sigma_ii_upper: f64,
    pub mean_phi_i_norm: f64,
    pub mean_phi_ii_norm: f64,
    pub expected_norm_phi_i: f64,
    pub expected_norm_phi_ii_lb: f64,
    pub implied: ImpliedConstants,
}

/// Budgets for one summary. `sigma_ii_mode` is separate because each
/// `Φ^ii` derivative needs a weak-cb optimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryBudget {
    pub mode: EvalMode,
    pub sigma_ii_mode: EvalMode,
    pub norms: NormOptions,
}

fn type_proxy_i(d: &Dims) -> f64 {
    ((d.k * d.kt) as f64).ln().sqrt().max(1.0)
}

fn type_proxy_ii(d: &Dims) -> f64 {
    let n = d.n as f64;
    (n.powf(0.75) * n.ln() * ((d.n * d.kt) as f64).ln().sqrt()).max(1.0)
}

fn solve(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

pub fn summarize(label: &str, s: &PureStrategy, budget: &SummaryBudget) -> Result<StrategySummary> {
    let d = s.dims();
    let f1 = phi(s, PhiVariant::I)?;
    let f2 = phi(s, PhiVariant::Ii)?;
    let s1 = sigma(&f1, &budget.mode, &budget.norms)?;
    let s2 = sigma(&f2, &budget.sigma_ii_mode, &budget.norms)?;
    let bounds = appendix_bounds(s, &budget.mode)?;
    let m1 = norm_of_mean(&f1, &budget.norms)?.value;
    let m2 = norm_of_mean(&f2, &budget.norms)?.value;
    let gap = lemma_main1_gap(s, &budget.mode, &budget.norms)?;
    let sqrt_n = (d.n as f64).sqrt();
    let omega = gap.omega;
    Ok(StrategySummary {
        label: label.to_string(),
        dims: d,
        omega,
        sigma_i: s1.sigma,
        sigma_i_certification: s1.certification,
        sigma_ii: s2.sigma,
        sigma_ii_certification: s2.certification,
        sigma_i_upper: bounds.sigma_i_upper,
        sigma_ii_upper: bounds.sigma_ii_upper,
        mean_phi_i_norm: m1,
        mean_phi_ii_norm: m2,
        expected_norm_phi_i: gap.mean_norm_phi_i,
        expected_norm_phi_ii_lb: gap.mean_norm_phi_ii_lb,
        implied: ImpliedConstants {
            prop_i: sqrt_n * (m1 - 0.75),
            prop_ii: sqrt_n * (m2 - 3f64.sqrt() / 2.0),
            lemma_i: solve(omega - m1, s1.sigma * type_proxy_i(&d)),
            lemma_ii: solve(omega - m2, s2.sigma * type_proxy_ii(&d)),
        },
    })
}

impl StrategySummary {
    pub fn records(&self, mode: ValueMode, seed: Option<u64>) -> Vec<QuantityRecord> {
        let row = |quantity: &str, value: f64| QuantityRecord {
            quantity: format!("{}/{quantity}", self.label),
            mode,
            value,
            stderr: 0.0,
            n: self.dims.n,
            dims: self.dims,
            seed,
        };
        let mut out = vec![
            row("omega", self.omega),
            row("sigma_i", self.sigma_i),
            row("sigma_ii", self.sigma_ii),
            row("sigma_i_upper", self.sigma_i_upper),
            row("sigma_ii_upper", self.sigma_ii_upper),
            row("norm_mean_phi_i", self.mean_phi_i_norm),
            row("norm_mean_phi_ii", self.mean_phi_ii_norm),
            row("implied_prop_i", self.implied.prop_i),
            row("implied_prop_ii", self.implied.prop_ii),
        ];
        if let Some(c) = self.implied.lemma_i {
            out.push(row("implied_lemma_i", c));
        }
        if let Some(c) = self.implied.lemma_ii {
            out.push(row("implied_lemma_ii", c));
        }
        out
    }

    /// Semantic checks beyond the field-level schema.
    pub fn check(&self) -> Result<()> {
        let finite = [
            self.omega,
            self.sigma_i,
            self.sigma_ii,
            self.sigma_i_upper,
            self.sigma_ii_upper,
            self.mean_phi_i_norm,
            self.mean_phi_ii_norm,
            self.expected_norm_phi_i,
            self.expected_norm_phi_ii_lb,
            self.implied.prop_i,
            self.implied.prop_ii,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Format(format!("summary {} has a non-finite entry", self.label)));
        }
        if !(0.0..=1.0 + 1e-9).contains(&self.omega) {
            return Err(LabError::Format(format!("summary {}: omega = {} outside [0, 1]", self.label, self.omega)));
        }
        if self.sigma_i < 0.0 || self.sigma_ii < 0.0 {
            return Err(LabError::Format(format!("summary {}: negative sigma", self.label)));
        }
        Ok(())
    }
}

/// The implied-constant report over a set of strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpliedReport {
    pub schema_version: u32,
    pub entries: Vec<StrategySummary>,
}

impl ImpliedReport {
    pub fn new(entries: Vec<StrategySummary>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            entries,
        }
    }

    /// Parses and checks a serialized report.
    pub fn validate_json(text: &str) -> Result<Self> {
        let r: ImpliedReport = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(LabError::Format(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        for e in &r.entries {
            e.check()?;
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::strategies::{zoo, ZooKind};

    #[test]
    fn do_nothing_summary_round_trips() {
        let d = Dims::new(2, 1, 4, 2).unwrap();
        let s = zoo(ZooKind::DoNothing, d, &SeededRng::new(0, 0)).unwrap();
        let budget = SummaryBudget {
            mode: EvalMode::Exact,
            sigma_ii_mode: EvalMode::Exact,
            norms: NormOptions {
                restarts: 1,
                iters: 20,
                r_max: 1,
                ..NormOptions::default()
            },
        };
        let sum = summarize("do_nothing", &s, &budget).unwrap();
        assert!((sum.omega - 0.25).abs() < 1e-12);
        assert!(sum.sigma_i <= sum.sigma_i_upper + 1e-12);
        let report = ImpliedReport::new(vec![sum]);
        let text = serde_json::to_string(&report).unwrap();
        assert_eq!(ImpliedReport::validate_json(&text).unwrap(), report);
        let bad = text.replacen("\"schema_version\":1", "\"schema_version\":1,\"extra\":0", 1);
        assert!(ImpliedReport::validate_json(&bad).is_err());
        assert!(!report.entries[0].records(ValueMode::Exact, Some(0)).is_empty());
    }
}
