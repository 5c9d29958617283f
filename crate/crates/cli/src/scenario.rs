//! Scenario files.
//!
//! The on-disk format is a flat JSON document. Optional fields receive
//! defaults and every default applied is reported back so the caller can
//! echo it.

use std::path::Path;

use captrade_core::simulation::{validate_scenario, EmissionsConfig, Scenario, ScheduleEntry};
use captrade_core::{
    AllocationRule, BenchmarkRule, Company, Error, PolicyConfig, PolicyMode, PriceMode,
    DEFAULT_TOLERANCE,
};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_CLEARING_BRACKET: [f64; 2] = [1e-6, 1.0];
/// Penalty default as a multiple of the highest price a firm can face.
pub const DEFAULT_PENALTY_MULTIPLE: f64 = 10.0;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    seed: Option<u64>,
    policy: RawPolicy,
    companies: Vec<RawCompany>,
    #[serde(default)]
    schedule: Vec<RawSchedule>,
    #[serde(default)]
    emissions: Option<RawEmissions>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum ModeName {
    NoGovernance,
    CapAndTrade,
    Pigouvian,
    CreditProgram,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum AllocationName {
    Grandfathering,
    Benchmarking,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum BenchmarkName {
    Fixed,
    Pct90OfAverage,
    TopDecile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum PriceName {
    Exogenous,
    ScaledSqrtA,
    EndogenousClearing,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    #[serde(default)]
    mode: Option<ModeName>,
    horizon: u32,
    #[serde(default)]
    allocation_rule: Option<AllocationName>,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    benchmark_rule: Option<BenchmarkName>,
    #[serde(default)]
    benchmark: Option<f64>,
    #[serde(default)]
    price_mode: Option<PriceName>,
    #[serde(default)]
    price: Option<f64>,
    #[serde(default)]
    clearing_bracket: Option<[f64; 2]>,
    #[serde(default)]
    penalty_rate: Option<f64>,
    #[serde(default)]
    bank_share: Option<f64>,
    #[serde(default)]
    tolerance: Option<f64>,
    #[serde(default)]
    tax: Option<f64>,
    #[serde(default)]
    baseline: Option<f64>,
    #[serde(default)]
    credit_price: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompany {
    id: String,
    output: f64,
    efficiency: f64,
    cost_per_flop: f64,
    #[serde(default)]
    loss_exponent: Option<f64>,
    #[serde(default)]
    assistance: Option<f64>,
    #[serde(default)]
    historical: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    year: u32,
    company: String,
    #[serde(default)]
    output: Option<f64>,
    #[serde(default)]
    efficiency: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmissions {
    #[serde(default)]
    kwh_per_allowance: Option<f64>,
    #[serde(default)]
    kg_co2_per_kwh: Option<f64>,
}

/// A validated scenario plus the defaults that were filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub defaults: Vec<String>,
}

fn required(field: &str, value: Option<f64>, why: &str) -> Result<f64, Error> {
    value.ok_or_else(|| Error::validation(field, format!("{field} is required {why}")))
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text, path)
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<LoadedScenario, CliError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(resolve(raw)?)
}

fn resolve(raw: RawScenario) -> Result<LoadedScenario, Error> {
    let mut defaults = Vec::new();
    let mut note = |s: String| defaults.push(format!("default applied: {s}"));

    let mut companies = Vec::with_capacity(raw.companies.len());
    for c in raw.companies {
        let k = c.loss_exponent.unwrap_or_else(|| {
            note(format!("k=1 (company '{}')", c.id));
            1.0
        });
        let assistance = c.assistance.unwrap_or_else(|| {
            note(format!("assistance=1 (company '{}')", c.id));
            1.0
        });
        let historical = c.historical.unwrap_or_else(|| {
            note(format!("historical={} (company '{}')", c.output, c.id));
            c.output
        });
        companies.push(Company {
            id: c.id,
            output: c.output,
            efficiency: c.efficiency,
            assistance,
            historical,
            loss_exponent: k,
            cost_per_flop: c.cost_per_flop,
        });
    }

    let p = raw.policy;
    let mode = match p.mode.unwrap_or_else(|| {
        note("mode=cap_and_trade".into());
        ModeName::CapAndTrade
    }) {
        ModeName::NoGovernance => PolicyMode::NoGovernance,
        ModeName::CapAndTrade => PolicyMode::CapAndTrade,
        ModeName::Pigouvian => PolicyMode::Pigouvian {
            tax: required("tax", p.tax, "for pigouvian mode")?,
        },
        ModeName::CreditProgram => PolicyMode::CreditProgram {
            baseline: required("baseline", p.baseline, "for credit_program mode")?,
            credit_price: required("credit_price", p.credit_price, "for credit_program mode")?,
        },
    };

    let allocation = match p.allocation_rule.unwrap_or_else(|| {
        note("allocation_rule=benchmarking".into());
        AllocationName::Benchmarking
    }) {
        AllocationName::Grandfathering => AllocationRule::Grandfathering {
            gamma: required("gamma", p.gamma, "for grandfathering")?,
        },
        AllocationName::Benchmarking => {
            let rule = match p.benchmark_rule.unwrap_or_else(|| {
                note("benchmark_rule=fixed".into());
                BenchmarkName::Fixed
            }) {
                BenchmarkName::Fixed => BenchmarkRule::Fixed {
                    benchmark: required("benchmark", p.benchmark, "for a fixed benchmark")?,
                },
                BenchmarkName::Pct90OfAverage => BenchmarkRule::Pct90OfAverage,
                BenchmarkName::TopDecile => BenchmarkRule::TopDecile,
            };
            AllocationRule::Benchmarking { rule }
        }
    };

    let price_mode = match p.price_mode.unwrap_or_else(|| {
        note("price_mode=exogenous".into());
        PriceName::Exogenous
    }) {
        PriceName::Exogenous => PriceMode::Exogenous {
            price: required("price", p.price, "for an exogenous price")?,
        },
        PriceName::ScaledSqrtA => PriceMode::ScaledSqrtA,
        PriceName::EndogenousClearing => {
            let [lo, hi] = p.clearing_bracket.unwrap_or_else(|| {
                note(format!(
                    "clearing_bracket=[{}, {}]",
                    DEFAULT_CLEARING_BRACKET[0], DEFAULT_CLEARING_BRACKET[1]
                ));
                DEFAULT_CLEARING_BRACKET
            });
            PriceMode::EndogenousClearing { lo, hi }
        }
    };

    let penalty_rate = match p.penalty_rate {
        Some(v) => v,
        None => {
            let reference = price_mode.reference_price().unwrap_or_else(|| {
                companies
                    .iter()
                    .map(|c| c.cost_per_flop.sqrt())
                    .fold(0.0, f64::max)
            });
            let v = DEFAULT_PENALTY_MULTIPLE * reference;
            note(format!("penalty_rate={v}"));
            v
        }
    };
    let bank_share = p.bank_share.unwrap_or_else(|| {
        note("bank_share=0".into());
        0.0
    });
    let tolerance = p.tolerance.unwrap_or_else(|| {
        note(format!("tolerance={DEFAULT_TOLERANCE}"));
        DEFAULT_TOLERANCE
    });
    let seed = raw.seed.unwrap_or_else(|| {
        note("seed=0".into());
        0
    });

    let base = EmissionsConfig::default();
    let emissions = match raw.emissions {
        None => base,
        Some(e) => EmissionsConfig {
            kwh_per_allowance: e.kwh_per_allowance.unwrap_or(base.kwh_per_allowance),
            kg_co2_per_kwh: e.kg_co2_per_kwh.unwrap_or(base.kg_co2_per_kwh),
        },
    };

    let schedule = raw
        .schedule
        .into_iter()
        .map(|s| ScheduleEntry {
            year: s.year,
            company: s.company,
            output: s.output,
            efficiency: s.efficiency,
        })
        .collect();

    let scenario = validate_scenario(Scenario {
        companies,
        policy: PolicyConfig {
            mode,
            allocation,
            price_mode,
            penalty_rate,
            horizon: p.horizon,
            bank_share,
            tolerance,
        },
        seed,
        schedule,
        emissions,
    })?;
    Ok(LoadedScenario { scenario, defaults })
}
