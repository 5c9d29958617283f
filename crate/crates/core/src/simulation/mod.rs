//! Multi-year compliance cycle and policy-mode comparison.
//!
//! Each cap-and-trade year runs: benchmark → allocation → conversion to
//! FLOPs (plus banked headroom) → best responses at the year's price →
//! trading → banking and penalties → report. Years run strictly in order
//! because banked balances carry forward.

mod sweep;

pub use sweep::{
    anchored_grid, sweep_figure1, sweep_figure2, Figure1Price, Figure2Variant, SweepAxis,
    SweepResult, SweepRow, DEFAULT_ALLOWANCE_RANGE, DEFAULT_COST_RANGE, DEFAULT_GRID_POINTS,
};

use std::collections::BTreeSet;

use serde::Serialize;

use crate::allocation::{allocate_company, compute_benchmark};
use crate::equilibrium::{
    solve_cap_and_trade, solve_no_governance, solve_pigouvian, utility_cap_and_trade,
};
use crate::market::{
    assess_penalty, bank_surplus, clear_with, credit_program_settle, execute_trades, BankLedger,
    MarketAgent, Order,
};
use crate::model::{
    require_nonnegative, require_positive, validate_company, validate_policy, AllocationRule,
    Company, CompanyYear, Error, PolicyConfig, PolicyMode, PriceMode, Result, TradeLedger,
    YearReport,
};

/// kWh per allowance unit when allowances are read as watt-seconds.
pub const KWH_PER_WATT_SECOND: f64 = 1.0 / 3.6e6;
/// US grid average of 0.81 lb CO2 per kWh, in kilograms.
pub const KG_CO2_PER_KWH: f64 = 0.81 * 0.453_592_37;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionsConfig {
    pub kwh_per_allowance: f64,
    pub kg_co2_per_kwh: f64,
}

impl Default for EmissionsConfig {
    fn default() -> Self {
        EmissionsConfig {
            kwh_per_allowance: KWH_PER_WATT_SECOND,
            kg_co2_per_kwh: KG_CO2_PER_KWH,
        }
    }
}

/// Kilograms of CO2 from `usage` FLOPs at `efficiency` allowance units per
/// FLOP. Informational only; never feeds back into utility.
pub fn compute_emissions(
    usage: f64,
    efficiency: f64,
    kwh_per_allowance: f64,
    kg_co2_per_kwh: f64,
) -> Result<f64> {
    require_nonnegative("usage", usage)?;
    require_positive("efficiency", efficiency)?;
    Ok(usage * efficiency * kwh_per_allowance * kg_co2_per_kwh)
}

/// A per-year override of a company's output or efficiency. Overrides
/// persist until the next override for the same company.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleEntry {
    pub year: u32,
    pub company: String,
    pub output: Option<f64>,
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub companies: Vec<Company>,
    pub policy: PolicyConfig,
    pub seed: u64,
    pub schedule: Vec<ScheduleEntry>,
    pub emissions: EmissionsConfig,
}

impl Scenario {
    pub fn new(companies: Vec<Company>, policy: PolicyConfig) -> Self {
        Scenario {
            companies,
            policy,
            seed: 0,
            schedule: Vec::new(),
            emissions: EmissionsConfig::default(),
        }
    }

    /// Companies as they stand in `year`, with schedule overrides applied.
    pub fn companies_in_year(&self, year: u32) -> Vec<Company> {
        let mut companies = self.companies.clone();
        let mut entries: Vec<&ScheduleEntry> =
            self.schedule.iter().filter(|e| e.year <= year).collect();
        entries.sort_by_key(|e| e.year);
        for entry in entries {
            if let Some(c) = companies.iter_mut().find(|c| c.id == entry.company) {
                if let Some(o) = entry.output {
                    c.output = o;
                }
                if let Some(e) = entry.efficiency {
                    c.efficiency = e;
                }
            }
        }
        companies
    }
}

pub fn validate_scenario(s: Scenario) -> Result<Scenario> {
    if s.companies.is_empty() {
        return Err(Error::validation(
            "companies",
            "scenario needs at least one company",
        ));
    }
    let mut ids = BTreeSet::new();
    let mut companies = Vec::with_capacity(s.companies.len());
    for c in s.companies {
        if !ids.insert(c.id.clone()) {
            return Err(Error::validation(
                "id",
                format!("duplicate company id '{}'", c.id),
            ));
        }
        companies.push(validate_company(c)?);
    }
    let policy = validate_policy(s.policy)?;
    if policy.price_mode == PriceMode::ScaledSqrtA {
        for c in &companies {
            if policy.penalty_rate <= c.cost_per_flop.sqrt() {
                return Err(Error::validation(
                    "penalty_rate",
                    format!("penalty must exceed price (sqrt(a) for company '{}')", c.id),
                ));
            }
        }
    }
    for e in &s.schedule {
        if e.year < 1 || e.year > policy.horizon {
            return Err(Error::validation(
                "schedule.year",
                format!("schedule year {} is outside 1..={}", e.year, policy.horizon),
            ));
        }
        if !ids.contains(&e.company) {
            return Err(Error::validation(
                "schedule.company",
                format!("schedule references unknown company '{}'", e.company),
            ));
        }
        if let Some(o) = e.output {
            require_nonnegative("output", o)?;
        }
        if let Some(eff) = e.efficiency {
            require_positive("efficiency", eff)?;
        }
    }
    require_positive("kwh_per_allowance", s.emissions.kwh_per_allowance)?;
    require_nonnegative("kg_co2_per_kwh", s.emissions.kg_co2_per_kwh)?;
    Ok(Scenario {
        companies,
        policy,
        ..s
    })
}

/// State threaded between years.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationState {
    pub bank: BankLedger,
    pub ledger: TradeLedger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRun {
    pub reports: Vec<YearReport>,
    pub ledger: TradeLedger,
    pub bank: BankLedger,
}

impl HorizonRun {
    pub fn cumulative_allocation(&self) -> f64 {
        self.reports
            .iter()
            .flat_map(|r| &r.rows)
            .map(|r| r.allocated)
            .sum()
    }

    /// Allowance units consumed over the horizon.
    pub fn cumulative_usage(&self) -> f64 {
        self.reports.iter().map(|r| r.total_energy()).sum()
    }

    pub fn cumulative_unmatched(&self) -> f64 {
        self.reports.iter().map(|r| r.unmatched_net).sum()
    }
}

pub fn run_horizon(scenario: &Scenario) -> Result<HorizonRun> {
    let mut state = SimulationState::default();
    let reports = (1..=scenario.policy.horizon)
        .map(|year| run_year(&mut state, scenario, year))
        .collect::<Result<Vec<_>>>()?;
    Ok(HorizonRun {
        reports,
        ledger: state.ledger,
        bank: state.bank,
    })
}

pub fn run_year(state: &mut SimulationState, scenario: &Scenario, year: u32) -> Result<YearReport> {
    let companies = scenario.companies_in_year(year);
    match &scenario.policy.mode {
        PolicyMode::NoGovernance => uncapped_year(scenario, &companies, year, 0.0),
        PolicyMode::Pigouvian { tax } => uncapped_year(scenario, &companies, year, *tax),
        PolicyMode::CreditProgram {
            baseline,
            credit_price,
        } => credit_year(scenario, &companies, year, *baseline, *credit_price),
        PolicyMode::CapAndTrade => cap_and_trade_year(state, scenario, &companies, year),
    }
}

fn emissions(scenario: &Scenario, usage: f64, efficiency: f64) -> Result<f64> {
    compute_emissions(
        usage,
        efficiency,
        scenario.emissions.kwh_per_allowance,
        scenario.emissions.kg_co2_per_kwh,
    )
}

fn finish(
    year: u32,
    rows: Vec<CompanyYear>,
    benchmark: Option<f64>,
    clearing_price: Option<f64>,
    unmatched_net: f64,
) -> YearReport {
    YearReport {
        year,
        total_flops: rows.iter().map(|r| r.x_star).sum(),
        total_allowances: rows.iter().map(|r| r.allocated).sum(),
        rows,
        benchmark,
        clearing_price,
        unmatched_net,
    }
}

/// No cap: each firm solves the unconstrained problem, with `tax` added to
/// its marginal cost.
fn uncapped_year(
    scenario: &Scenario,
    companies: &[Company],
    year: u32,
    tax: f64,
) -> Result<YearReport> {
    let rows = companies
        .iter()
        .map(|c| {
            let sol = if tax > 0.0 {
                solve_pigouvian(c.loss_exponent, c.cost_per_flop, tax)?
            } else {
                solve_no_governance(c.loss_exponent, c.cost_per_flop)?
            };
            Ok(CompanyYear {
                company: c.id.clone(),
                allocated: 0.0,
                banked_in: 0.0,
                flops_allowed: 0.0,
                x_star: sol.x_star,
                y_star: 0.0,
                banked_out: 0.0,
                penalty: 0.0,
                utility: sol.utility,
                energy: sol.x_star * c.efficiency,
                co2_kg: emissions(scenario, sol.x_star, c.efficiency)?,
                price: None,
                violation: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(year, rows, None, None, 0.0))
}

/// Baseline-and-credit year. Each firm faces the credit price on every FLOP
/// it uses above or below the baseline, which is the cap-and-trade problem
/// with `F = baseline`; nothing caps the total.
fn credit_year(
    scenario: &Scenario,
    companies: &[Company],
    year: u32,
    baseline: f64,
    credit_price: f64,
) -> Result<YearReport> {
    let solutions = companies
        .iter()
        .map(|c| solve_cap_and_trade(c.loss_exponent, c.cost_per_flop, credit_price, baseline))
        .collect::<Result<Vec<_>>>()?;
    let usages: Vec<(String, f64)> = companies
        .iter()
        .zip(&solutions)
        .map(|(c, s)| (c.id.clone(), s.x_star))
        .collect();
    let settled = credit_program_settle(&usages, baseline, credit_price)?;
    let rows = companies
        .iter()
        .zip(&solutions)
        .map(|(c, s)| {
            Ok(CompanyYear {
                company: c.id.clone(),
                allocated: 0.0,
                banked_in: 0.0,
                flops_allowed: baseline,
                x_star: s.x_star,
                y_star: s.y_star,
                banked_out: 0.0,
                penalty: 0.0,
                utility: s.utility,
                energy: s.x_star * c.efficiency,
                co2_kg: emissions(scenario, s.x_star, c.efficiency)?,
                price: Some(credit_price),
                violation: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(
        year,
        rows,
        None,
        Some(credit_price),
        settled.total_minted - settled.total_bought,
    ))
}

/// Quantity a firm puts on the market given its desired surplus. Sellers
/// hold back `bank_share` of their surplus for banking.
fn offered(surplus: f64, bank_share: f64) -> f64 {
    if surplus > 0.0 {
        (1.0 - bank_share) * surplus
    } else {
        surplus
    }
}

fn cap_and_trade_year(
    state: &mut SimulationState,
    scenario: &Scenario,
    companies: &[Company],
    year: u32,
) -> Result<YearReport> {
    let policy = &scenario.policy;
    let tol = policy.tolerance;

    let benchmark = match &policy.allocation {
        AllocationRule::Benchmarking { rule } => Some(compute_benchmark(companies, rule)?),
        AllocationRule::Grandfathering { .. } => None,
    };
    let allocations = companies
        .iter()
        .map(|c| allocate_company(c, &policy.allocation, benchmark, year))
        .collect::<Result<Vec<_>>>()?;
    let banked_in: Vec<f64> = companies
        .iter()
        .map(|c| state.bank.balance(&c.id))
        .collect();
    let agents: Vec<MarketAgent> = companies
        .iter()
        .zip(&allocations)
        .zip(&banked_in)
        .map(|((c, alloc), banked)| {
            MarketAgent::new(
                c.id.clone(),
                c.loss_exponent,
                c.cost_per_flop,
                (alloc.allowances + banked) / c.efficiency,
            )
            .with_efficiency(c.efficiency)
        })
        .collect();

    // per-allowance price each firm trades at
    let (prices, clearing_price): (Vec<f64>, Option<f64>) = match &policy.price_mode {
        PriceMode::Exogenous { price } => (vec![*price; agents.len()], Some(*price)),
        PriceMode::ScaledSqrtA => (
            agents
                .iter()
                .map(|a| a.cost_per_flop.sqrt() / a.efficiency)
                .collect(),
            None,
        ),
        PriceMode::EndogenousClearing { lo, hi } => {
            let clearing = clear_with(
                |p| {
                    agents
                        .iter()
                        .map(|a| offered(a.surplus_at(p), policy.bank_share))
                        .sum()
                },
                (*lo, *hi),
                tol,
            )?;
            (vec![clearing.price; agents.len()], Some(clearing.price))
        }
    };

    let orders: Vec<Order> = agents
        .iter()
        .zip(&prices)
        .map(|(a, &p)| Order {
            id: a.id.clone(),
            quantity: offered(a.surplus_at(p), policy.bank_share),
            efficiency: a.efficiency,
            price: p,
        })
        .collect();
    let outcome = execute_trades(year, &orders, clearing_price)?;

    let mut rows = Vec::with_capacity(companies.len());
    for (i, c) in companies.iter().enumerate() {
        let (agent, order, price) = (&agents[i], &orders[i], prices[i]);
        let allocated = allocations[i].allowances;
        let x = agent.usage_at(price);
        let used = x * c.efficiency;

        // banked allowances cover usage first
        let withdrawn = state.bank.withdraw(year, &c.id, used)?;
        let mut leftover = allocated - order.quantity - (used - withdrawn);
        if leftover < 0.0 {
            // sales or usage beyond this year's allocation come out of the bank
            leftover += state.bank.withdraw(year, &c.id, -leftover)?;
        }
        let banked = bank_surplus(&mut state.bank, year, &c.id, leftover, tol)?;
        let penalty = if banked.violation > 0.0 {
            let holdings = (allocated + banked_in[i] - order.quantity) / c.efficiency;
            assess_penalty(x, holdings, policy.penalty_rate)
        } else {
            0.0
        };
        let y = order.quantity / c.efficiency;
        let utility =
            utility_cap_and_trade(x, y, c.loss_exponent, c.cost_per_flop, price * c.efficiency)?
                - penalty;
        rows.push(CompanyYear {
            company: c.id.clone(),
            allocated,
            banked_in: banked_in[i],
            flops_allowed: agent.flops_allowed,
            x_star: x,
            y_star: y,
            banked_out: state.bank.balance(&c.id),
            penalty,
            utility,
            energy: used,
            co2_kg: emissions(scenario, x, c.efficiency)?,
            price: Some(price),
            violation: banked.violation,
        });
    }
    state.ledger.extend(outcome.ledger);
    Ok(finish(
        year,
        rows,
        benchmark,
        clearing_price,
        outcome.unmatched_net,
    ))
}
