//! Validated domain types.
//!
//! Every quantity that appears in the allocation formulas and in the firm's
//! utility problem lives on exactly one of these types. Validation is total:
//! an input either passes unchanged or produces an [`Error::Validation`]
//! naming the offending field. Nothing is clamped.

use serde::Serialize;

/// Absolute tolerance used for floating-point comparisons unless a scenario
/// overrides it.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input violated a documented constraint.
    #[error("{message}")]
    Validation { field: String, message: String },
    /// The secondary market has no sign change of net supply in the bracket.
    #[error("market cannot clear in bracket [{lo}, {hi}]: net supply is {supply_lo} at {lo} and {supply_hi} at {hi}")]
    NoClearing {
        lo: f64,
        hi: f64,
        supply_lo: f64,
        supply_hi: f64,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Field name for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Validation { field, .. } => Some(field),
            Error::NoClearing { .. } => None,
        }
    }
}

pub(crate) fn require_finite(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::validation(field, format!("{field} must be finite")))
    }
}

pub(crate) fn require_positive(field: &str, value: f64) -> Result<f64> {
    require_finite(field, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::validation(field, format!("{field} must be > 0")))
    }
}

pub(crate) fn require_nonnegative(field: &str, value: f64) -> Result<f64> {
    require_finite(field, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::validation(field, format!("{field} must be >= 0")))
    }
}

pub(crate) fn require_open_unit(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::validation(
            field,
            format!("{field} must be in open interval (0,1)"),
        ))
    }
}

/// One market participant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Company {
    pub id: String,
    /// Output O_i in FLOPs per year.
    pub output: f64,
    /// Efficiency E_i in allowance units per FLOP. Lower is more efficient.
    pub efficiency: f64,
    /// Assistance factor C_i.
    pub assistance: f64,
    /// Historical usage H_i over the baseline period, FLOPs per year.
    pub historical: f64,
    /// Loss-curve exponent k.
    pub loss_exponent: f64,
    /// Marginal cost a per FLOP.
    pub cost_per_flop: f64,
}

impl Company {
    /// A company with unit assistance, history equal to output, and k = 1.
    pub fn new(id: impl Into<String>, output: f64, efficiency: f64, cost_per_flop: f64) -> Self {
        Company {
            id: id.into(),
            output,
            efficiency,
            assistance: 1.0,
            historical: output,
            loss_exponent: 1.0,
            cost_per_flop,
        }
    }
}

pub fn validate_company(c: Company) -> Result<Company> {
    if c.id.trim().is_empty() {
        return Err(Error::validation("id", "id must be non-empty"));
    }
    require_nonnegative("output", c.output)?;
    require_positive("efficiency", c.efficiency)?;
    require_positive("assistance", c.assistance)?;
    require_nonnegative("historical", c.historical)?;
    require_positive("loss_exponent", c.loss_exponent)?;
    require_positive("cost_per_flop", c.cost_per_flop)?;
    Ok(c)
}

/// A company's allowance position within one compliance year.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AllowanceAccount {
    pub allocated: f64,
    pub banked: f64,
    /// Net allowances traded away; positive means sold.
    pub traded_net: f64,
}

impl AllowanceAccount {
    pub fn available(&self) -> f64 {
        self.allocated + self.banked - self.traded_net
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BenchmarkRule {
    /// A benchmark set directly by the governing body.
    Fixed { benchmark: f64 },
    /// 90% of the mean company efficiency.
    Pct90OfAverage,
    /// Nearest-rank 10th percentile of ascending efficiencies.
    TopDecile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AllocationRule {
    /// `A_i = gamma * H_i`, compounded once per simulated year.
    Grandfathering { gamma: f64 },
    /// `A_i = O_i * B * C_i`.
    Benchmarking { rule: BenchmarkRule },
}

/// How the secondary-market price is set. Prices are per allowance unit;
/// a firm with efficiency E faces a per-FLOP price of `price * E`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PriceMode {
    /// Posted price with an implicit external counterparty.
    Exogenous { price: f64 },
    /// Each firm faces a per-FLOP price of `sqrt(a_i)`.
    ScaledSqrtA,
    /// Uniform price found by bisection on aggregate net supply.
    EndogenousClearing { lo: f64, hi: f64 },
}

impl PriceMode {
    /// Upper bound on the per-allowance price a firm can face, where the mode
    /// fixes one independently of the companies.
    pub fn reference_price(&self) -> Option<f64> {
        match self {
            PriceMode::Exogenous { price } => Some(*price),
            PriceMode::ScaledSqrtA => None,
            PriceMode::EndogenousClearing { hi, .. } => Some(*hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicyMode {
    NoGovernance,
    CapAndTrade,
    /// Per-FLOP tax added to marginal cost.
    Pigouvian {
        tax: f64,
    },
    /// Uncapped baseline-and-credit scheme. `baseline` is FLOPs per company.
    CreditProgram {
        baseline: f64,
        credit_price: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    pub allocation: AllocationRule,
    pub price_mode: PriceMode,
    /// Penalty per FLOP used beyond the firm's holdings.
    pub penalty_rate: f64,
    pub horizon: u32,
    /// Share of a seller's surplus withheld from the market and banked.
    pub bank_share: f64,
    pub tolerance: f64,
}

pub fn validate_policy(p: PolicyConfig) -> Result<PolicyConfig> {
    match &p.allocation {
        AllocationRule::Grandfathering { gamma } => {
            require_open_unit("gamma", *gamma)?;
        }
        AllocationRule::Benchmarking { rule } => {
            if let BenchmarkRule::Fixed { benchmark } = rule {
                require_positive("benchmark", *benchmark)?;
            }
        }
    }
    match &p.price_mode {
        PriceMode::Exogenous { price } => {
            require_positive("price", *price)?;
        }
        PriceMode::ScaledSqrtA => {}
        PriceMode::EndogenousClearing { lo, hi } => {
            require_positive("clearing_bracket", *lo)?;
            require_positive("clearing_bracket", *hi)?;
            if lo >= hi {
                return Err(Error::validation(
                    "clearing_bracket",
                    "clearing_bracket must satisfy lo < hi",
                ));
            }
        }
    }
    match &p.mode {
        PolicyMode::NoGovernance | PolicyMode::CapAndTrade => {}
        PolicyMode::Pigouvian { tax } => {
            require_nonnegative("tax", *tax)?;
        }
        PolicyMode::CreditProgram {
            baseline,
            credit_price,
        } => {
            require_positive("baseline", *baseline)?;
            require_positive("credit_price", *credit_price)?;
        }
    }
    require_finite("penalty_rate", p.penalty_rate)?;
    if let Some(price) = p.price_mode.reference_price() {
        if p.penalty_rate <= price {
            return Err(Error::validation(
                "penalty_rate",
                "penalty must exceed price",
            ));
        }
    }
    if p.horizon < 1 {
        return Err(Error::validation("horizon", "horizon must be >= 1"));
    }
    if !(p.bank_share.is_finite() && (0.0..1.0).contains(&p.bank_share)) {
        return Err(Error::validation(
            "bank_share",
            "bank_share must be in [0,1)",
        ));
    }
    require_positive("tolerance", p.tolerance)?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    GridOracle,
}

/// Optimal usage and trade for one firm, with the KKT multipliers of the
/// cap constraint (`mu1`) and the non-negativity constraint (`mu2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumSolution {
    pub x_star: f64,
    /// FLOPs-worth of allowances sold; negative when buying.
    pub y_star: f64,
    pub utility: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeEntry {
    pub year: u32,
    pub seller: String,
    pub buyer: String,
    /// Allowance units transferred.
    pub quantity: f64,
    /// Price per allowance unit.
    pub price: f64,
    /// FLOPs-worth of the transfer at the seller's efficiency.
    pub seller_flops: f64,
    /// FLOPs-worth of the transfer at the buyer's efficiency.
    pub buyer_flops: f64,
}

/// Append-only record of allowance transfers between companies.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TradeLedger {
    pub entries: Vec<TradeEntry>,
}

impl TradeLedger {
    pub fn record(&mut self, entry: TradeEntry) -> Result<()> {
        if !(entry.quantity.is_finite() && entry.quantity > 0.0) {
            return Err(Error::validation("quantity", "quantity must be > 0"));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn extend(&mut self, other: TradeLedger) {
        self.entries.extend(other.entries);
    }

    pub fn year(&self, year: u32) -> impl Iterator<Item = &TradeEntry> {
        self.entries.iter().filter(move |e| e.year == year)
    }

    /// Allowances sold minus allowances bought for `company` in `year`.
    pub fn net_sold(&self, year: u32, company: &str) -> f64 {
        self.year(year)
            .map(|e| {
                if e.seller == company {
                    e.quantity
                } else if e.buyer == company {
                    -e.quantity
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Sum over every participant of its net sold quantity in `year`.
    pub fn signed_total(&self, year: u32) -> f64 {
        let ids: std::collections::BTreeSet<&str> = self
            .year(year)
            .flat_map(|e| [e.seller.as_str(), e.buyer.as_str()])
            .collect();
        ids.into_iter().map(|id| self.net_sold(year, id)).sum()
    }
}

/// One company's line in a [`YearReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompanyYear {
    pub company: String,
    pub allocated: f64,
    pub banked_in: f64,
    /// FLOPs the firm may use before trading: allocation plus banked
    /// headroom, converted at the current efficiency.
    pub flops_allowed: f64,
    pub x_star: f64,
    /// FLOPs-worth actually traded; positive when selling.
    pub y_star: f64,
    pub banked_out: f64,
    pub penalty: f64,
    pub utility: f64,
    /// Allowance units consumed (`x_star * E_i`).
    pub energy: f64,
    pub co2_kg: f64,
    /// Per-allowance price this firm traded at, if it faced one.
    pub price: Option<f64>,
    /// Allowance shortfall at year close (zero for rational firms).
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearReport {
    pub year: u32,
    pub rows: Vec<CompanyYear>,
    pub total_flops: f64,
    pub total_allowances: f64,
    pub benchmark: Option<f64>,
    pub clearing_price: Option<f64>,
    /// Net allowances absorbed by the external counterparty (positive means
    /// exported from the modelled companies).
    pub unmatched_net: f64,
}

impl YearReport {
    /// Allocated + banked in − used − banked out − exported. Zero up to
    /// rounding in every cap-and-trade year.
    pub fn conservation_residual(&self) -> f64 {
        let inflow: f64 = self.rows.iter().map(|r| r.allocated + r.banked_in).sum();
        let outflow: f64 = self
            .rows
            .iter()
            .map(|r| r.energy + r.banked_out - r.violation)
            .sum();
        inflow - outflow - self.unmatched_net
    }

    pub fn total_penalty(&self) -> f64 {
        self.rows.iter().map(|r| r.penalty).sum()
    }

    pub fn total_co2_kg(&self) -> f64 {
        self.rows.iter().map(|r| r.co2_kg).sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.rows.iter().map(|r| r.energy).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn company() -> Company {
        Company {
            id: "a".into(),
            output: 100.0,
            efficiency: 0.5,
            assistance: 1.0,
            historical: 100.0,
            loss_exponent: 1.0,
            cost_per_flop: 0.01,
        }
    }

    fn policy() -> PolicyConfig {
        PolicyConfig {
            mode: PolicyMode::CapAndTrade,
            allocation: AllocationRule::Grandfathering { gamma: 0.9 },
            price_mode: PriceMode::Exogenous { price: 0.01 },
            penalty_rate: 0.1,
            horizon: 5,
            bank_share: 0.0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    #[test]
    fn valid_company_passes_unchanged() {
        assert_eq!(validate_company(company()).unwrap(), company());
    }

    #[test]
    fn zero_loss_exponent_rejected() {
        let err = validate_company(Company {
            loss_exponent: 0.0,
            ..company()
        })
        .unwrap_err();
        assert_eq!(err.to_string(), "loss_exponent must be > 0");
        assert_eq!(err.field(), Some("loss_exponent"));
    }

    #[test]
    fn negative_efficiency_rejected() {
        let err = validate_company(Company {
            efficiency: -1.0,
            ..company()
        })
        .unwrap_err();
        assert_eq!(err.to_string(), "efficiency must be > 0");
    }

    #[test]
    fn nan_fields_rejected() {
        let err = validate_company(Company {
            cost_per_flop: f64::NAN,
            ..company()
        })
        .unwrap_err();
        assert_eq!(err.field(), Some("cost_per_flop"));
    }

    #[test]
    fn valid_policy_passes() {
        let mut p = policy();
        p.allocation = AllocationRule::Benchmarking {
            rule: BenchmarkRule::Fixed { benchmark: 0.5 },
        };
        assert!(validate_policy(p).is_ok());
        assert!(validate_policy(policy()).is_ok());
    }

    #[test]
    fn gamma_boundary_rejected() {
        let mut p = policy();
        p.allocation = AllocationRule::Grandfathering { gamma: 1.0 };
        let err = validate_policy(p).unwrap_err();
        assert_eq!(err.to_string(), "gamma must be in open interval (0,1)");
    }

    #[test]
    fn penalty_must_dominate_price() {
        let mut p = policy();
        p.penalty_rate = 0.005;
        let err = validate_policy(p).unwrap_err();
        assert_eq!(err.to_string(), "penalty must exceed price");
        let mut p = policy();
        p.penalty_rate = 0.01;
        assert!(validate_policy(p).is_err());
    }

    #[test]
    fn zero_horizon_rejected() {
        let mut p = policy();
        p.horizon = 0;
        assert_eq!(validate_policy(p).unwrap_err().field(), Some("horizon"));
    }

    #[test]
    fn account_available() {
        let acct = AllowanceAccount {
            allocated: 10.0,
            banked: 2.0,
            traded_net: 3.0,
        };
        assert_eq!(acct.available(), 9.0);
    }

    #[test]
    fn ledger_rejects_nonpositive_quantity() {
        let mut ledger = TradeLedger::default();
        let entry = TradeEntry {
            year: 1,
            seller: "a".into(),
            buyer: "b".into(),
            quantity: 0.0,
            price: 0.01,
            seller_flops: 0.0,
            buyer_flops: 0.0,
        };
        assert!(ledger.record(entry).is_err());
    }
}
