//! Secondary allowance market: price discovery, trade matching, banking,
//! penalties, and the uncapped credit-program settlement used for contrast.
//!
//! Market prices are quoted per allowance unit. A firm with efficiency `E`
//! trading at allowance price `P` faces a per-FLOP price of `P * E`; with
//! `E = 1` the two coincide.

use std::collections::BTreeMap;

use crate::model::{require_nonnegative, require_positive, Error, Result, TradeEntry, TradeLedger};
use serde::Serialize;

/// Upper bound on bisection steps in [`clear_price`].
pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// A price-taking firm's position going into the market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketAgent {
    pub id: String,
    pub loss_exponent: f64,
    pub cost_per_flop: f64,
    /// FLOPs the firm holds allowances for.
    pub flops_allowed: f64,
    pub efficiency: f64,
}

impl MarketAgent {
    pub fn new(id: impl Into<String>, k: f64, a: f64, flops_allowed: f64) -> Self {
        MarketAgent {
            id: id.into(),
            loss_exponent: k,
            cost_per_flop: a,
            flops_allowed,
            efficiency: 1.0,
        }
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Self {
        self.efficiency = efficiency;
        self
    }

    fn validate(&self) -> Result<()> {
        require_positive("loss_exponent", self.loss_exponent)?;
        require_positive("cost_per_flop", self.cost_per_flop)?;
        require_nonnegative("flops_allowed", self.flops_allowed)?;
        require_positive("efficiency", self.efficiency)?;
        Ok(())
    }

    /// Optimal usage at per-allowance price `price`.
    pub fn usage_at(&self, price: f64) -> f64 {
        let k = self.loss_exponent;
        (k / (self.cost_per_flop + price * self.efficiency)).powf(1.0 / (k + 1.0))
    }

    /// Allowances the firm wants to sell (negative: buy) at `price`.
    pub fn surplus_at(&self, price: f64) -> f64 {
        self.efficiency * (self.flops_allowed - self.usage_at(price))
    }
}

/// Aggregate desired sales minus purchases, in allowance units.
pub fn net_supply(price: f64, agents: &[MarketAgent]) -> Result<f64> {
    require_positive("price", price)?;
    if agents.is_empty() {
        return Err(Error::validation("agents", "agents must be non-empty"));
    }
    for agent in agents {
        agent.validate()?;
    }
    Ok(agents.iter().map(|a| a.surplus_at(price)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clearing {
    pub price: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection for the root of a nondecreasing `supply` on `[lo, hi]`.
///
/// Stops when `|supply| < tol`, the bracket is narrower than `tol²`, or the
/// midpoint no longer moves.
pub fn clear_with(supply: impl Fn(f64) -> f64, (lo, hi): (f64, f64), tol: f64) -> Result<Clearing> {
    require_positive("clearing_bracket", lo)?;
    require_positive("clearing_bracket", hi)?;
    require_positive("tolerance", tol)?;
    if lo >= hi {
        return Err(Error::validation(
            "clearing_bracket",
            "clearing_bracket must satisfy lo < hi",
        ));
    }
    let (s_lo, s_hi) = (supply(lo), supply(hi));
    if s_lo.abs() < tol {
        return Ok(Clearing {
            price: lo,
            residual: s_lo,
            iterations: 0,
        });
    }
    if s_hi.abs() < tol {
        return Ok(Clearing {
            price: hi,
            residual: s_hi,
            iterations: 0,
        });
    }
    if !(s_lo < 0.0 && s_hi > 0.0) {
        return Err(Error::NoClearing {
            lo,
            hi,
            supply_lo: s_lo,
            supply_hi: s_hi,
        });
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut best = Clearing {
        price: lo,
        residual: s_lo,
        iterations: 0,
    };
    for iter in 1..=MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let s = supply(mid);
        if s.abs() < best.residual.abs() {
            best = Clearing {
                price: mid,
                residual: s,
                iterations: iter,
            };
        }
        best.iterations = iter;
        if s.abs() < tol || hi - lo < tol * tol || mid <= lo || mid >= hi {
            break;
        }
        if s < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Uniform price at which aggregate net supply vanishes.
pub fn clear_price(agents: &[MarketAgent], bracket: (f64, f64), tol: f64) -> Result<f64> {
    net_supply(bracket.0.max(f64::MIN_POSITIVE), agents)?;
    let clearing = clear_with(
        |p| agents.iter().map(|a| a.surplus_at(p)).sum(),
        bracket,
        tol,
    )?;
    Ok(clearing.price)
}

/// A firm's order, in allowance units. Positive quantities are sales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Order {
    pub id: String,
    pub quantity: f64,
    pub efficiency: f64,
    /// Per-allowance price the firm trades at.
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketOutcome {
    pub clearing_price: Option<f64>,
    /// Quantity each firm traded, in order of the input.
    pub fills: Vec<(String, f64)>,
    pub ledger: TradeLedger,
    /// Sales minus purchases left after internal matching; absorbed by the
    /// external counterparty.
    pub unmatched_net: f64,
}

/// Matches sellers to buyers greedily by descending quantity (ties broken by
/// ascending id) and records every transfer. Each firm's full order is
/// filled; whatever the internal matching leaves over goes to the external
/// counterparty.
pub fn execute_trades(
    year: u32,
    orders: &[Order],
    clearing_price: Option<f64>,
) -> Result<MarketOutcome> {
    for o in orders {
        if !o.quantity.is_finite() {
            return Err(Error::validation("quantity", "quantity must be finite"));
        }
        require_positive("efficiency", o.efficiency)?;
    }
    let by_size = |side: &mut Vec<(&Order, f64)>| {
        side.sort_by(|l, r| r.1.total_cmp(&l.1).then_with(|| l.0.id.cmp(&r.0.id)));
    };
    let mut sellers: Vec<(&Order, f64)> = orders
        .iter()
        .filter(|o| o.quantity > 0.0)
        .map(|o| (o, o.quantity))
        .collect();
    let mut buyers: Vec<(&Order, f64)> = orders
        .iter()
        .filter(|o| o.quantity < 0.0)
        .map(|o| (o, -o.quantity))
        .collect();
    by_size(&mut sellers);
    by_size(&mut buyers);

    let mut ledger = TradeLedger::default();
    let (mut si, mut bi) = (0, 0);
    while si < sellers.len() && bi < buyers.len() {
        let q = sellers[si].1.min(buyers[bi].1);
        let (seller, buyer) = (sellers[si].0, buyers[bi].0);
        if q > 0.0 {
            ledger.record(TradeEntry {
                year,
                seller: seller.id.clone(),
                buyer: buyer.id.clone(),
                quantity: q,
                price: seller.price,
                seller_flops: q / seller.efficiency,
                buyer_flops: q / buyer.efficiency,
            })?;
        }
        sellers[si].1 -= q;
        buyers[bi].1 -= q;
        if sellers[si].1 <= 0.0 {
            si += 1;
        }
        if buyers[bi].1 <= 0.0 {
            bi += 1;
        }
    }
    let unmatched_net = sellers[si.min(sellers.len())..]
        .iter()
        .map(|s| s.1)
        .sum::<f64>()
        - buyers[bi.min(buyers.len())..]
            .iter()
            .map(|b| b.1)
            .sum::<f64>();

    Ok(MarketOutcome {
        clearing_price,
        fills: orders.iter().map(|o| (o.id.clone(), o.quantity)).collect(),
        ledger,
        unmatched_net,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BankAction {
    Deposit,
    Withdrawal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BankEntry {
    pub year: u32,
    pub company: String,
    pub action: BankAction,
    pub amount: f64,
}

/// Per-company banked allowance balances. Banked allowances never expire.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BankLedger {
    balances: BTreeMap<String, f64>,
    pub entries: Vec<BankEntry>,
}

impl BankLedger {
    pub fn balance(&self, company: &str) -> f64 {
        self.balances.get(company).copied().unwrap_or(0.0)
    }

    pub fn balances(&self) -> &BTreeMap<String, f64> {
        &self.balances
    }

    pub fn deposit(&mut self, year: u32, company: &str, amount: f64) -> Result<()> {
        require_nonnegative("deposit", amount)?;
        if amount > 0.0 {
            *self.balances.entry(company.to_owned()).or_insert(0.0) += amount;
            self.entries.push(BankEntry {
                year,
                company: company.to_owned(),
                action: BankAction::Deposit,
                amount,
            });
        }
        Ok(())
    }

    /// Withdraws up to `amount`; returns what was actually taken.
    pub fn withdraw(&mut self, year: u32, company: &str, amount: f64) -> Result<f64> {
        require_nonnegative("withdrawal", amount)?;
        let balance = self.balance(company);
        let taken = amount.min(balance);
        if taken > 0.0 {
            self.balances.insert(company.to_owned(), balance - taken);
            self.entries.push(BankEntry {
                year,
                company: company.to_owned(),
                action: BankAction::Withdrawal,
                amount: taken,
            });
        }
        Ok(taken)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BankOutcome {
    pub deposited: f64,
    /// Allowance shortfall; never banked.
    pub violation: f64,
}

/// Banks a company's unused allowances at year close. A negative `unused`
/// is a shortfall and is reported as a violation instead. Magnitudes below
/// `tol` are treated as zero.
pub fn bank_surplus(
    bank: &mut BankLedger,
    year: u32,
    company: &str,
    unused: f64,
    tol: f64,
) -> Result<BankOutcome> {
    if !unused.is_finite() {
        return Err(Error::validation("unused", "unused must be finite"));
    }
    if unused.abs() <= tol {
        return Ok(BankOutcome::default());
    }
    if unused < 0.0 {
        return Ok(BankOutcome {
            deposited: 0.0,
            violation: -unused,
        });
    }
    bank.deposit(year, company, unused)?;
    Ok(BankOutcome {
        deposited: unused,
        violation: 0.0,
    })
}

/// Penalty for using more FLOPs than the firm's holdings cover.
pub fn assess_penalty(usage_flops: f64, flops_total: f64, penalty_rate: f64) -> f64 {
    penalty_rate * (usage_flops - flops_total).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreditSettlement {
    pub id: String,
    pub usage: f64,
    pub credits_minted: f64,
    pub credits_bought: f64,
    /// Net payment made; negative when the firm earns from selling credits.
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreditProgramOutcome {
    pub settlements: Vec<CreditSettlement>,
    pub total_minted: f64,
    pub total_bought: f64,
    pub total_usage: f64,
}

/// Baseline-and-credit settlement: firms below `baseline` are minted the
/// difference as credits, firms above must buy the excess. Credits are not
/// capped in aggregate.
pub fn credit_program_settle(
    usages: &[(String, f64)],
    baseline: f64,
    credit_price: f64,
) -> Result<CreditProgramOutcome> {
    require_positive("baseline", baseline)?;
    require_positive("credit_price", credit_price)?;
    let mut settlements = Vec::with_capacity(usages.len());
    for (id, usage) in usages {
        require_nonnegative("usage", *usage)?;
        let minted = (baseline - usage).max(0.0);
        let bought = (usage - baseline).max(0.0);
        settlements.push(CreditSettlement {
            id: id.clone(),
            usage: *usage,
            credits_minted: minted,
            credits_bought: bought,
            payment: credit_price * (bought - minted),
        });
    }
    Ok(CreditProgramOutcome {
        total_minted: settlements.iter().map(|s| s.credits_minted).sum(),
        total_bought: settlements.iter().map(|s| s.credits_bought).sum(),
        total_usage: settlements.iter().map(|s| s.usage).sum(),
        settlements,
    })
}
