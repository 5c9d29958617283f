//! Deterministic simulator for a cap-and-trade scheme on AI inference compute.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the validated domain types shared by everything else.
//! * [`allocation`] distributes free allowances (grandfathering, benchmarking)
//!   and converts them into permitted FLOPs.
//! * [`equilibrium`] solves a single firm's utility maximisation in closed
//!   form, checks KKT conditions and provides a brute-force grid oracle.
//! * [`market`] clears the secondary allowance market, keeps the trade and
//!   bank ledgers, and settles penalties and the credit-program contrast.
//! * [`simulation`] runs the yearly compliance cycle over a horizon and
//!   produces the figure sweeps.
//! * [`verify`] samples random parameters and cross-checks the closed forms
//!   against the oracle.
//!
//! FLOP quantities are dimensionless normalised units; equilibria land in
//! the 1–30 range for the default parameters.

pub mod allocation;
pub mod equilibrium;
pub mod market;
pub mod model;
pub mod simulation;
pub mod verify;

mod grid;

pub use grid::log_grid;
pub use model::{
    validate_company, validate_policy, AllocationRule, AllowanceAccount, BenchmarkRule, Company,
    CompanyYear, EquilibriumSolution, Error, PolicyConfig, PolicyMode, PriceMode, Result,
    SolveMethod, TradeEntry, TradeLedger, YearReport, DEFAULT_TOLERANCE,
};
