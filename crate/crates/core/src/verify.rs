//! Randomised cross-check of the closed-form equilibria.
//!
//! For each sampled parameter tuple the closed forms are compared with the
//! grid oracle, checked against the KKT system and the fewer-FLOPs
//! inequality, and the binding-cap claim is probed with a slack scan. A
//! separate sample checks the analytic utility gradient against central
//! finite differences.

// negated comparisons make NaN count as a failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{
    kkt_residuals, solve_cap_and_trade, solve_no_governance, utility_cap_and_trade,
    utility_gradient, GridOracle, Objective,
};
use crate::model::{EquilibriumSolution, Error, Result};

/// The solver under test. [`Analytic`] is the real implementation; tests
/// substitute corrupted versions as negative controls.
pub trait ClosedForm {
    fn no_governance(&self, k: f64, a: f64) -> Result<EquilibriumSolution>;
    fn cap_and_trade(&self, k: f64, a: f64, b: f64, allowed: f64) -> Result<EquilibriumSolution>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Analytic;

impl ClosedForm for Analytic {
    fn no_governance(&self, k: f64, a: f64) -> Result<EquilibriumSolution> {
        solve_no_governance(k, a)
    }

    fn cap_and_trade(&self, k: f64, a: f64, b: f64, allowed: f64) -> Result<EquilibriumSolution> {
        solve_cap_and_trade(k, a, b, allowed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub gradient_points: usize,
    pub oracle_rel_tolerance: f64,
    pub kkt_tolerance: f64,
    pub fd_step: f64,
    pub fd_rel_tolerance: f64,
}

impl VerifyConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        VerifyConfig {
            samples,
            seed,
            gradient_points: 100,
            oracle_rel_tolerance: 1e-5,
            kkt_tolerance: 1e-9,
            fd_step: 1e-6,
            fd_rel_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleParams {
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub allowance: f64,
}

impl std::fmt::Display for SampleParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "k={} a={} b={} F={}",
            self.k, self.a, self.b, self.allowance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyFailure {
    pub check: String,
    pub params: SampleParams,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub worst_oracle_rel: f64,
    pub worst_kkt: f64,
    pub worst_fd_rel: f64,
    pub fewer_flops_violations: usize,
    pub slack_violations: usize,
    /// First failing check, in sampling order.
    pub failure: Option<VerifyFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..=hi.ln()).exp()
}

pub fn sample_params(rng: &mut impl Rng) -> SampleParams {
    SampleParams {
        k: rng.gen_range(0.25..=4.0),
        a: log_uniform(rng, 1e-4, 1.0),
        b: log_uniform(rng, 1e-4, 1.0),
        allowance: rng.gen_range(0.0..=20.0),
    }
}

pub fn verify_equilibria(config: &VerifyConfig, closed: &dyn ClosedForm) -> Result<VerifyReport> {
    if config.samples == 0 {
        return Err(Error::validation("sample", "sample size must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let oracle = GridOracle::default();
    let mut report = VerifyReport {
        samples: config.samples,
        worst_oracle_rel: 0.0,
        worst_kkt: 0.0,
        worst_fd_rel: 0.0,
        fewer_flops_violations: 0,
        slack_violations: 0,
        failure: None,
    };
    let fail = |report: &mut VerifyReport, check: &str, params: SampleParams, value: f64| {
        if report.failure.is_none() {
            report.failure = Some(VerifyFailure {
                check: check.to_owned(),
                params,
                value,
            });
        }
    };

    for _ in 0..config.samples {
        let p = sample_params(&mut rng);
        let base = closed.no_governance(p.k, p.a)?;
        let ct = closed.cap_and_trade(p.k, p.a, p.b, p.allowance)?;
        let base_oracle = oracle.solve(p.k, p.a, p.b, p.allowance, Objective::NoGovernance)?;
        let ct_oracle = oracle.solve(p.k, p.a, p.b, p.allowance, Objective::CapAndTrade)?;

        for (check, closed_x, oracle_x) in [
            ("oracle_no_governance", base.x_star, base_oracle.x_star),
            ("oracle_cap_and_trade", ct.x_star, ct_oracle.x_star),
        ] {
            let rel = (closed_x - oracle_x).abs() / closed_x.abs();
            report.worst_oracle_rel = report.worst_oracle_rel.max(rel);
            if !(rel < config.oracle_rel_tolerance) {
                fail(&mut report, check, p, rel);
            }
        }

        let kkt = kkt_residuals(&ct, p.k, p.a, p.b, p.allowance).max();
        report.worst_kkt = report.worst_kkt.max(kkt);
        if !(kkt < config.kkt_tolerance) {
            fail(&mut report, "kkt", p, kkt);
        }

        if !(ct.x_star < base.x_star) {
            report.fewer_flops_violations += 1;
            fail(&mut report, "fewer_flops", p, ct.x_star - base.x_star);
        }

        let scan = oracle.slack_scan(p.k, p.a, p.b, p.allowance, &ct_oracle)?;
        if scan.slack_beats_binding() {
            report.slack_violations += 1;
            fail(
                &mut report,
                "binding_cap",
                p,
                scan.best_slack_utility - scan.binding_utility,
            );
        }
    }

    for _ in 0..config.gradient_points {
        let p = sample_params(&mut rng);
        let x = rng.gen_range(0.1..=100.0);
        let y = rng.gen_range(-50.0..=50.0);
        let u = |x: f64, y: f64| utility_cap_and_trade(x, y, p.k, p.a, p.b);
        let h = config.fd_step;
        let fd_x = (u(x + h, y)? - u(x - h, y)?) / (2.0 * h);
        let fd_y = (u(x, y + h)? - u(x, y - h)?) / (2.0 * h);
        let (gx, gy) = utility_gradient(x, y, p.k, p.a, p.b)?;
        for (fd, g) in [(fd_x, gx), (fd_y, gy)] {
            // relative error with a floor so near-zero gradients do not
            // amplify rounding noise
            let rel = (fd - g).abs() / g.abs().max(1e-4);
            report.worst_fd_rel = report.worst_fd_rel.max(rel);
            if !(rel < config.fd_rel_tolerance) {
                fail(&mut report, "finite_difference", p, rel);
            }
        }
    }
    Ok(report)
}
