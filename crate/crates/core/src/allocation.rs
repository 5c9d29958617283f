//! Primary-market allowance distribution and the allowance → FLOP conversion.

use crate::model::{
    require_nonnegative, require_open_unit, require_positive, AllocationRule, BenchmarkRule,
    Company, Error, Result,
};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    pub company: String,
    pub allowances: f64,
    pub flops_allowed: f64,
}

/// Grandfathered allocation: historical usage scaled by `gamma`.
pub fn allocate_grandfathering(historical: f64, gamma: f64) -> Result<f64> {
    require_nonnegative("historical", historical)?;
    require_open_unit("gamma", gamma)?;
    Ok(gamma * historical)
}

/// Benchmarked allocation: output × benchmark × assistance factor.
pub fn allocate_benchmarking(output: f64, benchmark: f64, assistance: f64) -> Result<f64> {
    require_nonnegative("output", output)?;
    require_positive("benchmark", benchmark)?;
    require_positive("assistance", assistance)?;
    Ok(output * benchmark * assistance)
}

/// FLOPs a company may use with `allowances` at its own efficiency.
pub fn allowed_flops(allowances: f64, efficiency: f64) -> Result<f64> {
    require_nonnegative("allowances", allowances)?;
    require_positive("efficiency", efficiency)?;
    Ok(allowances / efficiency)
}

/// Benchmark efficiency for the given companies.
///
/// `TopDecile` takes the nearest-rank 10th percentile of the ascending
/// efficiencies, i.e. the element at 1-based rank `ceil(0.1 * n)`.
pub fn compute_benchmark(companies: &[Company], rule: &BenchmarkRule) -> Result<f64> {
    if companies.is_empty() {
        return Err(Error::validation(
            "companies",
            "benchmark requires at least one company",
        ));
    }
    for c in companies {
        require_positive("efficiency", c.efficiency)?;
    }
    let benchmark = match rule {
        BenchmarkRule::Fixed { benchmark } => require_positive("benchmark", *benchmark)?,
        BenchmarkRule::Pct90OfAverage => {
            let mean = companies.iter().map(|c| c.efficiency).sum::<f64>() / companies.len() as f64;
            0.9 * mean
        }
        BenchmarkRule::TopDecile => {
            let mut effs: Vec<f64> = companies.iter().map(|c| c.efficiency).collect();
            effs.sort_by(f64::total_cmp);
            let rank = ((0.1 * effs.len() as f64).ceil() as usize).max(1);
            effs[rank - 1]
        }
    };
    Ok(benchmark)
}

/// Allocation for one company in simulated `year` (1-based).
///
/// Grandfathering compounds the scaling factor once per year, so year 1
/// receives `gamma * H` and year `t` receives `gamma^t * H`.
pub fn allocate_company(
    company: &Company,
    rule: &AllocationRule,
    benchmark: Option<f64>,
    year: u32,
) -> Result<AllocationResult> {
    let allowances = match rule {
        AllocationRule::Grandfathering { gamma } => {
            let mut a = company.historical;
            for _ in 0..year.max(1) {
                a = allocate_grandfathering(a, *gamma)?;
            }
            a
        }
        AllocationRule::Benchmarking { .. } => {
            let b = benchmark.ok_or_else(|| {
                Error::validation("benchmark", "benchmarking requires a benchmark")
            })?;
            allocate_benchmarking(company.output, b, company.assistance)?
        }
    };
    Ok(AllocationResult {
        company: company.id.clone(),
        allowances,
        flops_allowed: allowed_flops(allowances, company.efficiency)?,
    })
}
