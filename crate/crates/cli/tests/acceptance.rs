//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails or runs over its time budget.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use captrade_cli::commands::{cmd_run, cmd_sweep, Figure, SweepOverrides};
use captrade_cli::scenario::load_scenario;
use captrade_core::equilibrium::{
    grid_oracle, kkt_residuals, solve_cap_and_trade, solve_no_governance, Objective,
};
use captrade_core::market::{clear_price, MarketAgent};
use captrade_core::simulation::run_horizon;
use captrade_core::verify::sample_params;
use captrade_core::PolicyMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

fn no_governance_closed_form() -> Outcome {
    let sol = solve_no_governance(1.0, 0.01).map_err(|e| e.to_string())?;
    ensure((sol.x_star - 10.0).abs() < 1e-9, || {
        format!("x*={}", sol.x_star)
    })?;
    let oracle =
        grid_oracle(1.0, 0.01, 0.01, 10.0, Objective::NoGovernance).map_err(|e| e.to_string())?;
    let rel = (oracle.x_star - sol.x_star).abs() / sol.x_star;
    ensure(rel < 1e-5, || format!("oracle rel={rel:e}"))?;
    Ok(format!("x*={} oracle_rel={rel:.2e}", sol.x_star))
}

fn cap_and_trade_closed_form() -> Outcome {
    let sol = solve_cap_and_trade(1.0, 0.01, 0.01, 10.0).map_err(|e| e.to_string())?;
    let root50 = 50f64.sqrt();
    ensure((sol.x_star - root50).abs() < 1e-9, || {
        format!("x*={}", sol.x_star)
    })?;
    ensure((sol.y_star - (10.0 - root50)).abs() < 1e-9, || {
        format!("y*={}", sol.y_star)
    })?;
    let kkt = kkt_residuals(&sol, 1.0, 0.01, 0.01, 10.0);
    ensure(kkt.is_valid(1e-9), || format!("kkt={kkt:?}"))?;
    Ok(format!(
        "x*={} y*={} max_kkt={:.2e}",
        sol.x_star,
        sol.y_star,
        kkt.max()
    ))
}

fn fewer_flops() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    for _ in 0..1000 {
        let p = sample_params(&mut rng);
        let base = solve_no_governance(p.k, p.a).map_err(|e| e.to_string())?;
        let ct = solve_cap_and_trade(p.k, p.a, p.b, p.allowance).map_err(|e| e.to_string())?;
        if ct.x_star >= base.x_star || ct.x_star.is_nan() {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok("1000 draws, 0 violations".into())
}

fn figure1() -> Outcome {
    let dir = tempdir()?;
    let mut detail = Vec::new();
    for fig in [Figure::Fig1a, Figure::Fig1b] {
        let out =
            cmd_sweep(fig, &SweepOverrides::default(), dir.path()).map_err(|e| e.to_string())?;
        ensure(out.config.grid_points == 50, || {
            "grid is not 50 points".into()
        })?;
        ensure(out.result.rows.iter().all(|r| r.x_ct < r.x_base), || {
            format!("{}: x_ct >= x_base on some row", fig.name())
        })?;
        ensure(out.path.exists(), || {
            format!("{} not written", out.path.display())
        })?;
        if fig == Figure::Fig1a {
            let r = out
                .result
                .rows
                .iter()
                .find(|r| r.axis_value == 0.01)
                .ok_or("no row at a=0.01")?;
            ensure(
                (r.x_base - 10.0).abs() < 1e-6 && (r.x_ct - 7.0710678).abs() < 1e-6,
                || format!("row at 0.01 = ({}, {})", r.x_base, r.x_ct),
            )?;
            detail.push(format!("fig1a@0.01=({:.7}, {:.7})", r.x_base, r.x_ct));
        }
        detail.push(format!("{} rows={}", fig.name(), out.result.rows.len()));
    }
    Ok(detail.join(" "))
}

/// Independent bisection on the utility gap along the allowance axis.
fn bisect_crossover(k: f64, a: f64, b: f64) -> Result<f64, String> {
    let base = solve_no_governance(k, a)
        .map_err(|e| e.to_string())?
        .utility;
    let gap = |f: f64| -> Result<f64, String> {
        Ok(solve_cap_and_trade(k, a, b, f)
            .map_err(|e| e.to_string())?
            .utility
            - base)
    };
    let (mut lo, mut hi) = (0.0, 100.0);
    ensure(gap(lo)? < 0.0 && gap(hi)? > 0.0, || "no sign change".into())?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn figure2() -> Outcome {
    let dir = tempdir()?;
    let a = cmd_sweep(Figure::Fig2a, &SweepOverrides::default(), dir.path())
        .map_err(|e| e.to_string())?;
    let f_hat = a.result.crossover.ok_or("no crossover")?;
    let bisected = bisect_crossover(1.0, 0.01, 0.01)?;
    ensure((f_hat - 8.2842712).abs() < 1e-4, || {
        format!("crossover={f_hat}")
    })?;
    ensure((bisected - f_hat).abs() < 1e-9, || {
        format!("bisection {bisected} disagrees with {f_hat}")
    })?;
    for r in &a.result.rows {
        if r.axis_value < f_hat {
            ensure(r.u_ct < r.u_base, || {
                format!("u_ct >= u_base at F={}", r.axis_value)
            })?;
        } else if r.axis_value > f_hat {
            ensure(r.u_ct > r.u_base, || {
                format!("u_ct <= u_base at F={}", r.axis_value)
            })?;
        }
    }
    let text = std::fs::read_to_string(&a.path).map_err(|e| e.to_string())?;
    ensure(text.contains("# crossover_axis_value=8.284271247"), || {
        "fig2a.csv lacks crossover comment".into()
    })?;

    let b = cmd_sweep(Figure::Fig2b, &SweepOverrides::default(), dir.path())
        .map_err(|e| e.to_string())?;
    let r = b
        .result
        .rows
        .iter()
        .find(|r| r.axis_value == 0.01)
        .ok_or("no row at a=0.01")?;
    ensure((r.u_ct - -0.1828427).abs() < 1e-7, || {
        format!("u_ct={}", r.u_ct)
    })?;
    ensure((r.u_base - -0.2).abs() < 1e-12, || {
        format!("u_base={}", r.u_base)
    })?;
    ensure(r.u_ct > r.u_base, || "u_ct <= u_base".into())?;
    Ok(format!(
        "F_hat={f_hat:.7} bisected={bisected:.7} fig2b@0.01 u_ct={:.7} u_base={}",
        r.u_ct, r.u_base
    ))
}

fn field(stdout: &str, key: &str) -> Result<String, String> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .map(str::to_owned)
        .ok_or_else(|| format!("missing {key} in output"))
}

fn oracle_equivalence() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_captrade"))
        .args(["verify", "--sample", "1000", "--seed", "42"])
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.code() == Some(0), || {
        format!(
            "exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        )
    })?;
    let oracle: f64 = field(&stdout, "worst_oracle_rel")?
        .parse()
        .map_err(|_| "bad number")?;
    let fd: f64 = field(&stdout, "worst_fd_rel")?
        .parse()
        .map_err(|_| "bad number")?;
    ensure(oracle < 1e-5, || format!("worst_oracle_rel={oracle:e}"))?;
    ensure(fd < 1e-4, || format!("worst_fd_rel={fd:e}"))?;

    // negative control: a broken solver must be rejected
    let bad = Command::new(env!("CARGO_BIN_EXE_captrade"))
        .args(["verify", "--sample", "5", "--inject-fault"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(bad.status.code() == Some(4), || {
        format!("fault injection exit {:?}", bad.status.code())
    })?;
    Ok(format!(
        "exit 0 worst_oracle_rel={oracle:.2e} worst_fd_rel={fd:.2e}"
    ))
}

fn market_clearing() -> Outcome {
    let agents = [
        MarketAgent::new("lean", 1.0, 0.01, 12.0),
        MarketAgent::new("hungry", 1.0, 0.01, 4.0),
    ];
    let price = clear_price(&agents, (1e-6, 1.0), 1e-12).map_err(|e| e.to_string())?;
    ensure((price - 0.005625).abs() < 1e-8, || format!("b*={price}"))?;

    let dir = tempdir()?;
    let run =
        cmd_run(&scenario("two_firm_clearing.json"), dir.path()).map_err(|e| e.to_string())?;
    let report = &run.run.reports[0];
    let p = report.clearing_price.ok_or("no clearing price")?;
    ensure((p - 0.005625).abs() < 1e-8, || format!("scenario b*={p}"))?;
    let ledger = &run.run.ledger;
    ensure(!ledger.entries.is_empty(), || "no trades".into())?;
    let total = ledger.signed_total(1);
    ensure(total == 0.0, || format!("ledger sums to {total}"))?;
    let sold = ledger.net_sold(1, "lean");
    let bought = -ledger.net_sold(1, "hungry");
    ensure(sold == bought && (sold - 4.0).abs() < 1e-6, || {
        format!("sold {sold} bought {bought}")
    })?;
    Ok(format!(
        "b*={price:.10} scenario b*={p:.10} traded={sold:.6}"
    ))
}

fn conservation() -> Outcome {
    let path = scenario("banking_5y_4firm.json");
    let loaded = load_scenario(&path).map_err(|e| e.to_string())?;
    ensure(
        loaded.scenario.policy.horizon == 5 && loaded.scenario.companies.len() == 4,
        || "scenario is not 5 years x 4 firms".into(),
    )?;
    let first = tempdir()?;
    let second = tempdir()?;
    let a = cmd_run(&path, first.path()).map_err(|e| e.to_string())?;
    cmd_run(&path, second.path()).map_err(|e| e.to_string())?;

    let usage = a.run.cumulative_usage();
    let allocation = a.run.cumulative_allocation();
    ensure(usage <= allocation, || {
        format!("usage {usage} > allocation {allocation}")
    })?;
    let banked: f64 = a.run.bank.balances().values().sum();
    ensure(banked > 0.0, || "banking never exercised".into())?;

    for name in ["years.csv", "trades.csv", "summary.csv"] {
        let x = std::fs::read(first.path().join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(second.path().join(name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!(
        "usage={usage:.6} allocation={allocation:.6} banked={banked:.6} csv identical"
    ))
}

fn credit_contrast() -> Outcome {
    let loaded = load_scenario(&scenario("credit_3firm.json")).map_err(|e| e.to_string())?;
    let credit = loaded.scenario;
    ensure(credit.companies.len() == 3, || {
        "scenario is not 3 firms".into()
    })?;
    ensure(
        matches!(credit.policy.mode, PolicyMode::CreditProgram { .. }),
        || "scenario is not a credit program".into(),
    )?;
    let mut capped = credit.clone();
    capped.policy.mode = PolicyMode::CapAndTrade;

    let credit_usage = run_horizon(&credit)
        .map_err(|e| e.to_string())?
        .cumulative_usage();
    let capped_run = run_horizon(&capped).map_err(|e| e.to_string())?;
    let capped_usage = capped_run.cumulative_usage();
    ensure(credit_usage > capped_usage, || {
        format!("credit {credit_usage} <= cap-and-trade {capped_usage}")
    })?;
    Ok(format!(
        "credit={credit_usage:.6} cap_and_trade={capped_usage:.6} cap={:.6}",
        capped_run.cumulative_allocation()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "no-governance closed form",
            Duration::from_secs(1),
            no_governance_closed_form,
        ),
        (
            "cap-and-trade closed form and KKT",
            Duration::from_secs(1),
            cap_and_trade_closed_form,
        ),
        (
            "cap-and-trade uses fewer FLOPs",
            Duration::from_secs(5),
            fewer_flops,
        ),
        ("usage sweeps over cost", Duration::from_secs(5), figure1),
        (
            "utility sweeps and crossover",
            Duration::from_secs(5),
            figure2,
        ),
        (
            "oracle equivalence via verify",
            Duration::from_secs(30),
            oracle_equivalence,
        ),
        (
            "two-firm market clearing",
            Duration::from_secs(1),
            market_clearing,
        ),
        (
            "five-year banking conservation",
            Duration::from_secs(5),
            conservation,
        ),
        (
            "credit program exceeds cap",
            Duration::from_secs(1),
            credit_contrast,
        ),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let line = match result {
            Ok(detail) if elapsed <= *budget => format!("PASS {}: {name}: {detail}", i + 1),
            Ok(detail) => format!("FAIL {}: {name}: over budget {budget:?}: {detail}", i + 1),
            Err(why) => format!("FAIL {}: {name}: {why}", i + 1),
        };
        if line.starts_with("FAIL") {
            failed += 1;
        }
        println!("{line} [{:.3}s]", elapsed.as_secs_f64());
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
