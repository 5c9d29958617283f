//! The `run`, `sweep` and `verify` commands.

use std::path::{Path, PathBuf};

use captrade_core::equilibrium::solve_no_governance;
use captrade_core::simulation::{
    anchored_grid, run_horizon, sweep_figure1, sweep_figure2, Figure1Price, Figure2Variant,
    HorizonRun, SweepResult, DEFAULT_ALLOWANCE_RANGE, DEFAULT_COST_RANGE, DEFAULT_GRID_POINTS,
};
use captrade_core::verify::{verify_equilibria, Analytic, ClosedForm, VerifyConfig, VerifyReport};
use captrade_core::{EquilibriumSolution, Error};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{config_hash, write_run, write_sweep, VERSION};
use crate::scenario::load_scenario;

/// Provenance record written next to the outputs of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub tool_version: String,
    pub config_hash: String,
    pub files: Vec<PathBuf>,
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(manifest).expect("manifest serialises");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))
}

#[derive(Debug)]
pub struct RunOutput {
    pub run: HorizonRun,
    pub manifest: RunManifest,
    pub defaults: Vec<String>,
}

pub fn cmd_run(scenario_path: &Path, out_dir: &Path) -> Result<RunOutput, CliError> {
    let loaded = load_scenario(scenario_path)?;
    let hash = config_hash(&loaded.scenario);
    let run = run_horizon(&loaded.scenario)?;
    ensure_dir(out_dir)?;
    let files = write_run(out_dir, &hash, &run)?;
    let manifest = RunManifest {
        command: "run".into(),
        scenario_path: Some(scenario_path.to_path_buf()),
        out_dir: out_dir.to_path_buf(),
        tool_version: VERSION.into(),
        config_hash: hash,
        files,
    };
    write_manifest(out_dir, &manifest)?;
    Ok(RunOutput {
        run,
        manifest,
        defaults: loaded.defaults,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Usage against cost at a fixed price.
    Fig1a,
    /// Usage against cost with price sqrt(a).
    Fig1b,
    /// Utility against allowed FLOPs.
    Fig2a,
    /// Utility against cost.
    Fig2b,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig1a, Figure::Fig1b, Figure::Fig2a, Figure::Fig2b];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1a => "fig1a",
            Figure::Fig1b => "fig1b",
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
        }
    }
}

/// Cost held fixed when allowed FLOPs vary.
pub const SWEEP_COST: f64 = 0.01;
/// Allowed FLOPs held fixed when cost varies.
pub const SWEEP_ALLOWANCE: f64 = 10.0;
pub const SWEEP_PRICE: f64 = 0.01;

/// Optional overrides for a sweep. Unset values take per-figure defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepOverrides {
    pub k: Option<f64>,
    pub b: Option<f64>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_points: Option<usize>,
}

/// Fully resolved sweep settings; this is what gets hashed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub figure: Figure,
    pub k: f64,
    /// `None` when the price is `sqrt(a)`.
    pub b: Option<f64>,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub anchors: Vec<f64>,
    pub cost: Option<f64>,
    pub allowance: Option<f64>,
}

impl SweepConfig {
    pub fn resolve(figure: Figure, o: &SweepOverrides) -> Self {
        let (range, anchors) = match figure {
            Figure::Fig2a => (DEFAULT_ALLOWANCE_RANGE, vec![SWEEP_ALLOWANCE]),
            _ => (DEFAULT_COST_RANGE, vec![SWEEP_COST]),
        };
        let b = match figure {
            Figure::Fig1b => None,
            _ => Some(o.b.unwrap_or(SWEEP_PRICE)),
        };
        SweepConfig {
            figure,
            k: o.k.unwrap_or(1.0),
            b,
            grid_min: o.grid_min.unwrap_or(range.0),
            grid_max: o.grid_max.unwrap_or(range.1),
            grid_points: o.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
            anchors,
            cost: (figure == Figure::Fig2a).then_some(SWEEP_COST),
            allowance: (figure != Figure::Fig2a).then_some(SWEEP_ALLOWANCE),
        }
    }

    pub fn run(&self) -> Result<SweepResult, Error> {
        let grid = anchored_grid(
            self.grid_min,
            self.grid_max,
            self.grid_points,
            &self.anchors,
        )?;
        let b = self.b.unwrap_or(f64::NAN);
        match self.figure {
            Figure::Fig1a => sweep_figure1(&grid, Figure1Price::Fixed(b), self.k, SWEEP_ALLOWANCE),
            Figure::Fig1b => sweep_figure1(&grid, Figure1Price::SqrtA, self.k, SWEEP_ALLOWANCE),
            Figure::Fig2a => sweep_figure2(
                Figure2Variant::VaryAllowance { cost: SWEEP_COST },
                &grid,
                self.k,
                b,
            ),
            Figure::Fig2b => sweep_figure2(
                Figure2Variant::VaryCost {
                    allowance: SWEEP_ALLOWANCE,
                },
                &grid,
                self.k,
                b,
            ),
        }
    }
}

#[derive(Debug)]
pub struct SweepOutput {
    pub config: SweepConfig,
    pub result: SweepResult,
    pub path: PathBuf,
    pub config_hash: String,
}

pub fn cmd_sweep(
    figure: Figure,
    overrides: &SweepOverrides,
    out_dir: &Path,
) -> Result<SweepOutput, CliError> {
    let config = SweepConfig::resolve(figure, overrides);
    let result = config.run()?;
    let hash = config_hash(&config);
    ensure_dir(out_dir)?;
    let path = out_dir.join(format!("{}.csv", figure.name()));
    write_sweep(&path, &hash, &result)?;
    Ok(SweepOutput {
        config,
        result,
        path,
        config_hash: hash,
    })
}

/// Deliberately wrong closed form used to confirm that verification can
/// fail. It drops the allowance price from the marginal cost.
#[derive(Debug, Clone, Copy, Default)]
pub struct FaultyAnalytic;

impl ClosedForm for FaultyAnalytic {
    fn no_governance(&self, k: f64, a: f64) -> captrade_core::Result<EquilibriumSolution> {
        solve_no_governance(k, a)
    }

    fn cap_and_trade(
        &self,
        k: f64,
        a: f64,
        b: f64,
        allowed: f64,
    ) -> captrade_core::Result<EquilibriumSolution> {
        let mut s = Analytic.cap_and_trade(k, a, b, allowed)?;
        s.x_star = solve_no_governance(k, a)?.x_star;
        s.y_star = allowed - s.x_star;
        Ok(s)
    }
}

/// Runs the randomised cross-check. Returns the report whether or not it
/// passed; see [`check_report`].
pub fn cmd_verify(samples: usize, seed: u64, inject_fault: bool) -> Result<VerifyReport, CliError> {
    let config = VerifyConfig::new(samples, seed);
    let report = if inject_fault {
        verify_equilibria(&config, &FaultyAnalytic)?
    } else {
        verify_equilibria(&config, &Analytic)?
    };
    Ok(report)
}

pub fn check_report(report: &VerifyReport) -> Result<(), CliError> {
    match &report.failure {
        None => Ok(()),
        Some(f) => Err(CliError::Verification(f.clone())),
    }
}

pub fn report_lines(report: &VerifyReport) -> Vec<String> {
    vec![
        format!("samples={}", report.samples),
        format!("worst_oracle_rel={:e}", report.worst_oracle_rel),
        format!("worst_kkt={:e}", report.worst_kkt),
        format!("worst_fd_rel={:e}", report.worst_fd_rel),
        format!("fewer_flops_violations={}", report.fewer_flops_violations),
        format!("binding_cap_violations={}", report.slack_violations),
        format!("status={}", if report.passed() { "pass" } else { "fail" }),
    ]
}
