//! Scenario runner: parses flags and a TOML config, runs scenarios in a worker
//! pool and writes per-scenario artifacts plus a summary table.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::infogain::InfoGainCurves;
use crate::design::{parse_scenario, OedSolution};
use crate::error::{Error, Result};
use crate::estimate::run::Ensemble;
use crate::estimate::{run_scenario_in, ModelKind, RunContext, RunSettings, ScenarioOutcome, ScenarioReport};
use crate::fim::Criterion;

#[derive(Debug, Parser)]
#[command(name = "udeoed", about = "Optimal experimental design for universal differential equations")]
pub struct Args {
    /// TOML file with `scenarios = [...]` and a `[settings]` table
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Scenario label such as `w*-u0-svd2`; replaces the configured list
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub criterion: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenarios: Vec<String>,
    pub settings: RunSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub scenarios: Vec<String>,
    pub seed: u64,
    pub jobs: usize,
    pub settings: RunSettings,
}

impl RunManifest {
    pub fn from_args(args: &Args) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                toml::from_str::<ConfigFile>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        if !args.scenarios.is_empty() {
            cfg.scenarios = args.scenarios.clone();
        }
        if let Some(s) = args.seed {
            cfg.settings.seed = s;
        }
        if let Some(c) = &args.criterion {
            cfg.settings.criterion = c.parse::<Criterion>().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(m) = &args.model {
            cfg.settings.model = m.parse::<ModelKind>()?;
        }
        for s in &cfg.scenarios {
            parse_scenario(s).map_err(|e| Error::Config(format!("scenario '{s}': {e}")))?;
        }
        let jobs = args.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        Ok(RunManifest {
            config_path: args.config.clone(),
            out_dir: args.out.clone(),
            seed: cfg.settings.seed,
            jobs,
            scenarios: cfg.scenarios,
            settings: cfg.settings,
        })
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn write_design(path: &Path, sol: &OedSolution, ctx: &RunContext) -> Result<()> {
    let model = &ctx.setup.model;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t_start".to_string(), "t_end".to_string()];
    header.extend(model.observable_names.iter().map(|n| format!("w_{n}")));
    header.extend(model.control_names.iter().map(|n| format!("u_{n}")));
    w.write_record(&header)?;
    let grid = &sol.w_star.grid;
    for (j, u) in sol.u_star.per_interval(grid).iter().enumerate() {
        let mut row = vec![num(grid.nodes()[j]), num(grid.nodes()[j + 1])];
        row.extend((0..sol.w_star.w.nrows()).map(|i| num(sol.w_star.w[(i, j)])));
        row.extend(u.iter().map(|&v| num(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_infogain(path: &Path, curves: &InfoGainCurves, ctx: &RunContext) -> Result<()> {
    let names = &ctx.setup.model.observable_names;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().map(|n| format!("trace_pi_{n}")));
    header.extend(names.iter().map(|n| format!("d_gain_{n}")));
    for g in &curves.gamma {
        header.extend(names.iter().map(|n| format!("gamma_{}_{n}_ns{}", g.crit, g.n_s)));
    }
    w.write_record(&header)?;
    for (k, &t) in curves.t.iter().enumerate() {
        let mut row = vec![num(t)];
        row.extend(curves.trace_pi.iter().map(|c| num(c[k])));
        row.extend(curves.d_gain.iter().map(|c| num(c[k])));
        for g in &curves.gamma {
            row.extend(g.curves.iter().map(|c| num(c[k])));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_spectrum(path: &Path, sol: &OedSolution) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "eigenvalue"])?;
    for (k, l) in sol.spectrum.eigenvalues.iter().enumerate() {
        w.write_record([(k + 1).to_string(), num(*l)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_ensemble(path: &Path, e: &Ensemble, ctx: &RunContext) -> Result<()> {
    let names = &ctx.setup.model.state_names;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    for n in names {
        header.extend([format!("{n}_mean"), format!("{n}_q05"), format!("{n}_q95")]);
    }
    w.write_record(&header)?;
    for (k, &t) in e.t.iter().enumerate() {
        let mut row = vec![num(t)];
        for s in 0..names.len() {
            row.extend([num(e.mean[s][k]), num(e.q05[s][k]), num(e.q95[s][k])]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GammaEntry {
    n_s: usize,
    gamma: f64,
    scaled_mu: Vec<f64>,
}

#[derive(Serialize)]
struct Multipliers<'a> {
    mu: &'a [f64],
    criterion: String,
    gamma: Vec<GammaEntry>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(flatten)]
    report: &'a ScenarioReport,
    files: Vec<String>,
}

/// Writes the artifacts of one scenario into `dir`.
pub fn write_outputs(dir: &Path, outcome: &ScenarioOutcome, ctx: &RunContext) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    if let Some(sol) = &outcome.solution {
        write_design(&dir.join("design.csv"), sol, ctx)?;
        write_spectrum(&dir.join("spectrum.csv"), sol)?;
        files.extend(["design.csv".to_string(), "spectrum.csv".to_string()]);
        let gamma = outcome
            .curves
            .iter()
            .flat_map(|c| &c.gamma)
            .map(|g| GammaEntry { n_s: g.n_s, gamma: g.gamma, scaled_mu: sol.mu_star.iter().map(|m| g.gamma * m).collect() })
            .collect();
        let m = Multipliers { mu: &sol.mu_star, criterion: sol.crit.to_string(), gamma };
        fs::write(dir.join("multipliers.json"), serde_json::to_string_pretty(&m)?)?;
        files.push("multipliers.json".into());
    }
    if let Some(c) = &outcome.curves {
        write_infogain(&dir.join("infogain.csv"), c, ctx)?;
        files.push("infogain.csv".into());
    }
    if let Some(d) = &outcome.dataset {
        d.write_csv(&dir.join("dataset.csv"), &ctx.setup.model.observable_names)?;
        files.push("dataset.csv".into());
    }
    if let Some(e) = &outcome.ensemble {
        write_ensemble(&dir.join("ensemble.csv"), e, ctx)?;
        files.push("ensemble.csv".into());
    }
    let report = ReportFile { report: &outcome.report, files };
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

/// One row per scenario: the design objective, ANN errors and `p̂ ± std`.
pub fn write_summary(path: &Path, reports: &[ScenarioReport], free_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["scenario", "model", "criterion", "phi", "phi_eval", "delta_02", "delta_04"].iter().map(|s| s.to_string()).collect();
    for n in free_names {
        header.push(n.clone());
        header.push(format!("{n}_std"));
    }
    header.push("error".into());
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.scenario.clone(), r.model.clone(), r.criterion.clone(), opt(r.phi_star), opt(r.phi_eval), opt(r.delta_02), opt(r.delta_04)];
        for n in free_names {
            match r.estimates.iter().find(|e| &e.name == n) {
                Some(e) => row.extend([num(e.estimate), num(e.std)]),
                None => row.extend([String::new(), String::new()]),
            }
        }
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Exit status of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    TotalFailure,
}

pub fn run(manifest: &RunManifest) -> Result<(RunStatus, Vec<ScenarioReport>)> {
    fs::create_dir_all(&manifest.out_dir)?;
    let free_names = crate::estimate::ModelSetup::new(manifest.settings.model, manifest.settings.hidden.as_deref(), manifest.settings.concurrent)?
        .model
        .free_param_names();
    if manifest.scenarios.is_empty() {
        write_summary(&manifest.out_dir.join("summary.csv"), &[], &free_names)?;
        return Ok((RunStatus::Success, Vec::new()));
    }
    let mut settings = manifest.settings.clone();
    settings.seed = manifest.seed;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let reports: Vec<ScenarioReport> = pool.install(|| -> Result<Vec<ScenarioReport>> {
        let ctx = match RunContext::new(settings) {
            Ok(c) => c,
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => {
                // the shared prior failed: every scenario fails the same way
                return Ok(manifest
                    .scenarios
                    .iter()
                    .map(|s| ScenarioReport { scenario: s.clone(), error: Some(e.to_string()), ..Default::default() })
                    .collect());
            }
        };
        // duplicates share one run and one output directory
        let mut unique: Vec<&String> = Vec::new();
        for s in &manifest.scenarios {
            if !unique.contains(&s) {
                unique.push(s);
            }
        }
        let done: Vec<ScenarioReport> = unique
            .par_iter()
            .map(|&s| {
                let outcome = run_scenario_in(&ctx, s);
                let mut report = outcome.report.clone();
                if let Err(e) = write_outputs(&manifest.out_dir.join(s), &outcome, &ctx) {
                    report.error.get_or_insert_with(|| e.to_string());
                }
                report
            })
            .collect();
        Ok(manifest.scenarios.iter().map(|s| done[unique.iter().position(|u| *u == s).unwrap()].clone()).collect())
    })?;
    write_summary(&manifest.out_dir.join("summary.csv"), &reports, &free_names)?;
    let status = if reports.iter().all(|r| r.error.is_some()) { RunStatus::TotalFailure } else { RunStatus::Success };
    Ok((status, reports))
}

/// Entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let manifest = match RunManifest::from_args(&args) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match run(&manifest) {
        Ok((RunStatus::Success, reports)) => {
            for r in &reports {
                if let Some(e) = &r.error {
                    log::warn!("{}: {e}", r.scenario);
                }
            }
            0
        }
        Ok((RunStatus::TotalFailure, _)) => {
            eprintln!("error: every scenario failed; see summary.csv");
            1
        }
        Err(Error::Config(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
