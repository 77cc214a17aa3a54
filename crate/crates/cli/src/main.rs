//! `qpe`: construct, approximate, verify, evolve and analyze runs.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 bad input or config.

mod analyze;
mod approximate;
mod bundle;
mod config;
mod construct;
mod evolve;
mod output;
mod probe;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{load, AnalyzeConfig, ApproximateConfig, ConstructConfig, EvolveConfig, VerifyConfig};
use output::{Manifest, Output, Report};

#[derive(Parser)]
#[command(name = "qpe", version, about = "Quasi-periodic Euler flows on tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a glued solution bundle with snapshots and a non-symmetry verdict.
    Construct(Common),
    /// Locally radial approximations of a planar stream function.
    Approximate(Common),
    /// Residual, solver, spectrum and orbit checks on a bundle.
    Verify(Common),
    /// Run the planar pseudo-spectral solver.
    Evolve(Common),
    /// Frequency analysis of a probe signal.
    Analyze(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "qpe-out")]
    out: PathBuf,
    /// Overrides the main grid resolution of the command.
    #[arg(long)]
    resolution: Option<usize>,
    /// Seed for randomized probe placement.
    #[arg(long)]
    seed: Option<u64>,
    /// Re-run and compare output hashes with the manifest in --out.
    #[arg(long)]
    check: bool,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Construct(c) => ("construct", c),
            Command::Approximate(c) => ("approximate", c),
            Command::Verify(c) => ("verify", c),
            Command::Evolve(c) => ("evolve", c),
            Command::Analyze(c) => ("analyze", c),
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("QPE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("QPE_THREADS={v:?} is not a thread count"))?;
    if n == 0 {
        anyhow::bail!("QPE_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

/// Runs one command into `dir`; returns whether every check passed.
fn execute(name: &str, common: &Common, dir: &Path) -> Result<bool> {
    let mut out = Output::create(dir)?;
    let seed = common.seed.unwrap_or(0);
    let res = common.resolution;
    let path = &common.config;
    let (checks, raw) = match name {
        "construct" => {
            let l = load::<ConstructConfig>(path)?;
            (construct::run(&l.config, res, &mut out)?, l.raw)
        }
        "approximate" => {
            let l = load::<ApproximateConfig>(path)?;
            (approximate::run(&l.config, &l.base, res, &mut out)?, l.raw)
        }
        "verify" => {
            let l = load::<VerifyConfig>(path)?;
            (verify::run(&l.config, &l.base, seed, &mut out)?, l.raw)
        }
        "evolve" => {
            let l = load::<EvolveConfig>(path)?;
            (evolve::run(&l.config, &l.base, res, &mut out)?, l.raw)
        }
        "analyze" => {
            let l = load::<AnalyzeConfig>(path)?;
            (analyze::run(&l.config, &l.base, seed, &mut out)?, l.raw)
        }
        other => unreachable!("unknown command {other}"),
    };
    let report = Report::new(name, checks);
    out.json("report.json", &report)?;
    let echo = json!({ "file": raw, "resolution": common.resolution, "seed": common.seed });
    out.finish(name, echo)?;
    for c in &report.checks {
        let threshold = c.threshold.map_or_else(|| "-".to_string(), |t| format!("{t:e}"));
        println!("{} {} = {:e} (threshold {threshold})", if c.pass { "ok  " } else { "FAIL" }, c.check, c.value);
    }
    Ok(report.pass)
}

/// Re-runs into a scratch directory and compares with the recorded manifest.
fn check(name: &str, common: &Common) -> Result<bool> {
    let expected = Manifest::load(&common.out)?;
    let scratch = common.out.join(".check");
    if scratch.exists() {
        fs::remove_dir_all(&scratch)?;
    }
    execute(name, common, &scratch)?;
    let actual = Manifest::load(&scratch)?;
    fs::remove_dir_all(&scratch)?;
    let mut diffs = vec![];
    if expected.command != actual.command || expected.config != actual.config {
        diffs.push("command or config differs".to_string());
    }
    for (file, e) in &expected.files {
        match actual.files.get(file) {
            Some(a) if a == e => {}
            Some(_) => diffs.push(format!("{file}: hash differs")),
            None => diffs.push(format!("{file}: not produced")),
        }
    }
    for file in actual.files.keys().filter(|f| !expected.files.contains_key(*f)) {
        diffs.push(format!("{file}: not in manifest"));
    }
    diffs.extend(expected.mismatches(&common.out));
    for d in &diffs {
        println!("mismatch {d}");
    }
    if diffs.is_empty() {
        println!("check: {} files reproduce", expected.files.len());
    }
    Ok(diffs.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.command.parts();
    let result = configure_threads().and_then(|()| {
        if common.check {
            check(name, common)
        } else {
            execute(name, common, &common.out)
        }
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
