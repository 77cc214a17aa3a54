use std::path::Path;

use anyhow::{bail, Context, Result};
use qpe_core::verify::frequency_analysis;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::config::{check_positive, resolve, AnalyzeConfig, Signal};
use crate::output::{Check, Output};
use crate::probe;
use crate::verify::spectrum_rows;

#[derive(Debug, Serialize)]
struct Sample {
    t: f64,
    value: f64,
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == column)
        .with_context(|| format!("{} has no column {column:?}", path.display()))?;
    let mut v = vec![];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("");
        v.push(cell.trim().parse().with_context(|| format!("row {}: {cell:?} is not a number", line + 1))?);
    }
    Ok(v)
}

pub fn run(cfg: &AnalyzeConfig, base: &Path, seed: u64, out: &mut Output) -> Result<Vec<Check>> {
    let seed = cfg.seed.unwrap_or(seed);
    let (samples, dt, bundle_nu) = match &cfg.signal {
        Signal::Bundle { path, state, probe: p, dt, horizon } => {
            check_positive("dt", *dt)?;
            check_positive("horizon", *horizon)?;
            let bundle = Bundle::load(&resolve(base, path))?;
            let entry = bundle.state(*state)?;
            let sol = bundle.doc.solution(&entry.theta)?;
            let len = (horizon / dt).round() as usize;
            (probe::series(&bundle.doc, &sol, p, *dt, len, seed)?, *dt, Some(bundle.doc.frequency()))
        }
        Signal::Csv { path, column, dt } => {
            check_positive("dt", *dt)?;
            (read_column(&resolve(base, path), column)?, *dt, None)
        }
    };
    let nu = match (&cfg.nu, bundle_nu) {
        (Some(nu), _) => nu.clone(),
        (None, Some(nu)) => nu,
        (None, None) => bail!("nu is required for a CSV signal"),
    };
    let report = frequency_analysis(&samples, dt, &nu, &cfg.options)?;
    let series: Vec<Sample> = samples.iter().enumerate().map(|(i, &v)| Sample { t: i as f64 * dt, value: v }).collect();
    out.csv("signal.csv", &series)?;
    out.csv("spectrum.csv", &spectrum_rows(&report))?;
    out.json("peaks.json", &report)?;
    Ok(vec![
        Check::info("dominant_peaks", report.dominant().count() as f64),
        Check::flag("peaks_match_prediction", report.pass),
    ])
}
