use std::path::Path;

use anyhow::{bail, Result};
use qpe_core::gluing::{orbit_density_diagnostic, BaseFlowSpec};
use qpe_core::spectral::SpectralWorkspace;
use qpe_core::verify::{
    compare_exact_vs_evolved, frequency_analysis, residual_from_samples, PeakReport, PlanarGlued, TIME_STEP,
};
use qpe_core::{qpf, AtTime, SampledField, TimeField};
use serde::Serialize;

use crate::bundle::Bundle;
use crate::config::{resolve, VerifyConfig};
use crate::output::{Check, Output};
use crate::probe;

#[derive(Debug, Serialize)]
pub struct SpectrumRow {
    frequency: f64,
    magnitude: f64,
    predicted: f64,
    combination: String,
    deviation: f64,
    dominant: bool,
    matched: bool,
}

pub fn spectrum_rows(report: &PeakReport) -> Vec<SpectrumRow> {
    report
        .peaks
        .iter()
        .map(|p| SpectrumRow {
            frequency: p.frequency,
            magnitude: p.magnitude,
            predicted: p.predicted,
            combination: p.combination.iter().map(i64::to_string).collect::<Vec<_>>().join(" "),
            deviation: p.deviation,
            dominant: p.dominant,
            matched: p.matched,
        })
        .collect()
}

/// `∂ₜu` on the snapshot grid by the five-point stencil.
fn time_derivative(sol: &(impl TimeField + ?Sized), grid: &qpe_core::Grid, t: f64) -> SampledField {
    let h = TIME_STEP;
    let mut acc = SampledField::zeros(grid.clone(), grid.dim());
    for (w, s) in [(1.0, t - 2.0 * h), (-8.0, t - h), (8.0, t + h), (-1.0, t + 2.0 * h)] {
        let f = SampledField::sample_vector(grid.clone(), &AtTime { field: sol, t: s });
        let c = w / (12.0 * h);
        acc.values.iter_mut().zip(&f.values).for_each(|(a, b)| *a += c * b);
    }
    acc
}

pub fn run(cfg: &VerifyConfig, base: &Path, seed: u64, out: &mut Output) -> Result<Vec<Check>> {
    let bundle = Bundle::load(&resolve(base, &cfg.bundle))?;
    let doc = &bundle.doc;
    let d = doc.gluing.d;
    let mut checks = vec![];

    let stale = bundle.manifest()?.mismatches(&bundle.dir);
    for s in &stale {
        eprintln!("bundle: {s}");
    }
    checks.push(Check::at_most("bundle_integrity", stale.len() as f64, 0.0));

    if let Some(rc) = &cfg.residual {
        for (k, state) in doc.states.iter().enumerate() {
            let (u, _) = qpf::read(&bundle.dir.join(&state.file))?;
            if u.grid.dim() != d || u.components != d {
                bail!("snapshot {} is not a {d}-dimensional velocity", state.file);
            }
            let sol = doc.solution(&state.theta)?;
            let ws = SpectralWorkspace::new(&u.grid)?;
            let dudt = time_derivative(&sol, &u.grid, state.t);
            let (div, mom) = residual_from_samples(&ws, &u, Some(&dudt), None)?;
            checks.push(Check::at_most(format!("residual_state{k}"), div.max(mom), rc.tolerance));
        }
    }

    let planar = d == 2 && matches!(doc.gluing.base_flow, BaseFlowSpec::ClosedForm { .. });
    if let (Some(sc), true) = (&cfg.solver, planar) {
        let theta = &doc.states[0].theta;
        let sol = doc.solution(theta)?;
        let exact = PlanarGlued::new(&sol)?;
        let rows = compare_exact_vs_evolved(&exact, sc.resolution, sc.dt, &[sc.horizon])?;
        out.csv("solver_errors.csv", &rows)?;
        checks.push(Check::at_most("solver_sup_velocity", rows[0].sup_velocity, sc.tolerance));
    }

    let nu = doc.frequency();
    if let Some(fc) = &cfg.frequency {
        let state = &doc.states[0];
        let sol = doc.solution(&state.theta)?;
        let len = (fc.horizon / fc.dt).round() as usize;
        let samples = probe::series(doc, &sol, &fc.probe, fc.dt, len, seed)?;
        let report = frequency_analysis(&samples, fc.dt, &nu, &fc.options)?;
        out.csv("spectrum.csv", &spectrum_rows(&report))?;
        let dominant = report.dominant().count();
        checks.push(Check::info("dominant_peaks", dominant as f64));
        checks.push(Check::flag("peaks_match_prediction", report.pass));
    }

    if let Some(oc) = &cfg.orbit {
        if (1..=3).contains(&nu.len()) {
            let coverage = orbit_density_diagnostic(&nu, &doc.states[0].theta, oc.horizon, oc.delta)?;
            checks.push(Check::at_least("orbit_coverage", coverage, oc.threshold));
        }
    }
    Ok(checks)
}
