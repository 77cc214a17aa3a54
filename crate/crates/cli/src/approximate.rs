use std::path::Path;

use anyhow::{bail, Result};
use qpe_core::density::{
    build_locally_radial_on, measured_error, pack_balls, BallPacking, PairingRow, StreamFunction, TestFunction,
    TheoremFamily, VerticalLines,
};
use qpe_core::field::{lq_error, weakstar_pairing};
use qpe_core::{qpf, Grid, SampledField};
use serde::Serialize;
use serde_json::json;

use crate::config::{resolve, ApproximateConfig, Psi0};
use crate::output::{Check, Output};

#[derive(Debug, Serialize)]
struct ConvergenceRow {
    n: usize,
    balls: usize,
    max_radius: f64,
    uncovered_area: f64,
    error: f64,
    certified_bound: Option<f64>,
}

#[derive(Serialize)]
struct PackingDoc<'a> {
    n: usize,
    margin: u64,
    lines: &'a [f64],
    /// `[center_x, center_y, radius]` per disk.
    balls: Vec<[f64; 3]>,
    strips: &'a [Vec<usize>],
}

impl<'a> PackingDoc<'a> {
    fn new(p: &'a BallPacking) -> Self {
        Self {
            n: p.n,
            margin: p.margin,
            lines: p.lines.abscissae(),
            balls: p.balls.iter().map(|b| [b.center[0], b.center[1], b.radius]).collect(),
            strips: &p.strips,
        }
    }
}

fn stream_function(psi0: &Psi0, base: &Path) -> Result<StreamFunction> {
    match psi0 {
        Psi0::Builtin(id) => Ok(StreamFunction::builtin(id)?),
        Psi0::File { file } => {
            let path = resolve(base, file);
            let (field, _) = qpf::read(&path)?;
            if field.grid.dim() != 2 || field.components != 1 {
                bail!("{} must hold a scalar field on the 2-torus", path.display());
            }
            Ok(StreamFunction::from_sampled(path.display().to_string(), field)?)
        }
    }
}

pub fn run(cfg: &ApproximateConfig, base: &Path, resolution: Option<usize>, out: &mut Output) -> Result<Vec<Check>> {
    let psi = stream_function(&cfg.psi0, base)?;
    let q = cfg.q.value();
    if !(q >= 1.0) {
        bail!("q must be at least 1, got {q}");
    }
    if cfg.ns.is_empty() || cfg.ns.contains(&0) {
        bail!("ns must be a nonempty list of positive stages");
    }
    let lines = VerticalLines::equispaced(cfg.lines)?;
    let nu = cfg.nu.clone().unwrap_or_else(|| vec![1.0; cfg.lines]);
    if nu.len() != cfg.lines {
        bail!("nu has {} entries for N = {} lines", nu.len(), cfg.lines);
    }
    let tests: Vec<TestFunction> = if q.is_finite() {
        vec![]
    } else {
        cfg.tests.iter().map(|id| TestFunction::builtin(id)).collect::<Result<_, _>>()?
    };
    let res = resolution.unwrap_or(cfg.resolution);
    let grid = Grid::cube(2, res);
    let psi_sampled = psi.sample(res);
    if cfg.samples {
        out.field("psi0.qpf", &psi_sampled, 0.0, json!({ "field": "psi0", "name": psi.name }))?;
    }
    let mut rows = vec![];
    let mut pairings = vec![];
    let mut checks = vec![];
    for &n in &cfg.ns {
        let packing = pack_balls(n, &lines)?;
        out.json(&format!("n{n}/packing.json"), &PackingDoc::new(&packing))?;
        let (radial, report) = build_locally_radial_on(&psi, packing, q)?;
        let family = TheoremFamily::from_parts(radial, report, nu.clone(), None)?;
        let phi = &family.radial;
        let error = if q.is_finite() {
            measured_error(phi, &psi, res, q)?
        } else {
            lq_error(&phi.sample(res), &psi_sampled, q)?
        };
        let bound = family.report.certified_bound;
        if let Some(b) = bound {
            checks.push(Check::at_most(format!("error_n{n}"), error, b));
        } else {
            checks.push(Check::info(format!("error_n{n}"), error));
        }
        out.json(
            &format!("n{n}/family.json"),
            &json!({
                "n": n,
                "c": family.c,
                "smoothing": family.report.smoothing,
                "margin": family.report.margin,
                "speeds": family.speeds,
                "f_norm": family.f_norm,
                "report": family.report,
            }),
        )?;
        if cfg.samples {
            out.field(&format!("n{n}/phi.qpf"), &phi.sample(res), 0.0, json!({ "field": "phi", "n": n }))?;
        }
        for g in &tests {
            let gs = SampledField::from_fn(grid.clone(), |x| g.eval(x));
            let a = phi.pairing(g);
            let b = weakstar_pairing(&psi_sampled, &gs)?;
            pairings.push(PairingRow {
                n,
                test: g.name.clone(),
                pairing_phi: a,
                pairing_psi0: b,
                difference: a - b,
                uncovered_area: family.report.uncovered_area,
                smoothing_bound: family.report.smoothing_bound,
            });
        }
        rows.push(ConvergenceRow {
            n,
            balls: family.report.balls,
            max_radius: family.report.max_radius,
            uncovered_area: family.report.uncovered_area,
            error,
            certified_bound: bound,
        });
    }
    out.csv("convergence.csv", &rows)?;
    if !pairings.is_empty() {
        out.csv("pairings.csv", &pairings)?;
    }
    Ok(checks)
}
