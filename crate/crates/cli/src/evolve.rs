use std::path::Path;

use anyhow::{bail, Result};
use qpe_core::verify::{random_vorticity, solve_euler_2d, PlanarExact, PlanarGlued, SolverOptions};
use qpe_core::{qpf, Grid, SampledField};
use serde::Serialize;
use serde_json::json;

use crate::bundle::Bundle;
use crate::config::{check_positive, resolve, EvolveConfig, Initial};
use crate::output::{Check, Output};

#[derive(Debug, Serialize)]
struct Row {
    t: f64,
    energy: f64,
    enstrophy: f64,
}

/// Initial vorticity and the mean velocity it comes with.
fn initial(init: &Initial, base: &Path, resolution: Option<usize>) -> Result<(SampledField, [f64; 2])> {
    match init {
        Initial::Random { resolution: r, seed, kmax } => {
            Ok((random_vorticity(resolution.unwrap_or(*r), *seed, *kmax)?, [0.0; 2]))
        }
        Initial::File { path } => {
            let path = resolve(base, path);
            let (w, _) = qpf::read(&path)?;
            if w.grid.dim() != 2 || w.components != 1 {
                bail!("{} must hold a scalar field on the 2-torus", path.display());
            }
            Ok((w, [0.0; 2]))
        }
        Initial::Bundle { path, state, resolution: r } => {
            let bundle = Bundle::load(&resolve(base, path))?;
            let entry = bundle.state(*state)?;
            let sol = bundle.doc.solution(&entry.theta)?;
            let exact = PlanarGlued::new(&sol)?;
            let grid = Grid::cube(2, resolution.unwrap_or(*r));
            let mut w = SampledField::from_fn(grid, |x| exact.vorticity(entry.t, x));
            let m = w.mean()[0];
            w.values.iter_mut().for_each(|v| *v -= m);
            Ok((w, exact.mean_velocity()))
        }
    }
}

pub fn run(cfg: &EvolveConfig, base: &Path, resolution: Option<usize>, out: &mut Output) -> Result<Vec<Check>> {
    check_positive("dt", cfg.dt)?;
    check_positive("horizon", cfg.horizon)?;
    let (omega, mean) = initial(&cfg.initial, base, resolution)?;
    let mut opts = SolverOptions::new(cfg.dt, cfg.horizon);
    if let Some(s) = &cfg.snapshots {
        opts.snapshots = s.clone();
    }
    opts.mean_velocity = cfg.mean_velocity.unwrap_or(mean);
    let traj = solve_euler_2d(&omega, &opts)?;
    let mut rows = vec![];
    for (k, s) in traj.states.iter().enumerate() {
        out.field(&format!("omega_{k}.qpf"), &s.omega, s.t, json!({ "field": "vorticity", "snapshot": k }))?;
        rows.push(Row { t: s.t, energy: s.energy, enstrophy: s.enstrophy });
    }
    out.csv("trajectory.csv", &rows)?;
    let first = &rows[0];
    let drift = |f: fn(&Row) -> f64| {
        let f0 = f(first);
        rows.iter().map(|r| if f0 == 0.0 { f(r).abs() } else { ((f(r) - f0) / f0).abs() }).fold(0.0, f64::max)
    };
    let (de, dz) = (drift(|r| r.energy), drift(|r| r.enstrophy));
    let mut checks = vec![Check::info("cfl", traj.cfl), Check::info("steps", traj.steps as f64)];
    match cfg.drift_tolerance {
        Some(tol) => {
            checks.push(Check::at_most("energy_drift", de, tol));
            checks.push(Check::at_most("enstrophy_drift", dz, tol));
        }
        None => {
            checks.push(Check::info("energy_drift", de));
            checks.push(Check::info("enstrophy_drift", dz));
        }
    }
    Ok(checks)
}
