use anyhow::{bail, Result};
use qpe_core::gluing::{non_symmetry_check, validate_config};
use qpe_core::{AtTime, Grid, SampledField};
use serde_json::json;

use crate::bundle::{effective_embedding, SolutionDoc, StateEntry, SOLUTION};
use crate::config::{ConstructConfig, State};
use crate::output::{Check, Output};

fn default_resolution(d: usize) -> usize {
    match d {
        2 => 512,
        3 => 64,
        _ => 48,
    }
}

pub fn run(cfg: &ConstructConfig, resolution: Option<usize>, out: &mut Output) -> Result<Vec<Check>> {
    let g = &cfg.gluing;
    let validation = validate_config(g);
    if !validation.is_valid() {
        bail!("invalid gluing config: {}", validation.message());
    }
    let embedding = effective_embedding(g, cfg.embedding.as_ref())?;
    let n = embedding.as_ref().map_or(0, |e| e.n);
    let states = if cfg.states.is_empty() { vec![State { theta: vec![0.0; n], t: 0.0 }] } else { cfg.states.clone() };
    for (k, s) in states.iter().enumerate() {
        if s.theta.len() != n {
            bail!("state {k} has {} angles, the embedding has N = {n}", s.theta.len());
        }
    }
    let res = resolution.or(cfg.resolution).unwrap_or(default_resolution(g.d));
    let mut doc = SolutionDoc { gluing: g.clone(), embedding, resolution: res, states: vec![] };
    let grid = Grid::cube(g.d, res);
    for (k, s) in states.iter().enumerate() {
        let sol = doc.solution(&s.theta)?;
        let u = SampledField::sample_vector(grid.clone(), &AtTime { field: &sol, t: s.t });
        let file = format!("states/u_{k}.qpf");
        out.field(&file, &u, s.t, json!({ "field": "velocity", "state": k, "theta": s.theta }))?;
        doc.states.push(StateEntry { theta: s.theta.clone(), t: s.t, file });
    }
    let first = &doc.states[0];
    let sol = doc.solution(&first.theta)?;
    let sym_res = cfg.symmetry_resolution.unwrap_or(if g.d <= 2 { 64 } else { 32 });
    let verdict = non_symmetry_check(&AtTime { field: &sol, t: first.t }, sym_res)?;
    out.json(SOLUTION, &doc)?;
    out.json("validation.json", &validation)?;
    out.json("nonsymmetry.json", &verdict)?;
    Ok(vec![Check::info("fourier_rank", verdict.rank as f64), Check::flag("non_symmetric", verdict.non_symmetric)])
}
