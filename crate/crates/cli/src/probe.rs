//! Time series of a bundle solution through a probe.

use anyhow::{bail, Result};
use qpe_core::gluing::GluedSolution;
use qpe_core::verify::{ModeProbe, PointProbe};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use crate::bundle::SolutionDoc;
use crate::config::Probe;

/// Samples `len` values at spacing `dt`. A point probe without a position
/// is placed uniformly inside the first tube using `seed`.
pub fn series(
    doc: &SolutionDoc,
    sol: &GluedSolution,
    probe: &Probe,
    dt: f64,
    len: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let g = &doc.gluing;
    let d = g.d;
    match probe {
        Probe::Mode { k, component, resolution } => {
            let k = match k {
                Some(k) if k.len() == d => k.clone(),
                Some(k) => bail!("probe wavevector has {} entries, expected {d}", k.len()),
                None => (0..d).map(|a| i64::from(a == g.m)).collect(),
            };
            if *component >= d {
                bail!("probe component {component} out of range for d = {d}");
            }
            let resolution = resolution.unwrap_or(if d <= 2 { 64 } else { 16 });
            Ok(ModeProbe { k, component: *component, resolution }.series(sol, dt, len))
        }
        Probe::Point { x, e } => {
            let x = match x {
                Some(x) if x.len() == d => x.clone(),
                Some(x) => bail!("probe point has {} entries, expected {d}", x.len()),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let center = g.centers.first().cloned().unwrap_or_default();
                    let half = 0.5 * g.eps / (g.m.max(1) as f64).sqrt();
                    (0..d)
                        .map(|a| if a < g.m { center[a] + rng.gen_range(-half..half) } else { rng.gen_range(0.0..TAU) })
                        .collect()
                }
            };
            let e = match e {
                Some(e) if e.len() == d => e.clone(),
                Some(e) => bail!("probe direction has {} entries, expected {d}", e.len()),
                None => (0..d).map(|a| f64::from(u8::from(a == 0))).collect(),
            };
            Ok(PointProbe { x, e }.series(sol, dt, len))
        }
    }
}
