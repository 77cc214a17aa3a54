use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};
use crate::par;
use crate::spectral::SpectralWorkspace;
use crate::{AtTime, TimeField, TimeScalar};

/// Step of the five-point time-derivative stencil.
pub const TIME_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub t: f64,
    pub max_div: f64,
    pub max_momentum: f64,
    /// True when the momentum residual was Leray-projected (no pressure).
    pub projected: bool,
}

/// Max-norm divergence and momentum residual of sampled fields.
///
/// The momentum residual is `∂ₜu + u·∇u + ∇p`; without a pressure it is
/// Leray-projected first. Returns `(max |div u|, max |momentum|)`.
pub fn residual_from_samples(
    ws: &SpectralWorkspace,
    u: &SampledField,
    dudt: Option<&SampledField>,
    pressure: Option<&SampledField>,
) -> Result<(f64, f64)> {
    let grid = ws.grid();
    let d = grid.dim();
    let len = grid.len();
    for f in [Some(u), dudt].into_iter().flatten() {
        if &f.grid != grid {
            return Err(Error::GridMismatch);
        }
        if f.components != d {
            return Err(Error::DimensionMismatch { expected: d, got: f.components });
        }
    }
    if let Some(p) = pressure {
        if &p.grid != grid {
            return Err(Error::GridMismatch);
        }
    }
    let pressure = pressure.map(|p| ws.forward_real(&p.values));
    let mut div = vec![0.0; len];
    let mut momentum: Vec<Vec<f64>> = Vec::new();
    let mut sumsq = vec![0.0; len];
    for a in 0..d {
        let s = ws.forward_real(u.component(a));
        let mut mom = match dudt {
            Some(f) => f.component(a).to_vec(),
            None => vec![0.0; len],
        };
        for j in 0..d {
            let dj = ws.inverse_real(ws.diff_spectrum(&s, j));
            let uj = u.component(j);
            par::for_each_chunk_mut(&mut mom, par::CHUNK, |c, chunk| {
                let lo = c * par::CHUNK;
                for (k, m) in chunk.iter_mut().enumerate() {
                    *m += uj[lo + k] * dj[lo + k];
                }
            });
            if j == a {
                div.iter_mut().zip(&dj).for_each(|(x, y)| *x += y);
            }
        }
        match &pressure {
            Some(ps) => {
                let dp = ws.inverse_real(ws.diff_spectrum(ps, a));
                mom.iter_mut().zip(&dp).for_each(|(x, y)| *x += y);
                sumsq.iter_mut().zip(&mom).for_each(|(q, m)| *q += m * m);
            }
            None => momentum.push(mom),
        }
    }
    if pressure.is_none() {
        let mut spectra: Vec<Vec<Complex64>> = momentum.iter().map(|m| ws.forward_real(m)).collect();
        drop(momentum);
        ws.leray_spectra(&mut spectra);
        for s in spectra {
            let m = ws.inverse_real(s);
            sumsq.iter_mut().zip(&m).for_each(|(q, v)| *q += v * v);
        }
    }
    let max_div = par::max_range(len, |i| div[i].abs());
    let max_momentum = par::max_range(len, |i| sumsq[i].sqrt());
    Ok((max_div, max_momentum))
}

/// Euler residual of a time-dependent field at time `t` on `grid`.
///
/// `∂ₜu` uses the fourth-order stencil with step [`TIME_STEP`]; spatial
/// derivatives are spectral.
pub fn euler_residual(
    u: &(impl TimeField + ?Sized),
    pressure: Option<&(dyn TimeScalar + '_)>,
    t: f64,
    grid: &Grid,
) -> Result<ResidualReport> {
    if u.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: u.dim() });
    }
    let ws = SpectralWorkspace::new(grid)?;
    let h = TIME_STEP;
    let sample = |s: f64| SampledField::sample_vector(grid.clone(), &AtTime { field: u, t: s });
    let mut dudt = sample(t - 2.0 * h);
    let weights = [(-1.0, t + 2.0 * h), (8.0, t + h), (-8.0, t - h)];
    dudt.values.iter_mut().for_each(|v| *v *= 1.0 / (12.0 * h));
    for (w, s) in weights {
        let f = sample(s);
        let c = w / (12.0 * h);
        dudt.values.iter_mut().zip(&f.values).for_each(|(a, b)| *a += c * b);
    }
    let u0 = sample(t);
    let p = pressure.map(|p| SampledField::from_fn(grid.clone(), |x| p.value_at(t, x)));
    let (max_div, max_momentum) = residual_from_samples(&ws, &u0, Some(&dudt), p.as_ref())?;
    Ok(ResidualReport { t, max_div, max_momentum, projected: p.is_none() })
}
