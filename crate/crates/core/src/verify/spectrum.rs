use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::par;
use crate::TimeField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequencyOptions {
    /// Largest `|k|₁` among predicted combinations `k·ν`.
    pub max_order: u32,
    /// Peaks must exceed this multiple of the median magnitude.
    pub threshold_factor: f64,
    /// Peaks at least this fraction of the largest one are dominant.
    pub dominance: f64,
    /// Match tolerance in cycles per unit time; `1/T` when absent.
    pub tolerance: Option<f64>,
}

impl Default for FrequencyOptions {
    fn default() -> Self {
        Self { max_order: 3, threshold_factor: 10.0, dominance: 0.05, tolerance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Cycles per unit time.
    pub frequency: f64,
    pub magnitude: f64,
    pub predicted: f64,
    pub combination: Vec<i64>,
    pub deviation: f64,
    pub dominant: bool,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub duration: f64,
    pub tolerance: f64,
    pub peaks: Vec<Peak>,
    pub pass: bool,
}

impl PeakReport {
    pub fn dominant(&self) -> impl Iterator<Item = &Peak> {
        self.peaks.iter().filter(|p| p.dominant)
    }
}

/// Frequencies `|k·ν|/2π` for `|k|₁ ≤ max_order`, sorted, with one
/// combination each.
pub fn predicted_frequencies(nu: &[f64], max_order: u32) -> Vec<(f64, Vec<i64>)> {
    let n = nu.len();
    let r = max_order as i64;
    let mut out: Vec<(f64, Vec<i64>)> = vec![(0.0, vec![0; n])];
    let mut k = vec![-r; n];
    if n > 0 {
        loop {
            if k.iter().map(|v| v.abs()).sum::<i64>() <= r && k.iter().any(|&v| v != 0) {
                let f = k.iter().zip(nu).map(|(a, b)| *a as f64 * b).sum::<f64>().abs() / TAU;
                out.push((f, k.clone()));
            }
            let mut i = 0;
            while i < n {
                k[i] += 1;
                if k[i] <= r {
                    break;
                }
                k[i] = -r;
                i += 1;
            }
            if i == n {
                break;
            }
        }
    }
    out.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| {
            let l1 = |v: &Vec<i64>| v.iter().map(|x| x.abs()).sum::<i64>();
            l1(&a.1).cmp(&l1(&b.1)).then_with(|| b.1.cmp(&a.1))
        })
    });
    out.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    out
}

/// Hann-windowed spectrum of a uniformly sampled signal; peaks are matched
/// against `k·ν/2π`.
pub fn frequency_analysis(samples: &[f64], dt: f64, nu: &[f64], opts: &FrequencyOptions) -> Result<PeakReport> {
    let len = samples.len();
    let duration = len as f64 * dt;
    let predicted = predicted_frequencies(nu, opts.max_order);
    let gap = predicted.windows(2).map(|w| w[1].0 - w[0].0).fold(f64::INFINITY, f64::min);
    if len < 64 || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("signal too short: {len} samples, need at least 64")));
    }
    if duration * gap < 2.0 {
        return Err(Error::InvalidParameter(format!(
            "signal too short: duration {duration:.3} cannot separate frequencies {gap:.3e} apart"
        )));
    }
    let tolerance = opts.tolerance.unwrap_or(1.0 / duration);
    let mean = samples.iter().sum::<f64>() / len as f64;
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let padded = (4 * len).next_power_of_two();
    let mut buf: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 * (1.0 - (TAU * i as f64 / len as f64).cos());
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    buf.resize(padded, Complex64::default());
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let half = padded / 2;
    let mag: Vec<f64> = buf[..=half].iter().map(|z| z.norm()).collect();
    let mut sorted: Vec<f64> = mag[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let floor = (opts.threshold_factor * median).max(1e-9 * scale * 0.5 * len as f64);
    let df = 1.0 / (padded as f64 * dt);
    let mut peaks = vec![];
    for j in 0..=half {
        let left = if j == 0 { mag[1] } else { mag[j - 1] };
        let right = if j == half { mag[half - 1] } else { mag[j + 1] };
        if mag[j] <= floor || mag[j] <= left || mag[j] < right {
            continue;
        }
        // parabolic refinement of the peak location
        let denom = left - 2.0 * mag[j] + right;
        let shift = if j > 0 && j < half && denom != 0.0 { 0.5 * (left - right) / denom } else { 0.0 };
        let frequency = ((j as f64 + shift) * df).abs();
        let (predicted, combination) = predicted
            .iter()
            .min_by(|a, b| (a.0 - frequency).abs().total_cmp(&(b.0 - frequency).abs()))
            .cloned()
            .expect("zero frequency is always predicted");
        let deviation = (predicted - frequency).abs();
        peaks.push(Peak {
            frequency,
            magnitude: mag[j],
            predicted,
            combination,
            deviation,
            dominant: false,
            matched: deviation <= tolerance,
        });
    }
    let top = peaks.iter().map(|p| p.magnitude).fold(0.0, f64::max);
    for p in &mut peaks {
        p.dominant = p.magnitude >= opts.dominance * top;
    }
    let pass = peaks.iter().filter(|p| p.dominant).all(|p| p.matched);
    Ok(PeakReport { duration, tolerance, peaks, pass })
}

/// Observable `Re ⨍ u_c(t, x) e^{-ik·x} dx` by grid quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeProbe {
    pub k: Vec<i64>,
    pub component: usize,
    pub resolution: usize,
}

impl ModeProbe {
    pub fn observe(&self, field: &(impl TimeField + ?Sized), t: f64) -> f64 {
        let d = field.dim();
        let grid = Grid::cube(d, self.resolution);
        let n = grid.len();
        let partial = par::map_range(n.div_ceil(par::CHUNK), |c| {
            let mut x = vec![0.0; d];
            let mut u = vec![0.0; d];
            let lo = c * par::CHUNK;
            let mut acc = 0.0;
            for i in lo..(lo + par::CHUNK).min(n) {
                grid.point(i, &mut x);
                field.eval_at(t, &x, &mut u);
                let phase: f64 = self.k.iter().zip(&x).map(|(k, x)| *k as f64 * x).sum();
                acc += u[self.component] * phase.cos();
            }
            acc
        });
        partial.into_iter().sum::<f64>() / n as f64
    }

    pub fn series(&self, field: &(impl TimeField + ?Sized), dt: f64, len: usize) -> Vec<f64> {
        (0..len).map(|i| self.observe(field, i as f64 * dt)).collect()
    }
}

/// Observable `u(t, x*)·e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProbe {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
}

impl PointProbe {
    pub fn observe(&self, field: &(impl TimeField + ?Sized), t: f64) -> f64 {
        let mut u = vec![0.0; field.dim()];
        field.eval_at(t, &self.x, &mut u);
        u.iter().zip(&self.e).map(|(a, b)| a * b).sum()
    }

    pub fn series(&self, field: &(impl TimeField + ?Sized), dt: f64, len: usize) -> Vec<f64> {
        par::map_range(len, |i| self.observe(field, i as f64 * dt))
    }
}
