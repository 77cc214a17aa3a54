//! Spectral differentiation on periodic boxes.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};
use crate::par::{self, SyncPtr};

/// Columns gathered per batch on strided axes.
const TILE: usize = 16;

pub struct SpectralWorkspace {
    grid: Grid,
    strides: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// integer frequencies per axis
    kint: Vec<Vec<i64>>,
    /// scaled wavenumbers for first derivatives (Nyquist zeroed)
    kd: Vec<Vec<f64>>,
    /// scaled wavenumbers squared, Nyquist kept
    k2: Vec<Vec<f64>>,
    keep: Vec<Vec<bool>>,
}

impl SpectralWorkspace {
    pub fn new(grid: &Grid) -> Result<Self> {
        grid.validate()?;
        if let Some(&n) = grid.shape.iter().find(|&&n| n < 16) {
            return Err(Error::Resolution(format!("spectral grids need at least 16 points per axis, got {n}")));
        }
        let d = grid.dim();
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * grid.shape[a + 1];
        }
        let mut planner = FftPlanner::new();
        let forward = grid.shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let mut kint = Vec::new();
        let mut kd = Vec::new();
        let mut k2 = Vec::new();
        let mut keep = Vec::new();
        for a in 0..d {
            let n = grid.shape[a];
            let scale = TAU / grid.extent[a];
            let ki: Vec<i64> = (0..n).map(|j| if j <= n / 2 { j as i64 } else { j as i64 - n as i64 }).collect();
            kd.push(
                ki.iter()
                    .enumerate()
                    .map(|(j, &k)| if n.is_multiple_of(2) && j == n / 2 { 0.0 } else { k as f64 * scale })
                    .collect(),
            );
            k2.push(ki.iter().map(|&k| (k as f64 * scale).powi(2)).collect());
            keep.push(ki.iter().map(|&k| 3 * k.unsigned_abs() as usize <= n).collect());
            kint.push(ki);
        }
        Ok(Self { grid: grid.clone(), strides, forward, inverse, kint, kd, k2, keep })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Index along `axis` of flat index `i`.
    #[inline]
    pub fn axis_index(&self, i: usize, axis: usize) -> usize {
        (i / self.strides[axis]) % self.grid.shape[axis]
    }

    /// Integer frequency along `axis` of flat mode `i`.
    #[inline]
    pub fn int_freq(&self, i: usize, axis: usize) -> i64 {
        self.kint[axis][self.axis_index(i, axis)]
    }

    /// First-derivative wavenumber along `axis` of flat mode `i`.
    #[inline]
    pub fn kd(&self, i: usize, axis: usize) -> f64 {
        self.kd[axis][self.axis_index(i, axis)]
    }

    /// `|k|²` of flat mode `i`.
    #[inline]
    pub fn k_sq(&self, i: usize) -> f64 {
        (0..self.grid.dim()).map(|a| self.k2[a][self.axis_index(i, a)]).sum()
    }

    /// Whether mode `i` survives the 2/3 rule.
    #[inline]
    pub fn kept(&self, i: usize) -> bool {
        (0..self.grid.dim()).all(|a| self.keep[a][self.axis_index(i, a)])
    }

    /// Unnormalized forward transform, or normalized inverse, in place.
    pub fn fft(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len());
        for a in 0..self.grid.dim() {
            self.fft_axis(data, a, inverse);
        }
        if inverse {
            let s = 1.0 / self.len() as f64;
            par::for_each_chunk_mut(data, par::CHUNK, |_, c| c.iter_mut().for_each(|v| *v *= s));
        }
    }

    fn fft_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let n = self.grid.shape[axis];
        let inner = self.strides[axis];
        let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
        if inner == 1 {
            let rows = (par::CHUNK / n).max(1);
            par::for_each_chunk_mut(data, rows * n, |_, chunk| {
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(chunk, &mut scratch);
            });
            return;
        }
        let outer = self.len() / (n * inner);
        let tiles = inner.div_ceil(TILE);
        let ptr = SyncPtr(data.as_mut_ptr());
        let jobs = outer * tiles;
        par::map_range(jobs, |job| {
            let o = job / tiles;
            let j0 = (job % tiles) * TILE;
            let w = TILE.min(inner - j0);
            let base = o * n * inner + j0;
            let mut buf = vec![Complex64::default(); n * w];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let p = ptr.get();
            // SAFETY: jobs touch disjoint (outer block, column tile) index sets.
            unsafe {
                for k in 0..n {
                    let row = p.add(base + k * inner);
                    for t in 0..w {
                        buf[t * n + k] = *row.add(t);
                    }
                }
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            unsafe {
                for k in 0..n {
                    let row = p.add(base + k * inner);
                    for t in 0..w {
                        *row.add(t) = buf[t * n + k];
                    }
                }
            }
        });
    }

    pub fn forward_real(&self, v: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft(&mut c, false);
        c
    }

    pub fn inverse_real(&self, mut s: Vec<Complex64>) -> Vec<f64> {
        self.fft(&mut s, true);
        s.into_iter().map(|z| z.re).collect()
    }

    /// Multiplies every mode by `f(flat index)`.
    pub fn apply(&self, s: &mut [Complex64], f: impl Fn(usize) -> Complex64 + Sync) {
        par::for_each_chunk_mut(s, par::CHUNK, |c, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v *= f(c * par::CHUNK + k);
            }
        });
    }

    /// Derivative along `axis` of spectrum `s` (returns a new spectrum).
    pub fn diff_spectrum(&self, s: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut out = s.to_vec();
        self.apply(&mut out, |i| Complex64::new(0.0, self.kd(i, axis)));
        out
    }

    /// Zeroes the modes removed by the 2/3 rule.
    pub fn dealias(&self, s: &mut [Complex64]) {
        self.apply(s, |i| if self.kept(i) { Complex64::new(1.0, 0.0) } else { Complex64::default() });
    }

    /// Derivative of real samples along `axis`.
    pub fn derivative(&self, v: &[f64], axis: usize) -> Vec<f64> {
        let s = self.forward_real(v);
        self.inverse_real(self.diff_spectrum(&s, axis))
    }

    fn check(&self, f: &SampledField, comps: usize) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        if f.components != comps {
            return Err(Error::DimensionMismatch { expected: comps, got: f.components });
        }
        Ok(())
    }

    pub fn gradient(&self, f: &SampledField) -> Result<SampledField> {
        self.check(f, 1)?;
        let s = self.forward_real(&f.values);
        let d = self.grid.dim();
        let mut values = Vec::with_capacity(d * self.len());
        for a in 0..d {
            values.extend(self.inverse_real(self.diff_spectrum(&s, a)));
        }
        SampledField::new(self.grid.clone(), d, values)
    }

    pub fn divergence(&self, u: &SampledField) -> Result<SampledField> {
        let d = self.grid.dim();
        self.check(u, d)?;
        let mut acc = vec![Complex64::default(); self.len()];
        for a in 0..d {
            let s = self.forward_real(u.component(a));
            let ds = self.diff_spectrum(&s, a);
            acc.iter_mut().zip(ds).for_each(|(x, y)| *x += y);
        }
        SampledField::new(self.grid.clone(), 1, self.inverse_real(acc))
    }

    /// `(∂₂ψ, -∂₁ψ)` on a planar grid.
    pub fn perp_gradient(&self, psi: &SampledField) -> Result<SampledField> {
        if self.grid.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.grid.dim() });
        }
        let g = self.gradient(psi)?;
        let n = self.len();
        let mut values = g.component(1).to_vec();
        values.extend(g.component(0).iter().map(|v| -v));
        debug_assert_eq!(values.len(), 2 * n);
        SampledField::new(self.grid.clone(), 2, values)
    }

    pub fn laplacian(&self, f: &SampledField) -> Result<SampledField> {
        self.check(f, 1)?;
        let mut s = self.forward_real(&f.values);
        self.apply(&mut s, |i| Complex64::new(-self.k_sq(i), 0.0));
        SampledField::new(self.grid.clone(), 1, self.inverse_real(s))
    }

    /// Solves `Δψ = f` with the mean mode set to zero.
    pub fn inverse_laplacian(&self, f: &SampledField) -> Result<SampledField> {
        self.check(f, 1)?;
        let mut s = self.forward_real(&f.values);
        self.apply(&mut s, |i| {
            let k2 = self.k_sq(i);
            if k2 == 0.0 {
                Complex64::default()
            } else {
                Complex64::new(-1.0 / k2, 0.0)
            }
        });
        SampledField::new(self.grid.clone(), 1, self.inverse_real(s))
    }

    /// Leray projection of spectra in place: `û ← û - k (k·û)/|k|²`.
    pub fn leray_spectra(&self, s: &mut [Vec<Complex64>]) {
        let d = self.grid.dim();
        assert_eq!(s.len(), d);
        let n = self.len();
        let ptrs: Vec<SyncPtr<Complex64>> = s.iter_mut().map(|v| SyncPtr(v.as_mut_ptr())).collect();
        par::map_range(n.div_ceil(par::CHUNK), |c| {
            let lo = c * par::CHUNK;
            let hi = (lo + par::CHUNK).min(n);
            let mut k = vec![0.0; d];
            for i in lo..hi {
                let mut kk = 0.0;
                for (a, ka) in k.iter_mut().enumerate() {
                    *ka = self.kd(i, a);
                    kk += *ka * *ka;
                }
                if kk == 0.0 {
                    continue;
                }
                // SAFETY: each chunk owns modes lo..hi in every component.
                unsafe {
                    let mut dot = Complex64::default();
                    for (a, p) in ptrs.iter().enumerate() {
                        dot += *p.get().add(i) * k[a];
                    }
                    dot /= kk;
                    for (a, p) in ptrs.iter().enumerate() {
                        *p.get().add(i) -= dot * k[a];
                    }
                }
            }
        });
    }

    pub fn leray_project(&self, u: &SampledField) -> Result<SampledField> {
        let d = self.grid.dim();
        self.check(u, d)?;
        let mut s: Vec<Vec<Complex64>> = (0..d).map(|a| self.forward_real(u.component(a))).collect();
        self.leray_spectra(&mut s);
        let mut values = Vec::with_capacity(d * self.len());
        for sa in s {
            values.extend(self.inverse_real(sa));
        }
        SampledField::new(self.grid.clone(), d, values)
    }
}
