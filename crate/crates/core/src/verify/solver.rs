use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};
use crate::par::{self, SyncPtr};
use crate::spectral::SpectralWorkspace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Output times; each is rounded to the nearest step.
    pub snapshots: Vec<f64>,
    /// Constant velocity added to `∇⊥ψ` (zero for mean-zero data).
    #[serde(default)]
    pub mean_velocity: [f64; 2],
}

impl SolverOptions {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self { dt, horizon, snapshots: vec![0.0, horizon], mean_velocity: [0.0; 2] }
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub omega: SampledField,
    pub energy: f64,
    pub enstrophy: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<SolverState>,
    pub steps: usize,
    /// `dt · max|u| · max n / 2π` of the initial data.
    pub cfl: f64,
}

/// Per-mode constants of the planar Galerkin system.
struct Modes {
    k1: Vec<f64>,
    k2: Vec<f64>,
    inv_k2: Vec<f64>,
    mask: Vec<f64>,
}

impl Modes {
    fn new(ws: &SpectralWorkspace) -> Self {
        let n = ws.len();
        let mut m = Modes { k1: vec![0.0; n], k2: vec![0.0; n], inv_k2: vec![0.0; n], mask: vec![0.0; n] };
        for i in 0..n {
            m.k1[i] = ws.kd(i, 0);
            m.k2[i] = ws.kd(i, 1);
            let kk = ws.k_sq(i);
            m.inv_k2[i] = if kk == 0.0 { 0.0 } else { 1.0 / kk };
            m.mask[i] = if ws.kept(i) && kk != 0.0 { 1.0 } else { 0.0 };
        }
        m
    }
}

struct Rhs<'a> {
    ws: &'a SpectralWorkspace,
    modes: Modes,
    mean: [f64; 2],
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

fn chunked(n: usize, f: impl Fn(usize, usize) + Sync + Send) {
    par::map_range(n.div_ceil(par::CHUNK), |c| {
        let lo = c * par::CHUNK;
        f(lo, (lo + par::CHUNK).min(n));
    });
}

impl Rhs<'_> {
    /// `-P(u·∇ω)` for masked spectrum `w`, written into `out`.
    fn eval(&mut self, w: &[Complex64], out: &mut [Complex64]) {
        let n = w.len();
        let m = &self.modes;
        let (pa, pb) = (SyncPtr(self.a.as_mut_ptr()), SyncPtr(self.b.as_mut_ptr()));
        chunked(n, |lo, hi| {
            for i in lo..hi {
                let ik = Complex64::i();
                let psi = -w[i] * m.inv_k2[i];
                let u1 = ik * m.k2[i] * psi;
                let u2 = -ik * m.k1[i] * psi;
                let w1 = ik * m.k1[i] * w[i];
                let w2 = ik * m.k2[i] * w[i];
                // SAFETY: chunks are disjoint.
                unsafe {
                    *pa.get().add(i) = u1 + ik * w1;
                    *pb.get().add(i) = u2 + ik * w2;
                }
            }
        });
        self.ws.fft(&mut self.a, true);
        self.ws.fft(&mut self.b, true);
        let (u0, u1) = (self.mean[0], self.mean[1]);
        let pa = SyncPtr(self.a.as_mut_ptr());
        let b = &self.b;
        chunked(n, |lo, hi| {
            for i in lo..hi {
                // SAFETY: chunks are disjoint.
                unsafe {
                    let a = *pa.get().add(i);
                    let p = (a.re + u0) * a.im + (b[i].re + u1) * b[i].im;
                    *pa.get().add(i) = Complex64::new(p, 0.0);
                }
            }
        });
        self.ws.fft(&mut self.a, false);
        let po = SyncPtr(out.as_mut_ptr());
        let a = &self.a;
        chunked(n, |lo, hi| {
            for i in lo..hi {
                // SAFETY: chunks are disjoint.
                unsafe { *po.get().add(i) = -a[i] * m.mask[i] };
            }
        });
    }
}

/// `(energy, enstrophy)` of a vorticity spectrum, mean flow excluded.
fn invariants(w: &[Complex64], modes: &Modes) -> (f64, f64) {
    let n = w.len() as f64;
    let scale = 0.5 * TAU * TAU / (n * n);
    let e = par::sum_range(w.len(), |i| w[i].norm_sqr() * modes.inv_k2[i]);
    let z = par::sum_range(w.len(), |i| w[i].norm_sqr());
    (scale * e, scale * z)
}

/// Velocity `∇⊥Δ⁻¹ω + U` on the grid of `omega`.
pub fn velocity_from_vorticity(omega: &SampledField, mean: [f64; 2]) -> Result<SampledField> {
    let ws = SpectralWorkspace::new(&omega.grid)?;
    let psi = ws.inverse_laplacian(omega)?;
    let mut u = ws.perp_gradient(&psi)?;
    let n = omega.grid.len();
    u.values[..n].iter_mut().for_each(|v| *v += mean[0]);
    u.values[n..].iter_mut().for_each(|v| *v += mean[1]);
    Ok(u)
}

fn planar_grid(omega: &SampledField) -> Result<()> {
    let g = &omega.grid;
    if g.dim() != 2 || omega.components != 1 {
        return Err(Error::InvalidParameter("the solver needs a scalar vorticity on T²".into()));
    }
    if g.extent.iter().any(|e| (e - TAU).abs() > 1e-12) {
        return Err(Error::InvalidParameter("the solver runs on the full torus".into()));
    }
    Ok(())
}

/// Fourth-order Runge–Kutta pseudo-spectral integration of
/// `∂ₜω + u·∇ω = 0`, `u = ∇⊥ψ + U`, `Δψ = ω`, with the 2/3 rule.
pub fn solve_euler_2d(omega0: &SampledField, opts: &SolverOptions) -> Result<Trajectory> {
    planar_grid(omega0)?;
    if !(opts.dt > 0.0) || !(opts.horizon >= 0.0) {
        return Err(Error::InvalidParameter("dt must be positive and the horizon nonnegative".into()));
    }
    let scale = omega0.max_abs().max(1e-300);
    let mean = omega0.mean()[0];
    if mean.abs() > 1e-10 * scale {
        return Err(Error::InvalidParameter(format!("initial vorticity has mean {mean:e}, need 0")));
    }
    let steps = (opts.horizon / opts.dt).round() as usize;
    if (steps as f64 * opts.dt - opts.horizon).abs() > 1e-9 * opts.horizon.max(opts.dt) {
        return Err(Error::InvalidParameter("horizon must be a multiple of dt".into()));
    }
    let mut marks: Vec<(usize, usize)> =
        opts.snapshots.iter().enumerate().map(|(k, &t)| ((t / opts.dt).round() as usize, k)).collect();
    if marks.iter().any(|&(s, _)| s > steps) || opts.snapshots.iter().any(|t| *t < 0.0) {
        return Err(Error::InvalidParameter("snapshot times must lie in [0, horizon]".into()));
    }
    marks.sort();

    let grid = omega0.grid.clone();
    let ws = SpectralWorkspace::new(&grid)?;
    let modes = Modes::new(&ws);
    let n = ws.len();
    let mut w = ws.forward_real(&omega0.values);
    w.iter_mut().zip(&modes.mask).for_each(|(v, m)| *v *= *m);

    let masked = SampledField::new(grid.clone(), 1, ws.inverse_real(w.clone()))?;
    let u = velocity_from_vorticity(&masked, opts.mean_velocity)?;
    let nmax = grid.shape.iter().copied().max().unwrap_or(0) as f64;
    let cfl = opts.dt * u.max_norm() * nmax / TAU;
    if !(cfl <= 0.5) {
        return Err(Error::Cfl { cfl });
    }

    let mut rhs = Rhs {
        ws: &ws,
        modes,
        mean: opts.mean_velocity,
        a: vec![Complex64::default(); n],
        b: vec![Complex64::default(); n],
    };
    let snapshot = |w: &[Complex64], step: usize, modes: &Modes| -> Result<SolverState> {
        let (energy, enstrophy) = invariants(w, modes);
        let omega = SampledField::new(grid.clone(), 1, ws.inverse_real(w.to_vec()))?;
        Ok(SolverState { t: step as f64 * opts.dt, omega, energy, enstrophy })
    };
    let mut states: Vec<Option<SolverState>> = vec![None; opts.snapshots.len()];
    let mut next = 0;
    let mut k = [
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
    ];
    let mut stage = vec![Complex64::default(); n];
    let dt = opts.dt;
    for step in 0..=steps {
        while next < marks.len() && marks[next].0 == step {
            states[marks[next].1] = Some(snapshot(&w, step, &rhs.modes)?);
            next += 1;
        }
        if step == steps {
            break;
        }
        rhs.eval(&w, &mut k[0]);
        for (j, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            let h = c * dt;
            stage.iter_mut().zip(&w).zip(&k[j - 1]).for_each(|((s, w), k)| *s = w + k * h);
            rhs.eval(&stage, &mut k[j]);
        }
        let h6 = dt / 6.0;
        let [k0, k1, k2, k3] = &k;
        w.iter_mut()
            .zip(k0.iter().zip(k1).zip(k2.iter().zip(k3)))
            .for_each(|(w, ((a, b), (c, d)))| *w += (a + 2.0 * b + 2.0 * c + d) * h6);
        let probe = par::sum_range(n, |i| w[i].norm_sqr());
        if !probe.is_finite() {
            return Err(Error::NonFinite { t: (step + 1) as f64 * dt });
        }
    }
    Ok(Trajectory { states: states.into_iter().map(|s| s.expect("every snapshot recorded")).collect(), steps, cfl })
}

/// Smooth random mean-zero vorticity with modes `1 ≤ |k|_∞ ≤ kmax` and
/// amplitudes decaying like `|k|⁻²`.
pub fn random_vorticity(n: usize, seed: u64, kmax: i64) -> Result<SampledField> {
    let grid = Grid::cube(2, n);
    let ws = SpectralWorkspace::new(&grid)?;
    if 3 * kmax as usize > n {
        return Err(Error::Resolution(format!("kmax {kmax} is not resolved on {n}² after dealiasing")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![Complex64::default(); ws.len()];
    let idx = |k1: i64, k2: i64| k1.rem_euclid(n as i64) as usize * n + k2.rem_euclid(n as i64) as usize;
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let kk = (k1 * k1 + k2 * k2) as f64;
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / kk * (n * n) as f64;
            s[idx(k1, k2)] = c;
            s[idx(-k1, -k2)] = c.conj();
        }
    }
    SampledField::new(grid, 1, ws.inverse_real(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shear_is_stationary() {
        let g = Grid::cube(2, 64);
        let w0 = SampledField::from_fn(g, |x| x[0].sin());
        let tr = solve_euler_2d(&w0, &SolverOptions::new(1e-2, 1.0)).unwrap();
        let last = &tr.states[1].omega;
        let diff = last.values.iter().zip(&w0.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
        assert_eq!(tr.steps, 100);
    }

    #[test]
    fn conserves_invariants() {
        let w0 = random_vorticity(64, 7, 5).unwrap();
        let tr = solve_euler_2d(&w0, &SolverOptions::new(2e-3, 0.5)).unwrap();
        let (a, b) = (&tr.states[0], &tr.states[1]);
        assert!(((b.energy - a.energy) / a.energy).abs() < 1e-8);
        assert!(((b.enstrophy - a.enstrophy) / a.enstrophy).abs() < 1e-8);
        assert!(b.omega.mean()[0].abs() < 1e-13);
        let moved = b.omega.values.iter().zip(&a.omega.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(moved > 1e-3);
    }

    #[test]
    fn mean_velocity_translates() {
        // under U = (1/2, 0) the shear ω = sin x₁ is carried to sin(x₁ - t/2)
        let g = Grid::cube(2, 32);
        let w0 = SampledField::from_fn(g.clone(), |x| x[0].sin());
        let mut o = SolverOptions::new(1e-2, 1.0);
        o.mean_velocity = [0.5, 0.0];
        let tr = solve_euler_2d(&w0, &o).unwrap();
        let exact = SampledField::from_fn(g, |x| (x[0] - 0.5).sin());
        for (a, b) in tr.states[1].omega.values.iter().zip(&exact.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn fourth_order_in_time() {
        let w0 = random_vorticity(32, 3, 4).unwrap();
        let run = |dt: f64| solve_euler_2d(&w0, &SolverOptions::new(dt, 0.6)).unwrap().states[1].omega.clone();
        let (a, b, c) = (run(0.03), run(0.015), run(0.0075));
        let e1 = crate::field::lq_error(&a, &c, f64::INFINITY).unwrap();
        let e2 = crate::field::lq_error(&b, &c, f64::INFINITY).unwrap();
        let ratio = e1 / e2;
        // against the finest run the expected ratio is (4⁴ - 1)/(2⁴ - 1) = 17
        assert!(ratio > 12.0 && ratio < 22.0, "{ratio}");
    }

    #[test]
    fn errors() {
        let g = Grid::cube(2, 32);
        let w = SampledField::from_fn(g.clone(), |x| 1.0 + x[0].sin());
        assert!(matches!(solve_euler_2d(&w, &SolverOptions::new(1e-2, 1.0)), Err(Error::InvalidParameter(_))));
        let big = SampledField::from_fn(g.clone(), |x| 1e4 * x[0].sin());
        assert!(matches!(solve_euler_2d(&big, &SolverOptions::new(1e-2, 1.0)), Err(Error::Cfl { .. })));
        let ok = SampledField::from_fn(g, |x| x[0].sin());
        assert!(solve_euler_2d(&ok, &SolverOptions::new(0.3, 1.0)).is_err());
        let three = SampledField::zeros(Grid::cube(3, 16), 1);
        assert!(solve_euler_2d(&three, &SolverOptions::new(0.1, 1.0)).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let w0 = random_vorticity(32, 11, 4).unwrap();
        let o = SolverOptions::new(1e-2, 0.1);
        let a = solve_euler_2d(&w0, &o).unwrap();
        let b = par::sequential(|| solve_euler_2d(&w0, &o).unwrap());
        assert_eq!(a.states[1].omega.values, b.states[1].omega.values);
        assert_eq!(a.states[1].energy, b.states[1].energy);
    }
}
