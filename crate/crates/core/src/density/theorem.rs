use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::packing::VerticalLines;
use super::radial::{build_locally_radial, CertifiedReport, LocallyRadialFunction, StreamFunction};
use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};
use crate::profile::partition;
use crate::torus::reduce;
use crate::{TimeField, VectorField};

/// Cutoff on strip `[a, b]`: identity on `[a + 2/M, b − 2/M]`, zero within
/// `1/M` of the ends, extended periodically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiJM {
    pub a: f64,
    pub b: f64,
    pub margin: u64,
}

impl ChiJM {
    /// Representative of `s` in `[a, a + 2π)`.
    fn lift(&self, s: f64) -> f64 {
        let r = reduce(s - self.a);
        self.a + r
    }

    /// `(χ, χ', χ'')`. Values are taken from the representative of `s` in the
    /// strip, so strips starting at 0 give `χ(s) = s` on `[0, 2π)`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        let s = self.lift(s);
        if s >= self.b {
            return (0.0, 0.0, 0.0);
        }
        let m = self.margin as f64;
        let (l, l1, l2) = partition(m * (s - self.a) - 1.0);
        let (r, r1, r2) = partition(m * (self.b - s) - 1.0);
        let t = l * r;
        let t1 = m * (l1 * r - l * r1);
        let t2 = m * m * (l2 * r - 2.0 * l1 * r1 + l * r2);
        (s * t, t + s * t1, 2.0 * t1 + s * t2)
    }
}

/// `χ_{j,M}` for strip `j` (sorted, 0-based) between consecutive lines.
pub fn build_chi_jm(j: usize, margin: u64, lines: &VerticalLines) -> Result<ChiJM> {
    if j >= lines.len() {
        return Err(Error::InvalidParameter(format!("strip {j} out of range")));
    }
    let (a, b) = lines.strip(j);
    if 4.0 / margin as f64 >= 0.5 * (b - a) {
        return Err(Error::InvalidParameter(format!(
            "margin index {margin} too small for strip of width {:.6}",
            b - a
        )));
    }
    Ok(ChiJM { a, b, margin })
}

/// Locally radial profiles transported vertically, one speed per strip,
/// on top of the shear background `c F_n(x₁)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremFamily {
    pub radial: LocallyRadialFunction,
    pub report: CertifiedReport,
    /// `ν¹..ν^N`; strip `j` lies between lines `2πj/N` and `2π(j+1)/N`.
    pub speeds: Vec<f64>,
    pub c: f64,
    pub chis: Vec<ChiJM>,
    pub f_norm: f64,
}

impl TheoremFamily {
    /// Assembles a family from a stage-`n` approximation; `c` defaults to
    /// `min(1/n, (1/n)/(‖F_n‖_q + 1))`.
    pub fn from_parts(
        radial: LocallyRadialFunction,
        report: CertifiedReport,
        speeds: Vec<f64>,
        c: Option<f64>,
    ) -> Result<Self> {
        let lines = &radial.packing.lines;
        let n_lines = lines.len();
        if speeds.len() != n_lines {
            return Err(Error::DimensionMismatch { expected: n_lines, got: speeds.len() });
        }
        let chis = (0..n_lines).map(|k| build_chi_jm(k, radial.packing.margin, lines)).collect::<Result<Vec<_>>>()?;
        let mut fam = Self { radial, report, speeds, c: 0.0, chis, f_norm: 0.0 };
        fam.f_norm = fam.f_norm(fam.report.q);
        let n = fam.report.n as f64;
        fam.c = c.unwrap_or_else(|| (1.0 / n).min((1.0 / n) / (fam.f_norm + 1.0)));
        Ok(fam)
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    pub fn lines(&self) -> &VerticalLines {
        &self.radial.packing.lines
    }

    /// Index into `speeds` for sorted strip `k`: the strip starting at 0 is
    /// strip `N`.
    pub fn speed_index(&self, k: usize) -> usize {
        if k == 0 {
            self.speeds.len() - 1
        } else {
            k - 1
        }
    }

    pub fn strip_speed(&self, k: usize) -> f64 {
        self.speeds[self.speed_index(k)]
    }

    /// `(F, F', F'')` at `s`.
    pub fn f_n(&self, s: f64) -> (f64, f64, f64) {
        let k = self.lines().strip_of(s);
        let (x, d1, d2) = self.chis[k].eval(s);
        let v = self.strip_speed(k);
        (-v * x, -v * d1, -v * d2)
    }

    /// `‖F_n‖_{L^q(T²)}` by the periodic trapezoid rule.
    pub fn f_norm(&self, q: f64) -> f64 {
        let k = 1 << 16;
        let h = TAU / k as f64;
        if q.is_infinite() {
            return (0..k).map(|i| self.f_n(i as f64 * h).0.abs()).fold(0.0, f64::max);
        }
        let s: f64 = (0..k).map(|i| self.f_n(i as f64 * h).0.abs().powf(q)).sum();
        (TAU * h * s).powf(1.0 / q)
    }

    /// Phases `θ^j = c ν^j t`.
    pub fn phases_at(&self, t: f64) -> Vec<f64> {
        self.speeds.iter().map(|v| self.c * v * t).collect()
    }

    /// `(ψ, ∇ψ, Δψ)` of the embedding at phases `θ`.
    pub fn local_with_phases(&self, theta: &[f64], x: &[f64]) -> (f64, [f64; 2], f64) {
        let k = self.lines().strip_of(x[0]);
        let shift = theta[self.speed_index(k)];
        let (p, g, lap) = self.radial.local(&[x[0], x[1] - shift]);
        let (f, f1, f2) = self.f_n(x[0]);
        (p + self.c * f, [g[0] + self.c * f1, g[1]], lap + self.c * f2)
    }

    pub fn stream(&self, t: f64, x: &[f64]) -> f64 {
        self.local_with_phases(&self.phases_at(t), x).0
    }

    /// `∇⊥ψ = (∂₂ψ, −∂₁ψ)`.
    pub fn velocity_with_phases(&self, theta: &[f64], x: &[f64]) -> [f64; 2] {
        let (_, g, _) = self.local_with_phases(theta, x);
        [g[1], -g[0]]
    }

    pub fn velocity(&self, t: f64, x: &[f64]) -> [f64; 2] {
        self.velocity_with_phases(&self.phases_at(t), x)
    }

    pub fn vorticity(&self, t: f64, x: &[f64]) -> f64 {
        self.local_with_phases(&self.phases_at(t), x).2
    }

    pub fn sample_stream(&self, t: f64, res: usize) -> SampledField {
        let th = self.phases_at(t);
        SampledField::from_fn(Grid::cube(2, res), |x| self.local_with_phases(&th, x).0)
    }

    pub fn sample_vorticity(&self, t: f64, res: usize) -> SampledField {
        let th = self.phases_at(t);
        SampledField::from_fn(Grid::cube(2, res), |x| self.local_with_phases(&th, x).2)
    }

    /// The embedding `θ ↦ ∇⊥ψ(θ)` as a vector field at fixed phases.
    pub fn embedding(&self, theta: Vec<f64>) -> Result<FamilyEmbedding<'_>> {
        if theta.len() != self.speeds.len() {
            return Err(Error::DimensionMismatch { expected: self.speeds.len(), got: theta.len() });
        }
        Ok(FamilyEmbedding { family: self, theta })
    }
}

impl TimeField for TheoremFamily {
    fn dim(&self) -> usize {
        2
    }
    fn eval_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.velocity(t, x));
    }
}

pub struct FamilyEmbedding<'a> {
    family: &'a TheoremFamily,
    theta: Vec<f64>,
}

impl VectorField for FamilyEmbedding<'_> {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.family.velocity_with_phases(&self.theta, x));
    }
}

/// Builds the stage-`n` family on the lines `2πj/N` with speeds `ν`.
pub fn build_theorem_family(psi0: &StreamFunction, n: usize, speeds: &[f64], q: f64) -> Result<TheoremFamily> {
    let lines = VerticalLines::equispaced(speeds.len())?;
    let (radial, report) = build_locally_radial(psi0, n, &lines, q)?;
    TheoremFamily::from_parts(radial, report, speeds.to_vec(), None)
}
