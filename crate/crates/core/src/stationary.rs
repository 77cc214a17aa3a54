//! Compactly supported steady Euler flows on R^d.
//!
//! In even dimension the rotation field `ũ(x) = (x₂,-x₁,…,x_d,-x_{d-1})`
//! scaled by a radial bump is steady, with a radial pressure. In 3D a flow
//! has to be supplied from outside.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};
use crate::par;
use crate::profile::BumpProfile;
use crate::spectral::SpectralWorkspace;
use crate::torus::wrap;
use crate::verify::residual_from_samples;
use crate::VectorField;

/// A steady flow on R^d with compact support.
pub trait SteadyState: Sync {
    fn dim(&self) -> usize;
    fn support_radius(&self) -> f64;
    fn velocity(&self, x: &[f64], out: &mut [f64]);
    /// Pressure, if the flow provides one.
    fn pressure(&self, _x: &[f64]) -> Option<f64> {
        None
    }
    fn has_pressure(&self) -> bool;
}

/// `ũ(x)` for even `d`.
pub fn linear_field_utilde(x: &[f64]) -> Result<Vec<f64>> {
    if !x.len().is_multiple_of(2) || x.is_empty() {
        return Err(Error::InvalidParameter(format!("rotation field needs an even dimension, got {}", x.len())));
    }
    let mut out = vec![0.0; x.len()];
    utilde_into(x, &mut out);
    Ok(out)
}

fn utilde_into(x: &[f64], out: &mut [f64]) {
    for k in (0..x.len()).step_by(2) {
        out[k] = x[k + 1];
        out[k + 1] = -x[k];
    }
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Number of panels in the radial tables.
pub const TABLE_PANELS: usize = 2048;

/// Tabulated antiderivative `F(r) = ∫₀^r g` on `[0, R]`, looked up by
/// cubic Hermite interpolation with the exact derivative `g`.
#[derive(Clone)]
struct RadialTable {
    radius: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl RadialTable {
    fn new(radius: f64, g: impl Fn(f64) -> f64) -> Self {
        let h = radius / TABLE_PANELS as f64;
        let mut values = Vec::with_capacity(TABLE_PANELS + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for p in 0..TABLE_PANELS {
            let a = p as f64 * h;
            let panel: f64 = GL_NODES.iter().zip(GL_WEIGHTS).map(|(&t, w)| w * g(a + 0.5 * h * (t + 1.0))).sum();
            acc += 0.5 * h * panel;
            values.push(acc);
        }
        let slopes = (0..=TABLE_PANELS).map(|i| g(i as f64 * h)).collect();
        Self { radius, values, slopes }
    }

    fn total(&self) -> f64 {
        self.values[TABLE_PANELS]
    }

    /// `F(r) - F(R)`, zero for `r ≥ R`.
    fn normalized(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        let h = self.radius / TABLE_PANELS as f64;
        let s = r / h;
        let i = (s.floor() as usize).min(TABLE_PANELS - 1);
        let t = s - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v =
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        v - self.total()
    }
}

/// The even-dimensional flow `f(|x|) ũ(x)` of unit radius, dilated to the
/// profile's support radius `ε`: `v_ε(x) = v(x/ε)`, `p_ε(x) = p(x/ε)`.
#[derive(Clone)]
pub struct StationaryFlow {
    dim: usize,
    profile: BumpProfile,
    /// `1/ε`, the velocity factor of the dilation.
    amp: f64,
    pressure: RadialTable,
    stream: Option<RadialTable>,
}

impl std::fmt::Debug for StationaryFlow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationaryFlow").field("dim", &self.dim).field("profile", &self.profile).finish()
    }
}

impl StationaryFlow {
    pub fn new(dim: usize, profile: BumpProfile) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("closed-form steady flows need an even dimension, got {dim}")));
        }
        let r = profile.support_radius;
        let pressure = RadialTable::new(r, |s| {
            let f = profile.f(s);
            s * f * f
        });
        let stream = (dim == 2).then(|| RadialTable::new(r, |s| s * profile.f(s)));
        Ok(Self { dim, amp: 1.0 / r, profile, pressure, stream })
    }

    /// Flow of support radius `eps` with the given profile sharpness.
    pub fn with_radius(dim: usize, eps: f64, sharpness: f64) -> Result<Self> {
        Self::new(dim, BumpProfile::new(eps, sharpness)?)
    }

    pub fn profile(&self) -> &BumpProfile {
        &self.profile
    }

    pub fn eps_scale(&self) -> f64 {
        self.profile.support_radius
    }

    fn radius_of(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn velocity_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.velocity(x, &mut out);
        out
    }

    pub fn pressure_at(&self, x: &[f64]) -> f64 {
        self.amp * self.amp * self.pressure.normalized(Self::radius_of(x))
    }

    /// Normalizing constant subtracted from the raw pressure integral.
    pub fn pressure_offset(&self) -> f64 {
        self.amp * self.amp * self.pressure.total()
    }

    /// Radial stream function, planar flows only.
    pub fn stream_2d(&self, x: &[f64]) -> Result<f64> {
        match &self.stream {
            Some(t) if x.len() == 2 => Ok(self.amp * t.normalized(Self::radius_of(x))),
            _ => Err(Error::InvalidParameter("stream function exists only for planar flows".into())),
        }
    }

    pub fn stream_offset(&self) -> Option<f64> {
        self.stream.as_ref().map(|t| self.amp * t.total())
    }

    /// `Δψ = (2f + r f')/ε` for planar flows.
    pub fn laplacian_stream_2d(&self, x: &[f64]) -> f64 {
        let r = Self::radius_of(x);
        self.amp * (2.0 * self.profile.f(r) + r * self.profile.f_prime(r))
    }
}

impl SteadyState for StationaryFlow {
    fn dim(&self) -> usize {
        self.dim
    }
    fn support_radius(&self) -> f64 {
        self.profile.support_radius
    }
    fn velocity(&self, x: &[f64], out: &mut [f64]) {
        let f = self.profile.f(Self::radius_of(x));
        if f == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        utilde_into(x, out);
        let c = f * self.amp;
        out.iter_mut().for_each(|v| *v *= c);
    }
    fn pressure(&self, x: &[f64]) -> Option<f64> {
        Some(self.pressure_at(x))
    }
    fn has_pressure(&self) -> bool {
        true
    }
}

type VelocityFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type PressureFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A steady state on R³ supplied by the caller.
#[derive(Clone)]
pub struct ExternalSteadyState {
    label: String,
    support_radius: f64,
    velocity: VelocityFn,
    pressure: Option<PressureFn>,
}

impl std::fmt::Debug for ExternalSteadyState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalSteadyState")
            .field("label", &self.label)
            .field("support_radius", &self.support_radius)
            .field("pressure", &self.pressure.is_some())
            .finish()
    }
}

/// Closed forms known to [`ExternalSteadyState::from_closed_form`].
pub const CLOSED_FORMS: &[&str] = &["axisymmetric-swirl"];

impl ExternalSteadyState {
    pub fn new(
        label: impl Into<String>,
        support_radius: f64,
        velocity: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        pressure: Option<PressureFn>,
    ) -> Result<Self> {
        if !(support_radius > 0.0 && support_radius < PI) {
            return Err(Error::InvalidParameter(format!(
                "declared support radius must lie in (0, π), got {support_radius}"
            )));
        }
        Ok(Self { label: label.into(), support_radius, velocity: Arc::new(velocity), pressure })
    }

    /// Built-in 3D fields addressed by name.
    ///
    /// `axisymmetric-swirl` is `f(|x|)(x₂,-x₁,0)`: compactly supported and
    /// divergence free, but not steady, so residual checks must flag it.
    pub fn from_closed_form(id: &str, support_radius: f64) -> Result<Self> {
        match id {
            "axisymmetric-swirl" => {
                let p = BumpProfile::new(support_radius, crate::profile::DEFAULT_SHARPNESS)?;
                Self::new(
                    id,
                    support_radius,
                    move |x, o| {
                        let f = p.f(StationaryFlow::radius_of(x));
                        o[0] = f * x[1];
                        o[1] = -f * x[0];
                        o[2] = 0.0;
                    },
                    None,
                )
            }
            _ => Err(Error::InvalidParameter(format!("unknown closed form {id:?}; known: {CLOSED_FORMS:?}"))),
        }
    }

    /// Trilinear interpolation of a sampled 3-component field on a box grid.
    /// Points outside the box evaluate to zero.
    pub fn from_sampled(field: SampledField, support_radius: f64) -> Result<Self> {
        if field.grid.dim() != 3 || field.components != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: field.grid.dim() });
        }
        let field = Arc::new(field);
        Self::new("sampled", support_radius, move |x, o| trilinear(&field, x, o), None)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Checks the declared support and the divergence.
    pub fn validate(&self, n: usize, tolerance: f64) -> Result<ExternalReport> {
        let r = self.support_radius;
        // support: sample a box larger than the ball
        let outer = Grid::centered_box(3, n, 1.25 * r);
        let u = SampledField::sample_vector(outer.clone(), &SteadyVelocity(self));
        let m = outer.len();
        let max_outside = par::max_range(m, |i| {
            let mut x = [0.0; 3];
            outer.point(i, &mut x);
            if StationaryFlow::radius_of(&x) < r {
                0.0
            } else {
                (0..3).map(|k| u.component(k)[i].abs()).fold(0.0, f64::max)
            }
        });
        let tight = Grid::centered_box(3, n, r);
        let ws = SpectralWorkspace::new(&tight)?;
        let ut = SampledField::sample_vector(tight, &SteadyVelocity(self));
        let scale = ut.max_norm() / r;
        let max_div = ws.divergence(&ut)?.max_abs();
        let relative = if scale > 0.0 { max_div / scale } else { 0.0 };
        Ok(ExternalReport {
            label: self.label.clone(),
            support_radius: r,
            resolution: n,
            max_outside_support: max_outside,
            support_ok: max_outside == 0.0,
            max_divergence: max_div,
            relative_divergence: relative,
            tolerance,
            divergence_ok: relative <= tolerance,
        })
    }
}

fn trilinear(f: &SampledField, x: &[f64], o: &mut [f64]) {
    let g = &f.grid;
    let mut idx = [0usize; 3];
    let mut w = [0.0; 3];
    for a in 0..3 {
        let s = (x[a] - g.origin[a]) / g.spacing(a);
        if !(s >= 0.0 && s <= (g.shape[a] - 1) as f64) {
            o[..3].iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let i = (s.floor() as usize).min(g.shape[a] - 2);
        idx[a] = i;
        w[a] = s - i as f64;
    }
    let (n1, n2) = (g.shape[1], g.shape[2]);
    for (c, out) in o.iter_mut().enumerate().take(3) {
        let v = f.component(c);
        let mut acc = 0.0;
        for corner in 0..8 {
            let b = [corner >> 2 & 1, corner >> 1 & 1, corner & 1];
            let wt: f64 = (0..3).map(|a| if b[a] == 1 { w[a] } else { 1.0 - w[a] }).product();
            acc += wt * v[((idx[0] + b[0]) * n1 + idx[1] + b[1]) * n2 + idx[2] + b[2]];
        }
        *out = acc;
    }
}

impl SteadyState for ExternalSteadyState {
    fn dim(&self) -> usize {
        3
    }
    fn support_radius(&self) -> f64 {
        self.support_radius
    }
    fn velocity(&self, x: &[f64], out: &mut [f64]) {
        (self.velocity)(x, out)
    }
    fn pressure(&self, x: &[f64]) -> Option<f64> {
        self.pressure.as_ref().map(|p| p(x))
    }
    fn has_pressure(&self) -> bool {
        self.pressure.is_some()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalReport {
    pub label: String,
    pub support_radius: f64,
    pub resolution: usize,
    pub max_outside_support: f64,
    pub support_ok: bool,
    pub max_divergence: f64,
    pub relative_divergence: f64,
    pub tolerance: f64,
    pub divergence_ok: bool,
}

/// Velocity of a steady state as a [`VectorField`] on R^d.
pub struct SteadyVelocity<'a, S: ?Sized>(pub &'a S);

impl<S: SteadyState + ?Sized> VectorField for SteadyVelocity<'_, S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.0.velocity(x, out)
    }
}

/// `v̄(x - center)` on the torus.
pub struct Periodized<'a, S: ?Sized> {
    base: &'a S,
    center: Vec<f64>,
}

pub fn periodize_velocity<'a, S: SteadyState + ?Sized>(
    base: &'a S,
    center: &crate::TorusPoint,
) -> Result<Periodized<'a, S>> {
    if base.support_radius() >= PI {
        return Err(Error::InvalidParameter(format!(
            "support radius {} must be below π to periodize",
            base.support_radius()
        )));
    }
    if center.dim() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: center.dim() });
    }
    Ok(Periodized { base, center: center.coords().to_vec() })
}

impl<S: SteadyState + ?Sized> VectorField for Periodized<'_, S> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let z: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| wrap(a - c)).collect();
        self.base.velocity(&z, out)
    }
}

/// Where residuals are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingBox {
    /// The fundamental domain `[-π, π)^d`.
    Torus,
    /// The smallest box containing the support, `[-ε, ε)^d`.
    Tight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    pub max_div: f64,
    pub max_momentum: f64,
    /// Whether the momentum residual was Leray projected (no pressure given).
    pub projected: bool,
}

/// Spectral residuals of a steady flow: `max |div u|` and
/// `max |u·∇u + ∇p|` (Leray projected when no pressure is available).
pub fn verify_steady_residual(
    flow: &(impl SteadyState + ?Sized),
    n: usize,
    sampling: SamplingBox,
) -> Result<SteadyReport> {
    let d = flow.dim();
    let r = flow.support_radius();
    let half = match sampling {
        SamplingBox::Torus => PI,
        SamplingBox::Tight => r,
    };
    let across = 2.0 * r / (2.0 * half / n as f64);
    if across < 16.0 {
        return Err(Error::Resolution(format!("only {across:.1} grid points across the support diameter, need 16")));
    }
    let grid = Grid::centered_box(d, n, half);
    let ws = SpectralWorkspace::new(&grid)?;
    let u = SampledField::sample_vector(grid.clone(), &SteadyVelocity(flow));
    let pressure =
        flow.has_pressure().then(|| SampledField::from_fn(grid.clone(), |x| flow.pressure(x).unwrap_or(0.0)));
    let (max_div, max_momentum) = residual_from_samples(&ws, &u, None, pressure.as_ref())?;
    Ok(SteadyReport { max_div, max_momentum, projected: pressure.is_none() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TorusPoint;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn canonical(d: usize, eps: f64) -> StationaryFlow {
        StationaryFlow::new(d, BumpProfile::canonical(eps).unwrap()).unwrap()
    }

    /// Independent adaptive Simpson integration.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn utilde_examples() {
        assert_eq!(linear_field_utilde(&[1.0, 2.0]).unwrap(), vec![2.0, -1.0]);
        assert_eq!(linear_field_utilde(&[1.0, 0.0, 0.0, 1.0]).unwrap(), vec![0.0, -1.0, 1.0, 0.0]);
        assert!(linear_field_utilde(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn velocity_examples() {
        let fl = canonical(2, 1.0);
        assert_eq!(fl.velocity_at(&[1.1, 0.0]), vec![0.0, 0.0]);
        assert_eq!(fl.velocity_at(&[0.0, 0.0]), vec![0.0, 0.0]);
        let v = fl.velocity_at(&[0.5, 0.0]);
        assert_abs_diff_eq!(v[0], 0.0);
        assert_abs_diff_eq!(v[1], -0.5 * (-4.0f64 / 3.0).exp(), epsilon = 1e-16);
    }

    #[test]
    fn pressure_matches_independent_quadrature() {
        let fl = canonical(2, 1.0);
        let p = *fl.profile();
        let g = |s: f64| s * p.f(s) * p.f(s);
        let total = simpson(&g, 0.0, 1.0, 20_000);
        assert_abs_diff_eq!(fl.pressure_offset(), total, epsilon = 1e-13);
        assert_abs_diff_eq!(fl.pressure_at(&[0.0, 0.0]), -total, epsilon = 1e-13);
        assert_eq!(fl.pressure_at(&[1.0, 0.0]), 0.0);
        assert_eq!(fl.pressure_at(&[0.8, 0.9]), 0.0);
        for r in [0.1, 0.37, 0.5, 0.77, 0.95] {
            let raw = simpson(&g, 0.0, r, 20_000);
            assert_abs_diff_eq!(fl.pressure_at(&[r, 0.0]) + total, raw, epsilon = 1e-13);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..200 {
            let v = fl.pressure_at(&[i as f64 / 190.0, 0.0]);
            assert!(v >= prev - 1e-16);
            prev = v;
        }
    }

    #[test]
    fn stream_function() {
        let fl = canonical(2, 1.0);
        let off = fl.stream_offset().unwrap();
        assert_abs_diff_eq!(fl.stream_2d(&[0.0, 0.0]).unwrap(), -off, epsilon = 1e-15);
        assert_eq!(fl.stream_2d(&[0.0, 1.2]).unwrap(), 0.0);
        assert!(canonical(4, 1.0).stream_2d(&[0.0; 4]).is_err());
        let h = 1e-4;
        let x = [0.3, 0.4];
        let s = |a: f64, b: f64| fl.stream_2d(&[a, b]).unwrap();
        let d1 = (s(x[0] + h, x[1]) - s(x[0] - h, x[1])) / (2.0 * h);
        let d2 = (s(x[0], x[1] + h) - s(x[0], x[1] - h)) / (2.0 * h);
        let v = fl.velocity_at(&x);
        assert_abs_diff_eq!(d2, v[0], epsilon = 1e-7);
        assert_abs_diff_eq!(-d1, v[1], epsilon = 1e-7);
    }

    #[test]
    fn periodization() {
        let fl = canonical(2, 0.5);
        let c = TorusPoint::new(vec![0.2, 6.0]);
        let pv = periodize_velocity(&fl, &c).unwrap();
        let mut o = [1.0; 2];
        pv.eval(c.coords(), &mut o);
        assert_eq!(o, [0.0, 0.0]);
        let x = [0.4, 6.1];
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        pv.eval(&x, &mut a);
        pv.eval(&[x[0] + TAU, x[1]], &mut b);
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-15);
        assert!(a[0] != 0.0);
        pv.eval(&[3.0, 3.0], &mut a);
        assert_eq!(a, [0.0, 0.0]);
        let big = canonical(2, 3.5);
        assert!(periodize_velocity(&big, &c).is_err());
    }

    #[test]
    fn residual_small_on_torus_box() {
        let fl = StationaryFlow::with_radius(2, 0.3 * PI, 8.0).unwrap();
        let r = verify_steady_residual(&fl, 128, SamplingBox::Torus).unwrap();
        assert!(r.max_div < 1e-6 && r.max_momentum < 1e-6, "{r:?}");
        assert!(!r.projected);
    }

    #[test]
    fn residual_rejects_coarse_grids() {
        let fl = StationaryFlow::with_radius(2, 0.3 * PI, 8.0).unwrap();
        assert!(verify_steady_residual(&fl, 16, SamplingBox::Torus).is_err());
    }

    #[test]
    fn zero_flow_has_zero_residual() {
        let z = ExternalSteadyState::new("zero", 1.0, |_, o| o.iter_mut().for_each(|v| *v = 0.0), None).unwrap();
        let r = verify_steady_residual(&z, 32, SamplingBox::Tight).unwrap();
        assert_eq!(r.max_div, 0.0);
        assert_eq!(r.max_momentum, 0.0);
    }

    #[test]
    fn swirl_is_solenoidal_but_not_steady() {
        let s = ExternalSteadyState::from_closed_form("axisymmetric-swirl", 1.0).unwrap();
        let rep = s.validate(48, 1e-6).unwrap();
        assert!(rep.support_ok && rep.divergence_ok, "{rep:?}");
        let r = verify_steady_residual(&s, 48, SamplingBox::Tight).unwrap();
        assert!(r.projected);
        assert!(r.max_momentum > 1e-3, "{r:?}");
        assert!(ExternalSteadyState::from_closed_form("nope", 1.0).is_err());
    }

    #[test]
    fn sampled_plugin_interpolates() {
        let s = ExternalSteadyState::from_closed_form("axisymmetric-swirl", 1.0).unwrap();
        let g = Grid::centered_box(3, 40, 1.0);
        let f = SampledField::sample_vector(g.clone(), &SteadyVelocity(&s));
        let e = ExternalSteadyState::from_sampled(f, 1.0).unwrap();
        let mut x = [0.0; 3];
        g.point(1234, &mut x);
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        s.velocity(&x, &mut a);
        e.velocity(&x, &mut b);
        for k in 0..3 {
            assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-14);
        }
        e.velocity(&[2.0, 0.0, 0.0], &mut b);
        assert_eq!(b, [0.0; 3]);
    }

    fn fd4(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    fn fd_divergence(fl: &StationaryFlow, x: &[f64], h: f64) -> f64 {
        (0..x.len())
            .map(|a| {
                fd4(
                    &|s| {
                        let mut y = x.to_vec();
                        y[a] = s;
                        fl.velocity_at(&y)[a]
                    },
                    x[a],
                    h,
                )
            })
            .sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rotation_structure(x in proptest::collection::vec(-5.0f64..5.0, 4)) {
            let u = linear_field_utilde(&x).unwrap();
            let dot: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
            prop_assert_eq!(dot, 0.0);
            let nu: f64 = u.iter().map(|v| v * v).sum();
            let nx: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!((nu - nx).abs() <= 1e-15 * nx);
        }

        #[test]
        fn pointwise_divergence_converges(x in proptest::collection::vec(-0.6f64..0.6, 4)) {
            let fl = canonical(4, 1.0);
            let e1 = fd_divergence(&fl, &x, 1e-2).abs();
            let e2 = fd_divergence(&fl, &x, 5e-3).abs();
            prop_assert!(e1 < 1e-5);
            prop_assert!(e2 <= e1 / 8.0 + 1e-12);
        }

        #[test]
        fn perp_stream_matches_velocity(a in -0.9f64..0.9, b in -0.9f64..0.9) {
            let fl = canonical(2, 1.0);
            let h = 1e-4;
            let s = |p: f64, q: f64| fl.stream_2d(&[p, q]).unwrap();
            let v = fl.velocity_at(&[a, b]);
            let d1 = (s(a + h, b) - s(a - h, b)) / (2.0 * h);
            let d2 = (s(a, b + h) - s(a, b - h)) / (2.0 * h);
            prop_assert!((d2 - v[0]).abs() < 1e-6);
            prop_assert!((-d1 - v[1]).abs() < 1e-6);
        }

        #[test]
        fn periodization_exact_in_ball(a in -0.49f64..0.49, b in -0.49f64..0.49) {
            let fl = canonical(2, 0.5);
            let c = TorusPoint::new(vec![1.0, 2.0]);
            let pv = periodize_velocity(&fl, &c).unwrap();
            let mut o = [0.0; 2];
            pv.eval(&[1.0 + a, 2.0 + b], &mut o);
            let v = fl.velocity_at(&[a, b]);
            prop_assert!((o[0] - v[0]).abs() < 1e-14 && (o[1] - v[1]).abs() < 1e-14);
        }
    }
}
