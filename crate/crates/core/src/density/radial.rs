use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::packing::{pack_balls, BallIndex, BallPacking, VerticalLines};
use crate::error::{Error, Result};
use crate::field::{lq_error, weakstar_pairing, Grid, SampledField};
use crate::par;
use crate::profile::SmoothStep;
use crate::torus::{reduce, wrap};
use crate::ScalarField;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A stream function `ψ₀` on the 2-torus with the bounds the error
/// certificate needs.
#[derive(Clone)]
pub struct StreamFunction {
    pub name: String,
    f: ScalarFn,
    /// `sup |ψ₀|`.
    pub sup: f64,
    /// `sup |∇ψ₀|`; `None` for data that is not Lipschitz.
    pub grad_sup: Option<f64>,
}

impl fmt::Debug for StreamFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StreamFunction")
            .field("name", &self.name)
            .field("sup", &self.sup)
            .field("grad_sup", &self.grad_sup)
            .finish()
    }
}

impl StreamFunction {
    pub fn new(
        name: impl Into<String>,
        sup: f64,
        grad_sup: Option<f64>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f), sup, grad_sup }
    }

    pub fn sin_sin() -> Self {
        Self::new("sin_sin", 1.0, Some(1.0), |x| x[0].sin() * x[1].sin())
    }

    /// `sign(sin x₁)`, with value 0 on the lines `x₁ ∈ {0, π}`.
    pub fn sign_sin_x1() -> Self {
        Self::new("sign_sin_x1", 1.0, None, |x| {
            let s = reduce(x[0]);
            if s == 0.0 || s == PI {
                0.0
            } else if s < PI {
                1.0
            } else {
                -1.0
            }
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), c.abs(), Some(0.0), move |_| c)
    }

    pub fn zero() -> Self {
        Self::new("zero", 0.0, Some(0.0), |_| 0.0)
    }

    /// Built-in data by name: `sin_sin`, `sign_sin_x1`, `zero`, `one`.
    pub fn builtin(id: &str) -> Result<Self> {
        match id {
            "sin_sin" => Ok(Self::sin_sin()),
            "sign_sin_x1" => Ok(Self::sign_sin_x1()),
            "zero" => Ok(Self::zero()),
            "one" => Ok(Self::constant(1.0)),
            other => Err(Error::InvalidParameter(format!("unknown stream function '{other}'"))),
        }
    }

    /// Bilinear interpolant of samples on a 2-torus grid. The gradient bound
    /// is the largest difference quotient, which is exact for the interpolant.
    pub fn from_sampled(name: impl Into<String>, field: SampledField) -> Result<Self> {
        let g = &field.grid;
        if g.dim() != 2 || field.components != 1 {
            return Err(Error::InvalidParameter("sampled stream function must be a scalar on T²".into()));
        }
        if g.extent.iter().any(|&e| (e - TAU).abs() > 1e-12) {
            return Err(Error::InvalidParameter("sampled stream function must cover the torus".into()));
        }
        let (n0, n1) = (g.shape[0], g.shape[1]);
        let (h0, h1) = (g.spacing(0), g.spacing(1));
        let v = &field.values;
        let at = |i: usize, j: usize| v[(i % n0) * n1 + (j % n1)];
        let mut grad: f64 = 0.0;
        for i in 0..n0 {
            for j in 0..n1 {
                let a = ((at(i + 1, j) - at(i, j)) / h0).abs();
                let b = ((at(i, j + 1) - at(i, j)) / h1).abs();
                grad = grad.max(a.hypot(b));
            }
        }
        // bilinear gradients combine differences of adjacent rows
        let grad = 2.0 * grad;
        let sup = field.max_abs();
        let origin = g.origin.clone();
        let vals = v.clone();
        Ok(Self::new(name, sup, Some(grad), move |x| {
            let u = reduce(x[0] - origin[0]) / h0;
            let w = reduce(x[1] - origin[1]) / h1;
            let (i, j) = (u.floor() as usize, w.floor() as usize);
            let (fu, fw) = (u - i as f64, w - j as f64);
            let at = |i: usize, j: usize| vals[(i % n0) * n1 + (j % n1)];
            (1.0 - fu) * ((1.0 - fw) * at(i, j) + fw * at(i, j + 1))
                + fu * ((1.0 - fw) * at(i + 1, j) + fw * at(i + 1, j + 1))
        }))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn sample(&self, res: usize) -> SampledField {
        SampledField::from_fn(Grid::cube(2, res), |x| self.eval(x))
    }
}

impl ScalarField for StreamFunction {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// Smooth test function for weak-* pairings.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    f: ScalarFn,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({})", self.name)
    }
}

impl TestFunction {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    /// `one`, `zero`, `cos_x1`, `cos_x2`, `sin_x1`, `sin_x2`.
    pub fn builtin(id: &str) -> Result<Self> {
        let f: fn(&[f64]) -> f64 = match id {
            "one" => |_| 1.0,
            "zero" => |_| 0.0,
            "cos_x1" => |x| x[0].cos(),
            "cos_x2" => |x| x[1].cos(),
            "sin_x1" => |x| x[0].sin(),
            "sin_x2" => |x| x[1].sin(),
            other => return Err(Error::InvalidParameter(format!("unknown test function '{other}'"))),
        };
        Ok(Self::new(id, f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Tensor polar rule for disk averages.
#[derive(Debug, Clone)]
pub struct PolarRule {
    radial: Vec<(f64, f64)>,
    angles: Vec<(f64, f64)>,
}

impl PolarRule {
    pub fn new(n_radial: usize, n_angular: usize) -> Self {
        let (x, w) = gauss_legendre(n_radial);
        // s ∈ [0,1] with area weight s ds, normalized to total 1 with angles
        let radial: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| {
                let s = 0.5 * (xi + 1.0);
                (s, wi * s / n_angular as f64)
            })
            .collect();
        let angles = (0..n_angular)
            .map(|k| {
                let a = TAU * k as f64 / n_angular as f64;
                (a.cos(), a.sin())
            })
            .collect();
        Self { radial, angles }
    }

    /// Average of `f` over the disk of radius `r` around `c`.
    pub fn average(&self, f: &StreamFunction, c: [f64; 2], r: f64) -> f64 {
        let mut acc = 0.0;
        let mut p = [0.0; 2];
        for &(s, w) in &self.radial {
            let mut ring = 0.0;
            for &(ca, sa) in &self.angles {
                p[0] = c[0] + r * s * ca;
                p[1] = c[1] + r * s * sa;
                ring += f.eval(&p);
            }
            acc += w * ring;
        }
        acc
    }
}

impl Default for PolarRule {
    fn default() -> Self {
        Self::new(64, 128)
    }
}

/// Per-ball averages `a_l` of `ψ₀`. Lattice-size disks use the 64×128 rule;
/// gap disks below a quarter of the largest radius use 16×32.
pub fn step_average(psi0: &StreamFunction, packing: &BallPacking) -> Vec<f64> {
    let fine = PolarRule::default();
    let coarse = PolarRule::new(16, 32);
    let cut = 0.25 * packing.max_radius;
    par::map_range(packing.balls.len(), |l| {
        let b = &packing.balls[l];
        let rule = if b.radius < cut { &coarse } else { &fine };
        rule.average(psi0, b.center, b.radius)
    })
}

/// Bound on `‖φ − Φ‖` from the transition annuli (pairing mass for `q = ∞`).
pub fn smoothing_bound(packing: &BallPacking, amplitudes: &[f64], q: f64, m: u64) -> f64 {
    let keep = 1.0 - 1.0 / m as f64;
    let frac = 1.0 - keep * keep;
    let terms = packing.balls.iter().zip(amplitudes).map(|(b, &a)| {
        let area = PI * b.radius * b.radius * frac;
        if q.is_infinite() {
            a.abs() * area
        } else {
            a.abs().powf(q) * area
        }
    });
    let s: f64 = terms.sum();
    if q.is_infinite() {
        s
    } else {
        s.powf(1.0 / q)
    }
}

/// Smallest `m = 2^k ≥ 2` whose smoothing bound is within `budget`.
pub fn choose_smoothing_index(packing: &BallPacking, amplitudes: &[f64], q: f64, budget: f64) -> u64 {
    let mut m = 2u64;
    while smoothing_bound(packing, amplitudes, q, m) > budget && m < 1 << 62 {
        m *= 2;
    }
    m
}

/// `φⁿ = Σ_l a_l H_m(ρ(x, y_l)/r_l)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocallyRadialFunction {
    pub packing: BallPacking,
    pub amplitudes: Vec<f64>,
    pub smoothing: u64,
    #[serde(skip)]
    index: OnceLock<BallIndex>,
}

impl LocallyRadialFunction {
    pub fn new(packing: BallPacking, amplitudes: Vec<f64>, smoothing: u64) -> Result<Self> {
        if amplitudes.len() != packing.balls.len() {
            return Err(Error::DimensionMismatch { expected: packing.balls.len(), got: amplitudes.len() });
        }
        SmoothStep::new(smoothing)?;
        Ok(Self { packing, amplitudes, smoothing, index: OnceLock::new() })
    }

    fn index(&self) -> &BallIndex {
        self.index.get_or_init(|| self.packing.index())
    }

    /// Ball containing `x` with the wrapped offset from its center.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, [f64; 2])> {
        let l = self.index().locate(&self.packing.balls, [x[0], x[1]])?;
        let c = self.packing.balls[l].center;
        Some((l, [wrap(x[0] - c[0]), wrap(x[1] - c[1])]))
    }

    /// Step function `Φⁿ`.
    pub fn step_value(&self, x: &[f64]) -> f64 {
        self.locate(x).map_or(0.0, |(l, _)| self.amplitudes[l])
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.local(x).0
    }

    /// `(φ, ∇φ, Δφ)` at `x`.
    pub fn local(&self, x: &[f64]) -> (f64, [f64; 2], f64) {
        let Some((l, d)) = self.locate(x) else {
            return (0.0, [0.0; 2], 0.0);
        };
        let a = self.amplitudes[l];
        let r = self.packing.balls[l].radius;
        let rho = d[0].hypot(d[1]);
        let step = SmoothStep { index: self.smoothing };
        let s = rho / r;
        if s <= step.plateau() {
            return (a, [0.0; 2], 0.0);
        }
        let (h, h1, h2) = step.eval_with_derivatives(s);
        let g = a * h1 / (r * rho);
        (a * h, [g * d[0], g * d[1]], a * (h2 / (r * r) + h1 / (r * rho)))
    }

    pub fn sample(&self, res: usize) -> SampledField {
        SampledField::from_fn(Grid::cube(2, res), |x| self.value(x))
    }

    /// `∫ φ g` by polar quadrature on each disk, exact for the plateau
    /// up to the smoothness of `g`. Grid sampling misses disks thinner
    /// than the grid spacing.
    pub fn pairing(&self, g: &TestFunction) -> f64 {
        let step = SmoothStep { index: self.smoothing };
        let p = step.plateau();
        let n_angular = 32;
        // nodes in s with weights H(s) s ds; the transition layer needs more
        let mut radial = Vec::with_capacity(32);
        for (lo, hi, nodes) in [(0.0, p, 8), (p, 1.0, 24)] {
            let (x, w) = gauss_legendre(nodes);
            let half = 0.5 * (hi - lo);
            for (&xi, &wi) in x.iter().zip(&w) {
                let s = lo + half * (xi + 1.0);
                radial.push((s, wi * half * s * step.eval(s) * TAU / n_angular as f64));
            }
        }
        let angles: Vec<(f64, f64)> = (0..n_angular)
            .map(|k| {
                let a = TAU * k as f64 / n_angular as f64;
                (a.cos(), a.sin())
            })
            .collect();
        par::sum_range(self.packing.balls.len(), |l| {
            let b = &self.packing.balls[l];
            let mut acc = 0.0;
            let mut q = [0.0; 2];
            for &(s, ws) in &radial {
                let mut ring = 0.0;
                for &(ca, sa) in &angles {
                    q[0] = b.center[0] + b.radius * s * ca;
                    q[1] = b.center[1] + b.radius * s * sa;
                    ring += g.eval(&q);
                }
                acc += ws * ring;
            }
            self.amplitudes[l] * b.radius * b.radius * acc
        })
    }
}

impl ScalarField for LocallyRadialFunction {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        LocallyRadialFunction::value(self, x)
    }
}

/// Quantities entering the error certificate of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedReport {
    pub n: usize,
    pub q: f64,
    pub balls: usize,
    pub margin: u64,
    pub smoothing: u64,
    pub max_radius: f64,
    pub total_area: f64,
    pub uncovered_area: f64,
    pub smoothing_bound: f64,
    /// Bound on `‖Φⁿ − ψ₀‖_q` (finite `q`, Lipschitz `ψ₀`).
    pub step_bound: Option<f64>,
    /// Bound on `‖φⁿ − ψ₀‖_q`.
    pub certified_bound: Option<f64>,
}

/// Packs, averages and smooths: the stage-`n` locally radial approximation.
pub fn build_locally_radial(
    psi0: &StreamFunction,
    n: usize,
    lines: &VerticalLines,
    q: f64,
) -> Result<(LocallyRadialFunction, CertifiedReport)> {
    build_locally_radial_on(psi0, pack_balls(n, lines)?, q)
}

/// Same as [`build_locally_radial`] on an existing packing, so one packing
/// can serve several exponents.
pub fn build_locally_radial_on(
    psi0: &StreamFunction,
    packing: BallPacking,
    q: f64,
) -> Result<(LocallyRadialFunction, CertifiedReport)> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q must be in [1, ∞], got {q}")));
    }
    let n = packing.n;
    let amplitudes = step_average(psi0, &packing);
    let budget = 1.0 / n as f64;
    let m = choose_smoothing_index(&packing, &amplitudes, q, budget);
    let sb = smoothing_bound(&packing, &amplitudes, q, m);
    let step_bound = match (q.is_finite(), psi0.grad_sup) {
        (true, Some(g)) => {
            let grad_term = (2.0 * packing.max_radius * g).powf(q) * packing.total_area;
            let gap_term = psi0.sup.powf(q) * packing.uncovered_area;
            Some((grad_term + gap_term).powf(1.0 / q))
        }
        _ => None,
    };
    let report = CertifiedReport {
        n,
        q,
        balls: packing.balls.len(),
        margin: packing.margin,
        smoothing: m,
        max_radius: packing.max_radius,
        total_area: packing.total_area,
        uncovered_area: packing.uncovered_area,
        smoothing_bound: sb,
        step_bound,
        certified_bound: step_bound.map(|s| s + sb),
    };
    Ok((LocallyRadialFunction::new(packing, amplitudes, m)?, report))
}

/// Grid `L^q` distance between `φⁿ` and `ψ₀`.
pub fn measured_error(phi: &LocallyRadialFunction, psi0: &StreamFunction, res: usize, q: f64) -> Result<f64> {
    lq_error(&phi.sample(res), &psi0.sample(res), q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingRow {
    pub n: usize,
    pub test: String,
    pub pairing_phi: f64,
    pub pairing_psi0: f64,
    pub difference: f64,
    pub uncovered_area: f64,
    pub smoothing_bound: f64,
}

/// Pairings `∫φⁿ g` (disk quadrature) against `∫ψ₀ g` (`res²` grid) for each stage.
pub fn weakstar_convergence_check(
    psi0: &StreamFunction,
    tests: &[TestFunction],
    ns: &[usize],
    lines: &VerticalLines,
    res: usize,
) -> Result<Vec<PairingRow>> {
    let grid = Grid::cube(2, res);
    let psi = psi0.sample(res);
    let mut rows = vec![];
    for &n in ns {
        let (phi, report) = build_locally_radial(psi0, n, lines, f64::INFINITY)?;
        for g in tests {
            let gs = SampledField::from_fn(grid.clone(), |x| g.eval(x));
            let a = phi.pairing(g);
            let b = weakstar_pairing(&psi, &gs)?;
            rows.push(PairingRow {
                n,
                test: g.name.clone(),
                pairing_phi: a,
                pairing_psi0: b,
                difference: a - b,
                uncovered_area: report.uncovered_area,
                smoothing_bound: report.smoothing_bound,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::packing::{Ball, PackingOptions};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn single_ball(r: f64) -> BallPacking {
        BallPacking {
            n: 1,
            lines: VerticalLines::new(vec![0.0]).unwrap(),
            balls: vec![Ball { center: [PI, PI], radius: r }],
            margin: 4,
            strips: vec![vec![0]],
            max_radius: r,
            total_area: PI * r * r,
            uncovered_area: TAU * TAU - PI * r * r,
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(64);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        // degree 126 is exact
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(126)).sum();
        assert_abs_diff_eq!(s, 2.0 / 127.0, epsilon = 1e-13);
        let (x3, w3) = gauss_legendre(3);
        assert_abs_diff_eq!(x3[2], 0.6f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w3[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn averages() {
        let p = single_ball(0.05);
        let c = step_average(&StreamFunction::constant(0.7), &p);
        assert_abs_diff_eq!(c[0], 0.7, epsilon = 1e-14);
        // sin x1 on a disk: average 2 J1(r)/r sin(c1), J1 by its power series
        let r: f64 = 0.05;
        let mut q = single_ball(r);
        q.balls[0].center = [PI / 2.0, 1.0];
        let a = step_average(&StreamFunction::new("s", 1.0, Some(1.0), |x| x[0].sin()), &q);
        let (mut term, mut bessel) = (1.0, 0.0);
        for k in 0..10 {
            bessel += term;
            term *= -(r / 2.0).powi(2) / ((k + 1) as f64 * (k + 2) as f64);
        }
        assert_abs_diff_eq!(a[0], bessel, epsilon = 1e-14);
    }

    #[test]
    fn smoothing_examples() {
        let p = single_ball(0.25);
        assert_eq!(choose_smoothing_index(&p, &[0.0], 1.0, 1.0), 2);
        // q = 1: annulus area π r² (1 - (1-1/m)²) against the budget
        for n in [1usize, 4, 16, 64] {
            let m = choose_smoothing_index(&p, &[1.0], 1.0, 1.0 / n as f64);
            let area = |m: u64| {
                let k = 1.0 - 1.0 / m as f64;
                PI * 0.0625 * (1.0 - k * k)
            };
            assert!(area(m) <= 1.0 / n as f64);
            if m > 2 {
                assert!(area(m / 2) > 1.0 / n as f64);
            }
        }
    }

    #[test]
    fn local_derivatives_match_differences() {
        let p = single_ball(0.3);
        let phi = LocallyRadialFunction::new(p, vec![2.0], 4).unwrap();
        let x = [PI + 0.2, PI + 0.1];
        let (_, g, lap) = phi.local(&x);
        let h = 1e-4;
        let f = |a: f64, b: f64| phi.value(&[a, b]);
        let gx = (f(x[0] + h, x[1]) - f(x[0] - h, x[1])) / (2.0 * h);
        let gy = (f(x[0], x[1] + h) - f(x[0], x[1] - h)) / (2.0 * h);
        let l = (f(x[0] + h, x[1]) + f(x[0] - h, x[1]) + f(x[0], x[1] + h) + f(x[0], x[1] - h) - 4.0 * f(x[0], x[1]))
            / (h * h);
        assert_abs_diff_eq!(g[0], gx, epsilon = 1e-6);
        assert_abs_diff_eq!(g[1], gy, epsilon = 1e-6);
        assert_abs_diff_eq!(lap, l, epsilon = 1e-3 * lap.abs().max(1.0));
        assert_eq!(phi.value(&[PI + 0.31, PI]), 0.0);
        assert_eq!(phi.value(&[PI, PI]), 2.0);
    }

    #[test]
    fn zero_data_gives_zero() {
        let lines = VerticalLines::equispaced(1).unwrap();
        let (phi, rep) = build_locally_radial(&StreamFunction::zero(), 4, &lines, 2.0).unwrap();
        assert!(phi.amplitudes.iter().all(|&a| a == 0.0));
        assert_eq!(rep.smoothing, 2);
        assert_eq!(rep.certified_bound, Some(0.0));
        assert_eq!(measured_error(&phi, &StreamFunction::zero(), 64, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn sin_sin_respects_bound() {
        let lines = VerticalLines::equispaced(2).unwrap();
        let psi = StreamFunction::sin_sin();
        let mut last = f64::INFINITY;
        for n in [4, 8, 16] {
            let (phi, rep) = build_locally_radial(&psi, n, &lines, 2.0).unwrap();
            let e = measured_error(&phi, &psi, 512, 2.0).unwrap();
            assert!(e <= rep.certified_bound.unwrap(), "n={n}: {e} > {:?}", rep.certified_bound);
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn pairing_matches_oracles() {
        let lines = VerticalLines::equispaced(2).unwrap();
        let packing = pack_balls(4, &lines).unwrap();
        let amps: Vec<f64> = (0..packing.balls.len()).map(|l| 1.0 + (l % 3) as f64).collect();
        let phi = LocallyRadialFunction::new(packing, amps, 4).unwrap();
        // ∫H(|x-c|/r) cos x₁ = 2π r² cos c₁ ∫₀¹ H(s) J₀(rs) s ds, by Simpson
        let step = SmoothStep { index: 4 };
        let j0 = |z: f64| {
            let (mut term, mut sum) = (1.0, 1.0);
            for k in 1..30 {
                term *= -(z * z) / (4.0 * (k * k) as f64);
                sum += term;
            }
            sum
        };
        let simpson = |r: f64| {
            let (k, h) = (4_000, 1.0 / 4_000.0);
            let f = |i: usize| {
                let s = i as f64 * h;
                step.eval(s) * j0(r * s) * s
            };
            let mut acc = f(0) + f(k);
            for i in 1..k {
                acc += f(i) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        let total = |weight: &dyn Fn(&Ball) -> f64| -> f64 {
            phi.packing.balls.iter().zip(&phi.amplitudes).map(|(b, a)| a * weight(b)).sum()
        };
        let plateau = simpson(0.0);
        let one = TestFunction::builtin("one").unwrap();
        let expect = total(&|b| TAU * b.radius * b.radius * plateau);
        assert_relative_eq!(phi.pairing(&one), expect, max_relative = 1e-9);
        let cos = TestFunction::builtin("cos_x1").unwrap();
        let expect = total(&|b| TAU * b.radius * b.radius * b.center[0].cos() * simpson(b.radius));
        assert_abs_diff_eq!(phi.pairing(&cos), expect, epsilon = 1e-9);
    }

    #[test]
    fn weakstar_examples() {
        let lines = VerticalLines::equispaced(2).unwrap();
        let zero = TestFunction::builtin("zero").unwrap();
        let rows = weakstar_convergence_check(&StreamFunction::sign_sin_x1(), &[zero], &[4], &lines, 64).unwrap();
        assert_eq!(rows[0].pairing_phi, 0.0);
        let one = TestFunction::builtin("one").unwrap();
        let rows = weakstar_convergence_check(&StreamFunction::constant(1.0), &[one], &[4, 8], &lines, 256).unwrap();
        for r in rows {
            assert_abs_diff_eq!(r.pairing_psi0, TAU * TAU, epsilon = 1e-9);
            let budget = PackingOptions::default().budget_scale * TAU * TAU / r.n as f64 + 1.0 / r.n as f64;
            assert!(r.difference.abs() <= budget, "{r:?}");
        }
    }

    #[test]
    fn sampled_stream_function() {
        let f = SampledField::from_fn(Grid::cube(2, 64), |x| x[0].cos());
        let s = StreamFunction::from_sampled("c", f).unwrap();
        assert_abs_diff_eq!(s.eval(&[0.0, 1.0]), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eval(&[0.05, 2.0]), 0.05f64.cos(), epsilon = 2e-3);
        assert!(s.grad_sup.unwrap() >= 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn averages_bounded_by_sup(c0 in 0.0..TAU, c1 in 0.0..TAU, r in 0.01..0.5f64) {
            let mut p = single_ball(r);
            p.balls[0].center = [c0, c1];
            for psi in [StreamFunction::sin_sin(), StreamFunction::sign_sin_x1()] {
                let a = step_average(&psi, &p)[0];
                prop_assert!(a.abs() <= psi.sup + 1e-14);
            }
        }

        #[test]
        fn smoothing_monotone_in_budget(r in 0.05..0.4f64, a in -2.0..2.0f64, n in 1usize..200, q in 1.0..4.0f64) {
            let p = single_ball(r);
            let m1 = choose_smoothing_index(&p, &[a], q, 1.0 / n as f64);
            let m2 = choose_smoothing_index(&p, &[a], q, 0.5 / n as f64);
            prop_assert!(m2 >= m1);
        }
    }
}
