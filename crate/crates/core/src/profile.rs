//! Smooth compactly supported building blocks: the radial bump, the tube
//! cutoff and the plateau family used for locally radial functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smooth partition `S(t) = σ(t)/(σ(t)+σ(1-t))` with `σ(t) = exp(-1/t)`,
/// returned with its first two derivatives.
pub fn partition(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let u = 1.0 - t;
    let z = 1.0 / t - 1.0 / u;
    let s = if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    };
    let q = s * (1.0 - s);
    let g = 1.0 / (t * t) + 1.0 / (u * u);
    let dg = -2.0 / (t * t * t) + 2.0 / (u * u * u);
    let d1 = q * g;
    let d2 = d1 * (1.0 - 2.0 * s) * g + q * dg;
    (s, d1, d2)
}

/// Radial profile `f(r) = exp(-1 - β x²/(1-x²))` with `x = r/R`.
///
/// `β = 1` is the classical bump `exp(-1/(1-x²))`. Larger `β` keeps
/// `f(0) = e^{-1}` but concentrates the profile, which makes it far easier
/// to resolve on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub support_radius: f64,
    #[serde(default = "one")]
    pub sharpness: f64,
}

fn one() -> f64 {
    1.0
}

/// Sharpness used by default in constructions.
pub const DEFAULT_SHARPNESS: f64 = 8.0;

impl BumpProfile {
    pub fn new(support_radius: f64, sharpness: f64) -> Result<Self> {
        if !(support_radius > 0.0 && support_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("support radius must be positive, got {support_radius}")));
        }
        if !(sharpness > 0.0 && sharpness.is_finite()) {
            return Err(Error::InvalidParameter(format!("sharpness must be positive, got {sharpness}")));
        }
        Ok(Self { support_radius, sharpness })
    }

    /// The classical bump `exp(-1/(1-(r/R)²))`.
    pub fn canonical(support_radius: f64) -> Result<Self> {
        Self::new(support_radius, 1.0)
    }

    pub fn f(&self, r: f64) -> f64 {
        let x = r / self.support_radius;
        let x2 = x * x;
        if x2 >= 1.0 {
            return 0.0;
        }
        (-1.0 - self.sharpness * x2 / (1.0 - x2)).exp()
    }

    pub fn f_prime(&self, r: f64) -> f64 {
        let x = r / self.support_radius;
        let x2 = x * x;
        if x2 >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - x2;
        -self.f(r) * 2.0 * self.sharpness * x / (w * w * self.support_radius)
    }
}

/// Tube cutoff: 1 on `|r| < ε`, 0 on `|r| > 2ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffChi {
    pub eps: f64,
}

impl CutoffChi {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("cutoff eps must be positive, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn eval(&self, r: f64) -> f64 {
        partition((2.0 * self.eps - r.abs()) / self.eps).0
    }

    /// Derivative in `r`.
    pub fn derivative(&self, r: f64) -> f64 {
        let (_, d, _) = partition((2.0 * self.eps - r.abs()) / self.eps);
        -r.signum() * d / self.eps
    }
}

/// Plateau function `H_m(s) = S(m(1-|s|))`: 1 on `|s| ≤ 1-1/m`, 0 on `|s| ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothStep {
    pub index: u64,
}

impl SmoothStep {
    pub fn new(index: u64) -> Result<Self> {
        if index < 2 {
            return Err(Error::InvalidParameter(format!("smoothing index must be at least 2, got {index}")));
        }
        Ok(Self { index })
    }

    pub fn eval(&self, s: f64) -> f64 {
        partition(self.index as f64 * (1.0 - s.abs())).0
    }

    /// `(H, H', H'')` at `s ≥ 0`; the plateau makes `s = 0` regular.
    pub fn eval_with_derivatives(&self, s: f64) -> (f64, f64, f64) {
        let m = self.index as f64;
        let (h, d1, d2) = partition(m * (1.0 - s.abs()));
        (h, -m * s.signum() * d1, m * m * d2)
    }

    /// Inner edge of the transition layer, `1 - 1/m`.
    pub fn plateau(&self) -> f64 {
        1.0 - 1.0 / self.index as f64
    }
}

/// Smoothing index check usable without constructing a step.
pub fn smooth_step_eval(s: f64, m: u64) -> Result<f64> {
    Ok(SmoothStep::new(m)?.eval(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fd1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn bump_examples() {
        let p = BumpProfile::canonical(1.0).unwrap();
        assert_eq!(p.f(1.5), 0.0);
        assert_abs_diff_eq!(p.f(0.0), (-1.0f64).exp(), epsilon = 1e-16);
        assert_abs_diff_eq!(p.f(0.0), 0.367_879_4, epsilon = 1e-7);
        assert_eq!(p.f(0.3) - p.f(-0.3), 0.0);
        assert_abs_diff_eq!(p.f(0.5), (-1.0f64 / 0.75).exp(), epsilon = 1e-16);
        let s = BumpProfile::new(2.0, 8.0).unwrap();
        assert_abs_diff_eq!(s.f(0.0), (-1.0f64).exp(), epsilon = 1e-16);
        assert!(BumpProfile::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn bump_derivative_matches_differences() {
        for beta in [1.0, 8.0] {
            let p = BumpProfile::new(0.7, beta).unwrap();
            for &r in &[-0.6, -0.2, 0.0, 0.1, 0.35, 0.55, 0.69] {
                let num = fd1(&|x| p.f(x), r, 1e-5);
                assert_abs_diff_eq!(p.f_prime(r), num, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn bump_flat_at_support_edge() {
        let p = BumpProfile::canonical(1.0).unwrap();
        // centered k-th differences at points approaching the edge
        let diff = |k: usize, r: f64, h: f64| {
            let binom = [
                [1.0, 0.0, 0.0, 0.0, 0.0],
                [1.0, 1.0, 0.0, 0.0, 0.0],
                [1.0, 2.0, 1.0, 0.0, 0.0],
                [1.0, 3.0, 3.0, 1.0, 0.0],
                [1.0, 4.0, 6.0, 4.0, 1.0],
            ];
            let mut acc = 0.0;
            for i in 0..=k {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binom[k][i] * p.f(r + (k as f64 / 2.0 - i as f64) * h);
            }
            acc / h.powi(k as i32)
        };
        for k in 1..=4 {
            let vals: Vec<f64> =
                [0.02, 0.01, 0.005].iter().map(|&delta| diff(k, 1.0 - delta, delta / 20.0).abs()).collect();
            assert!(vals[0] > vals[1] && vals[1] > vals[2], "order {k}: {vals:?}");
            assert!(vals[2] < 1e-20, "order {k}: {vals:?}");
        }
    }

    #[test]
    fn chi_examples() {
        let c = CutoffChi::new(0.2).unwrap();
        assert_eq!(c.eval(0.1), 1.0);
        assert_eq!(c.eval(0.6), 0.0);
        let mid = c.eval(0.3);
        assert!(mid > 0.0 && mid < 1.0);
        assert_abs_diff_eq!(mid, 0.5, epsilon = 1e-15);
        for &r in &[0.21, 0.27, 0.33, 0.39, -0.25] {
            assert_abs_diff_eq!(c.derivative(r), fd1(&|x| c.eval(x), r, 1e-6), epsilon = 1e-6);
        }
    }

    #[test]
    fn chi_flat_at_plateau_edges() {
        let c = CutoffChi::new(1.0).unwrap();
        for edge in [1.0, 2.0] {
            for h in [1e-2, 5e-3] {
                let d = fd1(&|x| c.eval(x), edge, h);
                assert!(d.abs() < 1e-12, "edge {edge}: {d}");
            }
        }
    }

    #[test]
    fn smooth_step_examples() {
        assert_eq!(smooth_step_eval(0.25, 4).unwrap(), 1.0);
        assert_eq!(smooth_step_eval(1.2, 4).unwrap(), 0.0);
        assert!(smooth_step_eval(0.5, 1).is_err());
        // composite Simpson on [0, 1] with the plateau split out
        for m in [2u64, 4, 8] {
            let h = SmoothStep::new(m).unwrap();
            let a = 1.0 - 1.0 / m as f64;
            let k = 20_000;
            let dx = (1.0 - a) / k as f64;
            let mut acc = 0.0;
            for i in 0..=k {
                let w = if i == 0 || i == k {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * (1.0 - h.eval(a + i as f64 * dx));
            }
            let l1 = 2.0 * acc * dx / 3.0;
            assert!(l1 <= 2.0 / m as f64);
            assert_abs_diff_eq!(l1, 1.0 / m as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn step_derivatives_match_differences() {
        let h = SmoothStep::new(4).unwrap();
        for &s in &[0.76, 0.8, 0.87, 0.93, 0.99] {
            let (_, d1, d2) = h.eval_with_derivatives(s);
            assert_abs_diff_eq!(d1, fd1(&|x| h.eval(x), s, 1e-5), epsilon = 1e-6);
            let num2 = fd1(&|x| h.eval_with_derivatives(x).1, s, 1e-5);
            assert_abs_diff_eq!(d2, num2, epsilon = 1e-4 * (1.0 + d2.abs()));
        }
    }

    proptest! {
        #[test]
        fn bump_even_and_supported(r in -3.0f64..3.0, beta in 0.5f64..12.0) {
            let p = BumpProfile::new(1.3, beta).unwrap();
            prop_assert_eq!(p.f(r), p.f(-r));
            if r.abs() >= 1.3 { prop_assert_eq!(p.f(r), 0.0); }
            prop_assert!(p.f(r) <= (-1.0f64).exp());
        }

        #[test]
        fn chi_bounds(r in -5.0f64..5.0, eps in 0.01f64..1.0) {
            let c = CutoffChi::new(eps).unwrap();
            let v = c.eval(r);
            prop_assert!((0.0..=1.0).contains(&v));
            if r.abs() < eps { prop_assert_eq!(v, 1.0); }
            if r.abs() > 2.0 * eps { prop_assert_eq!(v, 0.0); }
        }

        #[test]
        fn step_bounds(s in -2.0f64..2.0, k in 1u32..12) {
            let h = SmoothStep::new(1 << k).unwrap();
            let v = h.eval(s);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, h.eval(-s));
            if s.abs() <= 0.5 { prop_assert_eq!(v, 1.0); }
            if s.abs() >= 1.0 { prop_assert_eq!(v, 0.0); }
        }

        #[test]
        fn partition_symmetry(t in -0.5f64..1.5) {
            let a = partition(t).0;
            let b = partition(1.0 - t).0;
            prop_assert!((a + b - 1.0).abs() < 1e-15);
        }
    }
}
