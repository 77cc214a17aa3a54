//! Points on the flat torus (R/2πZ)^d.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduces `x` to `[0, 2π)`.
pub fn reduce(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Representative of `x` modulo 2π in `[-π, π)`.
pub fn wrap(x: f64) -> f64 {
    let r = reduce(x + PI) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let mut coords = coords.into();
        coords.iter_mut().for_each(|c| *c = reduce(*c));
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn add(&self, other: &TorusPoint) -> Result<TorusPoint> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self::new(self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect::<Vec<_>>()))
    }

    pub fn offset(&self, v: &[f64]) -> Result<TorusPoint> {
        same_dim(self.dim(), v.len())?;
        Ok(Self::new(self.coords.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<_>>()))
    }
}

fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Geodesic distance on the flat torus.
pub fn torus_distance(z: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    same_dim(z.dim(), y.dim())?;
    Ok(dist_raw(z.coords(), y.coords()))
}

/// Torus distance between raw coordinate slices of equal length.
pub fn dist_raw(z: &[f64], y: &[f64]) -> f64 {
    z.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = wrap(a - b);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Frequency vector, never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    entries: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    irrational: Option<bool>,
}

impl FrequencyVector {
    pub fn new(entries: impl Into<Vec<f64>>) -> Result<Self> {
        let entries = entries.into();
        if entries.is_empty() || entries.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter("frequency vector must be nonzero".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite frequency".into()));
        }
        Ok(Self { entries, irrational: None })
    }

    pub fn with_hint(mut self, irrational: bool) -> Self {
        self.irrational = Some(irrational);
        self
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn irrationality_hint(&self) -> Option<bool> {
        self.irrational
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let o = TorusPoint::new(vec![0.0, 0.0]);
        assert_eq!(torus_distance(&o, &o).unwrap(), 0.0);
        let a = TorusPoint::new(vec![0.0]);
        let b = TorusPoint::new(vec![PI]);
        assert_abs_diff_eq!(torus_distance(&a, &b).unwrap(), PI, epsilon = 1e-15);
        let c = TorusPoint::new(vec![0.1]);
        let d = TorusPoint::new(vec![TAU - 0.1]);
        // brute force over lattice shifts
        let brute = [-1.0, 0.0, 1.0]
            .iter()
            .map(|k| (c.coords()[0] - d.coords()[0] + TAU * k).abs())
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(torus_distance(&c, &d).unwrap(), brute, epsilon = 1e-14);
        assert_abs_diff_eq!(brute, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn mismatched_dims() {
        let a = TorusPoint::new(vec![0.0]);
        let b = TorusPoint::new(vec![0.0, 1.0]);
        assert!(torus_distance(&a, &b).is_err());
    }

    #[test]
    fn reduction_edges() {
        assert_eq!(reduce(-1e-300), 0.0);
        assert!(reduce(-1e-17) < TAU);
        assert_eq!(reduce(TAU), 0.0);
        assert!(wrap(PI) >= -PI && wrap(PI) < PI);
    }

    #[test]
    fn zero_frequency_rejected() {
        assert!(FrequencyVector::new(vec![0.0, 0.0]).is_err());
        assert!(FrequencyVector::new(vec![1.0, 2f64.sqrt()]).is_ok());
    }

    fn brute(z: &[f64], y: &[f64]) -> f64 {
        let m = z.len();
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(m as u32) {
            let mut c = code;
            let mut s = 0.0;
            for i in 0..m {
                let k = (c % 3) as f64 - 1.0;
                c /= 3;
                let d = z[i] - y[i] + TAU * k;
                s += d * d;
            }
            best = best.min(s.sqrt());
        }
        best
    }

    proptest! {
        #[test]
        fn coords_reduced(v in proptest::collection::vec(-100.0f64..100.0, 1..5)) {
            let p = TorusPoint::new(v);
            prop_assert!(p.coords().iter().all(|&c| (0.0..TAU).contains(&c)));
        }

        #[test]
        fn metric_axioms(
            a in proptest::collection::vec(-10.0f64..10.0, 3),
            b in proptest::collection::vec(-10.0f64..10.0, 3),
            c in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let (a, b, c) = (TorusPoint::new(a), TorusPoint::new(b), TorusPoint::new(c));
            let ab = torus_distance(&a, &b).unwrap();
            let ba = torus_distance(&b, &a).unwrap();
            let bc = torus_distance(&b, &c).unwrap();
            let ac = torus_distance(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!(ab <= PI * 3f64.sqrt() + 1e-12);
            prop_assert!(torus_distance(&a, &a).unwrap() == 0.0);
            prop_assert!((ab - brute(a.coords(), b.coords())).abs() < 1e-12);
        }

        #[test]
        fn offsets_rereduce(v in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 2), w in proptest::collection::vec(-50.0f64..50.0, 2)) {
            let p = TorusPoint::new(v).offset(&w).unwrap();
            prop_assert!(p.coords().iter().all(|&c| (0.0..TAU).contains(&c)));
        }
    }
}
