use crate::error::{Error, Result};

/// Strictly increasing 1-D grid whose endpoints equal the declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    points: Vec<f64>,
}

impl Grid1D {
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::mapped(a, b, n, |s| s)
    }

    /// Grid `a + (b − a)·map(s)` over uniform `s ∈ [0, 1]`; `map` must be
    /// strictly increasing with `map(0) = 0`, `map(1) = 1`.
    pub fn mapped<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, map: F) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam {
                name: "n",
                detail: format!("grid needs at least 2 points, got {n}"),
            });
        }
        if !(a < b) {
            return Err(Error::InvalidParam {
                name: "interval",
                detail: format!("need a < b, got [{a}, {b}]"),
            });
        }
        let mut points: Vec<f64> = (0..n)
            .map(|i| a + (b - a) * map(i as f64 / (n - 1) as f64))
            .collect();
        points[0] = a;
        points[n - 1] = b;
        Self::from_points(points)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || !points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParam {
                name: "points",
                detail: "grid must be strictly increasing with >= 2 points".into(),
            });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Spacing of a uniform grid.
    pub fn step(&self) -> f64 {
        (self.last() - self.first()) / (self.len() - 1) as f64
    }

    /// Index `j` with `points[j] ≤ x ≤ points[j+1]` (clamped to the ends).
    pub fn locate(&self, x: f64) -> usize {
        let n = self.points.len();
        match self.points.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }
}

/// Smooth endpoint-clustering map `s³(10 − 15s + 6s²)`.
///
/// The grid spacing shrinks like `s²` at both ends, which resolves
/// `τ·ln τ`-type endpoint behaviour of slab radiation fields.
pub fn clustered_map(s: f64) -> f64 {
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}
