use crate::error::{Error, Result};
use std::f64::consts::PI;

/// A quadrature rule on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre rule with `order` points on `[a, b]`.
///
/// Roots of `P_order` by Newton iteration from the Chebyshev-like initial
/// guess; exact for polynomials of degree ≤ `2·order − 1`.
pub fn gauss_nodes(order: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::InvalidParam {
            name: "order",
            detail: "must be >= 1".into(),
        });
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParam {
            name: "interval",
            detail: format!("need finite a < b, got [{a}, {b}]"),
        });
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp;
        loop {
            let (p1, dp) = legendre_with_derivative(n, z);
            pp = dp;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        pp = dp;
        let w = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        // ascending order
        nodes[i] = xm - xl * z;
        nodes[n - 1 - i] = xm + xl * z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = xm;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        interval: (a, b),
    })
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
    }
    let dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_and_two_point_rules() {
        let r = gauss_nodes(1, -1.0, 1.0).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);

        let r = gauss_nodes(2, -1.0, 1.0).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15 && (r.nodes[1] - x).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15 && (r.weights[1] - 1.0).abs() < 1e-15);
        assert!(r.integrate(|x| x * x * x).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(gauss_nodes(3, 1.0, 1.0).is_err());
        assert!(gauss_nodes(0, 0.0, 1.0).is_err());
    }

    #[test]
    fn nodes_inside_and_increasing() {
        let r = gauss_nodes(24, 0.0, 1.0).unwrap();
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(r.nodes[0] > 0.0 && r.nodes[23] < 1.0);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }
}
