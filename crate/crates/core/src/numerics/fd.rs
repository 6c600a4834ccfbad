//! Finite-difference and quadrature operators on (possibly non-uniform) grids.

use nalgebra::DMatrix;

/// Fornberg's algorithm: weights `c` such that `f^{(m)}(x0) ≈ Σ c_j f(xs[j])`.
pub fn fornberg_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(m)
}

/// Dense fourth-order differentiation matrix for derivative order `m ≥ 1`.
///
/// Centred stencils of `2⌊(m+1)/2⌋ + 3` points in the interior; near the ends
/// the stencil is shifted inside the grid and widened to `m + 4` points.
pub fn diff_matrix(x: &[f64], m: usize) -> DMatrix<f64> {
    let n = x.len();
    let centred = 2 * m.div_ceil(2) + 3;
    let one_sided = m + 4;
    assert!(n >= one_sided, "grid too small for derivative order {m}");
    let half = centred / 2;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let (lo, len) = if i >= half && i + half < n {
            (i - half, centred)
        } else if i < half {
            (0, one_sided)
        } else {
            (n - one_sided, one_sided)
        };
        let w = fornberg_weights(x[i], &x[lo..lo + len], m);
        for (k, wk) in w.into_iter().enumerate() {
            d[(i, lo + k)] = wk;
        }
    }
    d
}

/// Fourth-order cell-integral weights: row `j` integrates the cubic through
/// the four nodes nearest to cell `[x_j, x_{j+1}]` over that cell.
fn cell_integral_weights(x: &[f64]) -> Vec<(usize, [f64; 4])> {
    let n = x.len();
    assert!(n >= 4, "need at least 4 nodes");
    (0..n - 1)
        .map(|j| {
            let lo = j.saturating_sub(1).min(n - 4);
            let nodes = [x[lo], x[lo + 1], x[lo + 2], x[lo + 3]];
            (lo, integrate_lagrange_cubic(&nodes, x[j], x[j + 1]))
        })
        .collect()
}

/// `∫_a^b L_k(t) dt` for the four cubic Lagrange basis polynomials.
pub fn integrate_lagrange_cubic(nodes: &[f64; 4], a: f64, b: f64) -> [f64; 4] {
    // 3-point Gauss–Legendre is exact for cubics
    const GX: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const GW: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [0.0; 4];
    for (gx, gw) in GX.iter().zip(GW) {
        let t = mid + half * gx;
        let l = lagrange_cubic(nodes, t);
        for k in 0..4 {
            out[k] += half * gw * l[k];
        }
    }
    out
}

/// Values of the four cubic Lagrange basis polynomials at `t`.
#[inline]
pub fn lagrange_cubic(nodes: &[f64; 4], t: f64) -> [f64; 4] {
    let mut l = [1.0; 4];
    for k in 0..4 {
        for q in 0..4 {
            if q != k {
                l[k] *= (t - nodes[q]) / (nodes[k] - nodes[q]);
            }
        }
    }
    l
}

/// Matrix `J` with `(J f)_i = ∫_{x_last}^{x_i} f dx`, fourth-order accurate.
///
/// `J` vanishes on the last row, so `J f` is the antiderivative pinned to
/// zero at the upper end of the grid.
pub fn cumulative_from_end(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let cells = cell_integral_weights(x);
    let mut j = DMatrix::zeros(n, n);
    for i in (0..n - 1).rev() {
        for c in 0..n {
            j[(i, c)] = j[(i + 1, c)];
        }
        let (lo, w) = cells[i];
        for k in 0..4 {
            j[(i, lo + k)] -= w[k];
        }
    }
    j
}

/// Fourth-order integration weights over the whole grid.
pub fn integration_weights(x: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; x.len()];
    for (lo, cw) in cell_integral_weights(x) {
        for k in 0..4 {
            w[lo + k] += cw[k];
        }
    }
    w
}

/// Applies a dense real operator to a vector.
pub fn apply(d: &DMatrix<f64>, f: &[f64]) -> Vec<f64> {
    let n = d.nrows();
    (0..n)
        .map(|i| (0..d.ncols()).map(|j| d[(i, j)] * f[j]).sum())
        .collect()
}

/// Local cubic Lagrange interpolant on a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct CubicInterp<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl<'a> CubicInterp<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        assert!(x.len() == y.len() && x.len() >= 4);
        Self { x, y }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let j = match self.x.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.y[i],
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let lo = j.saturating_sub(1).min(n - 4);
        let nodes = [self.x[lo], self.x[lo + 1], self.x[lo + 2], self.x[lo + 3]];
        let l = lagrange_cubic(&nodes, t);
        (0..4).map(|k| l[k] * self.y[lo + k]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn derivatives_exact_on_low_polynomials() {
        let x = grid(21);
        for m in 1..=4 {
            let d = diff_matrix(&x, m);
            // degree m+3 polynomial differentiated exactly by every stencil
            let p = m + 3;
            let f: Vec<f64> = x.iter().map(|t| t.powi(p as i32)).collect();
            let df = apply(&d, &f);
            let coef: f64 = ((p - m + 1)..=p).map(|v| v as f64).product();
            for (i, t) in x.iter().enumerate() {
                let exact = coef * t.powi((p - m) as i32);
                assert!((df[i] - exact).abs() < 1e-7, "m={m} i={i} {} {exact}", df[i]);
            }
        }
    }

    #[test]
    fn cumulative_integral_of_cubic() {
        let x = grid(17);
        let j = cumulative_from_end(&x);
        let f: Vec<f64> = x.iter().map(|t| 3.0 * t * t - 1.0).collect();
        let g = apply(&j, &f);
        for (i, t) in x.iter().enumerate() {
            // ∫_1^t (3s² − 1) ds = t³ − t
            assert!((g[i] - (t * t * t - t)).abs() < 1e-13);
        }
        assert_eq!(g[16], 0.0);
    }

    #[test]
    fn interp_reproduces_cubic() {
        let x = grid(9);
        let y: Vec<f64> = x.iter().map(|t| t * t * t - 2.0 * t).collect();
        let it = CubicInterp::new(&x, &y);
        for &t in &[0.0, 0.01, 0.33, 0.999, 1.0] {
            assert!((it.eval(t) - (t * t * t - 2.0 * t)).abs() < 1e-13);
        }
    }
}
