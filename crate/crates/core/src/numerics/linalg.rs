//! Dense complex linear algebra: LU solves and generalized eigenvalue extraction.
//!
//! A pencil `A·x = γ·B·x` whose `B` has identically zero rows (boundary
//! conditions imposed by row replacement) is first reduced: the zero rows of
//! `B` are algebraic constraints `C·x = 0`, which are solved for as many
//! unknowns by complete pivoting. What remains is a standard eigenproblem
//! `B_r⁻¹·A_r` without infinite eigenvalues.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigenvalue together with its right eigenvector.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
}

/// Ordering used to pick the leading eigenvalue: larger real part first, then
/// nonnegative imaginary part on (near) ties.
pub fn leads(a: Complex64, b: Complex64) -> bool {
    let scale = 1e-10 * (1.0 + a.norm().max(b.norm()));
    if (a.re - b.re).abs() > scale {
        a.re > b.re
    } else {
        a.im >= 0.0 && b.im < 0.0 || (a.im >= 0.0) == (b.im >= 0.0) && a.re > b.re
    }
}

/// Index of the leading element of `values` under [`leads`].
pub fn leading_index(values: &[Complex64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.re.is_finite() || !v.im.is_finite() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(j) if leads(v, values[j]) => Some(i),
            keep => keep,
        };
    }
    best
}

/// A pencil reduced to standard form `C = B_r⁻¹·A_r` on the free unknowns.
///
/// `A` may depend affinely on a parameter; callers build [`ReducedPencil`]
/// from `A0 + p·A1` via [`ReducedPencil::affine`], which keeps both parts so
/// that `C(p) = C0 + p·C1` can be re-evaluated without refactoring `B`.
#[derive(Debug, Clone)]
pub struct ReducedPencil {
    /// Constrained unknowns, solved as `x_c = E·x_f`.
    constrained: Vec<usize>,
    free: Vec<usize>,
    /// `E`; independent of the parameter since constraint rows are.
    elim: CMat,
    c0: CMat,
    c1: CMat,
    dim: usize,
}

impl ReducedPencil {
    pub fn new(a: &CMat, b: &CMat) -> Result<Self> {
        let zero = CMat::zeros(a.nrows(), a.ncols());
        Self::affine(a, &zero, b)
    }

    /// Reduces `(A0 + p·A1)·x = γ·B·x`. Constraint rows (zero rows of `B`)
    /// must not depend on `p`.
    pub fn affine(a0: &CMat, a1: &CMat, b: &CMat) -> Result<Self> {
        let n = a0.nrows();
        if a0.ncols() != n || b.nrows() != n || b.ncols() != n || a1.shape() != (n, n) {
            return Err(Error::InvalidParam {
                name: "pencil",
                detail: "A and B must be square with equal dimension".into(),
            });
        }
        let scale_b = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let con_rows: Vec<usize> = (0..n)
            .filter(|&i| (0..n).all(|j| b[(i, j)].norm() <= 1e-300_f64.max(0.0 * scale_b)))
            .collect();
        let dyn_rows: Vec<usize> = (0..n).filter(|i| !con_rows.contains(i)).collect();
        for &r in &con_rows {
            if (0..n).any(|j| a1[(r, j)] != ZERO) {
                return Err(Error::InvalidParam {
                    name: "pencil",
                    detail: "constraint rows must not depend on the parameter".into(),
                });
            }
        }
        let k = con_rows.len();
        // complete pivoting on the constraint block to choose unknowns to eliminate
        let mut cmat = CMat::from_fn(k, n, |i, j| a0[(con_rows[i], j)]);
        let mut cols: Vec<usize> = (0..n).collect();
        for p in 0..k {
            let mut best = (p, p, 0.0);
            for i in p..k {
                for j in p..n {
                    let v = cmat[(i, cols[j])].norm();
                    if v > best.2 {
                        best = (i, j, v);
                    }
                }
            }
            if best.2 == 0.0 {
                return Err(Error::Singular("constraint rows"));
            }
            cmat.swap_rows(p, best.0);
            cols.swap(p, best.1);
            let piv = cmat[(p, cols[p])];
            for i in p + 1..k {
                let f = cmat[(i, cols[p])] / piv;
                if f != ZERO {
                    for j in 0..n {
                        let v = cmat[(p, j)];
                        cmat[(i, j)] -= f * v;
                    }
                }
            }
        }
        let constrained: Vec<usize> = cols[..k].to_vec();
        let mut free: Vec<usize> = cols[k..].to_vec();
        free.sort_unstable();
        let m = free.len();
        // C_c·x_c + C_f·x_f = 0  ⇒  x_c = −C_c⁻¹·C_f·x_f
        let cc = CMat::from_fn(k, k, |i, j| a0[(con_rows[i], constrained[j])]);
        let cf = CMat::from_fn(k, m, |i, j| a0[(con_rows[i], free[j])]);
        let elim0 = if k > 0 {
            let lu = cc.lu();
            let mut e = lu.solve(&cf).ok_or(Error::Singular("constraint block"))?;
            e.neg_mut();
            e
        } else {
            CMat::zeros(0, m)
        };
        let reduce = |a: &CMat, e: &CMat| -> CMat {
            let mut r = CMat::zeros(dyn_rows.len(), m);
            for (ri, &row) in dyn_rows.iter().enumerate() {
                for (fj, &col) in free.iter().enumerate() {
                    let mut v = a[(row, col)];
                    for (ci, &c) in constrained.iter().enumerate() {
                        v += a[(row, c)] * e[(ci, fj)];
                    }
                    r[(ri, fj)] = v;
                }
            }
            r
        };
        let ar0 = reduce(a0, &elim0);
        let ar1 = reduce(a1, &elim0);
        let br = reduce(b, &elim0);
        let lu = br.lu();
        let c0 = lu.solve(&ar0).ok_or(Error::Singular("reduced B"))?;
        let c1 = lu.solve(&ar1).ok_or(Error::Singular("reduced B"))?;
        if c0.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Singular("reduced B"));
        }
        Ok(Self {
            constrained,
            free,
            elim: elim0,
            c0,
            c1,
            dim: n,
        })
    }

    pub fn reduced_dim(&self) -> usize {
        self.free.len()
    }

    /// `C(p) = C0 + p·C1`.
    pub fn matrix(&self, p: f64) -> CMat {
        if p == 0.0 {
            return self.c0.clone();
        }
        let mut c = self.c1.clone();
        c *= Complex64::new(p, 0.0);
        c += &self.c0;
        c
    }

    pub fn derivative_matrix(&self) -> &CMat {
        &self.c1
    }

    /// Lifts a reduced vector back to the full unknown vector.
    pub fn expand(&self, xf: &[Complex64]) -> Vec<Complex64> {
        let mut x = vec![ZERO; self.dim];
        for (fj, &col) in self.free.iter().enumerate() {
            x[col] = xf[fj];
        }
        for (ci, &c) in self.constrained.iter().enumerate() {
            let mut v = ZERO;
            for (fj, xv) in xf.iter().enumerate().take(self.free.len()) {
                v += self.elim[(ci, fj)] * xv;
            }
            x[c] = v;
        }
        x
    }

    /// All finite eigenvalues at parameter `p`.
    pub fn eigenvalues(&self, p: f64) -> Result<Vec<Complex64>> {
        eigenvalues_standard(self.matrix(p))
    }
}

/// Eigenvalues of a dense complex matrix.
pub fn eigenvalues_standard(c: CMat) -> Result<Vec<Complex64>> {
    if c.nrows() == 0 {
        return Ok(Vec::new());
    }
    if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Domain {
            func: "eigenvalues_standard",
            detail: "matrix has non-finite entries".into(),
        });
    }
    eigenvalues_impl(c)
}

#[cfg(feature = "lapack")]
fn eigenvalues_impl(mut c: CMat) -> Result<Vec<Complex64>> {
    let n = c.nrows();
    let ni = i32::try_from(n).map_err(|_| Error::InvalidParam {
        name: "matrix",
        detail: "too large for LAPACK".into(),
    })?;
    let mut w = vec![ZERO; n];
    let mut dummy = [ZERO; 1];
    let mut dummy_r = [ZERO; 1];
    let lwork = 4 * ni.max(1);
    let mut work = vec![ZERO; lwork as usize];
    let mut rwork = vec![0.0; 2 * n];
    let mut info = 0;
    // column-major storage matches nalgebra's layout
    unsafe {
        lapack::zgeev(
            b'N',
            b'N',
            ni,
            c.as_mut_slice(),
            ni,
            &mut w,
            &mut dummy,
            1,
            &mut dummy_r,
            1,
            &mut work,
            lwork,
            &mut rwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::NoConvergence {
            what: "LAPACK zgeev",
            iterations: 0,
            residual: info as f64,
        });
    }
    Ok(w)
}

#[cfg(not(feature = "lapack"))]
fn eigenvalues_impl(c: CMat) -> Result<Vec<Complex64>> {
    let fail = || Error::NoConvergence {
        what: "complex Schur decomposition",
        iterations: 10_000,
        residual: f64::NAN,
    };
    let schur = nalgebra::linalg::Schur::try_new(c, f64::EPSILON, 10_000).ok_or_else(fail)?;
    let ev = schur.eigenvalues().ok_or_else(fail)?;
    Ok(ev.iter().copied().collect())
}

/// Right eigenvector of `C` for an eigenvalue estimate, by inverse iteration.
///
/// Returns the refined eigenvalue and the vector normalised to unit maximum
/// modulus with that entry real and positive.
pub fn inverse_iteration(c: &CMat, estimate: Complex64, start: Option<&[Complex64]>) -> Result<Eigenpair> {
    let n = c.nrows();
    let scale = 1.0 + c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut shift = estimate + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut x: CVec = match start {
        Some(s) => CVec::from_column_slice(s),
        None => CVec::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.37).sin(), 0.3 * (i as f64).cos())),
    };
    normalise(x.as_mut_slice());
    let mut value = estimate;
    for outer in 0..3 {
        let mut m = c.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let lu = m.lu();
        let mut prev = value;
        for it in 0..40 {
            let y = lu.solve(&x).ok_or(Error::Singular("inverse iteration"))?;
            // Rayleigh-type estimate of 1/(γ − shift) from the largest component
            let (imax, _) = x
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
            let mu = y[imax] / x[imax];
            value = shift + ONE / mu;
            x = y;
            normalise(x.as_mut_slice());
            if it > 0 && (value - prev).norm() <= 1e-13 * value.norm().max(1.0) {
                break;
            }
            prev = value;
        }
        let resid = residual(c, value, x.as_slice());
        if resid <= 1e-9 * scale || outer == 2 {
            break;
        }
        shift = value + Complex64::new(1e-10 * scale, 0.0);
    }
    Ok(Eigenpair {
        value,
        vector: x.iter().copied().collect(),
    })
}

fn residual(c: &CMat, value: Complex64, x: &[Complex64]) -> f64 {
    let n = c.nrows();
    (0..n)
        .map(|i| {
            let mut s = -value * x[i];
            for j in 0..n {
                s += c[(i, j)] * x[j];
            }
            s.norm()
        })
        .fold(0.0, f64::max)
}

/// Scales `x` to unit maximum modulus with that entry real positive.
pub fn normalise(x: &mut [Complex64]) {
    let (imax, vmax) = x
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
    if vmax == 0.0 {
        return;
    }
    let phase = x[imax] / vmax;
    let f = ONE / phase / vmax;
    for v in x.iter_mut() {
        *v *= f;
    }
}

/// Generalized eigenvalue of `A·x = γ·B·x` with maximal real part (ties
/// broken towards nonnegative imaginary part) and its eigenvector, normalised
/// to unit maximum modulus.
pub fn leading_eigenpair(a: &CMat, b: &CMat) -> Result<Eigenpair> {
    let pencil = ReducedPencil::new(a, b)?;
    let c = pencil.matrix(0.0);
    let values = eigenvalues_standard(c.clone())?;
    let i = leading_index(&values).ok_or(Error::Singular("pencil has no finite eigenvalues"))?;
    let pair = inverse_iteration(&c, values[i], None)?;
    let mut vector = pencil.expand(&pair.vector);
    normalise(&mut vector);
    Ok(Eigenpair {
        value: values[i],
        vector,
    })
}

/// Solves `A·X = B` for dense complex matrices.
pub fn solve(a: CMat, b: &CMat) -> Result<CMat> {
    a.lu().solve(b).ok_or(Error::Singular("dense solve"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_pencil() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(3.0, 0.0)]));
        let b = CMat::identity(2, 2);
        let p = leading_eigenpair(&a, &b).unwrap();
        assert!((p.value - c(3.0, 0.0)).norm() < 1e-12);
        assert!(p.vector[0].norm() < 1e-10);
        assert!((p.vector[1] - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn rotation_prefers_positive_imaginary() {
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let b = CMat::identity(2, 2);
        let p = leading_eigenpair(&a, &b).unwrap();
        assert!((p.value - c(0.0, 1.0)).norm() < 1e-12, "{}", p.value);
    }

    #[test]
    fn zero_rows_of_b_are_constraints() {
        // x0 − x1 = 0 constraint, then 2·x0 + x1 = γ·x1 ⇒ γ = 3
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let p = leading_eigenpair(&a, &b).unwrap();
        assert!((p.value - c(3.0, 0.0)).norm() < 1e-12);
        assert!((p.vector[0] - p.vector[1]).norm() < 1e-12);
    }

    #[test]
    fn affine_matches_direct() {
        let a0 = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(0.5, 0.0), c(-1.0, 0.0)]);
        let a1 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let b = CMat::identity(2, 2);
        let pencil = ReducedPencil::affine(&a0, &a1, &b).unwrap();
        let direct = &a0 + &a1 * c(2.5, 0.0);
        let mut e1 = pencil.eigenvalues(2.5).unwrap();
        let mut e2 = eigenvalues_standard(direct).unwrap();
        e1.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        e2.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        for (x, y) in e1.iter().zip(&e2) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
