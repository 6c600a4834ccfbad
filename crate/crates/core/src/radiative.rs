//! Basic-state radiation field of a plane-parallel, linearly-anisotropic
//! scattering slab lit from above by a collimated beam plus diffuse light.
//!
//! With `c = cos θ₀`, the total intensity `G` and the flux magnitude `q`
//! satisfy the coupled Fredholm equations
//!
//! ```text
//! G(τ) = 2B·E₂(τ) + e^{−τ/c}   + ω/2 ∫ [G·E₁(|τ−t|) + A₁·sgn(τ−t)·q·E₂(|τ−t|)] dt
//! q(τ) = 2B·E₃(τ) + c·e^{−τ/c} + ω/2 ∫ [A₁·q·E₃(|τ−t|) + sgn(τ−t)·G·E₂(|τ−t|)] dt
//! ```
//!
//! The boundary term `2B·E₂` follows from the isotropic inflow `B/π`:
//! `∫_{down} (B/π)·e^{−τ/μ} dΩ = 2B·∫₀¹ e^{−τ/μ} dμ = 2B·E₂(τ)`.
//!
//! Discretisation is product integration: on each cell the unknown is the
//! cubic through the four nearest nodes and the kernel is integrated against
//! it exactly up to quadrature error. Cells touching the collocation point
//! split off the `ln x` singularity of `E_n` analytically. The τ grid is
//! clustered at both faces, where the solution has `τ·ln τ` behaviour.

use crate::error::{Error, Result};
use crate::numerics::expint::{expint_123, expint_log_split, expint_unchecked};
use crate::numerics::fd::{lagrange_cubic, CubicInterp};
use crate::numerics::{clustered_map, gauss_nodes, Grid1D};
use crate::par;
use nalgebra::{DMatrix, DVector};

pub const DEFAULT_N_TAU: usize = 201;
const TOL: f64 = 1e-10;
const MAX_ITER: usize = 10_000;

/// Optical properties and illumination of the slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationParams {
    pub omega: f64,
    pub a1: f64,
    pub b: f64,
    pub tau_h: f64,
    pub cos_theta0: f64,
}

impl RadiationParams {
    pub fn new(omega: f64, a1: f64, b: f64, tau_h: f64, cos_theta0: f64) -> Result<Self> {
        let p = Self {
            omega,
            a1,
            b,
            tau_h,
            cos_theta0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, detail: &str| {
            Err(Error::InvalidParam {
                name,
                detail: detail.to_string(),
            })
        };
        if !(0.0..=1.0).contains(&self.omega) {
            return bad("omega", "albedo must lie in [0, 1]");
        }
        if !(self.a1 > -1.0 && self.a1 <= 1.0) {
            return bad("A1", "anisotropy must lie in (-1, 1]");
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return bad("B", "diffuse irradiation must be >= 0");
        }
        if !(self.tau_h > 0.0) || !self.tau_h.is_finite() {
            return bad("tauH", "optical depth must be > 0");
        }
        if !(self.cos_theta0 > 0.0 && self.cos_theta0 <= 1.0) {
            return bad("cos_theta0", "must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Converged basic-state radiation on the optical-depth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicRadiation {
    pub params: RadiationParams,
    pub tau_grid: Grid1D,
    pub g: Vec<f64>,
    pub q: Vec<f64>,
    pub g_coll: Vec<f64>,
    pub q_coll: Vec<f64>,
    /// Max-norm fixed-point residual at exit.
    pub residual: f64,
    pub iterations: usize,
}

impl BasicRadiation {
    pub fn g_at(&self, tau: f64) -> f64 {
        CubicInterp::new(self.tau_grid.points(), &self.g).eval(tau)
    }

    pub fn q_at(&self, tau: f64) -> f64 {
        CubicInterp::new(self.tau_grid.points(), &self.q).eval(tau)
    }

    /// Collimated part `e^{−τ/c}` (exact, not interpolated).
    pub fn g_coll_at(&self, tau: f64) -> f64 {
        (-tau / self.params.cos_theta0).exp()
    }
}

/// Discretised integral operators and free terms on a τ grid.
#[derive(Debug, Clone)]
pub struct RadiationSystem {
    pub tau: Vec<f64>,
    /// `∫ L_j(t)·E₁(|τ_i − t|) dt`
    pub k1: DMatrix<f64>,
    /// `∫ sgn(τ_i − t)·L_j(t)·E₂(|τ_i − t|) dt`
    pub k2s: DMatrix<f64>,
    /// `∫ L_j(t)·E₃(|τ_i − t|) dt`
    pub k3: DMatrix<f64>,
    pub g0: Vec<f64>,
    pub q0: Vec<f64>,
}

impl RadiationSystem {
    pub fn assemble(p: &RadiationParams, grid: &Grid1D) -> Result<Self> {
        p.validate()?;
        let tau = grid.points().to_vec();
        let n = tau.len();
        if n < 4 {
            return Err(Error::InvalidParam {
                name: "n_tau",
                detail: "need at least 4 nodes".into(),
            });
        }
        let rule = gauss_nodes(16, 0.0, 1.0)?;
        let rows = par::map_range(n, |i| kernel_row(&tau, i, &rule.nodes, &rule.weights));
        let mut k1 = DMatrix::zeros(n, n);
        let mut k2s = DMatrix::zeros(n, n);
        let mut k3 = DMatrix::zeros(n, n);
        for (i, r) in rows.into_iter().enumerate() {
            for j in 0..n {
                k1[(i, j)] = r[0][j];
                k2s[(i, j)] = r[1][j];
                k3[(i, j)] = r[2][j];
            }
        }
        let c = p.cos_theta0;
        let g0 = tau
            .iter()
            .map(|&t| 2.0 * p.b * expint_unchecked(2, t) + (-t / c).exp())
            .collect();
        let q0 = tau
            .iter()
            .map(|&t| 2.0 * p.b * expint_unchecked(3, t) + c * (-t / c).exp())
            .collect();
        Ok(Self {
            tau,
            k1,
            k2s,
            k3,
            g0,
            q0,
        })
    }

    /// `T(G, q)` = free term plus the scattering integrals. With
    /// `anisotropic = false` the A₁ terms are omitted outright.
    fn apply(&self, p: &RadiationParams, g: &[f64], q: &[f64], anisotropic: bool) -> (Vec<f64>, Vec<f64>) {
        let n = self.tau.len();
        let h = 0.5 * p.omega;
        let mut tg = self.g0.clone();
        let mut tq = self.q0.clone();
        for i in 0..n {
            let mut sg = 0.0;
            let mut sq = 0.0;
            for j in 0..n {
                sg += self.k1[(i, j)] * g[j];
                sq += self.k2s[(i, j)] * g[j];
                if anisotropic {
                    sg += p.a1 * self.k2s[(i, j)] * q[j];
                    sq += p.a1 * self.k3[(i, j)] * q[j];
                }
            }
            tg[i] += h * sg;
            tq[i] += h * sq;
        }
        (tg, tq)
    }
}

/// Kernel weights of one collocation row for `E₁`, signed `E₂` and `E₃`.
fn kernel_row(tau: &[f64], i: usize, yq: &[f64], wq: &[f64]) -> [Vec<f64>; 3] {
    let n = tau.len();
    let ti = tau[i];
    let mut w = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for j in 0..n - 1 {
        let (a, b) = (tau[j], tau[j + 1]);
        let h = b - a;
        let lo = j.saturating_sub(1).min(n - 4);
        let nodes = [tau[lo], tau[lo + 1], tau[lo + 2], tau[lo + 3]];
        let sgn = if b <= ti { 1.0 } else { -1.0 };
        if i != j && i != j + 1 {
            for (&y, &wy) in yq.iter().zip(wq) {
                let t = a + h * y;
                let e = expint_123((ti - t).abs());
                let l = lagrange_cubic(&nodes, t);
                for m in 0..4 {
                    let f = wy * h * l[m];
                    w[0][lo + m] += f * e[0];
                    w[1][lo + m] += sgn * f * e[1];
                    w[2][lo + m] += f * e[2];
                }
            }
        } else {
            // x = |t − τ_i| ∈ [0, h]
            let d = if i == j { 1.0 } else { -1.0 };
            for order in 1..=3u32 {
                let cell = singular_cell(&nodes, ti, d, h, order, yq, wq);
                let f = if order == 2 { sgn } else { 1.0 };
                for m in 0..4 {
                    w[order as usize - 1][lo + m] += f * cell[m];
                }
            }
        }
    }
    w
}

/// `∫₀ʰ L_m(τ_i + d·x)·E_n(x) dx` using `E_n = a_n(x)·ln x + b_n(x)`.
///
/// The `b_n` part is smooth and goes to Gauss–Legendre. `L_m·a_n` is a
/// polynomial in `y = x/h`, whose coefficients are formed exactly so that
/// `∫₀¹ yᵖ ln y dy = −1/(p+1)²` finishes the job.
fn singular_cell(nodes: &[f64; 4], ti: f64, d: f64, h: f64, order: u32, yq: &[f64], wq: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (&y, &wy) in yq.iter().zip(wq) {
        let x = h * y;
        let (_, bn) = expint_log_split(order, x);
        let l = lagrange_cubic(nodes, ti + d * x);
        for m in 0..4 {
            out[m] += wy * h * l[m] * bn;
        }
    }
    // a_n(h·y) = −(−h)^{n−1}/(n−1)! · y^{n−1}
    let k = order as usize - 1;
    let fact: f64 = (1..=k).map(|v| v as f64).product();
    let amp = -(-h).powi(k as i32) / fact;
    let lnh = h.ln();
    for m in 0..4 {
        // L_m(τ_i + d·h·y) as a cubic in y
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut deg = 0;
        for q in 0..4 {
            if q == m {
                continue;
            }
            let den = nodes[m] - nodes[q];
            let c0 = (ti - nodes[q]) / den;
            let c1 = d * h / den;
            for p in (0..=deg + 1).rev() {
                let hi = if p > 0 { poly[p - 1] * c1 } else { 0.0 };
                poly[p] = poly[p] * c0 + hi;
            }
            deg += 1;
        }
        let mut int_plain = 0.0;
        let mut int_log = 0.0;
        for (p, &cp) in poly.iter().enumerate() {
            let e = (p + k + 1) as f64;
            int_plain += cp / e;
            int_log -= cp / (e * e);
        }
        out[m] += h * amp * (lnh * int_plain + int_log);
    }
    out
}

/// Default clustered τ grid with `n_tau` nodes.
pub fn tau_grid(tau_h: f64, n_tau: usize) -> Result<Grid1D> {
    Grid1D::mapped(0.0, tau_h, n_tau, clustered_map)
}

fn check_n_tau(n_tau: usize) -> Result<()> {
    if n_tau < 33 {
        return Err(Error::InvalidParam {
            name: "n_tau",
            detail: format!("need n_tau >= 33, got {n_tau}"),
        });
    }
    Ok(())
}

/// Solves the coupled Fredholm pair by damped fixed-point iteration.
pub fn solve_basic_radiation(p: &RadiationParams, n_tau: usize) -> Result<BasicRadiation> {
    check_n_tau(n_tau)?;
    let grid = tau_grid(p.tau_h, n_tau)?;
    let sys = RadiationSystem::assemble(p, &grid)?;
    let (g, q, residual, iterations) = fixed_point(&sys, p, true)?;
    Ok(finish(p, grid, g, q, residual, iterations))
}

/// Same solve with the A₁ kernel terms left out of the operator entirely.
pub fn solve_basic_radiation_isotropic(p: &RadiationParams, n_tau: usize) -> Result<BasicRadiation> {
    check_n_tau(n_tau)?;
    let grid = tau_grid(p.tau_h, n_tau)?;
    let sys = RadiationSystem::assemble(p, &grid)?;
    let (g, q, residual, iterations) = fixed_point(&sys, p, false)?;
    Ok(finish(p, grid, g, q, residual, iterations))
}

/// Direct dense solve of the same discretisation (Nyström-style oracle).
pub fn solve_basic_radiation_direct(p: &RadiationParams, n_tau: usize) -> Result<BasicRadiation> {
    check_n_tau(n_tau)?;
    let grid = tau_grid(p.tau_h, n_tau)?;
    let sys = RadiationSystem::assemble(p, &grid)?;
    let n = n_tau;
    let h = 0.5 * p.omega;
    let mut m = DMatrix::<f64>::identity(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] -= h * sys.k1[(i, j)];
            m[(i, n + j)] -= h * p.a1 * sys.k2s[(i, j)];
            m[(n + i, j)] -= h * sys.k2s[(i, j)];
            m[(n + i, n + j)] -= h * p.a1 * sys.k3[(i, j)];
        }
    }
    let rhs = DVector::from_iterator(2 * n, sys.g0.iter().chain(&sys.q0).copied());
    let x = m.lu().solve(&rhs).ok_or(Error::Singular("radiation system"))?;
    let g: Vec<f64> = x.rows(0, n).iter().copied().collect();
    let q: Vec<f64> = x.rows(n, n).iter().copied().collect();
    let (tg, tq) = sys.apply(p, &g, &q, true);
    let residual = max_diff(&tg, &g).max(max_diff(&tq, &q));
    Ok(finish(p, grid, g, q, residual, 0))
}

fn fixed_point(sys: &RadiationSystem, p: &RadiationParams, anisotropic: bool) -> Result<(Vec<f64>, Vec<f64>, f64, usize)> {
    let mut g = sys.g0.clone();
    let mut q = sys.q0.clone();
    let mut relax = 1.0;
    let mut last = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let (tg, tq) = sys.apply(p, &g, &q, anisotropic);
        let res = max_diff(&tg, &g).max(max_diff(&tq, &q));
        if res < TOL {
            return Ok((tg, tq, res, it));
        }
        if res > last {
            relax = 0.5;
        }
        last = res;
        for i in 0..g.len() {
            g[i] += relax * (tg[i] - g[i]);
            q[i] += relax * (tq[i] - q[i]);
        }
    }
    Err(Error::NoConvergence {
        what: "radiation fixed point",
        iterations: MAX_ITER,
        residual: last,
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn finish(p: &RadiationParams, grid: Grid1D, g: Vec<f64>, q: Vec<f64>, residual: f64, iterations: usize) -> BasicRadiation {
    let c = p.cos_theta0;
    let g_coll: Vec<f64> = grid.points().iter().map(|&t| (-t / c).exp()).collect();
    let q_coll = g_coll.iter().map(|v| c * v).collect();
    BasicRadiation {
        params: *p,
        tau_grid: grid,
        g,
        q,
        g_coll,
        q_coll,
        residual,
        iterations,
    }
}

/// `G` against height for a uniform suspension, where `τ = τ_H·(1 − z)`.
/// Pairs are returned with `z` increasing.
pub fn uniform_suspension_intensity(p: &RadiationParams, n_tau: usize) -> Result<Vec<(f64, f64)>> {
    let rad = solve_basic_radiation(p, n_tau)?;
    let tau = rad.tau_grid.points();
    Ok((0..tau.len())
        .rev()
        .map(|i| {
            let z = if i == 0 { 1.0 } else { 1.0 - tau[i] / p.tau_h };
            (z.max(0.0), rad.g[i])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_cell_matches_brute_force() {
        // compare against a fine midpoint-in-log-variable integration
        let nodes = [0.0, 0.1, 0.25, 0.45];
        let rule = gauss_nodes(16, 0.0, 1.0).unwrap();
        for order in 1..=3 {
            let got = singular_cell(&nodes, 0.1, 1.0, 0.15, order, &rule.nodes, &rule.weights);
            for m in 0..4 {
                // substitute x = h·e^{−s} to tame the log singularity
                let n = 200_000;
                let smax = 40.0;
                let ds = smax / n as f64;
                let mut acc = 0.0;
                for k in 0..n {
                    let s = (k as f64 + 0.5) * ds;
                    let x = 0.15 * (-s).exp();
                    let l = lagrange_cubic(&nodes, 0.1 + x);
                    acc += l[m] * expint_unchecked(order, x) * x * ds;
                }
                assert!((acc - got[m]).abs() < 1e-7, "order {order} m {m}: {acc} vs {}", got[m]);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(RadiationParams::new(1.2, 0.0, 0.1, 1.0, 1.0).is_err());
        assert!(RadiationParams::new(0.4, -1.0, 0.1, 1.0, 1.0).is_err());
        assert!(RadiationParams::new(0.4, 0.0, 0.1, 0.0, 1.0).is_err());
        let p = RadiationParams::new(0.4, 0.0, 0.1, 1.0, 1.0).unwrap();
        assert!(solve_basic_radiation(&p, 20).is_err());
    }
}
