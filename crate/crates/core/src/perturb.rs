//! Perturbed radiation field for a concentration disturbance
//! `Θ(z)·e^{i(lx + my)}` about the base state.
//!
//! The collimated beam responds in closed form. The diffuse intensity `Ψ` is
//! carried along discrete ordinates: for direction `(ξ, η, ν)` with
//! `κ = lξ + mη`,
//!
//! ```text
//! ν·dΨ/dz + (iκ + τ_H·n_s)·Ψ = s(z, ν)
//! ```
//!
//! with zero inflow at both faces. The source couples back through the
//! moments `𝒢₁^d = ∫Ψ dΩ` and `∫Ψν dΩ`, so the field is the fixed point of a
//! linear map. Rays use an exponential integrator with the source linear on
//! each cell, which is exact for the attenuation however thick the cell.

use crate::basestate::BaseState;
use crate::error::{Error, Result};
use crate::numerics::fd::{cumulative_from_end, diff_matrix};
use crate::numerics::gauss_nodes;
use crate::numerics::linalg::CMat;
use crate::par;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

pub const DEFAULT_N_POLAR: usize = 24;
pub const DEFAULT_N_AZIMUTH: usize = 32;
const ITER_TOL: f64 = 1e-9;
const ITER_CAP: usize = 5_000;

type C64 = Complex64;
const CZERO: C64 = C64::new(0.0, 0.0);

/// Product rule: Gauss–Legendre in `ν` on each hemisphere times uniform `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    /// Direction cosines, downward hemisphere first, increasing.
    pub nu: Vec<f64>,
    pub w_nu: Vec<f64>,
    pub phi: Vec<f64>,
    pub w_phi: f64,
}

impl AngularQuadrature {
    pub fn new(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_azimuth < 4 || !n_azimuth.is_multiple_of(2) {
            return Err(Error::InvalidParam {
                name: "n_azimuth",
                detail: format!("need an even number of at least 4 azimuths, got {n_azimuth}"),
            });
        }
        let g = gauss_nodes(n_polar, 0.0, 1.0)?;
        let mut nu: Vec<f64> = g.nodes.iter().rev().map(|m| -m).collect();
        nu.extend(&g.nodes);
        let mut w_nu: Vec<f64> = g.weights.iter().rev().copied().collect();
        w_nu.extend(&g.weights);
        let phi = (0..n_azimuth).map(|j| 2.0 * PI * j as f64 / n_azimuth as f64).collect();
        Ok(Self {
            nu,
            w_nu,
            phi,
            w_phi: 2.0 * PI / n_azimuth as f64,
        })
    }

    /// `Σ w` over all directions (should be `4π`).
    pub fn total_weight(&self) -> f64 {
        self.w_nu.iter().sum::<f64>() * self.w_phi * self.phi.len() as f64
    }

    /// Azimuths `0..=π` of the uniform rule with weights folded for an
    /// integrand even in `φ`.
    pub fn half_range(&self) -> Vec<(f64, f64)> {
        let half = self.phi.len() / 2;
        (0..=half)
            .map(|j| {
                let fold = if j == 0 || j == half { 1.0 } else { 2.0 };
                (self.phi[j], fold * self.w_phi)
            })
            .collect()
    }

    /// `∫ f(ν) dΩ` for an azimuth-independent integrand.
    pub fn integrate_nu<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let az = self.w_phi * self.phi.len() as f64;
        self.nu.iter().zip(&self.w_nu).map(|(&v, &w)| w * az * f(v)).sum()
    }
}

impl Default for AngularQuadrature {
    fn default() -> Self {
        Self::new(DEFAULT_N_POLAR, DEFAULT_N_AZIMUTH).expect("default quadrature")
    }
}

/// Concentration disturbance with its running integral from the top.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFunctionInput {
    pub z: Vec<f64>,
    pub theta: Vec<C64>,
    /// `Θ̃(z) = ∫₁^z Θ dz′`
    pub theta_tilde: Vec<C64>,
    pub l: f64,
    pub m: f64,
}

impl EigenFunctionInput {
    pub fn new(z: &[f64], theta: Vec<C64>, l: f64, m: f64) -> Result<Self> {
        if theta.len() != z.len() {
            return Err(Error::GridMismatch(format!(
                "Θ has {} values on a {}-point grid",
                theta.len(),
                z.len()
            )));
        }
        let j = cumulative_from_end(z);
        let theta_tilde = real_apply(&j, &theta);
        Ok(Self {
            z: z.to_vec(),
            theta,
            theta_tilde,
            l,
            m,
        })
    }

    pub fn k(&self) -> f64 {
        self.l.hypot(self.m)
    }
}

/// Perturbed radiation moments and the derived stability coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    pub g1c: Vec<C64>,
    pub g1d: Vec<C64>,
    pub p: Vec<C64>,
    pub q: Vec<C64>,
    /// `S = −𝒢₁^c + ∫Ψ^d ν dΩ`
    pub s: Vec<C64>,
    pub gamma0: Vec<C64>,
    pub gamma1: Vec<C64>,
    pub gamma2: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Radiation moments produced by [`ResponseOperator::apply`].
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub g1c: Vec<C64>,
    pub g1d: Vec<C64>,
    pub s: Vec<C64>,
    pub p: Vec<C64>,
    pub q: Vec<C64>,
}

fn real_apply(a: &DMatrix<f64>, x: &[C64]) -> Vec<C64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).fold(CZERO, |acc, j| acc + x[j] * a[(i, j)]))
        .collect()
}

fn check_grid(bs: &BaseState, z: &[f64]) -> Result<()> {
    if bs.z() != z {
        return Err(Error::GridMismatch(format!(
            "eigenfunction on {} points, base state on {}",
            z.len(),
            bs.len()
        )));
    }
    Ok(())
}

/// Collimated response `𝒢₁^c = (τ_H/cos θ₀)·Θ̃·G_s^c`.
pub fn g1_collimated(input: &EigenFunctionInput, bs: &BaseState) -> Result<Vec<C64>> {
    check_grid(bs, &input.z)?;
    let f = bs.params.tau_h / bs.cos_theta0;
    Ok(input
        .theta_tilde
        .iter()
        .zip(&bs.g_s_coll)
        .map(|(t, g)| t * (f * g))
        .collect())
}

/// Per-cell factors of the exponential integrator along one ordinate.
#[derive(Debug, Clone)]
pub struct RayCoefficients {
    pub upward: bool,
    /// `e^{−Δ}`, `(h/μ)·φ₁(Δ)`, `(h/μ)·(φ₀ − φ₁)(Δ)` per cell.
    pub decay: Vec<C64>,
    pub near: Vec<C64>,
    pub far: Vec<C64>,
}

impl RayCoefficients {
    /// Ray with direction cosine `nu ≠ 0`, horizontal phase rate `kappa` and
    /// optical depth `tau` sampled on `z`.
    pub fn new(z: &[f64], tau: &[f64], nu: f64, kappa: f64) -> Self {
        let n = z.len();
        let mu = nu.abs();
        let mut decay = Vec::with_capacity(n - 1);
        let mut near = Vec::with_capacity(n - 1);
        let mut far = Vec::with_capacity(n - 1);
        for j in 0..n - 1 {
            let h = z[j + 1] - z[j];
            let d = C64::new(tau[j] - tau[j + 1], kappa * h) / mu;
            let (e, p0, p1) = phi_functions(d);
            decay.push(e);
            near.push(p1 * (h / mu));
            far.push((p0 - p1) * (h / mu));
        }
        Self {
            upward: nu > 0.0,
            decay,
            near,
            far,
        }
    }

    /// Integrates the ray for source `s` and inflow value `inflow`.
    pub fn sweep(&self, s: &[C64], inflow: C64) -> Vec<C64> {
        let n = s.len();
        let mut psi = vec![CZERO; n];
        if self.upward {
            psi[0] = inflow;
            for j in 0..n - 1 {
                psi[j + 1] = self.decay[j] * psi[j] + self.near[j] * s[j] + self.far[j] * s[j + 1];
            }
        } else {
            psi[n - 1] = inflow;
            for j in (0..n - 1).rev() {
                psi[j] = self.decay[j] * psi[j + 1] + self.near[j] * s[j + 1] + self.far[j] * s[j];
            }
        }
        psi
    }

    /// Dense `T` with `Ψ = T·s` for zero inflow; `T` is triangular.
    fn matrix_into(&self, t: &mut [C64], n: usize) {
        // row-major n×n scratch
        t.iter_mut().for_each(|v| *v = CZERO);
        if self.upward {
            for j in 0..n - 1 {
                let (head, tail) = t.split_at_mut((j + 1) * n);
                let prev = &head[j * n..j * n + j + 1];
                let row = &mut tail[..n];
                for c in 0..=j {
                    row[c] = self.decay[j] * prev[c];
                }
                row[j] += self.near[j];
                row[j + 1] += self.far[j];
            }
        } else {
            for j in (0..n - 1).rev() {
                let (head, tail) = t.split_at_mut((j + 1) * n);
                let row = &mut head[j * n..];
                let next = &tail[..n];
                for c in j + 1..n {
                    row[c] = self.decay[j] * next[c];
                }
                row[j + 1] += self.near[j];
                row[j] += self.far[j];
            }
        }
    }
}

/// `(e^{−Δ}, (1 − e^{−Δ})/Δ, (1 − (1 + Δ)e^{−Δ})/Δ²)` with series for small `Δ`.
fn phi_functions(d: C64) -> (C64, C64, C64) {
    let e = (-d).exp();
    if d.norm() < 1e-4 {
        let d2 = d * d;
        let d3 = d2 * d;
        let p0 = 1.0 - d / 2.0 + d2 / 6.0 - d3 / 24.0;
        let p1 = 0.5 - d / 3.0 + d2 / 8.0 - d3 / 30.0;
        (e, p0, p1)
    } else {
        let p0 = (1.0 - e) / d;
        let p1 = (1.0 - (1.0 + d) * e) / (d * d);
        (e, p0, p1)
    }
}

/// Quantities shared by every perturbation solve on one base state.
#[derive(Debug, Clone)]
pub struct PerturbSetup {
    pub z: Vec<f64>,
    pub tau: Vec<f64>,
    pub quad: AngularQuadrature,
    /// Basic diffuse intensity `L_s^d(z, ν)` per polar node.
    pub ld: Vec<Vec<f64>>,
    pub n_s: Vec<f64>,
    pub g_s: Vec<f64>,
    pub q_s: Vec<f64>,
    pub g_coll: Vec<f64>,
    /// `𝒢₁^c = C·Θ`
    pub g1c_op: DMatrix<f64>,
    pub omega: f64,
    pub a1: f64,
    pub tau_h: f64,
}

impl PerturbSetup {
    pub fn new(bs: &BaseState, quad: &AngularQuadrature) -> Result<Self> {
        let p = bs.params;
        let z = bs.z().to_vec();
        let tau = bs.tau_of_z.clone();
        let n = z.len();
        let ld = par::map_slice(&quad.nu, |&nu| basic_diffuse_ray(bs, &z, &tau, nu));
        let j = cumulative_from_end(&z);
        let f = p.tau_h / bs.cos_theta0;
        let g1c_op = DMatrix::from_fn(n, n, |r, c| f * bs.g_s_coll[r] * j[(r, c)]);
        Ok(Self {
            z,
            tau,
            quad: quad.clone(),
            ld,
            n_s: bs.n_s.clone(),
            g_s: bs.g_s.clone(),
            q_s: bs.q_s.clone(),
            g_coll: bs.g_s_coll.clone(),
            g1c_op,
            omega: p.omega,
            a1: p.a1,
            tau_h: p.tau_h,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// `ωτ_H/(4π)`
    fn c1(&self) -> f64 {
        self.omega * self.tau_h / (4.0 * PI)
    }

    /// Ray source for direction cosine index `r` given current moments.
    fn source(&self, r: usize, theta: &[C64], g1c: &[C64], g1d: &[C64], sd: &[C64]) -> Vec<C64> {
        let nu = self.quad.nu[r];
        let c1 = self.c1();
        (0..self.len())
            .map(|i| {
                let n = self.n_s[i];
                let a = c1 * (n * (g1c[i] + g1d[i]) + self.g_s[i] * theta[i]);
                let b = c1 * self.a1 * (n * (sd[i] - g1c[i]) - self.q_s[i] * theta[i]);
                a + nu * b - self.tau_h * self.ld[r][i] * theta[i]
            })
            .collect()
    }
}

/// Basic diffuse intensity along one ordinate, from the same ray scheme.
fn basic_diffuse_ray(bs: &BaseState, z: &[f64], tau: &[f64], nu: f64) -> Vec<f64> {
    let p = bs.params;
    let c = p.omega * p.tau_h / (4.0 * PI);
    let s: Vec<C64> = (0..z.len())
        .map(|i| C64::new(c * bs.n_s[i] * (bs.g_s[i] - p.a1 * bs.q_s[i] * nu), 0.0))
        .collect();
    let ray = RayCoefficients::new(z, tau, nu, 0.0);
    let inflow = if nu < 0.0 { p.b / PI } else { 0.0 };
    ray.sweep(&s, C64::new(inflow, 0.0)).into_iter().map(|v| v.re).collect()
}

/// Horizontal direction cosine along the wavevector, `sin θ·cos φ′`, for
/// azimuth `φ′` measured from `(l, m)`. The ray equation only sees
/// `κ = k·sin θ·cos φ′`, so `Ψ` is even in `φ′` and half the circle suffices.
fn along_wavevector(nu: f64, phi: f64) -> f64 {
    (1.0 - nu * nu).max(0.0).sqrt() * phi.cos()
}

/// Splits a moment along the wavevector into its `x` and `y` parts.
fn wavevector_split(l: f64, m: f64) -> (f64, f64) {
    let k = l.hypot(m);
    if k == 0.0 {
        (0.0, 0.0)
    } else {
        (l / k, m / k)
    }
}

/// Iterative ordinate-by-ordinate solve of the diffuse perturbation for one
/// disturbance; moments are updated until the max-norm change is below 1e-9.
pub fn solve_perturbed_diffuse(
    input: &EigenFunctionInput,
    bs: &BaseState,
    quad: &AngularQuadrature,
) -> Result<PerturbationField> {
    let setup = PerturbSetup::new(bs, quad)?;
    solve_perturbed_diffuse_with(input, bs, &setup)
}

pub fn solve_perturbed_diffuse_with(
    input: &EigenFunctionInput,
    bs: &BaseState,
    setup: &PerturbSetup,
) -> Result<PerturbationField> {
    check_grid(bs, &input.z)?;
    let n = setup.len();
    let quad = &setup.quad;
    let g1c = g1_collimated(input, bs)?;
    let k = input.k();
    let (cx, cy) = wavevector_split(input.l, input.m);
    let azimuths = quad.half_range();
    let rays: Vec<Vec<(RayCoefficients, f64, f64)>> = (0..quad.nu.len())
        .map(|r| {
            azimuths
                .iter()
                .map(|&(phi, w)| {
                    let zeta = along_wavevector(quad.nu[r], phi);
                    (RayCoefficients::new(&setup.z, &setup.tau, quad.nu[r], k * zeta), w, zeta)
                })
                .collect()
        })
        .collect();
    let mut g1d = vec![CZERO; n];
    let mut sd = vec![CZERO; n];
    let mut relax = 1.0;
    let mut last = f64::INFINITY;
    for it in 1..=ITER_CAP {
        // per polar node: azimuthal sums of Ψ and Ψ·sin θ cos φ′
        let parts = par::map_range(quad.nu.len(), |r| {
            let s = setup.source(r, &input.theta, &g1c, &g1d, &sd);
            let mut acc = [vec![CZERO; n], vec![CZERO; n]];
            for (ray, w, zeta) in &rays[r] {
                let psi = ray.sweep(&s, CZERO);
                for i in 0..n {
                    acc[0][i] += psi[i] * *w;
                    acc[1][i] += psi[i] * (w * zeta);
                }
            }
            acc
        });
        let mut new_g = vec![CZERO; n];
        let mut new_s = vec![CZERO; n];
        let mut h = vec![CZERO; n];
        for (r, acc) in parts.iter().enumerate() {
            let w = quad.w_nu[r];
            let nu = quad.nu[r];
            for i in 0..n {
                new_g[i] += acc[0][i] * w;
                new_s[i] += acc[0][i] * (w * nu);
                h[i] += acc[1][i] * w;
            }
        }
        let p: Vec<C64> = h.iter().map(|v| v * cx).collect();
        let q: Vec<C64> = h.iter().map(|v| v * cy).collect();
        let scale = new_g.iter().chain(&new_s).map(|v| v.norm()).fold(1e-300, f64::max);
        let res = new_g
            .iter()
            .zip(&g1d)
            .chain(new_s.iter().zip(&sd))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if res <= ITER_TOL * scale.max(1.0) || scale <= 1e-300 {
            let s = new_s.iter().zip(&g1c).map(|(a, c)| a - c).collect();
            let mut field = PerturbationField {
                g1c,
                g1d: new_g,
                p,
                q,
                s,
                gamma0: Vec::new(),
                gamma1: Vec::new(),
                gamma2: Vec::new(),
                iterations: it,
                residual: res,
            };
            let (g0, g1, g2) = gamma_coefficients(input, bs, &field)?;
            field.gamma0 = g0;
            field.gamma1 = g1;
            field.gamma2 = g2;
            return Ok(field);
        }
        if res > last {
            relax = 0.5;
        }
        last = res;
        for i in 0..n {
            let (dg, ds) = (new_g[i] - g1d[i], new_s[i] - sd[i]);
            g1d[i] += dg * relax;
            sd[i] += ds * relax;
        }
    }
    Err(Error::NoConvergence {
        what: "perturbed diffuse radiation",
        iterations: ITER_CAP,
        residual: last,
    })
}

/// Base-state parts of the stability coefficients, `Γ₁` and `Γ₂`.
pub fn base_gammas(bs: &BaseState) -> (Vec<f64>, Vec<f64>) {
    let p = bs.params;
    let z = bs.z();
    let d1 = diff_matrix(z, 1);
    let f = p.tau_h / bs.cos_theta0;
    let n = bs.len();
    let prod: Vec<f64> = (0..n).map(|i| bs.n_s[i] * bs.g_s_coll[i] * bs.dmdg[i]).collect();
    let gd = bs.g_s_diffuse();
    let dprod = crate::numerics::fd::apply(&d1, &prod);
    let dgd = crate::numerics::fd::apply(&d1, &gd);
    let g1 = dprod.iter().map(|v| f * p.vc * v).collect();
    let g2 = (0..n)
        .map(|i| 2.0 * f * p.vc * prod[i] + p.vc * bs.dmdg[i] * dgd[i])
        .collect();
    (g1, g2)
}

/// `Γ₀ = V_c·D(n_s·M′·𝒢₁^d) − i·(V_c n_s M_s/q_s)·(lP + mQ)` together with the
/// base-state coefficients `Γ₁`, `Γ₂`.
pub fn gamma_coefficients(
    input: &EigenFunctionInput,
    bs: &BaseState,
    pf: &PerturbationField,
) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>)> {
    check_grid(bs, &input.z)?;
    if bs.q_s.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Domain {
            func: "gamma_coefficients",
            detail: "flux magnitude vanishes".into(),
        });
    }
    let vc = bs.params.vc;
    let n = bs.len();
    let d1 = diff_matrix(bs.z(), 1);
    let inner: Vec<C64> = (0..n).map(|i| pf.g1d[i] * (bs.n_s[i] * bs.dmdg[i])).collect();
    let dinner = real_apply(&d1, &inner);
    let g0 = (0..n)
        .map(|i| {
            let lpmq = pf.p[i] * input.l + pf.q[i] * input.m;
            dinner[i] * vc - C64::i() * (vc * bs.n_s[i] * bs.m_s[i] / bs.q_s[i]) * lpmq
        })
        .collect();
    let (g1, g2) = base_gammas(bs);
    Ok((
        g0,
        g1.into_iter().map(|v| C64::new(v, 0.0)).collect(),
        g2.into_iter().map(|v| C64::new(v, 0.0)).collect(),
    ))
}

/// Dense linear maps from `Θ` to every perturbation moment at one `(l, m)`.
#[derive(Debug, Clone)]
pub struct ResponseOperator {
    pub l: f64,
    pub m: f64,
    pub g1c: CMat,
    pub g1d: CMat,
    pub s: CMat,
    pub p: CMat,
    pub q: CMat,
}

impl ResponseOperator {
    /// Assembles the maps by summing ray propagators over ordinates and
    /// solving the moment closure `(I − K)·[𝒢₁^d; ∫Ψν] = F·Θ` directly.
    pub fn assemble(setup: &PerturbSetup, l: f64, m: f64) -> Result<Self> {
        let n = setup.len();
        let quad = &setup.quad;
        let n_pol = quad.nu.len();
        let k = l.hypot(m);
        let azimuths = quad.half_range();
        // Per polar node: azimuthal sums of T and ζT, ζ = sin θ cos φ′ (row-major n×n).
        let sums = par::map_range(n_pol, |r| {
            let mut t = vec![CZERO; n * n];
            let mut u = [vec![CZERO; n * n], vec![CZERO; n * n]];
            for &(phi, w) in &azimuths {
                let zeta = along_wavevector(quad.nu[r], phi);
                RayCoefficients::new(&setup.z, &setup.tau, quad.nu[r], k * zeta).matrix_into(&mut t, n);
                let f = [w, w * zeta];
                for (uk, fk) in u.iter_mut().zip(f) {
                    for (dst, src) in uk.iter_mut().zip(&t) {
                        *dst += src * fk;
                    }
                }
            }
            u
        });
        // O[x][y]: x ∈ {1, ν, ζ}-weighted, y ∈ {1, ν, L} column scaling
        let zero = || CMat::zeros(n, n);
        let mut o = [
            [zero(), zero(), zero()],
            [zero(), zero(), zero()],
            [zero(), zero(), zero()],
        ];
        for (r, u) in sums.iter().enumerate() {
            let w = quad.w_nu[r];
            let nu = quad.nu[r];
            let ld = &setup.ld[r];
            let rows: [(&Vec<C64>, f64); 3] = [(&u[0], w), (&u[0], w * nu), (&u[1], w)];
            for (ox, (mat, wx)) in o.iter_mut().zip(rows) {
                for i in 0..n {
                    for j in 0..n {
                        let v = mat[i * n + j] * wx;
                        ox[0][(i, j)] += v;
                        ox[1][(i, j)] += v * nu;
                        ox[2][(i, j)] += v * ld[j];
                    }
                }
            }
        }
        let c1 = setup.c1();
        let a1 = setup.a1;
        let nsd = |i: usize| setup.n_s[i];
        let g1c_op = setup.g1c_op.map(|v| C64::new(v, 0.0));
        // a = c1·(n_s·(𝒢₁^c + g) + G_s·Θ), b = c1·A₁·(n_s·(sd − 𝒢₁^c) − q_s·Θ), c = −τ_H·Θ
        let aa_th = CMat::from_fn(n, n, |i, j| {
            let diag = if i == j { setup.g_s[i] } else { 0.0 };
            g1c_op[(i, j)] * (c1 * nsd(i)) + c1 * diag
        });
        let ab_th = CMat::from_fn(n, n, |i, j| {
            let diag = if i == j { setup.q_s[i] } else { 0.0 };
            (-g1c_op[(i, j)] * nsd(i) - diag) * (c1 * a1)
        });
        let scale_cols = |mat: &CMat, f: &dyn Fn(usize) -> f64| {
            let mut out = mat.clone();
            for j in 0..n {
                let s = f(j);
                out.column_mut(j).scale_mut(s);
            }
            out
        };
        let ga = |x: usize| scale_cols(&o[x][0], &|j| c1 * nsd(j));
        let gb = |x: usize| scale_cols(&o[x][1], &|j| c1 * a1 * nsd(j));
        let tau_h = setup.tau_h;
        let forcing = |x: usize| &o[x][0] * &aa_th + &o[x][1] * &ab_th - &o[x][2] * C64::new(tau_h, 0.0);
        let mut k = CMat::zeros(2 * n, 2 * n);
        k.view_mut((0, 0), (n, n)).copy_from(&ga(0));
        k.view_mut((0, n), (n, n)).copy_from(&gb(0));
        k.view_mut((n, 0), (n, n)).copy_from(&ga(1));
        k.view_mut((n, n), (n, n)).copy_from(&gb(1));
        let mut f = CMat::zeros(2 * n, n);
        f.view_mut((0, 0), (n, n)).copy_from(&forcing(0));
        f.view_mut((n, 0), (n, n)).copy_from(&forcing(1));
        let mut lhs = -k;
        for i in 0..2 * n {
            lhs[(i, i)] += C64::new(1.0, 0.0);
        }
        let x = lhs.lu().solve(&f).ok_or(Error::Singular("perturbation moment closure"))?;
        let xg = x.rows(0, n).into_owned();
        let xsd = x.rows(n, n).into_owned();
        let horizontal = |idx: usize| -> CMat { &ga(idx) * &xg + &gb(idx) * &xsd + forcing(idx) };
        let h = horizontal(2);
        let (cx, cy) = wavevector_split(l, m);
        let p = &h * C64::new(cx, 0.0);
        let q = &h * C64::new(cy, 0.0);
        let s = &xsd - &g1c_op;
        Ok(Self {
            l,
            m,
            g1c: g1c_op,
            g1d: xg,
            s,
            p,
            q,
        })
    }

    /// Applies every map to one disturbance.
    pub fn apply(&self, theta: &[C64]) -> Moments {
        let v = nalgebra::DVector::from_column_slice(theta);
        let f = |m: &CMat| (m * &v).iter().copied().collect::<Vec<_>>();
        Moments {
            g1c: f(&self.g1c),
            g1d: f(&self.g1d),
            s: f(&self.s),
            p: f(&self.p),
            q: f(&self.q),
        }
    }
}
