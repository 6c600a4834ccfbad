//! Equilibrium (no-flow) state: refraction, phototactic response and the
//! base concentration profile.

use crate::error::{Error, Result};
use crate::numerics::fd::{integration_weights, CubicInterp};
use crate::numerics::roots::{brent_root, brent_root_with};
use crate::numerics::Grid1D;
use crate::radiative::{BasicRadiation, RadiationParams};
use std::f64::consts::PI;

pub const DEFAULT_N_Z: usize = 129;
pub const WATER_INDEX: f64 = 1.333;
const MAX_INCIDENCE_DEG: f64 = 89.9;

/// In-water refraction angle (radians) from the incidence angle in degrees.
pub fn refraction_angle(theta_i_deg: f64, n0: f64) -> Result<f64> {
    if !(0.0..=MAX_INCIDENCE_DEG).contains(&theta_i_deg) {
        return Err(Error::InvalidParam {
            name: "theta_i_deg",
            detail: format!("incidence {theta_i_deg} outside [0, {MAX_INCIDENCE_DEG}]"),
        });
    }
    if !(n0 >= 1.0) {
        return Err(Error::InvalidParam {
            name: "n0",
            detail: format!("refractive index {n0} must be >= 1"),
        });
    }
    Ok((theta_i_deg.to_radians().sin() / n0).asin())
}

/// Phototactic response `M(G) = a₁·sin(f₁·χ) − a₂·sin(f₂·χ)` with
/// `χ = (G/G_p)·e^{Υ(G_p − G)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhototaxisCurve {
    pub upsilon: f64,
    pub amplitudes: (f64, f64),
    pub frequencies: (f64, f64),
    pub pivot: f64,
    /// Nominal critical intensity, used for diagnostics only.
    pub gc: f64,
}

impl PhototaxisCurve {
    pub fn with_upsilon(upsilon: f64, gc: f64) -> Self {
        Self {
            upsilon,
            amplitudes: (0.8, 0.1),
            frequencies: (1.5 * PI, 0.5 * PI),
            pivot: 3.8,
            gc,
        }
    }

    /// Curve with its sign change near `G = 1.3`.
    pub fn gc_1_3() -> Self {
        Self::with_upsilon(0.252, 1.3)
    }

    /// Curve with its sign change near `G = 1.9`.
    pub fn gc_1_9() -> Self {
        Self::with_upsilon(0.135, 1.9)
    }

    fn chi(&self, g: f64) -> (f64, f64) {
        let e = (self.upsilon * (self.pivot - g)).exp() / self.pivot;
        (g * e, e * (1.0 - self.upsilon * g))
    }

    /// Exact sign change of `M` on `(0, pivot)`.
    pub fn root(&self) -> Result<f64> {
        let lo = 1e-6 * self.pivot;
        let hi = self.pivot * (1.0 - 1e-9);
        // M > 0 near 0, M(pivot) < 0; refine the first sign change on a scan
        let n = 400;
        let mut a = lo;
        for k in 1..=n {
            let b = lo + (hi - lo) * k as f64 / n as f64;
            if phototaxis_m(a, self) * phototaxis_m(b, self) <= 0.0 {
                return brent_root(|g| phototaxis_m(g, self), a, b, 1e-14);
            }
            a = b;
        }
        Err(Error::NoBracket {
            a: lo,
            b: hi,
            fa: phototaxis_m(lo, self),
            fb: phototaxis_m(hi, self),
        })
    }
}

impl Default for PhototaxisCurve {
    fn default() -> Self {
        Self::gc_1_3()
    }
}

pub fn phototaxis_m(g: f64, curve: &PhototaxisCurve) -> f64 {
    let (chi, _) = curve.chi(g);
    let (a1, a2) = curve.amplitudes;
    let (f1, f2) = curve.frequencies;
    a1 * (f1 * chi).sin() - a2 * (f2 * chi).sin()
}

pub fn phototaxis_dmdg(g: f64, curve: &PhototaxisCurve) -> f64 {
    let (chi, dchi) = curve.chi(g);
    let (a1, a2) = curve.amplitudes;
    let (f1, f2) = curve.frequencies;
    (a1 * f1 * (f1 * chi).cos() - a2 * f2 * (f2 * chi).cos()) * dchi
}

/// Complete nondimensional description of one suspension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionParams {
    pub sc: f64,
    pub vc: f64,
    pub tau_h: f64,
    pub omega: f64,
    pub a1: f64,
    pub b: f64,
    pub theta_i_deg: f64,
    pub n0: f64,
    pub curve: PhototaxisCurve,
}

impl Default for SuspensionParams {
    fn default() -> Self {
        Self {
            sc: 20.0,
            vc: 15.0,
            tau_h: 0.5,
            omega: 0.4,
            a1: 0.0,
            b: 0.26,
            theta_i_deg: 0.0,
            n0: WATER_INDEX,
            curve: PhototaxisCurve::gc_1_3(),
        }
    }
}

impl SuspensionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sc > 0.0) {
            return Err(Error::InvalidParam {
                name: "Sc",
                detail: "must be > 0".into(),
            });
        }
        if !(self.vc >= 0.0) || !self.vc.is_finite() {
            return Err(Error::InvalidParam {
                name: "Vc",
                detail: "must be >= 0".into(),
            });
        }
        self.radiation_params().map(|_| ())
    }

    pub fn cos_theta0(&self) -> Result<f64> {
        Ok(refraction_angle(self.theta_i_deg, self.n0)?.cos())
    }

    pub fn radiation_params(&self) -> Result<RadiationParams> {
        RadiationParams::new(self.omega, self.a1, self.b, self.tau_h, self.cos_theta0()?)
    }
}

/// Equilibrium profiles on a uniform z grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseState {
    pub params: SuspensionParams,
    pub cos_theta0: f64,
    pub z_grid: Grid1D,
    pub n_s: Vec<f64>,
    pub tau_of_z: Vec<f64>,
    pub g_s: Vec<f64>,
    pub q_s: Vec<f64>,
    pub g_s_coll: Vec<f64>,
    pub m_s: Vec<f64>,
    pub dmdg: Vec<f64>,
}

impl BaseState {
    pub fn len(&self) -> usize {
        self.n_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_s.is_empty()
    }

    pub fn z(&self) -> &[f64] {
        self.z_grid.points()
    }

    /// Diffuse part `G_s − G_s^c`.
    pub fn g_s_diffuse(&self) -> Vec<f64> {
        self.g_s.iter().zip(&self.g_s_coll).map(|(g, c)| g - c).collect()
    }

    /// `∫₀¹ n_s dz`: composite Boole (sixth order) when the interval count
    /// is a multiple of four, otherwise fourth-order cell quadrature.
    pub fn total_cells(&self) -> f64 {
        let n = self.len();
        if n >= 5 && (n - 1).is_multiple_of(4) {
            let h = 1.0 / (n - 1) as f64;
            let f = &self.n_s;
            return (0..(n - 1) / 4)
                .map(|c| {
                    let i = 4 * c;
                    7.0 * (f[i] + f[i + 4]) + 32.0 * (f[i + 1] + f[i + 3]) + 12.0 * f[i + 2]
                })
                .sum::<f64>()
                * (2.0 * h / 45.0);
        }
        integration_weights(self.z())
            .iter()
            .zip(&self.n_s)
            .map(|(w, n)| w * n)
            .sum()
    }
}

/// RK4 steps per output interval; steep sublayers need the finer step to
/// hold the normalisation to 1e-6 on the default grid.
const SUBSTEPS: usize = 4;

/// One RK4 sweep from the top with `n(1) = n_top`; returns `(n, τ)` indexed
/// from the bottom.
fn sweep(
    p: &SuspensionParams,
    g_of_tau: &dyn Fn(f64) -> f64,
    n_top: f64,
    n_z: usize,
) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / ((n_z - 1) * SUBSTEPS) as f64;
    let tau_h = p.tau_h;
    // s = 1 − z: dn/ds = −V_c·M(G(τ))·n, dτ/ds = τ_H·n
    let rhs = |n: f64, t: f64| {
        let m = phototaxis_m(g_of_tau(t.clamp(0.0, tau_h)), &p.curve);
        (-p.vc * m * n, tau_h * n)
    };
    let mut n = vec![0.0; n_z];
    let mut tau = vec![0.0; n_z];
    let (mut y0, mut y1) = (n_top, 0.0);
    n[n_z - 1] = y0;
    tau[n_z - 1] = y1;
    for step in 1..n_z {
        for _ in 0..SUBSTEPS {
            let k1 = rhs(y0, y1);
            let k2 = rhs(y0 + 0.5 * h * k1.0, y1 + 0.5 * h * k1.1);
            let k3 = rhs(y0 + 0.5 * h * k2.0, y1 + 0.5 * h * k2.1);
            let k4 = rhs(y0 + h * k3.0, y1 + h * k3.1);
            y0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            y1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        n[n_z - 1 - step] = y0;
        tau[n_z - 1 - step] = y1;
    }
    (n, tau)
}

/// Shoots on the top concentration so that `τ(0) = τ_H`, i.e. `∫n_s = 1`.
pub fn solve_base_state(p: &SuspensionParams, rad: &BasicRadiation, n_z: usize) -> Result<BaseState> {
    p.validate()?;
    if n_z < 65 {
        return Err(Error::InvalidParam {
            name: "n_z",
            detail: format!("need n_z >= 65, got {n_z}"),
        });
    }
    let rp = p.radiation_params()?;
    if (rp.tau_h - rad.params.tau_h).abs() > 0.0
        || rp.omega != rad.params.omega
        || rp.a1 != rad.params.a1
        || rp.b != rad.params.b
        || (rp.cos_theta0 - rad.params.cos_theta0).abs() > 1e-15
    {
        return Err(Error::GridMismatch(
            "radiation solved for different parameters".into(),
        ));
    }
    let tau_pts = rad.tau_grid.points();
    let g_interp = CubicInterp::new(tau_pts, &rad.g);
    let g_of_tau = |t: f64| g_interp.eval(t);
    let residual = |n_top: f64| sweep(p, &g_of_tau, n_top, n_z).1[0] / p.tau_h - 1.0;

    let (n, tau) = if p.vc == 0.0 {
        sweep(p, &g_of_tau, 1.0, n_z)
    } else {
        let mut lo = 1.0;
        let mut hi = 1.0;
        let mut tries = 0;
        while residual(lo) > 0.0 {
            lo *= 0.5;
            tries += 1;
            if tries > 200 {
                return Err(Error::NoBracket { a: lo, b: hi, fa: residual(lo), fb: residual(hi) });
            }
        }
        while residual(hi) < 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::NoBracket { a: lo, b: hi, fa: residual(lo), fb: residual(hi) });
            }
        }
        let n_top = if lo == hi {
            lo
        } else {
            brent_root_with(|x| Ok(residual(x)), lo, hi, 1e-15 * hi)?
        };
        sweep(p, &g_of_tau, n_top, n_z)
    };
    let z_grid = Grid1D::uniform(0.0, 1.0, n_z)?;
    if let Some(i) = n.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NegativeConcentration {
            z: z_grid.points()[i],
            value: n[i],
        });
    }
    let q_interp = CubicInterp::new(tau_pts, &rad.q);
    let c = rp.cos_theta0;
    let tau: Vec<f64> = tau.into_iter().map(|t| t.clamp(0.0, p.tau_h)).collect();
    let g_s: Vec<f64> = tau.iter().map(|&t| g_interp.eval(t)).collect();
    let q_s = tau.iter().map(|&t| q_interp.eval(t)).collect();
    let g_s_coll = tau.iter().map(|&t| (-t / c).exp()).collect();
    let m_s = g_s.iter().map(|&g| phototaxis_m(g, &p.curve)).collect();
    let dmdg = g_s.iter().map(|&g| phototaxis_dmdg(g, &p.curve)).collect();
    Ok(BaseState {
        params: *p,
        cos_theta0: c,
        z_grid,
        n_s: n,
        tau_of_z: tau,
        g_s,
        q_s,
        g_s_coll,
        m_s,
        dmdg,
    })
}

/// Location and strength of the concentrated sublayer.
#[derive(Debug, Clone, PartialEq)]
pub struct SublayerDiagnostics {
    /// Heights where `G_s = G_c`, increasing.
    pub crossings: Vec<f64>,
    /// Heights of local concentration maxima (boundary maxima included).
    pub sublayers: Vec<f64>,
    /// Height of the main sublayer above the bottom.
    pub huz: f64,
    /// `max n_s − n_s(0)`.
    pub cduz: f64,
    /// Set when `G_s` never reaches `G_c`; `huz` is then 1.
    pub no_crossing: bool,
}

pub fn sublayer_diagnostics(bs: &BaseState, gc: f64) -> Result<SublayerDiagnostics> {
    let z = bs.z();
    let nz = z.len();
    let shifted: Vec<f64> = bs.g_s.iter().map(|g| g - gc).collect();
    let interp = CubicInterp::new(z, &shifted);
    let mut crossings = Vec::new();
    for i in 0..nz - 1 {
        let (a, b) = (shifted[i], shifted[i + 1]);
        if a == 0.0 {
            crossings.push(z[i]);
        } else if a * b < 0.0 {
            crossings.push(brent_root(|t| interp.eval(t), z[i], z[i + 1], 1e-13)?);
        }
    }
    if shifted[nz - 1] == 0.0 {
        crossings.push(z[nz - 1]);
    }
    let n = &bs.n_s;
    let scale = n.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let mut sublayers = Vec::new();
    for i in 0..nz {
        let left = i == 0 || n[i] > n[i - 1] + tol;
        let right = i == nz - 1 || n[i] > n[i + 1] + tol;
        if left && right {
            sublayers.push(z[i]);
        }
    }
    let imax = (0..nz).fold(0, |b, i| if n[i] > n[b] { i } else { b });
    let cduz = n[imax] - n[0];
    let no_crossing = crossings.is_empty();
    let huz = if no_crossing {
        1.0
    } else {
        // snap the maximum to the nearest G = G_c root
        crossings
            .iter()
            .copied()
            .min_by(|a, b| (a - z[imax]).abs().total_cmp(&(b - z[imax]).abs()))
            .unwrap()
    };
    Ok(SublayerDiagnostics {
        crossings,
        sublayers,
        huz,
        cduz,
        no_crossing,
    })
}
