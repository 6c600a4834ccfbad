//! Linear stability of the base state to normal modes
//! `(W, Θ)(z)·e^{γt + i(lx + my)}`.
//!
//! Momentum and cell conservation are discretised on the base-state grid in
//! the unknowns `[W; Θ]`:
//!
//! ```text
//! (D² − k²)²W + R·k²·Θ               = (γ/S_c)·(D² − k²)W
//! −[Γ₀Θ + Γ₁Θ̃ + (k² + Γ₂)Θ
//!   + V_c·M_s·DΘ − D²Θ + V_c·n_s·M_s·W] = γ·Θ
//! ```
//!
//! with `Θ̃ = ∫₁^z Θ`, rigid bottom, stress-free top and zero cell flux at both
//! walls. The radiation response enters `Γ₀` and the flux conditions as dense
//! operators from [`ResponseOperator`], so the problem is a dense pencil whose
//! left side is affine in `R`. Boundary rows are eliminated and the leading
//! eigenvalue is read from a complex Schur decomposition.
//!
//! The pencil is real up to rounding: stationary modes have real `γ` and
//! oscillatory modes come in conjugate pairs. Neutral curves are therefore
//! traced separately for the leading real eigenvalue and the leading complex
//! pair.

use crate::basestate::BaseState;
use crate::error::{Error, Result};
use crate::numerics::fd::{cumulative_from_end, diff_matrix};
use crate::numerics::linalg::{eigenvalues_standard, inverse_iteration, leading_index, CMat, ReducedPencil};
use crate::numerics::golden_min;
use crate::numerics::roots::brent_root_with;
use crate::par;
use crate::perturb::{base_gammas, AngularQuadrature, PerturbSetup, ResponseOperator};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

type C64 = Complex64;

/// Imaginary parts below this are treated as a stationary mode.
pub const SIGMA_FLOOR: f64 = 1e-3;
/// Relative tolerance on neutral Rayleigh numbers.
pub const ROOT_RTOL: f64 = 1e-7;
const BRACKET_STEPS: [f64; 5] = [1.25, 2.0, 4.0, 8.0, 16.0];
const CACHE_LIMIT: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub l: f64,
    pub m: f64,
    pub r: f64,
    pub sc: f64,
}

impl ModeParams {
    /// Wavevector along `x`.
    pub fn new(k: f64, r: f64, sc: f64) -> Self {
        Self { l: k, m: 0.0, r, sc }
    }

    pub fn k(&self) -> f64 {
        self.l.hypot(self.m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthRateResult {
    pub gamma: C64,
    pub w: Vec<C64>,
    pub theta: Vec<C64>,
    pub theta_tilde: Vec<C64>,
    /// Interior sign changes of `Re W`.
    pub mode_number: usize,
    /// Largest relative residual over the boundary rows.
    pub bc_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchKind {
    Stationary,
    Oscillatory,
}

impl BranchKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BranchKind::Stationary => "stationary",
            BranchKind::Oscillatory => "oscillatory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeutralPoint {
    pub k: f64,
    pub r: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeutralBranch {
    pub kind: BranchKind,
    /// Ordered by increasing `k`.
    pub points: Vec<NeutralPoint>,
    /// Wavenumber where an oscillatory branch meets the stationary one.
    pub k_b: Option<f64>,
    /// Wavenumbers where no neutral point was found, with the reason.
    pub failures: Vec<(f64, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalMode {
    pub k_c: f64,
    pub r_c: f64,
    pub lambda_c: f64,
    pub sigma_c: f64,
    pub overstable: bool,
    pub mode_number: usize,
}

/// Discretised pencil at one `(l, m, S_c)`.
struct Pencil {
    reduced: ReducedPencil,
    /// Full left side without `R` (boundary rows are `R`-independent).
    a0: CMat,
    bc_rows: Vec<usize>,
}

/// Base state plus every `R`-independent operator, shared by all solves.
pub struct StabilityProblem {
    bs: BaseState,
    setup: PerturbSetup,
    /// `D`, `D²`, `D⁴`
    d: [DMatrix<f64>; 3],
    j: DMatrix<f64>,
    gamma1: Vec<f64>,
    gamma2: Vec<f64>,
    cache: Mutex<HashMap<(u64, u64, u64), Arc<Pencil>>>,
}

/// Leading real eigenvalue and leading member of a complex pair.
#[derive(Debug, Clone, Copy)]
struct Spectrum {
    real: Option<C64>,
    complex: Option<C64>,
}

impl Spectrum {
    fn of(values: &[C64]) -> Self {
        let pick = |osc: bool| {
            let sel: Vec<C64> = values.iter().copied().filter(|v| (v.im.abs() > SIGMA_FLOOR) == osc).collect();
            leading_index(&sel).map(|i| sel[i])
        };
        Self {
            real: pick(false),
            complex: pick(true),
        }
    }

    fn get(&self, kind: BranchKind) -> Option<C64> {
        match kind {
            BranchKind::Stationary => self.real,
            BranchKind::Oscillatory => self.complex,
        }
    }
}

impl StabilityProblem {
    pub fn new(bs: &BaseState, quad: &AngularQuadrature) -> Result<Self> {
        let setup = PerturbSetup::new(bs, quad)?;
        let z = bs.z();
        let d = [1, 2, 4].map(|m| diff_matrix(z, m));
        let (gamma1, gamma2) = base_gammas(bs);
        Ok(Self {
            bs: bs.clone(),
            setup,
            d,
            j: cumulative_from_end(z),
            gamma1,
            gamma2,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn base_state(&self) -> &BaseState {
        &self.bs
    }

    fn pencil(&self, l: f64, m: f64, sc: f64) -> Result<Arc<Pencil>> {
        let key = (l.to_bits(), m.to_bits(), sc.to_bits());
        if let Some(p) = self.cache.lock().expect("pencil cache").get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.assemble(l, m, sc)?);
        let mut cache = self.cache.lock().expect("pencil cache");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, p.clone());
        Ok(p)
    }

    fn assemble(&self, l: f64, m: f64, sc: f64) -> Result<Pencil> {
        if !(sc > 0.0) {
            return Err(Error::InvalidParam {
                name: "Sc",
                detail: format!("must be positive, got {sc}"),
            });
        }
        let bs = &self.bs;
        let n = bs.len();
        let vc = bs.params.vc;
        let k2 = l * l + m * m;
        let ro = ResponseOperator::assemble(&self.setup, l, m)?;
        let c = |v: f64| C64::new(v, 0.0);
        let [d1, d2, d4] = &self.d;

        // Γ₀Θ = V_c·D(n_s M′ 𝒢₁^d) − i·(V_c n_s M_s/q_s)·(lP + mQ)
        let horiz = &ro.p * c(l) + &ro.q * c(m);
        let mut inner = ro.g1d.clone();
        for i in 0..n {
            inner.row_mut(i).scale_mut(bs.n_s[i] * bs.dmdg[i]);
        }
        let d1c = d1.map(c);
        let mut gamma0 = &d1c * &inner * c(vc);
        for i in 0..n {
            let f = C64::new(0.0, -vc * bs.n_s[i] * bs.m_s[i] / bs.q_s[i]);
            for jj in 0..n {
                gamma0[(i, jj)] += f * horiz[(i, jj)];
            }
        }
        let mut lt = gamma0;
        for i in 0..n {
            for jj in 0..n {
                lt[(i, jj)] += c(self.gamma1[i] * self.j[(i, jj)] + vc * bs.m_s[i] * d1[(i, jj)] - d2[(i, jj)]);
            }
            lt[(i, i)] += c(k2 + self.gamma2[i]);
        }

        let dim = 2 * n;
        let mut a0 = CMat::zeros(dim, dim);
        let mut ar = CMat::zeros(dim, dim);
        let mut b = CMat::zeros(dim, dim);
        for i in 0..n {
            for jj in 0..n {
                a0[(i, jj)] = c(d4[(i, jj)] - 2.0 * k2 * d2[(i, jj)]);
                b[(i, jj)] = c(d2[(i, jj)] / sc);
                a0[(n + i, n + jj)] = -lt[(i, jj)];
            }
            a0[(i, i)] += c(k2 * k2);
            b[(i, i)] -= c(k2 / sc);
            ar[(i, n + i)] = c(k2);
            a0[(n + i, i)] = c(-vc * bs.m_s[i] * bs.n_s[i]);
            b[(n + i, n + i)] = c(1.0);
        }

        let bc_rows = vec![0, 1, n - 2, n - 1, n, 2 * n - 1];
        for &r in &bc_rows {
            for jj in 0..dim {
                a0[(r, jj)] = c(0.0);
                ar[(r, jj)] = c(0.0);
                b[(r, jj)] = c(0.0);
            }
        }
        // W = DW = 0 at the bottom, W = D²W = 0 at the top
        a0[(0, 0)] = c(1.0);
        a0[(n - 1, n - 1)] = c(1.0);
        for jj in 0..n {
            a0[(1, jj)] = c(d1[(0, jj)]);
            a0[(n - 2, jj)] = c(d2[(n - 1, jj)]);
        }
        // zero cell flux: DΘ − V_c M_s Θ − V_c n_s M′·𝒢₁ = 0 with 𝒢₁ = 𝒢₁^c + 𝒢₁^d
        for (row, i) in [(n, 0), (2 * n - 1, n - 1)] {
            let f = vc * bs.n_s[i] * bs.dmdg[i];
            for jj in 0..n {
                a0[(row, n + jj)] = c(d1[(i, jj)]) - (ro.g1c[(i, jj)] + ro.g1d[(i, jj)]) * f;
            }
            a0[(row, n + i)] -= c(vc * bs.m_s[i]);
        }
        let reduced = ReducedPencil::affine(&a0, &ar, &b)?;
        Ok(Pencil { reduced, a0, bc_rows })
    }

    fn spectrum(&self, pencil: &Pencil, r: f64) -> Result<Spectrum> {
        Ok(Spectrum::of(&pencil.reduced.eigenvalues(r)?))
    }

    /// Leading eigenvalue and eigenfunctions at one mode.
    pub fn growth_rate(&self, mp: &ModeParams) -> Result<GrowthRateResult> {
        let pencil = self.pencil(mp.l, mp.m, mp.sc)?;
        let c = pencil.reduced.matrix(mp.r);
        let values = eigenvalues_standard(c.clone())?;
        let i = leading_index(&values).ok_or(Error::Singular("stability pencil has no finite eigenvalues"))?;
        self.eigenfunctions(&pencil, &c, values[i])
    }

    fn eigenfunctions(&self, pencil: &Pencil, c: &CMat, gamma: C64) -> Result<GrowthRateResult> {
        let n = self.bs.len();
        let pair = inverse_iteration(c, gamma, None)?;
        let mut x = pencil.reduced.expand(&pair.vector);
        // scale so that W has unit peak with that entry real positive
        let peak = x[..n].iter().copied().fold(C64::new(0.0, 0.0), |acc, v| if v.norm() > acc.norm() { v } else { acc });
        if peak.norm() > 0.0 {
            let f = C64::new(1.0, 0.0) / peak;
            x.iter_mut().for_each(|v| *v *= f);
        }
        let bc_residual = pencil
            .bc_rows
            .iter()
            .map(|&row| {
                let (mut s, mut mag) = (C64::new(0.0, 0.0), 0.0);
                for (jj, xv) in x.iter().enumerate() {
                    let t = pencil.a0[(row, jj)] * xv;
                    s += t;
                    mag += t.norm();
                }
                if mag > 0.0 { s.norm() / mag } else { 0.0 }
            })
            .fold(0.0, f64::max);
        let w = x[..n].to_vec();
        let theta = x[n..].to_vec();
        let theta_tilde = (0..n)
            .map(|i| (0..n).fold(C64::new(0.0, 0.0), |acc, jj| acc + theta[jj] * self.j[(i, jj)]))
            .collect();
        Ok(GrowthRateResult {
            gamma: pair.value,
            mode_number: sign_changes(&w),
            w,
            theta,
            theta_tilde,
            bc_residual,
        })
    }

    /// Neutral Rayleigh number of one branch at wavenumber `k`, searching
    /// outward from `center` by factors up to 16.
    pub fn neutral_point(&self, k: f64, sc: f64, kind: BranchKind, center: f64) -> Result<NeutralPoint> {
        let [s, o] = self.neutral_points(k, sc, center, &[kind]);
        match kind {
            BranchKind::Stationary => s,
            BranchKind::Oscillatory => o,
        }
    }

    /// Neutral points of the requested branches at `k`; the bracket search
    /// shares one spectrum per sampled `R`. Entries for branches not
    /// requested are errors.
    fn neutral_points(&self, k: f64, sc: f64, center: f64, kinds: &[BranchKind]) -> [Result<NeutralPoint>; 2] {
        let pencil = match self.pencil(k, 0.0, sc) {
            Ok(p) => p,
            Err(e) => {
                let msg = e.to_string();
                return [0, 1].map(|_| Err(Error::Domain { func: "neutral_point", detail: msg.clone() }));
            }
        };
        let [bs, bo] = self.brackets(&pencil, center, kinds);
        let solve = |kind: BranchKind, bracket: Result<(f64, f64)>| -> Result<NeutralPoint> {
            if !kinds.contains(&kind) {
                return Err(Error::Domain {
                    func: "neutral_point",
                    detail: format!("{} branch not requested", kind.as_str()),
                });
            }
            let (lo, hi) = bracket?;
            let f = |r: f64| -> Result<f64> {
                self.spectrum(&pencil, r)?.get(kind).map(|v| v.re).ok_or_else(|| Error::Domain {
                    func: "neutral_point",
                    detail: format!("no {} eigenvalue at R = {r}", kind.as_str()),
                })
            };
            let r = brent_root_with(f, lo, hi, ROOT_RTOL * hi)?;
            let sigma = match self.spectrum(&pencil, r)?.get(kind) {
                Some(v) if kind == BranchKind::Oscillatory => v.im.abs(),
                _ => 0.0,
            };
            Ok(NeutralPoint { k, r, sigma })
        };
        [solve(BranchKind::Stationary, bs), solve(BranchKind::Oscillatory, bo)]
    }

    /// Smallest brackets `[lo, hi]` around `center` on which the leading
    /// eigenvalue of each requested kind changes sign from negative to positive.
    fn brackets(&self, pencil: &Pencil, center: f64, kinds: &[BranchKind]) -> [Result<(f64, f64)>; 2] {
        let mut samples: Vec<(f64, Spectrum)> = Vec::new();
        let mut found: [Option<(f64, f64)>; 2] = [None, None];
        let mut first_err: Option<String> = None;
        let search = |samples: &[(f64, Spectrum)], kind: BranchKind| {
            let pts: Vec<(f64, f64)> = samples.iter().filter_map(|(r, s)| s.get(kind).map(|v| (*r, v.re))).collect();
            pts.windows(2).find(|w| w[0].1 < 0.0 && w[1].1 >= 0.0).map(|w| (w[0].0, w[1].0))
        };
        let mut radii = vec![1.0];
        radii.extend(BRACKET_STEPS);
        for (i, step) in radii.into_iter().enumerate() {
            let rs = if i == 0 { vec![center] } else { vec![center / step, center * step] };
            for r in rs {
                match self.spectrum(pencil, r) {
                    Ok(s) => samples.push((r, s)),
                    Err(e) => {
                        first_err.get_or_insert(e.to_string());
                    }
                }
            }
            samples.sort_by(|a, b| a.0.total_cmp(&b.0));
            for &kind in kinds {
                if found[kind as usize].is_none() {
                    found[kind as usize] = search(&samples, kind);
                }
            }
            if kinds.iter().all(|&kind| found[kind as usize].is_some()) {
                break;
            }
        }
        [BranchKind::Stationary, BranchKind::Oscillatory].map(|kind| {
            found[kind as usize].ok_or_else(|| {
                let pts: Vec<(f64, f64)> = samples.iter().filter_map(|(r, s)| s.get(kind).map(|v| (*r, v.re))).collect();
                match (pts.first(), pts.last()) {
                    (Some(a), Some(b)) => Error::NoBracket { a: a.0, b: b.0, fa: a.1, fb: b.1 },
                    _ => Error::Domain {
                        func: "neutral_point",
                        detail: first_err
                            .clone()
                            .unwrap_or_else(|| format!("no {} eigenvalue near R = {center}", kind.as_str())),
                    },
                }
            })
        })
    }

    /// `(R, γ)` at each requested Rayleigh number, in order.
    pub fn growth_curve(&self, k: f64, sc: f64, r_values: &[f64]) -> Result<Vec<(f64, C64)>> {
        r_values
            .iter()
            .map(|&r| Ok((r, self.growth_rate(&ModeParams::new(k, r, sc))?.gamma)))
            .collect()
    }

    /// Stationary and oscillatory neutral branches over `n_k` equally spaced
    /// wavenumbers. Wavenumbers without a neutral point are recorded in the
    /// branch's `failures` and skipped.
    pub fn trace_neutral_curve(&self, k_min: f64, k_max: f64, n_k: usize, sc: f64) -> Result<Vec<NeutralBranch>> {
        if !(k_min > 0.0 && k_max > k_min && n_k >= 2) {
            return Err(Error::InvalidParam {
                name: "k_range",
                detail: format!("need 0 < k_min < k_max and n_k >= 2, got ({k_min}, {k_max}, {n_k})"),
            });
        }
        let ks: Vec<f64> = (0..n_k)
            .map(|i| k_min + (k_max - k_min) * i as f64 / (n_k - 1) as f64)
            .collect();
        // seed the bracket centre at the middle of the range, then solve
        // every wavenumber independently
        let mid = ks[n_k / 2];
        let seed = self.first_neutral(mid, sc)?;
        let both = [BranchKind::Stationary, BranchKind::Oscillatory];
        let results = par::map_slice(&ks, |&k| self.neutral_points(k, sc, seed, &both));
        let mut branches: Vec<NeutralBranch> = [BranchKind::Stationary, BranchKind::Oscillatory]
            .into_iter()
            .map(|kind| NeutralBranch {
                kind,
                points: Vec::new(),
                k_b: None,
                failures: Vec::new(),
            })
            .collect();
        for (k, res) in ks.iter().zip(results) {
            for (b, r) in branches.iter_mut().zip(res) {
                match r {
                    Ok(p) if b.kind == BranchKind::Stationary || p.sigma > SIGMA_FLOOR => b.points.push(p),
                    Ok(_) => b.failures.push((*k, "pair merged onto the real axis".into())),
                    Err(e) => b.failures.push((*k, e.to_string())),
                }
            }
        }
        let k_b = bifurcation_wavenumber(&branches[1], &ks);
        branches[1].k_b = k_b;
        branches[0].k_b = k_b;
        Ok(branches)
    }

    /// Leading-eigenvalue neutral point found from scratch (no prior branch).
    fn first_neutral(&self, k: f64, sc: f64) -> Result<f64> {
        let pencil = self.pencil(k, 0.0, sc)?;
        let f = |r: f64| -> Result<f64> {
            let v = pencil.reduced.eigenvalues(r)?;
            let i = leading_index(&v).ok_or(Error::Singular("stability pencil"))?;
            Ok(v[i].re)
        };
        let mut lo = 0.0;
        let mut hi = 100.0;
        if f(lo)? >= 0.0 {
            return Err(Error::Domain {
                func: "trace_neutral_curve",
                detail: "base state unstable without buoyancy".into(),
            });
        }
        while f(hi)? < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e7 {
                return Err(Error::NoBracket {
                    a: 0.0,
                    b: hi,
                    fa: f(0.0)?,
                    fb: f(hi)?,
                });
            }
        }
        brent_root_with(f, lo, hi, 1e-3 * hi)
    }

    /// Minimum over all branches, refined by golden section between the
    /// neighbours of the best sampled point.
    pub fn critical_mode(&self, branches: &[NeutralBranch], sc: f64) -> Result<CriticalMode> {
        let (kind, idx) = branches
            .iter()
            .flat_map(|b| (0..b.points.len()).map(move |i| (b.kind, b, i)))
            .min_by(|a, b| a.1.points[a.2].r.total_cmp(&b.1.points[b.2].r))
            .map(|(kind, b, i)| (kind, (b, i)))
            .ok_or(Error::EmptyBranches)?;
        let (branch, i) = idx;
        let best = branch.points[i];
        let lo = if i > 0 { branch.points[i - 1].k } else { best.k };
        let hi = branch.points.get(i + 1).map_or(best.k, |p| p.k);
        let neutral = |k: f64| self.neutral_point(k, sc, kind, best.r);
        let refined = if hi > lo {
            let (k, _) = golden_min(|k| neutral(k).map(|p| p.r), lo, hi, 1e-4 * best.k)?;
            let p = neutral(k)?;
            if p.r <= best.r { p } else { best }
        } else {
            best
        };
        let mode = self.growth_rate(&ModeParams::new(refined.k, refined.r, sc))?;
        Ok(CriticalMode {
            k_c: refined.k,
            r_c: refined.r,
            lambda_c: 2.0 * PI / refined.k,
            sigma_c: refined.sigma,
            overstable: kind == BranchKind::Oscillatory,
            mode_number: mode.mode_number,
        })
    }
}

/// Where the oscillatory pair reaches the real axis: linear extrapolation of
/// `σ²` from the last two oscillatory points, clamped to the scan step.
fn bifurcation_wavenumber(osc: &NeutralBranch, ks: &[f64]) -> Option<f64> {
    let pts = &osc.points;
    if pts.is_empty() {
        return None;
    }
    let step = (ks[ks.len() - 1] - ks[0]) / (ks.len() - 1) as f64;
    let last = pts[pts.len() - 1];
    if (last.k - ks[ks.len() - 1]).abs() < 1e-12 * step.max(1.0) {
        // the branch runs off the scanned range
        return None;
    }
    if pts.len() < 2 {
        return Some(last.k + 0.5 * step);
    }
    let prev = pts[pts.len() - 2];
    let (s0, s1) = (prev.sigma * prev.sigma, last.sigma * last.sigma);
    let kb = if s1 < s0 {
        last.k + s1 * (last.k - prev.k) / (s0 - s1)
    } else {
        last.k + 0.5 * step
    };
    Some(kb.clamp(last.k, last.k + step))
}

/// Interior sign changes of `Re w`, ignoring entries below 1e-6 of the peak.
fn sign_changes(w: &[C64]) -> usize {
    let peak = w.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    let mut last = 0.0_f64;
    let mut count = 0;
    for v in &w[1..w.len().saturating_sub(1)] {
        if v.re.abs() <= 1e-6 * peak {
            continue;
        }
        if last != 0.0 && v.re.signum() != last {
            count += 1;
        }
        last = v.re.signum();
    }
    count
}

/// One-shot growth rate on the default angular quadrature.
pub fn growth_rate(bs: &BaseState, mp: &ModeParams) -> Result<GrowthRateResult> {
    StabilityProblem::new(bs, &AngularQuadrature::default())?.growth_rate(mp)
}

/// One-shot critical mode from a set of traced branches.
pub fn critical_mode(bs: &BaseState, branches: &[NeutralBranch]) -> Result<CriticalMode> {
    StabilityProblem::new(bs, &AngularQuadrature::default())?.critical_mode(branches, bs.params.sc)
}
