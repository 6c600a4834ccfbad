use num_complex::Complex64 as C64;
use phototaxis_core::basestate::*;
use phototaxis_core::numerics::fd::CubicInterp;
use phototaxis_core::perturb::*;
use phototaxis_core::radiative::solve_basic_radiation;
use std::f64::consts::PI;

fn base(a1: f64, theta_i: f64, n_z: usize) -> BaseState {
    let p = SuspensionParams { vc: 15.0, tau_h: 0.5, omega: 0.4, b: 0.26, theta_i_deg: theta_i, a1, ..Default::default() };
    let rad = solve_basic_radiation(&p.radiation_params().unwrap(), 201).unwrap();
    solve_base_state(&p, &rad, n_z).unwrap()
}

fn disturbance(z: &[f64], phase: f64) -> Vec<C64> {
    z.iter()
        .map(|&t| C64::new((PI * t).sin() + 0.3 * t, 0.2 * (2.0 * PI * t + phase).cos()))
        .collect()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn reconstructed_diffuse_intensity_matches_base_state() {
    let bs = base(0.8, 40.0, 129);
    let quad = AngularQuadrature::default();
    let setup = PerturbSetup::new(&bs, &quad).unwrap();
    let gd = bs.g_s_diffuse();
    for (i, want) in gd.iter().enumerate() {
        let g: f64 = (0..quad.nu.len()).map(|r| quad.w_nu[r] * 2.0 * PI * setup.ld[r][i]).sum();
        assert!((g - want).abs() < 2e-4, "z={} {g} {want}", bs.z()[i]);
    }
}

#[test]
fn zero_disturbance_gives_zero_field() {
    let bs = base(0.4, 0.0, 65);
    let input = EigenFunctionInput::new(bs.z(), vec![C64::new(0.0, 0.0); 65], 2.0, 1.0).unwrap();
    let f = solve_perturbed_diffuse(&input, &bs, &AngularQuadrature::default()).unwrap();
    for v in [&f.g1c, &f.g1d, &f.p, &f.q, &f.s, &f.gamma0] {
        assert!(v.iter().all(|c| c.norm() == 0.0));
    }
    let (_, g1, g2) = base_coefficients(&bs);
    assert!(f.gamma1.iter().zip(&g1).all(|(a, b)| a.re == *b && a.im == 0.0));
    assert!(f.gamma2.iter().zip(&g2).all(|(a, b)| a.re == *b && a.im == 0.0));
}

fn base_coefficients(bs: &BaseState) -> ((), Vec<f64>, Vec<f64>) {
    let (g1, g2) = base_gammas(bs);
    ((), g1, g2)
}

#[test]
fn collimated_response_vanishes_at_top() {
    let bs = base(0.0, 40.0, 65);
    let input = EigenFunctionInput::new(bs.z(), disturbance(bs.z(), 0.3), 1.0, 0.0).unwrap();
    let g = g1_collimated(&input, &bs).unwrap();
    assert_eq!(g[64], C64::new(0.0, 0.0));
}

#[test]
fn collimated_response_matches_beam_integration() {
    // integrate the perturbed beam equation dΨ/dz = (τ_H/c)·(n_s·Ψ + Θ·G_s^c)
    // downward from Ψ(1) = 0 with RK4 on a refined mesh
    let bs = base(0.4, 40.0, 257);
    let z = bs.z();
    let theta = disturbance(z, 0.1);
    let input = EigenFunctionInput::new(z, theta.clone(), 1.0, 0.0).unwrap();
    let analytic = g1_collimated(&input, &bs).unwrap();
    let f = bs.params.tau_h / bs.cos_theta0;
    let th_re: Vec<f64> = theta.iter().map(|c| c.re).collect();
    let th_im: Vec<f64> = theta.iter().map(|c| c.im).collect();
    let ns = CubicInterp::new(z, &bs.n_s);
    let gc = CubicInterp::new(z, &bs.g_s_coll);
    let (tr, ti) = (CubicInterp::new(z, &th_re), CubicInterp::new(z, &th_im));
    let rhs = |t: f64, psi: C64| (psi * ns.eval(t) + C64::new(tr.eval(t), ti.eval(t)) * gc.eval(t)) * f;
    let sub = 8;
    let mut psi = C64::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    for j in (0..z.len() - 1).rev() {
        let h = (z[j] - z[j + 1]) / sub as f64;
        let mut t = z[j + 1];
        for _ in 0..sub {
            let k1 = rhs(t, psi);
            let k2 = rhs(t + 0.5 * h, psi + k1 * (0.5 * h));
            let k3 = rhs(t + 0.5 * h, psi + k2 * (0.5 * h));
            let k4 = rhs(t + h, psi + k3 * h);
            psi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            t += h;
        }
        worst = worst.max((psi - analytic[j]).norm());
    }
    assert!(worst < 1e-8, "beam oracle differs by {worst:e}");
}

#[test]
fn assembled_operator_matches_iteration() {
    let bs = base(0.8, 40.0, 65);
    let quad = AngularQuadrature::default();
    let setup = PerturbSetup::new(&bs, &quad).unwrap();
    let (l, m) = (2.3, 1.1);
    let op = ResponseOperator::assemble(&setup, l, m).unwrap();
    let theta = disturbance(bs.z(), 0.7);
    let input = EigenFunctionInput::new(bs.z(), theta.clone(), l, m).unwrap();
    let it = solve_perturbed_diffuse_with(&input, &bs, &setup).unwrap();
    let Moments { g1c, g1d, s, p, q } = op.apply(&theta);
    let scale = it.g1d.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(max_diff(&g1c, &it.g1c) < 1e-12);
    for (a, b) in [(&g1d, &it.g1d), (&s, &it.s), (&p, &it.p), (&q, &it.q)] {
        assert!(max_diff(a, b) < 1e-8 * scale.max(1.0), "{:e}", max_diff(a, b));
    }
}

#[test]
fn response_is_linear() {
    let bs = base(0.4, 0.0, 65);
    let quad = AngularQuadrature::default();
    let setup = PerturbSetup::new(&bs, &quad).unwrap();
    let z = bs.z();
    let t1 = disturbance(z, 0.0);
    let t2: Vec<C64> = z.iter().map(|&x| C64::new(x * x, -x)).collect();
    let (al, be) = (C64::new(0.7, -1.2), C64::new(-0.4, 0.5));
    let mix: Vec<C64> = t1.iter().zip(&t2).map(|(a, b)| al * a + be * b).collect();
    let solve = |th: &Vec<C64>| {
        let input = EigenFunctionInput::new(z, th.clone(), 1.5, -0.5).unwrap();
        solve_perturbed_diffuse_with(&input, &bs, &setup).unwrap()
    };
    let (f1, f2, fm) = (solve(&t1), solve(&t2), solve(&mix));
    for (a, b, c) in [(&f1.g1d, &f2.g1d, &fm.g1d), (&f1.p, &f2.p, &fm.p), (&f1.s, &f2.s, &fm.s)] {
        let comb: Vec<C64> = a.iter().zip(b).map(|(x, y)| al * x + be * y).collect();
        assert!(max_diff(&comb, c) < 1e-9);
    }
}

#[test]
fn rotation_and_reflection_symmetry() {
    let bs = base(0.8, 0.0, 65);
    let quad = AngularQuadrature::default();
    let setup = PerturbSetup::new(&bs, &quad).unwrap();
    let k = 2.5;
    let theta: Vec<C64> = bs.z().iter().map(|&t| C64::new((PI * t).sin(), 0.0)).collect();
    let field = |l: f64, m: f64| {
        let input = EigenFunctionInput::new(bs.z(), theta.clone(), l, m).unwrap();
        solve_perturbed_diffuse_with(&input, &bs, &setup).unwrap()
    };
    let r = k / 2f64.sqrt();
    let fs = [field(k, 0.0), field(0.0, k), field(r, r)];
    let lpmq = |f: &PerturbationField, l: f64, m: f64| -> Vec<C64> {
        f.p.iter().zip(&f.q).map(|(p, q)| p * l + q * m).collect()
    };
    let base_h = lpmq(&fs[0], k, 0.0);
    for (f, (l, m)) in fs.iter().zip([(k, 0.0), (0.0, k), (r, r)]) {
        assert!(max_diff(&f.g1d, &fs[0].g1d) < 1e-8);
        assert!(max_diff(&f.s, &fs[0].s) < 1e-8);
        assert!(max_diff(&lpmq(f, l, m), &base_h) < 1e-8);
    }
    let flipped = field(-1.3, -0.4);
    let orig = field(1.3, 0.4);
    let conj = |v: &[C64]| v.iter().map(|c| c.conj()).collect::<Vec<_>>();
    assert!(max_diff(&flipped.p, &conj(&orig.p)) < 1e-10);
    assert!(max_diff(&flipped.q, &conj(&orig.q)) < 1e-10);
    assert!(max_diff(&flipped.g1d, &orig.g1d) < 1e-10);
    assert!(max_diff(&flipped.s, &orig.s) < 1e-10);
    let vertical = field(0.0, 0.0);
    assert!(vertical.p.iter().chain(&vertical.q).all(|v| v.norm() < 1e-12));
}

#[test]
fn angular_refinement() {
    let bs = base(0.4, 40.0, 65);
    let theta = disturbance(bs.z(), 0.2);
    let input = EigenFunctionInput::new(bs.z(), theta, 2.0, 0.5).unwrap();
    let solve = |np, na| solve_perturbed_diffuse(&input, &bs, &AngularQuadrature::new(np, na).unwrap()).unwrap();
    let coarse = solve(DEFAULT_N_POLAR, DEFAULT_N_AZIMUTH);
    let fine = solve(2 * DEFAULT_N_POLAR, 2 * DEFAULT_N_AZIMUTH);
    let finest = solve(4 * DEFAULT_N_POLAR, 4 * DEFAULT_N_AZIMUTH);
    let norm = |v: &[C64]| v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (a, b, c) in [
        (&coarse.g1d, &fine.g1d, &finest.g1d),
        (&coarse.s, &fine.s, &finest.s),
        (&coarse.p, &fine.p, &finest.p),
    ] {
        let rel = max_diff(a, b) / norm(c);
        println!("relative change on doubling: {rel:.2e}");
        assert!(rel < 1e-2, "{rel:e}");
        assert!(max_diff(b, c) < max_diff(a, c));
    }
}

#[test]
fn vanishing_swimming_speed_kills_coefficients() {
    let p = SuspensionParams { vc: 0.0, ..Default::default() };
    let rad = solve_basic_radiation(&p.radiation_params().unwrap(), 201).unwrap();
    let bs = solve_base_state(&p, &rad, 65).unwrap();
    let input = EigenFunctionInput::new(bs.z(), disturbance(bs.z(), 0.0), 1.0, 1.0).unwrap();
    let f = solve_perturbed_diffuse(&input, &bs, &AngularQuadrature::default()).unwrap();
    assert!(f.gamma0.iter().chain(&f.gamma1).chain(&f.gamma2).all(|v| v.norm() == 0.0));
}

#[test]
fn gamma1_spot_value_matches_product_rule() {
    // Γ₁ = (τ_H/c)·V_c·d/dz(n_s·G^c·M′(G_s)), differentiated by hand:
    // n_s′ = V_c·M·n_s, G^c′ = (τ_H/c)·n_s·G^c, G_s′ = −τ_H·n_s·dG/dτ
    let p = SuspensionParams { vc: 15.0, tau_h: 0.5, omega: 0.4, b: 0.26, ..Default::default() };
    let rad = solve_basic_radiation(&p.radiation_params().unwrap(), 401).unwrap();
    let bs = solve_base_state(&p, &rad, 513).unwrap();
    let (g1, _) = base_gammas(&bs);
    let i = 256;
    let c = bs.cos_theta0;
    let (n, gc, g, t) = (bs.n_s[i], bs.g_s_coll[i], bs.g_s[i], bs.tau_of_z[i]);
    let h = 1e-5;
    let dg_dtau = (rad.g_at(t + h) - rad.g_at(t - h)) / (2.0 * h);
    let m2 = (phototaxis_dmdg(g + h, &p.curve) - phototaxis_dmdg(g - h, &p.curve)) / (2.0 * h);
    let m1 = phototaxis_dmdg(g, &p.curve);
    let dn = p.vc * phototaxis_m(g, &p.curve) * n;
    let dgc = p.tau_h / c * n * gc;
    let dgs = -p.tau_h * n * dg_dtau;
    let expect = p.tau_h / c * p.vc * (dn * gc * m1 + n * dgc * m1 + n * gc * m2 * dgs);
    assert!((g1[i] - expect).abs() < 1e-6 * expect.abs(), "{} vs {expect}", g1[i]);
}
