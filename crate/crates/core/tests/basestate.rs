use phototaxis_core::basestate::*;
use phototaxis_core::numerics::fd::diff_matrix;
use phototaxis_core::radiative::solve_basic_radiation;

fn solve(p: &SuspensionParams, n_z: usize) -> BaseState {
    let rad = solve_basic_radiation(&p.radiation_params().unwrap(), 201).unwrap();
    solve_base_state(p, &rad, n_z).unwrap()
}

fn reference_case(a1: f64) -> SuspensionParams {
    SuspensionParams { vc: 15.0, tau_h: 0.5, omega: 0.4, b: 0.26, theta_i_deg: 0.0, a1, ..Default::default() }
}

fn argmax_z(bs: &BaseState) -> f64 {
    let i = (0..bs.len()).fold(0, |b, i| if bs.n_s[i] > bs.n_s[b] { i } else { b });
    bs.z()[i]
}

#[test]
fn no_swimming_gives_uniform_state() {
    let p = SuspensionParams { vc: 0.0, ..reference_case(0.4) };
    let bs = solve(&p, 129);
    assert!(bs.n_s.iter().all(|&n| n == 1.0));
    for (z, t) in bs.z().iter().zip(&bs.tau_of_z) {
        assert!((t - 0.5 * (1.0 - z)).abs() < 1e-12);
    }
    let d = sublayer_diagnostics(&bs, 1.3).unwrap();
    assert_eq!(d.cduz, 0.0);
}

#[test]
fn flat_response_gives_uniform_state() {
    let mut p = reference_case(0.0);
    p.curve.amplitudes = (0.0, 0.0);
    let bs = solve(&p, 65);
    assert!(bs.n_s.iter().all(|&n| (n - 1.0).abs() < 1e-12));
}

#[test]
fn normalisation_and_optical_depth() {
    let bs = solve(&reference_case(0.4), 129);
    assert!((bs.total_cells() - 1.0).abs() < 1e-6);
    assert!(bs.tau_of_z[bs.len() - 1] == 0.0);
    assert!((bs.tau_of_z[0] - 0.5).abs() < 1e-6);
    assert!(bs.n_s.iter().all(|&n| n > 0.0));
}

#[test]
fn profile_obeys_swimming_balance() {
    let p = reference_case(0.0);
    let bs = solve(&p, 129);
    let d = diff_matrix(bs.z(), 1);
    let dt = diff_matrix(&bs.tau_of_z.iter().rev().copied().collect::<Vec<_>>(), 1);
    let nrev: Vec<f64> = bs.n_s.iter().rev().copied().collect();
    let scale = bs.n_s.iter().cloned().fold(0.0, f64::max);
    for i in 4..bs.len() - 4 {
        let dn: f64 = (0..bs.len()).map(|j| d[(i, j)] * bs.n_s[j]).sum();
        assert!((dn - p.vc * bs.m_s[i] * bs.n_s[i]).abs() < 1e-4 * p.vc * scale);
        // against τ the cell density drops out: dn/dτ = −(V_c/τ_H)·M
        let k = bs.len() - 1 - i;
        let dndt: f64 = (0..bs.len()).map(|j| dt[(k, j)] * nrev[j]).sum();
        let expect = -(p.vc / p.tau_h) * bs.m_s[i];
        assert!((dndt - expect).abs() < 1e-4 * (p.vc / p.tau_h), "i={i}");
    }
}

#[test]
fn sublayer_near_mid_height_and_moves_down_with_forward_scattering() {
    let zs: Vec<f64> = [0.0, 0.4, 0.8].iter().map(|&a| argmax_z(&solve(&reference_case(a), 129))).collect();
    assert!((zs[0] - 0.5).abs() < 0.1, "{zs:?}");
    assert!(zs[1] <= zs[0] && zs[2] <= zs[1] && zs[2] < zs[0], "{zs:?}");
    let d0 = sublayer_diagnostics(&solve(&reference_case(0.0), 129), 1.3).unwrap();
    let d8 = sublayer_diagnostics(&solve(&reference_case(0.8), 129), 1.3).unwrap();
    assert!(d8.huz < d0.huz && d8.cduz < d0.cduz);
}

#[test]
fn bimodal_to_unimodal_with_forward_scattering() {
    let case = |a1: f64| SuspensionParams {
        vc: 15.0,
        tau_h: 1.0,
        omega: 1.0,
        b: 0.02,
        theta_i_deg: 0.0,
        a1,
        curve: PhototaxisCurve::gc_1_9(),
        ..Default::default()
    };
    let d0 = sublayer_diagnostics(&solve(&case(0.0), 129), 1.9).unwrap();
    let d8 = sublayer_diagnostics(&solve(&case(0.8), 129), 1.9).unwrap();
    assert_eq!(d0.crossings.len(), 2, "{d0:?}");
    assert_eq!(d0.sublayers.len(), 2, "{d0:?}");
    assert_eq!(d8.sublayers.len(), 1, "{d8:?}");
    assert!(d8.no_crossing && d8.huz == 1.0);
}

#[test]
fn grid_refinement() {
    let p = reference_case(0.4);
    let a = solve(&p, 129);
    let b = solve(&p, 257);
    for i in 0..a.len() {
        assert!((a.n_s[i] - b.n_s[2 * i]).abs() < 1e-5);
    }
}

#[test]
fn response_derivative_matches_differences() {
    for curve in [PhototaxisCurve::gc_1_3(), PhototaxisCurve::gc_1_9()] {
        for k in 0..=40 {
            let g = 0.05 + 0.09 * k as f64;
            let h = 1e-6;
            let fd = (phototaxis_m(g + h, &curve) - phototaxis_m(g - h, &curve)) / (2.0 * h);
            let an = phototaxis_dmdg(g, &curve);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "G={g}: {fd} {an}");
        }
    }
}

#[test]
fn snell_bound() {
    for k in 0..=899 {
        let t = refraction_angle(0.1 * k as f64, WATER_INDEX).unwrap();
        assert!(t < (1.0 / WATER_INDEX).asin());
    }
}

#[test]
fn normalisation_and_refinement_across_parameter_grid() {
    for vc in [10.0, 15.0, 20.0] {
        for (tau_h, b) in [(0.5, 0.26), (1.0, 0.48)] {
            for theta_i_deg in [0.0, 40.0, 80.0] {
                for a1 in [0.0, 0.4, 0.8] {
                    let p = SuspensionParams { vc, tau_h, b, theta_i_deg, a1, ..Default::default() };
                    let a = solve(&p, 129);
                    let f = solve(&p, 257);
                    assert!((a.total_cells() - 1.0).abs() < 1e-6, "{p:?}: {}", a.total_cells());
                    let dn = (0..a.len()).map(|i| (a.n_s[i] - f.n_s[2 * i]).abs()).fold(0.0, f64::max);
                    assert!(dn < 1e-5, "{p:?}: doubling n_z moves n_s by {dn:e}");
                }
            }
        }
    }
}
