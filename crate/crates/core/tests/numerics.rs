use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use phototaxis_core::numerics::linalg::{leading_eigenpair, CMat, ReducedPencil};
use phototaxis_core::numerics::{brent_root, expint, gauss_nodes};
use proptest::prelude::*;

/// `∫₁^∞ e^{−xt}/tⁿ dt` with `t = 1/u`, composite Simpson on `[0, 1]`.
fn expint_by_quadrature(n: i32, x: f64) -> f64 {
    let f = |u: f64| if u <= 0.0 { 0.0 } else { (-x / u).exp() * u.powi(n - 2) };
    let m = 200_000;
    let h = 1.0 / m as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..m {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn expint_spot_values() {
    assert_eq!(expint(2, 0.0).unwrap(), 1.0);
    assert_eq!(expint(3, 0.0).unwrap(), 0.5);
    let e11 = expint(1, 1.0).unwrap();
    assert!((e11 - 0.219_383_934_395_520_3).abs() < 1e-12);
    assert!((e11 - expint_by_quadrature(1, 1.0)).abs() < 1e-10);
}

#[test]
fn expint_matches_quadrature_oracle() {
    for &x in &[0.05, 0.3, 0.9, 1.1, 2.5] {
        for n in 1..=3 {
            let q = expint_by_quadrature(n as i32, x);
            let e = expint(n, x).unwrap();
            assert!((e - q).abs() < 1e-9 * q.max(1.0), "n={n} x={x}: {e} vs {q}");
        }
    }
}

#[test]
fn expint_recurrence_and_derivative() {
    for &x in &[0.01, 0.1, 1.0, 5.0] {
        for n in 1..=3u32 {
            let r = n as f64 * expint(n + 1, x).unwrap() - (-x).exp() + x * expint(n, x).unwrap();
            assert!(r.abs() < 1e-10, "n={n} x={x}: {r:e}");
        }
        for n in 2..=3u32 {
            let h = 1e-5 * x.max(1e-3);
            let d = (expint(n, x + h).unwrap() - expint(n, x - h).unwrap()) / (2.0 * h);
            let want = -expint(n - 1, x).unwrap();
            assert!(((d - want) / want).abs() < 1e-6, "n={n} x={x}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expint_recurrence_holds(x in 0.01f64..5.0, n in 1u32..=3) {
        let r = n as f64 * expint(n + 1, x).unwrap() - (-x).exp() + x * expint(n, x).unwrap();
        prop_assert!(r.abs() < 1e-10);
    }

    #[test]
    fn expint_is_decreasing(x in 0.01f64..5.0, dx in 1e-3f64..1.0, n in 1u32..=3) {
        prop_assert!(expint(n, x + dx).unwrap() < expint(n, x).unwrap());
    }

    #[test]
    fn gauss_is_exact_for_low_degree(order in 1usize..=30, a in -2.0f64..-0.1, b in 0.1f64..3.0, frac in 0.0f64..1.0) {
        let rule = gauss_nodes(order, a, b).unwrap();
        let deg = ((2 * order - 1) as f64 * frac).round() as i32;
        let got = rule.integrate(|x| x.powi(deg));
        let want = (b.powi(deg + 1) - a.powi(deg + 1)) / (deg + 1) as f64;
        let scale = (b.abs().powi(deg + 1) + a.abs().powi(deg + 1)) / (deg + 1) as f64;
        prop_assert!((got - want).abs() <= 1e-13 * scale.max(want.abs()), "{} vs {}", got, want);
        prop_assert!((rule.weights.iter().sum::<f64>() - (b - a)).abs() < 1e-12 * (b - a));
        prop_assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(rule.nodes[0] > a && rule.nodes[order - 1] < b);
    }

    #[test]
    fn brent_finds_shifted_cubic(c in -0.9f64..0.9) {
        let r = brent_root(|x| (x - c) * (1.0 + x * x), -1.0, 1.0, 1e-13).unwrap();
        prop_assert!((r - c).abs() < 1e-12);
    }

    #[test]
    fn hermitian_leading_value_matches_symmetric_oracle(entries in prop::collection::vec(-1.0f64..1.0, 50)) {
        let n = 5;
        let raw = DMatrix::from_fn(n, n, |i, j| C64::new(entries[i * n + j], entries[25 + i * n + j]));
        let a = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
        let oracle = a.clone().symmetric_eigen().eigenvalues.max();
        let pair = leading_eigenpair(&a, &CMat::identity(n, n)).unwrap();
        prop_assert!(pair.value.im.abs() < 1e-10);
        prop_assert!((pair.value.re - oracle).abs() < 1e-10);
    }

    #[test]
    fn pencil_eigenvalues_are_determinant_roots(entries in prop::collection::vec(-1.0f64..1.0, 144)) {
        let n = 6;
        let a = DMatrix::from_fn(n, n, |i, j| C64::new(entries[i * n + j], entries[36 + i * n + j]));
        let mut b = DMatrix::from_fn(n, n, |i, j| C64::new(entries[72 + i * n + j], entries[108 + i * n + j]));
        for i in 0..n {
            b[(i, i)] += C64::new(3.0, 0.0);
        }
        let values = ReducedPencil::new(&a, &b).unwrap().eigenvalues(0.0).unwrap();
        let roots = det_roots(&a, &b);
        prop_assert_eq!(values.len(), n);
        for v in &values {
            let d = roots.iter().map(|r| (r - v).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-7 * (1.0 + v.norm()), "{} not a root ({:e})", v, d);
        }
        for r in &roots {
            let d = values.iter().map(|v| (r - v).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-7 * (1.0 + r.norm()));
        }
        let lead = leading_eigenpair(&a, &b).unwrap();
        let max_re = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((lead.value.re - max_re).abs() < 1e-7);
    }
}

fn det(m: &CMat) -> C64 {
    m.clone().lu().determinant()
}

/// Roots of `det(A − γB)`: coefficients by sampling on a circle and an
/// inverse DFT, then Durand–Kerner.
fn det_roots(a: &CMat, b: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let m = n + 1;
    let radius = 1.0;
    let samples: Vec<C64> = (0..m)
        .map(|j| {
            let g = C64::from_polar(radius, 2.0 * std::f64::consts::PI * j as f64 / m as f64);
            det(&(a - b * g))
        })
        .collect();
    let coef: Vec<C64> = (0..m)
        .map(|p| {
            let s = (0..m).fold(C64::new(0.0, 0.0), |acc, j| {
                acc + samples[j] * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (p * j) as f64 / m as f64)
            });
            s / (m as f64 * radius.powi(p as i32))
        })
        .collect();
    let lead = coef[n];
    let monic: Vec<C64> = coef.iter().map(|c| c / lead).collect();
    let eval = |z: C64| monic.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c);
    let mut z: Vec<C64> = (0..n).map(|k| C64::new(0.4, 0.9).powu(k as u32) * 2.0).collect();
    for _ in 0..2000 {
        let prev = z.clone();
        for i in 0..n {
            let zi = z[i];
            let denom = (0..n).filter(|&j| j != i).fold(C64::new(1.0, 0.0), |acc, j| acc * (zi - z[j]));
            z[i] = zi - eval(zi) / denom;
        }
        if z.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15 * (1.0 + a.norm())) {
            break;
        }
    }
    // polish with Newton on the determinant itself
    z.into_iter()
        .map(|mut g| {
            for _ in 0..3 {
                let h = 1e-7 * (1.0 + g.norm());
                let f = det(&(a - b * g));
                let df = (det(&(a - b * (g + h))) - det(&(a - b * (g - h)))) / (2.0 * h);
                if df.norm() > 0.0 {
                    g -= f / df;
                }
            }
            g
        })
        .collect()
}

#[test]
fn leading_eigenpair_examples() {
    let c = |re: f64, im: f64| C64::new(re, im);
    let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(3.0, 0.0)]));
    let p = leading_eigenpair(&a, &CMat::identity(2, 2)).unwrap();
    assert!((p.value - c(3.0, 0.0)).norm() < 1e-12);
    assert!(p.vector[0].norm() < 1e-10 && (p.vector[1] - c(1.0, 0.0)).norm() < 1e-10);
    let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
    let p = leading_eigenpair(&a, &CMat::identity(2, 2)).unwrap();
    assert!((p.value - c(0.0, 1.0)).norm() < 1e-12);
}
