//! Exponential integrals `E_n(x) = ∫₁^∞ e^{-xt} / tⁿ dt`.

use crate::error::{Error, Result};

const EULER: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1.0e-16;
const FPMIN: f64 = 1.0e-300;
const MAXIT: usize = 500;

/// `E_n(x)` for `n ≥ 1`, `x ≥ 0` (`x > 0` when `n = 1`).
///
/// Power series for `x ≤ 1`, modified Lentz continued fraction above.
pub fn expint(n: u32, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain {
            func: "expint",
            detail: "order must be >= 1".into(),
        });
    }
    if !(x >= 0.0) {
        return Err(Error::Domain {
            func: "expint",
            detail: format!("x = {x} must be >= 0"),
        });
    }
    if x == 0.0 {
        if n == 1 {
            return Err(Error::Domain {
                func: "expint",
                detail: "E_1 diverges at x = 0".into(),
            });
        }
        return Ok(1.0 / (n - 1) as f64);
    }
    Ok(expint_unchecked(n, x))
}

/// Same as [`expint`] without argument validation. `E_n(0)` for `n ≥ 2` is handled.
pub(crate) fn expint_unchecked(n: u32, x: f64) -> f64 {
    let nm1 = n as i64 - 1;
    if x == 0.0 {
        return if nm1 == 0 { f64::INFINITY } else { 1.0 / nm1 as f64 };
    }
    if x > 1.0 {
        continued_fraction(n, x)
    } else {
        series(n, x)
    }
}

fn continued_fraction(n: u32, x: f64) -> f64 {
    let nm1 = n as f64 - 1.0;
    let mut b = x + n as f64;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAXIT {
        let an = -(i as f64) * (nm1 + i as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h * (-x).exp()
}

fn series(n: u32, x: f64) -> f64 {
    let nm1 = n as i64 - 1;
    let mut ans = if nm1 != 0 {
        1.0 / nm1 as f64
    } else {
        -x.ln() - EULER
    };
    let mut fact = 1.0;
    for i in 1..=MAXIT as i64 {
        fact *= -x / i as f64;
        let del = if i != nm1 {
            -fact / (i - nm1) as f64
        } else {
            fact * (-x.ln() + digamma_int(nm1 as u32 + 1))
        };
        ans += del;
        if del.abs() < ans.abs() * EPS {
            break;
        }
    }
    ans
}

/// ψ(m) for positive integer m.
fn digamma_int(m: u32) -> f64 {
    (1..m).fold(-EULER, |acc, k| acc + 1.0 / k as f64)
}

/// `[E_1(x), E_2(x), E_3(x)]` for `x > 0`.
pub fn expint_123(x: f64) -> [f64; 3] {
    let ex = (-x).exp();
    if x <= 1.0 {
        // upward recurrence is stable here
        let e1 = series(1, x);
        let e2 = ex - x * e1;
        let e3 = 0.5 * (ex - x * e2);
        [e1, e2, e3]
    } else {
        let e3 = continued_fraction(3, x);
        let e2 = (ex - 2.0 * e3) / x;
        let e1 = (ex - e2) / x;
        [e1, e2, e3]
    }
}

/// Splits `E_n(x) = a(x)·ln x + b(x)` with `a, b` entire functions of `x`.
///
/// `a(x) = -(-x)^{n-1}/(n-1)!`; `b` is summed from the series directly for
/// `x ≤ 1` so that no cancellation against `ln x` occurs.
pub fn expint_log_split(n: u32, x: f64) -> (f64, f64) {
    let nm1 = n as i64 - 1;
    let mut fact_nm1 = 1.0;
    for k in 1..=nm1 {
        fact_nm1 *= k as f64;
    }
    let lead = (-x).powi(nm1 as i32) / fact_nm1;
    let a = -lead;
    if x > 1.0 {
        return (a, continued_fraction(n, x) - a * x.ln());
    }
    // b(x) = lead·ψ(n) − Σ_{k≠n−1} (−x)^k / ((k − n + 1)·k!)
    let mut b = lead * digamma_int(n);
    let mut term = 1.0; // (−x)^k / k!
    for k in 0..MAXIT as i64 {
        if k > 0 {
            term *= -x / k as f64;
        }
        if k != nm1 {
            let del = -term / (k - nm1) as f64;
            b += del;
            if k > nm1 && del.abs() < EPS * b.abs().max(1e-300) {
                break;
            }
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(expint(2, 0.0).unwrap(), 1.0);
        assert_eq!(expint(3, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn domain_errors() {
        assert!(expint(1, 0.0).is_err());
        assert!(expint(2, -0.1).is_err());
        assert!(expint(0, 1.0).is_err());
        assert!(expint(2, f64::NAN).is_err());
    }

    #[test]
    fn split_reassembles() {
        for &x in &[1e-9, 1e-4, 0.01, 0.3, 0.99, 1.5, 3.0] {
            for n in 1..=3 {
                let (a, b) = expint_log_split(n, x);
                let e = expint(n, x).unwrap();
                assert!((a * x.ln() + b - e).abs() < 1e-13 * e.max(1.0), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn joint_matches_single() {
        for &x in &[1e-6, 0.2, 1.0, 1.0001, 4.0, 20.0] {
            let e = expint_123(x);
            for n in 1..=3 {
                let r = expint(n as u32, x).unwrap();
                assert!((e[n - 1] - r).abs() <= 1e-13 * r.max(1e-300), "n={n} x={x}");
            }
        }
    }
}
