//! Bessel functions of the first kind for real order.
//!
//! Two regimes are used: the ascending power series
//!
//! ```text
//! J_ν(x) = Σ_{k≥0} (-1)^k / (k! Γ(ν+k+1)) (x/2)^{2k+ν}
//! ```
//!
//! for small arguments, and Miller's backward recurrence normalized with the
//! Neumann-type sum `(x/2)^μ = Σ_k (μ+2k) Γ(μ+k)/k! · J_{μ+2k}(x)` for large
//! arguments, where cancellation would destroy the series. Orders in `(-2, 0)`
//! are reached by one downward step of `J_{ν-1} = (2ν/x) J_ν - J_{ν+1}`.

use crate::error::{Error, Result};
use statrs::function::gamma::{gamma, ln_gamma};

/// Crossover between the ascending series and backward recurrence.
const SERIES_MAX_X: f64 = 9.0;

/// Bessel function of the first kind `J_ν(x)` for `x ≥ 0` and real `ν > -2`
/// (negative integers are folded with `J_{-n} = (-1)^n J_n`).
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("bessel_j requires x >= 0, got {x}")));
    }
    if !nu.is_finite() {
        return Err(Error::Domain(format!("bessel_j: order {nu} not finite")));
    }
    // Negative integer order: reflect to positive order.
    if nu < 0.0 && (nu - nu.round()).abs() < 1e-12 {
        let n = (-nu.round()) as i64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(sign * bessel_j(-nu, x)?);
    }
    if nu <= -2.0 {
        return Err(Error::Domain(format!(
            "bessel_j supports orders > -2, got {nu}"
        )));
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    if nu < 0.0 {
        // J_ν = (2(ν+1)/x) J_{ν+1} - J_{ν+2}; both orders on the right are >= 0.
        let j1 = bessel_j(nu + 1.0, x)?;
        let j2 = bessel_j(nu + 2.0, x)?;
        return Ok(2.0 * (nu + 1.0) / x * j1 - j2);
    }
    if x <= SERIES_MAX_X {
        Ok(series(nu, x))
    } else {
        Ok(backward_recurrence(nu, x))
    }
}

/// Ascending series; cancellation grows like e^x, so this is reserved for
/// small arguments where it is accurate to near machine precision.
fn series(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    // Leading term (x/2)^ν / Γ(ν+1), in log space to postpone overflow.
    let mut term = if nu == 0.0 {
        1.0
    } else {
        let ln = nu * half.ln() - ln_gamma(nu + 1.0);
        // Γ(ν+1) > 0 for ν > -1, so the sign is that of the power.
        ln.exp()
    };
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (nu + kf));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-280) {
            break;
        }
    }
    sum
}

/// Miller's algorithm: run the three-term recurrence downward from a trial
/// order and normalize via `(x/2)^μ = Σ_k (μ+2k) Γ(μ+k)/k! J_{μ+2k}(x)`.
fn backward_recurrence(nu: f64, x: f64) -> f64 {
    let n_int = nu.floor() as usize;
    let mu = nu - n_int as f64; // fractional part in [0, 1)

    // Start well above both the argument and the target order.
    let start = (x + 18.0 * x.cbrt() + 40.0).max(nu + 40.0) as usize;
    let m = start + (start % 2); // even

    let mut fp1 = 0.0_f64; // f_{m+1}
    let mut f = 1e-300_f64; // f_m
    let mut target = 0.0;
    let mut values = vec![0.0; m + 1];
    values[m] = f;
    for k in (0..m).rev() {
        let fm1 = 2.0 * (mu + (k + 1) as f64) / x * f - fp1;
        fp1 = f;
        f = fm1;
        values[k] = f;
        // Rescale to dodge overflow on long downward runs.
        if f.abs() > 1e250 {
            for v in values.iter_mut().skip(k) {
                *v /= 1e250;
            }
            f /= 1e250;
            fp1 /= 1e250;
        }
    }
    // Normalization sum over even offsets: c_0 = Γ(μ+1), c_k = (μ+2k)Γ(μ+k)/k!.
    let mut s = gamma(mu + 1.0) * values[0];
    for k in 1..=m / 2 {
        let kf = k as f64;
        let c = (mu + 2.0 * kf) * (ln_gamma(mu + kf) - ln_gamma(kf + 1.0)).exp();
        s += c * values[2 * k];
    }
    if n_int <= m {
        target = values[n_int];
    }
    let norm = (0.5 * x).powf(mu) / s;
    target * norm
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 30-digit arithmetic (mpmath besselj).
    const REFERENCE: &[(f64, f64, f64)] = &[
        (0.0, 0.5, 0.938469807240812904),
        (0.0, 1.0, 0.765197686557966551),
        (0.0, 15.0, -0.0142244728267807732),
        (0.0, 18.5, 0.077164821422554699),
        (0.0, 25.0, 0.0962667832759581162),
        (0.0, 60.0, -0.0914718040890618695),
        (0.0, 100.0, 0.0199858503042231224),
        (0.5, 1.0, 0.67139670714180309),
        (0.5, 17.0, -0.186045249677634374),
        (0.5, 80.0, -0.0886610358117654585),
        (1.0, 1.0, 0.440050585744933516),
        (1.0, 19.0, -0.105701431142409267),
        (1.0, 45.0, 0.0283488543764245275),
        (1.5, 2.5, 0.525080264664003146),
        (1.5, 30.0, -0.0272679457111776878),
        (2.0, 40.0, -0.00106497468235803959),
        (3.0, 3.0, 0.309062722255251644),
        (3.0, 22.0, -0.0933043347281923505),
        (5.0, 95.0, 0.00794233727024726326),
        (-0.5, 1.0, 0.43109886801837608),
        (-0.5, 16.5, -0.137968763765313736),
        (-0.5, 77.0, -0.00281647862004161293),
        (-1.5, 4.0, 0.367112032460934155),
        (-1.5, 33.0, -0.1388257514052236),
        (2.5, 0.001, 1.68208822786427574e-9),
        (-0.5, 0.002, 17.8412054790572821),
        (4.0, 100.0, 0.0261058094477252822),
        (0.25, 12.0, -0.0415524397503665285),
        (-0.75, 55.0, 0.0436415458883759741),
    ];

    #[test]
    fn matches_high_precision_reference() {
        for &(nu, x, expect) in REFERENCE {
            let got = bessel_j(nu, x).unwrap();
            let rel = (got - expect).abs() / expect.abs();
            assert!(
                rel < 1e-10,
                "J_{nu}({x}): got {got:e}, want {expect:e}, rel err {rel:e}"
            );
        }
    }

    #[test]
    fn first_zero_of_j0() {
        // x0 located by a bisection on the ascending series alone.
        let f = |x: f64| series(0.0, x);
        let (mut a, mut b) = (2.0_f64, 3.0_f64);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let x0 = 0.5 * (a + b);
        assert!((x0 - 2.4048255576957728).abs() < 1e-12);
        assert!(bessel_j(0.0, 2.4048255576957728).unwrap().abs() < 1e-10);
    }

    #[test]
    fn half_order_closed_form() {
        for &x in &[0.3, 1.0, 2.0, 7.5, 14.0, 21.0, 55.0] {
            let expect = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin();
            let got = bessel_j(0.5, x).unwrap();
            assert!((got - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn branches_agree_near_crossover() {
        for &nu in &[0.0, 0.5, 1.0, 2.5, 0.25] {
            for &x in &[7.0, 8.5, 9.0, 10.0, 12.0] {
                let a = series(nu, x);
                let b = backward_recurrence(nu, x);
                assert!(
                    (a - b).abs() < 1e-11 * (1.0 + a.abs()),
                    "nu={nu} x={x}: series {a:e} vs miller {b:e}"
                );
            }
        }
    }

    #[test]
    fn negative_integer_order_reflects() {
        let j1 = bessel_j(1.0, 3.7).unwrap();
        let jm1 = bessel_j(-1.0, 3.7).unwrap();
        assert!((jm1 + j1).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(bessel_j(0.0, -1.0).is_err());
        assert!(bessel_j(-2.5, 1.0).is_err());
    }

    #[test]
    fn value_at_zero() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1.5, 0.0).unwrap(), 0.0);
    }
}
