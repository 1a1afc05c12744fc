//! Independent oracles shared by the integration tests: a factorial-sum
//! rotation-matrix element, a series/continued-fraction error function, a
//! Legendre recurrence, and an ordinary least-squares line fit. These are
//! deliberately separate implementations from the library's.

/// d^j_{0,k}(beta) by the explicit factorial sum (numerically fine for the
/// small orders it is used at).
pub fn wigner_d_oracle(j: u32, k: i32, beta: f64) -> f64 {
    let j = j as i64;
    let k = k as i64;
    let fact = |n: i64| -> f64 {
        assert!(n >= 0);
        (1..=n).map(|i| i as f64).product()
    };
    let c = (beta / 2.0).cos();
    let s = (beta / 2.0).sin();
    let pref = fact(j) * (fact(j + k) * fact(j - k)).sqrt();
    let mut sum = 0.0;
    for t in 0.max(k)..=j.min(j + k) {
        let denom = fact(j + k - t) * fact(t) * fact(t - k) * fact(j - t);
        let sign = if (t - k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        sum += sign * pref / denom
            * c.powi((2 * j + k - 2 * t) as i32)
            * s.powi((2 * t - k) as i32);
    }
    sum
}

/// Legendre polynomial P_n(x) by the Bonnet recurrence.
pub fn legendre_p(n: u32, x: f64) -> f64 {
    match n {
        0 => 1.0,
        _ => {
            let mut p_prev = 1.0;
            let mut p = x;
            for l in 1..n {
                let lf = l as f64;
                let next = ((2.0 * lf + 1.0) * x * p - lf * p_prev) / (lf + 1.0);
                p_prev = p;
                p = next;
            }
            p
        }
    }
}

/// High-precision erf: Maclaurin series for small |x|, complementary
/// continued fraction for the tail.
pub fn erf_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return -erf_oracle(-x);
    }
    if x < 3.0 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            let nf = n as f64;
            term *= -x * x / nf;
            let add = term / (2.0 * nf + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        1.0 - erfc_cf(x)
    }
}

/// erfc for x >= 3 via the continued fraction
/// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...)))),
/// evaluated backward at fixed depth.
fn erfc_cf(x: f64) -> f64 {
    let mut f = 0.0;
    for n in (1..=150).rev() {
        f = (n as f64 / 2.0) / (x + f);
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + f)
}

/// Ordinary least squares y = a + b x; returns (intercept, slope, r_squared).
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = sxy * sxy / (sxx * syy);
    (intercept, slope, r2)
}
