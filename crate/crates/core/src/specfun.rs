//! Bessel functions `J_n`, `Y_n` and Hankel functions `H_0^(1)`, `H_1^(1)` of
//! real argument.
//!
//! Three regimes are used for orders 0 and 1:
//!
//! * `x < 4`: ascending power series, with the logarithmic part of `Y_0`
//!   and `Y_1` written out explicitly;
//! * `4 <= x < 20`: Miller backward recurrence normalised with
//!   `J_0 + 2 sum J_2k = 1`, and Neumann series for `Y_0`, `Y_1`;
//! * `x >= 20`: Hankel's asymptotic expansion summed to its smallest term
//!   (the truncation error there is below `e^{-2x}`).
//!
//! Higher orders come from forward recurrence where it is stable
//! (`n < x` for `J_n`, always for `Y_n`) and from Miller's algorithm
//! otherwise.

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_PI, PI};
use thiserror::Error;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 4.0;
const ASYMPTOTIC_LIMIT: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("argument {0} is outside the domain x > 0")]
    Domain(f64),
    #[error("Hankel function of order {0} is not provided (orders 0 and 1 only)")]
    Order(u32),
}

/// `J_0, J_1, Y_0, Y_1` evaluated together, plus the analytic remainder of
/// `Y_0` after removing its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bessel01 {
    pub j0: f64,
    pub j1: f64,
    pub y0: f64,
    pub y1: f64,
    /// `Y_0(x) - (2/pi) log(x/2) J_0(x)`; an entire function of `x^2`.
    pub y0_smooth: f64,
}

/// Evaluate `J_0, J_1, Y_0, Y_1` at `x > 0`.
///
/// `x` must be positive and finite; callers that cannot guarantee this
/// should go through [`hankel1`].
pub fn bessel01(x: f64) -> Bessel01 {
    debug_assert!(x > 0.0 && x.is_finite());
    if x < SERIES_LIMIT {
        series01(x)
    } else if x < ASYMPTOTIC_LIMIT {
        miller01(x)
    } else {
        asymptotic01(x)
    }
}

/// `H_0^(1)(x)` and `H_1^(1)(x)` together; `x > 0`.
#[inline]
pub fn hankel01(x: f64) -> (Complex64, Complex64) {
    let b = bessel01(x);
    (Complex64::new(b.j0, b.y0), Complex64::new(b.j1, b.y1))
}

/// Hankel function of the first kind, `H_n^(1)(x) = J_n(x) + i Y_n(x)`, for
/// `n` in `{0, 1}`.
pub fn hankel1(n: u32, x: f64) -> Result<Complex64, SpecFunError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecFunError::Domain(x));
    }
    let b = bessel01(x);
    match n {
        0 => Ok(Complex64::new(b.j0, b.y0)),
        1 => Ok(Complex64::new(b.j1, b.y1)),
        _ => Err(SpecFunError::Order(n)),
    }
}

/// Analytic part of `Y_0`: `Y_0(x) - (2/pi) log(x/2) J_0(x)`.
///
/// Well defined at `x = 0`, where it equals `2 gamma / pi`.
pub fn bessel_y0_smooth(x: f64) -> f64 {
    if x == 0.0 {
        return FRAC_2_PI * EULER_GAMMA;
    }
    bessel01(x.abs()).y0_smooth
}

/// Bessel function of the first kind `J_n(x)` for `x >= 0`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    // J_n(-x) = (-1)^n J_n(x)
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 1 { -v } else { v };
    }
    match n {
        0 => bessel01(x).j0,
        1 => bessel01(x).j1,
        _ if (n as f64) < x => {
            let b = bessel01(x);
            let (mut prev, mut cur) = (b.j0, b.j1);
            for m in 1..n {
                let next = (2.0 * m as f64 / x) * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
        _ => miller_single(n, x),
    }
}

/// Bessel function of the second kind `Y_n(x)` for `x > 0`.
pub fn bessel_y(n: u32, x: f64) -> Result<f64, SpecFunError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecFunError::Domain(x));
    }
    let b = bessel01(x);
    Ok(match n {
        0 => b.y0,
        1 => b.y1,
        _ => {
            let (mut prev, mut cur) = (b.y0, b.y1);
            for m in 1..n {
                let next = (2.0 * m as f64 / x) * cur - prev;
                prev = cur;
                cur = next;
                if !cur.is_finite() {
                    break;
                }
            }
            cur
        }
    })
}

fn series01(x: f64) -> Bessel01 {
    let t = 0.25 * x * x;
    let half = 0.5 * x;

    // J0, J1 and the harmonic-number sum of Y0.
    let mut j0 = 1.0;
    let mut term0 = 1.0; // (-t)^m / (m!)^2
    let mut y0_sum = 0.0; // sum_{m>=1} (-1)^{m+1} H_m t^m / (m!)^2
    let mut harmonic = 0.0;

    let mut j1_sum = 1.0;
    let mut term1 = 1.0; // (-t)^m / (m! (m+1)!)
                         // sum_{m>=0} (psi(m+1) + psi(m+2)) (-t)^m / (m!(m+1)!)
    let mut psi_m1 = -EULER_GAMMA; // psi(m+1)
    let mut psi_m2 = 1.0 - EULER_GAMMA; // psi(m+2)
    let mut y1_sum = psi_m1 + psi_m2;

    for m in 1..60 {
        let mf = m as f64;
        term0 *= -t / (mf * mf);
        j0 += term0;
        harmonic += 1.0 / mf;
        y0_sum -= harmonic * term0;

        term1 *= -t / (mf * (mf + 1.0));
        j1_sum += term1;
        psi_m1 += 1.0 / mf;
        psi_m2 += 1.0 / (mf + 1.0);
        y1_sum += (psi_m1 + psi_m2) * term1;

        if term0.abs() < 1e-18 && term1.abs() < 1e-18 {
            break;
        }
    }
    let j1 = half * j1_sum;
    let log_half = half.ln();
    let y0_smooth = FRAC_2_PI * (EULER_GAMMA * j0 + y0_sum);
    let y0 = FRAC_2_PI * log_half * j0 + y0_smooth;
    let y1 = -FRAC_2_PI / x + FRAC_2_PI * log_half * j1 - half * y1_sum / PI;
    Bessel01 {
        j0,
        j1,
        y0,
        y1,
        y0_smooth,
    }
}

fn miller01(x: f64) -> Bessel01 {
    let start = 2 * ((x + 36.0) as usize / 2 + 1);
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // j_{n+1}
    let mut cur = 1e-30; // j_n, n = start
    let mut norm = 0.0;
    let mut even_sum = 0.0; // sum_{k>=1} (-1)^k j_{2k} / k
    let mut odd_sum = 0.0; // sum over odd n of c_n j_n
    let mut j1 = 0.0;
    let mut n = start;
    loop {
        if n % 2 == 0 {
            if n == 0 {
                norm += cur;
            } else {
                norm += 2.0 * cur;
                let k = (n / 2) as f64;
                let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
                even_sum += sign * cur / k;
            }
        } else {
            // n = 2m + 1, c_n = (-1)^{m+1} (1/(m+1) + 1/m [m >= 1])
            let m = (n - 1) / 2;
            let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
            let mut c = 1.0 / (m as f64 + 1.0);
            if m >= 1 {
                c += 1.0 / m as f64;
            }
            odd_sum += sign * c * cur;
            if n == 1 {
                j1 = cur;
            }
        }
        if n == 0 {
            break;
        }
        let prev = (n as f64) * two_over_x * cur - next;
        next = cur;
        cur = prev;
        n -= 1;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            even_sum *= 1e-250;
            odd_sum *= 1e-250;
            j1 *= 1e-250;
        }
    }
    let j0 = cur / norm;
    let j1 = j1 / norm;
    let even_sum = even_sum / norm;
    let odd_sum = odd_sum / norm;
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let y0 = FRAC_2_PI * (log_term * j0 - 2.0 * even_sum);
    let y0_smooth = FRAC_2_PI * (EULER_GAMMA * j0 - 2.0 * even_sum);
    let y1 = FRAC_2_PI * (log_term * j1 - j0 / x + odd_sum);
    Bessel01 {
        j0,
        j1,
        y0,
        y1,
        y0_smooth,
    }
}

/// Sum of Hankel's expansion `sum_k i^k a_k(nu) / x^k` for integer `nu`.
fn hankel_asymptotic_sum(nu: u32, x: f64) -> Complex64 {
    let mu = 4.0 * (nu as f64) * (nu as f64);
    let mut sum = Complex64::new(1.0, 0.0);
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    // powers of i cycle 1, i, -1, -i
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (8.0 * k as f64 * x);
        let mag = a.abs();
        if mag > last {
            break;
        }
        let term = match k % 4 {
            0 => Complex64::new(a, 0.0),
            1 => Complex64::new(0.0, a),
            2 => Complex64::new(-a, 0.0),
            _ => Complex64::new(0.0, -a),
        };
        sum += term;
        if mag < 1e-17 {
            break;
        }
        last = mag;
    }
    sum
}

fn asymptotic01(x: f64) -> Bessel01 {
    let amp = (FRAC_2_PI / x).sqrt();
    let (s, c) = x.sin_cos();
    // e^{i(x - pi/4)} and e^{i(x - 3pi/4)}
    let phase0 = Complex64::new((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2);
    let phase1 = Complex64::new((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2);
    let h0 = phase0 * hankel_asymptotic_sum(0, x) * amp;
    let h1 = phase1 * hankel_asymptotic_sum(1, x) * amp;
    let y0_smooth = h0.im - FRAC_2_PI * (0.5 * x).ln() * h0.re;
    Bessel01 {
        j0: h0.re,
        j1: h1.re,
        y0: h0.im,
        y1: h1.im,
        y0_smooth,
    }
}

/// Miller backward recurrence for a single `J_n`, `n >= 2`, in the regime
/// `n >= x` where forward recurrence is unstable.
fn miller_single(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let start = 2 * ((top + 40.0 + 10.0 * top.sqrt()) as usize / 2 + 1);
    let two_over_x = 2.0 / x;
    let mut next = 0.0;
    let mut cur = 1e-30;
    let mut norm = 0.0;
    let mut result = 0.0;
    let mut m = start;
    loop {
        if m == n as usize {
            result = cur;
        }
        if m % 2 == 0 {
            norm += if m == 0 { cur } else { 2.0 * cur };
        }
        if m == 0 {
            break;
        }
        let prev = (m as f64) * two_over_x * cur - next;
        next = cur;
        cur = prev;
        m -= 1;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            result *= 1e-250;
        }
    }
    result / norm
}
