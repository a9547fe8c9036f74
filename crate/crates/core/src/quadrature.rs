//! One-dimensional quadrature rules on `[0, 1]` and a symmetric tridiagonal
//! eigensolver.
//!
//! Two families are provided: Gauss–Legendre, and Gauss rules for the
//! weight `-log u`. The latter are obtained from modified moments against
//! shifted Legendre polynomials (modified Chebyshev algorithm) followed by
//! Golub–Welsch.

use std::sync::OnceLock;

use crate::{Error, Result};

/// Largest Gauss–Legendre order kept in the shared table.
pub const MAX_GL_ORDER: usize = 96;
/// Largest log-weighted order kept in the shared table.
pub const MAX_LOG_ORDER: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Gauss–Legendre rule with `n` points on `[0, 1]`.
    pub fn gauss_legendre(n: usize) -> Rule {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1,1] -> [0,1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Rule { nodes, weights }
    }

    /// Gauss rule with `n` points for `int_0^1 -log(u) f(u) du`.
    pub fn log_weighted(n: usize) -> Result<Rule> {
        assert!(n >= 1);
        let (alpha, beta) = log_weight_recurrence(n);
        let (values, vectors) = symmetric_tridiagonal_eigen(
            &alpha,
            &beta[1..].iter().map(|b| b.sqrt()).collect::<Vec<_>>(),
        )?;
        let weights = vectors.iter().map(|v| beta[0] * v[0] * v[0]).collect();
        Ok(Rule {
            nodes: values,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Shared Gauss–Legendre rule of order `n` (clamped to `MAX_GL_ORDER`).
pub fn gl(n: usize) -> &'static Rule {
    static TABLE: OnceLock<Vec<Rule>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (1..=MAX_GL_ORDER).map(Rule::gauss_legendre).collect());
    &table[n.clamp(1, MAX_GL_ORDER) - 1]
}

/// Shared log-weighted rule of order `n` (clamped to `MAX_LOG_ORDER`).
pub fn log_gauss(n: usize) -> &'static Rule {
    static TABLE: OnceLock<Vec<Rule>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (1..=MAX_LOG_ORDER)
            .map(|n| Rule::log_weighted(n).expect("log-weighted rule construction"))
            .collect()
    });
    &table[n.clamp(1, MAX_LOG_ORDER) - 1]
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Recurrence coefficients `(alpha_k, beta_k)`, `k < n`, of the monic
/// orthogonal polynomials for `-log u` on `[0, 1]`.
fn log_weight_recurrence(n: usize) -> (Vec<f64>, Vec<f64>) {
    let len = 2 * n;
    // monic shifted Legendre: p_{l+1} = (x - 1/2) p_l - b_l p_{l-1}
    let a = vec![0.5; len];
    let b: Vec<f64> = (0..len)
        .map(|l| {
            let l = l as f64;
            l * l / (4.0 * (4.0 * l * l - 1.0))
        })
        .collect();
    let moments: Vec<f64> = (0..len)
        .map(|l| {
            if l == 0 {
                return 1.0;
            }
            // (l!)^2 / (2l)! built as a product to stay in range
            let mut ratio = 1.0;
            for j in 1..=l {
                ratio *= j as f64 / (l + j) as f64;
            }
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            sign * ratio / (l as f64 * (l as f64 + 1.0))
        })
        .collect();

    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut sig_prev = vec![0.0; len + 1];
    let mut sig = moments.clone();
    sig.push(0.0);
    alpha[0] = a[0] + moments[1] / moments[0];
    beta[0] = moments[0];
    for k in 1..n {
        let mut next = vec![0.0; len + 1];
        for l in k..(len - k) {
            next[l] = sig[l + 1] - (alpha[k - 1] - a[l]) * sig[l] - beta[k - 1] * sig_prev[l]
                + b[l] * sig[l - 1];
        }
        alpha[k] = a[k] + next[k + 1] / next[k] - sig[k] / sig[k - 1];
        beta[k] = next[k] / sig[k - 1];
        sig_prev = sig;
        sig = next;
    }
    (alpha, beta)
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
///
/// Returns eigenvalues in ascending order and the matching unit eigenvectors.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if off.len() + 1 != n && !(n == 0 && off.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "tridiagonal: {} diagonal vs {} off-diagonal entries",
            n,
            off.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    // z[k * n + i]: component k of eigenvector i
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::InvalidArgument(
                    "tridiagonal eigensolver did not converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zi1 = z[k * n + i + 1];
                    let zi = z[k * n + i];
                    z[k * n + i + 1] = s * zi + c * zi1;
                    z[k * n + i] = c * zi - s * zi1;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| z[k * n + i]).collect())
        .collect();
    Ok((values, vectors))
}
