//! Extreme singular values, norms and condition numbers, and the Fourier
//! reference for the unit circle.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::operators::GalerkinMatrix;
use crate::specfun::{bessel01, EULER_GAMMA};
use crate::{Error, Result};

/// Dense SVD is used up to this dimension; iterative methods beyond.
pub const DENSE_SVD_LIMIT: usize = 4000;
/// `sigma_min < NEAR_SINGULAR_RATIO * sigma_max` raises the warning flag.
pub const NEAR_SINGULAR_RATIO: f64 = 1e-13;
const ITERATION_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularExtremes {
    pub sigma_max: f64,
    pub sigma_min: f64,
}

impl SingularExtremes {
    pub fn near_singular(&self) -> bool {
        self.sigma_min < NEAR_SINGULAR_RATIO * self.sigma_max
    }

    pub fn cond(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }
}

pub fn singular_extremes(m: &GalerkinMatrix) -> Result<SingularExtremes> {
    if !m.all_finite() {
        return Err(Error::Svd("matrix has non-finite entries".into()));
    }
    if m.n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let a = m.to_faer();
    if m.n <= DENSE_SVD_LIMIT {
        dense_extremes(&a)
    } else {
        iterative_extremes(&a)
    }
}

fn dense_extremes(a: &Mat<Complex64>) -> Result<SingularExtremes> {
    let s = a
        .singular_values()
        .map_err(|e| Error::Svd(format!("{e:?}")))?;
    let sigma_max = s.iter().copied().fold(0.0, f64::max);
    let sigma_min = s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SingularExtremes {
        sigma_max,
        sigma_min,
    })
}

fn start_vector(n: usize) -> Mat<Complex64> {
    // deterministic, not orthogonal to any fixed structured vector
    Mat::from_fn(n, 1, |i, _| {
        let t = i as f64;
        Complex64::new(1.0 + 0.5 * (0.7 * t).sin(), 0.3 * (1.3 * t).cos())
    })
}

fn normalise(x: &mut Mat<Complex64>) -> f64 {
    let nrm = x.norm_l2();
    if nrm > 0.0 {
        let inv = 1.0 / nrm;
        for i in 0..x.nrows() {
            x[(i, 0)] *= inv;
        }
    }
    nrm
}

fn iterative_extremes(a: &Mat<Complex64>) -> Result<SingularExtremes> {
    let n = a.nrows();
    // power iteration on A^H A
    let mut x = start_vector(n);
    normalise(&mut x);
    let mut sigma_max = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let y = a * &x;
        let mut z = a.adjoint() * &y;
        let lam = normalise(&mut z).sqrt();
        x = z;
        if (lam - sigma_max).abs() <= ITERATION_TOL * lam {
            sigma_max = lam;
            break;
        }
        sigma_max = lam;
    }
    // inverse iteration on (A^H A)^{-1} through one LU factorisation
    let lu = a.partial_piv_lu();
    let mut x = start_vector(n);
    normalise(&mut x);
    let mut inv_sigma = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let mut z = x.clone();
        lu.solve_adjoint_in_place(&mut z);
        lu.solve_in_place(&mut z);
        let mu = normalise(&mut z);
        if !mu.is_finite() {
            return Err(Error::Singular);
        }
        let lam = mu.sqrt();
        x = z;
        if (lam - inv_sigma).abs() <= ITERATION_TOL * lam {
            inv_sigma = lam;
            break;
        }
        inv_sigma = lam;
    }
    Ok(SingularExtremes {
        sigma_max,
        sigma_min: 1.0 / inv_sigma,
    })
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &GalerkinMatrix) -> Result<f64> {
    Ok(singular_extremes(m)?.sigma_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseNorm {
    pub value: f64,
    pub near_singular: bool,
}

/// `1 / sigma_min`; exactly singular matrices are an error.
pub fn inv_norm(m: &GalerkinMatrix) -> Result<InverseNorm> {
    let s = singular_extremes(m)?;
    if s.sigma_min == 0.0 {
        return Err(Error::Singular);
    }
    Ok(InverseNorm {
        value: 1.0 / s.sigma_min,
        near_singular: s.near_singular(),
    })
}

/// Growth exponent `p` with `v ~ C k^p` from two samples.
pub fn eoc_p(k1: f64, v1: f64, k2: f64, v2: f64) -> Result<f64> {
    if !(v1 > 0.0 && v2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rate estimate needs positive values, got {v1} and {v2}"
        )));
    }
    if !(k1 > 0.0 && k2 > 0.0) || k1 == k2 {
        return Err(Error::InvalidArgument(format!(
            "rate estimate needs distinct positive wavenumbers, got {k1} and {k2}"
        )));
    }
    Ok((v2 / v1).ln() / (k2 / k1).ln())
}

/// One row of a norm table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub shape: String,
    pub k: f64,
    pub eta_strategy: String,
    pub eta: f64,
    pub n: usize,
    pub norm_s: Option<f64>,
    pub norm_d: Option<f64>,
    pub norm_a: Option<f64>,
    pub norm_ainv: Option<f64>,
    pub cond: Option<f64>,
    pub near_singular: bool,
}

/// Eigenvalues of the unit-circle operators on `e^{i n theta}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleReference {
    pub k: f64,
    pub eta: f64,
    /// `(n, lambda_S(n), lambda_D(n), lambda_A(n))` for `n = 0..=n_max`;
    /// the spectrum is even in `n`.
    pub modes: Vec<(usize, Complex64, Complex64, Complex64)>,
    pub norm_s: f64,
    pub norm_d: f64,
    pub norm_a: f64,
    pub norm_ainv: f64,
    /// The supremum of `|lambda_A|` sits at the truncation order.
    pub truncated: bool,
}

/// Fourier eigenvalues of `S_k`, `D_k`, `A_{k,eta}` on the unit circle by
/// Kress's log-split trapezoidal rule with `2 * quad_order` nodes.
pub fn circle_fourier_reference(
    k: f64,
    eta: f64,
    n_max: usize,
    quad_order: usize,
) -> Result<CircleReference> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(
            "circle reference needs k > 0".into(),
        ));
    }
    let q = quad_order.max(n_max + 8);
    let m = 2 * q;
    let h = PI / q as f64;
    // kernels split as K1(t) log(4 sin^2(t/2)) + K2(t)
    let mut k1s = vec![0.0; m];
    let mut k2s = vec![Complex64::new(0.0, 0.0); m];
    let mut k1d = vec![0.0; m];
    let mut k2d = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m {
        let t = j as f64 * h;
        if j == 0 {
            k1s[0] = -1.0 / (2.0 * PI);
            k2s[0] = Complex64::new(-((0.5 * k).ln() + EULER_GAMMA) / PI, 0.5);
            k1d[0] = 0.0;
            k2d[0] = Complex64::new(-1.0 / (2.0 * PI), 0.0);
            continue;
        }
        let r = 2.0 * (0.5 * t).sin().abs();
        let log4 = (r * r).ln();
        let b = bessel01(k * r);
        let ks = Complex64::new(-0.5 * b.y0, 0.5 * b.j0);
        k1s[j] = -b.j0 / (2.0 * PI);
        k2s[j] = ks - k1s[j] * log4;
        // -(ik/4) r H_1(kr)
        let kd = Complex64::new(0.0, -0.25 * k * r) * Complex64::new(b.j1, b.y1);
        k1d[j] = k * r * b.j1 / (4.0 * PI);
        k2d[j] = kd - k1d[j] * log4;
    }
    let weights: Vec<f64> = (0..m)
        .map(|j| {
            let t = j as f64 * h;
            let s: f64 = (1..q).map(|mm| (mm as f64 * t).cos() / mm as f64).sum();
            -2.0 * PI / q as f64 * s - PI / (q * q) as f64 * (q as f64 * t).cos()
        })
        .collect();
    let mut modes = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut ls = Complex64::new(0.0, 0.0);
        let mut ld = Complex64::new(0.0, 0.0);
        for j in 0..m {
            let c = (n as f64 * j as f64 * h).cos();
            ls += (weights[j] * k1s[j] + h * k2s[j]) * c;
            ld += (weights[j] * k1d[j] + h * k2d[j]) * c;
        }
        let la = 1.0 + ld - Complex64::new(0.0, eta) * ls;
        modes.push((n, ls, ld, la));
    }
    let sup = |f: &dyn Fn(&(usize, Complex64, Complex64, Complex64)) -> f64| {
        modes.iter().map(f).fold(0.0, f64::max)
    };
    let norm_s = sup(&|m| m.1.norm());
    let norm_d = sup(&|m| m.2.norm());
    let norm_a = sup(&|m| m.3.norm());
    let inf_a = modes
        .iter()
        .map(|m| m.3.norm())
        .fold(f64::INFINITY, f64::min);
    let argmax = modes
        .iter()
        .max_by(|a, b| a.3.norm().total_cmp(&b.3.norm()))
        .map(|m| m.0)
        .unwrap_or(0);
    if inf_a == 0.0 {
        return Err(Error::Singular);
    }
    Ok(CircleReference {
        k,
        eta,
        modes,
        norm_s,
        norm_d,
        norm_a,
        norm_ainv: 1.0 / inf_a,
        truncated: argmax == n_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorKind;
    use proptest::prelude::*;

    fn mat(n: usize, f: impl Fn(usize, usize) -> Complex64) -> GalerkinMatrix {
        GalerkinMatrix::from_fn(OperatorKind::T, "test", n, f)
    }

    #[test]
    fn identity_and_diagonal() {
        let id = mat(5, |i, j| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        assert!((op_norm(&id).unwrap() - 1.0).abs() < 1e-14);
        assert!((inv_norm(&id).unwrap().value - 1.0).abs() < 1e-14);
        let d = mat(2, |i, j| match (i, j) {
            (0, 0) => Complex64::new(1.0, 0.0),
            (1, 1) => Complex64::new(0.0, 2.0),
            _ => Complex64::new(0.0, 0.0),
        });
        assert!((op_norm(&d).unwrap() - 2.0).abs() < 1e-14);
        assert!((inv_norm(&d).unwrap().value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_error_or_flagged() {
        let z = mat(3, |_, _| Complex64::new(1.0, 0.0));
        match inv_norm(&z) {
            Err(Error::Singular) => {}
            Ok(r) => assert!(r.near_singular),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn eoc_examples() {
        assert!((eoc_p(320.0, 3.076e-2, 640.0, 1.935e-2).unwrap() + 0.67).abs() < 0.005);
        assert_eq!(eoc_p(7.0, 3.0, 14.0, 3.0).unwrap(), 0.0);
        assert!((eoc_p(10.0, 2.0, 20.0, 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(eoc_p(1.0, 0.0, 2.0, 1.0).is_err());
        assert!(eoc_p(1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn iterative_agrees_with_dense() {
        let m = mat(60, |i, j| {
            let (x, y) = (i as f64, j as f64);
            Complex64::new(
                (0.3 * x * y).sin() / (1.0 + (x - y).abs()),
                (0.1 * (x + 2.0 * y)).cos() * 0.2,
            ) + if i == j {
                Complex64::new(2.0, 0.5)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let a = m.to_faer();
        let d = dense_extremes(&a).unwrap();
        let it = iterative_extremes(&a).unwrap();
        assert!((d.sigma_max - it.sigma_max).abs() < 1e-7 * d.sigma_max);
        assert!((d.sigma_min - it.sigma_min).abs() < 1e-7 * d.sigma_min);
    }

    #[test]
    fn circle_reference_laplace_like_modes() {
        // For small k the double-layer spectrum on the circle approaches
        // {0 for n != 0, -1 for n = 0}... the n=0 mode of D tends to -1.
        let r = circle_fourier_reference(1e-3, 1.0, 10, 64).unwrap();
        assert!((r.modes[0].2.re + 1.0).abs() < 1e-3);
        for m in &r.modes[1..] {
            assert!(m.2.norm() < 1e-3);
        }
        // single layer of the Laplace kernel on the unit circle: 1/|n|
        let gamma_free = r.modes[3].1;
        assert!((gamma_free.re - 1.0 / 3.0).abs() < 1e-3, "{gamma_free}");
    }

    #[test]
    fn circle_reference_invertible_without_coupling() {
        // eta = 0 off resonance: D + I is invertible away from interior eigenvalues
        let r = circle_fourier_reference(5.3, 0.0, 40, 128).unwrap();
        assert!(r.norm_ainv.is_finite() && r.norm_ainv > 0.0);
    }

    #[test]
    fn circle_reference_table_value() {
        let r = circle_fourier_reference(5.0, 5.0, 60, 256).unwrap();
        assert!(!r.truncated);
        assert!((r.norm_a - 2.663).abs() < 0.015 * 2.663, "{}", r.norm_a);
        assert!(
            (r.norm_ainv - 0.986).abs() < 0.015 * 0.986,
            "{}",
            r.norm_ainv
        );
    }

    proptest! {
        #[test]
        fn norm_homogeneity_and_transpose(
            re in -3.0f64..3.0, im in -3.0f64..3.0, seed in 0u64..1000
        ) {
            let s = seed as f64;
            let m = mat(8, |i, j| {
                let shift = if i == j { 3.0 } else { 0.0 };
                Complex64::new(((i * 8 + j) as f64 + s).sin() + shift, ((i + 3 * j) as f64 * 0.7 + s).cos())
            });
            let alpha = Complex64::new(re, im);
            let scaled = m.combine(alpha, &m, Complex64::new(0.0, 0.0), false, m.kind);
            let n = op_norm(&m).unwrap();
            let ns = op_norm(&scaled).unwrap();
            prop_assert!((ns - alpha.norm() * n).abs() < 1e-10 * (1.0 + ns));
            let t = m.transpose();
            prop_assert!((op_norm(&t).unwrap() - n).abs() < 1e-10 * n);
            let inv = inv_norm(&m).unwrap().value;
            prop_assert!((inv_norm(&t).unwrap().value - inv).abs() < 1e-8 * inv);
            prop_assert!(n * inv >= 1.0 - 1e-12);
        }
    }
}
