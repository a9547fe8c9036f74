//! Even Mathieu functions and the bouncing-ball eigenmodes `u_{m,0}` of an
//! ellipse with Dirichlet boundary.
//!
//! Elliptic coordinates are `x = a cosh(mu) cos(nu)`, `y = a sinh(mu) sin(nu)`
//! with focal distance `a = sqrt(a1^2 - a2^2)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quadrature::{gl, symmetric_tridiagonal_eigen};
use crate::{Error, Result};

/// Steps per unit `mu` per unit of local wavenumber in the radial solver.
const RADIAL_STEPS_PER_WAVE: f64 = 400.0;
const MIN_RADIAL_STEPS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseGeom {
    pub a1: f64,
    pub a2: f64,
}

impl EllipseGeom {
    pub fn new(a1: f64, a2: f64) -> Result<EllipseGeom> {
        if !(a1 > a2 && a2 > 0.0) || !a1.is_finite() {
            return Err(Error::InvalidShape(format!(
                "ellipse needs a1 > a2 > 0, got a1={a1}, a2={a2}"
            )));
        }
        Ok(EllipseGeom { a1, a2 })
    }

    /// Focal half-distance.
    pub fn a(&self) -> f64 {
        (self.a1 * self.a1 - self.a2 * self.a2).sqrt()
    }

    pub fn eccentricity(&self) -> f64 {
        self.a() / self.a1
    }

    /// Elliptic radius of the boundary.
    pub fn mu0(&self) -> f64 {
        (self.a2 / self.a1).atanh()
    }

    /// `(mu, nu)` of a Cartesian point, `mu >= 0`, `nu` in `[0, pi]`.
    pub fn to_elliptic(&self, x: f64, y: f64) -> (f64, f64) {
        let w = (Complex64::new(x, y) / self.a()).acosh();
        let (mu, nu) = if w.re < 0.0 {
            (-w.re, -w.im)
        } else {
            (w.re, w.im)
        };
        (mu, nu.abs())
    }
}

/// Even `pi`-periodic Mathieu function `ce_0(., q)` and its eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ce0Solution {
    pub q: f64,
    pub a0: f64,
    /// `A_{2r}`, `r = 0..R`, with `ce_0 = sum A_{2r} cos(2 r nu)`.
    pub fourier_coeffs: Vec<f64>,
    pub truncation: usize,
}

fn ce0_truncated(q: f64, n: usize) -> Result<(f64, Vec<f64>)> {
    let diag: Vec<f64> = (0..n).map(|r| (2.0 * r as f64).powi(2)).collect();
    let mut off = vec![q; n - 1];
    off[0] = std::f64::consts::SQRT_2 * q;
    let (vals, vecs) = symmetric_tridiagonal_eigen(&diag, &off)?;
    let mut coeffs = vecs[0].clone();
    coeffs[0] /= std::f64::consts::SQRT_2;
    // sign convention: ce_0(pi/2) > 0
    let mid: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(r, c)| if r % 2 == 0 { *c } else { -*c })
        .sum();
    if mid < 0.0 {
        coeffs.iter_mut().for_each(|c| *c = -*c);
    }
    Ok((vals[0], coeffs))
}

/// Lowest even periodic eigenpair of `N'' + (alpha - 2 q cos 2nu) N = 0`.
pub fn ce0_eigen(q: f64) -> Result<Ce0Solution> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Mathieu parameter must be >= 0, got {q}"
        )));
    }
    let mut n = 20 + (4.0 * q.sqrt()).ceil() as usize;
    loop {
        let (a0, coeffs) = ce0_truncated(q, n)?;
        let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if coeffs[n - 1].abs() < 1e-14 * max || n > 4000 {
            return Ok(Ce0Solution {
                q,
                a0,
                fourier_coeffs: coeffs,
                truncation: n,
            });
        }
        n *= 2;
    }
}

pub fn ce0_eval(nu: f64, sol: &Ce0Solution) -> f64 {
    sol.fourier_coeffs
        .iter()
        .enumerate()
        .map(|(r, c)| c * (2.0 * r as f64 * nu).cos())
        .sum()
}

/// Radial Mathieu ODE `M'' = (a0 - 2 q cosh 2mu) M` solved from `M(0) = 1`,
/// `M'(0) = 0` by classical RK4 on a uniform grid.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub mu_max: f64,
    pub h: f64,
    pub m: Vec<f64>,
    pub dm: Vec<f64>,
}

fn radial_steps(sol: &Ce0Solution, mu_max: f64) -> usize {
    let peak = (2.0 * sol.q * (2.0 * mu_max).cosh() - sol.a0)
        .max(1.0)
        .sqrt();
    ((RADIAL_STEPS_PER_WAVE * peak * mu_max).ceil() as usize).max(MIN_RADIAL_STEPS)
}

impl RadialSolution {
    pub fn solve(sol: &Ce0Solution, mu_max: f64) -> RadialSolution {
        let n = radial_steps(sol, mu_max);
        let h = mu_max / n as f64;
        let (a0, q) = (sol.a0, sol.q);
        let f = |mu: f64, y: [f64; 2]| [y[1], (a0 - 2.0 * q * (2.0 * mu).cosh()) * y[0]];
        let mut m = Vec::with_capacity(n + 1);
        let mut dm = Vec::with_capacity(n + 1);
        let mut y = [1.0, 0.0];
        m.push(y[0]);
        dm.push(y[1]);
        for i in 0..n {
            let mu = i as f64 * h;
            let k1 = f(mu, y);
            let k2 = f(
                mu + 0.5 * h,
                [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]],
            );
            let k3 = f(
                mu + 0.5 * h,
                [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]],
            );
            let k4 = f(mu + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for c in 0..2 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            m.push(y[0]);
            dm.push(y[1]);
        }
        RadialSolution { mu_max, h, m, dm }
    }

    pub fn end_value(&self) -> f64 {
        *self.m.last().unwrap()
    }

    /// Sign changes strictly inside `(0, mu_max)`; a root at the end point
    /// itself is not counted.
    pub fn zero_count(&self) -> usize {
        let inner = &self.m[..self.m.len() - 1];
        inner
            .windows(2)
            .filter(|w| w[0] * w[1] < 0.0 || w[1] == 0.0)
            .count()
    }

    /// Cubic Hermite interpolation of `M` at `mu` (evenness used for `mu < 0`).
    pub fn eval(&self, mu: f64) -> f64 {
        let mu = mu.abs().min(self.mu_max);
        let n = self.m.len() - 1;
        let i = ((mu / self.h) as usize).min(n - 1);
        let t = (mu - i as f64 * self.h) / self.h;
        let (p0, p1) = (self.m[i], self.m[i + 1]);
        let (d0, d1) = (self.dm[i] * self.h, self.dm[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * d1
    }

    /// `(int M^2, int M^2 sinh^2 mu)` over `[0, mu_max]`.
    fn moments(&self) -> (f64, f64) {
        let n = self.m.len() - 1;
        let rule = gl(8);
        let (mut i0, mut i2) = (0.0, 0.0);
        for i in 0..n {
            for (x, w) in rule.iter() {
                let mu = (i as f64 + x) * self.h;
                let v = self.eval(mu).powi(2) * w * self.h;
                i0 += v;
                i2 += v * mu.sinh().powi(2);
            }
        }
        (i0, i2)
    }
}

/// Even radial Mathieu function, normalised by `M(0) = 1`.
pub fn mc0_eval(mu: f64, sol: &Ce0Solution) -> f64 {
    let mu = mu.abs();
    if mu == 0.0 {
        return 1.0;
    }
    RadialSolution::solve(sol, mu).end_value()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeResult {
    pub m: usize,
    pub q_m: f64,
    pub k_m: f64,
    pub a0: f64,
    pub zero_count: usize,
    pub rho: Option<f64>,
    pub nu0: Option<f64>,
    #[serde(skip)]
    pub ce0: Option<Ce0Solution>,
}

fn radial_at(geom: &EllipseGeom, q: f64) -> Result<(Ce0Solution, RadialSolution)> {
    let ce = ce0_eigen(q)?;
    let rad = RadialSolution::solve(&ce, geom.mu0());
    Ok((ce, rad))
}

/// `q_m`: the parameter for which `Mc_0(mu_0, q) = 0` with `m` zeros of
/// `Mc_0` inside `(0, mu_0)`.
pub fn find_qm(geom: &EllipseGeom, m: usize) -> Result<ModeResult> {
    let mu0 = geom.mu0();
    let count = |q: f64| -> Result<usize> { Ok(radial_at(geom, q)?.1.zero_count()) };
    // seed: m half-wavelengths across the minor axis
    let k_seed = (m as f64 + 0.5) * PI / (2.0 * geom.a2);
    let q_seed = 0.25 * (k_seed * geom.a()).powi(2);

    let mut lo = 0.0;
    let mut hi = q_seed.max(1.0);
    let mut steps = 0;
    while count(hi)? <= m {
        lo = hi;
        hi *= 1.25;
        steps += 1;
        if steps > 200 {
            return Err(Error::Bracket(format!("no bracket for radial mode m={m}")));
        }
    }
    // narrow until the count moves from m to m + 1
    loop {
        let mid = 0.5 * (lo + hi);
        let c = count(mid)?;
        if c <= m {
            lo = mid;
        } else {
            hi = mid;
        }
        if count(lo)? == m && count(hi)? == m + 1 {
            break;
        }
        if hi - lo < 1e-14 * hi {
            return Err(Error::Bracket(format!(
                "radial zero count skips m={m} near q={hi}"
            )));
        }
    }
    let end = |q: f64| -> Result<f64> { Ok(radial_at(geom, q)?.1.end_value()) };
    let mut f_lo = end(lo)?;
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = end(mid)?;
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let q_m = 0.5 * (lo + hi);
    let (ce, rad) = radial_at(geom, q_m)?;
    let _ = mu0;
    Ok(ModeResult {
        m,
        q_m,
        k_m: 2.0 * q_m.sqrt() / geom.a(),
        a0: ce.a0,
        zero_count: rad.zero_count(),
        rho: None,
        nu0: None,
        ce0: Some(ce),
    })
}

/// Modes for several `m`, computed in parallel.
pub fn find_modes(geom: &EllipseGeom, ms: &[usize]) -> Result<Vec<ModeResult>> {
    ms.par_iter().map(|&m| find_qm(geom, m)).collect()
}

fn mode_ce0(mode: &ModeResult) -> Result<Ce0Solution> {
    match &mode.ce0 {
        Some(c) => Ok(c.clone()),
        None => ce0_eigen(mode.q_m),
    }
}

/// `(int_0^t ce0^2, int_0^t ce0^2 sin^2 nu)`.
fn angular_moments(ce: &Ce0Solution, t: f64) -> (f64, f64) {
    let panels = 64;
    let h = t / panels as f64;
    let rule = gl(16);
    let (mut j0, mut j2) = (0.0, 0.0);
    for p in 0..panels {
        for (x, w) in rule.iter() {
            let nu = (p as f64 + x) * h;
            let v = ce0_eval(nu, ce).powi(2) * w * h;
            j0 += v;
            j2 += v * nu.sin().powi(2);
        }
    }
    (j0, j2)
}

/// `rho_{nu0}(m, 0)`: `L^2` fraction of the mode in the two end caps
/// `|nu| < nu0`, `|pi - nu| < nu0` of the ellipse.
pub fn localization_rho(geom: &EllipseGeom, mode: &ModeResult, nu0: f64) -> Result<f64> {
    if !(nu0 > 0.0 && nu0 < FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!(
            "nu0 must lie in (0, pi/2), got {nu0}"
        )));
    }
    let ce = mode_ce0(mode)?;
    let rad = RadialSolution::solve(&ce, geom.mu0());
    let (i0, i2) = rad.moments();
    let (j0, j2) = angular_moments(&ce, nu0);
    let (t0, t2) = angular_moments(&ce, FRAC_PI_2);
    // area element a^2 (sinh^2 mu + sin^2 nu); a^2 cancels
    let num = i2 * j0 + i0 * j2;
    let den = i2 * t0 + i0 * t2;
    Ok((num / den).sqrt())
}

/// Right-hand side `sqrt(2) pi e exp(-eps k_m a1 phi0 sin(phi0) / 4)` with
/// `phi0 = pi/2 - nu0`.
pub fn rho_bound(geom: &EllipseGeom, k_m: f64, nu0: f64) -> f64 {
    let phi0 = FRAC_PI_2 - nu0;
    std::f64::consts::SQRT_2
        * PI
        * std::f64::consts::E
        * (-0.25 * geom.eccentricity() * k_m * geom.a1 * phi0 * phi0.sin()).exp()
}

/// Decay rate `eps a1 phi0 sin(phi0) / 4` appearing in [`rho_bound`].
pub fn rho_bound_rate(geom: &EllipseGeom, nu0: f64) -> f64 {
    let phi0 = FRAC_PI_2 - nu0;
    0.25 * geom.eccentricity() * geom.a1 * phi0 * phi0.sin()
}

/// Least-squares slope of `log rho` against `k_m`.
pub fn log_rho_slope(k: &[f64], rho: &[f64]) -> Result<f64> {
    if k.len() != rho.len() || k.len() < 2 || rho.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument(
            "slope fit needs >= 2 positive samples".into(),
        ));
    }
    let n = k.len() as f64;
    let y: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let kx = k.iter().sum::<f64>() / n;
    let ky = y.iter().sum::<f64>() / n;
    let sxy: f64 = k.iter().zip(&y).map(|(a, b)| (a - kx) * (b - ky)).sum();
    let sxx: f64 = k.iter().map(|a| (a - kx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Evaluator for `u_{m,0} = Mc_0(mu) ce_0(nu)` inside the ellipse.
pub struct ModeField {
    geom: EllipseGeom,
    ce: Ce0Solution,
    radial: RadialSolution,
}

impl ModeField {
    pub fn new(geom: &EllipseGeom, mode: &ModeResult) -> Result<ModeField> {
        let ce = mode_ce0(mode)?;
        let radial = RadialSolution::solve(&ce, geom.mu0());
        Ok(ModeField {
            geom: *geom,
            ce,
            radial,
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x / self.geom.a1).powi(2) + (y / self.geom.a2).powi(2) <= 1.0
    }

    /// `None` outside the closed ellipse.
    pub fn value(&self, x: f64, y: f64) -> Option<f64> {
        if !self.contains(x, y) {
            return None;
        }
        let (mu, nu) = self.geom.to_elliptic(x, y);
        Some(self.radial.eval(mu) * ce0_eval(nu, &self.ce))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Row-major `ny x nx`; `None` outside the ellipse.
    pub u: Vec<Option<f64>>,
}

impl FieldGrid {
    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.u[iy * self.x.len() + ix]
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// CSV with header `x1,x2,u`; masked points are written as `nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x1,x2,u")?;
        for (iy, y) in self.y.iter().enumerate() {
            for (ix, x) in self.x.iter().enumerate() {
                match self.get(ix, iy) {
                    Some(v) => writeln!(w, "{x:.9e},{y:.9e},{v:.9e}")?,
                    None => writeln!(w, "{x:.9e},{y:.9e},nan")?,
                }
            }
        }
        Ok(())
    }
}

/// Samples of `u_{m,0}` on the bounding box `[-a1, a1] x [-a2, a2]`.
pub fn mode_field(geom: &EllipseGeom, mode: &ModeResult, grid: GridSpec) -> Result<FieldGrid> {
    if grid.nx < 2 || grid.ny < 2 {
        return Err(Error::InvalidArgument(
            "field grid needs at least 2x2 points".into(),
        ));
    }
    let field = ModeField::new(geom, mode)?;
    let axis = |n: usize, half: f64| -> Vec<f64> {
        (0..n)
            .map(|i| half * (2.0 * i as f64 - (n - 1) as f64) / (n - 1) as f64)
            .collect()
    };
    let x = axis(grid.nx, geom.a1);
    let y = axis(grid.ny, geom.a2);
    let u = y
        .par_iter()
        .flat_map_iter(|&yy| x.iter().map(|&xx| field.value(xx, yy)).collect::<Vec<_>>())
        .collect();
    Ok(FieldGrid { x, y, u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cavity_inner() -> EllipseGeom {
        EllipseGeom::new(1.0, 0.5).unwrap()
    }

    /// Lowest periodic eigenvalue by shooting: `N'(pi/2) = 0` for the even
    /// solution with `N(0) = 1`, `N'(0) = 0`.
    fn shooting_a0(q: f64, lo: f64, hi: f64) -> f64 {
        let end_slope = |a: f64| {
            let n = 20000;
            let h = FRAC_PI_2 / n as f64;
            let f = |nu: f64, y: [f64; 2]| [y[1], -(a - 2.0 * q * (2.0 * nu).cos()) * y[0]];
            let mut y = [1.0, 0.0];
            for i in 0..n {
                let t = i as f64 * h;
                let k1 = f(t, y);
                let k2 = f(
                    t + h / 2.0,
                    [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]],
                );
                let k3 = f(
                    t + h / 2.0,
                    [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]],
                );
                let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
                for c in 0..2 {
                    y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
            }
            y[1]
        };
        let (mut lo, mut hi) = (lo, hi);
        let flo = end_slope(lo);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (end_slope(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn ce0_trivial_and_q1() {
        let s = ce0_eigen(0.0).unwrap();
        assert!(s.a0.abs() < 1e-14);
        assert!(s.fourier_coeffs[1..].iter().all(|c| c.abs() < 1e-14));
        let s = ce0_eigen(1.0).unwrap();
        assert!((s.a0 + 0.4551386).abs() < 1e-7);
        assert!((shooting_a0(1.0, -1.0, 0.5) - s.a0).abs() < 1e-9);
    }

    #[test]
    fn ce0_large_q_asymptotics() {
        for &q in &[1e2, 1e3, 1e4] {
            let a0 = ce0_eigen(q).unwrap().a0;
            let rem = a0 + 2.0 * q - 2.0 * q.sqrt();
            assert!((rem + 0.25).abs() < 0.1, "q={q} rem={rem}");
        }
        assert!((shooting_a0(100.0, -200.0, -150.0) - ce0_eigen(100.0).unwrap().a0).abs() < 1e-7);
    }

    #[test]
    fn ce0_ode_residual_symmetry_and_sign() {
        for &q in &[0.5, 40.0, 1600.0] {
            let s = ce0_eigen(q).unwrap();
            let tail = s.fourier_coeffs.last().unwrap().abs();
            let max = s.fourier_coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            assert!(tail < 1e-14 * max);
            let norm = (0..=200)
                .map(|i| ce0_eval(PI * i as f64 / 200.0, &s).abs())
                .fold(0.0f64, f64::max);
            for i in 1..50 {
                let nu = PI * i as f64 / 50.0;
                let v = ce0_eval(nu, &s);
                // far from pi/2 the large-q mode sits below rounding level
                assert!(v > -1e-12 * norm, "sign change at q={q}");
                let d2: f64 = s
                    .fourier_coeffs
                    .iter()
                    .enumerate()
                    .map(|(r, c)| -(2.0 * r as f64).powi(2) * c * (2.0 * r as f64 * nu).cos())
                    .sum();
                let res = d2 + (s.a0 - 2.0 * q * (2.0 * nu).cos()) * v;
                assert!(res.abs() < 1e-8 * norm * (1.0 + q), "q={q} res={res}");
                assert!((ce0_eval(PI - nu, &s) - v).abs() < 1e-13 * norm);
            }
        }
    }

    #[test]
    fn ce0_is_lowest_eigenvalue() {
        let s = ce0_eigen(25.0).unwrap();
        let diag: Vec<f64> = (0..s.truncation)
            .map(|r| (2.0 * r as f64).powi(2))
            .collect();
        let mut off = vec![25.0; s.truncation - 1];
        off[0] *= std::f64::consts::SQRT_2;
        let (vals, _) = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        assert!(vals.iter().all(|v| *v >= s.a0));
    }

    #[test]
    fn radial_residual_and_evenness() {
        let s = ce0_eigen(30.0).unwrap();
        let mu0 = cavity_inner().mu0();
        let rad = RadialSolution::solve(&s, mu0);
        assert_eq!(rad.m[0], 1.0);
        assert_eq!(rad.dm[0], 0.0);
        let scale = rad.m.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 1e-4;
        for i in 1..20 {
            let mu = mu0 * i as f64 / 20.0;
            let v = rad.eval(mu);
            let d2 = (rad.eval(mu + h) - 2.0 * v + rad.eval(mu - h)) / (h * h);
            let res = d2 - (s.a0 - 2.0 * 30.0 * (2.0 * mu).cosh()) * v;
            assert!(res.abs() < 1e-5 * scale * 60.0, "mu={mu} res={res}");
        }
        assert!((rad.eval(-0.2) - rad.eval(0.2)).abs() < 1e-15);
        assert!((mc0_eval(0.3, &s) - rad.eval(0.3)).abs() < 1e-9 * scale);
    }

    #[test]
    fn mode_wavenumbers() {
        let g = cavity_inner();
        let modes = find_modes(&g, &[1, 4, 9, 14]).unwrap();
        let want = [9.977, 28.807, 60.218, 91.633];
        for (md, k) in modes.iter().zip(want) {
            assert!((md.k_m - k).abs() < 0.01, "m={} k={}", md.m, md.k_m);
            assert_eq!(md.zero_count, md.m);
        }
        assert!(modes.windows(2).all(|w| w[0].q_m < w[1].q_m));
        let m0 = find_qm(&g, 0).unwrap();
        assert!(m0.q_m < modes[0].q_m);
        assert_eq!(m0.zero_count, 0);
        let rad = RadialSolution::solve(m0.ce0.as_ref().unwrap(), g.mu0());
        assert!(rad.end_value().abs() < 1e-8);
    }

    #[test]
    fn rho_limits_and_decay() {
        let g = cavity_inner();
        let modes = find_modes(&g, &[1, 4, 9, 14]).unwrap();
        let near = localization_rho(&g, &modes[0], FRAC_PI_2 - 1e-9).unwrap();
        assert!((near - 1.0).abs() < 1e-6);
        let rho: Vec<f64> = modes
            .iter()
            .map(|m| localization_rho(&g, m, PI / 4.0).unwrap())
            .collect();
        assert!(rho.windows(2).all(|w| w[1] < w[0]), "{rho:?}");
        let k: Vec<f64> = modes.iter().map(|m| m.k_m).collect();
        assert!(log_rho_slope(&k, &rho).unwrap() < 0.0);
        assert!(rho[3] <= rho_bound(&g, k[3], PI / 4.0));
    }

    #[test]
    fn rho_bound_value() {
        let g = cavity_inner();
        let b = rho_bound(&g, 91.633, PI / 4.0);
        assert!((b - 1.98e-4).abs() < 0.01e-4, "{b}");
    }

    #[test]
    fn rho_matches_brute_force() {
        // direct tensor quadrature in (mu, nu) with the full area weight
        let g = cavity_inner();
        let mode = find_qm(&g, 1).unwrap();
        let f = ModeField::new(&g, &mode).unwrap();
        let (mu0, a) = (g.mu0(), g.a());
        let rule = gl(32);
        let integrate = |t: f64| {
            let mut s = 0.0;
            for p in 0..16 {
                for q in 0..16 {
                    for (x, wx) in rule.iter() {
                        for (y, wy) in rule.iter() {
                            let mu = (p as f64 + x) * mu0 / 16.0;
                            let nu = (q as f64 + y) * t / 16.0;
                            let (xx, yy) = (a * mu.cosh() * nu.cos(), a * mu.sinh() * nu.sin());
                            let u = f.value(xx, yy).unwrap_or(0.0);
                            let jac = a * a * (mu.sinh().powi(2) + nu.sin().powi(2));
                            s += u * u * jac * wx * wy * (mu0 / 16.0) * (t / 16.0);
                        }
                    }
                }
            }
            s
        };
        let brute = (integrate(PI / 4.0) / integrate(FRAC_PI_2)).sqrt();
        let rho = localization_rho(&g, &mode, PI / 4.0).unwrap();
        assert!((rho - brute).abs() < 1e-6 * brute, "{rho} vs {brute}");
    }

    #[test]
    fn field_boundary_symmetry_and_peak() {
        let g = cavity_inner();
        let modes = find_modes(&g, &[1, 14]).unwrap();
        let f = ModeField::new(&g, &modes[1]).unwrap();
        let grid = mode_field(&g, &modes[1], GridSpec { nx: 201, ny: 101 }).unwrap();
        let umax = grid.max_abs();
        for i in 0..64 {
            let t = 2.0 * PI * i as f64 / 64.0;
            let v = f
                .value(
                    g.a1 * t.cos() * (1.0 - 1e-15),
                    g.a2 * t.sin() * (1.0 - 1e-15),
                )
                .unwrap();
            assert!(v.abs() < 1e-6 * umax, "t={t} v={v}");
        }
        for iy in 0..101 {
            for ix in 0..201 {
                if let Some(v) = grid.get(ix, iy) {
                    assert!((grid.get(200 - ix, iy).unwrap() - v).abs() < 1e-9 * umax);
                    assert!((grid.get(ix, 100 - iy).unwrap() - v).abs() < 1e-9 * umax);
                }
            }
        }
        let (mut best, mut at) = (0.0, 0.0);
        for iy in 0..101 {
            for ix in 0..201 {
                if let Some(v) = grid.get(ix, iy) {
                    if v.abs() > best {
                        best = v.abs();
                        at = grid.x[ix];
                    }
                }
            }
        }
        assert!(at.abs() < 0.2 * g.a1);
        assert!(grid.get(0, 0).is_none());
    }

    #[test]
    fn field_solves_helmholtz() {
        let g = cavity_inner();
        let mode = find_qm(&g, 1).unwrap();
        let (nx, ny) = (801, 401);
        let grid = mode_field(&g, &mode, GridSpec { nx, ny }).unwrap();
        let hx = grid.x[1] - grid.x[0];
        let hy = grid.y[1] - grid.y[0];
        let umax = grid.max_abs();
        let k2 = mode.k_m * mode.k_m;
        let mut worst = 0.0f64;
        for iy in 1..ny - 1 {
            for ix in 1..nx - 1 {
                let nb = [
                    grid.get(ix, iy),
                    grid.get(ix - 1, iy),
                    grid.get(ix + 1, iy),
                    grid.get(ix, iy - 1),
                    grid.get(ix, iy + 1),
                ];
                if let [Some(c), Some(w), Some(e), Some(s), Some(n)] = nb {
                    let lap = (w - 2.0 * c + e) / (hx * hx) + (s - 2.0 * c + n) / (hy * hy);
                    worst = worst.max((lap + k2 * c).abs());
                }
            }
        }
        assert!(worst < 1e-3 * k2 * umax, "residual {worst}");
    }

    #[test]
    fn csv_header_and_mask() {
        let g = cavity_inner();
        let mode = find_qm(&g, 1).unwrap();
        let grid = mode_field(&g, &mode, GridSpec { nx: 5, ny: 3 }).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,u");
        assert_eq!(lines.len(), 16);
        assert!(lines[1].ends_with("nan"));
    }

    proptest! {
        #[test]
        fn ce0_even_symmetry(q in 0.0f64..500.0, nu in 0.0f64..PI) {
            let s = ce0_eigen(q).unwrap();
            let v = ce0_eval(nu, &s);
            prop_assert!((ce0_eval(PI - nu, &s) - v).abs() < 1e-12);
            prop_assert!((ce0_eval(-nu, &s) - v).abs() < 1e-12);
        }

        #[test]
        fn elliptic_coordinates_round_trip(x in -0.99f64..0.99, y in -0.49f64..0.49) {
            let g = EllipseGeom::new(1.0, 0.5).unwrap();
            let (mu, nu) = g.to_elliptic(x, y);
            let a = g.a();
            prop_assert!((a * mu.cosh() * nu.cos() - x).abs() < 1e-9);
            prop_assert!((a * mu.sinh() * nu.sin() - y.abs()).abs() < 1e-9);
        }
    }
}
