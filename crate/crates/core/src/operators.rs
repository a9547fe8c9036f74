//! Kernels and Galerkin assembly for the layer potentials on piecewise
//! constant, `L^2`-orthonormal bases.
//!
//! Entry `(i, j)` of an operator with kernel `K` is
//! `(|G_i| |G_j|)^{-1/2} int_{G_i} int_{G_j} K(x, y) ds(y) ds(x)`.
//!
//! Element pairs fall into three classes:
//!
//! * coincident: the square is rewritten in the difference variable
//!   `d = u - v`, the logarithm of the single-layer kernel is split off
//!   and integrated with the `-log d` Gauss rule;
//! * sharing an endpoint: Duffy transform from the shared point, again with
//!   the logarithm split off; the longer element is bisected towards the
//!   shared point until the two pieces have comparable length;
//! * everything else: tensor Gauss–Legendre, with recursive bisection of the
//!   longer piece while the pair is close relative to its size.

use std::f64::consts::{FRAC_1_PI, PI};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryMesh, Node, Point};
use crate::quadrature::{gl, log_gauss, MAX_LOG_ORDER};
use crate::specfun::{bessel01, hankel01, SpecFunError};
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum OperatorKind {
    S {
        k: f64,
    },
    D {
        k: f64,
    },
    Dprime {
        k: f64,
    },
    A {
        k: f64,
        eta: f64,
    },
    Aprime {
        k: f64,
        eta: f64,
    },
    /// Laplace single layer with kernel `(1/pi) log(R_0 / |x - y|)`.
    S0 {
        r0: f64,
    },
    D0,
    /// Rank-one operator with kernel 1.
    T,
    /// `I + D_0 + 2 i c_0 T`.
    A0 {
        c0: f64,
    },
}

impl OperatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorKind::S { .. } => "S",
            OperatorKind::D { .. } => "D",
            OperatorKind::Dprime { .. } => "Dprime",
            OperatorKind::A { .. } => "A",
            OperatorKind::Aprime { .. } => "Aprime",
            OperatorKind::S0 { .. } => "S0",
            OperatorKind::D0 => "D0",
            OperatorKind::T => "T",
            OperatorKind::A0 { .. } => "A0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Minimum Gauss order per element for well-separated pairs.
    pub base_order: usize,
    /// Multiplier on the regular order `max(base_order, ceil(3 + k h))`.
    pub order_scale: usize,
    /// Order of the log-weighted and Gauss rules on singular pairs.
    pub singular_order: usize,
    /// Maximum bisection depth for nearly touching pairs.
    pub near_levels: usize,
    /// A pair is near when its separation is below `near_factor` times the
    /// longer piece.
    pub near_factor: f64,
    /// Intended absolute accuracy of each entry.
    pub target: f64,
    /// Fill the lower triangle from the upper one (S symmetric, D' = D^T).
    pub symmetric_fill: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            base_order: 4,
            order_scale: 1,
            singular_order: 12,
            near_levels: 10,
            near_factor: 1.0,
            target: 1e-6,
            symmetric_fill: true,
        }
    }
}

impl QuadratureConfig {
    /// Every quadrature order doubled.
    pub fn doubled(&self) -> QuadratureConfig {
        QuadratureConfig {
            order_scale: 2 * self.order_scale,
            singular_order: (2 * self.singular_order).min(MAX_LOG_ORDER),
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.base_order < 2 || self.singular_order < 2 || self.order_scale < 1 {
            return Err(Error::InvalidArgument(
                "quadrature orders must be >= 2".into(),
            ));
        }
        if !(self.target > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature target must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Dense complex Galerkin matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinMatrix {
    pub kind: OperatorKind,
    pub mesh_label: String,
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl GalerkinMatrix {
    pub fn from_fn(
        kind: OperatorKind,
        mesh_label: impl Into<String>,
        n: usize,
        f: impl Fn(usize, usize) -> Complex64,
    ) -> GalerkinMatrix {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        GalerkinMatrix {
            kind,
            mesh_label: mesh_label.into(),
            n,
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn transpose(&self) -> GalerkinMatrix {
        GalerkinMatrix::from_fn(self.kind, self.mesh_label.clone(), self.n, |i, j| {
            self.get(j, i)
        })
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &GalerkinMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `alpha * self + beta * other (+ identity if requested)`.
    pub fn combine(
        &self,
        alpha: Complex64,
        other: &GalerkinMatrix,
        beta: Complex64,
        add_identity: bool,
        kind: OperatorKind,
    ) -> GalerkinMatrix {
        let mut data: Vec<Complex64> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        if add_identity {
            for i in 0..self.n {
                data[i * self.n + i] += 1.0;
            }
        }
        GalerkinMatrix {
            kind,
            mesh_label: self.mesh_label.clone(),
            n: self.n,
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn to_faer(&self) -> faer::Mat<Complex64> {
        faer::Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Matrix Market array format, complex general, column-major.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix array complex general")?;
        writeln!(w, "% kind={} mesh={}", self.kind.label(), self.mesh_label)?;
        writeln!(w, "{} {}", self.n, self.n)?;
        for j in 0..self.n {
            for i in 0..self.n {
                let z = self.get(i, j);
                writeln!(w, "{:.17e} {:.17e}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

fn dist(x: Point, y: Point) -> f64 {
    (x[0] - y[0]).hypot(x[1] - y[1])
}

/// Single-layer kernel `2 Phi(x, y) = (i/2) H_0^(1)(k |x - y|)`.
pub fn kernel_s(x: Point, y: Point, k: f64) -> Result<Complex64> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(SpecFunError::Domain(0.0).into());
    }
    let (h0, _) = hankel01(k * r);
    Ok(0.5 * I * h0)
}

/// Decomposition `kernel_s = a(r) log r + rem(r)` with `a`, `rem` analytic
/// in `r^2`; returns `(a, rem)`.
pub fn kernel_s_split(r: f64, k: f64) -> (f64, Complex64) {
    let b = bessel01(k * r);
    helmholtz_split(&b, k)
}

fn helmholtz_split(b: &crate::specfun::Bessel01, k: f64) -> (f64, Complex64) {
    let a = -FRAC_1_PI * b.j0;
    let rem = Complex64::new(
        -FRAC_1_PI * (0.5 * k).ln() * b.j0 - 0.5 * b.y0_smooth,
        0.5 * b.j0,
    );
    (a, rem)
}

/// Double-layer kernel `2 dPhi(x, y)/dnu(y)`; at `x = y` the limit
/// `-curvature_y / (2 pi)` is returned.
pub fn kernel_d(x: Point, y: Point, normal_y: Point, curvature_y: f64, k: f64) -> Complex64 {
    let r = dist(x, y);
    if r == 0.0 {
        return Complex64::new(-curvature_y / (2.0 * PI), 0.0);
    }
    let (_, h1) = hankel01(k * r);
    let proj = (x[0] - y[0]) * normal_y[0] + (x[1] - y[1]) * normal_y[1];
    Complex64::new(0.0, 0.5 * k) * h1 * (proj / r)
}

/// Adjoint double-layer kernel: [`kernel_d`] with the roles of `x`, `y`
/// exchanged.
pub fn kernel_dprime(x: Point, y: Point, normal_x: Point, curvature_x: f64, k: f64) -> Complex64 {
    kernel_d(y, x, normal_x, curvature_x, k)
}

/// Laplace single-layer kernel `(1/pi) log(R_0 / |x - y|)`.
pub fn kernel_s0(x: Point, y: Point, r0: f64) -> Result<Complex64> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(SpecFunError::Domain(0.0).into());
    }
    Ok(Complex64::new(FRAC_1_PI * (r0 / r).ln(), 0.0))
}

/// Laplace double-layer kernel `(1/pi) (x - y).nu(y) / |x - y|^2`.
pub fn kernel_d0(x: Point, y: Point, normal_y: Point, curvature_y: f64) -> Complex64 {
    let r = dist(x, y);
    if r == 0.0 {
        return Complex64::new(-curvature_y / (2.0 * PI), 0.0);
    }
    let proj = (x[0] - y[0]) * normal_y[0] + (x[1] - y[1]) * normal_y[1];
    Complex64::new(FRAC_1_PI * proj / (r * r), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Helmholtz(f64),
    Laplace(f64),
}

/// Kernel values at one node pair, sharing a single Bessel evaluation.
#[derive(Clone, Copy)]
struct KVals {
    r: f64,
    s: Complex64,
    /// log coefficient and remainder of `s`
    a: f64,
    rem: Complex64,
    d: Complex64,
    dp: Complex64,
}

#[derive(Clone, Copy)]
struct Piece {
    elem: usize,
    u0: f64,
    u1: f64,
}

impl Piece {
    fn full(elem: usize) -> Piece {
        Piece {
            elem,
            u0: 0.0,
            u1: 1.0,
        }
    }

    fn split(self) -> (Piece, Piece) {
        let m = 0.5 * (self.u0 + self.u1);
        (Piece { u1: m, ..self }, Piece { u0: m, ..self })
    }
}

type Triple = [Complex64; 3];

fn add(t: &mut Triple, w: f64, v: [Complex64; 3]) {
    t[0] += w * v[0];
    t[1] += w * v[1];
    t[2] += w * v[2];
}

struct Engine<'a> {
    mesh: &'a BoundaryMesh,
    family: Family,
    quad: QuadratureConfig,
    /// Per element: regular-order nodes with weights (including jacobian).
    cache: Vec<Vec<(Node, f64)>>,
}

impl<'a> Engine<'a> {
    fn new(mesh: &'a BoundaryMesh, family: Family, quad: QuadratureConfig) -> Engine<'a> {
        let mut engine = Engine {
            mesh,
            family,
            quad,
            cache: Vec::new(),
        };
        engine.cache = (0..mesh.len())
            .map(|e| {
                let n = engine.regular_order(mesh.elements[e].length);
                let rule = gl(n);
                rule.iter()
                    .map(|(u, w)| {
                        let nd = mesh.node(e, u);
                        (nd, w * nd.jac)
                    })
                    .collect()
            })
            .collect();
        engine
    }

    fn k(&self) -> f64 {
        match self.family {
            Family::Helmholtz(k) => k,
            Family::Laplace(_) => 0.0,
        }
    }

    fn regular_order(&self, h: f64) -> usize {
        let n = (3.0 + self.k() * h).ceil() as usize;
        self.quad.base_order.max(n) * self.quad.order_scale
    }

    fn piece_len(&self, p: Piece) -> f64 {
        self.mesh.elements[p.elem].length * (p.u1 - p.u0).abs()
    }

    /// Node at local coordinate `s` in `[0, 1]` of a piece; `jac` is `ds/ds`.
    #[inline]
    fn at(&self, p: Piece, s: f64) -> Node {
        let mut nd = self.mesh.node(p.elem, p.u0 + s * (p.u1 - p.u0));
        nd.jac *= (p.u1 - p.u0).abs();
        nd
    }

    #[inline]
    fn kernels(&self, x: &Node, y: &Node) -> KVals {
        let dx = x.x[0] - y.x[0];
        let dy = x.x[1] - y.x[1];
        let r = dx.hypot(dy);
        let proj_y = dx * y.normal[0] + dy * y.normal[1];
        let proj_x = -(dx * x.normal[0] + dy * x.normal[1]);
        match self.family {
            Family::Helmholtz(k) => {
                let b = bessel01(k * r);
                let (a, rem) = helmholtz_split(&b, k);
                let c = Complex64::new(-0.5 * k * b.y1, 0.5 * k * b.j1) / r;
                KVals {
                    r,
                    s: Complex64::new(-0.5 * b.y0, 0.5 * b.j0),
                    a,
                    rem,
                    d: c * proj_y,
                    dp: c * proj_x,
                }
            }
            Family::Laplace(r0) => {
                let c = FRAC_1_PI / (r * r);
                KVals {
                    r,
                    s: Complex64::new(FRAC_1_PI * (r0 / r).ln(), 0.0),
                    a: -FRAC_1_PI,
                    rem: Complex64::new(FRAC_1_PI * r0.ln(), 0.0),
                    d: Complex64::new(c * proj_y, 0.0),
                    dp: Complex64::new(c * proj_x, 0.0),
                }
            }
        }
    }

    /// Unnormalised integrals `(S, D, D')` over `G_i x G_j`.
    fn pair(&self, i: usize, j: usize) -> Triple {
        let mut t = if i == j {
            self.coincident(i)
        } else if let Some(end_of_i) = self.mesh.shared_endpoint(i, j) {
            let (pi, pj) = if end_of_i {
                (
                    Piece {
                        elem: i,
                        u0: 1.0,
                        u1: 0.0,
                    },
                    Piece::full(j),
                )
            } else {
                (
                    Piece::full(i),
                    Piece {
                        elem: j,
                        u0: 1.0,
                        u1: 0.0,
                    },
                )
            };
            self.adjacent(pi, pj)
        } else {
            self.separated(Piece::full(i), Piece::full(j), 0)
        };
        if self.mesh.same_straight_arc(i, j) {
            t[1] = ZERO;
            t[2] = ZERO;
        }
        t
    }

    fn coincident(&self, e: usize) -> Triple {
        let n = self.quad.singular_order;
        let g = gl(n);
        let lg = log_gauss(n);
        let p = Piece::full(e);
        let mut out = [ZERO; 3];
        // log part of S: int_0^1 (-log d) P(d), P(d) = -2 int_0^{1-d} a jx jy dv
        for (d, wd) in lg.iter() {
            let mut acc = 0.0;
            for (t, wt) in g.iter() {
                let v = (1.0 - d) * t;
                let (x, y) = (self.at(p, v + d), self.at(p, v));
                let kv = self.kernels(&x, &y);
                acc += wt * (1.0 - d) * (-2.0 * kv.a * x.jac * y.jac);
            }
            out[0] += wd * acc;
        }
        let straight = self.mesh.arcs[self.mesh.elements[e].arc]
            .curve
            .is_straight();
        for (d, wd) in g.iter() {
            for (t, wt) in g.iter() {
                let v = (1.0 - d) * t;
                let (x, y) = (self.at(p, v + d), self.at(p, v));
                let kv = self.kernels(&x, &y);
                let w = wd * wt * (1.0 - d) * x.jac * y.jac;
                out[0] += w * 2.0 * (kv.a * (kv.r / d).ln() + kv.rem);
                if !straight {
                    // both triangles: K_D(x,y) + K_D(y,x) = K_D + K_D'
                    let both = kv.d + kv.dp;
                    out[1] += w * both;
                    out[2] += w * both;
                }
            }
        }
        out
    }

    /// Pieces parameterised from a shared point `P` (local coordinate 0 of
    /// both).
    fn adjacent(&self, pi: Piece, pj: Piece) -> Triple {
        let (li, lj) = (self.piece_len(pi), self.piece_len(pj));
        if li > 2.0 * lj {
            let (near, far) = pi.split();
            let mut t = self.adjacent(near, pj);
            let f = self.separated(far, pj, 0);
            add(&mut t, 1.0, f);
            return t;
        }
        if lj > 2.0 * li {
            let (near, far) = pj.split();
            let mut t = self.adjacent(pi, near);
            let f = self.separated(pi, far, 0);
            add(&mut t, 1.0, f);
            return t;
        }
        let n = self.quad.singular_order;
        let g = gl(n);
        let lg = log_gauss(n);
        let mut out = [ZERO; 3];
        // triangle 1 (t = s w) and triangle 2 (s = t w); `rho` is the outer variable
        for tri in 0..2 {
            let nodes = |rho: f64, w: f64| {
                if tri == 0 {
                    (self.at(pi, rho), self.at(pj, rho * w))
                } else {
                    (self.at(pi, rho * w), self.at(pj, rho))
                }
            };
            for (rho, wr) in lg.iter() {
                let mut acc = 0.0;
                for (w, ww) in g.iter() {
                    let (x, y) = nodes(rho, w);
                    let kv = self.kernels(&x, &y);
                    acc += ww * (-rho * kv.a * x.jac * y.jac);
                }
                out[0] += wr * acc;
            }
            for (rho, wr) in g.iter() {
                for (w, ww) in g.iter() {
                    let (x, y) = nodes(rho, w);
                    let kv = self.kernels(&x, &y);
                    let wt = wr * ww * rho * x.jac * y.jac;
                    out[0] += wt * (kv.a * (kv.r / rho).ln() + kv.rem);
                    out[1] += wt * kv.d;
                    out[2] += wt * kv.dp;
                }
            }
        }
        out
    }

    fn separated(&self, pi: Piece, pj: Piece, depth: usize) -> Triple {
        let (li, lj) = (self.piece_len(pi), self.piece_len(pj));
        if depth < self.quad.near_levels {
            let gap = dist(self.at(pi, 0.5).x, self.at(pj, 0.5).x) - 0.55 * (li + lj);
            if gap < self.quad.near_factor * li.max(lj) {
                let mut out = [ZERO; 3];
                if li >= lj {
                    let (a, b) = pi.split();
                    add(&mut out, 1.0, self.separated(a, pj, depth + 1));
                    add(&mut out, 1.0, self.separated(b, pj, depth + 1));
                } else {
                    let (a, b) = pj.split();
                    add(&mut out, 1.0, self.separated(pi, a, depth + 1));
                    add(&mut out, 1.0, self.separated(pi, b, depth + 1));
                }
                return out;
            }
        }
        let is_full = |p: Piece| p.u0 == 0.0 && p.u1 == 1.0;
        let xs = if is_full(pi) {
            std::borrow::Cow::Borrowed(&self.cache[pi.elem])
        } else {
            std::borrow::Cow::Owned(self.piece_nodes(pi, li))
        };
        let ys = if is_full(pj) {
            std::borrow::Cow::Borrowed(&self.cache[pj.elem])
        } else {
            std::borrow::Cow::Owned(self.piece_nodes(pj, lj))
        };
        let mut out = [ZERO; 3];
        for (x, wx) in xs.iter() {
            for (y, wy) in ys.iter() {
                let kv = self.kernels(x, y);
                add(&mut out, wx * wy, [kv.s, kv.d, kv.dp]);
            }
        }
        out
    }

    fn piece_nodes(&self, p: Piece, len: f64) -> Vec<(Node, f64)> {
        gl(self.regular_order(len))
            .iter()
            .map(|(s, w)| {
                let nd = self.at(p, s);
                (nd, w * nd.jac)
            })
            .collect()
    }
}

/// Galerkin matrices of the single layer, double layer and adjoint double
/// layer of one kernel family, normalised by the basis scaling.
struct Layers {
    s: Vec<Complex64>,
    d: Vec<Complex64>,
    dp: Vec<Complex64>,
}

fn assemble_layers(mesh: &BoundaryMesh, family: Family, quad: &QuadratureConfig) -> Layers {
    let n = mesh.len();
    let engine = Engine::new(mesh, family, *quad);
    let h: Vec<f64> = mesh.elements.iter().map(|e| e.length).collect();
    let rows: Vec<Vec<Triple>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = if quad.symmetric_fill { i } else { 0 };
            (start..n).map(|j| engine.pair(i, j)).collect()
        })
        .collect();
    let mut s = vec![ZERO; n * n];
    let mut d = vec![ZERO; n * n];
    let mut dp = vec![ZERO; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        let start = if quad.symmetric_fill { i } else { 0 };
        for (off, t) in row.into_iter().enumerate() {
            let j = start + off;
            let scale = 1.0 / (h[i] * h[j]).sqrt();
            s[i * n + j] = t[0] * scale;
            d[i * n + j] = t[1] * scale;
            dp[i * n + j] = t[2] * scale;
            if quad.symmetric_fill && j != i {
                s[j * n + i] = t[0] * scale;
                d[j * n + i] = t[2] * scale;
                dp[j * n + i] = t[1] * scale;
            }
        }
    }
    Layers { s, d, dp }
}

/// Helmholtz single- and double-layer Galerkin matrices from one assembly
/// pass; combined-field matrices for any `eta` are then cheap.
#[derive(Debug, Clone)]
pub struct HelmholtzLayers {
    pub k: f64,
    pub s: GalerkinMatrix,
    pub d: GalerkinMatrix,
    pub dprime: GalerkinMatrix,
}

impl HelmholtzLayers {
    pub fn assemble(
        mesh: &BoundaryMesh,
        k: f64,
        quad: &QuadratureConfig,
    ) -> Result<HelmholtzLayers> {
        quad.validate()?;
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        if !mesh.closed {
            return Err(Error::Unsupported {
                kind: "D".into(),
                shape: "an open arc".into(),
            });
        }
        let layers = assemble_layers(mesh, Family::Helmholtz(k), quad);
        let label = mesh_label(mesh);
        let n = mesh.len();
        let wrap = |kind, data| GalerkinMatrix {
            kind,
            mesh_label: label.clone(),
            n,
            data,
        };
        Ok(HelmholtzLayers {
            k,
            s: wrap(OperatorKind::S { k }, layers.s),
            d: wrap(OperatorKind::D { k }, layers.d),
            dprime: wrap(OperatorKind::Dprime { k }, layers.dp),
        })
    }

    /// `I + D - i eta S`.
    pub fn a(&self, eta: f64) -> GalerkinMatrix {
        self.d.combine(
            Complex64::new(1.0, 0.0),
            &self.s,
            Complex64::new(0.0, -eta),
            true,
            OperatorKind::A { k: self.k, eta },
        )
    }

    /// `I + D' - i eta S`.
    pub fn a_prime(&self, eta: f64) -> GalerkinMatrix {
        self.dprime.combine(
            Complex64::new(1.0, 0.0),
            &self.s,
            Complex64::new(0.0, -eta),
            true,
            OperatorKind::Aprime { k: self.k, eta },
        )
    }
}

pub fn mesh_label(mesh: &BoundaryMesh) -> String {
    let counts: Vec<String> = mesh
        .counts_per_arc()
        .iter()
        .map(|c| c.to_string())
        .collect();
    format!("N={} arcs=[{}]", mesh.len(), counts.join(","))
}

/// Galerkin matrix of one operator.
pub fn assemble(
    kind: OperatorKind,
    mesh: &BoundaryMesh,
    quad: &QuadratureConfig,
) -> Result<GalerkinMatrix> {
    quad.validate()?;
    let n = mesh.len();
    let label = mesh_label(mesh);
    let needs_closed = !matches!(kind, OperatorKind::S { .. } | OperatorKind::S0 { .. });
    if needs_closed && !mesh.closed {
        return Err(Error::Unsupported {
            kind: kind.label().into(),
            shape: "an open arc".into(),
        });
    }
    let check_k = |k: f64| {
        if k > 0.0 && k.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "wavenumber must be positive, got {k}"
            )))
        }
    };
    let wrap = |data| GalerkinMatrix {
        kind,
        mesh_label: label.clone(),
        n,
        data,
    };
    let one = Complex64::new(1.0, 0.0);
    Ok(match kind {
        OperatorKind::S { k } => {
            check_k(k)?;
            wrap(assemble_layers(mesh, Family::Helmholtz(k), quad).s)
        }
        OperatorKind::D { k } => {
            check_k(k)?;
            wrap(assemble_layers(mesh, Family::Helmholtz(k), quad).d)
        }
        OperatorKind::Dprime { k } => {
            check_k(k)?;
            wrap(assemble_layers(mesh, Family::Helmholtz(k), quad).dp)
        }
        OperatorKind::A { k, eta } => {
            check_k(k)?;
            HelmholtzLayers::assemble(mesh, k, quad)?.a(eta)
        }
        OperatorKind::Aprime { k, eta } => {
            check_k(k)?;
            HelmholtzLayers::assemble(mesh, k, quad)?.a_prime(eta)
        }
        OperatorKind::S0 { r0 } => {
            if !(r0 > 0.0) {
                return Err(Error::InvalidArgument("S0 needs R_0 > 0".into()));
            }
            wrap(assemble_layers(mesh, Family::Laplace(r0), quad).s)
        }
        OperatorKind::D0 => wrap(assemble_layers(mesh, Family::Laplace(1.0), quad).d),
        OperatorKind::T => t_matrix(mesh),
        OperatorKind::A0 { c0 } => {
            let d0 = wrap(assemble_layers(mesh, Family::Laplace(1.0), quad).d);
            d0.combine(
                one,
                &t_matrix(mesh),
                Complex64::new(0.0, 2.0 * c0),
                true,
                kind,
            )
        }
    })
}

fn t_matrix(mesh: &BoundaryMesh) -> GalerkinMatrix {
    let root: Vec<f64> = mesh.elements.iter().map(|e| e.length.sqrt()).collect();
    GalerkinMatrix::from_fn(OperatorKind::T, mesh_label(mesh), mesh.len(), |i, j| {
        Complex64::new(root[i] * root[j], 0.0)
    })
}

/// `||A_{k, eta(k)} - A_0||_2` for each `k`, with `A_0 = I + D_0 + 2 i c_0 T`.
pub fn assemble_laplace_limit(
    mesh: &BoundaryMesh,
    eta: impl Fn(f64) -> f64,
    c0: f64,
    k_sequence: &[f64],
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let a0 = assemble(OperatorKind::A0 { c0 }, mesh, quad)?;
    k_sequence
        .iter()
        .map(|&k| {
            let a = HelmholtzLayers::assemble(mesh, k, quad)?.a(eta(k));
            let diff = a.combine(
                Complex64::new(1.0, 0.0),
                &a0,
                Complex64::new(-1.0, 0.0),
                false,
                a.kind,
            );
            crate::spectral::op_norm(&diff)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_shape, mesh, mesh_with_counts, ShapeKind, ShapeSpec};

    fn shape_mesh(kind: ShapeKind, k: f64, eppw: f64, min: usize) -> BoundaryMesh {
        mesh(&make_shape(&ShapeSpec::new(kind)).unwrap(), k, eppw, min).unwrap()
    }

    #[test]
    fn kernel_s_value_and_symmetry() {
        let (x, y) = ([0.3, -0.2], [1.3, -0.2]);
        let v = kernel_s(x, y, 1.0).unwrap();
        let b = bessel01(1.0);
        assert!((v - 0.5 * I * Complex64::new(b.j0, b.y0)).norm() < 1e-15);
        let w = kernel_s(y, x, 1.0).unwrap();
        assert_eq!(v, w);
        assert!(kernel_s(x, x, 1.0).is_err());
    }

    #[test]
    fn kernel_s_split_reassembles() {
        for &(r, k) in &[(1e-6, 3.0), (0.1, 2.0), (0.7, 9.0), (2.0, 15.0)] {
            let (a, rem) = kernel_s_split(r, k);
            let direct = kernel_s([0.0, 0.0], [r, 0.0], k).unwrap();
            assert!((a * r.ln() + rem - direct).norm() < 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn kernel_s_tends_to_laplace_kernel() {
        // (i/2)H_0(kr) + (1/pi) log(k/2) - i/2 + gamma/pi -> (1/pi) log(1/r)
        let (x, y) = ([0.0, 0.0], [0.4, 0.3]);
        let k = 1e-7;
        let gamma = crate::specfun::EULER_GAMMA;
        let v = kernel_s(x, y, k).unwrap() + FRAC_1_PI * ((0.5 * k).ln() + gamma) - 0.5 * I;
        let lap = kernel_s0(x, y, 1.0).unwrap();
        assert!((v - lap).norm() < 1e-10);
    }

    #[test]
    fn kernel_d_line_and_limit() {
        // points on the x-axis with normal along y: zero
        let v = kernel_d([2.0, 0.0], [0.5, 0.0], [0.0, 1.0], 0.0, 3.0);
        assert_eq!(v, ZERO);
        // coincident limit on the unit circle
        assert!(
            (kernel_d([1.0, 0.0], [1.0, 0.0], [1.0, 0.0], 1.0, 5.0).re + 0.5 / PI).abs() < 1e-15
        );
        // near-coincident value on the unit circle approaches the limit
        let th: f64 = 1e-4;
        let v = kernel_d([th.cos(), th.sin()], [1.0, 0.0], [1.0, 0.0], 1.0, 5.0);
        assert!((v.re + 0.5 / PI).abs() < 1e-6, "{v}");
        // D' swaps the roles
        let (x, y, nx) = ([0.1, 0.2], [0.9, -0.4], [0.6, 0.8]);
        assert_eq!(
            kernel_dprime(x, y, nx, 0.0, 2.0),
            kernel_d(y, x, nx, 0.0, 2.0)
        );
    }

    #[test]
    fn kernel_d_small_k_is_laplace() {
        let (x, y, n) = ([0.1, 0.2], [0.9, -0.4], [0.6, 0.8]);
        let h = kernel_d(x, y, n, 0.0, 1e-8);
        let l = kernel_d0(x, y, n, 0.0);
        assert!((h - l).norm() < 1e-10);
    }

    #[test]
    fn t_matrix_is_rank_one_outer_product() {
        let m = shape_mesh(ShapeKind::Circle, 5.0, 10.0, 1);
        let t = assemble(OperatorKind::T, &m, &QuadratureConfig::default()).unwrap();
        let h = m.elements[0].length;
        assert!((t.get(3, 7).re - h).abs() < 1e-15);
    }

    #[test]
    fn a_matrix_linearity() {
        let m = shape_mesh(ShapeKind::Kite, 3.0, 10.0, 1);
        let q = QuadratureConfig::default();
        let layers = HelmholtzLayers::assemble(&m, 3.0, &q).unwrap();
        let eta = 1.7;
        let a = layers.a(eta);
        for i in 0..m.len() {
            for j in 0..m.len() {
                let id = if i == j { 1.0 } else { 0.0 };
                let e = id + layers.d.get(i, j) - I * eta * layers.s.get(i, j);
                assert!((a.get(i, j) - e).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_kernel_a_is_identity() {
        let m = shape_mesh(ShapeKind::Circle, 1.0, 10.0, 8);
        let q = QuadratureConfig::default();
        let mut layers = HelmholtzLayers::assemble(&m, 1.0, &q).unwrap();
        layers.s.data.iter_mut().for_each(|z| *z = ZERO);
        layers.d.data.iter_mut().for_each(|z| *z = ZERO);
        let a = layers.a(2.0);
        let norm = crate::spectral::op_norm(&a).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetry_and_transpose_with_independent_fill() {
        let q = QuadratureConfig {
            symmetric_fill: false,
            ..Default::default()
        };
        for kind in [
            ShapeKind::Kite,
            ShapeKind::Square,
            ShapeKind::EllipticCavity,
        ] {
            let m = shape_mesh(kind, 4.0, 10.0, 3);
            let l = HelmholtzLayers::assemble(&m, 4.0, &q).unwrap();
            let st = l.s.transpose();
            assert!(l.s.max_abs_diff(&st) < 10.0 * q.target, "{kind} S");
            assert!(
                l.dprime.max_abs_diff(&l.d.transpose()) < 10.0 * q.target,
                "{kind} D'"
            );
        }
    }

    #[test]
    fn polygon_same_side_double_layer_vanishes() {
        let m = shape_mesh(ShapeKind::Square, 5.0, 10.0, 4);
        let d = assemble(OperatorKind::D { k: 5.0 }, &m, &QuadratureConfig::default()).unwrap();
        for r in &m.arc_ranges {
            for i in r.clone() {
                for j in r.clone() {
                    assert_eq!(d.get(i, j), ZERO);
                }
            }
        }
    }

    #[test]
    fn quadrature_doubling_is_stable() {
        let q = QuadratureConfig::default();
        for kind in [ShapeKind::Circle, ShapeKind::Kite, ShapeKind::RectCavity] {
            let m = shape_mesh(kind, 5.0, 10.0, 2);
            let a = HelmholtzLayers::assemble(&m, 5.0, &q).unwrap();
            let b = HelmholtzLayers::assemble(&m, 5.0, &q.doubled()).unwrap();
            assert!(
                a.s.max_abs_diff(&b.s) < q.target,
                "{kind} S {}",
                a.s.max_abs_diff(&b.s)
            );
            assert!(
                a.d.max_abs_diff(&b.d) < q.target,
                "{kind} D {}",
                a.d.max_abs_diff(&b.d)
            );
        }
    }

    #[test]
    fn single_element_log_integral_on_segment() {
        // int_0^1 int_0^1 -(1/pi) log|u - v| du dv = 3 / (2 pi) for S0 with R_0 = 1
        let arcs = make_shape(&ShapeSpec::new(ShapeKind::Crack)).unwrap();
        let m = mesh_with_counts(&arcs, &[1]).unwrap();
        let s0 = assemble(
            OperatorKind::S0 { r0: 1.0 },
            &m,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!(
            (s0.get(0, 0).re - 1.5 / PI).abs() < 1e-13,
            "{}",
            s0.get(0, 0)
        );
        // two halves: the adjacent pair
        let m = mesh_with_counts(&arcs, &[2]).unwrap();
        let s0 = assemble(
            OperatorKind::S0 { r0: 1.0 },
            &m,
            &QuadratureConfig::default(),
        )
        .unwrap();
        // int_0^{1/2} int_{1/2}^1 -(1/pi) log|u - v| dv du = (3 - 2 log 2) / (8 pi)
        let exact = (3.0 - 2.0 * 2f64.ln()) / (8.0 * PI) / 0.5;
        assert!(
            (s0.get(0, 1).re - exact).abs() < 1e-13,
            "{} vs {exact}",
            s0.get(0, 1)
        );
    }

    #[test]
    fn crack_rejects_double_layer() {
        let m = shape_mesh(ShapeKind::Crack, 5.0, 10.0, 1);
        let q = QuadratureConfig::default();
        assert!(assemble(OperatorKind::D { k: 5.0 }, &m, &q).is_err());
        assert!(assemble(OperatorKind::S { k: 5.0 }, &m, &q).is_ok());
    }

    #[test]
    fn matrix_market_layout() {
        let m = GalerkinMatrix::from_fn(OperatorKind::T, "t", 2, |i, j| {
            Complex64::new((i * 2 + j) as f64, -1.0)
        });
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix array complex general");
        assert_eq!(lines[2], "2 2");
        // column-major: (0,0), (1,0), (0,1), (1,1)
        assert!(lines[4].starts_with("2.0"));
        assert!(lines[5].starts_with("1.0"));
    }
}
