//! Scatterer catalogue, arc parameterisations and uniform meshing.
//!
//! Every boundary is a chain of arcs, each C-infinity on its closed
//! parameter interval, traversed so that the obstacle lies to the left. The
//! outward normal is therefore the right-hand normal `(y', -x') / |gamma'|`
//! and the signed curvature `(x'y'' - y'x'') / |gamma'|^3` is positive where
//! the obstacle is locally convex.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::quadrature::gl;
use crate::{Error, Result};

pub type Point = [f64; 2];

const LENGTH_PANELS: usize = 64;
const LENGTH_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Ellipse,
    Kite,
    Crack,
    Square,
    Rectangle,
    RectCavity,
    EllipticCavity,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 8] = [
        ShapeKind::Circle,
        ShapeKind::Ellipse,
        ShapeKind::Kite,
        ShapeKind::Crack,
        ShapeKind::Square,
        ShapeKind::Rectangle,
        ShapeKind::RectCavity,
        ShapeKind::EllipticCavity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Circle => "circle",
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::Kite => "kite",
            ShapeKind::Crack => "crack",
            ShapeKind::Square => "square",
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::RectCavity => "rect_cavity",
            ShapeKind::EllipticCavity => "elliptic_cavity",
        }
    }

    pub fn from_name(name: &str) -> Result<ShapeKind> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::InvalidShape(format!("unknown shape `{name}`")))
    }

    /// Default parameter set of the catalogue entry.
    pub fn default_params(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            ShapeKind::Circle => &[("r", 1.0)],
            ShapeKind::Ellipse => &[("a1", 2.0), ("a2", 0.5)],
            ShapeKind::Kite => &[],
            ShapeKind::Crack => &[("a", 1.0)],
            ShapeKind::Square => &[("side", 2.0)],
            ShapeKind::Rectangle => &[("width", 2.0), ("height", 0.02)],
            ShapeKind::RectCavity => &[("a", PI / 10.0), ("c", 1.0)],
            ShapeKind::EllipticCavity => &[
                ("a1", 1.0),
                ("a2", 0.5),
                ("b1", 1.3),
                ("b2", 0.6),
                ("phi0", 0.7 * PI),
            ],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub params: BTreeMap<String, f64>,
}

impl ShapeSpec {
    pub fn new(kind: ShapeKind) -> ShapeSpec {
        ShapeSpec {
            kind,
            params: kind.default_params(),
        }
    }

    /// Catalogue entry `name` with `overrides` applied on top of its defaults.
    pub fn with_overrides(kind: ShapeKind, overrides: &BTreeMap<String, f64>) -> Result<ShapeSpec> {
        let mut spec = ShapeSpec::new(kind);
        for (key, value) in overrides {
            if !spec.params.contains_key(key) {
                return Err(Error::InvalidShape(format!(
                    "shape `{kind}` has no parameter `{key}`"
                )));
            }
            spec.params.insert(key.clone(), *value);
        }
        Ok(spec)
    }

    pub fn param(&self, key: &str) -> Result<f64> {
        let v = *self.params.get(key).ok_or_else(|| {
            Error::InvalidShape(format!("shape `{}` is missing `{key}`", self.kind))
        })?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidShape(format!(
                "parameter `{key}` of `{}` must be positive, got {v}",
                self.kind
            )));
        }
        Ok(v)
    }

    pub fn is_closed(&self) -> bool {
        self.kind != ShapeKind::Crack
    }
}

/// Parameterised curve piece; the local parameter `tau` runs over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Curve {
    /// `(cx + a cos t, cy + b sin t)`, `t = t0 + tau (t1 - t0)`.
    Ellipse {
        center: Point,
        a: f64,
        b: f64,
        t0: f64,
        t1: f64,
    },
    /// `(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`.
    Kite {
        t0: f64,
        t1: f64,
    },
    Segment {
        p0: Point,
        p1: Point,
    },
}

impl Curve {
    /// Point, first and second derivative with respect to `tau`.
    pub fn eval(&self, tau: f64) -> (Point, Point, Point) {
        match *self {
            Curve::Ellipse {
                center,
                a,
                b,
                t0,
                t1,
            } => {
                let dt = t1 - t0;
                let (s, c) = (t0 + tau * dt).sin_cos();
                (
                    [center[0] + a * c, center[1] + b * s],
                    [-a * s * dt, b * c * dt],
                    [-a * c * dt * dt, -b * s * dt * dt],
                )
            }
            Curve::Kite { t0, t1 } => {
                let dt = t1 - t0;
                let t = t0 + tau * dt;
                let (s, c) = t.sin_cos();
                let (s2, c2) = (2.0 * t).sin_cos();
                (
                    [c + 0.65 * c2 - 0.65, 1.5 * s],
                    [(-s - 1.3 * s2) * dt, 1.5 * c * dt],
                    [(-c - 2.6 * c2) * dt * dt, -1.5 * s * dt * dt],
                )
            }
            Curve::Segment { p0, p1 } => {
                let d = [p1[0] - p0[0], p1[1] - p0[1]];
                ([p0[0] + tau * d[0], p0[1] + tau * d[1]], d, [0.0, 0.0])
            }
        }
    }

    pub fn point(&self, tau: f64) -> Point {
        self.eval(tau).0
    }

    pub fn speed(&self, tau: f64) -> f64 {
        let d = self.eval(tau).1;
        d[0].hypot(d[1])
    }

    /// Point, outward unit normal and speed `|d gamma / d tau|`.
    pub fn frame(&self, tau: f64) -> (Point, Point, f64) {
        let (p, d, _) = self.eval(tau);
        let sp = d[0].hypot(d[1]);
        (p, [d[1] / sp, -d[0] / sp], sp)
    }

    pub fn curvature(&self, tau: f64) -> f64 {
        let (_, d, dd) = self.eval(tau);
        let sp = d[0].hypot(d[1]);
        (d[0] * dd[1] - d[1] * dd[0]) / (sp * sp * sp)
    }

    pub fn is_straight(&self) -> bool {
        matches!(self, Curve::Segment { .. })
    }
}

/// One smooth arc with cached arc-length table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub curve: Curve,
    pub length: f64,
    /// `cumulative[p]`: arc length from `tau = 0` to `tau = p / LENGTH_PANELS`.
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl BoundaryArc {
    pub fn new(curve: Curve) -> BoundaryArc {
        let mut cumulative = Vec::with_capacity(LENGTH_PANELS + 1);
        cumulative.push(0.0);
        let h = 1.0 / LENGTH_PANELS as f64;
        let mut total = 0.0;
        for p in 0..LENGTH_PANELS {
            total += integrate_speed(&curve, p as f64 * h, (p + 1) as f64 * h);
            cumulative.push(total);
        }
        BoundaryArc {
            curve,
            length: total,
            cumulative,
        }
    }

    pub fn start(&self) -> Point {
        self.curve.point(0.0)
    }

    pub fn end(&self) -> Point {
        self.curve.point(1.0)
    }

    /// Arc length from `tau = 0` to `tau`.
    pub fn arc_length_at(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        let h = 1.0 / LENGTH_PANELS as f64;
        let p = ((tau / h) as usize).min(LENGTH_PANELS - 1);
        self.cumulative[p] + integrate_speed(&self.curve, p as f64 * h, tau)
    }

    /// Parameter `tau` at arc length `s` from the start of the arc.
    pub fn tau_at(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.length {
            return 1.0;
        }
        let h = 1.0 / LENGTH_PANELS as f64;
        let p = self
            .cumulative
            .partition_point(|&c| c <= s)
            .saturating_sub(1)
            .min(LENGTH_PANELS - 1);
        let lo = p as f64 * h;
        let hi = lo + h;
        let span = self.cumulative[p + 1] - self.cumulative[p];
        let mut tau = lo + h * (s - self.cumulative[p]) / span;
        for _ in 0..50 {
            let f = self.cumulative[p] + integrate_speed(&self.curve, lo, tau) - s;
            let step = f / self.curve.speed(tau);
            tau = (tau - step).clamp(lo, hi);
            if step.abs() < 1e-15 {
                break;
            }
        }
        tau
    }
}

fn integrate_speed(curve: &Curve, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = gl(LENGTH_ORDER);
    let w = b - a;
    rule.iter()
        .map(|(x, wt)| wt * curve.speed(a + w * x))
        .sum::<f64>()
        * w
}

fn ellipse_arc(center: Point, a: f64, b: f64, t0: f64, t1: f64) -> BoundaryArc {
    BoundaryArc::new(Curve::Ellipse {
        center,
        a,
        b,
        t0,
        t1,
    })
}

fn polygon(vertices: &[Point]) -> Vec<BoundaryArc> {
    (0..vertices.len())
        .map(|i| {
            BoundaryArc::new(Curve::Segment {
                p0: vertices[i],
                p1: vertices[(i + 1) % vertices.len()],
            })
        })
        .collect()
}

fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (vertices[i], vertices[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

/// Build the arcs of a catalogue shape. Closed shapes are traversed
/// counter-clockwise around the obstacle; polygons are split at every corner.
pub fn make_shape(spec: &ShapeSpec) -> Result<Vec<BoundaryArc>> {
    let arcs = match spec.kind {
        ShapeKind::Circle => {
            let r = spec.param("r")?;
            vec![ellipse_arc([0.0, 0.0], r, r, 0.0, 2.0 * PI)]
        }
        ShapeKind::Ellipse => {
            let (a1, a2) = (spec.param("a1")?, spec.param("a2")?);
            if a1 <= a2 {
                return Err(Error::InvalidShape(format!(
                    "ellipse needs a1 > a2, got a1={a1}, a2={a2}"
                )));
            }
            vec![ellipse_arc([0.0, 0.0], a1, a2, 0.0, 2.0 * PI)]
        }
        ShapeKind::Kite => vec![BoundaryArc::new(Curve::Kite {
            t0: 0.0,
            t1: 2.0 * PI,
        })],
        ShapeKind::Crack => {
            let a = spec.param("a")?;
            vec![BoundaryArc::new(Curve::Segment {
                p0: [0.0, 0.0],
                p1: [0.0, a],
            })]
        }
        ShapeKind::Square => {
            let h = 0.5 * spec.param("side")?;
            polygon(&[[-h, -h], [h, -h], [h, h], [-h, h]])
        }
        ShapeKind::Rectangle => {
            let w = 0.5 * spec.param("width")?;
            let h = 0.5 * spec.param("height")?;
            polygon(&[[-w, -h], [w, -h], [w, h], [-w, h]])
        }
        ShapeKind::RectCavity => {
            let a = spec.param("a")?;
            let c = spec.param("c")?;
            let l = c - a;
            if l <= 0.0 {
                return Err(Error::InvalidShape(format!(
                    "rect_cavity needs a < c, got a={a}, c={c}"
                )));
            }
            let mut v = vec![
                [0.0, 0.0],
                [-c, 0.0],
                [-c, -l],
                [l, -l],
                [l, 2.0 * c - l],
                [-c, 2.0 * c - l],
                [-c, 2.0 * a],
                [0.0, 2.0 * a],
            ];
            if signed_area(&v) < 0.0 {
                v.reverse();
            }
            polygon(&v)
        }
        ShapeKind::EllipticCavity => {
            let (a1, a2) = (spec.param("a1")?, spec.param("a2")?);
            let (b1, b2) = (spec.param("b1")?, spec.param("b2")?);
            let phi0 = spec.param("phi0")?;
            let c = phi0.cos() / b1 * a1;
            if !(b1 > a1 && b2 > a2) || c.abs() >= 1.0 || phi0 >= PI {
                return Err(Error::InvalidShape(
                    "elliptic_cavity needs b1 > a1, b2 > a2 and a valid opening angle".into(),
                ));
            }
            // outer endpoints share the abscissa a1 cos(phi0) of the inner ones
            let phi1 = (a1 * phi0.cos() / b1).acos();
            let x = a1 * phi0.cos();
            let outer_top = b2 * phi1.sin();
            let inner_top = a2 * phi0.sin();
            if outer_top <= inner_top {
                return Err(Error::InvalidShape("elliptic_cavity arcs intersect".into()));
            }
            vec![
                ellipse_arc([0.0, 0.0], b1, b2, -phi1, phi1),
                BoundaryArc::new(Curve::Segment {
                    p0: [x, outer_top],
                    p1: [x, inner_top],
                }),
                ellipse_arc([0.0, 0.0], a1, a2, phi0, -phi0),
                BoundaryArc::new(Curve::Segment {
                    p0: [x, -inner_top],
                    p1: [x, -outer_top],
                }),
            ]
        }
    };
    Ok(arcs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub arc: usize,
    /// Local parameter range on the parent arc.
    pub tau0: f64,
    pub tau1: f64,
    /// Arc-length positions of the endpoints on the parent arc.
    pub s0: f64,
    pub s1: f64,
    pub start: Point,
    pub end: Point,
    pub midpoint: Point,
    pub length: f64,
    pub normal: Point,
    pub curvature: f64,
}

/// A node of an element-local quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: Point,
    pub normal: Point,
    /// `ds / du` for the element-local parameter `u` in `[0, 1]`.
    pub jac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMesh {
    pub arcs: Vec<BoundaryArc>,
    pub elements: Vec<Element>,
    pub arc_ranges: Vec<Range<usize>>,
    pub closed: bool,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.elements.iter().map(|e| e.length).sum()
    }

    pub fn counts_per_arc(&self) -> Vec<usize> {
        self.arc_ranges.iter().map(|r| r.len()).collect()
    }

    /// Geometry at local parameter `u` of element `i`.
    #[inline]
    pub fn node(&self, i: usize, u: f64) -> Node {
        let e = &self.elements[i];
        let dtau = e.tau1 - e.tau0;
        let (x, normal, speed) = self.arcs[e.arc].curve.frame(e.tau0 + u * dtau);
        Node {
            x,
            normal,
            jac: speed * dtau.abs(),
        }
    }

    /// Index of the element following `i` along the boundary, if any.
    pub fn next(&self, i: usize) -> Option<usize> {
        if i + 1 < self.len() {
            Some(i + 1)
        } else if self.closed && self.len() > 2 {
            Some(0)
        } else {
            None
        }
    }

    /// `Some(true)` if the end of `i` is the start of `j`, `Some(false)` if
    /// the start of `i` is the end of `j`, `None` if they share no endpoint.
    pub fn shared_endpoint(&self, i: usize, j: usize) -> Option<bool> {
        if i == j {
            return None;
        }
        if self.next(i) == Some(j) {
            Some(true)
        } else if self.next(j) == Some(i) {
            Some(false)
        } else {
            None
        }
    }

    /// Whether `i` and `j` lie on the same straight arc.
    pub fn same_straight_arc(&self, i: usize, j: usize) -> bool {
        let (a, b) = (self.elements[i].arc, self.elements[j].arc);
        a == b && self.arcs[a].curve.is_straight()
    }
}

/// Number of elements on an arc of length `length`.
pub fn elements_for_arc(
    length: f64,
    k: f64,
    elems_per_wavelength: f64,
    min_per_arc: usize,
) -> usize {
    let raw = elems_per_wavelength * k * length / (2.0 * PI);
    // guard against 50.000000000001 rounding up to 51
    let n = (raw * (1.0 - 1e-12)).ceil().max(0.0) as usize;
    n.max(min_per_arc).max(1)
}

/// Uniform mesh: each arc is cut into `N_j` pieces of equal arc length.
pub fn mesh(
    arcs: &[BoundaryArc],
    k: f64,
    elems_per_wavelength: f64,
    min_per_arc: usize,
) -> Result<BoundaryMesh> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    let counts: Vec<usize> = arcs
        .iter()
        .map(|a| elements_for_arc(a.length, k, elems_per_wavelength, min_per_arc))
        .collect();
    mesh_with_counts(arcs, &counts)
}

/// Mesh with explicitly chosen element counts per arc.
pub fn mesh_with_counts(arcs: &[BoundaryArc], counts: &[usize]) -> Result<BoundaryMesh> {
    if arcs.is_empty() || counts.len() != arcs.len() || counts.contains(&0) {
        return Err(Error::InvalidArgument(
            "one positive element count per arc is required".into(),
        ));
    }
    let first = arcs[0].start();
    let last = arcs[arcs.len() - 1].end();
    let closed = (first[0] - last[0]).hypot(first[1] - last[1]) < 1e-12;
    let mut counts = counts.to_vec();
    if closed && arcs.len() == 1 {
        counts[0] = counts[0].max(3);
    }
    let mut elements = Vec::with_capacity(counts.iter().sum());
    let mut arc_ranges = Vec::with_capacity(arcs.len());
    for (a, (arc, &n)) in arcs.iter().zip(&counts).enumerate() {
        let begin = elements.len();
        let h = arc.length / n as f64;
        let mut taus = Vec::with_capacity(n + 1);
        taus.push(0.0);
        for i in 1..n {
            taus.push(arc.tau_at(i as f64 * h));
        }
        taus.push(1.0);
        for i in 0..n {
            let (t0, t1) = (taus[i], taus[i + 1]);
            let tm = arc.tau_at((i as f64 + 0.5) * h);
            let (mid, normal, _) = arc.curve.frame(tm);
            elements.push(Element {
                arc: a,
                tau0: t0,
                tau1: t1,
                s0: i as f64 * h,
                s1: (i + 1) as f64 * h,
                start: arc.curve.point(t0),
                end: arc.curve.point(t1),
                midpoint: mid,
                length: h,
                normal,
                curvature: arc.curve.curvature(tm),
            });
        }
        arc_ranges.push(begin..elements.len());
    }
    Ok(BoundaryMesh {
        arcs: arcs.to_vec(),
        elements,
        arc_ranges,
        closed,
    })
}

/// Starlike parameters `R_0, delta_-, delta_+, delta_*` about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarlikeParams {
    pub r0: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub delta_star: f64,
    pub dim: u32,
}

const STARLIKE_SAMPLES: usize = 4096;

/// Starlike parameters by dense sampling of each arc plus golden-section
/// refinement of interior extrema.
///
/// The rectangle is reported in a corner-at-origin convention:
/// `R_0 = sqrt(w^2 + h^2)`, `delta_- = min(w, h)`, `delta_+ = delta_* = max(w, h)`.
pub fn starlike_params(spec: &ShapeSpec) -> Result<StarlikeParams> {
    match spec.kind {
        ShapeKind::Circle | ShapeKind::Ellipse | ShapeKind::Kite | ShapeKind::Square => {}
        ShapeKind::Rectangle => {
            let (w, h) = (spec.param("width")?, spec.param("height")?);
            return Ok(StarlikeParams {
                r0: w.hypot(h),
                delta_minus: w.min(h),
                delta_plus: w.max(h),
                delta_star: w.max(h),
                dim: 2,
            });
        }
        _ => return Err(Error::NotStarlike(spec.kind.name().into())),
    }
    let arcs = make_shape(spec)?;
    let radius = |c: &Curve, t: f64| {
        let p = c.point(t);
        p[0].hypot(p[1])
    };
    let support = |c: &Curve, t: f64| {
        let (p, n, _) = c.frame(t);
        p[0] * n[0] + p[1] * n[1]
    };
    let tangential = |c: &Curve, t: f64| {
        let (p, n, _) = c.frame(t);
        let s = p[0] * n[0] + p[1] * n[1];
        (p[0] - s * n[0]).hypot(p[1] - s * n[1])
    };
    let mut r0 = 0.0f64;
    let mut dm = f64::INFINITY;
    let mut dp = f64::NEG_INFINITY;
    let mut ds = 0.0f64;
    for arc in &arcs {
        let c = &arc.curve;
        r0 = r0.max(extremum(|t| radius(c, t), true));
        dm = dm.min(extremum(|t| support(c, t), false));
        dp = dp.max(extremum(|t| support(c, t), true));
        ds = ds.max(extremum(|t| tangential(c, t), true));
    }
    if !(dm > 0.0) {
        return Err(Error::NotStarlike(spec.kind.name().into()));
    }
    Ok(StarlikeParams {
        r0,
        delta_minus: dm,
        delta_plus: dp,
        delta_star: ds,
        dim: 2,
    })
}

fn extremum(f: impl Fn(f64) -> f64, maximise: bool) -> f64 {
    let sign = if maximise { 1.0 } else { -1.0 };
    let g = |t: f64| sign * f(t);
    let m = STARLIKE_SAMPLES;
    let mut best_i = 0;
    let mut best = g(0.0);
    for i in 1..=m {
        let v = g(i as f64 / m as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if best_i > 0 && best_i < m {
        let invphi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (
            (best_i - 1) as f64 / m as f64,
            (best_i + 1) as f64 / m as f64,
        );
        let mut c = b - invphi * (b - a);
        let mut d = a + invphi * (b - a);
        let (mut gc, mut gd) = (g(c), g(d));
        for _ in 0..80 {
            if gc > gd {
                b = d;
                d = c;
                gd = gc;
                c = b - invphi * (b - a);
                gc = g(c);
            } else {
                a = c;
                c = d;
                gc = gd;
                d = a + invphi * (b - a);
                gd = g(d);
            }
        }
        best = best.max(gc).max(gd);
    }
    sign * best
}
