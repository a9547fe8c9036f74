//! Table runners: norm sweeps over `k`, low-frequency studies, mesh
//! convergence and ellipse modes, with CSV / JSON / Markdown writers.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    bound_b, crack_s_bounds, curvature_s_lower, eta, line_a_lower, EtaStrategy, RateAnnotation,
};
use crate::ellipse_modes::{
    find_qm, localization_rho, mode_field, rho_bound, EllipseGeom, GridSpec, ModeResult,
};
use crate::geometry::{make_shape, mesh, starlike_params, BoundaryArc, ShapeKind, ShapeSpec};
use crate::operators::{assemble, HelmholtzLayers, OperatorKind, QuadratureConfig};
use crate::spectral::{eoc_p, op_norm, singular_extremes, NormReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Md,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<OutputFormat> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "md" => Ok(OutputFormat::Md),
            _ => Err(Error::InvalidArgument(format!(
                "unknown output format `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    S,
    D,
    A,
    Ainv,
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Quantity> {
        match s {
            "s" | "S" => Ok(Quantity::S),
            "d" | "D" => Ok(Quantity::D),
            "a" | "A" => Ok(Quantity::A),
            "ainv" | "Ainv" => Ok(Quantity::Ainv),
            _ => Err(Error::InvalidArgument(format!("unknown quantity `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub shape: ShapeSpec,
    pub ks: Vec<f64>,
    pub eta: String,
    pub eppw: f64,
    pub min_per_arc: usize,
    pub quantities: Vec<Quantity>,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub quadrature: QuadratureConfig,
}

impl ExperimentSpec {
    pub fn new(shape: ShapeSpec, ks: Vec<f64>, eta: &str) -> ExperimentSpec {
        ExperimentSpec {
            shape,
            ks,
            eta: eta.into(),
            eppw: 10.0,
            min_per_arc: 1,
            quantities: vec![Quantity::S, Quantity::D, Quantity::A, Quantity::Ainv],
            format: OutputFormat::Csv,
            out: None,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_k_list(&self.ks)?;
        if !(self.eppw > 0.0) || !self.eppw.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "elements per wavelength must be positive, got {}",
                self.eppw
            )));
        }
        if self.min_per_arc == 0 {
            return Err(Error::InvalidArgument(
                "min elements per arc must be >= 1".into(),
            ));
        }
        if self.quantities.is_empty() {
            return Err(Error::InvalidArgument("no quantities requested".into()));
        }
        EtaStrategy::from_name(&self.eta, 1.0)?;
        Ok(())
    }
}

fn check_k_list(ks: &[f64]) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::InvalidArgument("empty wavenumber list".into()));
    }
    if ks.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "wavenumbers must be positive: {ks:?}"
        )));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "wavenumbers must be strictly increasing: {ks:?}"
        )));
    }
    Ok(())
}

/// `R_0` used by the `k`-dependent coupling rules: the starlike radius when
/// defined, otherwise the largest distance of the boundary from the origin.
pub fn shape_r0(spec: &ShapeSpec, arcs: &[BoundaryArc]) -> f64 {
    if let Ok(p) = starlike_params(spec) {
        return p.r0;
    }
    let mut r0 = 0.0f64;
    for arc in arcs {
        for i in 0..=1024 {
            let s = arc.length * i as f64 / 1024.0;
            let p = arc.curve.point(arc.tau_at(s));
            r0 = r0.max(p[0].hypot(p[1]));
        }
    }
    r0
}

fn longest_straight(arcs: &[BoundaryArc]) -> Option<f64> {
    arcs.iter()
        .filter(|a| a.curve.is_straight())
        .map(|a| a.length)
        .fold(None, |m, l| Some(m.map_or(l, |m: f64| m.max(l))))
}

/// Largest radius of curvature on a smooth convex boundary.
fn max_radius_of_curvature(spec: &ShapeSpec) -> Option<f64> {
    match spec.kind {
        ShapeKind::Circle => spec.param("r").ok(),
        ShapeKind::Ellipse => {
            let (a1, a2) = (spec.param("a1").ok()?, spec.param("a2").ok()?);
            Some(a1.max(a2).powi(2) / a1.min(a2))
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    #[serde(flatten)]
    pub report: NormReport,
    pub p_s: Option<f64>,
    pub p_d: Option<f64>,
    pub p_a: Option<f64>,
    pub p_ainv: Option<f64>,
    /// Explicit upper bound on `||A^{-1}||` for starlike shapes.
    pub bound_b: Option<f64>,
    pub bound_s_lower: Option<f64>,
    pub bound_s_upper: Option<f64>,
    pub bound_a_lower: Option<f64>,
    pub error: Option<String>,
}

impl NormRow {
    pub fn flagged(&self) -> bool {
        self.error.is_some() || self.report.near_singular
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormTable {
    pub spec: ExperimentSpec,
    pub r0: f64,
    pub rates: Vec<RateAnnotation>,
    pub rows: Vec<NormRow>,
}

impl NormTable {
    pub fn flagged(&self) -> bool {
        self.rows.iter().any(NormRow::flagged)
    }
}

fn norm_row(spec: &ExperimentSpec, arcs: &[BoundaryArc], strategy: EtaStrategy, k: f64) -> NormRow {
    let eta_value = eta(strategy, k);
    let mut report = NormReport {
        shape: spec.shape.kind.name().into(),
        k,
        eta_strategy: strategy.name().into(),
        eta: eta_value,
        n: 0,
        norm_s: None,
        norm_d: None,
        norm_a: None,
        norm_ainv: None,
        cond: None,
        near_singular: false,
    };
    let mut row = NormRow {
        report: report.clone(),
        p_s: None,
        p_d: None,
        p_a: None,
        p_ainv: None,
        bound_b: None,
        bound_s_lower: None,
        bound_s_upper: None,
        bound_a_lower: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let m = mesh(arcs, k, spec.eppw, spec.min_per_arc)?;
        report.n = m.len();
        let wants = |q| spec.quantities.contains(&q);
        if m.closed {
            let layers = HelmholtzLayers::assemble(&m, k, &spec.quadrature)?;
            if wants(Quantity::S) {
                report.norm_s = Some(op_norm(&layers.s)?);
            }
            if wants(Quantity::D) {
                report.norm_d = Some(op_norm(&layers.d)?);
            }
            if wants(Quantity::A) || wants(Quantity::Ainv) {
                let ext = singular_extremes(&layers.a(eta_value))?;
                if wants(Quantity::A) {
                    report.norm_a = Some(ext.sigma_max);
                }
                if wants(Quantity::Ainv) {
                    if ext.sigma_min == 0.0 {
                        return Err(Error::Singular);
                    }
                    report.norm_ainv = Some(1.0 / ext.sigma_min);
                    report.near_singular = ext.near_singular();
                }
                if wants(Quantity::A) && wants(Quantity::Ainv) {
                    report.cond = Some(ext.cond());
                }
            }
        } else {
            let s = assemble(OperatorKind::S { k }, &m, &spec.quadrature)?;
            report.norm_s = Some(op_norm(&s)?);
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row.report = report;

    if let Ok(p) = starlike_params(&spec.shape) {
        row.bound_b = bound_b(&p, k, eta_value, 2).ok().map(|b| b.value);
    }
    if spec.shape.kind == ShapeKind::Crack {
        if let Ok(a) = spec.shape.param("a") {
            let c = crack_s_bounds(a, k);
            row.bound_s_lower = Some(c.lower);
            row.bound_s_upper = Some(c.upper);
        }
    } else if let Some(a) = longest_straight(arcs) {
        row.bound_s_lower = Some(crack_s_bounds(a, k).lower);
        row.bound_a_lower = Some(line_a_lower(a, k, eta_value));
    } else if let Some(r) = max_radius_of_curvature(&spec.shape) {
        row.bound_s_lower = Some(curvature_s_lower(r, k));
    }
    row
}

fn fill_rates(rows: &mut [NormRow]) {
    for i in 1..rows.len() {
        let (prev, cur) = rows.split_at_mut(i);
        let (p, c) = (&prev[i - 1], &mut cur[0]);
        let rate = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => eoc_p(p.report.k, a, c.report.k, b).ok(),
            _ => None,
        };
        c.p_s = rate(p.report.norm_s, c.report.norm_s);
        c.p_d = rate(p.report.norm_d, c.report.norm_d);
        c.p_a = rate(p.report.norm_a, c.report.norm_a);
        c.p_ainv = rate(p.report.norm_ainv, c.report.norm_ainv);
    }
}

/// One row per `k`; failures are recorded in the row, not propagated.
pub fn run_norms(spec: &ExperimentSpec) -> Result<NormTable> {
    spec.validate()?;
    let arcs = make_shape(&spec.shape)?;
    let r0 = shape_r0(&spec.shape, &arcs);
    let strategy = EtaStrategy::from_name(&spec.eta, r0)?;
    let mut rows: Vec<NormRow> = spec
        .ks
        .par_iter()
        .map(|&k| norm_row(spec, &arcs, strategy, k))
        .collect();
    fill_rates(&mut rows);
    Ok(NormTable {
        spec: spec.clone(),
        r0,
        rates: crate::bounds::rate_annotations(spec.shape.kind),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowkSpec {
    pub shape: ShapeSpec,
    pub ks: Vec<f64>,
    pub eppw: f64,
    pub min_per_arc: usize,
    /// `eta_star_2d` or `eta_star_log`.
    pub star_rule: String,
    pub quadrature: QuadratureConfig,
}

impl LowkSpec {
    pub fn new(shape: ShapeSpec, ks: Vec<f64>, min_per_arc: usize) -> LowkSpec {
        LowkSpec {
            shape,
            ks,
            eppw: 10.0,
            min_per_arc,
            star_rule: "eta_star_2d".into(),
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowkRow {
    pub k: f64,
    pub n: usize,
    pub eta_k: f64,
    pub norm_a_k: Option<f64>,
    pub norm_ainv_k: Option<f64>,
    pub p_ainv_k: Option<f64>,
    pub near_singular_k: bool,
    pub eta_star: f64,
    pub norm_a_star: Option<f64>,
    pub norm_ainv_star: Option<f64>,
    pub p_ainv_star: Option<f64>,
    pub near_singular_star: bool,
    pub error: Option<String>,
}

impl LowkRow {
    pub fn flagged(&self) -> bool {
        self.error.is_some() || self.near_singular_k || self.near_singular_star
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowkTable {
    pub spec: LowkSpec,
    pub r0: f64,
    pub rows: Vec<LowkRow>,
}

/// `A_{k,k}` against `A_{k,eta*}` on a fixed mesh for small `k`.
pub fn run_lowk(spec: &LowkSpec) -> Result<LowkTable> {
    check_k_list(&spec.ks)?;
    if !spec.shape.is_closed() {
        return Err(Error::Unsupported {
            kind: "A".into(),
            shape: spec.shape.kind.name().into(),
        });
    }
    if !matches!(spec.star_rule.as_str(), "eta_star_2d" | "eta_star_log") {
        return Err(Error::InvalidArgument(format!(
            "low-frequency rule must be eta_star_2d or eta_star_log, got `{}`",
            spec.star_rule
        )));
    }
    let arcs = make_shape(&spec.shape)?;
    let r0 = shape_r0(&spec.shape, &arcs);
    let star = EtaStrategy::from_name(&spec.star_rule, r0)?;
    let mut rows: Vec<LowkRow> = spec
        .ks
        .par_iter()
        .map(|&k| {
            let mut row = LowkRow {
                k,
                n: 0,
                eta_k: k,
                norm_a_k: None,
                norm_ainv_k: None,
                p_ainv_k: None,
                near_singular_k: false,
                eta_star: eta(star, k),
                norm_a_star: None,
                norm_ainv_star: None,
                p_ainv_star: None,
                near_singular_star: false,
                error: None,
            };
            let r = (|| -> Result<()> {
                let m = mesh(&arcs, k, spec.eppw, spec.min_per_arc)?;
                row.n = m.len();
                let layers = HelmholtzLayers::assemble(&m, k, &spec.quadrature)?;
                let a = singular_extremes(&layers.a(row.eta_k))?;
                row.norm_a_k = Some(a.sigma_max);
                row.norm_ainv_k = (a.sigma_min > 0.0).then(|| 1.0 / a.sigma_min);
                row.near_singular_k = a.near_singular();
                let b = singular_extremes(&layers.a(row.eta_star))?;
                row.norm_a_star = Some(b.sigma_max);
                row.norm_ainv_star = (b.sigma_min > 0.0).then(|| 1.0 / b.sigma_min);
                row.near_singular_star = b.near_singular();
                Ok(())
            })();
            if let Err(e) = r {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect();
    for i in 1..rows.len() {
        let (prev, cur) = rows.split_at_mut(i);
        let (p, c) = (&prev[i - 1], &mut cur[0]);
        if let (Some(a), Some(b)) = (p.norm_ainv_k, c.norm_ainv_k) {
            c.p_ainv_k = eoc_p(p.k, a, c.k, b).ok();
        }
        if let (Some(a), Some(b)) = (p.norm_ainv_star, c.norm_ainv_star) {
            c.p_ainv_star = eoc_p(p.k, a, c.k, b).ok();
        }
    }
    Ok(LowkTable {
        spec: spec.clone(),
        r0,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eppw: f64,
    pub n: usize,
    pub norm_s: Option<f64>,
    pub norm_d: Option<f64>,
    pub norm_a: Option<f64>,
    pub norm_ainv: Option<f64>,
    /// Relative deviations from the finest mesh.
    pub rel_diff_s: Option<f64>,
    pub rel_diff_d: Option<f64>,
    pub rel_diff_a: Option<f64>,
    pub rel_diff_ainv: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub shape: ShapeSpec,
    pub k: f64,
    pub eta_strategy: String,
    pub rows: Vec<ConvergenceRow>,
}

/// The same `k` on meshes of increasing density.
pub fn run_convergence(
    shape: &ShapeSpec,
    k: f64,
    eta_name: &str,
    eppws: &[f64],
    quad: &QuadratureConfig,
) -> Result<ConvergenceTable> {
    if eppws.is_empty() || eppws.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "bad mesh densities {eppws:?}"
        )));
    }
    let mut spec = ExperimentSpec::new(shape.clone(), vec![k], eta_name);
    spec.quadrature = *quad;
    spec.validate()?;
    let arcs = make_shape(shape)?;
    let strategy = EtaStrategy::from_name(eta_name, shape_r0(shape, &arcs))?;
    let mut rows: Vec<ConvergenceRow> = eppws
        .iter()
        .map(|&e| {
            let mut s = spec.clone();
            s.eppw = e;
            let r = norm_row(&s, &arcs, strategy, k);
            ConvergenceRow {
                eppw: e,
                n: r.report.n,
                norm_s: r.report.norm_s,
                norm_d: r.report.norm_d,
                norm_a: r.report.norm_a,
                norm_ainv: r.report.norm_ainv,
                rel_diff_s: None,
                rel_diff_d: None,
                rel_diff_a: None,
                rel_diff_ainv: None,
                error: r.error,
            }
        })
        .collect();
    let finest = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.eppw.total_cmp(&b.1.eppw))
        .map(|(i, _)| i)
        .unwrap();
    let reference = rows[finest].clone();
    let rel = |a: Option<f64>, b: Option<f64>| Some((a? - b?).abs() / b?);
    for row in rows.iter_mut() {
        row.rel_diff_s = rel(row.norm_s, reference.norm_s);
        row.rel_diff_d = rel(row.norm_d, reference.norm_d);
        row.rel_diff_a = rel(row.norm_a, reference.norm_a);
        row.rel_diff_ainv = rel(row.norm_ainv, reference.norm_ainv);
    }
    Ok(ConvergenceTable {
        shape: shape.clone(),
        k,
        eta_strategy: eta_name.into(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub m: usize,
    pub q_m: Option<f64>,
    pub k_m: Option<f64>,
    pub a0: Option<f64>,
    pub zero_count: Option<usize>,
    pub nu0: f64,
    pub rho: Option<f64>,
    pub rho_bound: Option<f64>,
    pub field_file: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeTable {
    pub geom: EllipseGeom,
    pub rows: Vec<ModeRow>,
}

/// Bouncing-ball modes; with `field_dir` set, each mode's field is written
/// as `mode_m<m>.csv` there.
pub fn run_modes(
    geom: &EllipseGeom,
    ms: &[usize],
    nu0: f64,
    field: Option<(PathBuf, GridSpec)>,
) -> Result<ModeTable> {
    if let Some((dir, _)) = &field {
        std::fs::create_dir_all(dir)?;
    }
    let rows = ms
        .par_iter()
        .map(|&m| {
            let mut row = ModeRow {
                m,
                q_m: None,
                k_m: None,
                a0: None,
                zero_count: None,
                nu0,
                rho: None,
                rho_bound: None,
                field_file: None,
                error: None,
            };
            let r = (|| -> Result<()> {
                let mode: ModeResult = find_qm(geom, m)?;
                row.q_m = Some(mode.q_m);
                row.k_m = Some(mode.k_m);
                row.a0 = Some(mode.a0);
                row.zero_count = Some(mode.zero_count);
                row.rho = Some(localization_rho(geom, &mode, nu0)?);
                row.rho_bound = Some(rho_bound(geom, mode.k_m, nu0));
                if let Some((dir, grid)) = &field {
                    let path = dir.join(format!("mode_m{m}.csv"));
                    let f = mode_field(geom, &mode, *grid)?;
                    f.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
                    row.field_file = Some(path.display().to_string());
                }
                Ok(())
            })();
            if let Err(e) = r {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect();
    Ok(ModeTable { geom: *geom, rows })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn md_cell(v: Option<f64>) -> String {
    match v {
        None => "".into(),
        Some(x) if x != 0.0 && (x.abs() < 1e-2 || x.abs() >= 1e4) => format!("{x:.3e}"),
        Some(x) => format!("{x:.4}"),
    }
}

fn text_cell(v: &Option<String>) -> String {
    v.as_deref().unwrap_or("").replace([',', '\n'], ";")
}

/// A table with one header row; writes any of the three formats.
struct Grid {
    header: Vec<&'static str>,
    csv: Vec<Vec<String>>,
    md: Vec<Vec<String>>,
}

impl Grid {
    fn write<W: Write, T: Serialize>(
        &self,
        format: OutputFormat,
        full: &T,
        mut w: W,
    ) -> Result<()> {
        match format {
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut w, full)?;
                writeln!(w)?;
            }
            OutputFormat::Csv => {
                writeln!(w, "{}", self.header.join(","))?;
                for r in &self.csv {
                    writeln!(w, "{}", r.join(","))?;
                }
            }
            OutputFormat::Md => {
                let mut s = String::new();
                let _ = writeln!(s, "| {} |", self.header.join(" | "));
                let _ = writeln!(s, "|{}", "---|".repeat(self.header.len()));
                for r in &self.md {
                    let _ = writeln!(s, "| {} |", r.join(" | "));
                }
                w.write_all(s.as_bytes())?;
            }
        }
        Ok(())
    }
}

pub const NORM_COLUMNS: [&str; 20] = [
    "shape",
    "k",
    "eta_strategy",
    "eta",
    "n",
    "norm_s",
    "p_s",
    "norm_d",
    "p_d",
    "norm_a",
    "p_a",
    "norm_ainv",
    "p_ainv",
    "cond",
    "bound_b",
    "bound_s_lower",
    "bound_s_upper",
    "bound_a_lower",
    "near_singular",
    "error",
];

pub fn write_norms<W: Write>(table: &NormTable, format: OutputFormat, w: W) -> Result<()> {
    let row_cells = |r: &NormRow, f: &dyn Fn(Option<f64>) -> String| {
        let p = &r.report;
        vec![
            p.shape.clone(),
            f(Some(p.k)),
            p.eta_strategy.clone(),
            f(Some(p.eta)),
            p.n.to_string(),
            f(p.norm_s),
            f(r.p_s),
            f(p.norm_d),
            f(r.p_d),
            f(p.norm_a),
            f(r.p_a),
            f(p.norm_ainv),
            f(r.p_ainv),
            f(p.cond),
            f(r.bound_b),
            f(r.bound_s_lower),
            f(r.bound_s_upper),
            f(r.bound_a_lower),
            p.near_singular.to_string(),
            text_cell(&r.error),
        ]
    };
    Grid {
        header: NORM_COLUMNS.to_vec(),
        csv: table.rows.iter().map(|r| row_cells(r, &cell)).collect(),
        md: table.rows.iter().map(|r| row_cells(r, &md_cell)).collect(),
    }
    .write(format, table, w)
}

pub const LOWK_COLUMNS: [&str; 13] = [
    "k",
    "n",
    "eta_k",
    "norm_a_k",
    "norm_ainv_k",
    "p_ainv_k",
    "near_singular_k",
    "eta_star",
    "norm_a_star",
    "norm_ainv_star",
    "p_ainv_star",
    "near_singular_star",
    "error",
];

pub fn write_lowk<W: Write>(table: &LowkTable, format: OutputFormat, w: W) -> Result<()> {
    let row_cells = |r: &LowkRow, f: &dyn Fn(Option<f64>) -> String| {
        vec![
            f(Some(r.k)),
            r.n.to_string(),
            f(Some(r.eta_k)),
            f(r.norm_a_k),
            f(r.norm_ainv_k),
            f(r.p_ainv_k),
            r.near_singular_k.to_string(),
            f(Some(r.eta_star)),
            f(r.norm_a_star),
            f(r.norm_ainv_star),
            f(r.p_ainv_star),
            r.near_singular_star.to_string(),
            text_cell(&r.error),
        ]
    };
    Grid {
        header: LOWK_COLUMNS.to_vec(),
        csv: table.rows.iter().map(|r| row_cells(r, &cell)).collect(),
        md: table.rows.iter().map(|r| row_cells(r, &md_cell)).collect(),
    }
    .write(format, table, w)
}

pub const CONVERGENCE_COLUMNS: [&str; 11] = [
    "eppw",
    "n",
    "norm_s",
    "norm_d",
    "norm_a",
    "norm_ainv",
    "rel_diff_s",
    "rel_diff_d",
    "rel_diff_a",
    "rel_diff_ainv",
    "error",
];

pub fn write_convergence<W: Write>(
    table: &ConvergenceTable,
    format: OutputFormat,
    w: W,
) -> Result<()> {
    let row_cells = |r: &ConvergenceRow, f: &dyn Fn(Option<f64>) -> String| {
        vec![
            f(Some(r.eppw)),
            r.n.to_string(),
            f(r.norm_s),
            f(r.norm_d),
            f(r.norm_a),
            f(r.norm_ainv),
            f(r.rel_diff_s),
            f(r.rel_diff_d),
            f(r.rel_diff_a),
            f(r.rel_diff_ainv),
            text_cell(&r.error),
        ]
    };
    Grid {
        header: CONVERGENCE_COLUMNS.to_vec(),
        csv: table.rows.iter().map(|r| row_cells(r, &cell)).collect(),
        md: table.rows.iter().map(|r| row_cells(r, &md_cell)).collect(),
    }
    .write(format, table, w)
}

pub const MODE_COLUMNS: [&str; 10] = [
    "m",
    "q_m",
    "k_m",
    "a0",
    "zero_count",
    "nu0",
    "rho",
    "rho_bound",
    "field_file",
    "error",
];

pub fn write_modes<W: Write>(table: &ModeTable, format: OutputFormat, w: W) -> Result<()> {
    let row_cells = |r: &ModeRow, f: &dyn Fn(Option<f64>) -> String| {
        vec![
            r.m.to_string(),
            f(r.q_m),
            f(r.k_m),
            f(r.a0),
            r.zero_count.map(|z| z.to_string()).unwrap_or_default(),
            f(Some(r.nu0)),
            f(r.rho),
            f(r.rho_bound),
            text_cell(&r.field_file),
            text_cell(&r.error),
        ]
    };
    Grid {
        header: MODE_COLUMNS.to_vec(),
        csv: table.rows.iter().map(|r| row_cells(r, &cell)).collect(),
        md: table.rows.iter().map(|r| row_cells(r, &md_cell)).collect(),
    }
    .write(format, table, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_spec(ks: Vec<f64>) -> ExperimentSpec {
        ExperimentSpec::new(ShapeSpec::new(ShapeKind::Circle), ks, "eta_k")
    }

    #[test]
    fn spec_validation() {
        assert!(circle_spec(vec![5.0, 10.0]).validate().is_ok());
        assert!(circle_spec(vec![10.0, 5.0]).validate().is_err());
        assert!(circle_spec(vec![5.0, 5.0]).validate().is_err());
        assert!(circle_spec(vec![-1.0]).validate().is_err());
        assert!(circle_spec(vec![]).validate().is_err());
        let mut s = circle_spec(vec![5.0]);
        s.eta = "eta_q".into();
        assert!(s.validate().is_err());
        assert!("xml".parse::<OutputFormat>().is_err());
        assert_eq!("md".parse::<OutputFormat>().unwrap(), OutputFormat::Md);
    }

    #[test]
    fn circle_rows_and_rates() {
        let t = run_norms(&circle_spec(vec![5.0, 10.0])).unwrap();
        assert_eq!(t.rows.len(), 2);
        let r = &t.rows[0];
        assert_eq!(r.report.n, 50);
        assert!((r.report.norm_s.unwrap() / 0.5240 - 1.0).abs() < 0.02);
        assert!((r.report.norm_a.unwrap() / 2.663 - 1.0).abs() < 0.02);
        assert!(r.p_s.is_none());
        let p = t.rows[1].p_s.unwrap();
        let want = (t.rows[1].report.norm_s.unwrap() / r.report.norm_s.unwrap()).ln() / 2f64.ln();
        assert!((p - want).abs() < 1e-14);
        assert!(r.report.norm_ainv.unwrap() <= r.bound_b.unwrap());
        assert!(r.report.norm_s.unwrap() >= r.bound_s_lower.unwrap());
        assert!(!t.flagged());
    }

    #[test]
    fn crack_only_single_layer() {
        let spec = ExperimentSpec::new(ShapeSpec::new(ShapeKind::Crack), vec![5.0, 10.0], "eta_k");
        let t = run_norms(&spec).unwrap();
        for r in &t.rows {
            let s = r.report.norm_s.unwrap();
            assert!(r.bound_s_lower.unwrap() <= s && s <= r.bound_s_upper.unwrap());
            assert!(r.report.norm_d.is_none() && r.report.norm_a.is_none());
            assert!(r.bound_b.is_none());
        }
    }

    #[test]
    fn csv_schema_and_determinism() {
        let t = run_norms(&circle_spec(vec![5.0])).unwrap();
        let mut a = Vec::new();
        write_norms(&t, OutputFormat::Csv, &mut a).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), NORM_COLUMNS.join(","));
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), NORM_COLUMNS.len());
        // full precision: parses back to the stored value
        assert_eq!(
            cells[5].parse::<f64>().unwrap(),
            t.rows[0].report.norm_s.unwrap()
        );
        let t2 = run_norms(&circle_spec(vec![5.0])).unwrap();
        let mut b = Vec::new();
        write_norms(&t2, OutputFormat::Csv, &mut b).unwrap();
        assert_eq!(a, b);
        let mut j = Vec::new();
        write_norms(&t, OutputFormat::Json, &mut j).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&j).unwrap();
        assert_eq!(v["rows"][0]["n"], 50);
        assert_eq!(v["spec"]["quadrature"]["singular_order"], 12);
        let mut m = Vec::new();
        write_norms(&t, OutputFormat::Md, &mut m).unwrap();
        assert!(String::from_utf8(m).unwrap().starts_with("| shape | k |"));
    }

    #[test]
    fn r0_for_nonstarlike_shapes() {
        let spec = ShapeSpec::new(ShapeKind::RectCavity);
        let arcs = make_shape(&spec).unwrap();
        let r0 = shape_r0(&spec, &arcs);
        let (a, c) = (std::f64::consts::PI / 10.0, 1.0);
        let l = c - a;
        // farthest vertex from the origin
        let want = [(-c, -l), (l, -l), (l, 2.0 * c - l), (-c, 2.0 * c - l)]
            .iter()
            .map(|(x, y): &(f64, f64)| x.hypot(*y))
            .fold(0.0, f64::max);
        assert!((r0 - want).abs() < 1e-9);
    }

    #[test]
    fn convergence_rows() {
        let t = run_convergence(
            &ShapeSpec::new(ShapeKind::Circle),
            5.0,
            "eta_k",
            &[10.0, 20.0],
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert_eq!(t.rows[0].n, 50);
        assert_eq!(t.rows[1].n, 100);
        assert_eq!(t.rows[1].rel_diff_a, Some(0.0));
        assert!(t.rows[0].rel_diff_a.unwrap() < 0.015);
        assert!(t.rows[0].rel_diff_ainv.unwrap() < 0.015);
        // S converges from below at second order
        assert!(t.rows[0].norm_s.unwrap() < t.rows[1].norm_s.unwrap());
    }

    #[test]
    fn lowk_rejects_open_shape() {
        let spec = LowkSpec::new(ShapeSpec::new(ShapeKind::Crack), vec![1e-3], 10);
        assert!(run_lowk(&spec).is_err());
        let mut spec = LowkSpec::new(ShapeSpec::new(ShapeKind::Square), vec![1e-3], 10);
        spec.star_rule = "eta_k".into();
        assert!(run_lowk(&spec).is_err());
    }

    #[test]
    fn lowk_small_square() {
        let spec = LowkSpec::new(ShapeSpec::new(ShapeKind::Square), vec![1e-3, 1e-2], 20);
        let t = run_lowk(&spec).unwrap();
        assert_eq!(t.rows[0].n, 80);
        let r = &t.rows[0];
        assert!(r.norm_ainv_k.unwrap() > r.norm_ainv_star.unwrap());
        assert!(t.rows[1].p_ainv_k.unwrap() < 0.0);
    }

    #[test]
    fn modes_table_and_files() {
        let dir = std::env::temp_dir().join(format!("helmcond-modes-{}", std::process::id()));
        let geom = EllipseGeom::new(1.0, 0.5).unwrap();
        let t = run_modes(
            &geom,
            &[1, 4],
            std::f64::consts::FRAC_PI_4,
            Some((dir.clone(), GridSpec { nx: 21, ny: 11 })),
        )
        .unwrap();
        assert!((t.rows[0].k_m.unwrap() - 9.977).abs() < 0.01);
        assert!(t.rows[1].rho.unwrap() < t.rows[0].rho.unwrap());
        let text = std::fs::read_to_string(dir.join("mode_m4.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 21 * 11);
        let mut out = Vec::new();
        write_modes(&t, OutputFormat::Csv, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("m,q_m,k_m"));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
