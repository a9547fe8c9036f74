//! Closed-form bounds on norms of the layer potentials and the coupling
//! parameter rules.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{ShapeKind, StarlikeParams};
use crate::specfun::EULER_GAMMA;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum EtaStrategy {
    /// `eta = k`
    EtaK,
    /// `eta = k^(2/3)`
    EtaK23,
    /// `1 / (R_0 (1 - log(k R_0)))` for `k R_0 <= 1`, `k` above.
    EtaStar2d { r0: f64 },
    /// `1 / (R_0 (1 - log(k R_0)))` for every `k`.
    EtaStarLog { r0: f64 },
    /// `(pi^2 + 4 (log(k/2) + gamma)^2)^(-1/2)`
    Kress2d,
    /// `max(1 / (2 R_0), k)`
    Kress3dMaxrule { r0: f64 },
}

impl EtaStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            EtaStrategy::EtaK => "eta_k",
            EtaStrategy::EtaK23 => "eta_k23",
            EtaStrategy::EtaStar2d { .. } => "eta_star_2d",
            EtaStrategy::EtaStarLog { .. } => "eta_star_log",
            EtaStrategy::Kress2d => "kress_2d",
            EtaStrategy::Kress3dMaxrule { .. } => "kress_3d_maxrule",
        }
    }

    /// Parse a strategy name; `r0` is used by the rules that need a length.
    pub fn from_name(name: &str, r0: f64) -> Result<EtaStrategy> {
        Ok(match name {
            "eta_k" => EtaStrategy::EtaK,
            "eta_k23" => EtaStrategy::EtaK23,
            "eta_star_2d" => EtaStrategy::EtaStar2d { r0 },
            "eta_star_log" => EtaStrategy::EtaStarLog { r0 },
            "kress_2d" => EtaStrategy::Kress2d,
            "kress_3d_maxrule" => EtaStrategy::Kress3dMaxrule { r0 },
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown coupling strategy `{name}`"
                )))
            }
        })
    }

    pub fn needs_r0(name: &str) -> bool {
        matches!(name, "eta_star_2d" | "eta_star_log" | "kress_3d_maxrule")
    }
}

impl fmt::Display for EtaStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coupling parameter for wavenumber `k > 0`.
pub fn eta(strategy: EtaStrategy, k: f64) -> f64 {
    match strategy {
        EtaStrategy::EtaK => k,
        EtaStrategy::EtaK23 => k.powf(2.0 / 3.0),
        EtaStrategy::EtaStar2d { r0 } => {
            if k * r0 <= 1.0 {
                eta_star_log_branch(k, r0)
            } else {
                k
            }
        }
        EtaStrategy::EtaStarLog { r0 } => eta_star_log_branch(k, r0),
        EtaStrategy::Kress2d => {
            let l = (0.5 * k).ln() + EULER_GAMMA;
            1.0 / (PI * PI + 4.0 * l * l).sqrt()
        }
        EtaStrategy::Kress3dMaxrule { r0 } => (0.5 / r0).max(k),
    }
}

/// `1 / (R_0 (1 - log(k R_0)))`.
pub fn eta_star_log_branch(k: f64, r0: f64) -> f64 {
    1.0 / (r0 * (1.0 - (k * r0).ln()))
}

/// Limit `c_0` of `eta (1/2pi) log(k R_0)` as `k -> 0` for the `eta*` rule.
pub fn eta_star_c0(r0: f64) -> f64 {
    -1.0 / (2.0 * PI * r0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub name: String,
    pub value: f64,
    /// `"all k"` or a note on asymptotic validity.
    pub validity: String,
}

fn check_params(p: &StarlikeParams) -> Result<()> {
    let ok = p.delta_minus > 0.0
        && p.delta_minus <= p.delta_plus
        && p.delta_plus <= p.r0 * (1.0 + 1e-12)
        && p.delta_star >= 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "inconsistent starlike parameters {p:?}"
        )))
    }
}

/// Upper bound `B` on `||A_{k,eta}^{-1}||` for a starlike obstacle.
pub fn bound_b(p: &StarlikeParams, k: f64, eta: f64, d: u32) -> Result<BoundValue> {
    check_params(p)?;
    if eta == 0.0 {
        return Err(Error::InvalidArgument("bound B needs eta != 0".into()));
    }
    let ratio = p.delta_plus / p.delta_minus;
    let star = (p.delta_star / p.delta_minus).powi(2);
    let dm = d as f64 - 2.0;
    let inner = ratio * (k * k / (eta * eta) + 1.0) + dm / (p.delta_minus * eta.abs()) + star;
    let tail = (1.0 + 2.0 * k * p.r0).powi(2) / (2.0 * p.delta_minus.powi(2) * eta * eta);
    Ok(BoundValue {
        name: "B".into(),
        value: 0.5 + ((ratio + 4.0 * star) * inner + tail).sqrt(),
        validity: "all k".into(),
    })
}

/// `B` specialised to a circle or sphere of radius `R_0`.
pub fn bound_b0(r0: f64, k: f64, eta: f64, d: u32) -> f64 {
    let dm = d as f64 - 2.0;
    0.5 + (1.0
        + k * k / (eta * eta)
        + dm / (r0 * eta.abs())
        + (1.0 + 2.0 * k * r0).powi(2) / (2.0 * r0 * r0 * eta * eta))
        .sqrt()
}

/// `1/2 + theta (4 + 13 theta + 4 theta^2)^(1/2)` for `theta = R_0 / delta_-`.
pub fn bound_theta(theta: f64) -> Result<f64> {
    if !(theta >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta must be >= 1, got {theta}"
        )));
    }
    Ok(0.5 + theta * (4.0 + 13.0 * theta + 4.0 * theta * theta).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrackBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Leading-order lower and explicit upper bound on `||S_k||` for a straight
/// segment of length `a`.
pub fn crack_s_bounds(a: f64, k: f64) -> CrackBounds {
    let lower = (a / (PI * k)).sqrt();
    CrackBounds {
        lower,
        upper: 2.0 * lower,
    }
}

/// Leading-order lower bound on `||S_k||` from a boundary point with
/// radius of curvature `r`.
pub fn curvature_s_lower(r: f64, k: f64) -> f64 {
    0.5 * (r / PI).cbrt() * (2.0 * k).powf(-2.0 / 3.0)
}

/// Leading-order lower bound on `||A_{k,eta}||` from a straight section of
/// length `a`, clamped at zero.
pub fn line_a_lower(a: f64, k: f64, eta: f64) -> f64 {
    (eta.abs() * (a / (PI * k)).sqrt() - 1.0).max(0.0)
}

/// A growth law known only up to a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAnnotation {
    pub quantity: String,
    pub exponent: f64,
    /// `"upper"` or `"lower"`.
    pub direction: String,
}

fn rate(quantity: &str, exponent: f64, direction: &str) -> RateAnnotation {
    RateAnnotation {
        quantity: quantity.into(),
        exponent,
        direction: direction.into(),
    }
}

/// High-frequency rates (2D) relevant to a catalogue shape.
pub fn rate_annotations(kind: ShapeKind) -> Vec<RateAnnotation> {
    let mut out = vec![rate("norm_s", -0.5, "upper")];
    if kind != ShapeKind::Crack {
        out.push(rate("norm_d", 0.5, "upper"));
    }
    match kind {
        ShapeKind::Circle | ShapeKind::Ellipse | ShapeKind::Kite => {
            out.push(rate("norm_s", -2.0 / 3.0, "lower"));
        }
        ShapeKind::Crack | ShapeKind::Square | ShapeKind::Rectangle => {
            out.push(rate("norm_s", -0.5, "lower"));
        }
        ShapeKind::RectCavity => {
            out.push(rate("norm_s", -0.5, "lower"));
            out.push(rate("norm_ainv", 0.9, "lower"));
        }
        ShapeKind::EllipticCavity => {
            out.push(rate("norm_s", -2.0 / 3.0, "lower"));
        }
    }
    out
}
