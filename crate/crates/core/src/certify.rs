//! Loss-based error bounds with explicit constant provenance.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::problems::{PdeProblem, ProblemKind};

/// Relative slack granted to quadrature-approximated norms when checking a bound.
pub const QUADRATURE_HEADROOM: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ConvexFormula,
    UserSupplied,
    UnknownLabeledHeuristic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ConvexFormula => "convex_formula",
            Provenance::UserSupplied => "user_supplied",
            Provenance::UnknownLabeledHeuristic => "unknown_labeled_heuristic",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormLabel {
    H2,
    XParabolic,
    HHalfSurrogate,
    HsInterpolated(f64),
}

impl fmt::Display for NormLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormLabel::H2 => f.write_str("H2"),
            NormLabel::XParabolic => f.write_str("X_parabolic"),
            NormLabel::HHalfSurrogate => f.write_str("H_half_surrogate"),
            NormLabel::HsInterpolated(s) => write!(f, "Hs_interpolated({s})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedReport {
    /// Loss variant or method the report belongs to.
    pub variant: String,
    pub loss: f64,
    pub constant: f64,
    pub provenance: Provenance,
    pub bound: f64,
    pub norm_label: NormLabel,
    pub measured_error: Option<f64>,
    pub certified: bool,
    pub quadrature_headroom: f64,
}

impl CertifiedReport {
    fn new(
        variant: &str,
        loss: f64,
        constant: f64,
        provenance: Provenance,
        norm_label: NormLabel,
    ) -> Self {
        CertifiedReport {
            variant: variant.to_string(),
            loss,
            constant,
            provenance,
            bound: constant * loss.sqrt(),
            norm_label,
            measured_error: None,
            certified: provenance != Provenance::UnknownLabeledHeuristic,
            quadrature_headroom: QUADRATURE_HEADROOM,
        }
    }

    pub fn with_variant(mut self, variant: &str) -> Self {
        self.variant = variant.to_string();
        self
    }

    pub fn with_measured(mut self, error: f64) -> Self {
        self.measured_error = Some(error);
        self
    }

    /// `measured <= bound * (1 + headroom)`; `None` when nothing is certified or measured.
    pub fn holds(&self) -> Option<bool> {
        match (self.certified, self.measured_error) {
            (true, Some(e)) => Some(e <= self.bound * (1.0 + self.quadrature_headroom)),
            _ => None,
        }
    }

    pub fn csv_header() -> &'static str {
        "variant,loss,constant,provenance,bound,measured_error,certified"
    }

    pub fn csv_row(&self) -> String {
        let measured = self
            .measured_error
            .map(|e| e.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.variant,
            self.loss,
            self.constant,
            self.provenance,
            self.bound,
            measured,
            self.certified
        )
    }

    /// Indented `key: value` block for human-readable outputs.
    pub fn text_block(&self) -> String {
        let measured = self
            .measured_error
            .map(|e| e.to_string())
            .unwrap_or_else(|| "n/a".into());
        format!(
            "report:\n  variant: {}\n  norm: {}\n  loss: {}\n  constant: {}\n  provenance: {}\n  bound: {}\n  measured_error: {}\n  certified: {}\n  quadrature_headroom: {}\n",
            self.variant,
            self.norm_label,
            self.loss,
            self.constant,
            self.provenance,
            self.bound,
            measured,
            self.certified,
            self.quadrature_headroom
        )
    }
}

fn unit_ball_volume(d: usize) -> Result<f64> {
    match d {
        1 => Ok(2.0),
        2 => Ok(PI),
        3 => Ok(4.0 * PI / 3.0),
        _ => Err(Error::InvalidDomain(format!(
            "no unit-ball volume for dimension {d}"
        ))),
    }
}

/// `sqrt(1 + (|Ω| / ω_d)^(1/d))` for a convex spatial domain.
pub fn c_reg_convex(domain: &Domain) -> Result<f64> {
    if domain.is_spacetime() {
        return Err(Error::InvalidDomain(
            "the convex regularity constant applies to spatial domains".into(),
        ));
    }
    let d = domain.dim();
    let ratio = domain.measure() / unit_ball_volume(d)?;
    Ok((1.0 + ratio.powf(1.0 / d as f64)).sqrt())
}

fn check_loss(loss: f64) -> Result<()> {
    if loss < 0.0 || !loss.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "loss must be finite and nonnegative, got {loss}"
        )));
    }
    Ok(())
}

/// H² bound `c_reg * sqrt(loss)` for an exact-boundary Poisson interior loss.
pub fn certified_h2_bound(loss: f64, domain: &Domain) -> Result<CertifiedReport> {
    check_loss(loss)?;
    Ok(CertifiedReport::new(
        "interior",
        loss,
        c_reg_convex(domain)?,
        Provenance::ConvexFormula,
        NormLabel::H2,
    ))
}

/// H² report for any elliptic problem. The convex formula only covers the
/// Laplacian; other operators need a user constant or stay uncertified.
pub fn h2_report(
    problem: &PdeProblem,
    loss: f64,
    user_constant: Option<f64>,
) -> Result<CertifiedReport> {
    check_loss(loss)?;
    match (problem.kind, user_constant) {
        (ProblemKind::Heat, _) => Err(Error::InvalidArgument(
            "heat problems are reported in the X norm".into(),
        )),
        (_, Some(c)) => {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "constant must be positive, got {c}"
                )));
            }
            Ok(CertifiedReport::new(
                "interior",
                loss,
                c,
                Provenance::UserSupplied,
                NormLabel::H2,
            ))
        }
        (ProblemKind::Poisson, None) => certified_h2_bound(loss, &problem.domain),
        (ProblemKind::EllipticDivA, None) => Ok(CertifiedReport::new(
            "interior",
            loss,
            c_reg_convex(&problem.domain)?,
            Provenance::UnknownLabeledHeuristic,
            NormLabel::H2,
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeaReport {
    /// `loss - best`: optimisation error relative to the ensemble, an upper
    /// bound on the gap to the true infimum.
    pub delta_estimate: f64,
    pub best_loss_estimate: f64,
    pub constant: f64,
    pub bound: f64,
    pub label: String,
}

pub fn cea_decomposition(loss: f64, best_loss_estimate: f64, domain: &Domain) -> Result<CeaReport> {
    check_loss(loss)?;
    check_loss(best_loss_estimate)?;
    if best_loss_estimate > loss {
        return Err(Error::InvalidArgument(format!(
            "best loss estimate {best_loss_estimate} exceeds loss {loss}"
        )));
    }
    let constant = c_reg_convex(domain)?;
    let delta_estimate = loss - best_loss_estimate;
    Ok(CeaReport {
        delta_estimate,
        best_loss_estimate,
        constant,
        bound: constant * loss.sqrt(),
        label: "ensemble_relative_delta".into(),
    })
}

fn check_s(s: f64) -> Result<()> {
    if !(0.5..=2.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("s = {s} outside [1/2, 2]")));
    }
    Ok(())
}

/// `h_half^(2(2-s)/3) * h2^((2s-1)/3)`.
pub fn interp_hs_bound(s: f64, h_half_value: f64, h2_value: f64) -> Result<f64> {
    check_s(s)?;
    if h_half_value < 0.0 || h2_value < 0.0 {
        return Err(Error::InvalidArgument(
            "norm values must be nonnegative".into(),
        ));
    }
    Ok(h_half_value.powf(2.0 * (2.0 - s) / 3.0) * h2_value.powf((2.0 * s - 1.0) / 3.0))
}

/// Interpolated H^s report; heuristic whenever the H^{1/2} input is the surrogate.
pub fn interp_hs_report(
    s: f64,
    h_half_value: f64,
    h2_value: f64,
    surrogate: bool,
) -> Result<CertifiedReport> {
    let bound = interp_hs_bound(s, h_half_value, h2_value)?;
    let provenance = if surrogate {
        Provenance::UnknownLabeledHeuristic
    } else {
        Provenance::UserSupplied
    };
    let mut r = CertifiedReport::new(
        "interpolated",
        0.0,
        1.0,
        provenance,
        NormLabel::HsInterpolated(s),
    );
    r.bound = bound;
    Ok(r)
}

/// `(1 + τ^(-1/2)) sqrt(loss_τ)`, omitting the unknown constant; never certified.
pub fn penalty_h_half_estimator(loss: f64, tau: f64) -> Result<CertifiedReport> {
    check_loss(loss)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tau must be positive, got {tau}"
        )));
    }
    Ok(CertifiedReport::new(
        "penalty",
        loss,
        1.0 + tau.powf(-0.5),
        Provenance::UnknownLabeledHeuristic,
        NormLabel::HHalfSurrogate,
    ))
}

/// X-norm report: certified with a user constant, else `sqrt(loss)` labeled heuristic.
pub fn parabolic_bound(loss: f64, constant: Option<f64>) -> Result<CertifiedReport> {
    check_loss(loss)?;
    match constant {
        Some(c) if c < 0.0 || !c.is_finite() => Err(Error::InvalidArgument(format!(
            "constant must be nonnegative, got {c}"
        ))),
        Some(c) => Ok(CertifiedReport::new(
            "parabolic",
            loss,
            c,
            Provenance::UserSupplied,
            NormLabel::XParabolic,
        )),
        None => Ok(CertifiedReport::new(
            "parabolic",
            loss,
            1.0,
            Provenance::UnknownLabeledHeuristic,
            NormLabel::XParabolic,
        )),
    }
}

/// `measured / sqrt(loss)` per checkpoint; `None` where the loss vanishes.
pub fn ratio_series(pairs: &[(f64, f64)]) -> Vec<Option<f64>> {
    pairs
        .iter()
        .map(|&(loss, err)| (loss > 0.0).then(|| err / loss.sqrt()))
        .collect()
}

/// Sample standard deviation over mean.
pub fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt() / mean.abs())
}
