//! PDE problems and their strong-form residuals.
//!
//! Every residual used here is affine in the jet coefficients of the trial
//! function, so at a fixed point it is represented as a [`Stencil`]:
//! `r(v) = <weights, coeffs(v)> + source`. Stencils depend only on the
//! problem data and the point, which lets the losses precompute them once.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{AnalyticField, Expr};
use crate::geometry::{Domain, Lift};
use crate::jets::TaylorJet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `-Δu = f`
    Poisson,
    /// `-div(A ∇u) = f`
    EllipticDivA,
    /// `d_t u - Δu = f`, coordinates `(t, x..)`
    Heat,
}

/// Symmetric uniformly elliptic coefficient with closed-form row divergence.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient {
    pub matrix: Vec<Vec<Expr>>,
    /// `(div A)_j = sum_i d_i A_ij`
    pub divergence: Vec<Expr>,
    /// Lower bound `c_A` with `A(x) xi . xi >= c_A |xi|^2`.
    pub ellipticity: f64,
}

impl Coefficient {
    pub fn matrix_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.matrix
            .iter()
            .map(|row| row.iter().map(|e| e.eval(x)).collect())
            .collect()
    }

    pub fn divergence_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.divergence.iter().map(|e| e.eval(x)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeProblem {
    pub id: String,
    pub kind: ProblemKind,
    pub domain: Domain,
    pub rhs: Expr,
    /// Boundary data `g`; zero for heat problems.
    pub boundary: Expr,
    /// Closed-form extension of `g` into the domain.
    pub lift: Lift,
    /// Spatial initial datum (heat only).
    pub initial: Option<Expr>,
    pub coefficient: Option<Coefficient>,
    /// Manufactured exact solution, if known.
    pub exact: Option<Expr>,
}

/// Affine functional `v -> <weights, coeffs(v)> + source` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    pub weights: TaylorJet,
    pub source: f64,
}

impl Stencil {
    pub fn apply(&self, v: &TaylorJet) -> f64 {
        self.weights.coeff_dot(v) + self.source
    }
}

fn add_derivative(weights: &mut TaylorJet, indices: &[usize], scale: f64) -> Result<()> {
    let (slot, factor) = weights.derivative_slot(indices)?;
    weights.coeffs_mut()[slot] += scale * factor;
    Ok(())
}

impl PdeProblem {
    /// Number of coordinates of a point (including time for heat problems).
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn exact_field(&self) -> Option<AnalyticField> {
        self.exact
            .clone()
            .map(|e| AnalyticField::new(e, self.dim()))
    }

    pub fn boundary_field(&self) -> AnalyticField {
        AnalyticField::new(self.boundary.clone(), self.dim())
    }

    /// Residual `Δv + f`, `div(A∇v) + f` or `d_t v - Δ_x v - f` as a stencil
    /// acting on jets of the given shape.
    pub fn residual_stencil(&self, x: &[f64], order: usize) -> Result<Stencil> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch(format!(
                "problem {} has {} coordinates, point has {}",
                self.id,
                self.dim(),
                x.len()
            )));
        }
        if order < 2 {
            return Err(Error::InsufficientOrder {
                what: "pointwise residual",
                required: 2,
                actual: order,
            });
        }
        let mut weights = TaylorJet::constant(0.0, order, x.len())?;
        let f = self.rhs.eval(x)?;
        let source = match self.kind {
            ProblemKind::Poisson => {
                for i in 0..x.len() {
                    add_derivative(&mut weights, &[i, i], 1.0)?;
                }
                f
            }
            ProblemKind::EllipticDivA => {
                let coef = self.coefficient.as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!("problem {} lacks a coefficient", self.id))
                })?;
                let a = coef.matrix_at(x)?;
                let div = coef.divergence_at(x)?;
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        add_derivative(&mut weights, &[i, j], a[i][j])?;
                    }
                    add_derivative(&mut weights, &[i], div[i])?;
                }
                f
            }
            ProblemKind::Heat => {
                add_derivative(&mut weights, &[0], 1.0)?;
                for i in 1..x.len() {
                    add_derivative(&mut weights, &[i, i], -1.0)?;
                }
                -f
            }
        };
        Ok(Stencil { weights, source })
    }

    /// Components `d_k(Δv) + d_k f`, k over the spatial axes (Poisson only).
    pub fn grad_residual_stencils(&self, x: &[f64]) -> Result<Vec<Stencil>> {
        if self.kind != ProblemKind::Poisson {
            return Err(Error::ModeMismatch(format!(
                "gradient residual is only defined for Poisson problems, {} is {:?}",
                self.id, self.kind
            )));
        }
        let grad_f = self.rhs.jet(x, 1)?;
        (0..x.len())
            .map(|k| {
                let mut weights = TaylorJet::constant(0.0, 3, x.len())?;
                for i in 0..x.len() {
                    add_derivative(&mut weights, &[k, i, i], 1.0)?;
                }
                Ok(Stencil {
                    weights,
                    source: grad_f.partial(k),
                })
            })
            .collect()
    }

    pub fn pointwise_residual(&self, v: &TaylorJet, x: &[f64]) -> Result<f64> {
        if v.dim() != self.dim() {
            return Err(Error::DimMismatch(format!(
                "jet has dim {}, problem {} has {}",
                v.dim(),
                self.id,
                self.dim()
            )));
        }
        Ok(self.residual_stencil(x, v.order())?.apply(v))
    }
}

/// Identifier of a registered problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemId {
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::P1,
        ProblemId::P2,
        ProblemId::P3,
        ProblemId::P4,
        ProblemId::P5,
    ];

    pub fn problem(self) -> PdeProblem {
        match self {
            ProblemId::P1 => p1(),
            ProblemId::P2 => p2(),
            ProblemId::P3 => p3(),
            ProblemId::P4 => p4(),
            ProblemId::P5 => p5(),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P1" => Ok(ProblemId::P1),
            "P2" => Ok(ProblemId::P2),
            "P3" => Ok(ProblemId::P3),
            "P4" => Ok(ProblemId::P4),
            "P5" => Ok(ProblemId::P5),
            _ => Err(Error::Config(format!("unknown problem id {s:?}"))),
        }
    }
}

fn sin_pi(i: usize) -> Expr {
    (PI * Expr::x(i)).sin()
}

fn cos_pi(i: usize) -> Expr {
    (PI * Expr::x(i)).cos()
}

fn zero_dirichlet(
    id: &str,
    kind: ProblemKind,
    domain: Domain,
    rhs: Expr,
    exact: Expr,
) -> PdeProblem {
    PdeProblem {
        id: id.into(),
        kind,
        domain,
        rhs,
        boundary: Expr::zero(),
        lift: Lift::Zero,
        initial: None,
        coefficient: None,
        exact: Some(exact),
    }
}

/// Unit-square Poisson, `u* = sin(πx) sin(πy)`.
fn p1() -> PdeProblem {
    zero_dirichlet(
        "P1",
        ProblemKind::Poisson,
        Domain::unit_square(),
        (2.0 * PI * PI) * sin_pi(0) * sin_pi(1),
        sin_pi(0) * sin_pi(1),
    )
}

/// Unit-disk Poisson, `u* = (1 - |x|^2) / 4`, `f = 1`.
fn p2() -> PdeProblem {
    let r2 = Expr::x(0) * Expr::x(0) + Expr::x(1) * Expr::x(1);
    zero_dirichlet(
        "P2",
        ProblemKind::Poisson,
        Domain::unit_disk(),
        Expr::c(1.0),
        0.25 * (Expr::c(1.0) - r2),
    )
}

/// Unit-square `-div(a ∇u) = f` with `a = 1 + |x|^2 / 2`, `u* = sin(πx) sin(πy)`.
fn p3() -> PdeProblem {
    let a = Expr::c(1.0) + 0.5 * (Expr::x(0) * Expr::x(0) + Expr::x(1) * Expr::x(1));
    // f = -(a Δu* + ∇a . ∇u*), ∇a = x
    let rhs = (2.0 * PI * PI) * a.clone() * sin_pi(0) * sin_pi(1)
        - PI * Expr::x(0) * cos_pi(0) * sin_pi(1)
        - PI * Expr::x(1) * sin_pi(0) * cos_pi(1);
    let mut p = zero_dirichlet(
        "P3",
        ProblemKind::EllipticDivA,
        Domain::unit_square(),
        rhs,
        sin_pi(0) * sin_pi(1),
    );
    p.coefficient = Some(Coefficient {
        matrix: vec![vec![a.clone(), Expr::zero()], vec![Expr::zero(), a]],
        divergence: vec![Expr::x(0), Expr::x(1)],
        ellipticity: 1.0,
    });
    p
}

/// Heat equation on `[0, 0.2] x` unit square, `u* = exp(-2π² t) sin(πx) sin(πy)`.
fn p4() -> PdeProblem {
    let u0 = sin_pi(0) * sin_pi(1);
    let exact = (-2.0 * PI * PI * Expr::x(0)).exp() * sin_pi(1) * sin_pi(2);
    PdeProblem {
        id: "P4".into(),
        kind: ProblemKind::Heat,
        domain: Domain::spacetime(0.2, Domain::unit_square()).expect("valid box"),
        rhs: Expr::zero(),
        boundary: Expr::zero(),
        lift: Lift::Zero,
        initial: Some(u0),
        coefficient: None,
        exact: Some(exact),
    }
}

/// Unit-square Laplace with boundary data of the harmonic `u* = x² - y²`.
fn p5() -> PdeProblem {
    let u = Expr::x(0) * Expr::x(0) - Expr::x(1) * Expr::x(1);
    PdeProblem {
        id: "P5".into(),
        kind: ProblemKind::Poisson,
        domain: Domain::unit_square(),
        rhs: Expr::zero(),
        boundary: u.clone(),
        lift: Lift::Expr(u.clone()),
        initial: None,
        coefficient: None,
        exact: Some(u),
    }
}

pub fn builtin_problems() -> Vec<PdeProblem> {
    ProblemId::ALL.iter().map(|id| id.problem()).collect()
}
