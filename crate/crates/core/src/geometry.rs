//! Domains, their polynomial distance factors and boundary lifts.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jets::TaylorJet;

/// Slack used when deciding whether a point lies in the closure of a domain.
const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Interval {
        a: f64,
        b: f64,
    },
    Rectangle {
        lo: [f64; 2],
        hi: [f64; 2],
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    /// `[0, t_end] x spatial`; points are ordered `(t, x...)`.
    SpaceTime {
        t_end: f64,
        spatial: Box<Domain>,
    },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "interval needs a < b, got [{a}, {b}]"
            )));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if !(hi[0] > lo[0] && hi[1] > lo[1]) || lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "rectangle needs lo < hi componentwise, got {lo:?} .. {hi:?}"
            )));
        }
        Ok(Domain::Rectangle { lo, hi })
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        }
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "disk needs R > 0, got {radius}"
            )));
        }
        Ok(Domain::Disk { center, radius })
    }

    pub fn unit_disk() -> Self {
        Domain::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn spacetime(t_end: f64, spatial: Domain) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "time horizon must be positive, got {t_end}"
            )));
        }
        if matches!(spatial, Domain::SpaceTime { .. }) {
            return Err(Error::InvalidDomain("nested space-time boxes".into()));
        }
        if spatial.dim() > 2 {
            return Err(Error::InvalidDomain(
                "space-time jets are capped at 3 coordinates".into(),
            ));
        }
        Ok(Domain::SpaceTime {
            t_end,
            spatial: Box::new(spatial),
        })
    }

    /// Number of coordinates of a point (including time for space-time boxes).
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } | Domain::Disk { .. } => 2,
            Domain::SpaceTime { spatial, .. } => 1 + spatial.dim(),
        }
    }

    pub fn spatial_dim(&self) -> usize {
        match self {
            Domain::SpaceTime { spatial, .. } => spatial.dim(),
            _ => self.dim(),
        }
    }

    pub fn is_spacetime(&self) -> bool {
        matches!(self, Domain::SpaceTime { .. })
    }

    pub fn spatial(&self) -> &Domain {
        match self {
            Domain::SpaceTime { spatial, .. } => spatial,
            _ => self,
        }
    }

    /// Analytic volume of the set (space-time volume for space-time boxes).
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { lo, hi } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
            Domain::Disk { radius, .. } => PI * radius * radius,
            Domain::SpaceTime { t_end, spatial } => t_end * spatial.measure(),
        }
    }

    /// Analytic measure of the (spatial) boundary.
    pub fn boundary_measure(&self) -> f64 {
        match self {
            Domain::Interval { .. } => 2.0,
            Domain::Rectangle { lo, hi } => 2.0 * ((hi[0] - lo[0]) + (hi[1] - lo[1])),
            Domain::Disk { radius, .. } => 2.0 * PI * radius,
            Domain::SpaceTime { t_end, spatial } => t_end * spatial.boundary_measure(),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { a, b } => (vec![*a], vec![*b]),
            Domain::Rectangle { lo, hi } => (lo.to_vec(), hi.to_vec()),
            Domain::Disk { center, radius } => (
                vec![center[0] - radius, center[1] - radius],
                vec![center[0] + radius, center[1] + radius],
            ),
            Domain::SpaceTime { t_end, spatial } => {
                let (mut lo, mut hi) = spatial.bounding_box();
                lo.insert(0, 0.0);
                hi.insert(0, *t_end);
                (lo, hi)
            }
        }
    }

    pub fn contains_closure(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Domain::Interval { a, b } => x[0] >= a - CLOSURE_TOL && x[0] <= b + CLOSURE_TOL,
            Domain::Rectangle { lo, hi } => {
                (0..2).all(|i| x[i] >= lo[i] - CLOSURE_TOL && x[i] <= hi[i] + CLOSURE_TOL)
            }
            Domain::Disk { center, radius } => {
                let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                r2 <= radius * radius * (1.0 + CLOSURE_TOL)
            }
            Domain::SpaceTime { t_end, spatial } => {
                x[0] >= -CLOSURE_TOL
                    && x[0] <= t_end + CLOSURE_TOL
                    && spatial.contains_closure(&x[1..])
            }
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch(format!(
                "domain has {} coordinates, point has {}",
                self.dim(),
                x.len()
            )));
        }
        if !self.contains_closure(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    /// Polynomial factor vanishing exactly on the boundary (on the parabolic
    /// boundary `{t = 0} u [0,T] x dOmega` for space-time boxes), positive inside.
    pub fn distance_factor(&self, x: &[f64]) -> Result<f64> {
        Ok(self.distance_factor_jet_at(x, 1)?.value())
    }

    pub fn distance_factor_jet_at(&self, x: &[f64], order: usize) -> Result<TaylorJet> {
        self.check_point(x)?;
        let coords = TaylorJet::seed_point(x, order)?;
        Ok(self.distance_factor_jet(&coords))
    }

    /// Distance factor composed with the given coordinate jets.
    pub fn distance_factor_jet(&self, coords: &[TaylorJet]) -> TaylorJet {
        match self {
            Domain::Interval { a, b } => {
                coords[0].add_scalar(-a) * coords[0].scale(-1.0).add_scalar(*b)
            }
            Domain::Rectangle { lo, hi } => {
                let fx = coords[0].add_scalar(-lo[0]) * coords[0].scale(-1.0).add_scalar(hi[0]);
                let fy = coords[1].add_scalar(-lo[1]) * coords[1].scale(-1.0).add_scalar(hi[1]);
                fx * fy
            }
            Domain::Disk { center, radius } => {
                let dx = coords[0].add_scalar(-center[0]);
                let dy = coords[1].add_scalar(-center[1]);
                (dx * dx + dy * dy).scale(-1.0).add_scalar(radius * radius)
            }
            Domain::SpaceTime { spatial, .. } => {
                coords[0] * spatial.distance_factor_jet(&coords[1..])
            }
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval { a, b } => write!(f, "interval[{a}, {b}]"),
            Domain::Rectangle { lo, hi } => {
                write!(f, "rectangle[{}, {}]x[{}, {}]", lo[0], hi[0], lo[1], hi[1])
            }
            Domain::Disk { center, radius } => {
                write!(f, "disk(center=({}, {}), R={radius})", center[0], center[1])
            }
            Domain::SpaceTime { t_end, spatial } => write!(f, "[0, {t_end}] x {spatial}"),
        }
    }
}

/// Closed-form extension `G` of the boundary data into the closure of the domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Lift {
    Zero,
    Expr(Expr),
}

impl Lift {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Lift::Zero => Ok(0.0),
            Lift::Expr(e) => e.eval(x),
        }
    }

    pub fn jet_with(&self, coords: &[TaylorJet]) -> Result<TaylorJet> {
        match self {
            Lift::Zero => Ok(coords[0].zero_like()),
            Lift::Expr(e) => e.jet_with(coords),
        }
    }

    pub fn expr(&self) -> Expr {
        match self {
            Lift::Zero => Expr::zero(),
            Lift::Expr(e) => e.clone(),
        }
    }
}

impl fmt::Display for Lift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lift::Zero => write!(f, "0"),
            Lift::Expr(e) => write!(f, "{e}"),
        }
    }
}
