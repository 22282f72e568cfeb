//! Closed-form scalar expressions used for right-hand sides, boundary lifts,
//! coefficients and manufactured solutions.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::jets::{Elementary, TaylorJet};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Coordinate `x_i` of the evaluation point.
    Coord(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Apply(Elementary, Box<Expr>),
}

impl Expr {
    pub fn c(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn x(i: usize) -> Self {
        Expr::Coord(i)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn sin(self) -> Self {
        Expr::Apply(Elementary::Sin, Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Apply(Elementary::Cos, Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Apply(Elementary::Exp, Box::new(self))
    }

    pub fn tanh(self) -> Self {
        Expr::Apply(Elementary::Tanh, Box::new(self))
    }

    pub fn powf(self, p: f64) -> Self {
        Expr::Apply(Elementary::Power(p), Box::new(self))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Coord(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_coord().max(b.max_coord()),
            Expr::Neg(a) | Expr::Apply(_, a) => a.max_coord(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const(v) => *v,
            Expr::Coord(i) => *x.get(*i).ok_or(Error::IndexOutOfRange {
                index: *i,
                dim: x.len(),
            })?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Apply(f, a) => f.eval(a.eval(x)?)?,
        })
    }

    /// Jet of the expression at `x`, seeding every coordinate of `x`.
    pub fn jet(&self, x: &[f64], order: usize) -> Result<TaylorJet> {
        let coords = TaylorJet::seed_point(x, order)?;
        self.jet_with(&coords)
    }

    /// Jet of the expression with `Coord(i)` bound to `coords[i]`.
    pub fn jet_with(&self, coords: &[TaylorJet]) -> Result<TaylorJet> {
        let template = coords
            .first()
            .ok_or_else(|| Error::InvalidArgument("no coordinate jets supplied".into()))?;
        self.jet_inner(coords, template)
    }

    fn jet_inner(&self, coords: &[TaylorJet], template: &TaylorJet) -> Result<TaylorJet> {
        Ok(match self {
            Expr::Const(v) => template.constant_like(*v),
            Expr::Coord(i) => *coords.get(*i).ok_or(Error::IndexOutOfRange {
                index: *i,
                dim: coords.len(),
            })?,
            Expr::Add(a, b) => a.jet_inner(coords, template)? + b.jet_inner(coords, template)?,
            Expr::Sub(a, b) => a.jet_inner(coords, template)? - b.jet_inner(coords, template)?,
            Expr::Mul(a, b) => match (a.as_ref(), b.as_ref()) {
                (Expr::Const(c), e) | (e, Expr::Const(c)) => {
                    e.jet_inner(coords, template)?.scale(*c)
                }
                _ => a.jet_inner(coords, template)? * b.jet_inner(coords, template)?,
            },
            Expr::Neg(a) => -a.jet_inner(coords, template)?,
            Expr::Apply(f, a) => a.jet_inner(coords, template)?.apply(*f)?,
        })
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Const(self) * rhs
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Coord(i) => write!(f, "x{i}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Neg(a) => write!(f, "-{a}"),
            Expr::Apply(Elementary::Power(p), a) => write!(f, "{a}^{p}"),
            Expr::Apply(func, a) => {
                let name = match func {
                    Elementary::Tanh => "tanh",
                    Elementary::Sin => "sin",
                    Elementary::Cos => "cos",
                    Elementary::Exp => "exp",
                    Elementary::Power(_) => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

/// Scalar field that can be expanded into a jet at any point of its domain.
pub trait Field: Sync {
    /// Number of input coordinates.
    fn dim(&self) -> usize;

    fn jet(&self, x: &[f64], order: usize) -> Result<TaylorJet>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x, 1)?.value())
    }
}

/// An [`Expr`] bound to a fixed input dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticField {
    pub expr: Expr,
    pub dim: usize,
}

impl AnalyticField {
    pub fn new(expr: Expr, dim: usize) -> Self {
        AnalyticField { expr, dim }
    }

    pub fn zero(dim: usize) -> Self {
        AnalyticField::new(Expr::zero(), dim)
    }
}

impl Field for AnalyticField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, x: &[f64], order: usize) -> Result<TaylorJet> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch(format!(
                "field expects {} coordinates, got {}",
                self.dim,
                x.len()
            )));
        }
        self.expr.jet(x, order)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.expr.eval(x)
    }
}

/// The harmonic polynomial `r^n cos(n phi) = Re((x + i y)^n)` on the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HarmonicMode {
    pub n: u32,
}

impl Field for HarmonicMode {
    fn dim(&self) -> usize {
        2
    }

    fn jet(&self, x: &[f64], order: usize) -> Result<TaylorJet> {
        let z = TaylorJet::seed_point(x, order)?;
        if z.len() != 2 {
            return Err(Error::DimMismatch("harmonic mode lives in 2-D".into()));
        }
        let (mut re, mut im) = (z[0].constant_like(1.0), z[0].zero_like());
        for _ in 0..self.n {
            let next_re = re * z[0] - im * z[1];
            im = re * z[1] + im * z[0];
            re = next_re;
        }
        Ok(re)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let r = x[0].hypot(x[1]);
        Ok(r.powi(self.n as i32) * (self.n as f64 * x[1].atan2(x[0])).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn eval_matches_jet_value() {
        let e = (PI * Expr::x(0)).sin() * (Expr::x(1) * Expr::x(1) + Expr::c(1.0)).exp();
        let x = [0.3, -0.4];
        assert_relative_eq!(
            e.eval(&x).unwrap(),
            e.jet(&x, 2).unwrap().value(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn closed_form_lift_examples() {
        let sum = Expr::x(0) + Expr::x(1);
        assert_relative_eq!(sum.eval(&[0.3, 0.4]).unwrap(), 0.7);
        let saddle = Expr::x(0) * Expr::x(0) - Expr::x(1) * Expr::x(1);
        assert_eq!(saddle.eval(&[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(Expr::zero().eval(&[0.1, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn harmonic_mode_is_harmonic() {
        for n in 0..=6 {
            let h = HarmonicMode { n };
            for x in [[0.3, 0.4], [-0.7, 0.2], [0.05, -0.9]] {
                let j = h.jet(&x, 2).unwrap();
                assert!(j.laplacian().unwrap().abs() < 1e-12);
                assert_relative_eq!(j.value(), h.value(&x).unwrap(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn coordinate_out_of_range() {
        assert!(Expr::x(2).eval(&[0.0, 1.0]).is_err());
        assert!(AnalyticField::new(Expr::x(0), 2).jet(&[0.0], 2).is_err());
    }

    #[test]
    fn display_is_readable() {
        let e = Expr::x(0) * Expr::x(0) - Expr::x(1) * Expr::x(1);
        assert_eq!(e.to_string(), "(x0*x0 - x1*x1)");
    }
}
