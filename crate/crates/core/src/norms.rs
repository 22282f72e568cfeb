//! Sobolev norms of differences of jet-evaluable fields, by quadrature.

use crate::error::{Error, Result};
use crate::expr::Field;
use crate::jets::TaylorJet;
use crate::quadrature::{integrate, integrate_n, QuadratureRule, Target};

/// Squared L² norms of the derivative blocks of a field difference.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SobolevParts {
    /// `||e||^2`
    pub l2: f64,
    /// `||grad e||^2`
    pub grad: f64,
    /// `||D^2 e||^2` with the full Frobenius norm (mixed entries counted twice).
    pub hess: f64,
}

impl SobolevParts {
    pub fn norm(&self, s: usize) -> f64 {
        let mut sq = self.l2;
        if s >= 1 {
            sq += self.grad;
        }
        if s >= 2 {
            sq += self.hess;
        }
        sq.sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm(0)
    }

    pub fn h1_norm(&self) -> f64 {
        self.norm(1)
    }

    pub fn h2_norm(&self) -> f64 {
        self.norm(2)
    }

    /// `sqrt(||e||_{L2} ||e||_{H1})`.
    pub fn h_half_surrogate(&self) -> f64 {
        (self.l2_norm() * self.h1_norm()).sqrt()
    }
}

fn check_dims(v: &dyn Field, reference: &dyn Field) -> Result<()> {
    if v.dim() != reference.dim() {
        return Err(Error::DimMismatch(format!(
            "fields have {} and {} coordinates",
            v.dim(),
            reference.dim()
        )));
    }
    Ok(())
}

fn difference(v: &dyn Field, reference: &dyn Field, x: &[f64], order: usize) -> Result<TaylorJet> {
    Ok(v.jet(x, order)? - reference.jet(x, order)?)
}

fn square_sums(e: &TaylorJet, axes: std::ops::Range<usize>, s: usize) -> (f64, f64) {
    let grad = axes.clone().map(|i| e.partial(i).powi(2)).sum();
    let hess = if s >= 2 {
        axes.clone()
            .flat_map(|i| axes.clone().map(move |j| (i, j)))
            .map(|(i, j)| e.hess(i, j).powi(2))
            .sum()
    } else {
        0.0
    };
    (grad, hess)
}

/// Squared block norms of `v - reference` up to derivative order `s` (0, 1 or 2).
pub fn sobolev_parts(
    v: &dyn Field,
    reference: &dyn Field,
    s: usize,
    rule: &QuadratureRule,
) -> Result<SobolevParts> {
    if s > 2 {
        return Err(Error::InvalidArgument(format!(
            "Sobolev order {s} not in 0..=2"
        )));
    }
    check_dims(v, reference)?;
    let order = s.max(1);
    let dim = v.dim();
    let [l2, grad, hess] = integrate_n(rule, |x| {
        let e = difference(v, reference, x, order)?;
        let (g, h) = square_sums(&e, 0..dim, s);
        Ok([e.value().powi(2), if s >= 1 { g } else { 0.0 }, h])
    })?;
    Ok(SobolevParts { l2, grad, hess })
}

/// `||v - reference||_{H^s}`, s in {0, 1, 2}.
pub fn sobolev_error(
    v: &dyn Field,
    reference: &dyn Field,
    s: usize,
    rule: &QuadratureRule,
) -> Result<f64> {
    Ok(sobolev_parts(v, reference, s, rule)?.norm(s))
}

/// Interpolation surrogate `sqrt(||e||_{L2} ||e||_{H1})` for the H^{1/2} norm.
pub fn h_half_surrogate(
    v: &dyn Field,
    reference: &dyn Field,
    rule: &QuadratureRule,
) -> Result<f64> {
    Ok(sobolev_parts(v, reference, 1, rule)?.h_half_surrogate())
}

/// `||grad (Delta v - Delta reference)||_{L2}`; needs order-3 jets.
pub fn grad_laplacian_error(
    v: &dyn Field,
    reference: &dyn Field,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_dims(v, reference)?;
    let sq = integrate(rule, |x| {
        let e = difference(v, reference, x, 3)?;
        Ok(e.grad_laplacian()?.iter().map(|g| g * g).sum())
    })?;
    Ok(sq.sqrt())
}

/// `||v - g||_{L2(rule)}` for a boundary rule.
pub fn boundary_misfit(v: &dyn Field, g: &dyn Field, rule: &QuadratureRule) -> Result<f64> {
    if rule.target != Target::Boundary {
        return Err(Error::InvalidArgument(
            "boundary misfit needs a boundary rule".into(),
        ));
    }
    Ok(integrate(rule, |x| Ok((v.value(x)? - g.value(x)?).powi(2)))?.sqrt())
}

/// Parabolic solution norm of `v - reference` on a space-time rule:
/// `||d_t e||_{L2(I,L2)} + ||e||_{L2(I,H2)}`, time being coordinate 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XNorm {
    pub dt_part: f64,
    pub h2_part: f64,
}

impl XNorm {
    pub fn total(&self) -> f64 {
        self.dt_part + self.h2_part
    }
}

pub fn x_norm_error(v: &dyn Field, reference: &dyn Field, rule: &QuadratureRule) -> Result<XNorm> {
    if rule.target != Target::SpaceTime {
        return Err(Error::InvalidArgument(
            "X-norm needs a space-time rule".into(),
        ));
    }
    check_dims(v, reference)?;
    let dim = v.dim();
    let [dt_sq, h2_sq] = integrate_n(rule, |x| {
        let e = difference(v, reference, x, 2)?;
        let (g, h) = square_sums(&e, 1..dim, 2);
        Ok([e.partial(0).powi(2), e.value().powi(2) + g + h])
    })?;
    Ok(XNorm {
        dt_part: dt_sq.sqrt(),
        h2_part: h2_sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{AnalyticField, Expr, HarmonicMode};
    use crate::geometry::Domain;
    use crate::quadrature::{build_rule, build_rule_with};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sin_sin() -> AnalyticField {
        AnalyticField::new((PI * Expr::x(0)).sin() * (PI * Expr::x(1)).sin(), 2)
    }

    #[test]
    fn identical_fields_have_zero_error() {
        let rule = build_rule(&Domain::unit_square(), Target::Interior, 8).unwrap();
        let u = sin_sin();
        assert_eq!(sobolev_error(&u, &u, 2, &rule).unwrap(), 0.0);
        assert_eq!(h_half_surrogate(&u, &u, &rule).unwrap(), 0.0);
    }

    #[test]
    fn sin_sin_h2_norm() {
        let rule = build_rule(&Domain::unit_square(), Target::Interior, 24).unwrap();
        let p = sobolev_parts(&sin_sin(), &AnalyticField::zero(2), 2, &rule).unwrap();
        assert_relative_eq!(p.l2, 0.25, max_relative = 1e-12);
        assert_relative_eq!(p.grad, PI * PI / 2.0, max_relative = 1e-12);
        assert_relative_eq!(p.hess, PI.powi(4), max_relative = 1e-12);
        assert_relative_eq!(
            p.h2_norm(),
            (0.25 + PI * PI / 2.0 + PI.powi(4)).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(p.h2_norm(), 10.1289, epsilon = 5e-5);
    }

    #[test]
    fn harmonic_mode_h1_norm() {
        let rule = build_rule_with(&Domain::unit_disk(), Target::Interior, 12, 48).unwrap();
        let e = sobolev_error(&HarmonicMode { n: 4 }, &AnalyticField::zero(2), 1, &rule).unwrap();
        assert_relative_eq!(e, (PI / 10.0 + 4.0 * PI).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn surrogate_examples() {
        let rule = build_rule_with(&Domain::unit_disk(), Target::Interior, 20, 80).unwrap();
        let s = h_half_surrogate(&HarmonicMode { n: 16 }, &AnalyticField::zero(2), &rule).unwrap();
        let l2 = PI / 34.0;
        let closed = (l2 * (l2 + 16.0 * PI)).powf(0.25);
        assert_relative_eq!(s, closed, max_relative = 1e-10);
        assert_relative_eq!(s, 1.468705, epsilon = 1e-6);
    }

    #[test]
    fn monotone_in_order_and_surrogate_sandwich() {
        let rule = build_rule(&Domain::unit_square(), Target::Interior, 10).unwrap();
        let v = AnalyticField::new(Expr::x(0).exp() * Expr::x(1), 2);
        let r = AnalyticField::new(Expr::x(0) * Expr::x(1) * Expr::x(1), 2);
        let e0 = sobolev_error(&v, &r, 0, &rule).unwrap();
        let e1 = sobolev_error(&v, &r, 1, &rule).unwrap();
        let e2 = sobolev_error(&v, &r, 2, &rule).unwrap();
        assert!(e0 <= e1 && e1 <= e2);
        let s = h_half_surrogate(&v, &r, &rule).unwrap();
        assert!(e0 <= s && s <= e1);
    }

    #[test]
    fn order_out_of_range() {
        let rule = build_rule(&Domain::unit_square(), Target::Interior, 3).unwrap();
        assert!(sobolev_error(&sin_sin(), &sin_sin(), 3, &rule).is_err());
        let one_d = AnalyticField::zero(1);
        assert!(sobolev_error(&sin_sin(), &one_d, 1, &rule).is_err());
    }

    #[test]
    fn x_norm_of_heat_mode() {
        let st = Domain::spacetime(0.2, Domain::unit_square()).unwrap();
        let rule = build_rule(&st, Target::SpaceTime, 16).unwrap();
        let k = 2.0 * PI * PI;
        let u = AnalyticField::new(
            (-k * Expr::x(0)).exp() * (PI * Expr::x(1)).sin() * (PI * Expr::x(2)).sin(),
            3,
        );
        let x = x_norm_error(&u, &AnalyticField::zero(3), &rule).unwrap();
        // int_0^T e^{-2kt} dt
        let time = (1.0 - (-2.0 * k * 0.2f64).exp()) / (2.0 * k);
        assert_relative_eq!(x.dt_part, (k * k * 0.25 * time).sqrt(), max_relative = 1e-9);
        let spatial = 0.25 + PI * PI / 2.0 + PI.powi(4);
        assert_relative_eq!(x.h2_part, (spatial * time).sqrt(), max_relative = 1e-9);
    }
}
