//! Truncated multivariate Taylor jets of order <= 3 in dimension <= 3.
//!
//! A jet stores the monomial coefficients of the local Taylor polynomial of
//! a scalar field around a point, graded by degree:
//!
//! ```text
//! [1, x_0 .. x_{d-1}, x_i x_j (i <= j), x_i x_j x_k (i <= j <= k)]
//! ```
//!
//! Each unordered index tuple owns exactly one slot, so `hess(i, j)` and
//! `hess(j, i)` read the same storage, and the same holds for every
//! permutation of a third-order index. Derivatives are recovered by
//! multiplying a coefficient by the factorial of its multi-index.
//!
//! Products are truncated polynomial products. Composition with a
//! univariate function uses Faà di Bruno in the form
//! `f(a) = sum_k f^(k)(a_0) / k! * (a - a_0)^k`, truncated at the jet order,
//! with the derivative table of `f` supplied up to order 4 (the fourth
//! derivative is only consumed by the reverse sweep).

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;
pub const MAX_ORDER: usize = 3;
pub const MAX_COEFFS: usize = 20;

struct Layout {
    /// Storage index by exponent vector, `lookup[e0][e1][e2]`.
    lookup: [[[u8; 4]; 4]; 4],
    /// Number of coefficients up to each order.
    counts: [usize; MAX_ORDER + 1],
    /// `(ia, ib, ic)` with `m_ia * m_ib = m_ic`, per truncation order.
    products: [Vec<(u8, u8, u8)>; MAX_ORDER + 1],
}

impl Layout {
    fn build(dim: usize) -> Self {
        let mut exps = Vec::new();
        let mut counts = [0; MAX_ORDER + 1];
        for (deg, count) in counts.iter_mut().enumerate() {
            match deg {
                0 => exps.push([0; MAX_DIM]),
                1 => {
                    for i in 0..dim {
                        let mut e = [0; MAX_DIM];
                        e[i] += 1;
                        exps.push(e);
                    }
                }
                2 => {
                    for i in 0..dim {
                        for j in i..dim {
                            let mut e = [0; MAX_DIM];
                            e[i] += 1;
                            e[j] += 1;
                            exps.push(e);
                        }
                    }
                }
                _ => {
                    for i in 0..dim {
                        for j in i..dim {
                            for k in j..dim {
                                let mut e = [0; MAX_DIM];
                                e[i] += 1;
                                e[j] += 1;
                                e[k] += 1;
                                exps.push(e);
                            }
                        }
                    }
                }
            }
            *count = exps.len();
        }
        let mut lookup = [[[u8::MAX; 4]; 4]; 4];
        for (idx, e) in exps.iter().enumerate() {
            lookup[e[0] as usize][e[1] as usize][e[2] as usize] = idx as u8;
        }
        let degree = |e: &[u8; MAX_DIM]| e.iter().map(|&v| v as usize).sum::<usize>();
        let products = std::array::from_fn(|order| {
            let mut table = Vec::new();
            for ia in 0..counts[order] {
                for ib in 0..counts[order] {
                    let (ea, eb) = (exps[ia], exps[ib]);
                    if degree(&ea) + degree(&eb) > order {
                        continue;
                    }
                    let ic = lookup[(ea[0] + eb[0]) as usize][(ea[1] + eb[1]) as usize]
                        [(ea[2] + eb[2]) as usize];
                    table.push((ia as u8, ib as u8, ic));
                }
            }
            table
        });
        Layout {
            lookup,
            counts,
            products,
        }
    }

    fn index(&self, e: [u8; MAX_DIM]) -> usize {
        self.lookup[e[0] as usize][e[1] as usize][e[2] as usize] as usize
    }
}

fn layout(dim: usize) -> &'static Layout {
    static LAYOUTS: OnceLock<[Layout; MAX_DIM]> = OnceLock::new();
    &LAYOUTS.get_or_init(|| std::array::from_fn(|d| Layout::build(d + 1)))[dim - 1]
}

/// Number of stored coefficients for a jet of the given shape.
pub fn coeff_count(order: usize, dim: usize) -> usize {
    layout(dim).counts[order]
}

fn check_shape(order: usize, dim: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) && (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedShape { order, dim })
    }
}

fn multi_index(indices: &[usize], dim: usize) -> Result<[u8; MAX_DIM]> {
    let mut e = [0u8; MAX_DIM];
    for &i in indices {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        e[i] += 1;
    }
    Ok(e)
}

fn factorial_weight(e: [u8; MAX_DIM]) -> f64 {
    e.iter()
        .map(|&k| match k {
            0 | 1 => 1.0,
            2 => 2.0,
            _ => 6.0,
        })
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

/// Univariate functions with a built-in derivative table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Tanh,
    Sin,
    Cos,
    Exp,
    Power(f64),
}

impl Elementary {
    /// `[f, f', f'', f''', f'''']` at `x`.
    pub fn derivatives(self, x: f64) -> Result<[f64; 5]> {
        Ok(match self {
            Elementary::Tanh => tanh_derivatives(x),
            Elementary::Sin => {
                let (s, c) = x.sin_cos();
                [s, c, -s, -c, s]
            }
            Elementary::Cos => {
                let (s, c) = x.sin_cos();
                [c, -s, -c, s, c]
            }
            Elementary::Exp => [x.exp(); 5],
            Elementary::Power(p) => {
                let integral = p.fract() == 0.0;
                if !integral && x < 0.0 {
                    return Err(Error::DomainViolation {
                        function: "power with non-integer exponent",
                        value: x,
                    });
                }
                let mut out = [0.0; 5];
                let mut coef = 1.0;
                for (k, slot) in out.iter_mut().enumerate() {
                    let e = p - k as f64;
                    *slot = if coef == 0.0 {
                        0.0
                    } else if integral {
                        coef * x.powi(e as i32)
                    } else {
                        coef * x.powf(e)
                    };
                    coef *= e;
                }
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::DomainViolation {
                        function: "power",
                        value: x,
                    });
                }
                out
            }
        })
    }

    pub fn eval(self, x: f64) -> Result<f64> {
        match self {
            Elementary::Tanh => Ok(x.tanh()),
            Elementary::Sin => Ok(x.sin()),
            Elementary::Cos => Ok(x.cos()),
            Elementary::Exp => Ok(x.exp()),
            Elementary::Power(_) => Ok(self.derivatives(x)?[0]),
        }
    }
}

#[inline]
pub(crate) fn tanh_derivatives(x: f64) -> [f64; 5] {
    let t = x.tanh();
    let d1 = 1.0 - t * t;
    let d2 = -2.0 * t * d1;
    let d3 = -2.0 * (d1 * d1 + t * d2);
    let d4 = -2.0 * (3.0 * d1 * d2 + t * d3);
    [t, d1, d2, d3, d4]
}

/// Truncated Taylor expansion of a scalar field at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorJet {
    order: u8,
    dim: u8,
    coeffs: [f64; MAX_COEFFS],
}

impl TaylorJet {
    pub fn constant(value: f64, order: usize, dim: usize) -> Result<Self> {
        check_shape(order, dim)?;
        let mut coeffs = [0.0; MAX_COEFFS];
        coeffs[0] = value;
        Ok(TaylorJet {
            order: order as u8,
            dim: dim as u8,
            coeffs,
        })
    }

    /// The coordinate jet `x_i` at value `x`.
    pub fn seed_variable(i: usize, x: f64, order: usize, dim: usize) -> Result<Self> {
        let mut jet = Self::constant(x, order, dim)?;
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        jet.coeffs[1 + i] = 1.0;
        Ok(jet)
    }

    /// All coordinate jets of a point, one per axis.
    pub fn seed_point(x: &[f64], order: usize) -> Result<Vec<Self>> {
        (0..x.len())
            .map(|i| Self::seed_variable(i, x[i], order, x.len()))
            .collect()
    }

    /// Jet with zero coefficients sharing this jet's shape.
    pub fn zero_like(&self) -> Self {
        TaylorJet {
            order: self.order,
            dim: self.dim,
            coeffs: [0.0; MAX_COEFFS],
        }
    }

    pub fn constant_like(&self, value: f64) -> Self {
        let mut jet = self.zero_like();
        jet.coeffs[0] = value;
        jet
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        coeff_count(self.order(), self.dim())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Raw monomial coefficients in storage order.
    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..self.len()]
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        let n = self.len();
        &mut self.coeffs[..n]
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn set_value(&mut self, v: f64) {
        self.coeffs[0] = v;
    }

    /// First partial derivative along axis `i`.
    pub fn partial(&self, i: usize) -> f64 {
        assert!(i < self.dim(), "axis {i} out of range");
        self.coeffs[1 + i]
    }

    pub fn grad(&self) -> Vec<f64> {
        self.coeffs[1..=self.dim()].to_vec()
    }

    /// Storage slot and derivative factor for a mixed partial, so that
    /// `d^|alpha| f = factor * coeffs[slot]`.
    pub fn derivative_slot(&self, indices: &[usize]) -> Result<(usize, f64)> {
        if indices.len() > self.order() {
            return Err(Error::InsufficientOrder {
                what: "derivative",
                required: indices.len(),
                actual: self.order(),
            });
        }
        let e = multi_index(indices, self.dim())?;
        Ok((layout(self.dim()).index(e), factorial_weight(e)))
    }

    /// Mixed partial derivative for an arbitrary index tuple of length <= order.
    pub fn derivative(&self, indices: &[usize]) -> Result<f64> {
        let (slot, factor) = self.derivative_slot(indices)?;
        Ok(factor * self.coeffs[slot])
    }

    pub fn set_derivative(&mut self, indices: &[usize], value: f64) -> Result<()> {
        let (slot, factor) = self.derivative_slot(indices)?;
        self.coeffs[slot] = value / factor;
        Ok(())
    }

    /// Second derivative; panics if the jet has order < 2 or an index is out of range.
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.derivative(&[i, j]).expect("hess: order or index")
    }

    /// Third derivative; panics if the jet has order < 3 or an index is out of range.
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.derivative(&[i, j, k]).expect("third: order or index")
    }

    pub fn hessian(&self) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.derivative(&[i, j])).collect())
            .collect()
    }

    pub fn laplacian(&self) -> Result<f64> {
        if self.order() < 2 {
            return Err(Error::InsufficientOrder {
                what: "laplacian",
                required: 2,
                actual: self.order(),
            });
        }
        Ok((0..self.dim()).map(|i| self.hess(i, i)).sum())
    }

    /// Gradient of the Laplacian, `(sum_i d_k d_i d_i f)_k`.
    pub fn grad_laplacian(&self) -> Result<Vec<f64>> {
        if self.order() < 3 {
            return Err(Error::InsufficientOrder {
                what: "grad_laplacian",
                required: 3,
                actual: self.order(),
            });
        }
        let d = self.dim();
        Ok((0..d)
            .map(|k| (0..d).map(|i| self.third(k, i, i)).sum())
            .collect())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::ShapeMismatch {
                a_order: self.order(),
                a_dim: self.dim(),
                b_order: other.order(),
                b_dim: other.dim(),
            });
        }
        Ok(())
    }

    pub fn arith(&self, other: &Self, op: ArithOp) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(match op {
            ArithOp::Add => self.add_unchecked(other),
            ArithOp::Sub => self.sub_unchecked(other),
            ArithOp::Mul => self.mul_unchecked(other),
        })
    }

    fn add_unchecked(&self, other: &Self) -> Self {
        let mut out = *self;
        for (o, b) in out.coeffs_mut().iter_mut().zip(other.coeffs()) {
            *o += b;
        }
        out
    }

    fn sub_unchecked(&self, other: &Self) -> Self {
        let mut out = *self;
        for (o, b) in out.coeffs_mut().iter_mut().zip(other.coeffs()) {
            *o -= b;
        }
        out
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let mut out = self.zero_like();
        for &(ia, ib, ic) in &layout(self.dim()).products[self.order()] {
            out.coeffs[ic as usize] += self.coeffs[ia as usize] * other.coeffs[ib as usize];
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.coeffs_mut().iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = *self;
        out.coeffs[0] += s;
        out
    }

    /// `f(self)` given `[f, f', f'', f''']` (extra entries ignored) at `self.value()`.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        let mut delta = *self;
        delta.coeffs[0] = 0.0;
        let mut out = self.constant_like(derivs[0]);
        let mut power = delta;
        let mut inv_fact = 1.0;
        for (k, &dk) in derivs.iter().enumerate().take(self.order() + 1).skip(1) {
            inv_fact /= k as f64;
            if k > 1 {
                power = power.mul_unchecked(&delta);
            }
            let c = dk * inv_fact;
            for (o, p) in out.coeffs_mut().iter_mut().zip(power.coeffs()) {
                *o += c * p;
            }
        }
        out
    }

    pub fn apply(&self, f: Elementary) -> Result<Self> {
        Ok(self.compose(&f.derivatives(self.value())?))
    }

    pub fn tanh(&self) -> Self {
        self.compose(&tanh_derivatives(self.value()))
    }

    pub fn sin(&self) -> Self {
        self.apply(Elementary::Sin).expect("sin is total")
    }

    pub fn cos(&self) -> Self {
        self.apply(Elementary::Cos).expect("cos is total")
    }

    pub fn exp(&self) -> Self {
        self.apply(Elementary::Exp).expect("exp is total")
    }

    pub fn powf(&self, p: f64) -> Result<Self> {
        self.apply(Elementary::Power(p))
    }

    /// Dot product of coefficient vectors; shapes must agree.
    pub(crate) fn coeff_dot(&self, other: &Self) -> f64 {
        self.coeffs()
            .iter()
            .zip(other.coeffs())
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Reverse sweep of `c = a * b`: accumulates `abar += dc/da^T cbar`, likewise for `b`.
pub(crate) fn mul_adjoint(
    a: &TaylorJet,
    b: &TaylorJet,
    cbar: &TaylorJet,
    abar: Option<&mut TaylorJet>,
    bbar: Option<&mut TaylorJet>,
) {
    let table = &layout(a.dim()).products[a.order()];
    if let Some(abar) = abar {
        for &(ia, ib, ic) in table {
            abar.coeffs[ia as usize] += cbar.coeffs[ic as usize] * b.coeffs[ib as usize];
        }
    }
    if let Some(bbar) = bbar {
        for &(ia, ib, ic) in table {
            bbar.coeffs[ib as usize] += cbar.coeffs[ic as usize] * a.coeffs[ia as usize];
        }
    }
}

/// Reverse sweep of `out = a.compose(derivs)`; `derivs` must hold one more
/// derivative than the jet order. Returns the adjoint of `a`.
pub(crate) fn compose_adjoint(a: &TaylorJet, derivs: &[f64], outbar: &TaylorJet) -> TaylorJet {
    let order = a.order();
    let mut delta = *a;
    delta.coeffs[0] = 0.0;
    // powers[k] = delta^k for k >= 1
    let mut powers = [delta; MAX_ORDER + 1];
    for k in 2..=order {
        powers[k] = powers[k - 1].mul_unchecked(&delta);
    }
    let mut value_bar = outbar.coeffs[0] * derivs[1];
    let mut power_bars = [delta.zero_like(); MAX_ORDER + 1];
    let mut inv_fact = 1.0;
    for k in 1..=order {
        inv_fact /= k as f64;
        // d out / d f^(k) = delta^k / k!, and d f^(k) / d a0 = f^(k+1)
        value_bar += outbar.coeff_dot(&powers[k]) * inv_fact * derivs[k + 1];
        power_bars[k] = outbar.scale(derivs[k] * inv_fact);
    }
    for k in (2..=order).rev() {
        let (head, tail) = power_bars.split_at_mut(k);
        mul_adjoint(
            &powers[k - 1],
            &delta,
            &tail[0],
            Some(&mut head[k - 1]),
            None,
        );
        let pb = tail[0];
        mul_adjoint(&powers[k - 1], &delta, &pb, None, Some(&mut head[1]));
    }
    let mut abar = power_bars[1];
    abar.coeffs[0] = value_bar;
    abar
}

impl Add for TaylorJet {
    type Output = TaylorJet;
    fn add(self, rhs: TaylorJet) -> TaylorJet {
        self.arith(&rhs, ArithOp::Add).expect("jet shapes differ")
    }
}

impl Sub for TaylorJet {
    type Output = TaylorJet;
    fn sub(self, rhs: TaylorJet) -> TaylorJet {
        self.arith(&rhs, ArithOp::Sub).expect("jet shapes differ")
    }
}

impl Mul for TaylorJet {
    type Output = TaylorJet;
    fn mul(self, rhs: TaylorJet) -> TaylorJet {
        self.arith(&rhs, ArithOp::Mul).expect("jet shapes differ")
    }
}

impl Neg for TaylorJet {
    type Output = TaylorJet;
    fn neg(self) -> TaylorJet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn seed_examples() {
        let j = TaylorJet::seed_variable(0, 3.0, 2, 2).unwrap();
        assert_eq!(j.value(), 3.0);
        assert_eq!(j.grad(), vec![1.0, 0.0]);
        assert_eq!(j.hessian().unwrap(), vec![vec![0.0; 2]; 2]);

        let j = TaylorJet::seed_variable(1, -1.5, 3, 2).unwrap();
        assert_eq!(j.value(), -1.5);
        assert_eq!(j.grad(), vec![0.0, 1.0]);
        for (i, j2, k) in [(0, 0, 0), (0, 1, 1), (1, 1, 1), (0, 0, 1)] {
            assert_eq!(j.third(i, j2, k), 0.0);
        }

        let j = TaylorJet::seed_variable(2, 0.0, 1, 3).unwrap();
        assert_eq!(j.grad(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn seed_rejects_bad_index_and_shape() {
        assert!(matches!(
            TaylorJet::seed_variable(2, 0.0, 2, 2),
            Err(Error::IndexOutOfRange { index: 2, dim: 2 })
        ));
        assert!(TaylorJet::seed_variable(0, 0.0, 4, 2).is_err());
        assert!(TaylorJet::seed_variable(0, 0.0, 2, 4).is_err());
        assert!(TaylorJet::seed_variable(0, 0.0, 0, 1).is_err());
    }

    #[test]
    fn product_examples() {
        let x = TaylorJet::seed_variable(0, 3.0, 2, 1).unwrap();
        let sq = x * x;
        assert_eq!((sq.value(), sq.partial(0), sq.hess(0, 0)), (9.0, 6.0, 2.0));

        let x = TaylorJet::seed_variable(0, 1.0, 2, 2).unwrap();
        let y = TaylorJet::seed_variable(1, 2.0, 2, 2).unwrap();
        let p = x * y;
        assert_eq!(p.value(), 2.0);
        assert_eq!(p.grad(), vec![2.0, 1.0]);
        assert_eq!(p.hess(0, 1), 1.0);
        assert_eq!(p.hess(1, 0), 1.0);
        assert_eq!(p.hess(0, 0), 0.0);
        assert_eq!(p.hess(1, 1), 0.0);

        // d^3 (x^2 y) / dx^2 dy = 2
        let x = TaylorJet::seed_variable(0, 1.0, 3, 2).unwrap();
        let y = TaylorJet::seed_variable(1, 1.0, 3, 2).unwrap();
        let p = x * x * y;
        assert_eq!(p.third(0, 0, 1), 2.0);
        assert_eq!(p.third(1, 0, 0), 2.0);
        assert_eq!(p.third(0, 1, 0), 2.0);
        assert_eq!(p.third(0, 0, 0), 0.0);
    }

    #[test]
    fn arith_rejects_mismatched_shapes() {
        let a = TaylorJet::seed_variable(0, 1.0, 2, 2).unwrap();
        let b = TaylorJet::seed_variable(0, 1.0, 3, 2).unwrap();
        let c = TaylorJet::seed_variable(0, 1.0, 2, 3).unwrap();
        assert!(matches!(
            a.arith(&b, ArithOp::Mul),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(a.arith(&c, ArithOp::Add).is_err());
    }

    #[test]
    fn elementary_examples() {
        let x = TaylorJet::seed_variable(0, 0.0, 2, 1).unwrap();
        let t = x.tanh();
        assert_eq!((t.value(), t.partial(0), t.hess(0, 0)), (0.0, 1.0, 0.0));

        let x = TaylorJet::seed_variable(0, 0.0, 3, 1).unwrap();
        let s = x.sin();
        assert_eq!(s.value(), 0.0);
        assert_eq!(s.partial(0), 1.0);
        assert_eq!(s.hess(0, 0), 0.0);
        assert_eq!(s.third(0, 0, 0), -1.0);

        let mut a = TaylorJet::constant(0.0, 2, 1).unwrap();
        a.set_derivative(&[0], 2.0).unwrap();
        let e = a.exp();
        assert_relative_eq!(e.value(), 1.0);
        assert_relative_eq!(e.partial(0), 2.0);
        assert_relative_eq!(e.hess(0, 0), 4.0);
    }

    #[test]
    fn power_domain_errors() {
        let x = TaylorJet::seed_variable(0, -2.0, 2, 1).unwrap();
        assert!(matches!(x.powf(0.5), Err(Error::DomainViolation { .. })));
        let cube = x.powf(3.0).unwrap();
        assert_relative_eq!(cube.value(), -8.0);
        assert_relative_eq!(cube.partial(0), 12.0);
        assert_relative_eq!(cube.hess(0, 0), -12.0);
        let root = TaylorJet::seed_variable(0, 4.0, 2, 1)
            .unwrap()
            .powf(0.5)
            .unwrap();
        assert_relative_eq!(root.value(), 2.0);
        assert_relative_eq!(root.partial(0), 0.25);
        assert_relative_eq!(root.hess(0, 0), -1.0 / 32.0);
    }

    #[test]
    fn laplacian_examples() {
        let x = TaylorJet::seed_variable(0, 0.3, 2, 2).unwrap();
        let y = TaylorJet::seed_variable(1, -0.8, 2, 2).unwrap();
        assert_relative_eq!((x * x + y * y).laplacian().unwrap(), 4.0);

        let x = TaylorJet::seed_variable(0, 0.5, 2, 2).unwrap();
        let y = TaylorJet::seed_variable(1, 0.5, 2, 2).unwrap();
        let u = x.scale(PI).sin() * y.scale(PI).sin();
        assert_relative_eq!(u.laplacian().unwrap(), -2.0 * PI * PI, epsilon = 1e-12);

        let x = TaylorJet::seed_variable(0, 1.0, 3, 1).unwrap();
        assert_eq!((x * x * x).grad_laplacian().unwrap(), vec![6.0]);
    }

    #[test]
    fn laplacian_order_checks() {
        let x = TaylorJet::seed_variable(0, 1.0, 1, 2).unwrap();
        assert!(matches!(
            x.laplacian(),
            Err(Error::InsufficientOrder { required: 2, .. })
        ));
        let x = TaylorJet::seed_variable(0, 1.0, 2, 2).unwrap();
        assert!(x.grad_laplacian().is_err());
        assert!(x.derivative(&[0, 0, 0]).is_err());
    }

    #[test]
    fn symmetric_storage() {
        let x = TaylorJet::seed_variable(0, 0.4, 3, 3).unwrap();
        let y = TaylorJet::seed_variable(1, 0.7, 3, 3).unwrap();
        let z = TaylorJet::seed_variable(2, -0.2, 3, 3).unwrap();
        let f = (x * y * z + x * x * y).sin();
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for p in perms {
            assert_eq!(f.third(p[0], p[1], p[2]), f.third(0, 1, 2));
        }
        assert_eq!(
            f.derivative_slot(&[0, 1]).unwrap(),
            f.derivative_slot(&[1, 0]).unwrap()
        );
        assert_eq!(f.len(), 20);
    }

    #[test]
    fn coefficient_counts() {
        assert_eq!(coeff_count(1, 1), 2);
        assert_eq!(coeff_count(2, 2), 6);
        assert_eq!(coeff_count(3, 2), 10);
        assert_eq!(coeff_count(2, 3), 10);
        assert_eq!(coeff_count(3, 3), 20);
    }

    fn finite_difference_adjoint_check(order: usize) {
        // <outbar, d out / d a . h> == <abar, h> for the tanh composition
        let x = TaylorJet::seed_variable(0, 0.3, order, 2).unwrap();
        let y = TaylorJet::seed_variable(1, -0.6, order, 2).unwrap();
        let a = (x * y + x.scale(0.7)).add_scalar(0.2);
        let mut outbar = a.zero_like();
        for (i, c) in outbar.coeffs_mut().iter_mut().enumerate() {
            *c = 0.3 + 0.1 * i as f64;
        }
        let abar = compose_adjoint(&a, &tanh_derivatives(a.value()), &outbar);
        for slot in 0..a.len() {
            let h = 1e-6;
            let mut ap = a;
            ap.coeffs_mut()[slot] += h;
            let mut am = a;
            am.coeffs_mut()[slot] -= h;
            let fd = (outbar.coeff_dot(&ap.tanh()) - outbar.coeff_dot(&am.tanh())) / (2.0 * h);
            assert_relative_eq!(abar.coeffs()[slot], fd, epsilon = 1e-8, max_relative = 1e-7);
        }
    }

    #[test]
    fn compose_adjoint_matches_finite_differences() {
        for order in 1..=3 {
            finite_difference_adjoint_check(order);
        }
    }
}
