//! Deterministic tensor-product quadrature on the supported domains.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Interior,
    Boundary,
    SpaceTime,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Target::Interior => "interior",
            Target::Boundary => "boundary",
            Target::SpaceTime => "spacetime",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Per-axis polynomial degree integrated exactly (radial degree on disks).
    pub exactness_degree: usize,
    pub target: Target,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        kahan_sum(self.weights.iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.nodes
            .iter()
            .map(Vec::as_slice)
            .zip(self.weights.iter().copied())
    }
}

/// Neumaier's compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::default();
    values.into_iter().for_each(|v| acc.add(v));
    acc.total()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_interval(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

fn unsupported(domain: &Domain, target: Target) -> Error {
    Error::UnsupportedTarget {
        target: target.to_string(),
        domain: domain.to_string(),
    }
}

/// Rule with `n` points per axis; disks use `4n` angular nodes.
pub fn build_rule(domain: &Domain, target: Target, n: usize) -> Result<QuadratureRule> {
    build_rule_with(domain, target, n, 4 * n)
}

/// As [`build_rule`], with an explicit angular node count for disks and circles.
pub fn build_rule_with(
    domain: &Domain,
    target: Target,
    n: usize,
    n_angular: usize,
) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature needs n >= 2, got {n}"
        )));
    }
    let degree = 2 * n - 1;
    let (nodes, weights) = match (domain, target) {
        (Domain::Interval { a, b }, Target::Interior) => {
            let (x, w) = gauss_interval(*a, *b, n);
            (x.into_iter().map(|v| vec![v]).collect(), w)
        }
        (Domain::Interval { a, b }, Target::Boundary) => (vec![vec![*a], vec![*b]], vec![1.0, 1.0]),
        (Domain::Rectangle { lo, hi }, Target::Interior) => {
            let (x, wx) = gauss_interval(lo[0], hi[0], n);
            let (y, wy) = gauss_interval(lo[1], hi[1], n);
            let mut nodes = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    nodes.push(vec![x[i], y[j]]);
                    weights.push(wx[i] * wy[j]);
                }
            }
            (nodes, weights)
        }
        (Domain::Rectangle { lo, hi }, Target::Boundary) => {
            let (x, wx) = gauss_interval(lo[0], hi[0], n);
            let (y, wy) = gauss_interval(lo[1], hi[1], n);
            let mut nodes = Vec::with_capacity(4 * n);
            let mut weights = Vec::with_capacity(4 * n);
            for (xi, wi) in x.iter().zip(&wx) {
                nodes.push(vec![*xi, lo[1]]);
                weights.push(*wi);
            }
            for (yi, wi) in y.iter().zip(&wy) {
                nodes.push(vec![hi[0], *yi]);
                weights.push(*wi);
            }
            for (xi, wi) in x.iter().zip(&wx).rev() {
                nodes.push(vec![*xi, hi[1]]);
                weights.push(*wi);
            }
            for (yi, wi) in y.iter().zip(&wy).rev() {
                nodes.push(vec![lo[0], *yi]);
                weights.push(*wi);
            }
            (nodes, weights)
        }
        (Domain::Disk { center, radius }, Target::Interior) => {
            if n_angular < 1 {
                return Err(Error::InvalidArgument(
                    "need at least one angular node".into(),
                ));
            }
            let (r, wr) = gauss_interval(0.0, *radius, n);
            let dphi = 2.0 * PI / n_angular as f64;
            let mut nodes = Vec::with_capacity(n * n_angular);
            let mut weights = Vec::with_capacity(n * n_angular);
            for (ri, wi) in r.iter().zip(&wr) {
                for k in 0..n_angular {
                    let (s, c) = (k as f64 * dphi).sin_cos();
                    nodes.push(vec![center[0] + ri * c, center[1] + ri * s]);
                    weights.push(wi * ri * dphi);
                }
            }
            (nodes, weights)
        }
        (Domain::Disk { center, radius }, Target::Boundary) => {
            if n_angular < 1 {
                return Err(Error::InvalidArgument(
                    "need at least one angular node".into(),
                ));
            }
            let dphi = 2.0 * PI / n_angular as f64;
            let nodes = (0..n_angular)
                .map(|k| {
                    let (s, c) = (k as f64 * dphi).sin_cos();
                    vec![center[0] + radius * c, center[1] + radius * s]
                })
                .collect();
            (nodes, vec![radius * dphi; n_angular])
        }
        (Domain::SpaceTime { t_end, spatial }, Target::SpaceTime) => {
            let inner = build_rule_with(spatial, Target::Interior, n, n_angular)?;
            let (t, wt) = gauss_interval(0.0, *t_end, n);
            let mut nodes = Vec::with_capacity(n * inner.len());
            let mut weights = Vec::with_capacity(n * inner.len());
            for (ti, wti) in t.iter().zip(&wt) {
                for (x, w) in inner.iter() {
                    let mut p = Vec::with_capacity(1 + x.len());
                    p.push(*ti);
                    p.extend_from_slice(x);
                    nodes.push(p);
                    weights.push(wti * w);
                }
            }
            (nodes, weights)
        }
        _ => return Err(unsupported(domain, target)),
    };
    Ok(QuadratureRule {
        nodes,
        weights,
        exactness_degree: degree,
        target,
    })
}

/// `sum_i w_i f(x_i)`; node evaluations may run in parallel, the reduction
/// always runs sequentially in node order.
pub fn integrate<F>(rule: &QuadratureRule, field: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let values: Vec<f64> = rule
        .nodes
        .par_iter()
        .map(|x| {
            let v = field(x)?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    node: x.clone(),
                    value: v,
                });
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(kahan_sum(
        values.iter().zip(&rule.weights).map(|(v, w)| v * w),
    ))
}

/// Integrates `N` quantities sharing one evaluation per node.
pub fn integrate_n<const N: usize, F>(rule: &QuadratureRule, field: F) -> Result<[f64; N]>
where
    F: Fn(&[f64]) -> Result<[f64; N]> + Sync,
{
    let values: Vec<[f64; N]> = rule
        .nodes
        .par_iter()
        .map(|x| {
            let v = field(x)?;
            if let Some(bad) = v.iter().find(|c| !c.is_finite()) {
                return Err(Error::NonFinite {
                    node: x.clone(),
                    value: *bad,
                });
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let mut acc = [KahanSum::default(); N];
    for (v, w) in values.iter().zip(&rule.weights) {
        for (a, c) in acc.iter_mut().zip(v) {
            a.add(c * w);
        }
    }
    Ok(acc.map(|a| a.total()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_exactness_interval() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let rule = build_rule(&d, Target::Interior, 5).unwrap();
        assert_eq!(rule.exactness_degree, 9);
        let v = integrate(&rule, |x| Ok(x[0].powi(9))).unwrap();
        assert_relative_eq!(v, 0.1, max_relative = 1e-14);
    }

    #[test]
    fn gauss_rules_are_exact_to_degree() {
        for n in [2, 3, 7, 16, 24, 40, 65] {
            let rule =
                build_rule(&Domain::interval(-1.0, 2.0).unwrap(), Target::Interior, n).unwrap();
            for k in 0..=(2 * n - 1) {
                let exact =
                    (2f64.powi(k as i32 + 1) - (-1f64).powi(k as i32 + 1)) / (k as f64 + 1.0);
                let got = integrate(&rule, |x| Ok(x[0].powi(k as i32))).unwrap();
                assert!(
                    (got - exact).abs() <= 1e-13 * exact.abs().max(1.0),
                    "n={n} k={k}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn weights_sum_to_measure() {
        let domains = [
            Domain::unit_square(),
            Domain::unit_disk(),
            Domain::rectangle([-1.0, 0.5], [2.0, 0.75]).unwrap(),
            Domain::disk([0.3, 0.1], 2.5).unwrap(),
            Domain::interval(-3.0, 4.0).unwrap(),
        ];
        for d in &domains {
            let rule = build_rule(d, Target::Interior, 5).unwrap();
            assert_relative_eq!(rule.total_weight(), d.measure(), max_relative = 1e-12);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let b = build_rule(d, Target::Boundary, 5).unwrap();
            assert_relative_eq!(b.total_weight(), d.boundary_measure(), max_relative = 1e-12);
        }
        let st = Domain::spacetime(0.2, Domain::unit_square()).unwrap();
        let rule = build_rule(&st, Target::SpaceTime, 6).unwrap();
        assert_relative_eq!(rule.total_weight(), 0.2, max_relative = 1e-12);
        assert_eq!(rule.len(), 216);
    }

    #[test]
    fn unsupported_pairs() {
        let st = Domain::spacetime(0.2, Domain::unit_square()).unwrap();
        assert!(build_rule(&st, Target::Interior, 4).is_err());
        assert!(build_rule(&st, Target::Boundary, 4).is_err());
        assert!(build_rule(&Domain::unit_square(), Target::SpaceTime, 4).is_err());
        assert!(build_rule(&Domain::unit_square(), Target::Interior, 1).is_err());
    }

    #[test]
    fn circle_trigonometric_exactness() {
        let rule = build_rule(&Domain::unit_disk(), Target::Boundary, 4).unwrap();
        assert_eq!(rule.len(), 16);
        let v = integrate(&rule, |x| Ok((4.0 * x[1].atan2(x[0])).cos().powi(2))).unwrap();
        assert_relative_eq!(v, PI, max_relative = 1e-14);
    }

    #[test]
    fn integrate_examples() {
        let disk = build_rule(&Domain::unit_disk(), Target::Interior, 8).unwrap();
        assert_relative_eq!(
            integrate(&disk, |_| Ok(1.0)).unwrap(),
            PI,
            max_relative = 1e-12
        );
        // r^2 cos^2(phi) = x^2
        assert_relative_eq!(
            integrate(&disk, |x| Ok(x[0] * x[0])).unwrap(),
            PI / 4.0,
            max_relative = 1e-12
        );
        let sq = build_rule(&Domain::unit_square(), Target::Interior, 24).unwrap();
        let v = integrate(&sq, |x| Ok(((PI * x[0]).sin() * (PI * x[1]).sin()).powi(2))).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn non_finite_reports_node() {
        let rule = build_rule(&Domain::interval(0.0, 1.0).unwrap(), Target::Interior, 3).unwrap();
        let err = integrate(&rule, |x| Ok(if x[0] > 0.6 { f64::NAN } else { 1.0 })).unwrap_err();
        match err {
            Error::NonFinite { node, .. } => assert!(node[0] > 0.6),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn compensated_sum() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(kahan_sum(vals), 2.0);
    }
}
