//! Quadrature-discretised residual losses and their parameter gradients.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzMode, AnsatzSpec, Prefactors, TrialField};
use crate::error::{Error, Result};
use crate::jets::mul_adjoint;
use crate::network::ForwardCache;
use crate::problems::{PdeProblem, ProblemKind, Stencil};
use crate::quadrature::{build_rule, KahanSum, QuadratureRule, Target};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// `||Δv + f||^2_{L2(Ω)}`
    Interior,
    /// interior residual plus `τ ||v - g||^2_{L2(∂Ω)}`
    Penalty,
    /// `||Δv + f||^2_{H1(Ω)}`
    SobolevK1,
    /// `||d_t v - Δv - f||^2_{L2(I, L2(Ω))}`
    Parabolic,
}

impl LossVariant {
    pub const ALL: [LossVariant; 4] = [
        LossVariant::Interior,
        LossVariant::Penalty,
        LossVariant::SobolevK1,
        LossVariant::Parabolic,
    ];

    pub fn jet_order(self) -> usize {
        match self {
            LossVariant::SobolevK1 => 3,
            _ => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossVariant::Interior => "interior",
            LossVariant::Penalty => "penalty",
            LossVariant::SobolevK1 => "sobolev_k1",
            LossVariant::Parabolic => "parabolic",
        }
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    pub variant: LossVariant,
    /// Boundary penalty weight; present iff the variant is `Penalty`.
    pub tau: Option<f64>,
    /// Interior rule (space-time rule for the parabolic variant).
    pub interior: QuadratureRule,
    pub boundary: Option<QuadratureRule>,
}

impl LossConfig {
    /// Builds the rules the variant needs on `domain` with `n` points per axis.
    pub fn new(
        variant: LossVariant,
        domain: &crate::geometry::Domain,
        n: usize,
        tau: Option<f64>,
    ) -> Result<Self> {
        let target = if variant == LossVariant::Parabolic {
            Target::SpaceTime
        } else {
            Target::Interior
        };
        let interior = build_rule(domain, target, n)?;
        let boundary = match variant {
            LossVariant::Penalty => Some(build_rule(domain, Target::Boundary, n)?),
            _ => None,
        };
        LossConfig::from_rules(variant, tau, interior, boundary)
    }

    pub fn from_rules(
        variant: LossVariant,
        tau: Option<f64>,
        interior: QuadratureRule,
        boundary: Option<QuadratureRule>,
    ) -> Result<Self> {
        match (variant, tau) {
            (LossVariant::Penalty, Some(t)) if t > 0.0 && t.is_finite() => {}
            (LossVariant::Penalty, t) => {
                return Err(Error::InvalidArgument(format!(
                    "penalty loss needs a positive tau, got {t:?}"
                )))
            }
            (_, Some(_)) => {
                return Err(Error::InvalidArgument(format!(
                    "tau is only meaningful for the penalty loss, not {variant}"
                )))
            }
            _ => {}
        }
        if boundary
            .as_ref()
            .is_some_and(|b| b.target != Target::Boundary)
        {
            return Err(Error::InvalidArgument(
                "boundary rule has the wrong target".into(),
            ));
        }
        Ok(LossConfig {
            variant,
            tau,
            interior,
            boundary,
        })
    }
}

#[derive(Clone, Debug)]
struct Node {
    x: Vec<f64>,
    weight: f64,
    stencils: Vec<Stencil>,
}

#[derive(Clone, Debug)]
struct Group {
    nodes: Vec<Node>,
    order: usize,
    /// Multiplier applied to the whole group (τ for the boundary penalty).
    scale: f64,
}

/// Loss value split into its interior and boundary contributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub interior: f64,
    /// Unweighted `||v - g||^2` on the boundary; zero without a boundary term.
    pub boundary: f64,
    pub total: f64,
}

/// Residual stencils at every quadrature node of a loss.
#[derive(Clone, Debug)]
pub struct Objective {
    variant: LossVariant,
    groups: Vec<Group>,
}

fn required_mode(variant: LossVariant, mode: AnsatzMode) -> Result<()> {
    let ok = match variant {
        LossVariant::Interior | LossVariant::SobolevK1 => mode == AnsatzMode::ExactBc,
        LossVariant::Penalty => mode != AnsatzMode::ParabolicExact,
        LossVariant::Parabolic => mode == AnsatzMode::ParabolicExact,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::ModeMismatch(format!(
            "{variant} loss cannot be evaluated for a {mode:?} trial function"
        )))
    }
}

impl Objective {
    pub fn new(problem: &PdeProblem, cfg: &LossConfig) -> Result<Self> {
        let kind_ok = match cfg.variant {
            LossVariant::Interior | LossVariant::Penalty => {
                matches!(
                    problem.kind,
                    ProblemKind::Poisson | ProblemKind::EllipticDivA
                )
            }
            LossVariant::SobolevK1 => problem.kind == ProblemKind::Poisson,
            LossVariant::Parabolic => problem.kind == ProblemKind::Heat,
        };
        if !kind_ok {
            return Err(Error::ModeMismatch(format!(
                "{} loss does not apply to {:?} problem {}",
                cfg.variant, problem.kind, problem.id
            )));
        }
        let order = cfg.variant.jet_order();
        let nodes = cfg
            .interior
            .iter()
            .map(|(x, w)| {
                let mut stencils = vec![problem.residual_stencil(x, order)?];
                if cfg.variant == LossVariant::SobolevK1 {
                    stencils.extend(problem.grad_residual_stencils(x)?);
                }
                Ok(Node {
                    x: x.to_vec(),
                    weight: w,
                    stencils,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut groups = vec![Group {
            nodes,
            order,
            scale: 1.0,
        }];
        if cfg.variant == LossVariant::Penalty {
            let rule = cfg
                .boundary
                .as_ref()
                .ok_or(Error::MissingRule("boundary"))?;
            let tau = cfg.tau.expect("validated in LossConfig");
            let nodes = rule
                .iter()
                .map(|(x, w)| {
                    let mut weights = crate::jets::TaylorJet::constant(0.0, 1, x.len())?;
                    weights.set_value(1.0);
                    Ok(Node {
                        x: x.to_vec(),
                        weight: w,
                        stencils: vec![Stencil {
                            weights,
                            source: -problem.boundary.eval(x)?,
                        }],
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(Group {
                nodes,
                order: 1,
                scale: tau,
            });
        }
        Ok(Objective {
            variant: cfg.variant,
            groups,
        })
    }

    pub fn variant(&self) -> LossVariant {
        self.variant
    }

    /// Evaluates the loss of an arbitrary trial function.
    pub fn evaluate(&self, field: &dyn TrialField) -> Result<LossBreakdown> {
        required_mode(self.variant, field.mode())?;
        let sums = self
            .groups
            .iter()
            .map(|g| {
                let terms: Vec<f64> = g
                    .nodes
                    .par_iter()
                    .map(|node| {
                        let v = field.jet(&node.x, g.order)?;
                        let sq: f64 = node.stencils.iter().map(|s| s.apply(&v).powi(2)).sum();
                        if !sq.is_finite() {
                            return Err(Error::NonFinite {
                                node: node.x.clone(),
                                value: sq,
                            });
                        }
                        Ok(node.weight * sq)
                    })
                    .collect::<Result<_>>()?;
                let mut acc = KahanSum::default();
                terms.into_iter().for_each(|t| acc.add(t));
                Ok(acc.total())
            })
            .collect::<Result<Vec<f64>>>()?;
        let interior = sums[0];
        let boundary = sums.get(1).copied().unwrap_or(0.0);
        let scale = self.groups.get(1).map_or(0.0, |g| g.scale);
        Ok(LossBreakdown {
            interior,
            boundary,
            total: interior + scale * boundary,
        })
    }
}

/// `||Δv + f||^2` (or `||div(A∇v) + f||^2`) for an exact-boundary trial function.
pub fn interior_loss(
    field: &dyn TrialField,
    problem: &PdeProblem,
    cfg: &LossConfig,
) -> Result<f64> {
    let cfg = LossConfig::from_rules(LossVariant::Interior, None, cfg.interior.clone(), None)?;
    Ok(Objective::new(problem, &cfg)?.evaluate(field)?.total)
}

pub fn penalty_loss(field: &dyn TrialField, problem: &PdeProblem, cfg: &LossConfig) -> Result<f64> {
    let boundary = cfg.boundary.clone().ok_or(Error::MissingRule("boundary"))?;
    let cfg = LossConfig::from_rules(
        LossVariant::Penalty,
        cfg.tau,
        cfg.interior.clone(),
        Some(boundary),
    )?;
    Ok(Objective::new(problem, &cfg)?.evaluate(field)?.total)
}

pub fn sobolev_loss(field: &dyn TrialField, problem: &PdeProblem, cfg: &LossConfig) -> Result<f64> {
    let cfg = LossConfig::from_rules(LossVariant::SobolevK1, None, cfg.interior.clone(), None)?;
    Ok(Objective::new(problem, &cfg)?.evaluate(field)?.total)
}

pub fn parabolic_loss(
    field: &dyn TrialField,
    problem: &PdeProblem,
    cfg: &LossConfig,
) -> Result<f64> {
    let cfg = LossConfig::from_rules(LossVariant::Parabolic, None, cfg.interior.clone(), None)?;
    Ok(Objective::new(problem, &cfg)?.evaluate(field)?.total)
}

/// Loss selected by `cfg.variant`.
pub fn loss(field: &dyn TrialField, problem: &PdeProblem, cfg: &LossConfig) -> Result<f64> {
    Ok(Objective::new(problem, cfg)?.evaluate(field)?.total)
}

/// Nodes processed per parallel work item; fixed so the reduction order
/// does not depend on the thread count.
const CHUNK: usize = 32;

/// An [`Objective`] bound to a network ansatz, with θ-independent
/// prefactors cached per node for repeated value and gradient evaluation.
#[derive(Clone, Debug)]
pub struct NetworkObjective {
    objective: Objective,
    spec: AnsatzSpec,
    /// `(group, node, prefactors)` in evaluation order.
    items: Vec<(usize, usize, Prefactors)>,
}

impl NetworkObjective {
    pub fn new(spec: &AnsatzSpec, problem: &PdeProblem, cfg: &LossConfig) -> Result<Self> {
        let objective = Objective::new(problem, cfg)?;
        required_mode(objective.variant, spec.mode)?;
        let mut items = Vec::new();
        for (gi, g) in objective.groups.iter().enumerate() {
            for (ni, node) in g.nodes.iter().enumerate() {
                items.push((gi, ni, spec.prefactors(&node.x, g.order)?));
            }
        }
        Ok(NetworkObjective {
            objective,
            spec: spec.clone(),
            items,
        })
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.spec.params.len()
    }

    pub fn value(&self, flat: &[f64]) -> Result<f64> {
        Ok(self.run(flat, false)?.0)
    }

    /// Loss and its exact gradient with respect to the flat parameter vector.
    pub fn value_and_grad(&self, flat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (value, grad) = self.run(flat, true)?;
        if let Some((index, &value)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index, value });
        }
        Ok((value, grad))
    }

    fn run(&self, flat: &[f64], with_grad: bool) -> Result<(f64, Vec<f64>)> {
        let spec = self.spec.with_flat(flat)?;
        let n_params = flat.len();
        let partials: Vec<(KahanSum, Vec<f64>)> = self
            .items
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = KahanSum::default();
                let mut grad = if with_grad {
                    vec![0.0; n_params]
                } else {
                    Vec::new()
                };
                let mut cache = ForwardCache::default();
                for (gi, ni, pre) in chunk {
                    let group = &self.objective.groups[*gi];
                    let node = &group.nodes[*ni];
                    let (u, v) = spec.eval_cached(pre, &mut cache)?;
                    let w = node.weight * group.scale;
                    let mut vbar = v.zero_like();
                    let mut sq = 0.0;
                    for s in &node.stencils {
                        let r = s.apply(&v);
                        sq += r * r;
                        if with_grad {
                            let c = 2.0 * w * r;
                            for (vb, sw) in vbar.coeffs_mut().iter_mut().zip(s.weights.coeffs()) {
                                *vb += c * sw;
                            }
                        }
                    }
                    let contribution = w * sq;
                    if !contribution.is_finite() {
                        return Err(Error::NonFinite {
                            node: node.x.clone(),
                            value: contribution,
                        });
                    }
                    acc.add(contribution);
                    if with_grad {
                        let ubar = match &pre.factor {
                            Some(l) => {
                                let mut ubar = u.zero_like();
                                mul_adjoint(l, &u, &vbar, None, Some(&mut ubar));
                                ubar
                            }
                            None => vbar,
                        };
                        spec.params.backward(&cache, &ubar, &mut grad);
                    }
                }
                Ok((acc, grad))
            })
            .collect::<Result<_>>()?;
        let mut total = KahanSum::default();
        let mut grad = if with_grad {
            vec![0.0; n_params]
        } else {
            Vec::new()
        };
        for (acc, g) in &partials {
            total.add(acc.total());
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok((total.total(), grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::AnalyticTrial;
    use crate::expr::{AnalyticField, Expr, HarmonicMode};
    use crate::geometry::Lift;
    use crate::network::NetworkParams;
    use crate::problems::ProblemId;
    use crate::quadrature::build_rule_with;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn zero_trial(dim: usize, mode: AnsatzMode) -> AnalyticTrial<AnalyticField> {
        AnalyticTrial {
            field: AnalyticField::zero(dim),
            mode,
        }
    }

    #[test]
    fn interior_loss_examples() {
        let p1 = ProblemId::P1.problem();
        let cfg = LossConfig::new(LossVariant::Interior, &p1.domain, 24, None).unwrap();
        let exact = AnalyticTrial {
            field: p1.exact_field().unwrap(),
            mode: AnsatzMode::ExactBc,
        };
        assert!(interior_loss(&exact, &p1, &cfg).unwrap() < 1e-20);
        let z = interior_loss(&zero_trial(2, AnsatzMode::ExactBc), &p1, &cfg).unwrap();
        assert_relative_eq!(z, PI.powi(4), max_relative = 1e-12);

        let p2 = ProblemId::P2.problem();
        let cfg = LossConfig::new(LossVariant::Interior, &p2.domain, 8, None).unwrap();
        let z = interior_loss(&zero_trial(2, AnsatzMode::ExactBc), &p2, &cfg).unwrap();
        assert_relative_eq!(z, PI, max_relative = 1e-12);
    }

    #[test]
    fn interior_loss_rejects_unconstrained() {
        let p1 = ProblemId::P1.problem();
        let cfg = LossConfig::new(LossVariant::Interior, &p1.domain, 4, None).unwrap();
        assert!(matches!(
            interior_loss(&zero_trial(2, AnsatzMode::Unconstrained), &p1, &cfg),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn penalty_loss_examples() {
        // v = 1 with tau = 2 on a zero-rhs copy of P1: only the boundary term survives
        let mut p = ProblemId::P1.problem();
        p.rhs = Expr::zero();
        let cfg = LossConfig::new(LossVariant::Penalty, &p.domain, 8, Some(2.0)).unwrap();
        let one = AnalyticTrial {
            field: AnalyticField::new(Expr::c(1.0), 2),
            mode: AnsatzMode::Unconstrained,
        };
        assert_relative_eq!(
            penalty_loss(&one, &p, &cfg).unwrap(),
            8.0,
            max_relative = 1e-14
        );

        // harmonic mode, f = g = 0 on the unit disk: loss = tau * pi for every n
        let mut disk = ProblemId::P2.problem();
        disk.rhs = Expr::zero();
        for n in [1, 4, 9] {
            let interior = build_rule_with(
                &disk.domain,
                Target::Interior,
                n as usize + 4,
                4 * (n as usize + 4),
            )
            .unwrap();
            let boundary =
                build_rule_with(&disk.domain, Target::Boundary, 2, 4 * (n as usize + 4)).unwrap();
            let cfg =
                LossConfig::from_rules(LossVariant::Penalty, Some(1.0), interior, Some(boundary))
                    .unwrap();
            let u = AnalyticTrial {
                field: HarmonicMode { n },
                mode: AnsatzMode::Unconstrained,
            };
            assert_relative_eq!(
                penalty_loss(&u, &disk, &cfg).unwrap(),
                PI,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn penalty_needs_tau_and_boundary_rule() {
        let p = ProblemId::P1.problem();
        assert!(LossConfig::new(LossVariant::Penalty, &p.domain, 4, None).is_err());
        assert!(LossConfig::new(LossVariant::Penalty, &p.domain, 4, Some(0.0)).is_err());
        assert!(LossConfig::new(LossVariant::Interior, &p.domain, 4, Some(1.0)).is_err());
        let cfg = LossConfig::new(LossVariant::Interior, &p.domain, 4, None).unwrap();
        assert!(matches!(
            penalty_loss(&zero_trial(2, AnsatzMode::Unconstrained), &p, &cfg),
            Err(Error::MissingRule(_))
        ));
    }

    #[test]
    fn penalty_is_affine_in_tau() {
        let p = ProblemId::P1.problem();
        let params = NetworkParams::xavier(&[2, 6, 1], 3).unwrap();
        let spec = AnsatzSpec::new(
            params,
            p.domain.clone(),
            Lift::Zero,
            AnsatzMode::Unconstrained,
        )
        .unwrap();
        let l = |tau: f64| {
            let cfg = LossConfig::new(LossVariant::Penalty, &p.domain, 8, Some(tau)).unwrap();
            Objective::new(&p, &cfg).unwrap().evaluate(&spec).unwrap()
        };
        let (a, b) = (l(1.0), l(3.0));
        assert!(a.boundary > 0.0);
        assert_relative_eq!(b.total - a.total, 2.0 * a.boundary, max_relative = 1e-12);
    }

    #[test]
    fn sobolev_loss_examples() {
        let p1 = ProblemId::P1.problem();
        let cfg = LossConfig::new(LossVariant::SobolevK1, &p1.domain, 24, None).unwrap();
        let z = sobolev_loss(&zero_trial(2, AnsatzMode::ExactBc), &p1, &cfg).unwrap();
        assert_relative_eq!(z, PI.powi(4) + 2.0 * PI.powi(6), max_relative = 1e-12);
        let exact = AnalyticTrial {
            field: p1.exact_field().unwrap(),
            mode: AnsatzMode::ExactBc,
        };
        assert!(sobolev_loss(&exact, &p1, &cfg).unwrap() < 1e-20);
        let p3 = ProblemId::P3.problem();
        assert!(sobolev_loss(&exact, &p3, &cfg).is_err());
    }

    #[test]
    fn parabolic_loss_examples() {
        let p4 = ProblemId::P4.problem();
        let cfg = LossConfig::new(LossVariant::Parabolic, &p4.domain, 16, None).unwrap();
        // v(t, x) = u0(x), written in space-time coordinates
        let shifted = (PI * Expr::x(1)).sin() * (PI * Expr::x(2)).sin();
        let v = AnalyticTrial {
            field: AnalyticField::new(shifted, 3),
            mode: AnsatzMode::ParabolicExact,
        };
        assert_relative_eq!(
            parabolic_loss(&v, &p4, &cfg).unwrap(),
            0.2 * PI.powi(4),
            max_relative = 1e-10
        );
        let exact = AnalyticTrial {
            field: p4.exact_field().unwrap(),
            mode: AnsatzMode::ParabolicExact,
        };
        assert!(parabolic_loss(&exact, &p4, &cfg).unwrap() < 1e-20);
        assert!(parabolic_loss(&exact, &ProblemId::P1.problem(), &cfg).is_err());
    }

    #[test]
    fn network_path_matches_generic_path() {
        let p = ProblemId::P3.problem();
        let params = NetworkParams::xavier(&[2, 7, 5, 1], 21).unwrap();
        let spec =
            AnsatzSpec::new(params, p.domain.clone(), Lift::Zero, AnsatzMode::ExactBc).unwrap();
        let cfg = LossConfig::new(LossVariant::Interior, &p.domain, 9, None).unwrap();
        let obj = NetworkObjective::new(&spec, &p, &cfg).unwrap();
        let fast = obj.value(spec.params.as_flat()).unwrap();
        let slow = interior_loss(&spec, &p, &cfg).unwrap();
        assert_relative_eq!(fast, slow, max_relative = 1e-13);
    }
}
