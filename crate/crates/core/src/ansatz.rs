//! Hard-constrained trial functions `v = L * u_theta + G`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Field};
use crate::geometry::{Domain, Lift};
use crate::jets::{TaylorJet, MAX_ORDER};
use crate::network::{ForwardCache, NetworkParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzMode {
    /// `v = L u + G`, boundary values built in.
    ExactBc,
    /// `v = u`, boundary values left to a penalty.
    Unconstrained,
    /// `v = u0(x) + t L(x) u(t, x)`, initial and zero boundary values built in.
    ParabolicExact,
}

/// A trial field that declares how it treats boundary data.
pub trait TrialField: Field {
    fn mode(&self) -> AnsatzMode;
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzSpec {
    pub params: NetworkParams,
    pub domain: Domain,
    /// `G` for exact_bc mode; the spatial initial datum `u0` for parabolic mode.
    pub lift: Lift,
    pub mode: AnsatzMode,
}

/// The θ-independent pieces of `v = factor * u + offset` at one point.
#[derive(Clone, Debug)]
pub struct Prefactors {
    pub inputs: Vec<TaylorJet>,
    pub factor: Option<TaylorJet>,
    pub offset: Option<TaylorJet>,
}

impl Prefactors {
    pub fn combine(&self, u: &TaylorJet) -> TaylorJet {
        let mut v = match &self.factor {
            Some(l) => *l * *u,
            None => *u,
        };
        if let Some(g) = &self.offset {
            v = v + *g;
        }
        v
    }
}

impl AnsatzSpec {
    pub fn new(
        params: NetworkParams,
        domain: Domain,
        lift: Lift,
        mode: AnsatzMode,
    ) -> Result<Self> {
        if params.input_dim() != domain.dim() {
            return Err(Error::DimMismatch(format!(
                "network input width {} but domain {} has {} coordinates",
                params.input_dim(),
                domain,
                domain.dim()
            )));
        }
        match (mode, domain.is_spacetime()) {
            (AnsatzMode::ParabolicExact, false) => {
                return Err(Error::ModeMismatch(
                    "parabolic_exact mode needs a space-time domain".into(),
                ))
            }
            (AnsatzMode::ExactBc | AnsatzMode::Unconstrained, true) => {
                return Err(Error::ModeMismatch(format!(
                    "{mode:?} mode needs a spatial domain"
                )))
            }
            _ => {}
        }
        if let Lift::Expr(e) = &lift {
            let limit = match mode {
                AnsatzMode::ParabolicExact => domain.spatial_dim(),
                _ => domain.dim(),
            };
            if e.max_coord().is_some_and(|i| i >= limit) {
                return Err(Error::DimMismatch(format!(
                    "lift {e} references coordinates beyond {limit}"
                )));
            }
        }
        Ok(AnsatzSpec {
            params,
            domain,
            lift,
            mode,
        })
    }

    pub fn with_params(&self, params: NetworkParams) -> Result<Self> {
        AnsatzSpec::new(params, self.domain.clone(), self.lift.clone(), self.mode)
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        let mut params = self.params.clone();
        params.set_flat(flat)?;
        Ok(AnsatzSpec {
            params,
            ..self.clone()
        })
    }

    /// Affine map of the bounding box onto `[-1, 1]^d`, applied to jets.
    fn scaled_inputs(&self, coords: &[TaylorJet]) -> Vec<TaylorJet> {
        let (lo, hi) = self.domain.bounding_box();
        coords
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let s = 2.0 / (hi[i] - lo[i]);
                c.add_scalar(-0.5 * (lo[i] + hi[i])).scale(s)
            })
            .collect()
    }

    pub fn prefactors(&self, x: &[f64], order: usize) -> Result<Prefactors> {
        if order > MAX_ORDER {
            return Err(Error::UnsupportedShape {
                order,
                dim: x.len(),
            });
        }
        if x.len() != self.domain.dim() {
            return Err(Error::DimMismatch(format!(
                "ansatz expects {} coordinates, got {}",
                self.domain.dim(),
                x.len()
            )));
        }
        if !self.domain.contains_closure(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        let coords = TaylorJet::seed_point(x, order)?;
        let inputs = self.scaled_inputs(&coords);
        let (factor, offset) = match self.mode {
            AnsatzMode::Unconstrained => (None, None),
            AnsatzMode::ExactBc => {
                let g = match &self.lift {
                    Lift::Zero => None,
                    lift => Some(lift.jet_with(&coords)?),
                };
                (Some(self.domain.distance_factor_jet(&coords)), g)
            }
            AnsatzMode::ParabolicExact => {
                let u0 = match &self.lift {
                    Lift::Zero => None,
                    lift => Some(lift.jet_with(&coords[1..])?),
                };
                (Some(self.domain.distance_factor_jet(&coords)), u0)
            }
        };
        Ok(Prefactors {
            inputs,
            factor,
            offset,
        })
    }

    /// Jet of the trial function at `x`.
    pub fn eval(&self, x: &[f64], order: usize) -> Result<TaylorJet> {
        let pre = self.prefactors(x, order)?;
        let u = self.params.forward(&pre.inputs, None)?;
        Ok(pre.combine(&u))
    }

    /// Like [`eval`](Self::eval) but keeps the network cache for a reverse sweep.
    pub(crate) fn eval_cached(
        &self,
        pre: &Prefactors,
        cache: &mut ForwardCache,
    ) -> Result<(TaylorJet, TaylorJet)> {
        let u = self.params.forward(&pre.inputs, Some(cache))?;
        Ok((u, pre.combine(&u)))
    }

    pub fn initial_datum(&self) -> Option<Expr> {
        match (&self.mode, &self.lift) {
            (AnsatzMode::ParabolicExact, l) => Some(l.expr()),
            _ => None,
        }
    }
}

impl Field for AnsatzSpec {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn jet(&self, x: &[f64], order: usize) -> Result<TaylorJet> {
        self.eval(x, order)
    }
}

impl TrialField for AnsatzSpec {
    fn mode(&self) -> AnsatzMode {
        self.mode
    }
}

/// A closed-form trial function, e.g. a manufactured solution substituted
/// in place of the network.
#[derive(Clone, Debug)]
pub struct AnalyticTrial<F> {
    pub field: F,
    pub mode: AnsatzMode,
}

impl<F: Field> Field for AnalyticTrial<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn jet(&self, x: &[f64], order: usize) -> Result<TaylorJet> {
        self.field.jet(x, order)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.field.value(x)
    }
}

impl<F: Field> TrialField for AnalyticTrial<F> {
    fn mode(&self) -> AnsatzMode {
        self.mode
    }
}
