use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use super::{cvar, expectation, worst_case, DiscreteRandomVariable};
use crate::error::{Error, Result};
use crate::model::{SystemModel, Time};
use crate::regime::{AmbiguitySet, ProbabilityModel, ScenarioSubset};
use crate::trajectory::Scenario;

/// A risk measure `F` mapping a random cost on scenarios to a real number;
/// lower is better.
pub trait RiskMeasure: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn check(&self, model: &SystemModel) -> Result<()>;

    /// Tail scenarios from `t` whose cost the measure reads.
    fn scope(&self, model: &SystemModel, t: Time) -> Result<Vec<Scenario>>;

    /// Evaluates the measure on per-scenario costs covering [`RiskMeasure::scope`].
    fn evaluate(
        &self,
        model: &SystemModel,
        t: Time,
        costs: &BTreeMap<Scenario, f64>,
    ) -> Result<f64>;

    /// Evaluates the measure on a plain distribution.
    fn apply(&self, z: &DiscreteRandomVariable) -> Result<f64>;
}

/// Shared handle on a boxed [`RiskMeasure`].
#[derive(Clone, Debug)]
pub struct RiskMeasureSpec(Arc<dyn RiskMeasure>);

impl RiskMeasureSpec {
    pub fn new(measure: impl RiskMeasure + 'static) -> Self {
        RiskMeasureSpec(Arc::new(measure))
    }

    pub fn from_arc(measure: Arc<dyn RiskMeasure>) -> Self {
        RiskMeasureSpec(measure)
    }
}

impl std::ops::Deref for RiskMeasureSpec {
    type Target = dyn RiskMeasure;

    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

fn distribution(
    model: &SystemModel,
    law: &ProbabilityModel,
    t: Time,
    costs: &BTreeMap<Scenario, f64>,
) -> Result<DiscreteRandomVariable> {
    let atoms = law
        .support(model, t)?
        .into_iter()
        .map(|(s, w)| {
            costs
                .get(&s)
                .map(|&c| (c, w))
                .ok_or_else(|| Error::MissingScenario(format!("{:?}", s.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteRandomVariable::new(atoms)
}

fn support_scenarios(model: &SystemModel, law: &ProbabilityModel, t: Time) -> Result<Vec<Scenario>> {
    Ok(law.support(model, t)?.into_iter().map(|(s, _)| s).collect())
}

/// Mathematical expectation under one probability model.
#[derive(Clone, Debug)]
pub struct Expectation {
    pub law: ProbabilityModel,
}

impl RiskMeasure for Expectation {
    fn name(&self) -> &'static str {
        "expectation"
    }

    fn check(&self, model: &SystemModel) -> Result<()> {
        self.law.check(model)
    }

    fn scope(&self, model: &SystemModel, t: Time) -> Result<Vec<Scenario>> {
        support_scenarios(model, &self.law, t)
    }

    fn evaluate(&self, model: &SystemModel, t: Time, costs: &BTreeMap<Scenario, f64>) -> Result<f64> {
        Ok(expectation(&distribution(model, &self.law, t, costs)?))
    }

    fn apply(&self, z: &DiscreteRandomVariable) -> Result<f64> {
        Ok(expectation(z))
    }
}

/// Supremum of the cost over a scenario subset.
#[derive(Clone, Debug)]
pub struct WorstCase {
    pub scenarios: ScenarioSubset,
}

impl RiskMeasure for WorstCase {
    fn name(&self) -> &'static str {
        "worst_case"
    }

    fn check(&self, model: &SystemModel) -> Result<()> {
        self.scenarios.resolve(model, model.t0()).map(|_| ())
    }

    fn scope(&self, model: &SystemModel, t: Time) -> Result<Vec<Scenario>> {
        self.scenarios.resolve(model, t)
    }

    fn evaluate(&self, model: &SystemModel, t: Time, costs: &BTreeMap<Scenario, f64>) -> Result<f64> {
        self.scope(model, t)?
            .iter()
            .map(|s| {
                costs
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::MissingScenario(format!("{:?}", s.0)))
            })
            .try_fold(f64::NEG_INFINITY, |acc, c| Ok(acc.max(c?)))
    }

    fn apply(&self, z: &DiscreteRandomVariable) -> Result<f64> {
        Ok(worst_case(z))
    }
}

/// Conditional value-at-risk at confidence `beta ∈ [0, 1)`.
#[derive(Clone, Debug)]
pub struct Cvar {
    pub law: ProbabilityModel,
    pub beta: f64,
}

impl RiskMeasure for Cvar {
    fn name(&self) -> &'static str {
        "cvar"
    }

    fn check(&self, model: &SystemModel) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "CVaR level {} outside [0, 1)",
                self.beta
            )));
        }
        self.law.check(model)
    }

    fn scope(&self, model: &SystemModel, t: Time) -> Result<Vec<Scenario>> {
        support_scenarios(model, &self.law, t)
    }

    fn evaluate(&self, model: &SystemModel, t: Time, costs: &BTreeMap<Scenario, f64>) -> Result<f64> {
        cvar(&distribution(model, &self.law, t, costs)?, self.beta)
    }

    fn apply(&self, z: &DiscreteRandomVariable) -> Result<f64> {
        cvar(z, self.beta)
    }
}

/// Law-free measure applied under each member of an ambiguity set.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum InnerMeasure {
    Expectation,
    Cvar { beta: f64 },
    /// Worst case over the support of each law.
    WorstCase,
}

impl InnerMeasure {
    fn apply(&self, z: &DiscreteRandomVariable) -> Result<f64> {
        match *self {
            InnerMeasure::Expectation => Ok(expectation(z)),
            InnerMeasure::Cvar { beta } => cvar(z, beta),
            InnerMeasure::WorstCase => Ok(worst_case(z)),
        }
    }
}

/// `sup_{P ∈ 𝒫} F_P[Z]`.
#[derive(Clone, Debug)]
pub struct AmbiguitySup {
    pub laws: AmbiguitySet,
    pub inner: InnerMeasure,
}

impl RiskMeasure for AmbiguitySup {
    fn name(&self) -> &'static str {
        "ambiguity_sup"
    }

    fn check(&self, model: &SystemModel) -> Result<()> {
        if let InnerMeasure::Cvar { beta } = self.inner {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidParameter(format!("CVaR level {beta} outside [0, 1)")));
            }
        }
        self.laws.models().iter().try_for_each(|p| p.check(model))
    }

    fn scope(&self, model: &SystemModel, t: Time) -> Result<Vec<Scenario>> {
        let mut all = BTreeSet::new();
        for law in self.laws.models() {
            all.extend(support_scenarios(model, law, t)?);
        }
        Ok(all.into_iter().collect())
    }

    fn evaluate(&self, model: &SystemModel, t: Time, costs: &BTreeMap<Scenario, f64>) -> Result<f64> {
        self.laws
            .models()
            .iter()
            .map(|law| self.inner.apply(&distribution(model, law, t, costs)?))
            .try_fold(f64::NEG_INFINITY, |acc, v| Ok(acc.max(v?)))
    }

    fn apply(&self, _z: &DiscreteRandomVariable) -> Result<f64> {
        Err(Error::Unsupported(
            "an ambiguity supremum needs scenario-indexed costs, not a single law".into(),
        ))
    }
}
