use std::ops::ControlFlow;

use super::brute::{for_each_candidate, StrategyClass};
use crate::error::{Error, Result};
use crate::model::{StateId, SystemModel, Time};
use crate::regime::{regime_membership, RegimeSpec};
use crate::risk::{extended_risk, ExtendedRiskSpec};
use crate::strategy::Strategy;
use crate::trajectory::Scenario;

/// Minimal extended risk over the resilient strategies from `(t, x)`.
#[derive(Clone, Debug)]
pub struct IndicatorResult {
    pub value: f64,
    pub argmin: Strategy,
    pub examined: u128,
    pub resilient: u128,
    /// Minimal risk over every examined strategy, resilient or not.
    pub unconstrained: f64,
}

/// Minimizes `risk` over the `class` strategies from `(t, x)` whose bundle
/// belongs to `regime`. Ties go to the first strategy in enumeration order.
pub fn resilience_indicator(
    model: &SystemModel,
    regime: &RegimeSpec,
    risk: &ExtendedRiskSpec,
    t: Time,
    x: StateId,
    class: StrategyClass,
    budget: u128,
) -> Result<IndicatorResult> {
    regime.check(model)?;
    risk.check(model)?;
    let mut scenarios: Vec<Scenario> = regime.scope(model, t)?;
    scenarios.extend(risk.scope(model, t)?);
    scenarios.sort();
    scenarios.dedup();

    let mut best: Option<(f64, Strategy)> = None;
    let mut examined = 0u128;
    let mut resilient = 0u128;
    let mut unconstrained = f64::INFINITY;
    for_each_candidate(model, t, x, &scenarios, class, budget, |strategy, b| {
        examined += 1;
        let value = extended_risk(model, risk, &b)?;
        unconstrained = unconstrained.min(value);
        if regime_membership(model, regime, &b)? {
            resilient += 1;
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                best = Some((value, strategy));
            }
        }
        Ok(ControlFlow::Continue(()))
    })?;
    let (value, argmin) = best.ok_or_else(|| Error::NoResilientStrategy {
        state: model.state_label(t, x).to_string(),
        time: t,
    })?;
    Ok(IndicatorResult {
        value,
        argmin,
        examined,
        resilient,
        unconstrained,
    })
}
