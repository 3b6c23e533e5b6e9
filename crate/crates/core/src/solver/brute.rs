use std::collections::BTreeMap;
use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{StateId, SystemModel, Time};
use crate::regime::{recovery_time, regime_membership, ConstraintMap, RecoveryTime, RegimeSpec};
use crate::strategy::{enumerate_markov, for_each_adapted, Strategy};
use crate::trajectory::{bundle, PathBundle, Scenario};

/// Strategy family searched by the exhaustive solvers.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum StrategyClass {
    Markov,
    #[default]
    Adapted,
}

impl fmt::Display for StrategyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyClass::Markov => "markov",
            StrategyClass::Adapted => "adapted",
        })
    }
}

impl FromStr for StrategyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markov" => Ok(StrategyClass::Markov),
            "adapted" => Ok(StrategyClass::Adapted),
            other => Err(Error::InvalidParameter(format!(
                "unknown strategy class `{other}` (expected markov or adapted)"
            ))),
        }
    }
}

/// Outcome of a resilience check from one `(t, x)`.
#[derive(Clone, Debug)]
pub struct ResilienceResult {
    pub time: Time,
    pub state: StateId,
    pub resilient: bool,
    pub witness: Option<Strategy>,
    /// Per-scenario recovery times of the witness against the regime's constraints.
    pub recovery_times: BTreeMap<Scenario, RecoveryTime>,
    /// Strategies examined before stopping.
    pub examined: u128,
}

/// Recovery time of every bundle entry.
pub fn recovery_times(
    constraints: &ConstraintMap,
    bundle: &PathBundle,
) -> BTreeMap<Scenario, RecoveryTime> {
    bundle
        .entries
        .iter()
        .map(|(s, e)| {
            (
                s.clone(),
                recovery_time(&e.states, &e.controls, constraints, bundle.start),
            )
        })
        .collect()
}

/// Visits every candidate strategy of `class` from `(t, x)` together with its
/// bundle over `scenarios`, in enumeration order.
pub(crate) fn for_each_candidate<F>(
    model: &SystemModel,
    t: Time,
    x: StateId,
    scenarios: &[Scenario],
    class: StrategyClass,
    budget: u128,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(Strategy, PathBundle) -> Result<ControlFlow<()>>,
{
    model.time_offset(t)?;
    match class {
        StrategyClass::Markov => {
            let reach = model.reachable_sets(t, x);
            for policy in enumerate_markov(model, t, model.t_final(), Some(&reach), budget)? {
                let strategy = Strategy::Markov(policy);
                let b = bundle(model, &strategy, t, x, scenarios)?;
                if visit(strategy, b)?.is_break() {
                    break;
                }
            }
            Ok(())
        }
        StrategyClass::Adapted => for_each_adapted(model, t, x, scenarios, budget, |policy| {
            let strategy = Strategy::Adapted(policy.clone());
            let b = bundle(model, &strategy, t, x, scenarios)?;
            visit(strategy, b)
        }),
    }
}

/// Searches `class` strategies from `(t, x)` for one whose closed-loop bundle
/// over the regime's scenarios belongs to the regime. The first one in
/// enumeration order is returned.
pub fn brute_force_resilient(
    model: &SystemModel,
    regime: &RegimeSpec,
    t: Time,
    x: StateId,
    class: StrategyClass,
    budget: u128,
) -> Result<ResilienceResult> {
    regime.check(model)?;
    let scenarios = regime.scope(model, t)?;
    let mut result = ResilienceResult {
        time: t,
        state: x,
        resilient: false,
        witness: None,
        recovery_times: BTreeMap::new(),
        examined: 0,
    };
    for_each_candidate(model, t, x, &scenarios, class, budget, |strategy, b| {
        result.examined += 1;
        if regime_membership(model, regime, &b)? {
            if let Some(c) = regime.constraints() {
                result.recovery_times = recovery_times(c, &b);
            }
            result.resilient = true;
            result.witness = Some(strategy);
            return Ok(ControlFlow::Break(()));
        }
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{stock3, stock3_acceptable};
    use crate::regime::{ControlPredicate, ProbabilityModel, ScenarioSubset};
    use crate::model::Label;

    fn k(m: &SystemModel) -> ConstraintMap {
        ConstraintMap::from_labels(m, &stock3_acceptable()).unwrap()
    }

    #[test]
    fn robust_recovery_from_two() {
        let m = stock3();
        let regime = RegimeSpec::RobustRecovery {
            constraints: k(&m),
            scenarios: ScenarioSubset::All,
        };
        for class in [StrategyClass::Markov, StrategyClass::Adapted] {
            let r = brute_force_resilient(&m, &regime, 0, StateId::new(2), class, 1_000).unwrap();
            assert!(r.resilient);
            assert_eq!(r.recovery_times.len(), 8);
            assert!(r.recovery_times.values().all(|t| t.is_finite()));
            let r = brute_force_resilient(&m, &regime, 0, StateId::new(1), class, 1_000).unwrap();
            assert!(!r.resilient);
            assert!(r.witness.is_none());
        }
    }

    #[test]
    fn stochastic_from_one_is_not_resilient() {
        let m = stock3();
        let regime = RegimeSpec::StochasticViability {
            constraints: k(&m),
            probability: ProbabilityModel::stationary_white_noise(&m, vec![0.5, 0.5]).unwrap(),
            beta: 0.5,
        };
        let r = brute_force_resilient(&m, &regime, 0, StateId::new(1), StrategyClass::Adapted, 10_000)
            .unwrap();
        assert!(!r.resilient);
    }

    #[test]
    fn zero_control_predicate_holds_everywhere() {
        let m = stock3();
        let regime = RegimeSpec::ControlPredicate {
            predicate: ControlPredicate::any_of_labels(&m, &[Label::from(0)]).unwrap(),
            scenarios: ScenarioSubset::All,
        };
        for x in 0..4 {
            let r = brute_force_resilient(&m, &regime, 0, StateId::new(x), StrategyClass::Markov, 10_000)
                .unwrap();
            assert!(r.resilient, "x = {x}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let m = stock3();
        let regime = RegimeSpec::RobustRecovery {
            constraints: k(&m),
            scenarios: ScenarioSubset::All,
        };
        let err = brute_force_resilient(&m, &regime, 0, StateId::new(3), StrategyClass::Adapted, 3)
            .unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { count: 128, budget: 3 }));
    }
}
