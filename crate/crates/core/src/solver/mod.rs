//! Resilient states and strategies: dynamic programming where the regime
//! structure allows it, exhaustive strategy search otherwise, and risk
//! minimization over resilient strategies.

mod brute;
mod indicator;
mod kernel;

pub use brute::{brute_force_resilient, recovery_times, ResilienceResult, StrategyClass};
pub use indicator::{resilience_indicator, IndicatorResult};
pub use kernel::{
    robust_recovery_sets, robust_viability_kernel, stochastic_viability_values, KernelTable,
    Solution, ValueTable,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{StateId, SystemModel, Time};
use crate::regime::{RegimeSpec, ScenarioSubset};
use crate::risk::TOLERANCE;
use crate::strategy::{Strategy, DEFAULT_BUDGET};

/// Knobs shared by every solver.
#[derive(Copy, Clone, Debug)]
pub struct SolveOptions {
    pub class: StrategyClass,
    pub budget: u128,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            class: StrategyClass::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

/// The resilient states at one time with a witness strategy for each.
#[derive(Clone, Debug)]
pub struct ResilientSet {
    pub time: Time,
    pub solver: &'static str,
    pub members: Vec<bool>,
    pub witnesses: BTreeMap<usize, Strategy>,
}

impl ResilientSet {
    pub fn states(&self) -> Vec<usize> {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// A method computing resilient state sets.
pub trait ResilienceSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the solver is exact for this regime at `t`.
    fn supports(&self, model: &SystemModel, regime: &RegimeSpec, t: Time) -> Result<bool>;

    fn solve(
        &self,
        model: &SystemModel,
        regime: &RegimeSpec,
        t: Time,
        options: &SolveOptions,
    ) -> Result<ResilientSet>;
}

fn rectangular(model: &SystemModel, scenarios: &ScenarioSubset, t: Time) -> Result<bool> {
    scenarios.is_rectangular(model, t)
}

fn from_kernel(
    solver: &'static str,
    t: Time,
    members: Vec<bool>,
    strategy: Strategy,
) -> ResilientSet {
    let witnesses = members
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(x, _)| (x, strategy.clone()))
        .collect();
    ResilientSet {
        time: t,
        solver,
        members,
        witnesses,
    }
}

/// Backward induction on the robust viability kernel.
#[derive(Debug, Default)]
pub struct RobustKernelSolver;

impl ResilienceSolver for RobustKernelSolver {
    fn name(&self) -> &'static str {
        "robust-kernel"
    }

    fn supports(&self, model: &SystemModel, regime: &RegimeSpec, t: Time) -> Result<bool> {
        match regime {
            RegimeSpec::Bounded { scenarios, .. }
            | RegimeSpec::DeterministicViability { scenarios, .. } => {
                rectangular(model, scenarios, t)
            }
            _ => Ok(false),
        }
    }

    fn solve(
        &self,
        model: &SystemModel,
        regime: &RegimeSpec,
        t: Time,
        _options: &SolveOptions,
    ) -> Result<ResilientSet> {
        let (RegimeSpec::Bounded {
            bound: c,
            scenarios,
        }
        | RegimeSpec::DeterministicViability {
            constraints: c,
            scenarios,
        }) = regime
        else {
            return Err(unsupported(self.name(), regime));
        };
        let closure = scenarios.closure(model, t)?;
        let sol = robust_viability_kernel(model, c, &closure)?;
        Ok(from_kernel(
            self.name(),
            t,
            sol.table.at(t).to_vec(),
            Strategy::Markov(sol.policy),
        ))
    }
}

/// Reach-and-stay induction on the robust recovery sets.
#[derive(Debug, Default)]
pub struct RobustRecoverySolver;

impl ResilienceSolver for RobustRecoverySolver {
    fn name(&self) -> &'static str {
        "robust-recovery"
    }

    fn supports(&self, model: &SystemModel, regime: &RegimeSpec, t: Time) -> Result<bool> {
        match regime {
            RegimeSpec::RobustRecovery { scenarios, .. } => rectangular(model, scenarios, t),
            _ => Ok(false),
        }
    }

    fn solve(
        &self,
        model: &SystemModel,
        regime: &RegimeSpec,
        t: Time,
        _options: &SolveOptions,
    ) -> Result<ResilientSet> {
        let RegimeSpec::RobustRecovery {
            constraints,
            scenarios,
        } = regime
        else {
            return Err(unsupported(self.name(), regime));
        };
        let closure = scenarios.closure(model, t)?;
        let sol = robust_recovery_sets(model, constraints, &closure)?;
        Ok(from_kernel(
            self.name(),
            t,
            sol.table.at(t).to_vec(),
            Strategy::Markov(sol.policy),
        ))
    }
}

/// Success-probability maximization under white noise, thresholded at `beta`.
#[derive(Debug, Default)]
pub struct StochasticDpSolver;

impl ResilienceSolver for StochasticDpSolver {
    fn name(&self) -> &'static str {
        "stochastic-dp"
    }

    fn supports(&self, _model: &SystemModel, regime: &RegimeSpec, _t: Time) -> Result<bool> {
        Ok(matches!(
            regime,
            RegimeSpec::StochasticViability { probability, .. } if probability.is_white_noise()
        ))
    }

    fn solve(
        &self,
        model: &SystemModel,
        regime: &RegimeSpec,
        t: Time,
        _options: &SolveOptions,
    ) -> Result<ResilientSet> {
        let RegimeSpec::StochasticViability {
            constraints,
            probability,
            beta,
        } = regime
        else {
            return Err(unsupported(self.name(), regime));
        };
        regime.check(model)?;
        let sol = stochastic_viability_values(model, constraints, probability, t)?;
        let members = sol.table.at(t).iter().map(|&p| p >= beta - TOLERANCE).collect();
        Ok(from_kernel(self.name(), t, members, Strategy::Markov(sol.policy)))
    }
}

/// Exhaustive search over one strategy class, state by state.
#[derive(Debug)]
pub struct BruteForceSolver {
    class: StrategyClass,
}

impl BruteForceSolver {
    pub fn new(class: StrategyClass) -> Self {
        BruteForceSolver { class }
    }
}

impl ResilienceSolver for BruteForceSolver {
    fn name(&self) -> &'static str {
        match self.class {
            StrategyClass::Markov => "brute-force-markov",
            StrategyClass::Adapted => "brute-force-adapted",
        }
    }

    fn supports(&self, _model: &SystemModel, _regime: &RegimeSpec, _t: Time) -> Result<bool> {
        Ok(true)
    }

    fn solve(
        &self,
        model: &SystemModel,
        regime: &RegimeSpec,
        t: Time,
        options: &SolveOptions,
    ) -> Result<ResilientSet> {
        let mut members = vec![false; model.num_states(t)];
        let mut witnesses = BTreeMap::new();
        for (x, slot) in members.iter_mut().enumerate() {
            let r = brute_force_resilient(
                model,
                regime,
                t,
                StateId::new(x),
                self.class,
                options.budget,
            )?;
            *slot = r.resilient;
            if let Some(w) = r.witness {
                witnesses.insert(x, w);
            }
        }
        Ok(ResilientSet {
            time: t,
            solver: self.name(),
            members,
            witnesses,
        })
    }
}

fn unsupported(solver: &str, regime: &RegimeSpec) -> Error {
    Error::Unsupported(format!(
        "solver `{solver}` does not handle regime `{}` here",
        regime.name()
    ))
}

/// Solvers by name. Automatic selection takes the first exact dynamic
/// programming solver and otherwise brute force in the requested class.
pub struct SolverRegistry {
    solvers: Vec<Box<dyn ResilienceSolver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = SolverRegistry::empty();
        r.register(Box::new(RobustKernelSolver));
        r.register(Box::new(RobustRecoverySolver));
        r.register(Box::new(StochasticDpSolver));
        r.register(Box::new(BruteForceSolver::new(StrategyClass::Markov)));
        r.register(Box::new(BruteForceSolver::new(StrategyClass::Adapted)));
        r
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry {
            solvers: Vec::new(),
        }
    }

    /// Adds a solver, replacing any solver of the same name.
    pub fn register(&mut self, solver: Box<dyn ResilienceSolver>) {
        self.solvers.retain(|s| s.name() != solver.name());
        self.solvers.push(solver);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn ResilienceSolver> {
        self.solvers
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
    }

    /// The named solver, or the automatic choice when `name` is `None` or `"auto"`.
    pub fn select(
        &self,
        model: &SystemModel,
        regime: &RegimeSpec,
        t: Time,
        name: Option<&str>,
        options: &SolveOptions,
    ) -> Result<&dyn ResilienceSolver> {
        match name {
            Some(n) if n != "auto" => {
                let solver = self.get(n).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "unknown solver `{n}` (known: {})",
                        self.names().join(", ")
                    ))
                })?;
                if !solver.supports(model, regime, t)? {
                    return Err(unsupported(n, regime));
                }
                Ok(solver)
            }
            _ => {
                for s in &self.solvers {
                    if s.name().starts_with("brute-force") {
                        continue;
                    }
                    if s.supports(model, regime, t)? {
                        return Ok(s.as_ref());
                    }
                }
                let fallback = match options.class {
                    StrategyClass::Markov => "brute-force-markov",
                    StrategyClass::Adapted => "brute-force-adapted",
                };
                self.get(fallback)
                    .ok_or_else(|| Error::Unsupported(format!("no solver for `{}`", regime.name())))
            }
        }
    }

    pub fn solve(
        &self,
        model: &SystemModel,
        regime: &RegimeSpec,
        t: Time,
        name: Option<&str>,
        options: &SolveOptions,
    ) -> Result<ResilientSet> {
        model.time_offset(t)?;
        regime.check(model)?;
        self.select(model, regime, t, name, options)?
            .solve(model, regime, t, options)
    }
}

/// Resilient states at `t` with witnesses, using the default registry and options.
pub fn resilient_states(model: &SystemModel, regime: &RegimeSpec, t: Time) -> Result<ResilientSet> {
    SolverRegistry::default().solve(model, regime, t, None, &SolveOptions::default())
}
