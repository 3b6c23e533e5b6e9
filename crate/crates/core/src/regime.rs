//! Recovery regimes: sets of acceptable state-control processes starting
//! at a given time, and exact membership tests on path bundles.
//!
//! Convention: a path that visits the cemetery belongs to no regime.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ControlConstraints, Label, StateId, SystemModel, Time};
use crate::risk::{extended_risk, CompensatedSum, ExtendedRiskSpec, TOLERANCE};
use crate::trajectory::{ControlPath, PathBundle, Scenario, StatePath};

/// Acceptable states per time and, optionally, allowed controls per epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMap {
    t0: Time,
    acceptable: Vec<Vec<bool>>,
    controls: Option<ControlConstraints>,
}

impl ConstraintMap {
    /// `acceptable` holds one membership mask per time of the model grid.
    pub fn new(
        model: &SystemModel,
        acceptable: Vec<Vec<bool>>,
        controls: Option<ControlConstraints>,
    ) -> Result<Self> {
        if acceptable.len() != model.grid().num_times() {
            return Err(Error::InvalidParameter(format!(
                "acceptable sets needed for {} times, got {}",
                model.grid().num_times(),
                acceptable.len()
            )));
        }
        for (t, mask) in model.grid().times().zip(&acceptable) {
            if mask.len() != model.num_states(t) {
                return Err(Error::InvalidParameter(format!(
                    "acceptable mask at time {t} has {} entries for {} states",
                    mask.len(),
                    model.num_states(t)
                )));
            }
        }
        Ok(ConstraintMap {
            t0: model.t0(),
            acceptable,
            controls,
        })
    }

    /// The same acceptable labels at every time, no control constraints.
    pub fn from_labels(model: &SystemModel, labels: &[Label]) -> Result<Self> {
        let mut acceptable = Vec::new();
        for t in model.grid().times() {
            let mut mask = vec![false; model.num_states(t)];
            for l in labels {
                let x = model.state_id(t, l)?;
                let i = x.get().ok_or_else(|| {
                    Error::CrossReference("the cemetery cannot be acceptable".into())
                })?;
                mask[i] = true;
            }
            acceptable.push(mask);
        }
        ConstraintMap::new(model, acceptable, None)
    }

    /// Every state acceptable, every control allowed.
    pub fn everything(model: &SystemModel) -> Self {
        let acceptable = model
            .grid()
            .times()
            .map(|t| vec![true; model.num_states(t)])
            .collect();
        ConstraintMap {
            t0: model.t0(),
            acceptable,
            controls: None,
        }
    }

    pub fn with_controls(mut self, controls: ControlConstraints) -> Self {
        self.controls = Some(controls);
        self
    }

    pub fn controls(&self) -> Option<&ControlConstraints> {
        self.controls.as_ref()
    }

    pub fn acceptable_at(&self, t: Time) -> &[bool] {
        &self.acceptable[(t - self.t0) as usize]
    }

    pub fn set_acceptable(&mut self, t: Time, mask: Vec<bool>) {
        let i = (t - self.t0) as usize;
        assert_eq!(mask.len(), self.acceptable[i].len());
        self.acceptable[i] = mask;
    }

    pub fn accepts_state(&self, t: Time, x: StateId) -> bool {
        x.get()
            .and_then(|i| self.acceptable.get((t - self.t0) as usize)?.get(i).copied())
            .unwrap_or(false)
    }

    /// `None` stands for "no decision" (cemetery) and is never accepted.
    pub fn accepts_control(&self, t: Time, x: StateId, u: Option<usize>) -> bool {
        let Some(u) = u else { return false };
        match &self.controls {
            None => !x.is_cemetery(),
            Some(c) => c.allows((t - self.t0) as usize, x, u),
        }
    }

    /// Controls allowed at `(t, x)` among `0..num_controls`.
    pub fn allowed_controls(&self, t: Time, x: usize, num_controls: usize) -> Vec<usize> {
        match &self.controls {
            None => (0..num_controls).collect(),
            Some(c) => c.allowed_controls((t - self.t0) as usize, x, num_controls),
        }
    }

    fn violated_at(&self, states: &StatePath, controls: &ControlPath, s: Time) -> bool {
        let Some(x) = states.at(s) else { return false };
        if !self.accepts_state(s, x) {
            return true;
        }
        let k = (s - controls.start) as usize;
        k < controls.len() && !self.accepts_control(s, x, controls.controls[k])
    }
}

/// True iff `x_s ∈ K_s` for every `s >= from` and `u_s` is allowed in `x_s`
/// for every epoch `s >= from`. Paths touching the cemetery never satisfy.
pub fn path_satisfies(
    constraints: &ConstraintMap,
    states: &StatePath,
    controls: &ControlPath,
    from: Time,
) -> bool {
    if states.visits_cemetery() {
        return false;
    }
    states
        .times()
        .filter(|&(s, _)| s >= from)
        .all(|(s, _)| !constraints.violated_at(states, controls, s))
}

/// First time from which the constraints hold forever, or never.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecoveryTime {
    At(Time),
    Never,
}

impl RecoveryTime {
    pub fn is_finite(self) -> bool {
        matches!(self, RecoveryTime::At(_))
    }
}

impl fmt::Display for RecoveryTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecoveryTime::At(t) => write!(f, "{t}"),
            RecoveryTime::Never => f.write_str("inf"),
        }
    }
}

/// Smallest `r >= t` with `path_satisfies(.., from = r)`, `Never` if none.
pub fn recovery_time(
    states: &StatePath,
    controls: &ControlPath,
    constraints: &ConstraintMap,
    t: Time,
) -> RecoveryTime {
    if states.visits_cemetery() || states.is_empty() {
        return RecoveryTime::Never;
    }
    let end = states.start + states.len() as Time - 1;
    let last_violation = (t..=end)
        .rev()
        .find(|&s| constraints.violated_at(states, controls, s));
    match last_violation {
        None => RecoveryTime::At(t.max(states.start)),
        Some(s) if s < end => RecoveryTime::At(s + 1),
        Some(_) => RecoveryTime::Never,
    }
}

/// Number of times `s >= t` at which the state or control constraint fails.
/// The cemetery counts as a failure at every index it occupies.
pub fn exit_count(
    states: &StatePath,
    controls: &ControlPath,
    constraints: &ConstraintMap,
    t: Time,
) -> usize {
    states
        .times()
        .filter(|&(s, _)| s >= t)
        .filter(|&(s, _)| constraints.violated_at(states, controls, s))
        .count()
}

/// An explicit set of scenarios, or all of them.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSubset {
    All,
    /// Scenarios spanning either the whole grid (`t0..T`) or the tail from
    /// the evaluation time.
    Listed(Vec<Scenario>),
}

impl ScenarioSubset {
    /// Tail scenarios from `t`, sorted and deduplicated.
    pub fn resolve(&self, model: &SystemModel, t: Time) -> Result<Vec<Scenario>> {
        match self {
            ScenarioSubset::All => Ok(model.all_scenarios(t).into_iter().map(Scenario).collect()),
            ScenarioSubset::Listed(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidParameter("scenario subset is empty".into()));
                }
                let mut out = list
                    .iter()
                    .map(|s| project_scenario(model, s, t))
                    .collect::<Result<Vec<_>>>()?;
                out.sort();
                out.dedup();
                Ok(out)
            }
        }
    }

    /// Per-epoch uncertainties appearing in the subset, for epochs `t..T`.
    pub fn closure(&self, model: &SystemModel, t: Time) -> Result<Vec<Vec<bool>>> {
        let scenarios = self.resolve(model, t)?;
        let mut out: Vec<Vec<bool>> = (t..model.t_final())
            .map(|s| vec![false; model.num_uncertainties(s)])
            .collect();
        for sc in &scenarios {
            for (k, &w) in sc.0.iter().enumerate() {
                out[k][w] = true;
            }
        }
        Ok(out)
    }

    /// Whether the tail subset equals the product of its per-epoch projections.
    pub fn is_rectangular(&self, model: &SystemModel, t: Time) -> Result<bool> {
        let n = self.resolve(model, t)?.len() as u128;
        let product = self
            .closure(model, t)?
            .iter()
            .fold(1u128, |acc, e| acc.saturating_mul(e.iter().filter(|&&b| b).count() as u128));
        Ok(n == product)
    }
}

/// Tail of `scenario` from `t`; full-grid scenarios are cut, tail-length ones kept.
pub fn project_scenario(model: &SystemModel, scenario: &Scenario, t: Time) -> Result<Scenario> {
    let full = model.grid().num_epochs();
    let tail = (model.t_final() - t).max(0) as usize;
    let out = if scenario.len() == full {
        Scenario(scenario.0[full - tail..].to_vec())
    } else if scenario.len() == tail {
        scenario.clone()
    } else {
        return Err(Error::Range(format!(
            "scenario {:?} spans neither the grid ({full} epochs) nor the tail from {t} ({tail})",
            scenario.0
        )));
    };
    for (k, &w) in out.0.iter().enumerate() {
        let s = t + k as Time;
        if w >= model.num_uncertainties(s) {
            return Err(Error::Range(format!("uncertainty index {w} at time {s}")));
        }
    }
    Ok(out)
}

/// A finitely supported probability on scenarios.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbabilityModel {
    /// Independent per-epoch laws, one probability vector per epoch of the grid.
    WhiteNoise { stages: Vec<Vec<f64>> },
    /// Explicit weighted scenarios (grid-length or tail-length).
    WeightedScenarios { scenarios: Vec<(Scenario, f64)> },
}

fn check_distribution(weights: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut sum = CompensatedSum::default();
    for w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!("{what}: weight {w} is not a probability")));
        }
        sum.add(w);
    }
    if (sum.value() - 1.0).abs() > TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "{what}: weights sum to {} instead of 1",
            sum.value()
        )));
    }
    Ok(())
}

impl ProbabilityModel {
    pub fn white_noise(model: &SystemModel, stages: Vec<Vec<f64>>) -> Result<Self> {
        let p = ProbabilityModel::WhiteNoise { stages };
        p.check(model)?;
        Ok(p)
    }

    /// The same law at every epoch.
    pub fn stationary_white_noise(model: &SystemModel, law: Vec<f64>) -> Result<Self> {
        ProbabilityModel::white_noise(model, vec![law; model.grid().num_epochs()])
    }

    pub fn weighted(model: &SystemModel, scenarios: Vec<(Scenario, f64)>) -> Result<Self> {
        let p = ProbabilityModel::WeightedScenarios { scenarios };
        p.check(model)?;
        Ok(p)
    }

    pub fn is_white_noise(&self) -> bool {
        matches!(self, ProbabilityModel::WhiteNoise { .. })
    }

    pub fn check(&self, model: &SystemModel) -> Result<()> {
        match self {
            ProbabilityModel::WhiteNoise { stages } => {
                if stages.len() != model.grid().num_epochs() {
                    return Err(Error::InvalidParameter(format!(
                        "white noise needs {} stage laws, got {}",
                        model.grid().num_epochs(),
                        stages.len()
                    )));
                }
                for (t, law) in model.grid().epochs().zip(stages) {
                    if law.len() != model.num_uncertainties(t) {
                        return Err(Error::InvalidParameter(format!(
                            "stage law at time {t} has {} weights for {} uncertainties",
                            law.len(),
                            model.num_uncertainties(t)
                        )));
                    }
                    check_distribution(law.iter().copied(), &format!("stage law at time {t}"))?;
                }
            }
            ProbabilityModel::WeightedScenarios { scenarios } => {
                if scenarios.is_empty() {
                    return Err(Error::InvalidParameter("no weighted scenarios".into()));
                }
                for (s, _) in scenarios {
                    project_scenario(model, s, model.t0())?;
                }
                check_distribution(scenarios.iter().map(|(_, w)| *w), "weighted scenarios")?;
            }
        }
        Ok(())
    }

    /// Law of the law at epoch `t` (white noise only).
    pub fn stage_law(&self, model: &SystemModel, t: Time) -> Option<&[f64]> {
        match self {
            ProbabilityModel::WhiteNoise { stages } => {
                stages.get(model.epoch_offset(t).ok()?).map(Vec::as_slice)
            }
            ProbabilityModel::WeightedScenarios { .. } => None,
        }
    }

    /// Positive-weight tail scenarios from `t` with their (marginal) weights.
    pub fn support(&self, model: &SystemModel, t: Time) -> Result<Vec<(Scenario, f64)>> {
        match self {
            ProbabilityModel::WhiteNoise { stages } => {
                let mut out = vec![(Vec::new(), 1.0f64)];
                for s in t..model.t_final() {
                    let law = &stages[model.epoch_offset(s)?];
                    out = out
                        .into_iter()
                        .flat_map(|(prefix, p)| {
                            law.iter().enumerate().filter(|(_, &q)| q > 0.0).map(
                                move |(w, &q)| {
                                    let mut next = prefix.clone();
                                    next.push(w);
                                    (next, p * q)
                                },
                            )
                        })
                        .collect();
                }
                Ok(out.into_iter().map(|(s, p)| (Scenario(s), p)).collect())
            }
            ProbabilityModel::WeightedScenarios { scenarios } => {
                let mut acc: BTreeMap<Scenario, CompensatedSum> = BTreeMap::new();
                for (s, w) in scenarios {
                    if *w > 0.0 {
                        acc.entry(project_scenario(model, s, t)?).or_default().add(*w);
                    }
                }
                Ok(acc.into_iter().map(|(s, w)| (s, w.value())).collect())
            }
        }
    }
}

/// Finite family of probability models over which risk is taken in the worst case.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbiguitySet(Vec<ProbabilityModel>);

impl AmbiguitySet {
    pub fn new(models: Vec<ProbabilityModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidParameter("ambiguity set is empty".into()));
        }
        Ok(AmbiguitySet(models))
    }

    pub fn models(&self) -> &[ProbabilityModel] {
        &self.0
    }
}

/// Path property over the control path alone.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlPredicate {
    /// Some epoch `s >= t` plays a control from the per-epoch mask.
    AnyOf { controls: Vec<Vec<bool>> },
}

impl ControlPredicate {
    /// The same control labels at every epoch; a label may be missing at some epochs.
    pub fn any_of_labels(model: &SystemModel, labels: &[Label]) -> Result<Self> {
        let mut controls = Vec::new();
        let mut seen = vec![false; labels.len()];
        for t in model.grid().epochs() {
            let set = model.controls_at(t)?;
            let mut mask = vec![false; set.len()];
            for (k, l) in labels.iter().enumerate() {
                if let Some(u) = set.position(l) {
                    mask[u] = true;
                    seen[k] = true;
                }
            }
            controls.push(mask);
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::CrossReference(format!(
                "control label `{}` is unknown at every epoch",
                labels[k]
            )));
        }
        Ok(ControlPredicate::AnyOf { controls })
    }

    pub fn mask(&self, model: &SystemModel, t: Time) -> &[bool] {
        match self {
            ControlPredicate::AnyOf { controls } => &controls[model.offset(t)],
        }
    }

    pub fn holds(&self, model: &SystemModel, states: &StatePath, controls: &ControlPath) -> bool {
        if states.visits_cemetery() {
            return false;
        }
        match self {
            ControlPredicate::AnyOf { controls: masks } => {
                controls.controls.iter().enumerate().any(|(k, u)| {
                    let t = controls.start + k as Time;
                    u.is_some_and(|u| masks[model.offset(t)][u])
                })
            }
        }
    }
}

/// A recovery regime `A^t`.
#[derive(Clone, Debug)]
pub enum RegimeSpec {
    /// `x_s ∈ B` for all `s >= t` on every scenario in scope.
    Bounded {
        bound: ConstraintMap,
        scenarios: ScenarioSubset,
    },
    /// State and control constraints at every time on every scenario in scope.
    DeterministicViability {
        constraints: ConstraintMap,
        scenarios: ScenarioSubset,
    },
    /// Every scenario of the subset recovers at some finite time.
    RobustRecovery {
        constraints: ConstraintMap,
        scenarios: ScenarioSubset,
    },
    /// Constraints hold from `t` with probability at least `beta`.
    StochasticViability {
        constraints: ConstraintMap,
        probability: ProbabilityModel,
        beta: f64,
    },
    /// The path leaves `B` at least once with probability at most `beta`.
    ExitProbability {
        bound: ConstraintMap,
        probability: ProbabilityModel,
        beta: f64,
    },
    /// Almost surely at most `max_exits` exits from `B`.
    ExitCountLimit {
        bound: ConstraintMap,
        max_exits: usize,
        probability: ProbabilityModel,
    },
    /// Extended risk at most `alpha`.
    RiskBound { risk: ExtendedRiskSpec, alpha: f64 },
    /// A control-path predicate on every scenario in scope.
    ControlPredicate {
        predicate: ControlPredicate,
        scenarios: ScenarioSubset,
    },
}

fn check_level(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} is outside [0, 1]")))
    }
}

impl RegimeSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeSpec::Bounded { .. } => "bounded",
            RegimeSpec::DeterministicViability { .. } => "deterministic_viability",
            RegimeSpec::RobustRecovery { .. } => "robust_recovery",
            RegimeSpec::StochasticViability { .. } => "stochastic_viability",
            RegimeSpec::ExitProbability { .. } => "exit_probability",
            RegimeSpec::ExitCountLimit { .. } => "exit_count_limit",
            RegimeSpec::RiskBound { .. } => "risk_bound",
            RegimeSpec::ControlPredicate { .. } => "control_predicate",
        }
    }

    pub fn check(&self, model: &SystemModel) -> Result<()> {
        match self {
            RegimeSpec::StochasticViability {
                probability, beta, ..
            }
            | RegimeSpec::ExitProbability {
                probability, beta, ..
            } => {
                check_level("beta", *beta)?;
                probability.check(model)
            }
            RegimeSpec::ExitCountLimit { probability, .. } => probability.check(model),
            RegimeSpec::RiskBound { risk, alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::InvalidParameter(format!("alpha = {alpha}")));
                }
                risk.check(model)
            }
            _ => Ok(()),
        }
    }

    /// The state/control constraints the regime is built on, if any.
    pub fn constraints(&self) -> Option<&ConstraintMap> {
        match self {
            RegimeSpec::Bounded { bound, .. }
            | RegimeSpec::ExitProbability { bound, .. }
            | RegimeSpec::ExitCountLimit { bound, .. } => Some(bound),
            RegimeSpec::DeterministicViability { constraints, .. }
            | RegimeSpec::RobustRecovery { constraints, .. }
            | RegimeSpec::StochasticViability { constraints, .. } => Some(constraints),
            RegimeSpec::RiskBound { .. } | RegimeSpec::ControlPredicate { .. } => None,
        }
    }

    /// Replaces the probability level of the regimes that carry one.
    pub fn set_beta(&mut self, value: f64) -> Result<()> {
        check_level("beta", value)?;
        match self {
            RegimeSpec::StochasticViability { beta, .. }
            | RegimeSpec::ExitProbability { beta, .. } => {
                *beta = value;
                Ok(())
            }
            _ => Err(Error::InvalidParameter(format!(
                "regime `{}` has no beta level",
                self.name()
            ))),
        }
    }

    pub fn set_alpha(&mut self, value: f64) -> Result<()> {
        match self {
            RegimeSpec::RiskBound { alpha, .. } => {
                *alpha = value;
                Ok(())
            }
            _ => Err(Error::InvalidParameter(format!(
                "regime `{}` has no alpha level",
                self.name()
            ))),
        }
    }

    /// Tail scenarios from `t` on which membership is decided.
    pub fn scope(&self, model: &SystemModel, t: Time) -> Result<Vec<Scenario>> {
        match self {
            RegimeSpec::Bounded { scenarios, .. }
            | RegimeSpec::DeterministicViability { scenarios, .. }
            | RegimeSpec::RobustRecovery { scenarios, .. }
            | RegimeSpec::ControlPredicate { scenarios, .. } => scenarios.resolve(model, t),
            RegimeSpec::StochasticViability { probability, .. }
            | RegimeSpec::ExitProbability { probability, .. }
            | RegimeSpec::ExitCountLimit { probability, .. } => Ok(probability
                .support(model, t)?
                .into_iter()
                .map(|(s, _)| s)
                .collect()),
            RegimeSpec::RiskBound { risk, .. } => risk.scope(model, t),
        }
    }
}

fn weighted_probability<'a>(
    bundle: &'a PathBundle,
    support: &'a [(Scenario, f64)],
    mut event: impl FnMut(&StatePath, &ControlPath) -> bool,
) -> Result<f64> {
    let mut p = CompensatedSum::default();
    for (s, w) in support {
        let e = bundle.get(s)?;
        if event(&e.states, &e.controls) {
            p.add(*w);
        }
    }
    Ok(p.value())
}

/// Probability, under `probability`, that the bundle satisfies the constraints from its start.
pub fn success_probability(
    model: &SystemModel,
    constraints: &ConstraintMap,
    probability: &ProbabilityModel,
    bundle: &PathBundle,
) -> Result<f64> {
    let support = probability.support(model, bundle.start)?;
    weighted_probability(bundle, &support, |xs, us| {
        path_satisfies(constraints, xs, us, bundle.start)
    })
}

/// Exact membership of the bundle's process in the regime.
pub fn regime_membership(
    model: &SystemModel,
    regime: &RegimeSpec,
    bundle: &PathBundle,
) -> Result<bool> {
    let t = bundle.start;
    let every = |f: &mut dyn FnMut(&StatePath, &ControlPath) -> bool| -> Result<bool> {
        for s in regime.scope(model, t)? {
            let e = bundle.get(&s)?;
            if !f(&e.states, &e.controls) {
                return Ok(false);
            }
        }
        Ok(true)
    };
    match regime {
        RegimeSpec::Bounded { bound: c, .. }
        | RegimeSpec::DeterministicViability { constraints: c, .. } => {
            every(&mut |xs, us| path_satisfies(c, xs, us, t))
        }
        RegimeSpec::RobustRecovery { constraints, .. } => {
            every(&mut |xs, us| recovery_time(xs, us, constraints, t).is_finite())
        }
        RegimeSpec::StochasticViability {
            constraints,
            probability,
            beta,
        } => Ok(success_probability(model, constraints, probability, bundle)? >= beta - TOLERANCE),
        RegimeSpec::ExitProbability {
            bound,
            probability,
            beta,
        } => {
            let support = probability.support(model, t)?;
            let p = weighted_probability(bundle, &support, |xs, us| {
                exit_count(xs, us, bound, t) > 0
            })?;
            Ok(p <= beta + TOLERANCE)
        }
        RegimeSpec::ExitCountLimit {
            bound, max_exits, ..
        } => every(&mut |xs, us| exit_count(xs, us, bound, t) <= *max_exits),
        RegimeSpec::RiskBound { risk, alpha } => {
            Ok(extended_risk(model, risk, bundle)? <= alpha + TOLERANCE)
        }
        RegimeSpec::ControlPredicate { predicate, .. } => {
            every(&mut |xs, us| predicate.holds(model, xs, us))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{stock3, stock3_acceptable};
    use crate::strategy::{MarkovPolicy, Strategy};
    use crate::trajectory::{bundle, closed_loop};

    fn ids(v: &[usize]) -> StatePath {
        StatePath {
            start: 0,
            states: v.iter().map(|&i| StateId::new(i)).collect(),
        }
    }

    fn us(v: &[usize]) -> ControlPath {
        ControlPath {
            start: 0,
            controls: v.iter().map(|&u| Some(u)).collect(),
        }
    }

    fn k_with_hard(model: &SystemModel) -> ConstraintMap {
        ConstraintMap::from_labels(model, &stock3_acceptable())
            .unwrap()
            .with_controls(model.hard_constraints().unwrap().clone())
    }

    #[test]
    fn path_satisfies_examples() {
        let m = stock3();
        let c = k_with_hard(&m);
        assert!(path_satisfies(&c, &ids(&[2, 3, 3, 3]), &us(&[1, 1, 1]), 0));
        assert!(path_satisfies(&c, &ids(&[1, 2, 3, 3]), &us(&[1, 1, 1]), 1));
        assert!(!path_satisfies(&c, &ids(&[1, 2, 3, 3]), &us(&[1, 1, 1]), 0));
        let mut with_cemetery = ids(&[2, 3, 3, 3]);
        with_cemetery.states[3] = StateId::CEMETERY;
        assert!(!path_satisfies(&c, &with_cemetery, &us(&[1, 1, 1]), 0));
    }

    #[test]
    fn recovery_time_examples() {
        let m = stock3();
        let c = ConstraintMap::from_labels(&m, &stock3_acceptable()).unwrap();
        let s = Strategy::Markov(MarkovPolicy::constant(&m, 0, 3, 1));
        let (xs, u) = closed_loop(&m, &s, 0, 3, StateId::new(1), &[0, 0, 0]).unwrap();
        assert_eq!(recovery_time(&xs, &u, &c, 0), RecoveryTime::At(1));
        let (xs, u) = closed_loop(&m, &s, 0, 3, StateId::new(1), &[1, 1, 1]).unwrap();
        assert_eq!(recovery_time(&xs, &u, &c, 0), RecoveryTime::Never);
        assert_eq!(
            recovery_time(&ids(&[2, 3, 3, 3]), &us(&[1, 1, 1]), &c, 0),
            RecoveryTime::At(0)
        );
        assert_eq!(
            recovery_time(&ids(&[1, 1, 1, 2]), &us(&[1, 1, 1]), &c, 0),
            RecoveryTime::At(3)
        );
    }

    #[test]
    fn exit_count_examples() {
        let m = stock3();
        let c = k_with_hard(&m);
        assert_eq!(exit_count(&ids(&[2, 3, 2, 3]), &us(&[1, 0, 1]), &c, 0), 0);
        assert_eq!(exit_count(&ids(&[1, 2, 1, 2]), &us(&[1, 0, 1]), &c, 0), 2);
        let dead = StatePath {
            start: 0,
            states: vec![StateId::CEMETERY; 4],
        };
        let none = ControlPath {
            start: 0,
            controls: vec![None; 3],
        };
        assert_eq!(exit_count(&dead, &none, &c, 0), 4);
    }

    fn all_bundle(m: &SystemModel, x: usize, u: usize) -> PathBundle {
        let s = Strategy::Markov(MarkovPolicy::constant(m, 0, 3, u));
        let sc: Vec<Scenario> = m.all_scenarios(0).into_iter().map(Scenario).collect();
        bundle(m, &s, 0, StateId::new(x), &sc).unwrap()
    }

    #[test]
    fn stochastic_viability_membership() {
        let m = stock3();
        let half = ProbabilityModel::stationary_white_noise(&m, vec![0.5, 0.5]).unwrap();
        let regime = |beta| RegimeSpec::StochasticViability {
            constraints: ConstraintMap::from_labels(&m, &stock3_acceptable()).unwrap(),
            probability: half.clone(),
            beta,
        };
        assert!(regime_membership(&m, &regime(1.0), &all_bundle(&m, 2, 1)).unwrap());
        assert!(!regime_membership(&m, &regime(0.1), &all_bundle(&m, 1, 1)).unwrap());
        assert!(regime_membership(&m, &regime(0.0), &all_bundle(&m, 1, 1)).unwrap());
    }

    #[test]
    fn robust_recovery_membership() {
        let m = stock3();
        let c = ConstraintMap::from_labels(&m, &stock3_acceptable()).unwrap();
        let b = all_bundle(&m, 1, 1);
        let all = RegimeSpec::RobustRecovery {
            constraints: c.clone(),
            scenarios: ScenarioSubset::All,
        };
        assert!(!regime_membership(&m, &all, &b).unwrap());
        let one = RegimeSpec::RobustRecovery {
            constraints: c,
            scenarios: ScenarioSubset::Listed(vec![Scenario(vec![0, 0, 0])]),
        };
        assert!(regime_membership(&m, &one, &b).unwrap());
    }

    #[test]
    fn missing_scenario_is_an_error() {
        let m = stock3();
        let s = Strategy::Markov(MarkovPolicy::constant(&m, 0, 3, 1));
        let b = bundle(&m, &s, 0, StateId::new(2), &[Scenario(vec![0, 0, 0])]).unwrap();
        let r = RegimeSpec::Bounded {
            bound: ConstraintMap::from_labels(&m, &stock3_acceptable()).unwrap(),
            scenarios: ScenarioSubset::All,
        };
        assert!(matches!(
            regime_membership(&m, &r, &b),
            Err(Error::MissingScenario(_))
        ));
    }

    #[test]
    fn exit_regimes() {
        let m = stock3();
        let half = ProbabilityModel::stationary_white_noise(&m, vec![0.5, 0.5]).unwrap();
        let bound = ConstraintMap::from_labels(&m, &stock3_acceptable()).unwrap();
        // from 1 under u = 1, (1,1,1) never enters K and exits four times
        let b = all_bundle(&m, 1, 1);
        let limit = |max_exits| RegimeSpec::ExitCountLimit {
            bound: bound.clone(),
            max_exits,
            probability: half.clone(),
        };
        assert!(!regime_membership(&m, &limit(3), &b).unwrap());
        assert!(regime_membership(&m, &limit(4), &b).unwrap());
        let exit = |beta| RegimeSpec::ExitProbability {
            bound: bound.clone(),
            probability: half.clone(),
            beta,
        };
        assert!(regime_membership(&m, &exit(1.0), &b).unwrap());
        assert!(!regime_membership(&m, &exit(0.99), &b).unwrap());
        assert!(regime_membership(&m, &exit(0.0), &all_bundle(&m, 3, 1)).unwrap());
    }

    #[test]
    fn control_predicate_membership() {
        let m = stock3();
        let pred = ControlPredicate::any_of_labels(&m, &[Label::from(0)]).unwrap();
        let r = RegimeSpec::ControlPredicate {
            predicate: pred,
            scenarios: ScenarioSubset::All,
        };
        assert!(regime_membership(&m, &r, &all_bundle(&m, 2, 0)).unwrap());
        assert!(!regime_membership(&m, &r, &all_bundle(&m, 2, 1)).unwrap());
        assert!(ControlPredicate::any_of_labels(&m, &[Label::from(7)]).is_err());
    }

    #[test]
    fn weighted_support_marginalizes_on_tails() {
        let m = stock3();
        let p = ProbabilityModel::weighted(
            &m,
            vec![
                (Scenario(vec![0, 0, 1]), 0.25),
                (Scenario(vec![1, 0, 1]), 0.25),
                (Scenario(vec![1, 1, 1]), 0.5),
            ],
        )
        .unwrap();
        let s = p.support(&m, 1).unwrap();
        assert_eq!(
            s,
            vec![(Scenario(vec![0, 1]), 0.5), (Scenario(vec![1, 1]), 0.5)]
        );
        assert!(ProbabilityModel::weighted(&m, vec![(Scenario(vec![0, 0, 0]), 0.9)]).is_err());
    }

    #[test]
    fn rectangular_subsets() {
        let m = stock3();
        let all = ScenarioSubset::All;
        assert!(all.is_rectangular(&m, 0).unwrap());
        let diag = ScenarioSubset::Listed(vec![Scenario(vec![0, 0, 0]), Scenario(vec![1, 1, 1])]);
        assert!(!diag.is_rectangular(&m, 0).unwrap());
        assert!(diag.is_rectangular(&m, 2).unwrap());
        assert!(ScenarioSubset::Listed(vec![]).resolve(&m, 0).is_err());
    }

    #[test]
    fn recovery_time_matches_path_satisfies() {
        let m = stock3();
        let c = k_with_hard(&m);
        let sc: Vec<Scenario> = m.all_scenarios(0).into_iter().map(Scenario).collect();
        for p in crate::strategy::enumerate_markov(&m, 0, 3, None, 1 << 20).unwrap() {
            let s = Strategy::Markov(p);
            for x in 0..4 {
                let b = bundle(&m, &s, 0, StateId::new(x), &sc).unwrap();
                for e in b.entries.values() {
                    let sat = path_satisfies(&c, &e.states, &e.controls, 0);
                    assert_eq!(
                        recovery_time(&e.states, &e.controls, &c, 0) == RecoveryTime::At(0),
                        sat
                    );
                    assert_eq!(exit_count(&e.states, &e.controls, &c, 0) == 0, sat);
                    let tau = recovery_time(&e.states, &e.controls, &c, 0);
                    let brute = (0..=3)
                        .find(|&r| path_satisfies(&c, &e.states, &e.controls, r))
                        .map_or(RecoveryTime::Never, RecoveryTime::At);
                    assert_eq!(tau, brute);
                }
            }
        }
    }
}
