//! Open-loop flow, closed-loop flow and path bundles.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{StateId, SystemModel, Time};
use crate::strategy::Strategy;

/// Uncertainty indices `(w_s, ..., w_{T-1})` for the epochs following some
/// start time `s`, which the surrounding context fixes.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scenario(pub Vec<usize>);

impl Scenario {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Prints the scenario with the model's labels, epochs starting at `start`.
    pub fn display<'a>(&'a self, model: &'a SystemModel, start: Time) -> impl fmt::Display + 'a {
        ScenarioDisplay {
            scenario: self,
            model,
            start,
        }
    }
}

impl From<Vec<usize>> for Scenario {
    fn from(v: Vec<usize>) -> Self {
        Scenario(v)
    }
}

struct ScenarioDisplay<'a> {
    scenario: &'a Scenario,
    model: &'a SystemModel,
    start: Time,
}

impl fmt::Display for ScenarioDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, &w) in self.scenario.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", self.model.uncertainty_label(self.start + i as Time, w))?;
        }
        f.write_str(")")
    }
}

/// States `x_s, ..., x_t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StatePath {
    pub start: Time,
    pub states: Vec<StateId>,
}

impl StatePath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn at(&self, t: Time) -> Option<StateId> {
        let i = usize::try_from(t - self.start).ok()?;
        self.states.get(i).copied()
    }

    pub fn times(&self) -> impl Iterator<Item = (Time, StateId)> + '_ {
        self.states
            .iter()
            .enumerate()
            .map(|(i, &x)| (self.start + i as Time, x))
    }

    pub fn visits_cemetery(&self) -> bool {
        self.states.iter().any(|x| x.is_cemetery())
    }
}

/// Controls `u_s, ..., u_{t-1}`; `None` where the path already sits in the
/// cemetery and no decision is taken.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ControlPath {
    pub start: Time,
    pub controls: Vec<Option<usize>>,
}

impl ControlPath {
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn at(&self, t: Time) -> Option<usize> {
        let i = usize::try_from(t - self.start).ok()?;
        self.controls.get(i).copied().flatten()
    }
}

/// Information available when deciding at time `t`: past controls and
/// past uncertainties since the start of the closed loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistoryPrefix {
    pub controls: Vec<Option<usize>>,
    pub uncertainties: Vec<usize>,
}

/// Iterates the dynamics from `x_s` at `s` up to `t` along the given
/// controls and uncertainties. Returns an empty path when `s > t`.
pub fn flow(
    model: &SystemModel,
    s: Time,
    t: Time,
    x_s: StateId,
    controls: &[usize],
    uncertainties: &[usize],
) -> Result<StatePath> {
    if s > t {
        return Ok(StatePath {
            start: s,
            states: Vec::new(),
        });
    }
    model.time_offset(s)?;
    model.time_offset(t)?;
    let n = (t - s) as usize;
    if controls.len() != n || uncertainties.len() != n {
        return Err(Error::Range(format!(
            "flow over {s}..{t} needs {n} controls and uncertainties, got {} and {}",
            controls.len(),
            uncertainties.len()
        )));
    }
    let mut states = Vec::with_capacity(n + 1);
    let mut x = x_s;
    states.push(x);
    for (i, (&u, &w)) in controls.iter().zip(uncertainties).enumerate() {
        x = model.step(s + i as Time, x, u, w)?;
        states.push(x);
    }
    Ok(StatePath { start: s, states })
}

/// Couples a strategy with the dynamics from `x_s` at `s` up to `t` along
/// the uncertainties `scenario = (w_s, ..., w_{t-1})`.
pub fn closed_loop(
    model: &SystemModel,
    strategy: &Strategy,
    s: Time,
    t: Time,
    x_s: StateId,
    scenario: &[usize],
) -> Result<(StatePath, ControlPath)> {
    model.time_offset(s)?;
    model.time_offset(t)?;
    if s > t {
        return Err(Error::Range(format!("closed loop from {s} to {t}")));
    }
    let n = (t - s) as usize;
    if scenario.len() != n {
        return Err(Error::Range(format!(
            "closed loop over {s}..{t} needs {n} uncertainties, got {}",
            scenario.len()
        )));
    }
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    let mut x = x_s;
    states.push(x);
    for (i, &w) in scenario.iter().enumerate() {
        let r = s + i as Time;
        if x.is_cemetery() {
            controls.push(None);
        } else {
            let u = strategy.decide(model, r, x, s, &scenario[..i])?;
            controls.push(Some(u));
            x = model.step(r, x, u, w)?;
        }
        states.push(x);
    }
    Ok((
        StatePath { start: s, states },
        ControlPath { start: s, controls },
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleEntry {
    pub states: StatePath,
    pub controls: ControlPath,
}

/// Closed-loop state and control paths, one per scenario, all starting at
/// the same `(start, initial)`. Entries are ordered lexicographically by scenario.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathBundle {
    pub start: Time,
    pub initial: StateId,
    pub entries: BTreeMap<Scenario, BundleEntry>,
}

impl PathBundle {
    pub fn get(&self, scenario: &Scenario) -> Result<&BundleEntry> {
        self.entries
            .get(scenario)
            .ok_or_else(|| Error::MissingScenario(format!("{:?}", scenario.0)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn history(&self, scenario: &Scenario, t: Time) -> Result<HistoryPrefix> {
        let entry = self.get(scenario)?;
        let k = usize::try_from(t - self.start)
            .ok()
            .filter(|&k| k <= scenario.len())
            .ok_or_else(|| Error::Range(format!("history at time {t}")))?;
        Ok(HistoryPrefix {
            controls: entry.controls.controls[..k].to_vec(),
            uncertainties: scenario.0[..k].to_vec(),
        })
    }
}

/// Runs the closed loop for every scenario in `scenarios` (tail scenarios
/// from `t` to the final time).
pub fn bundle(
    model: &SystemModel,
    strategy: &Strategy,
    t: Time,
    x: StateId,
    scenarios: &[Scenario],
) -> Result<PathBundle> {
    if scenarios.is_empty() {
        return Err(Error::InvalidParameter("bundle needs at least one scenario".into()));
    }
    let end = model.t_final();
    let mut entries = BTreeMap::new();
    for sc in scenarios {
        let (states, controls) = closed_loop(model, strategy, t, end, x, &sc.0)?;
        entries.insert(sc.clone(), BundleEntry { states, controls });
    }
    Ok(PathBundle {
        start: t,
        initial: x,
        entries,
    })
}
