//! Finite discrete-time system model.
//!
//! A [`SystemModel`] bundles a [`TimeGrid`], per-time labeled state sets,
//! per-epoch control and uncertainty sets, an explicit transition table and
//! an optional hard control-constraint map. Every state set is implicitly
//! extended with the absorbing cemetery state [`StateId::CEMETERY`]: once a
//! path reaches it, it never leaves, and playing a control outside the hard
//! constraints sends the path there.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Time = i64;

/// Printed label of the cemetery state.
pub const CEMETERY_LABEL: &str = "∂";

/// A state, control or uncertainty label. Integer-looking labels serialize
/// as JSON numbers, everything else as strings.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(String);

impl Label {
    pub fn new(s: impl Into<String>) -> Self {
        Label(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn cemetery() -> Self {
        Label(CEMETERY_LABEL.to_string())
    }

    pub fn is_cemetery(&self) -> bool {
        self.0 == CEMETERY_LABEL
    }

    fn as_integer(&self) -> Option<i64> {
        let v: i64 = self.0.parse().ok()?;
        (v.to_string() == self.0).then_some(v)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_string())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(s)
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label(v.to_string())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self.as_integer() {
            Some(v) => serializer.serialize_i64(v),
            None => serializer.serialize_str(&self.0),
        }
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        Ok(match Raw::deserialize(deserializer)? {
            Raw::Int(v) => Label::from(v),
            Raw::Str(s) => Label(s),
        })
    }
}

/// Index of a state within the state set of its time, or the cemetery.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(u32);

impl StateId {
    pub const CEMETERY: StateId = StateId(u32::MAX);

    pub fn new(index: usize) -> Self {
        assert!(index < u32::MAX as usize, "state index overflow");
        StateId(index as u32)
    }

    pub fn is_cemetery(self) -> bool {
        self == Self::CEMETERY
    }

    /// Position in the state set. Panics on the cemetery.
    pub fn index(self) -> usize {
        assert!(!self.is_cemetery(), "the cemetery state has no index");
        self.0 as usize
    }

    pub fn get(self) -> Option<usize> {
        (!self.is_cemetery()).then_some(self.0 as usize)
    }
}

/// The finite time grid `t0..=T`. States live on every time of the grid,
/// decisions are taken at the epochs `t0..T`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TimeGrid {
    t0: Time,
    t_final: Time,
}

impl TimeGrid {
    pub fn new(t0: Time, t_final: Time) -> Result<Self> {
        if t0 > t_final {
            return Err(Error::InvalidParameter(format!(
                "time grid requires t0 <= T, got t0={t0}, T={t_final}"
            )));
        }
        Ok(TimeGrid { t0, t_final })
    }

    pub fn t0(&self) -> Time {
        self.t0
    }

    pub fn t_final(&self) -> Time {
        self.t_final
    }

    pub fn num_times(&self) -> usize {
        (self.t_final - self.t0 + 1) as usize
    }

    pub fn num_epochs(&self) -> usize {
        (self.t_final - self.t0) as usize
    }

    pub fn times(&self) -> impl Iterator<Item = Time> {
        self.t0..=self.t_final
    }

    pub fn epochs(&self) -> Range<Time> {
        self.t0..self.t_final
    }

    pub fn contains(&self, t: Time) -> bool {
        (self.t0..=self.t_final).contains(&t)
    }

    pub fn is_epoch(&self, t: Time) -> bool {
        self.epochs().contains(&t)
    }

    /// Offset of `t` from `t0`, if `t` is on the grid.
    pub fn offset(&self, t: Time) -> Option<usize> {
        self.contains(t).then(|| (t - self.t0) as usize)
    }

    /// The times joining `s` and `t`, empty when `s > t`.
    pub fn segment(&self, s: Time, t: Time) -> Range<Time> {
        if s > t {
            s..s
        } else {
            s..t + 1
        }
    }
}

/// Ordered, duplicate-free, nonempty list of labels.
#[derive(Clone, Debug)]
pub struct LabeledSet {
    labels: Vec<Label>,
    positions: HashMap<Label, usize>,
}

impl LabeledSet {
    pub fn new<I, L>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = L>,
        L: Into<Label>,
    {
        let labels: Vec<Label> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidParameter("labeled sets must be nonempty".into()));
        }
        let mut positions = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if l.is_cemetery() {
                return Err(Error::InvalidParameter(format!(
                    "label `{CEMETERY_LABEL}` is reserved for the cemetery state"
                )));
            }
            if positions.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate label `{l}`")));
            }
        }
        Ok(LabeledSet { labels, positions })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &Label {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn position(&self, label: &Label) -> Option<usize> {
        self.positions.get(label).copied()
    }
}

impl PartialEq for LabeledSet {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

/// Per-epoch, per-state sets of allowed controls. A state without an entry
/// allows every control.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlConstraints {
    allowed: Vec<Vec<Option<Vec<bool>>>>,
}

impl ControlConstraints {
    /// No constraints, shaped for `model`.
    pub fn unconstrained(model: &SystemModel) -> Self {
        let allowed = (0..model.grid.num_epochs())
            .map(|e| vec![None; model.states[e].len()])
            .collect();
        ControlConstraints { allowed }
    }

    /// Restricts the controls of state `x` at epoch offset `e`.
    pub fn restrict(&mut self, e: usize, x: usize, mask: Vec<bool>) {
        self.allowed[e][x] = Some(mask);
    }

    pub fn mask(&self, e: usize, x: usize) -> Option<&[bool]> {
        self.allowed.get(e)?.get(x)?.as_deref()
    }

    pub fn allows(&self, e: usize, x: StateId, u: usize) -> bool {
        match x.get() {
            None => false,
            Some(x) => self.mask(e, x).is_none_or(|m| m.get(u).copied().unwrap_or(false)),
        }
    }

    /// Controls allowed at `(e, x)`, in label order.
    pub fn allowed_controls(&self, e: usize, x: usize, num_controls: usize) -> Vec<usize> {
        match self.mask(e, x) {
            None => (0..num_controls).collect(),
            Some(m) => (0..num_controls).filter(|&u| m[u]).collect(),
        }
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = (usize, usize, &[bool])> {
        self.allowed.iter().enumerate().flat_map(|(e, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(x, m)| m.as_deref().map(|m| (e, x, m)))
        })
    }
}

/// One validation finding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Issue {
    MissingTransition {
        time: Time,
        state: Label,
        control: Label,
        uncertainty: Label,
    },
    ConflictingTransition {
        time: Time,
        state: Label,
        control: Label,
        uncertainty: Label,
    },
    EmptyAdmissibleSet { time: Time, state: Label },
    UnknownLabel { context: String, label: Label },
    TimeOutOfRange { context: String, time: Time },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::MissingTransition {
                time,
                state,
                control,
                uncertainty,
            } => write!(
                f,
                "missing transition for (t={time}, x={state}, u={control}, w={uncertainty})"
            ),
            Issue::ConflictingTransition {
                time,
                state,
                control,
                uncertainty,
            } => write!(
                f,
                "conflicting transitions for (t={time}, x={state}, u={control}, w={uncertainty})"
            ),
            Issue::EmptyAdmissibleSet { time, state } => {
                write!(f, "empty admissible control set at (t={time}, x={state})")
            }
            Issue::UnknownLabel { context, label } => {
                write!(f, "unknown label `{label}` in {context}")
            }
            Issue::TimeOutOfRange { context, time } => {
                write!(f, "time {time} out of range in {context}")
            }
        }
    }
}

/// Findings of [`SystemModel::validate`]. The model is usable iff empty.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("no issues");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// A finite discrete-time controlled system with uncertainties.
#[derive(Clone, Debug)]
pub struct SystemModel {
    grid: TimeGrid,
    states: Vec<LabeledSet>,
    controls: Vec<LabeledSet>,
    uncertainties: Vec<LabeledSet>,
    /// Per epoch, flattened `[x][u][w]`.
    transitions: Vec<Vec<Option<StateId>>>,
    conflicts: Vec<(usize, usize, usize, usize)>,
    hard_constraints: Option<ControlConstraints>,
    construction_issues: Vec<Issue>,
}

impl SystemModel {
    /// A model with empty dynamics. `states` has one set per time of the grid,
    /// `controls` and `uncertainties` one set per epoch.
    pub fn new(
        grid: TimeGrid,
        states: Vec<LabeledSet>,
        controls: Vec<LabeledSet>,
        uncertainties: Vec<LabeledSet>,
    ) -> Result<Self> {
        if states.len() != grid.num_times() {
            return Err(Error::InvalidParameter(format!(
                "expected {} state sets, got {}",
                grid.num_times(),
                states.len()
            )));
        }
        for (what, sets) in [("control", &controls), ("uncertainty", &uncertainties)] {
            if sets.len() != grid.num_epochs() {
                return Err(Error::InvalidParameter(format!(
                    "expected {} {what} sets, got {}",
                    grid.num_epochs(),
                    sets.len()
                )));
            }
        }
        let transitions = (0..grid.num_epochs())
            .map(|e| vec![None; states[e].len() * controls[e].len() * uncertainties[e].len()])
            .collect();
        Ok(SystemModel {
            grid,
            states,
            controls,
            uncertainties,
            transitions,
            conflicts: Vec::new(),
            hard_constraints: None,
            construction_issues: Vec::new(),
        })
    }

    /// A model whose sets do not depend on time.
    pub fn with_constant_sets(
        grid: TimeGrid,
        states: LabeledSet,
        controls: LabeledSet,
        uncertainties: LabeledSet,
    ) -> Result<Self> {
        let n = grid.num_epochs();
        SystemModel::new(
            grid,
            vec![states; grid.num_times()],
            vec![controls; n],
            vec![uncertainties; n],
        )
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn t0(&self) -> Time {
        self.grid.t0
    }

    pub fn t_final(&self) -> Time {
        self.grid.t_final
    }

    pub fn states_at(&self, t: Time) -> Result<&LabeledSet> {
        Ok(&self.states[self.time_offset(t)?])
    }

    pub fn controls_at(&self, t: Time) -> Result<&LabeledSet> {
        Ok(&self.controls[self.epoch_offset(t)?])
    }

    pub fn uncertainties_at(&self, t: Time) -> Result<&LabeledSet> {
        Ok(&self.uncertainties[self.epoch_offset(t)?])
    }

    pub fn num_states(&self, t: Time) -> usize {
        self.states[self.offset(t)].len()
    }

    pub fn num_controls(&self, t: Time) -> usize {
        self.controls[self.offset(t)].len()
    }

    pub fn num_uncertainties(&self, t: Time) -> usize {
        self.uncertainties[self.offset(t)].len()
    }

    pub fn hard_constraints(&self) -> Option<&ControlConstraints> {
        self.hard_constraints.as_ref()
    }

    pub(crate) fn offset(&self, t: Time) -> usize {
        (t - self.grid.t0) as usize
    }

    pub fn time_offset(&self, t: Time) -> Result<usize> {
        self.grid
            .offset(t)
            .ok_or_else(|| Error::Range(format!("time {t} is outside the grid")))
    }

    pub fn epoch_offset(&self, t: Time) -> Result<usize> {
        if self.grid.is_epoch(t) {
            Ok(self.offset(t))
        } else {
            Err(Error::Range(format!("time {t} is not a decision epoch")))
        }
    }

    pub fn state_id(&self, t: Time, label: &Label) -> Result<StateId> {
        if label.is_cemetery() {
            return Ok(StateId::CEMETERY);
        }
        self.states_at(t)?
            .position(label)
            .map(StateId::new)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "state",
                label: label.to_string(),
                time: t,
            })
    }

    pub fn control_id(&self, t: Time, label: &Label) -> Result<usize> {
        self.controls_at(t)?.position(label).ok_or_else(|| Error::UnknownLabel {
            kind: "control",
            label: label.to_string(),
            time: t,
        })
    }

    pub fn uncertainty_id(&self, t: Time, label: &Label) -> Result<usize> {
        self.uncertainties_at(t)?
            .position(label)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "uncertainty",
                label: label.to_string(),
                time: t,
            })
    }

    pub fn state_label(&self, t: Time, x: StateId) -> Label {
        match x.get() {
            None => Label::cemetery(),
            Some(i) => self.states[self.offset(t)].label(i).clone(),
        }
    }

    pub fn control_label(&self, t: Time, u: usize) -> Label {
        self.controls[self.offset(t)].label(u).clone()
    }

    pub fn uncertainty_label(&self, t: Time, w: usize) -> Label {
        self.uncertainties[self.offset(t)].label(w).clone()
    }

    fn slot(&self, e: usize, x: usize, u: usize, w: usize) -> usize {
        (x * self.controls[e].len() + u) * self.uncertainties[e].len() + w
    }

    /// Records `x --(u, w)--> next` at epoch `t`; `next` may be the cemetery.
    pub fn set_transition(
        &mut self,
        t: Time,
        x: &Label,
        u: &Label,
        w: &Label,
        next: &Label,
    ) -> Result<()> {
        let e = self.epoch_offset(t)?;
        let xi = self.state_id(t, x)?;
        if xi.is_cemetery() {
            return Err(Error::InvalidParameter(
                "transitions out of the cemetery are fixed".into(),
            ));
        }
        let ui = self.control_id(t, u)?;
        let wi = self.uncertainty_id(t, w)?;
        let ni = self.state_id(t + 1, next)?;
        self.insert_transition(e, xi.index(), ui, wi, ni);
        Ok(())
    }

    fn insert_transition(&mut self, e: usize, x: usize, u: usize, w: usize, next: StateId) {
        let slot = self.slot(e, x, u, w);
        match self.transitions[e][slot] {
            Some(prev) if prev != next => self.conflicts.push((e, x, u, w)),
            _ => self.transitions[e][slot] = Some(next),
        }
    }

    /// Fills every transition from a closure over labels; `None` means the cemetery.
    pub fn fill_transitions<F>(&mut self, mut f: F) -> Result<()>
    where
        F: FnMut(Time, &Label, &Label, &Label) -> Option<Label>,
    {
        for t in self.grid.epochs() {
            let e = self.offset(t);
            for x in 0..self.states[e].len() {
                for u in 0..self.controls[e].len() {
                    for w in 0..self.uncertainties[e].len() {
                        let next = match f(
                            t,
                            self.states[e].label(x),
                            self.controls[e].label(u),
                            self.uncertainties[e].label(w),
                        ) {
                            None => StateId::CEMETERY,
                            Some(l) => self.state_id(t + 1, &l)?,
                        };
                        self.insert_transition(e, x, u, w, next);
                    }
                }
            }
        }
        Ok(())
    }

    /// Restricts the controls allowed in state `x` at epoch `t`.
    pub fn set_hard_constraint(&mut self, t: Time, x: &Label, allowed: &[Label]) -> Result<()> {
        let e = self.epoch_offset(t)?;
        let xi = self.state_id(t, x)?;
        let xi = xi
            .get()
            .ok_or_else(|| Error::InvalidParameter("cannot constrain the cemetery".into()))?;
        let mut mask = vec![false; self.controls[e].len()];
        for u in allowed {
            mask[self.control_id(t, u)?] = true;
        }
        if self.hard_constraints.is_none() {
            self.hard_constraints = Some(ControlConstraints::unconstrained(self));
        }
        if let Some(hc) = self.hard_constraints.as_mut() {
            hc.restrict(e, xi, mask);
        }
        Ok(())
    }

    pub(crate) fn push_issue(&mut self, issue: Issue) {
        self.construction_issues.push(issue);
    }

    /// Lists every totality violation, conflicting entry, empty admissible
    /// set and label mismatch. The model is usable iff the report is empty.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = self.construction_issues.clone();
        for t in self.grid.epochs() {
            let e = self.offset(t);
            for x in 0..self.states[e].len() {
                for u in 0..self.controls[e].len() {
                    for w in 0..self.uncertainties[e].len() {
                        if self.transitions[e][self.slot(e, x, u, w)].is_none() {
                            issues.push(Issue::MissingTransition {
                                time: t,
                                state: self.states[e].label(x).clone(),
                                control: self.controls[e].label(u).clone(),
                                uncertainty: self.uncertainties[e].label(w).clone(),
                            });
                        }
                    }
                }
            }
        }
        for &(e, x, u, w) in &self.conflicts {
            issues.push(Issue::ConflictingTransition {
                time: self.grid.t0 + e as Time,
                state: self.states[e].label(x).clone(),
                control: self.controls[e].label(u).clone(),
                uncertainty: self.uncertainties[e].label(w).clone(),
            });
        }
        if let Some(hc) = &self.hard_constraints {
            for (e, x, mask) in hc.entries() {
                if !mask.iter().any(|&b| b) {
                    issues.push(Issue::EmptyAdmissibleSet {
                        time: self.grid.t0 + e as Time,
                        state: self.states[e].label(x).clone(),
                    });
                }
            }
        }
        ValidationReport { issues }
    }

    /// Fails with the validation report unless the model is usable.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    pub fn is_hard_admissible(&self, t: Time, x: StateId, u: usize) -> bool {
        match &self.hard_constraints {
            None => !x.is_cemetery(),
            Some(hc) => hc.allows(self.offset(t), x, u),
        }
    }

    /// Controls allowed by the hard constraints at `(t, x)`, in label order.
    pub fn hard_admissible_controls(&self, t: Time, x: usize) -> Vec<usize> {
        let e = self.offset(t);
        match &self.hard_constraints {
            None => (0..self.controls[e].len()).collect(),
            Some(hc) => hc.allowed_controls(e, x, self.controls[e].len()),
        }
    }

    /// One transition by index. The cemetery absorbs; a control outside the
    /// hard constraints leads to the cemetery.
    pub fn step(&self, t: Time, x: StateId, u: usize, w: usize) -> Result<StateId> {
        let e = self.epoch_offset(t)?;
        if u >= self.controls[e].len() {
            return Err(Error::Range(format!("control index {u} at time {t}")));
        }
        if w >= self.uncertainties[e].len() {
            return Err(Error::Range(format!("uncertainty index {w} at time {t}")));
        }
        let Some(xi) = x.get() else {
            return Ok(StateId::CEMETERY);
        };
        if xi >= self.states[e].len() {
            return Err(Error::Range(format!("state index {xi} at time {t}")));
        }
        if !self.is_hard_admissible(t, x, u) {
            return Ok(StateId::CEMETERY);
        }
        self.transitions[e][self.slot(e, xi, u, w)].ok_or_else(|| {
            Error::InvalidModel(ValidationReport {
                issues: vec![Issue::MissingTransition {
                    time: t,
                    state: self.states[e].label(xi).clone(),
                    control: self.controls[e].label(u).clone(),
                    uncertainty: self.uncertainties[e].label(w).clone(),
                }],
            })
        })
    }

    /// [`SystemModel::step`] on labels; `x` may be the cemetery label.
    pub fn step_labels(&self, t: Time, x: &Label, u: &Label, w: &Label) -> Result<Label> {
        let xi = self.state_id(t, x)?;
        let ui = self.control_id(t, u)?;
        let wi = self.uncertainty_id(t, w)?;
        let next = self.step(t, xi, ui, wi)?;
        Ok(self.state_label(t + 1, next))
    }

    /// Fast path for validated models, indices assumed in range.
    pub(crate) fn next_state(&self, t: Time, x: StateId, u: usize, w: usize) -> StateId {
        let Some(xi) = x.get() else {
            return StateId::CEMETERY;
        };
        if !self.is_hard_admissible(t, x, u) {
            return StateId::CEMETERY;
        }
        let e = self.offset(t);
        self.transitions[e][self.slot(e, xi, u, w)].unwrap_or(StateId::CEMETERY)
    }

    /// Raw table entry (ignoring hard constraints), for serialization.
    pub(crate) fn table_entry(&self, t: Time, x: usize, u: usize, w: usize) -> Option<StateId> {
        let e = self.offset(t);
        self.transitions[e][self.slot(e, x, u, w)]
    }

    /// Every tail scenario `(w_t, ..., w_{T-1})` in lexicographic order.
    pub fn all_scenarios(&self, t: Time) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for s in t..self.grid.t_final {
            let n = self.num_uncertainties(s);
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..n).map(move |w| {
                        let mut q = p.clone();
                        q.push(w);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Number of tail scenarios from `t`, saturating.
    pub fn count_scenarios(&self, t: Time) -> u128 {
        (t..self.grid.t_final).fold(1u128, |acc, s| {
            acc.saturating_mul(self.num_uncertainties(s) as u128)
        })
    }

    /// States reachable at each time `t..=T` from `x` at `t` under
    /// hard-admissible controls, excluding the cemetery.
    pub fn reachable_sets(&self, t: Time, x: StateId) -> Vec<Vec<bool>> {
        let mut out = Vec::new();
        let mut current = vec![false; self.num_states(t)];
        if let Some(i) = x.get() {
            current[i] = true;
        }
        for s in t..self.grid.t_final {
            let mut next = vec![false; self.num_states(s + 1)];
            for (xi, _) in current.iter().enumerate().filter(|(_, &b)| b) {
                for u in self.hard_admissible_controls(s, xi) {
                    for w in 0..self.num_uncertainties(s) {
                        if let Some(n) = self.next_state(s, StateId::new(xi), u, w).get() {
                            next[n] = true;
                        }
                    }
                }
            }
            out.push(std::mem::replace(&mut current, next));
        }
        out.push(current);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::stock3;

    fn l(v: i64) -> Label {
        Label::from(v)
    }

    #[test]
    fn stock3_is_valid() {
        assert!(stock3().validate().is_empty());
    }

    #[test]
    fn step_follows_table() {
        let m = stock3();
        assert_eq!(m.step_labels(0, &l(1), &l(1), &l(0)).unwrap(), l(2));
        assert_eq!(m.step_labels(0, &l(3), &l(1), &l(0)).unwrap(), l(3));
        assert_eq!(m.step_labels(0, &l(2), &l(0), &l(1)).unwrap(), l(1));
    }

    #[test]
    fn step_hard_constraint_sends_to_cemetery() {
        let m = stock3();
        assert!(m.step_labels(0, &l(0), &l(1), &l(0)).unwrap().is_cemetery());
    }

    #[test]
    fn cemetery_absorbs() {
        let m = stock3();
        for u in 0..2 {
            for w in 0..2 {
                for t in 0..3 {
                    assert_eq!(m.step(t, StateId::CEMETERY, u, w).unwrap(), StateId::CEMETERY);
                }
            }
        }
    }

    #[test]
    fn unknown_label_is_rejected() {
        let m = stock3();
        assert!(matches!(
            m.step_labels(0, &l(9), &l(1), &l(0)),
            Err(Error::UnknownLabel { kind: "state", .. })
        ));
        assert!(matches!(m.step(3, StateId::new(0), 0, 0), Err(Error::Range(_))));
    }

    #[test]
    fn missing_transition_is_reported() {
        let grid = TimeGrid::new(0, 1).unwrap();
        let s = LabeledSet::new(["a", "b"]).unwrap();
        let u = LabeledSet::new(["u"]).unwrap();
        let w = LabeledSet::new(["w"]).unwrap();
        let mut m = SystemModel::with_constant_sets(grid, s, u, w).unwrap();
        m.set_transition(0, &"a".into(), &"u".into(), &"w".into(), &"b".into())
            .unwrap();
        let report = m.validate();
        assert_eq!(
            report.issues,
            vec![Issue::MissingTransition {
                time: 0,
                state: "b".into(),
                control: "u".into(),
                uncertainty: "w".into()
            }]
        );
        assert!(m.ensure_valid().is_err());
    }

    #[test]
    fn empty_admissible_set_is_reported() {
        let mut m = stock3();
        m.set_hard_constraint(1, &l(2), &[]).unwrap();
        assert_eq!(
            m.validate().issues,
            vec![Issue::EmptyAdmissibleSet { time: 1, state: l(2) }]
        );
    }

    #[test]
    fn conflicting_transition_is_reported() {
        let mut m = stock3();
        m.set_transition(0, &l(1), &l(1), &l(0), &l(3)).unwrap();
        assert!(matches!(
            m.validate().issues[..],
            [Issue::ConflictingTransition { time: 0, .. }]
        ));
    }

    #[test]
    fn segment_is_empty_when_reversed() {
        let g = TimeGrid::new(0, 3).unwrap();
        assert_eq!(g.segment(2, 1).count(), 0);
        assert_eq!(g.segment(1, 3).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(TimeGrid::new(2, 1).is_err());
    }

    #[test]
    fn labeled_set_rejects_duplicates_and_cemetery() {
        assert!(LabeledSet::new(["a", "a"]).is_err());
        assert!(LabeledSet::new([CEMETERY_LABEL]).is_err());
        assert!(LabeledSet::new(Vec::<Label>::new()).is_err());
    }

    #[test]
    fn integer_labels_serialize_as_numbers() {
        let v = serde_json::to_string(&vec![l(3), Label::from("x"), Label::from("007")]).unwrap();
        assert_eq!(v, r#"[3,"x","007"]"#);
        let back: Vec<Label> = serde_json::from_str(&v).unwrap();
        assert_eq!(back, vec![l(3), Label::from("x"), Label::from("007")]);
    }

    #[test]
    fn reachable_sets_from_one() {
        let m = stock3();
        let r = m.reachable_sets(0, StateId::new(1));
        assert_eq!(r[0], vec![false, true, false, false]);
        assert_eq!(r[1], vec![true, true, true, false]);
        assert_eq!(r[3], vec![true, true, true, true]);
    }
}
