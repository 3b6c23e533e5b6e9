//! Counter-state extension: rewrites "some control of the path lies in a
//! given set" into a final-time state constraint on an enlarged model.

use crate::error::{Error, Result};
use crate::model::{Label, LabeledSet, StateId, SystemModel};
use crate::regime::{ConstraintMap, ControlPredicate, RegimeSpec, ScenarioSubset};

/// The enlarged model, states labelled `"{x}|{c}"` with `c` recording
/// whether a control of the predicate has been played.
#[derive(Clone, Debug)]
pub struct CounterExtension {
    pub model: SystemModel,
    /// Viability regime requiring `c = 1` at the final time.
    pub regime: RegimeSpec,
}

impl CounterExtension {
    /// The extended state `(x, 0)`.
    pub fn lift(&self, x: StateId) -> StateId {
        x.get().map_or(StateId::CEMETERY, |i| StateId::new(2 * i))
    }
}

fn lifted_label(x: &Label, c: usize) -> Label {
    Label::new(format!("{x}|{c}"))
}

/// Builds the counter extension of `model` for `predicate`.
pub fn counter_extension(
    model: &SystemModel,
    predicate: &ControlPredicate,
) -> Result<CounterExtension> {
    let grid = *model.grid();
    let mut states = Vec::new();
    for t in grid.times() {
        let base = model.states_at(t)?;
        states.push(LabeledSet::new(
            base.labels()
                .iter()
                .flat_map(|l| [lifted_label(l, 0), lifted_label(l, 1)]),
        )?);
    }
    let controls = grid
        .epochs()
        .map(|t| model.controls_at(t).cloned())
        .collect::<Result<Vec<_>>>()?;
    let uncertainties = grid
        .epochs()
        .map(|t| model.uncertainties_at(t).cloned())
        .collect::<Result<Vec<_>>>()?;
    let mut ext = SystemModel::new(grid, states, controls, uncertainties)?;
    ext.fill_transitions(|t, xc, u, w| {
        let (x, c) = xc.as_str().rsplit_once('|')?;
        let xi = model.state_id(t, &Label::new(x)).ok()?;
        let ui = model.control_id(t, u).ok()?;
        let wi = model.uncertainty_id(t, w).ok()?;
        let next = model.table_entry(t, xi.get()?, ui, wi)?;
        let hit = c == "1" || predicate.mask(model, t)[ui];
        Some(lifted_label(
            &model.state_label(t + 1, next.get().map(StateId::new)?),
            usize::from(hit),
        ))
    })?;
    if model.hard_constraints().is_some() {
        for t in grid.epochs() {
            for (xi, l) in model.states_at(t)?.labels().iter().enumerate() {
                let allowed: Vec<Label> = model
                    .hard_admissible_controls(t, xi)
                    .into_iter()
                    .map(|u| model.control_label(t, u))
                    .collect();
                for c in 0..2 {
                    ext.set_hard_constraint(t, &lifted_label(l, c), &allowed)?;
                }
            }
        }
    }
    ext.ensure_valid()?;

    let mut acceptable: Vec<Vec<bool>> = grid
        .times()
        .map(|t| vec![true; ext.num_states(t)])
        .collect();
    let last = acceptable
        .last_mut()
        .ok_or_else(|| Error::Range("empty grid".into()))?;
    for (i, slot) in last.iter_mut().enumerate() {
        *slot = i % 2 == 1;
    }
    let regime = RegimeSpec::DeterministicViability {
        constraints: ConstraintMap::new(&ext, acceptable, None)?,
        scenarios: ScenarioSubset::All,
    };
    Ok(CounterExtension { model: ext, regime })
}
