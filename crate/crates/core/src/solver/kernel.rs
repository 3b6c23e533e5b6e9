use crate::error::{Error, Result};
use crate::model::{StateId, SystemModel, Time};
use crate::regime::{ConstraintMap, ProbabilityModel};
use crate::risk::CompensatedSum;
use crate::strategy::MarkovPolicy;

/// Per-time state subsets over `start..=T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelTable {
    start: Time,
    sets: Vec<Vec<bool>>,
}

impl KernelTable {
    pub fn start(&self) -> Time {
        self.start
    }

    pub fn at(&self, t: Time) -> &[bool] {
        &self.sets[(t - self.start) as usize]
    }

    pub fn contains(&self, t: Time, x: StateId) -> bool {
        x.get().is_some_and(|i| self.at(t)[i])
    }

    /// Members at `t` by index.
    pub fn members(&self, t: Time) -> Vec<usize> {
        self.at(t)
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn times(&self) -> impl Iterator<Item = Time> + '_ {
        (0..self.sets.len()).map(|k| self.start + k as Time)
    }
}

/// Per-`(t, x)` reals over `start..=T`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    start: Time,
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn start(&self) -> Time {
        self.start
    }

    pub fn at(&self, t: Time) -> &[f64] {
        &self.values[(t - self.start) as usize]
    }

    /// Zero for the cemetery.
    pub fn value(&self, t: Time, x: StateId) -> f64 {
        x.get().map_or(0.0, |i| self.at(t)[i])
    }

    pub fn times(&self) -> impl Iterator<Item = Time> + '_ {
        (0..self.values.len()).map(|k| self.start + k as Time)
    }
}

/// A DP result with the Markov policy read off its maximizers.
#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub table: T,
    pub policy: MarkovPolicy,
}

fn check_closure(model: &SystemModel, closure: &[Vec<bool>]) -> Result<Time> {
    let n = model.grid().num_epochs();
    if closure.len() > n {
        return Err(Error::Range(format!(
            "closure covers {} epochs, the grid has {n}",
            closure.len()
        )));
    }
    let start = model.t_final() - closure.len() as Time;
    for (k, mask) in closure.iter().enumerate() {
        let t = start + k as Time;
        if mask.len() != model.num_uncertainties(t) {
            return Err(Error::Range(format!(
                "closure at time {t} has {} entries for {} uncertainties",
                mask.len(),
                model.num_uncertainties(t)
            )));
        }
    }
    Ok(start)
}

fn fallback_control(model: &SystemModel, t: Time, x: usize) -> usize {
    model.hard_admissible_controls(t, x).first().copied().unwrap_or(0)
}

/// First control in `candidates` sending `x` into `target` for every `w` of the closure.
fn robust_control(
    model: &SystemModel,
    t: Time,
    x: usize,
    candidates: impl IntoIterator<Item = usize>,
    closure: &[bool],
    target: &[bool],
) -> Option<usize> {
    candidates.into_iter().find(|&u| {
        closure.iter().enumerate().filter(|(_, &b)| b).all(|(w, _)| {
            model
                .next_state(t, StateId::new(x), u, w)
                .get()
                .is_some_and(|n| target[n])
        })
    })
}

/// Robust viability kernel: `V_T = K_T` and `V_t` the states of `K_t` with
/// an allowed control keeping every uncertainty of the closure inside
/// `V_{t+1}`. `closure` holds one mask per epoch from the start time
/// `T - closure.len()` to `T - 1`.
pub fn robust_viability_kernel(
    model: &SystemModel,
    constraints: &ConstraintMap,
    closure: &[Vec<bool>],
) -> Result<Solution<KernelTable>> {
    let start = check_closure(model, closure)?;
    let t_final = model.t_final();
    let mut sets = vec![constraints.acceptable_at(t_final).to_vec()];
    let mut policy = MarkovPolicy::new(start, t_final);
    for t in (start..t_final).rev() {
        let next = &sets[0];
        let mut current = vec![false; model.num_states(t)];
        for x in 0..current.len() {
            let found = if constraints.acceptable_at(t)[x] {
                robust_control(
                    model,
                    t,
                    x,
                    constraints.allowed_controls(t, x, model.num_controls(t)),
                    &closure[(t - start) as usize],
                    next,
                )
            } else {
                None
            };
            current[x] = found.is_some();
            policy.set(t, x, found.unwrap_or_else(|| fallback_control(model, t, x)));
        }
        sets.insert(0, current);
    }
    Ok(Solution {
        table: KernelTable { start, sets },
        policy,
    })
}

/// Robust recovery sets: `R_T = V_T` and `R_t = V_t` together with the states
/// having a hard-admissible control sending every uncertainty of the closure
/// into `R_{t+1}`. The policy plays the viability control inside `V_t` and
/// the reaching control elsewhere in `R_t`.
pub fn robust_recovery_sets(
    model: &SystemModel,
    constraints: &ConstraintMap,
    closure: &[Vec<bool>],
) -> Result<Solution<KernelTable>> {
    let viable = robust_viability_kernel(model, constraints, closure)?;
    let start = viable.table.start;
    let t_final = model.t_final();
    let mut sets = vec![viable.table.at(t_final).to_vec()];
    let mut policy = viable.policy.clone();
    for t in (start..t_final).rev() {
        let next = &sets[0];
        let mut current = viable.table.at(t).to_vec();
        for x in 0..current.len() {
            if current[x] {
                continue;
            }
            if let Some(u) = robust_control(
                model,
                t,
                x,
                model.hard_admissible_controls(t, x),
                &closure[(t - start) as usize],
                next,
            ) {
                current[x] = true;
                policy.set(t, x, u);
            }
        }
        sets.insert(0, current);
    }
    Ok(Solution {
        table: KernelTable { start, sets },
        policy,
    })
}

/// Maximal probability of satisfying the constraints from `(t, x)` to the
/// final time under a white-noise law, for every `t >= start`.
pub fn stochastic_viability_values(
    model: &SystemModel,
    constraints: &ConstraintMap,
    probability: &ProbabilityModel,
    start: Time,
) -> Result<Solution<ValueTable>> {
    if !probability.is_white_noise() {
        return Err(Error::Unsupported(
            "dynamic programming needs a white-noise law; use brute force for weighted scenarios"
                .into(),
        ));
    }
    probability.check(model)?;
    model.time_offset(start)?;
    let t_final = model.t_final();
    let terminal: Vec<f64> = constraints
        .acceptable_at(t_final)
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let mut values = vec![terminal];
    let mut policy = MarkovPolicy::new(start, t_final);
    for t in (start..t_final).rev() {
        let law = probability
            .stage_law(model, t)
            .ok_or_else(|| Error::Range(format!("no stage law at time {t}")))?;
        let next = &values[0];
        let mut current = vec![0.0; model.num_states(t)];
        for (x, slot) in current.iter_mut().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            if constraints.acceptable_at(t)[x] {
                for u in constraints.allowed_controls(t, x, model.num_controls(t)) {
                    let v = law
                        .iter()
                        .enumerate()
                        .map(|(w, &p)| {
                            let n = model.next_state(t, StateId::new(x), u, w);
                            p * n.get().map_or(0.0, |i| next[i])
                        })
                        .collect::<CompensatedSum>()
                        .value();
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((u, v));
                    }
                }
            }
            *slot = best.map_or(0.0, |b| b.1);
            policy.set(
                t,
                x,
                best.map_or_else(|| fallback_control(model, t, x), |b| b.0),
            );
        }
        values.insert(0, current);
    }
    Ok(Solution {
        table: ValueTable { start, values },
        policy,
    })
}
