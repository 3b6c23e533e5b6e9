//! Markovian and adapted strategies, admissibility checks and exhaustive
//! enumeration for the oracle solvers.
//!
//! An adapted policy at epoch `t` sees the current state and the
//! uncertainties realized since the start of its window, never later ones.
//! Keying tables on that prefix makes non-clairvoyance structural.

use std::collections::{BTreeMap, HashMap};
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::model::{ControlConstraints, StateId, SystemModel, Time};
use crate::trajectory::Scenario;

/// Default cap on the number of enumerated strategies.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// State feedback `u_t = policy_t(x_t)` on the epochs `start..end`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkovPolicy {
    start: Time,
    end: Time,
    table: Vec<BTreeMap<usize, usize>>,
}

impl MarkovPolicy {
    pub fn new(start: Time, end: Time) -> Self {
        let n = (end - start).max(0) as usize;
        MarkovPolicy {
            start,
            end,
            table: vec![BTreeMap::new(); n],
        }
    }

    /// Plays control index `u` in every state.
    pub fn constant(model: &SystemModel, start: Time, end: Time, u: usize) -> Self {
        let mut p = MarkovPolicy::new(start, end);
        for t in start..end {
            for x in 0..model.num_states(t) {
                p.set(t, x, u);
            }
        }
        p
    }

    pub fn window(&self) -> (Time, Time) {
        (self.start, self.end)
    }

    fn slot(&self, t: Time) -> Option<usize> {
        (self.start..self.end)
            .contains(&t)
            .then(|| (t - self.start) as usize)
    }

    pub fn set(&mut self, t: Time, x: usize, u: usize) {
        let i = self.slot(t).expect("epoch outside the policy window");
        self.table[i].insert(x, u);
    }

    pub fn get(&self, t: Time, x: usize) -> Option<usize> {
        self.table.get(self.slot(t)?)?.get(&x).copied()
    }

    /// `(t, x, u)` records in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (Time, usize, usize)> + '_ {
        self.table.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .map(move |(&x, &u)| (self.start + i as Time, x, u))
        })
    }

    /// The same decisions as an adapted table over every uncertainty prefix.
    pub fn to_adapted(&self, model: &SystemModel) -> AdaptedPolicy {
        let mut out = AdaptedPolicy::new(self.start, self.end);
        let mut prefixes: Vec<Vec<usize>> = vec![Vec::new()];
        for t in self.start..self.end {
            for prefix in &prefixes {
                for (x, u) in &self.table[(t - self.start) as usize] {
                    out.set(t, *x, prefix.clone(), *u);
                }
            }
            let n = model.num_uncertainties(t);
            prefixes = prefixes
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
}

/// Policy `u_t = policy_t(x_t, w_start, ..., w_{t-1})` on the epochs `start..end`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdaptedPolicy {
    start: Time,
    end: Time,
    table: Vec<BTreeMap<(usize, Vec<usize>), usize>>,
}

impl AdaptedPolicy {
    pub fn new(start: Time, end: Time) -> Self {
        let n = (end - start).max(0) as usize;
        AdaptedPolicy {
            start,
            end,
            table: vec![BTreeMap::new(); n],
        }
    }

    pub fn window(&self) -> (Time, Time) {
        (self.start, self.end)
    }

    fn slot(&self, t: Time) -> Option<usize> {
        (self.start..self.end)
            .contains(&t)
            .then(|| (t - self.start) as usize)
    }

    /// Sets the decision at epoch `t`; `prefix` must hold exactly the
    /// uncertainties of the epochs `start..t`.
    pub fn set(&mut self, t: Time, x: usize, prefix: Vec<usize>, u: usize) {
        let i = self.slot(t).expect("epoch outside the policy window");
        assert_eq!(prefix.len(), i, "prefix length must match the epoch");
        self.table[i].insert((x, prefix), u);
    }

    fn remove(&mut self, t: Time, x: usize, prefix: &[usize]) {
        if let Some(i) = self.slot(t) {
            self.table[i].remove(&(x, prefix.to_vec()));
        }
    }

    pub fn get(&self, t: Time, x: usize, prefix: &[usize]) -> Option<usize> {
        self.table
            .get(self.slot(t)?)?
            .get(&(x, prefix.to_vec()))
            .copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Time, usize, &[usize], usize)> + '_ {
        self.table.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .map(move |((x, p), &u)| (self.start + i as Time, *x, p.as_slice(), u))
        })
    }

    /// Collapses to a Markov table when no decision depends on the prefix.
    pub fn to_markov(&self) -> Option<MarkovPolicy> {
        let mut out = MarkovPolicy::new(self.start, self.end);
        for (t, x, _, u) in self.entries() {
            match out.get(t, x) {
                Some(prev) if prev != u => return None,
                _ => out.set(t, x, u),
            }
        }
        Some(out)
    }
}

/// A sequence of policies, Markovian or adapted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    Markov(MarkovPolicy),
    Adapted(AdaptedPolicy),
}

impl Strategy {
    pub fn window(&self) -> (Time, Time) {
        match self {
            Strategy::Markov(p) => p.window(),
            Strategy::Adapted(p) => p.window(),
        }
    }

    /// Decision at `(t, x)` given the uncertainties observed since the
    /// start of the window. Markov strategies ignore the prefix.
    pub fn evaluate_policy(&self, t: Time, x: StateId, prefix: &[usize]) -> Result<usize> {
        let Some(xi) = x.get() else {
            return Err(Error::StrategyDomain(format!("the cemetery at time {t}")));
        };
        let found = match self {
            Strategy::Markov(p) => p.get(t, xi),
            Strategy::Adapted(p) => p.get(t, xi, prefix),
        };
        found.ok_or_else(|| {
            Error::StrategyDomain(format!("time {t}, state #{xi}, prefix {prefix:?}"))
        })
    }

    /// Decision inside a closed loop started at `loop_start`; `observed`
    /// holds the uncertainties of `loop_start..t`.
    pub(crate) fn decide(
        &self,
        model: &SystemModel,
        t: Time,
        x: StateId,
        loop_start: Time,
        observed: &[usize],
    ) -> Result<usize> {
        if let Strategy::Adapted(p) = self {
            if p.start != loop_start {
                return Err(Error::StrategyDomain(format!(
                    "adapted strategy starting at {} run from time {loop_start}",
                    p.start
                )));
            }
        }
        self.evaluate_policy(t, x, observed).map_err(|e| match e {
            Error::StrategyDomain(_) if !x.is_cemetery() => Error::StrategyDomain(format!(
                "time {t}, state {}, observed {:?}",
                model.state_label(t, x),
                observed
            )),
            other => other,
        })
    }
}

/// A policy output outside the allowed controls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub time: Time,
    pub state: usize,
    pub prefix: Option<Vec<usize>>,
    pub control: usize,
}

/// Every table entry whose control is outside `constraints`. `None` allows everything.
pub fn check_admissible(
    strategy: &Strategy,
    model: &SystemModel,
    constraints: Option<&ControlConstraints>,
) -> Vec<Violation> {
    let Some(c) = constraints else {
        return Vec::new();
    };
    let allows = |t: Time, x: usize, u: usize| {
        model
            .epoch_offset(t)
            .map(|e| c.allows(e, StateId::new(x), u))
            .unwrap_or(false)
    };
    match strategy {
        Strategy::Markov(p) => p
            .entries()
            .filter(|&(t, x, u)| !allows(t, x, u))
            .map(|(time, state, control)| Violation {
                time,
                state,
                prefix: None,
                control,
            })
            .collect(),
        Strategy::Adapted(p) => p
            .entries()
            .filter(|&(t, x, _, u)| !allows(t, x, u))
            .map(|(time, state, prefix, control)| Violation {
                time,
                state,
                prefix: Some(prefix.to_vec()),
                control,
            })
            .collect(),
    }
}

fn check_budget(count: u128, budget: u128) -> Result<()> {
    if count > budget {
        Err(Error::EnumerationTooLarge { count, budget })
    } else {
        Ok(())
    }
}

/// Lexicographic stream of every Markov policy on `start..end` whose
/// decisions respect the model's hard constraints.
#[derive(Debug)]
pub struct MarkovEnumerator {
    start: Time,
    end: Time,
    keys: Vec<(Time, usize)>,
    choices: Vec<Vec<usize>>,
    digits: Vec<usize>,
    count: u128,
    done: bool,
}

impl MarkovEnumerator {
    /// Number of policies in the whole stream.
    pub fn total(&self) -> u128 {
        self.count
    }
}

impl Iterator for MarkovEnumerator {
    type Item = MarkovPolicy;

    fn next(&mut self) -> Option<MarkovPolicy> {
        if self.done {
            return None;
        }
        let mut p = MarkovPolicy::new(self.start, self.end);
        for (i, &(t, x)) in self.keys.iter().enumerate() {
            p.set(t, x, self.choices[i][self.digits[i]]);
        }
        // odometer, last key fastest
        self.done = true;
        for i in (0..self.digits.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.choices[i].len() {
                self.done = false;
                break;
            }
            self.digits[i] = 0;
        }
        Some(p)
    }
}

/// Enumerates Markov policies on the epochs `start..end`. `restrict_to`
/// optionally gives, per epoch of the window, the states needing a decision.
pub fn enumerate_markov(
    model: &SystemModel,
    start: Time,
    end: Time,
    restrict_to: Option<&[Vec<bool>]>,
    budget: u128,
) -> Result<MarkovEnumerator> {
    if start > end || model.epoch_offset(start).is_err() && start != end {
        return Err(Error::Range(format!("policy window {start}..{end}")));
    }
    if end > model.t_final() {
        return Err(Error::Range(format!("policy window {start}..{end}")));
    }
    let mut keys = Vec::new();
    let mut choices = Vec::new();
    for t in start..end {
        let i = (t - start) as usize;
        for x in 0..model.num_states(t) {
            let included = restrict_to
                .map(|r| r.get(i).and_then(|row| row.get(x)).copied().unwrap_or(false))
                .unwrap_or(true);
            if included {
                keys.push((t, x));
                choices.push(model.hard_admissible_controls(t, x));
            }
        }
    }
    let count = choices
        .iter()
        .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128));
    check_budget(count, budget)?;
    let done = count == 0;
    Ok(MarkovEnumerator {
        start,
        end,
        digits: vec![0; keys.len()],
        keys,
        choices,
        count,
        done,
    })
}

/// Prefix trie over a scenario collection.
struct ScenarioTrie {
    depth: Vec<usize>,
    prefix: Vec<Vec<usize>>,
    children: Vec<Vec<(usize, usize)>>,
}

impl ScenarioTrie {
    fn build(scenarios: &[Scenario]) -> Self {
        let mut trie = ScenarioTrie {
            depth: vec![0],
            prefix: vec![Vec::new()],
            children: vec![Vec::new()],
        };
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        index.insert(Vec::new(), 0);
        let mut sorted: Vec<&Scenario> = scenarios.iter().collect();
        sorted.sort();
        for sc in sorted {
            let mut node = 0;
            for k in 0..sc.len() {
                let p = sc.0[..=k].to_vec();
                node = match index.get(&p) {
                    Some(&n) => n,
                    None => {
                        let n = trie.depth.len();
                        trie.depth.push(k + 1);
                        trie.prefix.push(p.clone());
                        trie.children.push(Vec::new());
                        trie.children[node].push((sc.0[k], n));
                        index.insert(p, n);
                        n
                    }
                };
            }
        }
        trie
    }
}

fn adapted_count(
    model: &SystemModel,
    trie: &ScenarioTrie,
    t: Time,
    node: usize,
    x: StateId,
    memo: &mut HashMap<(usize, StateId), u128>,
) -> u128 {
    let Some(xi) = x.get() else { return 1 };
    if trie.children[node].is_empty() {
        return 1;
    }
    if let Some(&c) = memo.get(&(node, x)) {
        return c;
    }
    let r = t + trie.depth[node] as Time;
    let mut total = 0u128;
    for u in model.hard_admissible_controls(r, xi) {
        let mut prod = 1u128;
        for &(w, child) in &trie.children[node] {
            let next = model.next_state(r, x, u, w);
            prod = prod.saturating_mul(adapted_count(model, trie, t, child, next, memo));
        }
        total = total.saturating_add(prod);
    }
    memo.insert((node, x), total);
    total
}

/// Number of distinct adapted strategies from `(t, x)` that differ on the
/// scenario tree spanned by `scenarios`.
pub fn count_adapted(model: &SystemModel, t: Time, x: StateId, scenarios: &[Scenario]) -> u128 {
    let trie = ScenarioTrie::build(scenarios);
    adapted_count(model, &trie, t, 0, x, &mut HashMap::new())
}

struct AdaptedSearch<'a, F> {
    model: &'a SystemModel,
    trie: ScenarioTrie,
    t: Time,
    policy: AdaptedPolicy,
    queue: Vec<(usize, StateId)>,
    visit: F,
}

impl<F> AdaptedSearch<'_, F>
where
    F: FnMut(&AdaptedPolicy) -> Result<ControlFlow<()>>,
{
    fn run(&mut self, pos: usize) -> Result<ControlFlow<()>> {
        if pos == self.queue.len() {
            return (self.visit)(&self.policy);
        }
        let (node, x) = self.queue[pos];
        let Some(xi) = x.get().filter(|_| !self.trie.children[node].is_empty()) else {
            return self.run(pos + 1);
        };
        let r = self.t + self.trie.depth[node] as Time;
        let prefix = self.trie.prefix[node].clone();
        for u in self.model.hard_admissible_controls(r, xi) {
            self.policy.set(r, xi, prefix.clone(), u);
            let mark = self.queue.len();
            for k in 0..self.trie.children[node].len() {
                let (w, child) = self.trie.children[node][k];
                let next = self.model.next_state(r, x, u, w);
                self.queue.push((child, next));
            }
            let flow = self.run(pos + 1)?;
            self.queue.truncate(mark);
            if flow.is_break() {
                return Ok(flow);
            }
        }
        self.policy.remove(r, xi, &prefix);
        Ok(ControlFlow::Continue(()))
    }
}

/// Visits every adapted strategy from `(t, x)` on the scenario tree spanned
/// by `scenarios`: one hard-admissible control per reachable
/// `(epoch, state, prefix)` node. Nodes are ordered by epoch then prefix and
/// strategies come out in lexicographic order of their decisions.
pub fn for_each_adapted<F>(
    model: &SystemModel,
    t: Time,
    x: StateId,
    scenarios: &[Scenario],
    budget: u128,
    visit: F,
) -> Result<()>
where
    F: FnMut(&AdaptedPolicy) -> Result<ControlFlow<()>>,
{
    model.time_offset(t)?;
    let horizon = (model.t_final() - t) as usize;
    if let Some(bad) = scenarios.iter().find(|s| s.len() != horizon) {
        return Err(Error::Range(format!(
            "scenario {:?} does not span {t}..{}",
            bad.0,
            model.t_final()
        )));
    }
    let trie = ScenarioTrie::build(scenarios);
    let count = adapted_count(model, &trie, t, 0, x, &mut HashMap::new());
    check_budget(count, budget)?;
    let mut search = AdaptedSearch {
        model,
        trie,
        t,
        policy: AdaptedPolicy::new(t, model.t_final()),
        queue: vec![(0, x)],
        visit,
    };
    search.run(0).map(|_| ())
}
