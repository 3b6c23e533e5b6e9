//! The stock fixture checked against a closed-form re-implementation of its
//! dynamics `x' = min(3, max(0, x + u - w))` with `u <= x`.

use std::collections::BTreeMap;

use reskit::fixtures::{stock3, stock3_acceptable};
use reskit::model::{StateId, SystemModel};
use reskit::regime::{
    exit_count, path_satisfies, recovery_time, regime_membership, AmbiguitySet, ConstraintMap,
    ControlPredicate, ProbabilityModel, RecoveryTime, RegimeSpec, ScenarioSubset,
};
use reskit::risk::{
    cost, cvar, extended_risk, AmbiguitySup, CostSpec, DiscreteRandomVariable,
    Expectation, ExtendedRiskSpec, InnerMeasure, RiskMeasure, TableCost, WorstCase,
};
use reskit::solver::{
    brute_force_resilient, resilience_indicator, resilient_states, robust_recovery_sets,
    robust_viability_kernel, stochastic_viability_values, StrategyClass,
};
use reskit::strategy::{
    check_admissible, enumerate_markov, AdaptedPolicy, MarkovPolicy, Strategy, DEFAULT_BUDGET,
};
use reskit::trajectory::{bundle, closed_loop, flow, ControlPath, Scenario, StatePath};

mod oracle {
    /// `None` is the cemetery.
    pub fn next(x: Option<i64>, u: i64, w: i64) -> Option<i64> {
        let x = x?;
        (u <= x).then(|| (x + u - w).clamp(0, 3))
    }

    pub fn in_k(x: Option<i64>) -> bool {
        matches!(x, Some(2 | 3))
    }

    /// Every admissible Markov table `policy[t][x]` on epochs `0..3`.
    pub fn markov_policies() -> Vec<[[i64; 4]; 3]> {
        let per_epoch: Vec<[i64; 4]> = (0..8)
            .map(|bits: i64| [0, bits & 1, bits >> 1 & 1, bits >> 2 & 1])
            .collect();
        let mut out = Vec::new();
        for a in &per_epoch {
            for b in &per_epoch {
                for c in &per_epoch {
                    out.push([*a, *b, *c]);
                }
            }
        }
        out
    }

    pub fn run(policy: &[[i64; 4]; 3], t: usize, x: i64, ws: &[i64]) -> Vec<Option<i64>> {
        let mut path = vec![Some(x)];
        for (k, &w) in ws.iter().enumerate() {
            let cur = *path.last().unwrap();
            let u = cur.map_or(0, |c| policy[t + k][c as usize]);
            path.push(next(cur, u, w));
        }
        path
    }

    pub fn scenarios(len: usize) -> Vec<Vec<i64>> {
        (0..1usize << len)
            .map(|bits| (0..len).map(|k| (bits >> (len - 1 - k) & 1) as i64).collect())
            .collect()
    }

    /// Some adapted strategy keeps every scenario of `ws_at` inside K from `t`
    /// (`recover = false`) or ends every scenario in K without the cemetery.
    pub fn game(t: usize, x: Option<i64>, ws_at: &dyn Fn(usize) -> Vec<i64>, recover: bool) -> bool {
        if !recover && !in_k(x) {
            return false;
        }
        let Some(xv) = x else { return false };
        if t == 3 {
            return in_k(x);
        }
        (0..=xv.min(1)).any(|u| {
            ws_at(t)
                .into_iter()
                .all(|w| game(t + 1, next(Some(xv), u, w), ws_at, recover))
        })
    }
}

fn k(m: &SystemModel) -> ConstraintMap {
    ConstraintMap::from_labels(m, &stock3_acceptable()).unwrap()
}

fn ids(xs: &[i64]) -> Vec<StateId> {
    xs.iter().map(|&x| StateId::new(x as usize)).collect()
}

fn buy(m: &SystemModel) -> Strategy {
    Strategy::Markov(MarkovPolicy::constant(m, 0, 3, 1))
}

fn all(m: &SystemModel, t: i64) -> Vec<Scenario> {
    m.all_scenarios(t).into_iter().map(Scenario).collect()
}

fn path(xs: &[i64]) -> (StatePath, ControlPath) {
    let states = StatePath { start: 0, states: ids(xs) };
    let controls = ControlPath {
        start: 0,
        controls: vec![Some(1); xs.len() - 1],
    };
    (states, controls)
}

#[test]
fn step_matches_closed_form() {
    let m = stock3();
    for t in 0..3 {
        for x in 0..4 {
            for u in 0..2 {
                for w in 0..2 {
                    let got = m.step(t, StateId::new(x as usize), u as usize, w as usize).unwrap();
                    let want = oracle::next(Some(x), u, w);
                    assert_eq!(got.get().map(|i| i as i64), want, "t={t} x={x} u={u} w={w}");
                }
                assert!(m.step(t, StateId::CEMETERY, 1, 0).unwrap().is_cemetery());
            }
        }
    }
    assert_eq!(m.step(0, StateId::new(1), 1, 0).unwrap(), StateId::new(2));
    assert!(m.step(0, StateId::new(0), 1, 0).unwrap().is_cemetery());
}

#[test]
fn flows() {
    let m = stock3();
    let p = flow(&m, 0, 3, StateId::new(1), &[1, 1, 1], &[0, 0, 0]).unwrap();
    assert_eq!(p.states, ids(&[1, 2, 3, 3]));
    let p = flow(&m, 0, 3, StateId::new(0), &[1, 0, 0], &[0, 0, 0]).unwrap();
    assert_eq!(p.states[0], StateId::new(0));
    assert!(p.states[1..].iter().all(|x| x.is_cemetery()));
    let p = flow(&m, 2, 2, StateId::new(3), &[], &[]).unwrap();
    assert_eq!(p.states, ids(&[3]));
}

#[test]
fn closed_loops_and_bundles() {
    let m = stock3();
    let s = buy(&m);
    let policy = [[0, 1, 1, 1]; 3];
    for ws in oracle::scenarios(3) {
        let wu: Vec<usize> = ws.iter().map(|&w| w as usize).collect();
        let (xs, us) = closed_loop(&m, &s, 0, 3, StateId::new(1), &wu).unwrap();
        let want: Vec<StateId> = oracle::run(&policy, 0, 1, &ws)
            .into_iter()
            .map(|x| x.map_or(StateId::CEMETERY, |v| StateId::new(v as usize)))
            .collect();
        assert_eq!(xs.states, want, "{ws:?}");
        assert_eq!(us.controls, vec![Some(1); 3]);
    }
    let (xs, us) = closed_loop(&m, &s, 3, 3, StateId::new(2), &[]).unwrap();
    assert_eq!((xs.states, us.controls), (ids(&[2]), vec![]));

    let b = bundle(&m, &s, 0, StateId::new(2), &all(&m, 0)).unwrap();
    assert_eq!(b.len(), 8);
    for e in b.entries.values() {
        assert!(e.states.states.iter().all(|x| matches!(x.get(), Some(2 | 3))));
    }
    let one = Scenario(vec![1, 0, 1]);
    let b = bundle(&m, &s, 0, StateId::new(1), std::slice::from_ref(&one)).unwrap();
    let (xs, us) = closed_loop(&m, &s, 0, 3, StateId::new(1), &one.0).unwrap();
    assert_eq!(b.get(&one).unwrap().states, xs);
    assert_eq!(b.get(&one).unwrap().controls, us);
    let b = bundle(&m, &s, 0, StateId::CEMETERY, &all(&m, 0)).unwrap();
    assert!(b.entries.values().all(|e| e.states.states.iter().all(|x| x.is_cemetery())));
}

#[test]
fn policy_evaluation() {
    let m = stock3();
    assert_eq!(buy(&m).evaluate_policy(1, StateId::new(2), &[0]).unwrap(), 1);
    let mut a = AdaptedPolicy::new(0, 3);
    a.set(0, 2, vec![], 0);
    for w in 0..2 {
        a.set(1, 2, vec![w], w);
    }
    let a = Strategy::Adapted(a);
    assert_eq!(a.evaluate_policy(1, StateId::new(2), &[1]).unwrap(), 1);
    assert_eq!(a.evaluate_policy(1, StateId::new(2), &[0]).unwrap(), 0);
}

#[test]
fn admissibility_scan() {
    let m = stock3();
    let hard = m.hard_constraints();
    let v = check_admissible(&buy(&m), &m, hard);
    let want: Vec<(i64, usize)> = (0..3).map(|t| (t, 0)).collect();
    assert_eq!(v.iter().map(|v| (v.time, v.state)).collect::<Vec<_>>(), want);
    let zero = Strategy::Markov(MarkovPolicy::constant(&m, 0, 3, 0));
    assert!(check_admissible(&zero, &m, hard).is_empty());
    assert!(check_admissible(&buy(&m), &m, None).is_empty());
}

#[test]
fn policy_counts() {
    let m = stock3();
    let all_states = enumerate_markov(&m, 0, 3, None, DEFAULT_BUDGET).unwrap();
    assert_eq!(all_states.total(), oracle::markov_policies().len() as u128);
    assert_eq!(all_states.count(), 512);
    let upper = vec![vec![false, false, true, true]; 4];
    assert_eq!(enumerate_markov(&m, 0, 3, Some(&upper), DEFAULT_BUDGET).unwrap().total(), 64);
    assert_eq!(enumerate_markov(&m, 2, 2, None, DEFAULT_BUDGET).unwrap().count(), 1);
}

#[test]
fn path_predicates() {
    let m = stock3();
    let k = k(&m);
    let (xs, us) = path(&[2, 3, 3, 3]);
    assert!(path_satisfies(&k, &xs, &us, 0));
    let (xs, us) = path(&[1, 2, 3, 3]);
    assert!(path_satisfies(&k, &xs, &us, 1));
    assert!(!path_satisfies(&k, &xs, &us, 0));
    assert_eq!(recovery_time(&xs, &us, &k, 0), RecoveryTime::At(1));
    let (xs, us) = path(&[1, 1, 1, 1]);
    assert_eq!(recovery_time(&xs, &us, &k, 0), RecoveryTime::Never);
    let (xs, us) = path(&[2, 3, 2, 3]);
    assert_eq!(exit_count(&xs, &us, &k, 0), 0);
    assert_eq!(recovery_time(&xs, &us, &k, 0), RecoveryTime::At(0));
    let (xs, us) = path(&[1, 2, 1, 2]);
    assert_eq!(exit_count(&xs, &us, &k, 0), 2);
    let dead = StatePath { start: 0, states: vec![StateId::CEMETERY; 4] };
    let none = ControlPath { start: 0, controls: vec![None; 3] };
    assert!(!path_satisfies(&k, &dead, &none, 0));
    assert_eq!(exit_count(&dead, &none, &k, 0), 4);
}

#[test]
fn regime_membership_examples() {
    let m = stock3();
    let half = ProbabilityModel::stationary_white_noise(&m, vec![0.5, 0.5]).unwrap();
    let sv = |beta| RegimeSpec::StochasticViability {
        constraints: k(&m),
        probability: half.clone(),
        beta,
    };
    let b2 = bundle(&m, &buy(&m), 0, StateId::new(2), &all(&m, 0)).unwrap();
    let b1 = bundle(&m, &buy(&m), 0, StateId::new(1), &all(&m, 0)).unwrap();
    assert!(regime_membership(&m, &sv(1.0), &b2).unwrap());
    assert!(!regime_membership(&m, &sv(0.01), &b1).unwrap());
    let rr = |scenarios| RegimeSpec::RobustRecovery {
        constraints: k(&m),
        scenarios,
    };
    assert!(!regime_membership(&m, &rr(ScenarioSubset::All), &b1).unwrap());
    let calm = ScenarioSubset::Listed(vec![Scenario(vec![0, 0, 0])]);
    assert!(regime_membership(&m, &rr(calm), &b1).unwrap());
}

#[test]
fn costs_and_measures() {
    let m = stock3();
    let (xs, us) = path(&[2, 3, 3, 3]);
    let s = Scenario(vec![0, 0, 0]);
    assert_eq!(cost(&m, &CostSpec::IndicatorExit(k(&m)), &xs, &us, &s).unwrap(), 0.0);
    let (ys, vs) = path(&[1, 2, 1, 2]);
    assert_eq!(cost(&m, &CostSpec::ExitCount(k(&m)), &ys, &vs, &s).unwrap(), 2.0);
    let mut table = TableCost::new(&m, Some(0.0), Some(0.0));
    table.set_terminal(3, 1.0);
    assert_eq!(cost(&m, &CostSpec::Table(table), &xs, &us, &s).unwrap(), 1.0);

    let z = DiscreteRandomVariable::new(vec![(1.0, 0.9), (10.0, 0.1)]).unwrap();
    let by_eta = z
        .atoms()
        .iter()
        .map(|&(eta, _)| {
            eta + z.atoms().iter().map(|&(v, w)| w * (v - eta).max(0.0)).sum::<f64>() / 0.1
        })
        .fold(f64::INFINITY, f64::min);
    let sorted = cvar(&z, 0.9).unwrap();
    assert!((sorted - 10.0).abs() < 1e-12 && (by_eta - 10.0).abs() < 1e-12);

    let half = ProbabilityModel::stationary_white_noise(&m, vec![0.5, 0.5]).unwrap();
    let sup = AmbiguitySup {
        laws: AmbiguitySet::new(vec![half.clone()]).unwrap(),
        inner: InnerMeasure::Expectation,
    };
    let e = Expectation { law: half };
    let costs: BTreeMap<Scenario, f64> = all(&m, 0)
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i as f64 * 0.25))
        .collect();
    assert_eq!(sup.evaluate(&m, 0, &costs).unwrap(), e.evaluate(&m, 0, &costs).unwrap());
}

#[test]
fn extended_risk_examples() {
    let m = stock3();
    let exit = CostSpec::IndicatorExit(k(&m));
    let worst = ExtendedRiskSpec::new(exit.clone(), WorstCase { scenarios: ScenarioSubset::All });
    let b2 = bundle(&m, &buy(&m), 0, StateId::new(2), &all(&m, 0)).unwrap();
    assert_eq!(extended_risk(&m, &worst, &b2).unwrap(), 0.0);
    let law = ProbabilityModel::stationary_white_noise(&m, vec![0.5, 0.5]).unwrap();
    let mean = ExtendedRiskSpec::new(exit, Expectation { law });
    let b1 = bundle(&m, &buy(&m), 0, StateId::new(1), &all(&m, 0)).unwrap();
    assert_eq!(extended_risk(&m, &mean, &b1).unwrap(), 1.0);
    let calm = ScenarioSubset::Listed(vec![Scenario(vec![0, 0, 0])]);
    let tau = ExtendedRiskSpec::new(
        CostSpec::RecoveryTime { constraints: k(&m), sentinel: None },
        WorstCase { scenarios: calm },
    );
    assert_eq!(extended_risk(&m, &tau, &b1).unwrap(), 1.0);
}

#[test]
fn kernel_against_markov_oracle() {
    let m = stock3();
    let closure = ScenarioSubset::All.closure(&m, 0).unwrap();
    let v = robust_viability_kernel(&m, &k(&m), &closure).unwrap();
    let policies = oracle::markov_policies();
    for t in 0..=3usize {
        for x in 0..4 {
            let oracle = policies.iter().any(|p| {
                oracle::scenarios(3 - t)
                    .iter()
                    .all(|ws| oracle::run(p, t, x, ws).into_iter().all(oracle::in_k))
            });
            assert_eq!(v.table.contains(t as i64, StateId::new(x as usize)), oracle, "t={t} x={x}");
        }
    }
    let everything = robust_viability_kernel(&m, &ConstraintMap::everything(&m), &closure).unwrap();
    assert!((0..=3).all(|t| everything.table.members(t) == vec![0, 1, 2, 3]));
}

#[test]
fn recovery_sets_against_tree_oracle() {
    let m = stock3();
    let both = |_: usize| vec![0i64, 1];
    let calm = |_: usize| vec![0i64];
    for (closure, ws_at) in [
        (ScenarioSubset::All.closure(&m, 0).unwrap(), &both as &dyn Fn(usize) -> Vec<i64>),
        (vec![vec![true, false]; 3], &calm),
    ] {
        let r = robust_recovery_sets(&m, &k(&m), &closure).unwrap();
        let v = robust_viability_kernel(&m, &k(&m), &closure).unwrap();
        for t in 0..=3usize {
            for x in 0..4 {
                let id = StateId::new(x as usize);
                let want = oracle::game(t, Some(x), ws_at, true);
                assert_eq!(r.table.contains(t as i64, id), want, "t={t} x={x}");
                assert_eq!(v.table.contains(t as i64, id), oracle::game(t, Some(x), ws_at, false));
                assert!(!v.table.contains(t as i64, id) || r.table.contains(t as i64, id));
            }
        }
    }
    let calm = robust_recovery_sets(&m, &k(&m), &vec![vec![true, false]; 3]).unwrap();
    assert!(calm.table.contains(0, StateId::new(1)));
}

#[test]
fn stochastic_values_against_markov_oracle() {
    let m = stock3();
    let law = ProbabilityModel::stationary_white_noise(&m, vec![0.5, 0.5]).unwrap();
    let s = stochastic_viability_values(&m, &k(&m), &law, 0).unwrap();
    let policies = oracle::markov_policies();
    for t in 0..=3usize {
        for x in 0..4 {
            let best = policies
                .iter()
                .map(|p| {
                    let ws = oracle::scenarios(3 - t);
                    let hits = ws
                        .iter()
                        .filter(|w| oracle::run(p, t, x, w).into_iter().all(oracle::in_k))
                        .count();
                    hits as f64 / ws.len() as f64
                })
                .fold(0.0, f64::max);
            assert_eq!(s.table.value(t as i64, StateId::new(x as usize)), best, "t={t} x={x}");
        }
    }
    assert_eq!(s.table.value(0, StateId::new(2)), 1.0);
    assert_eq!(s.table.value(0, StateId::new(1)), 0.0);
    assert_eq!(s.table.value(2, StateId::new(2)), 1.0);
}

#[test]
fn resilience_examples() {
    let m = stock3();
    let rr = RegimeSpec::RobustRecovery {
        constraints: k(&m),
        scenarios: ScenarioSubset::All,
    };
    let r = brute_force_resilient(&m, &rr, 0, StateId::new(2), StrategyClass::Adapted, DEFAULT_BUDGET)
        .unwrap();
    assert!(r.resilient);
    let b = bundle(&m, &buy(&m), 0, StateId::new(2), &all(&m, 0)).unwrap();
    assert!(regime_membership(&m, &rr, &b).unwrap());
    assert_eq!(resilient_states(&m, &rr, 0).unwrap().states(), vec![2, 3]);

    let sv = RegimeSpec::StochasticViability {
        constraints: k(&m),
        probability: ProbabilityModel::stationary_white_noise(&m, vec![0.5, 0.5]).unwrap(),
        beta: 0.5,
    };
    let r = brute_force_resilient(&m, &sv, 0, StateId::new(1), StrategyClass::Markov, DEFAULT_BUDGET)
        .unwrap();
    assert!(!r.resilient);

    let zero = RegimeSpec::ControlPredicate {
        predicate: ControlPredicate::any_of_labels(&m, &[0.into()]).unwrap(),
        scenarios: ScenarioSubset::All,
    };
    assert_eq!(resilient_states(&m, &zero, 0).unwrap().states(), vec![0, 1, 2, 3]);
}

#[test]
fn indicator_examples() {
    let m = stock3();
    let tau = |scenarios: ScenarioSubset| {
        ExtendedRiskSpec::new(
            CostSpec::RecoveryTime { constraints: k(&m), sentinel: None },
            WorstCase { scenarios },
        )
    };
    let rr = |scenarios| RegimeSpec::RobustRecovery {
        constraints: k(&m),
        scenarios,
    };
    let r = resilience_indicator(
        &m,
        &rr(ScenarioSubset::All),
        &tau(ScenarioSubset::All),
        0,
        StateId::new(2),
        StrategyClass::Adapted,
        DEFAULT_BUDGET,
    )
    .unwrap();
    assert_eq!(r.value, 0.0);
    let calm = ScenarioSubset::Listed(vec![Scenario(vec![0, 0, 0])]);
    let r = resilience_indicator(
        &m,
        &rr(calm.clone()),
        &tau(calm),
        0,
        StateId::new(1),
        StrategyClass::Adapted,
        DEFAULT_BUDGET,
    )
    .unwrap();
    assert_eq!(r.value, 1.0);
    let free = ExtendedRiskSpec::new(
        CostSpec::Table(TableCost::new(&m, Some(0.0), Some(0.0))),
        WorstCase { scenarios: ScenarioSubset::All },
    );
    for x in [2, 3] {
        let r = resilience_indicator(
            &m,
            &rr(ScenarioSubset::All),
            &free,
            0,
            StateId::new(x),
            StrategyClass::Markov,
            DEFAULT_BUDGET,
        )
        .unwrap();
        assert_eq!(r.value, 0.0);
    }
}
