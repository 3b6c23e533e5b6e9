//! Small reference systems used in tests, docs and the CLI fixtures.

use crate::model::{Label, LabeledSet, SystemModel, TimeGrid};

/// Stock model on `{0,1,2,3}` over `t = 0..=3` with `x' = min(3, max(0, x + u - w))`,
/// controls `{0,1}`, uncertainties `{0,1}` and the hard constraint `u <= x`.
pub fn stock3() -> SystemModel {
    let grid = TimeGrid::new(0, 3).expect("static grid");
    let states = LabeledSet::new((0..=3).map(Label::from)).expect("static labels");
    let controls = LabeledSet::new((0..=1).map(Label::from)).expect("static labels");
    let noises = LabeledSet::new((0..=1).map(Label::from)).expect("static labels");
    let mut model = SystemModel::with_constant_sets(grid, states, controls, noises)
        .expect("static model");
    let num = |l: &Label| l.as_str().parse::<i64>().expect("integer label");
    model
        .fill_transitions(|_, x, u, w| Some(Label::from((num(x) + num(u) - num(w)).clamp(0, 3))))
        .expect("closed-form dynamics");
    for t in 0..3 {
        for x in 0..=3i64 {
            let allowed: Vec<Label> = (0..=1).filter(|&u| u <= x).map(Label::from).collect();
            model
                .set_hard_constraint(t, &Label::from(x), &allowed)
                .expect("static constraint");
        }
    }
    model
}

/// Acceptable set `K = {2, 3}` of the stock fixture.
pub fn stock3_acceptable() -> Vec<Label> {
    vec![Label::from(2), Label::from(3)]
}
