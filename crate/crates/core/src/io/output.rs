use serde_json::{json, Value};

use super::scenario_labels;
use crate::model::{SystemModel, Time};
use crate::trajectory::PathBundle;

/// `v` rounded to 12 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Shortest decimal text of `v` rounded to 12 significant digits.
pub fn format_number(v: f64) -> String {
    let r = round_sig(v);
    if r.is_infinite() {
        return if r > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{r}")
}

/// Pretty-printed JSON with sorted keys and a trailing newline.
pub fn to_canonical_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// One object per scenario with its labels, states and controls.
pub fn bundle_json(model: &SystemModel, bundle: &PathBundle) -> Value {
    let t = bundle.start;
    let paths: Vec<Value> = bundle
        .entries
        .iter()
        .enumerate()
        .map(|(id, (s, e))| {
            let states: Vec<_> = e
                .states
                .times()
                .map(|(r, x)| model.state_label(r, x))
                .collect();
            let controls: Vec<Value> = e
                .controls
                .controls
                .iter()
                .enumerate()
                .map(|(k, u)| match u {
                    Some(u) => json!(model.control_label(t + k as Time, *u)),
                    None => Value::Null,
                })
                .collect();
            json!({
                "scenario_id": id,
                "scenario": scenario_labels(model, s, t),
                "states": states,
                "controls": controls,
            })
        })
        .collect();
    json!({
        "start": t,
        "initial": model.state_label(t, bundle.initial),
        "paths": paths,
    })
}

/// CSV with columns `scenario_id,time,state,control`; the final time and
/// cemetery times have an empty control. Scenario ids follow the bundle order.
pub fn bundle_csv(model: &SystemModel, bundle: &PathBundle) -> String {
    let mut out = String::from("scenario_id,time,state,control\n");
    for (id, e) in bundle.entries.values().enumerate() {
        for (k, (r, x)) in e.states.times().enumerate() {
            let control = e
                .controls
                .controls
                .get(k)
                .copied()
                .flatten()
                .map(|u| model.control_label(r, u).to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{id},{r},{},{}\n",
                model.state_label(r, x),
                control
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::stock3;
    use crate::model::StateId;
    use crate::strategy::{MarkovPolicy, Strategy};
    use crate::trajectory::{bundle, Scenario};

    #[test]
    fn rounding() {
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_of_a_bundle() {
        let m = stock3();
        let s = Strategy::Markov(MarkovPolicy::constant(&m, 0, 3, 1));
        let b = bundle(&m, &s, 0, StateId::new(1), &[Scenario(vec![0, 0, 0])]).unwrap();
        assert_eq!(
            bundle_csv(&m, &b),
            "scenario_id,time,state,control\n0,0,1,1\n0,1,2,1\n0,2,3,1\n0,3,3,\n"
        );
    }
}
