use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{from_json, read_text};
use crate::error::{Error, Result};
use crate::model::{Issue, Label, LabeledSet, StateId, SystemModel, Time, TimeGrid};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    times: TimesDoc,
    states: SetsDoc,
    controls: SetsDoc,
    uncertainties: SetsDoc,
    dynamics: Vec<(Time, Label, Label, Label, Label)>,
    #[serde(default)]
    hard_constraints: Option<Vec<(Time, Label, Vec<Label>)>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TimesDoc {
    t0: Time,
    #[serde(rename = "T")]
    t_final: Time,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SetsDoc {
    PerTime(Vec<Vec<Label>>),
    Constant(Vec<Label>),
}

fn expand(doc: SetsDoc, what: &str, count: usize) -> Result<Vec<LabeledSet>> {
    let lists = match doc {
        SetsDoc::Constant(list) => vec![list; count],
        SetsDoc::PerTime(lists) => {
            if lists.len() != count {
                return Err(Error::Parse {
                    location: what.to_string(),
                    message: format!("expected {count} per-time lists, got {}", lists.len()),
                });
            }
            lists
        }
    };
    lists
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            LabeledSet::new(l).map_err(|e| Error::Parse {
                location: format!("{what}[{i}]"),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Records a bad dynamics or constraint entry as a validation issue.
fn record(model: &mut SystemModel, context: String, t: Time, outcome: Result<()>) -> Result<()> {
    match outcome {
        Ok(()) => Ok(()),
        Err(Error::UnknownLabel { label, .. }) => {
            model.push_issue(Issue::UnknownLabel {
                context,
                label: Label::new(label),
            });
            Ok(())
        }
        Err(Error::Range(_)) => {
            model.push_issue(Issue::TimeOutOfRange { context, time: t });
            Ok(())
        }
        Err(e) => Err(Error::CrossReference(format!("{context}: {e}"))),
    }
}

/// Parses a model document. Unknown labels and times in `dynamics` and
/// `hard_constraints` end up in the validation report; see [`load_model`].
pub fn parse_model(text: &str, source: &str) -> Result<SystemModel> {
    let doc: ModelDoc = from_json(text, source)?;
    let grid = TimeGrid::new(doc.times.t0, doc.times.t_final).map_err(|e| Error::Parse {
        location: format!("{source} (field `times`)"),
        message: e.to_string(),
    })?;
    let states = expand(doc.states, "states", grid.num_times())?;
    let controls = expand(doc.controls, "controls", grid.num_epochs())?;
    let uncertainties = expand(doc.uncertainties, "uncertainties", grid.num_epochs())?;
    let mut model = SystemModel::new(grid, states, controls, uncertainties)?;
    for (i, (t, x, u, w, next)) in doc.dynamics.iter().enumerate() {
        let outcome = model.set_transition(*t, x, u, w, next);
        record(&mut model, format!("dynamics[{i}]"), *t, outcome)?;
    }
    if let Some(hc) = &doc.hard_constraints {
        for (i, (t, x, allowed)) in hc.iter().enumerate() {
            let outcome = model.set_hard_constraint(*t, x, allowed);
            record(&mut model, format!("hard_constraints[{i}]"), *t, outcome)?;
        }
    }
    Ok(model)
}

pub fn read_model(path: &Path) -> Result<SystemModel> {
    parse_model(&read_text(path)?, &path.display().to_string())
}

/// Reads a model file and rejects it unless validation passes.
pub fn load_model(path: &Path) -> Result<SystemModel> {
    let model = read_model(path)?;
    model.ensure_valid()?;
    Ok(model)
}

fn sets_json(sets: Vec<&LabeledSet>) -> Value {
    if sets.windows(2).all(|w| w[0] == w[1]) && !sets.is_empty() {
        json!(sets[0].labels())
    } else {
        json!(sets.iter().map(|s| s.labels()).collect::<Vec<_>>())
    }
}

/// The model document for `model`, dynamics listed in index order.
pub fn model_to_json(model: &SystemModel) -> Value {
    let grid = model.grid();
    let states = sets_json(grid.times().map(|t| model.states_at(t).expect("grid time")).collect());
    let controls = sets_json(grid.epochs().map(|t| model.controls_at(t).expect("grid epoch")).collect());
    let uncertainties = sets_json(
        grid.epochs()
            .map(|t| model.uncertainties_at(t).expect("grid epoch"))
            .collect(),
    );
    let mut dynamics = Vec::new();
    let mut hard = Vec::new();
    for t in grid.epochs() {
        for x in 0..model.num_states(t) {
            let xl = model.state_label(t, StateId::new(x));
            for u in 0..model.num_controls(t) {
                for w in 0..model.num_uncertainties(t) {
                    if let Some(next) = model.table_entry(t, x, u, w) {
                        dynamics.push(json!([
                            t,
                            xl,
                            model.control_label(t, u),
                            model.uncertainty_label(t, w),
                            model.state_label(t + 1, next)
                        ]));
                    }
                }
            }
            if model.hard_constraints().is_some() {
                let allowed: Vec<Label> = model
                    .hard_admissible_controls(t, x)
                    .into_iter()
                    .map(|u| model.control_label(t, u))
                    .collect();
                hard.push(json!([t, xl, allowed]));
            }
        }
    }
    let mut doc = json!({
        "times": {"t0": grid.t0(), "T": grid.t_final()},
        "states": states,
        "controls": controls,
        "uncertainties": uncertainties,
        "dynamics": dynamics,
    });
    if model.hard_constraints().is_some() {
        doc["hard_constraints"] = json!(hard);
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::stock3;

    #[test]
    fn stock3_round_trip() {
        let m = stock3();
        let text = serde_json::to_string_pretty(&model_to_json(&m)).unwrap();
        let back = parse_model(&text, "stock3.json").unwrap();
        assert!(back.validate().is_empty());
        assert_eq!(model_to_json(&back), model_to_json(&m));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = r#"{"times": {"t0": 0, "T": 1}, "states": [0], "controls": [0],
            "uncertainties": [0], "dynamics": [[0, 0, 0, 0, 0]], "colour": 1}"#;
        match parse_model(text, "m.json") {
            Err(Error::Parse { location, message }) => {
                assert!(message.contains("colour"), "{message}");
                assert!(location.starts_with("m.json:2:"), "{location}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_field_has_path() {
        let text = r#"{"times": {"t0": 0, "T": 1}, "states": [0], "controls": [0],
            "uncertainties": [0], "dynamics": [[0, 0, 0, 0]]}"#;
        match parse_model(text, "m.json") {
            Err(Error::Parse { location, .. }) => assert!(location.contains("dynamics[0]"), "{location}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_label_in_dynamics() {
        let text = r#"{"times": {"t0": 0, "T": 1}, "states": [0], "controls": [0],
            "uncertainties": [0], "dynamics": [[0, 0, 0, 0, 9]]}"#;
        let m = parse_model(text, "m.json").unwrap();
        let report = m.validate();
        assert!(report.issues.contains(&Issue::UnknownLabel {
            context: "dynamics[0]".into(),
            label: Label::from(9),
        }));
    }

    #[test]
    fn missing_transition_is_reported_not_rejected() {
        let text = r#"{"times": {"t0": 0, "T": 1}, "states": [0, 1], "controls": [0],
            "uncertainties": [0], "dynamics": [[0, 0, 0, 0, 1]]}"#;
        let m = parse_model(text, "m.json").unwrap();
        assert_eq!(m.validate().issues.len(), 1);
    }
}
