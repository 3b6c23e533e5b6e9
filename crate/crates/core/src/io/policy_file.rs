use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{from_json, read_text};
use crate::error::{Error, Result};
use crate::model::{Label, StateId, SystemModel, Time};
use crate::strategy::{AdaptedPolicy, MarkovPolicy, Strategy};

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum PolicyDoc {
    Markov {
        #[serde(default)]
        window: Option<(Time, Time)>,
        policy: Vec<(Time, Label, Label)>,
    },
    Adapted {
        #[serde(default)]
        window: Option<(Time, Time)>,
        policy: Vec<(Time, Label, Vec<Label>, Label)>,
    },
}

fn check_window(model: &SystemModel, (start, end): (Time, Time)) -> Result<(Time, Time)> {
    if start > end || start < model.t0() || end > model.t_final() {
        return Err(Error::CrossReference(format!(
            "policy window {start}..{end} is not inside {}..{}",
            model.t0(),
            model.t_final()
        )));
    }
    Ok((start, end))
}

fn record(i: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::CrossReference(format!("policy[{i}]: {e}"))
}

fn epoch_in(window: (Time, Time), t: Time, i: usize) -> Result<()> {
    if (window.0..window.1).contains(&t) {
        Ok(())
    } else {
        Err(Error::CrossReference(format!(
            "policy[{i}]: time {t} is outside the window {}..{}",
            window.0, window.1
        )))
    }
}

/// Parses a policy document against `model`. Without a `window`, a Markov
/// policy spans its first recorded epoch to the final time and an adapted
/// one starts where its prefixes are empty.
pub fn parse_strategy(model: &SystemModel, text: &str, source: &str) -> Result<Strategy> {
    match from_json::<PolicyDoc>(text, source)? {
        PolicyDoc::Markov { window, policy } => {
            let window = match window {
                Some(w) => w,
                None => (
                    policy.iter().map(|r| r.0).min().unwrap_or(model.t0()),
                    model.t_final(),
                ),
            };
            let window = check_window(model, window)?;
            let mut p = MarkovPolicy::new(window.0, window.1);
            for (i, (t, x, u)) in policy.iter().enumerate() {
                epoch_in(window, *t, i)?;
                let xi = model.state_id(*t, x).map_err(record(i))?;
                let xi = xi.get().ok_or_else(|| {
                    Error::CrossReference(format!("policy[{i}]: no decision in the cemetery"))
                })?;
                let ui = model.control_id(*t, u).map_err(record(i))?;
                p.set(*t, xi, ui);
            }
            Ok(Strategy::Markov(p))
        }
        PolicyDoc::Adapted { window, policy } => {
            let window = match window {
                Some(w) => w,
                None => (
                    policy
                        .iter()
                        .map(|r| r.0 - r.2.len() as Time)
                        .min()
                        .unwrap_or(model.t0()),
                    model.t_final(),
                ),
            };
            let window = check_window(model, window)?;
            let mut p = AdaptedPolicy::new(window.0, window.1);
            for (i, (t, x, prefix, u)) in policy.iter().enumerate() {
                epoch_in(window, *t, i)?;
                if prefix.len() as Time != t - window.0 {
                    return Err(Error::CrossReference(format!(
                        "policy[{i}]: prefix at time {t} must list the {} uncertainties since {}",
                        t - window.0,
                        window.0
                    )));
                }
                let xi = model.state_id(*t, x).map_err(record(i))?;
                let xi = xi.get().ok_or_else(|| {
                    Error::CrossReference(format!("policy[{i}]: no decision in the cemetery"))
                })?;
                let ui = model.control_id(*t, u).map_err(record(i))?;
                let ws = prefix
                    .iter()
                    .enumerate()
                    .map(|(k, w)| model.uncertainty_id(window.0 + k as Time, w))
                    .collect::<Result<Vec<_>>>()
                    .map_err(record(i))?;
                p.set(*t, xi, ws, ui);
            }
            Ok(Strategy::Adapted(p))
        }
    }
}

pub fn read_strategy(model: &SystemModel, path: &Path) -> Result<Strategy> {
    parse_strategy(model, &read_text(path)?, &path.display().to_string())
}

/// The policy document for `strategy`, records in canonical order.
pub fn strategy_to_json(model: &SystemModel, strategy: &Strategy) -> Value {
    let (start, end) = strategy.window();
    let x = |t: Time, x: usize| model.state_label(t, StateId::new(x));
    match strategy {
        Strategy::Markov(p) => json!({
            "type": "markov",
            "window": [start, end],
            "policy": p
                .entries()
                .map(|(t, xi, u)| json!([t, x(t, xi), model.control_label(t, u)]))
                .collect::<Vec<_>>(),
        }),
        Strategy::Adapted(p) => json!({
            "type": "adapted",
            "window": [start, end],
            "policy": p
                .entries()
                .map(|(t, xi, prefix, u)| {
                    let ws: Vec<Label> = prefix
                        .iter()
                        .enumerate()
                        .map(|(k, &w)| model.uncertainty_label(start + k as Time, w))
                        .collect();
                    json!([t, x(t, xi), ws, model.control_label(t, u)])
                })
                .collect::<Vec<_>>(),
        }),
    }
}
