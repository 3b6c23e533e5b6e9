//! File formats: JSON model, policy and regime documents, comma-separated
//! scenario lists, and deterministic result rendering.

mod model_file;
mod output;
mod policy_file;
mod regime_file;
mod scenario_file;

pub use model_file::{load_model, model_to_json, parse_model, read_model};
pub use output::{bundle_csv, bundle_json, format_number, round_sig, to_canonical_json};
pub use policy_file::{parse_strategy, read_strategy, strategy_to_json};
pub use regime_file::{parse_regime, read_regime, read_risk, RegimeFile};
pub use scenario_file::{parse_scenarios, read_scenarios, scenario_labels};

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Deserializes `text`, reporting the line, column and field path of failures.
pub(crate) fn from_json<T: DeserializeOwned>(text: &str, source: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        parse_error(source, &inner, Some(path))
    })?;
    de.end().map_err(|e| parse_error(source, &e, None))?;
    Ok(value)
}

fn parse_error(source: &str, e: &serde_json::Error, path: Option<String>) -> Error {
    let full = e.to_string();
    let message = match full.rfind(" at line ") {
        Some(i) => full[..i].to_string(),
        None => full,
    };
    let mut location = format!("{source}:{}:{}", e.line(), e.column());
    if let Some(p) = path.filter(|p| p != ".") {
        location.push_str(&format!(" (field `{p}`)"));
    }
    Error::Parse { location, message }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}
