use std::path::Path;

use super::read_text;
use crate::error::{Error, Result};
use crate::model::{Label, SystemModel, Time};
use crate::trajectory::Scenario;

/// One scenario per line as comma-separated uncertainty labels. Blank lines
/// and lines starting with `#` are skipped. A line covers either the whole
/// grid or the tail from `start`.
pub fn parse_scenarios(
    model: &SystemModel,
    text: &str,
    source: &str,
    start: Time,
) -> Result<Vec<Scenario>> {
    let full = model.grid().num_epochs();
    let tail = (model.t_final() - start).max(0) as usize;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let location = || format!("{source}:{}", n + 1);
        let labels: Vec<&str> = line.split(',').map(str::trim).collect();
        let first = if labels.len() == full {
            model.t0()
        } else if labels.len() == tail {
            start
        } else {
            return Err(Error::Parse {
                location: location(),
                message: format!(
                    "{} labels, expected {full} (whole grid) or {tail} (from time {start})",
                    labels.len()
                ),
            });
        };
        let mut ws = Vec::with_capacity(labels.len());
        for (k, l) in labels.iter().enumerate() {
            let t = first + k as Time;
            ws.push(
                model
                    .uncertainty_id(t, &Label::new(*l))
                    .map_err(|e| Error::CrossReference(format!("{}: {e}", location())))?,
            );
        }
        out.push(Scenario(ws[ws.len() - tail..].to_vec()));
    }
    Ok(out)
}

pub fn read_scenarios(model: &SystemModel, path: &Path, start: Time) -> Result<Vec<Scenario>> {
    parse_scenarios(model, &read_text(path)?, &path.display().to_string(), start)
}

/// Labels of a tail scenario starting at `start`.
pub fn scenario_labels(model: &SystemModel, scenario: &Scenario, start: Time) -> Vec<Label> {
    scenario
        .0
        .iter()
        .enumerate()
        .map(|(k, &w)| model.uncertainty_label(start + k as Time, w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::stock3;

    #[test]
    fn full_and_tail_lines() {
        let m = stock3();
        let s = parse_scenarios(&m, "# comment\n0,1,1\n\n1, 0\n", "s", 1).unwrap();
        assert_eq!(s, vec![Scenario(vec![1, 1]), Scenario(vec![1, 0])]);
    }

    #[test]
    fn bad_lines() {
        let m = stock3();
        assert!(matches!(parse_scenarios(&m, "0,1", "s", 0), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_scenarios(&m, "0,1,7", "s", 0),
            Err(Error::CrossReference(_))
        ));
        assert!(parse_scenarios(&m, "\n# nothing\n", "s", 0).unwrap().is_empty());
    }
}
