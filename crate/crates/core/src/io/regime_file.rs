use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{from_json, read_scenarios, read_text};
use crate::error::{Error, Result};
use crate::model::{ControlConstraints, Label, SystemModel, Time};
use crate::regime::{
    AmbiguitySet, ConstraintMap, ControlPredicate, ProbabilityModel, RegimeSpec, ScenarioSubset,
};
use crate::risk::{
    AmbiguitySup, CostSpec, Cvar, Expectation, ExtendedRiskSpec, InnerMeasure, RiskMeasureSpec,
    TableCost, WorstCase,
};
use crate::trajectory::Scenario;

type ControlRecords = Vec<(Time, Label, Vec<Label>)>;

#[derive(Deserialize)]
#[serde(untagged)]
enum StateSetDoc {
    PerTime(Vec<Vec<Label>>),
    Constant(Vec<Label>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenariosDoc {
    /// `"all"` or a path to a scenario file.
    Name(String),
    List(Vec<Vec<Label>>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProbabilityRef {
    Path(String),
    Inline(ProbabilityDoc),
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ProbabilityDoc {
    /// Either one law per epoch (`stages`) or the same law at every epoch (`law`),
    /// probabilities in uncertainty label order.
    WhiteNoise {
        #[serde(default)]
        stages: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        law: Option<Vec<f64>>,
    },
    Weighted { scenarios: Vec<(Vec<Label>, f64)> },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum CostDoc {
    IndicatorExit {
        acceptable: StateSetDoc,
        #[serde(default)]
        controls: Option<ControlRecords>,
    },
    ExitCount {
        acceptable: StateSetDoc,
        #[serde(default)]
        controls: Option<ControlRecords>,
    },
    RecoveryTime {
        acceptable: StateSetDoc,
        #[serde(default)]
        controls: Option<ControlRecords>,
        #[serde(default)]
        sentinel: Option<f64>,
    },
    Table {
        #[serde(default)]
        default_stage: Option<f64>,
        #[serde(default)]
        default_terminal: Option<f64>,
        #[serde(default)]
        stage: Vec<(Time, Label, Label, f64)>,
        #[serde(default)]
        terminal: Vec<(Label, f64)>,
        #[serde(default)]
        cemetery: Option<f64>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum InnerDoc {
    Expectation,
    Cvar { beta: f64 },
    WorstCase,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum MeasureDoc {
    Expectation {
        probability: ProbabilityRef,
    },
    WorstCase {
        #[serde(default)]
        scenarios: Option<ScenariosDoc>,
    },
    Cvar {
        probability: ProbabilityRef,
        beta: f64,
    },
    AmbiguitySup {
        probabilities: Vec<ProbabilityRef>,
        inner: InnerDoc,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RiskDoc {
    cost: CostDoc,
    measure: MeasureDoc,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RegimeDoc {
    Bounded {
        bound: StateSetDoc,
        #[serde(default)]
        scenarios: Option<ScenariosDoc>,
        #[serde(default)]
        indicator: Option<RiskDoc>,
    },
    DeterministicViability {
        acceptable: StateSetDoc,
        #[serde(default)]
        controls: Option<ControlRecords>,
        #[serde(default)]
        scenarios: Option<ScenariosDoc>,
        #[serde(default)]
        indicator: Option<RiskDoc>,
    },
    RobustRecovery {
        acceptable: StateSetDoc,
        #[serde(default)]
        controls: Option<ControlRecords>,
        #[serde(default)]
        scenarios: Option<ScenariosDoc>,
        #[serde(default)]
        indicator: Option<RiskDoc>,
    },
    StochasticViability {
        acceptable: StateSetDoc,
        #[serde(default)]
        controls: Option<ControlRecords>,
        probability: ProbabilityRef,
        beta: f64,
        #[serde(default)]
        indicator: Option<RiskDoc>,
    },
    ExitProbability {
        bound: StateSetDoc,
        probability: ProbabilityRef,
        beta: f64,
        #[serde(default)]
        indicator: Option<RiskDoc>,
    },
    ExitCountLimit {
        bound: StateSetDoc,
        max_exits: usize,
        probability: ProbabilityRef,
        #[serde(default)]
        indicator: Option<RiskDoc>,
    },
    RiskBound {
        risk: RiskDoc,
        alpha: f64,
        #[serde(default)]
        indicator: Option<RiskDoc>,
    },
    ControlPredicate {
        any_of: Vec<Label>,
        #[serde(default)]
        scenarios: Option<ScenariosDoc>,
        #[serde(default)]
        indicator: Option<RiskDoc>,
    },
}

/// A regime document with its optional `indicator` risk specification.
#[derive(Clone, Debug)]
pub struct RegimeFile {
    pub regime: RegimeSpec,
    pub indicator: Option<ExtendedRiskSpec>,
}

struct Ctx<'a> {
    model: &'a SystemModel,
    base: Option<&'a Path>,
}

fn xref(field: &str) -> impl FnOnce(Error) -> Error + '_ {
    move |e| match e {
        Error::Parse { .. } | Error::CrossReference(_) | Error::Io(_) => e,
        other => Error::CrossReference(format!("{field}: {other}")),
    }
}

impl Ctx<'_> {
    fn path(&self, p: &str) -> PathBuf {
        match self.base {
            Some(dir) if Path::new(p).is_relative() => dir.join(p),
            _ => PathBuf::from(p),
        }
    }

    fn states(&self, doc: &StateSetDoc, field: &str) -> Result<ConstraintMap> {
        let m = self.model;
        match doc {
            StateSetDoc::Constant(labels) => {
                ConstraintMap::from_labels(m, labels).map_err(xref(field))
            }
            StateSetDoc::PerTime(lists) => {
                if lists.len() != m.grid().num_times() {
                    return Err(Error::CrossReference(format!(
                        "{field}: {} per-time lists for {} times",
                        lists.len(),
                        m.grid().num_times()
                    )));
                }
                let mut masks = Vec::new();
                for (t, labels) in m.grid().times().zip(lists) {
                    let mut mask = vec![false; m.num_states(t)];
                    for l in labels {
                        let x = m.state_id(t, l).map_err(xref(field))?;
                        let i = x.get().ok_or_else(|| {
                            Error::CrossReference(format!("{field}: the cemetery cannot be listed"))
                        })?;
                        mask[i] = true;
                    }
                    masks.push(mask);
                }
                ConstraintMap::new(m, masks, None).map_err(xref(field))
            }
        }
    }

    fn constraints(
        &self,
        acceptable: &StateSetDoc,
        controls: &Option<ControlRecords>,
        field: &str,
    ) -> Result<ConstraintMap> {
        let k = self.states(acceptable, field)?;
        let Some(records) = controls else { return Ok(k) };
        let m = self.model;
        let mut c = ControlConstraints::unconstrained(m);
        for (i, (t, x, allowed)) in records.iter().enumerate() {
            let here = format!("controls[{i}]");
            let e = m.epoch_offset(*t).map_err(xref(&here))?;
            let xi = m.state_id(*t, x).map_err(xref(&here))?;
            let xi = xi
                .get()
                .ok_or_else(|| Error::CrossReference(format!("{here}: the cemetery has no controls")))?;
            let mut mask = vec![false; m.num_controls(*t)];
            for u in allowed {
                mask[m.control_id(*t, u).map_err(xref(&here))?] = true;
            }
            c.restrict(e, xi, mask);
        }
        Ok(k.with_controls(c))
    }

    fn scenario_list(&self, list: &[Vec<Label>], field: &str) -> Result<Vec<Scenario>> {
        let m = self.model;
        let full = m.grid().num_epochs();
        list.iter()
            .map(|labels| {
                let first = m.t_final() - labels.len() as Time;
                if labels.len() > full {
                    return Err(Error::CrossReference(format!(
                        "{field}: scenario with {} labels on a grid of {full} epochs",
                        labels.len()
                    )));
                }
                labels
                    .iter()
                    .enumerate()
                    .map(|(k, l)| m.uncertainty_id(first + k as Time, l))
                    .collect::<Result<Vec<_>>>()
                    .map(Scenario)
                    .map_err(xref(field))
            })
            .collect()
    }

    fn scenarios(&self, doc: &Option<ScenariosDoc>, field: &str) -> Result<ScenarioSubset> {
        match doc {
            None => Ok(ScenarioSubset::All),
            Some(ScenariosDoc::Name(n)) if n == "all" => Ok(ScenarioSubset::All),
            Some(ScenariosDoc::Name(p)) => {
                let list = read_scenarios(self.model, &self.path(p), self.model.t0())?;
                if list.is_empty() {
                    return Err(Error::InvalidParameter(format!("{field}: `{p}` lists no scenario")));
                }
                Ok(ScenarioSubset::Listed(list))
            }
            Some(ScenariosDoc::List(list)) => {
                if list.is_empty() {
                    return Err(Error::InvalidParameter(format!("{field}: empty scenario list")));
                }
                Ok(ScenarioSubset::Listed(self.scenario_list(list, field)?))
            }
        }
    }

    fn probability(&self, doc: &ProbabilityRef, field: &str) -> Result<ProbabilityModel> {
        let m = self.model;
        match doc {
            ProbabilityRef::Path(p) => {
                let path = self.path(p);
                let text = read_text(&path)?;
                let inner: ProbabilityDoc = from_json(&text, &path.display().to_string())?;
                self.probability(&ProbabilityRef::Inline(inner), field)
            }
            ProbabilityRef::Inline(ProbabilityDoc::WhiteNoise { stages, law }) => match (stages, law) {
                (Some(s), None) => ProbabilityModel::white_noise(m, s.clone()).map_err(xref(field)),
                (None, Some(l)) => {
                    ProbabilityModel::stationary_white_noise(m, l.clone()).map_err(xref(field))
                }
                _ => Err(Error::InvalidParameter(format!(
                    "{field}: white noise needs exactly one of `stages` and `law`"
                ))),
            },
            ProbabilityRef::Inline(ProbabilityDoc::Weighted { scenarios }) => {
                let labels: Vec<Vec<Label>> = scenarios.iter().map(|s| s.0.clone()).collect();
                let list = self.scenario_list(&labels, field)?;
                let weighted = list.into_iter().zip(scenarios.iter().map(|s| s.1)).collect();
                ProbabilityModel::weighted(m, weighted).map_err(xref(field))
            }
        }
    }

    fn risk(&self, doc: &RiskDoc, field: &str) -> Result<ExtendedRiskSpec> {
        let m = self.model;
        let cost = match &doc.cost {
            CostDoc::IndicatorExit {
                acceptable,
                controls,
            } => CostSpec::IndicatorExit(self.constraints(acceptable, controls, field)?),
            CostDoc::ExitCount {
                acceptable,
                controls,
            } => CostSpec::ExitCount(self.constraints(acceptable, controls, field)?),
            CostDoc::RecoveryTime {
                acceptable,
                controls,
                sentinel,
            } => CostSpec::RecoveryTime {
                constraints: self.constraints(acceptable, controls, field)?,
                sentinel: *sentinel,
            },
            CostDoc::Table {
                default_stage,
                default_terminal,
                stage,
                terminal,
                cemetery,
            } => {
                let mut table = TableCost::new(m, *default_stage, *default_terminal);
                for (i, (t, x, u, c)) in stage.iter().enumerate() {
                    let here = format!("{field}.cost.stage[{i}]");
                    m.epoch_offset(*t).map_err(xref(&here))?;
                    let xi = m.state_id(*t, x).map_err(xref(&here))?;
                    let xi = xi.get().ok_or_else(|| {
                        Error::CrossReference(format!("{here}: use `cemetery` for the cemetery cost"))
                    })?;
                    let ui = m.control_id(*t, u).map_err(xref(&here))?;
                    table.set_stage(*t, xi, ui, *c);
                }
                for (i, (x, c)) in terminal.iter().enumerate() {
                    let here = format!("{field}.cost.terminal[{i}]");
                    let xi = m.state_id(m.t_final(), x).map_err(xref(&here))?;
                    let xi = xi.get().ok_or_else(|| {
                        Error::CrossReference(format!("{here}: use `cemetery` for the cemetery cost"))
                    })?;
                    table.set_terminal(xi, *c);
                }
                if let Some(c) = cemetery {
                    table.set_cemetery(*c);
                }
                CostSpec::Table(table)
            }
        };
        let measure = match &doc.measure {
            MeasureDoc::Expectation { probability } => RiskMeasureSpec::new(Expectation {
                law: self.probability(probability, field)?,
            }),
            MeasureDoc::WorstCase { scenarios } => RiskMeasureSpec::new(WorstCase {
                scenarios: self.scenarios(scenarios, field)?,
            }),
            MeasureDoc::Cvar { probability, beta } => RiskMeasureSpec::new(Cvar {
                law: self.probability(probability, field)?,
                beta: *beta,
            }),
            MeasureDoc::AmbiguitySup {
                probabilities,
                inner,
            } => RiskMeasureSpec::new(AmbiguitySup {
                laws: AmbiguitySet::new(
                    probabilities
                        .iter()
                        .map(|p| self.probability(p, field))
                        .collect::<Result<Vec<_>>>()?,
                )?,
                inner: match inner {
                    InnerDoc::Expectation => InnerMeasure::Expectation,
                    InnerDoc::Cvar { beta } => InnerMeasure::Cvar { beta: *beta },
                    InnerDoc::WorstCase => InnerMeasure::WorstCase,
                },
            }),
        };
        let spec = ExtendedRiskSpec { cost, measure };
        spec.check(m)?;
        Ok(spec)
    }

    fn regime(&self, doc: &RegimeDoc) -> Result<RegimeFile> {
        let (regime, indicator) = match doc {
            RegimeDoc::Bounded {
                bound,
                scenarios,
                indicator,
            } => (
                RegimeSpec::Bounded {
                    bound: self.states(bound, "bound")?,
                    scenarios: self.scenarios(scenarios, "scenarios")?,
                },
                indicator,
            ),
            RegimeDoc::DeterministicViability {
                acceptable,
                controls,
                scenarios,
                indicator,
            } => (
                RegimeSpec::DeterministicViability {
                    constraints: self.constraints(acceptable, controls, "acceptable")?,
                    scenarios: self.scenarios(scenarios, "scenarios")?,
                },
                indicator,
            ),
            RegimeDoc::RobustRecovery {
                acceptable,
                controls,
                scenarios,
                indicator,
            } => (
                RegimeSpec::RobustRecovery {
                    constraints: self.constraints(acceptable, controls, "acceptable")?,
                    scenarios: self.scenarios(scenarios, "scenarios")?,
                },
                indicator,
            ),
            RegimeDoc::StochasticViability {
                acceptable,
                controls,
                probability,
                beta,
                indicator,
            } => (
                RegimeSpec::StochasticViability {
                    constraints: self.constraints(acceptable, controls, "acceptable")?,
                    probability: self.probability(probability, "probability")?,
                    beta: *beta,
                },
                indicator,
            ),
            RegimeDoc::ExitProbability {
                bound,
                probability,
                beta,
                indicator,
            } => (
                RegimeSpec::ExitProbability {
                    bound: self.states(bound, "bound")?,
                    probability: self.probability(probability, "probability")?,
                    beta: *beta,
                },
                indicator,
            ),
            RegimeDoc::ExitCountLimit {
                bound,
                max_exits,
                probability,
                indicator,
            } => (
                RegimeSpec::ExitCountLimit {
                    bound: self.states(bound, "bound")?,
                    max_exits: *max_exits,
                    probability: self.probability(probability, "probability")?,
                },
                indicator,
            ),
            RegimeDoc::RiskBound {
                risk,
                alpha,
                indicator,
            } => (
                RegimeSpec::RiskBound {
                    risk: self.risk(risk, "risk")?,
                    alpha: *alpha,
                },
                indicator,
            ),
            RegimeDoc::ControlPredicate {
                any_of,
                scenarios,
                indicator,
            } => (
                RegimeSpec::ControlPredicate {
                    predicate: ControlPredicate::any_of_labels(self.model, any_of)
                        .map_err(xref("any_of"))?,
                    scenarios: self.scenarios(scenarios, "scenarios")?,
                },
                indicator,
            ),
        };
        regime.check(self.model)?;
        let indicator = indicator
            .as_ref()
            .map(|r| self.risk(r, "indicator"))
            .transpose()?;
        Ok(RegimeFile { regime, indicator })
    }
}

/// Parses a regime document; relative file references resolve against `base`.
pub fn parse_regime(
    model: &SystemModel,
    text: &str,
    source: &str,
    base: Option<&Path>,
) -> Result<RegimeFile> {
    let doc: RegimeDoc = from_json(text, source)?;
    Ctx { model, base }.regime(&doc)
}

pub fn read_regime(model: &SystemModel, path: &Path) -> Result<RegimeFile> {
    parse_regime(
        model,
        &read_text(path)?,
        &path.display().to_string(),
        path.parent(),
    )
}

/// Reads a stand-alone risk document with `cost` and `measure` keys.
pub fn read_risk(model: &SystemModel, path: &Path) -> Result<ExtendedRiskSpec> {
    let source = path.display().to_string();
    let doc: RiskDoc = from_json(&read_text(path)?, &source)?;
    Ctx {
        model,
        base: path.parent(),
    }
    .risk(&doc, "risk")
}
