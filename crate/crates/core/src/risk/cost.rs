use crate::error::{Error, Result};
use crate::model::{SystemModel, Time};
use crate::regime::{exit_count, path_satisfies, recovery_time, ConstraintMap, RecoveryTime};
use crate::trajectory::{ControlPath, Scenario, StatePath};

/// Disutility attached to a tail state-control path.
#[derive(Clone, Debug, PartialEq)]
pub enum CostSpec {
    /// 1 if the constraints fail at some time from the start, else 0.
    IndicatorExit(ConstraintMap),
    /// Number of constraint failures from the start.
    ExitCount(ConstraintMap),
    /// `τ - t`, with a never-recovering path costing `sentinel`.
    RecoveryTime {
        constraints: ConstraintMap,
        sentinel: Option<f64>,
    },
    /// Summed stage costs plus a final cost.
    Table(TableCost),
}

/// Default sentinel for an infinite recovery time: horizon length plus one.
pub fn default_sentinel(model: &SystemModel) -> f64 {
    (model.t_final() - model.t0() + 1) as f64
}

impl CostSpec {
    pub fn check(&self, model: &SystemModel) -> Result<()> {
        match self {
            CostSpec::RecoveryTime {
                sentinel: Some(s), ..
            } => {
                let max_finite = (model.t_final() - model.t0()) as f64;
                if !(s.is_finite() && *s > max_finite) {
                    return Err(Error::InvalidParameter(format!(
                        "recovery-time sentinel {s} must exceed {max_finite}"
                    )));
                }
                Ok(())
            }
            CostSpec::Table(t) => t.check(model),
            _ => Ok(()),
        }
    }
}

/// Stage costs per `(t, x, u)` and final costs per `x_T`. The cemetery
/// costs `cemetery` at every time it occupies.
#[derive(Clone, Debug, PartialEq)]
pub struct TableCost {
    t0: Time,
    stage: Vec<Vec<Vec<Option<f64>>>>,
    terminal: Vec<Option<f64>>,
    cemetery: f64,
}

impl TableCost {
    /// Tables filled with the given defaults; `None` leaves entries unset.
    pub fn new(model: &SystemModel, stage: Option<f64>, terminal: Option<f64>) -> Self {
        TableCost {
            t0: model.t0(),
            stage: model
                .grid()
                .epochs()
                .map(|t| vec![vec![stage; model.num_controls(t)]; model.num_states(t)])
                .collect(),
            terminal: vec![terminal; model.num_states(model.t_final())],
            cemetery: 0.0,
        }
    }

    pub fn set_stage(&mut self, t: Time, x: usize, u: usize, c: f64) {
        self.stage[(t - self.t0) as usize][x][u] = Some(c);
    }

    pub fn set_terminal(&mut self, x: usize, c: f64) {
        self.terminal[x] = Some(c);
    }

    pub fn set_cemetery(&mut self, c: f64) {
        self.cemetery = c;
    }

    fn check(&self, model: &SystemModel) -> Result<()> {
        for (e, rows) in self.stage.iter().enumerate() {
            for (x, row) in rows.iter().enumerate() {
                for (u, c) in row.iter().enumerate() {
                    let t = self.t0 + e as Time;
                    match c {
                        None => {
                            return Err(Error::InvalidParameter(format!(
                                "stage cost missing for (t={t}, x={}, u={})",
                                model.state_label(t, crate::model::StateId::new(x)),
                                model.control_label(t, u)
                            )))
                        }
                        Some(v) if !v.is_finite() => {
                            return Err(Error::InvalidParameter(format!("stage cost {v}")))
                        }
                        _ => {}
                    }
                }
            }
        }
        for (x, c) in self.terminal.iter().enumerate() {
            match c {
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "final cost missing for x={}",
                        model.state_label(model.t_final(), crate::model::StateId::new(x))
                    )))
                }
                Some(v) if !v.is_finite() => {
                    return Err(Error::InvalidParameter(format!("final cost {v}")))
                }
                _ => {}
            }
        }
        if !self.cemetery.is_finite() {
            return Err(Error::InvalidParameter("cemetery cost must be finite".into()));
        }
        Ok(())
    }

    fn evaluate(&self, states: &StatePath, controls: &ControlPath) -> f64 {
        let mut total = super::CompensatedSum::default();
        let last = states.len().saturating_sub(1);
        for (k, (t, x)) in states.times().enumerate() {
            let Some(xi) = x.get() else {
                total.add(self.cemetery);
                continue;
            };
            if k == last {
                total.add(self.terminal[xi].unwrap_or(0.0));
            } else {
                let e = (t - self.t0) as usize;
                total.add(match controls.controls.get(k).copied().flatten() {
                    Some(u) => self.stage[e][xi][u].unwrap_or(0.0),
                    None => self.cemetery,
                });
            }
        }
        total.value()
    }
}

/// Evaluates `Ψ_t` on one realized path; `t` is the path start.
pub fn cost(
    model: &SystemModel,
    spec: &CostSpec,
    states: &StatePath,
    controls: &ControlPath,
    _scenario: &Scenario,
) -> Result<f64> {
    let t = states.start;
    Ok(match spec {
        CostSpec::IndicatorExit(c) => {
            if path_satisfies(c, states, controls, t) {
                0.0
            } else {
                1.0
            }
        }
        CostSpec::ExitCount(c) => exit_count(states, controls, c, t) as f64,
        CostSpec::RecoveryTime {
            constraints,
            sentinel,
        } => match recovery_time(states, controls, constraints, t) {
            RecoveryTime::At(r) => (r - t) as f64,
            RecoveryTime::Never => sentinel.unwrap_or_else(|| default_sentinel(model)),
        },
        CostSpec::Table(table) => table.evaluate(states, controls),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{stock3, stock3_acceptable};
    use crate::model::StateId;

    fn path(v: &[usize]) -> (StatePath, ControlPath) {
        (
            StatePath {
                start: 0,
                states: v.iter().map(|&i| StateId::new(i)).collect(),
            },
            ControlPath {
                start: 0,
                controls: vec![Some(0); v.len() - 1],
            },
        )
    }

    #[test]
    fn indicator_and_count() {
        let m = stock3();
        let k = ConstraintMap::from_labels(&m, &stock3_acceptable()).unwrap();
        let sc = Scenario(vec![0, 0, 0]);
        let (xs, us) = path(&[2, 3, 3, 3]);
        assert_eq!(cost(&m, &CostSpec::IndicatorExit(k.clone()), &xs, &us, &sc).unwrap(), 0.0);
        let (xs, us) = path(&[1, 2, 1, 2]);
        assert_eq!(cost(&m, &CostSpec::ExitCount(k.clone()), &xs, &us, &sc).unwrap(), 2.0);
        assert_eq!(cost(&m, &CostSpec::IndicatorExit(k), &xs, &us, &sc).unwrap(), 1.0);
    }

    #[test]
    fn recovery_time_cost_uses_sentinel() {
        let m = stock3();
        let k = ConstraintMap::from_labels(&m, &stock3_acceptable()).unwrap();
        let sc = Scenario(vec![0, 0, 0]);
        let spec = CostSpec::RecoveryTime {
            constraints: k.clone(),
            sentinel: None,
        };
        let (xs, us) = path(&[1, 2, 3, 3]);
        assert_eq!(cost(&m, &spec, &xs, &us, &sc).unwrap(), 1.0);
        let (xs, us) = path(&[1, 1, 1, 1]);
        assert_eq!(cost(&m, &spec, &xs, &us, &sc).unwrap(), 4.0);
        let bad = CostSpec::RecoveryTime {
            constraints: k,
            sentinel: Some(3.0),
        };
        assert!(bad.check(&m).is_err());
    }

    #[test]
    fn table_cost_final_only() {
        let m = stock3();
        let mut table = TableCost::new(&m, Some(0.0), Some(0.0));
        table.set_terminal(3, 1.0);
        let spec = CostSpec::Table(table);
        spec.check(&m).unwrap();
        let (xs, us) = path(&[1, 2, 3, 3]);
        assert_eq!(cost(&m, &spec, &xs, &us, &Scenario(vec![0, 0, 0])).unwrap(), 1.0);
        let (xs, us) = path(&[1, 2, 3, 2]);
        assert_eq!(cost(&m, &spec, &xs, &us, &Scenario(vec![0, 0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn table_cost_must_be_total() {
        let m = stock3();
        let spec = CostSpec::Table(TableCost::new(&m, None, Some(0.0)));
        assert!(spec.check(&m).is_err());
    }
}
