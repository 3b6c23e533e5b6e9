//! Cost functions over paths, risk measures over finitely supported random
//! costs, and their composition into extended risk measures over bundles.

mod cost;
mod measure;

pub use cost::{cost, default_sentinel, CostSpec, TableCost};
pub use measure::{
    AmbiguitySup, Cvar, Expectation, InnerMeasure, RiskMeasure, RiskMeasureSpec, WorstCase,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{SystemModel, Time};
use crate::trajectory::{PathBundle, Scenario};

/// Absolute tolerance for probability sums and level comparisons.
pub const TOLERANCE: f64 = 1e-12;

/// Neumaier-compensated running sum.
#[derive(Copy, Clone, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Finitely supported real random variable as `(value, weight)` atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteRandomVariable {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteRandomVariable {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("random variable without atoms".into()));
        }
        for &(v, w) in &atoms {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("atom value {v} is not finite")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("atom weight {w} is not a probability")));
            }
        }
        let total: CompensatedSum = atoms.iter().map(|a| a.1).collect();
        if (total.value() - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "atom weights sum to {}",
                total.value()
            )));
        }
        Ok(DiscreteRandomVariable { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `Z + c`.
    pub fn shifted(&self, c: f64) -> Self {
        DiscreteRandomVariable {
            atoms: self.atoms.iter().map(|&(v, w)| (v + c, w)).collect(),
        }
    }
}

/// `Σ w_i z_i`.
pub fn expectation(z: &DiscreteRandomVariable) -> f64 {
    z.atoms.iter().map(|&(v, w)| v * w).collect::<CompensatedSum>().value()
}

/// Largest value carrying positive weight.
pub fn worst_case(z: &DiscreteRandomVariable) -> f64 {
    z.atoms
        .iter()
        .filter(|a| a.1 > 0.0)
        .map(|a| a.0)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Conditional value-at-risk at confidence `beta ∈ [0, 1)`: the average of
/// the worst `1 - beta` probability mass, computed from the sorted upper tail.
pub fn cvar(z: &DiscreteRandomVariable, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "CVaR level {beta} outside [0, 1); use the worst case for level 1"
        )));
    }
    let tail = 1.0 - beta;
    let mut atoms: Vec<(f64, f64)> = z.atoms.iter().copied().filter(|a| a.1 > 0.0).collect();
    // descending values, stable on ties
    atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut above_value = CompensatedSum::default();
    let mut above_mass = CompensatedSum::default();
    let mut boundary = atoms[atoms.len() - 1].0;
    for (i, &(v, w)) in atoms.iter().enumerate() {
        if i + 1 == atoms.len() || above_mass.value() + w >= tail {
            boundary = v;
            break;
        }
        above_value.add(v * w);
        above_mass.add(w);
    }
    let mut total = above_value;
    total.add((tail - above_mass.value()) * boundary);
    Ok(total.value() / tail)
}

/// A cost function paired with a risk measure: `G_t = F[Ψ_t(X, U, ·)]`.
#[derive(Clone, Debug)]
pub struct ExtendedRiskSpec {
    pub cost: CostSpec,
    pub measure: RiskMeasureSpec,
}

impl ExtendedRiskSpec {
    pub fn new(cost: CostSpec, measure: impl RiskMeasure + 'static) -> Self {
        ExtendedRiskSpec {
            cost,
            measure: RiskMeasureSpec::new(measure),
        }
    }

    pub fn check(&self, model: &SystemModel) -> Result<()> {
        self.cost.check(model)?;
        self.measure.check(model)
    }

    pub fn scope(&self, model: &SystemModel, t: Time) -> Result<Vec<Scenario>> {
        self.measure.scope(model, t)
    }
}

/// Per-scenario costs of the bundle on the measure's scope.
pub fn scenario_costs(
    model: &SystemModel,
    spec: &ExtendedRiskSpec,
    bundle: &PathBundle,
) -> Result<BTreeMap<Scenario, f64>> {
    let mut out = BTreeMap::new();
    for s in spec.scope(model, bundle.start)? {
        let e = bundle.get(&s)?;
        let c = cost(model, &spec.cost, &e.states, &e.controls, &s)?;
        out.insert(s, c);
    }
    Ok(out)
}

/// Evaluates the extended risk measure on a path bundle.
pub fn extended_risk(
    model: &SystemModel,
    spec: &ExtendedRiskSpec,
    bundle: &PathBundle,
) -> Result<f64> {
    let costs = scenario_costs(model, spec, bundle)?;
    spec.measure.evaluate(model, bundle.start, &costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn drv(atoms: &[(f64, f64)]) -> DiscreteRandomVariable {
        DiscreteRandomVariable::new(atoms.to_vec()).unwrap()
    }

    /// min over support points of η + E[(Z - η)+] / (1 - β)
    fn cvar_by_eta(z: &DiscreteRandomVariable, beta: f64) -> f64 {
        z.atoms()
            .iter()
            .map(|&(eta, _)| {
                let excess: f64 = z.atoms().iter().map(|&(v, w)| w * (v - eta).max(0.0)).sum();
                eta + excess / (1.0 - beta)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn cvar_two_point_tail() {
        let z = drv(&[(1.0, 0.9), (10.0, 0.1)]);
        assert!((cvar(&z, 0.9).unwrap() - 10.0).abs() < 1e-12);
        assert!((cvar_by_eta(&z, 0.9) - 10.0).abs() < 1e-12);
        assert!((cvar(&z, 0.5).unwrap() - 2.8).abs() < 1e-12);
        assert!((cvar_by_eta(&z, 0.5) - 2.8).abs() < 1e-12);
    }

    #[test]
    fn cvar_at_zero_is_the_mean() {
        let z = drv(&[(3.0, 0.2), (-1.0, 0.3), (7.5, 0.5)]);
        assert!((cvar(&z, 0.0).unwrap() - expectation(&z)).abs() < 1e-12);
    }

    #[test]
    fn cvar_rejects_level_one() {
        let z = drv(&[(1.0, 1.0)]);
        assert!(cvar(&z, 1.0).is_err());
        assert!(cvar(&z, -0.1).is_err());
    }

    #[test]
    fn worst_case_ignores_null_atoms() {
        let z = drv(&[(1.0, 1.0), (100.0, 0.0)]);
        assert_eq!(worst_case(&z), 1.0);
    }

    #[test]
    fn invalid_random_variables() {
        assert!(DiscreteRandomVariable::new(vec![]).is_err());
        assert!(DiscreteRandomVariable::new(vec![(1.0, 0.5)]).is_err());
        assert!(DiscreteRandomVariable::new(vec![(1.0, -0.5), (1.0, 1.5)]).is_err());
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let v = [1.0, 1e100, 1.0, -1e100];
        let s: CompensatedSum = v.iter().copied().collect();
        assert_eq!(s.value(), 2.0);
    }

    fn arb_drv() -> impl Strategy<Value = DiscreteRandomVariable> {
        proptest::collection::vec((-50.0f64..50.0, 0.01f64..1.0), 1..8).prop_map(|raw| {
            let total: f64 = raw.iter().map(|a| a.1).sum();
            let mut atoms: Vec<(f64, f64)> = raw.iter().map(|&(v, w)| (v, w / total)).collect();
            let rest: f64 = 1.0 - atoms.iter().map(|a| a.1).sum::<f64>();
            atoms[0].1 += rest;
            DiscreteRandomVariable::new(atoms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn cvar_matches_eta_minimization(z in arb_drv(), beta in 0.0f64..0.99) {
            let a = cvar(&z, beta).unwrap();
            let b = cvar_by_eta(&z, beta);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }

        #[test]
        fn cvar_is_between_mean_and_max(z in arb_drv(), b1 in 0.0f64..0.99, b2 in 0.0f64..0.99) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let mean = expectation(&z);
            let c_lo = cvar(&z, lo).unwrap();
            let c_hi = cvar(&z, hi).unwrap();
            prop_assert!(mean <= c_lo + 1e-9);
            prop_assert!(c_lo <= c_hi + 1e-9);
            prop_assert!(c_hi <= worst_case(&z) + 1e-9);
        }

        #[test]
        fn translation_equivariance(z in arb_drv(), c in -10.0f64..10.0, beta in 0.0f64..0.99) {
            let s = z.shifted(c);
            prop_assert!((expectation(&s) - expectation(&z) - c).abs() < 1e-9);
            prop_assert!((worst_case(&s) - worst_case(&z) - c).abs() < 1e-9);
            prop_assert!((cvar(&s, beta).unwrap() - cvar(&z, beta).unwrap() - c).abs() < 1e-9);
        }
    }
}
