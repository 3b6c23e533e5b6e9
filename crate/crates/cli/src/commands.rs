use std::collections::BTreeMap;

use reskit::io::{
    bundle_csv, bundle_json, format_number, load_model, read_model, read_regime, read_risk,
    read_scenarios, read_strategy, round_sig, scenario_labels, strategy_to_json,
    to_canonical_json, RegimeFile,
};
use reskit::model::{Label, StateId, SystemModel, Time};
use reskit::regime::{ConstraintMap, RecoveryTime, RegimeSpec, ScenarioSubset};
use reskit::risk::TOLERANCE;
use reskit::solver::{
    recovery_times, resilience_indicator, robust_recovery_sets, robust_viability_kernel,
    stochastic_viability_values, KernelTable, SolveOptions, SolverRegistry,
};
use reskit::strategy::{Strategy, DEFAULT_BUDGET};
use reskit::trajectory::{bundle, Scenario};
use reskit::Error;
use serde_json::{json, Value};

use crate::args::{Command, Format, Opts};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] Error),
}

impl CliError {
    /// 2 for bad invocations and unreadable inputs, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(Error::Io(_) | Error::Parse { .. } | Error::CrossReference(_)) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// What a subcommand produced: the main document, extra files for `--out`,
/// and the exit code to report after writing them.
pub struct Output {
    pub body: String,
    pub files: Vec<(String, String)>,
    pub code: u8,
}

impl Output {
    fn ok(body: String) -> Self {
        Output {
            body,
            files: Vec::new(),
            code: 0,
        }
    }

    fn with_file(mut self, name: String, content: String) -> Self {
        self.files.push((name, content));
        self
    }
}

pub fn run(command: &Command) -> Result<Output> {
    let opts = command.opts();
    match command {
        Command::Validate(_) => validate(opts),
        Command::Simulate(_) => simulate(opts),
        Command::Kernel(_) => kernel(opts),
        Command::Recover(_) => recover(opts),
        Command::ViabProb(_) => viab_prob(opts),
        Command::Resilient(_) => resilient(opts),
        Command::Indicator(_) => indicator(opts),
    }
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required option {flag}")))
}

fn json_only(opts: &Opts, command: &str) -> Result<()> {
    if opts.format == Format::Csv {
        return Err(CliError::Usage(format!("`{command}` has no CSV output")));
    }
    Ok(())
}

fn start_time(opts: &Opts, model: &SystemModel) -> Result<Time> {
    let t = opts.time.unwrap_or(model.t0());
    if !model.grid().contains(t) {
        return Err(CliError::Usage(format!(
            "--time {t} is outside {}..={}",
            model.t0(),
            model.t_final()
        )));
    }
    Ok(t)
}

fn state_at(model: &SystemModel, t: Time, label: &str) -> Result<StateId> {
    model
        .state_id(t, &Label::new(label))
        .map_err(|e| CliError::Usage(format!("--state: {e}")))
}

fn regime_file(opts: &Opts, model: &SystemModel) -> Result<RegimeFile> {
    let mut file = read_regime(model, require(&opts.regime, "--regime")?)?;
    if let Some(b) = opts.beta {
        file.regime
            .set_beta(b)
            .map_err(|e| CliError::Usage(format!("--beta: {e}")))?;
    }
    if let Some(a) = opts.alpha {
        if !a.is_finite() {
            return Err(CliError::Usage(format!("--alpha {a} is not finite")));
        }
        file.regime
            .set_alpha(a)
            .map_err(|e| CliError::Usage(format!("--alpha: {e}")))?;
    }
    Ok(file)
}

/// Scenarios from `--scenarios`; an empty file is a usage error.
fn scenario_file(opts: &Opts, model: &SystemModel, t: Time) -> Result<Option<Vec<Scenario>>> {
    let Some(path) = &opts.scenarios else {
        return Ok(None);
    };
    let list = read_scenarios(model, path, t)?;
    if list.is_empty() {
        return Err(CliError::Usage(format!(
            "{} holds no scenarios",
            path.display()
        )));
    }
    Ok(Some(list))
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(round_sig(v))
    } else {
        json!(format_number(v))
    }
}

fn count(n: u128) -> Value {
    json!(u64::try_from(n).unwrap_or(u64::MAX))
}

fn recovery_value(r: RecoveryTime) -> Value {
    match r {
        RecoveryTime::At(t) => json!(t),
        RecoveryTime::Never => json!("inf"),
    }
}

fn labels(model: &SystemModel, t: Time, members: &[bool]) -> Vec<Label> {
    members
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(x, _)| model.state_label(t, StateId::new(x)))
        .collect()
}

fn policy_text(model: &SystemModel, strategy: &Strategy) -> String {
    to_canonical_json(&strategy_to_json(model, strategy))
}

fn witness_file(x: usize) -> String {
    format!("witness-{x}.json")
}

/// Constraints and scenario subset of a regime read robustly.
fn robust_parts(regime: &RegimeSpec) -> Result<(&ConstraintMap, ScenarioSubset)> {
    let subset = match regime {
        RegimeSpec::Bounded { scenarios, .. }
        | RegimeSpec::DeterministicViability { scenarios, .. }
        | RegimeSpec::RobustRecovery { scenarios, .. } => scenarios.clone(),
        _ => ScenarioSubset::All,
    };
    let constraints = regime.constraints().ok_or_else(|| {
        Error::Unsupported(format!(
            "regime `{}` has no state constraints",
            regime.name()
        ))
    })?;
    Ok((constraints, subset))
}

fn table_json(model: &SystemModel, table: &KernelTable) -> Value {
    json!(table
        .times()
        .map(|s| json!({"time": s, "states": labels(model, s, table.at(s))}))
        .collect::<Vec<_>>())
}

fn table_csv(model: &SystemModel, table: &KernelTable) -> String {
    let mut out = String::from("time,state\n");
    for s in table.times() {
        for l in labels(model, s, table.at(s)) {
            out.push_str(&format!("{s},{l}\n"));
        }
    }
    out
}

fn validate(opts: &Opts) -> Result<Output> {
    json_only(opts, "validate")?;
    let model = read_model(&opts.model)?;
    let report = model.validate();
    let doc = json!({
        "valid": report.is_empty(),
        "issues": report.issues.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
    });
    let mut out = Output::ok(to_canonical_json(&doc));
    if !report.is_empty() {
        out.code = 1;
    }
    Ok(out)
}

fn simulate(opts: &Opts) -> Result<Output> {
    let model = load_model(&opts.model)?;
    let strategy = read_strategy(&model, require(&opts.strategy, "--strategy")?)?;
    let t = match opts.time {
        Some(_) => start_time(opts, &model)?,
        None => strategy.window().0,
    };
    let x = state_at(&model, t, require(&opts.state, "--state")?)?;
    require(&opts.scenarios, "--scenarios")?;
    let scenarios = scenario_file(opts, &model, t)?.unwrap_or_default();
    let b = bundle(&model, &strategy, t, x, &scenarios)?;
    Ok(Output::ok(match opts.format {
        Format::Json => to_canonical_json(&bundle_json(&model, &b)),
        Format::Csv => bundle_csv(&model, &b),
    }))
}

fn kernel(opts: &Opts) -> Result<Output> {
    let model = load_model(&opts.model)?;
    let file = regime_file(opts, &model)?;
    let t = start_time(opts, &model)?;
    let (constraints, subset) = robust_parts(&file.regime)?;
    let closure = subset.closure(&model, t)?;
    let solution = robust_viability_kernel(&model, constraints, &closure)?;
    let body = match opts.format {
        Format::Json => to_canonical_json(&json!({
            "start": t,
            "rectangular": subset.is_rectangular(&model, t)?,
            "sets": table_json(&model, &solution.table),
        })),
        Format::Csv => table_csv(&model, &solution.table),
    };
    let policy = Strategy::Markov(solution.policy);
    Ok(Output::ok(body).with_file("policy.json".into(), policy_text(&model, &policy)))
}

fn recover(opts: &Opts) -> Result<Output> {
    let model = load_model(&opts.model)?;
    let file = regime_file(opts, &model)?;
    let t = start_time(opts, &model)?;
    let (constraints, subset) = robust_parts(&file.regime)?;
    let regime = RegimeSpec::RobustRecovery {
        constraints: constraints.clone(),
        scenarios: subset.clone(),
    };

    let (method, members, sets, mut witnesses) = if subset.is_rectangular(&model, t)? {
        let solution = robust_recovery_sets(&model, constraints, &subset.closure(&model, t)?)?;
        let members = solution.table.at(t).to_vec();
        let policy = Strategy::Markov(solution.policy);
        let witnesses: BTreeMap<usize, Strategy> = (0..members.len())
            .filter(|&x| members[x])
            .map(|x| (x, policy.clone()))
            .collect();
        ("robust-recovery", members, table_json(&model, &solution.table), witnesses)
    } else {
        let options = solve_options(opts);
        let set = SolverRegistry::default().solve(
            &model,
            &regime,
            t,
            Some("brute-force-adapted"),
            &options,
        )?;
        let sets = json!([{"time": t, "states": labels(&model, t, &set.members)}]);
        (set.solver, set.members, sets, set.witnesses)
    };

    let targets: Vec<usize> = match &opts.state {
        Some(l) => vec![state_at(&model, t, l)?.index()],
        None => (0..members.len()).filter(|&x| members[x]).collect(),
    };
    let given = match &opts.strategy {
        Some(p) => Some(read_strategy(&model, p)?),
        None => None,
    };
    let scenarios = match scenario_file(opts, &model, t)? {
        Some(list) => list,
        None => subset.resolve(&model, t)?,
    };

    let mut rows = Vec::new();
    let mut csv = String::from("state,scenario,recovery_time\n");
    let mut files = Vec::new();
    for x in targets {
        let label = model.state_label(t, StateId::new(x));
        let witness = match &given {
            Some(s) => Some(s.clone()),
            None => witnesses.remove(&x),
        };
        let times = match &witness {
            Some(w) => {
                let b = bundle(&model, w, t, StateId::new(x), &scenarios)?;
                let times = recovery_times(constraints, &b);
                for (s, r) in &times {
                    let names: Vec<String> = scenario_labels(&model, s, t)
                        .iter()
                        .map(|l| l.to_string())
                        .collect();
                    csv.push_str(&format!("{label},{},{r}\n", names.join(" ")));
                }
                if given.is_none() {
                    files.push((witness_file(x), policy_text(&model, w)));
                }
                json!(times
                    .iter()
                    .map(|(s, r)| json!({
                        "scenario": scenario_labels(&model, s, t),
                        "time": recovery_value(*r),
                    }))
                    .collect::<Vec<_>>())
            }
            None => Value::Null,
        };
        rows.push(json!({
            "state": label,
            "resilient": members[x],
            "recovery_times": times,
        }));
    }

    let body = match opts.format {
        Format::Json => to_canonical_json(&json!({
            "start": t,
            "method": method,
            "sets": sets,
            "recovery": rows,
        })),
        Format::Csv => csv,
    };
    let mut out = Output::ok(body);
    out.files = files;
    Ok(out)
}

fn viab_prob(opts: &Opts) -> Result<Output> {
    let model = load_model(&opts.model)?;
    let file = regime_file(opts, &model)?;
    let t = start_time(opts, &model)?;
    let RegimeSpec::StochasticViability {
        constraints,
        probability,
        beta,
    } = &file.regime
    else {
        return Err(Error::Unsupported(format!(
            "viab-prob needs a stochastic_viability regime, got `{}`",
            file.regime.name()
        ))
        .into());
    };
    let solution = stochastic_viability_values(&model, constraints, probability, t)?;
    let table = &solution.table;
    let body = match opts.format {
        Format::Json => {
            let mut values = Vec::new();
            for s in table.times() {
                for (x, &v) in table.at(s).iter().enumerate() {
                    values.push(json!({
                        "time": s,
                        "state": model.state_label(s, StateId::new(x)),
                        "value": number(v),
                    }));
                }
            }
            let members: Vec<bool> = table.at(t).iter().map(|&p| p >= beta - TOLERANCE).collect();
            to_canonical_json(&json!({
                "start": t,
                "beta": number(*beta),
                "values": values,
                "resilient": labels(&model, t, &members),
            }))
        }
        Format::Csv => {
            let mut out = String::from("time,state,value\n");
            for s in table.times() {
                for (x, &v) in table.at(s).iter().enumerate() {
                    out.push_str(&format!(
                        "{s},{},{}\n",
                        model.state_label(s, StateId::new(x)),
                        format_number(v)
                    ));
                }
            }
            out
        }
    };
    let policy = Strategy::Markov(solution.policy);
    Ok(Output::ok(body).with_file("policy.json".into(), policy_text(&model, &policy)))
}

fn solve_options(opts: &Opts) -> SolveOptions {
    SolveOptions {
        class: opts.class.unwrap_or_default(),
        budget: opts.budget.unwrap_or(DEFAULT_BUDGET),
    }
}

fn resilient(opts: &Opts) -> Result<Output> {
    json_only(opts, "resilient")?;
    let model = load_model(&opts.model)?;
    let file = regime_file(opts, &model)?;
    let t = start_time(opts, &model)?;
    let set = SolverRegistry::default().solve(
        &model,
        &file.regime,
        t,
        opts.solver.as_deref(),
        &solve_options(opts),
    )?;
    let mut witnesses = serde_json::Map::new();
    let mut files = Vec::new();
    for (&x, w) in &set.witnesses {
        let label = model.state_label(t, StateId::new(x)).to_string();
        witnesses.insert(label, strategy_to_json(&model, w));
        files.push((witness_file(x), policy_text(&model, w)));
    }
    let doc = json!({
        "time": t,
        "regime": file.regime.name(),
        "solver": set.solver,
        "states": labels(&model, t, &set.members),
        "witnesses": witnesses,
    });
    let mut out = Output::ok(to_canonical_json(&doc));
    out.files = files;
    Ok(out)
}

fn indicator(opts: &Opts) -> Result<Output> {
    json_only(opts, "indicator")?;
    let model = load_model(&opts.model)?;
    let file = regime_file(opts, &model)?;
    let t = start_time(opts, &model)?;
    let x = state_at(&model, t, require(&opts.state, "--state")?)?;
    let risk = match (&opts.risk, file.indicator) {
        (Some(p), _) => read_risk(&model, p)?,
        (None, Some(r)) => r,
        (None, None) => {
            return Err(CliError::Usage(
                "no risk to minimize: pass --risk or add an `indicator` to the regime".into(),
            ))
        }
    };
    let options = solve_options(opts);
    let r = resilience_indicator(
        &model,
        &file.regime,
        &risk,
        t,
        x,
        options.class,
        options.budget,
    )?;
    let doc = json!({
        "time": t,
        "state": model.state_label(t, x),
        "class": options.class.to_string(),
        "value": number(r.value),
        "unconstrained": number(r.unconstrained),
        "examined": count(r.examined),
        "resilient_strategies": count(r.resilient),
        "argmin": strategy_to_json(&model, &r.argmin),
    });
    Ok(Output::ok(to_canonical_json(&doc))
        .with_file("argmin.json".into(), policy_text(&model, &r.argmin)))
}
