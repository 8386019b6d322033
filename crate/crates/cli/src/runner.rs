//! Builds scenarios, runs their flows and checks, and writes artifacts.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use semiflow_core::flow::{run_regularized_family, RegularizedRun};
use semiflow_core::io::{fmt17, write_atomic};
use semiflow_core::space::{load_graph_space, MetricMeasureSpace};
use semiflow_core::verify::{self, CheckReport, ModulusScaling};
use semiflow_core::{
    build_circle_space, build_interval_space, kappa_convexity_report, pushforward_flow,
    run_measure_flow, run_point_flow, FlowParams, FlowTrajectory, Functional, MeasureTrajectory,
    Potential, ProbabilityMeasure,
};

use crate::config::{
    CheckName, CheckSpec, Formula, Order, Scaling, Scenario, SpaceSpec,
};
use crate::error::{CliError, CliResult};

/// Default sample budget of the convexity check.
pub const DEFAULT_CONVEXITY_BUDGET: usize = 1_000_000;
/// Default grid stride of the integral check.
pub const DEFAULT_STRIDE: usize = 10;

/// Space, potential, parameters and initial data of a scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub space: MetricMeasureSpace,
    pub potential: Potential,
    pub params: FlowParams,
    pub starts: Vec<usize>,
    pub initial: Option<ProbabilityMeasure>,
    pub n_list: Vec<f64>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn build_space(scenario: &Scenario) -> CliResult<MetricMeasureSpace> {
    Ok(match &scenario.space {
        SpaceSpec::Interval { a, b, points } => build_interval_space(*a, *b, *points)?,
        SpaceSpec::Circle { points, radius } => build_circle_space(*points, *radius)?,
        SpaceSpec::Graph { path } => load_graph_space(scenario.resolve(path))?,
    })
}

pub fn build_potential(scenario: &Scenario, space: &MetricMeasureSpace) -> CliResult<Potential> {
    let p = &scenario.potential;
    if p.kind == Formula::File {
        let path = p.path.as_ref().expect("validated");
        let v = semiflow_core::functionals::load_potential_csv(scenario.resolve(path))?;
        if v.len() != space.len() {
            return Err(config_err(format!(
                "potential file has {} values for {} points",
                v.len(),
                space.len()
            )));
        }
        return Ok(v);
    }
    if space.coords().is_none() {
        return Err(config_err("named potential formulas need a space with coordinates"));
    }
    let (scale, center, freq, support) = (p.scale, p.center, p.frequency, p.support);
    let kind = p.kind;
    Ok(Potential::from_fn(space, move |x| {
        if let Some([lo, hi]) = support {
            if x < lo || x > hi {
                return f64::INFINITY;
            }
        }
        let y = x - center;
        match kind {
            Formula::Quadratic => scale * y * y,
            Formula::DoubleWell => scale * (y * y - 1.0).powi(2),
            Formula::Cosine => scale * (freq * x).cos(),
            Formula::File => unreachable!(),
        }
    })?)
}

fn locate(space: &MetricMeasureSpace, x: f64) -> CliResult<usize> {
    space
        .nearest_point(x)
        .ok_or_else(|| config_err("coordinates given for a space without coordinates"))
}

pub fn build_setup(scenario: &Scenario, seed: Option<u64>) -> CliResult<Setup> {
    let space = build_space(scenario)?;
    let potential = build_potential(scenario, &space)?;
    let f = &scenario.flow;
    let mut params = FlowParams::new(f.tau, f.horizon)?
        .with_kappa(f.kappa)
        .with_ricci_lower_bound(f.ricci_lower_bound)
        .with_solver_tolerance(f.solver_tolerance);
    params.seed = seed.unwrap_or(f.seed);
    params.validate()?;

    let mut starts = Vec::new();
    for &x in &f.starts {
        starts.push(locate(&space, x)?);
    }
    starts.extend_from_slice(&f.start_indices);
    if let Some(&i) = starts.iter().find(|&&i| i >= space.len()) {
        return Err(config_err(format!("start index {i} outside a space of {} points", space.len())));
    }

    let mut atoms = Vec::new();
    for (&x, &w) in f.atoms.iter().zip(&f.weights) {
        atoms.push((locate(&space, x)?, w));
    }
    for (&i, &w) in f.atom_indices.iter().zip(&f.weights) {
        atoms.push((i, w));
    }
    let initial = if atoms.is_empty() {
        None
    } else {
        Some(ProbabilityMeasure::from_atoms(space.len(), &atoms)?)
    };
    Ok(Setup {
        space,
        potential,
        params,
        starts,
        initial,
        n_list: f.n_list.clone(),
    })
}

/// All trajectories a scenario defines.
#[derive(Debug, Clone)]
pub struct Flows {
    pub points: Vec<FlowTrajectory>,
    /// Pure-potential JKO flow of the initial measure.
    pub measure: Option<MeasureTrajectory>,
    pub regularized: Vec<RegularizedRun>,
}

pub fn run_flows(setup: &Setup, regularized: bool) -> CliResult<Flows> {
    let points = setup
        .starts
        .iter()
        .map(|&x| run_point_flow(&setup.space, &setup.potential, x, &setup.params))
        .collect::<semiflow_core::Result<Vec<_>>>()?;
    let measure = match &setup.initial {
        Some(mu) => Some(run_measure_flow(
            &setup.space,
            &Functional::Potential(&setup.potential),
            mu,
            &setup.params,
        )?),
        None => None,
    };
    let regularized = match (&setup.initial, regularized && !setup.n_list.is_empty()) {
        (Some(mu), true) => {
            run_regularized_family(&setup.space, &setup.potential, mu, &setup.params, &setup.n_list)?
        }
        _ => Vec::new(),
    };
    Ok(Flows {
        points,
        measure,
        regularized,
    })
}

fn point_json(space: &MetricMeasureSpace, i: usize) -> Value {
    match space.coord(i) {
        Some(c) => json!({"index": i, "coord": c}),
        None => json!({"index": i}),
    }
}

fn require<T>(value: Option<T>, check: CheckName, what: &str) -> CliResult<T> {
    value.ok_or_else(|| config_err(format!("check {} needs {what}", check.as_str())))
}

fn observation_points(setup: &Setup, count: Option<usize>) -> Vec<usize> {
    let finite = setup.potential.finite_set();
    match count {
        Some(k) if k >= 2 && k < finite.len() => (0..k)
            .map(|i| finite[(i * (finite.len() - 1) + (k - 1) / 2) / (k - 1)])
            .collect(),
        Some(1) => vec![finite[0]],
        _ => finite.to_vec(),
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn dirac_flows(setup: &Setup) -> CliResult<Vec<MeasureTrajectory>> {
    let mut points = setup.starts.clone();
    if let Some(mu) = &setup.initial {
        points.extend(mu.support());
    }
    points
        .into_iter()
        .map(|x| {
            let d = ProbabilityMeasure::dirac(setup.space.len(), x)?;
            Ok(run_measure_flow(
                &setup.space,
                &Functional::Potential(&setup.potential),
                &d,
                &setup.params,
            )?)
        })
        .collect()
}

/// Evaluates one named check.
pub fn evaluate_check(setup: &Setup, flows: &Flows, spec: &CheckSpec) -> CliResult<CheckReport> {
    let name = spec.name;
    let annotate = |e: semiflow_core::Error| CliError::Check {
        check: name.as_str(),
        source: e,
    };
    let space = &setup.space;
    let v = &setup.potential;
    let kappa = spec.kappa.unwrap_or(setup.params.kappa);
    let scaling = match spec.scaling {
        Scaling::Half => ModulusScaling::Half,
        Scaling::Full => ModulusScaling::Full,
    };
    let tol = spec.tolerance;
    let report = |residual: f64| {
        CheckReport::new(name.as_str(), residual, tol)
            .with_param("tau", setup.params.tau)
            .with_param("horizon", setup.params.horizon)
    };

    let out = match name {
        CheckName::EviDifferential => {
            if flows.points.is_empty() {
                return Err(config_err("check evi_differential needs flow.starts"));
            }
            let z = observation_points(setup, spec.observation_points);
            let mut best: Option<(f64, Value)> = None;
            for traj in &flows.points {
                let r = verify::evi_differential_residual(space, traj, v, kappa, &z, scaling)
                    .map_err(annotate)?;
                if best.as_ref().is_none_or(|b| r.max_residual > b.0) {
                    let w = json!({
                        "start": point_json(space, traj.start()),
                        "t": r.witness_time,
                        "z": r.witness_point.map(|p| point_json(space, p)),
                    });
                    best = Some((r.max_residual, w));
                }
            }
            let (res, w) = best.expect("nonempty");
            report(res)
                .with_witness(w)
                .with_param("kappa", kappa)
                .with_param("scaling", scaling)
                .with_param("observation_points", z.len())
        }
        CheckName::EviIntegral => {
            let mu0 = match (&setup.initial, setup.starts.first()) {
                (Some(mu), _) => mu.clone(),
                (None, Some(&x)) => ProbabilityMeasure::dirac(space.len(), x)?,
                _ => return Err(config_err("check evi_integral needs flow.atoms or flow.starts")),
            };
            let mtraj = pushforward_flow(space, v, &mu0, &setup.params).map_err(annotate)?;
            let reference = match spec.reference {
                Some(x) => locate(space, x)?,
                None => v
                    .finite_set()
                    .iter()
                    .copied()
                    .min_by(|&a, &b| v.value(a).total_cmp(&v.value(b)))
                    .expect("finite set is nonempty"),
            };
            let nu = ProbabilityMeasure::dirac(space.len(), reference)?;
            let stride = spec.stride.unwrap_or(DEFAULT_STRIDE);
            let pairs = verify::grid_pairs(mtraj.len(), stride);
            let r = verify::evi_integral_residual(space, &mtraj, v, kappa, &nu, &pairs, scaling)
                .map_err(annotate)?;
            let base = report(r.max_residual)
                .with_param("kappa", kappa)
                .with_param("scaling", scaling)
                .with_param("stride", stride)
                .with_param("reference", point_json(space, reference));
            if r.vacuous {
                base.with_witness(json!({"vacuous": true})).with_pass(true)
            } else {
                base.with_witness(json!({"s": r.witness_start_time, "t": r.witness_time}))
            }
        }
        CheckName::Contraction => {
            if flows.points.len() < 2 {
                return Err(config_err("check contraction needs at least two flow.starts"));
            }
            let mut best = (f64::NEG_INFINITY, Value::Null);
            for (i, j) in pairs(flows.points.len()) {
                let (a, b) = (&flows.points[i], &flows.points[j]);
                let r = verify::contraction_residual(space, a, b, kappa).map_err(annotate)?;
                if r > best.0 {
                    best = (r, json!([point_json(space, a.start()), point_json(space, b.start())]));
                }
            }
            report(best.0).with_witness(best.1).with_param("kappa", kappa)
        }
        CheckName::Dissipation => {
            if flows.points.is_empty() {
                return Err(config_err("check dissipation needs flow.starts"));
            }
            let mut best = (f64::NEG_INFINITY, Value::Null);
            let mut monotone = true;
            let mut radius = 0.0;
            for traj in &flows.points {
                let r = verify::dissipation_report(space, traj, v, spec.slope_radius).map_err(annotate)?;
                monotone &= r.monotone;
                radius = r.slope_radius;
                if r.max_identity_residual > best.0 {
                    best = (
                        r.max_identity_residual,
                        json!({
                            "start": point_json(space, traj.start()),
                            "s": traj.times[r.witness.0],
                            "t": traj.times[r.witness.1],
                        }),
                    );
                }
            }
            let pass = best.0 <= tol && monotone;
            report(best.0)
                .with_witness(best.1)
                .with_param("slope_radius", radius)
                .with_param("monotone", monotone)
                .with_pass(pass)
        }
        CheckName::Monotonicity => {
            if flows.points.is_empty() {
                return Err(config_err("check monotonicity needs flow.starts"));
            }
            let mut best = (0.0, Value::Null);
            for traj in &flows.points {
                for (k, w) in traj.potential_values.windows(2).enumerate() {
                    let rise = w[1] - w[0];
                    if rise > best.0 {
                        best = (rise, json!({"start": point_json(space, traj.start()), "t": traj.times[k + 1]}));
                    }
                }
            }
            report(best.0).with_witness(best.1)
        }
        CheckName::VarianceDecay => {
            let mtraj = require(flows.measure.as_ref(), name, "flow.atoms")?;
            report(verify::variance_decay_residual(mtraj, kappa)).with_param("kappa", kappa)
        }
        CheckName::DiracPreservation => {
            let trajs = dirac_flows(setup).map_err(|e| match e {
                CliError::Core(c) => annotate(c),
                other => other,
            })?;
            if trajs.is_empty() {
                return Err(config_err("check dirac_preservation needs flow.starts or flow.atoms"));
            }
            let mut best = (0.0, Value::Null);
            for traj in &trajs {
                for (t, &var) in traj.times.iter().zip(&traj.variances) {
                    if var > best.0 || best.1.is_null() {
                        let start = traj.measures[0].support()[0];
                        best = (var.max(best.0), json!({"start": point_json(space, start), "t": t}));
                    }
                }
            }
            report(best.0).with_witness(best.1).with_param("diracs", trajs.len())
        }
        CheckName::Additivity => {
            let mu = require(setup.initial.as_ref(), name, "flow.atoms")?;
            let components = mu
                .atoms()
                .map(|(i, w)| Ok((w, ProbabilityMeasure::dirac(space.len(), i)?)))
                .collect::<semiflow_core::Result<Vec<_>>>()?;
            let r = verify::additivity_residual(space, &Functional::Potential(v), &components, &setup.params)
                .map_err(annotate)?;
            report(r).with_param("components", components.len())
        }
        CheckName::Pushforward => {
            let mu = require(setup.initial.as_ref(), name, "flow.atoms")?;
            let jko = require(flows.measure.as_ref(), name, "flow.atoms")?;
            let push = pushforward_flow(space, v, mu, &setup.params).map_err(annotate)?;
            let mut best = (0.0, Value::Null);
            for (k, (a, b)) in jko.measures.iter().zip(&push.measures).enumerate() {
                let d = semiflow_core::transport::w2_distance(space, a, b).map_err(annotate)?;
                if d > best.0 {
                    best = (d, json!({"t": jko.times[k]}));
                }
            }
            report(best.0).with_witness(best.1)
        }
        CheckName::ReparamContraction => {
            let level = require(spec.level, name, "a level")?;
            if flows.points.len() < 2 {
                return Err(config_err("check reparam_contraction needs at least two flow.starts"));
            }
            let mut best = (f64::NEG_INFINITY, Value::Null);
            for (i, j) in pairs(flows.points.len()) {
                let (a, b) = (&flows.points[i], &flows.points[j]);
                let r = verify::reparam_contraction_residual(space, a, b, kappa, level).map_err(annotate)?;
                if r > best.0 {
                    let ta = verify::level_reparametrization(a, level).hitting_time;
                    let tb = verify::level_reparametrization(b, level).hitting_time;
                    best = (
                        r,
                        json!({
                            "starts": [point_json(space, a.start()), point_json(space, b.start())],
                            "hitting_times": [ta, tb],
                        }),
                    );
                }
            }
            report(best.0)
                .with_witness(best.1)
                .with_param("kappa", kappa)
                .with_param("level", level)
        }
        CheckName::Convexity => {
            let budget = spec.budget.unwrap_or(DEFAULT_CONVEXITY_BUDGET);
            let r = kappa_convexity_report(space, v, kappa, budget, setup.params.seed).map_err(annotate)?;
            let witness = match r.witness {
                Some((x, y, t, z)) => json!({
                    "x": point_json(space, x),
                    "y": point_json(space, y),
                    "t": t,
                    "z": point_json(space, z),
                    "violation": r.worst_violation,
                }),
                None => Value::Null,
            };
            report(r.worst_violation - r.quantization_slack)
                .with_witness(witness)
                .with_param("kappa", kappa)
                .with_param("slack", r.quantization_slack)
                .with_param("samples", r.samples_checked)
                .with_param("exhaustive", r.exhaustive)
                .with_param("seed", setup.params.seed)
        }
        CheckName::RegularizationLimit => {
            if flows.regularized.is_empty() {
                return Err(config_err("check regularization_limit needs flow.atoms and flow.n_list"));
            }
            let mut runs: Vec<&RegularizedRun> = flows.regularized.iter().collect();
            runs.sort_by(|a, b| a.n.total_cmp(&b.n));
            let finals: Vec<f64> = runs
                .iter()
                .map(|r| *r.trajectory.variances.last().expect("nonempty"))
                .collect();
            let decreasing = finals.windows(2).all(|w| w[1] < w[0]);
            let last = *finals.last().expect("nonempty");
            report(last)
                .with_witness(json!({
                    "n": runs.iter().map(|r| r.n).collect::<Vec<_>>(),
                    "final_variance": finals,
                }))
                .with_param("strictly_decreasing", decreasing)
                .with_pass(last <= tol && decreasing)
        }
    };
    Ok(out)
}

/// One evaluated check with its wall-clock cost.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub report: CheckReport,
    pub tolerance: f64,
    pub runtime: Duration,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub scenario: String,
    pub outcomes: Vec<CheckOutcome>,
}

impl SuiteResult {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.report.pass)
    }

    pub fn reports(&self) -> Vec<CheckReport> {
        self.outcomes.iter().map(|o| o.report.clone()).collect()
    }
}

pub fn run_checks(scenario: &Scenario, setup: &Setup, flows: &Flows) -> CliResult<SuiteResult> {
    let outcomes = scenario
        .checks
        .iter()
        .map(|spec| {
            let started = Instant::now();
            let report = evaluate_check(setup, flows, spec)?;
            Ok(CheckOutcome {
                report,
                tolerance: spec.tolerance,
                runtime: started.elapsed(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SuiteResult {
        scenario: scenario.name.clone(),
        outcomes,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes()).map_err(|e| CliError::Io { path, source: e })
}

/// Label of a regularization index in file names: `100`, `0.5`.
fn n_label(n: f64) -> String {
    format!("{n}")
}

pub fn write_flows(dir: &Path, setup: &Setup, flows: &Flows) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: String, contents: String| -> CliResult<()> {
        write(dir, &name, &contents)?;
        written.push(dir.join(name));
        Ok(())
    };
    for (k, traj) in flows.points.iter().enumerate() {
        emit(format!("point_flow_{k}.csv"), traj.to_csv(&setup.space))?;
    }
    if let Some(m) = &flows.measure {
        emit("measure_flow.csv".into(), m.to_csv())?;
        emit("measure_summary.csv".into(), m.summary_csv())?;
    }
    for run in &flows.regularized {
        let label = n_label(run.n);
        emit(format!("regularized_n{label}.csv"), run.trajectory.to_csv())?;
        emit(format!("regularized_n{label}_summary.csv"), run.trajectory.summary_csv())?;
    }
    Ok(written)
}

pub fn write_reports(dir: &Path, suite: &SuiteResult) -> CliResult<()> {
    let reports = suite.reports();
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    write(dir, "reports.json", &(json + "\n"))?;
    write(dir, "reports.csv", &verify::reports_csv(&reports))
}

/// Runs flows and checks; writes trajectories and reports when `out` is set.
pub fn run_scenario(scenario: &Scenario, seed: Option<u64>, out: Option<&Path>) -> CliResult<SuiteResult> {
    let setup = build_setup(scenario, seed)?;
    let needs_family = scenario
        .checks
        .iter()
        .any(|c| c.name == CheckName::RegularizationLimit);
    let flows = run_flows(&setup, needs_family || out.is_some())?;
    let suite = run_checks(scenario, &setup, &flows)?;
    if let Some(dir) = out {
        write_flows(dir, &setup, &flows)?;
        write_reports(dir, &suite)?;
    }
    Ok(suite)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NList,
    TauList,
    HList,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NList => "n_list",
            Self::TauList => "tau_list",
            Self::HList => "h_list",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Outcome of the configured column assertion, if any.
    pub monotone: Option<bool>,
    /// Per-row conjunction of check passes (empty for the `n` axis).
    pub row_pass: Vec<bool>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        if !self.row_pass.is_empty() {
            out.push_str(",all_pass");
        }
        out.push('\n');
        for (k, row) in self.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|&x| fmt17(x)).collect();
            out.push_str(&cells.join(","));
            if let Some(p) = self.row_pass.get(k) {
                out.push_str(&format!(",{p}"));
            }
            out.push('\n');
        }
        out
    }
}

fn check_columns(scenario: &Scenario) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for c in &scenario.checks {
        let base = c.name.as_str().to_owned();
        let mut name = base.clone();
        let mut k = 2;
        while names.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        names.push(name);
    }
    names
}

fn with_spacing(scenario: &Scenario, h: f64) -> CliResult<Scenario> {
    if !(h > 0.0) {
        return Err(config_err(format!("grid spacing must be positive, got {h}")));
    }
    let mut s = scenario.clone();
    s.space = match scenario.space {
        SpaceSpec::Interval { a, b, .. } => SpaceSpec::Interval {
            a,
            b,
            points: ((b - a) / h).round() as usize + 1,
        },
        SpaceSpec::Circle { radius, .. } => SpaceSpec::Circle {
            points: (2.0 * std::f64::consts::PI * radius / h).round() as usize,
            radius,
        },
        SpaceSpec::Graph { .. } => return Err(config_err("h_list sweeps need an interval or circle space")),
    };
    Ok(s)
}

/// One row per axis value. The `n` axis reports the regularized flows
/// (`n, kappa_n, final_energy, final_variance`); the `τ` and `h` axes rerun
/// the check suite and report each check's residual.
pub fn run_sweep(scenario: &Scenario, axis: SweepAxis, seed: Option<u64>) -> CliResult<SweepTable> {
    let sweep = scenario.sweep.clone().unwrap_or(crate::config::SweepSpec {
        tau_list: Vec::new(),
        h_list: Vec::new(),
        monotone: None,
    });
    let (header, rows, row_pass) = match axis {
        SweepAxis::NList => {
            let setup = build_setup(scenario, seed)?;
            let mu = setup
                .initial
                .as_ref()
                .ok_or_else(|| config_err("n_list sweeps need flow.atoms"))?;
            if setup.n_list.is_empty() {
                return Err(config_err("flow.n_list is empty"));
            }
            let runs = run_regularized_family(&setup.space, &setup.potential, mu, &setup.params, &setup.n_list)?;
            let rows = runs
                .iter()
                .map(|r| {
                    vec![
                        r.n,
                        r.kappa_n,
                        *r.trajectory.energies.last().expect("nonempty"),
                        *r.trajectory.variances.last().expect("nonempty"),
                    ]
                })
                .collect();
            let header = ["n", "kappa_n", "final_energy", "final_variance"].map(String::from).to_vec();
            (header, rows, Vec::new())
        }
        SweepAxis::TauList | SweepAxis::HList => {
            let values = if axis == SweepAxis::TauList { &sweep.tau_list } else { &sweep.h_list };
            if values.is_empty() {
                return Err(config_err(format!("sweep.{} is empty", axis.as_str())));
            }
            let variants = values
                .iter()
                .map(|&x| {
                    if axis == SweepAxis::TauList {
                        let mut s = scenario.clone();
                        s.flow.tau = x;
                        Ok(s)
                    } else {
                        with_spacing(scenario, x)
                    }
                })
                .collect::<CliResult<Vec<_>>>()?;
            let results: Vec<CliResult<SuiteResult>> = std::thread::scope(|scope| {
                let handles: Vec<_> = variants
                    .iter()
                    .map(|s| scope.spawn(move || run_scenario(s, seed, None)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
            });
            let mut rows = Vec::new();
            let mut passes = Vec::new();
            for (&x, result) in values.iter().zip(results) {
                let suite = result?;
                let mut row = vec![x];
                row.extend(suite.outcomes.iter().map(|o| o.report.max_residual));
                rows.push(row);
                passes.push(suite.all_passed());
            }
            let mut header = vec![if axis == SweepAxis::TauList { "tau" } else { "h" }.to_owned()];
            header.extend(check_columns(scenario));
            (header, rows, passes)
        }
    };
    let mut table = SweepTable {
        axis,
        header,
        rows,
        monotone: None,
        row_pass,
    };
    if let Some(m) = &sweep.monotone {
        if let Some(col) = table.column(&m.column) {
            let ok = col.windows(2).all(|w| match m.order {
                Order::StrictlyDecreasing => w[1] < w[0],
                Order::NonIncreasing => w[1] <= w[0] + m.relative_slack * w[0].abs(),
            });
            table.monotone = Some(ok);
        }
    }
    Ok(table)
}

pub fn write_sweep(dir: &Path, table: &SweepTable) -> CliResult<PathBuf> {
    let name = format!("sweep_{}.csv", table.axis.as_str());
    write(dir, &name, &table.to_csv())?;
    Ok(dir.join(name))
}
