//! Residuals of the inequalities satisfied by generated flows.
//!
//! Every check returns a number; positive residuals measure violation.
//! Tolerances are applied by callers. Time derivatives are forward
//! differences on the uniform grid of the trajectory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::flow::{run_measure_flow, FlowParams, FlowTrajectory, Functional, MeasureTrajectory};
use crate::functionals::{potential_energy, Potential};
use crate::io::fmt17;
use crate::space::MetricMeasureSpace;
use crate::transport::{w2_distance, w2_exact, ProbabilityMeasure};

/// Normalization of the modulus term in the evolution variational inequality.
///
/// With `Half` the differential form reads
/// `d/dt ½d²(x_t, z) + (κ/2) d²(x_t, z) ≤ V(z) - V(x_t)`, whose integral form
/// has weight `e^{κt}` and prefactor `(e^{κt} - e^{κs})/κ`. This is the
/// normalization under which `V = κx²/2` on a line attains equality.
/// `Full` doubles the modulus term: `κ d²` with weight `e^{2κt}` and
/// prefactor `(e^{2κt} - e^{2κs})/(2κ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusScaling {
    #[default]
    Half,
    Full,
}

impl ModulusScaling {
    fn factor(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::Full => 1.0,
        }
    }

    /// Rate `r` of the integral weight `e^{rt}`.
    pub fn rate(self, kappa: f64) -> f64 {
        2.0 * self.factor() * kappa
    }

    /// `(e^{rt} - e^{rs})/r`, or `t - s` when `κ = 0`.
    pub fn prefactor(self, kappa: f64, s: f64, t: f64) -> f64 {
        let r = self.rate(kappa);
        if r == 0.0 {
            t - s
        } else {
            ((r * t).exp() - (r * s).exp()) / r
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EviForm {
    Differential,
    Integral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EviReport {
    pub form: EviForm,
    pub kappa: f64,
    pub scaling: ModulusScaling,
    pub max_residual: f64,
    /// Time of the worst residual (`t` of the pair for the integral form).
    pub witness_time: f64,
    /// Start time `s` of the worst pair (integral form only).
    pub witness_start_time: Option<f64>,
    /// Observation point of the worst residual (differential form only).
    pub witness_point: Option<usize>,
    /// Set when the comparison measure charges `{V = ∞}`; the inequality is
    /// then void and `max_residual` is `-∞`.
    pub vacuous: bool,
}

/// Differential residual
/// `[d²(x_{t+τ}, z) - d²(x_t, z)]/(2τ) + c κ d²(x_t, z) - V(z) + V(x_t)`,
/// maximized over grid times and observation points, with `c` from
/// `scaling`.
pub fn evi_differential_residual(
    space: &MetricMeasureSpace,
    traj: &FlowTrajectory,
    v: &Potential,
    kappa: f64,
    observation_points: &[usize],
    scaling: ModulusScaling,
) -> Result<EviReport> {
    if traj.len() < 2 {
        return invalid("trajectory needs at least two steps");
    }
    if observation_points.is_empty() {
        return invalid("no observation points");
    }
    if let Some(&z) = observation_points.iter().find(|&&z| z >= v.len() || !v.is_finite_at(z)) {
        return invalid(format!("observation point {z} is outside the finite set"));
    }
    let c = scaling.factor() * kappa;
    let mut report = EviReport {
        form: EviForm::Differential,
        kappa,
        scaling,
        max_residual: f64::NEG_INFINITY,
        witness_time: 0.0,
        witness_start_time: None,
        witness_point: None,
        vacuous: false,
    };
    for k in 0..traj.len() - 1 {
        let (x, y) = (traj.points[k], traj.points[k + 1]);
        for &z in observation_points {
            let d2 = space.dist2(x, z);
            let r = (space.dist2(y, z) - d2) / (2.0 * traj.tau) + c * d2 - v.value(z)
                + traj.potential_values[k];
            if r > report.max_residual {
                report.max_residual = r;
                report.witness_time = traj.times[k];
                report.witness_point = Some(z);
            }
        }
    }
    Ok(report)
}

/// Index pairs `(s, t)`, `s < t`, over every `stride`-th grid time.
pub fn grid_pairs(len: usize, stride: usize) -> Vec<(usize, usize)> {
    let stride = stride.max(1);
    let idx: Vec<usize> = (0..len).step_by(stride).collect();
    let mut pairs = Vec::new();
    for (a, &s) in idx.iter().enumerate() {
        for &t in &idx[a + 1..] {
            pairs.push((s, t));
        }
    }
    pairs
}

/// Integral residual
/// `½W₂²(μ_t, ν)e^{rt} - ½W₂²(μ_s, ν)e^{rs} - P(s, t)[S(ν) - S(μ_t)]`
/// over the given index pairs.
pub fn evi_integral_residual(
    space: &MetricMeasureSpace,
    mtraj: &MeasureTrajectory,
    v: &Potential,
    kappa: f64,
    nu: &ProbabilityMeasure,
    time_pairs: &[(usize, usize)],
    scaling: ModulusScaling,
) -> Result<EviReport> {
    let mut report = EviReport {
        form: EviForm::Integral,
        kappa,
        scaling,
        max_residual: f64::NEG_INFINITY,
        witness_time: 0.0,
        witness_start_time: None,
        witness_point: None,
        vacuous: false,
    };
    let s_nu = potential_energy(v, nu);
    if s_nu.is_infinite() {
        report.vacuous = true;
        return Ok(report);
    }
    if let Some(&(s, t)) = time_pairs.iter().find(|&&(s, t)| s >= t || t >= mtraj.len()) {
        return invalid(format!("time pair ({s}, {t}) is not an increasing pair on the grid"));
    }
    let mut w2 = vec![f64::NAN; mtraj.len()];
    let mut half_w2 = |k: usize| -> Result<f64> {
        if w2[k].is_nan() {
            w2[k] = w2_exact(space, &mtraj.measures[k], nu)?.squared_cost / 2.0;
        }
        Ok(w2[k])
    };
    let r = scaling.rate(kappa);
    for &(s, t) in time_pairs {
        let (ts, tt) = (mtraj.times[s], mtraj.times[t]);
        let p = scaling.prefactor(kappa, ts, tt);
        let residual = half_w2(t)? * (r * tt).exp() - half_w2(s)? * (r * ts).exp()
            - p * (s_nu - potential_energy(v, &mtraj.measures[t]));
        if residual > report.max_residual {
            report.max_residual = residual;
            report.witness_time = tt;
            report.witness_start_time = Some(ts);
        }
    }
    Ok(report)
}

fn check_same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs())) {
        return invalid("trajectories are on different time grids");
    }
    Ok(())
}

/// `max_t d(x_t, y_t) - e^{-κt} d(x_0, y_0)`.
pub fn contraction_residual(
    space: &MetricMeasureSpace,
    a: &FlowTrajectory,
    b: &FlowTrajectory,
    kappa: f64,
) -> Result<f64> {
    check_same_grid(&a.times, &b.times)?;
    let d0 = space.dist(a.points[0], b.points[0]);
    Ok(a.times
        .iter()
        .zip(a.points.iter().zip(&b.points))
        .map(|(t, (&x, &y))| space.dist(x, y) - (-kappa * t).exp() * d0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `max_t W₂(μ_t, ν_t) - e^{-κt} W₂(μ_0, ν_0)` with exact transport.
pub fn w2_contraction_residual(
    space: &MetricMeasureSpace,
    a: &MeasureTrajectory,
    b: &MeasureTrajectory,
    kappa: f64,
) -> Result<f64> {
    check_same_grid(&a.times, &b.times)?;
    let d0 = w2_distance(space, &a.measures[0], &b.measures[0])?;
    let mut worst = f64::NEG_INFINITY;
    for (t, (m, n)) in a.times.iter().zip(a.measures.iter().zip(&b.measures)) {
        worst = worst.max(w2_distance(space, m, n)? - (-kappa * t).exp() * d0);
    }
    Ok(worst)
}

/// `max_{y ≠ x, d(x, y) ≤ radius} (V(x) - V(y))⁺ / d(x, y)`.
pub fn descending_slope(space: &MetricMeasureSpace, v: &Potential, x: usize, radius: f64) -> f64 {
    let vx = v.value(x);
    space
        .neighbors_within(x, radius)
        .into_iter()
        .filter(|&y| y != x && v.is_finite_at(y))
        .map(|y| (vx - v.value(y)).max(0.0) / space.dist(x, y))
        .fold(0.0, f64::max)
}

/// Default slope radius: twice the resolution on coordinate grids, the
/// whole space on graphs with at most 300 points, twice the resolution on
/// larger graphs.
pub fn default_slope_radius(space: &MetricMeasureSpace) -> f64 {
    if space.coords().is_none() && space.len() <= 300 {
        f64::INFINITY
    } else {
        2.0 * space.resolution()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub times: Vec<f64>,
    /// `d(x_{t+τ}, x_t)/τ`; one entry per step.
    pub metric_speed: Vec<f64>,
    /// `|∇⁻V|(x_t)`; one entry per step.
    pub descending_slope: Vec<f64>,
    /// `V(x_t)` at every grid time.
    pub lhs: Vec<f64>,
    /// `V(x_0) - ½Σ_{r<t} τ(speed² + slope²)` at every grid time.
    pub rhs: Vec<f64>,
    /// `max_{s<t} |V(x_t) - V(x_s) + ½Σ_{s≤r<t} τ(speed² + slope²)|`.
    pub max_identity_residual: f64,
    /// Grid indices `(s, t)` attaining the maximum.
    pub witness: (usize, usize),
    /// Whether `V(x_t)` never increases, compared exactly.
    pub monotone: bool,
    pub slope_radius: f64,
}

pub fn dissipation_report(
    space: &MetricMeasureSpace,
    traj: &FlowTrajectory,
    v: &Potential,
    slope_radius: Option<f64>,
) -> Result<DissipationReport> {
    if traj.len() < 2 {
        return invalid("trajectory needs at least two steps");
    }
    let radius = slope_radius.unwrap_or_else(|| default_slope_radius(space));
    if !(radius > 0.0) {
        return invalid(format!("slope radius must be positive, got {radius}"));
    }
    let steps = traj.len() - 1;
    let tau = traj.tau;
    let speed: Vec<f64> = (0..steps)
        .map(|k| space.dist(traj.points[k + 1], traj.points[k]) / tau)
        .collect();
    let slope: Vec<f64> = (0..steps)
        .map(|k| descending_slope(space, v, traj.points[k], radius))
        .collect();
    let lhs = traj.potential_values.clone();
    let mut rhs = Vec::with_capacity(traj.len());
    let mut dissipated = 0.0;
    rhs.push(lhs[0]);
    let mut g = vec![lhs[0]];
    for k in 0..steps {
        dissipated += 0.5 * tau * (speed[k] * speed[k] + slope[k] * slope[k]);
        rhs.push(lhs[0] - dissipated);
        g.push(lhs[k + 1] + dissipated);
    }
    // |G_t - G_s| is maximized by the extreme values of G.
    let (mut lo, mut hi) = (0, 0);
    for k in 1..g.len() {
        if g[k] < g[lo] {
            lo = k;
        }
        if g[k] > g[hi] {
            hi = k;
        }
    }
    let monotone = lhs.windows(2).all(|w| w[1] <= w[0]);
    Ok(DissipationReport {
        times: traj.times.clone(),
        metric_speed: speed,
        descending_slope: slope,
        max_identity_residual: g[hi] - g[lo],
        witness: (lo.min(hi), lo.max(hi)),
        monotone,
        lhs,
        rhs,
        slope_radius: radius,
    })
}

/// `max_t Var₂(μ_t) e^{2κt} - Var₂(μ_0)`.
pub fn variance_decay_residual(mtraj: &MeasureTrajectory, kappa: f64) -> f64 {
    let v0 = mtraj.variances[0];
    mtraj
        .times
        .iter()
        .zip(&mtraj.variances)
        .map(|(t, v)| v * (2.0 * kappa * t).exp() - v0)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Runs the flow from the mixture `Σλᵢμᵢ` and from each component, and
/// returns `max_t W₂(flow of mixture, Σλᵢ flow of μᵢ)`.
pub fn additivity_residual(
    space: &MetricMeasureSpace,
    functional: &Functional<'_>,
    components: &[(f64, ProbabilityMeasure)],
    params: &FlowParams,
) -> Result<f64> {
    if components.is_empty() {
        return invalid("no mixture components");
    }
    if components.iter().any(|(w, _)| !(*w > 0.0)) {
        return invalid("mixture weights must be positive");
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-12 {
        return invalid(format!("mixture weights sum to {total}, not 1"));
    }
    let refs: Vec<(f64, &ProbabilityMeasure)> = components.iter().map(|(w, m)| (*w, m)).collect();
    let mixture = ProbabilityMeasure::mixture(&refs)?;
    let whole = run_measure_flow(space, functional, &mixture, params)?;
    let parts = components
        .iter()
        .map(|(_, m)| run_measure_flow(space, functional, m, params))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0_f64;
    for k in 0..whole.len() {
        let at_k: Vec<(f64, &ProbabilityMeasure)> = components
            .iter()
            .zip(&parts)
            .map(|((w, _), p)| (*w, &p.measures[k]))
            .collect();
        let combined = ProbabilityMeasure::mixture(&at_k)?;
        worst = worst.max(w2_distance(space, &whole.measures[k], &combined)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReparamResult {
    pub level: f64,
    /// First grid time with `V(x_t) ≤ a`, or `+∞`.
    pub hitting_time: f64,
    /// `Ψ_a(x_0)`, the point at the hitting time.
    pub point: Option<usize>,
}

pub fn level_reparametrization(traj: &FlowTrajectory, level: f64) -> ReparamResult {
    match traj.potential_values.iter().position(|&v| v <= level) {
        Some(k) => ReparamResult {
            level,
            hitting_time: traj.times[k],
            point: Some(traj.points[k]),
        },
        None => ReparamResult {
            level,
            hitting_time: f64::INFINITY,
            point: None,
        },
    }
}

/// `d(Ψ_a(A), Ψ_a(B)) - exp(-κ(T_a(A) + T_a(B))/2) d(A_0, B_0)`.
pub fn reparam_contraction_residual(
    space: &MetricMeasureSpace,
    a: &FlowTrajectory,
    b: &FlowTrajectory,
    kappa: f64,
    level: f64,
) -> Result<f64> {
    let ra = level_reparametrization(a, level);
    let rb = level_reparametrization(b, level);
    match (ra.point, rb.point) {
        (Some(pa), Some(pb)) => {
            let bound = (-kappa * (ra.hitting_time + rb.hitting_time) / 2.0).exp()
                * space.dist(a.start(), b.start());
            Ok(space.dist(pa, pb) - bound)
        }
        _ => Err(Error::NotApplicable(format!(
            "level {level} is never reached (hitting times {} and {})",
            ra.hitting_time, rb.hitting_time
        ))),
    }
}

/// Outcome of one named check, as exported by the suite runner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    /// Non-finite values serialize as `null`.
    pub max_residual: f64,
    pub witness: Value,
    pub params: BTreeMap<String, Value>,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("tolerance".to_owned(), json!(tolerance));
        Self {
            check: check.into(),
            max_residual,
            witness: Value::Null,
            params,
            pass: max_residual <= tolerance,
        }
    }

    pub fn with_witness(mut self, witness: Value) -> Self {
        self.witness = witness;
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.to_owned(), json!(value));
        self
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub const CSV_HEADER: &'static str = "check,max_residual,pass";

    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.check, fmt17(self.max_residual), self.pass)
    }
}

/// CSV table of reports, header included.
pub fn reports_csv(reports: &[CheckReport]) -> String {
    let mut out = format!("{}\n", CheckReport::CSV_HEADER);
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{pushforward_flow, run_point_flow};
    use crate::space::build_interval_space;

    fn constant_trajectory(point: usize, value: f64, steps: usize, tau: f64) -> FlowTrajectory {
        FlowTrajectory {
            tau,
            kappa: 0.0,
            times: (0..=steps).map(|k| k as f64 * tau).collect(),
            points: vec![point; steps + 1],
            potential_values: vec![value; steps + 1],
        }
    }

    #[test]
    fn prefactor_branches() {
        for scaling in [ModulusScaling::Half, ModulusScaling::Full] {
            assert!((scaling.prefactor(0.0, 0.2, 0.7) - 0.5).abs() < 1e-15);
        }
        let p = ModulusScaling::Half.prefactor(1.0, 0.0, 1.0);
        assert!((p - (1f64.exp() - 1.0)).abs() < 1e-15);
        let p = ModulusScaling::Full.prefactor(1.0, 0.0, 1.0);
        assert!((p - (2f64.exp() - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn differential_trivial_and_wrong_trajectory() {
        let s = build_interval_space(-2.0, 2.0, 401).unwrap();
        let zero = Potential::new(vec![0.0; 401]).unwrap();
        let traj = constant_trajectory(300, 0.0, 5, 0.1);
        let r = evi_differential_residual(&s, &traj, &zero, 0.0, &[0, 200, 400], ModulusScaling::Half)
            .unwrap();
        assert_eq!(r.max_residual, 0.0);

        let v = Potential::from_fn(&s, |x| x * x / 2.0).unwrap();
        let one = s.nearest_point(1.0).unwrap();
        let zero_pt = s.nearest_point(0.0).unwrap();
        let stuck = constant_trajectory(one, v.value(one), 5, 0.1);
        let r = evi_differential_residual(&s, &stuck, &v, 0.0, &[zero_pt], ModulusScaling::Half)
            .unwrap();
        assert!((r.max_residual - 0.5).abs() < 1e-12);
        assert_eq!(r.witness_point, Some(zero_pt));

        let short = constant_trajectory(0, 0.0, 0, 0.1);
        assert!(evi_differential_residual(&s, &short, &zero, 0.0, &[0], ModulusScaling::Half).is_err());
    }

    #[test]
    fn integral_trivial_and_vacuous() {
        let s = build_interval_space(0.0, 1.0, 11).unwrap();
        let zero = Potential::new(vec![0.0; 11]).unwrap();
        let mu = ProbabilityMeasure::uniform(11).unwrap();
        let p = FlowParams::new(0.1, 1.0).unwrap();
        let traj = pushforward_flow(&s, &zero, &mu, &p).unwrap();
        let pairs = grid_pairs(traj.len(), 1);
        let r = evi_integral_residual(&s, &traj, &zero, 0.0, &mu, &pairs, ModulusScaling::Half).unwrap();
        assert_eq!(r.max_residual, 0.0);

        let mut vals = vec![0.0; 11];
        vals[10] = f64::INFINITY;
        let v = Potential::new(vals).unwrap();
        let nu = ProbabilityMeasure::dirac(11, 10).unwrap();
        let r = evi_integral_residual(&s, &traj, &v, 0.0, &nu, &pairs, ModulusScaling::Half).unwrap();
        assert!(r.vacuous);
    }

    #[test]
    fn grid_pair_enumeration() {
        assert_eq!(grid_pairs(3, 1), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(grid_pairs(21, 10), vec![(0, 10), (0, 20), (10, 20)]);
    }

    #[test]
    fn identical_starts_do_not_expand() {
        let s = build_interval_space(-2.0, 2.0, 4001).unwrap();
        let v = Potential::from_fn(&s, |x| x * x / 2.0).unwrap();
        let p = FlowParams::new(0.01, 0.5).unwrap();
        let x = s.nearest_point(1.0).unwrap();
        let a = run_point_flow(&s, &v, x, &p).unwrap();
        assert!(contraction_residual(&s, &a, &a, 1.0).unwrap() <= 0.0);
        let short = run_point_flow(&s, &v, x, &FlowParams::new(0.01, 0.4).unwrap()).unwrap();
        assert!(contraction_residual(&s, &a, &short, 1.0).is_err());
    }

    #[test]
    fn slope_difference_quotient() {
        let h = 1e-3;
        let s = build_interval_space(-2.0, 2.0, 4001).unwrap();
        let v = Potential::from_fn(&s, |x| x * x / 2.0).unwrap();
        let x = s.nearest_point(1.0).unwrap();
        let slope = descending_slope(&s, &v, x, 2.0 * h);
        assert!((slope - (1.0 - h / 2.0)).abs() < 1e-9, "{slope}");
    }

    #[test]
    fn dissipation_of_rest() {
        let s = build_interval_space(0.0, 1.0, 11).unwrap();
        let zero = Potential::new(vec![0.0; 11]).unwrap();
        let traj = constant_trajectory(3, 0.0, 4, 0.25);
        let r = dissipation_report(&s, &traj, &zero, None).unwrap();
        assert!(r.metric_speed.iter().all(|&x| x == 0.0));
        assert!(r.descending_slope.iter().all(|&x| x == 0.0));
        assert_eq!(r.max_identity_residual, 0.0);
        assert!(r.monotone);
    }

    #[test]
    fn variance_decay_of_rest_and_dirac() {
        let s = build_interval_space(0.0, 1.0, 11).unwrap();
        let zero = Potential::new(vec![0.0; 11]).unwrap();
        let p = FlowParams::new(0.1, 1.0).unwrap();
        let mu = ProbabilityMeasure::from_atoms(11, &[(1, 0.5), (7, 0.5)]).unwrap();
        let traj = pushforward_flow(&s, &zero, &mu, &p).unwrap();
        assert_eq!(variance_decay_residual(&traj, 0.0), 0.0);
        let v = Potential::from_fn(&s, |x| (x - 0.5).powi(2)).unwrap();
        let d = pushforward_flow(&s, &v, &ProbabilityMeasure::dirac(11, 2).unwrap(), &p).unwrap();
        assert_eq!(variance_decay_residual(&d, 3.0), 0.0);
    }

    #[test]
    fn additivity_single_component_and_weights() {
        let s = build_interval_space(-1.0, 1.0, 41).unwrap();
        let v = Potential::from_fn(&s, |x| x * x).unwrap();
        let p = FlowParams::new(0.1, 0.5).unwrap();
        let f = Functional::Potential(&v);
        let d = ProbabilityMeasure::dirac(41, 5).unwrap();
        assert_eq!(additivity_residual(&s, &f, &[(1.0, d.clone())], &p).unwrap(), 0.0);
        assert!(additivity_residual(&s, &f, &[(0.5, d)], &p).is_err());
    }

    #[test]
    fn level_hitting() {
        let s = build_interval_space(-2.0, 2.0, 4001).unwrap();
        let v = Potential::from_fn(&s, |x| x * x / 2.0).unwrap();
        let p = FlowParams::new(0.01, 0.5).unwrap();
        let x = s.nearest_point(1.0).unwrap();
        let traj = run_point_flow(&s, &v, x, &p).unwrap();
        let r = level_reparametrization(&traj, 1.0);
        assert_eq!((r.hitting_time, r.point), (0.0, Some(x)));
        let r = level_reparametrization(&traj, -1.0);
        assert_eq!((r.hitting_time, r.point), (f64::INFINITY, None));
        assert_eq!(reparam_contraction_residual(&s, &traj, &traj, 1.0, 0.3).unwrap(), 0.0);
        assert!(matches!(
            reparam_contraction_residual(&s, &traj, &traj, 1.0, -1.0),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn report_json_key_order() {
        let r = CheckReport::new("contraction", 0.01, 0.02)
            .with_witness(json!({"t": 0.5}))
            .with_param("kappa", 1.0);
        assert!(r.pass);
        let text = r.to_json();
        let keys = ["\"check\"", "\"max_residual\"", "\"witness\"", "\"params\"", "\"pass\""];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(reports_csv(&[r]).starts_with("check,max_residual,pass\ncontraction,1.0000000000000000e-2,true"));
    }
}
