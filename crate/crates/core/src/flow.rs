//! Minimizing-movement flows.
//!
//! Points move by the proximal map `x ↦ argmin_y d²(x, y)/(2τ) + V(y)`.
//! Measures move by JKO steps `μ ↦ argmin_ν W₂²(μ, ν)/(2τ) + F(ν)`: for the
//! potential energy `F = S` the step is the pushforward of `μ` under the
//! proximal map, which is exact; for `F = Sₙ` the step is solved in coupling
//! space with the first marginal pinned, by entropic scaling iterations whose
//! column update is the closed-form KL proximal map of `Sₙ`.
//!
//! Time steps are uniform and every tie is broken towards the smallest point
//! index, so runs are bit-for-bit reproducible.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::functionals::{potential_energy, regularized_energy, Potential};
use crate::io::fmt17;
use crate::space::MetricMeasureSpace;
use crate::transport::{log_sum_exp, variance2, w2_exact, ProbabilityMeasure};

/// Cap on Newton iterations per smoothing stage of a regularized JKO step.
pub const MAX_NEWTON_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    /// Step size τ.
    pub tau: f64,
    /// Total time T.
    pub horizon: f64,
    /// Convexity modulus κ of the potential.
    pub kappa: f64,
    /// Lower Ricci bound K of the reference space; enters `κₙ = K/n + κ`.
    pub ricci_lower_bound: f64,
    pub solver_tolerance: f64,
    pub seed: u64,
}

impl FlowParams {
    pub fn new(tau: f64, horizon: f64) -> Result<Self> {
        let p = Self {
            tau,
            horizon,
            kappa: 0.0,
            ricci_lower_bound: 0.0,
            solver_tolerance: 1e-6,
            seed: 0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_ricci_lower_bound(mut self, k: f64) -> Self {
        self.ricci_lower_bound = k;
        self
    }

    pub fn with_solver_tolerance(mut self, tol: f64) -> Self {
        self.solver_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return invalid(format!("step size must be positive, got {}", self.tau));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.tau > self.horizon * (1.0 + 1e-12) {
            return invalid(format!("step {} exceeds horizon {}", self.tau, self.horizon));
        }
        if !(self.solver_tolerance > 0.0) {
            return invalid(format!(
                "solver tolerance must be positive, got {}",
                self.solver_tolerance
            ));
        }
        if !self.kappa.is_finite() || !self.ricci_lower_bound.is_finite() {
            return invalid("kappa and the Ricci bound must be finite");
        }
        Ok(())
    }

    /// Number of steps, `T/τ` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.horizon / self.tau).round() as usize
    }

    /// Grid times `0, τ, …, steps·τ`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| k as f64 * self.tau).collect()
    }

    /// `κₙ = K/n + κ`.
    pub fn kappa_n(&self, n: f64) -> f64 {
        self.ricci_lower_bound / n + self.kappa
    }
}

/// A curve of points on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub tau: f64,
    pub kappa: f64,
    pub times: Vec<f64>,
    pub points: Vec<usize>,
    pub potential_values: Vec<f64>,
}

impl FlowTrajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> usize {
        self.points[0]
    }

    /// `t,point_index,coord,V`; the coordinate is left empty on graphs.
    pub fn to_csv(&self, space: &MetricMeasureSpace) -> String {
        let mut out = String::from("t,point_index,coord,V\n");
        for ((t, &p), v) in self.times.iter().zip(&self.points).zip(&self.potential_values) {
            let coord = space.coord(p).map(fmt17).unwrap_or_default();
            let _ = writeln!(out, "{},{p},{coord},{}", fmt17(*t), fmt17(*v));
        }
        out
    }
}

/// A curve of probability measures on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTrajectory {
    pub tau: f64,
    pub kappa: f64,
    pub times: Vec<f64>,
    pub measures: Vec<ProbabilityMeasure>,
    /// Value of the driving functional at each time.
    pub energies: Vec<f64>,
    pub variances: Vec<f64>,
}

impl MeasureTrajectory {
    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    fn from_measures(
        space: &MetricMeasureSpace,
        functional: &Functional<'_>,
        tau: f64,
        kappa: f64,
        measures: Vec<ProbabilityMeasure>,
    ) -> Self {
        let times = (0..measures.len()).map(|k| k as f64 * tau).collect();
        let energies = measures.iter().map(|m| functional.evaluate(space, m)).collect();
        let variances = measures.iter().map(|m| variance2(space, m)).collect();
        Self {
            tau,
            kappa,
            times,
            measures,
            energies,
            variances,
        }
    }

    /// Long format `t,point_index,mass`, nonzero masses only, time-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,point_index,mass\n");
        for (t, mu) in self.times.iter().zip(&self.measures) {
            for (i, w) in mu.atoms() {
                let _ = writeln!(out, "{},{i},{}", fmt17(*t), fmt17(w));
            }
        }
        out
    }

    /// `t,energy,variance`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("t,energy,variance\n");
        for ((t, e), v) in self.times.iter().zip(&self.energies).zip(&self.variances) {
            let _ = writeln!(out, "{},{},{}", fmt17(*t), fmt17(*e), fmt17(*v));
        }
        out
    }
}

/// The functional driving a measure flow.
#[derive(Debug, Clone, Copy)]
pub enum Functional<'a> {
    /// `S(μ) = ∫V dμ`.
    Potential(&'a Potential),
    /// `Sₙ(μ) = Ent(μ|m)/n + ∫V dμ`.
    Regularized { potential: &'a Potential, n: f64 },
}

impl<'a> Functional<'a> {
    pub fn potential(&self) -> &'a Potential {
        match *self {
            Self::Potential(v) | Self::Regularized { potential: v, .. } => v,
        }
    }

    pub fn evaluate(&self, space: &MetricMeasureSpace, mu: &ProbabilityMeasure) -> f64 {
        match *self {
            Self::Potential(v) => potential_energy(v, mu),
            Self::Regularized { potential, n } => regularized_energy(space, potential, mu, n),
        }
    }
}

fn check_point(space: &MetricMeasureSpace, v: &Potential, x: usize) -> Result<()> {
    if x >= space.len() {
        return invalid(format!("point {x} outside a space of {} points", space.len()));
    }
    if v.len() != space.len() {
        return invalid("potential and space sizes differ");
    }
    Ok(())
}

/// Whether `x` lies in `X₀` or has one of its nearest neighbours in `X₀`.
pub fn is_admissible_start(space: &MetricMeasureSpace, v: &Potential, x: usize) -> bool {
    if v.is_finite_at(x) {
        return true;
    }
    let nearest = (0..space.len())
        .filter(|&y| y != x)
        .map(|y| space.dist(x, y))
        .fold(f64::INFINITY, f64::min);
    (0..space.len()).any(|y| y != x && v.is_finite_at(y) && space.dist(x, y) <= nearest)
}

/// `argmin_{y ∈ X₀} d²(x, y)/(2τ) + V(y)`, smallest index on ties.
pub fn proximal_point_step(space: &MetricMeasureSpace, v: &Potential, x: usize, tau: f64) -> Result<usize> {
    check_point(space, v, x)?;
    if !(tau > 0.0) {
        return invalid(format!("step size must be positive, got {tau}"));
    }
    let mut best = usize::MAX;
    let mut best_value = f64::INFINITY;
    for &y in v.finite_set() {
        let value = space.dist2(x, y) / (2.0 * tau) + v.value(y);
        if value < best_value {
            best_value = value;
            best = y;
        }
    }
    if best == usize::MAX {
        return invalid("no point with finite objective (empty finite set)");
    }
    Ok(best)
}

/// Iterates the proximal map `T/τ` times from `x0`.
pub fn run_point_flow(
    space: &MetricMeasureSpace,
    v: &Potential,
    x0: usize,
    params: &FlowParams,
) -> Result<FlowTrajectory> {
    params.validate()?;
    check_point(space, v, x0)?;
    if !is_admissible_start(space, v, x0) {
        return invalid(format!("start {x0} is not in the closure of the finite set"));
    }
    let steps = params.steps();
    let mut points = Vec::with_capacity(steps + 1);
    points.push(x0);
    let mut x = x0;
    for _ in 0..steps {
        x = proximal_point_step(space, v, x, params.tau)?;
        points.push(x);
    }
    Ok(FlowTrajectory {
        tau: params.tau,
        kappa: params.kappa,
        times: params.times(),
        potential_values: points.iter().map(|&p| v.value(p)).collect(),
        points,
    })
}

/// `W₂²(μ, ν)/(2τ) + F(ν)` with the exact transport cost.
pub fn jko_objective(
    space: &MetricMeasureSpace,
    functional: &Functional<'_>,
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
    tau: f64,
) -> Result<f64> {
    let w2 = w2_exact(space, mu, nu)?.squared_cost;
    Ok(w2 / (2.0 * tau) + functional.evaluate(space, nu))
}

/// Result of one JKO step with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct JkoOutcome {
    pub measure: ProbabilityMeasure,
    /// Objective of the final plan (transport term evaluated on the plan).
    pub objective: f64,
    pub iterations: usize,
}

/// One minimizing-movement step for `functional` from `mu`.
pub fn jko_step(
    space: &MetricMeasureSpace,
    functional: &Functional<'_>,
    mu: &ProbabilityMeasure,
    tau: f64,
    solver_tolerance: f64,
) -> Result<ProbabilityMeasure> {
    Ok(jko_step_detailed(space, functional, mu, tau, solver_tolerance)?.measure)
}

pub fn jko_step_detailed(
    space: &MetricMeasureSpace,
    functional: &Functional<'_>,
    mu: &ProbabilityMeasure,
    tau: f64,
    solver_tolerance: f64,
) -> Result<JkoOutcome> {
    if mu.len() != space.len() {
        return invalid("measure and space sizes differ");
    }
    if !(tau > 0.0) {
        return invalid(format!("step size must be positive, got {tau}"));
    }
    match *functional {
        Functional::Potential(v) => {
            let measure = pushforward_step(space, v, mu, tau)?;
            let objective = jko_objective(space, functional, mu, &measure, tau)?;
            Ok(JkoOutcome {
                measure,
                objective,
                iterations: 0,
            })
        }
        Functional::Regularized { potential, n } => {
            if !(n > 0.0) {
                return invalid(format!("regularization index must be positive, got {n}"));
            }
            if !(solver_tolerance > 0.0) {
                return invalid("solver tolerance must be positive");
            }
            regularized_step(space, potential, n, mu, tau, solver_tolerance)
        }
    }
}

/// Moves every atom intact to its proximal point.
fn pushforward_step(
    space: &MetricMeasureSpace,
    v: &Potential,
    mu: &ProbabilityMeasure,
    tau: f64,
) -> Result<ProbabilityMeasure> {
    let mut w = vec![0.0; space.len()];
    for (i, m) in mu.atoms() {
        w[proximal_point_step(space, v, i, tau)?] += m;
    }
    ProbabilityMeasure::new(w)
}

/// Entropic solver for `min_q Σ q_ij d²_ij/(2τ) + Sₙ(qᵀ1) + η KL(q | μ⊗1)`
/// subject to `q 1 = μ`, with `η = ε/(2τ)` and `ε = tol·max d²`.
///
/// Each row of the plan is a softmin `q_ij = μ_i P_ij(ψ)` and the column
/// term enters through its closed-form KL prox, the Gibbs measure
/// `G_j ∝ m_j e^{-n(ψ_j + V_j)}`. The concave semi-dual in `ψ` is
/// maximized by damped Newton steps along a decreasing smoothing schedule,
/// which stays fast when `η` is far below the entropy weight `1/n`.
fn regularized_step(
    space: &MetricMeasureSpace,
    v: &Potential,
    n: f64,
    mu: &ProbabilityMeasure,
    tau: f64,
    tol: f64,
) -> Result<JkoOutcome> {
    let rows = mu.support();
    let cols = v.finite_set();
    let sigma = 2.0 * tau;
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in cols {
            cost.push(space.dist2(i, j) / sigma);
        }
    }
    let diameter = space.diameter();
    // Below √ε_mach relative to the cost scale, rounding in the logits
    // outweighs the smoothing bias.
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let eta = (tol * diameter * diameter / sigma).max(f64::EPSILON.sqrt() * (1.0 + max_cost));
    let problem = SemiDual {
        weights: rows.iter().map(|&i| mu.weights()[i]).collect(),
        cost,
        cols: cols.len(),
        log_prior: cols
            .iter()
            .map(|&j| space.measure()[j].ln() - n * v.value(j))
            .collect(),
        n,
    };

    let mut psi = vec![0.0; cols.len()];
    let mut smoothing = problem.cost.iter().copied().fold(eta, f64::max);
    let mut iterations = 0;
    let mut prev = f64::INFINITY;
    loop {
        let last_stage = smoothing <= eta;
        iterations += problem.newton(&mut psi, smoothing, last_stage, &mut prev, tol)?;
        if last_stage {
            break;
        }
        smoothing = (smoothing * SMOOTHING_DECAY).max(eta);
    }

    let plan = problem.row_plans(&psi, eta);
    let mut nu = vec![0.0; cols.len()];
    let mut transport = 0.0;
    for (r, row) in plan.iter().enumerate() {
        for &(j, q) in row {
            nu[j] += q;
            transport += q * problem.cost[r * problem.cols + j];
        }
    }
    let mut w = vec![0.0; space.len()];
    for (k, &j) in cols.iter().enumerate() {
        w[j] = nu[k];
    }
    let candidate = ProbabilityMeasure::normalized(w)?;
    let objective = transport + regularized_energy(space, v, &candidate, n);
    // The plan cost bounds the transport term from above, so this keeps the
    // step no worse than staying put.
    let stay = regularized_energy(space, v, mu, n);
    if !(objective <= stay) {
        return Ok(JkoOutcome {
            measure: mu.clone(),
            objective: stay,
            iterations,
        });
    }
    Ok(JkoOutcome {
        measure: candidate,
        objective,
        iterations,
    })
}

/// `Φ(ψ) = η Σ_i μ_i LSE_j((ψ_j - c_ij)/η) + LSE_j(log m_j - nψ_j - nV_j)/n`,
/// the negated semi-dual of the regularized step; costs are pre-divided by
/// `2τ`.
struct SemiDual {
    weights: Vec<f64>,
    cost: Vec<f64>,
    cols: usize,
    log_prior: Vec<f64>,
    n: f64,
}

/// Ratio between successive smoothing levels.
const SMOOTHING_DECAY: f64 = 0.25;

/// Row-plan entries below this relative size are dropped from the Hessian.
const HESSIAN_CUTOFF: f64 = 1e-18;

impl SemiDual {
    fn gibbs_logits(&self, psi: &[f64]) -> Vec<f64> {
        self.log_prior
            .iter()
            .zip(psi)
            .map(|(lp, p)| lp - self.n * p)
            .collect()
    }

    fn value(&self, psi: &[f64], eta: f64) -> f64 {
        let mut total = 0.0;
        for (r, &w) in self.weights.iter().enumerate() {
            let row = &self.cost[r * self.cols..(r + 1) * self.cols];
            total += w * eta * log_sum_exp(row.iter().zip(psi).map(|(c, p)| (p - c) / eta));
        }
        total + log_sum_exp(self.gibbs_logits(psi).into_iter()) / self.n
    }

    /// Sparse rows `(j, μ_i P_ij)` of the smoothed plan.
    fn row_plans(&self, psi: &[f64], eta: f64) -> Vec<Vec<(usize, f64)>> {
        let mut logits = vec![0.0; self.cols];
        self.weights
            .iter()
            .enumerate()
            .map(|(r, &w)| {
                let row = &self.cost[r * self.cols..(r + 1) * self.cols];
                for ((l, c), p) in logits.iter_mut().zip(row).zip(psi) {
                    *l = (p - c) / eta;
                }
                let lse = log_sum_exp(logits.iter().copied());
                logits
                    .iter()
                    .enumerate()
                    .filter_map(|(j, l)| {
                        let p = (l - lse).exp();
                        (p > HESSIAN_CUTOFF).then_some((j, w * p))
                    })
                    .collect()
            })
            .collect()
    }

    /// Newton iterations at fixed smoothing; returns the number taken.
    fn newton(
        &self,
        psi: &mut [f64],
        eta: f64,
        last_stage: bool,
        prev: &mut f64,
        tol: f64,
    ) -> Result<usize> {
        let m = self.cols;
        let mut value = self.value(psi, eta);
        let decrement_tol = if last_stage {
            (1e-3 * tol).max(1e-13 * (1.0 + value.abs()))
        } else {
            1e-6
        };
        for it in 1..=MAX_NEWTON_ITERATIONS {
            let plan = self.row_plans(psi, eta);
            let logits = self.gibbs_logits(psi);
            let lse = log_sum_exp(logits.iter().copied());
            let gibbs: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();

            let mut grad: Vec<f64> = gibbs.iter().map(|g| -g).collect();
            let mut hess = DMatrix::<f64>::zeros(m, m);
            for row in &plan {
                let w: f64 = row.iter().map(|&(_, q)| q).sum();
                for &(j, q) in row {
                    grad[j] += q;
                    hess[(j, j)] += q / eta;
                    for &(k, qk) in row {
                        hess[(j, k)] -= q * qk / (w * eta);
                    }
                }
            }
            for j in 0..m {
                hess[(j, j)] += self.n * gibbs[j];
                for k in 0..m {
                    hess[(j, k)] -= self.n * gibbs[j] * gibbs[k];
                }
            }
            // Constant shifts of ψ leave Φ unchanged; pin that direction.
            let scale = (0..m).map(|j| hess[(j, j)]).fold(0.0, f64::max).max(1.0);
            let mut damping = 1e-12 * scale;
            let step = loop {
                let mut system = hess.clone();
                system.add_scalar_mut(scale / m as f64);
                for j in 0..m {
                    system[(j, j)] += damping;
                }
                if let Some(ch) = system.cholesky() {
                    break -ch.solve(&DVector::from_column_slice(&grad));
                }
                damping *= 100.0;
                if damping > scale {
                    return Err(Error::IterationLimit {
                        iterations: it,
                        last: value,
                    });
                }
            };
            let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
            let decrement = -slope;
            if decrement <= decrement_tol {
                if !last_stage {
                    return Ok(it);
                }
                // The returned measure is the plan's column marginal, whose
                // error is the marginal mismatch `‖∇Φ‖₁`.
                let mismatch: f64 = grad.iter().map(|g| g.abs()).sum();
                if mismatch <= tol && (value - *prev).abs() <= tol {
                    return Ok(it);
                }
                // Predicted decrease below the resolution of Φ: the
                // mismatch is at its floating-point floor.
                if decrement <= 4.0 * f64::EPSILON * (1.0 + value.abs()) {
                    return Ok(it);
                }
            }
            let mut t = 1.0;
            let mut trial = vec![0.0; m];
            let mut accepted = false;
            for _ in 0..60 {
                for ((x, p), s) in trial.iter_mut().zip(psi.iter()).zip(step.iter()) {
                    *x = p + t * s;
                }
                let trial_value = self.value(&trial, eta);
                if trial_value <= value + 1e-4 * t * slope {
                    psi.copy_from_slice(&trial);
                    *prev = value;
                    value = trial_value;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                    // No representable descent left: the iterate is optimal to
                // working precision.
                *prev = value;
                return Ok(it);
            }
        }
        Err(Error::IterationLimit {
            iterations: MAX_NEWTON_ITERATIONS,
            last: value,
        })
    }
}

fn check_measure_start(
    space: &MetricMeasureSpace,
    v: &Potential,
    mu0: &ProbabilityMeasure,
) -> Result<()> {
    if mu0.len() != space.len() || v.len() != space.len() {
        return invalid("measure, potential and space sizes differ");
    }
    if let Some(x) = mu0.support().into_iter().find(|&x| !is_admissible_start(space, v, x)) {
        return invalid(format!("initial measure charges {x}, outside the closure of the finite set"));
    }
    Ok(())
}

/// Iterates [`jko_step`] for `T/τ` steps.
pub fn run_measure_flow(
    space: &MetricMeasureSpace,
    functional: &Functional<'_>,
    mu0: &ProbabilityMeasure,
    params: &FlowParams,
) -> Result<MeasureTrajectory> {
    params.validate()?;
    check_measure_start(space, functional.potential(), mu0)?;
    let steps = params.steps();
    let mut measures = Vec::with_capacity(steps + 1);
    measures.push(mu0.clone());
    for _ in 0..steps {
        let next = jko_step(
            space,
            functional,
            measures.last().expect("nonempty"),
            params.tau,
            params.solver_tolerance,
        )?;
        measures.push(next);
    }
    let kappa = match *functional {
        Functional::Potential(_) => params.kappa,
        Functional::Regularized { n, .. } => params.kappa_n(n),
    };
    Ok(MeasureTrajectory::from_measures(space, functional, params.tau, kappa, measures))
}

/// One `Sₙ` flow of a regularized family.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedRun {
    pub n: f64,
    /// `κₙ = K/n + κ`.
    pub kappa_n: f64,
    pub trajectory: MeasureTrajectory,
}

/// Runs the `Sₙ` flow for every `n` in `n_list`, concurrently, returning the
/// runs in input order.
pub fn run_regularized_family(
    space: &MetricMeasureSpace,
    v: &Potential,
    mu0: &ProbabilityMeasure,
    params: &FlowParams,
    n_list: &[f64],
) -> Result<Vec<RegularizedRun>> {
    if n_list.is_empty() {
        return invalid("empty list of regularization indices");
    }
    if let Some(n) = n_list.iter().find(|n| !(**n > 0.0)) {
        return invalid(format!("regularization index must be positive, got {n}"));
    }
    let results: Vec<Result<MeasureTrajectory>> = std::thread::scope(|scope| {
        let handles: Vec<_> = n_list
            .iter()
            .map(|&n| {
                scope.spawn(move || {
                    let functional = Functional::Regularized { potential: v, n };
                    run_measure_flow(space, &functional, mu0, params)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("flow worker panicked"))
            .collect()
    });
    n_list
        .iter()
        .zip(results)
        .map(|(&n, traj)| {
            Ok(RegularizedRun {
                n,
                kappa_n: params.kappa_n(n),
                trajectory: traj?,
            })
        })
        .collect()
}

/// `μ_t = (Φ_t)_* μ₀`: one point flow per atom, weights carried unchanged.
pub fn pushforward_flow(
    space: &MetricMeasureSpace,
    v: &Potential,
    mu0: &ProbabilityMeasure,
    params: &FlowParams,
) -> Result<MeasureTrajectory> {
    params.validate()?;
    check_measure_start(space, v, mu0)?;
    let atoms: Vec<(usize, f64)> = mu0.atoms().collect();
    let flows = atoms
        .iter()
        .map(|&(x, _)| run_point_flow(space, v, x, params))
        .collect::<Result<Vec<_>>>()?;
    let measures = (0..=params.steps())
        .map(|k| {
            let mut w = vec![0.0; space.len()];
            for (flow, &(_, m)) in flows.iter().zip(&atoms) {
                w[flow.points[k]] += m;
            }
            ProbabilityMeasure::new(w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureTrajectory::from_measures(
        space,
        &Functional::Potential(v),
        params.tau,
        params.kappa,
        measures,
    ))
}

/// Reads off the moving point of a trajectory of (near-)Dirac masses: the
/// heaviest atom at each time, provided `Var₂ ≤ tol` everywhere.
pub fn extract_dirac_trajectory(
    mtraj: &MeasureTrajectory,
    v: &Potential,
    tol: f64,
) -> Result<FlowTrajectory> {
    if !(tol >= 0.0) {
        return invalid(format!("tolerance must be nonnegative, got {tol}"));
    }
    let mut points = Vec::with_capacity(mtraj.len());
    for ((t, mu), &var) in mtraj.times.iter().zip(&mtraj.measures).zip(&mtraj.variances) {
        if var > tol {
            return Err(Error::NotConcentrated {
                time: *t,
                variance: var,
            });
        }
        let mut best = 0;
        let mut best_mass = f64::NEG_INFINITY;
        for (i, w) in mu.atoms() {
            if w > best_mass {
                best = i;
                best_mass = w;
            }
        }
        points.push(best);
    }
    Ok(FlowTrajectory {
        tau: mtraj.tau,
        kappa: mtraj.kappa,
        times: mtraj.times.clone(),
        potential_values: points.iter().map(|&p| v.value(p)).collect(),
        points,
    })
}
