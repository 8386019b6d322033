//! Quadratic-cost optimal transport between measures on a finite space.
//!
//! [`w2_exact`] runs a primal-dual transportation simplex and certifies its
//! answer with the dual potentials of the final basis. [`w2_entropic`] is the
//! log-domain Sinkhorn fast path. Both drop zero-mass rows and columns before
//! solving and reinsert them afterwards, so measures with small support on
//! large grids stay cheap.

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};
use crate::io::fmt17;
use crate::space::MetricMeasureSpace;

/// Tolerance on the total mass of a [`ProbabilityMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Marginal tolerance of a [`Coupling`].
pub const MARGINAL_TOLERANCE: f64 = 1e-9;
/// L¹ marginal violation at which Sinkhorn iterations stop.
pub const SINKHORN_THRESHOLD: f64 = 1e-9;

/// Nonnegative weights on the points of a space, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMeasure {
    weights: Vec<f64>,
}

impl ProbabilityMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return invalid("a probability measure needs at least one point");
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return invalid(format!("weight {w} at point {i} is not a nonnegative number"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return invalid(format!("cannot normalize weights with total {total}"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(weights)
    }

    pub fn dirac(len: usize, point: usize) -> Result<Self> {
        if point >= len {
            return invalid(format!("point {point} outside a space of {len} points"));
        }
        let mut w = vec![0.0; len];
        w[point] = 1.0;
        Ok(Self { weights: w })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return invalid("a probability measure needs at least one point");
        }
        Ok(Self {
            weights: vec![1.0 / len as f64; len],
        })
    }

    /// Measure with the given `(point, mass)` atoms; masses on repeated points
    /// add up.
    pub fn from_atoms(len: usize, atoms: &[(usize, f64)]) -> Result<Self> {
        let mut w = vec![0.0; len];
        for &(i, m) in atoms {
            if i >= len {
                return invalid(format!("atom at {i} outside a space of {len} points"));
            }
            w[i] += m;
        }
        Self::new(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Points carrying positive mass, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        self.atoms().map(|(i, _)| i).collect()
    }

    /// `(point, mass)` pairs with positive mass.
    pub fn atoms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, w)| *w > 0.0)
    }

    /// Convex combination `Σ λᵢ μᵢ`.
    pub fn mixture(components: &[(f64, &ProbabilityMeasure)]) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return invalid("mixture of zero components");
        };
        let mut w = vec![0.0; first.len()];
        for (lambda, mu) in components {
            if mu.len() != w.len() {
                return invalid("mixture components live on different spaces");
            }
            for (i, m) in mu.atoms() {
                w[i] += lambda * m;
            }
        }
        Self::new(w)
    }
}

/// Sparse joint weights with prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    /// `(i, j, mass)` with positive mass, row-major order.
    entries: Vec<(usize, usize, f64)>,
    first_marginal: ProbabilityMeasure,
    second_marginal: ProbabilityMeasure,
}

impl Coupling {
    /// Builds a coupling from entries and checks the marginals within
    /// [`MARGINAL_TOLERANCE`].
    pub fn new(
        mut entries: Vec<(usize, usize, f64)>,
        first_marginal: ProbabilityMeasure,
        second_marginal: ProbabilityMeasure,
    ) -> Result<Self> {
        let (m, n) = (first_marginal.len(), second_marginal.len());
        let mut rows = vec![0.0; m];
        let mut cols = vec![0.0; n];
        for &(i, j, q) in &entries {
            if i >= m || j >= n {
                return invalid(format!("coupling entry ({i}, {j}) out of range"));
            }
            if !(q >= 0.0) {
                return invalid(format!("coupling entry ({i}, {j}) has mass {q}"));
            }
            rows[i] += q;
            cols[j] += q;
        }
        let row_err = max_abs_diff(&rows, first_marginal.weights());
        let col_err = max_abs_diff(&cols, second_marginal.weights());
        if row_err > MARGINAL_TOLERANCE || col_err > MARGINAL_TOLERANCE {
            return invalid(format!(
                "coupling marginals off by {row_err:.3e} (rows) and {col_err:.3e} (columns)"
            ));
        }
        entries.retain(|e| e.2 > 0.0);
        entries.sort_by_key(|e| (e.0, e.1));
        Ok(Self {
            entries,
            first_marginal,
            second_marginal,
        })
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn first_marginal(&self) -> &ProbabilityMeasure {
        &self.first_marginal
    }

    pub fn second_marginal(&self) -> &ProbabilityMeasure {
        &self.second_marginal
    }

    /// `Σ q_ij d²(i, j)`.
    pub fn squared_cost(&self, space: &MetricMeasureSpace) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, q)| q * space.dist2(i, j))
            .sum()
    }

    /// CSV with header `i,j,mass`, one row per nonzero entry, row-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,mass\n");
        for &(i, j, q) in &self.entries {
            let _ = writeln!(out, "{i},{j},{}", fmt17(q));
        }
        out
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMethod {
    Exact,
    Entropic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    /// `W₂²`, evaluated on the returned coupling.
    pub squared_cost: f64,
    pub coupling: Coupling,
    pub method: TransportMethod,
    /// Exact: the duality certificate (primal-dual gap or worst dual
    /// infeasibility, whichever is larger). Entropic: final L¹ marginal
    /// violation.
    pub certificate: f64,
}

impl TransportResult {
    pub fn distance(&self) -> f64 {
        self.squared_cost.max(0.0).sqrt()
    }
}

/// Optimal plan of a dense transportation problem together with dual
/// potentials of the final basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Row-major `supply.len() × demand.len()` flows.
    pub flow: Vec<f64>,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
    pub cost: f64,
    /// `max(|primal - dual|, max (u_i + v_j - c_ij)⁺)`.
    pub gap: f64,
    pub pivots: usize,
}

/// Consecutive degenerate pivots after which entering cells are chosen by
/// Bland's rule instead of most negative reduced cost.
const DEGENERATE_SWITCH: usize = 50;

/// Solves `min Σ c_ij x_ij` over `x ≥ 0` with row sums `supply` and column
/// sums `demand` by the transportation simplex. Pivoting is deterministic:
/// most negative reduced cost, ties and leaving variables by smallest cell
/// index, with Bland's rule after a run of degenerate pivots.
pub fn solve_transportation(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return invalid("empty transportation problem");
    }
    if cost.len() != m * n {
        return invalid(format!("cost has {} entries, expected {}", cost.len(), m * n));
    }
    let scale = cost.iter().copied().fold(0.0_f64, |a, c| a.max(c.abs()));
    let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);

    // North-west corner start: a staircase of m + n - 1 cells, always a
    // spanning tree of the bipartite row/column graph.
    let mut flow = vec![0.0; m * n];
    let mut basic = vec![false; m * n];
    let mut basis: Vec<usize> = Vec::with_capacity(m + n - 1);
    {
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = a[i].min(b[j]).max(0.0);
            flow[i * n + j] = x;
            basic[i * n + j] = true;
            basis.push(i * n + j);
            a[i] -= x;
            b[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && a[i] <= b[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    let mut degenerate_run = 0;
    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    let mut pivots = 0;

    loop {
        potentials(m, n, cost, &basis, &mut adj, &mut u, &mut v);

        let mut entering = None;
        let mut best = -tol;
        let bland = degenerate_run >= DEGENERATE_SWITCH;
        #[allow(clippy::needless_range_loop)] // row-major cell index
        'scan: for i in 0..m {
            for j in 0..n {
                let c = i * n + j;
                if basic[c] {
                    continue;
                }
                let r = cost[c] - u[i] - v[j];
                if r < best {
                    best = r;
                    entering = Some(c);
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some(enter) = entering else { break };
        if pivots >= max_pivots {
            return Err(Error::IterationLimit {
                iterations: pivots,
                last: best,
            });
        }
        pivots += 1;

        let (ei, ej) = (enter / n, enter % n);
        let path = tree_path(&adj, ei, m + ej, m + n);
        // path: row ei = p0, p1, ..., pk = col ej; edge (p_{s-1}, p_s) gets
        // -θ for odd s, +θ for even s.
        let cells: Vec<usize> = path
            .windows(2)
            .map(|w| {
                let (r, c) = if w[0] < m { (w[0], w[1] - m) } else { (w[1], w[0] - m) };
                r * n + c
            })
            .collect();
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (s, &c) in cells.iter().enumerate() {
            if s % 2 == 0 && (flow[c] < theta || (flow[c] == theta && c < leave)) {
                theta = flow[c];
                leave = c;
            }
        }
        for (s, &c) in cells.iter().enumerate() {
            if s % 2 == 0 {
                flow[c] -= theta;
            } else {
                flow[c] += theta;
            }
        }
        flow[enter] = theta;
        flow[leave] = 0.0;
        basic[leave] = false;
        basic[enter] = true;
        let pos = basis.iter().position(|&c| c == leave).expect("leaving cell is basic");
        basis[pos] = enter;
        degenerate_run = if theta > 0.0 { 0 } else { degenerate_run + 1 };
    }

    for x in &mut flow {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let primal: f64 = flow.iter().zip(cost).map(|(x, c)| x * c).sum();
    let dual: f64 = supply.iter().zip(&u).map(|(a, p)| a * p).sum::<f64>()
        + demand.iter().zip(&v).map(|(b, p)| b * p).sum::<f64>();
    let mut infeasibility = 0.0_f64;
    for i in 0..m {
        for j in 0..n {
            infeasibility = infeasibility.max(u[i] + v[j] - cost[i * n + j]);
        }
    }
    Ok(TransportPlan {
        flow,
        row_potential: u,
        col_potential: v,
        cost: primal,
        gap: (primal - dual).abs().max(infeasibility),
        pivots,
    })
}

/// Dual potentials with `u_0 = 0` and `u_i + v_j = c_ij` on every basic cell.
fn potentials(
    m: usize,
    n: usize,
    cost: &[f64],
    basis: &[usize],
    adj: &mut [Vec<usize>],
    u: &mut [f64],
    v: &mut [f64],
) {
    for a in adj.iter_mut() {
        a.clear();
    }
    for &c in basis {
        let (i, j) = (c / n, c % n);
        adj[i].push(m + j);
        adj[m + j].push(i);
    }
    let mut seen = vec![false; m + n];
    let mut stack = vec![0];
    seen[0] = true;
    u[0] = 0.0;
    while let Some(node) = stack.pop() {
        for &next in &adj[node] {
            if seen[next] {
                continue;
            }
            seen[next] = true;
            if node < m {
                let j = next - m;
                v[j] = cost[node * n + j] - u[node];
            } else {
                let j = node - m;
                u[next] = cost[next * n + j] - v[j];
            }
            stack.push(next);
        }
    }
}

/// Node path from `from` to `to` in the basis tree.
fn tree_path(adj: &[Vec<usize>], from: usize, to: usize, nodes: usize) -> Vec<usize> {
    let mut parent = vec![usize::MAX; nodes];
    parent[from] = from;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &next in &adj[node] {
            if parent[next] == usize::MAX {
                parent[next] = node;
                queue.push_back(next);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    path
}

fn check_pair(space: &MetricMeasureSpace, mu: &ProbabilityMeasure, nu: &ProbabilityMeasure) -> Result<()> {
    if mu.len() != space.len() || nu.len() != space.len() {
        return invalid(format!(
            "measures of sizes {} and {} on a space of {} points",
            mu.len(),
            nu.len(),
            space.len()
        ));
    }
    Ok(())
}

fn reduced_problem(
    space: &MetricMeasureSpace,
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let rows = mu.support();
    let cols = nu.support();
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in &cols {
            cost.push(space.dist2(i, j));
        }
    }
    (rows, cols, cost)
}

/// Exact `W₂²` with an optimal coupling.
pub fn w2_exact(
    space: &MetricMeasureSpace,
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
) -> Result<TransportResult> {
    check_pair(space, mu, nu)?;
    let (rows, cols, cost) = reduced_problem(space, mu, nu);
    let supply: Vec<f64> = rows.iter().map(|&i| mu.weights()[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| nu.weights()[j]).collect();
    let plan = solve_transportation(&supply, &demand, &cost)?;
    let n = cols.len();
    let entries = plan
        .flow
        .iter()
        .enumerate()
        .filter(|(_, q)| **q > 0.0)
        .map(|(c, &q)| (rows[c / n], cols[c % n], q))
        .collect();
    let coupling = Coupling::new(entries, mu.clone(), nu.clone())?;
    Ok(TransportResult {
        squared_cost: coupling.squared_cost(space),
        coupling,
        method: TransportMethod::Exact,
        certificate: plan.gap,
    })
}

/// `W₂(μ, ν)`, with a shortcut for identical measures.
pub fn w2_distance(space: &MetricMeasureSpace, mu: &ProbabilityMeasure, nu: &ProbabilityMeasure) -> Result<f64> {
    if mu == nu {
        check_pair(space, mu, nu)?;
        return Ok(0.0);
    }
    Ok(w2_exact(space, mu, nu)?.distance())
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Entropic transport by log-domain Sinkhorn scaling on the kernel
/// `exp(-d²/ε)`. The regularization is annealed geometrically from the
/// largest cost down to `epsilon`, warm-starting the potentials; `max_iter`
/// bounds the total number of scaling sweeps. Returns the regularized plan
/// and its unregularized cost.
pub fn w2_entropic(
    space: &MetricMeasureSpace,
    mu: &ProbabilityMeasure,
    nu: &ProbabilityMeasure,
    epsilon: f64,
    max_iter: usize,
) -> Result<TransportResult> {
    check_pair(space, mu, nu)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid(format!("entropic regularization must be positive, got {epsilon}"));
    }
    let (rows, cols, cost) = reduced_problem(space, mu, nu);
    let (m, n) = (rows.len(), cols.len());
    let log_a: Vec<f64> = rows.iter().map(|&i| mu.weights()[i].ln()).collect();
    let log_b: Vec<f64> = cols.iter().map(|&j| nu.weights()[j].ln()).collect();
    let a: Vec<f64> = rows.iter().map(|&i| mu.weights()[i]).collect();

    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let mut eps = max_cost.max(epsilon);
    let mut iterations = 0;
    let mut violation;
    loop {
        let last_stage = eps <= epsilon;
        let stage_threshold = if last_stage { SINKHORN_THRESHOLD } else { 1e-3 };
        loop {
            for i in 0..m {
                let row = &cost[i * n..(i + 1) * n];
                f[i] = eps * log_a[i]
                    - eps * log_sum_exp(row.iter().zip(&g).map(|(c, gj)| (gj - c) / eps));
            }
            for j in 0..n {
                g[j] = eps * log_b[j]
                    - eps * log_sum_exp((0..m).map(|i| (f[i] - cost[i * n + j]) / eps));
            }
            iterations += 1;
            // Columns are exact after the g-update; measure the row error.
            violation = (0..m)
                .map(|i| {
                    let s: f64 = (0..n)
                        .map(|j| ((f[i] + g[j] - cost[i * n + j]) / eps).exp())
                        .sum();
                    (s - a[i]).abs()
                })
                .sum();
            if violation <= stage_threshold {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::IterationLimit {
                    iterations,
                    last: violation,
                });
            }
        }
        if last_stage {
            break;
        }
        eps = (eps * 0.5).max(epsilon);
    }

    let mut entries = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let q = ((f[i] + g[j] - cost[i * n + j]) / eps).exp();
            if q > 0.0 {
                entries.push((rows[i], cols[j], q));
            }
        }
    }
    let coupling = Coupling::new(entries, mu.clone(), nu.clone())?;
    Ok(TransportResult {
        squared_cost: coupling.squared_cost(space),
        coupling,
        method: TransportMethod::Entropic,
        certificate: violation,
    })
}

/// `Var₂(μ) = Σ_{x,y} d²(x, y) μ(x) μ(y)`.
pub fn variance2(space: &MetricMeasureSpace, mu: &ProbabilityMeasure) -> f64 {
    let atoms: Vec<(usize, f64)> = mu.atoms().collect();
    let mut total = 0.0;
    for &(i, wi) in &atoms {
        for &(j, wj) in &atoms {
            total += space.dist2(i, j) * wi * wj;
        }
    }
    total
}
