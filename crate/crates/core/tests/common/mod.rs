//! Independent reference computations shared by integration tests.
#![allow(dead_code)]

/// Minimum transport cost by enumerating every basic feasible solution of
/// the transportation polytope. Zero-mass rows and columns are dropped.
/// Exponential; meant for at most four points per side.
pub fn transport_vertex_oracle(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let n = b.len();
    let rows: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| b[j] > 0.0).collect();
    let (r, c) = (rows.len(), cols.len());
    let cells: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
    let k = r + c - 1;
    let mut best = f64::INFINITY;
    let mut choice: Vec<usize> = (0..k).collect();
    loop {
        let basis: Vec<(usize, usize)> = choice.iter().map(|&x| cells[x]).collect();
        if let Some(flow) = tree_flows(&basis, r, c, &rows, &cols, a, b) {
            let total: f64 = basis
                .iter()
                .zip(&flow)
                .map(|(&(i, j), f)| f * cost[rows[i] * n + cols[j]])
                .sum();
            best = best.min(total);
        }
        // next k-combination of the cells
        let mut p = k;
        loop {
            if p == 0 {
                return best;
            }
            p -= 1;
            if choice[p] < cells.len() - k + p {
                break;
            }
        }
        choice[p] += 1;
        for q in p + 1..k {
            choice[q] = choice[q - 1] + 1;
        }
    }
}

/// Flows on a spanning-tree basis, or `None` if the cells do not form a
/// spanning tree or some flow is negative.
fn tree_flows(
    basis: &[(usize, usize)],
    r: usize,
    c: usize,
    rows: &[usize],
    cols: &[usize],
    a: &[f64],
    b: &[f64],
) -> Option<Vec<f64>> {
    let mut parent: Vec<usize> = (0..r + c).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for &(i, j) in basis {
        let (x, y) = (find(&mut parent, i), find(&mut parent, r + j));
        if x == y {
            return None;
        }
        parent[x] = y;
    }
    let mut supply: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
    let mut demand: Vec<f64> = cols.iter().map(|&j| b[j]).collect();
    let mut flow = vec![f64::NAN; basis.len()];
    let mut open: Vec<bool> = vec![true; basis.len()];
    for _ in 0..basis.len() {
        let degree_row = |i: usize, open: &[bool]| basis.iter().zip(open).filter(|(e, o)| **o && e.0 == i).count();
        let degree_col = |j: usize, open: &[bool]| basis.iter().zip(open).filter(|(e, o)| **o && e.1 == j).count();
        let mut done = false;
        for (e, &(i, j)) in basis.iter().enumerate() {
            if !open[e] {
                continue;
            }
            let f = if degree_row(i, &open) == 1 {
                supply[i]
            } else if degree_col(j, &open) == 1 {
                demand[j]
            } else {
                continue;
            };
            flow[e] = f;
            supply[i] -= f;
            demand[j] -= f;
            open[e] = false;
            done = true;
            break;
        }
        if !done {
            return None;
        }
    }
    if flow.iter().any(|&f| f < -1e-12) {
        return None;
    }
    Some(flow)
}

/// Minimum of `W₂²(μ, ν)/(2τ) + Sₙ(ν)` over the 3-point simplex gridded at
/// `step`, with `W₂²` from the vertex oracle. The lattice is translated to
/// pass through `μ`, so it contains the planes `ν_j = μ_j` on which the
/// transport term has kinks.
pub fn jko_grid_oracle(
    dist2: &[f64],
    measure: &[f64],
    v: &[f64],
    n: f64,
    mu: &[f64],
    tau: f64,
    step: f64,
) -> f64 {
    let objective = |nu: &[f64; 3]| {
        let w2 = transport_vertex_oracle(mu, nu, dist2);
        let mut s = 0.0;
        for x in 0..3 {
            if nu[x] > 0.0 {
                s += nu[x] * (nu[x] / measure[x]).ln() / n + nu[x] * v[x];
            }
        }
        w2 / (2.0 * tau) + s
    };
    let reach = (1.0 / step).ceil() as i64 + 1;
    let mut best = f64::INFINITY;
    for i in -reach..=reach {
        for j in -reach..=reach {
            let a = mu[0] + i as f64 * step;
            let b = mu[1] + j as f64 * step;
            let c = 1.0 - a - b;
            if a < 0.0 || b < 0.0 || c < -1e-15 {
                continue;
            }
            best = best.min(objective(&[a, b, c.max(0.0)]));
        }
    }
    best
}

/// Shortest path lengths by depth-first search over all simple paths.
pub fn simple_path_distances(edges: &[(usize, usize, f64)], n: usize) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    let mut out = vec![f64::INFINITY; n * n];
    for s in 0..n {
        let mut visited = vec![false; n];
        visited[s] = true;
        dfs(&adj, s, 0.0, &mut visited, &mut out[s * n..(s + 1) * n]);
    }
    out
}

fn dfs(adj: &[Vec<(usize, f64)>], x: usize, len: f64, visited: &mut [bool], best: &mut [f64]) {
    best[x] = best[x].min(len);
    for &(y, w) in &adj[x] {
        if !visited[y] {
            visited[y] = true;
            dfs(adj, y, len + w, visited, best);
            visited[y] = false;
        }
    }
}

/// Explicit Euler for `x' = -V'(x)` at step `h`; returns the states at every
/// multiple of `every`.
pub fn euler_ode(grad: impl Fn(f64) -> f64, x0: f64, h: f64, every: f64, horizon: f64) -> Vec<f64> {
    let per = (every / h).round() as usize;
    let steps = (horizon / h).round() as usize;
    let mut x = x0;
    let mut out = vec![x0];
    for k in 1..=steps {
        x -= h * grad(x);
        if k % per == 0 {
            out.push(x);
        }
    }
    out
}
