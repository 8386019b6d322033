//! Finite metric measure spaces.
//!
//! Three builders are provided: evenly spaced intervals, discrete circles and
//! weighted graphs with the shortest-path metric. Interval and circle metrics
//! are evaluated from coordinates on demand so that grids with tens of
//! thousands of points stay cheap; graph metrics are stored as a dense matrix.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Above this many points `validate_metric` samples triples instead of
/// enumerating them.
pub const EXHAUSTIVE_VALIDATION_LIMIT: usize = 300;
/// Number of sampled triples (and pairs) used past the exhaustive limit.
pub const SAMPLED_TRIPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
enum Geometry {
    Interval { spacing: f64 },
    Circle { radius: f64 },
    Matrix { dist: Vec<f64> },
}

/// A finite metric space `(X, d)` with strictly positive reference weights `m`.
///
/// Spaces are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMeasureSpace {
    len: usize,
    coords: Option<Vec<f64>>,
    geometry: Geometry,
    measure: Vec<f64>,
}

impl MetricMeasureSpace {
    /// Builds a space from a raw distance matrix (row-major, `n × n`) without
    /// checking metric axioms. Use [`validate_metric`] to audit it.
    pub fn from_matrix(dist: Vec<f64>, measure: Vec<f64>) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return invalid("a space needs at least one point");
        }
        if dist.len() != n * n {
            return invalid(format!(
                "distance matrix has {} entries, expected {}",
                dist.len(),
                n * n
            ));
        }
        check_weights(&measure)?;
        Ok(Self {
            len: n,
            coords: None,
            geometry: Geometry::Matrix { dist },
            measure,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Reference weights `m_i`.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Per-point coordinates for interval (position) and circle (arc length)
    /// spaces.
    pub fn coords(&self) -> Option<&[f64]> {
        self.coords.as_deref()
    }

    pub fn coord(&self, i: usize) -> Option<f64> {
        self.coords.as_ref().map(|c| c[i])
    }

    pub fn is_interval(&self) -> bool {
        matches!(self.geometry, Geometry::Interval { .. })
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.geometry {
            Geometry::Interval { .. } => {
                let c = self.coords.as_ref().expect("interval spaces carry coordinates");
                (c[i] - c[j]).abs()
            }
            Geometry::Circle { radius } => {
                let k = i.abs_diff(j);
                let steps = k.min(self.len - k);
                steps as f64 * 2.0 * PI * radius / self.len as f64
            }
            Geometry::Matrix { dist } => dist[i * self.len + j],
        }
    }

    #[inline]
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        let d = self.dist(i, j);
        d * d
    }

    /// Grid spacing for interval and circle spaces, smallest positive distance
    /// for graph spaces.
    pub fn resolution(&self) -> f64 {
        match &self.geometry {
            Geometry::Interval { spacing } => *spacing,
            Geometry::Circle { radius } => 2.0 * PI * radius / self.len as f64,
            Geometry::Matrix { dist } => dist
                .iter()
                .copied()
                .filter(|d| *d > 0.0)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        match &self.geometry {
            Geometry::Interval { .. } => self.dist(0, self.len - 1),
            Geometry::Circle { .. } => self.dist(0, self.len / 2),
            Geometry::Matrix { dist } => dist.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Index of the point whose coordinate is closest to `x` (smallest index on
    /// ties). Graph spaces have no coordinates and return `None`.
    pub fn nearest_point(&self, x: f64) -> Option<usize> {
        let coords = self.coords.as_ref()?;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &c) in coords.iter().enumerate() {
            let d = (c - x).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        Some(best)
    }

    /// The point `offset` grid steps away from `x` on interval and circle
    /// spaces (wrapping on circles); `None` off the grid or on graphs.
    pub fn grid_neighbor(&self, x: usize, offset: isize) -> Option<usize> {
        match self.geometry {
            Geometry::Interval { .. } => {
                let y = x as isize + offset;
                (0..self.len as isize).contains(&y).then_some(y as usize)
            }
            Geometry::Circle { .. } => {
                let n = self.len as isize;
                Some((x as isize + offset).rem_euclid(n) as usize)
            }
            Geometry::Matrix { .. } => None,
        }
    }

    /// Points `y != x` with `d(x, y) <= radius`, in increasing index order.
    pub fn neighbors_within(&self, x: usize, radius: f64) -> Vec<usize> {
        let tol = 1e-12 * radius.max(1.0);
        let gridded = !matches!(self.geometry, Geometry::Matrix { .. });
        if gridded && radius.is_finite() {
            let reach = ((radius + tol) / self.resolution()).floor() as usize;
            if 2 * reach + 1 < self.len {
                let mut out = Vec::with_capacity(2 * reach);
                for k in 1..=reach {
                    if self.is_interval() {
                        if x >= k {
                            out.push(x - k);
                        }
                        if x + k < self.len {
                            out.push(x + k);
                        }
                    } else {
                        out.push((x + self.len - k) % self.len);
                        out.push((x + k) % self.len);
                    }
                }
                out.retain(|&y| self.dist(x, y) <= radius + tol);
                out.sort_unstable();
                out.dedup();
                return out;
            }
        }
        (0..self.len)
            .filter(|&y| y != x && self.dist(x, y) <= radius + tol)
            .collect()
    }
}

fn check_weights(measure: &[f64]) -> Result<()> {
    if let Some((i, w)) = measure
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w > 0.0))
    {
        return invalid(format!("reference weight {w} at point {i} is not positive"));
    }
    Ok(())
}

/// `n` evenly spaced points on `[a, b]` with uniform weight `(b - a)/(n - 1)`.
pub fn build_interval_space(a: f64, b: f64, n: usize) -> Result<MetricMeasureSpace> {
    if n < 2 {
        return invalid(format!("interval needs at least 2 points, got {n}"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return invalid(format!("interval endpoints must satisfy a < b, got [{a}, {b}]"));
    }
    let spacing = (b - a) / (n - 1) as f64;
    let coords = (0..n)
        .map(|i| if i == n - 1 { b } else { a + i as f64 * spacing })
        .collect();
    Ok(MetricMeasureSpace {
        len: n,
        coords: Some(coords),
        geometry: Geometry::Interval { spacing },
        measure: vec![spacing; n],
    })
}

/// `n` equally spaced points on a circle of the given radius, arc-length
/// metric, uniform weight `2πr/n`.
pub fn build_circle_space(n: usize, radius: f64) -> Result<MetricMeasureSpace> {
    if n < 2 {
        return invalid(format!("circle needs at least 2 points, got {n}"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return invalid(format!("circle radius must be positive, got {radius}"));
    }
    let step = 2.0 * PI * radius / n as f64;
    Ok(MetricMeasureSpace {
        len: n,
        coords: Some((0..n).map(|i| i as f64 * step).collect()),
        geometry: Geometry::Circle { radius },
        measure: vec![step; n],
    })
}

/// An undirected weighted edge `(i, j, weight)`.
pub type Edge = (usize, usize, f64);

/// Shortest-path metric of a connected weighted graph. Weights default to 1
/// per point.
pub fn build_graph_space(
    edges: &[Edge],
    n: usize,
    measure: Option<Vec<f64>>,
) -> Result<MetricMeasureSpace> {
    if n == 0 {
        return invalid("graph needs at least one vertex");
    }
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
    }
    for &(i, j, w) in edges {
        if i >= n || j >= n {
            return invalid(format!("edge ({i}, {j}) references a vertex outside 0..{n}"));
        }
        if !(w > 0.0) || !w.is_finite() {
            return invalid(format!("edge ({i}, {j}) has nonpositive weight {w}"));
        }
        if i != j && w < dist[i * n + j] {
            dist[i * n + j] = w;
            dist[j * n + i] = w;
        }
    }
    // Floyd-Warshall
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let alt = dik + dist[k * n + j];
                if alt < dist[i * n + j] {
                    dist[i * n + j] = alt;
                }
            }
        }
    }
    if let Some(idx) = dist.iter().position(|d| !d.is_finite()) {
        return Err(Error::InfiniteDistance {
            from: idx / n,
            to: idx % n,
        });
    }
    let measure = match measure {
        Some(m) if m.len() != n => {
            return invalid(format!("measure has {} weights for {n} vertices", m.len()))
        }
        Some(m) => m,
        None => vec![1.0; n],
    };
    check_weights(&measure)?;
    Ok(MetricMeasureSpace {
        len: n,
        coords: None,
        geometry: Geometry::Matrix { dist },
        measure,
    })
}

/// Parsed contents of an edge-list file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub edges: Vec<Edge>,
    pub vertex_count: usize,
    pub measure: Option<Vec<f64>>,
}

/// Parses `i j weight` lines (0-based, whitespace separated). A line reading
/// `# measure` starts a footer of per-point weights; other `#` lines are
/// comments.
pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut measure: Option<Vec<f64>> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let line_no = lineno + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if rest.trim().eq_ignore_ascii_case("measure") {
                measure = Some(Vec::new());
            }
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if let Some(weights) = measure.as_mut() {
            for tok in line.split_whitespace() {
                let w: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(format!("bad measure weight '{tok}'")))?;
                weights.push(w);
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(format!("expected 'i j weight', got '{line}'")));
        }
        let i: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(format!("bad vertex index '{}'", toks[0])))?;
        let j: usize = toks[1]
            .parse()
            .map_err(|_| parse_err(format!("bad vertex index '{}'", toks[1])))?;
        let w: f64 = toks[2]
            .parse()
            .map_err(|_| parse_err(format!("bad weight '{}'", toks[2])))?;
        edges.push((i, j, w));
    }
    let from_edges = edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
    let vertex_count = from_edges.max(measure.as_ref().map_or(0, Vec::len));
    Ok(EdgeList {
        edges,
        vertex_count,
        measure,
    })
}

pub fn load_graph_space(path: impl AsRef<Path>) -> Result<MetricMeasureSpace> {
    let text = std::fs::read_to_string(path)?;
    let list = parse_edge_list(&text)?;
    build_graph_space(&list.edges, list.vertex_count, list.measure)
}

/// A point on (or near) a geodesic between two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicSample {
    pub start: usize,
    pub end: usize,
    pub t: f64,
    pub point: usize,
    /// `d(start, end)`, the constant speed of the geodesic on `[0, 1]`.
    pub speed: f64,
    /// `max(|d(x,z) - t d(x,y)|, |d(z,y) - (1-t) d(x,y)|)`.
    pub defect: f64,
}

fn defect(space: &MetricMeasureSpace, x: usize, y: usize, z: usize, t: f64) -> f64 {
    let d = space.dist(x, y);
    let a = (space.dist(x, z) - t * d).abs();
    let b = (space.dist(z, y) - (1.0 - t) * d).abs();
    a.max(b)
}

/// Best `t`-intermediate point of `x` and `y`: the point minimizing the
/// geodesic defect, smallest index on ties.
pub fn intermediate_point(
    space: &MetricMeasureSpace,
    x: usize,
    y: usize,
    t: f64,
) -> Result<GeodesicSample> {
    let n = space.len();
    if x >= n || y >= n {
        return invalid(format!("points ({x}, {y}) outside a space of {n} points"));
    }
    if !(0.0..=1.0).contains(&t) {
        return invalid(format!("geodesic parameter {t} outside [0, 1]"));
    }
    let candidates: Vec<usize> = match &space.geometry {
        Geometry::Interval { spacing } => {
            let c = space.coords.as_ref().expect("interval coordinates");
            let target = c[x] + t * (c[y] - c[x]);
            let pos = ((target - c[0]) / spacing).clamp(0.0, (n - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (pos.ceil() as usize).min(n - 1);
            let mut v = vec![lo.saturating_sub(1), lo, hi, (hi + 1).min(n - 1)];
            v.dedup();
            v
        }
        Geometry::Circle { .. } => {
            // Off the shorter arc the defect is at least (n - 2f)·s/2.
            let f = (y + n - x) % n;
            let (steps, dir) = if 2 * f <= n { (f, 1) } else { (n - f, -1) };
            let pos = t * steps as f64;
            let lo = pos.floor() as isize;
            let arc: Vec<usize> = (lo - 1..=lo + 2)
                .filter(|&k| (0..=steps as isize).contains(&k))
                .map(|k| space.grid_neighbor(x, dir * k).expect("circle"))
                .collect();
            let (z, e) = best_by_defect(space, x, y, t, arc);
            let floor = (n - 2 * steps) as f64 * space.resolution() / 2.0;
            if e < floor * (1.0 - 1e-9) {
                return Ok(sample(space, x, y, t, z, e));
            }
            (0..n).collect()
        }
        Geometry::Matrix { .. } => (0..n).collect(),
    };
    let (best, best_defect) = best_by_defect(space, x, y, t, candidates);
    Ok(sample(space, x, y, t, best, best_defect))
}

/// Candidate with the smallest defect, smallest index on ties.
fn best_by_defect(
    space: &MetricMeasureSpace,
    x: usize,
    y: usize,
    t: f64,
    candidates: Vec<usize>,
) -> (usize, f64) {
    let mut best = candidates[0];
    let mut best_defect = f64::INFINITY;
    for z in candidates {
        let e = defect(space, x, y, z, t);
        if e < best_defect || (e == best_defect && z < best) {
            best = z;
            best_defect = e;
        }
    }
    (best, best_defect)
}

fn sample(space: &MetricMeasureSpace, x: usize, y: usize, t: f64, z: usize, e: f64) -> GeodesicSample {
    GeodesicSample {
        start: x,
        end: y,
        t,
        point: z,
        speed: space.dist(x, y),
        defect: e,
    }
}

/// Which metric axiom a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricViolation {
    NonzeroDiagonal,
    Asymmetric,
    Negative,
    Triangle,
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::NonzeroDiagonal => "nonzero diagonal",
            Self::Asymmetric => "asymmetry",
            Self::Negative => "nonnegativity",
            Self::Triangle => "triangle inequality",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub passed: bool,
    pub worst_violation: f64,
    pub violation: Option<MetricViolation>,
    /// Offending points: `(i, i, i)` for the diagonal, `(i, j, j)` for pair
    /// checks, `(i, j, k)` for `d(i,k) > d(i,j) + d(j,k)`.
    pub witness: Option<(usize, usize, usize)>,
    pub triples_checked: usize,
    pub sampled: bool,
}

/// Audits the metric axioms. Exhaustive up to
/// [`EXHAUSTIVE_VALIDATION_LIMIT`] points, sampled (seeded) above it.
pub fn validate_metric(space: &MetricMeasureSpace, seed: u64) -> MetricReport {
    // Axioms in reporting order: a negative or asymmetric entry also breaks
    // the triangle inequality, but the more basic failure is reported.
    const ORDER: [MetricViolation; 4] = [
        MetricViolation::NonzeroDiagonal,
        MetricViolation::Negative,
        MetricViolation::Asymmetric,
        MetricViolation::Triangle,
    ];
    let mut worst = [(0.0_f64, None::<(usize, usize, usize)>); 4];
    let mut record = |kind: usize, amount: f64, w: (usize, usize, usize)| {
        if amount > worst[kind].0 {
            worst[kind] = (amount, Some(w));
        }
    };
    let pair = |record: &mut dyn FnMut(usize, f64, (usize, usize, usize)), i: usize, j: usize| {
        let dij = space.dist(i, j);
        record(1, -dij, (i, j, j));
        record(2, (dij - space.dist(j, i)).abs(), (i, j, j));
    };
    let triple = |record: &mut dyn FnMut(usize, f64, (usize, usize, usize)), i: usize, j: usize, k: usize| {
        record(3, space.dist(i, k) - space.dist(i, j) - space.dist(j, k), (i, j, k));
    };

    let n = space.len();
    for i in 0..n {
        record(0, space.dist(i, i).abs(), (i, i, i));
    }
    let sampled = n > EXHAUSTIVE_VALIDATION_LIMIT;
    let mut triples = 0;
    if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..SAMPLED_TRIPLES {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            pair(&mut record, i, j);
            triple(&mut record, i, j, k);
            triples += 1;
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                pair(&mut record, i, j);
                for k in 0..n {
                    triple(&mut record, i, j, k);
                }
            }
        }
        triples = n * n * n;
    }

    let tol = 1e-12 * space.diameter().max(1.0);
    let failing = (0..4).find(|&k| worst[k].0 > tol);
    let (worst_violation, violation, witness) = match failing {
        Some(k) => (worst[k].0, Some(ORDER[k]), worst[k].1),
        None => {
            let k = (0..4)
                .max_by(|&a, &b| worst[a].0.total_cmp(&worst[b].0))
                .expect("four axioms");
            (worst[k].0, None, None)
        }
    };
    MetricReport {
        passed: failing.is_none(),
        worst_violation,
        violation,
        witness,
        triples_checked: triples,
        sampled,
    }
}
