//! Potentials, the Boltzmann entropy, the potential energy `S(μ) = ∫V dμ`
//! and its entropic regularizations `Sₙ(μ) = Ent(μ|m)/n + S(μ)`, plus a
//! sampling certifier for κ-convexity of a potential along geodesics.
//!
//! Values live on the extended half-line: any sum containing `+∞` is `+∞`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::space::{intermediate_point, MetricMeasureSpace};
use crate::transport::ProbabilityMeasure;

/// Interior geodesic parameters used by [`kappa_convexity_report`].
pub const CONVEXITY_T_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Witness of the quadratic lower bound `V ≥ -C₀ - C₁ d²(·, x₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub c0: f64,
    pub c1: f64,
    pub anchor: usize,
}

/// Per-point potential values in `(-∞, +∞]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
    finite: Vec<usize>,
    lower_bound: Option<LowerBound>,
}

impl Potential {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v == f64::NEG_INFINITY)
        {
            return invalid(format!("potential value {v} at point {i} is not in (-inf, +inf]"));
        }
        let finite: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
        if finite.is_empty() {
            return invalid("potential is +inf everywhere (empty finite set)");
        }
        Ok(Self {
            values,
            finite,
            lower_bound: None,
        })
    }

    /// Evaluates `f` at every coordinate of the space.
    pub fn from_fn(space: &MetricMeasureSpace, f: impl Fn(f64) -> f64) -> Result<Self> {
        let Some(coords) = space.coords() else {
            return invalid("formula potentials need a space with coordinates");
        };
        Self::new(coords.iter().map(|&x| f(x)).collect())
    }

    /// Attaches lower-bound constants after checking the bound at every point.
    pub fn with_lower_bound(
        mut self,
        space: &MetricMeasureSpace,
        bound: LowerBound,
    ) -> Result<Self> {
        if bound.anchor >= space.len() || space.len() != self.values.len() {
            return invalid("lower bound anchor or potential size does not match the space");
        }
        for (i, &v) in self.values.iter().enumerate() {
            let floor = -bound.c0 - bound.c1 * space.dist2(i, bound.anchor);
            if v < floor {
                return invalid(format!(
                    "V({i}) = {v} is below the claimed lower bound {floor}"
                ));
            }
        }
        self.lower_bound = Some(bound);
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `X₀ = {V < ∞}` in increasing index order.
    pub fn finite_set(&self) -> &[usize] {
        &self.finite
    }

    pub fn is_finite_at(&self, i: usize) -> bool {
        self.values[i].is_finite()
    }

    pub fn lower_bound(&self) -> Option<LowerBound> {
        self.lower_bound
    }

    pub fn minimum(&self) -> f64 {
        self.finite.iter().map(|&i| self.values[i]).fold(f64::INFINITY, f64::min)
    }
}

/// Parses `point_index,value` rows; `inf` denotes `+∞`. A leading header row
/// is skipped. Indices must cover `0..n` exactly once.
pub fn parse_potential_csv(text: &str) -> Result<Potential> {
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let mut parts = line.split(',').map(str::trim);
        let (Some(idx), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected 'point_index,value', got '{line}'")));
        };
        let Ok(i) = idx.parse::<usize>() else {
            if rows.is_empty() && lineno == 0 {
                continue; // header
            }
            return Err(err(format!("bad point index '{idx}'")));
        };
        let v = if val.eq_ignore_ascii_case("inf") || val.eq_ignore_ascii_case("+inf") {
            f64::INFINITY
        } else {
            val.parse::<f64>()
                .map_err(|_| err(format!("bad potential value '{val}'")))?
        };
        rows.push((i, v));
    }
    let n = rows.len();
    let mut values = vec![f64::NAN; n];
    for (i, v) in rows {
        if i >= n || !values[i].is_nan() {
            return invalid(format!("point index {i} is repeated or out of range 0..{n}"));
        }
        values[i] = v;
    }
    Potential::new(values)
}

pub fn load_potential_csv(path: impl AsRef<Path>) -> Result<Potential> {
    parse_potential_csv(&std::fs::read_to_string(path)?)
}

/// Relative entropy `Σ μᵢ log(μᵢ / rᵢ)` against arbitrary nonnegative
/// reference weights, `0 log 0 = 0`, `+∞` when μ charges a zero weight.
pub fn relative_entropy(mu: &ProbabilityMeasure, reference: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, w) in mu.atoms() {
        let r = reference[i];
        if !(r > 0.0) {
            return f64::INFINITY;
        }
        total += w * (w / r).ln();
    }
    total
}

/// Boltzmann entropy `Ent(μ|m)`.
pub fn entropy(space: &MetricMeasureSpace, mu: &ProbabilityMeasure) -> f64 {
    relative_entropy(mu, space.measure())
}

/// `S(μ) = Σ Vᵢ μᵢ`, `+∞` when μ charges `{V = ∞}`.
pub fn potential_energy(v: &Potential, mu: &ProbabilityMeasure) -> f64 {
    let mut total = 0.0;
    for (i, w) in mu.atoms() {
        let vi = v.value(i);
        if vi == f64::INFINITY {
            return f64::INFINITY;
        }
        total += vi * w;
    }
    total
}

/// `Sₙ(μ) = Ent(μ|m)/n + S(μ)`.
pub fn regularized_energy(
    space: &MetricMeasureSpace,
    v: &Potential,
    mu: &ProbabilityMeasure,
    n: f64,
) -> f64 {
    let s = potential_energy(v, mu);
    if s == f64::INFINITY {
        return s;
    }
    entropy(space, mu) / n + s
}

/// Tilted reference weights `e^{-nV} m`; zero on `{V = ∞}`. The relative
/// entropy against them, divided by `n`, equals `Sₙ`.
pub fn tilted_reference(space: &MetricMeasureSpace, v: &Potential, n: f64) -> Vec<f64> {
    space
        .measure()
        .iter()
        .zip(v.values())
        .map(|(m, vi)| m * (-n * vi).exp())
        .collect()
}

/// Outcome of [`kappa_convexity_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub kappa: f64,
    /// Largest `V(z) - [(1-t)V(x) + tV(y) - κ t(1-t) d²(x,y)/2]` seen.
    pub worst_violation: f64,
    /// `(x, y, t, z)` attaining the worst violation.
    pub witness: Option<(usize, usize, f64, usize)>,
    pub samples_checked: usize,
    /// `Lip(V) · h` with `h` the worst geodesic defect observed.
    pub quantization_slack: f64,
    pub lipschitz_estimate: f64,
    pub worst_defect: f64,
    pub exhaustive: bool,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.worst_violation <= self.quantization_slack
    }
}

/// Local Lipschitz estimate from pairs in `X₀` at distance at most twice
/// the space resolution: the largest secant slope `|ΔV|/d`, and on interval
/// and circle grids also the one-sided extrapolated slope
/// `|2(V(x±h) - V(x))/h - (V(x±2h) - V(x))/(2h)|`, which recovers the
/// derivative at `x` exactly for quadratics where the plain secant falls
/// short by `O(h)`.
pub fn local_lipschitz(space: &MetricMeasureSpace, v: &Potential) -> f64 {
    let radius = 2.0 * space.resolution();
    let mut lip = 0.0_f64;
    for &x in v.finite_set() {
        for y in space.neighbors_within(x, radius) {
            if !v.is_finite_at(y) {
                continue;
            }
            let d = space.dist(x, y);
            if d > 0.0 {
                lip = lip.max((v.value(x) - v.value(y)).abs() / d);
            }
        }
        for dir in [-1, 1] {
            let (Some(y1), Some(y2)) = (space.grid_neighbor(x, dir), space.grid_neighbor(x, 2 * dir))
            else {
                continue;
            };
            if !(v.is_finite_at(y1) && v.is_finite_at(y2)) {
                continue;
            }
            let (d1, d2) = (space.dist(x, y1), space.dist(x, y2));
            if d1 > 0.0 && d2 > d1 {
                let s1 = (v.value(y1) - v.value(x)) / d1;
                let s2 = (v.value(y2) - v.value(x)) / d2;
                lip = lip.max((s1 + (s1 - s2) * d1 / (d2 - d1)).abs());
            }
        }
    }
    lip
}

/// Checks the κ-convexity inequality on pairs of `X₀` at the nine interior
/// times of [`CONVEXITY_T_GRID`], using the best available intermediate
/// point. Pairs are enumerated when `|X₀|² ≤ sample_budget` and drawn
/// uniformly (seeded) otherwise.
pub fn kappa_convexity_report(
    space: &MetricMeasureSpace,
    v: &Potential,
    kappa: f64,
    sample_budget: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    if sample_budget == 0 {
        return invalid("sample budget must be at least 1");
    }
    if v.len() != space.len() {
        return invalid("potential and space sizes differ");
    }
    let finite = v.finite_set();
    let k = finite.len();
    let exhaustive = k.saturating_mul(k) <= sample_budget;
    let pairs: Vec<(usize, usize)> = if exhaustive {
        finite
            .iter()
            .flat_map(|&x| finite.iter().map(move |&y| (x, y)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..sample_budget)
            .map(|_| (finite[rng.random_range(0..k)], finite[rng.random_range(0..k)]))
            .collect()
    };

    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut worst_defect = 0.0_f64;
    let mut samples = 0;
    for &(x, y) in &pairs {
        let d2 = space.dist2(x, y);
        for &t in &CONVEXITY_T_GRID {
            let g = intermediate_point(space, x, y, t)?;
            worst_defect = worst_defect.max(g.defect);
            let rhs = (1.0 - t) * v.value(x) + t * v.value(y) - kappa * t * (1.0 - t) * d2 / 2.0;
            let excess = v.value(g.point) - rhs;
            samples += 1;
            if excess > worst {
                worst = excess;
                witness = Some((x, y, t, g.point));
            }
        }
    }
    let lip = local_lipschitz(space, v);
    Ok(ConvexityReport {
        kappa,
        worst_violation: worst,
        witness,
        samples_checked: samples,
        quantization_slack: lip * worst_defect,
        lipschitz_estimate: lip,
        worst_defect,
        exhaustive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_interval_space;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn unit_weights(n: usize) -> MetricMeasureSpace {
        MetricMeasureSpace::from_matrix(
            (0..n * n).map(|c| if c / n == c % n { 0.0 } else { 1.0 }).collect(),
            vec![1.0; n],
        )
        .unwrap()
    }

    #[test]
    fn entropy_examples() {
        let s = unit_weights(5);
        let mu = ProbabilityMeasure::uniform(5).unwrap();
        assert_abs_diff_eq!(entropy(&s, &mu), -(5.0_f64).ln(), epsilon = 1e-14);
        assert_eq!(entropy(&s, &ProbabilityMeasure::dirac(5, 2).unwrap()), 0.0);

        let s = MetricMeasureSpace::from_matrix(vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let mu = ProbabilityMeasure::uniform(2).unwrap();
        assert_abs_diff_eq!(entropy(&s, &mu), -1.5 * LN_2, epsilon = 1e-15);
    }

    #[test]
    fn energy_examples() {
        let v = Potential::new(vec![3.0, 0.0, 2.0]).unwrap();
        assert_eq!(potential_energy(&v, &ProbabilityMeasure::dirac(3, 0).unwrap()), 3.0);
        let v2 = Potential::new(vec![0.0, 2.0]).unwrap();
        assert_eq!(potential_energy(&v2, &ProbabilityMeasure::uniform(2).unwrap()), 1.0);
        let vinf = Potential::new(vec![0.0, f64::INFINITY]).unwrap();
        assert_eq!(
            potential_energy(&vinf, &ProbabilityMeasure::uniform(2).unwrap()),
            f64::INFINITY
        );
        assert_eq!(potential_energy(&vinf, &ProbabilityMeasure::dirac(2, 0).unwrap()), 0.0);
    }

    #[test]
    fn regularized_examples() {
        let s = unit_weights(4);
        let zero = Potential::new(vec![0.0; 4]).unwrap();
        let mu = ProbabilityMeasure::uniform(4).unwrap();
        assert_abs_diff_eq!(regularized_energy(&s, &zero, &mu, 1.0), -(4.0_f64).ln(), epsilon = 1e-14);

        let s2 = unit_weights(2);
        let v = Potential::new(vec![0.0, 2.0]).unwrap();
        let mu2 = ProbabilityMeasure::uniform(2).unwrap();
        assert_abs_diff_eq!(
            regularized_energy(&s2, &v, &mu2, 2.0),
            -LN_2 / 2.0 + 1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn tilted_entropy_identity() {
        let s = unit_weights(3);
        let v = Potential::new(vec![0.7, -0.2, 1.5]).unwrap();
        let dirac = ProbabilityMeasure::dirac(3, 0).unwrap();
        let tilted = tilted_reference(&s, &v, 1.0);
        assert_abs_diff_eq!(relative_entropy(&dirac, &tilted), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(regularized_energy(&s, &v, &dirac, 1.0), 0.7, epsilon = 1e-15);

        let mu = ProbabilityMeasure::new(vec![0.2, 0.5, 0.3]).unwrap();
        for n in [0.5, 1.0, 7.0] {
            let tilted = tilted_reference(&s, &v, n);
            assert_abs_diff_eq!(
                relative_entropy(&mu, &tilted) / n,
                regularized_energy(&s, &v, &mu, n),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn potential_validation() {
        assert!(Potential::new(vec![f64::INFINITY; 3]).is_err());
        assert!(Potential::new(vec![0.0, f64::NAN]).is_err());
        assert!(Potential::new(vec![0.0, f64::NEG_INFINITY]).is_err());
        let v = Potential::new(vec![f64::INFINITY, 1.0, f64::INFINITY, 2.0]).unwrap();
        assert_eq!(v.finite_set(), &[1, 3]);

        let s = build_interval_space(-1.0, 1.0, 5).unwrap();
        let v = Potential::from_fn(&s, |x| -x * x).unwrap();
        let ok = v.clone().with_lower_bound(&s, LowerBound { c0: 0.0, c1: 1.0, anchor: 2 });
        assert!(ok.is_ok());
        let bad = v.with_lower_bound(&s, LowerBound { c0: 0.0, c1: 0.5, anchor: 2 });
        assert!(bad.is_err());
    }

    #[test]
    fn potential_csv() {
        let v = parse_potential_csv("point_index,value\n1,inf\n0,2.5\n2,-1\n").unwrap();
        assert_eq!(v.values(), &[2.5, f64::INFINITY, -1.0]);
        assert!(parse_potential_csv("0,1\n0,2\n").is_err());
        match parse_potential_csv("0,1\n1,abc\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn convexity_constant_potential() {
        let s = build_interval_space(-1.0, 1.0, 21).unwrap();
        let v = Potential::new(vec![1.0; 21]).unwrap();
        let r = kappa_convexity_report(&s, &v, 0.0, 10_000, 0).unwrap();
        assert!(r.exhaustive);
        assert!(r.worst_violation <= 0.0);
        assert!(r.passed());
    }

    #[test]
    fn convexity_of_square() {
        let s = build_interval_space(-1.0, 1.0, 201).unwrap();
        let v = Potential::from_fn(&s, |x| x * x).unwrap();
        let r = kappa_convexity_report(&s, &v, 2.0, 100_000, 0).unwrap();
        assert!(r.exhaustive);
        assert!(r.passed(), "{r:?}");

        let r = kappa_convexity_report(&s, &v, 3.0, 100_000, 0).unwrap();
        assert!(!r.passed());
        // x = -1, y = 1, t = 1/2, z = 0: 0 - (1 - 1.5) = 0.5
        assert_abs_diff_eq!(r.worst_violation, 0.5, epsilon = 1e-12);
        let (x, y, t, z) = r.witness.unwrap();
        assert_eq!((s.coord(x).unwrap().abs(), s.coord(y).unwrap().abs(), t), (1.0, 1.0, 0.5));
        assert!(s.coord(z).unwrap().abs() < 1e-12);
    }

    #[test]
    fn convexity_rejects_zero_budget() {
        let s = build_interval_space(-1.0, 1.0, 5).unwrap();
        let v = Potential::new(vec![0.0; 5]).unwrap();
        assert!(kappa_convexity_report(&s, &v, 0.0, 0, 0).is_err());
    }
}
