mod common;

use common::transport_vertex_oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semiflow_core::space::MetricMeasureSpace;
use semiflow_core::transport::{w2_distance, Coupling};
use semiflow_core::{w2_entropic, w2_exact, ProbabilityMeasure};

fn planar_space(rng: &mut ChaCha8Rng, n: usize) -> MetricMeasureSpace {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
        }
    }
    MetricMeasureSpace::from_matrix(dist, vec![1.0; n]).unwrap()
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> ProbabilityMeasure {
    let w: Vec<f64> = (0..n)
        .map(|_| if sparse && rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() + 1e-3 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        return ProbabilityMeasure::uniform(n).unwrap();
    }
    ProbabilityMeasure::normalized(w).unwrap()
}

fn squared(space: &MetricMeasureSpace) -> Vec<f64> {
    let n = space.len();
    (0..n * n).map(|c| space.dist2(c / n, c % n)).collect()
}

#[test]
fn exact_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..60 {
        let n = rng.random_range(2..=4);
        let space = planar_space(&mut rng, n);
        let mu = random_measure(&mut rng, n, true);
        let nu = random_measure(&mut rng, n, true);
        let exact = w2_exact(&space, &mu, &nu).unwrap();
        let oracle = transport_vertex_oracle(mu.weights(), nu.weights(), &squared(&space));
        assert!((exact.squared_cost - oracle).abs() <= 1e-10, "{} vs {oracle}", exact.squared_cost);
        assert!(exact.certificate <= 1e-9 * space.diameter().powi(2));
    }
}

#[test]
fn w2_is_a_metric_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let n = rng.random_range(2..=12);
        let space = planar_space(&mut rng, n);
        let a = random_measure(&mut rng, n, true);
        let b = random_measure(&mut rng, n, true);
        let c = random_measure(&mut rng, n, true);
        let ab = w2_distance(&space, &a, &b).unwrap();
        let ba = w2_distance(&space, &b, &a).unwrap();
        let bc = w2_distance(&space, &b, &c).unwrap();
        let ac = w2_distance(&space, &a, &c).unwrap();
        assert!((ab - ba).abs() <= 1e-9);
        assert!(ac <= ab + bc + 1e-9);
        assert_eq!(w2_distance(&space, &a, &a).unwrap(), 0.0);
        if a != b {
            assert!(ab > 0.0);
        }
    }
}

#[test]
fn entropic_cost_decreases_towards_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let n = rng.random_range(3..=15);
        let space = planar_space(&mut rng, n);
        let mu = random_measure(&mut rng, n, false);
        let nu = random_measure(&mut rng, n, false);
        let exact = w2_exact(&space, &mu, &nu).unwrap().squared_cost;
        let scale = space.diameter().powi(2);
        let mut last = f64::INFINITY;
        for eps in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3] {
            let c = w2_entropic(&space, &mu, &nu, eps * scale, 1_000_000).unwrap().squared_cost;
            assert!(c >= exact - 1e-8 * scale, "entropic {c} below exact {exact}");
            assert!(c <= last + 1e-8 * scale, "cost rose from {last} to {c} at eps {eps}");
            last = c;
        }
        assert!(last - exact <= 0.01 * scale);
    }
}

#[test]
fn sub_couplings_of_optimal_couplings_are_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let n = rng.random_range(2..=4);
        let space = planar_space(&mut rng, n);
        let mu = random_measure(&mut rng, n, false);
        let nu = random_measure(&mut rng, n, false);
        let plan = w2_exact(&space, &mu, &nu).unwrap().coupling;
        let sub: Vec<(usize, usize, f64)> = plan
            .entries()
            .iter()
            .map(|&(i, j, q)| (i, j, q * rng.random_range(0.1..1.0)))
            .collect();
        let total: f64 = sub.iter().map(|e| e.2).sum();
        let sub: Vec<(usize, usize, f64)> = sub.into_iter().map(|(i, j, q)| (i, j, q / total)).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for &(i, j, q) in &sub {
            a[i] += q;
            b[j] += q;
        }
        let a = ProbabilityMeasure::normalized(a).unwrap();
        let b = ProbabilityMeasure::normalized(b).unwrap();
        let coupling = Coupling::new(sub, a.clone(), b.clone()).unwrap();
        let oracle = transport_vertex_oracle(a.weights(), b.weights(), &squared(&space));
        assert!((coupling.squared_cost(&space) - oracle).abs() <= 1e-10);
    }
}
