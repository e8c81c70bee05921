use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use soccer_core::blackbox::{brute_force_optimal, kmeanspp_seed, lloyd, BlackBoxConfig, Mode, WeightedDataset};
use soccer_core::geometry::{cost, sq_dist, truncated_cost};
use soccer_core::{CenterSet, Dataset};

fn points(max_len: usize, dim: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(prop::collection::vec(-100.0..100.0f64, dim), 1..max_len)
        .prop_map(|rows| Dataset::from_rows(&rows).unwrap())
}

fn centers(max_len: usize, dim: usize) -> impl Strategy<Value = CenterSet> {
    points(max_len, dim).prop_map(CenterSet::from)
}

/// Sort every point's distance, drop the `l` largest, add the rest.
fn truncated_oracle(s: &Dataset, t: &CenterSet, l: usize) -> f64 {
    let mut d: Vec<f64> = s
        .iter()
        .map(|x| t.iter().map(|c| sq_dist(x, c).unwrap()).fold(f64::INFINITY, f64::min))
        .collect();
    d.sort_by(|a, b| a.total_cmp(b));
    d.truncate(d.len().saturating_sub(l));
    d.iter().sum()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn truncated_cost_matches_oracle(s in points(300, 3), t in centers(20, 3), frac in 0.0..1.2f64) {
        let l = (frac * s.len() as f64) as usize;
        prop_assert!(close(truncated_cost(&s, &t, l).unwrap(), truncated_oracle(&s, &t, l)));
    }

    #[test]
    fn truncated_cost_is_monotone(s in points(100, 2), t in centers(5, 2)) {
        prop_assert_eq!(truncated_cost(&s, &t, 0).unwrap(), cost(&s, &t).unwrap());
        let mut prev = f64::INFINITY;
        for l in 0..=s.len() + 1 {
            let c = truncated_cost(&s, &t, l).unwrap();
            prop_assert!(c <= prev * (1.0 + 1e-12));
            prev = c;
        }
        prop_assert_eq!(prev, 0.0);
    }

    #[test]
    fn more_centers_never_cost_more(s in points(100, 4), t in centers(6, 4), extra in centers(6, 4)) {
        let mut both = t.clone();
        both.extend_from(&extra).unwrap();
        prop_assert!(cost(&s, &both).unwrap() <= cost(&s, &t).unwrap());
    }

    #[test]
    fn cost_is_additive(s1 in points(80, 2), s2 in points(80, 2), t in centers(5, 2)) {
        let mut joined = s1.clone();
        joined.extend_from(&s2).unwrap();
        let whole = cost(&joined, &t).unwrap();
        prop_assert!(close(whole, cost(&s1, &t).unwrap() + cost(&s2, &t).unwrap()));
    }

    #[test]
    fn lloyd_never_increases_cost(s in points(60, 2), k in 1usize..5, seed in any::<u64>(), medoid in any::<bool>()) {
        let cfg = BlackBoxConfig { mode: if medoid { Mode::Medoid } else { Mode::Centroid }, ..Default::default() };
        let w = WeightedDataset::uniform(s.clone());
        let init = kmeanspp_seed(&w, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let start = cost(&s, &init).unwrap();
        let fit = lloyd(&w, init, &cfg).unwrap();
        prop_assert!(fit.trace.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!(fit.cost <= start);
        prop_assert!(close(fit.cost, cost(&s, &fit.centers).unwrap()) || fit.cost == 0.0);
    }

    #[test]
    fn medoids_are_members(s in points(40, 2), k in 1usize..4, seed in any::<u64>()) {
        let w = WeightedDataset::uniform(s.clone());
        let fit = BlackBoxConfig::medoid().cluster(&w, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for c in fit.centers.iter() {
            prop_assert!(s.iter().any(|x| x == c));
        }
    }

    #[test]
    fn tiny_instances_are_never_super_optimal(s in points(12, 2), k in 1usize..4, seed in any::<u64>()) {
        let (_, opt) = brute_force_optimal(&s, k).unwrap();
        let w = WeightedDataset::uniform(s.clone());
        let fit = BlackBoxConfig::medoid().cluster(&w, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(fit.cost >= opt * (1.0 - 1e-12));
    }
}

#[test]
fn second_kmeanspp_pick_is_distance_proportional() {
    // From a forced first pick at 0, the second pick is proportional to squared distance.
    let s = Dataset::from_flat(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let expected = [0.0, 1.0 / 14.0, 4.0 / 14.0, 9.0 / 14.0];
    let mut hits = [0usize; 4];
    let mut trials = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    while trials < 20_000 {
        let c = kmeanspp_seed(&WeightedDataset::uniform(s.clone()), 2, &mut rng).unwrap();
        if c.point(0)[0] != 0.0 {
            continue;
        }
        trials += 1;
        hits[c.point(1)[0] as usize] += 1;
    }
    assert_eq!(hits[0], 0);
    for i in 1..4 {
        let p = expected[i];
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = hits[i] as f64 / trials as f64;
        assert!((freq - p).abs() < 4.0 * sigma, "point {i}: {freq} vs {p}");
    }
}

#[test]
fn cluster_with_more_centers_is_no_worse_in_median() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<[f64; 2]> = (0..200)
        .map(|_| [rand::Rng::random(&mut rng), rand::Rng::random(&mut rng)])
        .collect();
    let w = WeightedDataset::uniform(Dataset::from_rows(&rows).unwrap());
    let cfg = BlackBoxConfig::default();
    let median = |k: usize| {
        let mut costs: Vec<f64> = (0..21)
            .map(|s| cfg.cluster(&w, k, &mut ChaCha8Rng::seed_from_u64(s)).unwrap().cost)
            .collect();
        costs.sort_by(|a, b| a.total_cmp(b));
        costs[10]
    };
    for k in 2..6 {
        assert!(median(k) <= median(k - 1));
    }
}

#[test]
fn clustering_200_points_is_near_the_exhaustive_optimum() {
    // Exhaustive search over all 3-subsets of the points, through a distance table.
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let rows: Vec<[f64; 2]> = (0..200)
        .map(|_| [rand::Rng::random(&mut rng), rand::Rng::random(&mut rng)])
        .collect();
    let s = Dataset::from_rows(&rows).unwrap();
    let n = s.len();
    let d: Vec<f64> = (0..n * n)
        .map(|ij| sq_dist(s.point(ij / n), s.point(ij % n)).unwrap())
        .collect();
    let mut opt = f64::INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let total: f64 = (0..n).map(|i| d[i * n + a].min(d[i * n + b]).min(d[i * n + c])).sum();
                opt = opt.min(total);
            }
        }
    }
    let w = WeightedDataset::uniform(s);
    let cfg = BlackBoxConfig::default();
    let fit = cfg.cluster(&w, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(fit.cost <= 1.2 * opt, "{} vs {opt}", fit.cost);
    let again = cfg.cluster(&w, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(fit, again);
}
