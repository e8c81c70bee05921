use proptest::prelude::*;
use soccer_cli::harness::{
    columns, emit, mean_std, parse_csv, run_experiment, run_with_seeds, Algorithm, DatasetSource, ExperimentConfig,
    Format, HarnessError, ResultRow,
};
use soccer_core::datagen::{GaussianMixtureSpec, HardInstanceSpec};

fn small(algo: Algorithm) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        DatasetSource::Gaussian(GaussianMixtureSpec::new(5, 4, 3000, 1)),
        algo,
        5,
    );
    c.epsilon = 0.05;
    c.machines = 6;
    c.reps = 3;
    c.rounds = 2;
    c
}

#[test]
fn single_rep_aggregate_equals_the_rep() {
    let mut c = small(Algorithm::Soccer);
    c.reps = 1;
    let e = run_experiment(&c).unwrap();
    let (rep, agg) = (&e.reps[0], &e.aggregate);
    assert_eq!(agg.cost_mean, rep.cost_mean);
    assert_eq!(agg.rounds_mean, rep.rounds_mean);
    assert_eq!((agg.cost_std, agg.rounds_std, agg.output_size_std), (0.0, 0.0, 0.0));
    assert_eq!(agg.rep_count, 1);
}

#[test]
fn forced_equal_seeds_have_zero_spread() {
    for algo in [Algorithm::Soccer, Algorithm::KmeansParallel] {
        let e = run_with_seeds(&small(algo), &[77, 77]).unwrap();
        assert_eq!(e.aggregate.cost_std, 0.0);
        assert_eq!(e.aggregate.output_size_std, 0.0);
        assert_eq!(e.reps[0].cost_mean, e.reps[1].cost_mean);
    }
}

#[test]
fn aggregate_matches_recomputation() {
    let e = run_experiment(&small(Algorithm::KmeansParallel)).unwrap();
    let costs: Vec<f64> = e.reps.iter().map(|r| r.cost_mean).collect();
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let std = (costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((e.aggregate.cost_mean - mean).abs() <= 1e-12 * mean);
    assert!((e.aggregate.cost_std - std).abs() <= 1e-9 * std.max(1e-300));
    assert!(e
        .reps
        .iter()
        .all(|r| r.output_size_mean == 1.0 + 2.0 * 10.0 && r.rounds_mean == 2.0));
    assert_eq!(e.aggregate.seed, 0);
    assert_ne!(e.reps[0].seed, e.reps[1].seed);
}

#[test]
fn bad_configs_are_rejected() {
    let mut c = small(Algorithm::Soccer);
    c.reps = 0;
    assert!(matches!(run_experiment(&c), Err(HarnessError::Config(_))));
    let mut c = small(Algorithm::Soccer);
    c.k = 1;
    assert!(matches!(run_experiment(&c), Err(HarnessError::Config(_))));
    let mut c = small(Algorithm::Soccer);
    c.machines = 10_000;
    assert!(matches!(run_experiment(&c), Err(HarnessError::Rep { rep: 0, .. })));
}

#[test]
fn one_row_is_two_csv_lines_and_markdown_adds_a_rule() {
    let e = run_experiment(&small(Algorithm::Soccer)).unwrap();
    let mut buf = Vec::new();
    emit(&e.rows()[..1], Format::Csv, true, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), columns(true).join(","));

    let rows = e.rows();
    let mut md = Vec::new();
    emit(&rows, Format::Markdown, false, &mut md).unwrap();
    let md = String::from_utf8(md).unwrap();
    assert_eq!(md.lines().count(), rows.len() + 2);
    let widths: Vec<usize> = md.lines().map(str::len).collect();
    assert!(widths.windows(2).all(|w| w[0] == w[1]));
    assert!(emit(&[], Format::Csv, true, Vec::new()).is_err());
}

#[test]
fn hard_instance_rows_from_the_harness() {
    let mut c = ExperimentConfig::new(
        DatasetSource::Hard(HardInstanceSpec::new(10, 100)),
        Algorithm::Soccer,
        10,
    );
    c.epsilon = 0.005;
    c.machines = 10;
    c.reps = 3;
    let e = run_experiment(&c).unwrap();
    assert_eq!(e.aggregate.dataset, "hard-k10-z100");
    assert_eq!(e.aggregate.cost_mean, 0.0);
    assert_eq!(e.aggregate.rounds_mean, 1.0);
}

#[test]
fn gaussian_cost_spread_is_small() {
    let mut c = ExperimentConfig::new(
        DatasetSource::Gaussian(GaussianMixtureSpec::new(25, 15, 200_000, 3)),
        Algorithm::Soccer,
        25,
    );
    c.epsilon = 0.056;
    c.machines = 50;
    c.reps = 10;
    let e = run_experiment(&c).unwrap();
    assert!(
        e.aggregate.cost_std <= 0.02 * e.aggregate.cost_mean,
        "{:?}",
        e.aggregate
    );
}

fn row() -> impl Strategy<Value = ResultRow> {
    let num = prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), 0.0..1e6f64];
    (
        "[a-z][a-z0-9_-]{0,12}",
        prop::option::of(0.0..1.0f64),
        prop::collection::vec(num, 10),
        1usize..1000,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(dataset, epsilon, v, k, seed, soccer)| ResultRow {
            dataset,
            algo: if soccer { "soccer" } else { "kmeans_parallel" }.into(),
            k,
            epsilon,
            rounds_mean: v[0],
            rounds_std: v[1].abs(),
            output_size_mean: v[2],
            output_size_std: v[3].abs(),
            cost_mean: v[4],
            cost_std: v[5].abs(),
            machine_time_s: v[6],
            total_time_s: v[7],
            coord_points_received: v[8],
            coord_points_broadcast: v[9],
            rep_count: k,
            seed,
        })
}

proptest! {
    #[test]
    fn csv_round_trip(rows in prop::collection::vec(row(), 1..6), timing in any::<bool>()) {
        let mut buf = Vec::new();
        emit(&rows, Format::Csv, timing, &mut buf).unwrap();
        let back = parse_csv(&buf).unwrap();
        let expected: Vec<ResultRow> = rows
            .into_iter()
            .map(|mut r| {
                if !timing {
                    r.machine_time_s = 0.0;
                    r.total_time_s = 0.0;
                }
                r
            })
            .collect();
        prop_assert_eq!(back, expected);
    }

    #[test]
    fn std_is_nonnegative(values in prop::collection::vec(-1e6..1e6f64, 1..20)) {
        let (mean, std) = mean_std(&values);
        prop_assert!(std >= 0.0);
        prop_assert!(values.iter().any(|&v| v <= mean + 1e-6) && values.iter().any(|&v| v >= mean - 1e-6));
    }
}
