//! Repeated seeded runs, mean/std aggregation and table output.
//!
//! Repetition `i` runs with seed `derive_seed(master, i)` (see
//! [`soccer_core::seed::derive_seed`]). The dataset is built once per
//! experiment; only the partition and the algorithm's randomness vary.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::Deserialize;
use soccer_core::blackbox::BlackBoxConfig;
use soccer_core::datagen::{gen_gaussian_mixture, gen_hard_instance, GaussianMixtureSpec, HardInstanceSpec};
use soccer_core::kmeans_parallel::{self, KmppParams};
use soccer_core::seed::derive_seed;
use soccer_core::simnet::{CommLedger, Executor, Network, Partition, RoundTimer, Serial};
use soccer_core::soccer::{self, ConstantsMode, SamplingMode, SoccerParams};
use soccer_core::Dataset;

use crate::exec::{Threaded, WallClock};
use crate::io::{load_csv, CsvOptions, LoadError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("loading dataset: {0}")]
    Load(#[from] LoadError),
    #[error("dataset: {0}")]
    Dataset(soccer_core::Error),
    #[error("repetition {rep}: {source}")]
    Rep { rep: usize, source: soccer_core::Error },
    #[error("writing output: {0}")]
    Output(String),
}

#[derive(Clone, Debug)]
pub enum DatasetSource {
    Gaussian(GaussianMixtureSpec),
    Hard(HardInstanceSpec),
    Csv { path: PathBuf, options: CsvOptions },
}

impl DatasetSource {
    pub fn name(&self) -> String {
        match self {
            Self::Gaussian(g) => format!("gaussian-n{}-d{}-k{}", g.n, g.dim, g.k),
            Self::Hard(h) => format!("hard-k{}-z{}", h.k, h.z),
            Self::Csv { path, .. } => path
                .file_stem()
                .map_or_else(|| "csv".into(), |s| s.to_string_lossy().into()),
        }
    }

    pub fn load(&self) -> Result<Dataset, HarnessError> {
        match self {
            Self::Gaussian(g) => gen_gaussian_mixture(g).map(|m| m.points).map_err(HarnessError::Dataset),
            Self::Hard(h) => gen_hard_instance(h).map(|h| h.points).map_err(HarnessError::Dataset),
            Self::Csv { path, options } => Ok(load_csv(path, options)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Soccer,
    KmeansParallel,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Soccer => "soccer",
            Self::KmeansParallel => "kmeans_parallel",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub algo: Algorithm,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub rounds: usize,
    /// Defaults to `2k`.
    pub oversampling: Option<usize>,
    pub machines: usize,
    pub reps: usize,
    pub seed: u64,
    pub constants_mode: ConstantsMode,
    pub sampling_mode: SamplingMode,
    pub blackbox: BlackBoxConfig,
    /// Run each round's machines on the rayon pool.
    pub threaded: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource, algo: Algorithm, k: usize) -> Self {
        Self {
            dataset,
            algo,
            k,
            epsilon: 0.1,
            delta: 0.1,
            rounds: 1,
            oversampling: None,
            machines: 50,
            reps: 10,
            seed: 0,
            constants_mode: ConstantsMode::Experiment,
            sampling_mode: SamplingMode::ExactFraction,
            blackbox: BlackBoxConfig::default(),
            threaded: true,
        }
    }

    pub fn soccer_params(&self) -> SoccerParams {
        SoccerParams::new(self.k, self.delta, self.epsilon)
            .with_constants(self.constants_mode)
            .with_sampling(self.sampling_mode)
    }

    pub fn kmpp_params(&self) -> KmppParams {
        KmppParams {
            k: self.k,
            rounds: self.rounds,
            oversampling: self.oversampling.unwrap_or(2 * self.k),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |e: soccer_core::Error| HarnessError::Config(e.to_string());
        if self.reps == 0 {
            return Err(HarnessError::Config("reps must be at least 1".into()));
        }
        if self.machines == 0 {
            return Err(HarnessError::Config("machines must be at least 1".into()));
        }
        match self.algo {
            Algorithm::Soccer => self.soccer_params().validate().map_err(bad)?,
            Algorithm::KmeansParallel => self.kmpp_params().validate().map_err(bad)?,
        }
        self.blackbox.validate().map_err(bad)
    }
}

/// One repetition, or the mean/std over all of them.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub algo: String,
    pub k: usize,
    /// Empty for k-means||.
    pub epsilon: Option<f64>,
    pub rounds_mean: f64,
    pub rounds_std: f64,
    pub output_size_mean: f64,
    pub output_size_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
    #[serde(default)]
    pub machine_time_s: f64,
    #[serde(default)]
    pub total_time_s: f64,
    pub coord_points_received: f64,
    pub coord_points_broadcast: f64,
    pub rep_count: usize,
    pub seed: u64,
}

pub const COLUMNS: [&str; 16] = [
    "dataset",
    "algo",
    "k",
    "epsilon",
    "rounds_mean",
    "rounds_std",
    "output_size_mean",
    "output_size_std",
    "cost_mean",
    "cost_std",
    "machine_time_s",
    "total_time_s",
    "coord_points_received",
    "coord_points_broadcast",
    "rep_count",
    "seed",
];

const TIMING: [&str; 2] = ["machine_time_s", "total_time_s"];

pub fn columns(timing: bool) -> Vec<&'static str> {
    COLUMNS
        .iter()
        .copied()
        .filter(|c| timing || !TIMING.contains(c))
        .collect()
}

impl ResultRow {
    pub fn cells(&self, timing: bool) -> Vec<String> {
        let all = [
            self.dataset.clone(),
            self.algo.clone(),
            self.k.to_string(),
            self.epsilon.map_or_else(String::new, |e| e.to_string()),
            self.rounds_mean.to_string(),
            self.rounds_std.to_string(),
            self.output_size_mean.to_string(),
            self.output_size_std.to_string(),
            self.cost_mean.to_string(),
            self.cost_std.to_string(),
            self.machine_time_s.to_string(),
            self.total_time_s.to_string(),
            self.coord_points_received.to_string(),
            self.coord_points_broadcast.to_string(),
            self.rep_count.to_string(),
            self.seed.to_string(),
        ];
        COLUMNS
            .iter()
            .zip(all)
            .filter(|(c, _)| timing || !TIMING.contains(c))
            .map(|(_, v)| v)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub reps: Vec<ResultRow>,
    pub aggregate: ResultRow,
}

impl Experiment {
    /// Per-rep rows followed by the aggregate.
    pub fn rows(&self) -> Vec<ResultRow> {
        let mut rows = self.reps.clone();
        rows.push(self.aggregate.clone());
        rows
    }
}

struct Outcome {
    rounds: usize,
    output_size: usize,
    cost: f64,
    ledger: CommLedger,
    timer: RoundTimer,
}

fn run_once<E: Executor>(
    config: &ExperimentConfig,
    x: &Dataset,
    seed: u64,
    executor: E,
) -> Result<Outcome, soccer_core::Error> {
    let mut net = Network::partitioned(x, config.machines, Partition::UniformRandom, seed, executor)?;
    match config.algo {
        Algorithm::Soccer => {
            let r = soccer::run(&mut net, &config.soccer_params(), &config.blackbox, seed)?;
            Ok(Outcome {
                rounds: r.loop_rounds,
                output_size: r.c_out.len(),
                cost: r.final_cost,
                ledger: r.ledger,
                timer: r.timer,
            })
        }
        Algorithm::KmeansParallel => {
            let r = kmeans_parallel::run(&mut net, &config.kmpp_params(), &config.blackbox, seed)?;
            Ok(Outcome {
                rounds: r.rounds,
                output_size: r.candidates.len(),
                cost: r.final_cost,
                ledger: r.ledger,
                timer: r.timer,
            })
        }
    }
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment, HarnessError> {
    let seeds: Vec<u64> = (0..config.reps as u64).map(|i| derive_seed(config.seed, i)).collect();
    run_with_seeds(config, &seeds)
}

/// Like [`run_experiment`] with explicit per-rep seeds.
pub fn run_with_seeds(config: &ExperimentConfig, seeds: &[u64]) -> Result<Experiment, HarnessError> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(HarnessError::Config("at least one seed is required".into()));
    }
    let x = config.dataset.load()?;
    let dataset = config.dataset.name();
    let epsilon = (config.algo == Algorithm::Soccer).then_some(config.epsilon);
    let mut reps = Vec::with_capacity(seeds.len());
    for (rep, &seed) in seeds.iter().enumerate() {
        let start = Instant::now();
        let out = if config.threaded {
            run_once(config, &x, seed, Threaded::default())
        } else {
            run_once(config, &x, seed, Serial(WallClock::default()))
        }
        .map_err(|source| HarnessError::Rep { rep, source })?;
        let total_time_s = start.elapsed().as_secs_f64();
        let traffic = out.ledger.totals();
        reps.push(ResultRow {
            dataset: dataset.clone(),
            algo: config.algo.name().into(),
            k: config.k,
            epsilon,
            rounds_mean: out.rounds as f64,
            rounds_std: 0.0,
            output_size_mean: out.output_size as f64,
            output_size_std: 0.0,
            cost_mean: out.cost,
            cost_std: 0.0,
            machine_time_s: out.timer.machine_time_total(),
            total_time_s,
            coord_points_received: traffic.points_to_coordinator as f64,
            coord_points_broadcast: traffic.points_broadcast as f64,
            rep_count: 1,
            seed,
        });
    }
    let aggregate = aggregate(&reps, config.seed);
    Ok(Experiment { reps, aggregate })
}

/// Mean/std over per-rep rows, labelled with the master seed.
pub fn aggregate(reps: &[ResultRow], master_seed: u64) -> ResultRow {
    let col = |f: fn(&ResultRow) -> f64| mean_std(&reps.iter().map(f).collect::<Vec<_>>());
    let (rounds_mean, rounds_std) = col(|r| r.rounds_mean);
    let (output_size_mean, output_size_std) = col(|r| r.output_size_mean);
    let (cost_mean, cost_std) = col(|r| r.cost_mean);
    let first = &reps[0];
    ResultRow {
        dataset: first.dataset.clone(),
        algo: first.algo.clone(),
        k: first.k,
        epsilon: first.epsilon,
        rounds_mean,
        rounds_std,
        output_size_mean,
        output_size_std,
        cost_mean,
        cost_std,
        machine_time_s: col(|r| r.machine_time_s).0,
        total_time_s: col(|r| r.total_time_s).0,
        coord_points_received: col(|r| r.coord_points_received).0,
        coord_points_broadcast: col(|r| r.coord_points_broadcast).0,
        rep_count: reps.len(),
        seed: master_seed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

pub fn emit<W: Write>(rows: &[ResultRow], format: Format, timing: bool, out: W) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Output("no rows to write".into()));
    }
    let io = |e: std::io::Error| HarnessError::Output(e.to_string());
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let csv_err = |e: csv::Error| HarnessError::Output(e.to_string());
            w.write_record(columns(timing)).map_err(csv_err)?;
            for r in rows {
                w.write_record(r.cells(timing)).map_err(csv_err)?;
            }
            w.flush().map_err(io)
        }
        Format::Markdown => {
            let header: Vec<String> = columns(timing).into_iter().map(String::from).collect();
            let body: Vec<Vec<String>> = rows.iter().map(|r| r.cells(timing)).collect();
            let widths: Vec<usize> = (0..header.len())
                .map(|c| {
                    body.iter()
                        .map(|r| r[c].len())
                        .chain([header[c].len(), 3])
                        .max()
                        .unwrap_or(3)
                })
                .collect();
            let mut out = out;
            let line = |cells: &[String]| {
                let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                format!("| {} |", padded.join(" | "))
            };
            writeln!(out, "{}", line(&header)).map_err(io)?;
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            writeln!(out, "{}", line(&rule)).map_err(io)?;
            for r in &body {
                writeln!(out, "{}", line(r)).map_err(io)?;
            }
            Ok(())
        }
    }
}

/// Reads rows back from [`emit`]'s CSV output, with or without timing columns.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<ResultRow>, csv::Error> {
    csv::Reader::from_reader(bytes).deserialize().collect()
}
