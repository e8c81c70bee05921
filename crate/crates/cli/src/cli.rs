//! The `soccer` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use soccer_core::blackbox::BlackBoxConfig;
use soccer_core::datagen::{gen_gaussian_mixture, gen_hard_instance, GaussianMixtureSpec, HardInstanceSpec};
use soccer_core::soccer::{derive_constants, ConstantsMode, SamplingMode, SoccerParams};

use crate::harness::{emit, run_experiment, Algorithm, DatasetSource, ExperimentConfig, Format};
use crate::io::{write_csv, CsvOptions};

#[derive(Parser, Debug)]
#[command(
    name = "soccer",
    version,
    about = "Distributed k-means experiments: SOCCER and k-means||"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run repeated seeded experiments and print a result table.
    Run(RunArgs),
    /// Write a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Print the derived constants for k, delta, epsilon and n.
    Constants(ConstantsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgoArg {
    Soccer,
    #[value(alias = "kmeans_parallel", alias = "kmeans||")]
    KmeansParallel,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConstantsArg {
    Experiment,
    Theory,
}

impl From<ConstantsArg> for ConstantsMode {
    fn from(c: ConstantsArg) -> Self {
        match c {
            ConstantsArg::Experiment => ConstantsMode::Experiment,
            ConstantsArg::Theory => ConstantsMode::Theory,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplingArg {
    Exact,
    Bernoulli,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

/// Generator and CSV settings shared by `run` and `gen`.
#[derive(Args, Debug)]
struct DataArgs {
    /// Points in a generated Gaussian mixture.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 15)]
    dim: usize,
    #[arg(long, default_value_t = 0.001)]
    sigma: f64,
    #[arg(long, default_value_t = 1.5)]
    zipf_gamma: f64,
    /// Mixture components; defaults to --k.
    #[arg(long)]
    components: Option<usize>,
    /// Copies of the hard-instance block.
    #[arg(long, default_value_t = 100)]
    z: usize,
    /// Generator seed; defaults to --seed.
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// The CSV's first row is a header.
    #[arg(long)]
    header: bool,
    /// Comma-separated 0-based CSV columns to use.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
}

impl DataArgs {
    fn gaussian(&self, k: usize, seed: u64) -> GaussianMixtureSpec {
        GaussianMixtureSpec {
            k: self.components.unwrap_or(k),
            dim: self.dim,
            sigma: self.sigma,
            zipf_gamma: self.zipf_gamma,
            n: self.n,
            seed: self.data_seed.unwrap_or(seed),
            cube_side: 1.0,
        }
    }

    fn csv_options(&self) -> Result<CsvOptions, String> {
        let delimiter = u8::try_from(self.delimiter).map_err(|_| "delimiter must be a single-byte character")?;
        Ok(CsvOptions {
            delimiter,
            has_header: self.header,
            columns: self.columns.clone(),
        })
    }
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct RunArgs {
    /// key=value file of flags; flags on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `gaussian`, `hard`, or a path to a CSV file.
    #[arg(long, default_value = "gaussian")]
    dataset: String,
    #[arg(long, value_enum, default_value = "soccer")]
    algo: AlgoArg,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// k-means|| rounds.
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    /// k-means|| centers per round; defaults to 2k.
    #[arg(long)]
    oversampling: Option<usize>,
    #[arg(long, default_value_t = 50)]
    machines: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "experiment")]
    constants_mode: ConstantsArg,
    #[arg(long, value_enum, default_value = "exact")]
    sampling_mode: SamplingArg,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Leave out the wall-clock columns so output is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Run machines on the calling thread.
    #[arg(long)]
    serial: bool,
    /// Restrict black-box centers to input points.
    #[arg(long)]
    medoid: bool,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Emit the duplicated-block instance instead of a Gaussian mixture.
    #[arg(long)]
    hard_instance: bool,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ConstantsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "experiment")]
    constants_mode: ConstantsArg,
}

/// Reads `key=value` lines into flags. `true` becomes a bare flag and `false` is dropped.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let mut flags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => flags.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                flags.push(format!("--{key}").into());
                flags.push(value.into());
            }
        }
    }
    Ok(flags)
}

/// Splices flags from `--config FILE` in front of the command-line flags.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("reading {}: {e}", Path::new(&path).display()))?;
    let flags = config_flags(&text)?;
    let at = rest.len().min(2);
    rest.splice(at..at, flags);
    Ok(rest)
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, String> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| format!("creating {}: {e}", p.display())),
        None => Ok(Box::new(stdout)),
    }
}

fn run(args: RunArgs, stdout: &mut dyn Write) -> Result<(), String> {
    let dataset = match args.dataset.as_str() {
        "gaussian" => DatasetSource::Gaussian(args.data.gaussian(args.k, args.seed)),
        "hard" => DatasetSource::Hard(HardInstanceSpec::new(args.k, args.data.z)),
        path => DatasetSource::Csv {
            path: path.into(),
            options: args.data.csv_options()?,
        },
    };
    let algo = match args.algo {
        AlgoArg::Soccer => Algorithm::Soccer,
        AlgoArg::KmeansParallel => Algorithm::KmeansParallel,
    };
    let mut config = ExperimentConfig::new(dataset, algo, args.k);
    config.epsilon = args.epsilon;
    config.delta = args.delta;
    config.rounds = args.rounds;
    config.oversampling = args.oversampling;
    config.machines = args.machines;
    config.reps = args.reps;
    config.seed = args.seed;
    config.constants_mode = args.constants_mode.into();
    config.sampling_mode = match args.sampling_mode {
        SamplingArg::Exact => SamplingMode::ExactFraction,
        SamplingArg::Bernoulli => SamplingMode::Bernoulli,
    };
    config.threaded = !args.serial;
    if args.medoid {
        config.blackbox = BlackBoxConfig::medoid();
    }
    let experiment = run_experiment(&config).map_err(|e| e.to_string())?;
    let format = match args.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Markdown => Format::Markdown,
    };
    let mut out = open_out(&args.out, stdout)?;
    emit(&experiment.rows(), format, !args.no_timing, &mut out).map_err(|e| e.to_string())?;
    out.flush().map_err(|e| e.to_string())
}

fn gen(args: GenArgs, stdout: &mut dyn Write) -> Result<(), String> {
    let points = if args.hard_instance {
        gen_hard_instance(&HardInstanceSpec::new(args.k, args.data.z)).map(|h| h.points)
    } else {
        gen_gaussian_mixture(&args.data.gaussian(args.k, args.seed)).map(|m| m.points)
    }
    .map_err(|e| e.to_string())?;
    let mut out = open_out(&args.out, stdout)?;
    write_csv(&mut out, &points).map_err(|e| e.to_string())?;
    out.flush().map_err(|e| e.to_string())
}

fn constants(args: ConstantsArgs, stdout: &mut dyn Write) -> Result<(), String> {
    let params = SoccerParams::new(args.k, args.delta, args.epsilon).with_constants(args.constants_mode.into());
    let c = derive_constants(&params, args.n).map_err(|e| e.to_string())?;
    let w = |e: std::io::Error| e.to_string();
    writeln!(stdout, "log_arg: {}", c.log_arg).map_err(w)?;
    writeln!(stdout, "eta: {:.3}", c.eta).map_err(w)?;
    writeln!(stdout, "p1_size: {}", c.p1_size()).map_err(w)?;
    writeln!(stdout, "d_k: {:.6}", c.d_k).map_err(w)?;
    writeln!(stdout, "k_plus: {}", c.k_plus).map_err(w)?;
    writeln!(stdout, "truncation: {}", c.truncation).map_err(w)?;
    writeln!(stdout, "loop_round_guard: {}", params.loop_round_guard()).map_err(w)?;
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = match expand_config(args.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a, stdout),
        Command::Gen(a) => gen(a, stdout),
        Command::Constants(a) => constants(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}
