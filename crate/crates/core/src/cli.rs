//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::consensus::ConsensusMatrix;
use crate::error::{Error, Result};
use crate::evaluation::{run_protocol, score_method, ConstraintExperiment, Dataset, Method, ProtocolConfig};
use crate::io::{self, Manifest, Metadata, ReportFile};
use crate::kmeans::generate_pool;
use crate::synth::{scenario_hub, scenario_uniform, HubScenarioConfig, UniformScenarioConfig};

/// Exit status for any diagnosed failure.
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "discotec", version, about = "Rank clustering models by their distance to an ensemble consensus")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "DISCOTEC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score and rank the models of a partitions file.
    Rank(RankArgs),
    /// Generate a synthetic ensemble with known ground truth.
    Synth(SynthArgs),
    /// Run the evaluation protocol over a manifest of datasets.
    Bench(BenchArgs),
    /// Export the consensus matrix (or its binarised form) as CSV.
    Consensus(ConsensusArgs),
    /// Build a KMeans model pool from a data CSV.
    Pool(PoolArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RankMethod {
    Kl,
    Tv,
    H2,
    Binary,
    Aari,
    Anmi,
}

impl RankMethod {
    fn method(self) -> Method {
        let name = self.to_possible_value().expect("no skipped variants");
        name.get_name().parse().expect("rank methods are protocol methods")
    }
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Partitions CSV: one column per model, one row per observation.
    partitions: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    method: RankMethod,
    /// `ML i j` / `CL i j` lines with 0-based observation indices.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// JSON report destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scenario {
    Uniform,
    Hub,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    scenario: Scenario,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    t: usize,
    /// Upper conservation rate (uniform scenario).
    #[arg(long, default_value_t = 0.5)]
    rho_max: f64,
    /// Fraction of models derived from the poor hub (hub scenario).
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Partitions CSV destination.
    #[arg(long)]
    out: PathBuf,
    /// Single-column ground-truth CSV destination.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Metadata JSON destination (defaults to `<out>.json`).
    #[arg(long)]
    meta_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// JSON manifest listing the datasets.
    #[arg(long)]
    datasets: PathBuf,
    /// Comma-separated methods.
    #[arg(long, default_value = "binary,kl,tv,h2,aari,anmi")]
    methods: String,
    /// Repeats per constraint count.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Comma-separated numbers of observations to draw constraints from.
    #[arg(long)]
    constrained_observations: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep single-cluster models in the pools.
    #[arg(long)]
    keep_degenerate: bool,
    /// JSON report destination; CSV tables are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConsensusArgs {
    #[arg(long)]
    partitions: PathBuf,
    #[arg(long)]
    out_matrix: PathBuf,
    /// Export the binarised consensus instead of the co-association fractions.
    #[arg(long)]
    binarised: bool,
}

#[derive(Debug, Args)]
struct PoolArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidInput("--threads must be at least 1".into())),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(&cli.command))),
        None => dispatch(&cli.command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Rank(a) => rank(a).map(|()| 0),
        Command::Synth(a) => synth(a).map(|()| 0),
        Command::Bench(a) => bench(a),
        Command::Consensus(a) => consensus(a).map(|()| 0),
        Command::Pool(a) => pool(a).map(|()| 0),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn rank(a: &RankArgs) -> Result<()> {
    let file = io::read_partitions(&a.partitions)?;
    let ensemble = file.ensemble;
    let constraints = a
        .constraints
        .as_deref()
        .map(|p| io::read_constraints(p, Some(ensemble.n())))
        .transpose()?;
    let method = a.method.method();
    let report = score_method(method, &ensemble, None, constraints.as_ref())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = &a.out {
        let meta = Metadata::new(
            "rank",
            None,
            json!({
                "partitions": a.partitions,
                "method": method.name(),
                "constraints": a.constraints,
                "models": ensemble.len(),
                "observations": ensemble.n(),
                "model_names": file.names,
            }),
        );
        io::write_json(&ReportFile { metadata: meta, report: &report }, out)?;
    }
    print!("{}", io::ranking_csv(&report));
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let (output, config) = match a.scenario {
        Scenario::Uniform => {
            let cfg = UniformScenarioConfig {
                n: a.n,
                k: a.k,
                t: a.t,
                rho_max: a.rho_max,
                seed: a.seed,
            };
            (scenario_uniform(&cfg)?, json!({ "scenario": "uniform", "params": cfg }))
        }
        Scenario::Hub => {
            let cfg = HubScenarioConfig {
                n: a.n,
                k: a.k,
                t: a.t,
                alpha: a.alpha,
                seed: a.seed,
            };
            (scenario_hub(&cfg)?, json!({ "scenario": "hub", "params": cfg }))
        }
    };
    io::write_ensemble(&output.ensemble, create(&a.out)?)?;
    if let Some(truth) = &a.truth_out {
        io::write_partitions(&[output.ground_truth.labels()], create(truth)?)?;
    }
    let meta_path = a.meta_out.clone().unwrap_or_else(|| with_suffix(&a.out, ".json"));
    let report = json!({
        "rates": output.rates,
        "hub_sources": output.hubs.as_ref().map(|h| &h.sources),
    });
    io::write_json(
        &ReportFile {
            metadata: Metadata::new("synth", Some(a.seed), config),
            report,
        },
        &meta_path,
    )
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| Error::InvalidInput(format!("{what} `{s}`: {e}")))
        })
        .collect()
}

fn load_dataset(entry: &io::ManifestEntry, base: &Path) -> Result<Dataset> {
    let ensemble = io::read_partitions(&base.join(&entry.partitions))?.ensemble;
    let targets = io::read_labels(&base.join(&entry.targets))?;
    let data = entry.data.as_ref().map(|p| io::read_data(&base.join(p))).transpose()?;
    let constraints = entry
        .constraints
        .as_ref()
        .map(|p| io::read_constraints(&base.join(p), Some(ensemble.n())))
        .transpose()?;
    Ok(Dataset {
        name: entry.name.clone(),
        group: entry.group.clone(),
        ensemble,
        targets,
        data,
        constraints,
    })
}

fn bench(a: &BenchArgs) -> Result<i32> {
    let methods: Vec<Method> = parse_list(&a.methods, "method")?;
    if methods.is_empty() {
        return Err(Error::InvalidInput("--methods lists no method".into()));
    }
    let observations = a
        .constrained_observations
        .as_deref()
        .map(|s| parse_list::<usize>(s, "observation count"))
        .transpose()?;
    if observations.as_ref().is_some_and(Vec::is_empty) {
        return Err(Error::InvalidInput("--constrained-observations is empty".into()));
    }
    if a.repeats == 0 {
        return Err(Error::InvalidInput("--repeats must be at least 1".into()));
    }
    let (manifest, base) = Manifest::read(&a.datasets)?;
    if manifest.datasets.is_empty() {
        return Err(Error::InvalidInput("manifest lists no dataset".into()));
    }

    let mut datasets = Vec::new();
    let mut load_failures = Vec::new();
    for entry in &manifest.datasets {
        match load_dataset(entry, &base) {
            Ok(d) => datasets.push(d),
            Err(e) => {
                eprintln!("warning: dataset `{}`: {e}", entry.name);
                load_failures.push(json!({ "name": entry.name, "error": e.to_string() }));
            }
        }
    }
    if datasets.is_empty() {
        eprintln!("error: every dataset failed to load");
        return Ok(EXIT_FAILURE);
    }

    let cfg = ProtocolConfig {
        methods,
        filter_degenerate: !a.keep_degenerate,
        constraint_experiment: observations.map(|observations| ConstraintExperiment {
            observations,
            repeats: a.repeats,
            seed: a.seed,
        }),
    };
    let result = run_protocol(&datasets, &cfg)?;
    for d in &result.datasets {
        if let Some(e) = &d.error {
            eprintln!("warning: dataset `{}`: {e}", d.name);
        }
    }

    let meta = Metadata::new(
        "bench",
        Some(a.seed),
        json!({
            "manifest": a.datasets,
            "protocol": cfg,
            "load_failures": load_failures,
        }),
    );
    io::write_json(&ReportFile { metadata: meta, report: &result }, &a.out)?;
    let stem = a.out.with_extension("");
    for (suffix, table) in io::protocol_tables(&result) {
        write_text(&with_suffix(&stem, &format!("_{suffix}.csv")), &table)?;
    }
    if result.failed_datasets() == result.datasets.len() {
        eprintln!("error: every dataset failed");
        return Ok(EXIT_FAILURE);
    }
    Ok(0)
}

fn consensus(a: &ConsensusArgs) -> Result<()> {
    let ensemble = io::read_partitions(&a.partitions)?.ensemble;
    let c = ConsensusMatrix::build(&ensemble)?;
    let mean = c.mean();
    let text = if a.binarised {
        io::matrix_csv(&c.binarise().to_rows())
    } else {
        io::matrix_csv(&c.to_rows())
    };
    write_text(&a.out_matrix, &text)?;
    let meta = json!({
        "observations": c.n(),
        "models": c.models(),
        "mean": mean,
        "binarised": a.binarised,
    });
    write_text(&with_suffix(&a.out_matrix, ".meta.json"), &format!("{meta}\n"))?;
    println!("mean,{mean}");
    Ok(())
}

fn pool(a: &PoolArgs) -> Result<()> {
    let x = io::read_data(&a.data)?;
    if a.k_min == 0 || a.k_min > a.k_max {
        return Err(Error::InvalidInput("need 1 <= k-min <= k-max".into()));
    }
    let ensemble = generate_pool(&x, a.k_min..=a.k_max, a.repeats, a.seed)?;
    io::write_ensemble(&ensemble, create(&a.out)?)
}
