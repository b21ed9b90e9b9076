// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `mlx` command-line front end.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlx_core::bench::{grid, rows_tsv, run_sweep, Experiment, SweepSpec};
use mlx_core::metrics::{coverage, match_score, metrics_tsv, VertexFamily};
use mlx_core::network::{load_labeled_edge_list, LoadReport};
use mlx_core::simgen::{msbm_params, TESTBED_M, TESTBED_N};
use mlx_core::{
    generate_embedded, generate_msbm, generate_persistence, generate_testbed, load_edge_list,
    run_pipeline, BetaChoice, CandidateScope, CommunitiesDoc, ExtractionConfig, GroundTruth,
    MlxError, MultilayerNetwork, Neighborhood, RngSeed, ScalingPolicy, SeedPolicy, TestbedCase,
};

use crate::report::{Counts, RunReport};

#[derive(Debug, Parser)]
#[command(name = "mlx", version, about = "Multilayer Extraction community detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract vertex-layer communities from an edge list.
    Extract(ExtractArgs),
    /// Generate a synthetic network and its ground truth.
    Simulate {
        #[command(subcommand)]
        model: SimModel,
    },
    /// Sweep a synthetic experiment and report agreement per replicate.
    Benchmark(BenchArgs),
    /// Compare a communities document against a ground-truth document.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Gamma {
    Constant,
    Linear,
    Quadratic,
}

impl From<Gamma> for ScalingPolicy {
    fn from(g: Gamma) -> Self {
        match g {
            Gamma::Constant => ScalingPolicy::Constant,
            Gamma::Linear => ScalingPolicy::Linear,
            Gamma::Quadratic => ScalingPolicy::Quadratic,
        }
    }
}

#[derive(Debug, Args)]
struct RunFlags {
    /// Layer-count penalty.
    #[arg(long, value_enum, default_value = "linear")]
    gamma: Gamma,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (falls back to MLX_THREADS, then the core count).
    #[arg(long, env = "MLX_THREADS")]
    threads: Option<usize>,
    /// Run extraction from this many sampled seeds instead of all neighborhoods.
    #[arg(long)]
    sample_seeds: Option<usize>,
    /// Seed from open neighborhoods N(u, l) instead of N(u, l) plus u.
    #[arg(long)]
    open_neighborhoods: bool,
    /// Score only the frontier of the current set at each vertex step.
    #[arg(long)]
    frontier: bool,
    /// Toggle limit per vertex search (default 10 n).
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl RunFlags {
    fn config(&self) -> ExtractionConfig {
        ExtractionConfig {
            scaling: self.gamma.into(),
            seed_policy: match self.sample_seeds {
                Some(count) => SeedPolicy::Sampled { count },
                None => SeedPolicy::AllNeighborhoods,
            },
            neighborhood: if self.open_neighborhoods {
                Neighborhood::Open
            } else {
                Neighborhood::Closed
            },
            candidate_scope: if self.frontier {
                CandidateScope::Frontier
            } else {
                CandidateScope::AllVertices
            },
            max_iterations: self.max_iterations,
            rng_seed: self.seed,
            worker_count: self.threads.unwrap_or_else(default_threads),
        }
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Edge list, one `layer u v` row per edge.
    #[arg(long)]
    input: PathBuf,
    /// Treat layer and vertex fields as names rather than integer ids.
    #[arg(long)]
    labeled: bool,
    /// Declared vertex count.
    #[arg(long)]
    n: Option<usize>,
    /// Declared layer count.
    #[arg(long)]
    m: Option<usize>,
    /// Overlap bound in [0, 1], or `auto`.
    #[arg(long, default_value = "auto", value_parser = parse_beta)]
    beta: BetaChoice,
    /// Communities JSON output.
    #[arg(long, default_value = "communities.json")]
    out: PathBuf,
    /// Beta profile TSV (default: next to --out, `.beta.tsv`).
    #[arg(long)]
    beta_profile: Option<PathBuf>,
    /// Run report JSON (default: standard error).
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

fn parse_beta(s: &str) -> Result<BetaChoice, String> {
    s.parse().map_err(|e: MlxError| e.to_string())
}

#[derive(Debug, Args)]
struct SimCommon {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes `<prefix>.edges.tsv` and `<prefix>.truth.json`.
    #[arg(long, default_value = "sim")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum SimModel {
    /// Block model with P(i,i) = r + 0.05 and P(i,j) = 0.05 in every layer.
    Msbm {
        #[command(flatten)]
        common: SimCommon,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        r: f64,
    },
    /// Structured layers followed by Erdős–Rényi noise layers.
    Persistence {
        #[command(flatten)]
        common: SimCommon,
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        tau: f64,
    },
    /// One planted community in every layer.
    Embedded {
        #[command(flatten)]
        common: SimCommon,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        frac: f64,
    },
    /// Planted-rectangle test bed, cases I..VI.
    Testbed {
        #[arg(long, default_value_t = TESTBED_N)]
        n: usize,
        #[arg(long, default_value_t = TESTBED_M)]
        m: usize,
        #[arg(long, value_parser = parse_case)]
        case: TestbedCase,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sim")]
        out: PathBuf,
    },
}

fn parse_case(s: &str) -> Result<TestbedCase, String> {
    s.parse().map_err(|e: MlxError| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Msbm,
    Persistence,
    Embedded,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    experiment: ExperimentKind,
    /// First swept value (r, tau or embedded fraction).
    #[arg(long)]
    from: f64,
    /// Last swept value, inclusive.
    #[arg(long)]
    to: f64,
    #[arg(long)]
    step: f64,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Result TSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    communities: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<MlxError> for Failure {
    fn from(e: MlxError) -> Self {
        let code = match e {
            MlxError::InvalidParameter(_) | MlxError::Unsupported(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Simulate { model } => cmd_simulate(model),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mlx: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_extract(args: ExtractArgs) -> Result<(), Failure> {
    let config = args.run.config();
    let started = Instant::now();
    let (net, load): (MultilayerNetwork, LoadReport) = if args.labeled {
        load_labeled_edge_list(&args.input)?
    } else {
        load_edge_list(&args.input, args.n, args.m)?
    };
    let load_ms = started.elapsed().as_millis();

    let out = run_pipeline(&net, &config, args.beta)?;
    out.document().write(&args.out)?;

    let mut report = RunReport::new("extract", &config);
    report.param("input", args.input.display().to_string());
    report.param("beta", format!("{:?}", args.beta));
    report.param("n", net.n());
    report.param("m", net.m());
    report.timing("load_ms", load_ms);
    report.timing("extraction_ms", out.timings.extraction_ms);
    report.timing("refinement_ms", out.timings.refinement_ms);
    report.counts = Counts {
        seeds: out.extraction.seeds,
        candidates: out.extraction.communities.len(),
        kept: out.communities().len(),
        background: out.background.len(),
        degenerate_seeds: out.extraction.degenerate,
        failed_seeds: out.extraction.failures,
    };
    report.load = Some(load);
    if load.self_loops_dropped > 0 || load.duplicates_removed > 0 {
        report.warn(format!(
            "dropped {} self-loop(s) and {} duplicate edge(s)",
            load.self_loops_dropped, load.duplicates_removed
        ));
    }
    if out.extraction.failures > 0 {
        report.warn(format!(
            "{} seed(s) hit the iteration guard and were skipped",
            out.extraction.failures
        ));
    }

    if matches!(args.beta, BetaChoice::Auto) {
        let path = args
            .beta_profile
            .unwrap_or_else(|| sibling(&args.out, ".beta.tsv"));
        std::fs::write(&path, out.refinement.profile_tsv())?;
        report.param("beta_profile", path.display().to_string());
    }
    report.param("beta_used", out.refinement.beta_used);
    report.emit(args.report.as_deref())?;
    Ok(())
}

fn write_simulation(
    prefix: &Path,
    net: &MultilayerNetwork,
    truth: &GroundTruth,
    mut report: RunReport,
) -> Result<(), Failure> {
    let edges = sibling_with(prefix, ".edges.tsv");
    let truth_path = sibling_with(prefix, ".truth.json");
    net.write_edge_list(&edges)?;
    truth.write(&truth_path)?;
    report.param("n", net.n());
    report.param("m", net.m());
    report.param("edges_file", edges.display().to_string());
    report.param("truth_file", truth_path.display().to_string());
    report.param("planted_sizes", truth
        .communities
        .iter()
        .map(|c| c.vertices.len())
        .collect::<Vec<_>>());
    report.emit(None)?;
    Ok(())
}

fn sibling_with(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(model: SimModel) -> Result<(), Failure> {
    let base = ExtractionConfig::default();
    match model {
        SimModel::Msbm { common, m, k, r } => {
            let params = msbm_params(k, r, m)?;
            let (net, truth) = generate_msbm(common.n, m, &params, RngSeed(common.seed))?;
            let mut report = RunReport::new("simulate msbm", &base);
            report.param("seed", common.seed);
            report.param("k", k);
            report.param("r", r);
            write_simulation(&common.out, &net, &truth, report)
        }
        SimModel::Persistence { common, m, k, tau } => {
            let (net, truth) = generate_persistence(common.n, m, tau, k, RngSeed(common.seed))?;
            let mut report = RunReport::new("simulate persistence", &base);
            report.param("seed", common.seed);
            report.param("k", k);
            report.param("tau", tau);
            write_simulation(&common.out, &net, &truth, report)
        }
        SimModel::Embedded { common, m, frac } => {
            let (net, truth) = generate_embedded(common.n, m, frac, RngSeed(common.seed))?;
            let mut report = RunReport::new("simulate embedded", &base);
            report.param("seed", common.seed);
            report.param("frac", frac);
            write_simulation(&common.out, &net, &truth, report)
        }
        SimModel::Testbed {
            n,
            m,
            case,
            seed,
            out,
        } => {
            let (net, truth) = generate_testbed(case, n, m, RngSeed(seed))?;
            let mut report = RunReport::new("simulate testbed", &base);
            report.param("seed", seed);
            report.param("case", case.numeral());
            write_simulation(&out, &net, &truth, report)
        }
    }
}

fn cmd_benchmark(args: BenchArgs) -> Result<(), Failure> {
    let experiment = match args.experiment {
        ExperimentKind::Msbm => Experiment::Msbm {
            n: args.n,
            m: args.m,
            k: args.k,
        },
        ExperimentKind::Persistence => Experiment::Persistence {
            n: args.n,
            m: args.m,
            k: args.k,
        },
        ExperimentKind::Embedded => Experiment::Embedded {
            n: args.n,
            m: args.m,
        },
    };
    let config = args.run.config();
    let spec = SweepSpec {
        experiment,
        values: grid(args.from, args.to, args.step)?,
        replicates: args.reps,
        seed: args.run.seed,
        config: config.clone(),
    };
    if spec.replicates == 0 {
        return Err(MlxError::InvalidParameter("--reps must be at least 1".into()).into());
    }
    let started = Instant::now();
    let rows = run_sweep(&spec)?;
    let tsv = rows_tsv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, &tsv)?,
        None => print!("{tsv}"),
    }
    let mut report = RunReport::new("benchmark", &config);
    report.param("experiment", experiment.name());
    report.param("values", spec.values.clone());
    report.param("replicates", spec.replicates);
    report.timing("total_ms", started.elapsed().as_millis());
    report.emit(None)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let doc = CommunitiesDoc::read(&args.communities)?;
    let truth = GroundTruth::read(&args.truth)?;
    let planted = truth.vertex_family()?;
    let detected = VertexFamily::from_communities(&doc.communities)?;
    let mut rows: Vec<(&str, f64)> = vec![
        ("communities", doc.communities.len() as f64),
        ("background", doc.background.len() as f64),
        ("beta", doc.beta),
    ];
    if detected.is_empty() {
        rows.extend([("match", 0.0), ("coverage_truth", 0.0), ("coverage_detected", 0.0)]);
    } else {
        rows.push(("match", match_score(&detected, &planted)?));
        rows.push(("coverage_truth", coverage(&planted, &detected)?));
        rows.push(("coverage_detected", coverage(&detected, &planted)?));
    }
    print!("{}", metrics_tsv(&rows));
    Ok(())
}
