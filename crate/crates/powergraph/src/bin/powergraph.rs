//! Command-line front end: generators, powering, cleaning, clustering,
//! belief propagation, bound verification, and experiment sweeps.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error, 3 a requested
//! verification check failed.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use powergraph::bounds;
use powergraph::bp::{self, BpInit, ModelParams};
use powergraph::experiments::{self, ExperimentConfig};
use powergraph::generators::{self, GbmParams, HbmParams, SbmParams};
use powergraph::graph::Graph;
use powergraph::io;
use powergraph::pipeline::{self, PsiParams, RRule};
use powergraph::spectral::{self, Method, Partition, RChoice};
use powergraph::{Error, Result};

#[derive(Parser)]
#[command(
    name = "powergraph",
    about = "Graph powering and spectral community detection toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random graph model and write edge list, labels, metadata.
    Generate(GenerateArgs),
    /// Raise a graph to its r-th power.
    Power(PowerArgs),
    /// Clean a graph (degree cap, leaf and segment peeling, giant).
    Clean(CleanArgs),
    /// Spectral clustering with a chosen operator.
    Cluster(ClusterArgs),
    /// Belief propagation variants.
    Bp(BpArgs),
    /// Evaluate the powered-graph spectral-gap certificates.
    VerifyBounds(VerifyBoundsArgs),
    /// Run a sweep described by a JSON config.
    Sweep(SweepArgs),
    /// Aggregate a sweep CSV into per-cell means.
    Summarize(SummarizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Er,
    Sbm,
    SbmGeneral,
    Gbm,
    Hbm,
    Regular,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long)]
    n: usize,
    /// Inside rate (sbm/hbm) or expected degree (er).
    #[arg(long)]
    a: Option<f64>,
    /// Across rate (sbm/hbm).
    #[arg(long)]
    b: Option<f64>,
    /// Mean separation (gbm/hbm).
    #[arg(long)]
    s: Option<f64>,
    /// Connection radius scale (gbm/hbm).
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    h1: Option<f64>,
    #[arg(long)]
    h2: Option<f64>,
    /// Degree (regular model).
    #[arg(long)]
    d: Option<usize>,
    /// Prior vector as JSON (general SBM).
    #[arg(long)]
    p: Option<String>,
    /// Connectivity matrix as JSON (general SBM).
    #[arg(long)]
    w: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes PREFIX.edges, PREFIX.labels, PREFIX.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    output: PathBuf,
    /// Proceed even when the powered graph is projected to be huge.
    #[arg(long, default_value_t = false)]
    guard_override: bool,
}

#[derive(Args)]
struct CleanArgs {
    #[arg(long)]
    input: PathBuf,
    /// Degree cap; unbounded when omitted.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    output: PathBuf,
    /// Where to write the cleaning report (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodKind {
    Adjacency,
    Laplacian,
    NormalizedLaplacian,
    RandomWalk,
    Nonbacktracking,
    PoweredAdjacency,
    PoweredNonbacktracking,
    DistanceMatrix,
    Meta,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth labels; agreement reported when given.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: MethodKind,
    /// Fixed powering order for powered kinds / meta override.
    #[arg(long)]
    r: Option<usize>,
    /// Powering order as a fraction of the diameter.
    #[arg(long)]
    r_frac_diam: Option<f64>,
    /// Degree cap for the meta pipeline.
    #[arg(long)]
    tau: Option<f64>,
    /// Coefficient of the meta pipeline's r-rule.
    #[arg(long)]
    c: Option<f64>,
    /// Use the sqrt(diam) rule instead of c*ln^3(diam) in the meta pipeline.
    #[arg(long, default_value_t = false)]
    sqrt_rule: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Partition output (one community id per line).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BpAlgo {
    Bp,
    Adjusted,
    Linearized,
    AdjustedLinearized,
    Path,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitKind {
    Prior,
    Random,
    HighDegree,
}

#[derive(Args)]
struct BpArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: BpAlgo,
    #[arg(long, default_value_t = 5)]
    t: usize,
    #[arg(long, value_enum, default_value_t = InitKind::Random)]
    init: InitKind,
    /// Perturbation size for the random initializer.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Model rate inside communities.
    #[arg(long)]
    a: f64,
    /// Model rate across communities.
    #[arg(long)]
    b: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-vertex beliefs output (k probabilities per line).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyBoundsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    if let Ok(threads) = std::env::var("POWERGRAPH_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        } else {
            eprintln!("ignoring unparsable POWERGRAPH_THREADS = {threads}");
        }
    }

    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Power(args) => power(args),
        Command::Clean(args) => clean(args),
        Command::Cluster(args) => cluster(args),
        Command::Bp(args) => run_bp(args),
        Command::VerifyBounds(args) => verify_bounds(args),
        Command::Sweep(args) => sweep(args),
        Command::Summarize(args) => summarize(args),
    }
}

fn require<T: Copy>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParams(format!("--{name} is required for this model")))
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let edges_path = args.out.with_extension("edges");
    let labels_path = args.out.with_extension("labels");
    let meta_path = args.out.with_extension("json");
    let mut meta = serde_json::json!({ "n": args.n, "seed": args.seed });

    let (graph, labels, locations) = match args.model {
        ModelKind::Er => {
            let d = require(args.a, "a")?;
            meta["model"] = "er".into();
            meta["d"] = d.into();
            (generators::gen_er(args.n, d, args.seed)?, None, None)
        }
        ModelKind::Sbm => {
            let a = require(args.a, "a")?;
            let b = require(args.b, "b")?;
            meta["model"] = "sbm".into();
            meta["a"] = a.into();
            meta["b"] = b.into();
            meta["snr"] = generators::snr(a, b).into();
            let lg = generators::gen_sbm_sym(args.n, a, b, args.seed)?;
            (lg.graph, Some(lg.labels), None)
        }
        ModelKind::SbmGeneral => {
            let p: Vec<f64> = serde_json::from_str(
                args.p.as_deref().ok_or_else(|| Error::InvalidParams("--p required".into()))?,
            )?;
            let w: Vec<Vec<f64>> = serde_json::from_str(
                args.w.as_deref().ok_or_else(|| Error::InvalidParams("--w required".into()))?,
            )?;
            meta["model"] = "sbm_general".into();
            meta["p"] = serde_json::to_value(&p)?;
            meta["w"] = serde_json::to_value(&w)?;
            let lg = generators::gen_sbm_general(&SbmParams { n: args.n, p, w }, args.seed)?;
            (lg.graph, Some(lg.labels), None)
        }
        ModelKind::Gbm => {
            let s = require(args.s, "s")?;
            let t = require(args.t, "t")?;
            meta["model"] = "gbm".into();
            meta["s"] = s.into();
            meta["t"] = t.into();
            let lg = generators::gen_gbm(&GbmParams { n: args.n, s, t }, args.seed)?;
            (lg.graph, Some(lg.labels), lg.locations)
        }
        ModelKind::Hbm => {
            let params = HbmParams {
                n: args.n,
                a: require(args.a, "a")?,
                b: require(args.b, "b")?,
                s: require(args.s, "s")?,
                t: require(args.t, "t")?,
                h1: require(args.h1, "h1")?,
                h2: require(args.h2, "h2")?,
            };
            meta["model"] = "hbm".into();
            meta["a"] = params.a.into();
            meta["b"] = params.b.into();
            meta["s"] = params.s.into();
            meta["t"] = params.t.into();
            meta["h1"] = params.h1.into();
            meta["h2"] = params.h2.into();
            let lg = generators::gen_hbm(&params, args.seed)?;
            (lg.graph, Some(lg.labels), lg.locations)
        }
        ModelKind::Regular => {
            let d = require(args.d, "d")?;
            meta["model"] = "regular".into();
            meta["d"] = d.into();
            (generators::gen_random_regular(args.n, d, args.seed)?, None, None)
        }
    };

    io::write_edge_list(&edges_path, &graph)?;
    meta["edges"] = graph.m().into();
    meta["edge_file"] = edges_path.display().to_string().into();
    if let Some(labels) = labels {
        io::write_labels(&labels_path, &labels)?;
        meta["label_file"] = labels_path.display().to_string().into();
    }
    if let Some(locations) = locations {
        meta["locations"] = serde_json::to_value(locations)?;
    }
    io::write_json(&meta_path, &meta)?;
    println!("wrote {} and {}", edges_path.display(), meta_path.display());
    Ok(ExitCode::SUCCESS)
}

/// Estimated powered adjacency size from a BFS sample, to catch runaway
/// densification before committing to it.
fn projected_powered_entries(g: &Graph, r: usize) -> f64 {
    let sample = 32.min(g.n().max(1));
    let mut total = 0f64;
    for i in 0..sample {
        let v = i * g.n() / sample;
        if let Ok(ball) = g.bfs_distances(v, r) {
            total += ball.len() as f64;
        }
    }
    total / sample as f64 * g.n() as f64
}

fn power(args: PowerArgs) -> Result<ExitCode> {
    let g = io::read_graph(&args.input)?;
    const GUARD_ENTRIES: f64 = 2e8;
    if !args.guard_override {
        let projected = projected_powered_entries(&g, args.r);
        if projected > GUARD_ENTRIES {
            return Err(Error::TooLarge(format!(
                "projected ~{projected:.2e} powered adjacency entries exceed {GUARD_ENTRIES:.0e}; \
                 rerun with --guard-override to proceed"
            )));
        }
    }
    let powered = powergraph::operators::graph_power(&g, args.r)?;
    io::write_edge_list(&args.output, &powered)?;
    println!("powered {} vertices: {} -> {} edges", powered.n(), g.m(), powered.m());
    Ok(ExitCode::SUCCESS)
}

fn clean(args: CleanArgs) -> Result<ExitCode> {
    let g = io::read_graph(&args.input)?;
    let tau = args.tau.unwrap_or(f64::INFINITY);
    let (cleaned, report) = pipeline::clean(&g, tau, args.r)?;
    io::write_edge_list(&args.output, &cleaned)?;
    let json = serde_json::to_value(&report)?;
    match &args.report {
        Some(path) => io::write_json(path, &json)?,
        None => println!("{}", serde_json::to_string_pretty(&json)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn cluster(args: ClusterArgs) -> Result<ExitCode> {
    let g = Arc::new(io::read_graph(&args.input)?);
    let r = match (args.r, args.r_frac_diam) {
        (Some(r), None) => RChoice::Fixed(r),
        (None, Some(f)) => RChoice::FracDiam(f),
        (None, None) => RChoice::FracDiam(0.4),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParams("give either --r or --r-frac-diam".into()))
        }
    };
    let method = match args.method {
        MethodKind::Adjacency => Method::Adjacency,
        MethodKind::Laplacian => Method::Laplacian,
        MethodKind::NormalizedLaplacian => Method::NormalizedLaplacian,
        MethodKind::RandomWalk => Method::RandomWalk,
        MethodKind::Nonbacktracking => Method::Nonbacktracking,
        MethodKind::PoweredAdjacency => Method::PoweredAdjacency { r },
        MethodKind::PoweredNonbacktracking => Method::PoweredNonbacktracking { r },
        MethodKind::DistanceMatrix => Method::DistanceMatrix { r },
        MethodKind::Meta => {
            let rule = if args.sqrt_rule {
                RRule::SqrtDiam
            } else {
                RRule::LogCube { c: args.c.unwrap_or(pipeline::DEFAULT_POWERING_COEFF) }
            };
            Method::Meta { params: PsiParams { tau: args.tau, rule, r_override: args.r } }
        }
    };
    let out = spectral::spectral_cluster(&g, &method, args.tol, args.max_iter, args.seed)?;
    io::write_labels(&args.out, out.partition.labels())?;
    let mut metrics = serde_json::json!({
        "eigenvalues": out.eigenvalues,
        "residuals": out.residuals,
        "r_used": out.r_used,
        "degenerate": out.partition.is_degenerate(),
        "partition_file": args.out.display().to_string(),
    });
    if let Some(report) = &out.cleaning {
        metrics["cleaning"] = serde_json::to_value(report)?;
    }
    if let Some(labels_path) = &args.labels {
        let labels = io::read_labels(labels_path)?;
        let k = labels.iter().copied().max().unwrap_or(1).max(2) as usize;
        let truth = Partition::new(labels, k)?;
        let guess = Partition::new(out.partition.labels().to_vec(), k)?;
        metrics["agreement"] = spectral::agreement(&truth, &guess)?.into();
    }
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(ExitCode::SUCCESS)
}

fn run_bp(args: BpArgs) -> Result<ExitCode> {
    let g = io::read_graph(&args.input)?;
    let params = ModelParams::sbm_sym(g.n(), args.a, args.b)?;
    let init = match args.init {
        InitKind::Prior => BpInit::Prior,
        InitKind::Random => BpInit::Random { delta: args.delta },
        InitKind::HighDegree => BpInit::HighDegree,
    };
    let q0 = bp::init_beliefs(&g, &params, init, args.seed)?;
    let state = match args.algo {
        BpAlgo::Bp => bp::bp(args.t, &q0, &params, &g)?,
        BpAlgo::Adjusted => bp::adjusted_bp(args.t, &q0, &params, &g)?,
        BpAlgo::Linearized => bp::linearized_bp(args.t, &q0, &params, &g)?,
        BpAlgo::AdjustedLinearized => bp::adjusted_linearized_bp(args.t, &q0, &params, &g)?,
        BpAlgo::Path => bp::path_bp(args.t, &bp::PathBeliefs::new(), &params, &g)?,
    };

    {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
        for v in 0..g.n() {
            let row: Vec<String> =
                state.vertex_belief(v).iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }

    let hard: Vec<u32> = (0..g.n())
        .map(|v| {
            state
                .vertex_belief(v)
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .map(|(i, _)| i as u32 + 1)
                .unwrap_or(1)
        })
        .collect();
    let mut metrics = serde_json::json!({
        "t": args.t,
        "signed": state.signed,
        "normalization_error": state.normalization_error(),
        "beliefs_file": args.out.display().to_string(),
    });
    if let Some(labels_path) = &args.labels {
        let labels = io::read_labels(labels_path)?;
        let truth = Partition::new(labels, 2)?;
        let guess = Partition::new(hard, 2)?;
        metrics["agreement"] = spectral::agreement(&truth, &guess)?.into();
    }
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(ExitCode::SUCCESS)
}

fn verify_bounds(args: VerifyBoundsArgs) -> Result<ExitCode> {
    let g = io::read_graph(&args.input)?;
    let report = bounds::check_lambda_inequality(&g, args.r, args.k)?;
    println!("{}", serde_json::to_string_pretty(&serde_json::to_value(&report)?)?);
    if report.inequality_holds {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(3))
    }
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.config)?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    let rows = experiments::run_sweep(&config)?;
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} rows in {} ({errors} errors), determinism hash {}",
        rows.len(),
        config.output.display(),
        experiments::determinism_hash(&rows)
    );
    Ok(ExitCode::SUCCESS)
}

fn summarize(args: SummarizeArgs) -> Result<ExitCode> {
    let rows = experiments::read_rows(&args.input)?;
    let summary = experiments::summarize(&rows);
    experiments::write_summary(&args.out, &summary)?;
    println!("{} cells -> {}", summary.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
