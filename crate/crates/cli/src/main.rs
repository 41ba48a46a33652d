use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use gcorr::community::{block_estimation, EstimationOptions};
use gcorr::error::Error;
use gcorr::experiments::{
    default_k_list, default_n_grid, k_sweep, power_grid, reproduce_power, reproduce_statistics,
    PowerFigure, PowerGridOptions, StatSweepOptions,
};
use gcorr::graph::AdjacencyMatrix;
use gcorr::inference::{pvalue_test, pvalue_test_with_assignment, TestOptions};
use gcorr::io;
use gcorr::model::{GraphModel, Setting};
use gcorr::rng::stream;
use gcorr::statistics::{graph_correlation, Method};

#[derive(Debug, Parser, Serialize)]
#[command(name = "gcorr", version, about = "Correlation testing for vertex-matched graph pairs")]
struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Draw a correlated graph pair from a block model.
    Sample(SampleArgs),
    /// Compute a graph correlation statistic.
    Stat(StatArgs),
    /// Estimate a shared community assignment.
    Embed(EmbedArgs),
    /// Block-permutation test of independence.
    Test(TestArgs),
    /// Monte Carlo power of the test for a model file.
    Power(PowerArgs),
    /// Regenerate the simulation tables.
    Reproduce(ReproduceArgs),
    /// Match two edge-list graphs on their shared vertices.
    Ingest(IngestArgs),
    /// Test statistics and permutation nulls across block counts.
    Ksweep(KsweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelKind {
    Bernoulli,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Dense,
    Edges,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Pearson,
    Dcorr,
    Mgc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pearson => Method::Pearson,
            MethodArg::Dcorr => Method::Dcorr,
            MethodArg::Mgc => Method::Mgc,
        }
    }
}

fn methods(list: &[MethodArg]) -> Vec<Method> {
    if list.is_empty() {
        Method::ALL.to_vec()
    } else {
        list.iter().map(|&m| m.into()).collect()
    }
}

#[derive(Debug, Args, Serialize)]
struct SampleArgs {
    /// JSON model file; replaces the block-parameter flags.
    #[arg(long, conflicts_with_all = ["model", "bx", "by", "mux", "muy", "sigx", "sigy", "proportions"])]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bernoulli")]
    model: ModelKind,
    #[arg(long)]
    n: usize,
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    /// Expected block count; checked against the parameter files.
    #[arg(long)]
    k: Option<usize>,
    /// k x k edge probabilities of the first graph (CSV).
    #[arg(long)]
    bx: Option<PathBuf>,
    #[arg(long)]
    by: Option<PathBuf>,
    /// k x k edge means of the first graph (CSV).
    #[arg(long)]
    mux: Option<PathBuf>,
    #[arg(long)]
    muy: Option<PathBuf>,
    /// k x k edge standard deviations (CSV, default all ones).
    #[arg(long)]
    sigx: Option<PathBuf>,
    #[arg(long)]
    sigy: Option<PathBuf>,
    /// Relative block sizes (default equal).
    #[arg(long, value_delimiter = ',')]
    proportions: Vec<f64>,
    #[arg(long, value_enum, default_value = "dense")]
    format: Format,
    /// File name prefix inside the output directory.
    #[arg(long, default_value = "")]
    prefix: String,
}

#[derive(Debug, Args, Serialize)]
struct PairArgs {
    /// First graph (dense CSV or source,target,weight edge list).
    a: PathBuf,
    b: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct StatArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum, default_value = "pearson")]
    method: MethodArg,
}

#[derive(Debug, Args, Serialize)]
struct EstimationArgs {
    /// Embedding dimension (default: elbow of the joint spectrum).
    #[arg(long)]
    d: Option<usize>,
    /// Block count (default: chosen by BIC).
    #[arg(long)]
    k: Option<usize>,
    /// Largest block count tried by BIC (default: floor(sqrt(n))).
    #[arg(long)]
    kmax: Option<usize>,
}

impl EstimationArgs {
    fn options(&self) -> EstimationOptions {
        EstimationOptions {
            k: self.k,
            kmax: self.kmax,
            d: self.d,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct EmbedArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    estimation: EstimationArgs,
}

#[derive(Debug, Args, Serialize)]
struct TestArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum, default_value = "pearson")]
    method: MethodArg,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    /// Known vertex,label assignment; skips estimation.
    #[arg(long, conflicts_with_all = ["d", "k", "kmax"])]
    assignment: Option<PathBuf>,
    #[command(flatten)]
    estimation: EstimationArgs,
}

#[derive(Debug, Args, Serialize)]
struct PowerArgs {
    /// JSON model file.
    spec: PathBuf,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,0.1,-0.1")]
    rho: Vec<f64>,
    /// Vertex counts (default 10,20,...,100).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    /// Replicates for the naive Pearson t-test; 0 skips it.
    #[arg(long, default_value_t = 5000)]
    naive_replicates: usize,
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Figure {
    Fig1,
    Fig3,
    Fig4,
}

#[derive(Debug, Args, Serialize)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: Figure,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    /// Vertex count for the statistic sweep.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Points in each correlation grid of the statistic sweep.
    #[arg(long, default_value_t = 11)]
    points: usize,
    /// Vertex counts for the power curves (default 10,20,...,100).
    #[arg(long, value_delimiter = ',')]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 5000)]
    naive_replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
}

#[derive(Debug, Args, Serialize)]
struct IngestArgs {
    /// Edge list of the first graph.
    a: PathBuf,
    b: PathBuf,
    /// Set every positive weight to one.
    #[arg(long)]
    binarize: bool,
    #[arg(long, value_enum, default_value = "dense")]
    format: Format,
}

#[derive(Debug, Args, Serialize)]
struct KsweepArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Block counts (default 2, 4, ... below n, then n).
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    seed: u64,
    version: &'static str,
    flags: &'a Cli,
}

struct Output<'a> {
    cli: &'a Cli,
}

impl Output<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cli.out.join(name)
    }

    fn sidecar(&self, path: &Path) -> anyhow::Result<()> {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".meta.json");
        let meta = Metadata {
            seed: self.cli.seed,
            version: env!("CARGO_PKG_VERSION"),
            flags: self.cli,
        };
        self.write_json_raw(&path.with_file_name(name), &meta)
    }

    fn write_json_raw<T: Serialize>(&self, path: &Path, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        self.write_json_raw(&self.path(name), value)
    }

    fn csv<F>(&self, name: &str, write: F) -> anyhow::Result<()>
    where
        F: FnOnce(BufWriter<File>) -> gcorr::error::Result<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write(BufWriter::new(file))?;
        self.sidecar(&path)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn rows<T: Serialize>(&self, name: &str, rows: &[T]) -> anyhow::Result<()> {
        self.csv(name, |w| io::write_csv(w, rows))
    }

    fn graph(&self, name: &str, g: &AdjacencyMatrix, format: Format) -> anyhow::Result<()> {
        match format {
            Format::Dense => self.csv(name, |w| io::write_dense(w, g.weights())),
            Format::Edges => self.csv(name, |w| io::write_edge_list(w, g)),
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn block_rows(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let m = io::read_block_matrix(File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
    Ok((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str, model: &str) -> anyhow::Result<&'a Path> {
    match p {
        Some(p) => Ok(p),
        None => Err(Error::InvalidParameter(format!("--{flag} is required for the {model} model")).into()),
    }
}

fn sample_setting(args: &SampleArgs) -> anyhow::Result<Setting> {
    if let Some(spec) = &args.spec {
        return read_setting(spec);
    }
    let model = match args.model {
        ModelKind::Bernoulli => GraphModel::Bernoulli {
            bx: block_rows(required(&args.bx, "bx", "bernoulli")?)?,
            by: block_rows(required(&args.by, "by", "bernoulli")?)?,
        },
        ModelKind::Gaussian => {
            let mux = block_rows(required(&args.mux, "mux", "gaussian")?)?;
            let ones = vec![vec![1.0; mux.len()]; mux.len()];
            let sig = |p: &Option<PathBuf>| p.as_deref().map_or(Ok(ones.clone()), block_rows);
            GraphModel::Gaussian {
                muy: block_rows(required(&args.muy, "muy", "gaussian")?)?,
                sigx: sig(&args.sigx)?,
                sigy: sig(&args.sigy)?,
                mux,
            }
        }
    };
    let k = model.k();
    let proportions = if args.proportions.is_empty() {
        vec![1.0; k]
    } else {
        args.proportions.clone()
    };
    Ok(Setting::new("cli", model, proportions))
}

fn read_setting(path: &Path) -> anyhow::Result<Setting> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let setting: Setting = serde_json::from_str(&text).map_err(Error::from)?;
    setting.validate()?;
    Ok(setting)
}

fn run_sample(out: &Output, seed: u64, args: &SampleArgs) -> anyhow::Result<()> {
    let setting = sample_setting(args)?;
    if let Some(k) = args.k {
        if k != setting.model.k() {
            return Err(Error::InvalidParameter(format!(
                "--k {k} but the block parameters have {} blocks",
                setting.model.k()
            ))
            .into());
        }
    }
    let (x, y, z) = setting.sample(args.n, args.rho, &mut stream(seed, &[]))?;
    out.graph(&format!("{}x.csv", args.prefix), &x, args.format)?;
    out.graph(&format!("{}y.csv", args.prefix), &y, args.format)?;
    out.csv(&format!("{}z.csv", args.prefix), |w| io::write_assignment(w, &z, None))
}

fn run_stat(args: &StatArgs) -> anyhow::Result<()> {
    let (x, y) = io::load_pair(&args.pair.a, &args.pair.b)?;
    print_json(&graph_correlation(&x, &y, args.method.into())?)
}

#[derive(Serialize)]
struct EmbedReport {
    d: usize,
    k: usize,
    bic: Vec<gcorr::community::BicEntry>,
}

fn run_embed(out: &Output, seed: u64, args: &EmbedArgs) -> anyhow::Result<()> {
    let (x, y) = io::load_pair(&args.pair.a, &args.pair.b)?;
    let est = block_estimation(&x, &y, &args.estimation.options(), &mut stream(seed, &[]))?;
    out.csv("assignment.csv", |w| io::write_assignment(w, &est.assignment, x.labels()))?;
    let report = EmbedReport {
        d: est.d,
        k: est.k,
        bic: est.bic,
    };
    out.json("embed.json", &report)?;
    print_json(&report)
}

fn run_test(out: &Output, seed: u64, args: &TestArgs) -> anyhow::Result<()> {
    let (x, y) = io::load_pair(&args.pair.a, &args.pair.b)?;
    let method = args.method.into();
    let result = match &args.assignment {
        Some(path) => {
            let (names, z) = io::read_assignment(File::open(path)?)?;
            if let Some(labels) = x.labels() {
                if labels != names.as_slice() {
                    bail!(Error::InvalidAssignment("vertex names differ from the graph's".into()));
                }
            }
            pvalue_test_with_assignment(&x, &y, &z, method, args.replicates, seed)?
        }
        None => {
            let mut opts = TestOptions::new(method, args.replicates, seed);
            opts.estimation = args.estimation.options();
            pvalue_test(&x, &y, &opts)?
        }
    };
    out.json("test.json", &result)?;
    print_json(&result)
}

fn run_power(out: &Output, seed: u64, args: &PowerArgs) -> anyhow::Result<()> {
    let setting = read_setting(&args.spec)?;
    let opts = PowerGridOptions {
        n_grid: if args.n.is_empty() { default_n_grid() } else { args.n.clone() },
        rhos: args.rho.clone(),
        replicates: args.replicates,
        naive_replicates: args.naive_replicates,
        alpha: args.alpha,
        methods: methods(&args.methods),
        seed,
    };
    out.rows("power.csv", &power_grid(&[setting], &opts)?)
}

fn run_reproduce(out: &Output, seed: u64, args: &ReproduceArgs) -> anyhow::Result<()> {
    match args.figure {
        Figure::Fig1 => {
            let opts = StatSweepOptions {
                n: args.n,
                replicates: args.replicates,
                points: args.points,
                methods: if args.methods.is_empty() {
                    vec![Method::Pearson, Method::Dcorr]
                } else {
                    methods(&args.methods)
                },
                seed,
            };
            out.rows("fig1.csv", &reproduce_statistics(&opts)?)
        }
        Figure::Fig3 | Figure::Fig4 => {
            let (figure, name) = match args.figure {
                Figure::Fig3 => (PowerFigure::Bernoulli, "fig3.csv"),
                _ => (PowerFigure::Gaussian, "fig4.csv"),
            };
            let opts = PowerGridOptions {
                n_grid: if args.n_grid.is_empty() { default_n_grid() } else { args.n_grid.clone() },
                replicates: args.replicates,
                naive_replicates: args.naive_replicates,
                alpha: args.alpha,
                methods: methods(&args.methods),
                seed,
                ..Default::default()
            };
            out.rows(name, &reproduce_power(figure, &opts)?)
        }
    }
}

#[derive(Serialize)]
struct VertexRow<'a> {
    index: usize,
    vertex: &'a str,
}

fn run_ingest(out: &Output, args: &IngestArgs) -> anyhow::Result<()> {
    let a = io::read_edge_list_file(&args.a)?;
    let b = io::read_edge_list_file(&args.b)?;
    let (x, y) = io::ingest_connectome(&a, &b, args.binarize)?;
    out.graph("x.csv", &x, args.format)?;
    out.graph("y.csv", &y, args.format)?;
    let names = x.labels().unwrap_or_default();
    let rows: Vec<VertexRow> = names
        .iter()
        .enumerate()
        .map(|(i, v)| VertexRow { index: i + 1, vertex: v })
        .collect();
    out.rows("vertices.csv", &rows)?;
    eprintln!("{} shared vertices", x.n());
    Ok(())
}

fn run_ksweep(out: &Output, seed: u64, args: &KsweepArgs) -> anyhow::Result<()> {
    let (x, y) = io::load_pair(&args.pair.a, &args.pair.b)?;
    let ks = if args.k.is_empty() { default_k_list(x.n()) } else { args.k.clone() };
    let estimation = EstimationOptions {
        d: args.d,
        ..Default::default()
    };
    let rows = k_sweep(&x, &y, &ks, args.replicates, &methods(&args.methods), seed, &estimation)?;
    out.rows("ksweep.csv", &rows)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = Output { cli };
    let seed = cli.seed;
    match &cli.command {
        Command::Sample(a) => run_sample(&out, seed, a),
        Command::Stat(a) => run_stat(a),
        Command::Embed(a) => run_embed(&out, seed, a),
        Command::Test(a) => run_test(&out, seed, a),
        Command::Power(a) => run_power(&out, seed, a),
        Command::Reproduce(a) => run_reproduce(&out, seed, a),
        Command::Ingest(a) => run_ingest(&out, a),
        Command::Ksweep(a) => run_ksweep(&out, seed, a),
    }
}

/// 3 for numerical failures, 2 for any other rejected input, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numeric() => 3,
        Some(Error::Io(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
