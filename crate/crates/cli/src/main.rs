use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wsbm_cli::analyze::{analyze, likelihood_csv, mismatch_csv, overlap_csv, AnalyzeOptions};
use wsbm_cli::average_networks;
use wsbm_cli::config::{parse_grid, parse_k_range, ExperimentConfig, InitMethod, OneOrMany};
use wsbm_cli::sweep::{run_sweep, to_csv, to_timing_csv};
use wsbm_core::error::{Error, Result};
use wsbm_core::init::{db_init, oracle_init, spectral_init, OracleMode, OracleSpec};
use wsbm_core::io::{
    read_edge_list_tsv, read_labels_csv, read_matrix_csv, write_labels_csv, write_matrix_csv,
};
use wsbm_core::model::{
    sample_robustness_network, sample_wsbm, BlockParams, EdgeDistributionSpec, LabelAssignment,
};
use wsbm_core::pl::{pl_fit, FitOptions};
use wsbm_core::theory::{balanced_bounds, bound_heatmap, unbalanced_bounds};
use wsbm_core::{homogeneous_params, loss_with_permutation, overlap_table};

#[derive(Parser)]
#[command(
    name = "wsbm",
    version,
    about = "Pseudo-likelihood community detection for weighted networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a network from the weighted block model and write it as CSV.
    Generate(GenerateArgs),
    /// Fit community labels to a weight matrix.
    Fit(FitArgs),
    /// Run a replication sweep from a JSON config.
    Simulate(SimulateArgs),
    /// Evaluate the theoretical error bounds.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Fit a matrix across a range of K and compare methods.
    Analyze(AnalyzeArgs),
    /// Misclassification loss between two labelings.
    Eval(EvalArgs),
    /// Overlap table of an estimated against a reference partition.
    Overlap(OverlapArgs),
    /// Entrywise mean of several weight matrices.
    Average(AverageArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Comma-separated community proportions; uniform when omitted.
    #[arg(long)]
    pi: Option<String>,
    /// Within-community mean (gaussian generator).
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Between-community mean (gaussian generator).
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// gaussian, heavy-tail or bimodal.
    #[arg(long, default_value = "gaussian")]
    generator: String,
    /// Mixing weight for the heavy-tail generator.
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    /// Second within-mode mean for the bimodal generator.
    #[arg(long, default_value_t = 0.3)]
    b_param: f64,
    /// Use exact community sizes instead of i.i.d. label draws.
    #[arg(long)]
    balanced: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output matrix CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional output path for the true labels.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, conflicts_with = "edge_list")]
    matrix: Option<PathBuf>,
    /// Read the network from a TSV edge list instead of a CSV matrix.
    #[arg(long)]
    edge_list: Option<PathBuf>,
    #[arg(long)]
    k: usize,
    /// spectral, db[:L], oracle:<g,...> or labels:<file>.
    #[arg(long, default_value = "spectral")]
    init: String,
    /// Reference labels; required by oracle initializers.
    #[arg(long)]
    ref_labels: Option<PathBuf>,
    #[arg(long, alias = "T", default_value_t = 20)]
    t: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    inner_max: usize,
    #[arg(long, default_value_t = wsbm_core::DEFAULT_RESTARTS)]
    restarts: usize,
    /// DB discretization level override.
    #[arg(long)]
    level: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's node count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, alias = "T")]
    t: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Override the init method list (comma-separated).
    #[arg(long)]
    init: Option<String>,
    /// Optional path for the (non-reproducible) timing table.
    #[arg(long)]
    timing_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Consistency bounds for balanced communities.
    Balanced(BalancedArgs),
    /// Misclassification bounds for two unbalanced communities.
    Unbalanced(UnbalancedArgs),
    /// Heatmap of the log expected-error bound over |a-b| and delta.
    Heatmap(HeatmapArgs),
}

#[derive(Args)]
struct BalancedArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: f64,
    #[arg(long)]
    a: f64,
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UnbalancedArgs {
    /// pi1,pi2
    #[arg(long)]
    pi: String,
    /// gamma1,gamma2
    #[arg(long)]
    gamma: String,
    #[arg(long)]
    a: f64,
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    ahat: Option<f64>,
    #[arg(long)]
    bhat: Option<f64>,
    #[arg(long)]
    sigma2hat: Option<f64>,
    #[arg(long)]
    n: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    /// pi1,pi2
    #[arg(long, default_value = "0.5,0.5")]
    pi: String,
    /// gamma1,gamma2
    #[arg(long)]
    gamma: String,
    #[arg(long, default_value_t = 100.0)]
    n: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// |a-b| grid: comma list or lo:step:hi.
    #[arg(long)]
    ab_grid: String,
    /// delta grid: comma list or lo:step:hi.
    #[arg(long)]
    delta_grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, conflicts_with = "edge_list")]
    matrix: Option<PathBuf>,
    #[arg(long)]
    edge_list: Option<PathBuf>,
    /// Inclusive K range lo:hi.
    #[arg(long, default_value = "2:20")]
    k_range: String,
    /// Comma-separated subset of sc, db, pl-sc, pl-db.
    #[arg(long, default_value = "sc,db,pl-sc,pl-db")]
    methods: String,
    #[arg(long)]
    ref_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, alias = "T", default_value_t = 20)]
    t: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    inner_max: usize,
    #[arg(long, default_value_t = wsbm_core::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long)]
    level: Option<usize>,
    /// Output directory for the result bundle.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated labels file.
    #[arg(long)]
    labels: PathBuf,
    /// Reference labels file.
    #[arg(long)]
    ref_labels: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OverlapArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    ref_labels: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AverageArgs {
    /// Input matrices (repeat the flag).
    #[arg(long, required = true)]
    matrix: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Parse(format!("{what} must be two comma-separated values")));
    }
    let a: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {:?}", parts[0])))?;
    let b: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {:?}", parts[1])))?;
    Ok((a, b))
}

fn parse_pi_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad pi value {tok:?}")))
        })
        .collect()
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, contents)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents.as_bytes())?;
        }
    }
    Ok(())
}

fn load_network(matrix: Option<&Path>, edge_list: Option<&Path>) -> Result<wsbm_core::WeightedNetwork> {
    match (matrix, edge_list) {
        (Some(path), None) => read_matrix_csv(path),
        (None, Some(path)) => read_edge_list_tsv(path, None),
        _ => Err(Error::invalid_input(
            "provide exactly one of --matrix or --edge-list",
        )),
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let pi = match &args.pi {
        Some(text) => parse_pi_list(text)?,
        None => vec![1.0 / args.k as f64; args.k],
    };
    if pi.len() != args.k {
        return Err(Error::invalid_parameter(format!(
            "pi has {} entries but k = {}",
            pi.len(),
            args.k
        )));
    }
    let assignment = if args.balanced {
        LabelAssignment::FixedCounts
    } else {
        LabelAssignment::Multinomial
    };
    let (w, labels) = match args.generator.as_str() {
        "gaussian" => {
            let (b_mean, s2) = homogeneous_params(args.k, args.a, args.b, args.sigma2)?;
            let params = BlockParams::new(pi, b_mean, s2)?;
            sample_wsbm(args.n, &params, assignment, args.seed)?
        }
        "heavy-tail" => {
            let spec = EdgeDistributionSpec::heavy_tail(args.alpha);
            sample_robustness_network(args.n, &pi, &spec, assignment, args.seed)?
        }
        "bimodal" => {
            let spec = EdgeDistributionSpec::Bimodal {
                b_param: args.b_param,
            };
            sample_robustness_network(args.n, &pi, &spec, assignment, args.seed)?
        }
        other => {
            return Err(Error::invalid_parameter(format!(
                "unknown generator {other:?}"
            )))
        }
    };
    write_matrix_csv(&args.out, &w)?;
    if let Some(path) = &args.labels {
        write_labels_csv(path, &labels)?;
    }
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let w = load_network(args.matrix.as_deref(), args.edge_list.as_deref())?;
    let method = InitMethod::parse(&args.init)?;
    let mut level_used: Option<usize> = None;
    let e0 = match &method {
        InitMethod::Spectral => spectral_init(&w, args.k, args.restarts, args.seed)?,
        InitMethod::Db { level } => {
            let db = db_init(&w, args.k, level.or(args.level), args.restarts, args.seed)?;
            level_used = Some(db.level);
            db.labels
        }
        InitMethod::Oracle { gamma } => {
            let truth_path = args.ref_labels.as_ref().ok_or_else(|| {
                Error::invalid_input("oracle initializer needs --ref-labels with the true labels")
            })?;
            let truth = read_labels_csv(truth_path)?;
            let gamma = if gamma.len() == 1 {
                vec![gamma[0]; truth.k()]
            } else {
                gamma.clone()
            };
            let spec = OracleSpec {
                gamma,
                mode: OracleMode::BalancedSpread,
            };
            oracle_init(&truth, &spec, args.seed)?.0
        }
        InitMethod::LabelsFile { path } => read_labels_csv(Path::new(path))?,
    };
    if e0.len() != w.n() {
        return Err(Error::invalid_input(format!(
            "initial labeling has {} entries but the matrix has n = {}",
            e0.len(),
            w.n()
        )));
    }
    if e0.k() != args.k {
        return Err(Error::invalid_input(format!(
            "initial labeling has K = {} but --k {}",
            e0.k(),
            args.k
        )));
    }
    let opts = FitOptions {
        outer_iters: args.t,
        inner_tol: args.tol,
        inner_max: args.inner_max,
    };
    let fit = pl_fit(&w, &e0, args.k, &opts)?;
    let mut value = serde_json::to_value(fit.json_view())
        .map_err(|e| Error::Parse(format!("serialize: {e}")))?;
    if let Some(level) = level_used {
        value["db_level"] = json!(level);
    }
    let text = format!("{}\n", serde_json::to_string_pretty(&value).unwrap());
    emit(args.out.as_deref(), &text)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(n) = args.n {
        cfg.n = OneOrMany::One(n);
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(reps) = args.reps {
        cfg.replications = reps;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Some(t) = args.t {
        cfg.t = t;
    }
    if let Some(tol) = args.tol {
        cfg.inner_tol = tol;
    }
    if let Some(init) = &args.init {
        cfg.init = init.split(',').map(|s| s.trim().to_string()).collect();
    }
    let result = run_sweep(&cfg)?;
    if let Some(path) = &args.timing_out {
        fs::write(path, to_timing_csv(&result))?;
    }
    emit(args.out.as_deref(), &to_csv(&result))
}

fn cmd_bounds(cmd: &BoundsCommand) -> Result<()> {
    match cmd {
        BoundsCommand::Balanced(args) => {
            let report = balanced_bounds(args.k, args.n, args.a, args.b, args.sigma2, args.gamma)?;
            let text = format!("{}\n", serde_json::to_string_pretty(&report).unwrap());
            emit(args.out.as_deref(), &text)
        }
        BoundsCommand::Unbalanced(args) => {
            let pi = parse_pair(&args.pi, "--pi")?;
            let gamma = parse_pair(&args.gamma, "--gamma")?;
            let report = unbalanced_bounds(
                pi,
                gamma,
                (args.a, args.b, args.sigma2),
                (
                    args.ahat.unwrap_or(args.a),
                    args.bhat.unwrap_or(args.b),
                    args.sigma2hat.unwrap_or(args.sigma2),
                ),
                args.n,
            )?;
            let text = format!("{}\n", serde_json::to_string_pretty(&report).unwrap());
            emit(args.out.as_deref(), &text)
        }
        BoundsCommand::Heatmap(args) => {
            let pi = parse_pair(&args.pi, "--pi")?;
            let gamma = parse_pair(&args.gamma, "--gamma")?;
            let ab = parse_grid(&args.ab_grid)?;
            let delta = parse_grid(&args.delta_grid)?;
            let map = bound_heatmap(pi, gamma, args.n, args.sigma2, &ab, &delta)?;
            let mut out = String::from("delta");
            for v in &map.ab_grid {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
            for (di, d) in map.delta_grid.iter().enumerate() {
                out.push_str(&format!("{d}"));
                for ai in 0..map.ab_grid.len() {
                    match map.cell(di, ai) {
                        Some(v) => out.push_str(&format!(",{v}")),
                        None => out.push_str(",NA"),
                    }
                }
                out.push('\n');
            }
            emit(args.out.as_deref(), &out)
        }
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let w = load_network(args.matrix.as_deref(), args.edge_list.as_deref())?;
    let (k_min, k_max) = parse_k_range(&args.k_range)?;
    let reference = match &args.ref_labels {
        Some(path) => Some(read_labels_csv(path)?),
        None => None,
    };
    let opts = AnalyzeOptions {
        k_min,
        k_max,
        methods: args
            .methods
            .split(',')
            .map(|s| s.trim().to_string())
            .collect(),
        seed: args.seed,
        t: args.t,
        inner_tol: args.tol,
        inner_max: args.inner_max,
        restarts: args.restarts,
        level: args.level,
    };
    let bundle = analyze(&w, &opts, reference.as_ref())?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("config.json"), format!("{}\n", bundle.options_json))?;
    fs::write(args.out.join("likelihood.csv"), likelihood_csv(&bundle))?;
    fs::write(args.out.join("mismatch.csv"), mismatch_csv(&bundle))?;
    if reference.is_some() {
        fs::write(args.out.join("overlap.csv"), overlap_csv(&bundle))?;
    }
    for (k, method, labels) in &bundle.labels {
        let path = args.out.join(format!("labels_{method}_K{k}.csv"));
        write_labels_csv(path, labels)?;
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let est = read_labels_csv(&args.labels)?;
    let reference = read_labels_csv(&args.ref_labels)?;
    let (loss, perm, counts) = loss_with_permutation(&est, &reference)?;
    let k = counts.rows();
    let counts_rows: Vec<Vec<u64>> = (0..k)
        .map(|i| counts.row(i).iter().map(|&v| v as u64).collect())
        .collect();
    let permutation: Vec<usize> = perm.iter().map(|&c| c + 1).collect();
    let value = json!({
        "loss": loss,
        "permutation": permutation,
        "confusion_counts": counts_rows,
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&value).unwrap());
    emit(args.out.as_deref(), &text)
}

fn cmd_overlap(args: &OverlapArgs) -> Result<()> {
    let est = read_labels_csv(&args.labels)?;
    let reference = read_labels_csv(&args.ref_labels)?;
    let rows = overlap_table(&est, &reference)?;
    let mut out = String::from("est,ref_list,overlap\n");
    for row in rows {
        let refs = row
            .best_ref_communities
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(";");
        match row.overlap {
            Some(v) => out.push_str(&format!("{},{refs},{v}\n", row.est_community)),
            None => out.push_str(&format!("{},,NA\n", row.est_community)),
        }
    }
    emit(args.out.as_deref(), &out)
}

fn cmd_average(args: &AverageArgs) -> Result<()> {
    let networks: Result<Vec<_>> = args.matrix.iter().map(read_matrix_csv).collect();
    let avg = average_networks(&networks?)?;
    write_matrix_csv(&args.out, &avg)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bounds(cmd) => cmd_bounds(cmd),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Overlap(args) => cmd_overlap(args),
        Command::Average(args) => cmd_average(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
