//! Replication sweeps over generator grids and initializers, with
//! scheduling-independent aggregation.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use wsbm_core::error::{Error, Result};
use wsbm_core::init::{db_init, oracle_init, spectral_init, OracleMode, OracleSpec};
use wsbm_core::model::{
    derive_stream, derive_substream, sample_robustness_network, sample_wsbm, BlockParams,
    LabelAssignment,
};
use wsbm_core::pl::{pl_fit, FitOptions};
use wsbm_core::{homogeneous_params, misclassification_loss, Labeling, WeightedNetwork};

use crate::config::{ExperimentConfig, GeneratorCell, InitMethod};

/// One aggregate output row: a grid cell crossed with a method (raw
/// initializer or its pseudo-likelihood fit).
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub generator: &'static str,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub alpha: Option<f64>,
    pub b_param: Option<f64>,
    pub sigma2: f64,
    pub init: String,
    pub method: String,
    pub mean_loss: f64,
    pub se_loss: f64,
    pub mean_fit_seconds: f64,
    pub reps: usize,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub config_json: String,
    pub rows: Vec<SweepRow>,
}

struct MethodOutcome {
    raw: Option<(f64, f64)>,
    fit: Option<(f64, f64)>,
}

fn generate_cell(
    cell: &GeneratorCell,
    n: usize,
    pi: &[f64],
    assignment: LabelAssignment,
    seed: u64,
) -> Result<(WeightedNetwork, Labeling)> {
    match cell {
        GeneratorCell::Gaussian { a, b, sigma2 } => {
            let (b_mean, s2) = homogeneous_params(pi.len(), *a, *b, *sigma2)?;
            let params = BlockParams::new(pi.to_vec(), b_mean, s2)?;
            sample_wsbm(n, &params, assignment, seed)
        }
        _ => sample_robustness_network(n, pi, &cell.to_edge_spec(), assignment, seed),
    }
}

fn build_initializer(
    method: &InitMethod,
    w: &WeightedNetwork,
    truth: &Labeling,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Labeling> {
    match method {
        InitMethod::Spectral => spectral_init(w, k, restarts, seed),
        InitMethod::Db { level } => Ok(db_init(w, k, *level, restarts, seed)?.labels),
        InitMethod::Oracle { gamma } => {
            let gamma = if gamma.len() == 1 {
                vec![gamma[0]; k]
            } else {
                gamma.clone()
            };
            // for K = 2 the even spread and the pairwise swap coincide
            let spec = OracleSpec {
                gamma,
                mode: OracleMode::BalancedSpread,
            };
            Ok(oracle_init(truth, &spec, seed)?.0)
        }
        InitMethod::LabelsFile { .. } => Err(Error::invalid_parameter(
            "labels-file initializer is not available in sweeps",
        )),
    }
}

/// Run one replication of one cell: every method's raw initializer loss and
/// pseudo-likelihood fit loss, with per-purpose derived seeds.
fn run_replication(
    cfg: &ExperimentConfig,
    cell: &GeneratorCell,
    n: usize,
    methods: &[(String, InitMethod)],
    rep: u64,
) -> Vec<MethodOutcome> {
    let pi = cfg.pi_vec();
    let assignment = if cfg.balanced_counts {
        LabelAssignment::FixedCounts
    } else {
        LabelAssignment::Multinomial
    };
    let rep_seed = derive_stream(cfg.master_seed, rep);
    let gen_seed = derive_substream(rep_seed, "generate");
    let opts = FitOptions {
        outer_iters: cfg.t,
        inner_tol: cfg.inner_tol,
        inner_max: cfg.inner_max,
    };
    let generated = generate_cell(cell, n, &pi, assignment, gen_seed);
    methods
        .iter()
        .map(|(spec, method)| {
            let (w, truth) = match &generated {
                Ok(pair) => pair,
                Err(_) => {
                    return MethodOutcome {
                        raw: None,
                        fit: None,
                    }
                }
            };
            let init_seed = derive_substream(rep_seed, &format!("init:{spec}"));
            let built = Instant::now();
            let e0 = match build_initializer(method, w, truth, cfg.k, cfg.restarts, init_seed) {
                Ok(e0) => e0,
                Err(_) => {
                    return MethodOutcome {
                        raw: None,
                        fit: None,
                    }
                }
            };
            let raw_seconds = built.elapsed().as_secs_f64();
            let raw_loss = misclassification_loss(&e0, truth).ok();
            let fit = pl_fit(w, &e0, cfg.k, &opts)
                .ok()
                .and_then(|f| {
                    misclassification_loss(&f.labels, truth)
                        .ok()
                        .map(|loss| (loss, f.wall_seconds))
                });
            MethodOutcome {
                raw: raw_loss.map(|l| (l, raw_seconds)),
                fit,
            }
        })
        .collect()
}

fn aggregate(samples: &[(f64, f64)], failures: usize) -> (f64, f64, f64, usize) {
    let reps = samples.len();
    if reps == 0 {
        return (f64::NAN, f64::NAN, f64::NAN, failures);
    }
    let mean_loss = samples.iter().map(|s| s.0).sum::<f64>() / reps as f64;
    let mean_secs = samples.iter().map(|s| s.1).sum::<f64>() / reps as f64;
    let se = if reps > 1 {
        let var = samples
            .iter()
            .map(|s| (s.0 - mean_loss) * (s.0 - mean_loss))
            .sum::<f64>()
            / (reps - 1) as f64;
        (var / reps as f64).sqrt()
    } else {
        0.0
    };
    (mean_loss, se, mean_secs, failures)
}

/// Run the full sweep. Replications execute in a dedicated thread pool of
/// `workers` threads (0 = one per core); per-replication seeds make the
/// aggregated output independent of scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let methods: Vec<(String, InitMethod)> = cfg
        .init
        .iter()
        .map(|spec| InitMethod::parse(spec).map(|m| (spec.clone(), m)))
        .collect::<Result<_>>()?;
    let cells = cfg.generator.cells()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid_parameter(format!("worker pool: {e}")))?;

    let mut rows = Vec::new();
    for &n in &cfg.n.as_vec() {
        for cell in &cells {
            let outcomes: Vec<Vec<MethodOutcome>> = pool.install(|| {
                (0..cfg.replications as u64)
                    .into_par_iter()
                    .map(|rep| run_replication(cfg, cell, n, &methods, rep))
                    .collect()
            });
            for (mi, (spec, method)) in methods.iter().enumerate() {
                let raw_samples: Vec<(f64, f64)> = outcomes
                    .iter()
                    .filter_map(|reps| reps[mi].raw)
                    .collect();
                let fit_samples: Vec<(f64, f64)> = outcomes
                    .iter()
                    .filter_map(|reps| reps[mi].fit)
                    .collect();
                let raw_failures = cfg.replications - raw_samples.len();
                let fit_failures = cfg.replications - fit_samples.len();

                let (a, b, alpha, b_param) = match *cell {
                    GeneratorCell::Gaussian { a, b, .. } => (Some(a), Some(b), None, None),
                    GeneratorCell::HeavyTail { alpha, .. } => (None, None, Some(alpha), None),
                    GeneratorCell::Bimodal { b_param } => (None, None, None, Some(b_param)),
                };
                let base = SweepRow {
                    n,
                    k: cfg.k,
                    generator: cell.kind(),
                    a,
                    b,
                    alpha,
                    b_param,
                    sigma2: cell.sigma2(),
                    init: spec.clone(),
                    method: String::new(),
                    mean_loss: f64::NAN,
                    se_loss: f64::NAN,
                    mean_fit_seconds: f64::NAN,
                    reps: 0,
                    failures: 0,
                };

                let (mean, se, secs, failures) = aggregate(&raw_samples, raw_failures);
                rows.push(SweepRow {
                    method: method.raw_name(spec),
                    mean_loss: mean,
                    se_loss: se,
                    mean_fit_seconds: secs,
                    reps: raw_samples.len(),
                    failures,
                    ..base.clone()
                });

                let (mean, se, secs, failures) = aggregate(&fit_samples, fit_failures);
                rows.push(SweepRow {
                    method: format!("pl-{}", method.raw_name(spec)),
                    mean_loss: mean,
                    se_loss: se,
                    mean_fit_seconds: secs,
                    reps: fit_samples.len(),
                    failures,
                    ..base
                });
            }
        }
    }
    Ok(SweepResult {
        config_json: cfg.to_json(),
        rows,
    })
}

fn push_opt(line: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(line, "{v}");
    }
}

/// Render the sweep results as CSV, leading with a comment line echoing the
/// effective config. Wall times are deliberately absent: this output is
/// byte-reproducible for a fixed config and seed, independent of the worker
/// count. Shortest round-trip float formatting keeps the bytes stable.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config {}", result.config_json);
    let _ = writeln!(
        out,
        "n,k,generator,a,b,alpha,b_param,sigma2,init,method,mean_loss,se_loss,reps,failures"
    );
    for r in &result.rows {
        let mut line = String::new();
        let _ = write!(line, "{},{},{},", r.n, r.k, r.generator);
        push_opt(&mut line, r.a);
        line.push(',');
        push_opt(&mut line, r.b);
        line.push(',');
        push_opt(&mut line, r.alpha);
        line.push(',');
        push_opt(&mut line, r.b_param);
        line.push(',');
        let _ = write!(line, "{},{},{},", r.sigma2, r.init, r.method);
        if r.reps > 0 {
            let _ = write!(line, "{},{}", r.mean_loss, r.se_loss);
        } else {
            let _ = write!(line, ",");
        }
        let _ = write!(line, ",{},{}", r.reps, r.failures);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Companion timing table (mean wall seconds of the fit alone, or of the
/// initializer construction for raw rows). Not reproducible byte-for-byte,
/// which is why it is a separate output.
pub fn to_timing_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config {}", result.config_json);
    let _ = writeln!(out, "n,k,generator,init,method,mean_fit_seconds,reps");
    for r in &result.rows {
        if r.reps > 0 {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n, r.k, r.generator, r.init, r.method, r.mean_fit_seconds, r.reps
            );
        }
    }
    out
}
