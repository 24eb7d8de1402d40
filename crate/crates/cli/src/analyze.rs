//! Analysis pipeline for a user-supplied weight matrix: fits over a range
//! of K, complete-likelihood tables, pairwise mismatch proportions, and
//! overlap tables against an optional reference partition.

use std::fmt::Write as _;

use serde::Serialize;

use wsbm_core::error::{Error, Result};
use wsbm_core::eval::{align_to_reference, mismatch_proportion, overlap_table, OverlapRow};
use wsbm_core::init::{db_init, spectral_init};
use wsbm_core::model::{derive_substream, Labeling, WeightedNetwork};
use wsbm_core::pl::{complete_log_likelihood, estimate_block_params, pl_fit, FitOptions};

/// Methods understood by the pipeline. `pl-*` fits start from the
/// corresponding initializer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyzeMethod {
    Sc,
    Db,
    PlSc,
    PlDb,
}

impl AnalyzeMethod {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "sc" => Ok(AnalyzeMethod::Sc),
            "db" => Ok(AnalyzeMethod::Db),
            "pl-sc" => Ok(AnalyzeMethod::PlSc),
            "pl-db" => Ok(AnalyzeMethod::PlDb),
            other => Err(Error::Parse(format!(
                "unknown analyze method {other:?}; expected sc, db, pl-sc or pl-db"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyzeMethod::Sc => "sc",
            AnalyzeMethod::Db => "db",
            AnalyzeMethod::PlSc => "pl-sc",
            AnalyzeMethod::PlDb => "pl-db",
        }
    }

    fn needs_sc(&self) -> bool {
        matches!(self, AnalyzeMethod::Sc | AnalyzeMethod::PlSc)
    }

    fn needs_db(&self) -> bool {
        matches!(self, AnalyzeMethod::Db | AnalyzeMethod::PlDb)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeOptions {
    pub k_min: usize,
    pub k_max: usize,
    pub methods: Vec<String>,
    pub seed: u64,
    pub t: usize,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub restarts: usize,
    /// DB discretization level; None picks the auto formula.
    pub level: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct LikelihoodRow {
    pub k: usize,
    pub method: &'static str,
    pub complete_log_likelihood: f64,
}

#[derive(Clone, Debug)]
pub struct MismatchRow {
    pub k: usize,
    pub method_a: &'static str,
    pub method_b: &'static str,
    pub mismatch: f64,
}

#[derive(Clone, Debug)]
pub struct AnalyzeBundle {
    pub options_json: String,
    pub likelihood: Vec<LikelihoodRow>,
    pub mismatch: Vec<MismatchRow>,
    /// (k, method, rows); present when reference labels were supplied.
    pub overlap: Vec<(usize, &'static str, Vec<OverlapRow>)>,
    /// (k, method, labels), aligned to the reference when one was supplied.
    pub labels: Vec<(usize, &'static str, Labeling)>,
}

/// Fit every method for every K in the range and assemble the tables.
pub fn analyze(
    w: &WeightedNetwork,
    opts: &AnalyzeOptions,
    reference: Option<&Labeling>,
) -> Result<AnalyzeBundle> {
    if opts.k_min < 1 || opts.k_max < opts.k_min {
        return Err(Error::invalid_parameter("empty K range"));
    }
    let methods: Vec<AnalyzeMethod> = opts
        .methods
        .iter()
        .map(|m| AnalyzeMethod::parse(m))
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::invalid_parameter("need at least one method"));
    }
    let fit_opts = FitOptions {
        outer_iters: opts.t,
        inner_tol: opts.inner_tol,
        inner_max: opts.inner_max,
    };

    let mut bundle = AnalyzeBundle {
        options_json: serde_json::to_string(opts).expect("options serialize"),
        likelihood: Vec::new(),
        mismatch: Vec::new(),
        overlap: Vec::new(),
        labels: Vec::new(),
    };

    for k in opts.k_min..=opts.k_max {
        let sc_seed = derive_substream(opts.seed, &format!("analyze:sc:{k}"));
        let db_seed = derive_substream(opts.seed, &format!("analyze:db:{k}"));
        let sc_labels = if methods.iter().any(|m| m.needs_sc()) {
            Some(spectral_init(w, k, opts.restarts, sc_seed)?)
        } else {
            None
        };
        let db_labels = if methods.iter().any(|m| m.needs_db()) {
            Some(db_init(w, k, opts.level, opts.restarts, db_seed)?.labels)
        } else {
            None
        };

        let mut fitted: Vec<(&'static str, Labeling)> = Vec::new();
        for method in &methods {
            let labels = match method {
                AnalyzeMethod::Sc => sc_labels.clone().unwrap(),
                AnalyzeMethod::Db => db_labels.clone().unwrap(),
                AnalyzeMethod::PlSc => {
                    pl_fit(w, sc_labels.as_ref().unwrap(), k, &fit_opts)?.labels
                }
                AnalyzeMethod::PlDb => {
                    pl_fit(w, db_labels.as_ref().unwrap(), k, &fit_opts)?.labels
                }
            };
            let (bp, _) = estimate_block_params(w, &labels)?;
            let cll = complete_log_likelihood(w, &labels, &bp)?;
            bundle.likelihood.push(LikelihoodRow {
                k,
                method: method.name(),
                complete_log_likelihood: cll,
            });
            fitted.push((method.name(), labels));
        }

        for i in 0..fitted.len() {
            for j in (i + 1)..fitted.len() {
                bundle.mismatch.push(MismatchRow {
                    k,
                    method_a: fitted[i].0,
                    method_b: fitted[j].0,
                    mismatch: mismatch_proportion(&fitted[i].1, &fitted[j].1)?,
                });
            }
        }

        for (name, labels) in fitted {
            let final_labels = match reference {
                Some(r) => {
                    let aligned = align_to_reference(&labels, r)?;
                    bundle
                        .overlap
                        .push((k, name, overlap_table(&aligned, r)?));
                    aligned
                }
                None => labels,
            };
            bundle.labels.push((k, name, final_labels));
        }
    }
    Ok(bundle)
}

pub fn likelihood_csv(bundle: &AnalyzeBundle) -> String {
    let mut out = String::from("k,method,complete_log_likelihood\n");
    for r in &bundle.likelihood {
        let _ = writeln!(out, "{},{},{}", r.k, r.method, r.complete_log_likelihood);
    }
    out
}

pub fn mismatch_csv(bundle: &AnalyzeBundle) -> String {
    let mut out = String::from("k,method_a,method_b,mismatch\n");
    for r in &bundle.mismatch {
        let _ = writeln!(out, "{},{},{},{}", r.k, r.method_a, r.method_b, r.mismatch);
    }
    out
}

pub fn overlap_csv(bundle: &AnalyzeBundle) -> String {
    let mut out = String::from("k,method,est,ref_list,overlap\n");
    for (k, method, rows) in &bundle.overlap {
        for row in rows {
            let refs = row
                .best_ref_communities
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(";");
            match row.overlap {
                Some(v) => {
                    let _ = writeln!(out, "{k},{method},{},{refs},{v}", row.est_community);
                }
                None => {
                    let _ = writeln!(out, "{k},{method},{},,NA", row.est_community);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use wsbm_core::model::{sample_wsbm, BlockParams, LabelAssignment};

    #[test]
    fn bookkeeping_row_counts() {
        let params = BlockParams::homogeneous(2, 3.0, 0.0, 0.5).unwrap();
        let (w, _) = sample_wsbm(10, &params, LabelAssignment::FixedCounts, 2).unwrap();
        let opts = AnalyzeOptions {
            k_min: 2,
            k_max: 3,
            methods: vec!["sc".into(), "pl-sc".into()],
            seed: 1,
            t: 3,
            inner_tol: 1e-6,
            inner_max: 50,
            restarts: 5,
            level: None,
        };
        let bundle = analyze(&w, &opts, None).unwrap();
        // 2 K values x 2 methods
        assert_eq!(bundle.likelihood.len(), 4);
        // one unordered method pair per K
        assert_eq!(bundle.mismatch.len(), 2);
        assert!(bundle.overlap.is_empty());
    }

    #[test]
    fn overlap_perfect_on_recovered_truth() {
        let params = BlockParams::homogeneous(2, 4.0, 0.0, 0.25).unwrap();
        let (w, truth) = sample_wsbm(30, &params, LabelAssignment::FixedCounts, 8).unwrap();
        let opts = AnalyzeOptions {
            k_min: 2,
            k_max: 2,
            methods: vec!["pl-sc".into()],
            seed: 3,
            t: 5,
            inner_tol: 1e-6,
            inner_max: 50,
            restarts: 10,
            level: None,
        };
        let bundle = analyze(&w, &opts, Some(&truth)).unwrap();
        let (_, _, rows) = &bundle.overlap[0];
        for row in rows {
            assert_eq!(row.overlap, Some(1.0));
            assert_eq!(row.best_ref_communities, vec![row.est_community]);
        }
    }
}
