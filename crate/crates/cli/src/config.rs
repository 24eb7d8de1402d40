//! Experiment configuration for simulation sweeps: JSON files with CLI flag
//! overrides, echoed into every output for provenance.

use serde::{Deserialize, Serialize};

use wsbm_core::error::{Error, Result};
use wsbm_core::model::EdgeDistributionSpec;

fn default_t() -> usize {
    20
}
fn default_inner_tol() -> f64 {
    1e-6
}
fn default_inner_max() -> usize {
    100
}
fn default_restarts() -> usize {
    wsbm_core::DEFAULT_RESTARTS
}

/// Accept a bare number or a list for the node-count field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    pub fn as_vec(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(n) => vec![*n],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Generator section of a sweep config; exactly one grid drives the cells.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorConfig {
    /// Homogeneous Gaussian model over a signal grid. Either `ab_grid`
    /// (explicit pairs) or `ab_abs_grid` (|a-b| values with b = 0).
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ab_grid: Option<Vec<(f64, f64)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ab_abs_grid: Option<Vec<f64>>,
        sigma2: f64,
    },
    /// Gaussian / noncentral-t mixture over a grid of mixing weights alpha.
    HeavyTail {
        alpha_grid: Vec<f64>,
        #[serde(default = "default_mu_within")]
        mu_within: f64,
        #[serde(default)]
        mu_between: f64,
        #[serde(default = "default_ht_sigma2")]
        sigma2: f64,
        #[serde(default = "default_df")]
        df: f64,
    },
    /// Bimodal within-community mixture over a grid of second-mode means.
    Bimodal { b_grid: Vec<f64> },
}

fn default_mu_within() -> f64 {
    0.2
}
fn default_ht_sigma2() -> f64 {
    0.25
}
fn default_df() -> f64 {
    4.0
}

/// One resolved grid cell of a generator.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorCell {
    Gaussian { a: f64, b: f64, sigma2: f64 },
    HeavyTail {
        alpha: f64,
        mu_within: f64,
        mu_between: f64,
        sigma2: f64,
        df: f64,
    },
    Bimodal { b_param: f64 },
}

impl GeneratorCell {
    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorCell::Gaussian { .. } => "gaussian",
            GeneratorCell::HeavyTail { .. } => "heavy_tail",
            GeneratorCell::Bimodal { .. } => "bimodal",
        }
    }

    pub fn sigma2(&self) -> f64 {
        match self {
            GeneratorCell::Gaussian { sigma2, .. } => *sigma2,
            GeneratorCell::HeavyTail { sigma2, .. } => *sigma2,
            GeneratorCell::Bimodal { .. } => 0.25,
        }
    }

    pub fn to_edge_spec(&self) -> EdgeDistributionSpec {
        match *self {
            GeneratorCell::Gaussian { .. } => unreachable!("gaussian cells sample directly"),
            GeneratorCell::HeavyTail {
                alpha,
                mu_within,
                mu_between,
                sigma2,
                df,
            } => EdgeDistributionSpec::HeavyTailMixture {
                alpha,
                mu_within,
                mu_between,
                sigma2,
                df,
            },
            GeneratorCell::Bimodal { b_param } => EdgeDistributionSpec::Bimodal { b_param },
        }
    }
}

impl GeneratorConfig {
    pub fn cells(&self) -> Result<Vec<GeneratorCell>> {
        match self {
            GeneratorConfig::Gaussian {
                ab_grid,
                ab_abs_grid,
                sigma2,
            } => {
                let mut cells = Vec::new();
                if let Some(pairs) = ab_grid {
                    for &(a, b) in pairs {
                        cells.push(GeneratorCell::Gaussian {
                            a,
                            b,
                            sigma2: *sigma2,
                        });
                    }
                }
                if let Some(gaps) = ab_abs_grid {
                    for &g in gaps {
                        cells.push(GeneratorCell::Gaussian {
                            a: g,
                            b: 0.0,
                            sigma2: *sigma2,
                        });
                    }
                }
                if cells.is_empty() {
                    return Err(Error::invalid_parameter(
                        "gaussian generator needs ab_grid or ab_abs_grid",
                    ));
                }
                Ok(cells)
            }
            GeneratorConfig::HeavyTail {
                alpha_grid,
                mu_within,
                mu_between,
                sigma2,
                df,
            } => {
                if alpha_grid.is_empty() {
                    return Err(Error::invalid_parameter("alpha_grid must be non-empty"));
                }
                Ok(alpha_grid
                    .iter()
                    .map(|&alpha| GeneratorCell::HeavyTail {
                        alpha,
                        mu_within: *mu_within,
                        mu_between: *mu_between,
                        sigma2: *sigma2,
                        df: *df,
                    })
                    .collect())
            }
            GeneratorConfig::Bimodal { b_grid } => {
                if b_grid.is_empty() {
                    return Err(Error::invalid_parameter("b_grid must be non-empty"));
                }
                Ok(b_grid
                    .iter()
                    .map(|&b_param| GeneratorCell::Bimodal { b_param })
                    .collect())
            }
        }
    }
}

/// Full sweep configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: OneOrMany,
    pub k: usize,
    /// Community proportions; uniform when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
    /// Exact community sizes instead of i.i.d. label draws.
    #[serde(default)]
    pub balanced_counts: bool,
    pub generator: GeneratorConfig,
    /// Initializer strings: "spectral", "db", "db:L", "oracle:g" or
    /// "oracle:g1,g2,...".
    pub init: Vec<String>,
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_inner_max")]
    pub inner_max: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    pub replications: usize,
    pub master_seed: u64,
    /// 0 means one worker per available core. Not echoed into outputs:
    /// results do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn pi_vec(&self) -> Vec<f64> {
        match &self.pi {
            Some(p) => p.clone(),
            None => vec![1.0 / self.k as f64; self.k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::invalid_parameter("replications must be >= 1"));
        }
        if self.k < 1 {
            return Err(Error::invalid_parameter("k must be >= 1"));
        }
        if let Some(pi) = &self.pi {
            if pi.len() != self.k {
                return Err(Error::invalid_parameter(format!(
                    "pi has {} entries but k = {}",
                    pi.len(),
                    self.k
                )));
            }
            let sum: f64 = pi.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || pi.iter().any(|&p| p < 0.0) {
                return Err(Error::invalid_parameter("pi must be a probability vector"));
            }
        }
        if self.init.is_empty() {
            return Err(Error::invalid_parameter("need at least one init method"));
        }
        for m in &self.init {
            let parsed = InitMethod::parse(m)?;
            if matches!(parsed, InitMethod::LabelsFile { .. }) {
                return Err(Error::invalid_parameter(
                    "labels-file initializers make no sense in a synthetic sweep",
                ));
            }
            if let InitMethod::Oracle { gamma } = &parsed {
                if gamma.len() != 1 && gamma.len() != self.k {
                    return Err(Error::invalid_parameter(format!(
                        "oracle initializer needs 1 or {} gamma values",
                        self.k
                    )));
                }
            }
        }
        self.generator.cells()?;
        Ok(())
    }
}

/// A parsed initializer choice.
#[derive(Clone, Debug, PartialEq)]
pub enum InitMethod {
    Spectral,
    Db { level: Option<usize> },
    Oracle { gamma: Vec<f64> },
    LabelsFile { path: String },
}

impl InitMethod {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "spectral" || text == "sc" {
            return Ok(InitMethod::Spectral);
        }
        if text == "db" {
            return Ok(InitMethod::Db { level: None });
        }
        if let Some(rest) = text.strip_prefix("db:") {
            let level: usize = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad discretization level in {text:?}")))?;
            return Ok(InitMethod::Db { level: Some(level) });
        }
        if let Some(rest) = text.strip_prefix("oracle:") {
            let gamma: Result<Vec<f64>> = rest
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad gamma in {text:?}")))
                })
                .collect();
            return Ok(InitMethod::Oracle { gamma: gamma? });
        }
        if let Some(rest) = text.strip_prefix("labels:") {
            return Ok(InitMethod::LabelsFile {
                path: rest.to_string(),
            });
        }
        Err(Error::Parse(format!(
            "unknown initializer {text:?}; expected spectral, db[:L], oracle:<g,...> or labels:<file>"
        )))
    }

    /// Row label of the raw initializer in sweep outputs.
    pub fn raw_name(&self, spec: &str) -> String {
        match self {
            InitMethod::Spectral => "sc".to_string(),
            InitMethod::Db { .. } => spec.to_string(),
            InitMethod::Oracle { .. } => spec.to_string(),
            InitMethod::LabelsFile { .. } => "labels".to_string(),
        }
    }
}

/// Parse "lo:step:hi" or a comma list into a grid of floats.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "grid {text:?} must be lo:step:hi or a comma list"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid start in {text:?}")))?;
        let step: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid step in {text:?}")))?;
        let hi: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid end in {text:?}")))?;
        if step <= 0.0 || hi < lo {
            return Err(Error::Parse(format!("bad grid range in {text:?}")));
        }
        let mut out = Vec::new();
        let mut i = 0;
        loop {
            let v = lo + step * i as f64;
            if v > hi + 1e-12 {
                break;
            }
            out.push(v);
            i += 1;
        }
        Ok(out)
    } else {
        text.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad grid value {tok:?}")))
            })
            .collect()
    }
}

/// Parse "lo:hi" into an inclusive integer range.
pub fn parse_k_range(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(Error::Parse(format!("k range {text:?} must be lo:hi")));
    }
    let lo: usize = parts[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad k range start in {text:?}")))?;
    let hi: usize = parts[1]
        .parse()
        .map_err(|_| Error::Parse(format!("bad k range end in {text:?}")))?;
    if lo < 1 || hi < lo {
        return Err(Error::Parse(format!("bad k range {text:?}")));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_method_parsing() {
        assert_eq!(InitMethod::parse("spectral").unwrap(), InitMethod::Spectral);
        assert_eq!(
            InitMethod::parse("db:10").unwrap(),
            InitMethod::Db { level: Some(10) }
        );
        assert_eq!(
            InitMethod::parse("oracle:0.9,0.5").unwrap(),
            InitMethod::Oracle {
                gamma: vec![0.9, 0.5]
            }
        );
        assert!(InitMethod::parse("nope").is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:0.1:0.3").unwrap(), vec![0.0, 0.1, 0.2, 0.30000000000000004]);
        assert_eq!(parse_grid("1,2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_k_range("2:20").unwrap(), (2, 20));
    }

    #[test]
    fn config_round_trip_and_validation() {
        let json = r#"{
            "n": 500,
            "k": 3,
            "generator": {"type": "gaussian", "ab_abs_grid": [0.0, 0.1], "sigma2": 1.0},
            "init": ["oracle:0.7", "spectral"],
            "replications": 4,
            "master_seed": 1
        }"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.n.as_vec(), vec![500]);
        assert_eq!(cfg.t, 20);
        assert_eq!(cfg.generator.cells().unwrap().len(), 2);
        let echo = cfg.to_json();
        let back = ExperimentConfig::from_json(&echo).unwrap();
        back.validate().unwrap();
        assert_eq!(back.to_json(), echo);
    }
}
