//! Domain types and random generation of weighted networks.
//!
//! Networks are dense symmetric weight matrices with zero diagonal. Edge
//! weights are drawn independently given the node community labels, either
//! from the Gaussian block model or from the heavy-tail / bimodal mixtures
//! used in the robustness studies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::Mat;

/// Symmetric n x n edge-weight matrix with zero diagonal and finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedNetwork {
    n: usize,
    w: Vec<f64>,
}

impl WeightedNetwork {
    /// Build from a full matrix. Asymmetries up to `sym_tol` are averaged
    /// away; anything larger is an error naming the worst entry. The diagonal
    /// is forced to zero.
    pub fn from_mat(m: &Mat, sym_tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid_input(format!(
                "weight matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let (wi, wj, wd) = m.max_asymmetry();
        if wd > sym_tol {
            return Err(Error::invalid_input(format!(
                "matrix is not symmetric: |w[{wi}][{wj}] - w[{wj}][{wi}]| = {wd:e} exceeds {sym_tol:e}"
            )));
        }
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = if m[(i, j)] == m[(j, i)] {
                    m[(i, j)]
                } else {
                    0.5 * (m[(i, j)] + m[(j, i)])
                };
                if !v.is_finite() {
                    return Err(Error::invalid_input(format!(
                        "non-finite weight at ({i}, {j})"
                    )));
                }
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
        Ok(WeightedNetwork { n, w })
    }

    /// Build from the strict upper triangle; each unordered pair written once.
    pub fn from_upper(n: usize, mut upper: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = upper(i, j);
                if !v.is_finite() {
                    return Err(Error::invalid_input(format!(
                        "non-finite weight at ({i}, {j})"
                    )));
                }
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
        Ok(WeightedNetwork { n, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn to_mat(&self) -> Mat {
        Mat::from_vec(self.n, self.n, self.w.clone()).expect("stored shape is consistent")
    }

    /// Population variance of the off-diagonal weights; scale for the
    /// variance floor.
    pub fn offdiag_variance(&self) -> f64 {
        let pairs = self.n * (self.n - 1) / 2;
        if pairs == 0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                sum += self.weight(i, j);
            }
        }
        let mean = sum / pairs as f64;
        let mut ss = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let d = self.weight(i, j) - mean;
                ss += d * d;
            }
        }
        ss / pairs as f64
    }
}

/// Node community assignment with 1-based ids in 1..=k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    labels: Vec<u32>,
    k: usize,
}

impl Labeling {
    pub fn new(labels: Vec<u32>, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::invalid_parameter("community count must be >= 1"));
        }
        if labels.len() < k {
            return Err(Error::invalid_parameter(format!(
                "need at least K = {k} nodes, got {}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l < 1 || l as usize > k) {
            return Err(Error::invalid_input(format!(
                "label {bad} outside 1..={k}"
            )));
        }
        Ok(Labeling { labels, k })
    }

    /// Build from 0-based community indices.
    pub fn from_indices(indices: Vec<usize>, k: usize) -> Result<Self> {
        let labels = indices.iter().map(|&i| i as u32 + 1).collect();
        Labeling::new(labels, k)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// 1-based label of node i.
    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// 0-based community index of node i.
    #[inline]
    pub fn index(&self, i: usize) -> usize {
        self.labels[i] as usize - 1
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Community sizes n_k, indexed 0-based.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for i in 0..self.labels.len() {
            counts[self.index(i)] += 1;
        }
        counts
    }

    /// Community proportions n_k / n.
    pub fn proportions(&self) -> Vec<f64> {
        let n = self.labels.len() as f64;
        self.counts().iter().map(|&c| c as f64 / n).collect()
    }

    pub fn distinct_count(&self) -> usize {
        self.counts().iter().filter(|&&c| c > 0).count()
    }
}

/// Model parameters (pi, B, Sigma) of the Gaussian block model.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub pi: Vec<f64>,
    pub b_mean: Mat,
    pub sigma2: Mat,
}

impl BlockParams {
    /// Validating constructor for model parameters used in generation.
    pub fn new(pi: Vec<f64>, b_mean: Mat, sigma2: Mat) -> Result<Self> {
        let k = pi.len();
        if k == 0 {
            return Err(Error::invalid_parameter("pi must be non-empty"));
        }
        if pi.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid_parameter("pi entries must be >= 0"));
        }
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid_parameter(format!(
                "pi must sum to 1 within 1e-12, got {sum}"
            )));
        }
        if b_mean.rows() != k || !b_mean.is_square() || sigma2.rows() != k || !sigma2.is_square() {
            return Err(Error::invalid_input("B and Sigma must be K x K"));
        }
        if !b_mean.is_symmetric(0.0) || !sigma2.is_symmetric(0.0) {
            return Err(Error::invalid_input("B and Sigma must be symmetric"));
        }
        if sigma2.data().iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::invalid_parameter("Sigma entries must be > 0"));
        }
        Ok(BlockParams { pi, b_mean, sigma2 })
    }

    /// Construct without the positivity check on Sigma. Closed-form estimates
    /// can legitimately contain zero variances (constant blocks).
    pub(crate) fn from_estimates(pi: Vec<f64>, b_mean: Mat, sigma2: Mat) -> Self {
        BlockParams { pi, b_mean, sigma2 }
    }

    /// Homogeneous model with uniform pi.
    pub fn homogeneous(k: usize, a: f64, b: f64, sigma2: f64) -> Result<Self> {
        let (b_mean, s2) = homogeneous_params(k, a, b, sigma2)?;
        BlockParams::new(vec![1.0 / k as f64; k], b_mean, s2)
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }
}

/// Mean and variance matrices of the homogeneous model: a on the diagonal of
/// B, b off-diagonal, constant sigma2.
pub fn homogeneous_params(k: usize, a: f64, b: f64, sigma2: f64) -> Result<(Mat, Mat)> {
    if k < 1 {
        return Err(Error::invalid_parameter("K must be >= 1"));
    }
    if sigma2 <= 0.0 || !sigma2.is_finite() {
        return Err(Error::invalid_parameter(format!(
            "sigma2 must be > 0, got {sigma2}"
        )));
    }
    let mut b_mean = Mat::filled(k, k, b);
    for i in 0..k {
        b_mean[(i, i)] = a;
    }
    Ok((b_mean, Mat::filled(k, k, sigma2)))
}

/// Edge-weight distribution used by the generators.
#[derive(Clone, Debug, PartialEq)]
pub enum EdgeDistributionSpec {
    /// Gaussian block model with full (B, Sigma).
    GaussianGeneral { b_mean: Mat, sigma2: Mat },
    /// Gaussian planted-partition: within mean a, between mean b, common
    /// variance.
    GaussianHomogeneous { a: f64, b: f64, sigma2: f64 },
    /// Within: alpha N(mu_within, sigma2) + (1-alpha) t_{mu_within, df};
    /// between: the same mixture centred at mu_between.
    HeavyTailMixture {
        alpha: f64,
        mu_within: f64,
        mu_between: f64,
        sigma2: f64,
        df: f64,
    },
    /// Within: 0.5 N(-0.3, 0.25) + 0.5 N(b_param, 0.25); between: N(0, 0.25).
    Bimodal { b_param: f64 },
}

impl EdgeDistributionSpec {
    pub fn heavy_tail(alpha: f64) -> Self {
        EdgeDistributionSpec::HeavyTailMixture {
            alpha,
            mu_within: 0.2,
            mu_between: 0.0,
            sigma2: 0.25,
            df: 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EdgeDistributionSpec::GaussianGeneral { b_mean, sigma2 } => {
                if !b_mean.is_square() || !sigma2.is_square() || b_mean.rows() != sigma2.rows() {
                    return Err(Error::invalid_input("B and Sigma must be K x K"));
                }
                if sigma2.data().iter().any(|&v| v <= 0.0) {
                    return Err(Error::invalid_parameter("variances must be > 0"));
                }
            }
            EdgeDistributionSpec::GaussianHomogeneous { sigma2, .. } => {
                if *sigma2 <= 0.0 {
                    return Err(Error::invalid_parameter("sigma2 must be > 0"));
                }
            }
            EdgeDistributionSpec::HeavyTailMixture {
                alpha, sigma2, df, ..
            } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::invalid_parameter(format!(
                        "alpha must be in [0,1], got {alpha}"
                    )));
                }
                if *sigma2 <= 0.0 {
                    return Err(Error::invalid_parameter("sigma2 must be > 0"));
                }
                if *df <= 2.0 {
                    return Err(Error::invalid_parameter("df must be > 2"));
                }
            }
            EdgeDistributionSpec::Bimodal { .. } => {}
        }
        Ok(())
    }
}

/// How truth labels are drawn before edge generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelAssignment {
    /// Labels i.i.d. from pi.
    Multinomial,
    /// Exact counts by largest-remainder apportionment of pi * n; nodes
    /// assigned in community order.
    FixedCounts,
}

/// splitmix64 finalizer step.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-replication stream seed: mixing (master_seed, r) keeps replications
/// order-independent.
pub fn derive_stream(master_seed: u64, replication: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(replication.wrapping_add(0x51A7_2E3B)))
}

/// Sub-stream for a named purpose within a replication, independent of the
/// position of the purpose in any list.
pub fn derive_substream(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in tag.as_bytes() {
        h ^= *byte as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest-remainder apportionment of pi * n into integer counts.
pub fn apportion_counts(pi: &[f64], n: usize) -> Vec<usize> {
    let k = pi.len();
    let mut counts: Vec<usize> = pi.iter().map(|&p| (p * n as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(f64, usize)> = pi
        .iter()
        .enumerate()
        .map(|(i, &p)| (p * n as f64 - counts[i] as f64, i))
        .collect();
    // largest remainder first; ties toward the smaller community id
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for idx in 0..(n - assigned) {
        counts[remainders[idx % k].1] += 1;
    }
    counts
}

fn sample_labels(
    n: usize,
    pi: &[f64],
    assignment: LabelAssignment,
    rng: &mut ChaCha8Rng,
) -> Result<Labeling> {
    let k = pi.len();
    if n < k {
        return Err(Error::invalid_parameter(format!(
            "n = {n} must be at least K = {k}"
        )));
    }
    match assignment {
        LabelAssignment::Multinomial => {
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut lab = k as u32;
                for (j, &p) in pi.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        lab = j as u32 + 1;
                        break;
                    }
                }
                labels.push(lab);
            }
            Labeling::new(labels, k)
        }
        LabelAssignment::FixedCounts => {
            let counts = apportion_counts(pi, n);
            let mut labels = Vec::with_capacity(n);
            for (j, &c) in counts.iter().enumerate() {
                labels.extend(std::iter::repeat(j as u32 + 1).take(c));
            }
            Labeling::new(labels, k)
        }
    }
}

/// Sample a network from the Gaussian block model. Deterministic given the
/// seed; each unordered pair is drawn once.
pub fn sample_wsbm(
    n: usize,
    params: &BlockParams,
    assignment: LabelAssignment,
    seed: u64,
) -> Result<(WeightedNetwork, Labeling)> {
    let k = params.k();
    if n < k {
        return Err(Error::invalid_parameter(format!(
            "n = {n} must be at least K = {k}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let labels = sample_labels(n, &params.pi, assignment, &mut rng)?;
    let mut normals = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let dist = Normal::new(params.b_mean[(a, b)], params.sigma2[(a, b)].sqrt())
                .map_err(|e| Error::invalid_parameter(format!("bad normal parameters: {e}")))?;
            normals.push(dist);
        }
    }
    let w = WeightedNetwork::from_upper(n, |i, j| {
        let (ci, cj) = (labels.index(i), labels.index(j));
        normals[ci * k + cj].sample(&mut rng)
    })?;
    Ok((w, labels))
}

/// Sample a network whose edge weights follow one of the robustness-study
/// distributions (heavy-tail mixture or bimodal). The noncentral t is sampled
/// as (Z + mu) / sqrt(V / df) with Z standard normal and V chi-squared.
pub fn sample_robustness_network(
    n: usize,
    pi: &[f64],
    spec: &EdgeDistributionSpec,
    assignment: LabelAssignment,
    seed: u64,
) -> Result<(WeightedNetwork, Labeling)> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let labels = sample_labels(n, pi, assignment, &mut rng)?;
    match spec {
        EdgeDistributionSpec::HeavyTailMixture {
            alpha,
            mu_within,
            mu_between,
            sigma2,
            df,
        } => {
            let sd = sigma2.sqrt();
            let noise = Normal::new(0.0, sd).expect("validated");
            let std_normal = Normal::new(0.0, 1.0).expect("standard");
            let chi2 = ChiSquared::new(*df)
                .map_err(|e| Error::invalid_parameter(format!("bad chi-squared df: {e}")))?;
            let alpha = *alpha;
            let (mu_w, mu_b) = (*mu_within, *mu_between);
            let df = *df;
            let w = WeightedNetwork::from_upper(n, |i, j| {
                let mu = if labels.index(i) == labels.index(j) {
                    mu_w
                } else {
                    mu_b
                };
                if rng.gen::<f64>() < alpha {
                    mu + noise.sample(&mut rng)
                } else {
                    let z: f64 = std_normal.sample(&mut rng);
                    let v: f64 = chi2.sample(&mut rng);
                    (z + mu) / (v / df).sqrt()
                }
            })?;
            Ok((w, labels))
        }
        EdgeDistributionSpec::Bimodal { b_param } => {
            let sd = 0.25_f64.sqrt();
            let low = Normal::new(-0.3, sd).expect("fixed");
            let high = Normal::new(*b_param, sd).expect("fixed");
            let between = Normal::new(0.0, sd).expect("fixed");
            let w = WeightedNetwork::from_upper(n, |i, j| {
                if labels.index(i) == labels.index(j) {
                    if rng.gen::<f64>() < 0.5 {
                        low.sample(&mut rng)
                    } else {
                        high.sample(&mut rng)
                    }
                } else {
                    between.sample(&mut rng)
                }
            })?;
            Ok((w, labels))
        }
        _ => Err(Error::invalid_parameter(
            "robustness generator requires a heavy_tail_mixture or bimodal spec",
        )),
    }
}
