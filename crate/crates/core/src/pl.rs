//! Block sums, closed-form parameter estimation, and the pseudo-likelihood
//! EM algorithm.
//!
//! The pseudo-likelihood treats the rows of block sums as independent draws
//! from a K-component Gaussian mixture whose parameters (pi, P, Lambda) mix
//! the block means and variances through the confusion matrix of the current
//! labeling. One fit alternates an inner EM loop on the mixture with an
//! outer label update.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flags::{Flag, Flags};
use crate::matrix::Mat;
use crate::model::{BlockParams, Labeling, WeightedNetwork};

/// Mixing-weight floor applied during EM so empty components stay
/// recoverable.
pub const PI_FLOOR: f64 = 1e-8;

/// Column-mass threshold below which an EM component counts as empty.
const EMPTY_COMPONENT_TOL: f64 = 1e-12;

/// n x K table of block sums s[i][k] = sum of weights from node i to nodes
/// labeled k.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSums {
    s: Mat,
    labeling: Labeling,
}

impl BlockSums {
    pub fn table(&self) -> &Mat {
        &self.s
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn n(&self) -> usize {
        self.s.rows()
    }

    pub fn k(&self) -> usize {
        self.s.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.s.row(i)
    }
}

/// K x K joint label proportions between a candidate labeling and a
/// reference labeling.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    r: Mat,
}

impl ConfusionMatrix {
    pub fn from_mat(r: Mat) -> Result<Self> {
        if !r.is_square() {
            return Err(Error::invalid_input("confusion matrix must be square"));
        }
        let total: f64 = r.data().iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid_input(format!(
                "confusion matrix entries must sum to 1, got {total}"
            )));
        }
        if r.data().iter().any(|&v| v < 0.0) {
            return Err(Error::invalid_input("confusion matrix entries must be >= 0"));
        }
        Ok(ConfusionMatrix { r })
    }

    /// diag(pi): the confusion matrix of a labeling assumed correct.
    pub fn diagonal(pi: &[f64]) -> Self {
        ConfusionMatrix { r: Mat::diag(pi) }
    }

    /// Balanced initialization set: gamma/K on the diagonal and
    /// (1-gamma)/(K(K-1)) elsewhere.
    pub fn balanced_gamma(k: usize, gamma: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid_parameter("balanced_gamma requires K >= 2"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid_parameter("gamma must be in [0,1]"));
        }
        let off = (1.0 - gamma) / (k as f64 * (k as f64 - 1.0));
        let mut r = Mat::filled(k, k, off);
        for i in 0..k {
            r[(i, i)] = gamma / k as f64;
        }
        Ok(ConfusionMatrix { r })
    }

    pub fn mat(&self) -> &Mat {
        &self.r
    }

    pub fn k(&self) -> usize {
        self.r.rows()
    }

    /// Row sums: the label proportions of the candidate labeling.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.r.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let k = self.k();
        let mut out = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                out[j] += self.r[(i, j)];
            }
        }
        out
    }
}

/// Parameters (pi, P, Lambda) of the Gaussian mixture over block-sum rows.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    pub pi: Vec<f64>,
    pub p_mean: Mat,
    pub lambda_var: Mat,
    pub flags: Flags,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.pi.len()
    }
}

/// n x K posterior component probabilities; each row sums to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities {
    pub tau: Mat,
    pub flags: Flags,
}

impl Responsibilities {
    pub fn n(&self) -> usize {
        self.tau.rows()
    }

    pub fn k(&self) -> usize {
        self.tau.cols()
    }
}

/// Knobs of the fit loop. `outer_iters` is the number T of label updates,
/// the inner loop stops when the largest parameter change drops below
/// `inner_tol` or after `inner_max` passes.
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub outer_iters: usize,
    pub inner_tol: f64,
    pub inner_max: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            outer_iters: 20,
            inner_tol: 1e-6,
            inner_max: 100,
        }
    }
}

/// Output of one pseudo-likelihood fit.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub labels: Labeling,
    pub block_params: BlockParams,
    pub mixture_params: MixtureParams,
    pub pll_trace: Vec<f64>,
    pub inner_iters: Vec<usize>,
    pub converged: Vec<bool>,
    pub flags: Flags,
    pub wall_seconds: f64,
}

/// Serialization view matching the documented JSON schema.
#[derive(Serialize)]
pub struct FitResultJson {
    pub labels: Vec<u32>,
    pub pi: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(rename = "Lambda")]
    pub lambda: Vec<f64>,
    pub pll_trace: Vec<f64>,
    pub inner_iters: Vec<usize>,
    pub converged: Vec<bool>,
    pub flags: Vec<String>,
    pub wall_seconds: f64,
}

impl FitResult {
    pub fn json_view(&self) -> FitResultJson {
        FitResultJson {
            labels: self.labels.labels().to_vec(),
            pi: self.block_params.pi.clone(),
            b: self.block_params.b_mean.data().to_vec(),
            sigma: self.block_params.sigma2.data().to_vec(),
            p: self.mixture_params.p_mean.data().to_vec(),
            lambda: self.mixture_params.lambda_var.data().to_vec(),
            pll_trace: self.pll_trace.clone(),
            inner_iters: self.inner_iters.clone(),
            converged: self.converged.clone(),
            flags: self.flags.iter().map(|f| f.as_str().to_string()).collect(),
            wall_seconds: self.wall_seconds,
        }
    }
}

/// s[i][k] = sum_j W_ij 1{e_j = k}.
pub fn block_sums(w: &WeightedNetwork, e: &Labeling) -> Result<BlockSums> {
    let n = w.n();
    if e.len() != n {
        return Err(Error::invalid_input(format!(
            "labeling length {} does not match n = {n}",
            e.len()
        )));
    }
    let k = e.k();
    let mut s = Mat::zeros(n, k);
    for i in 0..n {
        let wrow = w.row(i);
        let srow = s.row_mut(i);
        for j in 0..n {
            srow[e.index(j)] += wrow[j];
        }
    }
    Ok(BlockSums {
        s,
        labeling: e.clone(),
    })
}

/// R_kl = (1/n) #\{i : e_i = k, c_i = l\}.
pub fn confusion_matrix(e: &Labeling, c: &Labeling) -> Result<ConfusionMatrix> {
    if e.len() != c.len() {
        return Err(Error::invalid_input(format!(
            "labeling lengths differ: {} vs {}",
            e.len(),
            c.len()
        )));
    }
    if e.k() != c.k() {
        return Err(Error::invalid_input(format!(
            "community counts differ: {} vs {}",
            e.k(),
            c.k()
        )));
    }
    let k = e.k();
    let n = e.len() as f64;
    let mut r = Mat::zeros(k, k);
    for i in 0..e.len() {
        r[(e.index(i), c.index(i))] += 1.0;
    }
    for v in r.data_mut() {
        *v /= n;
    }
    Ok(ConfusionMatrix { r })
}

/// Closed-form maximum-likelihood estimates of (pi, B, Sigma) for a fixed
/// labeling. Off-diagonal blocks pool all unordered pairs with label set
/// {k, l}; variances use population divisors. A block with no pairs gets
/// mean 0 and the pooled variance of all off-diagonal weights, with a
/// degenerate-block flag.
pub fn estimate_block_params(w: &WeightedNetwork, e: &Labeling) -> Result<(BlockParams, Flags)> {
    let n = w.n();
    if e.len() != n {
        return Err(Error::invalid_input(format!(
            "labeling length {} does not match n = {n}",
            e.len()
        )));
    }
    let k = e.k();
    let nf = n as f64;
    let pi: Vec<f64> = e.counts().iter().map(|&c| c as f64 / nf).collect();

    let pair_index = |a: usize, b: usize| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        lo * k + hi
    };
    let mut count = vec![0u64; k * k];
    let mut sum = vec![0.0f64; k * k];
    for i in 0..n {
        for j in (i + 1)..n {
            let idx = pair_index(e.index(i), e.index(j));
            count[idx] += 1;
            sum[idx] += w.weight(i, j);
        }
    }
    let mut b_mean = Mat::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let idx = pair_index(a, b);
            if count[idx] > 0 {
                let m = sum[idx] / count[idx] as f64;
                b_mean[(a, b)] = m;
                b_mean[(b, a)] = m;
            }
        }
    }
    // second pass for exact deviations
    let mut ss = vec![0.0f64; k * k];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (e.index(i), e.index(j));
            let idx = pair_index(a, b);
            let d = w.weight(i, j) - b_mean[(a.min(b), a.max(b))];
            ss[idx] += d * d;
        }
    }
    let mut flags = Flags::new();
    let pooled = w.offdiag_variance();
    let mut sigma2 = Mat::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let idx = pair_index(a, b);
            let v = if count[idx] > 0 {
                ss[idx] / count[idx] as f64
            } else {
                flags.insert(Flag::DegenerateBlock);
                pooled
            };
            sigma2[(a, b)] = v;
            sigma2[(b, a)] = v;
        }
    }
    Ok((BlockParams::from_estimates(pi, b_mean, sigma2), flags))
}

/// Floor for variance entries: tiny relative to the global weight scale.
pub fn variance_floor(w: &WeightedNetwork) -> f64 {
    1e-10 * (w.offdiag_variance() + 1e-30)
}

/// Mixture parameters P = n (R B)^T and Lambda = n (R Sigma)^T, with pi from
/// the row sums of R. Lambda entries below `var_floor` are clamped and
/// flagged.
pub fn mixture_params(
    r: &ConfusionMatrix,
    bhat: &BlockParams,
    n: usize,
    var_floor: f64,
) -> Result<MixtureParams> {
    let k = r.k();
    if bhat.k() != k {
        return Err(Error::invalid_input(format!(
            "confusion matrix is {k}x{k} but block params have K = {}",
            bhat.k()
        )));
    }
    let nf = n as f64;
    let p_mean = r.mat().matmul(&bhat.b_mean)?.transpose().scale(nf);
    let mut lambda_var = r.mat().matmul(&bhat.sigma2)?.transpose().scale(nf);
    let mut flags = Flags::new();
    for v in lambda_var.data_mut() {
        if *v < var_floor {
            *v = var_floor;
            flags.insert(Flag::VarianceFloored);
        }
    }
    Ok(MixtureParams {
        pi: r.row_sums(),
        p_mean,
        lambda_var,
        flags,
    })
}

/// Log density exponents of one block-sum row under every component,
/// without the 2*pi constant (shared across components).
fn component_log_weights(srow: &[f64], m: &MixtureParams, out: &mut [f64]) {
    let k = m.k();
    for l in 0..k {
        let pi_l = m.pi[l];
        let mut lw = if pi_l > 0.0 {
            pi_l.ln()
        } else {
            f64::NEG_INFINITY
        };
        if lw.is_finite() {
            for kk in 0..k {
                let lam = m.lambda_var[(l, kk)];
                if lam <= 0.0 {
                    lw = f64::NEG_INFINITY;
                    break;
                }
                let d = srow[kk] - m.p_mean[(l, kk)];
                lw += -0.5 * lam.ln() - d * d / (2.0 * lam);
            }
        }
        out[l] = lw;
    }
}

/// E step: posterior component probabilities, computed in log space with
/// per-row max subtraction. A row with no finite weight becomes uniform and
/// is flagged.
pub fn e_step(s: &BlockSums, m: &MixtureParams) -> Responsibilities {
    let (n, k) = (s.n(), s.k());
    let mut tau = Mat::zeros(n, k);
    let mut flags = Flags::new();
    let mut lw = vec![0.0; k];
    for i in 0..n {
        component_log_weights(s.row(i), m, &mut lw);
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let row = tau.row_mut(i);
        if !max.is_finite() {
            flags.insert(Flag::UniformResponsibilityRow);
            row.fill(1.0 / k as f64);
            continue;
        }
        let mut total = 0.0;
        for l in 0..k {
            let v = (lw[l] - max).exp();
            row[l] = v;
            total += v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Responsibilities { tau, flags }
}

/// M step: responsibility-weighted mixture updates. Components that lost all
/// mass keep their previous P and Lambda rows, take the floored mixing
/// weight, and raise a flag.
pub fn m_step(
    s: &BlockSums,
    tau: &Responsibilities,
    prev: &MixtureParams,
    var_floor: f64,
) -> MixtureParams {
    let (n, k) = (s.n(), s.k());
    let nf = n as f64;
    let mut flags = Flags::new();
    let mut col_sum = vec![0.0; k];
    for i in 0..n {
        for (l, &t) in tau.tau.row(i).iter().enumerate() {
            col_sum[l] += t;
        }
    }
    let mut pi = vec![0.0; k];
    let mut p_mean = Mat::zeros(k, k);
    let mut lambda_var = Mat::zeros(k, k);
    let mut pi_clamped = false;
    for l in 0..k {
        if col_sum[l] < EMPTY_COMPONENT_TOL * nf {
            flags.insert(Flag::EmptyComponent);
            pi[l] = PI_FLOOR;
            pi_clamped = true;
            p_mean
                .row_mut(l)
                .copy_from_slice(prev.p_mean.row(l));
            lambda_var
                .row_mut(l)
                .copy_from_slice(prev.lambda_var.row(l));
            continue;
        }
        pi[l] = col_sum[l] / nf;
        if pi[l] < PI_FLOOR {
            pi[l] = PI_FLOOR;
            pi_clamped = true;
            flags.insert(Flag::MixingFloored);
        }
        for kk in 0..k {
            let mut acc = 0.0;
            for i in 0..n {
                acc += tau.tau[(i, l)] * s.s[(i, kk)];
            }
            p_mean[(l, kk)] = acc / col_sum[l];
        }
        for kk in 0..k {
            let center = p_mean[(l, kk)];
            let mut acc = 0.0;
            for i in 0..n {
                let d = s.s[(i, kk)] - center;
                acc += tau.tau[(i, l)] * d * d;
            }
            let mut v = acc / col_sum[l];
            if v < var_floor {
                v = var_floor;
                flags.insert(Flag::VarianceFloored);
            }
            lambda_var[(l, kk)] = v;
        }
    }
    if pi_clamped {
        let total: f64 = pi.iter().sum();
        for v in pi.iter_mut() {
            *v /= total;
        }
    }
    MixtureParams {
        pi,
        p_mean,
        lambda_var,
        flags,
    }
}

/// Hard assignment from responsibilities; ties go to the smallest index.
pub fn label_update(tau: &Responsibilities) -> Labeling {
    let (n, k) = (tau.n(), tau.k());
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let row = tau.tau.row(i);
        let mut best = 0usize;
        for l in 1..k {
            if row[l] > row[best] {
                best = l;
            }
        }
        labels.push(best as u32 + 1);
    }
    Labeling::new(labels, k).expect("argmax labels are in range")
}

/// Largest parameter movement between two mixture iterates, matching the
/// inner-loop convergence criterion.
fn param_delta(prev: &MixtureParams, next: &MixtureParams) -> f64 {
    let mut d = 0.0f64;
    for l in 0..prev.pi.len() {
        d = d.max((next.pi[l] - prev.pi[l]).abs());
    }
    for (p, q) in prev.p_mean.data().iter().zip(next.p_mean.data()) {
        d = d.max((q - p).abs() / (1.0 + p.abs()));
    }
    for (p, q) in prev.lambda_var.data().iter().zip(next.lambda_var.data()) {
        d = d.max((q - p).abs() / (1.0 + p));
    }
    d
}

/// Pseudo log-likelihood of block sums under mixture parameters, including
/// the -(nK/2) log(2 pi) constant so values are comparable across
/// implementations.
pub fn pseudo_log_likelihood(s: &BlockSums, m: &MixtureParams) -> f64 {
    let (n, k) = (s.n(), s.k());
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut lw = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..n {
        component_log_weights(s.row(i), m, &mut lw);
        let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = lw.iter().map(|&v| (v - max).exp()).sum();
        total += max + sum.ln();
    }
    total - n as f64 * k as f64 * half_log_2pi
}

/// Complete-data log-likelihood of (W, e) under block parameters, with the
/// Gaussian normalization constants. Returns -inf when some community has
/// nodes but zero probability, or when a used block has non-positive
/// variance.
pub fn complete_log_likelihood(
    w: &WeightedNetwork,
    e: &Labeling,
    params: &BlockParams,
) -> Result<f64> {
    let n = w.n();
    if e.len() != n {
        return Err(Error::invalid_input("labeling length does not match n"));
    }
    if params.k() != e.k() {
        return Err(Error::invalid_input(format!(
            "params have K = {} but labeling has K = {}",
            params.k(),
            e.k()
        )));
    }
    let counts = e.counts();
    let mut total = 0.0;
    for (k, &nk) in counts.iter().enumerate() {
        if nk == 0 {
            continue;
        }
        if params.pi[k] <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += nk as f64 * params.pi[k].ln();
    }
    let log_2pi = (2.0 * std::f64::consts::PI).ln();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (e.index(i), e.index(j));
            let s2 = params.sigma2[(a, b)];
            if s2 <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let d = w.weight(i, j) - params.b_mean[(a, b)];
            total += -0.5 * (log_2pi + s2.ln()) - d * d / (2.0 * s2);
        }
    }
    Ok(total)
}

/// The pseudo-likelihood fit. Every outer round re-anchors the mixture to
/// the current labels through the closed-form block estimates and the
/// diagonal plug-in of the label proportions, runs the inner EM loop to
/// convergence, and updates the labels from the responsibilities. Exits
/// early once the labels stop changing (a fixed point of the round).
pub fn pl_fit(
    w: &WeightedNetwork,
    e0: &Labeling,
    k: usize,
    opts: &FitOptions,
) -> Result<FitResult> {
    let start = Instant::now();
    let n = w.n();
    if e0.len() != n {
        return Err(Error::invalid_input(format!(
            "initial labeling length {} does not match n = {n}",
            e0.len()
        )));
    }
    if e0.k() != k {
        return Err(Error::invalid_input(format!(
            "initial labeling has K = {} but fit requested K = {k}",
            e0.k()
        )));
    }
    let floor = variance_floor(w);
    let (bp0, mut flags) = estimate_block_params(w, e0)?;
    let mut mix = mixture_params(&ConfusionMatrix::diagonal(&bp0.pi), &bp0, n, floor)?;
    flags.extend(mix.flags.iter().copied());

    let mut e = e0.clone();
    let mut pll_trace = Vec::new();
    let mut inner_iters = Vec::new();
    let mut converged = Vec::new();

    for outer in 0..opts.outer_iters {
        let s = block_sums(w, &e)?;
        if outer > 0 {
            // re-estimate from the labels of the previous round
            let (bp, bp_flags) = estimate_block_params(w, &e)?;
            flags.extend(bp_flags.iter().copied());
            mix = mixture_params(&ConfusionMatrix::diagonal(&bp.pi), &bp, n, floor)?;
            flags.extend(mix.flags.iter().copied());
        }
        let mut iters = 0usize;
        let mut conv = false;
        while iters < opts.inner_max {
            let tau = e_step(&s, &mix);
            flags.extend(tau.flags.iter().copied());
            let next = m_step(&s, &tau, &mix, floor);
            flags.extend(next.flags.iter().copied());
            let delta = param_delta(&mix, &next);
            mix = next;
            iters += 1;
            if delta < opts.inner_tol {
                conv = true;
                break;
            }
        }
        let tau = e_step(&s, &mix);
        flags.extend(tau.flags.iter().copied());
        let e_new = label_update(&tau);
        pll_trace.push(pseudo_log_likelihood(&s, &mix));
        inner_iters.push(iters);
        converged.push(conv);
        if e_new.distinct_count() == 1 {
            flags.insert(Flag::LabelCollapse);
        }
        if e_new == e {
            break;
        }
        e = e_new;
    }

    let (block_params, bp_flags) = estimate_block_params(w, &e)?;
    flags.extend(bp_flags.iter().copied());
    let wall_seconds = start.elapsed().as_secs_f64();
    Ok(FitResult {
        labels: e,
        block_params,
        mixture_params: mix,
        pll_trace,
        inner_iters,
        converged,
        flags,
        wall_seconds,
    })
}
