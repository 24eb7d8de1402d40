//! Initial labelings: spectral clustering on the weight matrix, the
//! discretization-based (DB) initializer, and oracle corrupted-truth
//! initializers with a fixed per-community match proportion.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{rng_from_seed, Labeling, WeightedNetwork};
use crate::pl::{confusion_matrix, ConfusionMatrix};

/// How an oracle initializer spreads the misclassified nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMode {
    /// Misclassified nodes of each community are spread as evenly as
    /// possible over the other K-1 labels (largest-remainder rounding).
    BalancedSpread,
    /// Misclassified nodes swap into the paired community (1<->2, 3<->4, ...);
    /// requires an even K.
    PairwiseSwap,
}

/// Target match proportions gamma_k per community plus the spread mode.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSpec {
    pub gamma: Vec<f64>,
    pub mode: OracleMode,
}

impl OracleSpec {
    pub fn balanced(gamma: f64, k: usize) -> Self {
        OracleSpec {
            gamma: vec![gamma; k],
            mode: OracleMode::BalancedSpread,
        }
    }
}

/// Default number of k-means restarts.
pub const DEFAULT_RESTARTS: usize = 20;

const KMEANS_MAX_ITER: usize = 300;
const KMEANS_REL_TOL: f64 = 1e-8;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Lloyd's algorithm with k-means++ seeding. Returns (assignment, inertia).
/// Empty clusters are reseeded from the point farthest from its center.
fn kmeans_single(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<usize>, f64) {
    let n = points.len();
    let dim = points[0].len();

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.gen_range(0..n)].clone());
    let mut dists: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = dists.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dists.iter().enumerate() {
                u -= d;
                if u <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p, centers.last().unwrap());
            if d < dists[i] {
                dists[i] = d;
            }
        }
    }

    let mut assign = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITER {
        // assignment step; ties to the lowest center index
        let mut new_inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = squared_distance(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = squared_distance(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
            new_inertia += best_d;
        }
        // update step
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for (i, p) in points.iter().enumerate() {
            counts[assign[i]] += 1;
            for (d, &v) in p.iter().enumerate() {
                sums[assign[i]][d] += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed from the point farthest from its own center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(&points[a], &centers[assign[a]]);
                        let db = squared_distance(&points[b], &centers[assign[b]]);
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .unwrap();
                centers[c] = points[far].clone();
            } else {
                for d in 0..dim {
                    centers[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
        let rel = (inertia - new_inertia).abs() / inertia.max(f64::MIN_POSITIVE);
        let done = inertia.is_finite() && rel < KMEANS_REL_TOL;
        inertia = new_inertia;
        if done {
            break;
        }
    }
    (assign, inertia)
}

/// Best-of-`restarts` k-means; ties go to the lowest restart index.
fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> (Vec<usize>, f64) {
    let mut rng = rng_from_seed(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let (assign, inertia) = kmeans_single(points, k, &mut rng);
        if best.as_ref().map_or(true, |(_, bi)| inertia < *bi) {
            best = Some((assign, inertia));
        }
    }
    best.unwrap()
}

/// Top-k eigenvectors of a symmetric matrix ordered by |eigenvalue|, as rows
/// of an n x k point list.
fn leading_eigenvector_rows(m: &DMatrix<f64>, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = m.nrows();
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| {
            Error::Eigen(format!(
                "symmetric eigendecomposition of the {n}x{n} weight matrix did not converge"
            ))
        })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalues".to_string()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (eig.eigenvalues[a].abs(), eig.eigenvalues[b].abs());
        mb.partial_cmp(&ma).unwrap().then(a.cmp(&b))
    });
    let mut rows = vec![vec![0.0; k]; n];
    for (col, &which) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(which);
        for i in 0..n {
            rows[i][col] = v[i];
        }
    }
    Ok(rows)
}

/// Spectral clustering applied directly to the weight matrix: k-means on the
/// rows of the K leading eigenvectors (largest absolute eigenvalues).
pub fn spectral_init(
    w: &WeightedNetwork,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Labeling> {
    let n = w.n();
    if k < 1 || k > n {
        return Err(Error::invalid_parameter(format!(
            "K must be in 1..=n, got K = {k}, n = {n}"
        )));
    }
    if k == 1 {
        return Labeling::new(vec![1; n], 1);
    }
    let dm = DMatrix::from_fn(n, n, |i, j| w.weight(i, j));
    let rows = leading_eigenvector_rows(&dm, k)?;
    let (assign, _) = kmeans(&rows, k, restarts, seed);
    Labeling::from_indices(assign, k)
}

/// Outcome of the DB initializer, including the discretization level that
/// was actually used.
#[derive(Clone, Debug)]
pub struct DbInit {
    pub labels: Labeling,
    pub level: usize,
    pub level_reduced: bool,
}

/// Auto discretization level: max(2, floor(0.4 (ln ln n)^4)).
pub fn db_auto_level(n: usize) -> usize {
    let l = (0.4 * (n as f64).ln().ln().powi(4)).floor() as isize;
    l.max(2) as usize
}

/// Discretization-based initializer: quantile-bin the off-diagonal weights
/// into L levels, recombine the level indicator matrices weighted by bin
/// midpoints, and spectrally cluster the result.
pub fn db_init(
    w: &WeightedNetwork,
    k: usize,
    level: Option<usize>,
    restarts: usize,
    seed: u64,
) -> Result<DbInit> {
    let n = w.n();
    if k < 1 || k > n {
        return Err(Error::invalid_parameter(format!(
            "K must be in 1..=n, got K = {k}, n = {n}"
        )));
    }
    let requested = match level {
        Some(l) => {
            if l < 2 {
                return Err(Error::invalid_parameter(format!(
                    "discretization level must be >= 2, got {l}"
                )));
            }
            l
        }
        None => db_auto_level(n),
    };

    let mut sorted: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            sorted.push(w.weight(i, j));
        }
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m_total = sorted.len();
    let mut distinct: Vec<f64> = sorted.clone();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::invalid_parameter(
            "fewer than two distinct edge weights; cannot discretize",
        ));
    }

    let (level_used, reduced, midpoint_of): (usize, bool, Box<dyn Fn(f64) -> f64>) =
        if distinct.len() <= requested {
            // each distinct value is its own bin; the midpoint is the value
            let atoms = distinct.clone();
            (
                distinct.len(),
                distinct.len() < requested,
                Box::new(move |v: f64| {
                    let idx = atoms.partition_point(|&a| a < v);
                    atoms[idx]
                }),
            )
        } else {
            // equal-frequency bins by rank; ties share the bin of their first
            // occurrence
            let l = requested;
            let bin_of = {
                let sorted = sorted.clone();
                move |v: f64| -> usize {
                    let lower_rank = sorted.partition_point(|&a| a < v);
                    ((lower_rank * l) / m_total).min(l - 1)
                }
            };
            let mut lo = vec![f64::INFINITY; l];
            let mut hi = vec![f64::NEG_INFINITY; l];
            for &v in &sorted {
                let b = bin_of(v);
                if v < lo[b] {
                    lo[b] = v;
                }
                if v > hi[b] {
                    hi[b] = v;
                }
            }
            let mids: Vec<f64> = (0..l)
                .map(|b| {
                    if lo[b].is_finite() {
                        0.5 * (lo[b] + hi[b])
                    } else {
                        0.0 // empty bin, never referenced
                    }
                })
                .collect();
            (
                l,
                false,
                Box::new(move |v: f64| mids[bin_of(v)]),
            )
        };

    let recoded = WeightedNetwork::from_upper(n, |i, j| midpoint_of(w.weight(i, j)))?;
    let labels = spectral_init(&recoded, k, restarts, seed)?;
    Ok(DbInit {
        labels,
        level: level_used,
        level_reduced: reduced,
    })
}

/// Corrupt a true labeling so that community k keeps a uniformly random
/// round(gamma_k * n_k) of its labels. Returns the corrupted labeling and
/// its realized confusion matrix against the truth.
pub fn oracle_init(
    c: &Labeling,
    spec: &OracleSpec,
    seed: u64,
) -> Result<(Labeling, ConfusionMatrix)> {
    let k = c.k();
    if spec.gamma.len() != k {
        return Err(Error::invalid_parameter(format!(
            "need {k} gamma values, got {}",
            spec.gamma.len()
        )));
    }
    if spec.gamma.iter().any(|&g| !(g > 0.0 && g <= 1.0)) {
        return Err(Error::invalid_parameter("gamma values must lie in (0, 1]"));
    }
    if spec.mode == OracleMode::PairwiseSwap && k % 2 != 0 {
        return Err(Error::invalid_parameter(
            "pairwise_swap requires an even number of communities",
        ));
    }
    if spec.mode == OracleMode::BalancedSpread && k < 2 {
        return Err(Error::invalid_parameter(
            "balanced_spread requires K >= 2",
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..c.len() {
        members[c.index(i)].push(i);
    }
    let mut labels = c.labels().to_vec();
    for comm in 0..k {
        let mut nodes = members[comm].clone();
        let n_k = nodes.len();
        let keep = (spec.gamma[comm] * n_k as f64).round() as usize;
        let keep = keep.min(n_k);
        nodes.shuffle(&mut rng);
        let misclassified = &nodes[keep..];
        match spec.mode {
            OracleMode::PairwiseSwap => {
                let partner = if comm % 2 == 0 { comm + 1 } else { comm - 1 };
                for &i in misclassified {
                    labels[i] = partner as u32 + 1;
                }
            }
            OracleMode::BalancedSpread => {
                let others: Vec<usize> = (0..k).filter(|&l| l != comm).collect();
                let m = misclassified.len();
                let base = m / others.len();
                let extra = m % others.len();
                let mut cursor = 0usize;
                for (rank, &target) in others.iter().enumerate() {
                    let take = base + usize::from(rank < extra);
                    for &i in &misclassified[cursor..cursor + take] {
                        labels[i] = target as u32 + 1;
                    }
                    cursor += take;
                }
            }
        }
    }
    let e = Labeling::new(labels, k)?;
    let realized = confusion_matrix(&e, c)?;
    Ok((e, realized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_wsbm, BlockParams, LabelAssignment};
    use crate::pl::block_sums;

    fn two_block_noiseless(n: usize) -> (WeightedNetwork, Labeling) {
        let half = n / 2;
        let w = WeightedNetwork::from_upper(n, |i, j| {
            if (i < half) == (j < half) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let labels: Vec<u32> = (0..n).map(|i| if i < half { 1 } else { 2 }).collect();
        (w, Labeling::new(labels, 2).unwrap())
    }

    fn loss_like(a: &Labeling, b: &Labeling) -> f64 {
        crate::eval::misclassification_loss(a, b).unwrap()
    }

    #[test]
    fn spectral_recovers_noiseless_blocks() {
        let (w, truth) = two_block_noiseless(20);
        let e = spectral_init(&w, 2, 10, 42).unwrap();
        assert_eq!(loss_like(&e, &truth), 0.0);
    }

    #[test]
    fn spectral_k1_and_determinism() {
        let (w, _) = two_block_noiseless(12);
        let e = spectral_init(&w, 1, 10, 0).unwrap();
        assert!(e.labels().iter().all(|&l| l == 1));
        let a = spectral_init(&w, 2, 10, 5).unwrap();
        let b = spectral_init(&w, 2, 10, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spectral_handles_disassortative_blocks() {
        // strongest |eigenvalue| signal is negative here
        let n = 20;
        let half = n / 2;
        let w = WeightedNetwork::from_upper(n, |i, j| {
            if (i < half) == (j < half) {
                0.0
            } else {
                1.0
            }
        })
        .unwrap();
        let labels: Vec<u32> = (0..n).map(|i| if i < half { 1 } else { 2 }).collect();
        let truth = Labeling::new(labels, 2).unwrap();
        let e = spectral_init(&w, 2, 10, 1).unwrap();
        assert_eq!(loss_like(&e, &truth), 0.0);
    }

    #[test]
    fn db_auto_level_value() {
        assert_eq!(db_auto_level(264), 3);
        assert_eq!(db_auto_level(10), 2);
    }

    #[test]
    fn db_atoms_reconstruct_two_blocks() {
        let (w, truth) = two_block_noiseless(20);
        let db = db_init(&w, 2, Some(2), 10, 7).unwrap();
        assert_eq!(db.level, 2);
        assert!(!db.level_reduced);
        assert_eq!(loss_like(&db.labels, &truth), 0.0);
    }

    #[test]
    fn db_level_reduced_when_few_distinct() {
        let (w, truth) = two_block_noiseless(16);
        let db = db_init(&w, 2, Some(5), 10, 7).unwrap();
        assert_eq!(db.level, 2);
        assert!(db.level_reduced);
        assert_eq!(loss_like(&db.labels, &truth), 0.0);
    }

    #[test]
    fn db_errors_on_constant_weights() {
        let w = WeightedNetwork::from_upper(8, |_, _| 1.0).unwrap();
        assert!(db_init(&w, 2, Some(3), 5, 0).is_err());
    }

    #[test]
    fn db_quantile_bins_match_block_structure() {
        let params = BlockParams::homogeneous(2, 3.0, 0.0, 0.1).unwrap();
        let (w, truth) = sample_wsbm(60, &params, LabelAssignment::FixedCounts, 13).unwrap();
        let db = db_init(&w, 2, Some(4), 10, 3).unwrap();
        assert_eq!(db.level, 4);
        assert_eq!(loss_like(&db.labels, &truth), 0.0);
    }

    #[test]
    fn db_matches_spectral_on_atom_data() {
        let (w, _) = two_block_noiseless(20);
        // number of distinct weights is 2, so L = distinct count recodes
        // the matrix monotonically
        let db = db_init(&w, 2, Some(2), 10, 11).unwrap();
        let sc = spectral_init(&w, 2, 10, 11).unwrap();
        assert_eq!(loss_like(&db.labels, &sc), 0.0);
    }

    #[test]
    fn oracle_gamma_one_is_identity() {
        let c = Labeling::new(vec![1, 1, 1, 2, 2, 2], 2).unwrap();
        let (e, r) = oracle_init(&c, &OracleSpec::balanced(1.0, 2), 0).unwrap();
        assert_eq!(e, c);
        assert_eq!(r.mat()[(0, 0)], 0.5);
        assert_eq!(r.mat()[(0, 1)], 0.0);
    }

    #[test]
    fn oracle_balanced_realized_confusion() {
        let mut labels = vec![1u32; 10];
        labels.extend(vec![2u32; 10]);
        let c = Labeling::new(labels, 2).unwrap();
        let (_, r) = oracle_init(&c, &OracleSpec::balanced(0.8, 2), 99).unwrap();
        assert!((r.mat()[(0, 0)] - 0.4).abs() < 1e-15);
        assert!((r.mat()[(0, 1)] - 0.1).abs() < 1e-15);
        assert!((r.mat()[(1, 0)] - 0.1).abs() < 1e-15);
        assert!((r.mat()[(1, 1)] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn oracle_two_gammas() {
        let mut labels = vec![1u32; 10];
        labels.extend(vec![2u32; 10]);
        let c = Labeling::new(labels, 2).unwrap();
        let spec = OracleSpec {
            gamma: vec![0.9, 0.5],
            mode: OracleMode::PairwiseSwap,
        };
        let (e, r) = oracle_init(&c, &spec, 1).unwrap();
        assert!((r.mat()[(0, 0)] - 0.45).abs() < 1e-15);
        assert!((r.mat()[(0, 1)] - 0.25).abs() < 1e-15);
        assert!((r.mat()[(1, 0)] - 0.05).abs() < 1e-15);
        assert!((r.mat()[(1, 1)] - 0.25).abs() < 1e-15);
        // matches 9 labels in community 1, 5 in community 2
        let m1 = (0..10).filter(|&i| e.label(i) == 1).count();
        let m2 = (10..20).filter(|&i| e.label(i) == 2).count();
        assert_eq!((m1, m2), (9, 5));
    }

    #[test]
    fn oracle_spread_is_even_for_k3() {
        let mut labels = vec![1u32; 12];
        labels.extend(vec![2u32; 12]);
        labels.extend(vec![3u32; 12]);
        let c = Labeling::new(labels, 3).unwrap();
        let (e, r) = oracle_init(&c, &OracleSpec::balanced(0.5, 3), 4).unwrap();
        // each community keeps 6, spreads 3+3 over the other two
        for comm in 0..3 {
            assert!((r.mat()[(comm, comm)] - 6.0 / 36.0).abs() < 1e-15);
        }
        let counts = e.counts();
        assert_eq!(counts, vec![12, 12, 12]);
    }

    #[test]
    fn oracle_rejects_bad_gamma() {
        let c = Labeling::new(vec![1, 2], 2).unwrap();
        assert!(oracle_init(&c, &OracleSpec::balanced(0.0, 2), 0).is_err());
        assert!(oracle_init(&c, &OracleSpec::balanced(1.5, 2), 0).is_err());
    }

    #[test]
    fn db_recoding_preserves_block_sums_order() {
        // sanity: recoded matrix of noiseless blocks has the same argmax
        // structure of block sums as the original
        let (w, truth) = two_block_noiseless(10);
        let db = db_init(&w, 2, Some(2), 5, 2).unwrap();
        let s = block_sums(&w, &db.labels).unwrap();
        assert_eq!(s.n(), 10);
        assert_eq!(loss_like(&db.labels, &truth), 0.0);
    }
}
