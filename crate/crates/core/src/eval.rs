//! Misclassification loss under label permutation, the assignment solver
//! behind it, pairwise labeling mismatch, and overlap tables against a
//! reference partition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::model::Labeling;

/// Minimum total cost of a perfect assignment; shortest augmenting path
/// formulation with dual potentials, O(k^3). Handles negative entries.
fn assignment_min_cost(cost: &Mat, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    if k == 0 {
        return 0.0;
    }
    // potentials and matching over the 1-based internal arrays
    let mut u = vec![0.0f64; k + 1];
    let mut v = vec![0.0f64; k + 1];
    let mut way = vec![0usize; k + 1];
    let mut matched_col = vec![0usize; k + 1]; // col -> row (1-based, 0 = free)
    for i in 1..=k {
        matched_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = matched_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost[(rows[i0 - 1], cols[j - 1])] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[matched_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_col[j0] = matched_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=k {
        if matched_col[j] != 0 {
            total += cost[(rows[matched_col[j] - 1], cols[j - 1])];
        }
    }
    total
}

/// Minimum-cost perfect assignment on a square cost matrix. Among all
/// minimum-cost assignments the lexicographically smallest permutation
/// (by row order) is returned, together with the total cost.
pub fn hungarian_match(cost: &Mat) -> Result<(Vec<usize>, f64)> {
    if !cost.is_square() {
        return Err(Error::invalid_input(format!(
            "cost matrix must be square, got {}x{}",
            cost.rows(),
            cost.cols()
        )));
    }
    if cost.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_input("cost matrix entries must be finite"));
    }
    let k = cost.rows();
    let mut free_cols: Vec<usize> = (0..k).collect();
    let mut perm = vec![0usize; k];
    let mut total = 0.0;
    // fix rows in order; for each row pick the smallest column index whose
    // forced continuation still attains the global minimum
    for r in 0..k {
        let remaining_rows: Vec<usize> = ((r + 1)..k).collect();
        let mut best_col = free_cols[0];
        let mut best_val = f64::INFINITY;
        for &c in &free_cols {
            let rest: Vec<usize> = free_cols.iter().copied().filter(|&x| x != c).collect();
            let v = cost[(r, c)] + assignment_min_cost(cost, &remaining_rows, &rest);
            if v < best_val {
                best_val = v;
                best_col = c;
            }
        }
        perm[r] = best_col;
        total += cost[(r, best_col)];
        free_cols.retain(|&c| c != best_col);
    }
    Ok((perm, total))
}

/// Agreement counts between two labelings, zero-padded to a common square
/// size when the community counts differ.
fn agreement_counts(chat: &Labeling, c: &Labeling) -> Result<Mat> {
    if chat.len() != c.len() {
        return Err(Error::invalid_input(format!(
            "labeling lengths differ: {} vs {}",
            chat.len(),
            c.len()
        )));
    }
    let k = chat.k().max(c.k());
    let mut counts = Mat::zeros(k, k);
    for i in 0..chat.len() {
        counts[(chat.index(i), c.index(i))] += 1.0;
    }
    Ok(counts)
}

/// Fraction of misclassified nodes minimized over all permutations of the
/// community labels, computed by assignment on the negated agreement counts.
pub fn misclassification_loss(chat: &Labeling, c: &Labeling) -> Result<f64> {
    let counts = agreement_counts(chat, c)?;
    let negated = counts.scale(-1.0);
    let (_, neg_agreement) = hungarian_match(&negated)?;
    let matched = -neg_agreement;
    Ok((chat.len() as f64 - matched) / chat.len() as f64)
}

/// Loss plus the maximizing permutation and the agreement counts; used by
/// the CLI `eval` output.
pub fn loss_with_permutation(chat: &Labeling, c: &Labeling) -> Result<(f64, Vec<usize>, Mat)> {
    let counts = agreement_counts(chat, c)?;
    let negated = counts.scale(-1.0);
    let (perm, neg_agreement) = hungarian_match(&negated)?;
    let matched = -neg_agreement;
    let loss = (chat.len() as f64 - matched) / chat.len() as f64;
    Ok((loss, perm, counts))
}

/// Proportion of differently-labeled nodes between two labelings after the
/// best label permutation. Identical to the misclassification loss, which is
/// symmetric in its arguments by construction.
pub fn mismatch_proportion(e1: &Labeling, e2: &Labeling) -> Result<f64> {
    misclassification_loss(e1, e2)
}

/// One row of an overlap table: the reference communities attaining the
/// maximum overlap with an estimated community.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapRow {
    pub est_community: u32,
    pub best_ref_communities: Vec<u32>,
    /// max over reference communities of |est and ref| / |est|; None when the
    /// estimated community is empty.
    pub overlap: Option<f64>,
}

/// Proportion of common nodes of each estimated community with its
/// best-matching reference communities. Lists every reference community
/// attaining the maximum.
pub fn overlap_table(est: &Labeling, reference: &Labeling) -> Result<Vec<OverlapRow>> {
    if est.len() != reference.len() {
        return Err(Error::invalid_input(format!(
            "labeling lengths differ: {} vs {}",
            est.len(),
            reference.len()
        )));
    }
    let ke = est.k();
    let kr = reference.k();
    let mut joint = vec![vec![0usize; kr]; ke];
    let mut est_size = vec![0usize; ke];
    for i in 0..est.len() {
        joint[est.index(i)][reference.index(i)] += 1;
        est_size[est.index(i)] += 1;
    }
    let mut rows = Vec::with_capacity(ke);
    for k in 0..ke {
        if est_size[k] == 0 {
            rows.push(OverlapRow {
                est_community: k as u32 + 1,
                best_ref_communities: Vec::new(),
                overlap: None,
            });
            continue;
        }
        let best = *joint[k].iter().max().unwrap();
        let best_refs: Vec<u32> = joint[k]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == best && best > 0)
            .map(|(r, _)| r as u32 + 1)
            .collect();
        rows.push(OverlapRow {
            est_community: k as u32 + 1,
            best_ref_communities: best_refs,
            overlap: Some(best as f64 / est_size[k] as f64),
        });
    }
    Ok(rows)
}

/// Relabel `est` so that its community ids line up with the reference under
/// the maximum-agreement assignment; communities padded beyond the reference
/// keep their position in the permutation.
pub fn align_to_reference(est: &Labeling, reference: &Labeling) -> Result<Labeling> {
    let counts = agreement_counts(est, reference)?;
    let (perm, _) = hungarian_match(&counts.scale(-1.0))?;
    let k = counts.rows();
    let relabeled: Vec<usize> = (0..est.len()).map(|i| perm[est.index(i)]).collect();
    Labeling::from_indices(relabeled, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(v: Vec<u32>, k: usize) -> Labeling {
        Labeling::new(v, k).unwrap()
    }

    #[test]
    fn hungarian_simple_cases() {
        let m = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (perm, cost) = hungarian_match(&m).unwrap();
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(cost, 0.0);

        let m = Mat::from_rows(&[
            vec![0.0, 9.0, 9.0],
            vec![9.0, 0.0, 9.0],
            vec![9.0, 9.0, 0.0],
        ])
        .unwrap();
        let (perm, cost) = hungarian_match(&m).unwrap();
        assert_eq!(perm, vec![0, 1, 2]);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn hungarian_hand_instance() {
        let m = Mat::from_rows(&[
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ])
        .unwrap();
        let (perm, cost) = hungarian_match(&m).unwrap();
        assert_eq!(cost, 5.0);
        assert_eq!(perm, vec![1, 0, 2]);
    }

    #[test]
    fn hungarian_tie_break_lexicographic() {
        // every permutation costs 2; identity is lexicographically smallest
        let m = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let (perm, cost) = hungarian_match(&m).unwrap();
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(cost, 2.0);
    }

    #[test]
    fn hungarian_rejects_non_square() {
        let m = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!(hungarian_match(&m).is_err());
    }

    #[test]
    fn hungarian_negative_entries() {
        let m = Mat::from_rows(&[vec![-5.0, 0.0], vec![0.0, -5.0]]).unwrap();
        let (perm, cost) = hungarian_match(&m).unwrap();
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(cost, -10.0);
    }

    #[test]
    fn loss_examples() {
        let c = lab(vec![1, 1, 2, 2], 2);
        assert_eq!(misclassification_loss(&c, &c).unwrap(), 0.0);

        let swapped = lab(vec![2, 2, 1, 1], 2);
        assert_eq!(misclassification_loss(&swapped, &c).unwrap(), 0.0);

        let interleaved = lab(vec![1, 2, 1, 2], 2);
        assert_eq!(misclassification_loss(&interleaved, &c).unwrap(), 0.5);
    }

    #[test]
    fn loss_constant_predictor_on_balanced_truth() {
        let c = lab(vec![1, 1, 2, 2, 3, 3], 3);
        let constant = lab(vec![1; 6], 3);
        let loss = misclassification_loss(&constant, &c).unwrap();
        assert!((loss - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn loss_handles_mismatched_k() {
        let est = lab(vec![1, 1, 2, 2], 2);
        let reference = lab(vec![1, 1, 2, 3], 3);
        let loss = misclassification_loss(&est, &reference).unwrap();
        assert!((loss - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mismatch_is_symmetric() {
        let a = lab(vec![1, 2, 3, 1, 2, 3, 1, 2], 3);
        let b = lab(vec![2, 2, 1, 3, 3, 1, 1, 2], 3);
        assert_eq!(
            mismatch_proportion(&a, &b).unwrap(),
            mismatch_proportion(&b, &a).unwrap()
        );
    }

    #[test]
    fn overlap_identity() {
        let c = lab(vec![1, 1, 2, 2, 3], 3);
        let rows = overlap_table(&c, &c).unwrap();
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(row.est_community, k as u32 + 1);
            assert_eq!(row.best_ref_communities, vec![k as u32 + 1]);
            assert_eq!(row.overlap, Some(1.0));
        }
    }

    #[test]
    fn overlap_split_lists_all_maximizers() {
        // estimated community 1 = 10 nodes split 4/4/2 over refs 1,2,3
        let est = lab(vec![1; 10], 1);
        let reference = lab(
            vec![1, 1, 1, 1, 2, 2, 2, 2, 3, 3],
            3,
        );
        let rows = overlap_table(&est, &reference).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].best_ref_communities, vec![1, 2]);
        assert_eq!(rows[0].overlap, Some(0.4));
    }

    #[test]
    fn overlap_subset_is_one() {
        let est = lab(vec![1, 1, 2, 2, 2], 2);
        let reference = lab(vec![1, 1, 1, 1, 2], 2);
        let rows = overlap_table(&est, &reference).unwrap();
        assert_eq!(rows[0].overlap, Some(1.0));
    }

    #[test]
    fn overlap_empty_estimated_community() {
        let est = lab(vec![1, 1, 3, 3], 3); // community 2 is empty
        let reference = lab(vec![1, 1, 2, 2], 2);
        let rows = overlap_table(&est, &reference).unwrap();
        assert_eq!(rows[1].overlap, None);
        assert!(rows[1].best_ref_communities.is_empty());
    }

    #[test]
    fn align_relabels_toward_reference() {
        let est = lab(vec![2, 2, 1, 1], 2);
        let reference = lab(vec![1, 1, 2, 2], 2);
        let aligned = align_to_reference(&est, &reference).unwrap();
        assert_eq!(aligned.labels(), reference.labels());
    }
}
