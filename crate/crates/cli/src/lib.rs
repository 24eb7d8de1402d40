//! Library surface behind the `wsbm` binary: sweep configuration, the
//! replication runner, and the matrix analysis pipeline.

pub mod analyze;
pub mod config;
pub mod sweep;

use wsbm_core::error::{Error, Result};
use wsbm_core::{Mat, WeightedNetwork};

/// Entrywise arithmetic mean of equally-sized weight matrices.
pub fn average_networks(networks: &[WeightedNetwork]) -> Result<WeightedNetwork> {
    let first = networks
        .first()
        .ok_or_else(|| Error::invalid_input("need at least one matrix to average"))?;
    let n = first.n();
    for (idx, w) in networks.iter().enumerate() {
        if w.n() != n {
            return Err(Error::invalid_input(format!(
                "matrix {idx} is {}x{} but the first is {n}x{n}",
                w.n(),
                w.n()
            )));
        }
    }
    let count = networks.len() as f64;
    let mut mean = Mat::zeros(n, n);
    for w in networks {
        for i in 0..n {
            for j in 0..n {
                mean[(i, j)] += w.weight(i, j);
            }
        }
    }
    for v in mean.data_mut() {
        *v /= count;
    }
    WeightedNetwork::from_mat(&mean, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_identity_and_cancellation() {
        let a = WeightedNetwork::from_upper(3, |i, j| (i + j) as f64).unwrap();
        let avg = average_networks(&[a.clone()]).unwrap();
        assert_eq!(avg, a);

        let neg = WeightedNetwork::from_upper(3, |i, j| -((i + j) as f64)).unwrap();
        let zero = average_networks(&[a.clone(), neg]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(zero.weight(i, j), 0.0);
            }
        }
    }

    #[test]
    fn average_matches_direct_mean() {
        let ws: Vec<WeightedNetwork> = (0..3u32)
            .map(|t| {
                WeightedNetwork::from_upper(4, |i, j| {
                    ((i * 7 + j * 3 + t as usize * 11) as f64).sin()
                })
                .unwrap()
            })
            .collect();
        let avg = average_networks(&ws).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let direct = (ws[0].weight(i, j) + ws[1].weight(i, j) + ws[2].weight(i, j)) / 3.0;
                assert!((avg.weight(i, j) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn average_rejects_dimension_mismatch() {
        let a = WeightedNetwork::from_upper(3, |_, _| 1.0).unwrap();
        let b = WeightedNetwork::from_upper(4, |_, _| 1.0).unwrap();
        assert!(average_networks(&[a, b]).is_err());
    }
}
