//! File formats: CSV weight matrices, CSV label vectors, TSV edge lists.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::model::{Labeling, WeightedNetwork};

/// Symmetry tolerance applied when reading user matrices.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Read an n x n matrix of comma-separated decimal floats, no header.
/// Asymmetries beyond the tolerance are an error naming the worst entry;
/// the diagonal is forced to zero.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<WeightedNetwork> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "{}:{}: not a number: {tok:?}",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: empty matrix", path.display())));
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!(
            "{}: expected {n} columns in every row",
            path.display()
        )));
    }
    let m = Mat::from_rows(&rows)?;
    WeightedNetwork::from_mat(&m, SYMMETRY_TOL)
}

/// Write a matrix as n rows of comma-separated floats (shortest round-trip
/// decimal form).
pub fn write_matrix_csv(path: impl AsRef<Path>, w: &WeightedNetwork) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let n = w.n();
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for j in 0..n {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", w.weight(i, j)));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Read one 1-based community id per line; K is the largest id seen.
pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Labeling> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut labels: Vec<u32> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        let v: u32 = tok.parse().map_err(|_| {
            Error::Parse(format!(
                "{}:{}: not a community id: {tok:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        if v < 1 {
            return Err(Error::Parse(format!(
                "{}:{}: community ids are 1-based",
                path.display(),
                lineno + 1
            )));
        }
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(Error::Parse(format!("{}: empty labels file", path.display())));
    }
    let k = *labels.iter().max().unwrap() as usize;
    Labeling::new(labels, k)
}

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &Labeling) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..labels.len() {
        writeln!(out, "{}", labels.label(i))?;
    }
    out.flush()?;
    Ok(())
}

/// Read a TSV edge list of lines "i<TAB>j<TAB>w" with 0-based node ids.
/// Missing pairs default to weight 0. Duplicate entries for the same
/// unordered pair must agree; conflicting values are an error. When `n` is
/// not given it is inferred as max id + 1.
pub fn read_edge_list_tsv(path: impl AsRef<Path>, n: Option<usize>) -> Result<WeightedNetwork> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_id = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "{}:{}: expected i<TAB>j<TAB>w",
                path.display(),
                lineno + 1
            )));
        }
        let i: usize = parts[0].trim().parse().map_err(|_| {
            Error::Parse(format!("{}:{}: bad node id", path.display(), lineno + 1))
        })?;
        let j: usize = parts[1].trim().parse().map_err(|_| {
            Error::Parse(format!("{}:{}: bad node id", path.display(), lineno + 1))
        })?;
        let w: f64 = parts[2].trim().parse().map_err(|_| {
            Error::Parse(format!("{}:{}: bad weight", path.display(), lineno + 1))
        })?;
        if i == j {
            if w != 0.0 {
                return Err(Error::Parse(format!(
                    "{}:{}: self-loop with nonzero weight",
                    path.display(),
                    lineno + 1
                )));
            }
            continue;
        }
        max_id = max_id.max(i).max(j);
        edges.push((i, j, w));
    }
    let n = match n {
        Some(n) => {
            if max_id >= n {
                return Err(Error::invalid_input(format!(
                    "node id {max_id} out of range for n = {n}"
                )));
            }
            n
        }
        None => max_id + 1,
    };
    let mut w = vec![f64::NAN; n * n];
    for (i, j, v) in edges {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let idx = lo * n + hi;
        if w[idx].is_nan() {
            w[idx] = v;
        } else if w[idx] != v {
            return Err(Error::Parse(format!(
                "{}: conflicting duplicate weights for pair ({lo}, {hi}): {} vs {v}",
                path.display(),
                w[idx]
            )));
        }
    }
    WeightedNetwork::from_upper(n, |i, j| {
        let v = w[i * n + j];
        if v.is_nan() {
            0.0
        } else {
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpfile(contents: &str) -> std::path::PathBuf {
        use std::sync::atomic::{AtomicU64, Ordering};
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let id = COUNTER.fetch_add(1, Ordering::SeqCst);
        let path = std::env::temp_dir().join(format!(
            "wsbm-core-io-test-{}-{id}",
            std::process::id()
        ));
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn matrix_roundtrip_is_exact() {
        let w = WeightedNetwork::from_upper(4, |i, j| (i * 10 + j) as f64 / 7.0).unwrap();
        let path = std::env::temp_dir().join(format!("wsbm-roundtrip-{}", std::process::id()));
        write_matrix_csv(&path, &w).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(w, back);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn matrix_rejects_asymmetry() {
        let path = tmpfile("0,1.0,2.0\n1.0,0,3.0\n2.5,3.0,0\n");
        let err = read_matrix_csv(&path).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("0") && msg.contains("2"), "message was {msg}");
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn matrix_zeroes_diagonal() {
        let path = tmpfile("5.0,1.0\n1.0,5.0\n");
        let w = read_matrix_csv(&path).unwrap();
        assert_eq!(w.weight(0, 0), 0.0);
        assert_eq!(w.weight(0, 1), 1.0);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn labels_roundtrip() {
        let path = tmpfile("1\n2\n1\n3\n");
        let l = read_labels_csv(&path).unwrap();
        assert_eq!(l.labels(), &[1, 2, 1, 3]);
        assert_eq!(l.k(), 3);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn edge_list_defaults_missing_to_zero() {
        let path = tmpfile("0\t1\t2.5\n2\t0\t-1.0\n");
        let w = read_edge_list_tsv(&path, None).unwrap();
        assert_eq!(w.n(), 3);
        assert_eq!(w.weight(0, 1), 2.5);
        assert_eq!(w.weight(0, 2), -1.0);
        assert_eq!(w.weight(1, 2), 0.0);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn edge_list_duplicate_handling() {
        let ok = tmpfile("0\t1\t2.5\n1\t0\t2.5\n");
        assert!(read_edge_list_tsv(&ok, None).is_ok());
        std::fs::remove_file(ok).ok();

        let bad = tmpfile("0\t1\t2.5\n1\t0\t2.6\n");
        assert!(read_edge_list_tsv(&bad, None).is_err());
        std::fs::remove_file(bad).ok();
    }
}
