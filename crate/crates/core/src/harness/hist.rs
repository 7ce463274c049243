use std::fmt::Write as _;

use super::{HarnessError, Result};

/// Per-class counts over `n_bins` equal-width bins spanning the pooled
/// min/max. Bins are `[lo, hi)` except the last, which is closed. Returns
/// the `n_bins + 1` edges and one count row per class.
pub fn histogram_counts(
    classes: &[Vec<f64>],
    n_bins: usize,
) -> Result<(Vec<f64>, Vec<Vec<usize>>)> {
    if n_bins == 0 {
        return Err(HarnessError::Config("n_bins must be at least 1".into()));
    }
    if let Some(c) = classes.iter().position(Vec::is_empty) {
        return Err(HarnessError::Data(format!("class {c} has no users")));
    }
    let all = classes.iter().flatten();
    if all.clone().any(|v| !v.is_finite()) {
        return Err(HarnessError::Numeric("non-finite embedding value".into()));
    }
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let edges: Vec<f64> = (0..=n_bins)
        .map(|k| {
            if k == n_bins {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n_bins as f64
            }
        })
        .collect();
    let counts = classes
        .iter()
        .map(|vals| {
            let mut row = vec![0usize; n_bins];
            for &v in vals {
                // Number of interior edges at or below v.
                let b = edges[1..n_bins].partition_point(|&e| e <= v);
                row[b] += 1;
            }
            row
        })
        .collect();
    Ok((edges, counts))
}

/// Long-format TSV: `dim class bin lo hi count`, one row per
/// (dimension, class, bin).
pub fn histogram_tsv(
    columns: &[(usize, Vec<Vec<f64>>)],
    class_names: &[String],
    n_bins: usize,
) -> Result<String> {
    let mut out = String::from("dim\tclass\tbin\tlo\thi\tcount\n");
    for (dim, classes) in columns {
        let (edges, counts) = histogram_counts(classes, n_bins)?;
        for (c, row) in counts.iter().enumerate() {
            for (b, n) in row.iter().enumerate() {
                writeln!(
                    out,
                    "{dim}\t{}\t{b}\t{}\t{}\t{n}",
                    class_names[c],
                    edges[b],
                    edges[b + 1]
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}
