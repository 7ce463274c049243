//! Small dense helpers shared across modules.

use ndarray::{Array2, ArrayView1};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Row `r` of a standard-layout matrix as a slice.
#[inline]
pub fn row(m: &Array2<f64>, r: usize) -> &[f64] {
    let d = m.ncols();
    &m.as_slice().expect("standard layout")[r * d..(r + 1) * d]
}

#[inline]
pub fn row_mut(m: &mut Array2<f64>, r: usize) -> &mut [f64] {
    let d = m.ncols();
    &mut m.as_slice_mut().expect("standard layout")[r * d..(r + 1) * d]
}

pub fn all_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> bool {
    values.into_iter().all(|v| v.is_finite())
}

/// Rows of `m` picked by `idx`, in that order.
pub fn gather_rows(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let d = m.ncols();
    let mut out = Array2::zeros((idx.len(), d));
    for (k, &r) in idx.iter().enumerate() {
        row_mut(&mut out, k).copy_from_slice(row(m, r));
    }
    out
}

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}
