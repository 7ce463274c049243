//! Squared maximum mean discrepancy with a Gaussian kernel.
//!
//! For a set of classes the term is the sum over unordered class pairs of
//! the biased estimator
//!
//! ```text
//! mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y),   k(a,b) = exp(-|a-b|^2 / (2 s^2)).
//! ```
//!
//! Writing `c_a = 1/|X|` on X and `-1/|Y|` on Y, a pair's estimate is
//! `c^T K c`, and the gradient for row `a` is
//! `-(2 c_a / s^2) (z_a (K c)_a - (K (c * Z))_a)`. Both are accumulated in
//! row blocks so the kernel matrix is never held in full.

use ndarray::{s, Array1, Array2, Axis};

use super::{Result, UnlearnError};

const BLOCK: usize = 256;

/// Groups rows by class, rejecting empty classes.
pub(crate) fn class_weights(
    labels: &[usize],
    n_classes: usize,
) -> Result<Vec<(usize, usize, Array1<f64>)>> {
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(UnlearnError::EmptyClass(c));
    }
    let mut pairs = Vec::new();
    for p in 0..n_classes {
        for q in p + 1..n_classes {
            let c = labels
                .iter()
                .map(|&l| {
                    if l == p {
                        1.0 / counts[p] as f64
                    } else if l == q {
                        -1.0 / counts[q] as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            pairs.push((p, q, c));
        }
    }
    Ok(pairs)
}

fn sq_norms(z: &Array2<f64>) -> Array1<f64> {
    z.map_axis(Axis(1), |r| r.dot(&r))
}

/// Kernel rows `start..end` against all rows.
fn kernel_block(
    z: &Array2<f64>,
    norms: &Array1<f64>,
    start: usize,
    end: usize,
    gamma: f64,
) -> Array2<f64> {
    let block = z.slice(s![start..end, ..]);
    let mut k = block.dot(&z.t());
    for (i, mut row) in k.axis_iter_mut(Axis(0)).enumerate() {
        let ni = norms[start + i];
        let zi = z.row(start + i);
        for (j, v) in row.iter_mut().enumerate() {
            let scale = ni + norms[j];
            let mut d2 = scale - 2.0 * *v;
            // The Gram form cancels for nearby points; recompute those exactly.
            if d2 < 1e-3 * scale {
                d2 = zi
                    .iter()
                    .zip(z.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
            }
            *v = (-gamma * d2).exp();
        }
        // Exact zero distance on the diagonal regardless of rounding.
        row[start + i] = 1.0;
    }
    k
}

fn check_bandwidth(bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(UnlearnError::Config(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(1.0 / (2.0 * bandwidth * bandwidth))
}

/// Sum over class pairs of the squared MMD, before clamping.
fn mmd_raw(
    z: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    bandwidth: f64,
    want_grad: bool,
) -> Result<(f64, Option<Array2<f64>>)> {
    let gamma = check_bandwidth(bandwidth)?;
    let pairs = class_weights(labels, n_classes)?;
    let n = z.nrows();
    let norms = sq_norms(z);
    let mut value = 0.0;
    let mut grad = want_grad.then(|| Array2::<f64>::zeros(z.raw_dim()));
    let weighted: Vec<Array2<f64>> = if want_grad {
        pairs
            .iter()
            .map(|(_, _, c)| z * &c.view().insert_axis(Axis(1)))
            .collect()
    } else {
        Vec::new()
    };
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let k = kernel_block(z, &norms, start, end, gamma);
        for (idx, (_, _, c)) in pairs.iter().enumerate() {
            let kc = k.dot(c);
            value += c.slice(s![start..end]).dot(&kc);
            if let Some(g) = grad.as_mut() {
                let kcz = k.dot(&weighted[idx]);
                for i in 0..end - start {
                    let a = start + i;
                    let scale = -2.0 * c[a] * 2.0 * gamma;
                    if scale == 0.0 {
                        continue;
                    }
                    let mut grow = g.row_mut(a);
                    let zrow = z.row(a);
                    for d in 0..z.ncols() {
                        grow[d] += scale * (zrow[d] * kc[i] - kcz[[i, d]]);
                    }
                }
            }
        }
        start = end;
    }
    Ok((value, grad))
}

/// Squared MMD between two sets of row vectors, clamped at 0.
pub fn mmd_rbf_sq(x: &Array2<f64>, y: &Array2<f64>, bandwidth: f64) -> Result<f64> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(UnlearnError::EmptyClass(if x.nrows() == 0 { 0 } else { 1 }));
    }
    if x.ncols() != y.ncols() {
        return Err(UnlearnError::Shape(format!(
            "{} vs {} columns",
            x.ncols(),
            y.ncols()
        )));
    }
    // Fixed operand order makes the result bitwise symmetric in (x, y).
    let key = |m: &Array2<f64>| (m.nrows(), m.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    let (x, y) = if key(x) <= key(y) { (x, y) } else { (y, x) };
    let z = ndarray::concatenate(Axis(0), &[x.view(), y.view()]).expect("same width");
    let labels: Vec<usize> = (0..z.nrows())
        .map(|r| usize::from(r >= x.nrows()))
        .collect();
    Ok(mmd_raw(&z, &labels, 2, bandwidth, false)?.0.max(0.0))
}

/// Class-pair squared MMD of `z` grouped by `labels`, clamped at 0.
pub fn mmd_by_class(
    z: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    bandwidth: f64,
) -> Result<f64> {
    Ok(mmd_raw(z, labels, n_classes, bandwidth, false)?.0.max(0.0))
}

/// [`mmd_by_class`] and its gradient with respect to every row of `z`.
pub fn mmd_by_class_grad(
    z: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    bandwidth: f64,
) -> Result<(f64, Array2<f64>)> {
    let (v, g) = mmd_raw(z, labels, n_classes, bandwidth, true)?;
    Ok((v.max(0.0), g.expect("gradient requested")))
}

/// Median Euclidean distance over all distinct row pairs; 1 when the rows
/// coincide or there is only one row.
pub fn median_pairwise_distance(z: &Array2<f64>) -> f64 {
    let n = z.nrows();
    if n < 2 {
        return 1.0;
    }
    let norms = sq_norms(z);
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let g = z.slice(s![start..end, ..]).dot(&z.t());
        for i in start..end {
            for j in i + 1..n {
                let scale = norms[i] + norms[j];
                let mut d2 = scale - 2.0 * g[[i - start, j]];
                if d2 < 1e-3 * scale {
                    d2 = crate::linalg::sq_dist(
                        z.row(i).as_slice().expect("row-major"),
                        z.row(j).as_slice().expect("row-major"),
                    );
                }
                d.push(d2.sqrt());
            }
        }
        start = end;
    }
    let m = d.len();
    let (_, &mut hi, _) = d.select_nth_unstable_by(m / 2, f64::total_cmp);
    let med = if m % 2 == 1 {
        hi
    } else {
        let lo = d[..m / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}
