//! Independent reference implementations and the exact-value checks built on
//! them.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use unlearn_rec::attack::auc_rank;
use unlearn_rec::recmetrics::{ndcg_hr_at_k, rank_of_positive};
use unlearn_rec::unlearning::mmd_rbf_sq;

pub type Check = Result<(), String>;

pub fn rel_close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

/// Mann-Whitney AUC by enumerating every positive/negative pair.
pub fn auc_brute(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Gaussian kernel `exp(-|a-b|^2 / (2 s^2))`.
fn k(a: &[f64], b: &[f64], s: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * s * s)).exp()
}

/// Biased squared MMD by the three double sums, and the magnitude of its
/// two within-set terms.
pub fn mmd_triple_sum(x: &Array2<f64>, y: &Array2<f64>, s: f64) -> (f64, f64) {
    let mean = |p: &Array2<f64>, q: &Array2<f64>| {
        let mut t = 0.0;
        for a in p.rows() {
            for b in q.rows() {
                t += k(a.as_slice().unwrap(), b.as_slice().unwrap(), s);
            }
        }
        t / (p.nrows() * q.nrows()) as f64
    };
    let (xx, yy, xy) = (mean(x, x), mean(y, y), mean(x, y));
    ((xx + yy - 2.0 * xy).max(0.0), xx + yy)
}

/// Direct NDCG/HR: DCG of one relevant item at 1-based `rank`.
pub fn ndcg_hr_direct(ranks: &[usize], cutoff: usize) -> (f64, f64) {
    let mut n = 0.0;
    let mut h = 0.0;
    for &r in ranks {
        if r <= cutoff {
            h += 1.0;
            n += std::f64::consts::LN_2 / ((r + 1) as f64).ln();
        }
    }
    (n / ranks.len() as f64, h / ranks.len() as f64)
}

pub fn check_metric_closed_forms() -> Check {
    let cases: [(&[usize], usize, f64, f64); 5] = [
        (&[1], 10, 1.0, 1.0),
        (&[3], 5, 0.5, 1.0),
        (&[6], 5, 0.0, 0.0),
        (&[1, 3], 5, 0.75, 1.0),
        (&[7], 10, 1.0 / 3.0, 1.0),
    ];
    for (ranks, kk, n, h) in cases {
        let (gn, gh) = ndcg_hr_at_k(ranks, kk).map_err(|e| e.to_string())?;
        if !rel_close(gn, n, n.abs().max(1.0), 1e-12) || !rel_close(gh, h, 1.0, 1e-12) {
            return Err(format!(
                "ranks {ranks:?} @{kk}: got ({gn}, {gh}), want ({n}, {h})"
            ));
        }
    }
    if rank_of_positive(0.5, &[0.5, 0.5, 0.1]) != 3 {
        return Err("ties must rank the positive after equal negatives".into());
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(1..=5);
        let ranks: Vec<usize> = (0..n).map(|_| rng.random_range(1..=10)).collect();
        for kk in [1, 5, 10] {
            let (a, b) = ndcg_hr_at_k(&ranks, kk).map_err(|e| e.to_string())?;
            let (c, d) = ndcg_hr_direct(&ranks, kk);
            if !(a == c || rel_close(a, c, c.abs(), 1e-12)) || b != d {
                return Err(format!(
                    "ranks {ranks:?} @{kk}: ({a}, {b}) vs direct ({c}, {d})"
                ));
            }
        }
    }
    Ok(())
}

pub fn check_auc_brute_force() -> Check {
    let known =
        auc_rank(&[0.9, 0.4, 0.6, 0.2], &[true, true, false, false]).map_err(|e| e.to_string())?;
    if (known - 0.75).abs() > 1e-15 {
        return Err(format!("AUC example gave {known}, want 0.75"));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
    for _ in 0..300 {
        let n_pos = rng.random_range(1..=50);
        let n_neg = rng.random_range(1..=50);
        // Coarse grid so ties are common.
        let levels = rng.random_range(2..=20);
        let mut scores = Vec::new();
        let mut pos = Vec::new();
        for i in 0..n_pos + n_neg {
            scores.push(rng.random_range(0..levels) as f64 / levels as f64);
            pos.push(i < n_pos);
        }
        let a = auc_rank(&scores, &pos).map_err(|e| e.to_string())?;
        let b = auc_brute(&scores, &pos);
        if !rel_close(a, b, b.abs(), 1e-12) {
            return Err(format!("AUC {a} vs brute force {b}"));
        }
    }
    Ok(())
}

pub fn check_mmd_oracle() -> Check {
    let single = mmd_rbf_sq(&ndarray::array![[0.0]], &ndarray::array![[1.0]], 1.0)
        .map_err(|e| e.to_string())?;
    let want = 2.0 - 2.0 * (-0.5f64).exp();
    if !rel_close(single, want, want, 1e-12) {
        return Err(format!("single-point MMD {single}, want {want}"));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(13);
    for _ in 0..500 {
        let d = rng.random_range(1..=4);
        let nx = rng.random_range(1..=4);
        let ny = rng.random_range(1..=4);
        let x = Array2::from_shape_simple_fn((nx, d), || rng.random_range(-2.0..2.0));
        let y = Array2::from_shape_simple_fn((ny, d), || rng.random_range(-2.0..2.0));
        let s = rng.random_range(0.3..3.0);
        let got = mmd_rbf_sq(&x, &y, s).map_err(|e| e.to_string())?;
        let (want, scale) = mmd_triple_sum(&x, &y, s);
        if !rel_close(got, want, want.max(1e-3 * scale), 1e-12) {
            return Err(format!("MMD {got} vs triple sum {want} (scale {scale})"));
        }
    }
    Ok(())
}
