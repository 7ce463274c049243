//! Central finite-difference checks of every analytic gradient.

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use unlearn_rec::recmodels::{bpr_loss, bpr_loss_and_grad, Triple};
use unlearn_rec::unlearning::{
    median_pairwise_distance, mmd_by_class, mmd_by_class_grad, regularization_grad,
    regularization_loss, u2u_distinguishability, u2u_grad, CrossClassMatching,
};
use unlearn_rec::AttributeLabels;

use super::oracles::Check;

pub const STEP: f64 = 1e-4;
pub const TOL: f64 = 1e-3;
/// Entries whose true gradient is this small are compared absolutely.
const FLOOR: f64 = 1e-6;

/// Compares `grad` with central differences of `f` entry by entry.
pub fn compare(
    name: &str,
    x: &Array2<f64>,
    grad: &Array2<f64>,
    f: impl Fn(&Array2<f64>) -> f64,
) -> Check {
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let mut plus = x.clone();
        plus[[r, c]] += STEP;
        let mut minus = x.clone();
        minus[[r, c]] -= STEP;
        let fd = (f(&plus) - f(&minus)) / (2.0 * STEP);
        let an = grad[[r, c]];
        let err = (fd - an).abs() / fd.abs().max(an.abs()).max(FLOOR);
        if err > TOL {
            return Err(format!(
                "{name}: entry ({r},{c}) analytic {an:e} vs finite difference {fd:e}"
            ));
        }
    }
    Ok(())
}

fn toy(rng: &mut Xoshiro256PlusPlus, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn labels(v: Vec<usize>, c: usize) -> AttributeLabels {
    AttributeLabels::new(v, (0..c).map(|k| format!("c{k}")).collect()).unwrap()
}

pub fn check_bpr() -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(21);
    let users = toy(&mut rng, 5, 4);
    let items = toy(&mut rng, 7, 4);
    let triples: Vec<Triple> = (0..12)
        .map(|k| Triple {
            user: k % 5,
            pos: rng.random_range(0..7),
            neg: rng.random_range(0..7),
        })
        .collect();
    for l2 in [0.0, 1e-2] {
        let (_, gu, gi) = bpr_loss_and_grad(&users, &items, &triples, l2);
        compare("bpr users", &users, &gu, |u| {
            bpr_loss(u, &items, &triples, l2)
        })?;
        compare("bpr items", &items, &gi, |i| {
            bpr_loss(&users, i, &triples, l2)
        })?;
    }
    Ok(())
}

pub fn check_mmd() -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(22);
    let cases = [
        (labels(vec![0, 1, 0, 1, 1, 0], 2), 3),
        (labels(vec![0, 1, 2, 0, 1, 2], 3), 2),
        (labels(vec![1, 1, 1, 1, 1, 0], 2), 5),
    ];
    for (l, d) in cases {
        let z = toy(&mut rng, 6, d);
        let bw = median_pairwise_distance(&z);
        let (_, g) =
            mmd_by_class_grad(&z, l.labels(), l.n_classes(), bw).map_err(|e| e.to_string())?;
        compare("mmd", &z, &g, |z| {
            mmd_by_class(z, l.labels(), l.n_classes(), bw).unwrap()
        })?;
    }
    Ok(())
}

pub fn check_u2u() -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(23);
    for (l, seed) in [
        (labels(vec![0, 1, 0, 1, 1, 0], 2), 0),
        (labels(vec![0, 0, 0, 0, 1, 1], 2), 3),
        (labels(vec![0, 1, 2, 2, 1, 0], 3), 1),
    ] {
        let m = CrossClassMatching::new(&l, seed).map_err(|e| e.to_string())?;
        let z = toy(&mut rng, 6, 3);
        let (_, g) = u2u_grad(&z, &m);
        compare("u2u", &z, &g, |z| u2u_distinguishability(z, &m))?;
    }
    Ok(())
}

pub fn check_regularizer() -> Check {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(24);
    let e0 = toy(&mut rng, 6, 3);
    let e = &e0 + &toy(&mut rng, 6, 3);
    let (_, g) = regularization_grad(&e, &e0).map_err(|e| e.to_string())?;
    compare("regularizer", &e, &g, |e| {
        regularization_loss(e, &e0).unwrap()
    })?;
    let same = regularization_grad(&e0, &e0).map_err(|e| e.to_string())?;
    if same.0 != 0.0 || same.1.iter().any(|&v| v != 0.0) {
        return Err("regularizer at the anchor must be exactly zero".into());
    }
    let v = regularization_loss(&array![[1.0, 2.0]], &array![[0.0, 0.0]]).unwrap();
    if v != 5.0 {
        return Err(format!("regularizer example gave {v}, want 5"));
    }
    Ok(())
}
