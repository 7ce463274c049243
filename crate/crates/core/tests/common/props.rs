//! Strategies and property bodies. Each property returns a proptest
//! `TestCaseError` so it can run under `proptest!` or a bare `TestRunner`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use unlearn_rec::dataio::{
    filter_min_interactions, leave_one_out_split, DataError, Interaction, InteractionDataset,
    RawInteraction,
};
use unlearn_rec::recmetrics::{ndcg_hr_at_k, rank_of_positive};
use unlearn_rec::recmodels::{build_norm_adjacency, lightgcn_propagate};
use unlearn_rec::unlearning::{
    median_pairwise_distance, mmd_rbf_sq, run_unlearn, unlearn_post_training, CrossClassMatching,
    Distinguishability,
};
use unlearn_rec::{
    AttributeLabels, EmbeddingModel, EvalSplit, ModelKind, TrainHyperparams, UnlearnHyperparams,
    UnlearnMethod,
};

pub type PropResult = Result<(), TestCaseError>;

fn raw(u: usize, i: usize, t: i64) -> RawInteraction {
    RawInteraction {
        user_id: format!("u{u}"),
        item_id: format!("i{i}"),
        rating: 1.0,
        timestamp: t,
    }
}

/// Up to 12 users × 15 items, possibly with repeated pairs and tied
/// timestamps.
pub fn raw_ratings() -> impl Strategy<Value = Vec<RawInteraction>> {
    prop::collection::vec((0usize..12, 0usize..15, 0i64..20), 1..120)
        .prop_map(|rows| rows.into_iter().map(|(u, i, t)| raw(u, i, t)).collect())
}

/// Brute-force fixed point: surviving (user, item) id sets.
fn reference_filter(raw: &[RawInteraction], k: usize) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut alive: Vec<&RawInteraction> = raw.iter().collect();
    loop {
        let mut uc: BTreeMap<&str, usize> = BTreeMap::new();
        let mut ic: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &alive {
            *uc.entry(&r.user_id).or_default() += 1;
            *ic.entry(&r.item_id).or_default() += 1;
        }
        let before = alive.len();
        alive.retain(|r| uc[r.user_id.as_str()] >= k && ic[r.item_id.as_str()] >= k);
        if alive.len() == before {
            return (
                alive.iter().map(|r| r.user_id.clone()).collect(),
                alive.iter().map(|r| r.item_id.clone()).collect(),
            );
        }
    }
}

pub fn prop_fixed_point_filtering(raw: Vec<RawInteraction>, k: usize) -> PropResult {
    let (users, items) = reference_filter(&raw, k);
    match filter_min_interactions(&raw, k) {
        Err(DataError::EmptyDataset) => prop_assert!(users.is_empty()),
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
        Ok(ds) => {
            let (ud, id) = ds.degrees();
            prop_assert!(ud.iter().all(|&d| d >= k), "user degrees {:?}", ud);
            prop_assert!(id.iter().all(|&d| d >= k), "item degrees {:?}", id);
            let mut recount_u = vec![0usize; ds.n_users()];
            let mut recount_i = vec![0usize; ds.n_items()];
            for it in ds.interactions() {
                recount_u[it.user] += 1;
                recount_i[it.item] += 1;
            }
            prop_assert!(recount_u.iter().chain(&recount_i).all(|&d| d >= k));
            prop_assert_eq!(
                ds.user_ids().iter().cloned().collect::<BTreeSet<_>>(),
                users
            );
            prop_assert_eq!(
                ds.item_ids().iter().cloned().collect::<BTreeSet<_>>(),
                items
            );
        }
    }
    Ok(())
}

/// Split partition and negative purity on whatever survives `k = 2`.
pub fn prop_split_purity(raw: Vec<RawInteraction>, n_neg: usize, seed: u64) -> PropResult {
    let Ok(ds) = filter_min_interactions(&raw, 2) else {
        return Ok(());
    };
    let split = match leave_one_out_split(&ds, n_neg, seed) {
        Ok(s) => s,
        Err(DataError::NotEnoughNegatives { .. } | DataError::TooFewInteractions { .. }) => {
            return Ok(())
        }
        Err(e) => return Err(TestCaseError::fail(e.to_string())),
    };
    for (u, case) in split.test.iter().enumerate() {
        let original = ds.positives(u);
        let train = split.train.positives(u);
        prop_assert!(!train.contains(&case.positive));
        let mut union = train.clone();
        union.insert(case.positive);
        prop_assert_eq!(&union, original);
        prop_assert_eq!(case.negatives.len(), n_neg);
        let distinct: BTreeSet<usize> = case.negatives.iter().copied().collect();
        prop_assert_eq!(distinct.len(), n_neg);
        prop_assert!(distinct
            .iter()
            .all(|i| !original.contains(i) && *i < ds.n_items()));
    }
    let again = leave_one_out_split(&ds, n_neg, seed).unwrap();
    prop_assert_eq!(again, split);
    Ok(())
}

/// A bipartite graph in which every user and item has an edge.
pub fn bipartite() -> impl Strategy<Value = InteractionDataset> {
    (1usize..7, 1usize..7)
        .prop_flat_map(|(nu, ni)| {
            (
                Just(nu),
                Just(ni),
                prop::collection::vec(any::<bool>(), nu * ni),
            )
        })
        .prop_map(|(nu, ni, mask)| {
            let mut edges: BTreeSet<(usize, usize)> = (0..nu * ni)
                .filter(|&k| mask[k])
                .map(|k| (k / ni, k % ni))
                .collect();
            for u in 0..nu {
                edges.insert((u, u % ni));
            }
            for i in 0..ni {
                edges.insert((i % nu, i));
            }
            let rows = edges
                .into_iter()
                .map(|(user, item)| Interaction {
                    user,
                    item,
                    rating: 1.0,
                    timestamp: 0,
                })
                .collect();
            InteractionDataset::new(
                (0..nu).map(|u| format!("u{u}")).collect(),
                (0..ni).map(|i| format!("i{i}")).collect(),
                rows,
            )
            .unwrap()
        })
}

pub fn prop_spectral_bound(ds: InteractionDataset) -> PropResult {
    let adj = build_norm_adjacency(&ds).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let dense = adj.to_dense();
    let n = dense.nrows();
    let m = DMatrix::from_fn(n, n, |r, c| dense[[r, c]]);
    prop_assert!(
        (&m - m.transpose()).amax() == 0.0,
        "adjacency must be symmetric"
    );
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.amax();
    prop_assert!(top <= 1.0 + 1e-12, "largest |eigenvalue| {}", top);
    Ok(())
}

pub fn prop_propagation_linear(
    ds: InteractionDataset,
    layers: usize,
    alpha: f64,
    seed: u64,
) -> PropResult {
    use rand::{Rng, SeedableRng};
    let adj = build_norm_adjacency(&ds).unwrap();
    let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
    let d = 3;
    let user_emb = Array2::from_shape_simple_fn((ds.n_users(), d), || rng.random_range(-1.0..1.0));
    let item_emb = Array2::from_shape_simple_fn((ds.n_items(), d), || rng.random_range(-1.0..1.0));
    let model = EmbeddingModel {
        kind: ModelKind::LightGcn,
        user_emb: user_emb.clone(),
        item_emb: item_emb.clone(),
        layers,
    };
    let scaled = EmbeddingModel {
        user_emb: user_emb * alpha,
        item_emb: item_emb * alpha,
        ..model.clone()
    };
    let (u1, i1) = lightgcn_propagate(&model, &adj).unwrap();
    let (u2, i2) = lightgcn_propagate(&scaled, &adj).unwrap();
    // Relative to the output scale: single entries can cancel to near zero.
    let scale = alpha.abs()
        * u1.iter()
            .chain(i1.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in u1.iter().chain(i1.iter()).zip(u2.iter().chain(i2.iter())) {
        let want = alpha * a;
        prop_assert!((b - want).abs() <= 1e-12 * scale, "{} vs {}", b, want);
    }
    // Symmetric operator: <A x, y> = <x, A y>.
    let x = Array2::from_shape_simple_fn((adj.n_nodes(), 2), || rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_simple_fn((adj.n_nodes(), 2), || rng.random_range(-1.0..1.0));
    let lhs = (&adj.apply(&x) * &y).sum();
    let rhs = (&x * &adj.apply(&y)).sum();
    prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    Ok(())
}

pub fn prop_metric_monotone(ranks: Vec<usize>) -> PropResult {
    let (n5, h5) = ndcg_hr_at_k(&ranks, 5).unwrap();
    let (n10, h10) = ndcg_hr_at_k(&ranks, 10).unwrap();
    let (_, h100) = ndcg_hr_at_k(&ranks, 100).unwrap();
    prop_assert!(n5 <= n10 && h5 <= h10);
    prop_assert!(
        (0.0..=1.0).contains(&n5) && (0.0..=1.0).contains(&n10) && (0.0..=1.0).contains(&h10)
    );
    prop_assert_eq!(h100, 1.0);
    prop_assert!(n10 <= h10);
    Ok(())
}

/// Scores on a 1/8 grid so the transforms below are exact and injective.
pub fn prop_score_order_invariance(pos: i32, negs: Vec<i32>) -> PropResult {
    let s = |v: i32| v as f64 / 8.0;
    let base = rank_of_positive(s(pos), &negs.iter().map(|&v| s(v)).collect::<Vec<_>>());
    let transforms: [fn(f64) -> f64; 3] = [|x| 2.0 * x, |x| x.exp(), |x| x * x * x + 4.0];
    for f in transforms {
        let r = rank_of_positive(
            f(s(pos)),
            &negs.iter().map(|&v| f(s(v))).collect::<Vec<_>>(),
        );
        prop_assert_eq!(r, base);
    }
    prop_assert!(base >= 1 && base <= negs.len() + 1);
    Ok(())
}

pub fn prop_mmd_symmetric(x: Vec<f64>, y: Vec<f64>, d: usize, s: f64) -> PropResult {
    let (nx, ny) = (x.len() / d, y.len() / d);
    let xm = Array2::from_shape_vec((nx, d), x[..nx * d].to_vec()).unwrap();
    let ym = Array2::from_shape_vec((ny, d), y[..ny * d].to_vec()).unwrap();
    let a = mmd_rbf_sq(&xm, &ym, s).unwrap();
    let b = mmd_rbf_sq(&ym, &xm, s).unwrap();
    prop_assert_eq!(a.to_bits(), b.to_bits());
    prop_assert!((0.0..=2.0 + 1e-12).contains(&a));
    Ok(())
}

fn toy_model(seed: u64, n_users: usize, n_items: usize) -> EmbeddingModel {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
    EmbeddingModel {
        kind: ModelKind::Mf,
        user_emb: Array2::from_shape_simple_fn((n_users, 4), || rng.random_range(-1.0..1.0)),
        item_emb: Array2::from_shape_simple_fn((n_items, 4), || rng.random_range(-1.0..1.0)),
        layers: 0,
    }
}

/// A three-user, three-item split only used for its shape.
fn tiny_split(n_users: usize) -> EvalSplit {
    let rows: Vec<Interaction> = (0..n_users)
        .flat_map(|u| {
            (0..2).map(move |i| Interaction {
                user: u,
                item: i,
                rating: 1.0,
                timestamp: i as i64,
            })
        })
        .collect();
    let ds = InteractionDataset::new(
        (0..n_users).map(|u| format!("u{u}")).collect(),
        (0..3).map(|i| format!("i{i}")).collect(),
        rows,
    )
    .unwrap();
    leave_one_out_split(&ds, 1, 0).unwrap()
}

pub fn labels_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..2, 4..10)
        .prop_filter("both classes", |v| v.contains(&0) && v.contains(&1))
}

/// `original` is the identity; u2u/d2d never touch items and their trace
/// decomposes into its two terms.
pub fn prop_method_identities(labels: Vec<usize>, seed: u64) -> PropResult {
    let n = labels.len();
    let model = toy_model(seed, n, 3);
    let split = tiny_split(n);
    let l = AttributeLabels::new(labels, vec!["a".into(), "b".into()]).unwrap();
    let train_hp = TrainHyperparams::defaults_for(ModelKind::Mf);
    let hp = UnlearnHyperparams {
        steps: 8,
        au_trade_off: 0.5,
        seed,
        ..Default::default()
    };
    let orig = run_unlearn(&model, &split, &l, UnlearnMethod::Original, &train_hp, &hp).unwrap();
    prop_assert_eq!(&orig.model, &model);
    let terms = [
        Distinguishability::Mmd {
            bandwidth: median_pairwise_distance(&model.user_emb),
        },
        Distinguishability::U2u(CrossClassMatching::new(&l, seed).unwrap()),
    ];
    for term in &terms {
        let (out, trace) = unlearn_post_training(&model, None, &l, term, &hp).unwrap();
        prop_assert_eq!(
            out.item_emb.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            model
                .item_emb
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        );
        prop_assert_eq!(trace.len(), hp.steps + 1);
        for r in &trace {
            let want = r.dist + hp.au_trade_off * r.reg;
            prop_assert!((r.total - want).abs() <= 1e-9 * want.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok(())
}
