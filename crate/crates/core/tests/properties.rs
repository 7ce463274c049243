mod common;

use common::props::*;
use proptest::prelude::*;
use unlearn_rec::harness::{histogram_counts, AttackConfig, UnlearnConfig};
use unlearn_rec::unlearning::{Bandwidth, Optimizer};
use unlearn_rec::{AttackerKind, ModelKind, UnlearnMethod};

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fixed_point_filtering(raw in raw_ratings(), k in 1usize..6) {
        prop_fixed_point_filtering(raw, k)?;
    }

    #[test]
    fn split_partition_and_negative_purity(raw in raw_ratings(), n_neg in 1usize..6, seed in any::<u64>()) {
        prop_split_purity(raw, n_neg, seed)?;
    }

    #[test]
    fn adjacency_spectral_bound(ds in bipartite()) {
        prop_spectral_bound(ds)?;
    }

    #[test]
    fn propagation_is_linear(ds in bipartite(), layers in 0usize..4, alpha in -4.0f64..4.0, seed in any::<u64>()) {
        prop_propagation_linear(ds, layers, alpha, seed)?;
    }

    #[test]
    fn metrics_monotone_in_cutoff(ranks in prop::collection::vec(1usize..=100, 1..50)) {
        prop_metric_monotone(ranks)?;
    }

    #[test]
    fn ranks_invariant_to_increasing_transforms(pos in -100i32..100, negs in prop::collection::vec(-100i32..100, 0..99)) {
        prop_score_order_invariance(pos, negs)?;
    }

    #[test]
    fn mmd_symmetric(
        x in prop::collection::vec(-3.0f64..3.0, 1..12),
        y in prop::collection::vec(-3.0f64..3.0, 1..12),
        s in 0.2f64..4.0,
    ) {
        let d = 1 + x.len().min(y.len()) % 3;
        prop_assume!(x.len() >= d && y.len() >= d);
        prop_mmd_symmetric(x, y, d, s)?;
    }

    #[test]
    fn method_identities(labels in labels_strategy(), seed in any::<u64>()) {
        prop_method_identities(labels, seed)?;
    }

    #[test]
    fn histogram_conserves_counts(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40),
        bins in 1usize..20,
    ) {
        let (edges, counts) = histogram_counts(&[a.clone(), b.clone()], bins).unwrap();
        prop_assert_eq!(edges.len(), bins + 1);
        prop_assert_eq!(counts[0].iter().sum::<usize>(), a.len());
        prop_assert_eq!(counts[1].iter().sum::<usize>(), b.len());
        let (_, same) = histogram_counts(&[a.clone(), a], bins).unwrap();
        prop_assert_eq!(&same[0], &same[1]);
    }

    #[test]
    fn unlearn_config_round_trips(
        method in prop::sample::select(UnlearnMethod::ALL.to_vec()),
        lgcn in any::<bool>(),
        au in 0.0f64..1.0,
        rt in 0.0f64..10.0,
        seed in any::<u64>(),
        epochs in prop::option::of(1usize..500),
        steps in prop::option::of(0usize..1000),
        bw in prop::option::of(prop_oneof![Just(Bandwidth::Median), (0.01f64..10.0).prop_map(Bandwidth::Fixed)]),
        gd in any::<bool>(),
        device in prop::option::of("[a-z]{3}(:[0-9])?"),
    ) {
        let model = if lgcn { ModelKind::LightGcn } else { ModelKind::Mf };
        let mut c = UnlearnConfig::new(method, model, "ml-100k");
        c.au_trade_off = au;
        c.retrain_trade_off = rt;
        c.seed = seed;
        c.device = device;
        c.train.epochs = epochs;
        c.unlearn.steps = steps;
        c.unlearn.bandwidth = bw;
        c.unlearn.optimizer = gd.then_some(Optimizer::Gd);
        let back = UnlearnConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn attack_config_round_trips(seeds in prop::collection::vec(any::<u64>(), 1..6), frac in 0.1f64..0.9, gbt_only in any::<bool>()) {
        let mut c = AttackConfig::new("ml-100k_mf_d2d_0_x");
        c.seeds = seeds;
        c.train_frac = frac;
        if gbt_only {
            c.attackers = vec![AttackerKind::Gbt];
        }
        prop_assert_eq!(AttackConfig::from_json(&c.to_json()).unwrap(), c);
    }
}

#[test]
fn filtering_worked_example() {
    // Counts {5, 5, 2}; without the third user both items still have 5 rows.
    let row = |u: &str, i: &str, t: i64| unlearn_rec::RawInteraction {
        user_id: u.into(),
        item_id: i.into(),
        rating: 1.0,
        timestamp: t,
    };
    let mut rows = Vec::new();
    for t in 0..5 {
        rows.push(row("a", if t < 3 { "i0" } else { "i1" }, t));
        rows.push(row("b", if t < 2 { "i0" } else { "i1" }, t));
    }
    rows.push(row("c", "i0", 0));
    rows.push(row("c", "i1", 1));
    let ds = unlearn_rec::dataio::filter_min_interactions(&rows, 5).unwrap();
    assert_eq!(ds.user_ids(), &["a".to_string(), "b".to_string()]);
    assert_eq!(ds.n_items(), 2);
    assert_eq!(
        unlearn_rec::dataio::filter_min_interactions(&rows, 1)
            .unwrap()
            .n_users(),
        3
    );
}

#[test]
fn unknown_config_key_is_named() {
    let err =
        UnlearnConfig::from_json(r#"{"method":"d2d","model":"mf","dataset":"ml-100k","epochz":3}"#)
            .unwrap_err();
    assert!(err.to_string().contains("epochz"));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn histogram_worked_examples() {
    let (_, c) = histogram_counts(&[vec![0.0, 1.0], vec![1.0, 2.0]], 2).unwrap();
    assert_eq!(c, vec![vec![1, 1], vec![0, 2]]);
    let (_, c) = histogram_counts(&[vec![0.5, 0.1, 0.9], vec![3.0, 2.0]], 1).unwrap();
    assert_eq!(c, vec![vec![3], vec![2]]);
    assert!(histogram_counts(&[vec![1.0], vec![]], 5).is_err());
}
