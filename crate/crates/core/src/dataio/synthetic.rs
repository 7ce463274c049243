//! Synthetic interaction logs with a planted binary user attribute.
//!
//! Users and items get Gaussian latent factors; the attribute shifts a
//! user's factors along a fixed direction, so it leaks into anything
//! trained on the interactions. Each user picks items by Gumbel-top-k over
//! `affinity + popularity`, which yields a long-tailed item distribution.

use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, Gumbel, StandardNormal};

use super::RawInteraction;
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub min_per_user: usize,
    pub max_per_user: usize,
    pub latent_dim: usize,
    /// Length of the attribute shift in latent space.
    pub attribute_strength: f64,
    /// Fraction of users in the second class ("F").
    pub minority_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 300,
            min_per_user: 20,
            max_per_user: 60,
            latent_dim: 8,
            attribute_strength: 1.5,
            minority_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// Heavy users over a small catalogue, suitable for a 120-interaction
    /// filtering threshold.
    pub fn heavy_users(seed: u64) -> Self {
        Self {
            n_users: 500,
            n_items: 600,
            min_per_user: 150,
            max_per_user: 220,
            latent_dim: 8,
            attribute_strength: 1.5,
            minority_fraction: 0.4,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub interactions: Vec<RawInteraction>,
    /// `(user_id, class)` with classes "M" and "F".
    pub attributes: Vec<(String, String)>,
}

impl SyntheticData {
    /// Ratings in the generic TSV layout.
    pub fn ratings_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.interactions {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.user_id, r.item_id, r.rating, r.timestamp
            )
            .unwrap();
        }
        out
    }

    /// Attributes in the `user_id<TAB>class` layout.
    pub fn attributes_tsv(&self) -> String {
        let mut out = String::new();
        for (u, c) in &self.attributes {
            writeln!(out, "{u}\t{c}").unwrap();
        }
        out
    }
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticData {
    let mut rng = rng::stream_rng(cfg.seed, stream::SYNTHETIC);
    let k = cfg.latent_dim.max(1);
    let normal = |rng: &mut rng::Rng| -> f64 { StandardNormal.sample(rng) };

    let direction: Vec<f64> = {
        let v: Vec<f64> = (0..k).map(|_| normal(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        v.into_iter().map(|x| x / norm).collect()
    };
    let items: Vec<(Vec<f64>, f64)> = (0..cfg.n_items)
        .map(|_| {
            let q = (0..k).map(|_| normal(&mut rng)).collect();
            (q, 1.2 * normal(&mut rng))
        })
        .collect();

    let gumbel = Gumbel::new(0.0, 1.0).expect("valid gumbel");
    let scale = 1.0 / (k as f64).sqrt();
    let mut interactions = Vec::new();
    let mut attributes = Vec::with_capacity(cfg.n_users);
    let mut clock: i64 = 880_000_000;
    for u in 0..cfg.n_users {
        let minority = rng.random::<f64>() < cfg.minority_fraction;
        let sign = if minority { 1.0 } else { -1.0 };
        let p: Vec<f64> = direction
            .iter()
            .map(|d| normal(&mut rng) + sign * cfg.attribute_strength * d)
            .collect();
        let lo = cfg.min_per_user.min(cfg.n_items);
        let hi = cfg.max_per_user.clamp(lo, cfg.n_items);
        let count = rng.random_range(lo..=hi);
        let mut keyed: Vec<(f64, usize)> = items
            .iter()
            .enumerate()
            .map(|(i, (q, bias))| {
                let affinity: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() * scale;
                (affinity + bias + gumbel.sample(&mut rng), i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let user_id = format!("{}", u + 1);
        for &(_, i) in keyed.iter().take(count) {
            clock += rng.random_range(1..3600);
            interactions.push(RawInteraction {
                user_id: user_id.clone(),
                item_id: format!("{}", i + 1),
                rating: rng.random_range(1..=5) as f64,
                timestamp: clock,
            });
        }
        attributes.push((user_id, if minority { "F" } else { "M" }.to_string()));
    }
    SyntheticData {
        interactions,
        attributes,
    }
}
