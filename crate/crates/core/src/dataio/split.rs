use rand::seq::index;

use super::{DataError, EvalSplit, Interaction, InteractionDataset, Result, TestCase};
use crate::rng::{self, stream};

/// Holds out each user's most recent interaction and samples `n_neg`
/// distinct never-interacted items as its negatives.
///
/// "Most recent" is the largest timestamp, ties going to the larger item
/// index. Every row of the held-out (user, item) pair leaves the training
/// set. Each user draws negatives from its own stream derived from
/// `(seed, user)`, so the result does not depend on iteration order.
pub fn leave_one_out_split(ds: &InteractionDataset, n_neg: usize, seed: u64) -> Result<EvalSplit> {
    let n_users = ds.n_users();
    let mut latest: Vec<Option<(i64, usize)>> = vec![None; n_users];
    for it in ds.interactions() {
        let key = (it.timestamp, it.item);
        let slot = &mut latest[it.user];
        if slot.is_none_or(|cur| key > cur) {
            *slot = Some(key);
        }
    }

    let mut test = Vec::with_capacity(n_users);
    for (user, slot) in latest.iter().enumerate() {
        let positives = ds.positives(user);
        let positive = match slot {
            Some((_, item)) if positives.len() >= 2 => *item,
            _ => {
                return Err(DataError::TooFewInteractions {
                    user: ds.user_ids()[user].clone(),
                })
            }
        };
        let pool: Vec<usize> = (0..ds.n_items())
            .filter(|i| !positives.contains(i))
            .collect();
        if pool.len() < n_neg {
            return Err(DataError::NotEnoughNegatives {
                user: ds.user_ids()[user].clone(),
                available: pool.len(),
                needed: n_neg,
            });
        }
        let mut rng = rng::substream_rng(seed, stream::TEST_NEGATIVES, user as u64);
        let negatives = index::sample(&mut rng, pool.len(), n_neg)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        test.push(TestCase {
            positive,
            negatives,
        });
    }

    let train_rows: Vec<Interaction> = ds
        .interactions()
        .iter()
        .filter(|it| test[it.user].positive != it.item)
        .copied()
        .collect();
    let train =
        InteractionDataset::new(ds.user_ids().to_vec(), ds.item_ids().to_vec(), train_rows)?;
    Ok(EvalSplit {
        train,
        test,
        seed,
        n_neg,
    })
}
