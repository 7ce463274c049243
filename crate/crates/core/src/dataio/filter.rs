use std::collections::HashMap;

use super::{DataError, Interaction, InteractionDataset, RawInteraction, Result};

/// Drops users and items with fewer than `threshold` interactions, repeating
/// until no more rows are removed, then assigns dense indices in order of
/// first appearance among the surviving rows.
///
/// Repeated (user, item) rows each count as an interaction.
pub fn filter_min_interactions(
    raw: &[RawInteraction],
    threshold: usize,
) -> Result<InteractionDataset> {
    if threshold == 0 {
        return Err(DataError::InvalidArgument(
            "min interaction threshold must be at least 1".into(),
        ));
    }
    // Intern ids once so the fixed-point loop works on integers.
    let mut user_key: HashMap<&str, usize> = HashMap::new();
    let mut item_key: HashMap<&str, usize> = HashMap::new();
    let rows: Vec<(usize, usize)> = raw
        .iter()
        .map(|r| {
            let nu = user_key.len();
            let ni = item_key.len();
            let u = *user_key.entry(r.user_id.as_str()).or_insert(nu);
            let i = *item_key.entry(r.item_id.as_str()).or_insert(ni);
            (u, i)
        })
        .collect();

    let mut alive = vec![true; rows.len()];
    loop {
        let mut user_count = vec![0usize; user_key.len()];
        let mut item_count = vec![0usize; item_key.len()];
        for (&(u, i), _) in rows.iter().zip(&alive).filter(|(_, &a)| a) {
            user_count[u] += 1;
            item_count[i] += 1;
        }
        let mut removed = false;
        for (k, &(u, i)) in rows.iter().enumerate() {
            if alive[k] && (user_count[u] < threshold || item_count[i] < threshold) {
                alive[k] = false;
                removed = true;
            }
        }
        if !removed {
            break;
        }
    }

    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut user_map: HashMap<usize, usize> = HashMap::new();
    let mut item_map: HashMap<usize, usize> = HashMap::new();
    let mut interactions = Vec::new();
    for (k, r) in raw.iter().enumerate() {
        if !alive[k] {
            continue;
        }
        let (u0, i0) = rows[k];
        let user = *user_map.entry(u0).or_insert_with(|| {
            user_ids.push(r.user_id.clone());
            user_ids.len() - 1
        });
        let item = *item_map.entry(i0).or_insert_with(|| {
            item_ids.push(r.item_id.clone());
            item_ids.len() - 1
        });
        interactions.push(Interaction {
            user,
            item,
            rating: r.rating,
            timestamp: r.timestamp,
        });
    }
    if interactions.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    InteractionDataset::new(user_ids, item_ids, interactions)
}
