//! Train/test split protocol and the inner train/validation partition.
//!
//! Randomness comes from a `ChaCha8Rng` seeded with the user seed. Groups of
//! equal `(M, p_i)` are visited in ascending `(M, p_i)` order; inside a group
//! the angles are sorted ascending and the test angles are drawn by index,
//! without replacement, with a partial Fisher-Yates shuffle over the
//! candidate indices.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Split;
use crate::error::{Error, Result};
use crate::flow::{FlowCondition, AOA_PER_GROUP};

/// Test conditions drawn in each `(M, p_i)` group.
pub const TEST_PER_GROUP: usize = 4;

/// Mach numbers whose two extreme angles of attack always go to train.
pub const FORCED_TRAIN_MACHS: [f64; 3] = [0.30, 0.82, 0.96];

fn is_forced_mach(mach: f64) -> bool {
    FORCED_TRAIN_MACHS.iter().any(|m| (m - mach).abs() < 1e-9)
}

/// Draws the first `count` entries of a Fisher-Yates shuffle of `pool`.
fn draw<T: Copy>(pool: &mut [T], count: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    for j in 0..count {
        let pick = rng.random_range(j..pool.len());
        pool.swap(j, pick);
    }
    pool[..count].to_vec()
}

/// Labels each condition train or test: 4 test angles per `(M, p_i)` group,
/// with the extreme angles of the forced Mach numbers kept in train.
pub fn split_dataset(conditions: &[FlowCondition], seed: u64) -> Result<BTreeMap<String, Split>> {
    let mut groups: Vec<((f64, f64), Vec<&FlowCondition>)> = Vec::new();
    let mut order: Vec<&FlowCondition> = conditions.iter().collect();
    order.sort_by(|a, b| {
        a.mach
            .total_cmp(&b.mach)
            .then(a.p_i.total_cmp(&b.p_i))
            .then(a.aoa_deg.total_cmp(&b.aoa_deg))
    });
    for c in order {
        match groups.last_mut() {
            Some((key, members)) if *key == (c.mach, c.p_i) => members.push(c),
            _ => groups.push(((c.mach, c.p_i), vec![c])),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = BTreeMap::new();
    for ((mach, p_i), members) in &groups {
        if members.len() != AOA_PER_GROUP {
            return Err(Error::Structure(format!(
                "group (M={mach}, p_i={p_i}) has {} conditions, expected {AOA_PER_GROUP}",
                members.len()
            )));
        }
        if members.windows(2).any(|w| w[0].aoa_deg == w[1].aoa_deg) {
            return Err(Error::Structure(format!(
                "group (M={mach}, p_i={p_i}) repeats an angle of attack"
            )));
        }
        let mut candidates: Vec<usize> = if is_forced_mach(*mach) {
            (1..AOA_PER_GROUP - 1).collect()
        } else {
            (0..AOA_PER_GROUP).collect()
        };
        let test = draw(&mut candidates, TEST_PER_GROUP, &mut rng);
        for (i, c) in members.iter().enumerate() {
            let label = if test.contains(&i) {
                Split::Test
            } else {
                Split::Train
            };
            labels.insert(c.id.clone(), label);
        }
    }
    Ok(labels)
}

/// Partitions `train_ids` into `round(fraction * n)` inner-train ids and the
/// remaining validation ids. Both parts keep the input order.
pub fn inner_split(
    train_ids: &[String],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(
            "inner split",
            format!("fraction must lie in (0, 1), got {fraction}"),
        ));
    }
    let n = train_ids.len();
    if n < 2 {
        return Err(Error::invalid(
            "inner split",
            format!("need at least 2 train ids, got {n}"),
        ));
    }
    let n_inner = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    let mut chosen = draw(&mut pool, n_inner, &mut rng);
    chosen.sort_unstable();
    let mut inner = Vec::with_capacity(n_inner);
    let mut validation = Vec::with_capacity(n - n_inner);
    let mut next = chosen.iter().peekable();
    for (i, id) in train_ids.iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            inner.push(id.clone());
        } else {
            validation.push(id.clone());
        }
    }
    Ok((inner, validation))
}
