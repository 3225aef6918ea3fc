use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Cycle;
use crate::error::{Error, Result};

/// Train : validation : test proportions.
pub const DEFAULT_RATIO: [usize; 3] = [10, 2, 5];

/// Largest-remainder apportionment of `n` cycles, each part getting at least one.
pub fn split_sizes(n: usize, ratio: [usize; 3]) -> Result<[usize; 3]> {
    let total: usize = ratio.iter().sum();
    if ratio.contains(&0) {
        return Err(Error::Config(format!("split ratio parts must be positive, got {ratio:?}")));
    }
    if n < ratio.len() {
        return Err(Error::Config(format!(
            "need at least {} cycles to split, got {n}",
            ratio.len()
        )));
    }
    let mut sizes = [0usize; 3];
    let mut remainders = [(0usize, 0usize); 3];
    for i in 0..3 {
        sizes[i] = n * ratio[i] / total;
        remainders[i] = (n * ratio[i] % total, i);
    }
    let mut left = n - sizes.iter().sum::<usize>();
    // larger remainder first, earlier part on ties
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let largest = (0..3).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))).unwrap();
        sizes[largest] -= 1;
        sizes[empty] += 1;
    }
    Ok(sizes)
}

/// Shuffles whole cycles with `seed` and cuts them into train/val/test.
/// Each part is returned sorted by cycle id.
pub fn split_cycles(cycles: &[Cycle], ratio: [usize; 3], seed: u64) -> Result<(Vec<Cycle>, Vec<Cycle>, Vec<Cycle>)> {
    let sizes = split_sizes(cycles.len(), ratio)?;
    let mut order: Vec<&Cycle> = cycles.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |range: std::ops::Range<usize>| {
        let mut part: Vec<Cycle> = order[range].iter().map(|c| (*c).clone()).collect();
        part.sort_by(|a, b| a.id.cmp(&b.id));
        part
    };
    let (a, b) = (sizes[0], sizes[0] + sizes[1]);
    Ok((take(0..a), take(a..b), take(b..cycles.len())))
}

/// Like [`split_cycles`] but with an explicit test set; the remaining cycles
/// are divided between train and validation in `ratio[0] : ratio[1]`.
pub fn split_cycles_with_test(
    cycles: &[Cycle],
    ratio: [usize; 3],
    seed: u64,
    test_ids: &[String],
) -> Result<(Vec<Cycle>, Vec<Cycle>, Vec<Cycle>)> {
    for id in test_ids {
        if !cycles.iter().any(|c| &c.id == id) {
            return Err(Error::Config(format!("unknown test cycle id {id:?}")));
        }
    }
    let (mut test, rest): (Vec<Cycle>, Vec<Cycle>) =
        cycles.iter().cloned().partition(|c| test_ids.contains(&c.id));
    if rest.len() < 2 {
        return Err(Error::Config("need at least two non-test cycles for train and validation".into()));
    }
    let total = ratio[0] + ratio[1];
    let mut n_val = ((rest.len() * ratio[1]) as f64 / total as f64).round() as usize;
    n_val = n_val.clamp(1, rest.len() - 1);
    let mut order: Vec<Cycle> = rest;
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = order.split_off(order.len() - n_val);
    let mut train = order;
    train.sort_by(|a, b| a.id.cmp(&b.id));
    val.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((train, val, test))
}
