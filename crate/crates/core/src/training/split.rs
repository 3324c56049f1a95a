use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SPLIT: [f64; 3] = [0.70, 0.15, 0.15];

/// Disjoint case indices covering `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub(crate) fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!("split ratios {ratios:?} must be in [0, 1] and sum to 1")));
    }
    Ok(())
}

/// Seeded shuffle of `0..n`; train and val get `⌊r·n⌋` cases, test the remainder.
pub fn split_dataset(n: usize, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    check_ratios(ratios)?;
    // The small epsilon keeps products such as 0.7 · 1000 from flooring to 699.
    let n_train = (ratios[0] * n as f64 + 1e-9).floor() as usize;
    let n_val = (ratios[1] * n as f64 + 1e-9).floor() as usize;
    if n < 3 || n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::TooFewCases(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(SplitAssignment { train: order, val, test })
}
