use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Patient-level fold assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Patients of fold `fold`, sorted by id.
    pub fn members(&self, fold: usize) -> Vec<&str> {
        self.assignment.iter().filter(|(_, &f)| f == fold).map(|(id, _)| id.as_str()).collect()
    }

    pub fn fold_of(&self, patient_id: &str) -> Option<usize> {
        self.assignment.get(patient_id).copied()
    }
}

/// Shuffles the (sorted, deduplicated) patient ids with the seed and deals
/// them round-robin into `k` folds.
pub fn make_folds(patient_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    let mut ids = patient_ids.to_vec();
    ids.sort();
    ids.dedup();
    if k < 2 {
        return Err(Error::Input(format!("need at least 2 folds, got {k}")));
    }
    if ids.len() < k {
        return Err(Error::Input(format!("{} patients cannot fill {k} folds", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignment = ids.into_iter().enumerate().map(|(i, id)| (id, i % k)).collect();
    Ok(FoldPlan { k, seed, assignment })
}
