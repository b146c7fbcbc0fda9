use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// Disjoint test groups over trial indices. Training indices for a fold are
/// everything outside its test group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub n_trials: usize,
    folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Builds a plan from explicit groups, checking that they partition
    /// `0..n_trials`.
    pub fn from_groups(folds: Vec<Vec<usize>>, n_trials: usize, seed: u64) -> Result<Self> {
        if folds.len() < 2 {
            return Err(Error::InvalidArgument("a fold plan needs at least two folds".into()));
        }
        let mut seen = vec![false; n_trials];
        for &i in folds.iter().flatten() {
            if i >= n_trials || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invariant(format!("fold groups do not partition 0..{n_trials}")));
            }
        }
        if seen.contains(&false) {
            return Err(Error::Invariant(format!("fold groups do not cover 0..{n_trials}")));
        }
        Ok(Self {
            k: folds.len(),
            seed,
            n_trials,
            folds,
        })
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut held = vec![false; self.n_trials];
        for &i in &self.folds[fold] {
            held[i] = true;
        }
        (0..self.n_trials).filter(|&i| !held[i]).collect()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.folds
    }
}

/// Shuffles each class with `seed` and deals it round-robin over `k` folds.
/// The dealing offset carries over from one class to the next so fold sizes
/// stay within one of each other overall as well as per class.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k} leaves no held-out data")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for label in Label::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::InsufficientData(format!(
                "class {label} has {} trials, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            folds[(offset + j) % k].push(i);
        }
        offset = (offset + members.len()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    FoldPlan::from_groups(folds, labels.len(), seed)
}
