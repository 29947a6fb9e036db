use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Interactions;
use crate::error::{Error, Result};

/// Per-entry fold assignment; every entry is tested in exactly one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    k: usize,
    assignment: Vec<usize>,
}

/// Per-user stratified split: each user's ratings are shuffled and dealt
/// round-robin over the folds, starting at fold `user % k` so fold sizes stay
/// balanced. A user with fewer than `k` ratings is absent from some test
/// folds.
pub fn kfold_split(data: &Interactions, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-fold split needs k >= 2, got {k}")));
    }
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); data.n_users()];
    for (e, r) in data.entries().iter().enumerate() {
        per_user[r.user].push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; data.len()];
    for (u, entries) in per_user.iter_mut().enumerate() {
        entries.shuffle(&mut rng);
        for (pos, &e) in entries.iter().enumerate() {
            assignment[e] = (pos + u) % k;
        }
    }
    Ok(FoldSplit { k, assignment })
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, entry: usize) -> usize {
        self.assignment[entry]
    }

    pub fn test_entries(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&e| self.assignment[e] == fold)
            .collect()
    }

    pub fn train_entries(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&e| self.assignment[e] != fold)
            .collect()
    }

    pub fn train(&self, data: &Interactions, fold: usize) -> Interactions {
        data.subset(&self.train_entries(fold))
    }

    pub fn test(&self, data: &Interactions, fold: usize) -> Interactions {
        data.subset(&self.test_entries(fold))
    }
}
