use crate::dataset::Interactions;

use super::Scorer;

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform [0, 1) scores from a counter-based hash of (seed, user, item), so
/// the result never depends on evaluation order.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    key: u64,
}

impl RandomScorer {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed),
        }
    }
}

impl Scorer for RandomScorer {
    fn score(&self, user: usize, item: usize) -> f64 {
        let h = splitmix64(splitmix64(self.key ^ user as u64) ^ item as u64);
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Scores every item by its training rating count.
#[derive(Debug, Clone)]
pub struct MostPopular {
    counts: Vec<f64>,
}

impl MostPopular {
    pub fn fit(train: &Interactions) -> Self {
        Self {
            counts: train.item_counts().into_iter().map(|c| c as f64).collect(),
        }
    }
}

impl Scorer for MostPopular {
    fn score(&self, _user: usize, item: usize) -> f64 {
        self.counts[item]
    }

    fn score_user(&self, _user: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.counts);
    }
}
