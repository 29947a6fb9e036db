//! Seeded generator for small datasets with group-skewed category tastes.
//!
//! Items get one to three categories and a popularity weight. Each group has
//! its own category affinity, and users draw items with probability
//! proportional to popularity times the affinity of the item's categories.
//! Trust edges mostly stay inside a group. A few trust edges point at ids
//! that have no ratings.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    CategoryMap, Dataset, GroupAssignment, IdMap, LoadReport, Rating, RatingMatrix, TrustGraph,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub users: usize,
    pub items: usize,
    pub categories: usize,
    pub min_ratings: usize,
    pub max_ratings: usize,
    /// Share of users in the protected group.
    pub protected_share: f64,
    /// Share of users without a group label.
    pub unlabeled_share: f64,
    pub max_trust: usize,
    /// Probability that a trust edge stays within the truster's group.
    pub homophily: f64,
    pub ghost_ids: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            users: 600,
            items: 400,
            categories: 12,
            min_ratings: 12,
            max_ratings: 40,
            protected_share: 0.4,
            unlabeled_share: 0.05,
            max_trust: 12,
            homophily: 0.8,
            ghost_ids: 3,
            seed: 7,
        }
    }
}

pub const PROTECTED: &str = "female";
pub const UNPROTECTED: &str = "male";

pub fn generate(cfg: &SyntheticConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, m, k) = (cfg.users, cfg.items, cfg.categories);

    let mut item_cats: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            let extra = rng.gen_range(0..3);
            let mut cats = vec![i % k];
            cats.extend((0..extra).map(|_| rng.gen_range(0..k)));
            cats.sort_unstable();
            cats.dedup();
            cats
        })
        .collect();
    item_cats.shuffle(&mut rng);
    let popularity: Vec<f64> = (0..m).map(|i| 1.0 / (1.0 + i as f64 / 8.0)).collect();
    let item_bias: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.8..0.8)).collect();

    // groups: 0 = protected, 1 = unprotected
    let affinity: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..k).map(|_| rng.gen_range(0.2f64..3.0).powi(2)).collect())
        .collect();
    let user_group: Vec<Option<usize>> = (0..n)
        .map(|_| {
            if rng.gen_bool(cfg.unlabeled_share) {
                None
            } else if rng.gen_bool(cfg.protected_share) {
                Some(0)
            } else {
                Some(1)
            }
        })
        .collect();

    let mut entries = Vec::new();
    for (u, g) in user_group.iter().enumerate() {
        let taste = &affinity[g.unwrap_or(1)];
        let weights: Vec<f64> = (0..m)
            .map(|i| popularity[i] * item_cats[i].iter().map(|&c| taste[c]).sum::<f64>())
            .collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        let count = rng.gen_range(cfg.min_ratings..=cfg.max_ratings).min(m);
        let user_bias = rng.gen_range(-0.7..0.7);
        let mut chosen = vec![false; m];
        let mut picked = 0;
        while picked < count {
            let i = dist.sample(&mut rng);
            if std::mem::replace(&mut chosen[i], true) {
                continue;
            }
            picked += 1;
            let noise: f64 = rng.gen_range(-1.2..1.2);
            let value = (3.4 + user_bias + item_bias[i] + noise).round().clamp(1.0, 5.0);
            entries.push(Rating { user: u, item: i, value });
        }
    }

    // items nobody drew would vanish on reload, so drop them here
    let mut remap = vec![None; m];
    let mut kept = 0;
    for e in &entries {
        if remap[e.item].is_none() {
            remap[e.item] = Some(());
        }
    }
    let remap: Vec<Option<usize>> = remap
        .into_iter()
        .map(|r| {
            r.map(|_| {
                kept += 1;
                kept - 1
            })
        })
        .collect();
    for e in &mut entries {
        e.item = remap[e.item].expect("rated item");
    }
    let item_cats: Vec<Vec<usize>> = item_cats
        .into_iter()
        .zip(&remap)
        .filter(|(_, r)| r.is_some())
        .map(|(c, _)| c)
        .collect();
    let m = kept;

    let users = id_map((0..n).map(|u| format!("u{u:04}")));
    let items = id_map((0..m).map(|i| format!("b{i:04}")));
    let ghosts = id_map((0..cfg.ghost_ids).map(|g| format!("x{g:02}")));

    let mut edges = Vec::new();
    let by_group = |g: Option<usize>| -> Vec<usize> {
        (0..n).filter(|&v| user_group[v] == g).collect()
    };
    let pools = [by_group(Some(0)), by_group(Some(1))];
    for (u, g) in user_group.iter().enumerate() {
        // roughly a third of users trust nobody
        if rng.gen_bool(0.35) {
            continue;
        }
        let out = rng.gen_range(1..=cfg.max_trust);
        for _ in 0..out {
            let v = match g {
                Some(g) if rng.gen_bool(cfg.homophily) => *pools[*g].choose(&mut rng).unwrap(),
                _ => rng.gen_range(0..n),
            };
            if v != u {
                edges.push((u, v));
            }
        }
    }
    for gh in 0..cfg.ghost_ids {
        for _ in 0..3 {
            let u = rng.gen_range(0..n);
            let node = n + gh;
            edges.push(if rng.gen_bool(0.5) { (u, node) } else { (node, u) });
        }
    }
    let (trust, _, _) = TrustGraph::new(n, ghosts, edges);

    let labels: Vec<Option<String>> = user_group
        .iter()
        .map(|g| g.map(|g| [PROTECTED, UNPROTECTED][g].to_owned()))
        .collect();
    let groups = GroupAssignment::new(&labels, PROTECTED, UNPROTECTED)?;
    let categories = CategoryMap::new(
        m,
        item_cats
            .iter()
            .enumerate()
            .flat_map(|(i, cs)| cs.iter().map(move |&c| (i, format!("cat{c:02}")))),
    );
    let ratings = RatingMatrix::new(users, items, entries)?;
    let report = LoadReport {
        quarantined_trust_ids: trust.quarantined().len(),
        quarantined_trust_edges: trust.quarantined_edge_count(),
        uncategorized_items: categories.uncategorized().len(),
        ungrouped_users: groups.ungrouped_count(),
        ..LoadReport::default()
    };
    Ok(Dataset {
        ratings,
        trust,
        groups,
        categories,
        report,
    })
}

fn id_map(ids: impl Iterator<Item = String>) -> IdMap {
    let mut map = IdMap::new();
    for id in ids {
        map.get_or_insert(&id);
    }
    map
}
