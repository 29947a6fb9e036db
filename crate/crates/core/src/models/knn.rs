//! Neighborhood models: UserKNN, ItemKNN and TrustKNN.
//!
//! Similarities are computed over co-rated support only and damped by
//! `n / (n + shrinkage)`. Tables are built densely at fit time, which costs
//! O(n^2 * avg degree) per side; fine for catalogs of a few thousand.
//!
//! Only positive weights take part in predictions. A pair with no qualifying
//! neighbor gets `mean(u) - FALLBACK_OFFSET`, which sits below every
//! supported prediction while keeping lists full length.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scorer;
use crate::dataset::{Interactions, TrustGraph};
use crate::error::{Error, Result};
use crate::params::HyperParams;

pub const FALLBACK_OFFSET: f64 = 100.0;

pub(crate) const KNN_KEYS: &[&str] = &["neighbors", "shrinkage", "similarity"];
pub(crate) const TRUST_KNN_KEYS: &[&str] = &["neighbors"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Pcc,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnConfig {
    pub neighbors: usize,
    pub shrinkage: f64,
    pub similarity: Similarity,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            neighbors: 50,
            shrinkage: 10.0,
            similarity: Similarity::Pcc,
        }
    }
}

impl KnnConfig {
    pub fn from_params(algorithm: &str, params: &HyperParams) -> Result<Self> {
        params.check_keys(algorithm, KNN_KEYS)?;
        let r = params.reader(algorithm);
        let d = Self::default();
        Ok(Self {
            neighbors: r.count("neighbors", d.neighbors)?,
            shrinkage: r.non_negative("shrinkage", d.shrinkage)?,
            similarity: match r.text("similarity", "pcc", &["pcc", "cos"])?.as_str() {
                "cos" => Similarity::Cos,
                _ => Similarity::Pcc,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustKnnConfig {
    pub neighbors: usize,
}

impl TrustKnnConfig {
    pub fn from_params(algorithm: &str, params: &HyperParams) -> Result<Self> {
        params.check_keys(algorithm, TRUST_KNN_KEYS)?;
        Ok(Self {
            neighbors: params.reader(algorithm).count("neighbors", 50)?,
        })
    }
}

fn damp(raw: f64, n: usize, shrinkage: f64) -> f64 {
    raw * n as f64 / (n as f64 + shrinkage)
}

/// Pearson correlation of two aligned co-rated vectors, each centered on its
/// own mean over that support. Fewer than two points or zero variance give 0.
pub fn pearson(a: &[f64], b: &[f64], shrinkage: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    damp(sab / (saa * sbb).sqrt(), n, shrinkage)
}

/// Cosine of two aligned co-rated vectors. Empty support gives 0.
pub fn cosine(a: &[f64], b: &[f64], shrinkage: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if n == 0 || saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    damp(sab / (saa * sbb).sqrt(), n, shrinkage)
}

/// Fills `xa`/`xb` with the values of two index-sorted sparse vectors on
/// their common indices.
pub fn co_rated(a: &[(usize, f64)], b: &[(usize, f64)], xa: &mut Vec<f64>, xb: &mut Vec<f64>) {
    xa.clear();
    xb.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                xa.push(a[i].1);
                xb.push(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
}

pub fn co_rated_count(a: &[(usize, f64)], b: &[(usize, f64)]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub fn sparse_similarity(
    measure: Similarity,
    a: &[(usize, f64)],
    b: &[(usize, f64)],
    shrinkage: f64,
) -> f64 {
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    co_rated(a, b, &mut xa, &mut xb);
    match measure {
        Similarity::Pcc => pearson(&xa, &xb, shrinkage),
        Similarity::Cos => cosine(&xa, &xb, shrinkage),
    }
}

/// For each anchor, its `k` most similar other anchors with positive weight,
/// sorted by descending weight then ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl SimilarityTable {
    pub fn build(
        profiles: &[&[(usize, f64)]],
        k: usize,
        measure: Similarity,
        shrinkage: f64,
    ) -> Self {
        let neighbors = (0..profiles.len())
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(xa, xb), a| {
                    let mut row = Vec::new();
                    for (b, profile) in profiles.iter().enumerate() {
                        if b == a {
                            continue;
                        }
                        co_rated(profiles[a], profile, xa, xb);
                        let w = match measure {
                            Similarity::Pcc => pearson(xa, xb, shrinkage),
                            Similarity::Cos => cosine(xa, xb, shrinkage),
                        };
                        if w > 0.0 {
                            row.push((b, w));
                        }
                    }
                    sort_neighbors(&mut row);
                    row.truncate(k);
                    row
                },
            )
            .collect();
        Self { neighbors }
    }

    pub fn neighbors(&self, anchor: usize) -> &[(usize, f64)] {
        &self.neighbors[anchor]
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

fn sort_neighbors(row: &mut [(usize, f64)]) {
    row.sort_unstable_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
}

fn user_means(train: &Interactions) -> Vec<f64> {
    let global = train.global_mean();
    (0..train.n_users())
        .map(|u| train.user_mean(u).unwrap_or(global))
        .collect()
}

fn check_index(train: &Interactions, user: usize, item: usize) -> Result<()> {
    if user >= train.n_users() || item >= train.n_items() {
        return Err(Error::InvalidArgument(format!(
            "({user}, {item}) outside {}x{} index space",
            train.n_users(),
            train.n_items()
        )));
    }
    Ok(())
}

/// Mean-centered weighted average over user neighbors, shared by UserKNN and
/// TrustKNN.
#[derive(Debug, Clone)]
struct UserNeighborhood {
    train: Arc<Interactions>,
    means: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl UserNeighborhood {
    fn score(&self, u: usize, i: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for &(v, w) in &self.neighbors[u] {
            if let Some(r) = self.train.rating(v, i) {
                num += w * (r - self.means[v]);
                den += w.abs();
            }
        }
        if den > 0.0 {
            self.means[u] + num / den
        } else {
            self.means[u] - FALLBACK_OFFSET
        }
    }

    fn score_user(&self, u: usize, out: &mut [f64]) {
        let mut num = vec![0.0; out.len()];
        let mut den = vec![0.0; out.len()];
        for &(v, w) in &self.neighbors[u] {
            for &(i, r) in self.train.user_items(v) {
                num[i] += w * (r - self.means[v]);
                den[i] += w.abs();
            }
        }
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = if den[i] > 0.0 {
                self.means[u] + num[i] / den[i]
            } else {
                self.means[u] - FALLBACK_OFFSET
            };
        }
    }
}

#[derive(Debug, Clone)]
pub struct UserKnn {
    inner: UserNeighborhood,
    table: SimilarityTable,
}

impl UserKnn {
    pub fn fit(train: Arc<Interactions>, cfg: &KnnConfig) -> Self {
        let profiles: Vec<_> = (0..train.n_users()).map(|u| train.user_items(u)).collect();
        let table = SimilarityTable::build(&profiles, cfg.neighbors, cfg.similarity, cfg.shrinkage);
        let inner = UserNeighborhood {
            means: user_means(&train),
            neighbors: table.neighbors.clone(),
            train,
        };
        Self { inner, table }
    }

    pub fn table(&self) -> &SimilarityTable {
        &self.table
    }

    pub fn predict(&self, user: usize, item: usize) -> Result<f64> {
        check_index(&self.inner.train, user, item)?;
        Ok(self.inner.score(user, item))
    }
}

impl Scorer for UserKnn {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.inner.score(user, item)
    }

    fn score_user(&self, user: usize, out: &mut [f64]) {
        self.inner.score_user(user, out)
    }
}

#[derive(Debug, Clone)]
pub struct ItemKnn {
    train: Arc<Interactions>,
    means: Vec<f64>,
    table: SimilarityTable,
}

impl ItemKnn {
    pub fn fit(train: Arc<Interactions>, cfg: &KnnConfig) -> Self {
        let profiles: Vec<_> = (0..train.n_items()).map(|i| train.item_users(i)).collect();
        let table = SimilarityTable::build(&profiles, cfg.neighbors, cfg.similarity, cfg.shrinkage);
        Self {
            means: user_means(&train),
            train,
            table,
        }
    }

    pub fn table(&self) -> &SimilarityTable {
        &self.table
    }

    pub fn predict(&self, user: usize, item: usize) -> Result<f64> {
        check_index(&self.train, user, item)?;
        Ok(self.score(user, item))
    }

    fn combine(&self, user: usize, item: usize, rating_of: impl Fn(usize) -> Option<f64>) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for &(j, w) in self.table.neighbors(item) {
            if let Some(r) = rating_of(j) {
                num += w * r;
                den += w.abs();
            }
        }
        if den > 0.0 {
            num / den
        } else {
            self.means[user] - FALLBACK_OFFSET
        }
    }
}

impl Scorer for ItemKnn {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.combine(user, item, |j| self.train.rating(user, j))
    }

    fn score_user(&self, user: usize, out: &mut [f64]) {
        let mut dense = vec![None; out.len()];
        for &(j, r) in self.train.user_items(user) {
            dense[j] = Some(r);
        }
        for (item, slot) in out.iter_mut().enumerate() {
            *slot = self.combine(user, item, |j| dense[j]);
        }
    }
}

/// UserKNN over directly trusted users with unit weights. Neighbors are the
/// user's out-edges, cut to `k` by descending co-rated count then index.
#[derive(Debug, Clone)]
pub struct TrustKnn {
    inner: UserNeighborhood,
}

impl TrustKnn {
    pub fn fit(train: Arc<Interactions>, trust: &TrustGraph, cfg: &TrustKnnConfig) -> Self {
        assert_eq!(trust.n_users(), train.n_users(), "trust graph and ratings disagree on users");
        let neighbors = (0..train.n_users())
            .map(|u| {
                let mut cands: Vec<(usize, usize)> = trust
                    .trusted(u)
                    .map(|v| (v, co_rated_count(train.user_items(u), train.user_items(v))))
                    .collect();
                cands.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                cands.truncate(cfg.neighbors);
                cands.into_iter().map(|(v, _)| (v, 1.0)).collect()
            })
            .collect();
        Self {
            inner: UserNeighborhood {
                means: user_means(&train),
                neighbors,
                train,
            },
        }
    }

    pub fn neighbors(&self, user: usize) -> &[(usize, f64)] {
        &self.inner.neighbors[user]
    }

    pub fn predict(&self, user: usize, item: usize) -> Result<f64> {
        check_index(&self.inner.train, user, item)?;
        Ok(self.inner.score(user, item))
    }
}

impl Scorer for TrustKnn {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.inner.score(user, item)
    }

    fn score_user(&self, user: usize, out: &mut [f64]) {
        self.inner.score_user(user, out)
    }
}
