//! Recommender contract, top-N selection and the algorithm roster.
//!
//! Every algorithm fits on one training fold and produces a [`Scorer`]. The
//! scorer is immutable, so [`top_n`] can rank users in parallel.

mod baselines;
pub mod factor;
pub mod knn;
pub mod listrank;
pub mod mf;
pub mod slim;
pub mod social;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Interactions, TrustGraph};
use crate::error::{Error, Result};
use crate::params::HyperParams;

pub use baselines::{MostPopular, RandomScorer};

/// A fitted model. Indices must be inside the training index space.
pub trait Scorer: Send + Sync {
    fn score(&self, user: usize, item: usize) -> f64;

    /// Scores of every item for one user; `out.len()` is the item count.
    fn score_user(&self, user: usize, out: &mut [f64]) {
        for (item, slot) in out.iter_mut().enumerate() {
            *slot = self.score(user, item);
        }
    }
}

/// Training data handed to `fit`. Shared read-only between tasks.
#[derive(Debug, Clone)]
pub struct TrainContext {
    pub train: Arc<Interactions>,
    pub trust: Arc<TrustGraph>,
}

impl TrainContext {
    pub fn new(train: Interactions, trust: TrustGraph) -> Self {
        Self {
            train: Arc::new(train),
            trust: Arc::new(trust),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item: usize,
    pub score: f64,
}

/// Per-user ranked lists: no training items, no duplicates, scores
/// non-increasing, ties by ascending item index.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationSet {
    n: usize,
    n_items: usize,
    lists: Vec<Vec<ScoredItem>>,
}

impl RecommendationSet {
    pub fn from_lists(n: usize, n_items: usize, lists: Vec<Vec<ScoredItem>>) -> Self {
        Self { n, n_items, lists }
    }

    pub fn list_size(&self) -> usize {
        self.n
    }

    pub fn n_users(&self) -> usize {
        self.lists.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn list(&self, user: usize) -> &[ScoredItem] {
        &self.lists[user]
    }

    pub fn items(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.lists[user].iter().map(|s| s.item)
    }

    /// Checks the list invariants against the training data.
    pub fn validate(&self, train: &Interactions) -> Result<()> {
        for (u, list) in self.lists.iter().enumerate() {
            if list.len() > self.n {
                return Err(Error::Validation(format!("user {u}: list longer than {}", self.n)));
            }
            for (k, s) in list.iter().enumerate() {
                if train.contains(u, s.item) {
                    return Err(Error::Validation(format!(
                        "user {u}: training item {} recommended",
                        s.item
                    )));
                }
                if list[..k].iter().any(|p| p.item == s.item) {
                    return Err(Error::Validation(format!("user {u}: duplicate item {}", s.item)));
                }
                if k > 0 && rank_order(&list[k - 1], s) != std::cmp::Ordering::Less {
                    return Err(Error::Validation(format!("user {u}: list not ordered at {k}")));
                }
            }
            let candidates = self.n_items - train.user_items(u).len();
            if list.len() != self.n.min(candidates) {
                return Err(Error::Validation(format!("user {u}: list shorter than possible")));
            }
        }
        Ok(())
    }
}

fn rank_order(a: &ScoredItem, b: &ScoredItem) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then(a.item.cmp(&b.item))
}

/// The `n` best unseen items per user.
pub fn top_n(scorer: &dyn Scorer, train: &Interactions, n: usize) -> Result<RecommendationSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("list size must be positive".into()));
    }
    let n_items = train.n_items();
    let lists = (0..train.n_users())
        .into_par_iter()
        .map_init(
            || vec![0.0; n_items],
            |scores, u| {
                scorer.score_user(u, scores);
                let seen = train.user_items(u);
                let mut seen_iter = seen.iter().map(|&(i, _)| i).peekable();
                let mut candidates = Vec::with_capacity(n_items - seen.len());
                for (item, &score) in scores.iter().enumerate() {
                    if seen_iter.peek() == Some(&item) {
                        seen_iter.next();
                        continue;
                    }
                    candidates.push(ScoredItem { item, score });
                }
                if candidates.len() > n {
                    candidates.select_nth_unstable_by(n - 1, rank_order);
                    candidates.truncate(n);
                }
                candidates.sort_unstable_by(rank_order);
                candidates
            },
        )
        .collect();
    Ok(RecommendationSet { n, n_items, lists })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Algorithm {
    Random,
    MostPopular,
    UserKnn,
    ItemKnn,
    TrustKnn,
    BiasedMf,
    SvdPlusPlus,
    ListRankMf,
    Slim,
    SoReg,
    SocialMf,
}

/// Which equal-nDCG band an algorithm is compared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ModelBased,
    Neighborhood,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::ModelBased => "model_based",
            Family::Neighborhood => "neighborhood",
        })
    }
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Algorithm::Random,
        Algorithm::MostPopular,
        Algorithm::UserKnn,
        Algorithm::ItemKnn,
        Algorithm::TrustKnn,
        Algorithm::BiasedMf,
        Algorithm::SvdPlusPlus,
        Algorithm::ListRankMf,
        Algorithm::Slim,
        Algorithm::SoReg,
        Algorithm::SocialMf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "Random",
            Algorithm::MostPopular => "MostPopular",
            Algorithm::UserKnn => "UserKNN",
            Algorithm::ItemKnn => "ItemKNN",
            Algorithm::TrustKnn => "TrustKNN",
            Algorithm::BiasedMf => "BiasedMF",
            Algorithm::SvdPlusPlus => "SVD++",
            Algorithm::ListRankMf => "ListRankMF",
            Algorithm::Slim => "SLIM",
            Algorithm::SoReg => "SoReg",
            Algorithm::SocialMf => "SocialMF",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Algorithm::UserKnn | Algorithm::ItemKnn | Algorithm::TrustKnn => Family::Neighborhood,
            _ => Family::ModelBased,
        }
    }

    pub fn accepted_keys(self) -> &'static [&'static str] {
        match self {
            Algorithm::Random | Algorithm::MostPopular => &[],
            Algorithm::UserKnn | Algorithm::ItemKnn => knn::KNN_KEYS,
            Algorithm::TrustKnn => knn::TRUST_KNN_KEYS,
            Algorithm::BiasedMf => mf::BIASED_MF_KEYS,
            Algorithm::SvdPlusPlus => mf::SVDPP_KEYS,
            Algorithm::ListRankMf => listrank::LISTRANK_KEYS,
            Algorithm::Slim => slim::SLIM_KEYS,
            Algorithm::SoReg => social::SOREG_KEYS,
            Algorithm::SocialMf => social::SOCIALMF_KEYS,
        }
    }

    /// Validates keys and value types without fitting anything.
    pub fn check_params(self, params: &HyperParams) -> Result<()> {
        params.check_keys(self.name(), self.accepted_keys())?;
        let name = self.name();
        match self {
            Algorithm::Random | Algorithm::MostPopular => Ok(()),
            Algorithm::UserKnn | Algorithm::ItemKnn => {
                knn::KnnConfig::from_params(name, params).map(drop)
            }
            Algorithm::TrustKnn => knn::TrustKnnConfig::from_params(name, params).map(drop),
            Algorithm::BiasedMf => mf::BiasedMfConfig::from_params(name, params).map(drop),
            Algorithm::SvdPlusPlus => mf::SvdPlusPlusConfig::from_params(name, params).map(drop),
            Algorithm::ListRankMf => listrank::ListRankConfig::from_params(name, params).map(drop),
            Algorithm::Slim => slim::SlimConfig::from_params(name, params).map(drop),
            Algorithm::SoReg => social::SoRegConfig::from_params(name, params).map(drop),
            Algorithm::SocialMf => social::SocialMfConfig::from_params(name, params).map(drop),
        }
    }

    pub fn fit(
        self,
        params: &HyperParams,
        ctx: &TrainContext,
        seed: u64,
    ) -> Result<Box<dyn Scorer>> {
        self.check_params(params)?;
        let name = self.name();
        Ok(match self {
            Algorithm::Random => Box::new(RandomScorer::new(seed)),
            Algorithm::MostPopular => Box::new(MostPopular::fit(&ctx.train)),
            Algorithm::UserKnn => Box::new(knn::UserKnn::fit(
                ctx.train.clone(),
                &knn::KnnConfig::from_params(name, params)?,
            )),
            Algorithm::ItemKnn => Box::new(knn::ItemKnn::fit(
                ctx.train.clone(),
                &knn::KnnConfig::from_params(name, params)?,
            )),
            Algorithm::TrustKnn => Box::new(knn::TrustKnn::fit(
                ctx.train.clone(),
                &ctx.trust,
                &knn::TrustKnnConfig::from_params(name, params)?,
            )),
            Algorithm::BiasedMf => {
                let cfg = mf::BiasedMfConfig::from_params(name, params)?;
                Box::new(mf::BiasedMfModel::new(mf::fit_biased_mf(&ctx.train, &cfg, seed)?.state))
            }
            Algorithm::SvdPlusPlus => {
                let cfg = mf::SvdPlusPlusConfig::from_params(name, params)?;
                Box::new(mf::SvdPlusPlusModel::new(mf::fit_svdpp(&ctx.train, &cfg, seed)?.state, &ctx.train))
            }
            Algorithm::ListRankMf => {
                let cfg = listrank::ListRankConfig::from_params(name, params)?;
                Box::new(listrank::ListRankModel::new(listrank::fit_listrank_mf(&ctx.train, &cfg, seed)?.state))
            }
            Algorithm::Slim => {
                let cfg = slim::SlimConfig::from_params(name, params)?;
                Box::new(slim::fit_slim(&ctx.train, &cfg))
            }
            Algorithm::SoReg => {
                let cfg = social::SoRegConfig::from_params(name, params)?;
                Box::new(social::SoRegModel::new(social::fit_soreg(&ctx.train, &ctx.trust, &cfg, seed)?.state))
            }
            Algorithm::SocialMf => {
                let cfg = social::SocialMfConfig::from_params(name, params)?;
                Box::new(social::SocialMfModel::new(social::fit_socialmf(&ctx.train, &ctx.trust, &cfg, seed)?.state))
            }
        })
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// Case-insensitive; `svdpp` is accepted for `SVD++`.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "svdpp" => Some(Algorithm::SvdPlusPlus),
                "mostpop" | "popular" => Some(Algorithm::MostPopular),
                _ => None,
            })
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_owned()))
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.name().to_owned()
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
