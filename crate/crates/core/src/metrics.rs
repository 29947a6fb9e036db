//! Ranking quality, catalog coverage and group bias measures.
//!
//! Group measures take a set of users and an [`Incidence`] source, either the
//! binarized training data or a recommendation set. Quantities that can be
//! undefined (an empty group, a zero training bias) are `Option`s and
//! serialize as `null`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{BinaryView, CategoryMap, GroupAssignment, Interactions};
use crate::error::{Error, Result};
use crate::models::RecommendationSet;
use crate::params::HyperParams;

/// Binary user-item membership.
pub trait Incidence {
    fn n_users(&self) -> usize;
    fn user_items(&self, user: usize) -> impl Iterator<Item = usize> + '_;
}

impl Incidence for BinaryView {
    fn n_users(&self) -> usize {
        BinaryView::n_users(self)
    }

    fn user_items(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.items_of(user).iter().copied()
    }
}

impl Incidence for RecommendationSet {
    fn n_users(&self) -> usize {
        RecommendationSet::n_users(self)
    }

    fn user_items(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.items(user)
    }
}

/// Per-category incidence counts of one group plus its total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryCounts {
    pub per_category: Vec<usize>,
    pub total: usize,
}

pub fn category_counts(members: &[usize], categories: &CategoryMap, source: &impl Incidence) -> CategoryCounts {
    let mut per_category = vec![0; categories.len()];
    let mut total = 0;
    for &u in members {
        for i in source.user_items(u) {
            total += 1;
            for &c in categories.categories_of(i) {
                per_category[c] += 1;
            }
        }
    }
    CategoryCounts { per_category, total }
}

impl CategoryCounts {
    pub fn preference_ratio(&self, category: usize) -> Option<f64> {
        (self.total > 0).then(|| self.per_category[category] as f64 / self.total as f64)
    }
}

fn check_category(category: usize, categories: &CategoryMap) -> Result<()> {
    if category >= categories.len() {
        return Err(Error::UnknownCategory(format!("#{category}")));
    }
    Ok(())
}

/// `P(C)`: share of catalog items carrying the category.
pub fn category_fraction(category: usize, categories: &CategoryMap, n_items: usize) -> Result<f64> {
    check_category(category, categories)?;
    if n_items == 0 {
        return Err(Error::InvalidArgument("item count must be positive".into()));
    }
    Ok(categories.items_in(category).len() as f64 / n_items as f64)
}

/// `None` when the group has no interactions in `source`.
pub fn preference_ratio(
    members: &[usize],
    category: usize,
    categories: &CategoryMap,
    source: &impl Incidence,
) -> Result<Option<f64>> {
    check_category(category, categories)?;
    Ok(category_counts(members, categories, source).preference_ratio(category))
}

pub fn bias(preference_ratio: Option<f64>, category_fraction: f64) -> Result<Option<f64>> {
    if !(category_fraction > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "category fraction {category_fraction} must be positive"
        )));
    }
    Ok(preference_ratio.map(|pr| pr / category_fraction))
}

/// `(B_R - B_T) / B_T`; `None` unless `B_T > 0` and `B_R` is defined.
pub fn bias_disparity(bias_train: Option<f64>, bias_recs: Option<f64>) -> Option<f64> {
    match (bias_train, bias_recs) {
        (Some(t), Some(r)) if t > 0.0 => Some((r - t) / t),
        _ => None,
    }
}

/// Disparity as shown in reports: also undefined when the recommendations
/// contain nothing from the category.
pub fn reported_disparity(bias_train: Option<f64>, bias_recs: Option<f64>) -> Option<f64> {
    match bias_recs {
        Some(r) if r > 0.0 => bias_disparity(bias_train, bias_recs),
        _ => None,
    }
}

/// Mean over categories of the absolute gap between the unprotected and
/// protected groups' recommendation-minus-training count deltas. `None`
/// when the category map is empty.
pub fn average_disparity(
    train: &BinaryView,
    recs: &RecommendationSet,
    groups: &GroupAssignment,
    categories: &CategoryMap,
) -> Option<f64> {
    disparity(train, recs, groups, categories, false)
}

/// Like [`average_disparity`] with each count divided by the group's total
/// interactions in the same source. An extension: raw counts scale with
/// group size.
pub fn average_disparity_normalized(
    train: &BinaryView,
    recs: &RecommendationSet,
    groups: &GroupAssignment,
    categories: &CategoryMap,
) -> Option<f64> {
    disparity(train, recs, groups, categories, true)
}

fn disparity(
    train: &BinaryView,
    recs: &RecommendationSet,
    groups: &GroupAssignment,
    categories: &CategoryMap,
    normalized: bool,
) -> Option<f64> {
    if categories.is_empty() {
        return None;
    }
    let delta = |group: usize| -> Option<Vec<f64>> {
        let members = groups.members(group);
        let t = category_counts(&members, categories, train);
        let r = category_counts(&members, categories, recs);
        let (st, sr) = if normalized {
            if t.total == 0 || r.total == 0 {
                return None;
            }
            (t.total as f64, r.total as f64)
        } else {
            (1.0, 1.0)
        };
        Some(
            r.per_category
                .iter()
                .zip(&t.per_category)
                .map(|(&nr, &nt)| nr as f64 / sr - nt as f64 / st)
                .collect(),
        )
    };
    let du = delta(groups.unprotected())?;
    let dp = delta(groups.protected())?;
    let sum: f64 = du.iter().zip(&dp).map(|(a, b)| (a - b).abs()).sum();
    Some(sum / categories.len() as f64)
}

/// Percentage of catalog items recommended to at least one user.
pub fn item_coverage(recs: &RecommendationSet, n_items: usize) -> Result<f64> {
    if n_items == 0 {
        return Err(Error::InvalidArgument("item count must be positive".into()));
    }
    let seen: HashSet<usize> = (0..recs.n_users()).flat_map(|u| recs.items(u)).collect();
    Ok(100.0 * seen.len() as f64 / n_items as f64)
}

/// Binary-relevance nDCG@k against the test fold, averaged over users with
/// test items. Zero when no user has any.
pub fn ndcg_at_k(recs: &RecommendationSet, test: &Interactions, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let mut total = 0.0;
    let mut users = 0usize;
    for u in 0..recs.n_users().min(test.n_users()) {
        let relevant = test.user_items(u);
        if relevant.is_empty() {
            continue;
        }
        let dcg: f64 = recs
            .items(u)
            .take(k)
            .enumerate()
            .filter(|&(_, i)| test.contains(u, i))
            .map(|(pos, _)| discount(pos))
            .sum();
        let idcg: f64 = (0..k.min(relevant.len())).map(discount).sum();
        total += dcg / idcg;
        users += 1;
    }
    Ok(if users == 0 { 0.0 } else { total / users as f64 })
}

/// `1 / log2(rank + 1)` for zero-based `pos`.
fn discount(pos: usize) -> f64 {
    1.0 / ((pos + 2) as f64).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryRanking {
    #[default]
    PreferenceRatio,
    Bias,
}

/// Categories by descending training preference (ratio or bias), ties by
/// label; at most `count`.
pub fn top_preferred_categories(
    members: &[usize],
    train: &BinaryView,
    categories: &CategoryMap,
    count: usize,
    ranking: CategoryRanking,
) -> Vec<usize> {
    let counts = category_counts(members, categories, train);
    let n_items = categories.n_items() as f64;
    let key = |c: usize| {
        let pr = counts.preference_ratio(c).unwrap_or(0.0);
        match ranking {
            CategoryRanking::PreferenceRatio => pr,
            CategoryRanking::Bias => pr * n_items / categories.items_in(c).len() as f64,
        }
    };
    let mut order: Vec<(usize, f64)> = (0..categories.len()).map(|c| (c, key(c))).collect();
    order.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| categories.label(a.0).cmp(categories.label(b.0)))
    });
    order.into_iter().take(count).map(|(c, _)| c).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryBiasRecord {
    pub group: String,
    pub category: String,
    pub category_fraction: f64,
    pub pr_train: Option<f64>,
    pub pr_recs: Option<f64>,
    pub bias_train: Option<f64>,
    pub bias_recs: Option<f64>,
    pub disparity: Option<f64>,
}

impl CategoryBiasRecord {
    fn new(group: &str, category: &str, category_fraction: f64, pr_train: Option<f64>, pr_recs: Option<f64>) -> Self {
        let bias_train = pr_train.map(|p| p / category_fraction);
        let bias_recs = pr_recs.map(|p| p / category_fraction);
        Self {
            group: group.to_owned(),
            category: category.to_owned(),
            category_fraction,
            pr_train,
            pr_recs,
            bias_train,
            bias_recs,
            disparity: bias_disparity(bias_train, bias_recs),
        }
    }
}

/// Bias records for every (group, category) pair, groups in label order.
pub fn category_bias(
    train: &BinaryView,
    recs: &RecommendationSet,
    groups: &GroupAssignment,
    categories: &CategoryMap,
) -> Vec<CategoryBiasRecord> {
    let n_items = categories.n_items() as f64;
    let mut out = Vec::with_capacity(groups.labels().len() * categories.len());
    for (g, label) in groups.labels().iter().enumerate() {
        let members = groups.members(g);
        let t = category_counts(&members, categories, train);
        let r = category_counts(&members, categories, recs);
        for c in 0..categories.len() {
            let fraction = categories.items_in(c).len() as f64 / n_items;
            out.push(CategoryBiasRecord::new(
                label,
                categories.label(c),
                fraction,
                t.preference_ratio(c),
                r.preference_ratio(c),
            ));
        }
    }
    out
}

/// Everything measured on one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub ndcg: f64,
    pub coverage: f64,
    pub average_disparity: Option<f64>,
    pub average_disparity_normalized: Option<f64>,
    pub categories: Vec<CategoryBiasRecord>,
}

/// Inputs for scoring one fold.
pub struct FoldInputs<'a> {
    pub train: &'a Interactions,
    pub test: &'a Interactions,
    pub recs: &'a RecommendationSet,
    pub groups: &'a GroupAssignment,
    pub categories: &'a CategoryMap,
}

pub fn evaluate_fold(inputs: &FoldInputs<'_>) -> Result<FoldMetrics> {
    let FoldInputs { train, test, recs, groups, categories } = *inputs;
    let binary = crate::dataset::binarize(train);
    Ok(FoldMetrics {
        ndcg: ndcg_at_k(recs, test, recs.list_size())?,
        coverage: item_coverage(recs, train.n_items())?,
        average_disparity: average_disparity(&binary, recs, groups, categories),
        average_disparity_normalized: average_disparity_normalized(&binary, recs, groups, categories),
        categories: category_bias(&binary, recs, groups, categories),
    })
}

/// Per-fold metrics plus their means for one algorithm configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub algorithm: String,
    pub params: HyperParams,
    pub folds: Vec<FoldMetrics>,
    pub mean: FoldMetrics,
}

/// Mean of the defined values; `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    mean_defined(values.into_iter().map(Some)).unwrap_or(0.0)
}

impl MetricReport {
    /// Bias and preference values are averaged over folds where defined;
    /// disparity is then recomputed from the averaged biases.
    pub fn aggregate(algorithm: &str, params: &HyperParams, folds: Vec<FoldMetrics>) -> Result<Self> {
        let first = folds
            .first()
            .ok_or_else(|| Error::InvalidArgument("no folds to aggregate".into()))?;
        if folds.iter().any(|f| f.categories.len() != first.categories.len()) {
            return Err(Error::Validation("folds disagree on category records".into()));
        }
        let categories = (0..first.categories.len())
            .map(|k| {
                fn at(f: &FoldMetrics, k: usize) -> &CategoryBiasRecord {
                    &f.categories[k]
                }
                let base = at(first, k);
                let bias_train = mean_defined(folds.iter().map(|f| at(f, k).bias_train));
                let bias_recs = mean_defined(folds.iter().map(|f| at(f, k).bias_recs));
                CategoryBiasRecord {
                    group: base.group.clone(),
                    category: base.category.clone(),
                    category_fraction: base.category_fraction,
                    pr_train: mean_defined(folds.iter().map(|f| at(f, k).pr_train)),
                    pr_recs: mean_defined(folds.iter().map(|f| at(f, k).pr_recs)),
                    bias_train,
                    bias_recs,
                    disparity: bias_disparity(bias_train, bias_recs),
                }
            })
            .collect();
        let mean = FoldMetrics {
            ndcg: mean(folds.iter().map(|f| f.ndcg)),
            coverage: mean(folds.iter().map(|f| f.coverage)),
            average_disparity: mean_defined(folds.iter().map(|f| f.average_disparity)),
            average_disparity_normalized: mean_defined(folds.iter().map(|f| f.average_disparity_normalized)),
            categories,
        };
        Ok(Self {
            algorithm: algorithm.to_owned(),
            params: params.clone(),
            folds,
            mean,
        })
    }
}
