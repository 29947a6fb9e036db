//! In-memory rating, trust, group and category data.
//!
//! Everything here is immutable once built. Users and items get dense indices
//! in order of first appearance in the ratings file; external ids only show
//! up again when writing files.

mod load;
mod split;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use load::{load_dataset, DatasetPaths, GroupDesignation, LoadReport};
pub use split::{kfold_split, FoldSplit};

/// Bidirectional map between opaque external ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert(&mut self, id: &str) -> usize {
        if let Some(&idx) = self.index.get(id) {
            return idx;
        }
        let idx = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), idx);
        idx
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// Sparse explicit ratings over dense user/item index spaces, with row and
/// column adjacency kept sorted by index.
#[derive(Debug, Clone)]
pub struct Interactions {
    n_users: usize,
    n_items: usize,
    entries: Vec<Rating>,
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
}

pub const MIN_RATING: f64 = 1.0;
pub const MAX_RATING: f64 = 5.0;

impl Interactions {
    /// Builds the adjacency and validates bounds, rating range and
    /// uniqueness of every (user, item) pair.
    pub fn new(n_users: usize, n_items: usize, entries: Vec<Rating>) -> Result<Self> {
        let mut by_user = vec![Vec::new(); n_users];
        let mut by_item = vec![Vec::new(); n_items];
        for r in &entries {
            if r.user >= n_users || r.item >= n_items {
                return Err(Error::Validation(format!(
                    "entry ({}, {}) outside {}x{} index space",
                    r.user, r.item, n_users, n_items
                )));
            }
            if !(MIN_RATING..=MAX_RATING).contains(&r.value) {
                return Err(Error::Validation(format!(
                    "rating {} for ({}, {}) outside [1, 5]",
                    r.value, r.user, r.item
                )));
            }
            by_user[r.user].push((r.item, r.value));
            by_item[r.item].push((r.user, r.value));
        }
        for (u, row) in by_user.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(i, _)| i);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation(format!(
                    "duplicate rating for ({}, {})",
                    u, w[0].0
                )));
            }
        }
        for col in &mut by_item {
            col.sort_unstable_by_key(|&(u, _)| u);
        }
        Ok(Self {
            n_users,
            n_items,
            entries,
            by_user,
            by_item,
        })
    }

    /// Same index space, keeping only the listed entries.
    pub fn subset(&self, entry_indices: &[usize]) -> Interactions {
        let entries = entry_indices.iter().map(|&e| self.entries[e]).collect();
        Interactions::new(self.n_users, self.n_items, entries)
            .expect("subset of a valid matrix is valid")
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(item, rating)` pairs of a user, ascending by item.
    pub fn user_items(&self, user: usize) -> &[(usize, f64)] {
        &self.by_user[user]
    }

    /// `(user, rating)` pairs of an item, ascending by user.
    pub fn item_users(&self, item: usize) -> &[(usize, f64)] {
        &self.by_item[item]
    }

    pub fn rating(&self, user: usize, item: usize) -> Option<f64> {
        let row = &self.by_user[user];
        row.binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|p| row[p].1)
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.rating(user, item).is_some()
    }

    pub fn global_mean(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().map(|r| r.value).sum::<f64>() / self.entries.len() as f64
    }

    pub fn user_mean(&self, user: usize) -> Option<f64> {
        let row = &self.by_user[user];
        if row.is_empty() {
            None
        } else {
            Some(row.iter().map(|&(_, r)| r).sum::<f64>() / row.len() as f64)
        }
    }

    /// Number of ratings each item received.
    pub fn item_counts(&self) -> Vec<usize> {
        self.by_item.iter().map(Vec::len).collect()
    }
}

/// Ratings with their external id maps.
#[derive(Debug, Clone)]
pub struct RatingMatrix {
    pub users: IdMap,
    pub items: IdMap,
    data: Interactions,
}

impl RatingMatrix {
    pub fn new(users: IdMap, items: IdMap, entries: Vec<Rating>) -> Result<Self> {
        let data = Interactions::new(users.len(), items.len(), entries)?;
        Ok(Self { users, items, data })
    }

    pub fn interactions(&self) -> &Interactions {
        &self.data
    }

    pub fn n_users(&self) -> usize {
        self.data.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.data.n_items()
    }
}

/// Presence indicator `T(u, i)`: 1 when the pair has any rating, including
/// low ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryView {
    n_items: usize,
    rows: Vec<Vec<usize>>,
}

pub fn binarize(data: &Interactions) -> BinaryView {
    BinaryView {
        n_items: data.n_items(),
        rows: (0..data.n_users())
            .map(|u| data.user_items(u).iter().map(|&(i, _)| i).collect())
            .collect(),
    }
}

impl BinaryView {
    pub fn get(&self, user: usize, item: usize) -> bool {
        self.rows[user].binary_search(&item).is_ok()
    }

    pub fn items_of(&self, user: usize) -> &[usize] {
        &self.rows[user]
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn ones(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Directed trust edges. Node indices below `n_users` are rating-matrix
/// users; the rest are quarantined ids that appear only in the trust file.
#[derive(Debug, Clone)]
pub struct TrustGraph {
    n_users: usize,
    quarantined: IdMap,
    edges: Vec<(usize, usize)>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl TrustGraph {
    /// Self-loops and repeated edges are dropped; the returned counts say how
    /// many of each were seen.
    pub fn new(
        n_users: usize,
        quarantined: IdMap,
        raw_edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> (Self, usize, usize) {
        let n_nodes = n_users + quarantined.len();
        let mut out_adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        let mut in_adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        let mut seen = std::collections::HashSet::new();
        let mut edges = Vec::new();
        let (mut self_loops, mut duplicates) = (0, 0);
        for (a, b) in raw_edges {
            assert!(a < n_nodes && b < n_nodes, "trust edge endpoint out of range");
            if a == b {
                self_loops += 1;
                continue;
            }
            if !seen.insert((a, b)) {
                duplicates += 1;
                continue;
            }
            edges.push((a, b));
            out_adj[a].push(b);
            in_adj[b].push(a);
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_unstable();
        }
        (
            Self {
                n_users,
                quarantined,
                edges,
                out_adj,
                in_adj,
            },
            self_loops,
            duplicates,
        )
    }

    /// Graph over rating-matrix users only.
    pub fn from_edges(n_users: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self::new(n_users, IdMap::new(), edges).0
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn quarantined(&self) -> &IdMap {
        &self.quarantined
    }

    pub fn is_known(&self, node: usize) -> bool {
        node < self.n_users
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Rating-matrix users that `user` trusts, ascending.
    pub fn trusted(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.out_adj[user]
            .iter()
            .copied()
            .filter(move |&v| v < self.n_users)
    }

    /// Rating-matrix users that trust `user`, ascending.
    pub fn trusted_by(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.in_adj[user]
            .iter()
            .copied()
            .filter(move |&v| v < self.n_users)
    }

    pub fn trustor_count(&self) -> usize {
        self.out_adj.iter().filter(|a| !a.is_empty()).count()
    }

    pub fn trustee_count(&self) -> usize {
        self.in_adj.iter().filter(|a| !a.is_empty()).count()
    }

    /// Edges with at least one quarantined endpoint.
    pub fn quarantined_edge_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a >= self.n_users || b >= self.n_users)
            .count()
    }
}

/// User → group label, with one protected and one unprotected label.
#[derive(Debug, Clone)]
pub struct GroupAssignment {
    labels: Vec<String>,
    user_group: Vec<Option<usize>>,
    protected: usize,
    unprotected: usize,
}

impl GroupAssignment {
    /// `labels_by_user[u]` is the label of user `u`, if known. Labels are
    /// indexed in sorted order.
    pub fn new(
        labels_by_user: &[Option<String>],
        protected: &str,
        unprotected: &str,
    ) -> Result<Self> {
        if protected == unprotected {
            return Err(Error::Validation(format!(
                "protected and unprotected group are both {protected:?}"
            )));
        }
        let mut labels: Vec<String> = labels_by_user.iter().flatten().cloned().collect();
        labels.sort();
        labels.dedup();
        let find = |name: &str| {
            labels.binary_search_by(|l| l.as_str().cmp(name)).map_err(|_| {
                Error::Validation(format!(
                    "group label {name:?} does not occur in the groups file (found {labels:?})"
                ))
            })
        };
        let protected = find(protected)?;
        let unprotected = find(unprotected)?;
        let user_group = labels_by_user
            .iter()
            .map(|l| {
                l.as_ref()
                    .map(|l| labels.binary_search(l).expect("label collected above"))
            })
            .collect();
        Ok(Self {
            labels,
            user_group,
            protected,
            unprotected,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, group: usize) -> &str {
        &self.labels[group]
    }

    pub fn group_of(&self, user: usize) -> Option<usize> {
        self.user_group[user]
    }

    pub fn protected(&self) -> usize {
        self.protected
    }

    pub fn unprotected(&self) -> usize {
        self.unprotected
    }

    pub fn n_users(&self) -> usize {
        self.user_group.len()
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        self.user_group
            .iter()
            .enumerate()
            .filter(|(_, g)| **g == Some(group))
            .map(|(u, _)| u)
            .collect()
    }

    pub fn ungrouped_count(&self) -> usize {
        self.user_group.iter().filter(|g| g.is_none()).count()
    }

    pub fn sizes(&self) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> =
            self.labels.iter().map(|l| (l.clone(), 0)).collect();
        for g in self.user_group.iter().flatten() {
            *out.get_mut(&self.labels[*g]).unwrap() += 1;
        }
        out
    }
}

/// Item → category set and its exact inverse. Category indices follow the
/// sorted label order.
#[derive(Debug, Clone)]
pub struct CategoryMap {
    labels: Vec<String>,
    item_categories: Vec<Vec<usize>>,
    category_items: Vec<Vec<usize>>,
}

impl CategoryMap {
    pub fn new(n_items: usize, pairs: impl IntoIterator<Item = (usize, String)>) -> Self {
        let pairs: Vec<(usize, String)> = pairs.into_iter().collect();
        let mut labels: Vec<String> = pairs.iter().map(|(_, l)| l.clone()).collect();
        labels.sort();
        labels.dedup();
        let mut item_categories = vec![Vec::new(); n_items];
        let mut category_items = vec![Vec::new(); labels.len()];
        for (item, label) in &pairs {
            let c = labels.binary_search(label).unwrap();
            item_categories[*item].push(c);
        }
        for (item, cats) in item_categories.iter_mut().enumerate() {
            cats.sort_unstable();
            cats.dedup();
            for &c in cats.iter() {
                category_items[c].push(item);
            }
        }
        Self {
            labels,
            item_categories,
            category_items,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, category: usize) -> &str {
        &self.labels[category]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.item_categories.len()
    }

    pub fn categories_of(&self, item: usize) -> &[usize] {
        &self.item_categories[item]
    }

    pub fn items_in(&self, category: usize) -> &[usize] {
        &self.category_items[category]
    }

    pub fn uncategorized(&self) -> Vec<usize> {
        (0..self.item_categories.len())
            .filter(|&i| self.item_categories[i].is_empty())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub ratings: RatingMatrix,
    pub trust: TrustGraph,
    pub groups: GroupAssignment,
    pub categories: CategoryMap,
    pub report: LoadReport,
}

/// `100 * count / (rows * cols)`.
pub fn density(count: usize, rows: usize, cols: usize) -> Result<f64> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "density of a {rows}x{cols} space"
        )));
    }
    Ok(100.0 * count as f64 / (rows as f64 * cols as f64))
}

pub fn rating_density(data: &Interactions) -> Result<f64> {
    density(data.len(), data.n_users(), data.n_items())
}

/// Which user base the trust density divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustDensityBase {
    /// Distinct trustors times distinct trustees. This is the convention that
    /// reproduces the Yelp core-40 figure (26,453 / (919 * 1,172)).
    ActiveEndpoints,
    /// Rating-matrix users squared.
    AllUsers,
}

pub fn trust_density(graph: &TrustGraph, base: TrustDensityBase) -> Result<f64> {
    match base {
        TrustDensityBase::ActiveEndpoints => density(
            graph.edge_count(),
            graph.trustor_count(),
            graph.trustee_count(),
        ),
        TrustDensityBase::AllUsers => density(graph.edge_count(), graph.n_users(), graph.n_users()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub rating_density: f64,
    pub trust_edges: usize,
    pub trustors: usize,
    pub trustees: usize,
    pub trust_density: f64,
    pub trust_density_all_users: f64,
    pub quarantined_trust_ids: usize,
    pub quarantined_trust_edges: usize,
    pub groups: BTreeMap<String, usize>,
    pub ungrouped_users: usize,
    pub protected_group: String,
    pub unprotected_group: String,
    pub categories: usize,
    pub uncategorized_items: usize,
}

impl Dataset {
    pub fn summary(&self) -> DatasetSummary {
        let data = self.ratings.interactions();
        let trust_density_or_zero = |base| trust_density(&self.trust, base).unwrap_or(0.0);
        DatasetSummary {
            users: data.n_users(),
            items: data.n_items(),
            ratings: data.len(),
            rating_density: rating_density(data).unwrap_or(0.0),
            trust_edges: self.trust.edge_count(),
            trustors: self.trust.trustor_count(),
            trustees: self.trust.trustee_count(),
            trust_density: trust_density_or_zero(TrustDensityBase::ActiveEndpoints),
            trust_density_all_users: trust_density_or_zero(TrustDensityBase::AllUsers),
            quarantined_trust_ids: self.trust.quarantined().len(),
            quarantined_trust_edges: self.trust.quarantined_edge_count(),
            groups: self.groups.sizes(),
            ungrouped_users: self.groups.ungrouped_count(),
            protected_group: self.groups.label(self.groups.protected()).to_owned(),
            unprotected_group: self.groups.label(self.groups.unprotected()).to_owned(),
            categories: self.categories.len(),
            uncategorized_items: self.categories.uncategorized().len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Interactions {
        let entries = vec![
            Rating { user: 0, item: 2, value: 1.0 },
            Rating { user: 0, item: 0, value: 4.0 },
            Rating { user: 1, item: 1, value: 5.0 },
            Rating { user: 2, item: 2, value: 3.5 },
        ];
        Interactions::new(3, 3, entries).unwrap()
    }

    #[test]
    fn adjacency_mirrors_entries() {
        let data = toy();
        let mut from_rows = vec![];
        for u in 0..3 {
            for &(i, r) in data.user_items(u) {
                from_rows.push((u, i, r.to_bits()));
            }
        }
        let mut from_cols = vec![];
        for i in 0..3 {
            for &(u, r) in data.item_users(i) {
                from_cols.push((u, i, r.to_bits()));
            }
        }
        let mut from_entries: Vec<_> = data
            .entries()
            .iter()
            .map(|r| (r.user, r.item, r.value.to_bits()))
            .collect();
        from_rows.sort();
        from_cols.sort();
        from_entries.sort();
        assert_eq!(from_rows, from_entries);
        assert_eq!(from_cols, from_entries);
    }

    #[test]
    fn rejects_duplicates_and_range() {
        let dup = vec![
            Rating { user: 0, item: 0, value: 1.0 },
            Rating { user: 0, item: 0, value: 2.0 },
        ];
        assert!(Interactions::new(1, 1, dup).is_err());
        let low = vec![Rating { user: 0, item: 0, value: 0.5 }];
        assert!(Interactions::new(1, 1, low).is_err());
        let high = vec![Rating { user: 0, item: 0, value: 5.5 }];
        assert!(Interactions::new(1, 1, high).is_err());
    }

    #[test]
    fn binarize_counts_low_ratings() {
        let data = toy();
        let t = binarize(&data);
        assert!(t.get(0, 2)); // rating 1 still counts
        assert!(!t.get(1, 0));
        assert_eq!(t.ones(), data.len());
    }

    #[test]
    fn density_values() {
        assert_eq!(density(100, 10, 10).unwrap(), 100.0);
        assert!(density(1, 0, 10).is_err());
        // Yelp core-40 counts.
        let ratings = density(100_409, 1_355, 1_272).unwrap();
        assert_eq!(format!("{ratings:.3}"), "5.826");
    }

    #[test]
    fn trust_density_convention_matches_core40_counts() {
        // Brute force both denominators against the known 2.456.
        let edges = 26_453;
        let active = density(edges, 919, 1_172).unwrap();
        let all = density(edges, 1_355, 1_355).unwrap();
        assert_eq!(format!("{active:.3}"), "2.456");
        assert_ne!(format!("{all:.3}"), "2.456");
    }

    #[test]
    fn trust_graph_drops_loops_and_duplicates() {
        let mut q = IdMap::new();
        q.get_or_insert("ghost");
        let (g, loops, dups) = TrustGraph::new(3, q, vec![(0, 1), (0, 1), (1, 1), (2, 3), (0, 2)]);
        assert_eq!((loops, dups), (1, 1));
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.trusted(0).collect::<Vec<_>>(), vec![1, 2]);
        // quarantined trustee is not a usable neighbor
        assert_eq!(g.trusted(2).count(), 0);
        assert_eq!(g.quarantined_edge_count(), 1);
        assert_eq!(g.trustor_count(), 2);
        assert_eq!(g.trustee_count(), 3);
    }

    #[test]
    fn group_designation_must_exist() {
        let labels = vec![Some("m".to_owned()), None, Some("f".to_owned())];
        let g = GroupAssignment::new(&labels, "f", "m").unwrap();
        assert_eq!(g.members(g.protected()), vec![2]);
        assert_eq!(g.ungrouped_count(), 1);
        assert!(GroupAssignment::new(&labels, "x", "m").is_err());
        assert!(GroupAssignment::new(&labels, "m", "m").is_err());
    }

    #[test]
    fn category_map_inverse_is_exact() {
        let cm = CategoryMap::new(
            4,
            vec![
                (0, "b".to_owned()),
                (0, "a".to_owned()),
                (1, "a".to_owned()),
                (1, "a".to_owned()),
                (3, "c".to_owned()),
            ],
        );
        assert_eq!(cm.labels(), &["a", "b", "c"]);
        for item in 0..4 {
            for &c in cm.categories_of(item) {
                assert!(cm.items_in(c).contains(&item));
            }
        }
        for c in 0..cm.len() {
            for &item in cm.items_in(c) {
                assert!(cm.categories_of(item).contains(&c));
            }
        }
        assert_eq!(cm.items_in(0), &[0, 1]);
        assert_eq!(cm.uncategorized(), vec![2]);
    }
}
