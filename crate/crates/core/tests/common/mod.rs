//! Brute-force reference implementations and random toy instances shared by
//! the integration tests. Everything here works on dense matrices and plain
//! loops and avoids the library's own helpers.

#![allow(dead_code)]

use std::collections::BTreeSet;

use fairrec::dataset::{CategoryMap, GroupAssignment, Interactions, Rating, TrustGraph};
use fairrec::models::factor::{FactorState, Objective, ParamRef};
use fairrec::models::knn::{Similarity, FALLBACK_OFFSET};
use fairrec::models::{RecommendationSet, ScoredItem};
use rand::seq::SliceRandom;
use rand::Rng;

/// Dense rating matrix; `None` marks an unrated pair.
#[derive(Debug, Clone)]
pub struct Dense {
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Dense {
    pub fn random(rng: &mut impl Rng, users: usize, items: usize, density: f64) -> Self {
        let cells = (0..users)
            .map(|_| {
                (0..items)
                    .map(|_| rng.gen_bool(density).then(|| rng.gen_range(1..=5) as f64))
                    .collect()
            })
            .collect();
        Self { cells }
    }

    pub fn users(&self) -> usize {
        self.cells.len()
    }

    pub fn items(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn column(&self, i: usize) -> Vec<Option<f64>> {
        self.cells.iter().map(|row| row[i]).collect()
    }

    pub fn interactions(&self) -> Interactions {
        let mut entries = Vec::new();
        for (user, row) in self.cells.iter().enumerate() {
            for (item, v) in row.iter().enumerate() {
                if let Some(value) = *v {
                    entries.push(Rating { user, item, value });
                }
            }
        }
        entries.reverse();
        Interactions::new(self.users(), self.items(), entries).unwrap()
    }

    pub fn binary(&self) -> Vec<Vec<bool>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(Option::is_some).collect())
            .collect()
    }

    fn row_mean(&self, u: usize) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for v in self.cells[u].iter().flatten() {
            s += v;
            n += 1;
        }
        if n > 0 {
            return s / n as f64;
        }
        let all: Vec<f64> = self.cells.iter().flatten().flatten().copied().collect();
        all.iter().sum::<f64>() / all.len() as f64
    }
}

pub fn similarity(measure: Similarity, a: &[Option<f64>], b: &[Option<f64>], shrinkage: f64) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    let n = pairs.len() as f64;
    let raw = match measure {
        Similarity::Pcc => {
            if pairs.len() < 2 {
                return 0.0;
            }
            let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let mut num = 0.0;
            let mut va = 0.0;
            let mut vb = 0.0;
            for &(x, y) in &pairs {
                num += (x - ma) * (y - mb);
                va += (x - ma) * (x - ma);
                vb += (y - mb) * (y - mb);
            }
            if va <= 0.0 || vb <= 0.0 {
                return 0.0;
            }
            num / (va * vb).sqrt()
        }
        Similarity::Cos => {
            let mut num = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for &(x, y) in &pairs {
                num += x * y;
                na += x * x;
                nb += y * y;
            }
            if pairs.is_empty() || na <= 0.0 || nb <= 0.0 {
                return 0.0;
            }
            num / (na * nb).sqrt()
        }
    };
    raw * n / (n + shrinkage)
}

/// Every other anchor with positive weight, best first, cut to `k`.
fn top_k(weights: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    let mut w: Vec<(usize, f64)> = weights.into_iter().filter(|&(_, x)| x > 0.0).collect();
    w.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    w.truncate(k);
    w
}

fn user_based(data: &Dense, u: usize, i: usize, neighbors: &[(usize, f64)]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(v, w) in neighbors {
        if let Some(r) = data.cells[v][i] {
            num += w * (r - data.row_mean(v));
            den += w.abs();
        }
    }
    if den > 0.0 {
        data.row_mean(u) + num / den
    } else {
        data.row_mean(u) - FALLBACK_OFFSET
    }
}

/// Predictions of every (user, item) pair, row-major.
pub fn userknn(data: &Dense, k: usize, measure: Similarity, shrinkage: f64) -> Vec<Vec<f64>> {
    (0..data.users())
        .map(|u| {
            let weights = (0..data.users())
                .filter(|&v| v != u)
                .map(|v| (v, similarity(measure, &data.cells[u], &data.cells[v], shrinkage)))
                .collect();
            let nb = top_k(weights, k);
            (0..data.items()).map(|i| user_based(data, u, i, &nb)).collect()
        })
        .collect()
}

pub fn itemknn(data: &Dense, k: usize, measure: Similarity, shrinkage: f64) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<Option<f64>>> = (0..data.items()).map(|i| data.column(i)).collect();
    let tables: Vec<Vec<(usize, f64)>> = (0..data.items())
        .map(|i| {
            let weights = (0..data.items())
                .filter(|&j| j != i)
                .map(|j| (j, similarity(measure, &cols[i], &cols[j], shrinkage)))
                .collect();
            top_k(weights, k)
        })
        .collect();
    (0..data.users())
        .map(|u| {
            (0..data.items())
                .map(|i| {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for &(j, w) in &tables[i] {
                        if let Some(r) = data.cells[u][j] {
                            num += w * r;
                            den += w.abs();
                        }
                    }
                    if den > 0.0 {
                        num / den
                    } else {
                        data.row_mean(u) - FALLBACK_OFFSET
                    }
                })
                .collect()
        })
        .collect()
}

pub fn trustknn(data: &Dense, trusts: &[Vec<bool>], k: usize) -> Vec<Vec<f64>> {
    (0..data.users())
        .map(|u| {
            let mut cands: Vec<(usize, usize)> = (0..data.users())
                .filter(|&v| trusts[u][v])
                .map(|v| {
                    let overlap = (0..data.items())
                        .filter(|&i| data.cells[u][i].is_some() && data.cells[v][i].is_some())
                        .count();
                    (v, overlap)
                })
                .collect();
            cands.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let nb: Vec<(usize, f64)> = cands.into_iter().take(k).map(|(v, _)| (v, 1.0)).collect();
            (0..data.items()).map(|i| user_based(data, u, i, &nb)).collect()
        })
        .collect()
}

pub fn random_trust(rng: &mut impl Rng, users: usize, p: f64) -> (Vec<Vec<bool>>, TrustGraph) {
    let mut adj = vec![vec![false; users]; users];
    let mut edges = Vec::new();
    for (u, row) in adj.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            if u != v && rng.gen_bool(p) {
                *cell = true;
                edges.push((u, v));
            }
        }
    }
    edges.shuffle(rng);
    (adj, TrustGraph::from_edges(users, edges))
}

/// A toy instance for the fairness metrics.
pub struct MetricCase {
    pub train: Dense,
    pub test: Dense,
    /// `member[i][c]`: item i carries category c.
    pub member: Vec<Vec<bool>>,
    /// `Some(true)` protected, `Some(false)` unprotected.
    pub group: Vec<Option<bool>>,
    pub lists: Vec<Vec<usize>>,
    pub list_size: usize,
}

pub const PROTECTED: &str = "p";
pub const UNPROTECTED: &str = "u";

impl MetricCase {
    pub fn random(rng: &mut impl Rng) -> Self {
        let users = rng.gen_range(2..=50);
        let items = rng.gen_range(5..=40);
        let cats = rng.gen_range(1..=5);
        let density = rng.gen_range(0.05..0.5);
        let train = Dense::random(rng, users, items, density);
        let mut test = Dense::random(rng, users, items, density / 2.0);
        for u in 0..users {
            for i in 0..items {
                if train.cells[u][i].is_some() {
                    test.cells[u][i] = None;
                }
            }
        }
        let member = (0..items)
            .map(|i| (0..cats).map(|c| i % cats == c || rng.gen_bool(0.25)).collect())
            .collect();
        let mut group: Vec<Option<bool>> = (0..users)
            .map(|_| match rng.gen_range(0..5) {
                0 => None,
                1 | 2 => Some(true),
                _ => Some(false),
            })
            .collect();
        group[0] = Some(true);
        group[1] = Some(false);
        let list_size = rng.gen_range(1..=10);
        let lists = (0..users)
            .map(|u| {
                let mut cands: Vec<usize> = (0..items).filter(|&i| train.cells[u][i].is_none()).collect();
                cands.shuffle(rng);
                let len = if rng.gen_bool(0.1) { 0 } else { list_size.min(cands.len()) };
                cands.truncate(len);
                cands
            })
            .collect();
        Self { train, test, member, group, lists, list_size }
    }

    pub fn categories(&self) -> usize {
        self.member.first().map_or(0, Vec::len)
    }

    pub fn category_label(c: usize) -> String {
        format!("cat{c}")
    }

    pub fn category_map(&self) -> CategoryMap {
        let pairs = self.member.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .map(move |(c, _)| (i, Self::category_label(c)))
        });
        CategoryMap::new(self.train.items(), pairs)
    }

    pub fn groups(&self) -> GroupAssignment {
        let labels: Vec<Option<String>> = self
            .group
            .iter()
            .map(|g| g.map(|p| if p { PROTECTED } else { UNPROTECTED }.to_owned()))
            .collect();
        GroupAssignment::new(&labels, PROTECTED, UNPROTECTED).unwrap()
    }

    pub fn recommendations(&self) -> RecommendationSet {
        let lists = self
            .lists
            .iter()
            .map(|l| {
                l.iter()
                    .enumerate()
                    .map(|(pos, &item)| ScoredItem { item, score: (l.len() - pos) as f64 })
                    .collect()
            })
            .collect();
        RecommendationSet::from_lists(self.list_size, self.train.items(), lists)
    }

    fn rec_matrix(&self) -> Vec<Vec<bool>> {
        self.lists
            .iter()
            .map(|l| (0..self.train.items()).map(|i| l.contains(&i)).collect())
            .collect()
    }

    /// Numerator and denominator of the preference ratio for one group.
    fn counts(&self, t: &[Vec<bool>], protected: bool, c: usize) -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for u in 0..t.len() {
            if self.group[u] != Some(protected) {
                continue;
            }
            for i in 0..self.train.items() {
                if t[u][i] {
                    den += 1.0;
                    if self.member[i][c] {
                        num += 1.0;
                    }
                }
            }
        }
        (num, den)
    }

    pub fn category_fraction(&self, c: usize) -> f64 {
        let hits = self.member.iter().filter(|row| row[c]).count();
        hits as f64 / self.train.items() as f64
    }

    pub fn pr(&self, recs: bool, protected: bool, c: usize) -> Option<f64> {
        let t = if recs { self.rec_matrix() } else { self.train.binary() };
        let (num, den) = self.counts(&t, protected, c);
        (den > 0.0).then(|| num / den)
    }

    pub fn bias(&self, recs: bool, protected: bool, c: usize) -> Option<f64> {
        Some(self.pr(recs, protected, c)? / self.category_fraction(c))
    }

    pub fn disparity(&self, protected: bool, c: usize) -> Option<f64> {
        let bt = self.bias(false, protected, c)?;
        let br = self.bias(true, protected, c)?;
        (bt > 0.0).then(|| (br - bt) / bt)
    }

    pub fn average_disparity(&self) -> f64 {
        let t = self.train.binary();
        let r = self.rec_matrix();
        let k = self.categories();
        let mut sum = 0.0;
        for c in 0..k {
            let du = self.counts(&r, false, c).0 - self.counts(&t, false, c).0;
            let dp = self.counts(&r, true, c).0 - self.counts(&t, true, c).0;
            sum += (du - dp).abs();
        }
        sum / k as f64
    }

    pub fn coverage(&self) -> f64 {
        let distinct: BTreeSet<usize> = self.lists.iter().flatten().copied().collect();
        100.0 * distinct.len() as f64 / self.train.items() as f64
    }

    pub fn ndcg(&self, k: usize) -> f64 {
        let mut total = 0.0;
        let mut users = 0;
        for (u, list) in self.lists.iter().enumerate() {
            let relevant = self.test.cells[u].iter().filter(|v| v.is_some()).count();
            if relevant == 0 {
                continue;
            }
            let mut dcg = 0.0;
            for (rank, &i) in list.iter().enumerate().take(k) {
                if self.test.cells[u][i].is_some() {
                    dcg += 1.0 / ((rank + 2) as f64).log2();
                }
            }
            let mut ideal = 0.0;
            for rank in 0..relevant.min(k) {
                ideal += 1.0 / ((rank + 2) as f64).log2();
            }
            total += dcg / ideal;
            users += 1;
        }
        if users == 0 {
            0.0
        } else {
            total / users as f64
        }
    }
}

/// Random state with entries of order one, so finite differences are well
/// conditioned.
pub fn random_state(rng: &mut impl Rng, users: usize, items: usize, dim: usize, implicit: bool, mean: f64) -> FactorState {
    let mut s = FactorState::zeros(users, items, dim, implicit);
    s.global_mean = mean;
    for p in s.parameters(true) {
        s.set(p, rng.gen_range(-0.5..0.5));
    }
    s
}

fn kind(p: ParamRef) -> u8 {
    match p {
        ParamRef::UserBias(_) => 0,
        ParamRef::ItemBias(_) => 1,
        ParamRef::UserFactor(..) => 2,
        ParamRef::ItemFactor(..) => 3,
        ParamRef::Implicit(..) => 4,
    }
}

/// Parameters to probe: `count` random ones plus at least two of every
/// parameter kind the objective uses.
pub fn probes(rng: &mut impl Rng, objective: &dyn Objective, state: &FactorState, count: usize) -> Vec<ParamRef> {
    let all = objective.parameters(state);
    let mut out: Vec<ParamRef> = all.choose_multiple(rng, count).copied().collect();
    for k in 0..5 {
        let of_kind: Vec<ParamRef> = all.iter().copied().filter(|&p| kind(p) == k).collect();
        out.extend(of_kind.choose_multiple(rng, 2).copied());
    }
    out
}

/// Largest relative error between the analytic gradient and central
/// differences with step `h` over the probed parameters.
pub fn gradient_error(objective: &dyn Objective, state: &FactorState, params: &[ParamRef], h: f64) -> f64 {
    let grad = objective.gradient(state);
    let mut worst: f64 = 0.0;
    for &p in params {
        let x = state.get(p);
        let mut s = state.clone();
        s.set(p, x + h);
        let up = objective.loss(&s);
        s.set(p, x - h);
        let down = objective.loss(&s);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad.get(p);
        let scale = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / scale);
    }
    worst
}

/// Elastic-net objective of one SLIM column with a dense binary matrix.
pub fn slim_column_objective(a: &[Vec<bool>], i: usize, w: &[f64], l1: f64, l2: f64) -> f64 {
    let mut residual = 0.0;
    for row in a {
        let target = if row[i] { 1.0 } else { 0.0 };
        let fit: f64 = row.iter().zip(w).filter(|(&x, _)| x).map(|(_, &wj)| wj).sum();
        residual += (target - fit) * (target - fit);
    }
    let l1_term: f64 = w.iter().map(|x| x.abs()).sum();
    let l2_term: f64 = w.iter().map(|x| x * x).sum();
    0.5 * residual + l1 * l1_term + 0.5 * l2 * l2_term
}

/// Projected gradient descent on one column, `w >= 0` and `w[i] = 0`, run
/// until the iterates stop moving.
pub fn slim_column_oracle(a: &[Vec<bool>], i: usize, l1: f64, l2: f64) -> Vec<f64> {
    let m = a.first().map_or(0, Vec::len);
    let x: Vec<Vec<f64>> = a
        .iter()
        .map(|row| row.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut gram = vec![vec![0.0; m]; m];
    for row in &x {
        for j in 0..m {
            for k in 0..m {
                gram[j][k] += row[j] * row[k];
            }
        }
    }
    // Gershgorin bound on the largest eigenvalue
    let lipschitz = gram.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max) + l2;
    let step = 1.0 / lipschitz;
    let mut w = vec![0.0; m];
    for _ in 0..2_000_000 {
        let mut moved: f64 = 0.0;
        let grad: Vec<f64> = (0..m)
            .map(|j| {
                let gw: f64 = (0..m).map(|k| gram[j][k] * w[k]).sum();
                gw - gram[j][i] + l1 + l2 * w[j]
            })
            .collect();
        for j in 0..m {
            let next = if j == i { 0.0 } else { (w[j] - step * grad[j]).max(0.0) };
            moved = moved.max((next - w[j]).abs());
            w[j] = next;
        }
        if moved < 1e-13 {
            break;
        }
    }
    w
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn close_opt(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b, tol),
        (None, None) => true,
        _ => false,
    }
}

/// Every metric of the library against the oracles above; returns one line
/// per disagreement.
pub fn metric_mismatches(case: &MetricCase, tol: f64) -> Vec<String> {
    use fairrec::dataset::binarize;
    use fairrec::metrics;

    let mut bad = Vec::new();
    let train = case.train.interactions();
    let test = case.test.interactions();
    let binary = binarize(&train);
    let cats = case.category_map();
    let groups = case.groups();
    let recs = case.recommendations();
    for (protected, label) in [(true, PROTECTED), (false, UNPROTECTED)] {
        let g = groups.labels().iter().position(|l| l == label).unwrap();
        let members = groups.members(g);
        for c in 0..case.categories() {
            let ci = cats.index_of(&MetricCase::category_label(c)).unwrap();
            let pc = metrics::category_fraction(ci, &cats, train.n_items()).unwrap();
            let pr_t = metrics::preference_ratio(&members, ci, &cats, &binary).unwrap();
            let pr_r = metrics::preference_ratio(&members, ci, &cats, &recs).unwrap();
            let b_t = metrics::bias(pr_t, pc).unwrap();
            let b_r = metrics::bias(pr_r, pc).unwrap();
            let bd = metrics::bias_disparity(b_t, b_r);
            let checks = [
                ("P(C)", Some(pc), Some(case.category_fraction(c))),
                ("PR train", pr_t, case.pr(false, protected, c)),
                ("PR recs", pr_r, case.pr(true, protected, c)),
                ("B train", b_t, case.bias(false, protected, c)),
                ("B recs", b_r, case.bias(true, protected, c)),
                ("BD", bd, case.disparity(protected, c)),
            ];
            for (name, got, want) in checks {
                if !close_opt(got, want, tol) {
                    bad.push(format!("{name} {label}/cat{c}: {got:?} vs {want:?}"));
                }
            }
        }
    }
    let avg = metrics::average_disparity(&binary, &recs, &groups, &cats);
    if !close_opt(avg, Some(case.average_disparity()), tol) {
        bad.push(format!("average disparity: {avg:?} vs {}", case.average_disparity()));
    }
    let cov = metrics::item_coverage(&recs, train.n_items()).unwrap();
    if !close(cov, case.coverage(), tol) {
        bad.push(format!("coverage: {cov} vs {}", case.coverage()));
    }
    let ndcg = metrics::ndcg_at_k(&recs, &test, 10).unwrap();
    if !close(ndcg, case.ndcg(10), tol) {
        bad.push(format!("nDCG@10: {ndcg} vs {}", case.ndcg(10)));
    }
    bad
}

/// All three neighborhood models on one random instance of at most 20x20.
pub fn knn_mismatches(rng: &mut impl Rng, tol: f64) -> Vec<String> {
    use fairrec::models::knn::{ItemKnn, KnnConfig, TrustKnn, TrustKnnConfig, UserKnn};
    use fairrec::models::Scorer;
    use std::sync::Arc;

    let users = rng.gen_range(2..=20);
    let items = rng.gen_range(2..=20);
    let density = rng.gen_range(0.2..0.7);
    let data = Dense::random(rng, users, items, density);
    let train = Arc::new(data.interactions());
    let measure = if rng.gen_bool(0.5) { Similarity::Pcc } else { Similarity::Cos };
    let cfg = KnnConfig {
        neighbors: rng.gen_range(1..=8),
        shrinkage: [0.0, 1.0, 10.0][rng.gen_range(0..3)],
        similarity: measure,
    };
    let (adj, trust) = random_trust(rng, users, 0.25);
    let trust_cfg = TrustKnnConfig { neighbors: rng.gen_range(1..=5) };

    let models: [(&str, Box<dyn Scorer>, Vec<Vec<f64>>); 3] = [
        (
            "UserKNN",
            Box::new(UserKnn::fit(train.clone(), &cfg)),
            userknn(&data, cfg.neighbors, measure, cfg.shrinkage),
        ),
        (
            "ItemKNN",
            Box::new(ItemKnn::fit(train.clone(), &cfg)),
            itemknn(&data, cfg.neighbors, measure, cfg.shrinkage),
        ),
        (
            "TrustKNN",
            Box::new(TrustKnn::fit(train.clone(), &trust, &trust_cfg)),
            trustknn(&data, &adj, trust_cfg.neighbors),
        ),
    ];
    let mut bad = Vec::new();
    for (name, model, want) in &models {
        let mut row = vec![0.0; items];
        for u in 0..users {
            model.score_user(u, &mut row);
            for i in 0..items {
                let single = model.score(u, i);
                if !close(single, want[u][i], tol) || !close(row[i], want[u][i], tol) {
                    bad.push(format!("{name} ({u},{i}): {single} / {} vs {}", row[i], want[u][i]));
                }
            }
        }
    }
    bad
}

/// Worst finite-difference error per model on one random instance, probing
/// `count` parameters each.
pub fn gradient_report(rng: &mut impl Rng, count: usize) -> Vec<(&'static str, usize, f64)> {
    use fairrec::models::factor::SgdConfig;
    use fairrec::models::listrank::{ListRankConfig, ListRankObjective};
    use fairrec::models::mf::{BiasedMfConfig, BiasedMfObjective, SvdPlusPlusConfig, SvdPlusPlusObjective};
    use fairrec::models::social::{SoRegConfig, SoRegObjective, SocialMfConfig, SocialMfObjective};

    const H: f64 = 1e-5;
    let (users, items, dim) = (8, 10, 3);
    let data = Dense::random(rng, users, items, 0.4);
    let train = data.interactions();
    let (_, trust) = random_trust(rng, users, 0.3);
    let mean = train.global_mean();
    let sgd = SgdConfig {
        factors: dim,
        learn_rate: 0.01,
        iterations: 1,
        reg_user: rng.gen_range(0.01..0.5),
        reg_item: rng.gen_range(0.01..0.5),
    };
    let biased = BiasedMfConfig { sgd: sgd.clone(), reg_bias: 0.1 };
    let svdpp = SvdPlusPlusConfig { sgd: sgd.clone(), reg_bias: 0.1, reg_implicit: 0.2 };
    let listrank = ListRankConfig { sgd: sgd.clone() };
    let soreg = SoRegConfig { sgd: sgd.clone(), reg_bias: 0.1, reg_social: 0.7 };
    let socialmf = SocialMfConfig { sgd, reg_social: 0.7 };

    let objectives: Vec<(&'static str, Box<dyn Objective + '_>, bool)> = vec![
        ("BiasedMF", Box::new(BiasedMfObjective::new(&train, &biased)), false),
        ("SVD++", Box::new(SvdPlusPlusObjective { train: &train, cfg: &svdpp }), true),
        ("ListRankMF", Box::new(ListRankObjective { train: &train, cfg: &listrank }), false),
        ("SoReg", Box::new(SoRegObjective::new(&train, &trust, &soreg)), false),
        ("SocialMF", Box::new(SocialMfObjective::new(&train, &trust, &socialmf)), false),
    ];
    objectives
        .iter()
        .map(|(name, objective, implicit)| {
            let state = random_state(rng, users, items, dim, *implicit, mean);
            let params = probes(rng, objective.as_ref(), &state, count);
            (*name, params.len(), gradient_error(objective.as_ref(), &state, &params, H))
        })
        .collect()
}

/// One random SLIM instance of at most 15 items: the largest gap between the
/// solver's and the oracle's objective over all columns, and whether the
/// weights are non-negative with an exactly zero diagonal.
pub fn slim_report(rng: &mut impl Rng) -> (f64, bool) {
    use fairrec::models::slim::{fit_slim, SlimConfig};

    let users = rng.gen_range(8..=30);
    let items = rng.gen_range(3..=15);
    let density = rng.gen_range(0.2..0.6);
    let data = Dense::random(rng, users, items, density);
    let a = data.binary();
    let (l1, l2) = (rng.gen_range(0.05..1.5), rng.gen_range(0.5..2.0));
    let model = fit_slim(&data.interactions(), &SlimConfig::new(l1, l2));
    let w = model.weights();
    let mut gap: f64 = 0.0;
    let mut valid = true;
    for i in 0..items {
        let column = w.column_dense(i);
        valid &= column.iter().all(|&x| x >= 0.0) && w.get(i, i) == 0.0;
        let oracle = slim_column_oracle(&a, i, l1, l2);
        let ours = slim_column_objective(&a, i, &column, l1, l2);
        let best = slim_column_objective(&a, i, &oracle, l1, l2);
        gap = gap.max((ours - best).abs());
    }
    (gap, valid)
}
