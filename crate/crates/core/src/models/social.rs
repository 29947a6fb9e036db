//! Trust-regularized factorization: SoReg and SocialMF.
//!
//! Both add a social term to a rating loss. Each epoch is a shuffled pass of
//! rating steps followed by a pass of social steps over users in index
//! order. With a zero social weight the social pass is skipped, so
//! trajectories match the trust-free models exactly.
//!
//! SoReg keeps the BiasedMF rating loss and adds
//! `beta/2 * sum_u sum_{f in F(u)} sim(u, f) |p_u - p_f|^2`, where `sim` is
//! the co-rated cosine of the two training profiles floored at 0.
//!
//! SocialMF maps ratings onto [0, 1] with `(r - 1) / 4`, predicts
//! `g(p_u . q_i)` with `g` logistic, and adds
//! `beta/2 * sum_u |p_u - mean_{f in F(u)} p_f|^2` for users with friends.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::factor::{axpy, dot, logistic, sq_norm, FactorState, FitResult, Objective, ParamRef, SgdConfig};
use super::knn::{sparse_similarity, Similarity};
use super::mf::{biased_epoch, biased_start, predict_biased, rmse, BiasedMfModel, BiasedRegs, BiasedStep};
use super::Scorer;
use crate::dataset::{Interactions, TrustGraph, MAX_RATING, MIN_RATING};
use crate::error::Result;
use crate::params::HyperParams;

pub(crate) const SOREG_KEYS: &[&str] = &[
    "factors",
    "learn_rate",
    "iterations",
    "reg_user",
    "reg_item",
    "reg_bias",
    "reg_social",
];

pub(crate) const SOCIALMF_KEYS: &[&str] =
    &["factors", "learn_rate", "iterations", "reg_user", "reg_item", "reg_social"];

#[derive(Debug, Clone, PartialEq)]
pub struct SoRegConfig {
    pub sgd: SgdConfig,
    pub reg_bias: f64,
    pub reg_social: f64,
}

impl SoRegConfig {
    pub fn from_params(algorithm: &str, params: &HyperParams) -> Result<Self> {
        params.check_keys(algorithm, SOREG_KEYS)?;
        let r = params.reader(algorithm);
        Ok(Self {
            sgd: SgdConfig::read(&r)?,
            reg_bias: r.non_negative("reg_bias", 0.01)?,
            reg_social: r.non_negative("reg_social", 0.01)?,
        })
    }

    fn regs(&self) -> BiasedRegs {
        BiasedRegs {
            user: self.sgd.reg_user,
            item: self.sgd.reg_item,
            bias: self.reg_bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialMfConfig {
    pub sgd: SgdConfig,
    pub reg_social: f64,
}

impl SocialMfConfig {
    pub fn from_params(algorithm: &str, params: &HyperParams) -> Result<Self> {
        params.check_keys(algorithm, SOCIALMF_KEYS)?;
        let r = params.reader(algorithm);
        Ok(Self {
            sgd: SgdConfig::read(&r)?,
            reg_social: r.non_negative("reg_social", 0.01)?,
        })
    }
}

/// Trust edges among rating users with their profile cosine, in graph order.
pub fn social_edges(train: &Interactions, trust: &TrustGraph) -> Vec<(usize, usize, f64)> {
    assert_eq!(trust.n_users(), train.n_users(), "trust graph and ratings disagree on users");
    (0..train.n_users())
        .flat_map(|u| {
            trust.trusted(u).map(move |f| {
                let sim = sparse_similarity(Similarity::Cos, train.user_items(u), train.user_items(f), 0.0);
                (u, f, sim.max(0.0))
            })
        })
        .collect()
}

pub struct SoRegObjective<'a> {
    pub train: &'a Interactions,
    pub edges: Vec<(usize, usize, f64)>,
    pub cfg: &'a SoRegConfig,
}

impl<'a> SoRegObjective<'a> {
    pub fn new(train: &'a Interactions, trust: &TrustGraph, cfg: &'a SoRegConfig) -> Self {
        Self {
            train,
            edges: social_edges(train, trust),
            cfg,
        }
    }
}

impl Objective for SoRegObjective<'_> {
    fn loss(&self, state: &FactorState) -> f64 {
        let mut step = BiasedStep::new(state.dim());
        let ratings: f64 = self
            .train
            .entries()
            .iter()
            .map(|r| step.compute(state, self.cfg.regs(), r.user, r.item, r.value))
            .sum();
        let mut diff = vec![0.0; state.dim()];
        let social: f64 = self
            .edges
            .iter()
            .map(|&(u, f, sim)| {
                diff.copy_from_slice(state.user_factors.row(u));
                axpy(-1.0, state.user_factors.row(f), &mut diff);
                sim * sq_norm(&diff)
            })
            .sum();
        ratings + 0.5 * self.cfg.reg_social * social
    }

    fn gradient(&self, state: &FactorState) -> FactorState {
        let mut grad = state.zeros_like();
        let mut step = BiasedStep::new(state.dim());
        for r in self.train.entries() {
            step.compute(state, self.cfg.regs(), r.user, r.item, r.value);
            step.accumulate(&mut grad, r.user, r.item);
        }
        let mut diff = vec![0.0; state.dim()];
        for &(u, f, sim) in &self.edges {
            diff.copy_from_slice(state.user_factors.row(u));
            axpy(-1.0, state.user_factors.row(f), &mut diff);
            let c = self.cfg.reg_social * sim;
            axpy(c, &diff, grad.user_factors.row_mut(u));
            axpy(-c, &diff, grad.user_factors.row_mut(f));
        }
        grad
    }

    fn parameters(&self, state: &FactorState) -> Vec<ParamRef> {
        state.parameters(true)
    }
}

/// Trace is training RMSE per epoch.
pub fn fit_soreg(train: &Interactions, trust: &TrustGraph, cfg: &SoRegConfig, seed: u64) -> Result<FitResult> {
    let (mut rng, mut state) = biased_start(train, cfg.sgd.factors, seed);
    let edges = social_edges(train, trust);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = BiasedStep::new(cfg.sgd.factors);
    let mut diff = vec![0.0; cfg.sgd.factors];
    let lr = cfg.sgd.learn_rate;
    let mut trace = Vec::with_capacity(cfg.sgd.iterations);
    for epoch in 0..cfg.sgd.iterations {
        biased_epoch(&mut state, train, cfg.regs(), lr, &mut order, &mut rng, &mut step);
        if cfg.reg_social > 0.0 {
            for &(u, f, sim) in &edges {
                diff.copy_from_slice(state.user_factors.row(u));
                axpy(-1.0, state.user_factors.row(f), &mut diff);
                let c = lr * cfg.reg_social * sim;
                axpy(-c, &diff, state.user_factors.row_mut(u));
                axpy(c, &diff, state.user_factors.row_mut(f));
            }
        }
        state.check_finite("SoReg", epoch)?;
        trace.push(rmse(train, |u, i| predict_biased(&state, u, i)));
    }
    Ok(FitResult { state, trace })
}

/// SoReg predicts like BiasedMF.
pub type SoRegModel = BiasedMfModel;

fn to_unit(r: f64) -> f64 {
    (r - MIN_RATING) / (MAX_RATING - MIN_RATING)
}

fn from_unit(x: f64) -> f64 {
    MIN_RATING + (MAX_RATING - MIN_RATING) * x
}

pub struct SocialMfObjective<'a> {
    pub train: &'a Interactions,
    pub friends: Vec<Vec<usize>>,
    pub cfg: &'a SocialMfConfig,
}

impl<'a> SocialMfObjective<'a> {
    pub fn new(train: &'a Interactions, trust: &TrustGraph, cfg: &'a SocialMfConfig) -> Self {
        assert_eq!(trust.n_users(), train.n_users(), "trust graph and ratings disagree on users");
        Self {
            train,
            friends: (0..train.n_users()).map(|u| trust.trusted(u).collect()).collect(),
            cfg,
        }
    }

    /// Per-rating loss; fills `gp`/`gq`.
    fn rating_term(&self, state: &FactorState, u: usize, i: usize, r: f64, gp: &mut [f64], gq: &mut [f64]) -> f64 {
        let sgd = &self.cfg.sgd;
        let (pu, qi) = (state.user_factors.row(u), state.item_factors.row(i));
        let g = logistic(dot(pu, qi));
        let e = to_unit(r) - g;
        let dx = -e * g * (1.0 - g);
        for k in 0..pu.len() {
            gp[k] = dx * qi[k] + sgd.reg_user * pu[k];
            gq[k] = dx * pu[k] + sgd.reg_item * qi[k];
        }
        0.5 * e * e + 0.5 * sgd.reg_user * sq_norm(pu) + 0.5 * sgd.reg_item * sq_norm(qi)
    }

    /// `p_u - mean_f p_f` into `out`; false when u has no friends.
    fn deviation(&self, state: &FactorState, u: usize, out: &mut [f64]) -> bool {
        let friends = &self.friends[u];
        if friends.is_empty() {
            return false;
        }
        out.copy_from_slice(state.user_factors.row(u));
        let w = 1.0 / friends.len() as f64;
        for &f in friends {
            axpy(-w, state.user_factors.row(f), out);
        }
        true
    }
}

impl Objective for SocialMfObjective<'_> {
    fn loss(&self, state: &FactorState) -> f64 {
        let d = state.dim();
        let (mut gp, mut gq, mut dev) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let ratings: f64 = self
            .train
            .entries()
            .iter()
            .map(|r| self.rating_term(state, r.user, r.item, r.value, &mut gp, &mut gq))
            .sum();
        let mut social = 0.0;
        for u in 0..self.train.n_users() {
            if self.deviation(state, u, &mut dev) {
                social += sq_norm(&dev);
            }
        }
        ratings + 0.5 * self.cfg.reg_social * social
    }

    fn gradient(&self, state: &FactorState) -> FactorState {
        let d = state.dim();
        let mut grad = state.zeros_like();
        let (mut gp, mut gq, mut dev) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        for r in self.train.entries() {
            self.rating_term(state, r.user, r.item, r.value, &mut gp, &mut gq);
            axpy(1.0, &gp, grad.user_factors.row_mut(r.user));
            axpy(1.0, &gq, grad.item_factors.row_mut(r.item));
        }
        let beta = self.cfg.reg_social;
        for u in 0..self.train.n_users() {
            if !self.deviation(state, u, &mut dev) {
                continue;
            }
            axpy(beta, &dev, grad.user_factors.row_mut(u));
            let w = beta / self.friends[u].len() as f64;
            for &f in &self.friends[u] {
                axpy(-w, &dev, grad.user_factors.row_mut(f));
            }
        }
        grad
    }

    fn parameters(&self, state: &FactorState) -> Vec<ParamRef> {
        state.parameters(false)
    }
}

/// Trace is training RMSE on the original rating scale per epoch.
pub fn fit_socialmf(train: &Interactions, trust: &TrustGraph, cfg: &SocialMfConfig, seed: u64) -> Result<FitResult> {
    let sgd = &cfg.sgd;
    let objective = SocialMfObjective::new(train, trust, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = FactorState::init(train.n_users(), train.n_items(), sgd.factors, false, 0.0, &mut rng);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let d = sgd.factors;
    let (mut gp, mut gq, mut dev) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let lr = sgd.learn_rate;
    let mut trace = Vec::with_capacity(sgd.iterations);
    for epoch in 0..sgd.iterations {
        order.shuffle(&mut rng);
        for &e in &order {
            let r = train.entries()[e];
            objective.rating_term(&state, r.user, r.item, r.value, &mut gp, &mut gq);
            axpy(-lr, &gp, state.user_factors.row_mut(r.user));
            axpy(-lr, &gq, state.item_factors.row_mut(r.item));
        }
        if cfg.reg_social > 0.0 {
            for u in 0..train.n_users() {
                if !objective.deviation(&state, u, &mut dev) {
                    continue;
                }
                let c = lr * cfg.reg_social;
                axpy(-c, &dev, state.user_factors.row_mut(u));
                let w = c / objective.friends[u].len() as f64;
                for &f in &objective.friends[u] {
                    axpy(w, &dev, state.user_factors.row_mut(f));
                }
            }
        }
        state.check_finite("SocialMF", epoch)?;
        trace.push(rmse(train, |u, i| predict_socialmf(&state, u, i)));
    }
    Ok(FitResult { state, trace })
}

pub fn predict_socialmf(state: &FactorState, user: usize, item: usize) -> f64 {
    from_unit(logistic(dot(state.user_factors.row(user), state.item_factors.row(item))))
}

/// Predictions mapped back onto the rating scale.
#[derive(Debug, Clone)]
pub struct SocialMfModel {
    state: FactorState,
}

impl SocialMfModel {
    pub fn new(state: FactorState) -> Self {
        Self { state }
    }
}

impl Scorer for SocialMfModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        predict_socialmf(&self.state, user, item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Rating;
    use crate::models::mf::{fit_biased_mf, BiasedMfConfig};
    use rand::Rng;

    fn sgd(iterations: usize) -> SgdConfig {
        SgdConfig {
            factors: 4,
            learn_rate: 0.01,
            iterations,
            reg_user: 0.01,
            reg_item: 0.01,
        }
    }

    fn random_data(seed: u64) -> (Interactions, TrustGraph) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = vec![];
        for u in 0..12 {
            for i in 0..10 {
                if rng.gen_bool(0.5) {
                    entries.push(Rating { user: u, item: i, value: rng.gen_range(1..=5) as f64 });
                }
            }
        }
        let edges: Vec<(usize, usize)> = (0..30).map(|_| (rng.gen_range(0..12), rng.gen_range(0..12))).collect();
        (Interactions::new(12, 10, entries).unwrap(), TrustGraph::from_edges(12, edges))
    }

    #[test]
    fn soreg_without_social_weight_is_biased_mf() {
        let (train, trust) = random_data(1);
        let cfg = SoRegConfig { sgd: sgd(15), reg_bias: 0.01, reg_social: 0.0 };
        let soreg = fit_soreg(&train, &trust, &cfg, 42).unwrap();
        let plain = fit_biased_mf(&train, &BiasedMfConfig { sgd: sgd(15), reg_bias: 0.01 }, 42).unwrap();
        assert_eq!(soreg.state, plain.state);
        assert_eq!(soreg.trace, plain.trace);
    }

    #[test]
    fn soreg_pulls_identical_friends_together() {
        // two users with identical profiles, mutual trust
        let mut entries = vec![];
        for u in 0..2 {
            for i in 0..6 {
                entries.push(Rating { user: u, item: i, value: 1.0 + (i % 5) as f64 });
            }
        }
        let train = Interactions::new(2, 6, entries).unwrap();
        let trust = TrustGraph::from_edges(2, vec![(0, 1), (1, 0)]);
        let distance = |iters: usize| {
            let cfg = SoRegConfig { sgd: SgdConfig { learn_rate: 0.01, ..sgd(iters) }, reg_bias: 0.01, reg_social: 20.0 };
            let s = fit_soreg(&train, &trust, &cfg, 3).unwrap().state;
            let mut d = s.user_factors.row(0).to_vec();
            axpy(-1.0, s.user_factors.row(1), &mut d);
            sq_norm(&d).sqrt()
        };
        let start = {
            let (_, s) = biased_start(&train, 4, 3);
            let mut d = s.user_factors.row(0).to_vec();
            axpy(-1.0, s.user_factors.row(1), &mut d);
            sq_norm(&d).sqrt()
        };
        let trace: Vec<f64> = (1..=5).map(distance).collect();
        assert!(trace[0] < start);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "{trace:?}");
        }
        assert!(trace[4] < 0.5 * start, "{trace:?}");
    }

    #[test]
    fn socialmf_without_social_weight_ignores_trust() {
        let (train, trust) = random_data(2);
        let cfg = SocialMfConfig { sgd: sgd(10), reg_social: 0.0 };
        let with = fit_socialmf(&train, &trust, &cfg, 8).unwrap();
        let without = fit_socialmf(&train, &TrustGraph::from_edges(12, vec![]), &cfg, 8).unwrap();
        assert_eq!(with.state, without.state);
    }

    #[test]
    fn socialmf_single_friend_term() {
        let entries = vec![Rating { user: 0, item: 0, value: 3.0 }];
        let train = Interactions::new(2, 1, entries).unwrap();
        let trust = TrustGraph::from_edges(2, vec![(0, 1)]);
        let cfg = SocialMfConfig { sgd: SgdConfig { reg_user: 0.0, reg_item: 0.0, ..sgd(1) }, reg_social: 2.0 };
        let obj = SocialMfObjective::new(&train, &trust, &cfg);
        let mut s = FactorState::zeros(2, 1, 4, false);
        s.user_factors.row_mut(0).copy_from_slice(&[1.0, 0.0, 2.0, 0.0]);
        s.user_factors.row_mut(1).copy_from_slice(&[0.0, 1.0, 0.0, 0.0]);
        // q = 0 so g = 1/2 and the rating residual is 0.5 - 0.5
        let expected = 0.5 * 2.0 * (1.0 + 1.0 + 4.0);
        assert!((obj.loss(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn predictions_stay_in_rating_range() {
        let (train, trust) = random_data(3);
        let cfg = SocialMfConfig { sgd: sgd(10), reg_social: 0.5 };
        let m = SocialMfModel::new(fit_socialmf(&train, &trust, &cfg, 1).unwrap().state);
        for u in 0..12 {
            for i in 0..10 {
                let s = m.score(u, i);
                assert!((1.0..=5.0).contains(&s));
            }
        }
    }
}
