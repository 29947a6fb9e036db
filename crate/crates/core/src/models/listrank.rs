//! ListRankMF: list-wise matrix factorization with top-one probabilities.
//!
//! For each user, the soft-max of `g(r_ui)` over their rated items is the
//! target distribution and the soft-max of `g(p_u . q_i)` the model's, with
//! `g` the logistic function. The per-user term is their cross entropy plus
//! `1/2 reg_user |p_u|^2 + 1/2 reg_item sum_i |q_i|^2` over the user's items.
//! SGD steps one user at a time. Scores for ranking are the raw `p_u . q_i`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::factor::{axpy, dot, logistic, sq_norm, FactorState, FitResult, Objective, ParamRef, SgdConfig};
use super::Scorer;
use crate::dataset::Interactions;
use crate::error::Result;
use crate::params::HyperParams;

pub(crate) const LISTRANK_KEYS: &[&str] =
    &["factors", "learn_rate", "iterations", "reg_user", "reg_item"];

#[derive(Debug, Clone, PartialEq)]
pub struct ListRankConfig {
    pub sgd: SgdConfig,
}

impl ListRankConfig {
    pub fn from_params(algorithm: &str, params: &HyperParams) -> Result<Self> {
        params.check_keys(algorithm, LISTRANK_KEYS)?;
        Ok(Self {
            sgd: SgdConfig::read(&params.reader(algorithm))?,
        })
    }
}

/// Soft-max of `g(x)` written into `out`; returns the log-normalizer.
fn top_one(xs: impl Iterator<Item = f64>, out: &mut Vec<f64>) -> f64 {
    out.clear();
    out.extend(xs.map(logistic));
    // g is bounded in (0, 1), so exp never overflows
    let z: f64 = out.iter().map(|v| v.exp()).sum();
    let log_z = z.ln();
    for v in out.iter_mut() {
        *v = (*v - log_z).exp();
    }
    log_z
}

struct UserStep {
    target: Vec<f64>,
    model: Vec<f64>,
    coef: Vec<f64>,
    p: Vec<f64>,
}

impl UserStep {
    fn new(dim: usize) -> Self {
        Self {
            target: Vec::new(),
            model: Vec::new(),
            coef: Vec::new(),
            p: vec![0.0; dim],
        }
    }

    /// Loss of one user's term; `coef[n]` receives dL/dx for the n-th item
    /// and `p` the gradient for the user vector.
    fn compute(&mut self, state: &FactorState, items: &[(usize, f64)], cfg: &SgdConfig, u: usize) -> f64 {
        let pu = state.user_factors.row(u);
        let reg_items: f64 = items.iter().map(|&(i, _)| sq_norm(state.item_factors.row(i))).sum();
        let reg = 0.5 * cfg.reg_user * sq_norm(pu) + 0.5 * cfg.reg_item * reg_items;
        self.coef.clear();
        self.p.iter_mut().zip(pu).for_each(|(g, &x)| *g = cfg.reg_user * x);
        if items.is_empty() {
            return reg;
        }
        let xs: Vec<f64> = items.iter().map(|&(i, _)| dot(pu, state.item_factors.row(i))).collect();
        top_one(items.iter().map(|&(_, r)| r), &mut self.target);
        let log_z = top_one(xs.iter().copied(), &mut self.model);
        let mut loss = 0.0;
        for (n, &x) in xs.iter().enumerate() {
            let g = logistic(x);
            loss -= self.target[n] * (g - log_z);
            self.coef.push((self.model[n] - self.target[n]) * g * (1.0 - g));
        }
        for (n, &(i, _)) in items.iter().enumerate() {
            axpy(self.coef[n], state.item_factors.row(i), &mut self.p);
        }
        loss + reg
    }

    fn item_grad(&self, state: &FactorState, cfg: &SgdConfig, u: usize, n: usize, i: usize, out: &mut [f64]) {
        let (pu, qi) = (state.user_factors.row(u), state.item_factors.row(i));
        for k in 0..out.len() {
            out[k] = self.coef[n] * pu[k] + cfg.reg_item * qi[k];
        }
    }
}

pub struct ListRankObjective<'a> {
    pub train: &'a Interactions,
    pub cfg: &'a ListRankConfig,
}

impl Objective for ListRankObjective<'_> {
    fn loss(&self, state: &FactorState) -> f64 {
        let mut step = UserStep::new(state.dim());
        (0..self.train.n_users())
            .map(|u| step.compute(state, self.train.user_items(u), &self.cfg.sgd, u))
            .sum()
    }

    fn gradient(&self, state: &FactorState) -> FactorState {
        let mut grad = state.zeros_like();
        let mut step = UserStep::new(state.dim());
        let mut gq = vec![0.0; state.dim()];
        for u in 0..self.train.n_users() {
            let items = self.train.user_items(u);
            step.compute(state, items, &self.cfg.sgd, u);
            axpy(1.0, &step.p, grad.user_factors.row_mut(u));
            for (n, &(i, _)) in items.iter().enumerate() {
                step.item_grad(state, &self.cfg.sgd, u, n, i, &mut gq);
                axpy(1.0, &gq, grad.item_factors.row_mut(i));
            }
        }
        grad
    }

    fn parameters(&self, state: &FactorState) -> Vec<ParamRef> {
        state.parameters(false)
    }
}

/// Trace is the full objective after each epoch.
pub fn fit_listrank_mf(train: &Interactions, cfg: &ListRankConfig, seed: u64) -> Result<FitResult> {
    let sgd = &cfg.sgd;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = FactorState::init(train.n_users(), train.n_items(), sgd.factors, false, 0.0, &mut rng);
    let mut users: Vec<usize> = (0..train.n_users()).collect();
    let mut step = UserStep::new(sgd.factors);
    let mut item_grads: Vec<f64> = Vec::new();
    let objective = ListRankObjective { train, cfg };
    let mut trace = Vec::with_capacity(sgd.iterations);
    for epoch in 0..sgd.iterations {
        users.shuffle(&mut rng);
        for &u in &users {
            let items = train.user_items(u);
            step.compute(&state, items, sgd, u);
            let d = sgd.factors;
            item_grads.resize(items.len() * d, 0.0);
            for (n, &(i, _)) in items.iter().enumerate() {
                step.item_grad(&state, sgd, u, n, i, &mut item_grads[n * d..(n + 1) * d]);
            }
            axpy(-sgd.learn_rate, &step.p, state.user_factors.row_mut(u));
            for (n, &(i, _)) in items.iter().enumerate() {
                axpy(-sgd.learn_rate, &item_grads[n * d..(n + 1) * d], state.item_factors.row_mut(i));
            }
        }
        state.check_finite("ListRankMF", epoch)?;
        trace.push(objective.loss(&state));
    }
    Ok(FitResult { state, trace })
}

#[derive(Debug, Clone)]
pub struct ListRankModel {
    state: FactorState,
}

impl ListRankModel {
    pub fn new(state: FactorState) -> Self {
        Self { state }
    }
}

impl Scorer for ListRankModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.state.user_factors.row(user), self.state.item_factors.row(item))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Rating;
    use rand::Rng;

    fn cfg(reg: f64) -> ListRankConfig {
        ListRankConfig {
            sgd: SgdConfig {
                factors: 3,
                learn_rate: 0.1,
                iterations: 20,
                reg_user: reg,
                reg_item: reg,
            },
        }
    }

    #[test]
    fn single_item_user_contributes_nothing() {
        let entries = vec![Rating { user: 0, item: 1, value: 2.0 }];
        let train = Interactions::new(1, 3, entries).unwrap();
        let c = cfg(0.0);
        let obj = ListRankObjective { train: &train, cfg: &c };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            let mut s = FactorState::zeros(1, 3, 3, false);
            for x in s.user_factors.as_mut_slice().iter_mut().chain(s.item_factors.as_mut_slice()) {
                *x = rng.gen_range(-2.0..2.0);
            }
            assert!(obj.loss(&s).abs() < 1e-15);
            let g = obj.gradient(&s);
            assert!(g.user_factors.as_slice().iter().all(|&x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn loss_ignores_item_order() {
        let ratings = [(0, 5.0), (2, 1.0), (3, 3.0), (4, 4.0)];
        let forward: Vec<Rating> = ratings.iter().map(|&(i, r)| Rating { user: 0, item: i, value: r }).collect();
        let mut backward = forward.clone();
        backward.reverse();
        let a = Interactions::new(1, 5, forward).unwrap();
        let b = Interactions::new(1, 5, backward).unwrap();
        let c = cfg(0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = FactorState::zeros(1, 5, 3, false);
        for x in s.user_factors.as_mut_slice().iter_mut().chain(s.item_factors.as_mut_slice()) {
            *x = rng.gen_range(-1.0..1.0);
        }
        let la = ListRankObjective { train: &a, cfg: &c }.loss(&s);
        let lb = ListRankObjective { train: &b, cfg: &c }.loss(&s);
        assert!((la - lb).abs() < 1e-14);
        // permuting item indices together with their factors also keeps the loss
        let mut s2 = s.clone();
        let perm = [4, 3, 2, 1, 0];
        for (from, &to) in perm.iter().enumerate() {
            s2.item_factors.row_mut(to).copy_from_slice(s.item_factors.row(from));
        }
        let permuted: Vec<Rating> = ratings.iter().map(|&(i, r)| Rating { user: 0, item: perm[i], value: r }).collect();
        let c2 = Interactions::new(1, 5, permuted).unwrap();
        let lc = ListRankObjective { train: &c2, cfg: &c }.loss(&s2);
        assert!((la - lc).abs() < 1e-14);
    }

    #[test]
    fn training_lowers_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut entries = vec![];
        for u in 0..15 {
            for i in 0..12 {
                if rng.gen_bool(0.5) {
                    entries.push(Rating { user: u, item: i, value: rng.gen_range(1..=5) as f64 });
                }
            }
        }
        let train = Interactions::new(15, 12, entries).unwrap();
        let mut c = cfg(0.001);
        c.sgd.iterations = 50;
        c.sgd.learn_rate = 0.5;
        let fit = fit_listrank_mf(&train, &c, 3).unwrap();
        assert!(fit.trace.last().unwrap() < &fit.trace[0], "{:?}", fit.trace);
    }
}
