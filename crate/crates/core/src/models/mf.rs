//! BiasedMF and SVD++.
//!
//! Both minimize a sum of per-rating terms
//!
//! ```text
//! 1/2 e^2 + 1/2 reg_user |p_u|^2 + 1/2 reg_item |q_i|^2 + 1/2 reg_bias (b_u^2 + b_i^2)
//! ```
//!
//! (plus `1/2 reg_implicit sum_j |y_j|^2` over the user's implicit items for
//! SVD++), so one SGD step on a rating is an exact gradient step on its term.
//! The global mean is fixed to the training mean.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::factor::{axpy, dot, sq_norm, FactorState, FitResult, Objective, ParamRef, SgdConfig};
use super::Scorer;
use crate::dataset::Interactions;
use crate::error::Result;
use crate::params::HyperParams;

pub(crate) const BIASED_MF_KEYS: &[&str] = &[
    "factors",
    "learn_rate",
    "iterations",
    "reg_user",
    "reg_item",
    "reg_bias",
];

pub(crate) const SVDPP_KEYS: &[&str] = &[
    "factors",
    "learn_rate",
    "iterations",
    "reg_user",
    "reg_item",
    "reg_bias",
    "reg_implicit",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BiasedMfConfig {
    pub sgd: SgdConfig,
    pub reg_bias: f64,
}

impl BiasedMfConfig {
    pub fn from_params(algorithm: &str, params: &HyperParams) -> Result<Self> {
        params.check_keys(algorithm, BIASED_MF_KEYS)?;
        let r = params.reader(algorithm);
        Ok(Self {
            sgd: SgdConfig::read(&r)?,
            reg_bias: r.non_negative("reg_bias", 0.01)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdPlusPlusConfig {
    pub sgd: SgdConfig,
    pub reg_bias: f64,
    pub reg_implicit: f64,
}

impl SvdPlusPlusConfig {
    pub fn from_params(algorithm: &str, params: &HyperParams) -> Result<Self> {
        params.check_keys(algorithm, SVDPP_KEYS)?;
        let r = params.reader(algorithm);
        Ok(Self {
            sgd: SgdConfig::read(&r)?,
            reg_bias: r.non_negative("reg_bias", 0.01)?,
            reg_implicit: r.non_negative("reg_implicit", 0.01)?,
        })
    }
}

pub fn predict_biased(state: &FactorState, user: usize, item: usize) -> f64 {
    state.global_mean
        + state.user_bias[user]
        + state.item_bias[item]
        + dot(state.user_factors.row(user), state.item_factors.row(item))
}

/// Gradient of one rating's term under the biased model.
#[derive(Debug, Clone)]
pub(crate) struct BiasedStep {
    pub bu: f64,
    pub bi: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct BiasedRegs {
    pub user: f64,
    pub item: f64,
    pub bias: f64,
}

impl BiasedStep {
    pub fn new(dim: usize) -> Self {
        Self {
            bu: 0.0,
            bi: 0.0,
            p: vec![0.0; dim],
            q: vec![0.0; dim],
        }
    }

    /// Fills the gradient and returns the term's loss.
    pub fn compute(
        &mut self,
        state: &FactorState,
        regs: BiasedRegs,
        u: usize,
        i: usize,
        r: f64,
    ) -> f64 {
        let (pu, qi) = (state.user_factors.row(u), state.item_factors.row(i));
        let (bu, bi) = (state.user_bias[u], state.item_bias[i]);
        let e = r - predict_biased(state, u, i);
        self.bu = -e + regs.bias * bu;
        self.bi = -e + regs.bias * bi;
        for k in 0..pu.len() {
            self.p[k] = -e * qi[k] + regs.user * pu[k];
            self.q[k] = -e * pu[k] + regs.item * qi[k];
        }
        0.5 * e * e
            + 0.5 * regs.user * sq_norm(pu)
            + 0.5 * regs.item * sq_norm(qi)
            + 0.5 * regs.bias * (bu * bu + bi * bi)
    }

    pub fn accumulate(&self, grad: &mut FactorState, u: usize, i: usize) {
        grad.user_bias[u] += self.bu;
        grad.item_bias[i] += self.bi;
        axpy(1.0, &self.p, grad.user_factors.row_mut(u));
        axpy(1.0, &self.q, grad.item_factors.row_mut(i));
    }

    pub fn apply(&self, state: &mut FactorState, lr: f64, u: usize, i: usize) {
        state.user_bias[u] -= lr * self.bu;
        state.item_bias[i] -= lr * self.bi;
        axpy(-lr, &self.p, state.user_factors.row_mut(u));
        axpy(-lr, &self.q, state.item_factors.row_mut(i));
    }
}

pub(crate) fn rmse(train: &Interactions, predict: impl Fn(usize, usize) -> f64) -> f64 {
    if train.is_empty() {
        return 0.0;
    }
    let sse: f64 = train
        .entries()
        .iter()
        .map(|r| (r.value - predict(r.user, r.item)).powi(2))
        .sum();
    (sse / train.len() as f64).sqrt()
}

/// Squared-error objective of BiasedMF on a training set.
pub struct BiasedMfObjective<'a> {
    pub train: &'a Interactions,
    pub regs: BiasedRegs,
}

impl<'a> BiasedMfObjective<'a> {
    pub fn new(train: &'a Interactions, cfg: &BiasedMfConfig) -> Self {
        Self {
            train,
            regs: BiasedRegs {
                user: cfg.sgd.reg_user,
                item: cfg.sgd.reg_item,
                bias: cfg.reg_bias,
            },
        }
    }
}

impl Objective for BiasedMfObjective<'_> {
    fn loss(&self, state: &FactorState) -> f64 {
        let mut step = BiasedStep::new(state.dim());
        self.train
            .entries()
            .iter()
            .map(|r| step.compute(state, self.regs, r.user, r.item, r.value))
            .sum()
    }

    fn gradient(&self, state: &FactorState) -> FactorState {
        let mut grad = state.zeros_like();
        let mut step = BiasedStep::new(state.dim());
        for r in self.train.entries() {
            step.compute(state, self.regs, r.user, r.item, r.value);
            step.accumulate(&mut grad, r.user, r.item);
        }
        grad
    }

    fn parameters(&self, state: &FactorState) -> Vec<ParamRef> {
        state.parameters(true)
    }
}

/// Seeded RNG and initial state for the biased models. SoReg goes through
/// the same path so both consume the RNG identically.
pub(crate) fn biased_start(train: &Interactions, dim: usize, seed: u64) -> (ChaCha8Rng, FactorState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = FactorState::init(
        train.n_users(),
        train.n_items(),
        dim,
        false,
        train.global_mean(),
        &mut rng,
    );
    (rng, state)
}

/// One shuffled pass of rating SGD steps.
pub(crate) fn biased_epoch(
    state: &mut FactorState,
    train: &Interactions,
    regs: BiasedRegs,
    lr: f64,
    order: &mut [usize],
    rng: &mut ChaCha8Rng,
    step: &mut BiasedStep,
) {
    order.shuffle(rng);
    for &e in order.iter() {
        let r = train.entries()[e];
        step.compute(state, regs, r.user, r.item, r.value);
        step.apply(state, lr, r.user, r.item);
    }
}

/// SGD on the BiasedMF objective. The trace is training RMSE per epoch.
pub fn fit_biased_mf(train: &Interactions, cfg: &BiasedMfConfig, seed: u64) -> Result<FitResult> {
    let (mut rng, mut state) = biased_start(train, cfg.sgd.factors, seed);
    let regs = BiasedMfObjective::new(train, cfg).regs;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = BiasedStep::new(cfg.sgd.factors);
    let mut trace = Vec::with_capacity(cfg.sgd.iterations);
    for epoch in 0..cfg.sgd.iterations {
        biased_epoch(&mut state, train, regs, cfg.sgd.learn_rate, &mut order, &mut rng, &mut step);
        state.check_finite("BiasedMF", epoch)?;
        trace.push(rmse(train, |u, i| predict_biased(&state, u, i)));
    }
    Ok(FitResult { state, trace })
}

#[derive(Debug, Clone)]
pub struct BiasedMfModel {
    state: FactorState,
}

impl BiasedMfModel {
    pub fn new(state: FactorState) -> Self {
        Self { state }
    }

    pub fn state(&self) -> &FactorState {
        &self.state
    }
}

impl Scorer for BiasedMfModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        predict_biased(&self.state, user, item)
    }
}

fn implicit_norm(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 / (n as f64).sqrt()
    }
}

/// `|N(u)|^{-1/2} sum_{j in N(u)} y_j` into `out`.
fn implicit_sum(state: &FactorState, items: &[(usize, f64)], out: &mut [f64]) {
    out.fill(0.0);
    let y = state.implicit_factors.as_ref().expect("SVD++ state has implicit factors");
    for &(j, _) in items {
        axpy(1.0, y.row(j), out);
    }
    let norm = implicit_norm(items.len());
    out.iter_mut().for_each(|x| *x *= norm);
}

pub fn predict_svdpp(state: &FactorState, train: &Interactions, user: usize, item: usize) -> f64 {
    let mut z = vec![0.0; state.dim()];
    implicit_sum(state, train.user_items(user), &mut z);
    axpy(1.0, state.user_factors.row(user), &mut z);
    state.global_mean + state.user_bias[user] + state.item_bias[item] + dot(state.item_factors.row(item), &z)
}

struct SvdStep {
    biased: BiasedStep,
    z: Vec<f64>,
    y_common: Vec<f64>,
}

impl SvdStep {
    fn new(dim: usize) -> Self {
        Self {
            biased: BiasedStep::new(dim),
            z: vec![0.0; dim],
            y_common: vec![0.0; dim],
        }
    }

    fn compute(
        &mut self,
        state: &FactorState,
        train: &Interactions,
        cfg: &SvdPlusPlusConfig,
        u: usize,
        i: usize,
        r: f64,
    ) -> f64 {
        let implicit = train.user_items(u);
        implicit_sum(state, implicit, &mut self.z);
        let (pu, qi) = (state.user_factors.row(u), state.item_factors.row(i));
        let (bu, bi) = (state.user_bias[u], state.item_bias[i]);
        let mut pz = self.z.clone();
        axpy(1.0, pu, &mut pz);
        let e = r - (state.global_mean + bu + bi + dot(qi, &pz));
        let norm = implicit_norm(implicit.len());
        let g = &mut self.biased;
        g.bu = -e + cfg.reg_bias * bu;
        g.bi = -e + cfg.reg_bias * bi;
        for k in 0..pu.len() {
            g.p[k] = -e * qi[k] + cfg.sgd.reg_user * pu[k];
            g.q[k] = -e * pz[k] + cfg.sgd.reg_item * qi[k];
            self.y_common[k] = -e * norm * qi[k];
        }
        let y = state.implicit_factors.as_ref().unwrap();
        let y_reg: f64 = implicit.iter().map(|&(j, _)| sq_norm(y.row(j))).sum();
        0.5 * e * e
            + 0.5 * cfg.sgd.reg_user * sq_norm(pu)
            + 0.5 * cfg.sgd.reg_item * sq_norm(qi)
            + 0.5 * cfg.reg_bias * (bu * bu + bi * bi)
            + 0.5 * cfg.reg_implicit * y_reg
    }

    /// Adds `scale` times this gradient into `target`.
    fn add_scaled(
        &self,
        target: &mut FactorState,
        reference: &FactorState,
        cfg: &SvdPlusPlusConfig,
        scale: f64,
        train: &Interactions,
        u: usize,
        i: usize,
    ) {
        let g = &self.biased;
        target.user_bias[u] += scale * g.bu;
        target.item_bias[i] += scale * g.bi;
        axpy(scale, &g.p, target.user_factors.row_mut(u));
        axpy(scale, &g.q, target.item_factors.row_mut(i));
        let ref_y = reference.implicit_factors.as_ref().unwrap();
        let dim = g.p.len();
        let mut gy = vec![0.0; dim];
        for &(j, _) in train.user_items(u) {
            for k in 0..dim {
                gy[k] = self.y_common[k] + cfg.reg_implicit * ref_y.row(j)[k];
            }
            axpy(scale, &gy, target.implicit_factors.as_mut().unwrap().row_mut(j));
        }
    }
}

pub struct SvdPlusPlusObjective<'a> {
    pub train: &'a Interactions,
    pub cfg: &'a SvdPlusPlusConfig,
}

impl Objective for SvdPlusPlusObjective<'_> {
    fn loss(&self, state: &FactorState) -> f64 {
        let mut step = SvdStep::new(state.dim());
        self.train
            .entries()
            .iter()
            .map(|r| step.compute(state, self.train, self.cfg, r.user, r.item, r.value))
            .sum()
    }

    fn gradient(&self, state: &FactorState) -> FactorState {
        let mut grad = state.zeros_like();
        let mut step = SvdStep::new(state.dim());
        for r in self.train.entries() {
            step.compute(state, self.train, self.cfg, r.user, r.item, r.value);
            step.add_scaled(&mut grad, state, self.cfg, 1.0, self.train, r.user, r.item);
        }
        grad
    }

    fn parameters(&self, state: &FactorState) -> Vec<ParamRef> {
        state.parameters(true)
    }
}

/// SGD on the SVD++ objective; every implicit item of the user is updated on
/// each of the user's ratings. Trace is training RMSE per epoch.
pub fn fit_svdpp(train: &Interactions, cfg: &SvdPlusPlusConfig, seed: u64) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = FactorState::init(
        train.n_users(),
        train.n_items(),
        cfg.sgd.factors,
        true,
        train.global_mean(),
        &mut rng,
    );
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = SvdStep::new(cfg.sgd.factors);
    let mut trace = Vec::with_capacity(cfg.sgd.iterations);
    for epoch in 0..cfg.sgd.iterations {
        order.shuffle(&mut rng);
        for &e in &order {
            let r = train.entries()[e];
            step.compute(&state, train, cfg, r.user, r.item, r.value);
            apply_svd_step(&mut state, &step, cfg, train, r.user, r.item);
        }
        state.check_finite("SVD++", epoch)?;
        let model = SvdPlusPlusModel::new(state.clone(), train);
        trace.push(rmse(train, |u, i| model.score(u, i)));
    }
    Ok(FitResult { state, trace })
}

fn apply_svd_step(
    state: &mut FactorState,
    step: &SvdStep,
    cfg: &SvdPlusPlusConfig,
    train: &Interactions,
    u: usize,
    i: usize,
) {
    let lr = cfg.sgd.learn_rate;
    let g = &step.biased;
    state.user_bias[u] -= lr * g.bu;
    state.item_bias[i] -= lr * g.bi;
    axpy(-lr, &g.p, state.user_factors.row_mut(u));
    axpy(-lr, &g.q, state.item_factors.row_mut(i));
    // each y_j appears once per user, so its gradient reads its own old value
    let y = state.implicit_factors.as_mut().unwrap();
    for &(j, _) in train.user_items(u) {
        for (yk, ck) in y.row_mut(j).iter_mut().zip(&step.y_common) {
            *yk -= lr * (ck + cfg.reg_implicit * *yk);
        }
    }
}

/// SVD++ scorer with each user's implicit-augmented vector precomputed.
#[derive(Debug, Clone)]
pub struct SvdPlusPlusModel {
    state: FactorState,
    user_vectors: Vec<Vec<f64>>,
}

impl SvdPlusPlusModel {
    pub fn new(state: FactorState, train: &Interactions) -> Self {
        let user_vectors = (0..train.n_users())
            .map(|u| {
                let mut z = vec![0.0; state.dim()];
                implicit_sum(&state, train.user_items(u), &mut z);
                axpy(1.0, state.user_factors.row(u), &mut z);
                z
            })
            .collect();
        Self { state, user_vectors }
    }

    pub fn state(&self) -> &FactorState {
        &self.state
    }
}

impl Scorer for SvdPlusPlusModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.state.global_mean
            + self.state.user_bias[user]
            + self.state.item_bias[item]
            + dot(self.state.item_factors.row(item), &self.user_vectors[user])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Rating;
    use rand::Rng;

    fn sgd(factors: usize, learn_rate: f64, iterations: usize, reg: f64) -> SgdConfig {
        SgdConfig {
            factors,
            learn_rate,
            iterations,
            reg_user: reg,
            reg_item: reg,
        }
    }

    #[test]
    fn zero_factors_predict_from_biases() {
        let entries = vec![
            Rating { user: 0, item: 0, value: 5.0 },
            Rating { user: 0, item: 1, value: 3.0 },
            Rating { user: 1, item: 0, value: 4.0 },
        ];
        let train = Interactions::new(2, 2, entries).unwrap();
        let cfg = BiasedMfConfig { sgd: sgd(0, 0.05, 50, 0.01), reg_bias: 0.01 };
        let fit = fit_biased_mf(&train, &cfg, 1).unwrap();
        let s = &fit.state;
        let m = BiasedMfModel::new(s.clone());
        for u in 0..2 {
            for i in 0..2 {
                let expected = s.global_mean + s.user_bias[u] + s.item_bias[i];
                assert_eq!(m.score(u, i), expected);
            }
        }
        assert!(fit.trace.last().unwrap() < &fit.trace[0]);
    }

    #[test]
    fn recovers_rank_one_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..30).map(|_| rng.gen_range(0.5..1.5)).collect();
        let b: Vec<f64> = (0..30).map(|_| rng.gen_range(0.5..1.5)).collect();
        let mut entries = vec![];
        for u in 0..30 {
            for i in 0..30 {
                entries.push(Rating { user: u, item: i, value: 1.0 + 1.5 * a[u] * b[i] });
            }
        }
        let train = Interactions::new(30, 30, entries).unwrap();
        let cfg = BiasedMfConfig { sgd: sgd(2, 0.02, 100, 0.0), reg_bias: 0.0 };
        let fit = fit_biased_mf(&train, &cfg, 7).unwrap();
        let last = *fit.trace.last().unwrap();
        assert!(last < 0.05, "train RMSE {last}");
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let entries = (0..20)
            .map(|i| Rating { user: i % 4, item: i / 4, value: if i % 2 == 0 { 5.0 } else { 1.0 } })
            .collect();
        let train = Interactions::new(4, 5, entries).unwrap();
        let cfg = BiasedMfConfig { sgd: sgd(3, 1e6, 50, 0.01), reg_bias: 0.01 };
        let err = fit_biased_mf(&train, &cfg, 1).unwrap_err();
        assert!(matches!(err, crate::error::Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn svdpp_with_zero_implicit_equals_biased() {
        let entries = vec![
            Rating { user: 0, item: 0, value: 5.0 },
            Rating { user: 0, item: 2, value: 2.0 },
            Rating { user: 1, item: 1, value: 4.0 },
        ];
        let train = Interactions::new(2, 3, entries).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut state = FactorState::init(2, 3, 4, true, 3.0, &mut rng);
        for x in state.implicit_factors.as_mut().unwrap().as_mut_slice() {
            *x = 0.0;
        }
        state.user_bias[1] = 0.3;
        let svd = SvdPlusPlusModel::new(state.clone(), &train);
        let mut plain = state.clone();
        plain.implicit_factors = None;
        let biased = BiasedMfModel::new(plain);
        for u in 0..2 {
            for i in 0..3 {
                assert!((svd.score(u, i) - biased.score(u, i)).abs() < 1e-15);
                assert!((predict_svdpp(&state, &train, u, i) - biased.score(u, i)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_implicit_item_has_unit_normalizer() {
        assert_eq!(implicit_norm(1), 1.0);
        let entries = vec![Rating { user: 0, item: 1, value: 4.0 }];
        let train = Interactions::new(1, 2, entries).unwrap();
        let mut state = FactorState::zeros(1, 2, 2, true);
        state.implicit_factors.as_mut().unwrap().row_mut(1).copy_from_slice(&[0.5, -1.0]);
        state.item_factors.row_mut(0).copy_from_slice(&[2.0, 1.0]);
        // q_0 . (0 + 1 * y_1) = 1.0 - 1.0
        assert_eq!(predict_svdpp(&state, &train, 0, 0), 0.0);
    }

    #[test]
    fn svdpp_trains_without_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut entries = vec![];
        for u in 0..20 {
            for i in 0..15 {
                if rng.gen_bool(0.4) {
                    entries.push(Rating { user: u, item: i, value: rng.gen_range(1..=5) as f64 });
                }
            }
        }
        let train = Interactions::new(20, 15, entries).unwrap();
        let cfg = SvdPlusPlusConfig { sgd: sgd(5, 0.01, 30, 0.01), reg_bias: 0.01, reg_implicit: 0.01 };
        let a = fit_svdpp(&train, &cfg, 5).unwrap();
        let b = fit_svdpp(&train, &cfg, 5).unwrap();
        assert_eq!(a.state, b.state);
        assert!(a.trace.last().unwrap() < &a.trace[0]);
    }
}
