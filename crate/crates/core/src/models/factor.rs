//! Parameter state shared by the gradient-trained models.
//!
//! Every model exposes its training objective through [`Objective`], with the
//! analytic gradient computed by the same per-sample code its SGD loop uses.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of latent factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    /// Entries drawn from uniform(-scale, scale).
    pub fn uniform(rows: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(rows, dim);
        if scale > 0.0 {
            let dist = Uniform::new(-scale, scale);
            for x in &mut m.data {
                *x = dist.sample(rng);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Global mean, biases and factor matrices. Also used as the gradient
/// container, with the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorState {
    pub global_mean: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub user_factors: FactorMatrix,
    pub item_factors: FactorMatrix,
    pub implicit_factors: Option<FactorMatrix>,
}

/// One scalar parameter inside a [`FactorState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamRef {
    UserBias(usize),
    ItemBias(usize),
    UserFactor(usize, usize),
    ItemFactor(usize, usize),
    Implicit(usize, usize),
}

impl FactorState {
    pub fn zeros(n_users: usize, n_items: usize, dim: usize, implicit: bool) -> Self {
        Self {
            global_mean: 0.0,
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            user_factors: FactorMatrix::zeros(n_users, dim),
            item_factors: FactorMatrix::zeros(n_items, dim),
            implicit_factors: implicit.then(|| FactorMatrix::zeros(n_items, dim)),
        }
    }

    /// Zero biases, uniform(-0.01, 0.01) factors drawn users first, then
    /// items, then implicit factors.
    pub fn init(
        n_users: usize,
        n_items: usize,
        dim: usize,
        implicit: bool,
        global_mean: f64,
        rng: &mut impl Rng,
    ) -> Self {
        const SCALE: f64 = 0.01;
        let user_factors = FactorMatrix::uniform(n_users, dim, SCALE, rng);
        let item_factors = FactorMatrix::uniform(n_items, dim, SCALE, rng);
        let implicit_factors = implicit.then(|| FactorMatrix::uniform(n_items, dim, SCALE, rng));
        Self {
            global_mean,
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            user_factors,
            item_factors,
            implicit_factors,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            global_mean: 0.0,
            user_bias: vec![0.0; self.user_bias.len()],
            item_bias: vec![0.0; self.item_bias.len()],
            user_factors: FactorMatrix::zeros(self.user_factors.rows(), self.user_factors.dim()),
            item_factors: FactorMatrix::zeros(self.item_factors.rows(), self.item_factors.dim()),
            implicit_factors: self
                .implicit_factors
                .as_ref()
                .map(|m| FactorMatrix::zeros(m.rows(), m.dim())),
        }
    }

    pub fn dim(&self) -> usize {
        self.user_factors.dim()
    }

    pub fn get(&self, p: ParamRef) -> f64 {
        match p {
            ParamRef::UserBias(u) => self.user_bias[u],
            ParamRef::ItemBias(i) => self.item_bias[i],
            ParamRef::UserFactor(u, k) => self.user_factors.row(u)[k],
            ParamRef::ItemFactor(i, k) => self.item_factors.row(i)[k],
            ParamRef::Implicit(j, k) => self.implicit_factors.as_ref().expect("no implicit factors").row(j)[k],
        }
    }

    pub fn set(&mut self, p: ParamRef, value: f64) {
        match p {
            ParamRef::UserBias(u) => self.user_bias[u] = value,
            ParamRef::ItemBias(i) => self.item_bias[i] = value,
            ParamRef::UserFactor(u, k) => self.user_factors.row_mut(u)[k] = value,
            ParamRef::ItemFactor(i, k) => self.item_factors.row_mut(i)[k] = value,
            ParamRef::Implicit(j, k) => {
                self.implicit_factors.as_mut().expect("no implicit factors").row_mut(j)[k] = value
            }
        }
    }

    /// Every trainable scalar, optionally including the biases.
    pub fn parameters(&self, with_biases: bool) -> Vec<ParamRef> {
        let d = self.dim();
        let mut out = Vec::new();
        if with_biases {
            out.extend((0..self.user_bias.len()).map(ParamRef::UserBias));
            out.extend((0..self.item_bias.len()).map(ParamRef::ItemBias));
        }
        for u in 0..self.user_factors.rows() {
            out.extend((0..d).map(|k| ParamRef::UserFactor(u, k)));
        }
        for i in 0..self.item_factors.rows() {
            out.extend((0..d).map(|k| ParamRef::ItemFactor(i, k)));
        }
        if let Some(y) = &self.implicit_factors {
            for j in 0..y.rows() {
                out.extend((0..d).map(|k| ParamRef::Implicit(j, k)));
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.global_mean.is_finite()
            && self.user_bias.iter().all(|x| x.is_finite())
            && self.item_bias.iter().all(|x| x.is_finite())
            && self.user_factors.as_slice().iter().all(|x| x.is_finite())
            && self.item_factors.as_slice().iter().all(|x| x.is_finite())
            && self
                .implicit_factors
                .as_ref()
                .map_or(true, |m| m.as_slice().iter().all(|x| x.is_finite()))
    }

    pub(crate) fn check_finite(&self, model: &str, epoch: usize) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Diverged {
                model: model.to_owned(),
                epoch,
            })
        }
    }
}

/// A differentiable training objective over a [`FactorState`].
pub trait Objective {
    fn loss(&self, state: &FactorState) -> f64;

    /// Full-batch analytic gradient, shaped like the state.
    fn gradient(&self, state: &FactorState) -> FactorState;

    /// Parameters the objective actually depends on.
    fn parameters(&self, state: &FactorState) -> Vec<ParamRef>;
}

/// State after training plus one diagnostic value per epoch.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: FactorState,
    pub trace: Vec<f64>,
}

/// Common SGD knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub factors: usize,
    pub learn_rate: f64,
    pub iterations: usize,
    pub reg_user: f64,
    pub reg_item: f64,
}

impl SgdConfig {
    pub(crate) fn read(r: &crate::params::ParamReader<'_>) -> Result<Self> {
        Ok(Self {
            factors: r.count("factors", 10)?,
            learn_rate: r.positive("learn_rate", 0.01)?,
            iterations: r.count("iterations", 30)?,
            reg_user: r.non_negative("reg_user", 0.01)?,
            reg_item: r.non_negative("reg_item", 0.01)?,
        })
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
