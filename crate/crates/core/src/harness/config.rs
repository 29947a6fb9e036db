//! Sweep configuration files.
//!
//! ```toml
//! seed = 42
//! folds = 5
//! list_size = 10
//!
//! [dataset]
//! dir = "data/yelp"          # or ratings/trust/groups/categories paths
//! protected = "female"
//! unprotected = "male"
//!
//! [bands.model_based]
//! center = 0.023
//! halfwidth = 0.001
//!
//! [[algorithms]]
//! name = "UserKNN"
//! grid = { neighbors = [10, 50], similarity = ["pcc", "cos"] }
//! points = [{ neighbors = 100, shrinkage = 30 }]
//! ```
//!
//! `grid` expands to its cartesian product, `points` are taken as listed,
//! and an algorithm with neither runs once with its defaults. Relative paths
//! resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetPaths, GroupDesignation};
use crate::error::{Error, Result};
use crate::models::{Algorithm, Family};
use crate::params::{HyperParams, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub center: f64,
    pub halfwidth: f64,
}

impl Band {
    /// Inclusive, with slack for decimal band edges like `0.023 - 0.001`.
    pub fn contains(&self, ndcg: f64) -> bool {
        (ndcg - self.center).abs() <= self.halfwidth + 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub model_based: Band,
    pub neighborhood: Band,
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            model_based: Band { center: 0.023, halfwidth: 0.001 },
            neighborhood: Band { center: 0.074, halfwidth: 0.01 },
        }
    }
}

impl Bands {
    pub fn for_family(&self, family: Family) -> Band {
        match family {
            Family::ModelBased => self.model_based,
            Family::Neighborhood => self.neighborhood,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmGrid {
    pub algorithm: Algorithm,
    pub points: Vec<HyperParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seed: u64,
    pub folds: usize,
    pub list_size: usize,
    pub dataset: Option<DatasetPaths>,
    pub groups: GroupDesignation,
    pub bands: Bands,
    pub algorithms: Vec<AlgorithmGrid>,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_LIST_SIZE: usize = 10;

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            folds: DEFAULT_FOLDS,
            list_size: DEFAULT_LIST_SIZE,
            dataset: None,
            groups: GroupDesignation::default(),
            bands: Bands::default(),
            algorithms: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    folds: Option<usize>,
    list_size: Option<usize>,
    dataset: Option<RawDataset>,
    bands: Option<RawBands>,
    #[serde(default)]
    algorithms: Vec<RawAlgorithm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    dir: Option<PathBuf>,
    ratings: Option<PathBuf>,
    trust: Option<PathBuf>,
    groups: Option<PathBuf>,
    categories: Option<PathBuf>,
    protected: Option<String>,
    unprotected: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBands {
    model_based: Option<Band>,
    neighborhood: Option<Band>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgorithm {
    name: String,
    grid: Option<BTreeMap<String, Vec<ParamValue>>>,
    points: Option<Vec<HyperParams>>,
}

/// Cartesian product over the grid's keys in ascending order.
pub fn expand_grid(grid: &BTreeMap<String, Vec<ParamValue>>) -> Vec<HyperParams> {
    grid.iter().fold(vec![HyperParams::new()], |acc, (key, values)| {
        acc.iter()
            .flat_map(|base| values.iter().map(move |v| base.clone().with(key, v.clone())))
            .collect()
    })
}

impl SweepConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses TOML text; relative dataset paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = SweepConfig {
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            folds: raw.folds.unwrap_or(DEFAULT_FOLDS),
            list_size: raw.list_size.unwrap_or(DEFAULT_LIST_SIZE),
            ..SweepConfig::default()
        };
        if let Some(d) = raw.dataset {
            if let Some(p) = d.protected {
                cfg.groups.protected = p;
            }
            if let Some(u) = d.unprotected {
                cfg.groups.unprotected = u;
            }
            let mut paths = d.dir.as_ref().map(|dir| DatasetPaths::in_dir(base.join(dir)));
            let overrides = [
                (d.ratings, 0usize),
                (d.trust, 1),
                (d.groups, 2),
                (d.categories, 3),
            ];
            for (file, slot) in overrides {
                let Some(file) = file else { continue };
                let p = paths.get_or_insert_with(|| DatasetPaths::in_dir(base));
                let target = match slot {
                    0 => &mut p.ratings,
                    1 => &mut p.trust,
                    2 => &mut p.groups,
                    _ => &mut p.categories,
                };
                *target = base.join(file);
            }
            cfg.dataset = paths;
        }
        if let Some(b) = raw.bands {
            if let Some(m) = b.model_based {
                cfg.bands.model_based = m;
            }
            if let Some(n) = b.neighborhood {
                cfg.bands.neighborhood = n;
            }
        }
        for a in raw.algorithms {
            let algorithm: Algorithm = a.name.parse()?;
            if let Some(grid) = &a.grid {
                if let Some((key, _)) = grid.iter().find(|(_, v)| v.is_empty()) {
                    return Err(Error::Config(format!("{algorithm}: grid for {key:?} is empty")));
                }
            }
            let mut points = a.grid.as_ref().map(expand_grid).unwrap_or_default();
            points.extend(a.points.unwrap_or_default());
            if points.is_empty() {
                points.push(HyperParams::new());
            }
            cfg.add(algorithm, points);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Adds points to an algorithm's grid, skipping ones already present.
    pub fn add(&mut self, algorithm: Algorithm, points: Vec<HyperParams>) {
        let idx = match self.algorithms.iter().position(|g| g.algorithm == algorithm) {
            Some(i) => i,
            None => {
                self.algorithms.push(AlgorithmGrid { algorithm, points: Vec::new() });
                self.algorithms.len() - 1
            }
        };
        let grid = &mut self.algorithms[idx];
        for p in points {
            if !grid.points.iter().any(|q| q.canonical() == p.canonical()) {
                grid.points.push(p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.list_size == 0 {
            return Err(Error::Config("list_size must be positive".into()));
        }
        for band in [self.bands.model_based, self.bands.neighborhood] {
            if !(band.halfwidth >= 0.0) || !band.center.is_finite() {
                return Err(Error::Config(format!("invalid band {band:?}")));
            }
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms configured".into()));
        }
        for grid in &self.algorithms {
            if grid.points.is_empty() {
                return Err(Error::Config(format!("{}: empty grid", grid.algorithm)));
            }
            for p in &grid.points {
                grid.algorithm.check_params(p)?;
            }
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.algorithms.iter().map(|g| g.points.len()).sum()
    }
}
