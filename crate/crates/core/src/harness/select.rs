//! Operating-point selection over aggregated sweep results.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{AggregateRecord, Band, Bands};
use crate::error::{Error, Result};
use crate::models::{Algorithm, Family};
use crate::params::HyperParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub key: String,
    pub params: HyperParams,
    pub ndcg: f64,
    pub coverage: f64,
    pub average_disparity: Option<f64>,
}

impl PointSummary {
    fn of(a: &AggregateRecord) -> Option<Self> {
        let m = a.mean()?;
        Some(Self {
            key: a.key.clone(),
            params: a.params.clone(),
            ndcg: m.ndcg,
            coverage: m.coverage,
            average_disparity: m.average_disparity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SelectionStatus {
    Selected { point: PointSummary },
    /// No completed point inside the band; `closest` is the completed point
    /// nearest to the band center, if any.
    Excluded { closest: Option<PointSummary> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub algorithm: Algorithm,
    pub family: Family,
    pub band: Band,
    #[serde(flatten)]
    pub status: SelectionStatus,
}

impl Selection {
    pub fn selected(&self) -> Option<&PointSummary> {
        match &self.status {
            SelectionStatus::Selected { point } => Some(point),
            SelectionStatus::Excluded { .. } => None,
        }
    }
}

/// Higher nDCG first; equal nDCG falls back to the canonical parameter
/// string so the choice never depends on input order.
fn by_ndcg_desc(a: &PointSummary, b: &PointSummary) -> Ordering {
    b.ndcg
        .total_cmp(&a.ndcg)
        .then_with(|| a.params.canonical().cmp(&b.params.canonical()))
}

fn points_of<'a>(aggregates: &'a [AggregateRecord], algorithm: Algorithm) -> impl Iterator<Item = PointSummary> + 'a {
    aggregates
        .iter()
        .filter(move |a| a.algorithm == algorithm)
        .filter_map(PointSummary::of)
}

/// The completed point of `algorithm` with the highest nDCG inside `band`.
pub fn select_in_band(aggregates: &[AggregateRecord], algorithm: Algorithm, band: Band) -> Selection {
    let best = points_of(aggregates, algorithm)
        .filter(|p| band.contains(p.ndcg))
        .min_by(by_ndcg_desc);
    let status = match best {
        Some(point) => SelectionStatus::Selected { point },
        None => SelectionStatus::Excluded {
            closest: points_of(aggregates, algorithm).min_by(|a, b| {
                (a.ndcg - band.center)
                    .abs()
                    .total_cmp(&(b.ndcg - band.center).abs())
                    .then_with(|| by_ndcg_desc(a, b))
            }),
        },
    };
    Selection {
        algorithm,
        family: algorithm.family(),
        band,
        status,
    }
}

/// One selection per algorithm present in the ledger, in roster order,
/// each using its family's band.
pub fn select_equal_ndcg(aggregates: &[AggregateRecord], bands: &Bands) -> Result<Vec<Selection>> {
    if aggregates.is_empty() {
        return Err(Error::Validation("ledger has no aggregated grid points".into()));
    }
    Ok(algorithms_in(aggregates)
        .map(|alg| select_in_band(aggregates, alg, bands.for_family(alg.family())))
        .collect())
}

fn algorithms_in(aggregates: &[AggregateRecord]) -> impl Iterator<Item = Algorithm> + '_ {
    Algorithm::ALL
        .into_iter()
        .filter(|alg| aggregates.iter().any(|a| a.algorithm == *alg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub algorithm: Algorithm,
    pub family: Family,
    pub best: PointSummary,
    pub worst: PointSummary,
}

/// Highest- and lowest-nDCG completed points per algorithm.
pub fn frontier(aggregates: &[AggregateRecord]) -> Vec<FrontierPoint> {
    algorithms_in(aggregates)
        .filter_map(|alg| {
            let best = points_of(aggregates, alg).min_by(by_ndcg_desc)?;
            let worst = points_of(aggregates, alg).min_by(|a, b| {
                a.ndcg
                    .total_cmp(&b.ndcg)
                    .then_with(|| a.params.canonical().cmp(&b.params.canonical()))
            })?;
            Some(FrontierPoint {
                algorithm: alg,
                family: alg.family(),
                best,
                worst,
            })
        })
        .collect()
}
