//! Choosing `(r, K)` by prediction validation: cluster a train and a test
//! split separately, fit a classifier on the train clustering, and score how
//! well it reproduces the test clustering.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuiltError, Result};
use crate::kmeans::assign_nearest;
use crate::linalg::Matrix;
use crate::metrics::{adjusted_rand_index, LabelVector};
use crate::patches::{check_connected, PatchSet};
use crate::quilting::{cluster_quilting, impute_matrix, QuiltConfig};
use crate::simgen::stage_rng;

/// Supervised predictor used to carry train labels over to test samples.
/// Samples are columns of `train` and `test`.
pub trait Classifier: Sync {
    fn fit_predict(&self, train: &Matrix, labels: &LabelVector, test: &Matrix) -> Result<Vec<usize>>;
}

/// Assign each test sample to the closest class mean of the train samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestCentroid;

impl Classifier for NearestCentroid {
    fn fit_predict(&self, train: &Matrix, labels: &LabelVector, test: &Matrix) -> Result<Vec<usize>> {
        if train.ncols() != labels.len() || train.nrows() != test.nrows() {
            return Err(QuiltError::InvalidInput("classifier inputs have inconsistent shapes".into()));
        }
        let counts = labels.counts();
        let present: Vec<usize> = (0..labels.k()).filter(|&j| counts[j] > 0).collect();
        let mut means = Matrix::zeros(train.nrows(), present.len());
        for (slot, &j) in present.iter().enumerate() {
            let mut col = means.column_mut(slot);
            for (i, &l) in labels.labels().iter().enumerate() {
                if l == j {
                    col += train.column(i);
                }
            }
            col /= counts[j] as f64;
        }
        Ok(assign_nearest(test, &means).into_iter().map(|slot| present[slot]).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[default]
    NearestCentroid,
}

fn default_split() -> f64 {
    0.5
}

fn default_repeats() -> usize {
    5
}

fn default_retries() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub ranks: Vec<usize>,
    pub cluster_counts: Vec<usize>,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub classifier: ClassifierKind,
    /// Split redraws allowed before giving up.
    #[serde(default = "default_retries")]
    pub max_split_retries: usize,
}

impl TuneGrid {
    pub fn new(ranks: Vec<usize>, cluster_counts: Vec<usize>) -> Self {
        TuneGrid {
            ranks,
            cluster_counts,
            split_fraction: default_split(),
            repeats: default_repeats(),
            classifier: ClassifierKind::NearestCentroid,
            max_split_retries: default_retries(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(QuiltError::InvalidConfig(m));
        if self.ranks.is_empty() || self.cluster_counts.is_empty() {
            return bad("tuning grid needs at least one rank and one cluster count".into());
        }
        if self.ranks.contains(&0) {
            return bad("candidate ranks must be positive".into());
        }
        // ARI against a one-cluster partition is degenerate (always 1).
        if self.cluster_counts.iter().any(|&k| k < 2) {
            return bad("candidate cluster counts must be at least 2".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction must lie in (0, 1), got {}", self.split_fraction));
        }
        if self.repeats == 0 {
            return bad("repeats must be positive".into());
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        let mut ranks = self.ranks.clone();
        ranks.sort_unstable();
        ranks.dedup();
        let mut ks = self.cluster_counts.clone();
        ks.sort_unstable();
        ks.dedup();
        ranks.iter().flat_map(|&r| ks.iter().map(move |&k| (r, k))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneCell {
    pub rank: usize,
    pub clusters: usize,
    /// Mean agreement over repeats; `None` when some repeat could not run.
    pub agreement: Option<f64>,
    pub per_repeat: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub rank: usize,
    pub clusters: usize,
    pub agreement: f64,
    pub table: Vec<TuneCell>,
}

/// Train/test sample ids with the patch sets restricted to each.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub train_set: PatchSet,
    pub test_set: PatchSet,
}

/// Split samples so every overlap region is divided in the same proportion:
/// samples are grouped by the exact set of patches observing them and each
/// group is shuffled and cut at `fraction`.
pub fn split_samples(ps: &PatchSet, fraction: f64, rng: &mut impl rand::Rng) -> Result<Split> {
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    let mut owners = vec![Vec::new(); ps.n()];
    for (m, patch) in ps.patches().iter().enumerate() {
        for &s in &patch.samples {
            owners[s].push(m);
        }
    }
    for (s, key) in owners.into_iter().enumerate() {
        groups.entry(key).or_default().push(s);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in groups.values_mut() {
        members.shuffle(rng);
        let cut = (fraction * members.len() as f64).round() as usize;
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let train_set = ps.restrict_samples(&train)?;
    let test_set = ps.restrict_samples(&test)?;
    Ok(Split { train, test, train_set, test_set })
}

fn split_usable(split: &Split, max_rank: usize, max_k: usize) -> bool {
    [&split.train_set, &split.test_set].iter().all(|half| {
        half.max_rank() >= max_rank && half.n() >= max_k && check_connected(&half.graph())
    })
}

fn agreement(split: &Split, cfg: &QuiltConfig, classifier: &dyn Classifier) -> Result<f64> {
    let train = cluster_quilting(&split.train_set, cfg)?;
    let test = cluster_quilting(&split.test_set, cfg)?;
    let predicted = classifier.fit_predict(&impute_matrix(&train), &train.labels, &impute_matrix(&test))?;
    let predicted = LabelVector::new(predicted, cfg.clusters)?;
    adjusted_rand_index(&predicted, &test.labels)
}

/// Prediction-validation search over `grid`; `template` supplies ordering,
/// score and k-means settings. Ties go to the smaller rank, then the smaller
/// cluster count.
pub fn tune(ps: &PatchSet, grid: &TuneGrid, template: &QuiltConfig, seed: u64) -> Result<TuneResult> {
    tune_with(ps, grid, template, seed, &NearestCentroid)
}

pub fn tune_with(
    ps: &PatchSet,
    grid: &TuneGrid,
    template: &QuiltConfig,
    seed: u64,
    classifier: &dyn Classifier,
) -> Result<TuneResult> {
    grid.validate()?;
    let cells = grid.cells();
    let max_rank = cells.iter().map(|c| c.0).max().unwrap_or(1);
    let max_k = cells.iter().map(|c| c.1).max().unwrap_or(1);

    let mut splits = Vec::with_capacity(grid.repeats);
    for repeat in 0..grid.repeats {
        let mut rng = stage_rng(seed, repeat as u64);
        let mut found = None;
        for _ in 0..=grid.max_split_retries {
            if let Ok(split) = split_samples(ps, grid.split_fraction, &mut rng) {
                if split_usable(&split, max_rank, max_k) {
                    found = Some(split);
                    break;
                }
            }
        }
        splits.push(found.ok_or(QuiltError::SplitInfeasible { retries: grid.max_split_retries })?);
    }

    let table: Vec<TuneCell> = cells
        .par_iter()
        .map(|&(rank, clusters)| {
            let mut cfg = template.clone();
            cfg.rank = rank;
            cfg.clusters = clusters;
            let per_repeat: Vec<Option<f64>> = splits
                .iter()
                .map(|split| match agreement(split, &cfg, classifier) {
                    Ok(a) => Some(a),
                    Err(e) => {
                        log::warn!("tuning cell (r = {rank}, K = {clusters}) failed: {e}");
                        None
                    }
                })
                .collect();
            let agreement = per_repeat
                .iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            TuneCell { rank, clusters, agreement, per_repeat }
        })
        .collect();

    let mut best: Option<&TuneCell> = None;
    for cell in &table {
        if let Some(a) = cell.agreement {
            if best.is_none_or(|b| a > b.agreement.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(cell);
            }
        }
    }
    let best = best.ok_or_else(|| QuiltError::InvalidConfig("no grid cell could be evaluated".into()))?;
    Ok(TuneResult {
        rank: best.rank,
        clusters: best.clusters,
        agreement: best.agreement.unwrap_or(f64::NAN),
        table,
    })
}
