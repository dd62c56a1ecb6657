//! Lloyd's k-means with k-means++ seeding and seeded restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuiltError, Result};
use crate::linalg::Matrix;
use crate::metrics::LabelVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative objective change below which a run stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 25,
            max_iters: 300,
            tol: 1e-9,
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn with_seed(seed: u64) -> Self {
        KMeansConfig { seed, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 || !(self.tol > 0.0) {
            return Err(QuiltError::InvalidConfig(format!(
                "k-means needs restarts >= 1, max_iters >= 1, tol > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: LabelVector,
    /// Centers as columns, `dim x K`.
    pub centers: Matrix,
    /// Sum of squared distances to assigned centers.
    pub objective: f64,
    /// Objective after every center update of the winning run.
    pub history: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
}

fn sq_dist(points: &Matrix, i: usize, centers: &Matrix, c: usize) -> f64 {
    points
        .column(i)
        .iter()
        .zip(centers.column(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Index of the nearest center for every column; ties go to the lower index.
pub fn assign_nearest(points: &Matrix, centers: &Matrix) -> Vec<usize> {
    (0..points.ncols())
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..centers.ncols() {
                let d = sq_dist(points, i, centers, c);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn objective(points: &Matrix, labels: &[usize], centers: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points, i, centers, l))
        .sum()
}

fn means(points: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let mut centers = Matrix::zeros(points.nrows(), k);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut col = centers.column_mut(l);
        col += points.column(i);
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            centers.column_mut(c).scale_mut(1.0 / count as f64);
        }
    }
    centers
}

/// Give every empty cluster the point farthest from its current center,
/// never emptying another cluster in the process.
fn repair_empty(points: &Matrix, labels: &mut [usize], centers: &Matrix, k: usize) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut pick: Option<(f64, usize)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] <= 1 {
                continue;
            }
            let d = sq_dist(points, i, centers, l);
            if pick.is_none_or(|(bd, _)| d > bd) {
                pick = Some((d, i));
            }
        }
        if let Some((_, i)) = pick {
            counts[labels[i]] -= 1;
            labels[i] = empty;
            counts[empty] += 1;
        }
    }
}

fn plus_plus_seed(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.ncols();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| {
            points
                .column(i)
                .iter()
                .zip(points.column(chosen[0]).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // Guard against landing on a zero-weight tail after rounding.
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, slot) in d2.iter_mut().enumerate() {
            let d: f64 = points
                .column(i)
                .iter()
                .zip(points.column(next).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < *slot {
                *slot = d;
            }
        }
    }
    Matrix::from_columns(&chosen.iter().map(|&i| points.column(i)).collect::<Vec<_>>())
}

struct Run {
    labels: Vec<usize>,
    centers: Matrix,
    objective: f64,
    history: Vec<f64>,
}

fn lloyd(points: &Matrix, k: usize, cfg: &KMeansConfig, restart: usize) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut centers = plus_plus_seed(points, k, &mut rng);
    let mut labels = assign_nearest(points, &centers);
    let mut history: Vec<f64> = Vec::new();

    let mut settled = false;
    for _ in 0..cfg.max_iters {
        repair_empty(points, &mut labels, &centers, k);
        centers = means(points, &labels, k);
        let obj = objective(points, &labels, &centers);
        if let Some(&prev) = history.last() {
            debug_assert!(
                obj <= prev + 1e-9 * prev.abs().max(1.0),
                "k-means objective increased from {prev} to {obj}"
            );
        }
        let small_change = history
            .last()
            .is_some_and(|&prev| prev - obj <= cfg.tol * prev.abs());
        history.push(obj);
        let next = assign_nearest(points, &centers);
        if next == labels {
            settled = true;
            break;
        }
        labels = next;
        if small_change {
            break;
        }
    }
    if !settled {
        // Labels were reassigned after the last update; refresh the centers.
        repair_empty(points, &mut labels, &centers, k);
        centers = means(points, &labels, k);
        history.push(objective(points, &labels, &centers));
    }
    Run {
        objective: *history.last().expect("at least one iteration"),
        labels,
        centers,
        history,
    }
}

/// Cluster the columns of `points` (`dim x n`) into `k` groups.
///
/// The best of `cfg.restarts` independent runs is kept; equal objectives go
/// to the lowest restart index, so the result does not depend on thread
/// scheduling.
pub fn kmeans(points: &Matrix, k: usize, cfg: &KMeansConfig) -> Result<KMeansResult> {
    cfg.validate()?;
    let n = points.ncols();
    if k == 0 || k > n {
        return Err(QuiltError::InvalidInput(format!(
            "k-means needs 1 <= K <= n (K = {k}, n = {n})"
        )));
    }
    if !points.iter().all(|x| x.is_finite()) {
        return Err(QuiltError::InvalidInput("k-means points contain non-finite values".into()));
    }
    let runs: Vec<Run> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| lloyd(points, k, cfg, r))
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.objective < a.1.objective { b } else { a })
        .expect("restarts >= 1");
    Ok(KMeansResult {
        labels: LabelVector::new(best.labels, k)?,
        centers: best.centers,
        objective: best.objective,
        history: best.history,
        restart,
    })
}
