//! Patch processing order.
//!
//! An ordering is scored by the product of per-step overlap scores
//! `s(pi(m), I_pi(1) u ... u I_pi(m-1))` for `m >= 2`. A step is feasible
//! when the incoming patch shares at least one sample with the patches
//! already placed.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{QuiltError, Result};
use crate::linalg;
use crate::patches::{check_connected, overlap_with_mask, union_mask, Overlap, PatchSet};

/// Default largest patch count handled by exhaustive search (9! orderings).
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 9;
/// Multiplier on the patch norm in the signal-proportion score.
pub const SNR_SCORE_INFLATION: f64 = 1.1;

/// How to measure overlap strength between a patch and a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreFunction {
    /// `|I_k n I|`.
    OverlapSize,
    /// `(1.1 ||X_k|| / sigma_r(X[T_k, I_k n I]) + 1)^-1`.
    Snr { rank: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingMethod {
    Exhaustive,
    Greedy,
    Given,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingResult {
    /// `pi[m]` is the patch processed at step `m`.
    pub pi: Vec<usize>,
    /// Scores for steps `1..M` (0-based); empty when `M = 1`.
    pub step_scores: Vec<f64>,
    /// Product of `step_scores`; 1 for the empty product.
    pub objective: f64,
    pub method: OrderingMethod,
}

fn mask_from_ids(n: usize, ids: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &s in ids {
        if s < n {
            mask[s] = true;
        }
    }
    mask
}

/// `|I_k n I|` as a real.
pub fn score_overlap_size(ps: &PatchSet, k: usize, samples: &[usize]) -> f64 {
    let mask = mask_from_ids(ps.n(), samples);
    overlap_with_mask(ps, k, &mask).len() as f64
}

/// Signal-proportion score of patch `k` against a sample set.
///
/// Equals `(1.1 / gamma_hat + 1)^-1` where `gamma_hat` is the ratio of the
/// r-th singular value on the overlap to the spectral norm of the patch.
/// Returns 0 when the overlap block has rank below `r`.
pub fn score_snr(ps: &PatchSet, k: usize, samples: &[usize], rank: usize) -> Result<f64> {
    let mask = mask_from_ids(ps.n(), samples);
    let overlap = overlap_with_mask(ps, k, &mask);
    snr_from_overlap(ps, k, &overlap, rank)
}

fn snr_from_overlap(ps: &PatchSet, k: usize, overlap: &Overlap, rank: usize) -> Result<f64> {
    if overlap.is_empty() {
        return Err(QuiltError::EmptyIntersection { patch: k });
    }
    let patch = ps.patch(k);
    let sr = linalg::rth_singular_value_or_zero(&patch.columns(&overlap.local), rank)?;
    if sr == 0.0 {
        return Ok(0.0);
    }
    let norm = linalg::spectral_norm(&patch.data)?;
    Ok(1.0 / (SNR_SCORE_INFLATION * norm / sr + 1.0))
}

impl ScoreFunction {
    /// Score of patch `k` against the union of samples flagged in `prior`.
    /// `None` when the step is infeasible (empty overlap).
    fn eval(&self, ps: &PatchSet, k: usize, prior: &[bool]) -> Result<Option<f64>> {
        let overlap = overlap_with_mask(ps, k, prior);
        if overlap.is_empty() {
            return Ok(None);
        }
        match *self {
            ScoreFunction::OverlapSize => Ok(Some(overlap.len() as f64)),
            ScoreFunction::Snr { rank } => snr_from_overlap(ps, k, &overlap, rank).map(Some),
        }
    }
}

/// Memoized step scores keyed by (incoming patch, bitmask of placed patches).
struct Scorer<'a> {
    ps: &'a PatchSet,
    sf: ScoreFunction,
    cache: HashMap<(usize, u64), Option<f64>>,
}

impl<'a> Scorer<'a> {
    fn new(ps: &'a PatchSet, sf: ScoreFunction) -> Self {
        Scorer { ps, sf, cache: HashMap::new() }
    }

    fn score(&mut self, k: usize, placed: u64) -> Result<Option<f64>> {
        if let Some(v) = self.cache.get(&(k, placed)) {
            return Ok(*v);
        }
        let members: Vec<usize> = (0..self.ps.len()).filter(|m| placed & (1 << m) != 0).collect();
        let prior = union_mask(self.ps, &members);
        let v = self.sf.eval(self.ps, k, &prior)?;
        self.cache.insert((k, placed), v);
        Ok(v)
    }
}

fn require_connected(ps: &PatchSet) -> Result<()> {
    if check_connected(&ps.graph()) {
        Ok(())
    } else {
        Err(QuiltError::NoFeasibleOrdering)
    }
}

fn trivial(method: OrderingMethod) -> OrderingResult {
    OrderingResult {
        pi: vec![0],
        step_scores: Vec::new(),
        objective: 1.0,
        method,
    }
}

fn product(scores: &[f64]) -> f64 {
    scores.iter().product()
}

/// Maximize the product objective over all feasible orderings.
///
/// Candidates are visited in lexicographic order and only a strictly better
/// objective replaces the incumbent, so ties resolve to the lexicographically
/// smallest permutation.
pub fn order_exhaustive(ps: &PatchSet, sf: ScoreFunction, cap: usize) -> Result<OrderingResult> {
    let m = ps.len();
    if m > cap || m > 63 {
        return Err(QuiltError::SizeCap { patches: m, cap: cap.min(63) });
    }
    require_connected(ps)?;
    if m == 1 {
        return Ok(trivial(OrderingMethod::Exhaustive));
    }

    struct Search<'a> {
        scorer: Scorer<'a>,
        m: usize,
        pi: Vec<usize>,
        scores: Vec<f64>,
        best: Option<(f64, Vec<usize>, Vec<f64>)>,
    }

    impl Search<'_> {
        fn visit(&mut self, placed: u64) -> Result<()> {
            if self.pi.len() == self.m {
                let objective = product(&self.scores);
                let better = match &self.best {
                    None => true,
                    Some((b, _, _)) => objective > *b,
                };
                if better {
                    self.best = Some((objective, self.pi.clone(), self.scores.clone()));
                }
                return Ok(());
            }
            for k in 0..self.m {
                if placed & (1 << k) != 0 {
                    continue;
                }
                if self.pi.is_empty() {
                    self.pi.push(k);
                    self.visit(placed | (1 << k))?;
                    self.pi.pop();
                    continue;
                }
                if let Some(s) = self.scorer.score(k, placed)? {
                    self.pi.push(k);
                    self.scores.push(s);
                    self.visit(placed | (1 << k))?;
                    self.scores.pop();
                    self.pi.pop();
                }
            }
            Ok(())
        }
    }

    let mut search = Search {
        scorer: Scorer::new(ps, sf),
        m,
        pi: Vec::with_capacity(m),
        scores: Vec::with_capacity(m),
        best: None,
    };
    search.visit(0)?;
    let (objective, pi, step_scores) = search.best.ok_or(QuiltError::NoFeasibleOrdering)?;
    Ok(OrderingResult {
        pi,
        step_scores,
        objective,
        method: OrderingMethod::Exhaustive,
    })
}

/// Greedy forward search: best ordered starting pair, then repeatedly the
/// best-scoring remaining patch. Ties go to the smallest patch index.
pub fn order_greedy(ps: &PatchSet, sf: ScoreFunction) -> Result<OrderingResult> {
    let m = ps.len();
    require_connected(ps)?;
    if m == 1 {
        return Ok(trivial(OrderingMethod::Greedy));
    }

    let mut start: Option<(f64, usize, usize)> = None;
    for k1 in 0..m {
        let prior = union_mask(ps, &[k1]);
        for k2 in 0..m {
            if k1 == k2 {
                continue;
            }
            if let Some(s) = sf.eval(ps, k2, &prior)? {
                if start.is_none_or(|(b, _, _)| s > b) {
                    start = Some((s, k1, k2));
                }
            }
        }
    }
    let (s0, k1, k2) = start.ok_or(QuiltError::NoFeasibleOrdering)?;
    let mut pi = vec![k1, k2];
    let mut scores = vec![s0];
    let mut prior = union_mask(ps, &pi);

    while pi.len() < m {
        let mut next: Option<(f64, usize)> = None;
        for j in (0..m).filter(|j| !pi.contains(j)) {
            if let Some(s) = sf.eval(ps, j, &prior)? {
                if next.is_none_or(|(b, _)| s > b) {
                    next = Some((s, j));
                }
            }
        }
        let (s, j) = next.ok_or(QuiltError::NoFeasibleOrdering)?;
        pi.push(j);
        scores.push(s);
        for &sample in &ps.patch(j).samples {
            prior[sample] = true;
        }
    }
    Ok(OrderingResult {
        objective: product(&scores),
        pi,
        step_scores: scores,
        method: OrderingMethod::Greedy,
    })
}

/// Validate a caller-supplied ordering and score it.
pub fn order_given(ps: &PatchSet, sf: ScoreFunction, pi: &[usize]) -> Result<OrderingResult> {
    let m = ps.len();
    let mut seen = vec![false; m];
    if pi.len() != m || pi.iter().any(|&k| k >= m || std::mem::replace(&mut seen[k], true)) {
        return Err(QuiltError::InvalidInput(format!(
            "ordering {pi:?} is not a permutation of 0..{m}"
        )));
    }
    let mut prior = union_mask(ps, &pi[..1]);
    let mut scores = Vec::with_capacity(m.saturating_sub(1));
    for (step, &k) in pi.iter().enumerate().skip(1) {
        match sf.eval(ps, k, &prior)? {
            Some(s) => scores.push(s),
            None => {
                return Err(QuiltError::InfeasibleOrdering(format!(
                    "patch {k} at step {step} shares no samples with earlier patches"
                )))
            }
        }
        for &sample in &ps.patch(k).samples {
            prior[sample] = true;
        }
    }
    Ok(OrderingResult {
        pi: pi.to_vec(),
        objective: product(&scores),
        step_scores: scores,
        method: OrderingMethod::Given,
    })
}

/// Whether every step of `pi` overlaps earlier patches.
pub fn is_feasible(ps: &PatchSet, pi: &[usize]) -> bool {
    if pi.is_empty() {
        return false;
    }
    let mut prior = union_mask(ps, &pi[..1]);
    for &k in &pi[1..] {
        if overlap_with_mask(ps, k, &prior).is_empty() {
            return false;
        }
        for &s in &ps.patch(k).samples {
            prior[s] = true;
        }
    }
    true
}
