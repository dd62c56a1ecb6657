//! Cluster quilting: patchwise truncated SVD, sequential least-squares
//! merging of right singular vectors across sample overlaps, a global
//! post-processing SVD, and k-means on the singular-value-weighted
//! embedding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuiltError, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::linalg::{self, Matrix, SvdTriple, Vector};
use crate::metrics::LabelVector;
use crate::ordering::{
    is_feasible, order_exhaustive, order_given, order_greedy, OrderingResult, ScoreFunction,
    DEFAULT_EXHAUSTIVE_CAP,
};
use crate::patches::{overlap_with_mask, PatchSet};

/// Largest `p * n` for which the explicit post-processing route is allowed.
pub const EXPLICIT_PRODUCT_LIMIT: usize = 1_000_000;

/// Non-fatal conditions recorded while merging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuiltWarning {
    /// Fewer shared samples than the rank; the merge transform came from a
    /// minimum-norm pseudo-inverse solution.
    UnderdeterminedOverlap {
        step: usize,
        patch: usize,
        overlap: usize,
        rank: usize,
    },
}

/// Stitched factors `H~` (p x r) and `V~` (n x r) with merge provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuiltState {
    pub h_tilde: Matrix,
    pub v_tilde: Matrix,
    pub filled_samples: Vec<bool>,
    pub filled_features: Vec<bool>,
    /// `G_m` for every merge step, in ordering order (first patch has none).
    pub transforms: Vec<Matrix>,
    pub warnings: Vec<QuiltWarning>,
}

impl QuiltState {
    pub fn rank(&self) -> usize {
        self.h_tilde.ncols()
    }

    pub fn is_complete(&self) -> bool {
        self.filled_samples.iter().all(|&f| f) && self.filled_features.iter().all(|&f| f)
    }

    /// `H~ V~^T`.
    pub fn product(&self) -> Matrix {
        &self.h_tilde * self.v_tilde.transpose()
    }
}

fn check_ordering(ps: &PatchSet, pi: &[usize]) -> Result<()> {
    let m = ps.len();
    let mut seen = vec![false; m];
    if pi.len() != m || pi.iter().any(|&k| k >= m || std::mem::replace(&mut seen[k], true)) {
        return Err(QuiltError::InvalidInput(format!("ordering {pi:?} is not a permutation of 0..{m}")));
    }
    Ok(())
}

/// Run the patchwise SVD and the sequential merge along `pi`.
pub fn quilt_factors(ps: &PatchSet, pi: &[usize], rank: usize) -> Result<QuiltState> {
    check_ordering(ps, pi)?;
    let max = ps.max_rank();
    if rank == 0 || rank > max {
        return Err(QuiltError::InvalidRank { rank, max });
    }

    let svds: Vec<SvdTriple> = pi
        .par_iter()
        .map(|&k| linalg::truncated_svd(&ps.patch(k).data, rank))
        .collect::<Result<_>>()?;

    let mut state = QuiltState {
        h_tilde: Matrix::zeros(ps.p(), rank),
        v_tilde: Matrix::zeros(ps.n(), rank),
        filled_samples: vec![false; ps.n()],
        filled_features: vec![false; ps.p()],
        transforms: Vec::with_capacity(pi.len().saturating_sub(1)),
        warnings: Vec::new(),
    };

    let first = ps.patch(pi[0]);
    let h_first = svds[0].scaled_u();
    for (j, &s) in first.samples.iter().enumerate() {
        state.v_tilde.set_row(s, &svds[0].v.row(j));
        state.filled_samples[s] = true;
    }
    for (a, &f) in first.features.iter().enumerate() {
        state.h_tilde.set_row(f, &h_first.row(a));
        state.filled_features[f] = true;
    }

    for (step, (&k, svd)) in pi.iter().zip(&svds).enumerate().skip(1) {
        let patch = ps.patch(k);
        let overlap = overlap_with_mask(ps, k, &state.filled_samples);
        if overlap.is_empty() {
            return Err(QuiltError::EmptyOverlap { step, patch: k });
        }
        if overlap.len() < rank {
            log::warn!("patch {k} at step {step}: overlap of {} samples is below rank {rank}", overlap.len());
            state.warnings.push(QuiltWarning::UnderdeterminedOverlap {
                step,
                patch: k,
                overlap: overlap.len(),
                rank,
            });
        }

        let z = linalg::select_rows(&svd.v, &overlap.local);
        let y = linalg::select_rows(&state.v_tilde, &overlap.global);
        let g = linalg::least_squares_transform(&z, &y)?;
        let g_t_inv = linalg::invert_square(&g.transpose()).map_err(|e| match e {
            QuiltError::SingularMatrix { condition } => QuiltError::SingularTransform { step, patch: k, condition },
            other => other,
        })?;

        // Overlap rows keep the value written by earlier patches.
        for (j, &s) in patch.samples.iter().enumerate() {
            if !state.filled_samples[s] {
                let row = svd.v.row(j) * &g;
                state.v_tilde.set_row(s, &row);
            }
        }
        for &s in &patch.samples {
            state.filled_samples[s] = true;
        }

        let h = svd.scaled_u() * g_t_inv;
        for (a, &f) in patch.features.iter().enumerate() {
            state.h_tilde.set_row(f, &h.row(a));
            state.filled_features[f] = true;
        }
        state.transforms.push(g);
    }
    Ok(state)
}

/// How the rank-r SVD of `H~ V~^T` is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostprocessRoute {
    /// Thin QR of both factors followed by an r x r core SVD.
    #[default]
    Factored,
    /// SVD of the materialized p x n product.
    Explicit,
}

/// Rank-r SVD of `H~ V~^T`, returned with the usual sign convention.
pub fn postprocess(state: &QuiltState, route: PostprocessRoute) -> Result<SvdTriple> {
    if !state.is_complete() {
        return Err(QuiltError::InvalidInput("quilt state has unmerged samples or features".into()));
    }
    let r = state.rank();
    match route {
        PostprocessRoute::Explicit => {
            let (p, n) = (state.h_tilde.nrows(), state.v_tilde.nrows());
            if p * n > EXPLICIT_PRODUCT_LIMIT {
                return Err(QuiltError::InvalidInput(format!(
                    "explicit post-processing of a {p}x{n} product exceeds the {EXPLICIT_PRODUCT_LIMIT}-entry limit"
                )));
            }
            linalg::truncated_svd(&state.product(), r)
        }
        PostprocessRoute::Factored => {
            let (qh, rh) = linalg::thin_qr(&state.h_tilde);
            let (qv, rv) = linalg::thin_qr(&state.v_tilde);
            let core = rh * rv.transpose();
            let small = linalg::full_svd(&core)?;
            let u = qh * small.u;
            let v = qv * small.v;
            let sigma: Vec<f64> = small.sigma.iter().copied().collect();
            Ok(linalg::canonicalize(&u, &sigma, &v))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "permutation", rename_all = "snake_case")]
pub enum OrderingMode {
    Exhaustive,
    Greedy,
    Given(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Size,
    Snr,
}

impl ScoreKind {
    pub fn with_rank(self, rank: usize) -> ScoreFunction {
        match self {
            ScoreKind::Size => ScoreFunction::OverlapSize,
            ScoreKind::Snr => ScoreFunction::Snr { rank },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuiltConfig {
    pub rank: usize,
    pub clusters: usize,
    pub ordering: OrderingMode,
    pub score: ScoreKind,
    pub exhaustive_cap: usize,
    pub kmeans: KMeansConfig,
    pub postprocess: PostprocessRoute,
}

impl QuiltConfig {
    pub fn new(rank: usize, clusters: usize) -> Self {
        QuiltConfig {
            rank,
            clusters,
            ordering: OrderingMode::Exhaustive,
            score: ScoreKind::Size,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            kmeans: KMeansConfig::default(),
            postprocess: PostprocessRoute::Factored,
        }
    }
}

/// Choose the patch ordering requested by `cfg`.
pub fn choose_ordering(ps: &PatchSet, cfg: &QuiltConfig) -> Result<OrderingResult> {
    let sf = cfg.score.with_rank(cfg.rank);
    match &cfg.ordering {
        OrderingMode::Exhaustive => order_exhaustive(ps, sf, cfg.exhaustive_cap),
        OrderingMode::Greedy => order_greedy(ps, sf),
        OrderingMode::Given(pi) => order_given(ps, sf, pi),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuiltResult {
    pub u_hat: Matrix,
    pub lambda_hat: Vector,
    pub v_hat: Matrix,
    pub labels: LabelVector,
    /// Cluster means in feature space, `p x K` (`U_hat c_j`).
    pub centroids: Matrix,
    /// `diag(lambda_hat) V_hat^T`, `r x n`; k-means runs on its columns.
    pub embedding: Matrix,
    /// k-means centers in embedding space, `r x K`.
    pub centers: Matrix,
    pub kmeans_objective: f64,
    pub ordering: OrderingResult,
    pub factors: QuiltState,
}

impl QuiltResult {
    pub fn warnings(&self) -> &[QuiltWarning] {
        &self.factors.warnings
    }

    pub fn rank(&self) -> usize {
        self.lambda_hat.len()
    }
}

/// Embedding `diag(lambda) V^T` from a post-processed SVD.
pub fn embedding(svd: &SvdTriple) -> Matrix {
    let mut e = svd.v.transpose();
    for (j, s) in svd.sigma.iter().enumerate() {
        e.row_mut(j).scale_mut(*s);
    }
    e
}

/// Ordering, quilting, post-processing and k-means in one call.
pub fn cluster_quilting(ps: &PatchSet, cfg: &QuiltConfig) -> Result<QuiltResult> {
    if cfg.clusters == 0 || cfg.clusters > ps.n() {
        return Err(QuiltError::InvalidInput(format!(
            "cluster count {} must lie in 1..={}",
            cfg.clusters,
            ps.n()
        )));
    }
    let ordering = choose_ordering(ps, cfg)?;
    debug_assert!(is_feasible(ps, &ordering.pi));
    let factors = quilt_factors(ps, &ordering.pi, cfg.rank)?;
    let svd = postprocess(&factors, cfg.postprocess)?;
    let embedding = embedding(&svd);
    let km = kmeans(&embedding, cfg.clusters, &cfg.kmeans)?;
    let centroids = &svd.u * &km.centers;
    Ok(QuiltResult {
        u_hat: svd.u,
        lambda_hat: svd.sigma,
        v_hat: svd.v,
        labels: km.labels,
        centroids,
        embedding,
        centers: km.centers,
        kmeans_objective: km.objective,
        ordering,
        factors,
    })
}

/// `U_hat diag(lambda_hat) V_hat^T`, the stitched low-rank estimate of the
/// full `p x n` matrix.
pub fn impute_matrix(result: &QuiltResult) -> Matrix {
    let mut scaled = result.u_hat.clone();
    for (j, s) in result.lambda_hat.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    scaled * result.v_hat.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::adjusted_rand_index;
    use crate::patches::Patch;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).norm() / b.norm()
    }

    /// Rank-r signal with `k` distinct columns (clusters) repeated over samples.
    fn clustered_signal(p: usize, n: usize, k: usize, r: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = Matrix::from_fn(p, r, |_, _| rng.random_range(-1.0..1.0));
        let coef = Matrix::from_fn(r, k, |_, _| rng.random_range(-3.0..3.0));
        let centroids = basis * coef;
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let x = Matrix::from_fn(p, n, |f, s| centroids[(f, labels[s])]);
        (x, labels)
    }

    #[test]
    fn single_patch_matches_truncated_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(6, 9, |_, _| rng.random_range(-1.0..1.0));
        let ps = PatchSet::from_full(&x, &[((0..6).collect(), (0..9).collect())]).unwrap();
        let state = quilt_factors(&ps, &[0], 2).unwrap();
        let best = linalg::truncated_svd(&x, 2).unwrap().reconstruct();
        assert_relative_eq!(state.product(), best, epsilon = 1e-12);
        assert!(state.transforms.is_empty());
    }

    #[test]
    fn two_patch_rank_one_exact_recovery() {
        let u = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let v = Vector::from_vec(vec![2.0, 1.0, -1.0, 0.5, 4.0, -3.0]);
        let x = &u * v.transpose();
        let layout = vec![(vec![0, 1], vec![0, 1, 2, 3]), (vec![2, 3], vec![2, 3, 4, 5])];
        let ps = PatchSet::from_full(&x, &layout).unwrap();
        let state = quilt_factors(&ps, &[0, 1], 1).unwrap();
        assert!(rel_err(&state.product(), &x) <= 1e-8);
        assert!(state.warnings.is_empty());
    }

    #[test]
    fn noiseless_three_patch_recovery_and_overlap_consistency() {
        let (x, labels) = clustered_signal(12, 30, 3, 2, 8);
        let layout = vec![
            ((0..4).collect(), (0..14).collect()),
            ((4..8).collect(), (10..24).collect()),
            ((8..12).collect(), (20..30).collect()),
        ];
        let ps = PatchSet::from_full(&x, &layout).unwrap();
        let state = quilt_factors(&ps, &[0, 1, 2], 2).unwrap();
        assert!(rel_err(&state.product(), &x) <= 1e-8);

        // The merge transform reproduces the stitched overlap rows exactly.
        for (step, &k) in [1usize, 2].iter().enumerate() {
            let svd = linalg::truncated_svd(&ps.patch(k).data, 2).unwrap();
            let ov = crate::patches::overlap_sets(&ps, &[0, 1, 2], k).unwrap();
            assert_eq!(ov.len(), 4);
            let lhs = linalg::select_rows(&svd.v, &ov.local) * &state.transforms[step];
            let rhs = linalg::select_rows(&state.v_tilde, &ov.global);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-9);
        }

        let cfg = QuiltConfig::new(2, 3);
        let res = cluster_quilting(&ps, &cfg).unwrap();
        let truth = LabelVector::new(labels, 3).unwrap();
        assert_eq!(adjusted_rand_index(&res.labels, &truth).unwrap(), 1.0);
        assert!(rel_err(&impute_matrix(&res), &x) <= 1e-8);
    }

    #[test]
    fn unfilled_rows_stay_zero_until_merged() {
        let (x, _) = clustered_signal(6, 12, 3, 2, 1);
        let layout = vec![((0..3).collect(), (0..8).collect()), ((3..6).collect(), (4..12).collect())];
        let ps = PatchSet::from_full(&x, &layout).unwrap();
        let state = quilt_factors(&ps, &[0], 2);
        assert!(state.is_err(), "ordering must cover every patch");
        let state = quilt_factors(&ps, &[1, 0], 2).unwrap();
        assert!(state.is_complete());
    }

    #[test]
    fn empty_overlap_and_rank_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::from_fn(4, 8, |_, _| rng.random_range(-1.0..1.0));
        let layout = vec![
            (vec![0, 1], vec![0, 1, 2, 3]),
            (vec![2], vec![4, 5, 6, 7]),
            (vec![3], vec![3, 4]),
        ];
        let ps = PatchSet::from_full(&x, &layout).unwrap();
        assert!(matches!(quilt_factors(&ps, &[0, 1, 2], 1), Err(QuiltError::EmptyOverlap { step: 1, patch: 1 })));
        assert!(matches!(quilt_factors(&ps, &[0, 2, 1], 2), Err(QuiltError::InvalidRank { .. })));
    }

    #[test]
    fn small_overlap_warns() {
        let (x, _) = clustered_signal(6, 12, 3, 2, 2);
        let layout = vec![((0..3).collect(), (0..7).collect()), ((3..6).collect(), (6..12).collect())];
        let ps = PatchSet::from_full(&x, &layout).unwrap();
        let state = quilt_factors(&ps, &[0, 1], 2);
        match state {
            Ok(s) => assert_eq!(
                s.warnings,
                vec![QuiltWarning::UnderdeterminedOverlap { step: 1, patch: 1, overlap: 1, rank: 2 }]
            ),
            Err(QuiltError::SingularTransform { step: 1, patch: 1, .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn singular_transform_names_patch() {
        // Patch 1's overlap rows of V_hat are zero in the second direction,
        // so G has a zero column.
        let a = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = Matrix::from_row_slice(2, 3, &[0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let ps = PatchSet::new(
            5,
            4,
            vec![
                Patch::new(vec![0, 1], vec![0, 1, 2], a),
                Patch::new(vec![2, 3], vec![2, 3, 4], b),
            ],
        )
        .unwrap();
        assert!(matches!(
            quilt_factors(&ps, &[0, 1], 2),
            Err(QuiltError::SingularTransform { step: 1, patch: 1, .. })
        ));
    }

    #[test]
    fn postprocess_examples() {
        let mut e1 = Matrix::zeros(3, 1);
        e1[(0, 0)] = 1.0;
        let mut f1 = Matrix::zeros(4, 1);
        f1[(0, 0)] = 1.0;
        let state = QuiltState {
            h_tilde: e1.clone(),
            v_tilde: f1.clone(),
            filled_samples: vec![true; 4],
            filled_features: vec![true; 3],
            transforms: Vec::new(),
            warnings: Vec::new(),
        };
        let svd = postprocess(&state, PostprocessRoute::Factored).unwrap();
        assert_relative_eq!(svd.sigma[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(svd.u, e1, epsilon = 1e-14);
        assert_relative_eq!(svd.v, f1, epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (qh, _) = linalg::thin_qr(&Matrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0)));
        let (qv, _) = linalg::thin_qr(&Matrix::from_fn(9, 3, |_, _| rng.random_range(-1.0..1.0)));
        let state = QuiltState {
            h_tilde: qh,
            v_tilde: qv,
            filled_samples: vec![true; 9],
            filled_features: vec![true; 7],
            transforms: Vec::new(),
            warnings: Vec::new(),
        };
        let svd = postprocess(&state, PostprocessRoute::Factored).unwrap();
        for s in svd.sigma.iter() {
            assert_relative_eq!(*s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn factored_route_matches_explicit_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let state = QuiltState {
            h_tilde: Matrix::from_fn(30, 3, |_, _| rng.random_range(-1.0..1.0)),
            v_tilde: Matrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0)),
            filled_samples: vec![true; 40],
            filled_features: vec![true; 30],
            transforms: Vec::new(),
            warnings: Vec::new(),
        };
        let factored = postprocess(&state, PostprocessRoute::Factored).unwrap();
        let explicit = postprocess(&state, PostprocessRoute::Explicit).unwrap();
        let gap = (&factored.sigma - &explicit.sigma).amax();
        assert!(gap <= 1e-10, "{} vs {}", factored.sigma, explicit.sigma);
        assert_relative_eq!(factored.u, explicit.u, epsilon = 1e-8);
        assert_relative_eq!(factored.v, explicit.v, epsilon = 1e-8);
    }

    #[test]
    fn identical_samples_single_cluster() {
        let col = Vector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let x = Matrix::from_fn(4, 6, |f, _| col[f]);
        let layout = vec![((0..2).collect(), (0..4).collect()), ((2..4).collect(), (2..6).collect())];
        let ps = PatchSet::from_full(&x, &layout).unwrap();
        let res = cluster_quilting(&ps, &QuiltConfig::new(1, 1)).unwrap();
        assert!(res.labels.labels().iter().all(|&l| l == 0));
        assert_relative_eq!(res.centroids.column(0).into_owned(), col, epsilon = 1e-10);
    }

    #[test]
    fn scaling_and_sample_permutation_invariance() {
        let (mut x, _) = clustered_signal(9, 24, 3, 2, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        x += Matrix::from_fn(9, 24, |_, _| rng.random_range(-0.05..0.05));
        let layout = vec![((0..3).collect(), (0..12).collect()), ((3..9).collect(), (8..24).collect())];
        let ps = PatchSet::from_full(&x, &layout).unwrap();
        let cfg = QuiltConfig::new(2, 3);
        let base = cluster_quilting(&ps, &cfg).unwrap();

        let scaled = PatchSet::from_full(&(&x * 3.5), &layout).unwrap();
        let res = cluster_quilting(&scaled, &cfg).unwrap();
        assert_relative_eq!(res.factors.product(), base.factors.product() * 3.5, epsilon = 1e-9);
        assert_eq!(adjusted_rand_index(&res.labels, &base.labels).unwrap(), 1.0);

        // Reverse the sample order; patch sample sets map accordingly.
        let n = 24;
        let rev = |s: usize| n - 1 - s;
        let xr = Matrix::from_fn(9, n, |f, s| x[(f, rev(s))]);
        let layout_r: Vec<_> = layout
            .iter()
            .map(|(t, i)| {
                let mut ids: Vec<usize> = i.iter().map(|&s| rev(s)).collect();
                ids.sort_unstable();
                (t.clone(), ids)
            })
            .collect();
        let psr = PatchSet::from_full(&xr, &layout_r).unwrap();
        let resr = cluster_quilting(&psr, &cfg).unwrap();
        let back: Vec<usize> = (0..n).map(|s| resr.labels.labels()[rev(s)]).collect();
        let back = LabelVector::new(back, 3).unwrap();
        assert_eq!(adjusted_rand_index(&back, &base.labels).unwrap(), 1.0);
        for s in 0..n {
            let a = base.factors.v_tilde.row(s).norm();
            let b = resr.factors.v_tilde.row(rev(s)).norm();
            assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn rejects_bad_cluster_counts() {
        let (x, _) = clustered_signal(4, 6, 2, 1, 0);
        let ps = PatchSet::from_full(&x, &[((0..4).collect(), (0..6).collect())]).unwrap();
        assert!(cluster_quilting(&ps, &QuiltConfig::new(1, 7)).is_err());
        assert!(cluster_quilting(&ps, &QuiltConfig::new(1, 0)).is_err());
    }
}
