//! Synthetic Gaussian mixtures with low-rank centroids, sequential and
//! mosaic observation masks, AR(1) feature noise and a t-copula transform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{QuiltError, Result};
use crate::linalg::{self, Matrix};
use crate::metrics::LabelVector;
use crate::patches::{check_connected, PatchSet};

/// Redraw budget for the centroid factor `W` and for label resampling.
pub const MAX_REDRAWS: usize = 1000;
/// Rejection-sampling budget for mosaic masks.
pub const MAX_MOSAIC_DRAWS: usize = 10_000;
/// Numerical-rank threshold relative to the top singular value.
pub const RANK_TOLERANCE: f64 = 1e-8;

const LABEL_STREAM: u64 = 0;
const CENTROID_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const MASK_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskPattern {
    /// `blocks` consecutive sample windows with contiguous feature slices.
    /// Give `block_rows`, `overlap`, or both.
    Sequential {
        blocks: usize,
        #[serde(default)]
        block_rows: Option<usize>,
        #[serde(default)]
        overlap: Option<usize>,
    },
    /// Random equal sample blocks, each observing `views_per_block` whole views.
    Mosaic {
        blocks: usize,
        views: usize,
        views_per_block: usize,
        #[serde(default)]
        features_per_view: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    IidGaussian { sigma: f64 },
    /// `E_k = rho E_{k-1} + eps_k` down the features, `eps ~ N(0, sigma^2)`.
    Ar1 { rho: f64, sigma: f64 },
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::IidGaussian { sigma: 1.0 }
    }
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::IidGaussian { sigma } | NoiseModel::Ar1 { sigma, .. } => sigma,
        }
    }

    pub fn rho(&self) -> f64 {
        match *self {
            NoiseModel::IidGaussian { .. } => 0.0,
            NoiseModel::Ar1 { rho, .. } => rho,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Copula {
    #[default]
    None,
    T { dof: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub clusters: usize,
    pub rank: usize,
    pub d: f64,
    pub pattern: MaskPattern,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub copula: Copula,
    /// Draw a separate centroid matrix for every mosaic view.
    #[serde(default)]
    pub per_view_centroids: bool,
    #[serde(default)]
    pub seed: u64,
}

fn invalid(msg: impl Into<String>) -> QuiltError {
    QuiltError::InvalidConfig(msg.into())
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let SimConfig { n, p, clusters: k, rank: r, d, .. } = *self;
        if n == 0 || p == 0 {
            return Err(invalid("n and p must be positive"));
        }
        if r == 0 || r >= k {
            return Err(invalid(format!("rank must satisfy 1 <= rank < clusters (rank {r}, clusters {k})")));
        }
        if k > n {
            return Err(invalid(format!("clusters ({k}) exceeds n ({n})")));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(invalid(format!("d must be positive and finite, got {d}")));
        }
        match self.noise {
            NoiseModel::IidGaussian { sigma } | NoiseModel::Ar1 { sigma, .. } if !(sigma.is_finite() && sigma >= 0.0) => {
                return Err(invalid(format!("noise.sigma must be non-negative, got {sigma}")));
            }
            NoiseModel::Ar1 { rho, .. } if !(rho.abs() < 1.0) => {
                return Err(invalid(format!("noise.rho must satisfy |rho| < 1, got {rho}")));
            }
            _ => {}
        }
        if let Copula::T { dof } = self.copula {
            if !(dof > 2.0) {
                return Err(invalid(format!("copula.dof must exceed 2, got {dof}")));
            }
        }
        let centroid_width = match &self.pattern {
            MaskPattern::Mosaic { views, .. } if self.per_view_centroids => {
                view_slices(p, *views, self.features_per_view())?.iter().map(|s| s.len()).min().unwrap_or(0)
            }
            MaskPattern::Sequential { .. } if self.per_view_centroids => {
                return Err(invalid("per_view_centroids requires a mosaic pattern"));
            }
            _ => p,
        };
        if k > centroid_width {
            return Err(invalid(format!(
                "clusters ({k}) exceeds the {centroid_width} features available to each centroid matrix"
            )));
        }
        match &self.pattern {
            MaskPattern::Sequential { blocks, block_rows, overlap } => {
                sequential_layout(n, p, *blocks, *block_rows, *overlap).map(|_| ())
            }
            MaskPattern::Mosaic { blocks, views, views_per_block, .. } => {
                view_slices(p, *views, self.features_per_view())?;
                check_mosaic_shape(n, *blocks, *views, *views_per_block)
            }
        }
    }

    fn features_per_view(&self) -> Option<usize> {
        match self.pattern {
            MaskPattern::Mosaic { features_per_view, .. } => features_per_view,
            MaskPattern::Sequential { .. } => None,
        }
    }
}

/// Independent generator for one stage of the simulation.
pub fn stage_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn numerical_rank(a: &Matrix) -> Result<usize> {
    let svd = linalg::full_svd(a)?;
    let top = svd.sigma.get(0).copied().unwrap_or(0.0);
    Ok(svd.sigma.iter().filter(|&&s| s > RANK_TOLERANCE * top).count())
}

/// Orthonormal `p x r` frame from the QR factorization of a Gaussian draw,
/// with columns signed so the diagonal of `R` is positive.
pub fn random_orthonormal(p: usize, r: usize, rng: &mut impl Rng) -> Matrix {
    let g = Matrix::from_fn(p, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (mut q, rr) = linalg::thin_qr(&g);
    for j in 0..r.min(q.ncols()) {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Theta = W Z^T` (`K x p`) with `W` entries uniform on `{-d, 0, d}`,
/// redrawn until `rank(W) = r`, and `Z` a random orthonormal `p x r` frame.
pub fn generate_centroids(k: usize, p: usize, r: usize, d: f64, rng: &mut impl Rng) -> Result<Matrix> {
    if r == 0 || r >= k || k > p {
        return Err(invalid(format!("centroids need 1 <= r < K <= p (r {r}, K {k}, p {p})")));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(invalid(format!("d must be positive and finite, got {d}")));
    }
    let levels = [-d, 0.0, d];
    for _ in 0..MAX_REDRAWS {
        let w = Matrix::from_fn(k, r, |_, _| levels[rng.random_range(0..3)]);
        if numerical_rank(&w)? == r {
            let z = random_orthonormal(p, r, rng);
            return Ok(w * z.transpose());
        }
    }
    Err(QuiltError::GenerationFailure {
        attempts: MAX_REDRAWS,
        detail: format!("no rank-{r} W in {{-d,0,d}}^({k}x{r})"),
    })
}

/// Smallest pairwise Euclidean distance between rows of `theta` restricted
/// to `features` (all features when `None`). Zero for a single row.
pub fn min_separation(theta: &Matrix, features: Option<&[usize]>) -> f64 {
    let k = theta.nrows();
    let cols: Vec<usize> = match features {
        Some(f) => f.to_vec(),
        None => (0..theta.ncols()).collect(),
    };
    let mut best = f64::INFINITY;
    for a in 0..k {
        for b in a + 1..k {
            let dist2: f64 = cols.iter().map(|&c| (theta[(a, c)] - theta[(b, c)]).powi(2)).sum();
            best = best.min(dist2.sqrt());
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

/// Labels, centroids and separations behind a simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureGroundTruth {
    /// Centroids as rows, `K x p`.
    pub theta: Matrix,
    pub z: LabelVector,
    pub rank: usize,
    pub d: f64,
    pub delta: f64,
    /// Separation restricted to each patch's features; filled by [`simulate`].
    pub delta_m: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
}

impl MixtureGroundTruth {
    pub fn new(theta: Matrix, z: LabelVector, rank: usize, d: f64) -> Result<Self> {
        if z.k() != theta.nrows() {
            return Err(QuiltError::InvalidInput(format!(
                "labels use {} clusters but theta has {} rows",
                z.k(),
                theta.nrows()
            )));
        }
        let delta = min_separation(&theta, None);
        let cluster_sizes = z.counts();
        Ok(MixtureGroundTruth { theta, z, rank, d, delta, delta_m: Vec::new(), cluster_sizes })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.theta.ncols()
    }

    /// `F*`, `n x K` one-hot membership.
    pub fn indicator(&self) -> Matrix {
        let mut f = Matrix::zeros(self.n(), self.z.k());
        for (i, &l) in self.z.labels().iter().enumerate() {
            f[(i, l)] = 1.0;
        }
        f
    }

    /// Noiseless signal `Theta^T F^T`, `p x n`.
    pub fn x_star(&self) -> Matrix {
        let labels = self.z.labels();
        Matrix::from_fn(self.p(), self.n(), |f, s| self.theta[(labels[s], f)])
    }

    pub fn block_separations(&self, ps: &PatchSet) -> Vec<f64> {
        ps.patches().iter().map(|pt| min_separation(&self.theta, Some(&pt.features))).collect()
    }
}

/// Apply the AR(1) recursion down each column of `base` (features are rows).
pub fn apply_ar1_noise(base: &Matrix, rho: f64) -> Result<Matrix> {
    if !(rho.abs() < 1.0) {
        return Err(QuiltError::InvalidInput(format!("AR(1) coefficient must satisfy |rho| < 1, got {rho}")));
    }
    let mut e = base.clone();
    if rho == 0.0 {
        return Ok(e);
    }
    for i in 0..e.ncols() {
        for k in 1..e.nrows() {
            e[(k, i)] += rho * e[(k - 1, i)];
        }
    }
    Ok(e)
}

/// Degrees of freedom above which the t quantile switches from the
/// incomplete-beta inversion to the Cornish-Fisher expansion.
pub const T_EXPANSION_DOF: f64 = 500.0;

/// Quantile function of the standard Student-t distribution.
///
/// The incomplete-beta inversion loses accuracy as `dof` grows because the
/// beta argument approaches 1, so large `dof` uses the fourth-order
/// Cornish-Fisher expansion around the Gaussian quantile.
pub fn student_t_quantile(u: f64, dof: f64) -> f64 {
    if dof < T_EXPANSION_DOF {
        return StudentsT::new(0.0, 1.0, dof).map(|t| t.inverse_cdf(u)).unwrap_or(f64::NAN);
    }
    let z = Normal::standard().inverse_cdf(u);
    let z2 = z * z;
    let g1 = z * (z2 + 1.0) / 4.0;
    let g2 = z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0;
    let g3 = z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0;
    let g4 = z * ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) / 92160.0;
    z + (g1 + (g2 + (g3 + g4 / dof) / dof) / dof) / dof
}

/// Map each feature's standardized values through the Gaussian CDF and the
/// Student-t quantile function with `dof` degrees of freedom.
pub fn copula_t_transform(x: &Matrix, dof: f64) -> Result<Matrix> {
    if !(dof > 2.0) {
        return Err(QuiltError::InvalidInput(format!("t copula needs dof > 2, got {dof}")));
    }
    linalg::ensure_finite(x, "matrix")?;
    let normal = Normal::standard();
    let n = x.ncols();
    let mut out = Matrix::zeros(x.nrows(), n);
    if n == 0 {
        return Ok(out);
    }
    for f in 0..x.nrows() {
        let row = x.row(f);
        let mean = row.mean();
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        let sd = var.sqrt();
        if sd == 0.0 {
            continue;
        }
        for i in 0..n {
            let u = normal.cdf((x[(f, i)] - mean) / sd);
            let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            out[(f, i)] = student_t_quantile(u, dof);
        }
    }
    Ok(out)
}

/// Split `len` items into `parts` contiguous near-equal ranges.
fn even_ranges(len: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let (base, extra) = (len / parts, len % parts);
    let mut start = 0;
    (0..parts)
        .map(|m| {
            let size = base + usize::from(m < extra);
            let r = start..start + size;
            start += size;
            r
        })
        .collect()
}

/// Feature and sample sets of the sequential design.
///
/// Block `m` covers samples `start_m .. start_m + o_m` where consecutive
/// blocks share `overlap` samples, and features are `blocks` contiguous
/// near-equal slices. When only one of `block_rows`/`overlap` is given the
/// other is derived from `n = sum_m o_m - (blocks - 1) overlap`.
pub fn sequential_layout(
    n: usize,
    p: usize,
    blocks: usize,
    block_rows: Option<usize>,
    overlap: Option<usize>,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if blocks == 0 || blocks > p || blocks > n {
        return Err(invalid(format!("sequential blocks must lie in 1..=min(n, p), got {blocks}")));
    }
    let m = blocks;
    let overlap = match (block_rows, overlap) {
        (_, _) if m == 1 => {
            if block_rows.is_some_and(|o| o != n) {
                return Err(invalid(format!("a single block must hold all {n} samples")));
            }
            0
        }
        (Some(o), ov) => {
            let total = m * o;
            if total < n || !(total - n).is_multiple_of(m - 1) {
                return Err(invalid(format!(
                    "{m} blocks of {o} rows cannot tile {n} samples with a constant overlap"
                )));
            }
            let derived = (total - n) / (m - 1);
            if ov.is_some_and(|v| v != derived) {
                return Err(invalid(format!(
                    "block_rows {o} implies overlap {derived}, but overlap {} was given",
                    ov.unwrap_or(0)
                )));
            }
            derived
        }
        (None, Some(ov)) => ov,
        (None, None) => return Err(invalid("sequential pattern needs block_rows or overlap")),
    };
    if m > 1 && overlap == 0 {
        return Err(invalid("consecutive sequential blocks must share at least one sample"));
    }
    let span = n + (m - 1) * overlap;
    let sizes: Vec<usize> = even_ranges(span, m).iter().map(|r| r.len()).collect();
    for (i, &o) in sizes.iter().enumerate() {
        // Interior blocks need room for both overlaps so only neighbours meet.
        let needed = if i == 0 || i + 1 == m { overlap + 1 } else { 2 * overlap + 1 };
        if m > 1 && o < needed {
            return Err(invalid(format!(
                "block {i} would hold {o} samples, fewer than the {needed} needed for overlap {overlap}"
            )));
        }
    }
    let features = even_ranges(p, m);
    let mut start = 0;
    let mut layout = Vec::with_capacity(m);
    for (i, &o) in sizes.iter().enumerate() {
        layout.push((features[i].clone().collect(), (start..start + o).collect()));
        start += o - overlap;
    }
    debug_assert_eq!(layout.last().map(|l: &(Vec<usize>, Vec<usize>)| *l.1.last().unwrap() + 1), Some(n));
    Ok(layout)
}

/// Restrict `x` to the sequential design.
pub fn mask_sequential(
    x: &Matrix,
    blocks: usize,
    block_rows: Option<usize>,
    overlap: Option<usize>,
) -> Result<PatchSet> {
    let layout = sequential_layout(x.ncols(), x.nrows(), blocks, block_rows, overlap)?;
    PatchSet::from_full(x, &layout)
}

fn view_slices(p: usize, views: usize, features_per_view: Option<usize>) -> Result<Vec<std::ops::Range<usize>>> {
    if views == 0 || views > p {
        return Err(invalid(format!("views must lie in 1..={p}, got {views}")));
    }
    if let Some(f) = features_per_view {
        if f * views != p {
            return Err(invalid(format!("{views} views of {f} features do not make up p = {p}")));
        }
    }
    Ok(even_ranges(p, views))
}

fn check_mosaic_shape(n: usize, blocks: usize, views: usize, h: usize) -> Result<()> {
    if blocks == 0 || blocks > n {
        return Err(invalid(format!("mosaic blocks must lie in 1..={n}, got {blocks}")));
    }
    if h == 0 || h > views {
        return Err(invalid(format!("views_per_block must lie in 1..={views}, got {h}")));
    }
    if blocks * h < views {
        return Err(invalid(format!(
            "{blocks} blocks observing {h} views each cannot cover {views} views"
        )));
    }
    Ok(())
}

/// One accepted mosaic draw before it is turned into patches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MosaicDesign {
    /// Sample ids of each block, sorted.
    pub blocks: Vec<Vec<usize>>,
    /// Views observed by each block, sorted.
    pub views: Vec<Vec<usize>>,
    /// Feature ranges of the views.
    pub view_features: Vec<Vec<usize>>,
}

impl MosaicDesign {
    /// Patches as `(features, samples)`: views observed by exactly the same
    /// set of blocks are merged into one patch whose samples are the union of
    /// those blocks, which keeps feature sets disjoint.
    pub fn layout(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for v in 0..self.view_features.len() {
            let observers: Vec<usize> = (0..self.blocks.len()).filter(|&b| self.views[b].contains(&v)).collect();
            match groups.iter_mut().find(|(obs, _)| *obs == observers) {
                Some((_, vs)) => vs.push(v),
                None => groups.push((observers, vec![v])),
            }
        }
        groups
            .into_iter()
            .map(|(observers, vs)| {
                let features: Vec<usize> = vs.iter().flat_map(|&v| self.view_features[v].iter().copied()).collect();
                let mut samples: Vec<usize> = observers.iter().flat_map(|&b| self.blocks[b].iter().copied()).collect();
                samples.sort_unstable();
                (features, samples)
            })
            .collect()
    }

    fn satisfies_constraints(&self) -> bool {
        let m = self.views.len();
        let unique = (0..m).all(|a| (a + 1..m).all(|b| self.views[a] != self.views[b]));
        let covered = (0..self.view_features.len()).all(|v| self.views.iter().any(|vs| vs.contains(&v)));
        if !(unique && covered) {
            return false;
        }
        let layout = self.layout();
        let samples: Vec<&Vec<usize>> = layout.iter().map(|(_, s)| s).collect();
        let edges = (0..samples.len())
            .flat_map(|a| (a + 1..samples.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| crate::patches::sorted_intersects(samples[a], samples[b]));
        check_connected(&crate::patches::ObservationGraph::new(samples.len(), edges))
    }
}

/// Rejection-sample a mosaic design: samples shuffled into `blocks`
/// near-equal groups, each observing `views_per_block` random views, with
/// distinct view sets, every view observed, and a connected patch graph.
pub fn draw_mosaic(
    n: usize,
    p: usize,
    blocks: usize,
    views: usize,
    views_per_block: usize,
    features_per_view: Option<usize>,
    rng: &mut impl Rng,
) -> Result<MosaicDesign> {
    let slices = view_slices(p, views, features_per_view)?;
    check_mosaic_shape(n, blocks, views, views_per_block)?;
    let view_features: Vec<Vec<usize>> = slices.into_iter().map(|r| r.collect()).collect();
    for _ in 0..MAX_MOSAIC_DRAWS {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let sample_blocks: Vec<Vec<usize>> = even_ranges(n, blocks)
            .into_iter()
            .map(|r| {
                let mut b = order[r].to_vec();
                b.sort_unstable();
                b
            })
            .collect();
        let chosen: Vec<Vec<usize>> = (0..blocks)
            .map(|_| {
                let mut v = rand::seq::index::sample(rng, views, views_per_block).into_vec();
                v.sort_unstable();
                v
            })
            .collect();
        let design = MosaicDesign { blocks: sample_blocks, views: chosen, view_features: view_features.clone() };
        if design.satisfies_constraints() {
            return Ok(design);
        }
    }
    Err(invalid(format!(
        "no mosaic draw with unique view sets, full coverage and a connected graph in {MAX_MOSAIC_DRAWS} attempts"
    )))
}

/// Restrict `x` to a freshly drawn mosaic design.
pub fn mask_mosaic(
    x: &Matrix,
    blocks: usize,
    views: usize,
    views_per_block: usize,
    rng: &mut impl Rng,
) -> Result<PatchSet> {
    let design = draw_mosaic(x.ncols(), x.nrows(), blocks, views, views_per_block, None, rng)?;
    PatchSet::from_full(x, &design.layout())
}

fn draw_labels(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

fn every_block_has_all(labels: &[usize], k: usize, layout: &[(Vec<usize>, Vec<usize>)]) -> bool {
    layout.iter().all(|(_, samples)| {
        let mut seen = vec![false; k];
        for &s in samples {
            seen[labels[s]] = true;
        }
        seen.iter().all(|&b| b)
    })
}

/// Draw labels, centroids and noise for `cfg` and return the full `p x n`
/// data matrix with its ground truth (`delta_m` left empty).
///
/// Under a sequential pattern labels are redrawn until every block contains
/// every cluster.
pub fn generate_mixture(cfg: &SimConfig) -> Result<(Matrix, MixtureGroundTruth)> {
    cfg.validate()?;
    let SimConfig { n, p, clusters: k, rank: r, d, .. } = *cfg;

    let mut rng = stage_rng(cfg.seed, LABEL_STREAM);
    let mut labels = draw_labels(n, k, &mut rng);
    if let MaskPattern::Sequential { blocks, block_rows, overlap } = cfg.pattern {
        let layout = sequential_layout(n, p, blocks, block_rows, overlap)?;
        let mut attempts = 1;
        while !every_block_has_all(&labels, k, &layout) {
            if attempts == MAX_REDRAWS {
                return Err(QuiltError::GenerationFailure {
                    attempts,
                    detail: "could not place every cluster in every sequential block".into(),
                });
            }
            labels = draw_labels(n, k, &mut rng);
            attempts += 1;
        }
    }
    let z = LabelVector::new(labels, k)?;

    let mut rng = stage_rng(cfg.seed, CENTROID_STREAM);
    let mut theta = None;
    for _ in 0..MAX_REDRAWS {
        let candidate = match &cfg.pattern {
            MaskPattern::Mosaic { views, .. } if cfg.per_view_centroids => {
                let mut full = Matrix::zeros(k, p);
                for slice in view_slices(p, *views, cfg.features_per_view())? {
                    let part = generate_centroids(k, slice.len(), r, d, &mut rng)?;
                    full.columns_mut(slice.start, slice.len()).copy_from(&part);
                }
                full
            }
            _ => generate_centroids(k, p, r, d, &mut rng)?,
        };
        // Coinciding centroids would make two clusters indistinguishable.
        if min_separation(&candidate, None) > 0.0 {
            theta = Some(candidate);
            break;
        }
    }
    let theta = theta.ok_or_else(|| QuiltError::GenerationFailure {
        attempts: MAX_REDRAWS,
        detail: "every draw had two coinciding centroids".into(),
    })?;
    let truth = MixtureGroundTruth::new(theta, z, r, d)?;

    let mut rng = stage_rng(cfg.seed, NOISE_STREAM);
    let sigma = cfg.noise.sigma();
    let base = Matrix::from_fn(p, n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    let noise = apply_ar1_noise(&base, cfg.noise.rho())?;
    let mut x = truth.x_star() + noise;
    if let Copula::T { dof } = cfg.copula {
        x = copula_t_transform(&x, dof)?;
    }
    Ok((x, truth))
}

/// A simulated data set: full matrix, its observed patches and the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub x: Matrix,
    pub patches: PatchSet,
    pub truth: MixtureGroundTruth,
}

impl Simulation {
    /// Noiseless patches `X*[T_m, I_m]` on the same layout.
    pub fn signal_patches(&self) -> Result<PatchSet> {
        self.patches.with_data_from(&self.truth.x_star())
    }

    /// `||E[T_m, I_m]||` per patch, with `E = X - X*`.
    pub fn noise_norms(&self) -> Result<Vec<f64>> {
        let e = &self.x - self.truth.x_star();
        self.patches
            .patches()
            .iter()
            .map(|pt| linalg::spectral_norm(&linalg::submatrix(&e, &pt.features, &pt.samples)))
            .collect()
    }
}

/// Generate data for `cfg` and apply its observation mask.
pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    let (x, mut truth) = generate_mixture(cfg)?;
    let patches = match cfg.pattern {
        MaskPattern::Sequential { blocks, block_rows, overlap } => mask_sequential(&x, blocks, block_rows, overlap)?,
        MaskPattern::Mosaic { blocks, views, views_per_block, features_per_view } => {
            let mut rng = stage_rng(cfg.seed, MASK_STREAM);
            let design = draw_mosaic(cfg.n, cfg.p, blocks, views, views_per_block, features_per_view, &mut rng)?;
            PatchSet::from_full(&x, &design.layout())?
        }
    };
    truth.delta_m = truth.block_separations(&patches);
    Ok(Simulation { x, patches, truth })
}
