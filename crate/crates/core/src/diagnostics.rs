//! Theory-side quantities for a patch layout: overlap signal proportions,
//! block heterogeneity constants, the misclustering bound with its constant
//! set to 1, the assumption checks behind it, and the oracle-versus-data
//! ordering comparison.

use serde::{Deserialize, Serialize};

use crate::error::{QuiltError, Result};
use crate::linalg::{self, Matrix};
use crate::ordering::{order_exhaustive, ScoreFunction, DEFAULT_EXHAUSTIVE_CAP, SNR_SCORE_INFLATION};
use crate::patches::{overlap_sets, PatchSet};
use crate::simgen::MixtureGroundTruth;

/// Median absolute deviation to standard deviation for Gaussian data.
pub const MAD_SCALE: f64 = 0.674_489_750_196_081_7;

/// Per-step overlap signal proportions for an ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    /// `gamma` for steps `1..M` (0-based), so `values[m - 1]` belongs to `pi[m]`.
    pub values: Vec<f64>,
    /// Whether any value was clamped into `[0, 1]`.
    pub clamped: bool,
}

impl Gamma {
    pub fn min(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }

    pub fn merge_factor(&self) -> f64 {
        merge_factor(&self.values)
    }
}

/// `prod_l (1.1 / gamma_l + 1)`, infinite when some `gamma_l = 0`.
pub fn merge_factor(gammas: &[f64]) -> f64 {
    gammas
        .iter()
        .map(|&g| if g > 0.0 { SNR_SCORE_INFLATION / g + 1.0 } else { f64::INFINITY })
        .product()
}

/// `gamma_m = sigma_r(X[T, J1]) / ||X[T, I]||` along `pi`, using whatever
/// data `ps` carries (observed patches, or the signal for the oracle value).
pub fn compute_gamma(ps: &PatchSet, pi: &[usize], r: usize) -> Result<Gamma> {
    if r == 0 {
        return Err(QuiltError::InvalidRank { rank: 0, max: ps.max_rank() });
    }
    let mut values = Vec::with_capacity(pi.len().saturating_sub(1));
    let mut clamped = false;
    for step in 1..pi.len() {
        let k = pi[step];
        let overlap = overlap_sets(ps, pi, step)?;
        if overlap.is_empty() {
            return Err(QuiltError::InfeasibleOrdering(format!(
                "patch {k} at step {step} shares no samples with earlier patches"
            )));
        }
        let patch = ps.patch(k);
        let norm = linalg::spectral_norm(&patch.data)?;
        if norm == 0.0 {
            return Err(QuiltError::DegeneratePatch { patch: k, detail: "all-zero patch".into() });
        }
        let sr = linalg::rth_singular_value_or_zero(&patch.columns(&overlap.local), r)?;
        let g = sr / norm;
        if !(0.0..=1.0).contains(&g) {
            clamped = true;
        }
        values.push(g.clamp(0.0, 1.0));
    }
    Ok(Gamma { values, clamped })
}

/// [`compute_gamma`] on the noiseless signal `X*` restricted to the layout.
pub fn compute_gamma_oracle(gt: &MixtureGroundTruth, ps: &PatchSet, pi: &[usize], r: usize) -> Result<Gamma> {
    compute_gamma(&ps.with_data_from(&gt.x_star())?, pi, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heterogeneity {
    pub alpha_max: f64,
    pub beta_max: f64,
    pub beta_min: f64,
}

impl Heterogeneity {
    /// `alpha_max (beta_max + 1) / beta_min^2`.
    pub fn factor(&self) -> f64 {
        self.alpha_max * (self.beta_max + 1.0) / (self.beta_min * self.beta_min)
    }
}

/// `alpha_max`, `beta_max`, `beta_min` from exact SVDs of the full signal
/// and of every signal block, with `B_m = L* U*[T_m]^T U_m L_m^-1`.
pub fn compute_heterogeneity(signal: &Matrix, ps: &PatchSet, r: usize) -> Result<Heterogeneity> {
    let global = linalg::truncated_svd(signal, r)?;
    if global.sigma[r - 1] == 0.0 {
        return Err(QuiltError::DegeneratePatch {
            patch: 0,
            detail: format!("signal has rank below {r}"),
        });
    }
    let m = ps.len();
    let mut bs = Vec::with_capacity(m);
    let mut norms = Vec::with_capacity(m);
    let mut floors = Vec::with_capacity(m);
    for (idx, patch) in ps.patches().iter().enumerate() {
        let block = linalg::submatrix(signal, &patch.features, &patch.samples);
        let svd = linalg::truncated_svd(&block, r)?;
        let sr = svd.sigma[r - 1];
        if sr == 0.0 {
            return Err(QuiltError::DegeneratePatch {
                patch: idx,
                detail: format!("signal block has rank below {r}"),
            });
        }
        let u_t = linalg::select_rows(&global.u, &patch.features);
        let mut b = Matrix::from_diagonal(&global.sigma) * u_t.transpose() * &svd.u;
        for (j, s) in svd.sigma.iter().enumerate() {
            b.column_mut(j).unscale_mut(*s);
        }
        bs.push(b);
        norms.push(svd.sigma[0]);
        floors.push(sr);
    }
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    let min_floor = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let mut beta_max: f64 = 0.0;
    let mut beta_min = f64::INFINITY;
    for (a, ba) in bs.iter().enumerate() {
        let inv = linalg::invert_square(ba).map_err(|_| QuiltError::DegeneratePatch {
            patch: a,
            detail: "matching matrix is singular".into(),
        })?;
        for bb in &bs {
            let prod = &inv * bb;
            let sv = linalg::full_svd(&prod)?;
            beta_max = beta_max.max(sv.sigma[0]);
            beta_min = beta_min.min(sv.sigma[r - 1]);
        }
    }
    Ok(Heterogeneity { alpha_max: max_norm / min_floor, beta_max, beta_min })
}

/// One inequality with both sides, `holds = lhs >= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl AssumptionCheck {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        AssumptionCheck { name: name.into(), lhs, rhs, holds: lhs >= rhs }
    }

    /// `lhs / rhs`; at least 1 exactly when the check holds.
    pub fn margin(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// A bound value, reported as vacuous when it cannot say anything about a
/// rate in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum BoundValue {
    Value(f64),
    Vacuous(f64),
}

impl BoundValue {
    fn from_raw(v: f64) -> Self {
        if v < 1.0 {
            BoundValue::Value(v)
        } else {
            BoundValue::Vacuous(v)
        }
    }

    pub fn raw(&self) -> f64 {
        match *self {
            BoundValue::Value(v) | BoundValue::Vacuous(v) => v,
        }
    }

    pub fn is_vacuous(&self) -> bool {
        matches!(self, BoundValue::Vacuous(_))
    }
}

/// Misclustering bound (absolute constant set to 1) and the conditions it
/// rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: BoundValue,
    /// Same bound written with per-block separations `Delta_m`.
    pub separation_bound: BoundValue,
    pub b_factor: f64,
    pub merge_factor: f64,
    pub heterogeneity: Heterogeneity,
    pub gamma: Gamma,
    /// `||E_m|| / sigma_r(X*_m)` per patch.
    pub noise_to_signal: Vec<f64>,
    /// Centroid regularity, block SNR per patch, and block separation per patch.
    pub assumptions: Vec<AssumptionCheck>,
    pub constant: f64,
}

fn cluster_counts_in(gt: &MixtureGroundTruth, samples: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; gt.z.k()];
    for &s in samples {
        counts[gt.z.labels()[s]] += 1;
    }
    counts
}

/// Evaluate the misclustering bound for ordering `pi` given per-patch noise
/// norms `||E[T_m, I_m]||`.
pub fn theorem1_bound(
    gt: &MixtureGroundTruth,
    ps: &PatchSet,
    pi: &[usize],
    r: usize,
    noise_norms: &[f64],
) -> Result<BoundReport> {
    if noise_norms.len() != ps.len() {
        return Err(QuiltError::InvalidInput(format!(
            "{} noise norms for {} patches",
            noise_norms.len(),
            ps.len()
        )));
    }
    if ps.n() != gt.n() || ps.p() != gt.p() {
        return Err(QuiltError::InvalidInput("ground truth and patches disagree on n or p".into()));
    }
    let signal = gt.x_star();
    let signal_ps = ps.with_data_from(&signal)?;
    let gamma = compute_gamma(&signal_ps, pi, r)?;
    let heterogeneity = compute_heterogeneity(&signal, ps, r)?;
    let merge = gamma.merge_factor();
    let b = heterogeneity.factor() * merge;

    let k = gt.z.k() as f64;
    let n = gt.n() as f64;
    let max_nj = gt.cluster_sizes.iter().copied().max().unwrap_or(0) as f64;
    let min_nj = gt.cluster_sizes.iter().copied().min().unwrap_or(0) as f64;
    let balance = r as f64 * k * max_nj / n;

    let mut ratios = Vec::with_capacity(ps.len());
    let mut floors = Vec::with_capacity(ps.len());
    for patch in signal_ps.patches() {
        let sr = linalg::rth_singular_value(&patch.data, r)?;
        floors.push(sr);
    }
    for (m, &e) in noise_norms.iter().enumerate() {
        ratios.push(if e == 0.0 { 0.0 } else { e / floors[m] });
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let bound = if worst == 0.0 { 0.0 } else { b * b * balance * worst * worst };

    // Separation form.
    let mut sep_terms = Vec::with_capacity(ps.len());
    let mut assumptions = Vec::new();
    let max_theta = (0..gt.z.k()).map(|j| gt.theta.row(j).norm()).fold(0.0, f64::max);
    assumptions.push(AssumptionCheck::new("centroid regularity: Delta >= max_j ||theta_j||", gt.delta, max_theta));
    let snr_rhs = b * (r as f64 * k * max_nj / min_nj).sqrt();
    for (m, patch) in ps.patches().iter().enumerate() {
        let e = noise_norms[m];
        let lhs = if e == 0.0 { f64::INFINITY } else { floors[m] / e };
        assumptions.push(AssumptionCheck::new(format!("block SNR, patch {m}"), lhs, snr_rhs));

        let theta_m = linalg::select_columns(&gt.theta, &patch.features);
        let svd = linalg::full_svd(&theta_m)?;
        let kappa = if r <= svd.sigma.len() && svd.sigma[r - 1] > 0.0 {
            svd.sigma[0] / svd.sigma[r - 1]
        } else {
            f64::INFINITY
        };
        let counts = cluster_counts_in(gt, &patch.samples);
        let min_njm = counts.iter().copied().min().unwrap_or(0) as f64;
        let delta_m = crate::simgen::min_separation(&gt.theta, Some(&patch.features));
        let sep_lhs = if e == 0.0 { f64::INFINITY } else { min_njm.sqrt() * delta_m / e };
        assumptions.push(AssumptionCheck::new(format!("block separation, patch {m}"), sep_lhs, snr_rhs * kappa));
        let term = if e == 0.0 { 0.0 } else { kappa * kappa * e * e / (min_njm * delta_m * delta_m) };
        sep_terms.push(term);
    }
    let sep_worst = sep_terms.iter().copied().fold(0.0, f64::max);
    let separation_bound = if sep_worst == 0.0 { 0.0 } else { 2.0 * b * b * balance * sep_worst };

    Ok(BoundReport {
        bound: BoundValue::from_raw(bound),
        separation_bound: BoundValue::from_raw(separation_bound),
        b_factor: b,
        merge_factor: merge,
        heterogeneity,
        gamma,
        noise_to_signal: ratios,
        assumptions,
        constant: 1.0,
    })
}

/// Noise level from the median absolute deviation of the rank-r residual of
/// every patch, pooled across patches.
///
/// Projecting out r directions keeps about `(p_m - r)(n_m - r) / (p_m n_m)`
/// of the noise energy, so residuals are rescaled by the inverse square root
/// of that fraction before pooling.
pub fn estimate_noise_sigma(ps: &PatchSet, r: usize) -> Result<f64> {
    let mut residuals = Vec::new();
    for patch in ps.patches() {
        let (pm, nm) = patch.data.shape();
        let rr = r.min(pm.min(nm));
        if pm == rr || nm == rr {
            continue;
        }
        let fit = linalg::truncated_svd(&patch.data, rr)?.reconstruct();
        let scale = ((pm * nm) as f64 / ((pm - rr) * (nm - rr)) as f64).sqrt();
        residuals.extend((&patch.data - fit).iter().map(|v| v * scale));
    }
    if residuals.is_empty() {
        return Ok(0.0);
    }
    let med = median(&mut residuals.clone());
    let mut dev: Vec<f64> = residuals.iter().map(|v| (v - med).abs()).collect();
    Ok(median(&mut dev) / MAD_SCALE)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Noise-norm estimates `sigma_hat (sqrt(p_m) + sqrt(n_m))`, scaled by the
/// AR(1) operator bound `1 + |rho|` when a coefficient is supplied.
pub fn estimate_noise_norms(ps: &PatchSet, r: usize, rho: Option<f64>) -> Result<Vec<f64>> {
    let sigma = estimate_noise_sigma(ps, r)?;
    let dep = ar1_operator_bound(rho.unwrap_or(0.0));
    Ok(ps
        .patches()
        .iter()
        .map(|pt| sigma * dep * ((pt.features.len() as f64).sqrt() + (pt.samples.len() as f64).sqrt()))
        .collect())
}

/// `||A_r|| <= 1 + |rho|` for AR(1) feature noise.
pub fn ar1_operator_bound(rho: f64) -> f64 {
    1.0 + rho.abs()
}

/// Merge factors of the oracle ordering (built from `X*`) and of the
/// ordering chosen from the observed data, both evaluated on `X*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub oracle_pi: Vec<usize>,
    pub data_pi: Vec<usize>,
    pub oracle_factor: f64,
    pub data_factor: f64,
    pub ratio: f64,
    pub within_e_squared: bool,
}

pub fn data_driven_ordering_check(ps: &PatchSet, gt: &MixtureGroundTruth, r: usize) -> Result<OrderingCheck> {
    let signal_ps = ps.with_data_from(&gt.x_star())?;
    let sf = ScoreFunction::Snr { rank: r };
    let oracle = order_exhaustive(&signal_ps, sf, DEFAULT_EXHAUSTIVE_CAP)?;
    let data = order_exhaustive(ps, sf, DEFAULT_EXHAUSTIVE_CAP)?;
    let oracle_factor = compute_gamma(&signal_ps, &oracle.pi, r)?.merge_factor();
    let data_factor = compute_gamma(&signal_ps, &data.pi, r)?.merge_factor();
    let ratio = if data_factor == oracle_factor { 1.0 } else { data_factor / oracle_factor };
    Ok(OrderingCheck {
        oracle_pi: oracle.pi,
        data_pi: data.pi,
        oracle_factor,
        data_factor,
        ratio,
        within_e_squared: ratio <= std::f64::consts::E.powi(2),
    })
}

/// Everything `diagnose` reports for a layout and ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rank: usize,
    pub ordering: Vec<usize>,
    pub gamma_m: Vec<f64>,
    pub gamma_min: Option<f64>,
    pub gamma_clamped: bool,
    pub kappa_m: Vec<f64>,
    pub merge_factor: f64,
    pub noise_sigma: f64,
    pub snr_per_patch: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ar1_operator_bound: Option<f64>,
    /// Present when ground truth is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDiagnostics {
    pub gamma_m: Vec<f64>,
    pub bound: BoundReport,
    pub ordering_check: OrderingCheck,
}

/// Empirical diagnostics from the patches alone, plus the oracle quantities
/// when a ground truth (and its noise norms) is supplied.
pub fn diagnose(
    ps: &PatchSet,
    pi: &[usize],
    r: usize,
    rho: Option<f64>,
    truth: Option<(&MixtureGroundTruth, &[f64])>,
) -> Result<DiagnosticsReport> {
    let gamma = compute_gamma(ps, pi, r)?;
    let mut kappa_m = Vec::with_capacity(ps.len());
    let mut floors = Vec::with_capacity(ps.len());
    for patch in ps.patches() {
        let svd = linalg::truncated_svd(&patch.data, r)?;
        let sr = svd.sigma[r - 1];
        kappa_m.push(if sr > 0.0 { svd.sigma[0] / sr } else { f64::INFINITY });
        floors.push(sr);
    }
    let noise_sigma = estimate_noise_sigma(ps, r)?;
    let norms = estimate_noise_norms(ps, r, rho)?;
    let snr_per_patch = floors
        .iter()
        .zip(&norms)
        .map(|(&s, &e)| if e > 0.0 { s / e } else { f64::INFINITY })
        .collect();
    let oracle = match truth {
        Some((gt, noise_norms)) => Some(OracleDiagnostics {
            gamma_m: compute_gamma_oracle(gt, ps, pi, r)?.values,
            bound: theorem1_bound(gt, ps, pi, r, noise_norms)?,
            ordering_check: data_driven_ordering_check(ps, gt, r)?,
        }),
        None => None,
    };
    Ok(DiagnosticsReport {
        rank: r,
        ordering: pi.to_vec(),
        gamma_min: gamma.min(),
        merge_factor: gamma.merge_factor(),
        gamma_clamped: gamma.clamped,
        gamma_m: gamma.values,
        kappa_m,
        noise_sigma,
        snr_per_patch,
        ar1_operator_bound: rho.map(ar1_operator_bound),
        oracle,
    })
}

impl DiagnosticsReport {
    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("rank {}  ordering {:?}\n", self.rank, self.ordering));
        out.push_str("step  patch  gamma\n");
        for (i, g) in self.gamma_m.iter().enumerate() {
            out.push_str(&format!("{:>4}  {:>5}  {:.4}\n", i + 1, self.ordering[i + 1], g));
        }
        out.push_str(&format!("merge factor {:.4}\n", self.merge_factor));
        out.push_str(&format!("noise sigma (MAD) {:.4}\n", self.noise_sigma));
        out.push_str("patch  kappa  snr\n");
        for (m, (k, s)) in self.kappa_m.iter().zip(&self.snr_per_patch).enumerate() {
            out.push_str(&format!("{m:>5}  {k:.3}  {s:.3}\n"));
        }
        if let Some(dep) = self.ar1_operator_bound {
            out.push_str(&format!("AR(1) operator bound {dep:.3}\n"));
        }
        if let Some(o) = &self.oracle {
            let b = &o.bound;
            let show = |v: &BoundValue| match v {
                BoundValue::Value(x) => format!("{x:.4e}"),
                BoundValue::Vacuous(x) => format!("vacuous ({x:.3e})"),
            };
            out.push_str(&format!(
                "alpha_max {:.3}  beta_max {:.3}  beta_min {:.3}\n",
                b.heterogeneity.alpha_max, b.heterogeneity.beta_max, b.heterogeneity.beta_min
            ));
            out.push_str(&format!("misclustering bound (C = 1) {}\n", show(&b.bound)));
            out.push_str(&format!("separation-form bound (C = 1) {}\n", show(&b.separation_bound)));
            for a in &b.assumptions {
                out.push_str(&format!(
                    "{:<40} {}  margin {:.3e}\n",
                    a.name,
                    if a.holds { "ok  " } else { "FAIL" },
                    a.margin()
                ));
            }
            let c = &o.ordering_check;
            out.push_str(&format!(
                "oracle ordering {:?} factor {:.4}; data ordering {:?} factor {:.4}; ratio {:.4}\n",
                c.oracle_pi, c.oracle_factor, c.data_pi, c.data_factor, c.ratio
            ));
        }
        out
    }
}
