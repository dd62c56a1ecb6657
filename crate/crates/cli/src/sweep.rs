//! Replicated simulation grid over one parameter axis.

use std::fmt::Write;
use std::fs;
use std::path::Path;
use std::time::Instant;

use quilt_core::io::format_f64;
use quilt_core::{
    adjusted_rand_index, cluster_quilting, misclustering_rate, simulate, Copula, KMeansConfig, MaskPattern,
    NoiseModel, OrderingMode, QuiltConfig, QuiltError, Result, ScoreKind, SimConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::SweepArgs;
use crate::commands::{read_json, CmdResult};
use crate::exit::{error_kind, CliError};
use crate::run::RunRecorder;
use crate::svg::{line_chart, Point};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrdering {
    #[default]
    Exhaustive,
    Greedy,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: SimConfig,
    /// One of `d`, `sigma`, `rho`, `blocks`, `overlap`, `block_rows`, `n`, `p`,
    /// `clusters`, `views_per_block`, `dof`.
    pub axis: String,
    pub values: Vec<f64>,
    /// Replicate `i` uses seed `base.seed + i` at every axis value.
    #[serde(default = "one")]
    pub replicates: usize,
    /// Quilting rank; defaults to the simulated rank.
    #[serde(default)]
    pub rank: Option<usize>,
    /// Cluster count for k-means; defaults to the simulated count.
    #[serde(default)]
    pub clusters: Option<usize>,
    #[serde(default)]
    pub ordering: SweepOrdering,
    #[serde(default)]
    pub score: Option<ScoreKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub seed: u64,
    pub ari: Option<f64>,
    pub miscluster: Option<f64>,
    pub runtime_s: f64,
    /// `ok`, or `error:<kind>`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub axis_value: f64,
    pub mean_ari: f64,
    pub sd_ari: f64,
    pub mean_miscluster: f64,
    pub ok: usize,
    pub failed: usize,
}

fn bad(msg: String) -> QuiltError {
    QuiltError::InvalidConfig(msg)
}

fn as_count(axis: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(bad(format!("axis `{axis}` needs whole numbers, got {v}")))
    }
}

/// `base` with the axis parameter set to `v`.
pub fn apply_axis(base: &SimConfig, axis: &str, v: f64) -> Result<SimConfig> {
    let mut cfg = base.clone();
    match axis {
        "d" => cfg.d = v,
        "sigma" => match &mut cfg.noise {
            NoiseModel::IidGaussian { sigma } | NoiseModel::Ar1 { sigma, .. } => *sigma = v,
        },
        "rho" => cfg.noise = NoiseModel::Ar1 { rho: v, sigma: base.noise.sigma() },
        "dof" => cfg.copula = Copula::T { dof: v },
        "n" => cfg.n = as_count(axis, v)?,
        "p" => cfg.p = as_count(axis, v)?,
        "clusters" => cfg.clusters = as_count(axis, v)?,
        "blocks" => match &mut cfg.pattern {
            MaskPattern::Sequential { blocks, .. } | MaskPattern::Mosaic { blocks, .. } => *blocks = as_count(axis, v)?,
        },
        "overlap" | "block_rows" => match &mut cfg.pattern {
            MaskPattern::Sequential { block_rows, overlap, .. } => {
                let k = Some(as_count(axis, v)?);
                if axis == "overlap" {
                    (*overlap, *block_rows) = (k, None);
                } else {
                    (*overlap, *block_rows) = (None, k);
                }
            }
            MaskPattern::Mosaic { .. } => return Err(bad(format!("axis `{axis}` needs a sequential pattern"))),
        },
        "views_per_block" => match &mut cfg.pattern {
            MaskPattern::Mosaic { views_per_block, .. } => *views_per_block = as_count(axis, v)?,
            MaskPattern::Sequential { .. } => return Err(bad("axis `views_per_block` needs a mosaic pattern".into())),
        },
        other => return Err(bad(format!("unknown sweep axis `{other}`"))),
    }
    Ok(cfg)
}

impl SweepConfig {
    /// Check every grid point before anything runs.
    pub fn resolve(&self) -> Result<Vec<SimConfig>> {
        if self.values.is_empty() {
            return Err(bad("sweep needs at least one axis value".into()));
        }
        if self.replicates == 0 {
            return Err(bad("replicates must be positive".into()));
        }
        self.values
            .iter()
            .map(|&v| {
                let cfg = apply_axis(&self.base, &self.axis, v)?;
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }

    fn quilt_config(&self, sim: &SimConfig, seed: u64) -> QuiltConfig {
        QuiltConfig {
            ordering: match self.ordering {
                SweepOrdering::Exhaustive => OrderingMode::Exhaustive,
                SweepOrdering::Greedy => OrderingMode::Greedy,
            },
            score: self.score.unwrap_or(ScoreKind::Size),
            kmeans: KMeansConfig::with_seed(seed),
            ..QuiltConfig::new(self.rank.unwrap_or(sim.rank), self.clusters.unwrap_or(sim.clusters))
        }
    }
}

fn replicate(sweep: &SweepConfig, sim_cfg: &SimConfig, axis_value: f64, seed: u64) -> SweepRow {
    let start = Instant::now();
    let outcome = (|| -> Result<(f64, f64)> {
        let sim = simulate(&SimConfig { seed, ..sim_cfg.clone() })?;
        let mut qcfg = sweep.quilt_config(sim_cfg, seed);
        if matches!(qcfg.ordering, OrderingMode::Exhaustive) && sim.patches.len() > qcfg.exhaustive_cap {
            qcfg.ordering = OrderingMode::Greedy;
        }
        let res = cluster_quilting(&sim.patches, &qcfg)?;
        let k = res.labels.k().max(sim.truth.z.k());
        let (zhat, z) = (res.labels.with_k(k)?, sim.truth.z.with_k(k)?);
        Ok((adjusted_rand_index(&zhat, &z)?, misclustering_rate(&zhat, &z)?))
    })();
    let runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((ari, miscluster)) => SweepRow {
            axis_value,
            seed,
            ari: Some(ari),
            miscluster: Some(miscluster),
            runtime_s,
            status: "ok".into(),
        },
        Err(e) => {
            log::warn!("sweep {}={axis_value} seed {seed} failed: {e}", sweep.axis);
            SweepRow {
                axis_value,
                seed,
                ari: None,
                miscluster: None,
                runtime_s,
                status: format!("error:{}", error_kind(&CliError::Core(e))),
            }
        }
    }
}

/// Run every (axis value, replicate) pair; rows come back in grid order.
pub fn run_sweep(sweep: &SweepConfig) -> Result<Vec<SweepRow>> {
    let configs = sweep.resolve()?;
    let tasks: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| (0..sweep.replicates as u64).map(move |r| (i, r)))
        .collect();
    Ok(tasks
        .par_iter()
        .map(|&(i, r)| replicate(sweep, &configs[i], sweep.values[i], sweep.base.seed.wrapping_add(r)))
        .collect())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}

pub fn summarize(values: &[f64], rows: &[SweepRow]) -> Vec<SweepSummary> {
    values
        .iter()
        .map(|&v| {
            let here: Vec<&SweepRow> = rows.iter().filter(|r| r.axis_value == v).collect();
            let aris: Vec<f64> = here.iter().filter_map(|r| r.ari).collect();
            let mis: Vec<f64> = here.iter().filter_map(|r| r.miscluster).collect();
            let (mean_ari, sd_ari) = mean_sd(&aris);
            SweepSummary {
                axis_value: v,
                mean_ari,
                sd_ari,
                mean_miscluster: mean_sd(&mis).0,
                ok: aris.len(),
                failed: here.len() - aris.len(),
            }
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_else(|| "NaN".into())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("axis_value,seed,ari,miscluster,runtime_s,status\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            format_f64(r.axis_value),
            r.seed,
            opt(r.ari),
            opt(r.miscluster),
            format_f64(r.runtime_s),
            r.status
        );
    }
    s
}

pub fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let mut sweep: SweepConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        sweep.base.seed = seed;
    }
    sweep.resolve()?;
    let recorder = RunRecorder::start("sweep", sweep.base.seed);
    let rows = run_sweep(&sweep)?;
    let summary = summarize(&sweep.values, &rows);

    let out = &args.out;
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| CliError::Core(QuiltError::Io { path, source })
    };
    fs::create_dir_all(out).map_err(io_err(out))?;
    let csv_path = out.join("results.csv");
    fs::write(&csv_path, rows_to_csv(&rows)).map_err(io_err(&csv_path))?;
    quilt_core::io::write_json(&out.join("summary.json"), &summary)?;
    let points: Vec<Point> =
        summary.iter().map(|s| Point { x: s.axis_value, mean: s.mean_ari, sd: s.sd_ari }).collect();
    let title = format!("Mean ARI ± sd over {} replicates", sweep.replicates);
    let svg_path = out.join("sweep.svg");
    fs::write(&svg_path, line_chart(&title, &sweep.axis, "ARI", &points)).map_err(io_err(&svg_path))?;

    let failed: usize = summary.iter().map(|s| s.failed).sum();
    let warnings = if failed > 0 { vec![format!("{failed} replicates failed; see results.csv")] } else { Vec::new() };
    recorder.finish(out, json!({ "sweep": sweep }), warnings)
}
