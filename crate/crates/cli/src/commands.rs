use std::fs;
use std::path::Path;

use log::{info, warn};
use quilt_core::diagnostics::diagnose;
use quilt_core::io::{self, write_json};
use quilt_core::quilting::choose_ordering;
use quilt_core::{
    adjusted_rand_index, cluster_quilting, impute_matrix, misclustering_rate, simulate, tune, KMeansConfig,
    OrderingMode, PatchSet, QuiltConfig, QuiltError, SimConfig, TuneGrid,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::args::{DiagnoseArgs, EvaluateArgs, OrderingArg, OrderingOpts, QuiltArgs, SimulateArgs, TuneArgs};
use crate::exit::CliError;
use crate::run::RunRecorder;

pub type CmdResult = Result<(), CliError>;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|source| QuiltError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text)
        .map_err(|e| QuiltError::Parse { path: path.display().to_string(), detail: e.to_string() }.into())
}

fn create_out(out: &Path) -> CmdResult {
    fs::create_dir_all(out).map_err(|source| QuiltError::Io { path: out.display().to_string(), source })?;
    Ok(())
}

/// A permutation given inline as a JSON array, or the path of a file holding one.
pub fn parse_permutation(raw: &str) -> Result<Vec<usize>, CliError> {
    if let Ok(pi) = serde_json::from_str::<Vec<usize>>(raw) {
        return Ok(pi);
    }
    let path = Path::new(raw);
    if path.exists() {
        return read_json(path);
    }
    Err(CliError::Usage(format!("--permutation `{raw}` is neither a JSON array nor a readable file")))
}

/// Build a quilting config, falling back to greedy search when exhaustive
/// search would exceed the cap.
pub fn quilt_config(
    opts: &OrderingOpts,
    patches: usize,
    rank: usize,
    clusters: usize,
    seed: u64,
) -> Result<(QuiltConfig, Vec<String>), CliError> {
    let mut warnings = Vec::new();
    let ordering = match opts.ordering {
        OrderingArg::Exhaustive if patches > opts.exhaustive_cap => {
            let msg = format!(
                "{patches} patches exceed the exhaustive cap of {}; using greedy search",
                opts.exhaustive_cap
            );
            warn!("{msg}");
            warnings.push(msg);
            OrderingMode::Greedy
        }
        OrderingArg::Exhaustive => OrderingMode::Exhaustive,
        OrderingArg::Greedy => OrderingMode::Greedy,
        OrderingArg::Given => {
            let raw = opts
                .permutation
                .as_deref()
                .ok_or_else(|| CliError::Usage("--ordering given requires --permutation".into()))?;
            OrderingMode::Given(parse_permutation(raw)?)
        }
    };
    if opts.permutation.is_some() && opts.ordering != OrderingArg::Given {
        return Err(CliError::Usage("--permutation is only used with --ordering given".into()));
    }
    let cfg = QuiltConfig {
        ordering,
        score: opts.score.into(),
        exhaustive_cap: opts.exhaustive_cap,
        kmeans: KMeansConfig::with_seed(seed),
        ..QuiltConfig::new(rank, clusters)
    };
    Ok((cfg, warnings))
}

pub fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let mut cfg: SimConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let recorder = RunRecorder::start("simulate", cfg.seed);
    let sim = simulate(&cfg)?;
    let norms = sim.noise_norms()?;
    info!("simulated {} patches", sim.patches.len());

    create_out(&args.out)?;
    io::save_patch_set(&sim.patches, &args.out)?;
    io::save_ground_truth(&args.out, &sim.truth, &norms)?;
    write_json(&args.out.join("config.json"), &cfg)?;
    if args.emit_full {
        io::write_matrix_csv(&args.out.join("full.csv"), &sim.x)?;
    }
    let echo = json!({ "config": cfg, "emit_full": args.emit_full });
    recorder.finish(&args.out, echo, Vec::new())
}

#[derive(Debug, Serialize)]
struct QuiltReport<'a> {
    rank: usize,
    clusters: usize,
    ordering: &'a quilt_core::OrderingResult,
    singular_values: Vec<f64>,
    kmeans_objective: f64,
    warnings: &'a [quilt_core::QuiltWarning],
    notes: &'a [String],
}

pub fn cmd_quilt(args: &QuiltArgs) -> CmdResult {
    let ps = io::load_patch_set(&args.manifest)?;
    let (cfg, notes) = quilt_config(&args.ordering, ps.len(), args.rank, args.clusters, args.seed)?;
    let recorder = RunRecorder::start("quilt", args.seed);
    let result = cluster_quilting(&ps, &cfg)?;
    for w in result.warnings() {
        warn!("{w:?}");
    }

    create_out(&args.out)?;
    io::write_labels_csv(&args.out.join("labels.csv"), result.labels.labels())?;
    let report = QuiltReport {
        rank: cfg.rank,
        clusters: cfg.clusters,
        ordering: &result.ordering,
        singular_values: result.lambda_hat.iter().copied().collect(),
        kmeans_objective: result.kmeans_objective,
        warnings: result.warnings(),
        notes: &notes,
    };
    write_json(&args.out.join("result.json"), &report)?;
    if args.emit_imputed {
        io::write_matrix_csv(&args.out.join("imputed.csv"), &impute_matrix(&result))?;
    }
    let mut warnings = notes.clone();
    warnings.extend(result.warnings().iter().map(|w| format!("{w:?}")));
    let echo = json!({
        "manifest": args.manifest,
        "quilt": cfg,
        "emit_imputed": args.emit_imputed,
    });
    recorder.finish(&args.out, echo, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub ari: f64,
    pub miscluster: f64,
}

pub fn evaluate_files(a: &Path, b: &Path) -> Result<Evaluation, CliError> {
    let la = io::read_labels_csv(a)?;
    let lb = io::read_labels_csv(b)?;
    if la.len() != lb.len() {
        return Err(CliError::Usage(format!(
            "label files differ in length ({} in {}, {} in {})",
            la.len(),
            a.display(),
            lb.len(),
            b.display()
        )));
    }
    let k = la.k().max(lb.k());
    let (la, lb) = (la.with_k(k)?, lb.with_k(k)?);
    Ok(Evaluation { ari: adjusted_rand_index(&la, &lb)?, miscluster: misclustering_rate(&la, &lb)? })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    let e = evaluate_files(&args.labels_a, &args.labels_b)?;
    println!("{}", serde_json::to_string(&e).expect("plain struct serializes"));
    Ok(())
}

pub fn cmd_tune(args: &TuneArgs) -> CmdResult {
    let ps = io::load_patch_set(&args.manifest)?;
    let first = (args.ranks.first().copied().unwrap_or(1), args.clusters.first().copied().unwrap_or(2));
    let (template, notes) = quilt_config(&args.ordering, ps.len(), first.0, first.1, args.seed)?;
    let grid = TuneGrid {
        split_fraction: args.split_fraction,
        repeats: args.repeats,
        ..TuneGrid::new(args.ranks.clone(), args.clusters.clone())
    };
    let recorder = RunRecorder::start("tune", args.seed);
    let result = tune(&ps, &grid, &template, args.seed)?;

    create_out(&args.out)?;
    write_json(&args.out.join("tune.json"), &result)?;
    println!(
        "{}",
        json!({ "rank": result.rank, "clusters": result.clusters, "agreement": result.agreement })
    );
    let echo = json!({ "manifest": args.manifest, "grid": grid, "template": template });
    recorder.finish(&args.out, echo, notes)
}

fn ordering_for(ps: &PatchSet, opts: &OrderingOpts, rank: usize) -> Result<(Vec<usize>, Vec<String>), CliError> {
    let (cfg, notes) = quilt_config(opts, ps.len(), rank, 1, 0)?;
    Ok((choose_ordering(ps, &cfg)?.pi, notes))
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> CmdResult {
    let ps = io::load_patch_set(&args.manifest)?;
    let truth = args.truth.as_deref().map(io::load_ground_truth).transpose()?;
    if let Some((gt, norms)) = &truth {
        if gt.n() != ps.n() || gt.p() != ps.p() || norms.len() != ps.len() {
            return Err(CliError::Usage("ground truth does not match the patch set".into()));
        }
    }
    let (pi, notes) = ordering_for(&ps, &args.ordering, args.rank)?;
    let recorder = RunRecorder::start("diagnose", 0);
    let report = diagnose(&ps, &pi, args.rank, args.rho, truth.as_ref().map(|(gt, n)| (gt, n.as_slice())))?;

    create_out(&args.out)?;
    write_json(&args.out.join("diagnostics.json"), &report)?;
    print!("{}", report.to_table());
    let echo = json!({
        "manifest": args.manifest,
        "rank": args.rank,
        "truth": args.truth,
        "rho": args.rho,
        "ordering": pi,
    });
    recorder.finish(&args.out, echo, notes)
}
