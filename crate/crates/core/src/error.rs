use thiserror::Error;

/// Errors raised anywhere in the quilting pipeline.
#[derive(Debug, Error)]
pub enum QuiltError {
    #[error("invalid rank {rank}: must satisfy 1 <= rank <= {max}")]
    InvalidRank { rank: usize, max: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("patch set violates `{constraint}`: {detail}")]
    InvalidPatchSet {
        constraint: &'static str,
        detail: String,
    },

    #[error("observation graph is disconnected; no feasible patch ordering exists")]
    NoFeasibleOrdering,

    #[error("ordering is infeasible: {0}")]
    InfeasibleOrdering(String),

    #[error("exhaustive ordering supports at most {cap} patches, got {patches}; use greedy search")]
    SizeCap { patches: usize, cap: usize },

    #[error("patch {patch} shares no samples with the given sample set")]
    EmptyIntersection { patch: usize },

    #[error("patch {patch} has an empty overlap with earlier patches at merge step {step}")]
    EmptyOverlap { step: usize, patch: usize },

    #[error("merge transform for patch {patch} at step {step} is singular (condition number {condition:e})")]
    SingularTransform {
        step: usize,
        patch: usize,
        condition: f64,
    },

    #[error("matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("patch {patch} is degenerate: {detail}")]
    DegeneratePatch { patch: usize, detail: String },

    #[error("generation failed after {attempts} attempts: {detail}")]
    GenerationFailure { attempts: usize, detail: String },

    #[error("no feasible train/test split after {retries} attempts")]
    SplitInfeasible { retries: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
}

pub type Result<T, E = QuiltError> = std::result::Result<T, E>;
