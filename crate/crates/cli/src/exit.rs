use quilt_core::QuiltError;
use serde_json::json;

/// Stable process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SINGULAR: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Core(QuiltError),
    Usage(String),
}

impl From<QuiltError> for CliError {
    fn from(e: QuiltError) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

pub fn exit_code(e: &CliError) -> i32 {
    use QuiltError::*;
    match e {
        CliError::Usage(_) => EXIT_INVALID,
        CliError::Core(core) => match core {
            InvalidRank { .. } | InvalidInput(_) | InvalidConfig(_) | InvalidPatchSet { .. } | Parse { .. } | SizeCap { .. } => {
                EXIT_INVALID
            }
            NoFeasibleOrdering
            | InfeasibleOrdering(_)
            | EmptyIntersection { .. }
            | EmptyOverlap { .. }
            | SplitInfeasible { .. } => EXIT_INFEASIBLE,
            SingularTransform { .. } | SingularMatrix { .. } | DegeneratePatch { .. } => EXIT_SINGULAR,
            GenerationFailure { .. } | Io { .. } => EXIT_FAILURE,
        },
    }
}

/// Short machine-readable name for an error.
pub fn error_kind(e: &CliError) -> &'static str {
    use QuiltError::*;
    match e {
        CliError::Usage(_) => "usage",
        CliError::Core(core) => match core {
            InvalidRank { .. } => "invalid_rank",
            InvalidInput(_) => "invalid_input",
            InvalidConfig(_) => "invalid_config",
            InvalidPatchSet { .. } => "invalid_patch_set",
            NoFeasibleOrdering => "no_feasible_ordering",
            InfeasibleOrdering(_) => "infeasible_ordering",
            SizeCap { .. } => "size_cap",
            EmptyIntersection { .. } => "empty_intersection",
            EmptyOverlap { .. } => "empty_overlap",
            SingularTransform { .. } => "singular_transform",
            SingularMatrix { .. } => "singular_matrix",
            DegeneratePatch { .. } => "degenerate_patch",
            GenerationFailure { .. } => "generation_failure",
            SplitInfeasible { .. } => "split_infeasible",
            Io { .. } => "io",
            Parse { .. } => "parse",
        },
    }
}

/// One JSON line for stderr.
pub fn error_json(e: &CliError) -> String {
    let mut value = json!({
        "error": error_kind(e),
        "exit_code": exit_code(e),
        "message": e.to_string(),
    });
    if let CliError::Core(QuiltError::SingularTransform { step, patch, condition }) = e {
        value["patch"] = json!(patch);
        value["step"] = json!(step);
        value["condition"] = json!(condition);
    }
    value.to_string()
}
