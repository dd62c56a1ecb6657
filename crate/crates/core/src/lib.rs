//! Clustering of partially observed data matrices by quilting patchwise
//! low-rank factorizations.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod ordering;
pub mod patches;
pub mod quilting;
pub mod simgen;
pub mod tuning;

pub use error::{QuiltError, Result};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};
pub use linalg::{Matrix, SvdTriple, Vector};
pub use metrics::{adjusted_rand_index, align_labels, misclustering_rate, LabelVector};
pub use ordering::{order_exhaustive, order_given, order_greedy, OrderingMethod, OrderingResult, ScoreFunction};
pub use patches::{ObservationGraph, Overlap, Patch, PatchSet};
pub use quilting::{
    cluster_quilting, impute_matrix, postprocess, quilt_factors, OrderingMode, PostprocessRoute, QuiltConfig,
    QuiltResult, QuiltState, QuiltWarning, ScoreKind,
};
pub use simgen::{simulate, Copula, MaskPattern, MixtureGroundTruth, NoiseModel, SimConfig, Simulation};
pub use tuning::{tune, tune_with, Classifier, ClassifierKind, NearestCentroid, TuneCell, TuneGrid, TuneResult};
