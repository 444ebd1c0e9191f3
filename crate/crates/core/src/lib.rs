//! Extreme-aware greenhouse temperature forecasting.
//!
//! The toolkit trains regressors that stay sharp on rare extreme
//! temperatures instead of optimizing average error. Its parts:
//!
//! - [`loss`]: a band-weighted asymmetric squared error with exact first
//!   and second derivatives, pluggable into any trainer.
//! - [`pipeline`]: sensor CSV ingestion, cleaning, 10-minute aggregation,
//!   window reconstruction and month-based splitting.
//! - [`gbdt`]: from-scratch histogram gradient-boosted trees with a
//!   second-order custom objective.
//! - [`mlp`]: a small feed-forward network trained with Adam through the
//!   same objective.
//! - [`metrics`]: per-band MAE, mean bias, extreme recall and
//!   difference-distribution statistics.
//! - [`synth`]: a seeded synthetic greenhouse data generator for
//!   reproducible desk-scale experiments.
//!
//! Everything is deterministic given a seed; see [`seed`] for how
//! randomness is fanned out.

pub mod gbdt;
pub mod loss;
pub mod metrics;
pub mod mlp;
pub mod model_file;
pub mod pipeline;
pub mod seed;
pub mod synth;
#[cfg(feature = "testutil")]
pub mod testutil;

pub use gbdt::{GbdtModel, GbdtParams};
pub use loss::{
    classify_band, compute_extreme_weights, mean_loss, sample_grad_hess, sample_loss, total_loss,
    Band, GradHess, ImprovedLoss, LossConfig, LossError, Objective, SquaredError,
};
pub use metrics::{diff_distribution, evaluate, ConfusionCounts, EvalReport};
pub use mlp::{MlpModel, MlpParams};
pub use pipeline::{
    aggregate, build_windows, clean, ingest_csv, split_by_month, CleanParams, CleanReport,
    EnvRecord, PipelineError, SplitDataset, WindowSample, FEATURE_LEN,
};
pub use synth::{generate, SynthConfig, SynthManifest};
