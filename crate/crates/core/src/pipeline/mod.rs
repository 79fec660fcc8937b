//! Training, prediction and evaluation over image directories.

mod dataset;
mod features;
mod metrics;
mod model_file;
mod predict;
mod train;

pub use dataset::{labelled_pairs, list_images, load_targets, pair_by_stem, TargetKind};
pub use features::{FeatureExtractor, CHUNK_ROWS};
pub use metrics::{
    evaluate, evaluate_regression, metrics_from_labels, ConfusionMatrix, EvalOptions, MetricsReport, RegressionReport,
};
pub use model_file::{
    decode_model, encode_model, load_model, save_model, Provenance, SavedModel, MODEL_MAGIC, MODEL_VERSION,
};
pub use predict::{extractor_for, output_path, predict_command, predict_image, PredictConfig};
pub use train::{derive_seed, parse_key_values, train_command, TrainConfig, TrainOutcome};
