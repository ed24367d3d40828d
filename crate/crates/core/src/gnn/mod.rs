//! Graph convolutional network with hand-written backpropagation.

pub mod checkpoint;
mod model;
mod prune;
mod train;

pub use model::{
    accuracy, cross_entropy, swish, Activation, ForwardPass, GnnLayer, GnnModel, Gradients,
    Regularization,
};
pub use prune::{
    plan_for, prune_pipeline, prune_pipeline_with_hooks, shrink_model, PlanSource, PruneConfig,
    PruneOutcome,
};
pub use train::{
    evaluate, sgd_step, train, train_with_hooks, EpochHook, EpochMetrics, Evaluation,
    MetricHistory, SpectraLog, SpectraRecord, TrainConfig, TrainOutcome, Velocity, SPECTRA_TOP_K,
};
