//! Splitting, optimisation, training and evaluation.

mod adam;
mod eval;
mod metrics;
mod split;
mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use eval::{
    compare, comparison_csv, evaluate, view_set_name, ComparisonRow, EvalCase, EvalConfig, EvalReport, EvalRow, VolumePredictor,
    COMPARISON_HEADER, EVAL_HEADER,
};
pub use metrics::{iou_values, percent_diff, thresholded_iou};
pub use split::{split_dataset, SplitAssignment, DEFAULT_SPLIT};
pub use train::{
    epoch_row, mean_iou, sample_gradients, saturated_wrong, train, train_from, EpochMetrics, Metrics, Sample, TrainConfig, TrainState, METRICS_HEADER,
};

/// Mean voxel binary cross-entropy of plain tensors (predictions clamped to `[1e-7, 1 − 1e-7]`).
pub fn bce_loss(pred: &crate::tensor::Tensor, gt: &crate::tensor::Tensor) -> crate::Result<f64> {
    let mut g = crate::tensor::Graph::new();
    let p = g.constant(pred.clone());
    let l = g.bce(p, gt)?;
    Ok(g.value(l).item())
}
