use crate::error::{Error, Result};
use crate::geometry::VoxelGrid;

/// `|[p ≥ t] ∧ g| / |[p ≥ t] ∨ g|` over flat arrays; 1.0 when both sets are empty.
/// Ground-truth voxels count as occupied when ≥ 0.5.
pub fn iou_values(pred: &[f64], gt: &[f64], t: f64) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!("prediction has {} voxels, ground truth {}", pred.len(), gt.len())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        let (b, g) = (p >= t, g >= 0.5);
        inter += (b && g) as usize;
        union += (b || g) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

pub fn thresholded_iou(pred: &VoxelGrid, gt: &VoxelGrid, t: f64) -> Result<f64> {
    if pred.dims != gt.dims {
        return Err(Error::ShapeMismatch(format!("grid dims {:?} vs {:?}", pred.dims, gt.dims)));
    }
    iou_values(&pred.values, &gt.values, t)
}

/// `100 · (a − b) / b`.
pub fn percent_diff(a: f64, b: f64) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(100.0 * (a - b) / b)
}
