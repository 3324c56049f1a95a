use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{iou_values, percent_diff};
use crate::error::{Error, Result};
use crate::reconnet::Model;
use crate::tensor::Tensor;
use crate::viewgen::StandardView;

/// Anything that maps input views to an `[R, R, R]` occupancy volume.
pub trait VolumePredictor: Sync {
    fn predict(&self, images: &[Tensor]) -> Result<Tensor>;
}

impl VolumePredictor for Model {
    fn predict(&self, images: &[Tensor]) -> Result<Tensor> {
        Model::predict(self, images)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Sweep; when empty only `iou_threshold` is reported.
    pub thresholds: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { iou_threshold: 0.3, thresholds: Vec::new() }
    }
}

impl EvalConfig {
    pub fn sweep(&self) -> Result<Vec<f64>> {
        let ts = if self.thresholds.is_empty() { vec![self.iou_threshold] } else { self.thresholds.clone() };
        if ts.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::InvalidParams(format!("IoU thresholds {ts:?} must lie in (0, 1)")));
        }
        Ok(ts)
    }
}

/// Test case with whatever views exist for it.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalCase {
    pub id: String,
    pub views: BTreeMap<StandardView, Tensor>,
    pub target: Tensor,
}

/// `A2C+A4C` style label.
pub fn view_set_name(views: &[StandardView]) -> String {
    views.iter().map(|v| v.name()).collect::<Vec<_>>().join("+")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub view_set: String,
    pub threshold: f64,
    /// Mean over cases.
    pub iou: f64,
    pub cases: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

pub const EVAL_HEADER: &str = "model,view_set,threshold,iou";
pub const COMPARISON_HEADER: &str = "method,views,iou,pct_diff";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{EVAL_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{:.9}\n", r.model, r.view_set, r.threshold, r.iou));
        }
        s
    }

    pub fn iou(&self, view_set: &str, threshold: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.view_set == view_set && r.threshold == threshold).map(|r| r.iou)
    }
}

/// Mean test IoU for every view subset and threshold. Only cases that carry
/// every view of a subset contribute; a subset no case carries is an error.
pub fn evaluate(
    model_name: &str,
    predictor: &dyn VolumePredictor,
    cases: &[EvalCase],
    view_sets: &[Vec<StandardView>],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let sweep = cfg.sweep()?;
    let mut report = EvalReport::default();
    for set in view_sets {
        let name = view_set_name(set);
        let usable: Vec<&EvalCase> = cases.iter().filter(|c| set.iter().all(|v| c.views.contains_key(v))).collect();
        if set.is_empty() || usable.is_empty() {
            return Err(Error::EmptyTestSet(name));
        }
        let preds = usable
            .par_iter()
            .map(|c| {
                let imgs: Vec<Tensor> = set.iter().map(|v| c.views[v].clone()).collect();
                predictor.predict(&imgs)
            })
            .collect::<Result<Vec<Tensor>>>()?;
        for &t in &sweep {
            let mut sum = 0.0;
            for (p, c) in preds.iter().zip(&usable) {
                sum += iou_values(p.data(), c.target.data(), t)?;
            }
            report.rows.push(EvalRow { model: model_name.to_string(), view_set: name.clone(), threshold: t, iou: sum / usable.len() as f64, cases: usable.len() });
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub views: String,
    pub iou: f64,
    /// Relative to the reference method; empty on reference rows.
    pub pct_diff: Option<f64>,
}

/// Reference rows then candidate rows at threshold `t`, the candidate carrying
/// `percent_diff(candidate, reference)` for every view set both report; the
/// difference is left empty when the reference IoU is zero.
pub fn compare(reference: &EvalReport, candidate: &EvalReport, t: f64) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    let at_t = |r: &EvalReport| r.rows.iter().filter(|x| x.threshold == t).cloned().collect::<Vec<_>>();
    let refs = at_t(reference);
    for r in &refs {
        rows.push(ComparisonRow { method: r.model.clone(), views: r.view_set.clone(), iou: r.iou, pct_diff: None });
    }
    for c in at_t(candidate) {
        let pct = match refs.iter().find(|r| r.view_set == c.view_set) {
            Some(r) => match percent_diff(c.iou, r.iou) {
                Ok(p) => Some(p),
                Err(Error::DivisionByZero) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        rows.push(ComparisonRow { method: c.model.clone(), views: c.view_set.clone(), iou: c.iou, pct_diff: pct });
    }
    Ok(rows)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = format!("{COMPARISON_HEADER}\n");
    for r in rows {
        let pct = r.pct_diff.map(|p| format!("{p:.3}")).unwrap_or_default();
        s.push_str(&format!("{},{},{:.9},{}\n", r.method, r.views, r.iou, pct));
    }
    s
}
