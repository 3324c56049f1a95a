use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates, keyed like the parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
}

/// One bias-corrected Adam update of a flat parameter slice at step `t ≥ 1`.
pub fn adam_update(theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) {
    let b1t = 1.0 - cfg.beta1.powf(t as f64);
    let b2t = 1.0 - cfg.beta2.powf(t as f64);
    for i in 0..theta.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let mh = m[i] / b1t;
        let vh = v[i] / b2t;
        theta[i] -= cfg.lr * mh / (vh.sqrt() + cfg.epsilon);
    }
}

/// Updates every parameter in place. A parameter without a gradient entry
/// is updated with a zero gradient (its moments still decay).
pub fn adam_step(
    params: &mut BTreeMap<String, Tensor>,
    grads: &BTreeMap<String, Tensor>,
    state: &mut AdamState,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidParams("Adam step counter starts at 1".into()));
    }
    for (name, p) in params.iter_mut() {
        let zero;
        let g = match grads.get(name) {
            Some(g) => g,
            None => {
                zero = Tensor::zeros(p.shape());
                &zero
            }
        };
        let m = state.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(p.shape()));
        let v = state.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(p.shape()));
        if g.shape() != p.shape() || m.shape() != p.shape() || v.shape() != p.shape() {
            return Err(Error::ShapeMismatch(format!("Adam state for {name} does not match parameter shape {:?}", p.shape())));
        }
        adam_update(p.data_mut(), g.data(), m.data_mut(), v.data_mut(), t, cfg);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_hand_value() {
        let cfg = AdamConfig { lr: 0.1, ..Default::default() };
        let (mut th, mut m, mut v) = ([0.0], [0.0], [0.0]);
        adam_update(&mut th, &[1.0], &mut m, &mut v, 1, &cfg);
        assert!((th[0] - -0.1 / (1.0 + 1e-8)).abs() < 1e-17);
        assert!((th[0] - -0.0999999990).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_fixed_point() {
        let mut params = BTreeMap::from([("w".to_string(), Tensor::full(&[3], 0.7))]);
        let before = params.clone();
        let grads = BTreeMap::from([("w".to_string(), Tensor::zeros(&[3]))]);
        let mut st = AdamState::default();
        adam_step(&mut params, &grads, &mut st, 1, &AdamConfig::default()).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn shape_mismatch() {
        let mut params = BTreeMap::from([("w".to_string(), Tensor::full(&[3], 0.7))]);
        let grads = BTreeMap::from([("w".to_string(), Tensor::zeros(&[2]))]);
        let r = adam_step(&mut params, &grads, &mut AdamState::default(), 1, &AdamConfig::default());
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }
}
