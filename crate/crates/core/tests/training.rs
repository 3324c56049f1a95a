use std::collections::BTreeMap;

use cardiorecon::reconnet::{Family, Model, ModelConfig, Tier};
use cardiorecon::tensor::Tensor;
use cardiorecon::training::{
    adam_step, adam_update, bce_loss, compare, comparison_csv, evaluate, iou_values, split_dataset, train, train_from, AdamConfig,
    AdamState, EvalCase, EvalConfig, Sample, TrainConfig, TrainState, VolumePredictor, DEFAULT_SPLIT,
};
use cardiorecon::viewgen::StandardView;
use cardiorecon::{Error, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn samples(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = cfg.resolution();
    (0..n)
        .map(|_| Sample {
            images: (0..cfg.num_views).map(|_| Tensor::uniform(&[1, 64, 64], 0.0, 1.0, &mut rng)).collect(),
            target: Tensor::new(vec![r, r, r], (0..r * r * r).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect()).unwrap(),
        })
        .collect()
}

fn tiny() -> ModelConfig {
    ModelConfig::preset(Family::Efficient, Tier::Fast, 2, 8).unwrap().with_seed(11)
}

#[test]
fn split_is_stable_disjoint_and_covering() {
    let a = split_dataset(1000, DEFAULT_SPLIT, 42).unwrap();
    assert_eq!((a.train.len(), a.val.len(), a.test.len()), (700, 150, 150));
    assert_eq!(a, split_dataset(1000, DEFAULT_SPLIT, 42).unwrap());
    let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..1000).collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn split_property(n in 7usize..400, seed in any::<u64>()) {
        let s = split_dataset(n, DEFAULT_SPLIT, seed).unwrap();
        prop_assert_eq!(s.train.len(), (0.7 * n as f64 + 1e-9).floor() as usize);
        prop_assert_eq!(s.val.len(), (0.15 * n as f64 + 1e-9).floor() as usize);
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), n);
    }

    #[test]
    fn iou_symmetric_and_monotone(bits_a in proptest::collection::vec(any::<bool>(), 27), bits_b in proptest::collection::vec(any::<bool>(), 27), extra in 0usize..27) {
        let a: Vec<f64> = bits_a.iter().map(|&b| b as u8 as f64).collect();
        let b: Vec<f64> = bits_b.iter().map(|&b| b as u8 as f64).collect();
        let ab = iou_values(&a, &b, 0.5).unwrap();
        prop_assert_eq!(ab, iou_values(&b, &a, 0.5).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        // adding a voxel to both sets grows the intersection and cannot lower IoU
        let (mut a2, mut b2) = (a.clone(), b.clone());
        a2[extra] = 1.0;
        b2[extra] = 1.0;
        prop_assert!(iou_values(&a2, &b2, 0.5).unwrap() >= ab);
    }
}

#[test]
fn adam_reaches_lr_under_constant_gradient() {
    let cfg = AdamConfig { lr: 0.01, ..Default::default() };
    let (mut th, mut m, mut v) = ([0.0], [0.0], [0.0]);
    let mut prev = 0.0;
    let mut step = 0.0;
    for t in 1..=1000 {
        adam_update(&mut th, &[0.37], &mut m, &mut v, t, &cfg);
        step = prev - th[0];
        prev = th[0];
    }
    assert!((step - cfg.lr).abs() < 1e-9 * cfg.lr.max(1.0) + 1e-10, "{step}");
}

#[test]
fn adam_without_momentum_is_scaled_sgd() {
    let eps = 1e8;
    let cfg = AdamConfig { lr: 0.5, beta1: 0.0, beta2: 0.0, epsilon: eps };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut theta = vec![1.0; 10];
    let (mut m, mut v) = (vec![0.0; 10], vec![0.0; 10]);
    adam_update(&mut theta, &g, &mut m, &mut v, 1, &cfg);
    for (t, gi) in theta.iter().zip(&g) {
        let sgd = 1.0 - cfg.lr / eps * gi;
        assert!((t - sgd).abs() <= 1e-15 + (cfg.lr / eps) * gi.abs() * (gi.abs() / eps) * 2.0, "{t} vs {sgd}");
    }
    // and with zero state the map-level step leaves zero-gradient params alone
    let mut params = BTreeMap::from([("a".to_string(), Tensor::full(&[2], 3.0))]);
    adam_step(&mut params, &BTreeMap::new(), &mut AdamState::default(), 1, &AdamConfig::default()).unwrap();
    assert_eq!(params["a"].data(), &[3.0, 3.0]);
}

#[test]
fn bce_examples() {
    let gt = Tensor::new(vec![2, 2, 2], vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
    assert!((bce_loss(&Tensor::full(&[2, 2, 2], 0.5), &gt).unwrap() - 0.693147).abs() < 1e-6);
    assert!((bce_loss(&gt, &gt).unwrap() - 1e-7).abs() < 1e-12);
    assert!(matches!(bce_loss(&Tensor::full(&[8], 0.5), &gt), Err(Error::ShapeMismatch(_))));
}

#[test]
fn training_is_deterministic_and_resumable() {
    let cfg = tiny();
    let data = samples(&cfg, 5, 2);
    let tc = TrainConfig { epochs: 4, batch_size: 2, learning_rate: 3e-3, seed: 5, ..Default::default() };
    let (p1, m1) = train(&cfg, &tc, &data[..4], &data[4..]).unwrap();
    let (p2, m2) = train(&cfg, &tc, &data[..4], &data[4..]).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(p1.to_checkpoint().to_bytes().unwrap(), p2.to_checkpoint().to_bytes().unwrap());
    assert_eq!(m1.epochs.len(), 4);
    assert!(m1.epochs.iter().all(|e| e.train_loss.is_finite() && e.val_iou.is_some()));

    // two epochs, round-trip through a checkpoint, then two more
    let mut st = TrainState::fresh(&cfg).unwrap();
    let half = TrainConfig { epochs: 2, ..tc.clone() };
    let first = train_from(&cfg, &half, &mut st, &data[..4], &data[4..], |_, _| Ok(())).unwrap();
    let bytes = st.to_checkpoint().to_bytes().unwrap();
    let ck = cardiorecon::tensor::checkpoint::Checkpoint::from_reader(&bytes[..]).unwrap();
    let mut resumed = TrainState::from_checkpoint(&ck, &cfg).unwrap();
    assert_eq!(resumed, st);
    let rest = train_from(&cfg, &tc, &mut resumed, &data[..4], &data[4..], |_, _| Ok(())).unwrap();
    assert_eq!(rest.epochs.first().map(|e| e.epoch), Some(3));
    let joined: Vec<_> = first.epochs.into_iter().chain(rest.epochs).collect();
    assert_eq!(joined, m1.epochs);
    assert_eq!(resumed.params, p1);
}

#[test]
fn absurd_learning_rate_diverges() {
    let cfg = tiny();
    let data = samples(&cfg, 4, 3);
    let tc = TrainConfig { epochs: 20, learning_rate: 1e3, ..Default::default() };
    match train(&cfg, &tc, &data, &[]) {
        Err(Error::NonFiniteLoss { epoch, step, loss }) => {
            assert!(epoch >= 1 && step >= 1 && !loss.is_finite());
        }
        other => panic!("expected NonFiniteLoss, got {:?}", other.map(|(_, m)| m)),
    }
}

struct Oracle<'a>(&'a [EvalCase]);

impl VolumePredictor for Oracle<'_> {
    fn predict(&self, images: &[Tensor]) -> Result<Tensor> {
        // identify the case by its first image
        let c = self.0.iter().find(|c| c.views.values().any(|v| Some(v) == images.first())).expect("known case");
        Ok(c.target.clone())
    }
}

struct Constant(f64, usize);

impl VolumePredictor for Constant {
    fn predict(&self, _: &[Tensor]) -> Result<Tensor> {
        Ok(Tensor::full(&[self.1; 3], self.0))
    }
}

fn eval_cases(n: usize) -> Vec<EvalCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    (0..n)
        .map(|i| EvalCase {
            id: format!("c{i}"),
            views: BTreeMap::from([
                (StandardView::A2c, Tensor::uniform(&[1, 4, 4], 0.0, 1.0, &mut rng)),
                (StandardView::A4c, Tensor::uniform(&[1, 4, 4], 0.0, 1.0, &mut rng)),
            ]),
            target: Tensor::new(vec![4, 4, 4], (0..64).map(|_| if rng.gen_bool(0.25) { 1.0 } else { 0.0 }).collect()).unwrap(),
        })
        .collect()
}

#[test]
fn evaluate_with_stubs() {
    let cases = eval_cases(5);
    let sets = vec![vec![StandardView::A2c], vec![StandardView::A4c], vec![StandardView::A2c, StandardView::A4c]];
    let cfg = EvalConfig { thresholds: vec![0.2, 0.3, 0.4], ..Default::default() };
    let perfect = evaluate("oracle", &Oracle(&cases), &cases, &sets[..1], &cfg).unwrap();
    assert_eq!(perfect.rows.len(), 3);
    assert!(perfect.rows.iter().all(|r| r.iou == 1.0));

    let half = evaluate("half", &Constant(0.5, 4), &cases, &sets, &EvalConfig::default()).unwrap();
    assert_eq!(half.rows.len(), 3);
    // brute force: everything predicted occupied, so IoU = |gt| / 64 per case
    let expect = cases.iter().map(|c| c.target.data().iter().filter(|&&v| v == 1.0).count() as f64 / 64.0).sum::<f64>() / 5.0;
    for r in &half.rows {
        assert!((r.iou - expect).abs() < 1e-15);
        assert_eq!(r.threshold, 0.3);
    }
    assert!(matches!(
        evaluate("x", &Constant(0.5, 4), &cases, &[vec![StandardView::Plax]], &EvalConfig::default()),
        Err(Error::EmptyTestSet(s)) if s == "PLAX"
    ));

    let rows = compare(&perfect, &half, 0.3).unwrap();
    let csv = comparison_csv(&rows);
    assert!(csv.starts_with("method,views,iou,pct_diff\noracle,A2C,1.000000000,\n"));
    let half_a2c = rows.iter().find(|r| r.method == "half" && r.views == "A2C").unwrap();
    assert!((half_a2c.pct_diff.unwrap() - 100.0 * (expect - 1.0)).abs() < 1e-9);
    assert!(rows.iter().any(|r| r.views == "A4C" && r.pct_diff.is_none()));
}

#[test]
fn model_is_a_predictor() {
    let cfg = tiny();
    let m = Model::new(cfg.clone()).unwrap();
    let s = samples(&cfg, 1, 4).remove(0);
    let case = EvalCase {
        id: "a".into(),
        views: BTreeMap::from([(StandardView::A2c, s.images[0].clone()), (StandardView::A4c, s.images[1].clone())]),
        target: s.target.clone(),
    };
    let rep = evaluate("m", &m, &[case], &[vec![StandardView::A2c, StandardView::A4c]], &EvalConfig::default()).unwrap();
    assert!((0.0..=1.0).contains(&rep.rows[0].iou));
}
