use cardiorecon::reconnet::{
    context_fusion, decode, encode, forward, fuse_views_efficient, refine, report_complexity, Family, Model, ModelConfig, ModelParams, Tier,
};
use cardiorecon::tensor::{Graph, Tensor, Var};
use cardiorecon::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn images(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Tensor::uniform(&[1, cfg.image_size[0], cfg.image_size[1]], 0.0, 1.0, &mut rng)).collect()
}

fn setup(cfg: &ModelConfig, imgs: &[Tensor]) -> (Graph, cardiorecon::reconnet::BoundParams, Vec<Var>) {
    let params = ModelParams::init(cfg).unwrap();
    let mut g = Graph::new();
    let p = params.bind(&mut g, false);
    let xs = imgs.iter().map(|t| g.constant(t.clone())).collect();
    (g, p, xs)
}

#[test]
fn encode_shapes_and_weight_sharing() {
    let cfg = ModelConfig::preset(Family::Baseline, Tier::Fast, 2, 16).unwrap();
    let imgs = images(&cfg, 2, 1);
    let (mut g, p, xs) = setup(&cfg, &imgs);
    let l = encode(&mut g, &cfg, &p, &xs).unwrap();
    assert_eq!(g.shape(l[0]), g.shape(l[1]));
    assert_eq!(g.shape(l[0]), &cfg.latent);
    let [h, w] = cfg.encoder_out_dims();
    assert_eq!(cfg.encoder_widths.last().unwrap() * h * w, cfg.latent.iter().product::<usize>());
    let swapped = encode(&mut g, &cfg, &p, &[xs[1], xs[0]]).unwrap();
    assert_eq!(g.value(swapped[0]), g.value(l[1]));
    assert_eq!(g.value(swapped[1]), g.value(l[0]));
    let bad = g.constant(Tensor::zeros(&[1, 32, 32]));
    assert!(matches!(encode(&mut g, &cfg, &p, &[bad]), Err(Error::ShapeMismatch(_))));
}

#[test]
fn view_fusion_identity_shape_and_selection() {
    let cfg = ModelConfig::preset(Family::Efficient, Tier::Fast, 1, 16).unwrap();
    let (mut g, p, _) = setup(&cfg, &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lat = g.constant(Tensor::uniform(&cfg.latent, -1.0, 1.0, &mut rng));
    let fused = fuse_views_efficient(&mut g, &cfg, &p, &[lat]).unwrap();
    assert_eq!(g.value(fused), g.value(lat));

    let mut cfg4 = ModelConfig::preset(Family::Efficient, Tier::Fast, 4, 16).unwrap();
    cfg4.encoder_widths = vec![8, 16, 8];
    cfg4.latent = [8, 4, 4, 4];
    cfg4.validate().unwrap();
    let (mut g, p, _) = setup(&cfg4, &[]);
    let lats: Vec<Var> = (0..4).map(|_| g.constant(Tensor::uniform(&cfg4.latent, -1.0, 1.0, &mut rng))).collect();
    let fused = fuse_views_efficient(&mut g, &cfg4, &p, &lats).unwrap();
    assert_eq!(g.shape(fused), &cfg4.latent);
    assert!(matches!(fuse_views_efficient(&mut g, &cfg4, &p, &lats[..3]), Err(Error::ViewCountMismatch { expected: 4, got: 3 })));

    // depth-slice weights (1, 0, 0, 0) on the diagonal centre tap pick the first view
    let c = cfg4.latent[0];
    let mut w = Tensor::zeros(&[c, c, 4, 3, 3]);
    for ch in 0..c {
        w.data_mut()[(((ch * c + ch) * 4) * 3 + 1) * 3 + 1] = 1.0;
    }
    let mut params = ModelParams::init(&cfg4).unwrap();
    params.tensors.insert("viewfuse/weight".into(), w);
    let p = params.bind(&mut g, false);
    let sel = fuse_views_efficient(&mut g, &cfg4, &p, &lats).unwrap();
    assert_eq!(g.value(sel), g.value(lats[0]));
    let perm = fuse_views_efficient(&mut g, &cfg4, &p, &[lats[1], lats[0], lats[2], lats[3]]).unwrap();
    assert_ne!(g.value(perm), g.value(sel));
}

#[test]
fn decode_shape_range_determinism() {
    let cfg = ModelConfig::preset(Family::Efficient, Tier::Fast, 1, 16).unwrap();
    assert_eq!(cfg.latent[1], 4);
    assert_eq!(cfg.decoder_widths.len(), 2);
    let (mut g, p, _) = setup(&cfg, &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lat = g.constant(Tensor::uniform(&cfg.latent, -2.0, 2.0, &mut rng));
    let a = decode(&mut g, &cfg, &p, lat).unwrap();
    let b = decode(&mut g, &cfg, &p, lat).unwrap();
    assert_eq!(g.shape(a.volume), &[1, 16, 16, 16]);
    assert!(g.value(a.volume).data().iter().all(|&v| v > 0.0 && v < 1.0));
    assert_eq!(g.value(a.volume), g.value(b.volume));
    let wrong = g.constant(Tensor::zeros(&[2, 3, 3, 3]));
    assert!(matches!(decode(&mut g, &cfg, &p, wrong), Err(Error::ShapeMismatch(_))));
}

#[test]
fn context_fusion_examples() {
    let mut g = Graph::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vols: Vec<Var> = (0..3).map(|_| g.constant(Tensor::uniform(&[1, 4, 4, 4], 0.0, 1.0, &mut rng))).collect();
    let scores: Vec<Var> = (0..3).map(|_| g.constant(Tensor::uniform(&[1, 4, 4, 4], -3.0, 3.0, &mut rng))).collect();
    let one = context_fusion(&mut g, &vols[..1], &scores[..1]).unwrap();
    assert_eq!(g.value(one), g.value(vols[0]));

    let flat = g.constant(Tensor::full(&[1, 4, 4, 4], 0.3));
    let mean = context_fusion(&mut g, &vols, &[flat, flat, flat]).unwrap();
    for i in 0..64 {
        let m = (0..3).map(|k| g.value(vols[k]).data()[i]).sum::<f64>() / 3.0;
        assert!((g.value(mean).data()[i] - m).abs() < 1e-15);
    }

    let hi = g.constant(Tensor::full(&[1, 4, 4, 4], 10.0));
    let lo = g.constant(Tensor::full(&[1, 4, 4, 4], -10.0));
    let pick = context_fusion(&mut g, &vols[..2], &[hi, lo]).unwrap();
    assert!(g.value(pick).max_abs_diff(g.value(vols[0])) < 1e-8);
    assert!(context_fusion(&mut g, &vols[..2], &[hi]).is_err());
}

#[test]
fn refiner_identity_at_init_and_disabled_for_fast() {
    let cfg = ModelConfig::preset(Family::Efficient, Tier::Accurate, 1, 8).unwrap();
    let (mut g, p, _) = setup(&cfg, &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = g.constant(Tensor::uniform(&[1, 8, 8, 8], 0.01, 0.99, &mut rng));
    let out = refine(&mut g, &cfg, &p, v).unwrap();
    assert!(g.value(out).max_abs_diff(g.value(v)) < 1e-12);
    assert!(g.value(out).data().iter().all(|&x| x > 0.0 && x < 1.0));
    let fast = ModelConfig::preset(Family::Efficient, Tier::Fast, 1, 8).unwrap();
    assert!(matches!(refine(&mut g, &fast, &p, v), Err(Error::RefinerDisabled)));
}

#[test]
fn forward_contracts() {
    let cfg = ModelConfig::preset(Family::Efficient, Tier::Fast, 2, 16).unwrap();
    let out = Model::new(cfg.clone()).unwrap().predict(&images(&cfg, 2, 6)).unwrap();
    assert_eq!(out.shape(), &[16, 16, 16]);

    // baseline with one view is exactly its decoder
    let b1 = ModelConfig::preset(Family::Baseline, Tier::Fast, 1, 16).unwrap();
    let imgs = images(&b1, 1, 7);
    let (mut g, p, xs) = setup(&b1, &imgs);
    let full = forward(&mut g, &b1, &p, &xs).unwrap();
    let lat = encode(&mut g, &b1, &p, &xs).unwrap();
    let dec = decode(&mut g, &b1, &p, lat[0]).unwrap();
    assert_eq!(g.value(full).data(), g.value(dec.volume).data());

    for v in [1, 2, 4, 8] {
        let c = ModelConfig::preset(Family::Efficient, Tier::Accurate, v, 16).unwrap();
        let out = Model::new(c.clone()).unwrap().predict(&images(&c, v, 8)).unwrap();
        assert_eq!(out.shape(), &[16, 16, 16]);
    }
}

#[test]
fn baseline_permutation_equivariant_under_equal_scores() {
    let cfg = ModelConfig::preset(Family::Baseline, Tier::Fast, 3, 8).unwrap();
    let mut params = ModelParams::init(&cfg).unwrap();
    let sw = params.tensors.get_mut("scorer/weight").unwrap();
    sw.data_mut().iter_mut().for_each(|v| *v = 0.0);
    let m = Model::from_parts(cfg.clone(), params).unwrap();
    let imgs = images(&cfg, 3, 9);
    let a = m.predict(&imgs).unwrap();
    let b = m.predict(&[imgs[2].clone(), imgs[0].clone(), imgs[1].clone()]).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-14);
}

fn naive_multiplies(rec: &cardiorecon::tensor::ConvRecord) -> u64 {
    let g = &rec.geometry;
    let mut n = 0u64;
    if rec.transposed {
        // scatter: every input element (the adjoint's output side) through every tap
        for _ in 0..g.c_out * g.out_len() {
            for _ in 0..g.c_in * g.kernel_len() {
                n += 1;
            }
        }
    } else {
        for _ in 0..g.c_out * g.out_len() {
            for _ in 0..g.c_in {
                for _ in 0..g.kernel_len() {
                    n += 1;
                }
            }
        }
    }
    n
}

#[test]
fn complexity_report_matches_executed_forward() {
    for family in [Family::Baseline, Family::Efficient] {
        for tier in [Tier::Fast, Tier::Accurate] {
            let cfg = ModelConfig::preset(family, tier, 2, 16).unwrap();
            assert_eq!(cfg.latent[0], 2);
            let imgs = images(&cfg, 2, 10);
            let (mut g, p, xs) = setup(&cfg, &imgs);
            forward(&mut g, &cfg, &p, &xs).unwrap();
            let counted: u64 = g.conv_records().iter().map(naive_multiplies).sum();
            let rep = report_complexity(&cfg).unwrap();
            assert_eq!(rep.total.macs, counted, "{family}/{tier}");
            assert_eq!(g.total_conv_macs(), counted);
        }
    }
}

#[test]
fn complexity_view_scaling() {
    for tier in [Tier::Fast, Tier::Accurate] {
        let e = |v| report_complexity(&ModelConfig::preset(Family::Efficient, tier, v, 64).unwrap()).unwrap();
        let b = |v| report_complexity(&ModelConfig::preset(Family::Baseline, tier, v, 64).unwrap()).unwrap();
        let (e1, e8, b1, b8) = (e(1), e(8), b(1), b(8));
        assert_eq!(e1.decoder.macs + e1.refiner.macs, e8.decoder.macs + e8.refiner.macs);
        assert_eq!(b8.decoder.macs, 8 * b1.decoder.macs);
        assert_eq!(e8.encoder.macs, 8 * e1.encoder.macs);
        assert_eq!(b8.encoder.macs, 8 * b1.encoder.macs);
        for v in [2, 4, 8] {
            assert!(e(v).total.params < b(v).total.params, "{tier} V={v}");
            assert_eq!(e(v).decoder.params, e1.decoder.params);
        }
        let slope_e = (e8.total.macs - e1.total.macs) as f64 / 7.0;
        let slope_b = (b8.total.macs - b1.total.macs) as f64 / 7.0;
        assert!(slope_e < slope_b);
    }
}
