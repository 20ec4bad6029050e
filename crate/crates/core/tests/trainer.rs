use proptest::prelude::*;
use uniproc::degrade::{apply, DegradationKind};
use uniproc::image::{save_ppm, synth::natural_image, ImageBuffer};
use uniproc::model::{encode_checkpoint, tensor_to_images, ModelConfig};
use uniproc::tensor::{Shape, Tape, Tensor};
use uniproc::train::*;

fn patches(n: usize, side: usize) -> Vec<ImageBuffer> {
    (0..n).map(|i| natural_image(side, side, 40 + i as u64)).collect()
}

fn small_cfg(kinds: Vec<DegradationKind>) -> TrainConfig {
    TrainConfig {
        model: ModelConfig::tiny(),
        patch_size: 32,
        batch_size: 2,
        epochs: 2,
        kinds,
        severity_range: (0.5, 0.5),
        ..TrainConfig::toy()
    }
}

fn mean_abs_diff(a: &Tensor<f32>, b: &Tensor<f32>) -> f64 {
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum();
    s / a.data().len() as f64
}

#[test]
fn patch_counts_follow_the_grid() {
    assert_eq!(grid_positions(928, 512, 416), vec![0, 416]);
    assert_eq!(grid_positions(1000, 512, 416), vec![0, 416, 488]);
    assert_eq!(grid_positions(512, 512, 416), vec![0]);

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    std::fs::create_dir(&src).unwrap();
    save_ppm(src.join("a.ppm"), &natural_image(512, 928, 1)).unwrap();
    save_ppm(src.join("b.ppm"), &natural_image(512, 1000, 2)).unwrap();
    save_ppm(src.join("tiny.ppm"), &natural_image(100, 100, 3)).unwrap();
    std::fs::write(src.join("junk.ppm"), b"not an image").unwrap();

    let out1 = dir.path().join("p1");
    let m = build_patches(&src, &out1, 512, 416).unwrap();
    let per_source = |s: &str| m.entries.iter().filter(|e| e.source == s).count();
    assert_eq!(per_source("a.ppm"), 2);
    assert_eq!(per_source("b.ppm"), 3);
    assert_eq!(m.entries.len(), 5);
    let xs: Vec<usize> = m.entries.iter().filter(|e| e.source == "b.ppm").map(|e| e.x).collect();
    assert_eq!(xs, vec![0, 416, 488]);

    let out2 = dir.path().join("p2");
    build_patches(&src, &out2, 512, 416).unwrap();
    let a = std::fs::read(out1.join(MANIFEST_FILE)).unwrap();
    let b = std::fs::read(out2.join(MANIFEST_FILE)).unwrap();
    assert_eq!(a, b);

    let loaded = PatchManifest::load(out1.join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded, m);
    let imgs = loaded.load_patches(&out1).unwrap();
    assert!(imgs.iter().all(|p| p.dims() == (512, 512)));
}

#[test]
fn empty_source_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = build_patches(dir.path(), &dir.path().join("out"), 512, 416).unwrap_err();
    assert!(err.to_string().contains("no usable images"), "{err}");
}

#[test]
fn clean_kind_batches_are_unchanged() {
    let mut cfg = small_cfg(vec![DegradationKind::Clean]);
    cfg.severity_range = (1.0, 1.0);
    let b = sample_batch(&patches(3, 48), &cfg, 0, 0).unwrap();
    assert_eq!(b.degraded, b.clean);
}

#[test]
fn batches_are_deterministic_and_drawn_from_sources() {
    let mut cfg = small_cfg(DegradationKind::degrading());
    cfg.batch_size = 36;
    let ps = patches(8, 40);
    let a = sample_batch(&ps, &cfg, 3, 0).unwrap();
    let b = sample_batch(&ps, &cfg, 3, 0).unwrap();
    assert_eq!(a.degraded, b.degraded);
    assert_eq!(a.clean, b.clean);
    assert_eq!(a.prompts, b.prompts);
    assert!(a.sources.iter().all(|&s| s < 8));
    let c = sample_batch(&ps, &cfg, 4, 0).unwrap();
    assert_ne!(a.clean, c.clean);
    assert_eq!(a.degraded.shape(), Shape::new(36, 3, 32, 32));
}

#[test]
fn composite_items_keep_the_second_kind_in_the_target() {
    let ps = patches(4, 48);
    let mut plain = small_cfg(vec![DegradationKind::GaussianNoise, DegradationKind::MeanShift]);
    plain.batch_size = 6;
    let mut mixed = plain.clone();
    mixed.compose_prob = 1.0;
    let a = sample_batch(&ps, &plain, 0, 0).unwrap();
    let b = sample_batch(&ps, &mixed, 0, 0).unwrap();
    assert_eq!(a.specs, b.specs);
    assert_eq!(a.prompts, b.prompts);
    let (ca, cb) = (tensor_to_images(&a.clean).unwrap(), tensor_to_images(&b.clean).unwrap());
    let db = tensor_to_images(&b.degraded).unwrap();
    for i in 0..6 {
        assert_ne!(ca[i], cb[i]);
        assert_eq!(db[i], apply(&cb[i], &b.specs[i]).unwrap());
    }

    // A single kind leaves nothing to keep.
    let mut single = plain.clone();
    single.kinds = vec![DegradationKind::GaussianNoise];
    let mut single_mixed = single.clone();
    single_mixed.compose_prob = 1.0;
    let x = sample_batch(&ps, &single, 1, 0).unwrap();
    let y = sample_batch(&ps, &single_mixed, 1, 0).unwrap();
    assert_eq!(x.clean, y.clean);
}

#[test]
fn l1_loss_examples() {
    let s = Shape::new(1, 1, 2, 3);
    let t = Tensor::from_fn(s, |i| i as f32 * 0.1);
    let mut tape = Tape::<f32>::new();
    let a = tape.constant(t.clone());
    let b = tape.constant(t.clone());
    let l = tape.l1_loss(a, b).unwrap();
    assert_eq!(tape.value(l).item(), 0.0);
    let shifted = Tensor::from_fn(s, |i| i as f32 * 0.1 + 0.5);
    let c = tape.constant(shifted);
    let l = tape.l1_loss(c, a).unwrap();
    assert!((tape.value(l).item() - 0.5).abs() < 1e-6);
    let wrong = tape.constant(Tensor::zeros(Shape::new(1, 1, 3, 2)));
    assert!(tape.l1_loss(a, wrong).is_err());
}

#[test]
fn adamw_examples() {
    let s = Shape::new(1, 1, 1, 3);
    let start = Tensor::from_fn(s, |i| 1.0 + i as f32);
    let zero = vec![Tensor::zeros(s)];

    let mut p = vec![start.clone()];
    let mut st = AdamW::init_state(&p);
    AdamW::new(0.0).step(&mut p, &zero, &mut st, 1e-3).unwrap();
    assert_eq!(p[0], start);

    let mut p = vec![start.clone()];
    let mut st = AdamW::init_state(&p);
    AdamW::new(0.1).step(&mut p, &zero, &mut st, 1e-2).unwrap();
    for (a, b) in p[0].data().iter().zip(start.data()) {
        assert!((*a as f64 - *b as f64 * (1.0 - 1e-3)).abs() < 1e-6);
    }

    let mut p = vec![start.clone()];
    let mut st = AdamW::init_state(&p);
    let g = vec![Tensor::full(s, 0.37f32)];
    AdamW::new(0.1).step(&mut p, &g, &mut st, 0.0).unwrap();
    assert_eq!(p[0], start);

    let mut p = vec![start.clone()];
    let mut st = AdamW::init_state(&p);
    AdamW::new(0.0).step(&mut p, &g, &mut st, 1e-3).unwrap();
    for (a, b) in p[0].data().iter().zip(start.data()) {
        assert!((*b as f64 - *a as f64 - 1e-3).abs() < 1e-7);
    }
    assert_eq!(st.step, 1);
}

#[test]
fn schedule_endpoints() {
    assert_eq!(cosine_lr(0, 500, 2e-4, 1e-6), 2e-4);
    assert_eq!(cosine_lr(500, 500, 2e-4, 1e-6), 1e-6);
    assert!((cosine_lr(250, 500, 2e-4, 1e-6) - 1.005e-4).abs() <= 1e-12);
}

proptest! {
    #[test]
    fn cosine_is_non_increasing(total in 1usize..5000, a in 0usize..5000, b in 0usize..5000) {
        let (lo, hi) = (a.min(b).min(total), a.max(b).min(total));
        let f = |s| cosine_lr(s, total, 2e-4, 1e-6);
        prop_assert!(f(hi) <= f(lo));
        prop_assert!(f(hi) >= 1e-6 && f(lo) <= 2e-4);
    }
}

#[test]
fn clean_training_starts_at_zero_loss() {
    let mut cfg = small_cfg(vec![DegradationKind::Clean]);
    cfg.severity_range = (1.0, 1.0);
    let out = train(&cfg, &patches(4, 40)).unwrap();
    assert_eq!(out.log.len(), 4);
    assert_eq!(out.log[0].loss, 0.0);
}

#[test]
fn step_zero_loss_is_input_distance_and_runs_repeat() {
    let cfg = small_cfg(vec![DegradationKind::GaussianNoise, DegradationKind::GaussianBlur]);
    let ps = patches(4, 40);
    let first = sample_batch(&ps, &cfg, 0, 0).unwrap();
    let expect = mean_abs_diff(&first.degraded, &first.clean);
    let a = train(&cfg, &ps).unwrap();
    assert!((a.log[0].loss - expect).abs() < 1e-6, "{} vs {expect}", a.log[0].loss);
    assert_eq!(a.log[0].lr, cfg.lr_max);
    assert_eq!(a.log.last().unwrap().step, 3);

    let b = train(&cfg, &ps).unwrap();
    assert_eq!(loss_log_csv(&a.log), loss_log_csv(&b.log));
    assert_eq!(encode_checkpoint(&a.checkpoint).unwrap(), encode_checkpoint(&b.checkpoint).unwrap());
    assert!(loss_log_csv(&a.log).starts_with("step,lr,loss\n0,2e-4,"));
}

#[test]
fn periodic_checkpoints_fire() {
    let mut cfg = small_cfg(vec![DegradationKind::GaussianNoise]);
    cfg.checkpoint_every = Some(2);
    let mut t = Trainer::new(cfg).unwrap();
    let mut seen = Vec::new();
    t.run(&patches(4, 40), |step, ck| {
        seen.push((step, ck.optimizer.as_ref().unwrap().step));
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![(2, 2)]);
}
