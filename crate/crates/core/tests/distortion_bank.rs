use uniproc::degrade::jpeg::{dct8x8, idct8x8, quant_table};
use uniproc::degrade::{
    apply, jpeg_degrade, mask_degrade, motion_blur_kernel, sample_spec, severity_to_params, streak_overlay,
    DegradationKind, DegradationParams, DegradationSpec, MaskStyle, Prng, StreakFamily,
};
use uniproc::image::synth::natural_image;
use uniproc::image::ImageBuffer;

fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    10.0 * (1.0 / mse).log10()
}

fn spec(kind: DegradationKind, severity: f64, seed: u64) -> DegradationSpec {
    DegradationSpec::new(kind, severity, seed).unwrap()
}

/// xorshift64* with Box-Muller, independent of the crate's generator.
struct Oracle(u64);

impl Oracle {
    fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        (self.0.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

#[test]
fn clean_is_bit_identity() {
    let img = natural_image(40, 33, 1);
    for seed in [0, 1, u64::MAX] {
        assert_eq!(apply(&img, &spec(DegradationKind::Clean, 0.5, seed)).unwrap(), img);
    }
}

#[test]
fn heavy_noise_is_reproducible() {
    let img = natural_image(64, 64, 2);
    let s = spec(DegradationKind::GaussianNoise, 1.0, 7);
    assert_eq!(apply(&img, &s).unwrap(), apply(&img, &s).unwrap());
    assert_ne!(apply(&img, &s).unwrap(), apply(&img, &spec(DegradationKind::GaussianNoise, 1.0, 8)).unwrap());
}

#[test]
fn heavy_noise_psnr_matches_monte_carlo() {
    let img = natural_image(256, 256, 3);
    let sigma = 50.0 / 255.0;
    let seeds = 10u64;
    let mut bank = 0.0;
    let mut oracle_mse = 0.0;
    for seed in 0..seeds {
        let out = apply(&img, &spec(DegradationKind::GaussianNoise, 1.0, seed)).unwrap();
        bank += psnr(&out, &img);
        let mut rng = Oracle(0x9E37_79B9 + seed * 7919);
        let mse: f64 = img
            .data()
            .iter()
            .map(|&x| {
                let x = f64::from(x);
                ((x + sigma * rng.normal()).clamp(0.0, 1.0) - x).powi(2)
            })
            .sum::<f64>()
            / img.data().len() as f64;
        oracle_mse += mse;
    }
    let bank = bank / seeds as f64;
    let expect = 10.0 * (seeds as f64 / oracle_mse).log10();
    assert!((bank - expect).abs() <= 0.5, "bank {bank:.3} dB vs oracle {expect:.3} dB");
}

#[test]
fn parameter_examples() {
    match severity_to_params(DegradationKind::GaussianNoise, 1.0) {
        DegradationParams::GaussianNoise { sigma } => assert!((sigma - 0.196).abs() < 1e-3),
        other => panic!("{other:?}"),
    }
    assert_eq!(severity_to_params(DegradationKind::JpegCompression, 1.0), DegradationParams::Jpeg { quality: 10 });
    assert_eq!(severity_to_params(DegradationKind::JpegCompression, 0.33), DegradationParams::Jpeg { quality: 64 });
    assert_eq!(
        severity_to_params(DegradationKind::GaussianBlur, 0.5),
        DegradationParams::GaussianBlur { sigma: 2.0 }
    );
}

#[test]
fn sampler_examples() {
    let kinds = DegradationKind::degrading();
    let mut rng = Prng::new(11, "sampler");
    for _ in 0..100 {
        assert_eq!(sample_spec(&mut rng, &kinds, (1.0, 1.0)).unwrap().severity, 1.0);
        let s = sample_spec(&mut rng, &[DegradationKind::Jitter], (0.2, 0.8)).unwrap();
        assert_eq!(s.kind, DegradationKind::Jitter);
        assert!((0.2..=0.8).contains(&s.severity));
    }
    let thirty = &kinds[..30];
    let draws = 10_000usize;
    let mut counts = vec![0usize; 30];
    for _ in 0..draws {
        let s = sample_spec(&mut rng, thirty, (0.1, 1.0)).unwrap();
        counts[thirty.iter().position(|&k| k == s.kind).unwrap()] += 1;
    }
    let p = 1.0 / 30.0;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for (k, &c) in thirty.iter().zip(&counts) {
        assert!((c as f64 - draws as f64 * p).abs() <= 3.0 * sd, "{k}: {c}");
    }
}

#[test]
fn jpeg_examples() {
    let img = natural_image(64, 64, 5);
    assert!(psnr(&jpeg_degrade(&img, 100).unwrap(), &img) >= 50.0);
    assert!(jpeg_degrade(&img, 0).is_err());
    assert!(jpeg_degrade(&img, 101).is_err());

    let mut rng = Oracle(42);
    for _ in 0..10 {
        let mut block = [0.0; 64];
        for v in &mut block {
            *v = rng.uniform() * 255.0 - 128.0;
        }
        let back = idct8x8(&dct8x8(&block));
        let err = block.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-4, "{err}");
    }

    // Constant gray: only DC survives; error bounded by half a DC step.
    let level = 0.37f32;
    let gray = ImageBuffer::filled(20, 12, [level; 3]).unwrap();
    let q = 30;
    let out = jpeg_degrade(&gray, q).unwrap();
    let step = f32::from(quant_table(q, false).unwrap()[0]) / 8.0 / 255.0;
    let first = out.data()[0];
    assert!(out.data().iter().all(|&v| (v - first).abs() < 1e-5), "{:?}", &out.data()[..12]);
    assert!((first - level).abs() <= step / 2.0 + 1e-5);
    let colored = ImageBuffer::filled(16, 16, [0.8, 0.3, 0.1]).unwrap();
    let out = jpeg_degrade(&colored, 20).unwrap();
    for c in 0..3 {
        let v0 = out.get(0, 0, c);
        assert!(out.data().chunks(3).all(|p| (p[c] - v0).abs() < 1e-5));
    }
}

#[test]
fn jpeg_quality_orders_distortion() {
    let img = natural_image(64, 64, 6);
    let p: Vec<f64> = [90, 50, 10].iter().map(|&q| psnr(&jpeg_degrade(&img, q).unwrap(), &img)).collect();
    assert!(p[0] > p[1] && p[1] > p[2], "{p:?}");
}

#[test]
fn motion_kernel_examples() {
    let delta = motion_blur_kernel(1.0, 0.7);
    let r = (delta.size / 2) as i64;
    for dy in -r..=r {
        for dx in -r..=r {
            let expect = if dy == 0 && dx == 0 { 1.0 } else { 0.0 };
            assert!((delta.at(dy, dx) - expect).abs() < 1e-6);
        }
    }
    let h = motion_blur_kernel(5.0, 0.0);
    for dx in -2..=2 {
        assert!((h.at(0, dx) - 0.2).abs() < 1e-6);
    }
    assert!((h.sum() - 1.0).abs() < 1e-6);
    let mut rng = Oracle(9);
    for _ in 0..50 {
        let k = motion_blur_kernel(1.0 + 20.0 * rng.uniform(), std::f64::consts::TAU * rng.uniform());
        assert!((k.sum() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn streak_examples() {
    let img = natural_image(256, 256, 7);
    let out = streak_overlay(&img, StreakFamily::Rain, 1.0, 20.0, 1.7, 3);
    assert_eq!(out, streak_overlay(&img, StreakFamily::Rain, 1.0, 20.0, 1.7, 3));
    assert!(out.mean_luma() > img.mean_luma());
    assert!(psnr(&out, &img) < 30.0, "{}", psnr(&out, &img));
    let heavy = apply(&img, &spec(DegradationKind::RainStreak, 1.0, 3)).unwrap();
    assert!(heavy.mean_luma() > img.mean_luma());
    assert!(psnr(&heavy, &img) < 30.0);
    assert_eq!(streak_overlay(&img, StreakFamily::Rain, 1e-12, 20.0, 1.7, 3), img);
}

#[test]
fn mask_examples() {
    let img = natural_image(128, 128, 8);
    let out = mask_degrade(&img, MaskStyle::Block, 0.25, 5);
    let mut masked = 0;
    for y in 0..128 {
        for x in 0..128 {
            let p = out.pixel(y, x);
            if p != img.pixel(y, x) {
                assert_eq!(p, [0.0; 3]);
                masked += 1;
            }
        }
    }
    let frac = masked as f64 / (128.0 * 128.0);
    assert!((0.20..=0.30).contains(&frac), "{frac}");
    assert_eq!(out, mask_degrade(&img, MaskStyle::Block, 0.25, 5));
    assert_eq!(
        mask_degrade(&img, MaskStyle::Irregular, 0.2, 5),
        mask_degrade(&img, MaskStyle::Irregular, 0.2, 5)
    );
}

#[test]
fn every_kind_is_deterministic_in_range_and_shape_preserving() {
    let img = natural_image(96, 80, 9);
    for kind in DegradationKind::ALL {
        for severity in [0.25, 0.66, 1.0] {
            let s = spec(kind, severity, 1234);
            let a = apply(&img, &s).unwrap();
            let b = apply(&img, &s).unwrap();
            assert_eq!(a, b, "{kind} not deterministic");
            assert_eq!(a.dims(), img.dims());
            assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
            if kind != DegradationKind::Clean {
                assert_ne!(a, img, "{kind} at {severity} left the image unchanged");
            }
        }
    }
}

#[test]
fn psnr_decreases_with_severity() {
    let img = natural_image(256, 256, 10);
    for kind in [
        DegradationKind::GaussianNoise,
        DegradationKind::GaussianBlur,
        DegradationKind::JpegCompression,
        DegradationKind::Pixelate,
        DegradationKind::LowLight,
        DegradationKind::MotionBlur,
    ] {
        let p: Vec<f64> = [0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&s| psnr(&apply(&img, &spec(kind, s, 77)).unwrap(), &img))
            .collect();
        assert!(p.windows(2).all(|w| w[0] > w[1]), "{kind}: {p:?}");
    }
}
