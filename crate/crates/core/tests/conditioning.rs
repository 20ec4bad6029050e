use proptest::prelude::*;
use uniproc::check;
use uniproc::conditioning::*;
use uniproc::degrade::{DegradationKind, Prng};
use uniproc::model::layers::Cim;
use uniproc::model::{ModelConfig, ParameterStore, UniProcessor};
use uniproc::tensor::{Shape, Tape, Tensor};

fn embed(model: &UniProcessor, prompts: &[&str]) -> (Tensor<f32>, Vec<usize>) {
    let mut tape = Tape::<f32>::new();
    let p = model.store().bind(&mut tape, false);
    let ctx = model.encode_prompts(&mut tape, &p, prompts).unwrap();
    (tape.value(ctx.embedding).clone(), ctx.lens)
}

#[test]
fn vocabulary_covers_kinds_and_verbs() {
    let v = PromptVocabulary::standard();
    for kind in DegradationKind::ALL {
        assert_ne!(v.id(kind.name()), v.oov(), "{kind}");
    }
    for verb in MANIPULATION_VERBS {
        assert_ne!(v.id(verb), v.oov());
    }
    let mut ids: Vec<usize> = v.tokens().iter().map(|t| v.id(t)).collect();
    ids.dedup();
    assert_eq!(ids, (0..v.len()).collect::<Vec<_>>());
}

#[test]
fn embedding_rows_follow_table_and_positions() {
    let model = UniProcessor::new(ModelConfig::tiny(), 5).unwrap();
    let prompt = "Remove Gaussian_Noise";
    let (e, lens) = embed(&model, &[prompt, ""]);
    let (d, k) = (model.config().context_dim, model.config().context_tokens);
    assert_eq!(e.shape(), Shape::new(2, d, k, 1));
    assert_eq!(lens, vec![2, 0]);
    let table = model.store().by_name("cond.token_table").unwrap();
    let pos = model.store().by_name("cond.pos_table").unwrap();
    let ids = model.vocab().tokenize(prompt);
    for i in 0..k {
        for c in 0..d {
            let got = e.at(0, c, i, 0);
            let expect = if i < ids.len() {
                table.data()[ids[i] * d + c] + pos.data()[i * d + c]
            } else {
                0.0
            };
            assert_eq!(got, expect);
            assert_eq!(e.at(1, c, i, 0), 0.0);
        }
    }
}

#[test]
fn distinct_kinds_differ_and_encoding_is_deterministic() {
    let model = UniProcessor::new(ModelConfig::tiny(), 6).unwrap();
    let (a, _) = embed(&model, &["gaussian_noise"]);
    let (b, _) = embed(&model, &["rain_streak"]);
    assert_ne!(a, b);
    let (a2, _) = embed(&model, &["gaussian_noise"]);
    assert_eq!(a, a2);
    let full = kind_prompt(DegradationKind::SnowStreak);
    assert_eq!(embed(&model, &[&full]).0, embed(&model, &[&full]).0);
}

#[test]
fn long_prompts_are_truncated() {
    let model = UniProcessor::new(ModelConfig::tiny(), 7).unwrap();
    let long = "remove the degradation ".repeat(10);
    let (_, lens) = embed(&model, &[&long]);
    assert_eq!(lens, vec![16]);
}

#[test]
fn masking_is_inert_when_the_prompt_fills_every_slot() {
    let model = UniProcessor::new(ModelConfig::tiny(), 8).unwrap();
    let long = "remove the gaussian_noise and the rain_streak of this image with a mean_shift in the snow_streak now";
    assert!(model.vocab().tokenize(long).len() >= 16);
    let mut store = ParameterStore::new(3);
    let cim = Cim::register(&mut store, "cim", 8, 64, 2).unwrap();
    let run = |masked: bool| {
        let mut tape = Tape::<f32>::new();
        let p = model.store().bind(&mut tape, false);
        let ctx = model.encode_prompts(&mut tape, &p, &[long]).unwrap();
        let ctx = Context {
            embedding: ctx.embedding,
            lens: if masked { ctx.lens } else { vec![usize::MAX] },
        };
        let q = store.bind(&mut tape, false);
        let mut rng = Prng::new(1, "f");
        let f = tape.constant(Tensor::from_fn(Shape::new(1, 8, 4, 4), |_| rng.uniform(-1.0, 1.0) as f32));
        let y = cim.forward(&mut tape, &q, f, &ctx).unwrap();
        tape.value(y).clone()
    };
    assert_eq!(run(true), run(false));
}

#[test]
fn embedding_gradients_pass_finite_differences() {
    let report = check::run_case("encode_prompt").unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn embedding_tables_receive_gradients() {
    let mut model = UniProcessor::new(ModelConfig::tiny(), 9).unwrap();
    let mut rng = Prng::new(2, "tail");
    for id in model.tail_ids() {
        model.store_mut().get_mut(id).data_mut().iter_mut().for_each(|v| *v = rng.uniform(-0.1, 0.1) as f32);
    }
    let mut tape = Tape::<f32>::new();
    let p = model.store().bind(&mut tape, true);
    let x = tape.constant(Tensor::from_fn(Shape::new(1, 3, 16, 16), |i| (i % 13) as f32 / 13.0));
    let ctx = model.encode_prompts(&mut tape, &p, &[&kind_prompt(DegradationKind::GaussianNoise)]).unwrap();
    let y = model.forward(&mut tape, &p, x, Some(&ctx)).unwrap();
    let target = tape.constant(Tensor::full(Shape::new(1, 3, 16, 16), 0.5));
    let loss = tape.l1_loss(y, target).unwrap();
    let grads = tape.backward(loss).unwrap();
    let table = model.prompt_encoder().table.index();
    let g = grads.get(p[table]).unwrap();
    assert!(g.data().iter().any(|&v| v != 0.0));
}

proptest! {
    #[test]
    fn tokenize_is_case_insensitive_and_total(text in "[ -~]{0,40}") {
        let v = PromptVocabulary::standard();
        let ids = v.tokenize(&text);
        prop_assert_eq!(&ids, &v.tokenize(&text.to_uppercase()));
        prop_assert!(ids.iter().all(|&i| i < v.len()));
    }

    #[test]
    fn template_is_deterministic(m in "[a-z ]{0,12}", s in "[a-z_]{1,12}") {
        let a = build_prompt(&m, &s);
        prop_assert_eq!(&a, &build_prompt(&m, &s));
        let clause = format!("the {s} is {s}");
        prop_assert!(a.ends_with(&clause));
    }
}
