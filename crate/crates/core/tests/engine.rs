use pcn_core::*;

fn small_config(act: Activation) -> TrainConfig {
    let model = ModelConfig::new(vec![6, 4, 3], 3, act).unwrap();
    TrainConfig::new(model, InferenceSettings::new(5, 0.05).unwrap(), 0.01, 4, 2, 11).unwrap()
}

#[test]
fn trace_covers_every_step_of_every_batch() {
    let data = synth_blobs(3, 4, 6, 3.0, 2).unwrap();
    let config = small_config(Activation::Tanh);
    let out = train(&config, &data).unwrap();
    let per_batch = config.infer.t_infer + config.learn.t_learn + 1;
    assert_eq!(out.trace.len(), config.epochs * 3 * per_batch);
    for epoch in 0..config.epochs {
        for batch in 0..3 {
            let steps: Vec<usize> = out.trace.batch(epoch, batch).map(|r| r.step_index).collect();
            assert_eq!(steps, (0..per_batch).collect::<Vec<_>>());
            let phases: Vec<Phase> = out.trace.batch(epoch, batch).map(|r| r.phase).collect();
            assert!(phases[..=config.infer.t_infer].iter().all(|&p| p == Phase::Infer));
            assert!(phases[config.infer.t_infer + 1..].iter().all(|&p| p == Phase::Learn));
        }
    }
}

#[test]
fn learning_steps_default_to_the_batch_size() {
    let config = small_config(Activation::Relu);
    assert_eq!(config.learn.t_learn, config.batch_size);
    let reference = TrainConfig::cifar10_reference();
    assert_eq!(reference.learn.t_learn, 500);
    assert_eq!(reference.batch_size * reference.infer.t_infer, 500 * 50);
}

#[test]
fn training_and_evaluation_are_reproducible() {
    let data = synth_blobs(3, 4, 6, 3.0, 2).unwrap();
    let config = small_config(Activation::Relu);
    let a = train(&config, &data).unwrap();
    let b = train(&config, &data).unwrap();
    assert_eq!(a.stack, b.stack);
    assert_eq!(a.trace, b.trace);
    let frozen = a.stack.clone();
    let r1 = evaluate(&a.stack, &config, &data).unwrap();
    let r2 = evaluate(&a.stack, &config, &data).unwrap();
    assert_eq!(a.stack, frozen);
    assert_eq!(r1, r2);
    assert!(r1.top3 >= r1.top1);
    assert_eq!(r1.samples, 12);
}

#[test]
fn small_rates_never_raise_the_energy() {
    for seed in 0..10u64 {
        for act in [Activation::Tanh, Activation::Identity] {
            let model = ModelConfig::new(vec![6, 4, 3], 3, act).unwrap();
            let stack = GenerativeStack::init(&model, seed).unwrap();
            let data = synth_blobs(3, 2, 6, 3.0, seed).unwrap();
            let latents = LatentBatch::init(&model, data.len(), seed + 1).unwrap();
            let run = run_inference(&stack, &data.inputs, &latents, None, &InferenceSettings::new(200, 1e-3).unwrap())
                .unwrap();
            assert!(run.energies.windows(2).all(|w| w[1] <= w[0] + 1e-12), "seed {seed} {act}");
            let y = one_hot(&data.labels, 3).unwrap();
            let learned =
                run_learning(&stack, &data.inputs, &run.latents, Some(&y), &LearnSettings::new(50, 1e-4).unwrap()).unwrap();
            assert!(learned.energies.windows(2).all(|w| w[1] <= w[0] + 1e-12), "seed {seed} {act}");
        }
    }
}

#[test]
fn early_stop_shortens_the_trace() {
    let data = synth_blobs(2, 4, 6, 3.0, 5).unwrap();
    let model = ModelConfig::new(vec![6, 4, 2], 2, Activation::Tanh).unwrap();
    let infer = InferenceSettings::new(500, 0.1).unwrap().with_early_stop(1e-3, 2).unwrap();
    let config = TrainConfig::new(model, infer, 0.01, 8, 1, 0).unwrap();
    let out = train(&config, &data).unwrap();
    let infer_steps = out.trace.batch(0, 0).filter(|r| r.phase == Phase::Infer).count();
    assert!(infer_steps < 501, "{infer_steps}");
}

#[test]
fn divergence_is_reported_with_its_location() {
    let data = synth_blobs(2, 4, 6, 3.0, 5).unwrap();
    let model = ModelConfig::new(vec![6, 5, 2], 2, Activation::Identity).unwrap();
    let config = TrainConfig::new(model, InferenceSettings::new(1000, 10.0).unwrap(), 0.005, 4, 1, 0).unwrap();
    let err = train(&config, &data).unwrap_err();
    assert!(matches!(err.error, PcnError::Divergence { phase: Phase::Infer, .. }), "{err}");
    assert_eq!((err.epoch, err.batch), (0, 0));
    let text = err.to_string();
    for key in ["epoch=0", "batch=0", "phase=infer", "step="] {
        assert!(text.contains(key), "{text}");
    }
}

#[test]
fn label_clamped_evaluation_uses_the_label() {
    let data = synth_blobs(3, 10, 6, 4.0, 1).unwrap();
    let model = ModelConfig::new(vec![6, 5, 3], 3, Activation::Tanh).unwrap();
    let stack = GenerativeStack::init(&model, 4).unwrap();
    let mut settings = EvalSettings {
        infer: InferenceSettings::new(100, 0.1).unwrap(),
        batch_size: 10,
        mode: EvalMode::LabelClamped,
        seed: 0,
        latent_init_scale: 1.0,
    };
    let clamped = evaluate_with(&stack, &settings, &data).unwrap();
    settings.mode = EvalMode::UnsupervisedInference;
    let free = evaluate_with(&stack, &settings, &data).unwrap();
    assert_ne!(clamped, free);
}
