use labelwise_core::ordinal::{
    coral_forward, evaluate, grad_check, synthetic_binary, synthetic_ordinal, train, Example, HeadKind, Model,
    ModelKind, TrainConfig,
};
use labelwise_core::Label;

fn sample(dim: usize, n: usize, seed: u64) -> Vec<Example> {
    // deterministic pseudo-random features spread over both signs
    (0..n)
        .map(|i| {
            let features = (0..dim)
                .map(|j| (seed as f64 + 1.3 * i as f64 + 0.7 * j as f64).sin() * 1.7)
                .collect();
            Example::new(format!("g{i}"), features, Label::ALL[(i + seed as usize) % 5])
        })
        .collect()
}

#[test]
fn gradients_match_central_differences() {
    for kind in ModelKind::ALL {
        for seed in 0..5 {
            let model = Model::random(kind, 6, 12, seed).with_loss_weights(0.7, 1.3);
            let check = grad_check(&model, &sample(6, 4, seed), 1e-5).unwrap();
            assert!(
                check.max_rel_error <= 1e-5,
                "{kind:?} seed {seed}: max rel error {}",
                check.max_rel_error
            );
        }
    }
}

#[test]
fn binary_head_at_zero_parameters() {
    let model = Model::zeros(ModelKind::Bin, 5, 8);
    let check = grad_check(&model, &sample(5, 3, 1), 1e-5).unwrap();
    assert!(check.max_abs_error <= 1e-8, "{}", check.max_abs_error);
}

#[test]
fn coral_learns_monotone_task() {
    let data = synthetic_ordinal(1000, 7);
    let config = TrainConfig {
        epochs: 50,
        hidden_dim: 768,
        seed: 1,
        ..TrainConfig::default()
    };
    let trained = train(&data, ModelKind::Coral, &config).unwrap();
    let scores = evaluate(&trained.model, &data).unwrap();
    let b = &trained.model.ordinal.as_ref().unwrap().thresholds;
    println!("accuracy {:?} thresholds {b:?}", scores[0]);
    assert!(scores[0].accuracy >= 0.9);
    assert!(b.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(scores[0].head, HeadKind::Coral);
}

#[test]
fn binary_learns_separable_task() {
    let data = synthetic_binary(200, 3);
    let config = TrainConfig {
        epochs: 50,
        hidden_dim: 32,
        seed: 2,
        ..TrainConfig::default()
    };
    let trained = train(&data, ModelKind::Bin, &config).unwrap();
    let scores = evaluate(&trained.model, &data).unwrap();
    println!("{scores:?}");
    assert!(scores[0].accuracy >= 0.95);
}

#[test]
fn rank_consistency_with_ordered_thresholds() {
    let mut model = Model::random(ModelKind::Coral, 3, 8, 4);
    model.ordinal.as_mut().unwrap().thresholds = vec![1.5, 0.2, -0.1, -2.0];
    let head = model.ordinal.as_ref().unwrap();
    for ex in sample(3, 50, 9) {
        let out = coral_forward(&ex.features, head).unwrap();
        assert!(out.probabilities.windows(2).all(|w| w[0] >= w[1]));
        let crossing = out.probabilities.iter().take_while(|&&p| p > 0.5).count();
        assert_eq!(out.label().index(), crossing);
    }
}
