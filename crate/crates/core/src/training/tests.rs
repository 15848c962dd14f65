use super::*;
use crate::corpus::NUM_SPECIAL;

fn cfg() -> ModelConfig {
    ModelConfig::tiny(NUM_SPECIAL as usize + 30)
}

fn ex(scenario: Scenario, salt: u32, label: u8) -> ScenarioExample {
    let t = |k: u32| NUM_SPECIAL + (salt * 7 + k) % 20;
    ScenarioExample {
        scenario,
        candidate: vec![t(1), t(2), t(3)],
        reference: scenario.needs_reference().then(|| vec![t(4), t(5)]),
        document: scenario.needs_document().then(|| vec![t(6), t(7), t(8), t(9)]),
        label,
    }
}

fn stream(s: Scenario, n: u32) -> Vec<ScenarioExample> {
    (0..n).map(|i| ex(s, i, (i % 2) as u8)).collect()
}

fn all_streams(n: u32) -> [Vec<ScenarioExample>; 3] {
    Scenario::ALL.map(|s| stream(s, n))
}

fn quick(mode: TrainMode) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        epochs: 1,
        mode,
        ..Default::default()
    }
}

#[test]
fn loss_examples() {
    let ln2 = core::f64::consts::LN_2;
    assert!((cross_entropy_loss(&[0.5], &[1]).unwrap() - ln2).abs() < 1e-12);
    assert!(cross_entropy_loss(&[1.0 - 1e-12], &[1]).unwrap() < 1e-11);
    assert!((cross_entropy_loss(&[0.5, 0.5], &[1, 0]).unwrap() - 2.0 * ln2).abs() < 1e-12);
    // Clamping keeps certain mistakes finite.
    assert!(cross_entropy_loss(&[0.0], &[1]).unwrap().is_finite());
    assert!(matches!(
        cross_entropy_loss(&[0.5], &[1, 0]),
        Err(Error::LengthMismatch { left: 1, right: 2 })
    ));
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    for bad in [
        TrainConfig { learning_rate: 0.0, ..Default::default() },
        TrainConfig { learning_rate: f64::NAN, ..Default::default() },
        TrainConfig { batch_size: 0, ..Default::default() },
        TrainConfig { clip_norm: Some(0.0), ..Default::default() },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn batching_arithmetic() {
    let params = ModelParameters::init(cfg()).unwrap();
    let mut sets: [Vec<ScenarioExample>; 3] = Default::default();
    sets[Scenario::SumDoc.index()] = stream(Scenario::SumDoc, 10);
    let out = train(params, &sets, &Default::default(), &quick(TrainMode::SingleScenario(Scenario::SumDoc)), &mut |_| ControlFlow::Continue(())).unwrap();
    assert_eq!(out.summary.total_steps, 2);
    assert_eq!(out.summary.epochs[0].steps, 2);
}

#[test]
fn round_robin_interleaves() {
    let mut a = ChaCha8Rng::seed_from_u64(1);
    let mut b = ChaCha8Rng::seed_from_u64(2);
    let plan = schedule(&[(0, 16), (1, 8), (2, 24)], 8, Mixing::RoundRobin, &mut a, &mut b);
    let order: Vec<usize> = plan.iter().map(|p| p.0).collect();
    assert_eq!(order, vec![0, 1, 2, 0, 2, 2]);
    let plan = schedule(&[(0, 16), (1, 8), (2, 24)], 8, Mixing::Proportional, &mut a, &mut b);
    assert_eq!(plan.len(), 6);
    for s in 0..3 {
        let n: usize = plan.iter().filter(|p| p.0 == s).map(|p| p.1.len()).sum();
        assert_eq!(n, [16, 8, 24][s]);
    }
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let params = ModelParameters::init(cfg()).unwrap();
        train(params, &all_streams(12), &all_streams(4), &quick(TrainMode::Unified), &mut |_| ControlFlow::Continue(())).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.summary.epochs[0].mean_loss.to_bits(), b.summary.epochs[0].mean_loss.to_bits());
    assert_eq!(a.params, b.params);
    assert!(a.summary.epochs[0].heldout_accuracy.iter().all(Option::is_some));
}

#[test]
fn missing_stream_is_rejected() {
    let params = ModelParameters::init(cfg()).unwrap();
    let mut sets = all_streams(4);
    sets[Scenario::SumDocRef.index()].clear();
    let err = train(params, &sets, &Default::default(), &quick(TrainMode::Unified), &mut |_| ControlFlow::Continue(())).unwrap_err();
    assert!(matches!(err.error, Error::InvalidArgument(_)));
}

#[test]
fn joint_no_prefix_leaves_prefix_untouched() {
    let params = ModelParameters::init(cfg()).unwrap();
    let before = params.values[params.prefix_range()].to_vec();
    let out = train(params, &all_streams(12), &Default::default(), &quick(TrainMode::JointNoPrefix), &mut |_| ControlFlow::Continue(())).unwrap();
    let after = &out.params.values[out.params.prefix_range()];
    assert!(before.iter().zip(after).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(!out.params.config.prefix_enabled);
}

#[test]
fn sum_ref_update_moves_sum_doc_scores() {
    let params = ModelParameters::init(cfg()).unwrap();
    let probe = ex(Scenario::SumDoc, 3, 1);
    let layout = assemble_example(&probe, &params.config).unwrap();
    let before = model::score_layouts(&params, &[&layout]).unwrap()[0].score;
    let mut sets: [Vec<ScenarioExample>; 3] = Default::default();
    sets[Scenario::SumRef.index()] = stream(Scenario::SumRef, 8);
    let mut c = quick(TrainMode::SingleScenario(Scenario::SumRef));
    c.learning_rate = 1e-2;
    let out = train(params.clone(), &sets, &Default::default(), &c, &mut |_| ControlFlow::Continue(())).unwrap();
    assert_ne!(out.params.values[params.prefix_range()], params.values[params.prefix_range()]);
    let after = model::score_layouts(&out.params, &[&layout]).unwrap()[0].score;
    assert_ne!(before, after);
}

#[test]
fn unused_embedding_rows_get_no_gradient() {
    let params = ModelParameters::init(cfg()).unwrap();
    let batch = stream(Scenario::SumDocRef, 3);
    let (_, g) = backward(&params, &batch).unwrap();
    let z = params.config.hidden_dim;
    let used: Vec<u32> = batch
        .iter()
        .flat_map(|e| {
            e.candidate
                .iter()
                .chain(e.reference.iter().flatten())
                .chain(e.document.iter().flatten())
                .copied()
        })
        .collect();
    let tok = params.layout.offsets.token;
    for id in NUM_SPECIAL..params.config.vocab_size as u32 {
        let row = &g[tok + id as usize * z..tok + (id as usize + 1) * z];
        if used.contains(&id) {
            assert!(row.iter().any(|&x| x != 0.0));
        } else {
            assert!(row.iter().all(|&x| x == 0.0), "row {id}");
        }
    }
}

#[test]
fn confident_correct_batch_has_no_gradient() {
    let mut params = ModelParameters::init(cfg()).unwrap();
    let b = params.layout.offsets.head_b[2];
    params.values[b] = -100.0;
    params.values[b + 1] = 100.0;
    let batch: Vec<ScenarioExample> = (0..4).map(|i| ex(Scenario::SumRef, i, 1)).collect();
    let (loss, g) = backward(&params, &batch).unwrap();
    assert!(loss < 1e-10);
    assert!(global_norm(&g) < 1e-6);
}

#[test]
fn gradient_matches_finite_differences() {
    let c = cfg();
    let err = grad_check(&c, 60, 5).unwrap();
    assert!(err < 1e-4, "max relative error {err}");
    assert_eq!(err.to_bits(), grad_check(&c, 60, 5).unwrap().to_bits());
    let lin = grad_check_linear_head(&c, 5).unwrap();
    assert!(lin < 1e-9, "linear head error {lin}");
}

#[test]
fn target_accuracy_stops_early() {
    let params = ModelParameters::init(cfg()).unwrap();
    let mut c = quick(TrainMode::Unified);
    c.epochs = 5;
    c.target_accuracy = Some(0.0);
    let mut seen = 0;
    let out = train(params, &all_streams(8), &all_streams(4), &c, &mut |_| {
        seen += 1;
        ControlFlow::Continue(())
    }).unwrap();
    assert_eq!(out.summary.epochs.len(), 1);
    assert_eq!(seen, 1);
    assert!(out.summary.stopped_early);
}
