mod common;

use argmine::model::train::{train, train_separate, TrainConfig, Trainer};
use argmine::model::{build_model, load_model, Batch, ModelConfig, ModelError, Task};
use argmine_core::dataset::Split;

fn tiny() -> ModelConfig {
    ModelConfig::tiny()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 8,
        max_epochs: epochs,
        early_stop_patience: 3,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn head_shapes_follow_config() {
    let (m, warnings) = build_model(&tiny(), 1).unwrap();
    assert!(warnings.is_empty());
    let enc = [
        m.encode_stance("a short text").unwrap(),
        m.encode_stance("another, slightly longer text here")
            .unwrap(),
        m.encode_stance("x").unwrap(),
    ];
    let seqs: Vec<&[u32]> = enc.iter().map(|e| e.ids.as_slice()).collect();
    let batch = Batch::new(&seqs, m.device()).unwrap();
    assert_eq!(m.logits(Task::Stance, &batch, None).unwrap().dims(), [3, 2]);
    assert_eq!(
        m.logits(Task::Relation, &batch, None).unwrap().dims(),
        [3, 4]
    );
    assert_eq!(
        m.params().get("stance_head.weight").unwrap().dims(),
        [2, m.encoder_config.hidden_size]
    );
}

#[test]
fn five_relation_classes_are_honored_with_warning() {
    let cfg = ModelConfig {
        n_relation_classes: 5,
        ..tiny()
    };
    let (m, warnings) = build_model(&cfg, 1).unwrap();
    assert_eq!(warnings.len(), 1);
    let p = m.predict_relation("premise text", "claim text").unwrap();
    assert_eq!(p.probabilities.len(), 5);
}

#[test]
fn unknown_encoder() {
    let cfg = ModelConfig {
        encoder_id: "/definitely/not/a/model".into(),
        ..tiny()
    };
    assert!(matches!(
        build_model(&cfg, 1),
        Err(ModelError::EncoderNotFound(_))
    ));
}

#[test]
fn empty_text_is_a_tokenize_error() {
    let (m, _) = build_model(&tiny(), 1).unwrap();
    assert!(matches!(
        m.predict_stance("   "),
        Err(ModelError::Tokenize(_))
    ));
}

#[test]
fn long_inputs_truncate_to_max_length() {
    let cfg = ModelConfig {
        max_length: 16,
        ..tiny()
    };
    let (m, _) = build_model(&cfg, 1).unwrap();
    let long = "word ".repeat(200);
    let e = m.encode_stance(&long).unwrap();
    assert!(e.truncated);
    assert_eq!(e.ids.len(), 16);
    let r = m.encode_relation(&long, "short").unwrap();
    assert_eq!(r.ids.len(), 16);
    // Prediction still works on the truncated form.
    let p = m.predict_stance(&long).unwrap();
    assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
}

#[test]
fn predictions_are_normalized_and_batch_consistent() {
    let (m, _) = build_model(&tiny(), 3).unwrap();
    let texts = [
        "we should separate waste",
        "however it costs too much money and time for the city",
        "ok",
    ];
    let batch = m.predict_stance_batch(&texts).unwrap();
    for (t, b) in texts.iter().zip(&batch) {
        let single = m.predict_stance(t).unwrap();
        assert_eq!(single.label, b.label);
        for (x, y) in single.probabilities.iter().zip(&b.probabilities) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
        assert!((b.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(b.probabilities.iter().all(|p| *p >= 0.0));
        assert_eq!(m.predict_stance(t).unwrap(), single);
    }
}

#[test]
fn stance_step_leaves_relation_head_alone() {
    let bundle = common::small_bundle(10, 2);
    let (m, _) = build_model(&tiny(), 4).unwrap();
    let mut trainer = Trainer::new(&m, &quick(1)).unwrap();
    let before: Vec<Vec<f32>> = Task::ALL
        .iter()
        .map(|t| m.parameter_values(&format!("{}.weight", head(*t))).unwrap())
        .collect();
    let enc: Vec<_> = bundle.stance.train[..8]
        .iter()
        .map(|e| (m.encode_stance(&e.text).unwrap(), e.label.index()))
        .collect();
    let batch: Vec<_> = enc.iter().map(|(e, y)| (e, *y)).collect();
    trainer.step(&m, Task::Stance, &batch).unwrap();
    let stance_after = m.parameter_values("stance_head.weight").unwrap();
    let relation_after = m.parameter_values("relation_head.weight").unwrap();
    assert_ne!(stance_after, before[0]);
    assert_eq!(relation_after, before[1]);
}

fn head(t: Task) -> &'static str {
    match t {
        Task::Stance => "stance_head",
        Task::Relation => "relation_head",
    }
}

#[test]
fn save_load_round_trip() {
    let bundle = common::small_bundle(10, 2);
    let (m, _) = build_model(&tiny(), 4).unwrap();
    let trained = train(m, &bundle, &quick(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    trained
        .model
        .save(dir.path(), Some(&trained.history))
        .unwrap();
    let (loaded, history) = load_model(dir.path(), Some(&tiny())).unwrap();
    assert_eq!(history.unwrap(), trained.history);
    for ex in &bundle.stance.test {
        let a = trained.model.predict_stance(&ex.text).unwrap();
        let b = loaded.predict_stance(&ex.text).unwrap();
        for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    let other = ModelConfig {
        n_relation_classes: 5,
        ..tiny()
    };
    assert!(matches!(
        load_model(dir.path(), Some(&other)),
        Err(ModelError::ConfigMismatch(_))
    ));
    let longer = ModelConfig {
        max_length: 64,
        ..tiny()
    };
    assert!(matches!(
        load_model(dir.path(), Some(&longer)),
        Err(ModelError::ConfigMismatch(_))
    ));

    // A path whose parent is a regular file cannot be created.
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(matches!(
        trained.model.save(&blocker.join("ckpt"), None),
        Err(ModelError::Io { .. })
    ));
    assert!(matches!(
        load_model(&dir.path().join("missing"), None),
        Err(ModelError::Io { .. })
    ));
}

#[test]
fn early_stop_on_worsening_validation() {
    let mut bundle = common::small_bundle(20, 6);
    // Validation labels opposite to what the cue words teach.
    for e in &mut bundle.stance.val {
        e.label = e.label.flip();
    }
    bundle.relation = Default::default();
    let (m, _) = build_model(&tiny(), 4).unwrap();
    let cfg = TrainConfig {
        early_stop_patience: 1,
        max_epochs: 20,
        learning_rate: 3e-3,
        ..quick(20)
    };
    let t = train(m, &bundle, &cfg).unwrap();
    let h = &t.history;
    assert!(h.stopped_early);
    assert_eq!(
        h.epochs.len(),
        2,
        "{:?}",
        h.epochs.iter().map(|e| e.eval_loss).collect::<Vec<_>>()
    );
    assert_eq!(h.best_epoch, 0);
}

#[test]
fn missing_validation_data_is_empty_train() {
    let mut bundle = common::small_bundle(10, 2);
    bundle.stance.val.clear();
    bundle.relation.val.clear();
    let (m, _) = build_model(&tiny(), 4).unwrap();
    assert!(matches!(
        train(m, &bundle, &quick(1)),
        Err(ModelError::EmptyTrain)
    ));
}

#[test]
fn huge_learning_rate_diverges() {
    let bundle = common::small_bundle(10, 2);
    let (m, _) = build_model(&tiny(), 4).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e38,
        ..quick(3)
    };
    match train(m, &bundle, &cfg) {
        Err(ModelError::Divergence { epoch }) => assert!(epoch < 3),
        other => panic!("expected divergence, got {:?}", other.map(|t| t.history)),
    }
}

#[test]
fn invalid_train_config() {
    let bundle = common::small_bundle(10, 2);
    let (m, _) = build_model(&tiny(), 4).unwrap();
    let cfg = TrainConfig {
        early_stop_patience: 0,
        ..quick(1)
    };
    assert!(matches!(
        train(m, &bundle, &cfg),
        Err(ModelError::InvalidConfig(_))
    ));
}

#[test]
fn separate_runs_train_one_task_each() {
    let bundle = common::small_bundle(10, 2);
    let (s, r) = train_separate(&tiny(), &bundle, &quick(1)).unwrap();
    assert_eq!(
        s.history.epochs[0].tasks.keys().collect::<Vec<_>>(),
        [&Task::Stance]
    );
    assert_eq!(
        r.history.epochs[0].tasks.keys().collect::<Vec<_>>(),
        [&Task::Relation]
    );
    assert!(s
        .history
        .truncated
        .contains_key(&format!("stance/{}", Split::Train)));
}

#[test]
fn single_encoding_uses_cls_and_sep() {
    let (m, _) = build_model(&tiny(), 1).unwrap();
    let e = m.encode_stance("hello world").unwrap();
    assert_eq!(e.ids.first(), Some(&argmine::model::tokenizer::CLS_ID));
    assert_eq!(e.ids.last(), Some(&argmine::model::tokenizer::SEP_ID));
}
