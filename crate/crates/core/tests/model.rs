use std::fs;

use hostility_core::corpus::{
    generate_synthetic, Coarse, Corpus, FineLabel, FineSet, LabelKey, LabelSet, Post, Split,
    SyntheticSpec,
};
use hostility_core::evaluation::EvalMode;
use hostility_core::heads::classical::ClassicalAlgorithm;
use hostility_core::model::{
    evaluate_model, gate_predictions, load_checkpoint, prepare, save_checkpoint, train_on,
    train_ovr_member, FeatureExtractor, ModelError, ModelKind, ModelSpec, TrainedHead,
};
use hostility_core::textprep::{PrepConfig, Preprocessor};
use hostility_core::training::TrainConfig;

const D: usize = 32;

fn corpus(seed: u64, split: Split, per_class: usize) -> Corpus {
    let spec = SyntheticSpec::new([
        (LabelKey::NonHostile, 2 * per_class),
        (LabelKey::Fine(FineLabel::Fake), per_class),
        (LabelKey::Fine(FineLabel::Hate), per_class),
        (LabelKey::Fine(FineLabel::Defamation), per_class),
        (LabelKey::Fine(FineLabel::Offensive), per_class),
    ])
    .with_combo(
        FineSet::from_labels([FineLabel::Hate, FineLabel::Offensive]),
        per_class / 2,
    )
    .with_split(split);
    generate_synthetic(seed, &spec)
}

fn small_spec(kind: ModelKind) -> ModelSpec {
    let mut spec = ModelSpec::hash_test(kind, D, 11);
    spec.mlp_hidden = [32, 16, 8];
    spec.rnn_hidden = 8;
    spec.pca_k = 4;
    spec.flatten_len = 16;
    spec
}

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 16,
        learning_rate: 5e-3,
        dropout: 0.0,
        seed: 7,
        ..TrainConfig::default()
    }
}

fn datasets(
    spec: &ModelSpec,
    per_class: usize,
) -> (
    hostility_core::model::Dataset,
    hostility_core::model::Dataset,
) {
    let ex = FeatureExtractor::new(spec, Preprocessor::new(PrepConfig::standard())).unwrap();
    let train = prepare(&ex, &corpus(1, Split::Train, per_class)).unwrap();
    let dev = prepare(&ex, &corpus(2, Split::Dev, per_class / 2)).unwrap();
    (train, dev)
}

#[test]
fn fmbert_head_separates_synthetic_classes() {
    let spec = small_spec(ModelKind::Fmbert);
    let (train, dev) = datasets(&spec, 20);
    let (model, history) =
        train_on(&spec, PrepConfig::standard(), &train, None, &config(10)).unwrap();
    assert_eq!(history.heads["head"].epochs.len(), 10);
    let acc = evaluate_model(&model, &train, EvalMode::GoldHostile)
        .unwrap()
        .coarse
        .unwrap()
        .accuracy;
    assert!(acc >= 0.95, "{acc}");
    let dev_acc = evaluate_model(&model, &dev, EvalMode::GoldHostile)
        .unwrap()
        .coarse
        .unwrap()
        .accuracy;
    assert!(dev_acc >= 0.8, "{dev_acc}");
}

#[test]
fn every_kind_round_trips_through_a_checkpoint() {
    let mut kinds = vec![
        ModelKind::Fmbert,
        ModelKind::Fxlmr,
        ModelKind::Coghm,
        ModelKind::Bilstm,
        ModelKind::Bigru,
        ModelKind::Dmlmc,
        ModelKind::Ovr,
    ];
    for algorithm in ClassicalAlgorithm::ALL {
        for pca in [false, true] {
            kinds.push(ModelKind::Classical { algorithm, pca });
        }
    }
    for kind in kinds {
        let spec = small_spec(kind);
        let (train, dev) = datasets(&spec, 8);
        let (model, _) = train_on(
            &spec,
            PrepConfig::standard(),
            &train,
            Some(&dev),
            &config(2),
        )
        .unwrap_or_else(|e| panic!("{kind}: {e}"));
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_checkpoint(&model, dir.path(), Some("abc")).unwrap();
        assert_eq!(manifest.model, kind);
        let (loaded, _) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(loaded, model, "{kind}");
        for mode in [EvalMode::GoldHostile, EvalMode::Pipeline] {
            assert_eq!(
                loaded.predict(&dev, mode).unwrap(),
                model.predict(&dev, mode).unwrap(),
                "{kind}"
            );
        }
        if kind == ModelKind::Ovr {
            for label in FineLabel::ALL {
                assert!(dir
                    .path()
                    .join(format!("member_{label}"))
                    .join("params.bin")
                    .exists());
            }
        }
    }
}

#[test]
fn fusion_manifest_lists_both_backends() {
    let spec = small_spec(ModelKind::Coghm);
    let (train, _) = datasets(&spec, 6);
    let (model, _) = train_on(&spec, PrepConfig::standard(), &train, None, &config(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_checkpoint(&model, dir.path(), None).unwrap();
    assert_eq!(manifest.spec.encoders.len(), 2);
    let TrainedHead::Mlp(head) = &model.head else {
        panic!()
    };
    assert_eq!(head.config().input, 2 * D);
}

#[test]
fn training_is_deterministic_per_seed() {
    let spec = small_spec(ModelKind::Dmlmc);
    let (train, dev) = datasets(&spec, 8);
    let a = train_on(
        &spec,
        PrepConfig::standard(),
        &train,
        Some(&dev),
        &config(3),
    )
    .unwrap();
    let b = train_on(
        &spec,
        PrepConfig::standard(),
        &train,
        Some(&dev),
        &config(3),
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a.1).unwrap(),
        serde_json::to_string(&b.1).unwrap()
    );
    let c = train_on(
        &spec,
        PrepConfig::standard(),
        &train,
        Some(&dev),
        &TrainConfig {
            seed: 8,
            ..config(3)
        },
    )
    .unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn ovr_members_are_independent() {
    let spec = small_spec(ModelKind::Ovr);
    let (train, dev) = datasets(&spec, 8);
    let cfg = config(2);
    let (model, history) =
        train_on(&spec, PrepConfig::standard(), &train, Some(&dev), &cfg).unwrap();
    assert_eq!(history.heads.len(), 4);
    let TrainedHead::Ovr(ensemble) = &model.head else {
        panic!()
    };
    for label in FineLabel::ALL {
        let (_, alone, _) = train_ovr_member(&spec, &train, Some(&dev), &cfg, label).unwrap();
        assert_eq!(ensemble.member(label), Some(&alone));
    }
    let (_, reseeded, _) = train_ovr_member(
        &spec,
        &train,
        Some(&dev),
        &TrainConfig { seed: 99, ..cfg },
        FineLabel::Fake,
    )
    .unwrap();
    assert_ne!(ensemble.member(FineLabel::Fake), Some(&reseeded));
}

#[test]
fn pipeline_gating_empties_fine_sets_of_non_hostile_posts() {
    let coarse_spec = small_spec(ModelKind::Fmbert);
    let fine_spec = small_spec(ModelKind::Ovr);
    let (train, dev) = datasets(&coarse_spec, 8);
    let (coarse, _) = train_on(
        &coarse_spec,
        PrepConfig::standard(),
        &train,
        None,
        &config(3),
    )
    .unwrap();
    let (fine, _) = train_on(&fine_spec, PrepConfig::standard(), &train, None, &config(3)).unwrap();
    let gated = gate_predictions(
        &coarse.predict(&dev, EvalMode::Pipeline).unwrap(),
        &fine.predict(&dev, EvalMode::GoldHostile).unwrap(),
    )
    .unwrap();
    assert_eq!(gated.len(), dev.len());
    for r in &gated {
        assert_eq!(
            r.fine.is_empty(),
            r.coarse == Coarse::NonHostile,
            "{}",
            r.id
        );
    }
    let mut shuffled = fine.predict(&dev, EvalMode::GoldHostile).unwrap();
    shuffled.reverse();
    assert!(gate_predictions(
        &coarse.predict(&dev, EvalMode::Pipeline).unwrap(),
        &shuffled
    )
    .is_err());
}

#[test]
fn fine_model_in_pipeline_mode_marks_unlabelled_posts_non_hostile() {
    let spec = small_spec(ModelKind::Dmlmc);
    let (train, dev) = datasets(&spec, 8);
    let (model, _) = train_on(&spec, PrepConfig::standard(), &train, None, &config(3)).unwrap();
    for r in model.predict(&dev, EvalMode::Pipeline).unwrap() {
        assert_eq!(r.fine.is_empty(), r.coarse == Coarse::NonHostile);
    }
    for r in model.predict(&dev, EvalMode::GoldHostile).unwrap() {
        assert_eq!(r.coarse, Coarse::Hostile);
        assert!(!r.fine.is_empty());
    }
}

#[test]
fn corrupted_params_are_rejected() {
    let spec = small_spec(ModelKind::Fmbert);
    let (train, _) = datasets(&spec, 6);
    let (model, _) = train_on(&spec, PrepConfig::standard(), &train, None, &config(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&model, dir.path(), None).unwrap();
    let params = dir.path().join("params.bin");
    let mut bytes = fs::read(&params).unwrap();
    bytes.truncate(bytes.len() - 8);
    fs::write(&params, bytes).unwrap();
    assert!(matches!(
        load_checkpoint(dir.path()),
        Err(ModelError::Checkpoint(_))
    ));
    assert!(load_checkpoint(&dir.path().join("missing")).is_err());
}

#[test]
fn fully_stripped_posts_fall_back_to_raw_text() {
    let spec = small_spec(ModelKind::Fmbert);
    let ex = FeatureExtractor::new(&spec, Preprocessor::new(PrepConfig::standard())).unwrap();
    assert_eq!(ex.text_for("p", "!!! ???").unwrap(), "!!! ???");
    assert!(matches!(
        ex.text_for("p", "   "),
        Err(ModelError::DegenerateInput(_))
    ));
    let post = Post {
        id: "p1".into(),
        text: ":) :)".into(),
        labels: LabelSet::non_hostile(),
        split: Split::Test,
    };
    let features = ex.extract(&post.id, &post.text).unwrap();
    assert_eq!(features.pooled[0].len(), D);
}

#[test]
fn single_class_training_data_is_rejected() {
    let spec = small_spec(ModelKind::Fmbert);
    let only = generate_synthetic(3, &SyntheticSpec::new([(LabelKey::NonHostile, 10)]));
    let ex = FeatureExtractor::new(&spec, Preprocessor::new(PrepConfig::standard())).unwrap();
    let data = prepare(&ex, &only).unwrap();
    assert!(train_on(&spec, PrepConfig::standard(), &data, None, &config(1)).is_err());
}
