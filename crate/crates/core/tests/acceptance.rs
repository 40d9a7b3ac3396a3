//! Acceptance harness: one line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hostility_core::corpus::{
    binarize_for_class, generate_synthetic, hostile_subset, load_corpus, Corpus, CorpusFormat,
    FineLabel, FineSet, LabelKey, Split, SyntheticSpec,
};
use hostility_core::encoder::fit_pca;
use hostility_core::evaluation::{accuracy, confusion_matrix, weighted_f1, EvalMode};
use hostility_core::heads::{
    forward_binary, forward_fusion, forward_multilabel, forward_recurrent, merge_scores, CellKind,
    Head, MlpConfig, MlpHead, OvrMode, RecurrentConfig, RecurrentHead,
};
use hostility_core::model::{
    evaluate_model, prepare, train_on, FeatureExtractor, ModelKind, ModelSpec, TrainedHead,
};
use hostility_core::textprep::{clean, PrepConfig, Preprocessor};
use hostility_core::training::{gradient_check, LossId, Target, TrainConfig};

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Status;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Status::Fail(format!($($msg)+));
        }
    };
}

macro_rules! attempt {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return Status::Fail(format!("{}: {err}", stringify!($e))),
        }
    };
}

fn main() {
    let criteria: [(u8, &str, Check); 12] = [
        (1, "metric oracle equivalence", metric_oracle),
        (2, "hand-computed F1 fixture", f1_fixture),
        (3, "binarization counts", binarization_counts),
        (4, "DMLMC population", dmlmc_population),
        (5, "PCA against dense eigendecomposition", pca_oracle),
        (6, "head output invariants", head_invariants),
        (7, "gradient checks", gradient_checks),
        (8, "smoke training", smoke_training),
        (9, "learning-rate schedule", schedule_check),
        (10, "preprocessing properties", preprocessing_properties),
        (11, "OvR gold-hostile never empty", ovr_never_empty),
        (12, "real-backbone reference numbers", real_backbone),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let started = Instant::now();
        let status =
            std::panic::catch_unwind(check).unwrap_or_else(|_| Status::Fail("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match status {
            Status::Pass(d) => ("PASS", d),
            Status::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Status::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id:>2} {tag} {name} ({secs:.2}s): {detail}");
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

// 1

fn metric_oracle() -> Status {
    let started = Instant::now();
    let classes: Vec<u8> = (0..5).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let gold: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..5)).collect();
    let pred: Vec<u8> = gold
        .iter()
        .map(|&g| {
            if rng.gen_bool(0.6) {
                g
            } else {
                rng.gen_range(0..5)
            }
        })
        .collect();

    let hits = pred.iter().zip(&gold).filter(|(p, g)| p == g).count();
    let oracle_acc = hits as f64 / 1000.0;
    let mut oracle_counts = vec![vec![0u64; 5]; 5];
    for (&p, &g) in pred.iter().zip(&gold) {
        oracle_counts[g as usize][p as usize] += 1;
    }
    let mut oracle_f1 = 0.0;
    for c in 0..5u8 {
        let tp = (0..1000).filter(|&i| pred[i] == c && gold[i] == c).count() as f64;
        let fp = (0..1000).filter(|&i| pred[i] == c && gold[i] != c).count() as f64;
        let fneg = (0..1000).filter(|&i| pred[i] != c && gold[i] == c).count() as f64;
        let f1 = if tp > 0.0 {
            2.0 * tp / (2.0 * tp + fp + fneg)
        } else {
            0.0
        };
        oracle_f1 += (tp + fneg) / 1000.0 * f1;
    }

    let acc = attempt!(accuracy(&pred, &gold));
    let f1 = attempt!(weighted_f1(&pred, &gold, &classes));
    let matrix = attempt!(confusion_matrix(&pred, &gold, &classes));
    ensure!(
        (acc - oracle_acc).abs() <= 1e-9,
        "accuracy {acc} vs {oracle_acc}"
    );
    ensure!(
        (f1 - oracle_f1).abs() <= 1e-9,
        "weighted F1 {f1} vs {oracle_f1}"
    );
    ensure!(matrix.counts == oracle_counts, "confusion matrices differ");
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s");
    Status::Pass(format!(
        "acc {acc:.4}, weighted F1 {f1:.6} match the brute-force oracle"
    ))
}

// 2

fn f1_fixture() -> Status {
    let gold = ["A", "A", "B"];
    let pred = ["A", "B", "B"];
    let acc = attempt!(accuracy(&pred, &gold));
    let f1 = attempt!(weighted_f1(&pred, &gold, &["A", "B"]));
    ensure!((acc - 2.0 / 3.0).abs() < 1e-15, "accuracy {acc}");
    ensure!((f1 - 2.0 / 3.0).abs() < 1e-15, "weighted F1 {f1}");
    Status::Pass("accuracy = weighted F1 = 2/3".into())
}

// 3

fn synthetic_spec(per_class: usize, split: Split) -> SyntheticSpec {
    SyntheticSpec::new([
        (LabelKey::NonHostile, 5 * per_class),
        (LabelKey::Fine(FineLabel::Fake), per_class),
        (LabelKey::Fine(FineLabel::Hate), per_class + 3),
        (LabelKey::Fine(FineLabel::Defamation), per_class + 7),
        (LabelKey::Fine(FineLabel::Offensive), per_class + 11),
    ])
    .with_combo(
        FineSet::from_labels([FineLabel::Hate, FineLabel::Offensive]),
        9,
    )
    .with_combo(
        FineSet::from_labels([FineLabel::Fake, FineLabel::Defamation, FineLabel::Hate]),
        4,
    )
    .with_split(split)
}

fn declared_yes(spec: &SyntheticSpec, label: FineLabel) -> usize {
    spec.sizes.get(&LabelKey::Fine(label)).copied().unwrap_or(0)
        + spec
            .combos
            .iter()
            .filter(|(set, _)| set.contains(label))
            .map(|(_, n)| n)
            .sum::<usize>()
}

fn real_train_split() -> Option<PathBuf> {
    std::env::var_os("HOSTILITY_TRAIN_TSV")
        .map(PathBuf::from)
        .filter(|p| p.exists())
}

fn binarization_counts() -> Status {
    let spec = synthetic_spec(40, Split::Train);
    let corpus = generate_synthetic(3, &spec);
    let mut total = 0;
    for label in FineLabel::ALL {
        let yes = binarize_for_class(&corpus, label).yes_count();
        ensure!(
            yes == declared_yes(&spec, label),
            "{label}: {yes} vs {}",
            declared_yes(&spec, label)
        );
        total += yes;
    }
    let multiplicity: usize = corpus.posts().iter().map(|p| p.labels.fine().len()).sum();
    ensure!(
        total == multiplicity,
        "sum of yes-counts {total} vs multiplicity {multiplicity}"
    );
    let Some(path) = real_train_split() else {
        return Status::Pass(format!(
            "synthetic yes-counts match the generator, sum {total}; real dataset absent (set HOSTILITY_TRAIN_TSV)"
        ));
    };
    let real = attempt!(load_corpus(
        &path,
        CorpusFormat::from_path(&path),
        Split::Train
    ));
    let expected = [
        (FineLabel::Fake, 1144),
        (FineLabel::Hate, 792),
        (FineLabel::Defamation, 742),
        (FineLabel::Offensive, 564),
    ];
    for (label, n) in expected {
        let yes = binarize_for_class(&real, label).yes_count();
        ensure!(yes == n, "real {label}: {yes} vs {n}");
    }
    Status::Pass(format!(
        "synthetic and real train-split yes-counts match, synthetic sum {total}"
    ))
}

// 4

fn hash_spec(kind: ModelKind, d: usize) -> ModelSpec {
    let mut spec = ModelSpec::hash_test(kind, d, 5);
    spec.mlp_hidden = [d, d / 2, d / 4];
    spec
}

fn dmlmc_population() -> Status {
    let corpus = generate_synthetic(4, &synthetic_spec(12, Split::Train));
    let brute = corpus
        .posts()
        .iter()
        .filter(|p| !p.labels.fine().is_empty())
        .count();
    ensure!(
        hostile_subset(&corpus).len() == brute,
        "hostile subset differs from brute-force filter"
    );
    let spec = hash_spec(ModelKind::Dmlmc, 16);
    let ex = attempt!(FeatureExtractor::new(
        &spec,
        Preprocessor::new(PrepConfig::standard())
    ));
    let data = attempt!(prepare(&ex, &corpus));
    let config = TrainConfig {
        epochs: 1,
        batch_size: 1,
        dropout: 0.0,
        ..TrainConfig::for_backend(hostility_core::encoder::Backend::HashTest)
    };
    let (_, history) = attempt!(train_on(
        &spec,
        PrepConfig::standard(),
        &data,
        None,
        &config
    ));
    let steps = history.heads["head"].learning_rates.len();
    ensure!(
        steps == brute,
        "one step per example gives {steps} steps, {brute} hostile posts"
    );
    let Some(path) = real_train_split() else {
        return Status::Pass(format!(
            "{steps} training examples = {brute} gold-hostile of {} posts; real dataset absent",
            corpus.len()
        ));
    };
    let real = attempt!(load_corpus(
        &path,
        CorpusFormat::from_path(&path),
        Split::Train
    ));
    let real_brute = real
        .posts()
        .iter()
        .filter(|p| !p.labels.fine().is_empty())
        .count();
    ensure!(
        hostile_subset(&real).len() == real_brute,
        "real hostile subset differs"
    );
    Status::Pass(format!(
        "{steps} = {brute} gold-hostile synthetic posts; real subset {real_brute}"
    ))
}

// 5

fn pca_oracle() -> Status {
    let (n, d, k) = (200, 768, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
    let reducer = attempt!(fit_pca(x.view(), k));

    let m = DMatrix::from_row_slice(n, d, x.as_slice().expect("standard layout"));
    let mean = m.row_mean();
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let mut oracle: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    oracle.sort_by(|a, b| b.total_cmp(a));
    let worst = reducer
        .explained_variance
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure!(reducer.k() == k, "kept {} components", reducer.k());
    ensure!(worst <= 1e-6, "variance error {worst:e}");

    let rank = 5;
    let a = Array2::from_shape_fn((n, rank), |_| rng.sample::<f64, _>(StandardNormal));
    let b = Array2::from_shape_fn((rank, 30), |_| rng.sample::<f64, _>(StandardNormal));
    let offset = Array1::from_shape_fn(30, |i| i as f64);
    let exact = a.dot(&b) + &offset;
    let low = attempt!(fit_pca(exact.view(), rank));
    let back = low.inverse_transform(attempt!(low.transform(exact.view())).view());
    let recon = (&back - &exact).iter().map(|v| v.abs()).fold(0.0, f64::max);
    ensure!(recon <= 1e-9, "rank-{rank} reconstruction error {recon:e}");
    Status::Pass(format!(
        "variance error {worst:.1e}, rank-{rank} reconstruction {recon:.1e}"
    ))
}

// 6

fn random_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| scale * rng.sample::<f64, _>(StandardNormal))
}

fn head_invariants() -> Status {
    const PASSES: usize = 10_000;
    let d = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let hidden = [16, 8, 8];
    let binary = MlpHead::new(MlpConfig::binary(d).with_hidden(hidden), &mut rng);
    let fusion = MlpHead::new(MlpConfig::binary(2 * d).with_hidden(hidden), &mut rng);
    let multi = MlpHead::new(MlpConfig::multilabel(d).with_hidden(hidden), &mut rng);
    let lstm = RecurrentHead::new(
        RecurrentConfig::new(CellKind::Lstm, d).with_hidden(4, hidden),
        &mut rng,
    );
    let gru = RecurrentHead::new(
        RecurrentConfig::new(CellKind::Gru, d).with_hidden(4, hidden),
        &mut rng,
    );
    let mut worst: f64 = 0.0;
    for i in 0..PASSES {
        let scale = if i % 10 == 0 { 50.0 } else { 1.0 };
        let a = random_vec(&mut rng, d, scale);
        let b = random_vec(&mut rng, d, scale);
        let len = rng.gen_range(1..6);
        let seq = Array2::from_shape_fn((len, d), |_| scale * rng.sample::<f64, _>(StandardNormal));
        let pairs = [
            attempt!(forward_binary(a.view(), &binary)),
            attempt!(forward_fusion(a.view(), b.view(), &fusion)),
            attempt!(forward_recurrent(&seq, &lstm)),
            attempt!(forward_recurrent(&seq, &gru)),
        ];
        for p in pairs {
            worst = worst.max((p[0] + p[1] - 1.0).abs());
        }
        for p in attempt!(forward_multilabel(a.view(), &multi)) {
            ensure!(p > 0.0 && p < 1.0, "sigmoid output {p} outside (0, 1)");
        }
    }
    ensure!(worst <= 1e-6, "softmax sum off by {worst:e}");

    let spec = hash_spec(ModelKind::Coghm, d);
    ensure!(
        spec.pooled_width() == 2 * d,
        "fused width {}",
        spec.pooled_width()
    );
    let corpus = generate_synthetic(6, &synthetic_spec(4, Split::Train));
    let ex = attempt!(FeatureExtractor::new(
        &spec,
        Preprocessor::new(PrepConfig::standard())
    ));
    let data = attempt!(prepare(&ex, &corpus));
    let config = TrainConfig {
        epochs: 1,
        ..TrainConfig::for_backend(hostility_core::encoder::Backend::HashTest)
    };
    let (model, _) = attempt!(train_on(
        &spec,
        PrepConfig::standard(),
        &data,
        None,
        &config
    ));
    let TrainedHead::Mlp(head) = &model.head else {
        return Status::Fail("CoGHM did not train an MLP head".into());
    };
    ensure!(
        head.config().input == 2 * d,
        "CoGHM input width {}",
        head.config().input
    );
    Status::Pass(format!(
        "{PASSES} passes per head, softmax sum error {worst:.1e}, CoGHM input 2d = {}",
        2 * d
    ))
}

// 7

fn gradient_checks() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let hidden = [5, 4, 3];
    let x = random_vec(&mut rng, 4, 1.0);
    let seq = Array2::from_shape_fn((3, 4), |_| rng.sample::<f64, _>(StandardNormal));
    let mut results = BTreeMap::new();

    let mut binary = MlpHead::new(MlpConfig::binary(4).with_hidden(hidden), &mut rng);
    results.insert(
        "mlp+ce",
        attempt!(gradient_check(
            &mut binary,
            &x,
            &Target::Class(1),
            LossId::CrossEntropy
        )),
    );
    let mut multi = MlpHead::new(MlpConfig::multilabel(4).with_hidden(hidden), &mut rng);
    let y = Target::MultiHot(vec![true, false, true, false]);
    results.insert(
        "mlp+bce",
        attempt!(gradient_check(
            &mut multi,
            &x,
            &y,
            LossId::BinaryCrossEntropy
        )),
    );
    let mut fusion = MlpHead::new(MlpConfig::binary(8).with_hidden(hidden), &mut rng);
    let joint = attempt!(hostility_core::heads::fuse(x.view(), x.mapv(|v| -v).view()));
    results.insert(
        "fusion+ce",
        attempt!(gradient_check(
            &mut fusion,
            &joint,
            &Target::Class(0),
            LossId::CrossEntropy
        )),
    );
    for (name, cell) in [("bilstm+ce", CellKind::Lstm), ("bigru+ce", CellKind::Gru)] {
        let mut head = RecurrentHead::new(
            RecurrentConfig::new(cell, 4).with_hidden(3, hidden),
            &mut rng,
        );
        results.insert(
            name,
            attempt!(gradient_check(
                &mut head,
                &seq,
                &Target::Class(1),
                LossId::CrossEntropy
            )),
        );
    }
    let mut parts = Vec::new();
    for (name, r) in &results {
        ensure!(r.checked > 0, "{name}: no parameters checked");
        ensure!(
            r.max_relative_error < 1e-4,
            "{name}: relative error {:e}",
            r.max_relative_error
        );
        parts.push(format!("{name} {:.1e}", r.max_relative_error));
    }
    Status::Pass(parts.join(", "))
}

// 8

fn smoke_corpus() -> Corpus {
    let spec = SyntheticSpec::new([
        (LabelKey::NonHostile, 200),
        (LabelKey::Fine(FineLabel::Fake), 40),
        (LabelKey::Fine(FineLabel::Hate), 40),
        (LabelKey::Fine(FineLabel::Defamation), 40),
        (LabelKey::Fine(FineLabel::Offensive), 40),
    ])
    .with_combo(
        FineSet::from_labels([FineLabel::Hate, FineLabel::Offensive]),
        40,
    );
    generate_synthetic(8, &spec)
}

fn smoke_config() -> TrainConfig {
    TrainConfig {
        epochs: 10,
        learning_rate: 5e-3,
        ..TrainConfig::for_backend(hostility_core::encoder::Backend::HashTest)
    }
}

fn smoke_training() -> Status {
    let started = Instant::now();
    let corpus = smoke_corpus();
    ensure!(corpus.len() == 400, "corpus has {} posts", corpus.len());
    let d = 64;
    let coarse_spec = hash_spec(ModelKind::Fmbert, d);
    let ex = attempt!(FeatureExtractor::new(
        &coarse_spec,
        Preprocessor::new(PrepConfig::standard())
    ));
    let data = attempt!(prepare(&ex, &corpus));
    let config = smoke_config();

    let (coarse, h1) = attempt!(train_on(
        &coarse_spec,
        PrepConfig::standard(),
        &data,
        None,
        &config
    ));
    let (_, h2) = attempt!(train_on(
        &coarse_spec,
        PrepConfig::standard(),
        &data,
        None,
        &config
    ));
    let report = attempt!(evaluate_model(&coarse, &data, EvalMode::GoldHostile));
    let acc = report.coarse.map_or(0.0, |c| c.accuracy);
    ensure!(acc >= 0.95, "coarse train accuracy {acc:.4}");
    let same = attempt!(serde_json::to_vec(&h1)) == attempt!(serde_json::to_vec(&h2));
    ensure!(same, "coarse histories differ between identical runs");

    let ovr_spec = hash_spec(ModelKind::Ovr, d);
    let (ovr, o1) = attempt!(train_on(
        &ovr_spec,
        PrepConfig::standard(),
        &data,
        None,
        &config
    ));
    let (_, o2) = attempt!(train_on(
        &ovr_spec,
        PrepConfig::standard(),
        &data,
        None,
        &config
    ));
    let same = attempt!(serde_json::to_vec(&o1)) == attempt!(serde_json::to_vec(&o2));
    ensure!(same, "OvR histories differ between identical runs");
    let TrainedHead::Ovr(ensemble) = &ovr.head else {
        return Status::Fail("OvR did not train an ensemble".into());
    };
    let mut member_acc = Vec::new();
    for label in FineLabel::ALL {
        let view = binarize_for_class(&corpus, label);
        let member = ensemble.member(label).expect("trained member");
        let mut hits = 0;
        for (id, yes) in &view.items {
            let i = corpus
                .posts()
                .iter()
                .position(|p| &p.id == id)
                .expect("id in corpus");
            let p = attempt!(member.predict(&data.features[i].pooled[0]));
            hits += usize::from((p[0] >= ensemble.threshold()) == *yes);
        }
        let a = hits as f64 / view.len() as f64;
        ensure!(a >= 0.90, "{label} member accuracy {a:.4} on its view");
        member_acc.push(format!("{label} {a:.3}"));
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 120.0, "took {secs:.1}s");
    Status::Pass(format!(
        "coarse {acc:.4}; members {}; deterministic histories; d = {d}",
        member_acc.join(", ")
    ))
}

// 9

fn schedule_check() -> Status {
    let corpus = generate_synthetic(9, &synthetic_spec(6, Split::Train));
    let spec = hash_spec(ModelKind::Fmbert, 16);
    let ex = attempt!(FeatureExtractor::new(
        &spec,
        Preprocessor::new(PrepConfig::standard())
    ));
    let data = attempt!(prepare(&ex, &corpus));
    let config = TrainConfig {
        epochs: 3,
        batch_size: 8,
        ..TrainConfig::for_backend(hostility_core::encoder::Backend::HashTest)
    };
    let (_, history) = attempt!(train_on(
        &spec,
        PrepConfig::standard(),
        &data,
        None,
        &config
    ));
    let lrs = &history.heads["head"].learning_rates;
    let total = lrs.len();
    ensure!(
        total == config.epochs * config.steps_per_epoch(corpus.len()),
        "{total} recorded steps"
    );
    let (peak_step, peak) =
        lrs.iter().copied().enumerate().fold(
            (0, f64::MIN),
            |best, (i, v)| if v > best.1 { (i, v) } else { best },
        );
    let expected = (config.warmup * total as f64).ceil() as usize;
    ensure!(
        peak_step.abs_diff(expected) <= 1,
        "peak at step {peak_step}, expected {expected}"
    );
    let last = lrs[total - 1];
    ensure!(
        last <= peak / total as f64,
        "final rate {last:e} above peak/total"
    );
    Status::Pass(format!(
        "{total} steps, peak {peak:e} at step {peak_step}, final {last:e}"
    ))
}

// 10

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 12] = [
        "भारत",
        "नहीं",
        "क्षमा",
        "ज़रूर",
        "hello",
        "RT",
        "123",
        ":)",
        ":-(",
        "!!",
        "\n",
        "\u{200D}",
    ];
    let mut s = String::new();
    for _ in 0..rng.gen_range(0..16) {
        match rng.gen_range(0..4) {
            0 => s.push_str(PIECES[rng.gen_range(0..PIECES.len())]),
            1 => s.push(char::from_u32(rng.gen_range(0x0900..0x0980)).expect("devanagari block")),
            2 => s.push(rng.gen_range(' '..='~')),
            _ => s.push(rng.gen::<char>()),
        }
        if rng.gen_bool(0.3) {
            s.push(' ');
        }
    }
    s
}

fn is_devanagari_letter(c: char) -> bool {
    matches!(c, '\u{0904}'..='\u{0939}' | '\u{0958}'..='\u{0961}' | '\u{0966}'..='\u{096F}')
}

fn preprocessing_properties() -> Status {
    const CASES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let identity = Preprocessor::new(PrepConfig::default());
    let standard = PrepConfig::standard();
    for _ in 0..CASES {
        let text = random_text(&mut rng);
        let once = clean(&text, &standard);
        ensure!(
            clean(&once, &standard) == once,
            "clean not idempotent on {text:?}"
        );
        ensure!(
            attempt!(identity.apply("p", &text)) == text,
            "identity config changed {text:?}"
        );
        let kept: String = once.chars().filter(|&c| is_devanagari_letter(c)).collect();
        let original: String = text.chars().filter(|&c| is_devanagari_letter(c)).collect();
        ensure!(kept == original, "Devanagari letters lost from {text:?}");
    }
    Status::Pass(format!("{CASES} mixed-script strings"))
}

// 11

fn ovr_never_empty() -> Status {
    const CASES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut below = 0;
    for i in 0..CASES {
        let threshold = rng.gen_range(0.05..0.95);
        let scores: [f64; 4] = if i % 2 == 0 {
            below += 1;
            std::array::from_fn(|_| rng.gen_range(0.0..threshold))
        } else {
            std::array::from_fn(|_| rng.gen::<f64>())
        };
        let set = merge_scores(scores, threshold, OvrMode::GoldHostile);
        ensure!(!set.is_empty(), "empty set for {scores:?} at {threshold}");
        if scores.iter().all(|&s| s < threshold) {
            ensure!(set.len() == 1, "fallback picked {} classes", set.len());
        }
    }
    Status::Pass(format!(
        "{CASES} score vectors, {below} all below threshold"
    ))
}

// 12

fn real_backbone() -> Status {
    Status::Skip(
        "non-gating; needs real mBERT/XLM-R weights, the real dataset and accelerator time".into(),
    )
}
