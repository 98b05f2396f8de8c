mod common;

use std::fs;

use labelwise::checkpoint::Checkpoint;
use labelwise::features::{examples_from, parse_features, read_features, FeatureSource};
use labelwise::report::{cv_tsv, forum_tsv, pair_table_csv};
use labelwise::training_set::{export_training_set, file_name, import_training_file, Format, Part};
use labelwise::Error;
use labelwise_core::agreement::PairTable;
use labelwise_core::flagging::{flag_forums, ScoreBook};
use labelwise_core::ordinal::{evaluate, summarize, train, Model, ModelKind, TrainConfig};
use labelwise_core::resolve::{stratified_folds, GoldRecord, Strategy, StratifyOn};
use labelwise_core::Label;
use tempfile::TempDir;

fn gold(n: usize) -> Vec<GoldRecord> {
    (0..n)
        .map(|i| {
            let label = Label::new((i % 5) as i64).unwrap();
            GoldRecord {
                posting_id: format!("g{i:03}"),
                gold_label: label,
                gold_binary: label.binarize(),
                strategy: Strategy::MostFrequent,
            }
        })
        .collect()
}

fn text_of(id: &str) -> Option<String> {
    Some(format!("text of {id}, with\ttab and\nnewline"))
}

#[test]
fn training_files_are_named_per_fold_and_reimport() {
    let records = gold(50);
    let plan = stratified_folds(&records, 5, 0.1, 3, StratifyOn::Label).unwrap();
    for format in [Format::Tsv, Format::Jsonl] {
        let dir = TempDir::new().unwrap();
        let files = export_training_set(&records, &plan, text_of, format, dir.path()).unwrap();
        assert_eq!(files.len(), 15);
        assert!(dir.path().join(file_name(4, Part::Dev, format)).exists());
        assert_eq!(file_name(0, Part::Train, Format::Tsv), "fold0.train.tsv");
        for fold in 0..5 {
            let mut seen = Vec::new();
            for part in Part::ALL {
                let rows = import_training_file(&dir.path().join(file_name(fold, part, format))).unwrap();
                for r in &rows {
                    let g = records.iter().find(|g| g.posting_id == r.posting_id).unwrap();
                    assert_eq!((r.gold_label, r.gold_binary), (g.gold_label, g.gold_binary));
                    assert_eq!(Some(r.text.clone()), text_of(&r.posting_id));
                }
                seen.extend(rows.into_iter().map(|r| r.posting_id));
            }
            seen.sort();
            assert_eq!(seen.len(), 50);
            seen.dedup();
            assert_eq!(seen.len(), 50);
        }
    }
}

#[test]
fn tsv_training_file_has_the_documented_header() {
    let records = gold(10);
    let plan = stratified_folds(&records, 2, 0.1, 3, StratifyOn::Label).unwrap();
    let dir = TempDir::new().unwrap();
    export_training_set(&records, &plan, |id| Some(id.to_string()), Format::Tsv, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("fold0.test.tsv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "posting_id\ttext\tgold_label\tgold_binary");
}

#[test]
fn missing_text_fails_before_writing() {
    let records = gold(10);
    let plan = stratified_folds(&records, 2, 0.1, 3, StratifyOn::Label).unwrap();
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let err = export_training_set(&records, &plan, |id| (id != "g004").then(|| id.to_string()), Format::Tsv, &out)
        .unwrap_err();
    assert!(err.to_string().contains("g004"));
    assert!(!out.exists());
}

#[test]
fn feature_files_in_both_formats() {
    let dir = TempDir::new().unwrap();
    let jsonl = dir.path().join("f.jsonl");
    fs::write(&jsonl, "{\"posting_id\":\"a\",\"features\":[1.0,2.5]}\n\n{\"posting_id\":\"b\",\"features\":[0,-1e-3]}\n").unwrap();
    let tsv = dir.path().join("f.tsv");
    fs::write(&tsv, "posting_id\tf0\tf1\na\t1.0\t2.5\nb\t0\t-0.001\n").unwrap();
    let a = read_features(&jsonl).unwrap();
    let b = read_features(&tsv).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dim, 2);
}

#[test]
fn feature_file_problems_name_the_line() {
    for (text, jsonl, needle) in [
        ("a\t1\t2\nb\t1\n", false, "line 2"),
        ("a\t1\nb\tx\n", false, "line 2"),
        ("a\t1\na\t2\n", false, "duplicate"),
        ("a\tNaN\n", false, "non-finite"),
        ("a\n", false, "no feature values"),
        ("", false, "no feature rows"),
        ("{\"posting_id\":\"a\",\"features\":[]}\n", true, "line 1"),
        ("{\"posting_id\":\"a\"}\n", true, "line 1"),
    ] {
        let err = parse_features(text, jsonl, "feat").unwrap_err();
        assert!(err.to_string().contains(needle), "{text:?}: {err}");
    }
}

#[test]
fn examples_join_features_with_gold_targets() {
    let table = parse_features("g000\t0.5\ng001\t1.5\n", false, "f").unwrap();
    let mut records = gold(2);
    records[1].gold_binary = 0;
    let examples = examples_from(&table, &records).unwrap();
    assert_eq!(examples[1].features, [1.5]);
    assert_eq!((examples[1].label.value(), examples[1].binary), (1, 0));
    assert!(matches!(examples_from(&table, &gold(3)), Err(Error::Unknown { .. })));
    assert!(FeatureSource::parse("features.tsv").load(None, 0, 0).is_err());
}

#[test]
fn checkpoint_round_trip_reproduces_evaluation_bitwise() {
    let data = FeatureSource::SynthOrdinal.load(None, 200, 4).unwrap();
    let config = TrainConfig {
        epochs: 3,
        hidden_dim: 16,
        ..TrainConfig::default()
    };
    let dir = TempDir::new().unwrap();
    for kind in ModelKind::ALL {
        let trained = train(&data, kind, &config).unwrap();
        let path = dir.path().join(format!("{}.json", kind.name()));
        Checkpoint::new(trained.model.clone(), config.clone(), trained.history.clone())
            .save(&path)
            .unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.model, trained.model);
        assert_eq!(loaded.history, trained.history);
        let before = evaluate(&trained.model, &data).unwrap();
        let after = evaluate(&loaded.model, &data).unwrap();
        assert_eq!(format!("{before:?}"), format!("{after:?}"));
        for ex in &data {
            let p = trained.model.predict_label(&ex.features).unwrap();
            assert_eq!(p, loaded.model.predict_label(&ex.features).unwrap());
        }
    }
}

#[test]
fn checkpoint_rejects_bad_documents() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ck.json");
    let mut model = Model::random(ModelKind::Coral, 2, 4, 1);
    let ck = Checkpoint::new(model.clone(), TrainConfig::default(), vec![]);
    ck.save(&path).unwrap();

    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    doc["schema_version"] = 42.into();
    fs::write(&path, doc.to_string()).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(Error::SchemaVersion { found: 42, .. })));

    doc["schema_version"] = 1.into();
    doc["model"]["ordinal"]["thresholds"] = serde_json::json!([0.0]);
    fs::write(&path, doc.to_string()).unwrap();
    assert!(Checkpoint::load(&path).is_err());

    model.ordinal.as_mut().unwrap().thresholds[0] = f64::NAN;
    assert!(Checkpoint::new(model, TrainConfig::default(), vec![]).save(&path).is_err());
}

#[test]
fn pair_table_csv_mirrors_the_published_layout() {
    let table = PairTable::from_relative(&[
        [0.525, 0.032, 0.037, 0.015, 0.003],
        [0.032, 0.014, 0.020, 0.009, 0.001],
        [0.037, 0.020, 0.052, 0.036, 0.007],
        [0.015, 0.009, 0.036, 0.044, 0.016],
        [0.003, 0.001, 0.007, 0.016, 0.013],
    ]);
    let csv = pair_table_csv(&table);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "label,0,1,2,3,4");
    assert_eq!(lines[1], "0,0.525,0.032,0.037,0.015,0.003");
    assert_eq!(lines.len(), 6);
    assert_eq!(pair_table_csv(&table.binarized()).lines().next().unwrap(), "label,0,1");
}

#[test]
fn cv_and_forum_tables_have_the_documented_columns() {
    let report = summarize(ModelKind::BinCoral, Vec::new());
    let tsv = cv_tsv(&[report]);
    assert_eq!(
        tsv.lines().next().unwrap(),
        "model\thead\taccuracy_mean\taccuracy_std\tf1_macro_mean\tf1_macro_std"
    );

    let mut book = ScoreBook::new();
    book.ingest(common::six_forum_scores()).unwrap();
    let tsv = forum_tsv(&flag_forums(&book.forum_rates(0.5), 0.5, 0.1));
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "forum_id\tn\trate\tflagged");
    assert_eq!(lines[1], "f3\t100\t0.27\ttrue");
    assert_eq!(lines[4], "f6\t100\t0.07\tfalse");
}
