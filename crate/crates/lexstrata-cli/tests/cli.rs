//! End-to-end checks of the binary: exit codes, artifact layout, and the
//! byte-level determinism contract on data files.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lexstrata"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

/// Generate a small synthetic corpus and return (corpus, lexicon) paths.
fn syngen_fixture(dir: &Path) -> (String, String) {
    let gen_dir = dir.join("gen");
    let config = dir.join("syngen.json");
    std::fs::write(
        &config,
        r#"{"syngen": {"n_pairs": 12, "n_context_words": 30, "sentences_per_word": 40, "sentence_length": 8, "separation": 0.9}}"#,
    )
    .unwrap();
    let out = run(&[
        "syngen",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        gen_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    (
        gen_dir.join("corpus.txt").to_str().unwrap().to_string(),
        gen_dir.join("lexicon.tsv").to_str().unwrap().to_string(),
    )
}

fn quick_config(dir: &Path) -> String {
    let path = dir.join("run.json");
    std::fs::write(
        &path,
        r#"{
  "textnorm": {"min_count": 2},
  "embed": {"dim": 12, "window": 3, "negatives": 3, "epochs": 2, "subsample_threshold": 0.0},
  "forest": {"n_estimators": 8},
  "eval": {"iterations": 15},
  "sweep": {"parameter": "n_estimators", "grid": [1, 8], "repetitions": 4},
  "ablate": {"mode": "prefix", "n_grid": [2, 12], "repetitions": 4},
  "replicate": {"n_estimators_grid": [1, 8], "max_depth_grid": [2, 5], "sweep_repetitions": 4, "ablation_grid": [2, 12], "ablation_repetitions": 4},
  "exclude_top_k": 4,
  "overlap_k_list": [5, 10]
}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn classify_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, lexicon) = syngen_fixture(tmp.path());
    let config = quick_config(tmp.path());
    let mut outputs = Vec::new();
    for name in ["run_a", "run_b"] {
        let dir = tmp.path().join(name);
        let out = run(&[
            "classify",
            "--config",
            &config,
            "--corpus",
            &corpus,
            "--lexicon",
            &lexicon,
            "--seed",
            "7",
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert_code(&out, 0);
        outputs.push((read(&dir, "misclass.csv"), read(&dir, "accuracy.csv")));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "misclass.csv must be identical");
    assert_eq!(outputs[0].1, outputs[1].1, "accuracy.csv must be identical");
    assert!(outputs[0].0.starts_with("word,origin,pair_id"));
}

#[test]
fn invalid_config_key_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.json");
    std::fs::write(&config, r#"{"embde": {"dim": 10}}"#).unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "classify",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 1);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("embde"),
        "diagnostic names the bad key"
    );
    assert!(!out_dir.exists(), "no output files on config error");
}

#[test]
fn missing_inputs_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "classify",
        "--out-dir",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert_code(&out, 1);
    // No out-dir at all.
    let out = run(&["classify"]);
    assert_code(&out, 1);
    // Unknown preset.
    let out = run(&[
        "classify",
        "--preset",
        "huge",
        "--out-dir",
        tmp.path().join("y").to_str().unwrap(),
    ]);
    assert_code(&out, 1);
}

#[test]
fn validation_errors_exit_two_and_flag_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, _) = syngen_fixture(tmp.path());
    let bad_lexicon = tmp.path().join("bad.tsv");
    std::fs::write(&bad_lexicon, "s000\tMARTIAN\t1\tg\t\n").unwrap();
    let dir = tmp.path().join("out");
    let config = quick_config(tmp.path());
    let out = run(&[
        "classify",
        "--config",
        &config,
        "--corpus",
        &corpus,
        "--lexicon",
        bad_lexicon.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("MARTIAN"));
    let manifest = read(&dir, "manifest.json");
    assert!(manifest.contains("\"partial\": true"));
}

#[test]
fn replicate_writes_the_full_battery_and_charts_render_it() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, lexicon) = syngen_fixture(tmp.path());
    let config = quick_config(tmp.path());
    let dir = tmp.path().join("replicate");
    let out = run(&[
        "replicate",
        "--config",
        &config,
        "--corpus",
        &corpus,
        "--control-corpus",
        &corpus,
        "--lexicon",
        &lexicon,
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let expected = [
        "vocab.tsv",
        "model.tsv",
        "misclass.csv",
        "accuracy.csv",
        "misclass_excluded.csv",
        "accuracy_excluded.csv",
        "shap_summary.csv",
        "sweep_n_estimators.csv",
        "sweep_max_depth.csv",
        "sweep_criterion.csv",
        "ablation_prefix.csv",
        "ablation_random.csv",
        "overlap.csv",
        "summary.json",
        "reference_report.json",
        "manifest.json",
    ];
    for name in expected {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    let manifest = read(&dir, "manifest.json");
    assert!(manifest.contains("\"partial\": false"));
    assert!(manifest.contains("fnv1a64"));
    let report = read(&dir, "reference_report.json");
    assert!(report.contains("mean_accuracy"));
    assert!(report.contains("\"band\": 0.05"));

    // Charts: every known result CSV maps to exactly one SVG basename.
    let out = run(&["charts", "--out-dir", dir.to_str().unwrap()]);
    assert_code(&out, 0);
    let csvs: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().to_string())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    for csv in &csvs {
        let svg = format!("{}.svg", csv.trim_end_matches(".csv"));
        assert!(dir.join(&svg).exists(), "{svg} missing for {csv}");
        let body = read(&dir, &svg);
        assert!(body.starts_with("<svg"));
    }

    // Chart output is deterministic for fixed input CSVs.
    let svg_before = read(&dir, "misclass.svg");
    let out = run(&["charts", "--out-dir", dir.to_str().unwrap()]);
    assert_code(&out, 0);
    assert_eq!(read(&dir, "misclass.svg"), svg_before);

    // Rendering charts must not clobber the run's own manifest.
    let manifest_after = read(&dir, "manifest.json");
    assert!(manifest_after.contains("\"command\": \"replicate\""));
    assert!(read(&dir, "charts_manifest.json").contains("\"command\": \"charts\""));
}

/// `replicate` must be exactly the composition of the individual
/// subcommands: with aligned grids and one seed, each standalone artifact is
/// byte-identical to the one the battery wrote.
#[test]
fn replicate_composes_the_individual_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, lexicon) = syngen_fixture(tmp.path());
    let config = tmp.path().join("compose.json");
    std::fs::write(
        &config,
        r#"{
  "textnorm": {"min_count": 2},
  "embed": {"dim": 12, "window": 3, "negatives": 3, "epochs": 2, "subsample_threshold": 0.0},
  "forest": {"n_estimators": 8},
  "eval": {"iterations": 15},
  "sweep": {"parameter": "n_estimators", "grid": [1, 8], "repetitions": 4},
  "ablate": {"mode": "prefix", "n_grid": [2, 12], "repetitions": 4},
  "replicate": {"n_estimators_grid": [1, 8], "max_depth_grid": [2, 5], "sweep_repetitions": 4, "ablation_grid": [2, 12], "ablation_repetitions": 4},
  "exclude_top_k": 4,
  "overlap_k_list": [5, 10]
}"#,
    )
    .unwrap();
    let config = config.to_str().unwrap().to_string();

    let whole = tmp.path().join("whole");
    let out = run(&[
        "replicate",
        "--config",
        &config,
        "--corpus",
        &corpus,
        "--control-corpus",
        &corpus,
        "--lexicon",
        &lexicon,
        "--out-dir",
        whole.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    let pieces: &[(&str, &[&str])] = &[
        ("classify", &["misclass.csv", "accuracy.csv"]),
        ("sweep", &["sweep_n_estimators.csv"]),
        ("ablate", &["ablation_prefix.csv"]),
        ("explain", &["shap_summary.csv"]),
        ("correlate", &["correlation.csv"]),
        ("overlap", &["overlap.csv"]),
    ];
    for (cmd, files) in pieces {
        let dir = tmp.path().join(cmd);
        let out = run(&[
            cmd,
            "--config",
            &config,
            "--corpus",
            &corpus,
            "--control-corpus",
            &corpus,
            "--lexicon",
            &lexicon,
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert_code(&out, 0);
        for file in *files {
            assert_eq!(
                read(&dir, file),
                read(&whole, file),
                "{cmd}: {file} differs from replicate's"
            );
        }
    }
}

#[test]
fn charts_on_empty_dir_warns_but_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("empty");
    let out = run(&["charts", "--out-dir", dir.to_str().unwrap()]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let svgs = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".svg"))
        .count();
    assert_eq!(svgs, 0);
}

#[test]
fn normalize_vocab_and_train_embed_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.txt");
    std::fs::write(&corpus, "क़ौम और राष्ट्र। क़ौम की बात॥\nकौम भी क़ौम है।\n").unwrap();
    let dir = tmp.path().join("out");
    let out = run(&[
        "normalize",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let normalized = read(&dir, "normalized.txt");
    assert!(!normalized.contains('\u{0958}'), "precomposed qa removed");
    assert!(normalized.contains('\u{093C}'), "nuqta kept by default");

    let out = run(&[
        "vocab",
        "--corpus",
        corpus.to_str().unwrap(),
        "--min-count",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let vocab = read(&dir, "vocab.tsv");
    let qaum_decomposed = "क\u{093C}ौम";
    assert!(vocab.contains(qaum_decomposed));

    // fold-nuqta merges the spelling variants into one entry.
    let out = run(&[
        "vocab",
        "--corpus",
        corpus.to_str().unwrap(),
        "--min-count",
        "1",
        "--fold-nuqta",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let folded = read(&dir, "vocab.tsv");
    assert!(
        folded.lines().any(|l| l.starts_with("कौम\t0\t4")),
        "{folded}"
    );

    let out = run(&[
        "train-embed",
        "--corpus",
        corpus.to_str().unwrap(),
        "--min-count",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let model = read(&dir, "model.tsv");
    assert!(model.starts_with("200\t"), "header starts with dim");
}

#[test]
fn multiple_corpus_files_concatenate() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.txt");
    let b = tmp.path().join("b.txt");
    std::fs::write(&a, "एक दो तीन।\n").unwrap();
    std::fs::write(&b, "चार पाँच।\n").unwrap();
    let dir = tmp.path().join("out");
    let out = run(&[
        "vocab",
        "--corpus",
        a.to_str().unwrap(),
        "--corpus",
        b.to_str().unwrap(),
        "--min-count",
        "1",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let vocab = read(&dir, "vocab.tsv");
    assert!(vocab.contains("एक"));
    assert!(vocab.contains("चार"));
    assert_eq!(vocab.lines().count(), 5);
    // Both files are checksummed in the manifest.
    let manifest = read(&dir, "manifest.json");
    assert_eq!(manifest.matches("\"name\": \"corpus\"").count(), 2);
}

#[test]
fn model_reuse_skips_training_and_stays_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, lexicon) = syngen_fixture(tmp.path());
    let config = quick_config(tmp.path());
    let train_dir = tmp.path().join("trained");
    let out = run(&[
        "train-embed",
        "--config",
        &config,
        "--corpus",
        &corpus,
        "--out-dir",
        train_dir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    let direct = tmp.path().join("direct");
    let out = run(&[
        "classify",
        "--config",
        &config,
        "--corpus",
        &corpus,
        "--lexicon",
        &lexicon,
        "--out-dir",
        direct.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    let reused = tmp.path().join("reused");
    let out = run(&[
        "classify",
        "--config",
        &config,
        "--corpus",
        &corpus,
        "--lexicon",
        &lexicon,
        "--model",
        train_dir.join("model.tsv").to_str().unwrap(),
        "--out-dir",
        reused.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert_eq!(
        read(&direct, "misclass.csv"),
        read(&reused, "misclass.csv"),
        "a reloaded model must reproduce the training run's results"
    );
}
