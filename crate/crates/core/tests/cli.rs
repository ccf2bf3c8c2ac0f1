use std::path::Path;
use std::process::{Command, Output};

use eegline::dataset::DatasetManifest;
use eegline::hyperopt::{LayerKind, Ledger, SearchSpace};
use eegline::nn::{load_checkpoint, save_checkpoint, ModelConfig};
use eegline::pipeline::{read_cache_file, sidecar_path};
use eegline::synth::{write_corpus, SynthSpec};

fn eegline(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegline"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EEGLINE_DATA_DIR")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn explain(out: &Output) -> String {
    format!("stdout:\n{}\nstderr:\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--no-such-flag"],
        vec!["ingest", "data", "--manifest", "m.json", "--bogus"],
        vec!["search", "--cache", "c", "--budget", "0", "--seed", "1", "--ledger", "l"],
        vec!["search", "--cache", "c", "--budget", "x", "--seed", "1", "--ledger", "l"],
        vec!["report"],
        vec!["frobnicate"],
    ] {
        let out = eegline(&args, dir.path());
        assert_eq!(code(&out), 1, "{args:?}\n{}", explain(&out));
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
    let out = eegline(&["--help"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("search"));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    std::fs::write(dir.path().join("empty.ndjson"), "").unwrap();
    std::fs::create_dir(dir.path().join("nothing")).unwrap();
    for args in [
        vec!["report", "--ledger", "missing.ndjson"],
        vec!["report", "--ledger", "empty.ndjson"],
        vec!["preprocess", "--manifest", "broken.json", "--out", "c.eegt"],
        vec!["ingest", "nothing", "--manifest", "m.json"],
        vec!["train", "--cache", "none.eegt", "--config", "broken.json", "--out", "m.eegm"],
        vec!["serve", "--model", "missing.eegm"],
    ] {
        let out = eegline(&args, dir.path());
        assert_eq!(code(&out), 2, "{args:?}\n{}", explain(&out));
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn data_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&SynthSpec { subjects: 1, events_per_run: 2, ..Default::default() }, &dir.path().join("edf")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_eegline"))
        .args(["ingest", "--manifest", "m.json"])
        .current_dir(dir.path())
        .env("EEGLINE_DATA_DIR", dir.path().join("edf"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", explain(&out));
    assert_eq!(DatasetManifest::load(&dir.path().join("m.json")).unwrap().trial_count, 4);
}

/// ingest, preprocess (twice), train, search, report, baseline on a small
/// synthetic corpus; every artifact reloads.
#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_corpus(&SynthSpec { subjects: 2, events_per_run: 6, ..Default::default() }, &root.join("edf")).unwrap();

    let out = eegline(&["ingest", "edf", "--manifest", "manifest.json", "--seed", "3"], root);
    assert_eq!(code(&out), 0, "{}", explain(&out));
    let manifest = DatasetManifest::load(&root.join("manifest.json")).unwrap();
    assert_eq!(manifest.trial_count, 24);
    let text = std::fs::read_to_string(root.join("manifest.json")).unwrap();
    assert_eq!(serde_json::from_str::<DatasetManifest>(&text).unwrap(), manifest);

    let out = eegline(&["preprocess", "--manifest", "manifest.json", "--out", "a.eegt"], root);
    assert_eq!(code(&out), 0, "{}", explain(&out));
    let out = eegline(&["preprocess", "--manifest", "manifest.json", "--out", "b.eegt", "--data-dir", "edf"], root);
    assert_eq!(code(&out), 0, "{}", explain(&out));
    let a = std::fs::read(root.join("a.eegt")).unwrap();
    assert_eq!(a, std::fs::read(root.join("b.eegt")).unwrap());
    assert_eq!(read_cache_file(&root.join("a.eegt")).unwrap().len(), 24);
    assert!(sidecar_path(&root.join("a.eegt")).exists());

    let config = ModelConfig::parse_layers("pool(4x4,4), fc(6)", 0.01).unwrap();
    std::fs::write(root.join("cfg.json"), serde_json::to_string(&config).unwrap()).unwrap();
    let out = eegline(
        &["train", "--cache", "a.eegt", "--config", "cfg.json", "--out", "model.eegm", "--epochs", "2", "--batch-size", "8"],
        root,
    );
    assert_eq!(code(&out), 0, "{}", explain(&out));
    let model = load_checkpoint(&root.join("model.eegm")).unwrap();
    assert_eq!(model.config(), &config);
    save_checkpoint(&model, &root.join("again.eegm")).unwrap();
    assert_eq!(std::fs::read(root.join("model.eegm")).unwrap(), std::fs::read(root.join("again.eegm")).unwrap());

    let space = SearchSpace {
        num_layers: [1, 2],
        layer_type_choices: vec![LayerKind::Pool, LayerKind::Fc],
        filters: [1, 2],
        filter_size: [1, 2],
        pool_size: [3, 4],
        pool_stride: [3, 4],
        fc_units: [2, 4],
        keep_prob: [0.5, 0.9],
        learning_rate: [0.001, 0.01],
    };
    std::fs::write(root.join("space.json"), serde_json::to_string(&space).unwrap()).unwrap();
    let search = [
        "search", "--cache", "a.eegt", "--space", "space.json", "--budget", "3", "--seed", "9", "--ledger",
        "ledger.ndjson", "--epochs", "1", "--batch-size", "8", "--no-timing",
    ];
    let out = eegline(&search, root);
    assert_eq!(code(&out), 0, "{}", explain(&out));
    let ledger = Ledger::load(&root.join("ledger.ndjson")).unwrap();
    assert_eq!(ledger.records.len(), 3);
    assert_eq!(ledger.to_ndjson(), std::fs::read_to_string(root.join("ledger.ndjson")).unwrap());
    // rerunning a finished search leaves the ledger untouched
    let out = eegline(&search, root);
    assert_eq!(code(&out), 0, "{}", explain(&out));
    assert_eq!(Ledger::load(&root.join("ledger.ndjson")).unwrap(), ledger);

    let out = eegline(&["report", "--ledger", "ledger.ndjson", "--top", "2", "--trace", "trace.csv"], root);
    assert_eq!(code(&out), 0, "{}", explain(&out));
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.lines().count(), 3, "{table}");
    let trace = std::fs::read_to_string(root.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,accuracy,best\n"));
    assert_eq!(trace.lines().count(), 4);

    let out = eegline(&["baseline", "--cache", "a.eegt", "--out", "baseline.json", "--k", "5", "--epochs", "5"], root);
    assert_eq!(code(&out), 0, "{}", explain(&out));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("baseline.json")).unwrap()).unwrap();
    assert_eq!(report["components"], 5);
    assert_eq!(report["manifest_id"], manifest.id.as_str());
}
