use std::path::{Path, PathBuf};

use toxens_core::corpus::write_ndjson;
use toxens_core::ensemble::complementarity_corpus;
use toxens_core::metrics::MetricsReport;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["toxens"];
    argv.extend_from_slice(args);
    toxens::run(argv)
}

const MODELS: &str = "\
[model.lr_word_plain]
family = lr_word
view = plain

[model.lr_char_obfuscated]
family = lr_char
view = obfuscated
";

/// Config over a synthetic corpus whose two base models see disjoint cues.
fn fixture(dir: &Path) -> PathBuf {
    let c = complementarity_corpus(700, 0.3, 4);
    write_ndjson(&c, &dir.join("data.ndjson")).unwrap();
    let cfg = dir.join("run.ini");
    std::fs::write(
        &cfg,
        format!(
            "[dataset]\nformat = ndjson\ntrain = data.ndjson\n\n{MODELS}\n\
             [ensemble]\nmodels = lr_word_plain, lr_char_obfuscated\nfolds = 5\nseed = 4\n\n\
             [metrics]\npairs = lr_word_plain.oof:lr_char_obfuscated.oof\n\n\
             [triage]\nclass = insult\nkind = fn\nn = 10\nseed = 1\n"
        ),
    )
    .unwrap();
    cfg
}

fn pipeline(dir: &Path, out: &Path) {
    let cfg = fixture(dir);
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    for cmd in [
        vec!["ingest"],
        vec!["oof"],
        vec!["stack", "--ablate-meta"],
        vec!["thresholds"],
        vec!["evaluate"],
        vec!["correlate"],
    ] {
        let mut args = vec!["--config", c, "--out-dir", o, "--deterministic"];
        args.extend(cmd.iter().copied());
        assert_eq!(run(&args), 0, "{cmd:?}");
    }
}

fn report(out: &Path, set: &str) -> MetricsReport {
    let text = std::fs::read_to_string(out.join(format!("reports/{set}.metrics.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&[]), 1);
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&["ingest"]), 1, "config is required");
}

#[test]
fn misspelled_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    std::fs::write(&cfg, "[dataset]\nformat = ndjson\ntrain = x\n[model.lstm]\nfamily = lstm\nepochz = 3\n").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "ingest"]), 1);
}

#[test]
fn missing_dataset_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.ini");
    std::fs::write(&cfg, "[dataset]\nformat = jigsaw_csv\ntrain = nowhere.csv\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "ingest"]), 1);
}

#[test]
fn stack_before_oof_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let out = dir.path().join("out");
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "stack"]), 1);
}

#[test]
fn evaluate_with_explicit_predictions_and_fixed_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    pipeline(dir.path(), &out);
    let tv = dir.path().join("t.json");
    std::fs::write(&tv, r#"{"classes": ["insult", "threat"], "values": [0.5, 0.5]}"#).unwrap();
    let cfg = dir.path().join("run.ini");
    let pred = out.join("predictions/ensemble.test.csv");
    let code = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "evaluate",
        "--predictions",
        pred.to_str().unwrap(),
        "--thresholds",
        tv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = report(&out, "ensemble");
    assert_eq!(r.per_class.len(), 2);
    assert!(r.macro_f1 > 0.5);
    let table = std::fs::read_to_string(out.join("reports/table3.txt")).unwrap();
    assert_eq!(table.lines().count(), 2, "{table}");
}

#[test]
fn stacked_ensemble_beats_both_bases_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    pipeline(dir.path(), &out);
    let ens = report(&out, "ensemble").macro_f1;
    for base in ["lr_word_plain.oof", "lr_char_obfuscated.oof"] {
        let f1 = report(&out, base).macro_f1;
        assert!(ens > f1, "{base}: {f1} vs ensemble {ens}");
    }
    report(&out, "ensemble_nometa");
    let table = std::fs::read_to_string(out.join("reports/table4.txt")).unwrap();
    assert!(table.contains("insult") && table.contains("threat"), "{table}");
    assert!(out.join("stack/ensemble_0.txt").exists());
    assert!(out.join("oof/train.csv.provenance.json").exists());
}

#[test]
fn manifests_index_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    pipeline(dir.path(), &out);
    let index: std::collections::BTreeMap<String, String> =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifests/index.json")).unwrap()).unwrap();
    for a in ["corpus.ndjson", "oof/train.csv", "predictions/ensemble.test.csv", "reports/table3.txt"] {
        let m = index.get(a).unwrap_or_else(|| panic!("{a} not indexed"));
        let manifest: toxens::manifest::RunManifest =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifests").join(m)).unwrap()).unwrap();
        assert!(manifest.artifacts.iter().any(|x| x == a));
        assert!(manifest.config_hash.as_deref().is_some_and(|h| h.len() == 64));
        assert!(manifest.deterministic && manifest.jobs == 1);
        assert_eq!(manifest.seeds.get("ensemble"), Some(&4));
        assert_eq!(manifest.settings["lr_features"], "tfidf");
        assert_eq!(manifest.settings["config"]["embeddings"]["skipgram"]["dim"], 100);
    }
    let n = std::fs::read_dir(out.join("manifests")).unwrap().count();
    assert_eq!(n, 7, "six runs plus the index");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    pipeline(dir.path(), &a);
    pipeline(dir.path(), &b);
    for f in [
        "reports/table3.txt",
        "reports/table4.txt",
        "reports/ensemble.metrics.json",
        "predictions/ensemble.test.csv",
        "oof/train.csv",
        "stack/ensemble_2.txt",
    ] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn triage_sample_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    pipeline(dir.path(), &out);
    let cfg = dir.path().join("run.ini");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(run(&["--config", c, "--out-dir", o, "triage", "sample", "--kind", "fp", "--class", "threat"]), 0);
    assert_eq!(run(&["--config", c, "--out-dir", o, "triage", "sample"]), 1, "refuses to overwrite");
    assert_eq!(run(&["--config", c, "--out-dir", o, "triage", "sample", "--force"]), 0);
    let path = out.join("triage/session.json");
    let mut s = toxens_core::triage::TriageSession::load(&path).unwrap();
    assert_eq!(s.focal_class, "insult");
    assert!(s.items.len() <= 10);
    let sp = path.to_str().unwrap();
    if s.items.is_empty() {
        return;
    }
    assert_eq!(run(&["--out-dir", o, "triage", "report", "--session", sp]), 1, "nothing annotated");
    let first = s.items[0].id.clone();
    let tag = s.taxonomy.fn_tags[0].id.clone();
    s.record_annotation(&first, &[tag.as_str()]).unwrap();
    s.save(&path).unwrap();
    assert_eq!(run(&["--out-dir", o, "triage", "report", "--session", sp]), 0);
    let text = std::fs::read_to_string(out.join("triage/session.report.txt")).unwrap();
    assert!(text.contains(&tag), "{text}");
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["wikipedia.ini", "twitter.ini"] {
        let cfg = toxens::config::Config::load(&root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!cfg.models.is_empty());
        assert_eq!(cfg.ensemble.folds, 5);
    }
}
