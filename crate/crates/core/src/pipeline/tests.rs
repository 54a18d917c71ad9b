use super::*;
use crate::synth::write_synthetic_captures;
use crate::views::LayerId;

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        batch_size: 16,
        latent_dim: 8,
        encoder_hidden: vec![16],
        decoder_hidden: vec![16],
        scorer_dim: 8,
        gate_dim: 4,
        ..TrainConfig::default()
    }
}

fn view_files(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("view_")).count()
}

fn encoded(root: &Path) -> PathBuf {
    let caps = root.join("caps");
    let manifest = write_synthetic_captures(&caps, 3, 20, 1).unwrap();
    let views = root.join("views");
    let cfg = ViewConfig { packets_per_flow: 4, payload_bytes: 16, ..ViewConfig::default() };
    let s = encode(&caps, &manifest, &views, &cfg).unwrap();
    assert_eq!(s.flows, 60);
    assert_eq!(s.class_counts, vec![("class0".into(), 20), ("class1".into(), 20), ("class2".into(), 20)]);
    views
}

#[test]
fn encode_writes_one_file_per_layer() {
    let dir = tempfile::tempdir().unwrap();
    let views = encoded(dir.path());
    assert_eq!(view_files(&views), 4);
    assert!(views.join("labels.csv").is_file() && views.join("labels.json").is_file());
    let ds = import_views(&views).unwrap();
    assert_eq!(ds.label_names, vec!["class0", "class1", "class2"]);

    let caps = dir.path().join("caps");
    let two = dir.path().join("two");
    let cfg = ViewConfig { layers: vec![LayerId::Network, LayerId::Transport], ..ViewConfig::default() };
    encode(&caps, &caps.join("manifest.csv"), &two, &cfg).unwrap();
    assert_eq!(view_files(&two), 2);
}

#[test]
fn missing_manifest_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = encode(dir.path(), &dir.path().join("nope.csv"), &dir.path().join("o"), &ViewConfig::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("manifest not found"));
}

#[test]
fn output_guard() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    prepare_output(&out, false).unwrap();
    fs::write(out.join("x"), "1").unwrap();
    let err = prepare_output(&out, false).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    prepare_output(&out, true).unwrap();
    assert!(!out.join("x").exists());
}

#[test]
fn run_config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    fs::write(&p, r#"{"train": {"seed": 3}, "views": {"payload_bytes": 8}}"#).unwrap();
    let c = RunConfig::from_file(&p).unwrap();
    assert_eq!((c.train.seed, c.views.payload_bytes, c.views.packets_per_flow), (3, 8, 10));
    fs::write(&p, r#"{"trian": {}}"#).unwrap();
    assert_eq!(RunConfig::from_file(&p).unwrap_err().exit_code(), 2);
}

#[test]
fn analyze_rejects_one_bin() {
    let dir = tempfile::tempdir().unwrap();
    let opts = ReportOptions { bins: 1, ..ReportOptions::default() };
    let err = analyze(dir.path(), None, dir.path(), &opts).unwrap_err();
    assert!(err.to_string().contains("bins must be ≥ 2"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn end_to_end_commands() {
    let dir = tempfile::tempdir().unwrap();
    let views = encoded(dir.path());

    let an = dir.path().join("analysis");
    fs::create_dir_all(&an).unwrap();
    analyze(&views, None, &an, &ReportOptions::default()).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(an.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["layer_names"].as_array().unwrap().len(), 4);

    let run = |name: &str| {
        let out = dir.path().join(name);
        prepare_output(&out, false).unwrap();
        train_command(&views, &out, &TrainConfig { seed: 7, ..quick_train() }).unwrap();
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["metrics.json", CHECKPOINT_FILE, "confusion.csv", "splits.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let ckpt = a.join(CHECKPOINT_FILE);
    let ev = dir.path().join("eval");
    fs::create_dir_all(&ev).unwrap();
    let e = eval_command(&ckpt, &views, "test", &ev).unwrap();
    assert_eq!(fs::read(ev.join("metrics.json")).unwrap(), fs::read(a.join("metrics.json")).unwrap());
    assert_eq!(e.rows, 6);
    assert!(matches!(eval_command(&ckpt, &views, "holdout", &ev), Err(PipelineError::UnknownSplit(_))));

    let p = predict_command(&ckpt, &views, &[0]).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[0].layer_probabilities.len(), 4);
    assert!((p[0].fusion_weights.iter().map(|w| w.1).sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(matches!(predict_command(&ckpt, &views, &[600]), Err(PipelineError::RowOutOfRange { .. })));

    let emb = dir.path().join("emb");
    export_embeddings_command(&ckpt, &views, &emb).unwrap();
    assert_eq!(import_views(&emb).unwrap().dims(), vec![8; 4]);
    analyze(&views, Some(&emb), &an, &ReportOptions::default()).unwrap();
    assert!(an.join("embedding_report.csv").is_file());

    let sw = dir.path().join("sweep");
    fs::create_dir_all(&sw).unwrap();
    let rows = sweep_command(&views, &sw, &TrainConfig { epochs: 1, ..quick_train() }, SweepParam::Beta, &[0.0, 0.9, 0.99, 0.999]).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(fs::read_to_string(sw.join("sweep.csv")).unwrap().lines().count(), 5);

    write_effective_config(&a, "train", &RunConfig::default(), serde_json::Value::Null, &[("views", &views)]).unwrap();
    let eff: EffectiveConfig = serde_json::from_str(&fs::read_to_string(a.join(EFFECTIVE_CONFIG)).unwrap()).unwrap();
    assert_eq!(eff.inputs[0].sha256, hash_path(&views).unwrap());
}

#[test]
fn synth_kinds_parse() {
    assert_eq!("shared-private".parse::<SynthKind>().unwrap(), SynthKind::SharedPrivate);
    assert!("nope".parse::<SynthKind>().is_err());
}
