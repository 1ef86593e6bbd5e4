mod common;

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Stdio};

use common::*;
use slicefed::artifact::{ModelArtifact, SavedModel};
use slicefed::federated::{ClientConfig, FlPlan};
use slicefed::neuralnet::OptimizerKind;
use slicefed::synth::{iid_shards, two_gaussians};

fn telemetry_fixture(dir: &Path) -> (Vec<std::path::PathBuf>, usize) {
    let spans: [(&str, std::ops::Range<i64>, i64); 3] = [("amf", 0..20, 1), ("smf", 5..30, 1), ("upf", 0..30, 3)];
    let mut union = BTreeSet::new();
    let mut paths = Vec::new();
    for (entity, span, step) in spans {
        let mut text = String::from("entity_id,timestamp,metric,attribute,value\n");
        for t in span.step_by(step as usize) {
            union.insert(t);
            let attack = (10..=14).contains(&t);
            let cpu = if attack { 90.0 } else { 10.0 } + (t % 3) as f64;
            text.push_str(&format!("{entity},{t},cpu,user,{cpu}\n"));
            text.push_str(&format!("{entity},{t},mem,rss,{}\n", 100 + t));
        }
        let p = dir.join(format!("{entity}.csv"));
        std::fs::write(&p, text).unwrap();
        paths.push(p);
    }
    (paths, union.len())
}

#[test]
fn featurize_joins_labels_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (paths, union) = telemetry_fixture(dir.path());
    std::fs::write(dir.path().join("windows.json"), r#"[{"start": 10, "end": 14}]"#).unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("out{run}"));
        let mut args = vec!["featurize".to_string()];
        for p in &paths {
            args.extend(["--telemetry".to_string(), p.display().to_string()]);
        }
        args.extend(
            ["--windows", dir.path().join("windows.json").to_str().unwrap(), "--benign-ratio", "0.6", "--seed", "3"]
                .map(String::from),
        );
        args.extend(["--out".to_string(), out.display().to_string()]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = slicefed(&refs);
        assert!(o.status.success(), "{}", stderr(&o));
        let summary = read_json(&out.join("featurize_summary.json"));
        assert_eq!(summary["joined_rows"], union as u64);
        assert_eq!(summary["columns"], 3 * 42);
        assert_eq!(summary["joined_malignant"], 5);
        outputs.push(std::fs::read(out.join("behavioral.csv")).unwrap());
        let m = read_json(&out.join("run_manifest.json"));
        assert_eq!(m["command"], "featurize");
        assert_eq!(m["input_digests"].as_array().unwrap().len(), 4);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn featurize_empty_telemetry_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    std::fs::write(&p, "").unwrap();
    let out = dir.path().join("out");
    let o = slicefed(&["featurize", "--telemetry", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no samples"), "{}", stderr(&o));
    // nothing but the (empty) output directory remains
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn train_dt_on_separable_data_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_table_csv(&data, &two_gaussians(400, 6, 20.0, 1));
    let out = dir.path().join("dt");
    let o = slicefed(&["train", "--algo", "dt", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = read_json(&out.join("metrics.json"));
    assert_eq!(m["metrics"]["accuracy"], 1.0);
    assert_eq!(m["n_eval"], 40);
    ModelArtifact::load(&out.join("model.json")).unwrap();

    let out = dir.path().join("cv");
    let o = slicefed(&[
        "train", "--algo", "knn", "--cv", "10", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let folds = std::fs::read_to_string(out.join("cv_folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 11);
    assert_eq!(read_json(&out.join("cv_report.json"))["accuracy"]["mean"], 1.0);
}

#[test]
fn train_usage_errors() {
    let o = slicefed(&["train", "--algo", "svm", "--data", "x.csv", "--out", "o"]);
    assert_eq!(o.status.code(), Some(64));
    let o = slicefed(&["train", "--algo", "mlp", "--data", "x.csv"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn mlp_defaults_match_the_plan() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_table_csv(&data, &two_gaussians(300, 5, 4.0, 2));
    let out = dir.path().join("mlp");
    let o = slicefed(&["train", "--algo", "mlp", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = read_json(&out.join("metrics.json"));
    assert_eq!(m["settings"]["epochs"], 10);
    assert_eq!(m["settings"]["batch_size"], 32);
    assert!(m["metrics"]["accuracy"].as_f64().unwrap() > 0.9);
}

fn write_plan(path: &Path, plan: &FlPlan) {
    std::fs::write(path, serde_json::to_string_pretty(plan).unwrap()).unwrap();
}

#[test]
fn federate_two_rounds_over_seven_shards() {
    let dir = tempfile::tempdir().unwrap();
    let shards = iid_shards(&two_gaussians(1400, 78, 1.0, 5), 7);
    write_flow_shards(dir.path(), &shards);
    let mut plan = FlPlan::seven_agents(2);
    for c in &mut plan.clients {
        c.epochs = 2;
    }
    write_plan(&dir.path().join("plan.json"), &plan);
    let out = dir.path().join("out");
    let o = slicefed(&[
        "federate",
        "--plan",
        dir.path().join("plan.json").to_str().unwrap(),
        "--shards",
        dir.path().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rec = read_json(&out.join("experiment.json"));
    assert_eq!(rec["rounds"].as_array().unwrap().len(), 2);
    let div = std::fs::read_to_string(out.join("divergence.csv")).unwrap();
    assert_eq!(div.lines().count(), 1 + 14);
    assert_eq!(rec["audit"].as_array().unwrap().len(), 28);
    for name in ["accuracy.csv", "accuracy.svg", "timings.json", "global_weights.sfw", "models/client_7.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let timings = std::fs::read_to_string(out.join("timings.json")).unwrap();
    assert!(!std::fs::read_to_string(out.join("experiment.json")).unwrap().contains("time"));
    assert!(timings.contains("aggregate_secs"));
}

#[test]
fn single_client_federation_matches_train() {
    let dir = tempfile::tempdir().unwrap();
    let data = two_gaussians(300, 78, 1.5, 8);
    write_flow_shards(dir.path(), &[data]);
    let plan = FlPlan {
        rounds: 1,
        clients: vec![ClientConfig {
            client_id: 1,
            learning_rate: 2e-3,
            optimizer: OptimizerKind::RmsProp,
            epochs: 3,
            shard_id: 1,
        }],
        aggregation: Default::default(),
        eval_split: 0.1,
        batch_size: 32,
        seed: 11,
    };
    write_plan(&dir.path().join("plan.json"), &plan);
    let fed = dir.path().join("fed");
    let o = slicefed(&[
        "federate",
        "--plan",
        dir.path().join("plan.json").to_str().unwrap(),
        "--shards",
        dir.path().join("shards.json").to_str().unwrap(),
        "--out",
        fed.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tr = dir.path().join("train");
    let o = slicefed(&[
        "train",
        "--algo",
        "mlp",
        "--format",
        "flow",
        "--data",
        dir.path().join("shard_1.csv").to_str().unwrap(),
        "--optimizer",
        "rmsprop",
        "--lr",
        "0.002",
        "--epochs",
        "3",
        "--seed",
        "11",
        "--out",
        tr.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = ModelArtifact::load(&fed.join("models/client_1.json")).unwrap();
    let b = ModelArtifact::load(&tr.join("model.json")).unwrap();
    let (SavedModel::Mlp { weights: wa, standardizer: sa }, SavedModel::Mlp { weights: wb, standardizer: sb }) =
        (a.model, b.model)
    else {
        panic!("expected mlp models");
    };
    assert_eq!(wa, wb);
    assert_eq!(sa, sb);
    assert_eq!(a.schema_hash, b.schema_hash);
}

#[test]
fn analyze_reports() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/anova_rounds.csv");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("anova");
    let o = slicefed(&["analyze", "anova", "--input", fixture.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let model_line = text.lines().find(|l| l.starts_with("Model")).unwrap();
    let p: f64 = model_line.split_whitespace().last().unwrap().parse().unwrap();
    assert!((p - 0.3548).abs() <= 0.0005, "{p}");
    assert!(model_line.contains("1.13519"), "{model_line}");

    let scores = dir.path().join("scores.csv");
    std::fs::write(&scores, "score,label\n0.9,1\n0.8,1\n0.3,0\n0.1,0\n").unwrap();
    let out = dir.path().join("roc");
    let o = slicefed(&["analyze", "roc", "--scores", scores.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&out.join("roc.json"))["auc"], 1.0);

    let line = dir.path().join("line.csv");
    let mut text = String::from("timestamp,a,b,c,label\n");
    for i in 0..50 {
        let t = i as f64;
        text.push_str(&format!("{i},{t},{},{},{}\n", 2.0 * t + 1.0, -t, i % 2));
    }
    std::fs::write(&line, text).unwrap();
    let out = dir.path().join("pca");
    let o = slicefed(&["analyze", "pca", "--data", line.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ev = &read_json(&out.join("pca.json"))["explained_variance"];
    assert!(ev[1].as_f64().unwrap().abs() < 1e-9, "{ev}");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "group,value\na,1\na,2\nb,oops\n").unwrap();
    let o = slicefed(&["analyze", "anova", "--input", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(65));
    assert!(stderr(&o).contains("row 4"), "{}", stderr(&o));
}

#[test]
fn serve_predicts_and_flushes_latency_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_table_csv(&data, &two_gaussians(200, 4, 10.0, 3));
    let model_dir = dir.path().join("m");
    let o = slicefed(&["train", "--algo", "dt", "--data", data.to_str().unwrap(), "--out", model_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let out = dir.path().join("serve");
    let mut child = Command::new(bin())
        .args(["serve", "--bind", "127.0.0.1:0", "--model"])
        .arg(model_dir.join("model.json"))
        .arg("--out")
        .arg(&out)
        .env("RUST_LOG", "warn")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let url = loop {
        let line = lines.next().expect("server prints its address").unwrap();
        if let Some(u) = line.strip_prefix("listening on ") {
            break u.to_string();
        }
    };
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = agent
        .post(&format!("{url}/predict"))
        .send_json(serde_json::json!({"features": [10.0, 10.0, 10.0, 10.0]}))
        .unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let body: serde_json::Value = resp.body_mut().read_json().unwrap();
    assert_eq!(body["model_id"], "model");
    assert_eq!(body["model_version"], 1);
    assert!(body["label"] == "malignant" || body["label"] == "benign");
    assert!(body["latency_micros"].is_u64());

    let status = Command::new("kill").arg("-TERM").arg(child.id().to_string()).status().unwrap();
    assert!(status.success());
    assert!(child.wait().unwrap().success());
    assert_eq!(read_json(&out.join("latency.json"))["count"], 1);
    assert!(out.join("run_manifest.json").exists());
}

#[test]
fn serve_without_model_answers_409() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(bin())
        .args(["serve", "--bind", "127.0.0.1:0", "--out"])
        .arg(dir.path())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let url = loop {
        let line = lines.next().unwrap().unwrap();
        if let Some(u) = line.strip_prefix("listening on ") {
            break u.to_string();
        }
    };
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let resp = agent.post(&format!("{url}/predict")).send_json(serde_json::json!({"features": [0.0]})).unwrap();
    assert_eq!(resp.status().as_u16(), 409);
    child.kill().unwrap();
    let _ = child.wait();
}

#[test]
fn serve_bind_failure_exits_69() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let o = slicefed(&["serve", "--bind", &addr, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(69));
}
