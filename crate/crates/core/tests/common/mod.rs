#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use slicefed::ingest::FlowSchema;
use slicefed::Samples;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_slicefed"))
}

pub fn slicefed(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Flow export with the default 78-column header; malignant rows are tagged DDoS.
pub fn write_flow_csv(path: &Path, data: &Samples) {
    let schema = FlowSchema::default();
    let mut w = csv::Writer::from_path(path).unwrap();
    let mut header = schema.features.clone();
    header.push(schema.label.clone());
    w.write_record(&header).unwrap();
    for (row, label) in data.rows() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(if label == 1 { "DDoS".into() } else { "BENIGN".into() });
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}

/// `timestamp,f0..,label` table as written by featurize.
pub fn write_table_csv(path: &Path, data: &Samples) {
    let mut w = csv::Writer::from_path(path).unwrap();
    let mut header = vec!["timestamp".to_string()];
    header.extend((0..data.dim()).map(|j| format!("f{j}")));
    header.push("label".into());
    w.write_record(&header).unwrap();
    for (i, (row, label)) in data.rows().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(label.to_string());
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}

/// Writes one flow CSV per shard plus `shards.json` into `dir`.
pub fn write_flow_shards(dir: &Path, shards: &[Samples]) {
    let mut entries = Vec::new();
    for (i, s) in shards.iter().enumerate() {
        let file = format!("shard_{}.csv", i + 1);
        write_flow_csv(&dir.join(&file), s);
        entries.push(serde_json::json!({"id": i + 1, "file": file}));
    }
    std::fs::write(dir.join("shards.json"), serde_json::json!({ "shards": entries }).to_string()).unwrap();
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
