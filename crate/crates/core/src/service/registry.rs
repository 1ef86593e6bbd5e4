use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ServiceError;
use crate::analytics::EvalMetrics;
use crate::artifact::{ModelKind, SavedModel};

const RECORDS: &str = "records.jsonl";
const INDEX: &str = "index.json";

mod b64 {
    use super::*;

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        STANDARD.decode(String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model_id: String,
    pub kind: ModelKind,
    pub version: u32,
    /// Serialized [`SavedModel`] bytes.
    #[serde(rename = "weights_b64", with = "b64")]
    pub weights: Vec<u8>,
    pub schema_hash: String,
    /// Unix seconds.
    pub created_at: i64,
    #[serde(default)]
    pub metrics_snapshot: Option<EvalMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VersionSel {
    Latest,
    Exact(u32),
}

impl VersionSel {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "latest" {
            return Some(VersionSel::Latest);
        }
        s.parse().ok().map(VersionSel::Exact)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub kind: ModelKind,
    pub versions: Vec<u32>,
    pub latest: u32,
}

/// Index entry: where a record sits in the append-only file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Location {
    version: u32,
    offset: u64,
    len: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct IndexFile {
    records: u64,
    models: BTreeMap<String, Vec<Location>>,
}

type Snapshot = BTreeMap<String, Vec<Arc<ModelRecord>>>;

struct Store {
    dir: PathBuf,
    file: File,
    len: u64,
    index: IndexFile,
}

/// Versioned model pool. Readers clone an immutable snapshot; writers are
/// serialized, append to the record file and publish a new snapshot.
pub struct Registry {
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<Option<Store>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b"._-".contains(&b))
}

fn io(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Io(path.display().to_string(), e)
}

impl Registry {
    pub fn in_memory() -> Self {
        Registry {
            snapshot: RwLock::new(Arc::new(Snapshot::new())),
            writer: Mutex::new(None),
        }
    }

    /// Opens (or creates) a registry directory, replaying the record file.
    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join(RECORDS);
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(|e| io(&path, e))?;
        let mut snap = Snapshot::new();
        let mut index = IndexFile::default();
        let mut offset = 0u64;
        let mut reader = BufReader::new(File::open(&path).map_err(|e| io(&path, e))?);
        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(|e| io(&path, e))? as u64;
            if n == 0 {
                break;
            }
            if !line.ends_with('\n') {
                // torn final write from a crash: drop the partial record
                log::warn!("dropping incomplete trailing record in {}", path.display());
                file.set_len(offset).map_err(|e| io(&path, e))?;
                break;
            }
            let rec: ModelRecord = serde_json::from_str(&line)
                .map_err(|e| ServiceError::CorruptWeights(format!("{} at byte {offset}: {e}", path.display())))?;
            index.models.entry(rec.model_id.clone()).or_default().push(Location {
                version: rec.version,
                offset,
                len: n,
            });
            index.records += 1;
            snap.entry(rec.model_id.clone()).or_default().push(Arc::new(rec));
            offset += n;
        }
        write_index(dir, &index)?;
        let store = Store {
            dir: dir.to_path_buf(),
            file,
            len: offset,
            index,
        };
        Ok(Registry {
            snapshot: RwLock::new(Arc::new(snap)),
            writer: Mutex::new(Some(store)),
        })
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("registry lock").clone()
    }

    /// Stores a new immutable version; returns its number.
    pub fn put(
        &self,
        model_id: &str,
        kind: ModelKind,
        weights: Vec<u8>,
        schema_hash: &str,
        metrics: Option<EvalMetrics>,
    ) -> Result<u32, ServiceError> {
        if !valid_id(model_id) {
            return Err(ServiceError::InvalidModelId(model_id.to_string()));
        }
        SavedModel::from_bytes_as(kind, &weights).map_err(|e| ServiceError::CorruptWeights(e.to_string()))?;
        let mut writer = self.writer.lock().expect("registry writer");
        let current = self.snapshot();
        let version = current
            .get(model_id)
            .and_then(|v| v.last())
            .map_or(1, |r| r.version + 1);
        let created_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs() as i64);
        let rec = ModelRecord {
            model_id: model_id.to_string(),
            kind,
            version,
            weights,
            schema_hash: schema_hash.to_string(),
            created_at,
            metrics_snapshot: metrics,
        };
        if let Some(store) = writer.as_mut() {
            let mut line = serde_json::to_string(&rec).expect("record serializes");
            line.push('\n');
            let path = store.dir.join(RECORDS);
            store.file.write_all(line.as_bytes()).map_err(|e| io(&path, e))?;
            store.file.sync_data().map_err(|e| io(&path, e))?;
            store.index.models.entry(model_id.to_string()).or_default().push(Location {
                version,
                offset: store.len,
                len: line.len() as u64,
            });
            store.index.records += 1;
            store.len += line.len() as u64;
            write_index(&store.dir, &store.index)?;
        }
        let mut next: Snapshot = (*current).clone();
        next.entry(model_id.to_string()).or_default().push(Arc::new(rec));
        *self.snapshot.write().expect("registry lock") = Arc::new(next);
        Ok(version)
    }

    pub fn get(&self, model_id: &str, sel: VersionSel) -> Result<Arc<ModelRecord>, ServiceError> {
        let snap = self.snapshot();
        let versions = snap.get(model_id).ok_or_else(|| ServiceError::NotFound(model_id.to_string()))?;
        let found = match sel {
            VersionSel::Latest => versions.last(),
            VersionSel::Exact(v) => versions.iter().find(|r| r.version == v),
        };
        found
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("{model_id} version {sel:?}")))
    }

    pub fn list(&self) -> Vec<ModelSummary> {
        self.snapshot()
            .iter()
            .filter_map(|(id, recs)| {
                let last = recs.last()?;
                Some(ModelSummary {
                    model_id: id.clone(),
                    kind: last.kind,
                    versions: recs.iter().map(|r| r.version).collect(),
                    latest: last.version,
                })
            })
            .collect()
    }
}

fn write_index(dir: &Path, index: &IndexFile) -> Result<(), ServiceError> {
    let tmp = dir.join(format!("{INDEX}.tmp"));
    let path = dir.join(INDEX);
    std::fs::write(&tmp, serde_json::to_vec_pretty(index).expect("index serializes")).map_err(|e| io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| io(&path, e))
}
