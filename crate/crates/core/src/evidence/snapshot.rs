//! Snapshot directories: `manifest.json`, `agents.jsonl` and
//! `interactions.jsonl`, with SHA-256 checksums in the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{compare_evidence, EvidenceError, EvidenceStore, InteractionRecord};
use crate::catalog::{AgentEntity, Catalog, Cui};

pub const FORMAT_VERSION: u64 = 1;
const MANIFEST: &str = "manifest.json";
const AGENTS: &str = "agents.jsonl";
const INTERACTIONS: &str = "interactions.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotCounts {
    pub agents: usize,
    pub interactions: usize,
    pub evidence: usize,
    pub papers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u64,
    pub built_at: String,
    pub tau: f64,
    pub counts: SnapshotCounts,
    pub checksums: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotAgent {
    #[serde(flatten)]
    entity: AgentEntity,
    canonical: Cui,
}

fn io_err(path: &Path, e: std::io::Error) -> EvidenceError {
    EvidenceError::Io(format!("{}: {e}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_jsonl<T: Serialize>(items: impl Iterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item).expect("serializable");
        out.push(b'\n');
    }
    out
}

pub fn export_snapshot(store: &EvidenceStore, dir: &Path) -> Result<Manifest, EvidenceError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let catalog = store.catalog();
    let agents = to_jsonl(
        catalog
            .agents()
            .map(|a| SnapshotAgent { entity: a.clone(), canonical: catalog.clusters().canonical(&a.cui).clone() }),
    );
    let interactions = to_jsonl(store.records().iter());
    let mut checksums = BTreeMap::new();
    for (name, bytes) in [(AGENTS, &agents), (INTERACTIONS, &interactions)] {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        checksums.insert(name.to_string(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        built_at: store.built_at().to_string(),
        tau: store.tau(),
        counts: SnapshotCounts {
            agents: catalog.len(),
            interactions: store.records().len(),
            evidence: store.evidence_count(),
            papers: store.paper_count(),
        },
        checksums,
    };
    let path = dir.join(MANIFEST);
    let json = serde_json::to_vec_pretty(&manifest).expect("serializable");
    fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

fn read_manifest(dir: &Path) -> Result<Manifest, EvidenceError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| EvidenceError::Snapshot(format!("{MANIFEST}: {e}")))?;
    let version = value
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| EvidenceError::Snapshot(format!("{MANIFEST}: missing format_version")))?;
    if version != FORMAT_VERSION {
        return Err(EvidenceError::UnsupportedVersion { found: version, expected: FORMAT_VERSION });
    }
    serde_json::from_value(value).map_err(|e| EvidenceError::Snapshot(format!("{MANIFEST}: {e}")))
}

fn read_verified(dir: &Path, name: &str, manifest: &Manifest) -> Result<String, EvidenceError> {
    let expected = manifest
        .checksums
        .get(name)
        .ok_or_else(|| EvidenceError::Snapshot(format!("manifest lacks a checksum for {name}")))?;
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    if !sha256_hex(&bytes).eq_ignore_ascii_case(expected) {
        return Err(EvidenceError::ChecksumMismatch { file: name.to_string() });
    }
    String::from_utf8(bytes).map_err(|e| EvidenceError::Snapshot(format!("{name}: {e}")))
}

fn parse_lines<T: serde::de::DeserializeOwned>(name: &str, text: &str) -> Result<Vec<T>, EvidenceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvidenceError::Snapshot(format!("{name} line {}: {e}", i + 1)))
        })
        .collect()
}

fn validate_record(r: &InteractionRecord) -> Result<(), EvidenceError> {
    let bad = |why: &str| Err(EvidenceError::Snapshot(format!("record {}: {why}", r.interaction_id)));
    if r.cui_a != *r.interaction_id.first() || r.cui_b != *r.interaction_id.second() {
        return bad("pair does not match id");
    }
    if r.evidence_count != r.evidence.len() {
        return bad("evidence_count differs from evidence length");
    }
    if r.evidence.is_empty() {
        return bad("no evidence");
    }
    if r.evidence.iter().any(|e| e.evidence.interaction_id != r.interaction_id) {
        return bad("evidence for a different interaction");
    }
    if r.evidence.windows(2).any(|w| compare_evidence(&w[0], &w[1]) != std::cmp::Ordering::Less) {
        return bad("evidence not in rank order");
    }
    Ok(())
}

/// Loads and verifies a snapshot, returning its manifest too.
pub fn read_snapshot(dir: &Path) -> Result<(EvidenceStore, Manifest), EvidenceError> {
    let manifest = read_manifest(dir)?;
    let agents: Vec<SnapshotAgent> = parse_lines(AGENTS, &read_verified(dir, AGENTS, &manifest)?)?;
    let mut records: Vec<InteractionRecord> = parse_lines(INTERACTIONS, &read_verified(dir, INTERACTIONS, &manifest)?)?;

    let pairs: Vec<(Cui, Cui)> = agents
        .iter()
        .filter(|a| a.canonical != a.entity.cui)
        .map(|a| (a.entity.cui.clone(), a.canonical.clone()))
        .collect();
    let catalog = Catalog::from_parts(agents.into_iter().map(|a| a.entity).collect(), &pairs)?;
    for r in &records {
        validate_record(r)?;
    }
    if records.windows(2).any(|w| w[0].interaction_id >= w[1].interaction_id) {
        records.sort_by(|a, b| a.interaction_id.cmp(&b.interaction_id));
        if records.windows(2).any(|w| w[0].interaction_id == w[1].interaction_id) {
            return Err(EvidenceError::Snapshot("duplicate interaction records".into()));
        }
    }
    let store = EvidenceStore::assemble(manifest.built_at.clone(), manifest.tau, catalog, records);
    if store.records().len() != manifest.counts.interactions || store.evidence_count() != manifest.counts.evidence {
        return Err(EvidenceError::Snapshot("manifest counts do not match contents".into()));
    }
    Ok((store, manifest))
}

pub fn load_snapshot(dir: &Path) -> Result<EvidenceStore, EvidenceError> {
    read_snapshot(dir).map(|(store, _)| store)
}

/// Copies a verified snapshot to `dest` byte for byte and verifies the
/// copy. `dest` must not exist or be an empty directory.
pub fn copy_snapshot(src: &Path, dest: &Path) -> Result<Manifest, EvidenceError> {
    let (_, manifest) = read_snapshot(src)?;
    if dest.exists() {
        let mut entries = fs::read_dir(dest).map_err(|e| io_err(dest, e))?;
        if entries.next().is_some() {
            return Err(EvidenceError::Snapshot(format!("{} is not empty", dest.display())));
        }
    }
    fs::create_dir_all(dest).map_err(|e| io_err(dest, e))?;
    for name in manifest.checksums.keys().map(String::as_str).chain([MANIFEST]) {
        let from = src.join(name);
        fs::copy(&from, dest.join(name)).map_err(|e| io_err(&from, e))?;
    }
    let (_, copied) = read_snapshot(dest)?;
    if copied != manifest {
        return Err(EvidenceError::Snapshot("copied manifest differs from source".into()));
    }
    Ok(copied)
}
