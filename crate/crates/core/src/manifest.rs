//! Run manifests: what was run, with which configuration, on which inputs,
//! producing which outputs. No timestamps or host details, so identical runs
//! give identical manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").expect("writing to a String");
    }
    out
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_digest: String,
    /// Input path (as configured) to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, seed: Option<u64>, config: &C) -> serde_json::Result<Self> {
        let config = serde_json::to_value(config)?;
        let config_digest = sha256_hex(serde_json::to_string(&config)?.as_bytes());
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
            config_digest,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn add_input(&mut self, label: impl Into<String>, path: &Path) -> std::io::Result<()> {
        self.inputs.insert(label.into(), file_digest(path)?);
        Ok(())
    }

    /// Records a written output. `rel` is the path under the output directory.
    pub fn add_output(&mut self, out_dir: &Path, rel: &str) -> std::io::Result<()> {
        self.outputs.insert(rel.to_string(), file_digest(&out_dir.join(rel))?);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digests() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn config_digest_tracks_content() {
        let a = RunManifest::new("report", Some(1), &serde_json::json!({"seed": 1})).unwrap();
        let b = RunManifest::new("report", Some(1), &serde_json::json!({"seed": 1})).unwrap();
        let c = RunManifest::new("report", Some(1), &serde_json::json!({"seed": 2})).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a.config_digest, c.config_digest);
    }
}
