//! Output directory handling. Every file carries the tool version and the
//! config hash; `manifest.json` lists file digests and is the only place a
//! timestamp appears.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "iel";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct OutputDir {
    dir: PathBuf,
    config_hash: String,
    command: String,
    files: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path, config_hash: &str, command: &str) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), config_hash: config_hash.into(), command: command.into(), files: BTreeMap::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, bytes).with_context(|| format!("cannot write {}", p.display()))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        log::info!("wrote {}", p.display());
        Ok(())
    }

    /// JSON envelope `{tool, version, config_hash, command, data}`.
    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> anyhow::Result<()> {
        let v = json!({
            "tool": TOOL,
            "version": VERSION,
            "config_hash": self.config_hash,
            "command": self.command,
            "data": data,
        });
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// CSV preceded by a `#` comment line with version and hash.
    pub fn csv(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        let text = format!("# {TOOL} {VERSION} config_hash={} command={}\n{body}", self.config_hash, self.command);
        self.write(name, text.as_bytes())
    }

    /// JSON lines preceded by a header record.
    pub fn json_lines(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        let head = json!({"tool": TOOL, "version": VERSION, "config_hash": self.config_hash, "command": self.command});
        let text = format!("{head}\n{body}");
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` with the digests of everything written so far,
    /// keeping entries of earlier commands run with the same configuration.
    pub fn finish(mut self) -> anyhow::Result<()> {
        let p = self.dir.join("manifest.json");
        if let Some(old) = fs::read_to_string(&p).ok().and_then(|t| serde_json::from_str::<Value>(&t).ok()) {
            if old["config_hash"] == self.config_hash.as_str() {
                if let Some(files) = old["files"].as_object() {
                    for (k, v) in files {
                        if let (false, Some(h)) = (self.files.contains_key(k), v.as_str()) {
                            self.files.insert(k.clone(), h.to_string());
                        }
                    }
                }
            }
        }
        let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let v = json!({
            "tool": TOOL,
            "version": VERSION,
            "config_hash": self.config_hash,
            "command": self.command,
            "generated_at": generated_at,
            "files": self.files,
        });
        fs::write(&p, serde_json::to_string_pretty(&v)? + "\n").with_context(|| format!("cannot write {}", p.display()))?;
        Ok(())
    }
}

/// Reads `data` from an envelope written with `config_hash`; `None` if the
/// file is missing, malformed or from another configuration.
pub fn read_matching(path: &Path, config_hash: &str) -> Option<Value> {
    let text = fs::read_to_string(path).ok()?;
    let mut v: Value = serde_json::from_str(&text).ok()?;
    if v.get("tool")? != TOOL || v.get("config_hash")? != config_hash {
        return None;
    }
    Some(v.get_mut("data")?.take())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_round_trip_respects_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), "abc", "entropy").unwrap();
        out.json("x.json", &vec![1, 2]).unwrap();
        out.csv("x.csv", "a,b\n1,2\n").unwrap();
        out.finish().unwrap();
        assert_eq!(read_matching(&dir.path().join("x.json"), "abc"), Some(json!([1, 2])));
        assert_eq!(read_matching(&dir.path().join("x.json"), "abd"), None);
        let csv = fs::read_to_string(dir.path().join("x.csv")).unwrap();
        assert!(csv.starts_with("# iel ") && csv.contains("config_hash=abc"));
        let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["files"].as_object().unwrap().len(), 2);
    }
}
