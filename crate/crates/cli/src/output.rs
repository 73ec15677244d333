use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// Files of one run, written together with the manifest by [`Outputs::finish`].
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
    started: Instant,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    pub fn finish(self, command: &str, config: Map<String, Value>) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let mut listed = Vec::new();
        for (name, data) in &self.files {
            fs::write(self.dir.join(name), data)?;
            listed.push(json!({ "file": name, "bytes": data.len(), "sha256": sha256_hex(data) }));
        }
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = json!({
            "tool": "lgmm",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": Value::Object(config),
            "timestamp_unix": stamp,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "outputs": listed,
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}
