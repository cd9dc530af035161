//! Output files stamped with the library version and the configuration hash.

use sha2::{Digest, Sha256};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const OUTPUT_DIR_ENV: &str = "QHO_KAM_OUTPUT_DIR";

pub struct Artifacts {
    pub dir: PathBuf,
    pub config_hash: String,
    written: Vec<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Flag, then environment, then config file, then `./out`.
pub fn resolve_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_DIR_ENV) {
        return PathBuf::from(p);
    }
    config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("out"))
}

impl Artifacts {
    pub fn new(dir: PathBuf, config_bytes: &[u8]) -> std::io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            config_hash: sha256_hex(config_bytes),
            written: Vec::new(),
        })
    }

    pub fn stamp(&self) -> String {
        format!(
            "qho-kam {} config_sha256={}",
            env!("CARGO_PKG_VERSION"),
            self.config_hash
        )
    }

    /// CSV with a `#` provenance line ahead of the header.
    pub fn csv<F>(&mut self, name: &str, body: F) -> Result<PathBuf, qho_kam::KamError>
    where
        F: FnOnce(&mut dyn Write) -> qho_kam::Result<()>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "# {}", self.stamp())?;
        body(&mut w)?;
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON with a top-level `meta` object.
    pub fn json(
        &mut self,
        name: &str,
        mut value: serde_json::Value,
    ) -> Result<PathBuf, qho_kam::KamError> {
        if let Some(obj) = value.as_object_mut() {
            obj.insert(
                "meta".into(),
                serde_json::json!({ "version": env!("CARGO_PKG_VERSION"), "config_sha256": self.config_hash }),
            );
        }
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&value)? + "\n")?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
