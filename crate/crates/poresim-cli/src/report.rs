use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

/// Reproducibility record emitted next to command outputs: tool version,
/// seed, config hash, and the file roles involved. Deterministic given the
/// same invocation (no timestamps).
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub rng_seed: u64,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunReport {
    pub fn new(command: &str, rng_seed: u64, config_sha256: String) -> RunReport {
        RunReport {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng_seed,
            config_sha256,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(mut self, role: &str, path: impl AsRef<Path>) -> RunReport {
        self.inputs
            .insert(role.to_string(), path.as_ref().display().to_string());
        self
    }

    pub fn output(mut self, role: &str, path: impl AsRef<Path>) -> RunReport {
        self.outputs
            .insert(role.to_string(), path.as_ref().display().to_string());
        self
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        write_atomic(path, &serde_json::to_vec_pretty(self)?)
    }
}

/// Write through a sibling temp file and rename, so readers never observe a
/// half-written output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = sibling_tmp(path);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Run `save(tmp)` against a sibling temp path, then rename into place.
pub fn save_atomic(
    path: &Path,
    save: impl FnOnce(&Path) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let tmp = sibling_tmp(path);
    save(&tmp)?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Sibling temp path that keeps the extension (format-sniffing writers like
/// the PNG encoder pick the codec from it): `out.png` -> `out.tmp.png`.
fn sibling_tmp(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_os_string();
    let mut name = stem;
    name.push(".tmp");
    if let Some(ext) = path.extension() {
        name.push(".");
        name.push(ext);
    }
    path.with_file_name(name)
}
