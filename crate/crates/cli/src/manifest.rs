use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::failure::{Failure, Outcome};

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_hash: String,
    config: &'a Value,
    outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

pub fn read_file(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

/// `dir/name.ext` becomes `dir/name.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.manifest.json"))
}

/// Records the command, its effective configuration and a digest of each output.
///
/// Nothing time- or host-dependent goes in, so reruns produce identical manifests.
pub fn write_manifest(
    path: &Path,
    command: &str,
    seed: u64,
    config: &Value,
    outputs: &[&Path],
) -> Outcome {
    let canonical = serde_json::to_vec(config).expect("json value serializes");
    let mut entries = Vec::with_capacity(outputs.len());
    for p in outputs {
        let bytes = fs::read(p).map_err(|e| Failure::io(p, e))?;
        entries.push(OutputEntry {
            file: p
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(&bytes),
        });
    }
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config_hash: sha256_hex(&canonical),
        config,
        outputs: entries,
    };
    let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}
