use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance written next to every output as `<output>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub params: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub version: String,
    pub wall_time_secs: f64,
    pub threads: usize,
}

fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl Manifest {
    pub fn new<P: Serialize>(
        command: &str,
        params: &P,
        inputs: &[PathBuf],
        threads: usize,
        wall_time_secs: f64,
    ) -> io::Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    path: p.clone(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<io::Result<Vec<_>>>()?;
        Ok(Manifest {
            command: command.to_string(),
            params: serde_json::to_value(params).map_err(io::Error::other)?,
            inputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs,
            threads,
        })
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    pub fn write_beside(&self, output: &Path) -> io::Result<()> {
        let mut json = serde_json::to_vec_pretty(self).map_err(io::Error::other)?;
        json.push(b'\n');
        write_atomic(&Self::path_for(output), &json)
    }
}
