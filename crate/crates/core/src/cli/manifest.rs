use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::config::OutputFormat;

/// Written next to every output file as `<out>.manifest.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: PathBuf,
    /// Hex SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub output: PathBuf,
    pub format: String,
    pub wall_time_secs: f64,
    pub exit_code: i32,
    pub verdicts: Value,
    pub warnings: Vec<String>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        config_path: &Path,
        config_bytes: &[u8],
        command: &str,
        seed: u64,
        output: &Path,
        format: OutputFormat,
        wall_time_secs: f64,
        exit_code: i32,
        verdicts: Value,
        warnings: Vec<String>,
    ) -> Self {
        Self {
            command: command.to_owned(),
            config_path: config_path.to_owned(),
            config_sha256: sha256_hex(config_bytes),
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            output: output.to_owned(),
            format: match format {
                OutputFormat::Csv => "csv",
                OutputFormat::Jsonl => "jsonl",
            }
            .to_owned(),
            wall_time_secs,
            exit_code,
            verdicts,
            warnings,
        }
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()
    }
}
