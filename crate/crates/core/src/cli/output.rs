use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gauge_arb::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Report files of one run. Reports carry the config hash and tool version;
/// wall-clock data goes to `<command>.meta.json` only.
pub struct Output {
    dir: PathBuf,
    command: String,
    config_hash: String,
    started: SystemTime,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn config_hash<T: Serialize>(config: &T) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

impl Output {
    /// Refuses to reuse a directory holding this command's reports unless `force`.
    pub fn create(dir: &Path, command: &str, config_hash: String, force: bool) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        if !force {
            let prefix = format!("{command}.");
            let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
            for entry in entries {
                let entry = entry.map_err(|e| io_err(dir, e))?;
                let name = entry.file_name().to_string_lossy().into_owned();
                if name.starts_with(&prefix) {
                    return Err(Error::ConfigInvalid(format!(
                        "{} already exists; pass --force to overwrite",
                        entry.path().display()
                    )));
                }
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_hash,
            started: SystemTime::now(),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}.{suffix}", self.command))
    }

    pub fn write_report<T: Serialize>(&self, body: &T) -> Result<PathBuf> {
        let env = Envelope {
            command: &self.command,
            version: gauge_arb::VERSION,
            config_hash: &self.config_hash,
            body,
        };
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| Error::InvalidInput(e.to_string()))?;
        text.push('\n');
        let path = self.path("json");
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// Comma-separated rows under a header line.
    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let path = self.path(&format!("{name}.csv"));
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "{}", header.join(","))?;
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            w.flush()
        };
        emit().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn write_meta(&self, exit_code: i32) -> Result<()> {
        let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let now = SystemTime::now();
        let meta = serde_json::json!({
            "command": self.command,
            "config_hash": self.config_hash,
            "started_unix": secs(self.started),
            "finished_unix": secs(now),
            "elapsed_seconds": now.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            "exit_code": exit_code,
        });
        let path = self.path("meta.json");
        fs::write(&path, format!("{meta:#}\n")).map_err(|e| io_err(&path, e))
    }
}
