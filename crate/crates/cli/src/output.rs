use crate::commands::CliError;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Collects written files and writes `manifest.json` last.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    started: Instant,
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    inputs: Vec<String>,
    outputs: Vec<String>,
    version: &'a str,
    seed: Option<u64>,
    wall_clock_seconds: f64,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), files: vec![], started: Instant::now() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
        self.text(name, &(body + "\n"))
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let p = self.path(name);
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", p.display()));
        let mut w = csv::Writer::from_path(&p).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    }

    pub fn finish<C: Serialize>(mut self, command: &str, config: &C, inputs: &[&Path], seed: Option<u64>) -> Result<(), CliError> {
        let m = RunManifest {
            command,
            config,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: self.files.iter().map(|p| p.display().to_string()).collect(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let p = self.dir.join("manifest.json");
        self.files.clear();
        let body = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&p, body + "\n").map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    }
}
