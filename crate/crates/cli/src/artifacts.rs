//! Artifact writing: round-trip CSV formatting, the run manifest, and the
//! aggregate JSON. Identical configs produce byte-identical results.csv and
//! aggregate.json; wall-clock timing lives only in the manifest.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::RunConfig;

/// Full round-trip decimal formatting: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

pub struct RunDir {
    pub dir: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    pub fn create(config: &RunConfig) -> std::io::Result<RunDir> {
        fs::create_dir_all(&config.out)?;
        Ok(RunDir {
            dir: config.out.clone(),
            artifacts: Vec::new(),
        })
    }

    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let mut file = fs::File::create(&path)?;
        writeln!(file, "{header}")?;
        for row in rows {
            writeln!(file, "{row}")?;
        }
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).expect("aggregate serializes");
        fs::write(path, text + "\n")?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Manifest carries the full config echo, code version, seed and
    /// timing; enough to reconstruct the run bit-identically (timing
    /// aside).
    pub fn write_manifest(&mut self, config: &RunConfig, duration_ms: u128) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            version: &'a str,
            base_seed: u64,
            workers: usize,
            config: &'a RunConfig,
            artifacts: &'a [String],
            duration_ms: u128,
        }
        let manifest = Manifest {
            command: config.command.name(),
            version: env!("CARGO_PKG_VERSION"),
            base_seed: config.base_seed,
            workers: config.effective_workers(),
            config,
            artifacts: &self.artifacts,
            duration_ms,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.dir.join("manifest.json"), text + "\n")
    }
}
