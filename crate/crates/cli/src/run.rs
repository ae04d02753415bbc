//! Output directories and their manifests.
//!
//! Each command owns one output directory. An `INCOMPLETE` marker is created
//! before any work starts and removed only after every output and the manifest
//! are written, so a crashed or failed run is recognisable at a glance.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const MARKER: &str = "INCOMPLETE";
pub const MANIFEST: &str = "manifest.json";

pub struct Run {
    dir: PathBuf,
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    outputs: Vec<String>,
    results: Value,
}

impl Run {
    pub fn start(
        dir: &Path,
        command: &'static str,
        config: &impl Serialize,
        seed: Option<u64>,
    ) -> Result<Run> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        fs::write(dir.join(MARKER), format!("{command} did not finish\n"))
            .with_context(|| format!("writing {MARKER} marker in {}", dir.display()))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            command,
            config: serde_json::to_value(config)?,
            seed,
            outputs: Vec::new(),
            results: Value::Null,
        })
    }

    /// Creates `name` in the output directory, hands a buffered writer to
    /// `body` and records the file as an output.
    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Path for an output written by someone else (e.g. the atlas container).
    pub fn output_path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    /// Key results echoed into the manifest.
    pub fn set_results(&mut self, results: Value) {
        self.results = results;
    }

    fn manifest(&self, status: &str, error: Option<String>) -> Value {
        json!({
            "tool": "manifold-atlas",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "outputs": self.outputs,
            "results": self.results,
            "status": status,
            "error": error,
        })
    }

    fn write_manifest(&self, manifest: &Value) -> Result<()> {
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(manifest)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    /// Runs `body`; on success writes the manifest and clears the marker, on
    /// failure records the error in the manifest and leaves the marker.
    pub fn execute<T>(mut self, body: impl FnOnce(&mut Run) -> Result<T>) -> Result<T> {
        match body(&mut self) {
            Ok(value) => {
                self.write_manifest(&self.manifest("complete", None))?;
                fs::remove_file(self.dir.join(MARKER)).context("removing INCOMPLETE marker")?;
                Ok(value)
            }
            Err(e) => {
                if let Err(m) =
                    self.write_manifest(&self.manifest("failed", Some(format!("{e:#}"))))
                {
                    log::error!("could not write manifest: {m:#}");
                }
                Err(e)
            }
        }
    }
}
