use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Reads a JSON config, or the default when no file is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

/// Writes the merged configuration beside the outputs.
pub fn write_snapshot(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let path = dir.join(format!("{name}.config.json"));
    std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Provenance comment line placed at the top of every CSV output.
pub fn provenance(seed: u64) -> String {
    format!("# cardiorecon {} seed={seed}\n", cardiorecon::dataset::TOOL_VERSION)
}

/// Reports per-case failures; an error when there was at least one.
pub fn case_failures(failures: &[(String, String)], total: usize) -> Result<()> {
    for (id, why) in failures {
        eprintln!("case {id} failed: {why}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        anyhow::bail!("{} of {total} cases failed", failures.len())
    }
}
