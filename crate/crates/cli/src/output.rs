//! Staged outputs, config files and small writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Output written under a hidden sibling and moved into place on
/// [`Staged::commit`]; dropped uncommitted, it leaves nothing behind.
pub struct Staged {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

impl Staged {
    fn sibling(target: &Path) -> CliResult<PathBuf> {
        let name = target
            .file_name()
            .ok_or_else(|| CliError::usage(format!("bad output path {}", target.display())))?;
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(CliError::usage(format!("output parent {} does not exist", parent.display())));
        }
        Ok(parent.join(format!(".{}.partial", name.to_string_lossy())))
    }

    pub fn dir(target: &Path) -> CliResult<Self> {
        if target.exists() && !target.is_dir() {
            return Err(CliError::usage(format!("{} exists and is not a directory", target.display())));
        }
        let staging = Self::sibling(target)?;
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        Ok(Self { target: target.to_path_buf(), staging, committed: false })
    }

    pub fn file(target: &Path) -> CliResult<Self> {
        let staging = Self::sibling(target)?;
        Ok(Self { target: target.to_path_buf(), staging, committed: false })
    }

    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn commit(mut self) -> CliResult<()> {
        if self.staging.is_dir() {
            fs::create_dir_all(&self.target)?;
            let mut entries: Vec<_> = fs::read_dir(&self.staging)?.collect::<Result<_, _>>()?;
            entries.sort_by_key(|e| e.file_name());
            for e in entries {
                let dest = self.target.join(e.file_name());
                if dest.is_dir() {
                    fs::remove_dir_all(&dest)?;
                }
                fs::rename(e.path(), dest)?;
            }
            fs::remove_dir(&self.staging)?;
        } else {
            fs::rename(&self.staging, &self.target)?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            let _ = if self.staging.is_dir() {
                fs::remove_dir_all(&self.staging)
            } else {
                fs::remove_file(&self.staging)
            };
        }
    }
}

/// Reads a TOML or JSON file, chosen by extension.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display()))),
        Some("json") => serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display()))),
        _ => Err(CliError::usage(format!("config {} must end in .toml or .json", path.display()))),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// `id_name,id_name_2,...,prefix_1..prefix_n` header plus one row per entry.
pub fn rows_csv(keys: &[&str], prefix: &str, rows: &[(Vec<String>, &[f64])]) -> String {
    let width = rows.first().map_or(0, |r| r.1.len());
    let mut out = keys.join(",");
    for i in 1..=width {
        out.push_str(&format!(",{prefix}_{i}"));
    }
    out.push('\n');
    for (ids, values) in rows {
        out.push_str(&ids.join(","));
        for v in values.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_output_is_removed() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        {
            let s = Staged::dir(&target).unwrap();
            fs::write(s.path().join("a.txt"), "x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        let s = Staged::dir(&target).unwrap();
        fs::write(s.path().join("a.txt"), "y").unwrap();
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(target.join("a.txt")).unwrap(), "y");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn staged_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("split.json");
        let s = Staged::file(&target).unwrap();
        fs::write(s.path(), "{}").unwrap();
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(&target).unwrap(), "{}");
    }

    #[test]
    fn rows_layout() {
        let csv = rows_csv(&["collection"], "pi", &[(vec!["1".into()], &[0.25, 0.75])]);
        assert_eq!(csv, "collection,pi_1,pi_2\n1,0.25,0.75\n");
    }
}
