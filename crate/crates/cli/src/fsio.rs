use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use androcon::floormap::MapConfig;
use androcon::ingest::LabeledDataset;
use androcon::pipeline::PipelineConfig;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

/// Settings shared by the commands, read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub pipeline: PipelineConfig,
    pub map: MapConfig,
}

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Fails with `MissingInput` unless every path exists.
pub fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<(), CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::MissingInput(p.clone()));
        }
    }
    Ok(())
}

pub fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::InvalidConfig {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => read_toml(p),
        None => Ok(RunConfig::default()),
    }
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset, CliError> {
    Ok(LabeledDataset::read_csv(open(path)?)?)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    #[cfg(unix)]
    {
        // temp files start private; artifacts get ordinary file permissions
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn write_dataset(path: &Path, ds: &LabeledDataset) -> Result<(), CliError> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).map_err(io_err(path))?;
    write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_creates_parents_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 3\n[pipeline]\nmodel = \"rf\"\nbogus = 1\n").unwrap();
        assert!(matches!(load_config(Some(&p)), Err(CliError::InvalidConfig { .. })));
        std::fs::write(&p, "seed = 3\n[pipeline]\nmodel = \"rf\"\nukf = false\n").unwrap();
        let c = load_config(Some(&p)).unwrap();
        assert_eq!(c.seed, Some(3));
        assert!(!c.pipeline.ukf);
    }
}
