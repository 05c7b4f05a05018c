//! Output layout, metadata headers and file helpers.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

/// Paths of every artifact under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: PathBuf) -> Self {
        Layout { root }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn evocation(&self, dataset: &str) -> PathBuf {
        self.root.join("evocation").join(format!("{dataset}.tsv"))
    }

    pub fn pairs_dir(&self, dataset: &str) -> PathBuf {
        self.root.join("pairs").join(dataset)
    }

    pub fn index(&self) -> PathBuf {
        self.root.join("index").join("corpus.asyx")
    }

    pub fn index_meta(&self) -> PathBuf {
        self.root.join("index").join("corpus.meta")
    }

    pub fn evoc_table(&self, dataset: &str) -> PathBuf {
        self.root.join("conditionals").join("evocation").join(format!("{dataset}.tsv"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("conditionals").join("models")
    }

    pub fn model_table(&self, resource: &str) -> PathBuf {
        self.models_dir().join(format!("{resource}.tsv"))
    }

    pub fn factors(&self, resource: &str) -> PathBuf {
        self.root.join("factors").join(format!("{resource}.tsv"))
    }

    pub fn checkpoint(&self, resource: &str) -> PathBuf {
        self.root.join("lm").join(format!("{resource}.checkpoint.tsv"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn simeval(&self) -> PathBuf {
        self.root.join("simeval").join("similarity.tsv")
    }
}

/// Fails with a dependency error unless `path` exists.
pub fn require(path: PathBuf, subcommand: &'static str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::Dependency { artifact: path, subcommand })
    }
}

/// SHA-256 of a file, or of a directory's sorted regular files (name and
/// content).
pub fn checksum(path: &Path) -> io::Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> =
            fs::read_dir(path)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
        entries.sort();
        for p in entries {
            h.update(p.file_name().unwrap_or_default().as_encoded_bytes());
            h.update([0]);
            h.update(checksum(&p)?.as_bytes());
        }
    } else {
        let mut f = File::open(path)?;
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = f.read(&mut buf)?;
            if n == 0 {
                break;
            }
            h.update(&buf[..n]);
        }
    }
    Ok(hex::encode(h.finalize()))
}

/// Metadata lines written at the top of every output.
pub fn header(cfg: &RunConfig, command: &str, inputs: &[(String, PathBuf)]) -> Result<Vec<String>, CliError> {
    let mut lines = vec![
        format!("asymgauge {}", asymgauge::VERSION),
        format!("command={command}"),
        format!("config_hash={}", cfg.hash()),
        format!("seed={}", cfg.get("seed").unwrap_or("0")),
        format!("cap={}", cfg.get("cap").unwrap_or("1000")),
    ];
    for (label, path) in inputs {
        let sum = checksum(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        lines.push(format!("input {label} sha256={sum}"));
    }
    Ok(lines)
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{}.tmp", path.file_name().unwrap_or_default().to_string_lossy()));
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
        w.get_ref().sync_data()?;
    }
    fs::rename(&tmp, path)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_header<W: Write>(w: &mut W, header: &[String]) -> io::Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    Ok(())
}

/// Sorted `*.tsv` stems in `dir`.
pub fn tsv_stems(dir: &Path) -> io::Result<Vec<String>> {
    let mut out: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "tsv"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_file_and_dir() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "b").unwrap();
        fs::write(dir.path().join("a.txt"), "a").unwrap();
        let d1 = checksum(dir.path()).unwrap();
        assert_eq!(
            checksum(&dir.path().join("a.txt")).unwrap(),
            "ca978112ca1bbdcafac231b39a23dc4da786eff8147c4e72b9807785afee48bb"
        );
        fs::write(dir.path().join("a.txt"), "A").unwrap();
        assert_ne!(checksum(dir.path()).unwrap(), d1);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x/y.tsv");
        write_atomic(&p, |w| w.write_all(b"one")).unwrap();
        write_atomic(&p, |w| w.write_all(b"two")).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(tsv_stems(&dir.path().join("x")).unwrap(), vec!["y".to_string()]);
    }
}
