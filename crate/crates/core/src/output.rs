use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// Write a file through a temporary sibling and rename it into place, so an
/// interrupted run never leaves a truncated file at `path`.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let output_err = |source| Error::Output {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(output_err)?;
    let tmp = NamedTempFile::new_in(dir).map_err(output_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(output_err)?;
        w.flush().map_err(output_err)?;
    }
    tmp.persist(path).map_err(|e| output_err(e.error))?;
    Ok(())
}
