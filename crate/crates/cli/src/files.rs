use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{CliError, Result};

/// Opens `path` for writing. Without `force`, an existing file is an error
/// and is left untouched.
pub fn create(path: &Path, force: bool) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut options = OpenOptions::new();
    options.write(true);
    if force {
        options.create(true).truncate(true);
    } else {
        options.create_new(true);
    }
    match options.open(path) {
        Ok(file) => Ok(BufWriter::new(file)),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Exists {
            path: path.to_path_buf(),
        }),
        Err(e) => Err(CliError::io(path, e)),
    }
}

/// Writes `contents` to `path` in one go.
pub fn write(path: &Path, contents: &str, force: bool) -> Result<()> {
    let mut out = create(path, force)?;
    out.write_all(contents.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
