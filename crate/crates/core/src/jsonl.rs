//! Newline-delimited JSON helpers shared by every file format in the crate.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub fn open(path: &Path) -> Result<BufReader<File>, JsonlError> {
    File::open(path).map(BufReader::new).map_err(|source| JsonlError::Io { path: path.display().to_string(), source })
}

/// Reads every non-blank line of `path` as a `T`, failing on the first bad line.
pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io { path: path.display().to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| JsonlError::Parse { line: idx + 1, source })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_all<'a, T, I>(path: &Path, items: I) -> Result<(), JsonlError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let io_err = |source| JsonlError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for item in items {
        write_line(&mut writer, item).map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

pub fn write_line<W: Write, T: Serialize>(writer: &mut W, item: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *writer, item)?;
    writer.write_all(b"\n")
}
