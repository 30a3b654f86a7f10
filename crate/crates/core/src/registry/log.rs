//! Append-only JSON-lines logs, one document per line.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug)]
pub struct Log {
    file: File,
}

/// Something skipped while replaying a log.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct RecoveryWarning {
    pub log: String,
    /// 1-based line number, or the line after the last complete one for a
    /// partially written tail.
    pub line: usize,
    pub message: String,
}

impl Log {
    /// Opens (creating if needed) the log at `path`, replays it, and drops a
    /// partially written trailing line from the file.
    pub fn open<T: DeserializeOwned>(
        path: impl AsRef<Path>,
        warnings: &mut Vec<RecoveryWarning>,
    ) -> io::Result<(Log, Vec<(usize, T)>)> {
        let path = path.as_ref().to_path_buf();
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);

        let mut records = Vec::new();
        let mut line_no = 0;
        for line in bytes[..complete].split_inclusive(|&b| b == b'\n') {
            line_no += 1;
            match serde_json::from_slice::<T>(line) {
                Ok(record) => records.push((line_no, record)),
                Err(e) => {
                    tracing::warn!(log = %name, line = line_no, "skipping corrupt record: {e}");
                    warnings.push(RecoveryWarning {
                        log: name.clone(),
                        line: line_no,
                        message: format!("corrupt record: {e}"),
                    });
                }
            }
        }

        if complete < bytes.len() {
            let line = line_no + 1;
            tracing::warn!(log = %name, line, "discarding partially written record");
            warnings.push(RecoveryWarning {
                log: name.clone(),
                line,
                message: format!(
                    "discarded {} bytes of a partially written record",
                    bytes.len() - complete
                ),
            });
            let file = OpenOptions::new().write(true).open(&path)?;
            file.set_len(complete as u64)?;
            file.sync_all()?;
        }

        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((Log { file }, records))
    }

    /// Appends one record as a single line and syncs it to disk.
    pub fn append<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}
