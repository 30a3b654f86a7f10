use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content-addressed blob directory: each blob lives at `<dir>/<hex digest>`.
#[derive(Debug, Clone)]
pub struct BlobStore {
    dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum BlobError {
    #[error("blob {0} not found")]
    Missing(String),
    #[error("blob {expected} is corrupt (content hashes to {actual})")]
    DigestMismatch { expected: String, actual: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl BlobStore {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(BlobStore { dir })
    }

    pub fn path(&self, digest: &str) -> PathBuf {
        self.dir.join(digest)
    }

    /// Stores `bytes` and returns its digest. Writing an existing blob is a
    /// no-op.
    pub fn put(&self, bytes: &[u8]) -> io::Result<String> {
        let digest = digest(bytes);
        let path = self.path(&digest);
        if path.exists() {
            return Ok(digest);
        }
        let tmp = self.dir.join(format!(".{digest}.tmp"));
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(bytes)?;
            file.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(digest)
    }

    /// Reads a blob, verifying its content against the digest.
    pub fn get(&self, digest: &str) -> Result<Vec<u8>, BlobError> {
        let bytes = match fs::read(self.path(digest)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(BlobError::Missing(digest.to_string())),
            Err(e) => return Err(e.into()),
        };
        let actual = self::digest(&bytes);
        if actual != digest {
            return Err(BlobError::DigestMismatch {
                expected: digest.to_string(),
                actual,
            });
        }
        Ok(bytes)
    }
}
