//! Storage media: an in-memory card with crash injection and a directory
//! on the host filesystem.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MediumError {
    #[error("medium unavailable")]
    Unavailable,
    #[error("power lost during write")]
    PowerLost,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Append-only file store as seen by the flusher.
pub trait Medium {
    fn available(&self) -> bool;
    /// Card inserted and mounted, or not.
    fn set_available(&mut self, up: bool);
    /// Segment names in lexical order.
    fn list(&self) -> Result<Vec<String>, MediumError>;
    fn read(&self, name: &str) -> Result<Vec<u8>, MediumError>;
    fn len(&self, name: &str) -> Result<u64, MediumError>;
    fn append(&mut self, name: &str, bytes: &[u8]) -> Result<(), MediumError>;
    fn truncate(&mut self, name: &str, len: u64) -> Result<(), MediumError>;
    /// Reads only the last `n` bytes (or the whole file if shorter).
    fn read_tail(&self, name: &str, n: u64) -> Result<Vec<u8>, MediumError> {
        let bytes = self.read(name)?;
        let start = bytes.len().saturating_sub(n as usize);
        Ok(bytes[start..].to_vec())
    }
}

/// In-memory medium. A byte budget simulates power loss: once it is spent
/// the write in progress stops mid-way and every later write fails until
/// [`MemMedium::power_cycle`].
#[derive(Debug, Clone, Default)]
pub struct MemMedium {
    files: BTreeMap<String, Vec<u8>>,
    available: bool,
    budget: Option<usize>,
    written: u64,
}

impl MemMedium {
    pub fn new() -> Self {
        Self {
            available: true,
            ..Default::default()
        }
    }

    /// Power fails after `bytes` more bytes have been written.
    pub fn crash_after(&mut self, bytes: usize) {
        self.budget = Some(bytes);
    }

    pub fn power_cycle(&mut self) {
        self.budget = None;
    }

    /// Total bytes ever written.
    pub fn bytes_written(&self) -> u64 {
        self.written
    }

    pub fn files(&self) -> &BTreeMap<String, Vec<u8>> {
        &self.files
    }

    pub fn flip_bit(&mut self, name: &str, byte: usize, bit: u8) {
        if let Some(f) = self.files.get_mut(name) {
            f[byte] ^= 1 << bit;
        }
    }

    pub fn put(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }
}

impl Medium for MemMedium {
    fn available(&self) -> bool {
        self.available
    }

    fn set_available(&mut self, up: bool) {
        self.available = up;
    }

    fn list(&self) -> Result<Vec<String>, MediumError> {
        Ok(self.files.keys().cloned().collect())
    }

    fn read(&self, name: &str) -> Result<Vec<u8>, MediumError> {
        self.files
            .get(name)
            .cloned()
            .ok_or_else(|| io::Error::from(io::ErrorKind::NotFound).into())
    }

    fn len(&self, name: &str) -> Result<u64, MediumError> {
        Ok(self.files.get(name).map_or(0, |f| f.len() as u64))
    }

    fn append(&mut self, name: &str, bytes: &[u8]) -> Result<(), MediumError> {
        if !self.available {
            return Err(MediumError::Unavailable);
        }
        let n = match self.budget {
            Some(b) => b.min(bytes.len()),
            None => bytes.len(),
        };
        if self.budget == Some(0) {
            return Err(MediumError::PowerLost);
        }
        self.files
            .entry(name.to_string())
            .or_default()
            .extend_from_slice(&bytes[..n]);
        self.written += n as u64;
        if let Some(b) = self.budget.as_mut() {
            *b -= n;
            if n < bytes.len() {
                return Err(MediumError::PowerLost);
            }
        }
        Ok(())
    }

    fn truncate(&mut self, name: &str, len: u64) -> Result<(), MediumError> {
        if !self.available {
            return Err(MediumError::Unavailable);
        }
        if self.budget == Some(0) {
            return Err(MediumError::PowerLost);
        }
        if let Some(f) = self.files.get_mut(name) {
            f.truncate(len as usize);
        }
        Ok(())
    }
}

/// Segments as files in one host directory.
#[derive(Debug, Clone)]
pub struct DirMedium {
    root: PathBuf,
    available: bool,
}

impl DirMedium {
    pub fn open(root: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(Self {
            root: root.as_ref().to_path_buf(),
            available: true,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

impl Medium for DirMedium {
    fn available(&self) -> bool {
        self.available
    }

    fn set_available(&mut self, up: bool) {
        self.available = up;
    }

    fn list(&self) -> Result<Vec<String>, MediumError> {
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        Ok(names)
    }

    fn read(&self, name: &str) -> Result<Vec<u8>, MediumError> {
        Ok(fs::read(self.path(name))?)
    }

    fn len(&self, name: &str) -> Result<u64, MediumError> {
        match fs::metadata(self.path(name)) {
            Ok(m) => Ok(m.len()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(0),
            Err(e) => Err(e.into()),
        }
    }

    fn read_tail(&self, name: &str, n: u64) -> Result<Vec<u8>, MediumError> {
        use std::io::{Read, Seek, SeekFrom};
        let mut f = fs::File::open(self.path(name))?;
        let len = f.metadata()?.len();
        f.seek(SeekFrom::Start(len.saturating_sub(n)))?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        Ok(buf)
    }

    fn append(&mut self, name: &str, bytes: &[u8]) -> Result<(), MediumError> {
        if !self.available {
            return Err(MediumError::Unavailable);
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path(name))?;
        f.write_all(bytes)?;
        Ok(())
    }

    fn truncate(&mut self, name: &str, len: u64) -> Result<(), MediumError> {
        if !self.available {
            return Err(MediumError::Unavailable);
        }
        match OpenOptions::new().write(true).open(self.path(name)) {
            Ok(f) => Ok(f.set_len(len)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(e.into()),
        }
    }
}
