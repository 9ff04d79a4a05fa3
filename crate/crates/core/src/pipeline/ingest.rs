//! Reading campaign logs back from disk.
//!
//! Committed-format segments contribute only rows inside committed blocks
//! whose checksum matches. Plain CSV files without block footers are
//! accepted row by row.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::model::Record;
use crate::storage::csv::{parse_record, HEADER};
use crate::storage::log::MARKER;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestError {
    pub file: String,
    /// One-based.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestSummary {
    pub segments: usize,
    pub records: u64,
    pub errors: Vec<IngestError>,
    pub warnings: Vec<String>,
    /// Committed blocks whose checksum or row count did not match.
    pub integrity_events: u64,
    /// Parseable rows withheld because their block failed its checksum.
    pub quarantined_rows: u64,
    /// Rows after the last commit marker of a segment.
    pub uncommitted_rows: u64,
}

/// Segment files of a log directory, in name order.
pub fn segment_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn parse_footer(line: &str) -> Option<(u32, u64)> {
    let rest = line.strip_prefix("# crc32=")?;
    let (crc, count) = rest.split_once(" count=")?;
    Some((u32::from_str_radix(crc, 16).ok()?, count.parse().ok()?))
}

/// Streams one segment's accepted records into `sink`.
pub fn ingest_segment(
    name: &str,
    bytes: &[u8],
    summary: &mut IngestSummary,
    sink: &mut dyn FnMut(Record),
) {
    summary.segments += 1;
    if bytes.is_empty() {
        summary.warnings.push(format!("{name}: empty segment"));
        return;
    }
    let mut pending: Vec<(usize, Result<Record, String>)> = Vec::new();
    let mut hasher = crc32fast::Hasher::new();
    let mut footer: Option<(usize, Option<(u32, u64)>)> = None;
    let mut framed = false;
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let err = |line: usize, message: String| IngestError {
        file: name.to_string(),
        line,
        message,
    };

    while pos < bytes.len() {
        line_no += 1;
        let (end, next) = match bytes[pos..].iter().position(|&b| b == b'\n') {
            Some(i) => (pos + i, pos + i + 1),
            None => (bytes.len(), bytes.len()),
        };
        let raw = &bytes[pos..next];
        let text = String::from_utf8_lossy(&bytes[pos..end]);
        let line = text.trim_end_matches('\r');
        pos = next;

        if line_no == 1 {
            if line != HEADER {
                summary.errors.push(err(1, "missing or unexpected header".into()));
                return;
            }
            continue;
        }
        if let Some((footer_line, parsed)) = footer.take() {
            framed = true;
            if line == MARKER && raw.ends_with(b"\n") {
                let rows = pending.len() as u64;
                let ok = parsed == Some((hasher.clone().finalize(), rows));
                if !ok {
                    summary.integrity_events += 1;
                    summary
                        .warnings
                        .push(format!("{name}:{footer_line}: block checksum mismatch"));
                }
                for (n, row) in pending.drain(..) {
                    match row {
                        Ok(r) if ok => {
                            summary.records += 1;
                            sink(r);
                        }
                        Ok(_) => summary.quarantined_rows += 1,
                        Err(m) => summary.errors.push(err(n, m)),
                    }
                }
            } else {
                // Footer without a marker: the block never committed.
                summary.uncommitted_rows += pending.len() as u64;
                pending.clear();
            }
            hasher = crc32fast::Hasher::new();
            if line == MARKER {
                continue;
            }
        }
        if line.starts_with("# crc32=") {
            footer = Some((line_no, parse_footer(line)));
            continue;
        }
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        hasher.update(raw);
        pending.push((line_no, parse_record(line).map_err(|e| e.to_string())));
    }

    if framed || footer.is_some() {
        summary.uncommitted_rows += pending.len() as u64;
    } else {
        for (n, row) in pending {
            match row {
                Ok(r) => {
                    summary.records += 1;
                    sink(r);
                }
                Err(m) => summary.errors.push(err(n, m)),
            }
        }
    }
}

/// Streams every accepted record of a log directory in segment order.
pub fn for_each_record(dir: &Path, mut sink: impl FnMut(Record)) -> io::Result<IngestSummary> {
    let mut summary = IngestSummary::default();
    let files = segment_files(dir)?;
    if files.is_empty() {
        summary.warnings.push(format!("{}: no segments", dir.display()));
    }
    for path in files {
        let bytes = fs::read(&path)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        ingest_segment(&name, &bytes, &mut summary, &mut sink);
    }
    Ok(summary)
}

/// Loads a whole log directory into memory.
pub fn load_campaign(dir: &Path) -> io::Result<(Vec<Record>, IngestSummary)> {
    let mut records = Vec::new();
    let summary = for_each_record(dir, |r| records.push(r))?;
    Ok((records, summary))
}
