//! Daily segments with a committed-block protocol.
//!
//! Segment layout: the CSV header line, then any number of blocks. A block
//! is its rows, a footer `# crc32=<hex> count=<n>` and the marker line
//! `# committed`. The marker is written by a separate, final append; a
//! block without a complete marker is not part of the log.

use std::collections::BTreeMap;

use crate::model::Record;
use crate::storage::csv::{parse_record, write_record, RowError, HEADER};
use crate::storage::medium::{Medium, MediumError};

pub const MARKER: &str = "# committed";

pub fn segment_name(record: &Record) -> String {
    format!("{}.csv", record.timestamp.date().format("%Y-%m-%d"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStatus {
    Committed,
    /// Footer and marker present but the checksum, row count or a row
    /// failed to check out.
    Quarantined,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockInfo {
    pub start: u64,
    pub end: u64,
    pub rows: u64,
    pub status: BlockStatus,
}

/// Result of reading one segment front to back.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentScan {
    pub header_ok: bool,
    pub blocks: Vec<BlockInfo>,
    /// Byte length of the durable prefix.
    pub committed_len: u64,
    /// Bytes after the durable prefix.
    pub tail_bytes: u64,
    /// Committed rows that did not parse, by one-based line number.
    pub row_errors: Vec<(usize, RowError)>,
    pub records: Vec<Record>,
}

impl SegmentScan {
    pub fn committed_records(&self) -> u64 {
        self.blocks
            .iter()
            .filter(|b| b.status == BlockStatus::Committed)
            .map(|b| b.rows)
            .sum()
    }

    pub fn quarantined(&self) -> u64 {
        self.blocks
            .iter()
            .filter(|b| b.status == BlockStatus::Quarantined)
            .count() as u64
    }
}

fn parse_footer(line: &str) -> Option<(u32, u64)> {
    let rest = line.strip_prefix("# crc32=")?;
    let (crc, count) = rest.split_once(" count=")?;
    if crc.len() != 8 {
        return None;
    }
    Some((u32::from_str_radix(crc, 16).ok()?, count.parse().ok()?))
}

/// Splits off the next complete line (without its newline).
fn next_line(bytes: &[u8], pos: usize) -> Option<(&[u8], usize)> {
    let nl = bytes[pos..].iter().position(|&b| b == b'\n')?;
    Some((&bytes[pos..pos + nl], pos + nl + 1))
}

/// Reads a segment. With `collect` set, the committed records are parsed
/// and returned; otherwise rows are only checksummed.
pub fn scan_segment(bytes: &[u8], collect: bool) -> SegmentScan {
    let mut scan = SegmentScan::default();
    let Some((header, mut pos)) = next_line(bytes, 0) else {
        scan.tail_bytes = bytes.len() as u64;
        return scan;
    };
    if header != HEADER.as_bytes() {
        // Unrecognised file: nothing in it is trusted.
        scan.tail_bytes = bytes.len() as u64;
        return scan;
    }
    scan.header_ok = true;
    scan.committed_len = pos as u64;
    let mut line_no = 1usize;

    'blocks: while pos < bytes.len() {
        let start = pos;
        let mut rows: Vec<(usize, &[u8])> = Vec::new();
        let mut hasher = crc32fast::Hasher::new();
        let mut cursor = pos;
        let mut lines = line_no;
        let footer = loop {
            let Some((line, next)) = next_line(bytes, cursor) else {
                break 'blocks;
            };
            lines += 1;
            if line.starts_with(b"# crc32=") {
                cursor = next;
                break line;
            }
            if line.starts_with(b"#") {
                break 'blocks;
            }
            hasher.update(&bytes[cursor..next]);
            rows.push((lines, line));
            cursor = next;
        };
        let Some((marker, end)) = next_line(bytes, cursor) else {
            break;
        };
        if marker != MARKER.as_bytes() {
            break;
        }
        lines += 1;
        let footer = std::str::from_utf8(footer).ok().and_then(parse_footer);
        let mut ok = matches!(footer, Some((crc, count)) if crc == hasher.finalize() && count == rows.len() as u64);
        let mut parsed = Vec::new();
        if ok {
            for (n, row) in &rows {
                let text = String::from_utf8_lossy(row);
                match parse_record(&text) {
                    Ok(r) => {
                        if collect {
                            parsed.push(r)
                        }
                    }
                    Err(e) => {
                        scan.row_errors.push((*n, e));
                        ok = false;
                    }
                }
            }
        }
        if ok {
            scan.records.append(&mut parsed);
        }
        scan.blocks.push(BlockInfo {
            start: start as u64,
            end: end as u64,
            rows: rows.len() as u64,
            status: if ok {
                BlockStatus::Committed
            } else {
                BlockStatus::Quarantined
            },
        });
        pos = end;
        line_no = lines;
        scan.committed_len = pos as u64;
    }
    scan.tail_bytes = bytes.len() as u64 - scan.committed_len;
    scan
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub segments: usize,
    pub committed_records: u64,
    pub truncated_bytes: u64,
    pub quarantined_blocks: u64,
    pub quarantined_records: u64,
}

impl RecoveryReport {
    pub fn integrity_events(&self) -> u64 {
        self.quarantined_blocks
    }
}

/// Full recovery: reads every segment, discards uncommitted tails from the
/// medium and returns all committed records in segment order.
pub fn recover<M: Medium>(medium: &mut M) -> Result<(Vec<Record>, RecoveryReport), MediumError> {
    let mut report = RecoveryReport::default();
    let mut records = Vec::new();
    for name in medium.list()? {
        let bytes = medium.read(&name)?;
        let mut scan = scan_segment(&bytes, true);
        report.segments += 1;
        report.committed_records += scan.committed_records();
        report.quarantined_blocks += scan.quarantined();
        report.quarantined_records += scan
            .blocks
            .iter()
            .filter(|b| b.status == BlockStatus::Quarantined)
            .map(|b| b.rows)
            .sum::<u64>();
        if scan.tail_bytes > 0 {
            medium.truncate(&name, scan.committed_len)?;
            report.truncated_bytes += scan.tail_bytes;
        }
        records.append(&mut scan.records);
    }
    Ok((records, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStatus {
    pub name: String,
    pub committed_records: u64,
    pub quarantined_blocks: u64,
    pub tail_bytes: u64,
    pub row_errors: usize,
}

impl SegmentStatus {
    pub fn pass(&self) -> bool {
        self.quarantined_blocks == 0 && self.row_errors == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegrityReport {
    pub segments: Vec<SegmentStatus>,
}

impl IntegrityReport {
    pub fn pass(&self) -> bool {
        self.segments.iter().all(SegmentStatus::pass)
    }

    pub fn failures(&self) -> u64 {
        self.segments.iter().map(|s| s.quarantined_blocks).sum()
    }
}

/// Read-back check of every segment. Does not modify the medium.
pub fn verify<M: Medium>(medium: &M) -> Result<IntegrityReport, MediumError> {
    let mut report = IntegrityReport::default();
    for name in medium.list()? {
        let scan = scan_segment(&medium.read(&name)?, false);
        report.segments.push(SegmentStatus {
            committed_records: scan.committed_records(),
            quarantined_blocks: scan.quarantined(),
            tail_bytes: scan.tail_bytes,
            row_errors: scan.row_errors.len(),
            name,
        });
    }
    Ok(report)
}

/// Writer side of the log.
#[derive(Debug)]
pub struct LogStore<M: Medium> {
    medium: M,
    committed_len: BTreeMap<String, u64>,
    commit_marker: bool,
    records_committed: u64,
    flushes: u64,
    scratch: String,
    scanned: bool,
}

impl<M: Medium> LogStore<M> {
    /// A handle that will recover the medium before its first write.
    pub fn unscanned(medium: M) -> Self {
        Self {
            medium,
            committed_len: BTreeMap::new(),
            commit_marker: true,
            records_committed: 0,
            flushes: 0,
            scratch: String::new(),
            scanned: false,
        }
    }

    /// Opens the log after boot. Segments that end in a complete marker
    /// are durable as they stand; any other segment is rescanned and cut
    /// back to its committed prefix. Checksums of older blocks are left
    /// to [`verify`].
    pub fn open(medium: M) -> Result<(Self, RecoveryReport), MediumError> {
        let mut store = Self::unscanned(medium);
        let report = store.rescan()?;
        Ok((store, report))
    }

    /// Forgets what the writer knew and rebuilds it from the medium, as
    /// after a reboot.
    pub fn rescan(&mut self) -> Result<RecoveryReport, MediumError> {
        let mut report = RecoveryReport::default();
        self.scanned = false;
        self.committed_len.clear();
        let tail_marker = format!("\n{MARKER}\n");
        for name in self.medium.list()? {
            report.segments += 1;
            let len = self.medium.len(&name)?;
            let tail = self.medium.read_tail(&name, tail_marker.len() as u64)?;
            if tail == tail_marker.as_bytes() {
                self.committed_len.insert(name, len);
                continue;
            }
            let scan = scan_segment(&self.medium.read(&name)?, false);
            report.committed_records += scan.committed_records();
            report.quarantined_blocks += scan.quarantined();
            if scan.tail_bytes > 0 {
                self.medium.truncate(&name, scan.committed_len)?;
                report.truncated_bytes += scan.tail_bytes;
            }
            self.committed_len.insert(name, scan.committed_len);
        }
        self.scanned = true;
        Ok(report)
    }

    pub fn medium(&self) -> &M {
        &self.medium
    }

    pub fn medium_mut(&mut self) -> &mut M {
        &mut self.medium
    }

    pub fn into_medium(self) -> M {
        self.medium
    }

    /// Records committed through this handle.
    pub fn records_committed(&self) -> u64 {
        self.records_committed
    }

    pub fn flushes(&self) -> u64 {
        self.flushes
    }

    /// Test hook: write blocks without their commit marker.
    pub fn set_commit_marker(&mut self, enabled: bool) {
        self.commit_marker = enabled;
    }

    /// Writes one batch. Records are grouped into their daily segment; each
    /// group is committed on its own. On error, groups already committed
    /// stay committed and the count of them is lost to the caller, so the
    /// caller must only retry with the uncommitted remainder: the returned
    /// error carries how many leading records made it.
    pub fn flush(&mut self, records: &[Record]) -> Result<(), FlushError> {
        if !self.medium.available() {
            return Err(FlushError { committed: 0, source: MediumError::Unavailable });
        }
        if !self.scanned {
            self.rescan()
                .map_err(|source| FlushError { committed: 0, source })?;
        }
        let mut done = 0;
        while done < records.len() {
            let name = segment_name(&records[done]);
            let n = records[done..]
                .iter()
                .take_while(|r| segment_name(r) == name)
                .count();
            let group = &records[done..done + n];
            self.commit_group(&name, group)
                .map_err(|source| FlushError { committed: done, source })?;
            done += n;
        }
        self.flushes += 1;
        Ok(())
    }

    fn commit_group(&mut self, name: &str, group: &[Record]) -> Result<(), MediumError> {
        let committed = self.committed_len.get(name).copied().unwrap_or(0);
        if self.medium.len(name)? != committed {
            self.medium.truncate(name, committed)?;
        }
        let mut buf = std::mem::take(&mut self.scratch);
        buf.clear();
        if committed == 0 {
            buf.push_str(HEADER);
            buf.push('\n');
        }
        let payload_start = buf.len();
        for r in group {
            write_record(&mut buf, r);
        }
        let crc = crc32fast::hash(&buf.as_bytes()[payload_start..]);
        buf.push_str(&format!("# crc32={crc:08x} count={}\n", group.len()));
        let result = self.medium.append(name, buf.as_bytes());
        let body_len = buf.len() as u64;
        self.scratch = buf;
        result?;
        if self.commit_marker {
            self.medium.append(name, format!("{MARKER}\n").as_bytes())?;
            self.committed_len
                .insert(name.to_string(), committed + body_len + MARKER.len() as u64 + 1);
        } else {
            // Header-only prefix is still a valid starting point.
            if committed == 0 {
                self.committed_len.insert(name.to_string(), HEADER.len() as u64 + 1);
            }
        }
        self.records_committed += group.len() as u64;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("flush failed after {committed} records: {source}")]
pub struct FlushError {
    pub committed: usize,
    #[source]
    pub source: MediumError,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::csv::tests::sample;
    use crate::storage::medium::MemMedium;

    const DAY0: i64 = 1_767_225_600;

    fn batch(start: i64, n: i64) -> Vec<Record> {
        (start..start + n).map(|s| sample(DAY0 + s, 0)).collect()
    }

    fn committed(m: &mut MemMedium) -> Vec<Record> {
        let mut copy = m.clone();
        copy.power_cycle();
        recover(&mut copy).unwrap().0
    }

    #[test]
    fn clean_flush_and_recover() {
        let (mut log, _) = LogStore::open(MemMedium::new()).unwrap();
        log.flush(&batch(0, 60)).unwrap();
        log.flush(&batch(60, 60)).unwrap();
        let mut m = log.into_medium();
        let (records, report) = recover(&mut m).unwrap();
        assert_eq!(records, batch(0, 120));
        assert_eq!(report.committed_records, 120);
        assert_eq!(report.truncated_bytes, 0);
        assert!(verify(&m).unwrap().pass());
    }

    #[test]
    fn segment_text_layout() {
        let (mut log, _) = LogStore::open(MemMedium::new()).unwrap();
        log.flush(&batch(0, 2)).unwrap();
        let text = String::from_utf8(log.medium().read("2026-01-01.csv").unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], HEADER);
        assert!(lines[3].starts_with("# crc32=") && lines[3].ends_with(" count=2"));
        assert_eq!(lines[4], "# committed");
    }

    #[test]
    fn batches_split_at_midnight() {
        let (mut log, _) = LogStore::open(MemMedium::new()).unwrap();
        log.flush(&batch(86_370, 60)).unwrap();
        let m = log.into_medium();
        assert_eq!(m.list().unwrap(), vec!["2026-01-01.csv", "2026-01-02.csv"]);
        let r = verify(&m).unwrap();
        assert_eq!(r.segments[0].committed_records, 30);
        assert_eq!(r.segments[1].committed_records, 30);
    }

    #[test]
    fn unavailable_medium_keeps_nothing() {
        let mut m = MemMedium::new();
        m.set_available(false);
        let (mut log, _) = LogStore::open(m).unwrap();
        let err = log.flush(&batch(0, 10)).unwrap_err();
        assert!(matches!(err.source, MediumError::Unavailable));
        assert_eq!(err.committed, 0);
        assert!(log.medium().files().is_empty());
    }

    #[test]
    fn exhaustive_crash_point_sweep_over_one_flush() {
        let (mut log, _) = LogStore::open(MemMedium::new()).unwrap();
        log.flush(&batch(0, 60)).unwrap();
        let base = log.into_medium();
        let before = base.bytes_written();
        let flush_bytes = {
            let (mut probe, _) = LogStore::open(base.clone()).unwrap();
            probe.flush(&batch(60, 60)).unwrap();
            probe.into_medium().bytes_written() - before
        };
        for cut in 0..=flush_bytes as usize {
            let mut m = base.clone();
            m.crash_after(cut);
            let (mut log, _) = LogStore::open(m).unwrap();
            let ok = log.flush(&batch(60, 60)).is_ok();
            let mut m = log.into_medium();
            m.power_cycle();
            let (mut reopened, _) = LogStore::open(m).unwrap();
            let got = committed(reopened.medium_mut());
            let expected = if ok { batch(0, 120) } else { batch(0, 60) };
            assert_eq!(got, expected, "crash after {cut} bytes");
            // The log keeps working after recovery.
            reopened.flush(&batch(200, 5)).unwrap();
            let mut after = batch(0, if ok { 120 } else { 60 });
            after.extend(batch(200, 5));
            assert_eq!(committed(reopened.medium_mut()), after, "resume after {cut}");
        }
    }

    #[test]
    fn crash_while_creating_a_segment() {
        let mut m = MemMedium::new();
        m.crash_after(10);
        let (mut log, _) = LogStore::open(m).unwrap();
        assert!(log.flush(&batch(0, 5)).is_err());
        let mut m = log.into_medium();
        m.power_cycle();
        let (mut log, report) = LogStore::open(m).unwrap();
        assert_eq!(report.truncated_bytes, 10);
        log.flush(&batch(0, 5)).unwrap();
        assert_eq!(committed(log.medium_mut()), batch(0, 5));
    }

    #[test]
    fn bit_flip_quarantines_block() {
        let (mut log, _) = LogStore::open(MemMedium::new()).unwrap();
        log.flush(&batch(0, 10)).unwrap();
        log.flush(&batch(10, 10)).unwrap();
        let mut m = log.into_medium();
        let name = "2026-01-01.csv";
        m.flip_bit(name, HEADER.len() + 20, 2);
        let report = verify(&m).unwrap();
        assert!(!report.pass());
        assert_eq!(report.failures(), 1);
        let (records, rec) = recover(&mut m).unwrap();
        assert_eq!(records, batch(10, 10));
        assert_eq!(rec.quarantined_blocks, 1);
        assert_eq!(rec.quarantined_records, 10);
    }

    #[test]
    fn empty_medium_verifies() {
        let report = verify(&MemMedium::new()).unwrap();
        assert!(report.segments.is_empty());
        assert!(report.pass());
    }

    #[test]
    fn disabled_marker_commits_nothing() {
        let (mut log, _) = LogStore::open(MemMedium::new()).unwrap();
        log.set_commit_marker(false);
        log.flush(&batch(0, 10)).unwrap();
        assert!(committed(log.medium_mut()).is_empty());
    }

    #[test]
    fn partial_failure_reports_committed_prefix() {
        let (mut log, _) = LogStore::open(MemMedium::new()).unwrap();
        log.flush(&batch(0, 1)).unwrap();
        let mut m = log.into_medium();
        // Enough budget for the first day's group but not the second.
        let first_day = {
            let (mut probe, _) = LogStore::open(m.clone()).unwrap();
            let before = probe.medium().bytes_written();
            probe.flush(&batch(86_390, 10)).unwrap();
            probe.medium().bytes_written() - before
        };
        m.crash_after(first_day as usize + 5);
        let (mut log, _) = LogStore::open(m).unwrap();
        let err = log.flush(&batch(86_390, 20)).unwrap_err();
        assert_eq!(err.committed, 10);
    }
}
