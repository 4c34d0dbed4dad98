//! Append-only, hash-chained audit log stored as JSON lines.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::canonical::{digest_of, is_hex_digest, to_canonical_string, ZERO_DIGEST};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    QualityScore,
    MarginalEstimate,
    Auction,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecord {
    pub sequence: u64,
    /// UTC, second precision, RFC 3339.
    pub timestamp: String,
    pub kind: AuditKind,
    pub payload_digest: String,
    pub prev_digest: String,
    pub record_digest: String,
}

#[derive(Serialize)]
struct Chained<'a> {
    sequence: u64,
    timestamp: &'a str,
    kind: AuditKind,
    payload_digest: &'a str,
    prev_digest: &'a str,
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn well_formed_timestamp(s: &str) -> bool {
    DateTime::parse_from_rfc3339(s)
        .map(|t| format_timestamp(t.with_timezone(&Utc)) == s)
        .unwrap_or(false)
}

impl AuditRecord {
    pub fn new(
        sequence: u64,
        timestamp: String,
        kind: AuditKind,
        payload_digest: String,
        prev_digest: String,
    ) -> Result<Self> {
        let mut record = Self {
            sequence,
            timestamp,
            kind,
            payload_digest,
            prev_digest,
            record_digest: String::new(),
        };
        record.record_digest = record.expected_digest()?;
        Ok(record)
    }

    pub fn expected_digest(&self) -> Result<String> {
        digest_of(&Chained {
            sequence: self.sequence,
            timestamp: &self.timestamp,
            kind: self.kind,
            payload_digest: &self.payload_digest,
            prev_digest: &self.prev_digest,
        })
    }

    pub fn to_line(&self) -> Result<String> {
        Ok(to_canonical_string(self)? + "\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainBreak {
    /// Sequence number the broken record should have had.
    pub sequence: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub intact: bool,
    pub records: u64,
    pub head_digest: String,
    pub first_break: Option<ChainBreak>,
}

fn check_line(line: &[u8], sequence: u64, prev: &str) -> std::result::Result<AuditRecord, String> {
    let record: AuditRecord = serde_json::from_slice(line).map_err(|e| format!("unparseable record: {e}"))?;
    if record.sequence != sequence {
        return Err(format!("sequence {} out of order", record.sequence));
    }
    if !well_formed_timestamp(&record.timestamp) {
        return Err(format!("malformed timestamp {:?}", record.timestamp));
    }
    for (name, d) in [
        ("payload_digest", &record.payload_digest),
        ("prev_digest", &record.prev_digest),
        ("record_digest", &record.record_digest),
    ] {
        if !is_hex_digest(d) {
            return Err(format!("{name} is not a lowercase hex digest"));
        }
    }
    if record.prev_digest != prev {
        return Err("prev_digest does not link to the previous record".into());
    }
    let expected = record.expected_digest().map_err(|e| e.to_string())?;
    if record.record_digest != expected {
        return Err("record_digest does not match record contents".into());
    }
    if to_canonical_string(&record).map_err(|e| e.to_string())?.as_bytes() != line {
        return Err("record is not in canonical form".into());
    }
    Ok(record)
}

/// Recomputes the whole chain and reports the first break.
pub fn verify_bytes(bytes: &[u8]) -> Verification {
    let mut head = ZERO_DIGEST.to_owned();
    let mut count = 0u64;
    if bytes.is_empty() {
        return Verification {
            intact: true,
            records: 0,
            head_digest: head,
            first_break: None,
        };
    }
    let body = match bytes.strip_suffix(b"\n") {
        Some(b) => b,
        None => bytes,
    };
    let lines: Vec<&[u8]> = body.split(|b| *b == b'\n').collect();
    for (k, line) in lines.iter().enumerate() {
        let sequence = k as u64;
        let result = check_line(line, sequence, &head).and_then(|r| {
            if k + 1 == lines.len() && !bytes.ends_with(b"\n") {
                Err("final record is not newline-terminated".into())
            } else {
                Ok(r)
            }
        });
        match result {
            Ok(record) => {
                head = record.record_digest;
                count += 1;
            }
            Err(reason) => {
                return Verification {
                    intact: false,
                    records: count,
                    head_digest: head,
                    first_break: Some(ChainBreak { sequence, reason }),
                }
            }
        }
    }
    Verification {
        intact: true,
        records: count,
        head_digest: head,
        first_break: None,
    }
}

pub fn verify_file(path: &Path) -> Result<Verification> {
    Ok(verify_bytes(&fs::read(path)?))
}

/// Single writer over a log file. Opening verifies the existing chain.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    next_sequence: u64,
    head: String,
}

impl AuditLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let v = verify_bytes(&bytes);
        if let Some(b) = v.first_break {
            return Err(Error::data(format!(
                "audit log {} is broken at sequence {}: {}",
                path.display(),
                b.sequence,
                b.reason
            )));
        }
        Ok(Self {
            path,
            next_sequence: v.records,
            head: v.head_digest,
        })
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn len(&self) -> u64 {
        self.next_sequence
    }

    pub fn is_empty(&self) -> bool {
        self.next_sequence == 0
    }

    /// Appends a record for `payload`, stamped with the current time.
    pub fn append<T: Serialize + ?Sized>(&mut self, kind: AuditKind, payload: &T) -> Result<AuditRecord> {
        self.append_digest(kind, digest_of(payload)?, Utc::now())
    }

    pub fn append_digest(&mut self, kind: AuditKind, payload_digest: String, at: DateTime<Utc>) -> Result<AuditRecord> {
        let record = AuditRecord::new(
            self.next_sequence,
            format_timestamp(at),
            kind,
            payload_digest,
            self.head.clone(),
        )?;
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(record.to_line()?.as_bytes())?;
        file.sync_data()?;
        self.next_sequence += 1;
        self.head = record.record_digest.clone();
        Ok(record)
    }
}

/// Serialized chain of records over the given payload digests.
pub fn build_chain(entries: &[(AuditKind, String)], at: DateTime<Utc>) -> Result<Vec<u8>> {
    let mut prev = ZERO_DIGEST.to_owned();
    let mut out = Vec::new();
    for (k, (kind, digest)) in entries.iter().enumerate() {
        let r = AuditRecord::new(k as u64, format_timestamp(at), *kind, digest.clone(), prev)?;
        out.extend_from_slice(r.to_line()?.as_bytes());
        prev = r.record_digest;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::sha256_hex;
    use chrono::TimeZone;

    fn at() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 6, 1, 12, 0, 0).unwrap()
    }

    fn chain(n: usize) -> Vec<u8> {
        let entries: Vec<(AuditKind, String)> = (0..n)
            .map(|k| (AuditKind::Auction, sha256_hex(format!("payload {k}").as_bytes())))
            .collect();
        build_chain(&entries, at()).unwrap()
    }

    fn line_start(bytes: &[u8], k: usize) -> usize {
        if k == 0 {
            return 0;
        }
        bytes.iter().enumerate().filter(|(_, b)| **b == b'\n').nth(k - 1).unwrap().0 + 1
    }

    #[test]
    fn empty_and_untouched_logs_verify() {
        assert!(verify_bytes(b"").intact);
        let v = verify_bytes(&chain(5));
        assert!(v.intact);
        assert_eq!(v.records, 5);
    }

    #[test]
    fn flipped_payload_byte_breaks_at_that_record() {
        let mut bytes = chain(6);
        let start = line_start(&bytes, 3);
        let pos = start + bytes[start..].windows(16).position(|w| w == b"payload_digest\":".as_slice()).unwrap() + 20;
        bytes[pos] ^= 0x01;
        assert_eq!(verify_bytes(&bytes).first_break.unwrap().sequence, 3);
    }

    #[test]
    fn reordering_and_truncation_detected() {
        let bytes = chain(4);
        let lines: Vec<&[u8]> = bytes.split_inclusive(|b| *b == b'\n').collect();
        let swapped = [lines[0], lines[2], lines[1], lines[3]].concat();
        assert_eq!(verify_bytes(&swapped).first_break.unwrap().sequence, 1);
        let cut = &bytes[..bytes.len() - 10];
        assert_eq!(verify_bytes(cut).first_break.unwrap().sequence, 3);
        let dropped = [lines[0], lines[2], lines[3]].concat();
        assert_eq!(verify_bytes(&dropped).first_break.unwrap().sequence, 1);
    }

    #[test]
    fn every_single_bit_flip_is_located() {
        let bytes = chain(3);
        for pos in 0..bytes.len() {
            let owner = bytes[..pos].iter().filter(|b| **b == b'\n').count() as u64;
            for bit in 0..8 {
                let mut m = bytes.clone();
                m[pos] ^= 1 << bit;
                let v = verify_bytes(&m);
                assert_eq!(v.first_break.map(|b| b.sequence), Some(owner), "byte {pos} bit {bit}");
            }
        }
    }

    #[test]
    fn records_round_trip_byte_identically() {
        let bytes = chain(2);
        let first = bytes.split(|b| *b == b'\n').next().unwrap();
        let r: AuditRecord = serde_json::from_slice(first).unwrap();
        assert_eq!(r.to_line().unwrap().trim_end().as_bytes(), first);
        assert_eq!(r.prev_digest, ZERO_DIGEST);
    }

    #[test]
    fn writer_appends_and_resumes() {
        let dir = std::env::temp_dir().join(format!("mia-audit-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("audit.jsonl");
        let _ = fs::remove_file(&path);
        let mut log = AuditLog::open(&path).unwrap();
        log.append(AuditKind::QualityScore, &"a").unwrap();
        log.append(AuditKind::Simulation, &[1, 2]).unwrap();
        let mut reopened = AuditLog::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        let third = reopened.append(AuditKind::Auction, &"c").unwrap();
        assert_eq!(third.sequence, 2);
        let v = verify_file(&path).unwrap();
        assert!(v.intact && v.records == 3 && v.head_digest == third.record_digest);

        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 5] ^= 0x02;
        fs::write(&path, &bytes).unwrap();
        assert!(AuditLog::open(&path).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
