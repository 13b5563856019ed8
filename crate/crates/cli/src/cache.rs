//! On-disk cache of E B_n.
//!
//! One file per step law, named by the law's fingerprint. The file is a
//! single text header line
//!
//! ```text
//! silt-eb-cache v1 fingerprint=<16 hex digits> records=<count>
//! ```
//!
//! followed by `count` little-endian records of `(n: u64, value: f64)`,
//! sorted by n.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use silt_core::{ExpectedSilt, StepDistribution};

use crate::error::{CliError, Result};

const MAGIC: &str = "silt-eb-cache v1";

pub fn cache_path(dir: &Path, dist: &StepDistribution) -> PathBuf {
    dir.join(format!("eb-{:016x}.bin", dist.fingerprint()))
}

pub fn write_records<W: Write>(mut w: W, fingerprint: u64, records: &BTreeMap<usize, f64>) -> std::io::Result<()> {
    writeln!(w, "{MAGIC} fingerprint={fingerprint:016x} records={}", records.len())?;
    for (&n, &v) in records {
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_records<R: Read>(r: R, fingerprint: u64) -> std::result::Result<BTreeMap<usize, f64>, String> {
    let mut r = BufReader::new(r);
    let mut header = String::new();
    r.read_line(&mut header).map_err(|e| e.to_string())?;
    let rest = header
        .trim_end()
        .strip_prefix(MAGIC)
        .ok_or_else(|| format!("header {:?} lacks the {MAGIC:?} tag", header.trim_end()))?;
    let mut fp = None;
    let mut count = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("fingerprint", v)) => fp = u64::from_str_radix(v, 16).ok(),
            Some(("records", v)) => count = v.parse::<usize>().ok(),
            _ => return Err(format!("unknown header field {field:?}")),
        }
    }
    let (fp, count) = fp.zip(count).ok_or("header needs fingerprint and records fields")?;
    if fp != fingerprint {
        return Err(format!("cache belongs to step law {fp:016x}, expected {fingerprint:016x}"));
    }
    let mut out = BTreeMap::new();
    let mut buf = [0u8; 16];
    for i in 0..count {
        r.read_exact(&mut buf).map_err(|e| format!("record {i}: {e}"))?;
        let n = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let v = f64::from_le_bytes(buf[8..].try_into().unwrap());
        out.insert(n, v);
    }
    if r.read(&mut buf).map_err(|e| e.to_string())? != 0 {
        return Err("trailing bytes after the last record".into());
    }
    Ok(out)
}

/// E B_n backed by a cache file.
pub struct EbCache {
    path: PathBuf,
    fingerprint: u64,
    stored: BTreeMap<usize, f64>,
    inner: ExpectedSilt,
}

impl EbCache {
    /// Opens the cache for `dist` in `dir`, reading any existing file.
    pub fn open(dir: &Path, dist: &StepDistribution) -> Result<Self> {
        let path = cache_path(dir, dist);
        let fingerprint = dist.fingerprint();
        let stored = match fs::File::open(&path) {
            Ok(f) => read_records(f, fingerprint).map_err(|reason| CliError::Cache {
                path: path.clone(),
                reason,
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        let mut inner = ExpectedSilt::new(dist);
        for (&n, &v) in &stored {
            inner.insert(n, v);
        }
        Ok(EbCache {
            path,
            fingerprint,
            stored,
            inner,
        })
    }

    /// Values for `ns`, computing and persisting the missing ones.
    pub fn values(&mut self, ns: &[usize]) -> Result<Vec<f64>> {
        let before = self.stored.len();
        let out: Vec<f64> = ns.iter().map(|&n| self.inner.value(n)).collect();
        for (&n, &v) in ns.iter().zip(&out) {
            self.stored.insert(n, v);
        }
        if self.stored.len() != before {
            if let Some(dir) = self.path.parent() {
                fs::create_dir_all(dir)?;
            }
            let tmp = self.path.with_extension("tmp");
            write_records(fs::File::create(&tmp)?, self.fingerprint, &self.stored)?;
            fs::rename(&tmp, &self.path)?;
        }
        Ok(out)
    }

    pub fn expected(&self) -> &ExpectedSilt {
        &self.inner
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_roundtrip() {
        let mut m = BTreeMap::new();
        m.insert(16, 12.5);
        m.insert(1 << 20, 3.0e6);
        let mut buf = Vec::new();
        write_records(&mut buf, 0xabc, &m).unwrap();
        assert!(buf.starts_with(b"silt-eb-cache v1 fingerprint=0000000000000abc records=2\n"));
        assert_eq!(read_records(&buf[..], 0xabc).unwrap(), m);
        assert!(read_records(&buf[..], 0xabd).unwrap_err().contains("belongs to"));
        assert!(read_records(&buf[..buf.len() - 1], 0xabc).is_err());
    }

    #[test]
    fn cached_values_equal_fresh_values() {
        let dir = tempfile::tempdir().unwrap();
        let d = StepDistribution::king();
        let ns = [8, 300, 20_000];
        let fresh = EbCache::open(dir.path(), &d).unwrap().values(&ns).unwrap();
        let reread = EbCache::open(dir.path(), &d).unwrap();
        for (&n, &v) in ns.iter().zip(&fresh) {
            assert_eq!(reread.expected().get(n), Some(v));
        }
    }
}
