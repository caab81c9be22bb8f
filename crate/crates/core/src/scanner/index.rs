//! Sorted on-disk fingerprint index.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! magic         8 bytes  "CLSIGIX1"
//! clusters      u32 count, then per cluster: u32 length + UTF-8 id
//! source_set    u32 length + UTF-8 identity of the signature set
//! entries       u64 count, then per entry: 32-byte fingerprint + u32 cluster index
//! ```
//!
//! Entries are strictly ascending by fingerprint, so a lookup is a binary
//! search over the loaded entry table.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fingerprint::Fingerprint;
use crate::signature::{SignatureError, SignatureSet};

const MAGIC: &[u8; 8] = b"CLSIGIX1";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("index file: {0}")]
    Io(#[from] io::Error),
    #[error("not a fingerprint index (bad magic)")]
    BadMagic,
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("corrupt signature set: {0}")]
    Signatures(#[from] SignatureError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FingerprintIndex {
    cluster_ids: Vec<String>,
    source_set: String,
    entries: Vec<(Fingerprint, u32)>,
}

impl FingerprintIndex {
    /// Indexes the union of all signature fingerprints.
    pub fn build(sigset: &SignatureSet) -> Result<Self, IndexError> {
        let owners = sigset.owners()?;
        let cluster_ids: Vec<String> = sigset.signatures.iter().map(|s| s.cluster_id.clone()).collect();
        let position = |id: &str| cluster_ids.iter().position(|c| c == id).expect("owner is a signature") as u32;
        let entries: Vec<(Fingerprint, u32)> = owners.into_iter().map(|(fp, id)| (fp, position(id))).collect();
        let source_set = source_set_id(&cluster_ids, &entries);
        Ok(Self {
            cluster_ids,
            source_set,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Content hash of the indexed `(fingerprint, cluster)` pairs.
    pub fn source_set(&self) -> &str {
        &self.source_set
    }

    pub fn cluster_ids(&self) -> &[String] {
        &self.cluster_ids
    }

    /// Cluster owning `fp`, if any.
    pub fn lookup(&self, fp: &Fingerprint) -> Option<&str> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(fp))
            .ok()
            .map(|i| self.cluster_ids[self.entries[i].1 as usize].as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Fingerprint, &str)> {
        self.entries
            .iter()
            .map(|(fp, c)| (fp, self.cluster_ids[*c as usize].as_str()))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), IndexError> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.cluster_ids.len() as u32).to_le_bytes())?;
        for id in &self.cluster_ids {
            write_str(&mut w, id)?;
        }
        write_str(&mut w, &self.source_set)?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for (fp, c) in &self.entries {
            w.write_all(fp.as_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads and checks an index: entries must be strictly ascending and
    /// point at existing clusters.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self, IndexError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(IndexError::BadMagic);
        }
        let clusters = read_u32(&mut r)? as usize;
        let cluster_ids = (0..clusters).map(|_| read_str(&mut r)).collect::<Result<Vec<_>, _>>()?;
        let source_set = read_str(&mut r)?;
        let mut count = [0u8; 8];
        r.read_exact(&mut count)?;
        let count = u64::from_le_bytes(count);
        let mut entries = Vec::new();
        for _ in 0..count {
            let mut fp = [0u8; 32];
            r.read_exact(&mut fp)?;
            let c = read_u32(&mut r)?;
            if c as usize >= cluster_ids.len() {
                return Err(IndexError::Corrupt(format!("cluster index {c} out of range")));
            }
            let fp = Fingerprint(fp);
            if let Some((last, _)) = entries.last() {
                if *last >= fp {
                    return Err(IndexError::Corrupt(format!("entry {fp} is duplicated or out of order")));
                }
            }
            entries.push((fp, c));
        }
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(IndexError::Corrupt("trailing bytes".into()));
        }
        if source_set_id(&cluster_ids, &entries) != source_set {
            return Err(IndexError::Corrupt("content does not match its source-set hash".into()));
        }
        Ok(Self {
            cluster_ids,
            source_set,
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let tmp = path.with_extension("idx.tmp");
        self.write_to(io::BufWriter::new(fs::File::create(&tmp)?))?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn open(path: &Path) -> Result<Self, IndexError> {
        Self::read_from(io::BufReader::new(fs::File::open(path)?))
    }
}

fn source_set_id(cluster_ids: &[String], entries: &[(Fingerprint, u32)]) -> String {
    let mut h = Sha256::new();
    for (fp, c) in entries {
        h.update(fp.as_bytes());
        h.update(cluster_ids[*c as usize].as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, IndexError> {
    let len = read_u32(r)? as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(IndexError::Corrupt("truncated string".into()));
    }
    String::from_utf8(buf).map_err(|_| IndexError::Corrupt("cluster id is not UTF-8".into()))
}
