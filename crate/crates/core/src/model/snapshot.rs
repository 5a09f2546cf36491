//! Binary wake snapshots.
//!
//! Layout: magic `FVWSNAP1`, `u64` LE header length, JSON header, `u64` LE
//! state length `n_s`, then `n_s` little-endian `f64` values of the flat state.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FvwError, Result};
use crate::model::config::ModelConfig;
use crate::model::state::StateVector;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"FVWSNAP1";

/// Headers beyond this size are rejected before allocation.
const MAX_HEADER_BYTES: u64 = 1 << 20;
const MAX_STATE_LEN: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub config: ModelConfig,
    /// Time step index of the stored state.
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub state: StateVector,
}

impl Snapshot {
    pub fn encode(&self) -> Result<Vec<u8>> {
        self.state.check_layout(&self.header.config)?;
        let header = serde_json::to_vec(&self.header)?;
        let flat = self.state.to_flat(&self.header.config);
        let mut out = Vec::with_capacity(24 + header.len() + 8 * flat.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
        let err = |reason: &str| FvwError::format("snapshot", reason);
        let mut cur = bytes;
        let magic = take(&mut cur, 8).ok_or_else(|| err("truncated magic"))?;
        if magic != SNAPSHOT_MAGIC {
            return Err(err("bad magic"));
        }
        let hlen = read_u64(&mut cur).ok_or_else(|| err("truncated header length"))?;
        if hlen > MAX_HEADER_BYTES || hlen > cur.len() as u64 {
            return Err(err("header length out of range"));
        }
        let header: SnapshotHeader = serde_json::from_slice(take(&mut cur, hlen as usize).unwrap())
            .map_err(|e| FvwError::format("snapshot", format!("header: {e}")))?;
        header
            .config
            .validate()
            .map_err(|e| FvwError::format("snapshot", format!("header config: {e}")))?;
        let n = read_u64(&mut cur).ok_or_else(|| err("truncated state length"))?;
        if n > MAX_STATE_LEN || n as usize != header.config.state_size() {
            return Err(err("state length does not match the configuration"));
        }
        if cur.len() as u64 != 8 * n {
            return Err(err("state payload size mismatch"));
        }
        let flat: Vec<f64> = cur
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let state = StateVector::from_flat(&header.config, &flat)?;
        Ok(Snapshot { header, state })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| FvwError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Snapshot> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| FvwError::io(path, e))?;
        Snapshot::decode(&bytes)
    }
}

pub(crate) fn take<'a>(cur: &mut &'a [u8], n: usize) -> Option<&'a [u8]> {
    if cur.len() < n {
        return None;
    }
    let (head, rest) = cur.split_at(n);
    *cur = rest;
    Some(head)
}

pub(crate) fn read_u64(cur: &mut &[u8]) -> Option<u64> {
    take(cur, 8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
}

pub(crate) fn read_u32(cur: &mut &[u8]) -> Option<u32> {
    take(cur, 4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InflowScenario, WakeModel};

    fn sample() -> Snapshot {
        let mut c = ModelConfig::reference_3d();
        c.rings = 4;
        c.elements_per_ring = 6;
        let m = WakeModel::new(c.clone()).unwrap();
        let state = m.spin_up(&InflowScenario::unit(), &[0.3, 0.2, 0.3, 0.0], 5).unwrap();
        Snapshot {
            header: SnapshotHeader { config: c, step: 5 },
            state,
        }
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let s = sample();
        let bytes = s.encode().unwrap();
        assert_eq!(Snapshot::decode(&bytes).unwrap(), s);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.snap");
        s.write(&p).unwrap();
        assert_eq!(Snapshot::read(&p).unwrap(), s);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().encode().unwrap();
        for cut in [0, 7, 12, 40, bytes.len() - 1] {
            assert!(Snapshot::decode(&bytes[..cut]).is_err());
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Snapshot::decode(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(Snapshot::decode(&long).is_err());
    }
}
