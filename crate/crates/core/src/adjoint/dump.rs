//! Binary tape dumps for debugging.
//!
//! Layout, all little-endian: magic `FVWTAPE1`, `u64` step count; per step a
//! `u64` step index and `u32` block count; per block a `u32` id, `u64` rows,
//! `u64` cols and `rows * cols` row-major `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use crate::adjoint::{step_jacobians, AdjointTape};
use crate::error::{FvwError, Result};
use crate::model::snapshot::{read_u32, read_u64, take};
use crate::model::WakeModel;

pub const TAPE_MAGIC: &[u8; 8] = b"FVWTAPE1";

/// Block identifiers.
pub mod block {
    pub const STATE: u32 = 1;
    pub const CONTROLS: u32 = 2;
    pub const OUTPUTS: u32 = 3;
    pub const DJ_DQ: u32 = 4;
    pub const DJ_DM: u32 = 5;
    pub const DGAMMA0_DQ: u32 = 6;
    pub const DF_DQ: u32 = 10;
    pub const DF_DM: u32 = 11;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpBlock {
    pub id: u32,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl DumpBlock {
    fn row(id: u32, values: &[f64]) -> Self {
        DumpBlock {
            id,
            rows: 1,
            cols: values.len(),
            values: values.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpStep {
    pub step: u64,
    pub blocks: Vec<DumpBlock>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TapeDump {
    pub steps: Vec<DumpStep>,
}

impl TapeDump {
    /// Collect the tape; with `dense` the full step Jacobians are assembled
    /// and included as well (small configurations only).
    pub fn from_tape(model: &WakeModel, tape: &AdjointTape, dense: bool) -> Result<Self> {
        let cfg = model.config();
        let n = tape.horizon();
        let mut steps = Vec::with_capacity(tape.records.len());
        for (k, rec) in tape.records.iter().enumerate() {
            let mut blocks = vec![
                DumpBlock::row(block::STATE, &rec.state.to_flat(cfg)),
                DumpBlock::row(block::CONTROLS, &rec.controls),
                DumpBlock::row(block::OUTPUTS, &rec.outputs),
                DumpBlock::row(block::DJ_DQ, &rec.dj_dq),
                DumpBlock::row(block::DJ_DM, &rec.dj_dm),
            ];
            if let Some(g) = rec.shed_gradient() {
                blocks.push(DumpBlock::row(block::DGAMMA0_DQ, g));
            }
            if dense && k < n {
                let jac = step_jacobians(model, &rec.state, &rec.controls)?;
                for (id, m) in [(block::DF_DQ, jac.df_dq), (block::DF_DM, jac.df_dm)] {
                    blocks.push(DumpBlock {
                        id,
                        rows: m.rows,
                        cols: m.cols,
                        values: m.data,
                    });
                }
            }
            steps.push(DumpStep {
                step: rec.step as u64,
                blocks,
            });
        }
        Ok(TapeDump { steps })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(TAPE_MAGIC);
        out.extend_from_slice(&(self.steps.len() as u64).to_le_bytes());
        for s in &self.steps {
            out.extend_from_slice(&s.step.to_le_bytes());
            out.extend_from_slice(&(s.blocks.len() as u32).to_le_bytes());
            for b in &s.blocks {
                out.extend_from_slice(&b.id.to_le_bytes());
                out.extend_from_slice(&(b.rows as u64).to_le_bytes());
                out.extend_from_slice(&(b.cols as u64).to_le_bytes());
                for v in &b.values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<TapeDump> {
        let err = |reason: &str| FvwError::format("tape dump", reason);
        let mut cur = bytes;
        if take(&mut cur, 8) != Some(TAPE_MAGIC.as_slice()) {
            return Err(err("bad magic"));
        }
        let n_steps = read_u64(&mut cur).ok_or_else(|| err("truncated step count"))?;
        // every step needs at least 12 bytes
        if n_steps > (cur.len() / 12) as u64 {
            return Err(err("step count exceeds payload"));
        }
        let mut steps = Vec::with_capacity(n_steps as usize);
        for _ in 0..n_steps {
            let step = read_u64(&mut cur).ok_or_else(|| err("truncated step header"))?;
            let n_blocks = read_u32(&mut cur).ok_or_else(|| err("truncated step header"))?;
            if n_blocks as usize > cur.len() / 20 {
                return Err(err("block count exceeds payload"));
            }
            let mut blocks = Vec::with_capacity(n_blocks as usize);
            for _ in 0..n_blocks {
                let id = read_u32(&mut cur).ok_or_else(|| err("truncated block header"))?;
                let rows = read_u64(&mut cur).ok_or_else(|| err("truncated block header"))?;
                let cols = read_u64(&mut cur).ok_or_else(|| err("truncated block header"))?;
                let n_bytes = rows
                    .checked_mul(cols)
                    .and_then(|n| n.checked_mul(8))
                    .filter(|&n| n <= cur.len() as u64)
                    .ok_or_else(|| err("block size exceeds payload"))?;
                let raw = take(&mut cur, n_bytes as usize).unwrap();
                let values = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                blocks.push(DumpBlock {
                    id,
                    rows: rows as usize,
                    cols: cols as usize,
                    values,
                });
            }
            steps.push(DumpStep { step, blocks });
        }
        if !cur.is_empty() {
            return Err(err("trailing bytes"));
        }
        Ok(TapeDump { steps })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.encode()))
            .map_err(|e| FvwError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<TapeDump> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| FvwError::io(path, e))?;
        TapeDump::decode(&bytes)
    }

    pub fn find(&self, step_index: usize, id: u32) -> Option<&DumpBlock> {
        self.steps.get(step_index)?.blocks.iter().find(|b| b.id == id)
    }
}
