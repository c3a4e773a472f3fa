//! Flat binary parameter container.
//!
//! ```text
//! magic   8 bytes  "UNIGNNCK"
//! version u32 LE   1
//! count   u32 LE   number of matrices
//! count × { name_len u32 LE, name UTF-8, rows u64 LE, cols u64 LE,
//!           rows·cols f64 LE in row-major order }
//! ```
//!
//! Semantic cluster assignments ride along as `sem.{l}.assign` (1×N) and
//! `sem.{l}.clusters` (1×1) so a checkpoint reproduces eval-mode outputs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::forward::{GraphContext, SemanticLayer};
use super::params::ModelParams;
use crate::connectivity::SemanticAdjacency;
use crate::error::{Error, Result};
use crate::graph::DenseMatrix;

pub const MAGIC: &[u8; 8] = b"UNIGNNCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<(String, DenseMatrix)>,
}

impl Checkpoint {
    pub fn capture(params: &ModelParams, ctx: &GraphContext) -> Self {
        let mut entries: Vec<(String, DenseMatrix)> =
            params.tensors.iter().map(|p| (p.name.clone(), p.value.clone())).collect();
        for (i, layer) in ctx.semantic.iter().enumerate() {
            let a = layer.adjacency.assignments().iter().map(|&k| k as f64).collect::<Vec<_>>();
            let n = a.len();
            entries.push((format!("sem.{}.assign", i + 1), DenseMatrix::from_raw(1, n, a)));
            let k = layer.adjacency.num_clusters() as f64;
            entries.push((format!("sem.{}.clusters", i + 1), DenseMatrix::scalar(k)));
        }
        Self { entries }
    }

    pub fn get(&self, name: &str) -> Option<&DenseMatrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Loads parameter values and semantic assignments. Restored semantic
    /// layers carry no centroids, so they serve evaluation only.
    pub fn restore(&self, params: &mut ModelParams, ctx: &mut GraphContext) -> Result<()> {
        let weights = self.entries.iter().filter(|(n, _)| !n.ends_with(".assign") && !n.ends_with(".clusters"));
        params.load_values(weights.map(|(n, m)| (n.as_str(), m)))?;
        for p in &params.tensors {
            if self.get(&p.name).is_none() {
                return Err(Error::Checkpoint(format!("parameter `{}` missing", p.name)));
            }
        }
        let mut semantic = Vec::new();
        for l in 1.. {
            let Some(assign) = self.get(&format!("sem.{l}.assign")) else { break };
            let k = self
                .get(&format!("sem.{l}.clusters"))
                .and_then(DenseMatrix::item)
                .ok_or_else(|| Error::Checkpoint(format!("cluster count for layer {l} missing")))?;
            if assign.cols() != ctx.num_nodes() {
                return Err(Error::Checkpoint(format!(
                    "layer {l} assigns {} nodes, graph has {}",
                    assign.cols(),
                    ctx.num_nodes()
                )));
            }
            let assignments = assign.data().iter().map(|&v| v as usize).collect();
            let adjacency = SemanticAdjacency::from_assignments(assignments, k as usize)
                .map_err(|e| Error::Checkpoint(format!("layer {l}: {e}")))?;
            semantic.push(SemanticLayer { adjacency, centroids: DenseMatrix::zeros(0, 0) });
        }
        ctx.semantic = semantic;
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, m) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = core::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?
                .into();
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let len = rows
                .checked_mul(cols)
                .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| Error::Checkpoint(format!("matrix `{name}` overruns the file")))?;
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            }
            let m = DenseMatrix::from_vec(rows, cols, data)
                .map_err(|e| Error::Checkpoint(format!("matrix `{name}`: {e}")))?;
            entries.push((name, m));
        }
        if r.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { entries })
    }
}

struct Reader<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl<'b> Reader<'b> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'b [u8]> {
        if n > self.remaining() {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
