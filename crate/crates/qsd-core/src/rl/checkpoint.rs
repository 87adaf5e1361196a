//! Versioned net checkpoints: an 8-byte magic, a little-endian u32 header
//! length, a JSON header with the widths, then every parameter as a
//! little-endian f64 in the net's flat order. Loading rebuilds the exact net.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::net::PolicyValueNet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"QSDNET01";
const VERSION: u32 = 1;

/// Shape header stored alongside the parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub n: usize,
    pub m: usize,
    pub quantization: usize,
    pub hidden: usize,
    pub actions: usize,
    pub param_count: usize,
}

pub fn save_checkpoint(path: &Path, net: &PolicyValueNet, quantization: usize) -> Result<()> {
    let meta = CheckpointMeta {
        version: VERSION,
        n: net.n(),
        m: net.m(),
        quantization,
        hidden: net.hidden_width(),
        actions: net.action_count(),
        param_count: net.param_count(),
    };
    let header = serde_json::to_vec(&meta)
        .map_err(|e| Error::invalid("checkpoint", format!("header serialization: {e}")))?;
    let mut file = fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(header.len() as u32).to_le_bytes())?;
    file.write_all(&header)?;
    let mut buf = Vec::with_capacity(meta.param_count * 8);
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(PolicyValueNet, CheckpointMeta)> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("checkpoint", "bad magic bytes"));
    }
    let mut len_bytes = [0u8; 4];
    file.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header = vec![0u8; header_len];
    file.read_exact(&mut header)?;
    let meta: CheckpointMeta = serde_json::from_slice(&header)
        .map_err(|e| Error::invalid("checkpoint", format!("header parse: {e}")))?;
    if meta.version != VERSION {
        return Err(Error::invalid("checkpoint", format!("unsupported version {}", meta.version)));
    }
    if meta.actions != meta.n * meta.quantization {
        return Err(Error::invalid(
            "checkpoint",
            format!("{} actions for n={} Q={}", meta.actions, meta.n, meta.quantization),
        ));
    }
    let mut seed_rng = ChaCha12Rng::seed_from_u64(0);
    let mut net = PolicyValueNet::new(meta.n, meta.m, meta.actions, meta.hidden, &mut seed_rng);
    if meta.param_count != net.param_count() {
        return Err(Error::invalid(
            "checkpoint",
            format!("{} parameters for shape wanting {}", meta.param_count, net.param_count()),
        ));
    }
    let mut raw = vec![0u8; meta.param_count * 8];
    file.read_exact(&mut raw)?;
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("checkpoint", "non-finite parameter"));
    }
    net.set_params(&params)?;
    Ok((net, meta))
}
