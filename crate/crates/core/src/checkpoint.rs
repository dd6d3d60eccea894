//! Network checkpoints: a magic line, a one-line JSON header, then every
//! network's parameters as little-endian `f64` in header order (actor,
//! critic1, critic2, value, target value).

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{AgentArch, GraphValueNet, Head, Mlp, Parameterized};
use crate::sac::{Agent, SacConfig};

pub const MAGIC: &str = "BLOCKMIND-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;
pub const NETWORKS: [&str; 5] = ["actor", "critic1", "critic2", "value", "target_value"];

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint does not match its header: {0}")]
    Layout(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub arch: AgentArch,
    pub config: SacConfig,
    pub episode: usize,
    pub networks: Vec<(String, usize)>,
}

fn networks(agent: &Agent) -> [&[f64]; 5] {
    [
        agent.actor.params(),
        agent.critic1.params(),
        agent.critic2.params(),
        agent.value.params(),
        agent.target_value.params(),
    ]
}

pub fn encode(agent: &Agent, episode: usize) -> Vec<u8> {
    let nets = networks(agent);
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        arch: agent.arch.clone(),
        config: agent.config.clone(),
        episode,
        networks: NETWORKS.iter().zip(&nets).map(|(n, p)| (n.to_string(), p.len())).collect(),
    };
    let mut out = format!("{MAGIC}\n{}\n", serde_json::to_string(&header).expect("header serializes")).into_bytes();
    out.reserve(nets.iter().map(|p| p.len() * 8).sum());
    for p in nets {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, Agent), CheckpointError> {
    let mut lines = bytes.splitn(3, |&b| b == b'\n');
    if lines.next() != Some(MAGIC.as_bytes()) {
        return Err(CheckpointError::BadMagic);
    }
    let header_line = lines.next().ok_or(CheckpointError::BadMagic)?;
    let version: serde_json::Value = serde_json::from_slice(header_line)?;
    let found = version.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let header: CheckpointHeader = serde_json::from_slice(header_line)?;
    let body = lines.next().unwrap_or(&[]);

    let arch = &header.arch;
    let mut actor = Mlp::zeros(&arch.mlp_widths, Head::Probabilities);
    let mut critic1 = Mlp::zeros(&arch.mlp_widths, Head::Linear);
    let mut critic2 = Mlp::zeros(&arch.mlp_widths, Head::Linear);
    let mut value = GraphValueNet::zeros(arch.value.clone());
    let mut target = GraphValueNet::zeros(arch.value.clone());
    let slots: [&mut [f64]; 5] = [
        actor.params_mut(),
        critic1.params_mut(),
        critic2.params_mut(),
        value.params_mut(),
        target.params_mut(),
    ];
    let expected: usize = slots.iter().map(|s| s.len() * 8).sum();
    if body.len() != expected {
        return Err(CheckpointError::Layout(format!("{} parameter bytes, expected {expected}", body.len())));
    }
    let mut chunks = body.chunks_exact(8);
    for ((slot, name), (hname, hlen)) in slots.into_iter().zip(NETWORKS).zip(&header.networks) {
        if name != hname || slot.len() != *hlen {
            return Err(CheckpointError::Layout(format!("network {hname} ({hlen} parameters)")));
        }
        for (v, c) in slot.iter_mut().zip(&mut chunks) {
            *v = f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        }
    }
    let agent = Agent::assemble(header.config.clone(), arch.clone(), actor, critic1, critic2, value, target);
    Ok((header, agent))
}

pub fn save(path: &Path, agent: &Agent, episode: usize) -> Result<(), CheckpointError> {
    crate::io_util::write_atomic(path, &encode(agent, episode)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<(CheckpointHeader, Agent), CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}
