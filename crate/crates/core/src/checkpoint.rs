//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes  "PACOCKPT"
//! version  u32 LE
//! hlen     u64 LE   length of the JSON header
//! header   hlen bytes of UTF-8 JSON
//! payload  f64 LE values, arrays back to back in header.arrays order
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compose::{CompositionalMatrix, ParameterSet};
use crate::envs::TaskSpec;
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::sac::{AgentConfig, SacAgent};
use crate::trainer::RunConfig;

pub const MAGIC: &[u8; 8] = b"PACOCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub agent: SacAgent,
    /// Task spec for every agent task, by index.
    pub specs: Vec<TaskSpec>,
    pub run: Option<RunConfig>,
    pub env_steps: u64,
    pub updates: u64,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct AdamHeader {
    lr: f64,
    steps: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    agent: AgentConfig,
    frozen: bool,
    specs: Vec<TaskSpec>,
    run: Option<RunConfig>,
    env_steps: u64,
    updates: u64,
    optimizers: Vec<AdamHeader>,
    arrays: Vec<ArrayEntry>,
}

fn optimizers(agent: &SacAgent) -> Vec<&Adam> {
    let o = &agent.opt;
    let mut v = vec![&o.phi_actor, &o.phi_critic, &o.shared_actor, &o.shared_critic];
    v.extend(o.w.iter());
    v.extend(o.alpha.iter());
    v
}

/// Rebuilds `W` from stored vectors without re-projecting them.
fn raw_matrix(k: usize, vectors: Vec<Vec<f64>>, normalize: bool) -> Result<CompositionalMatrix> {
    let mut m = CompositionalMatrix::new(k, vec![vec![0.0; k]; vectors.len()], normalize)?;
    for (t, v) in vectors.into_iter().enumerate() {
        if v.len() != k {
            return Err(Error::dim("compositional vector", &[k], &[v.len()]));
        }
        m.raw_mut(t).copy_from_slice(&v);
    }
    Ok(m)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let a = &self.agent;
        let mut arrays: Vec<(String, &[f64])> = vec![
            ("phi".into(), a.phi.as_flat()),
            ("shared".into(), &a.shared),
            ("target_phi".into(), a.target_phi.as_flat()),
            ("target_shared".into(), &a.target_shared),
        ];
        for (t, w) in a.w.vectors().iter().enumerate() {
            arrays.push((format!("w.{t}"), w));
        }
        for (t, w) in a.target_w.vectors().iter().enumerate() {
            arrays.push((format!("target_w.{t}"), w));
        }
        arrays.push(("log_alpha".into(), &a.log_alpha));
        let opts = optimizers(a);
        for (i, opt) in opts.iter().enumerate() {
            let (m, v) = opt.moments();
            arrays.push((format!("adam.{i}.m"), m));
            arrays.push((format!("adam.{i}.v"), v));
        }
        let header = Header {
            agent: a.config.clone(),
            frozen: a.phi.is_frozen(),
            specs: self.specs.clone(),
            run: self.run.clone(),
            env_steps: self.env_steps,
            updates: self.updates,
            optimizers: opts
                .iter()
                .map(|o| AdamHeader {
                    lr: o.lr,
                    steps: o.steps(),
                })
                .collect(),
            arrays: arrays
                .iter()
                .map(|(name, data)| ArrayEntry {
                    name: name.clone(),
                    len: data.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let payload: usize = arrays.iter().map(|(_, d)| d.len() * 8).sum();
        let mut out = Vec::with_capacity(20 + json.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, data) in &arrays {
            for v in data.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = &bytes[20..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut payload = &body[hlen..];
        let expected: usize = header.arrays.iter().map(|a| a.len * 8).sum();
        if payload.len() != expected {
            return Err(Error::Checkpoint(format!(
                "payload has {} bytes, header describes {expected}",
                payload.len()
            )));
        }
        let mut arrays = std::collections::VecDeque::new();
        for entry in &header.arrays {
            let (chunk, rest) = payload.split_at(entry.len * 8);
            payload = rest;
            let data: Vec<f64> = chunk
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push_back((entry.name.clone(), data));
        }
        let mut take = |name: &str| -> Result<Vec<f64>> {
            match arrays.pop_front() {
                Some((n, d)) if n == name => Ok(d),
                Some((n, _)) => Err(Error::Checkpoint(format!("expected array '{name}', found '{n}'"))),
                None => Err(Error::Checkpoint(format!("missing array '{name}'"))),
            }
        };

        let cfg = header.agent;
        let tasks = cfg.tasks;
        let k = cfg.k;
        let phi_flat = take("phi")?;
        let n = if k == 0 { 0 } else { phi_flat.len() / k };
        let mut phi = ParameterSet::from_flat(n, k, phi_flat)?;
        let shared = take("shared")?;
        let target_phi = ParameterSet::from_flat(n, k, take("target_phi")?)?;
        let target_shared = take("target_shared")?;
        let mut vectors = Vec::with_capacity(tasks);
        for t in 0..tasks {
            vectors.push(take(&format!("w.{t}"))?);
        }
        let mut target_vectors = Vec::with_capacity(tasks);
        for t in 0..tasks {
            target_vectors.push(take(&format!("target_w.{t}"))?);
        }
        let w = raw_matrix(k, vectors, cfg.normalize_w)?;
        let target_w = raw_matrix(k, target_vectors, cfg.normalize_w)?;
        let log_alpha = take("log_alpha")?;
        if header.frozen {
            phi.freeze();
        }
        let mut agent = SacAgent::from_parts(cfg, phi, shared, w)?;
        agent.target_phi = target_phi;
        agent.target_shared = target_shared;
        agent.target_w = target_w;
        if log_alpha.len() != tasks {
            return Err(bad("log_alpha length disagrees with task count"));
        }
        agent.log_alpha = log_alpha;
        let mut restored = Vec::with_capacity(header.optimizers.len());
        for (i, h) in header.optimizers.iter().enumerate() {
            let m = take(&format!("adam.{i}.m"))?;
            let v = take(&format!("adam.{i}.v"))?;
            restored.push(Adam::from_state(h.lr, m, v, h.steps));
        }
        if restored.len() != 4 + 2 * tasks {
            return Err(bad("optimizer count disagrees with task count"));
        }
        let mut it = restored.into_iter();
        let o = &mut agent.opt;
        o.phi_actor = it.next().unwrap();
        o.phi_critic = it.next().unwrap();
        o.shared_actor = it.next().unwrap();
        o.shared_critic = it.next().unwrap();
        o.w = it.by_ref().take(tasks).collect();
        o.alpha = it.collect();

        Ok(Checkpoint {
            agent,
            specs: header.specs,
            run: header.run,
            env_steps: header.env_steps,
            updates: header.updates,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
