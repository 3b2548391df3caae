//! Binary checkpoints.
//!
//! Layout: the magic `REFER01\n`; a little-endian `u64` byte length followed by a UTF-8
//! JSON header; every tensor listed in the header as raw little-endian `f64`s; a `u64`
//! length followed by the resume state (replay memory, generators, workers).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::agent::{Agent, StateScaler};
use crate::harness::codec::{ByteReader, ByteWriter};
use crate::harness::config::TrainConfig;
use crate::harness::train::Trainer;
use crate::rng::{self, Stream};

pub const MAGIC: &[u8; 8] = b"REFER01\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub algo: String,
    pub env: String,
    pub digest: String,
    pub config: BTreeMap<String, String>,
    /// Trainable parameters, target copies and optimizer moments excluded.
    pub param_count: usize,
    pub networks: Vec<(String, Vec<usize>)>,
    pub tensors: Vec<TensorInfo>,
    pub state_mean: Vec<f64>,
    pub state_std: Vec<f64>,
    pub sigma_r: f64,
    pub beta: f64,
    pub t: u64,
    pub k: u64,
    pub adam_steps: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub tensors: Vec<(String, Vec<f64>)>,
    pub resume: Vec<u8>,
}

impl Checkpoint {
    pub fn capture(trainer: &Trainer) -> Self {
        let cfg = &trainer.cfg;
        let scaler = trainer.scaler();
        let tensors: Vec<(String, Vec<f64>)> = trainer
            .agent
            .tensors()
            .into_iter()
            .map(|(n, v)| (n.to_string(), v.to_vec()))
            .collect();
        let header = Header {
            algo: cfg.algo.name().into(),
            env: cfg.env.name().into(),
            digest: cfg.digest(),
            config: cfg.entries(),
            param_count: trainer.agent.n_params(),
            networks: trainer
                .agent
                .networks()
                .into_iter()
                .map(|(n, m)| (n.to_string(), m.layer_sizes().to_vec()))
                .collect(),
            tensors: tensors
                .iter()
                .map(|(name, v)| TensorInfo {
                    name: name.clone(),
                    len: v.len(),
                })
                .collect(),
            state_mean: scaler.mean.clone(),
            state_std: scaler.std.clone(),
            sigma_r: trainer.rm.reward_scale(),
            beta: trainer.rm.beta(),
            t: trainer.t,
            k: trainer.k,
            adam_steps: trainer.agent.adam_steps(),
        };
        let mut w = ByteWriter::new();
        trainer.encode_resume(&mut w);
        Self {
            header,
            tensors,
            resume: w.buf,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut w = ByteWriter::new();
        w.buf.extend_from_slice(MAGIC);
        w.bytes(&header);
        for (_, v) in &self.tensors {
            w.raw_f64s(v);
        }
        w.bytes(&self.resume);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut r = ByteReader::new(&bytes[MAGIC.len()..]);
        let header: Header = serde_json::from_slice(r.bytes()?)
            .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for t in &header.tensors {
            tensors.push((t.name.clone(), r.raw_f64s(t.len)?));
        }
        let resume = r.bytes()?.to_vec();
        if r.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.remaining())));
        }
        let digest = TrainConfig::from_entries(&header.config)?.digest();
        if digest != header.digest {
            return Err(Error::Checkpoint(format!(
                "digest mismatch: header says {}, configuration hashes to {digest}",
                header.digest
            )));
        }
        Ok(Self {
            header,
            tensors,
            resume,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn config(&self) -> Result<TrainConfig> {
        TrainConfig::from_entries(&self.header.config)
    }

    /// The stored agent and its state standardization.
    pub fn agent(&self) -> Result<(Agent, StateScaler)> {
        let cfg = self.config()?;
        let spec = cfg.env.spec();
        let mut init = rng::stream(cfg.seed, Stream::Init);
        let mut agent = Agent::new(&cfg, spec.state_dim, spec.action_dim, &mut init)?;
        agent.set_tensors(&self.tensors)?;
        agent.set_adam_steps(&self.header.adam_steps)?;
        let scaler = StateScaler {
            mean: self.header.state_mean.clone(),
            std: self.header.state_std.clone(),
        };
        Ok((agent, scaler))
    }

    /// Rebuild a trainer positioned exactly where the checkpoint was taken. `cfg` may differ
    /// from the stored configuration only in settings excluded from the digest.
    pub fn into_trainer(self, cfg: Option<TrainConfig>) -> Result<Trainer> {
        let stored = self.config()?;
        let cfg = match cfg {
            Some(c) if c.digest() != self.header.digest => {
                return Err(Error::Checkpoint(
                    "digest mismatch: configuration differs from the checkpoint".into(),
                ))
            }
            Some(c) => c,
            None => stored,
        };
        let mut trainer = Trainer::new(cfg)?;
        trainer.agent.set_tensors(&self.tensors)?;
        trainer.agent.set_adam_steps(&self.header.adam_steps)?;
        trainer.decode_resume(&mut ByteReader::new(&self.resume))?;
        Ok(trainer)
    }
}
