//! Checkpoint files: a plain-text header followed by a little-endian
//! `f32` blob holding every parameter in header order.
//!
//! ```text
//! TREEATTN-CKPT 1
//! config {...}
//! epoch 3
//! best_metric 0.87
//! rng_seed 7
//! rng_epoch 3
//! labels ["neg","pos"]
//! vocab 4
//! <pad>
//! <unk>
//! the
//! cat
//! params 2
//! embedding 0 4x3
//! query 1 8
//! blob 80
//! <80 bytes>
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding_io::{Vocabulary, PAD_TOKEN, UNK_TOKEN};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::{ParamStore, Tensor};

use super::TrainConfig;

pub const FORMAT_TAG: &str = "TREEATTN-CKPT 1";

/// Enough to rebuild every random stream of the run: all streams are
/// derived from the seed and the epoch number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vec<String>,
    pub labels: Vec<String>,
    pub store: ParamStore,
    pub epoch: usize,
    pub best_metric: f64,
    pub rng: RngState,
}

impl Checkpoint {
    /// Snapshot of `model`, rounded to the 32-bit values that will be saved.
    pub fn from_model(
        model: &Model,
        vocab: &Vocabulary,
        labels: &[String],
        config: &TrainConfig,
        epoch: usize,
        best_metric: f64,
        rng: RngState,
    ) -> Self {
        let mut store = model.store.clone();
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            store
                .get_mut(id)
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = *v as f32 as f64);
        }
        Checkpoint {
            config: config.clone(),
            vocab: vocab.words().to_vec(),
            labels: labels.to_vec(),
            store,
            epoch,
            best_metric,
            rng,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_store(self.config.model.clone(), self.store.clone())
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_words(self.vocab.iter().skip(2).cloned())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = String::new();
        let mut line = |s: String| {
            head.push_str(&s);
            head.push('\n');
        };
        line(FORMAT_TAG.to_string());
        line(format!("config {}", serde_json::to_string(&self.config).expect("serializable")));
        line(format!("epoch {}", self.epoch));
        line(format!("best_metric {:?}", self.best_metric));
        line(format!("rng_seed {}", self.rng.seed));
        line(format!("rng_epoch {}", self.rng.epoch));
        line(format!("labels {}", serde_json::to_string(&self.labels).expect("serializable")));
        line(format!("vocab {}", self.vocab.len()));
        for w in &self.vocab {
            line(w.clone());
        }
        line(format!("params {}", self.store.len()));
        let mut blob = Vec::with_capacity(self.store.num_values() * 4);
        for id in self.store.ids() {
            let t = self.store.get(id);
            let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            line(format!(
                "{} {} {}",
                self.store.name(id),
                u8::from(self.store.is_trainable(id)),
                shape.join("x")
            ));
            for &v in t.data() {
                blob.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        line(format!("blob {}", blob.len()));
        let mut out = head.into_bytes();
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_bytes(bytes: &[u8], source: &str) -> Result<Self> {
        let mut reader = HeaderReader { bytes, pos: 0, line: 0, source };
        let tag = reader.line()?;
        if tag != FORMAT_TAG {
            return Err(reader.error(format!("expected {FORMAT_TAG:?}, found {tag:?}")));
        }
        let config: TrainConfig = {
            let v = reader.field("config")?;
            serde_json::from_str(&v).map_err(|e| reader.error(e.to_string()))?
        };
        let epoch = reader.number("epoch")?;
        let best_metric: f64 = reader.number("best_metric")?;
        let rng = RngState {
            seed: reader.number("rng_seed")?,
            epoch: reader.number("rng_epoch")?,
        };
        let labels: Vec<String> = {
            let v = reader.field("labels")?;
            serde_json::from_str(&v).map_err(|e| reader.error(e.to_string()))?
        };
        let vocab_len: usize = reader.number("vocab")?;
        let vocab = (0..vocab_len).map(|_| reader.line()).collect::<Result<Vec<_>>>()?;
        if vocab.len() < 2 || vocab[0] != PAD_TOKEN || vocab[1] != UNK_TOKEN {
            return Err(reader.error("vocabulary must start with the padding and unknown tokens".into()));
        }
        let param_count: usize = reader.number("params")?;
        let mut specs = Vec::with_capacity(param_count);
        for _ in 0..param_count {
            let l = reader.line()?;
            let parts: Vec<&str> = l.split(' ').collect();
            if parts.len() != 3 {
                return Err(reader.error(format!("malformed parameter line {l:?}")));
            }
            let trainable = match parts[1] {
                "0" => false,
                "1" => true,
                other => return Err(reader.error(format!("bad trainable flag {other:?}"))),
            };
            let shape = parts[2]
                .split('x')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| reader.error(format!("bad shape {:?}: {e}", parts[2])))?;
            specs.push((parts[0].to_string(), trainable, shape));
        }
        let blob_len: usize = reader.number("blob")?;
        let blob = &bytes[reader.pos..];
        let expected: usize = specs.iter().map(|(_, _, s)| s.iter().product::<usize>() * 4).sum();
        if blob.len() != blob_len || blob_len != expected {
            return Err(Error::Checkpoint(format!(
                "{source}: blob holds {} bytes, header declares {blob_len}, parameters need {expected}",
                blob.len()
            )));
        }
        let mut store = ParamStore::new();
        let mut values = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        for (name, trainable, shape) in specs {
            let n = shape.iter().product();
            let data: Vec<f64> = values.by_ref().take(n).collect();
            let tensor = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("{source}: {name}: {e}")))?;
            store.add_with(name, tensor, trainable);
        }
        Ok(Checkpoint {
            config,
            vocab,
            labels,
            store,
            epoch,
            best_metric,
            rng,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    source: &'a str,
}

impl HeaderReader<'_> {
    fn error(&self, message: String) -> Error {
        Error::Checkpoint(format!("{}: header line {}: {message}", self.source, self.line))
    }

    fn line(&mut self) -> Result<String> {
        self.line += 1;
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| self.error("unexpected end of header".into()))?;
        let text = std::str::from_utf8(&rest[..end]).map_err(|_| self.error("header is not UTF-8".into()))?;
        self.pos += end + 1;
        Ok(text.to_string())
    }

    fn field(&mut self, key: &str) -> Result<String> {
        let l = self.line()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.error(format!("expected field {key:?}, found {l:?}"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.field(key)?;
        v.parse().map_err(|e: T::Err| self.error(format!("bad {key} {v:?}: {e}")))
    }
}
