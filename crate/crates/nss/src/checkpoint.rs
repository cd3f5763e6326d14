//! Checkpoint files: JSON with a schema version, the run configuration, the
//! normalizer, named parameter arrays written with 17 significant digits and a
//! trailing SHA-256 checksum over everything before it.

use std::path::Path;

use nss_core::{EstimatorKind, ModelSpec, NeuralStateSpaceModel, Normalizer, ParamStore, StateEstimator, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub const SCHEMA_VERSION: u64 = 1;

const CHECKSUM_KEY: &str = ",\n  \"checksum\": \"";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_spec: ModelSpec,
    pub config: TrainConfig,
    pub normalizer: Normalizer,
    /// Model parameters `f.*`, `g.*` and estimator parameters `est.*`.
    pub params: ParamStore,
    /// `None` when no validation loss was ever finite.
    pub best_val_loss: Option<f64>,
    pub iteration: u64,
    /// Seed for the estimator draws made at evaluation time (RAND).
    pub rng_digest: u64,
}

#[derive(Serialize)]
struct ParamOut<'a> {
    name: &'a str,
    rows: usize,
    cols: usize,
    values: Box<RawValue>,
}

#[derive(Serialize)]
struct BodyOut<'a> {
    schema_version: u64,
    model: &'a ModelSpec,
    config: &'a TrainConfig,
    normalizer: &'a Normalizer,
    best_val_loss: Option<Box<RawValue>>,
    iteration: u64,
    rng_digest: String,
    params: Vec<ParamOut<'a>>,
}

#[derive(Deserialize)]
struct Version {
    schema_version: u64,
}

#[derive(Deserialize)]
struct ParamIn {
    name: String,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyIn {
    #[allow(dead_code)]
    schema_version: u64,
    model: ModelSpec,
    config: TrainConfig,
    normalizer: Normalizer,
    best_val_loss: Option<f64>,
    iteration: u64,
    rng_digest: String,
    params: Vec<ParamIn>,
    #[allow(dead_code)]
    checksum: String,
}

fn raw_number(v: f64) -> Box<RawValue> {
    RawValue::from_string(fmt_f64(v)).expect("finite number is valid JSON")
}

fn raw_array(values: &[f64]) -> Result<Box<RawValue>> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("cannot store non-finite parameter value {bad}")));
    }
    let items: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
    Ok(RawValue::from_string(format!("[{}]", items.join(", "))).expect("numbers form a JSON array"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn model(&self) -> Result<NeuralStateSpaceModel> {
        Ok(NeuralStateSpaceModel::bind(self.model_spec, &self.params)?)
    }

    pub fn estimator(&self) -> Result<StateEstimator> {
        let c = &self.config;
        Ok(StateEstimator::bind(c.est_type, c.seq_est_len, c.est_hidden_size, &self.model_spec, &self.params)?)
    }

    pub fn has_learned_estimator(&self) -> bool {
        matches!(self.config.est_type, EstimatorKind::Ff | EstimatorKind::Lstm)
    }

    pub fn to_json(&self) -> Result<String> {
        let params = self
            .params
            .ids()
            .map(|id| {
                let (rows, cols) = self.params.shape(id);
                Ok(ParamOut { name: self.params.name(id), rows, cols, values: raw_array(self.params.value(id))? })
            })
            .collect::<Result<Vec<_>>>()?;
        let body = BodyOut {
            schema_version: SCHEMA_VERSION,
            model: &self.model_spec,
            config: &self.config,
            normalizer: &self.normalizer,
            best_val_loss: self.best_val_loss.filter(|v| v.is_finite()).map(raw_number),
            iteration: self.iteration,
            rng_digest: format!("{:016x}", self.rng_digest),
            params,
        };
        let text = serde_json::to_string_pretty(&body).map_err(|e| Error::Invalid(e.to_string()))?;
        let open = text.strip_suffix("\n}").expect("pretty JSON object ends with a closing brace");
        let digest = sha256_hex(open.as_bytes());
        Ok(format!("{open}{CHECKSUM_KEY}{digest}\"\n}}\n"))
    }

    /// Parses checkpoint text; `path` only labels errors.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let pos = text.rfind(CHECKSUM_KEY).ok_or_else(|| Error::format(path, "no trailing checksum field"))?;
        let stored = text[pos + CHECKSUM_KEY.len()..].split('"').next().unwrap_or_default();
        if sha256_hex(&text.as_bytes()[..pos]) != stored {
            return Err(Error::Checksum { path: path.into() });
        }
        let version: Version = serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
        if version.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { path: path.into(), found: version.schema_version, expected: SCHEMA_VERSION });
        }
        let body: BodyIn = serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
        let rng_digest =
            u64::from_str_radix(&body.rng_digest, 16).map_err(|_| Error::format(path, "rng_digest is not hexadecimal"))?;
        let mut params = ParamStore::new();
        for p in body.params {
            params.add(&p.name, p.rows, p.cols, p.values)?;
        }
        let ckpt = Self {
            model_spec: body.model,
            config: body.config,
            normalizer: body.normalizer,
            params,
            best_val_loss: body.best_val_loss,
            iteration: body.iteration,
            rng_digest,
        };
        // fail at load time rather than at first use
        ckpt.model()?;
        ckpt.estimator()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_json()?;
        // write-then-rename so a crash never leaves a truncated checkpoint behind
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
