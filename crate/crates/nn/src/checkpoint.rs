//! JSON checkpoints: model shape, parameters in canonical order, and
//! optionally optimizer state for resuming training.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ClassPairing, ModelConfig, SplitGnn};
use crate::optim::AdamW;
use crate::tensor::Matrix;
use crate::train::Trainer;
use crate::NnError;

pub const FORMAT: &str = "splitgnn-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub rounds: usize,
    pub pairing: ClassPairing,
    pub params: Vec<NamedParam>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<AdamW>,
    #[serde(default)]
    pub epochs_done: usize,
}

impl Checkpoint {
    pub fn from_model(model: &SplitGnn) -> Self {
        let cfg = model.config();
        let params = model
            .param_names()
            .iter()
            .zip(model.params())
            .map(|(name, p)| NamedParam { name: name.clone(), rows: p.rows(), cols: p.cols(), data: p.data().to_vec() })
            .collect();
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            dim: cfg.dim,
            rounds: cfg.rounds,
            pairing: cfg.pairing,
            params,
            optimizer: None,
            epochs_done: 0,
        }
    }

    pub fn from_trainer(trainer: &Trainer) -> Self {
        Checkpoint {
            optimizer: Some(trainer.optimizer.clone()),
            epochs_done: trainer.epochs_done,
            ..Self::from_model(&trainer.model)
        }
    }

    pub fn model(&self) -> Result<SplitGnn, NnError> {
        if self.format != FORMAT {
            return Err(NnError::Checkpoint(format!("unknown format tag {:?}", self.format)));
        }
        if self.version != VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let config = ModelConfig { dim: self.dim, rounds: self.rounds, pairing: self.pairing };
        let model = SplitGnn::from_parts(
            config,
            self.params
                .iter()
                .map(|p| {
                    if p.data.len() != p.rows * p.cols {
                        return Err(NnError::Checkpoint(format!("{}: data length does not match shape", p.name)));
                    }
                    Ok(Matrix::from_vec(p.rows, p.cols, p.data.clone()))
                })
                .collect::<Result<_, _>>()?,
        )?;
        for (expected, p) in model.param_names().iter().zip(&self.params) {
            if expected != &p.name {
                return Err(NnError::Checkpoint(format!("parameter {:?} where {expected:?} expected", p.name)));
            }
        }
        Ok(model)
    }

    /// Rebuilds a trainer; a checkpoint without optimizer state gets a fresh one.
    pub fn trainer(&self, learning_rate: f64, weight_decay: f64) -> Result<Trainer, NnError> {
        let model = self.model()?;
        let optimizer = match &self.optimizer {
            Some(opt) if opt.matches(model.params()) => opt.clone(),
            Some(_) => return Err(NnError::Checkpoint("optimizer state does not fit parameters".into())),
            None => AdamW::new(model.params(), learning_rate, weight_decay),
        };
        Ok(Trainer { model, optimizer, epochs_done: self.epochs_done })
    }

    /// Fails unless the stored width and round count are as given.
    pub fn expect_shape(&self, dim: Option<usize>, rounds: Option<usize>) -> Result<(), NnError> {
        if let Some(d) = dim.filter(|&d| d != self.dim) {
            return Err(NnError::Checkpoint(format!("checkpoint has d={}, requested d={d}", self.dim)));
        }
        if let Some(t) = rounds.filter(|&t| t != self.rounds) {
            return Err(NnError::Checkpoint(format!("checkpoint has T={}, requested T={t}", self.rounds)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, NnError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = SplitGnn::new(ModelConfig { dim: 4, rounds: 2, ..Default::default() }, 9).unwrap();
        let ck = Checkpoint::from_model(&m);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.model().unwrap().params(), m.params());
    }

    #[test]
    fn shape_mismatch_is_loud() {
        let m = SplitGnn::new(ModelConfig { dim: 4, rounds: 2, ..Default::default() }, 9).unwrap();
        let ck = Checkpoint::from_model(&m);
        assert!(ck.expect_shape(Some(4), Some(2)).is_ok());
        assert!(ck.expect_shape(Some(8), None).is_err());
        assert!(ck.expect_shape(None, Some(3)).is_err());
        let mut wrong = ck.clone();
        wrong.dim = 8;
        assert!(wrong.model().is_err());
        let mut renamed = ck;
        renamed.params[0].name = "bogus".into();
        assert!(renamed.model().is_err());
    }
}
