//! JSON checkpoints for single networks and whole ensembles.

use std::fs;
use std::path::Path;

use polo_core::approximator::DenseNet;
use polo_core::ensemble::{EnsembleCheckpoint, ValueEnsemble};

use crate::error::CliError;
use crate::logs::write_json;

/// `{"sizes": [...], "params": [...]}`.
pub fn save_net(path: &Path, net: &DenseNet) -> Result<(), CliError> {
    write_json(path, net)
}

pub fn load_net(path: &Path) -> Result<DenseNet, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, &e))
}

/// Hyperparameters, input ranges and all prior and trainable nets.
pub fn save_ensemble(path: &Path, ensemble: &ValueEnsemble) -> Result<(), CliError> {
    write_json(path, &ensemble.checkpoint())
}

/// Optimizer moments are not stored; noise streams restart from `seed`.
pub fn load_ensemble(path: &Path, seed: u64) -> Result<ValueEnsemble, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cp: EnsembleCheckpoint = serde_json::from_str(&text).map_err(|e| CliError::parse(path, &e))?;
    ValueEnsemble::from_checkpoint(cp, seed).map_err(|e| CliError::invalid(path, "ensemble", e))
}
