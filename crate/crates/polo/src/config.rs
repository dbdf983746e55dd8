//! Experiment configuration: one JSON document per run.

use std::fs;
use std::path::{Path, PathBuf};

use polo_core::agent::{AgentKind, PoloConfig};
use polo_core::oracle::BoundCheckConfig;
use serde::{Deserialize, Serialize};

use crate::env::EnvSpec;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Coverage of the workspace over time, per agent and seed.
    Explore,
    /// Reward collection on a point-mass task with a sparse goal.
    SparseGoal,
    /// Mean reward of plain MPC and POLO across planning horizons.
    PendulumHorizon,
    /// Value error against the exact optimum across target horizons.
    NstepSweep,
    /// Randomized checks of the MPC performance bounds and contraction.
    VerifyBounds,
}

/// Periodic state resets applied by the harness.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resets {
    /// Steps between resets; zero disables them.
    pub every: usize,
    /// Reset to a uniformly drawn state instead of the start state.
    pub random: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonSweep {
    pub horizons: Vec<usize>,
    /// Learning steps before evaluation, for learning agents.
    pub train_steps: usize,
    pub train_resets: Resets,
    /// Evaluation episode length, from the start state with learning paused.
    pub eval_steps: usize,
}

impl Default for HorizonSweep {
    fn default() -> Self {
        HorizonSweep {
            horizons: vec![16, 64],
            train_steps: 2000,
            train_resets: Resets {
                every: 100,
                random: true,
            },
            eval_steps: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NStepSweep {
    pub target_horizons: Vec<usize>,
    pub resets: Resets,
}

impl Default for NStepSweep {
    fn default() -> Self {
        NStepSweep {
            target_horizons: vec![1, 2, 4, 8, 16],
            resets: Resets {
                every: 20,
                random: true,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSuite {
    pub trials: usize,
    pub gamma: f64,
    pub epsilon: f64,
    /// MPC horizons; horizon 1 is the greedy-policy case.
    pub horizons: Vec<usize>,
    pub max_states: usize,
    pub contraction_cases: usize,
    pub contraction_horizons: Vec<usize>,
}

impl Default for BoundSuite {
    fn default() -> Self {
        BoundSuite {
            trials: 100,
            gamma: 0.9,
            epsilon: 0.1,
            horizons: vec![1, 2, 4],
            max_states: 10,
            contraction_cases: 1000,
            contraction_horizons: vec![1, 2, 3, 4, 5],
        }
    }
}

impl BoundSuite {
    pub fn check_config(&self, horizon: usize, seed: u64) -> BoundCheckConfig {
        BoundCheckConfig {
            trials: self.trials,
            states: (2, self.max_states),
            gamma: self.gamma,
            epsilon: self.epsilon,
            horizon,
            seed,
            ..BoundCheckConfig::default()
        }
    }
}

fn all_agents() -> Vec<AgentKind> {
    AgentKind::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Required by every command except `verify-bounds`.
    #[serde(default)]
    pub env: Option<EnvSpec>,
    /// Agent settings; `seed` is replaced by each entry of `seeds`.
    #[serde(default)]
    pub polo: PoloConfig,
    #[serde(default = "all_agents")]
    pub agents: Vec<AgentKind>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Resets during explore and sparse-goal runs.
    #[serde(default)]
    pub resets: Resets,
    #[serde(default)]
    pub horizon_sweep: HorizonSweep,
    #[serde(default)]
    pub nstep_sweep: NStepSweep,
    #[serde(default)]
    pub bounds: BoundSuite,
    /// Also write per-step and per-update logs and a summary for every run.
    #[serde(default)]
    pub run_logs: bool,
    /// Save the final ensemble of every learning run.
    #[serde(default)]
    pub checkpoints: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::parse(path, &e))?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self, path: &Path) -> Result<(), CliError> {
        let bad = |field: &str, msg: &str| Err(CliError::invalid(path, field, msg));
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required");
        }
        if self.command != Command::VerifyBounds && self.env.is_none() {
            return bad("env", "this command needs an environment");
        }
        if matches!(self.command, Command::Explore | Command::SparseGoal | Command::PendulumHorizon) && self.agents.is_empty()
        {
            return bad("agents", "at least one agent is required");
        }
        match self.command {
            Command::PendulumHorizon if self.horizon_sweep.horizons.is_empty() => {
                return bad("horizon_sweep.horizons", "at least one horizon is required")
            }
            Command::NstepSweep if self.nstep_sweep.target_horizons.is_empty() => {
                return bad("nstep_sweep.target_horizons", "at least one target horizon is required")
            }
            Command::VerifyBounds if self.bounds.horizons.is_empty() => {
                return bad("bounds.horizons", "at least one horizon is required")
            }
            _ => {}
        }
        if self.command != Command::VerifyBounds {
            self.polo.validate(1).or_else(|e| match e {
                // action dimension is only known once the env is built
                polo_core::Error::Dimension { .. } => Ok(()),
                e => Err(CliError::invalid(path, "polo", e)),
            })?;
        }
        Ok(())
    }
}
