//! The plan-online, learn-offline loop and its baselines.
//!
//! Every step the agent plans from the current state, executes the first
//! action and stores the successor in a replay buffer. Every `update_every`
//! steps it runs `gradient_steps` rounds; a round samples a minibatch of stored
//! states and gives each ensemble member one optimizer step toward its own
//! N-step targets.

mod buffer;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use buffer::ReplayBuffer;

use crate::ensemble::{EnsembleConfig, ValueEnsemble};
use crate::envs::{OccupancyGrid, DEFAULT_RESOLUTION};
use crate::error::{Error, Result};
use crate::mdp::{step, Action, EnvModel, State, ZeroReward};
use crate::planner::{greedy_action, mppi_plan, nstep_target, PlannerConfig};
use crate::rng::{self, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// MPPI with the optimistic ensemble value as terminal reward, learning.
    Polo,
    /// One-step lookahead on the ensemble value, learning on the same schedule.
    Greedy,
    /// MPPI with zero terminal value, no learning.
    MpcNoValue,
    /// Uniform random actions.
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::Polo, AgentKind::Greedy, AgentKind::MpcNoValue, AgentKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Polo => "polo",
            AgentKind::Greedy => "greedy",
            AgentKind::MpcNoValue => "mpc-no-value",
            AgentKind::Random => "random",
        }
    }

    pub fn learns(self) -> bool {
        matches!(self, AgentKind::Polo | AgentKind::Greedy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoloConfig {
    /// Acting planner.
    pub planner: PlannerConfig,
    /// `N`, the trajectory-optimization horizon of each value target.
    pub target_horizon: usize,
    /// Rollouts per target solve; the acting planner's count when absent.
    pub target_rollouts: Option<usize>,
    /// `Z`: steps between update phases.
    pub update_every: usize,
    /// `G`: update rounds per phase.
    pub gradient_steps: usize,
    /// `n`: states per round.
    pub batch_size: usize,
    pub ensemble: EnsembleConfig,
    pub buffer_capacity: usize,
    /// `T`: total environment steps.
    pub steps: usize,
    pub seed: u64,
    /// Uniform action samples for the greedy agent.
    pub greedy_samples: usize,
    /// When false the planner and the value targets see zero reward; logged
    /// rewards are always the environment's.
    pub planner_rewards: bool,
    pub occupancy_resolution: usize,
}

impl Default for PoloConfig {
    fn default() -> Self {
        PoloConfig {
            planner: PlannerConfig {
                horizon: 32,
                ..PlannerConfig::default()
            },
            target_horizon: 32,
            target_rollouts: None,
            update_every: 16,
            gradient_steps: 64,
            batch_size: 32,
            ensemble: EnsembleConfig::default(),
            buffer_capacity: 10_000,
            steps: 1000,
            seed: 0,
            greedy_samples: 64,
            planner_rewards: true,
            occupancy_resolution: DEFAULT_RESOLUTION,
        }
    }
}

impl PoloConfig {
    pub fn validate(&self, action_dim: usize) -> Result<()> {
        self.planner.validate(action_dim)?;
        self.ensemble.validate()?;
        if self.target_horizon == 0 {
            return Err(Error::config("target horizon must be positive"));
        }
        if self.target_rollouts == Some(0) {
            return Err(Error::config("target rollouts must be positive"));
        }
        if self.update_every == 0 || self.gradient_steps == 0 || self.batch_size == 0 || self.steps == 0 {
            return Err(Error::config(
                "update_every, gradient_steps, batch_size and steps must be positive",
            ));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::config("batch size exceeds buffer capacity"));
        }
        if self.occupancy_resolution == 0 {
            return Err(Error::config("occupancy resolution must be positive"));
        }
        Ok(())
    }

    fn target_planner(&self) -> PlannerConfig {
        PlannerConfig {
            horizon: self.target_horizon,
            rollouts: self.target_rollouts.unwrap_or(self.planner.rollouts),
            warm_start: false,
            ..self.planner.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// State the action was chosen in.
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    /// Ensemble value at `state`, zero for agents without an ensemble.
    pub value: f64,
    /// Best planned return (or best one-step backup for the greedy agent).
    pub best_return: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub t: usize,
    pub member: usize,
    /// Mean over the phase's rounds of the pre-step minibatch loss.
    pub loss: f64,
    pub mean_target: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub steps: Vec<StepRecord>,
    pub updates: Vec<UpdateRecord>,
    /// Occupancy fraction after each step, for environments with a workspace.
    pub coverage: Vec<f64>,
    pub update_rounds: usize,
    /// State after the last step.
    pub final_state: Vec<f64>,
}

impl RunLog {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn final_coverage(&self) -> Option<f64> {
        self.coverage.last().copied()
    }
}

/// A stepwise agent; callers own the environment state, so a harness can reset
/// it between steps.
pub struct Agent {
    kind: AgentKind,
    cfg: PoloConfig,
    target_cfg: PlannerConfig,
    ensemble: Option<ValueEnsemble>,
    buffer: ReplayBuffer,
    acting: StreamRng,
    sampler: StreamRng,
    member_planners: Vec<StreamRng>,
    nominal: Option<Vec<f64>>,
    grid: Option<OccupancyGrid>,
    learning: bool,
    t: usize,
    log: RunLog,
}

impl Agent {
    pub fn new<M: EnvModel + ?Sized>(kind: AgentKind, cfg: &PoloConfig, model: &M) -> Result<Self> {
        cfg.validate(model.action_dim())?;
        let seed = cfg.seed;
        let ensemble = if kind.learns() {
            Some(ValueEnsemble::new(cfg.ensemble.clone(), model.state_ranges(), seed)?)
        } else {
            None
        };
        Ok(Agent {
            kind,
            target_cfg: cfg.target_planner(),
            cfg: cfg.clone(),
            ensemble,
            buffer: ReplayBuffer::new(cfg.buffer_capacity)?,
            acting: rng::stream(seed, rng::ACTING),
            sampler: rng::stream(seed, rng::BUFFER),
            member_planners: (0..cfg.ensemble.members)
                .map(|k| rng::member_stream(seed, rng::MEMBER_PLANNER, k))
                .collect(),
            nominal: None,
            grid: model
                .workspace()
                .map(|extent| OccupancyGrid::new(extent, cfg.occupancy_resolution)),
            learning: true,
            t: 0,
            log: RunLog::default(),
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn ensemble(&self) -> Option<&ValueEnsemble> {
        self.ensemble.as_ref()
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn into_log(self) -> RunLog {
        self.log
    }

    /// Steps taken so far.
    pub fn time(&self) -> usize {
        self.t
    }

    /// Pauses or resumes the update schedule. Steps taken while paused still
    /// fill the buffer and advance `t`.
    pub fn set_learning(&mut self, on: bool) {
        self.learning = on;
    }

    /// Drops the warm-start plan, e.g. after the harness resets the state.
    pub fn forget_plan(&mut self) {
        self.nominal = None;
    }

    /// Marks `s` in the occupancy grid without taking a step.
    pub fn observe<M: EnvModel + ?Sized>(&mut self, model: &M, s: &State) {
        if let (Some(grid), Some(p)) = (self.grid.as_mut(), model.position(s)) {
            grid.mark(p);
        }
    }

    fn value_at(&self, s: &[f64]) -> f64 {
        self.ensemble.as_ref().map_or(0.0, |e| e.evaluator().value(s))
    }

    fn choose<P: EnvModel + ?Sized>(&mut self, planner_model: &P, s: &State) -> Result<(Action, Option<f64>)> {
        match self.kind {
            AgentKind::Random => {
                let a = planner_model
                    .action_bounds()
                    .iter()
                    .map(|b| if b.hi > b.lo { self.acting.random_range(b.lo..=b.hi) } else { b.lo })
                    .collect();
                Ok((Action::new(a), None))
            }
            AgentKind::Greedy => {
                let ens = self.ensemble.as_ref().expect("learning agent has an ensemble");
                let mut ev = ens.evaluator();
                let gamma = self.cfg.planner.discount;
                let a = greedy_action(
                    planner_model,
                    s,
                    |x: &[f64]| ev.value(x),
                    self.cfg.greedy_samples,
                    gamma,
                    &mut self.acting,
                )?;
                let (next, r) = step(planner_model, s, &a)?;
                let q = r + gamma * ens.evaluator().value(&next);
                Ok((a, Some(q)))
            }
            AgentKind::Polo | AgentKind::MpcNoValue => {
                let plan = match &self.ensemble {
                    Some(ens) if self.kind == AgentKind::Polo => {
                        let mut ev = ens.evaluator();
                        mppi_plan(
                            planner_model,
                            s,
                            |x: &[f64]| ev.value(x),
                            &self.cfg.planner,
                            self.nominal.as_deref(),
                            &mut self.acting,
                        )?
                    }
                    _ => mppi_plan(
                        planner_model,
                        s,
                        |_: &[f64]| 0.0,
                        &self.cfg.planner,
                        self.nominal.as_deref(),
                        &mut self.acting,
                    )?,
                };
                self.nominal = Some(plan.flat_nominal());
                Ok((plan.first_action, Some(plan.best_return)))
            }
        }
    }

    /// One update phase: `gradient_steps` rounds over fresh minibatches.
    fn update<P: EnvModel + ?Sized>(&mut self, planner_model: &P) -> Result<()> {
        let Some(ens) = self.ensemble.as_mut() else {
            return Ok(());
        };
        let k_members = ens.len();
        let mut loss = vec![0.0; k_members];
        let mut mean_target = vec![0.0; k_members];
        let rounds = self.cfg.gradient_steps;
        let mut targets = Vec::with_capacity(self.cfg.batch_size);
        for _ in 0..rounds {
            let idx = self.buffer.sample_indices(self.cfg.batch_size, &mut self.sampler)?;
            let states: Vec<&[f64]> = idx.iter().map(|&i| self.buffer.get(i).expect("sampled index").as_slice()).collect();
            for k in 0..k_members {
                targets.clear();
                {
                    let mut ev = ens.evaluator();
                    for s in &states {
                        let y = nstep_target(
                            planner_model,
                            s,
                            |x: &[f64]| ev.member(k, x),
                            self.target_cfg.horizon,
                            &self.target_cfg,
                            &mut self.member_planners[k],
                        )?;
                        targets.push(y);
                    }
                }
                let batch: Vec<(&[f64], f64)> = states.iter().copied().zip(targets.iter().copied()).collect();
                loss[k] += ens.train_member(k, &batch)?;
                mean_target[k] += targets.iter().sum::<f64>() / targets.len() as f64;
            }
            self.log.update_rounds += 1;
        }
        for k in 0..k_members {
            self.log.updates.push(UpdateRecord {
                t: self.t,
                member: k,
                loss: loss[k] / rounds as f64,
                mean_target: mean_target[k] / rounds as f64,
            });
        }
        Ok(())
    }

    fn step_with<M, P>(&mut self, model: &M, planner_model: &P, s: &State) -> Result<State>
    where
        M: EnvModel + ?Sized,
        P: EnvModel + ?Sized,
    {
        let t = self.t + 1;
        let value = self.value_at(s);
        let (action, best_return) = self.choose(planner_model, s)?;
        let (next, reward) = step(model, s, &action)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { state: s.to_vec() });
        }
        let clamped = action.clamped(model.action_bounds());
        self.log.steps.push(StepRecord {
            t,
            state: s.to_vec(),
            action: clamped.into_vec(),
            reward,
            value,
            best_return,
        });
        self.t = t;
        self.observe(model, s);
        self.observe(model, &next);
        if let Some(grid) = &self.grid {
            self.log.coverage.push(grid.fraction());
        }
        self.log.final_state.clear();
        self.log.final_state.extend_from_slice(&next);
        self.buffer.add(next.clone());
        if self.learning && self.kind.learns() && t % self.cfg.update_every == 0 {
            self.update(planner_model)?;
        }
        Ok(next)
    }

    /// Acts from `s`, learns if due, and returns the successor state.
    pub fn step<M: EnvModel + ?Sized>(&mut self, model: &M, s: &State) -> Result<State> {
        let t = self.t + 1;
        let out = if self.cfg.planner_rewards {
            self.step_with(model, model, s)
        } else {
            self.step_with(model, &ZeroReward(model), s)
        };
        out.map_err(|e| e.at_step(t))
    }
}

/// Runs `kind` for `cfg.steps` steps from `start`.
pub fn run<M: EnvModel + ?Sized>(model: &M, start: &State, kind: AgentKind, cfg: &PoloConfig) -> Result<RunLog> {
    let mut agent = Agent::new(kind, cfg, model)?;
    let mut s = start.clone();
    for _ in 0..cfg.steps {
        s = agent.step(model, &s)?;
    }
    Ok(agent.into_log())
}

pub fn polo_run<M: EnvModel + ?Sized>(model: &M, start: &State, cfg: &PoloConfig) -> Result<RunLog> {
    run(model, start, AgentKind::Polo, cfg)
}

/// Runs a comparison agent; `kind` must not be [`AgentKind::Polo`].
pub fn baseline_run<M: EnvModel + ?Sized>(model: &M, start: &State, kind: AgentKind, cfg: &PoloConfig) -> Result<RunLog> {
    if kind == AgentKind::Polo {
        return Err(Error::config("baseline_run expects a baseline agent"));
    }
    run(model, start, kind, cfg)
}
