//! Environment selection from config and world files.

use std::fs;
use std::path::{Path, PathBuf};

use polo_core::envs::{GridWorld, PendulumWorld, PointMassWorld, RewardSpec};
use polo_core::rng::StreamRng;
use polo_core::{Bounds, EnvModel, Extent, State};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    /// Point mass in an empty unit box.
    Box {
        #[serde(default = "no_reward")]
        reward: RewardSpec,
    },
    /// Point mass in the pinwheel maze.
    Maze {
        #[serde(default = "no_reward")]
        reward: RewardSpec,
    },
    /// Point mass world read from a JSON world file, relative paths resolved
    /// against the config file's directory.
    World { path: PathBuf },
    Pendulum {
        #[serde(default)]
        params: PendulumWorld,
    },
    Gridworld {
        width: usize,
        height: usize,
        goal: [usize; 2],
        #[serde(default = "grid_discount")]
        discount: f64,
        #[serde(default)]
        start: [usize; 2],
        #[serde(default)]
        obstacles: Vec<[usize; 2]>,
    },
}

fn no_reward() -> RewardSpec {
    RewardSpec::None
}

fn grid_discount() -> f64 {
    0.9
}

/// A concrete environment together with its start state.
#[derive(Clone, Debug)]
pub enum Env {
    PointMass(PointMassWorld),
    Pendulum(PendulumWorld),
    Grid(GridWorld, State),
}

/// Reads and validates a point-mass world file.
pub fn load_world(path: &Path) -> Result<PointMassWorld, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let world: PointMassWorld = serde_json::from_str(&text).map_err(|e| CliError::parse(path, &e))?;
    world.validated().map_err(|e| CliError::invalid(path, "world", e))
}

impl EnvSpec {
    /// `base` is the directory relative world paths are resolved against and
    /// `origin` the config path used in diagnostics.
    pub fn build(&self, base: &Path, origin: &Path) -> Result<Env, CliError> {
        let invalid = |e: polo_core::Error| CliError::invalid(origin, "env", e);
        Ok(match self {
            EnvSpec::Box { reward } => {
                Env::PointMass(PointMassWorld::open_box(Extent::unit()).with_reward(*reward).validated().map_err(invalid)?)
            }
            EnvSpec::Maze { reward } => {
                Env::PointMass(PointMassWorld::pinwheel_maze().with_reward(*reward).validated().map_err(invalid)?)
            }
            EnvSpec::World { path } => Env::PointMass(load_world(&base.join(path))?),
            EnvSpec::Pendulum { params } => Env::Pendulum(params.clone().validated().map_err(invalid)?),
            EnvSpec::Gridworld {
                width,
                height,
                goal,
                discount,
                start,
                obstacles,
            } => {
                let mut g = GridWorld::with_goal(*width, *height, (goal[0], goal[1]), *discount).map_err(invalid)?;
                for o in obstacles {
                    if o[0] >= *width || o[1] >= *height || *o == *goal {
                        return Err(CliError::invalid(origin, "env.obstacles", "obstacle outside the grid or on the goal"));
                    }
                    g.obstacles[o[1] * width + o[0]] = true;
                }
                let g = g.validated().map_err(invalid)?;
                let s = State::new(vec![start[0] as f64, start[1] as f64]).map_err(invalid)?;
                if start[0] >= *width || start[1] >= *height || g.index_of(&s).is_none() {
                    return Err(CliError::invalid(origin, "env.start", "start must be a free cell"));
                }
                Env::Grid(g, s)
            }
        })
    }
}

impl Env {
    pub fn start(&self) -> State {
        match self {
            Env::PointMass(w) => w.start_state(),
            Env::Pendulum(p) => p.hanging(),
            Env::Grid(_, s) => s.clone(),
        }
    }

    /// A state drawn uniformly: over free cells for gridworlds, over the
    /// declared state ranges otherwise (point masses at rest).
    pub fn random_state(&self, rng: &mut StreamRng) -> State {
        match self {
            Env::Grid(g, _) => g.state_of(rng.random_range(0..g.num_states())),
            Env::Pendulum(p) => {
                let v: Vec<f64> = p.state_ranges().iter().map(|b| uniform(b, rng)).collect();
                State::new(v).expect("finite")
            }
            Env::PointMass(w) => {
                let r = w.state_ranges();
                State::new(vec![uniform(&r[0], rng), uniform(&r[1], rng), 0.0, 0.0]).expect("finite")
            }
        }
    }

    pub fn as_model(&self) -> &dyn EnvModel {
        match self {
            Env::PointMass(w) => w,
            Env::Pendulum(p) => p,
            Env::Grid(g, _) => g,
        }
    }
}

fn uniform(b: &Bounds, rng: &mut StreamRng) -> f64 {
    if b.hi > b.lo {
        rng.random_range(b.lo..b.hi)
    } else {
        b.lo
    }
}
