//! Drivers for each experiment command.

use std::path::{Path, PathBuf};

use polo_core::agent::{Agent, AgentKind, PoloConfig, RunLog};
use polo_core::oracle::{
    bound_check, contraction_check, greedy_tight_instance, mpc_gap_bound, policy_eval, value_iteration,
    BoundReport, ContractionReport,
};
use polo_core::rng;
use polo_core::State;
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::save_ensemble;
use crate::config::{Command, ExperimentConfig, Resets};
use crate::env::Env;
use crate::error::CliError;
use crate::logs::{
    coverage_csv, horizon_csv, nstep_csv, reward_csv, write_json, write_run, write_text, HorizonRow, NStepRow,
    RewardRow,
};

/// What a finished experiment reports back to the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub output: PathBuf,
    /// False when a checked property failed; the files are still written.
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Runs `cfg`, writing every artifact under `out`. `config_path` anchors
/// relative world paths and diagnostics; `jobs` bounds the worker threads.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    config_path: &Path,
    out: &Path,
    jobs: usize,
) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut echo = cfg.clone();
    echo.output = Some(out.to_path_buf());
    write_json(&out.join("config.json"), &echo)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Check(format!("thread pool: {e}")))?;
    let env = match &cfg.env {
        Some(spec) => {
            let base = config_path.parent().unwrap_or(Path::new("."));
            let env = spec.build(base, config_path)?;
            cfg.polo
                .validate(env.as_model().action_dim())
                .map_err(|e| CliError::invalid(config_path, "polo", e))?;
            Some(env)
        }
        None => None,
    };
    let ctx = Context {
        cfg,
        env: env.as_ref(),
        out,
    };
    pool.install(|| match cfg.command {
        Command::Explore => explore(&ctx),
        Command::SparseGoal => sparse_goal(&ctx),
        Command::PendulumHorizon => pendulum_horizon(&ctx),
        Command::NstepSweep => nstep_sweep(&ctx),
        Command::VerifyBounds => verify_bounds(&ctx),
    })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    env: Option<&'a Env>,
    out: &'a Path,
}

impl Context<'_> {
    fn env(&self) -> &Env {
        self.env.expect("validated: command has an env")
    }

    fn seeded(&self, seed: u64) -> PoloConfig {
        PoloConfig {
            seed,
            ..self.cfg.polo.clone()
        }
    }

    fn finish_run(&self, tag: &str, kind: AgentKind, cfg: &PoloConfig, agent: &Agent) -> Result<(), CliError> {
        if self.cfg.run_logs {
            write_run(&self.out.join("runs").join(tag), kind, cfg, agent.log())?;
        }
        if self.cfg.checkpoints {
            if let Some(ens) = agent.ensemble() {
                save_ensemble(&self.out.join("checkpoints").join(format!("{tag}.json")), ens)?;
            }
        }
        Ok(())
    }
}

fn job_error(tag: &str) -> impl Fn(polo_core::Error) -> CliError + '_ {
    move |source| CliError::Run {
        job: tag.to_string(),
        source,
    }
}

/// Steps `agent` `steps` times from `s`, applying `resets` after every
/// `resets.every` steps. Returns the final state.
fn drive(env: &Env, agent: &mut Agent, mut s: State, steps: usize, resets: &Resets, reset_rng: &mut rng::StreamRng) -> polo_core::Result<State> {
    let model = env.as_model();
    agent.observe(model, &s);
    for i in 1..=steps {
        s = agent.step(model, &s)?;
        if resets.every > 0 && i % resets.every == 0 && i < steps {
            s = if resets.random { env.random_state(reset_rng) } else { env.start() };
            agent.forget_plan();
            agent.observe(model, &s);
        }
    }
    Ok(s)
}

fn agent_run(env: &Env, kind: AgentKind, cfg: &PoloConfig, resets: &Resets) -> polo_core::Result<Agent> {
    let mut agent = Agent::new(kind, cfg, env.as_model())?;
    let mut reset_rng = rng::stream(cfg.seed, rng::RESET);
    drive(env, &mut agent, env.start(), cfg.steps, resets, &mut reset_rng)?;
    Ok(agent)
}

fn tag(kind: AgentKind, seed: u64) -> String {
    format!("{}_seed{}", kind.name(), seed)
}

fn displacement(env: &Env, log: &RunLog) -> f64 {
    let model = env.as_model();
    match (model.position(&env.start()), model.position(&log.final_state)) {
        (Some(a), Some(b)) => (a[0] - b[0]).hypot(a[1] - b[1]),
        _ => 0.0,
    }
}

/// Every (agent, seed) pair, in config order.
fn agent_jobs(cfg: &ExperimentConfig) -> Vec<(AgentKind, u64)> {
    cfg.agents
        .iter()
        .flat_map(|&k| cfg.seeds.iter().map(move |&s| (k, s)))
        .collect()
}

fn run_agents(ctx: &Context) -> Result<Vec<(AgentKind, u64, Agent)>, CliError> {
    let env = ctx.env();
    agent_jobs(ctx.cfg)
        .into_par_iter()
        .map(|(kind, seed)| {
            let cfg = ctx.seeded(seed);
            let name = tag(kind, seed);
            let agent = agent_run(env, kind, &cfg, &ctx.cfg.resets).map_err(job_error(&name))?;
            ctx.finish_run(&name, kind, &cfg, &agent)?;
            Ok((kind, seed, agent))
        })
        .collect()
}

fn explore(ctx: &Context) -> Result<Outcome, CliError> {
    let runs = run_agents(ctx)?;
    let mut summary = String::from("agent,seed,final_coverage,displacement\n");
    for (kind, seed, agent) in &runs {
        let log = agent.log();
        write_text(&ctx.out.join("coverage").join(format!("{}.csv", tag(*kind, *seed))), &coverage_csv(log))?;
        summary.push_str(&format!(
            "{},{},{},{}\n",
            kind.name(),
            seed,
            log.final_coverage().unwrap_or(0.0),
            displacement(ctx.env(), log)
        ));
    }
    write_text(&ctx.out.join("explore_summary.csv"), &summary)?;
    Ok(Outcome {
        output: ctx.out.to_path_buf(),
        passed: true,
        notes: vec![format!("{} runs", runs.len())],
    })
}

fn sparse_goal(ctx: &Context) -> Result<Outcome, CliError> {
    let runs = run_agents(ctx)?;
    let rows: Vec<RewardRow> = runs
        .iter()
        .map(|(kind, seed, agent)| RewardRow {
            agent: *kind,
            seed: *seed,
            total_reward: agent.log().total_reward(),
            first_reward_t: agent.log().steps.iter().find(|s| s.reward > 0.0).map(|s| s.t),
        })
        .collect();
    write_text(&ctx.out.join("rewards.csv"), &reward_csv(&rows))?;
    Ok(Outcome {
        output: ctx.out.to_path_buf(),
        passed: true,
        notes: vec![format!("{} runs", rows.len())],
    })
}

fn pendulum_horizon(ctx: &Context) -> Result<Outcome, CliError> {
    let env = ctx.env();
    let sweep = &ctx.cfg.horizon_sweep;
    let jobs: Vec<(usize, AgentKind, u64)> = sweep
        .horizons
        .iter()
        .flat_map(|&h| agent_jobs(ctx.cfg).into_iter().map(move |(k, s)| (h, k, s)))
        .collect();
    let rows: Vec<HorizonRow> = jobs
        .into_par_iter()
        .map(|(horizon, kind, seed)| {
            let mut cfg = ctx.seeded(seed);
            cfg.planner.horizon = horizon;
            let name = format!("H{horizon}_{}", tag(kind, seed));
            let err = job_error(&name);
            let mut agent = Agent::new(kind, &cfg, env.as_model()).map_err(&err)?;
            let mut reset_rng = rng::stream(seed, rng::RESET);
            if kind.learns() && sweep.train_steps > 0 {
                let start = if sweep.train_resets.random { env.random_state(&mut reset_rng) } else { env.start() };
                drive(env, &mut agent, start, sweep.train_steps, &sweep.train_resets, &mut reset_rng).map_err(&err)?;
            }
            agent.set_learning(false);
            agent.forget_plan();
            let before = agent.log().steps.len();
            drive(env, &mut agent, env.start(), sweep.eval_steps, &Resets::default(), &mut reset_rng).map_err(&err)?;
            let eval = &agent.log().steps[before..];
            let mean_reward = eval.iter().map(|s| s.reward).sum::<f64>() / eval.len().max(1) as f64;
            ctx.finish_run(&name, kind, &cfg, &agent)?;
            Ok(HorizonRow {
                horizon,
                agent: kind,
                seed,
                mean_reward,
            })
        })
        .collect::<Result<_, CliError>>()?;
    write_text(&ctx.out.join("horizon.csv"), &horizon_csv(&rows))?;
    Ok(Outcome {
        output: ctx.out.to_path_buf(),
        passed: true,
        notes: vec![format!("{} runs", rows.len())],
    })
}

/// Root-mean-square difference between the ensemble's mean member value and
/// the exact optimal value over all gridworld states.
pub fn value_rmse(grid: &polo_core::envs::GridWorld, agent: &Agent, v_star: &[f64]) -> f64 {
    let ens = agent.ensemble().expect("learning agent");
    let mut ev = ens.evaluator();
    let n = v_star.len();
    let sq: f64 = (0..n)
        .map(|i| {
            let d = ev.mean(&grid.state_of(i)) - v_star[i];
            d * d
        })
        .sum();
    (sq / n as f64).sqrt()
}

fn nstep_sweep(ctx: &Context) -> Result<Outcome, CliError> {
    let Env::Grid(grid, _) = ctx.env() else {
        return Err(CliError::invalid(
            ctx.out.join("config.json"),
            "env",
            "nstep-sweep needs a gridworld",
        ));
    };
    let env = ctx.env();
    let v_star = value_iteration(&grid.to_tabular(), 1e-10).map_err(job_error("oracle"))?;
    let sweep = &ctx.cfg.nstep_sweep;
    let jobs: Vec<(usize, u64)> = sweep
        .target_horizons
        .iter()
        .flat_map(|&n| ctx.cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let results: Vec<(NStepRow, Vec<(usize, f64)>)> = jobs
        .into_par_iter()
        .map(|(n, seed)| {
            let mut cfg = ctx.seeded(seed);
            cfg.target_horizon = n;
            let name = format!("N{n}_seed{seed}");
            let err = job_error(&name);
            let mut agent = Agent::new(AgentKind::Polo, &cfg, env.as_model()).map_err(&err)?;
            let mut reset_rng = rng::stream(seed, rng::RESET);
            let mut s = env.start();
            let mut curve = Vec::new();
            // drive in update-phase chunks so the value error can be traced
            let chunk = cfg.update_every;
            let mut done = 0;
            while done < cfg.steps {
                let len = chunk.min(cfg.steps - done);
                for _ in 0..len {
                    s = agent.step(env.as_model(), &s).map_err(&err)?;
                    done += 1;
                    if sweep.resets.every > 0 && done % sweep.resets.every == 0 && done < cfg.steps {
                        s = if sweep.resets.random { env.random_state(&mut reset_rng) } else { env.start() };
                        agent.forget_plan();
                    }
                }
                if done % chunk == 0 {
                    curve.push((done, value_rmse(grid, &agent, &v_star)));
                }
            }
            ctx.finish_run(&name, AgentKind::Polo, &cfg, &agent)?;
            let row = NStepRow {
                n,
                seed,
                value_rmse: value_rmse(grid, &agent, &v_star),
                mean_reward: agent.log().total_reward() / cfg.steps as f64,
            };
            Ok((row, curve))
        })
        .collect::<Result<_, CliError>>()?;
    let rows: Vec<NStepRow> = results.iter().map(|(r, _)| r.clone()).collect();
    write_text(&ctx.out.join("nstep.csv"), &nstep_csv(&rows))?;
    let mut curve = String::from("n,seed,t,value_rmse\n");
    for (row, points) in &results {
        for (t, e) in points {
            curve.push_str(&format!("{},{},{},{}\n", row.n, row.seed, t, e));
        }
    }
    write_text(&ctx.out.join("nstep_curve.csv"), &curve)?;
    Ok(Outcome {
        output: ctx.out.to_path_buf(),
        passed: true,
        notes: vec![format!("{} runs", rows.len())],
    })
}

#[derive(Debug, Serialize)]
struct TightReport {
    gamma: f64,
    epsilon: f64,
    gap: f64,
    bound: f64,
}

fn verify_bounds(ctx: &Context) -> Result<Outcome, CliError> {
    let suite = &ctx.cfg.bounds;
    let mut passed = true;
    let mut notes = Vec::new();
    for &seed in &ctx.cfg.seeds {
        let reports: Vec<BoundReport> = suite
            .horizons
            .par_iter()
            .map(|&h| bound_check(&suite.check_config(h, seed)).map_err(job_error("bound check")))
            .collect::<Result<_, _>>()?;
        for r in &reports {
            write_json(&ctx.out.join(format!("bounds_H{}_seed{}.json", r.horizon, seed)), r)?;
            notes.push(format!(
                "seed {seed} H={}: max gap {} vs bound {}, {} violations",
                r.horizon,
                r.max_gap,
                r.bound,
                r.violations.len()
            ));
            passed &= r.passed();
        }
        let contraction: ContractionReport = contraction_check(
            suite.contraction_cases,
            &suite.contraction_horizons,
            suite.gamma,
            seed,
        )
        .map_err(job_error("contraction check"))?;
        write_json(&ctx.out.join(format!("contraction_seed{seed}.json")), &contraction)?;
        notes.push(format!(
            "seed {seed} contraction: {} cases, {} violations",
            contraction.cases, contraction.violations
        ));
        passed &= contraction.violations == 0;
    }

    let (m, v_hat) = greedy_tight_instance(suite.gamma, suite.epsilon).map_err(job_error("tight instance"))?;
    let v_star = value_iteration(&m, 1e-14).map_err(job_error("tight instance"))?;
    let policy = polo_core::oracle::greedy_policy(&m, &v_hat);
    let v_pi = policy_eval(&m, &policy).map_err(job_error("tight instance"))?;
    let gap = v_star.iter().zip(&v_pi).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let tight = TightReport {
        gamma: suite.gamma,
        epsilon: suite.epsilon,
        gap,
        bound: mpc_gap_bound(suite.gamma, 1, suite.epsilon),
    };
    write_json(&ctx.out.join("tight_instance.json"), &tight)?;
    notes.push(format!("tight instance: gap {} vs bound {}", tight.gap, tight.bound));
    Ok(Outcome {
        output: ctx.out.to_path_buf(),
        passed,
        notes,
    })
}
