//! The lockstep training loop shared by every scheme.
//!
//! One global timestep has three phases:
//!
//! 1. every actor slot takes one environment step and the transitions are
//!    appended to the shared buffer in slot order;
//! 2. every learner performs its update iterations (parallelizable — each
//!    learner only reads the buffer and mutates its own state);
//! 3. barriers that are due run: scheme syncs (best-learner selection,
//!    resets, center updates), then evaluation.
//!
//! Multi-worker execution parallelizes phases 1 and 2 per learner without
//! changing any computation, so artifacts are bitwise identical to the
//! single-worker schedule.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chief::{select_best, Chief, SyncRecord};
use crate::env::{make_env, Env};
use crate::error::{Error, Result};
use crate::harness::config::{RunConfig, SchemeKind};
use crate::harness::eval::evaluate_policy;
use crate::harness::seeding::{stream, Role};
use crate::nn::{save_network, Adam, BatchCache, GradBundle, Mlp};
use crate::replay::{ReplayBuffer, Transition};
use crate::td3::{InitNets, Learner};

/// One evaluation record. Chief fields are present only for the scheme
/// that has a chief.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub total_env_steps: u64,
    pub learner_returns: Vec<f64>,
    pub max_return: f64,
    pub best_index: Option<usize>,
    pub beta: Option<f64>,
    pub d_spread: Option<f64>,
    pub d_change: Option<f64>,
}

/// One chief sync record with its step stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncRow {
    pub total_env_steps: u64,
    pub record: SyncRecord,
}

/// Everything a finished run hands back, besides files on disk.
#[derive(Debug)]
pub struct RunArtifacts {
    pub eval_rows: Vec<EvalRow>,
    pub sync_rows: Vec<SyncRow>,
    /// Mean of the last (up to) 10 evaluation maxima.
    pub final_score: f64,
    pub eval_csv: String,
    pub sync_csv: Option<String>,
    pub learners: Vec<Learner>,
    pub env_interactions: u64,
    pub update_iterations: u64,
    pub out_dir: Option<PathBuf>,
}

/// One actor slot: an environment copy, its reset-seed and action-noise
/// streams, and episode bookkeeping.
struct Slot {
    env: Box<dyn Env>,
    env_seeds: ChaCha8Rng,
    noise: ChaCha8Rng,
    obs: Vec<f64>,
    episode_return: f64,
    returns: Vec<f64>,
}

impl Slot {
    fn new(env_id: &str, master_seed: u64, index: usize) -> Result<Slot> {
        let mut env = make_env(env_id)?;
        let mut env_seeds = stream(master_seed, Role::EnvSeed, index as u64, 0);
        let noise = stream(master_seed, Role::ActionNoise, index as u64, 0);
        let obs = env.reset(env_seeds.random::<u64>());
        Ok(Slot {
            env,
            env_seeds,
            noise,
            obs,
            episode_return: 0.0,
            returns: Vec::new(),
        })
    }

    /// Act, step the environment, and hand back the transition. Episode
    /// ends record the return and reset with the next seed in the slot's
    /// stream. Truncation is stored as non-terminal.
    fn step(&mut self, learner: &Learner, t: u64) -> Result<Transition> {
        let action = learner.act_explore(&self.obs, t, &mut self.noise);
        let result = self.env.step(&action)?;
        self.episode_return += result.reward;
        let transition = Transition {
            obs: std::mem::take(&mut self.obs),
            action,
            reward: result.reward,
            next_obs: result.obs.clone(),
            done: if result.done { 1.0 } else { 0.0 },
        };
        if result.episode_over() {
            self.returns.push(self.episode_return);
            self.episode_return = 0.0;
            self.obs = self.env.reset(self.env_seeds.random::<u64>());
        } else {
            self.obs = result.obs;
        }
        Ok(transition)
    }
}

struct CenterState {
    actor: Mlp,
    adam: Adam,
    beta: f64,
    period: u64,
    steps: u32,
    batch: usize,
    rng: ChaCha8Rng,
}

enum SchemeState {
    /// Independent learners: single and experience-sharing-only.
    Plain,
    /// One learner behind N actors.
    SharedParams,
    Guided(Chief),
    Resetting { period: Option<u64>, incumbent: usize },
    Distilled(CenterState),
}

/// Train the center actor toward the current population mean on a fresh
/// state batch; returns the per-step loss trace.
fn update_center(
    center: &mut CenterState,
    learners: &mut [Learner],
    buffer: &ReplayBuffer,
    lr: f64,
) -> Result<Vec<f64>> {
    if buffer.is_empty() {
        return Ok(Vec::new());
    }
    let batch = center.batch;
    let states = buffer.sample_obs(&mut center.rng, batch)?;
    let act_dim = center.actor.output_dim();

    // population outputs are fixed during the inner gradient steps
    let population: Vec<Vec<f64>> = learners
        .iter_mut()
        .map(|l| l.raw_policy_batch(&states, batch))
        .collect();

    let mut cache = BatchCache::new();
    let mut grads = GradBundle::zeros_like(&center.actor);
    let mut out_grad = vec![0.0; batch * act_dim];
    let mut losses = Vec::with_capacity(center.steps as usize);
    for _ in 0..center.steps {
        center.actor.forward_batch(&states, batch, &mut cache);
        let out = cache.output();
        let mut loss = 0.0;
        out_grad.fill(0.0);
        for raw in &population {
            for ((g, c), r) in out_grad.iter_mut().zip(out).zip(raw) {
                let diff = c - r;
                loss += diff * diff;
                *g += center.beta * diff / batch as f64;
            }
        }
        loss = center.beta / 2.0 * loss / batch as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("center policy loss"));
        }
        losses.push(loss);
        center.actor.backprop(&mut cache, &out_grad, Some(&mut grads), None);
        center.adam.step(&mut center.actor, &grads, lr)?;
    }
    Ok(losses)
}

/// Copy the best learner's full state (networks, targets, optimizer
/// moments) into every other learner.
fn resetting_sync(learners: &mut [Learner], returns: &[Vec<f64>], recent: usize, incumbent: &mut usize) {
    let best = select_best(returns, recent, *incumbent);
    *incumbent = best;
    let donor = learners[best].clone();
    for (i, learner) in learners.iter_mut().enumerate() {
        if i != best {
            learner.adopt_state_of(&donor);
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn eval_csv(rows: &[EvalRow], n_learners: usize) -> String {
    let mut out = String::from("total_env_steps");
    for i in 0..n_learners {
        out.push_str(&format!(",learner_{i}_return"));
    }
    out.push_str(",max_return,best_index,beta,d_spread,d_change\n");
    for row in rows {
        out.push_str(&row.total_env_steps.to_string());
        for r in &row.learner_returns {
            out.push(',');
            out.push_str(&fmt(*r));
        }
        out.push(',');
        out.push_str(&fmt(row.max_return));
        out.push(',');
        if let Some(b) = row.best_index {
            out.push_str(&b.to_string());
        }
        out.push(',');
        if let Some(b) = row.beta {
            out.push_str(&fmt(b));
        }
        out.push(',');
        if let Some(d) = row.d_spread {
            out.push_str(&fmt(d));
        }
        out.push(',');
        if let Some(d) = row.d_change {
            out.push_str(&fmt(d));
        }
        out.push('\n');
    }
    out
}

fn sync_csv(rows: &[SyncRow], n_learners: usize) -> String {
    let mut out = String::from("total_env_steps,best_index,beta,d_spread,d_change");
    for i in 0..n_learners {
        out.push_str(&format!(",learner_{i}_mean"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}",
            row.total_env_steps,
            row.record.best,
            fmt(row.record.beta),
            fmt(row.record.d_spread),
            fmt(row.record.d_change)
        ));
        for m in &row.record.learner_means {
            out.push(',');
            // learners without completed episodes have no mean yet
            if m.is_finite() {
                out.push_str(&fmt(*m));
            }
        }
        out.push('\n');
    }
    out
}

/// Execute one configured run. `workers <= 1` runs the exact serial
/// schedule; larger values parallelize the per-learner phases on a local
/// thread pool with identical results.
pub fn run(
    config: &RunConfig,
    master_seed: u64,
    out_dir: Option<&Path>,
    workers: usize,
) -> Result<RunArtifacts> {
    config.validate()?;
    let n_slots = config.n_slots();
    let n_learners = match config.scheme {
        SchemeKind::Drl => 1,
        _ => config.n_learners,
    };
    let env_probe = make_env(&config.env)?;
    let spec = env_probe.spec().clone();
    drop(env_probe);

    let init = InitNets::new(
        &spec,
        &config.td3.hidden,
        [
            crate::harness::seeding::derive_seed(master_seed, Role::Init, 0, 0),
            crate::harness::seeding::derive_seed(master_seed, Role::Init, 1, 0),
            crate::harness::seeding::derive_seed(master_seed, Role::Init, 2, 0),
        ],
    )?;

    let mut learners: Vec<Learner> = (0..n_learners)
        .map(|i| {
            Learner::new(
                &spec,
                config.td3.clone(),
                &init,
                stream(master_seed, Role::Sampling, i as u64, 0),
            )
        })
        .collect();
    let mut slots: Vec<Slot> = (0..n_slots)
        .map(|i| Slot::new(&config.env, master_seed, i))
        .collect::<Result<_>>()?;
    let mut buffer = ReplayBuffer::new(config.td3.buffer_capacity, spec.obs_dim, spec.act_dim);

    let mut scheme = match config.scheme {
        SchemeKind::Single | SchemeKind::Eso => SchemeState::Plain,
        SchemeKind::Drl => SchemeState::SharedParams,
        SchemeKind::P3s => SchemeState::Guided(Chief::new(
            n_learners,
            config.p3s.clone(),
            &init.actor,
            stream(master_seed, Role::Chief, 0, 0),
        )),
        SchemeKind::Resetting => SchemeState::Resetting {
            period: config.resetting.reset_period,
            incumbent: 0,
        },
        SchemeKind::Center => SchemeState::Distilled(CenterState {
            actor: init.actor.clone(),
            adam: Adam::new(&init.actor),
            beta: config.center.beta,
            period: config.center.center_period,
            steps: config.center.center_steps,
            batch: config.center.center_batch,
            rng: stream(master_seed, Role::Chief, 0, 0),
        }),
    };

    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let global_steps = config.total_env_steps / n_slots as u64;
    let t_initial = config.td3.t_initial;
    let mut eval_rows: Vec<EvalRow> = Vec::new();
    let mut sync_rows: Vec<SyncRow> = Vec::new();
    let mut update_iterations: u64 = 0;

    for t in 0..global_steps {
        // phase 1: act and append in slot order
        let transitions: Vec<Transition> = {
            let learner_of = |i: usize| -> &Learner {
                match scheme {
                    SchemeState::SharedParams => &learners[0],
                    _ => &learners[i],
                }
            };
            if let Some(pool) = &pool {
                let shared = matches!(scheme, SchemeState::SharedParams);
                let first = &learners[0];
                let all = &learners;
                pool.install(|| {
                    slots
                        .par_iter_mut()
                        .enumerate()
                        .map(|(i, slot)| {
                            let l = if shared { first } else { &all[i] };
                            slot.step(l, t)
                        })
                        .collect::<Result<Vec<_>>>()
                })?
            } else {
                let mut out = Vec::with_capacity(n_slots);
                for (i, slot) in slots.iter_mut().enumerate() {
                    out.push(slot.step(learner_of(i), t)?);
                }
                out
            }
        };
        for transition in &transitions {
            buffer.append(transition)?;
        }

        let training_active = t >= t_initial;
        // phase 2: per-learner updates
        if training_active {
            match &scheme {
                SchemeState::SharedParams => {
                    for _ in 0..n_slots {
                        learners[0].train_step(&buffer, None)?;
                        update_iterations += 1;
                    }
                }
                _ => {
                    let augmentations: Vec<Option<(f64, &Mlp)>> = match &scheme {
                        SchemeState::Guided(chief) => {
                            (0..n_learners).map(|i| chief.augmentation_for(i)).collect()
                        }
                        SchemeState::Distilled(center) => {
                            vec![Some((center.beta, &center.actor)); n_learners]
                        }
                        _ => vec![None; n_learners],
                    };
                    if let Some(pool) = &pool {
                        pool.install(|| {
                            learners
                                .par_iter_mut()
                                .zip(augmentations.par_iter())
                                .map(|(learner, aug)| learner.train_step(&buffer, *aug).map(|_| ()))
                                .collect::<Result<Vec<()>>>()
                        })?;
                    } else {
                        for (learner, aug) in learners.iter_mut().zip(&augmentations) {
                            learner.train_step(&buffer, *aug)?;
                        }
                    }
                    update_iterations += n_learners as u64;
                }
            }
        }

        // phase 3: scheme barriers, then evaluation
        if training_active {
            let steps_taken = t + 1;
            match &mut scheme {
                SchemeState::Guided(chief) => {
                    if steps_taken % config.p3s.sync_period == 0 {
                        let returns: Vec<Vec<f64>> =
                            slots.iter().map(|s| s.returns.clone()).collect();
                        let record = chief.sync(&mut learners, &returns, &buffer);
                        sync_rows.push(SyncRow {
                            total_env_steps: steps_taken * n_slots as u64,
                            record,
                        });
                    }
                }
                SchemeState::Resetting { period, incumbent } => {
                    if let Some(p) = period {
                        if steps_taken % *p == 0 {
                            let returns: Vec<Vec<f64>> =
                                slots.iter().map(|s| s.returns.clone()).collect();
                            resetting_sync(
                                &mut learners,
                                &returns,
                                config.p3s.recent_episodes,
                                incumbent,
                            );
                        }
                    }
                }
                SchemeState::Distilled(center) => {
                    if steps_taken % center.period == 0 {
                        update_center(center, &mut learners, &buffer, config.td3.lr)?;
                    }
                }
                _ => {}
            }
        }

        let total_steps = (t + 1) * n_slots as u64;
        if total_steps % config.r_eval == 0 {
            let eval_index = total_steps / config.r_eval;
            let learner_returns: Vec<f64> = match scheme {
                SchemeState::SharedParams => {
                    let m = evaluate_policy(
                        &learners[0],
                        &config.env,
                        config.eval_episodes,
                        master_seed,
                        eval_index,
                    )?;
                    vec![m; n_slots]
                }
                _ => learners
                    .iter()
                    .map(|l| {
                        evaluate_policy(l, &config.env, config.eval_episodes, master_seed, eval_index)
                    })
                    .collect::<Result<_>>()?,
            };
            let max_return = learner_returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (best_index, beta, d_spread, d_change) = match &scheme {
                SchemeState::Guided(chief) => {
                    let (s, c) = chief.distances();
                    (Some(chief.best()), Some(chief.beta()), Some(s), Some(c))
                }
                _ => (None, None, None, None),
            };
            eval_rows.push(EvalRow {
                total_env_steps: total_steps,
                learner_returns,
                max_return,
                best_index,
                beta,
                d_spread,
                d_change,
            });
        }
    }

    let tail = eval_rows.len().min(10);
    let final_score = if tail == 0 {
        f64::NAN
    } else {
        eval_rows[eval_rows.len() - tail..]
            .iter()
            .map(|r| r.max_return)
            .sum::<f64>()
            / tail as f64
    };

    let eval_csv_text = eval_csv(&eval_rows, n_slots);
    let sync_csv_text = matches!(scheme, SchemeState::Guided(_))
        .then(|| sync_csv(&sync_rows, n_learners));

    let mut artifacts = RunArtifacts {
        eval_rows,
        sync_rows,
        final_score,
        eval_csv: eval_csv_text,
        sync_csv: sync_csv_text,
        learners,
        env_interactions: global_steps * n_slots as u64,
        update_iterations,
        out_dir: None,
    };

    if let Some(dir) = out_dir {
        write_artifacts(config, master_seed, dir, &artifacts)?;
        artifacts.out_dir = Some(dir.to_path_buf());
    }
    Ok(artifacts)
}


fn rng_state_json(rng: &ChaCha8Rng) -> serde_json::Value {
    serde_json::json!({
        "seed_hex": rng.get_seed().iter().map(|b| format!("{b:02x}")).collect::<String>(),
        "stream": rng.get_stream(),
        "word_pos": rng.get_word_pos().to_string(),
    })
}

fn write_artifacts(
    config: &RunConfig,
    master_seed: u64,
    dir: &Path,
    artifacts: &RunArtifacts,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("eval.csv"), &artifacts.eval_csv)?;
    if let Some(sync) = &artifacts.sync_csv {
        std::fs::write(dir.join("sync.csv"), sync)?;
    }
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    let meta = serde_json::json!({
        "scheme": config.scheme.name(),
        "env": config.env,
        "n_learners": config.n_learners,
        "total_env_steps": config.total_env_steps,
        "master_seed": master_seed,
        "final_score": artifacts.final_score,
    });
    std::fs::write(
        dir.join("run_meta.json"),
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )?;
    std::fs::write(
        dir.join("summary.txt"),
        format!(
            "scheme: {}\nenv: {}\nmaster_seed: {}\ntotal_env_steps: {}\nfinal_score (mean of last {} eval maxima): {}\n",
            config.scheme.name(),
            config.env,
            master_seed,
            config.total_env_steps,
            artifacts.eval_rows.len().min(10),
            artifacts.final_score,
        ),
    )?;

    let ckpt = dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt)?;
    let mut manifest_learners = Vec::new();
    for (i, learner) in artifacts.learners.iter().enumerate() {
        let nets: [(&str, &Mlp); 6] = [
            ("actor", &learner.actor),
            ("critic1", &learner.critic1),
            ("critic2", &learner.critic2),
            ("actor_target", &learner.actor_target),
            ("critic1_target", &learner.critic1_target),
            ("critic2_target", &learner.critic2_target),
        ];
        let mut files = serde_json::Map::new();
        for (name, net) in nets {
            let file = format!("learner{i}_{name}.p3sn");
            save_network(net, &ckpt.join(&file))?;
            files.insert(name.to_string(), serde_json::Value::String(file));
        }
        manifest_learners.push(serde_json::json!({
            "index": i,
            "update_count": learner.update_count(),
            "networks": files,
            "sample_rng": rng_state_json(learner.sample_rng()),
        }));
    }
    let manifest = serde_json::json!({
        "master_seed": master_seed,
        "total_env_steps": config.total_env_steps,
        "per_learner_steps": config.total_env_steps / config.n_slots() as u64,
        "learners": manifest_learners,
    });
    std::fs::write(
        ckpt.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}
