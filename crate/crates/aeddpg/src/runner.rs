//! N interaction workers feeding a shared replay store while one learner
//! performs DDPG updates and publishes actor snapshots.
//!
//! Pacing: the learner is owed `floor(ratio * (steps - warmup))` updates once
//! `steps` exceeds the warmup, and idles while it is not behind. If
//! `worker_lead` is set, workers additionally hold off while the step count is
//! more than `lead` steps ahead of what the learner has consumed, which keeps
//! the ratio enforceable on hosts where the learner is the slower side.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use aeddpg_core::rng::{seeded, Rng, INIT_STREAM, LEARNER_STREAM, NOISE_EPISODE};
use aeddpg_core::{
    act, derive_seed, ActionBounds, Agent, AgentConfig, EpisodeCache, Error as CoreError, NoiseConfig,
    NoiseKind, NoiseProcess, ReplayStats, ReplayStore, RngState, Transition,
};

use crate::envs::{make_env, BoxedEnv, EnvSettings};
use crate::error::{Error, Result};
use crate::metrics::{finite, EpisodeRecord, Record, Sink, UpdateRecord};
use crate::shared::{NamedRngStates, SharedReplay};
use crate::snapshot::{ParamSnapshot, SnapshotSlot};

/// Consecutive aborted updates after which the run halts.
pub const MAX_CONSECUTIVE_ABORTS: u32 = 3;

const IDLE: Duration = Duration::from_micros(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Threaded,
    /// Workers and learner interleaved on the calling thread: one step per
    /// worker in id order, then every update that is owed.
    Synchronous,
}

/// Exploration noise with scales given as fractions of each action range.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSettings {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub clip: Option<f64>,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            kind: NoiseKind::RandomWalk,
            sigma: 0.02,
            clip: Some(0.5),
        }
    }
}

impl NoiseSettings {
    pub fn process_config(&self, bounds: &ActionBounds) -> NoiseConfig {
        NoiseConfig {
            kind: self.kind,
            sigma: bounds.range().map(|r| self.sigma * r).collect(),
            clip: self.clip.map(|c| bounds.range().map(|r| c * r).collect()),
        }
    }
}

/// Early stop once the mean return of the last `window` finished episodes
/// reaches `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub threshold: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvSettings,
    pub agent: AgentConfig,
    pub noise: NoiseSettings,
    pub memory_capacity: usize,
    pub hmemory_capacity: usize,
    pub rho: f64,
    pub batch_size: usize,
    pub num_workers: usize,
    pub warmup_steps: u64,
    /// Updates owed per environment step after warmup.
    pub update_ratio: f64,
    pub total_env_steps: u64,
    pub publish_interval: u64,
    pub worker_lead: Option<u64>,
    pub mode: Mode,
    pub learn: bool,
    pub seed: u64,
    pub target: Option<Target>,
    /// Every n-th update is written to the metrics.
    pub update_log_interval: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvSettings::default(),
            agent: AgentConfig::default(),
            noise: NoiseSettings::default(),
            memory_capacity: 100_000,
            hmemory_capacity: 5_000,
            rho: 0.1,
            batch_size: 64,
            num_workers: 4,
            warmup_steps: 1_000,
            update_ratio: 1.0,
            total_env_steps: 150_000,
            publish_interval: 1,
            worker_lead: Some(256),
            mode: Mode::Threaded,
            learn: true,
            seed: 1,
            target: None,
            update_log_interval: 1,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if self.num_workers == 0 {
            return Err(invalid("num_workers must be at least 1"));
        }
        if self.num_workers > (1 << 24) {
            return Err(invalid("num_workers exceeds the episode id range"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        if self.learn && self.warmup_steps < self.batch_size as u64 {
            return Err(invalid(format!(
                "warmup_steps ({}) must be at least batch_size ({})",
                self.warmup_steps, self.batch_size
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(invalid(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if self.hmemory_capacity == 0 || self.hmemory_capacity >= self.memory_capacity {
            return Err(invalid("capacities must satisfy 0 < hmemory_capacity < memory_capacity"));
        }
        if self.learn && !(self.update_ratio > 0.0 && self.update_ratio.is_finite()) {
            return Err(invalid("update_ratio must be positive and finite"));
        }
        if self.publish_interval == 0 || self.update_log_interval == 0 {
            return Err(invalid("publish_interval and update_log_interval must be positive"));
        }
        if let Some(lead) = self.worker_lead {
            if self.learn && (lead as f64) * self.update_ratio < 1.0 {
                return Err(invalid("worker_lead * update_ratio must be at least 1"));
            }
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(invalid("noise sigma must be finite and non-negative"));
        }
        if matches!(self.noise.clip, Some(c) if !(c > 0.0)) {
            return Err(invalid("noise clip must be positive"));
        }
        if let NoiseKind::OrnsteinUhlenbeck { theta } = self.noise.kind {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(invalid("ou theta must lie in (0, 1]"));
            }
        }
        if let Some(t) = self.target {
            if t.window == 0 || !t.threshold.is_finite() {
                return Err(invalid("target window must be positive and threshold finite"));
            }
        }
        if self.env.max_episode_steps == Some(0) {
            return Err(invalid("max_episode_steps must be positive"));
        }
        Ok(())
    }

    /// Updates the learner owes after `steps` environment steps.
    pub fn updates_due(&self, steps: u64) -> u64 {
        if !self.learn || steps <= self.warmup_steps {
            return 0;
        }
        (self.update_ratio * (steps - self.warmup_steps) as f64).floor() as u64
    }

    /// Whether a worker may start another step given `claimed` steps so far.
    pub fn step_permitted(&self, claimed: u64, updates: u64) -> bool {
        match self.worker_lead {
            Some(lead) if self.learn => {
                (claimed as f64) < self.warmup_steps as f64 + updates as f64 / self.update_ratio + lead as f64
            }
            _ => true,
        }
    }
}

/// Initial agent for a config: parameters drawn from the init stream.
pub fn initial_agent(config: &RunConfig) -> Result<Agent> {
    agent_for(config, make_env(&config.env).spec())
}

fn agent_for(config: &RunConfig, spec: &aeddpg_core::EnvSpec) -> Result<Agent> {
    let bounds = ActionBounds::new(spec.action_low.clone(), spec.action_high.clone())?;
    let mut rng = seeded(derive_seed(config.seed, INIT_STREAM, 0));
    Ok(Agent::new(spec.observation_dim, bounds, &config.agent, &mut rng)?)
}

pub fn noise_seed(global_seed: u64, worker_id: u32) -> u64 {
    derive_seed(global_seed, worker_id as u64, NOISE_EPISODE)
}

pub fn learner_seed(global_seed: u64) -> u64 {
    derive_seed(global_seed, LEARNER_STREAM, 0)
}

struct Shared<'a> {
    config: &'a RunConfig,
    store: SharedReplay,
    slot: SnapshotSlot,
    claimed: AtomicU64,
    steps: AtomicU64,
    updates: AtomicU64,
    stop: AtomicBool,
    workers_running: AtomicUsize,
    start: Instant,
}

impl Shared<'_> {
    fn clock(&self) -> Option<f64> {
        match self.config.mode {
            Mode::Threaded => Some(self.start.elapsed().as_secs_f64()),
            Mode::Synchronous => None,
        }
    }

    fn claim_step(&self) -> bool {
        let prev = self.claimed.fetch_add(1, Ordering::AcqRel);
        if prev >= self.config.total_env_steps {
            self.claimed.fetch_sub(1, Ordering::AcqRel);
            return false;
        }
        true
    }
}

/// One interaction context: owns its environment, noise process and
/// episode cache, and acts with the newest snapshot it has seen.
pub struct Worker {
    id: u32,
    global_seed: u64,
    env: BoxedEnv,
    bounds: ActionBounds,
    noise: NoiseProcess,
    cache: EpisodeCache,
    horizon: usize,
    obs: Vec<f64>,
    episode_seed: u64,
    episode_len: usize,
    snapshot: Arc<ParamSnapshot>,
    version_used: u64,
    steps: u64,
    faults: u64,
}

impl Worker {
    fn new(id: u32, config: &RunConfig, env: BoxedEnv, slot: &SnapshotSlot) -> Result<Self> {
        let spec = env.spec().clone();
        let bounds = ActionBounds::new(spec.action_low.clone(), spec.action_high.clone())?;
        let noise = NoiseProcess::new(config.noise.process_config(&bounds), noise_seed(config.seed, id))?;
        let mut w = Self {
            id,
            global_seed: config.seed,
            env,
            bounds,
            noise,
            cache: EpisodeCache::new(id),
            horizon: spec.max_episode_steps,
            obs: Vec::new(),
            episode_seed: 0,
            episode_len: 0,
            snapshot: slot.load(),
            version_used: 0,
            steps: 0,
            faults: 0,
        };
        w.begin_episode();
        Ok(w)
    }

    fn begin_episode(&mut self) {
        self.episode_seed = derive_seed(self.global_seed, self.id as u64, self.cache.episode_index());
        self.obs = self.env.reset(self.episode_seed);
        self.noise.reset();
        self.episode_len = 0;
        self.version_used = self.snapshot.version;
    }

    /// One environment step. Returns the episode record when it ended one.
    fn step(&mut self, shared: &Shared) -> Result<Option<EpisodeRecord>> {
        shared.slot.refresh(&mut self.snapshot);
        self.version_used = self.snapshot.version;
        let n = self.noise.next_sample();
        let action = act(&self.snapshot.actor, &self.bounds, &self.obs, Some(&n))?;
        let result = match self.env.step(&action) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("worker {}: environment fault, abandoning episode: {e}", self.id);
                shared.claimed.fetch_sub(1, Ordering::AcqRel);
                shared.store.abandon_episode(&mut self.cache);
                self.faults += 1;
                self.begin_episode();
                return Ok(None);
            }
        };
        self.episode_len += 1;
        let t = Transition {
            state: std::mem::take(&mut self.obs),
            action,
            reward: result.reward,
            next_state: result.observation.clone(),
            terminal: result.terminal,
        };
        shared.store.store_step(&mut self.cache, t)?;
        self.steps += 1;
        let total = shared.steps.fetch_add(1, Ordering::AcqRel) + 1;
        self.obs = result.observation;
        if !(result.terminal || self.episode_len >= self.horizon) {
            return Ok(None);
        }
        let episode_index = self.cache.episode_index();
        let outcome = shared.store.finalize_episode(&mut self.cache)?;
        let stats = shared.store.stats();
        let record = EpisodeRecord {
            wall_clock_s: shared.clock(),
            env_steps_total: total,
            worker_id: self.id,
            episode_index,
            episode_seed: self.episode_seed,
            episode_reward: outcome.episode_return,
            episode_len: outcome.length,
            admitted: outcome.admitted,
            r_max: finite(outcome.r_max),
            memory_occupancy: stats.memory_len,
            hmemory_occupancy: stats.hmemory_len,
            snapshot_version: self.version_used,
        };
        self.begin_episode();
        Ok(Some(record))
    }
}

struct Learner {
    agent: Agent,
    rng: Rng,
    attempts: u64,
    aborted: u64,
    consecutive_aborts: u32,
}

impl Learner {
    fn update(&mut self, shared: &Shared) -> Result<Option<UpdateRecord>> {
        let cfg = shared.config;
        let batch = shared.store.sample_batch(cfg.batch_size, cfg.rho, &mut self.rng)?;
        let outcome = self
            .agent
            .critic_update(&batch)
            .and_then(|c| self.agent.actor_update(&batch).map(|a| (c, a)));
        self.attempts += 1;
        shared.updates.store(self.attempts, Ordering::Release);
        let (critic_loss, actor_objective) = match outcome {
            Ok((c, a)) => {
                self.agent.soft_update();
                self.consecutive_aborts = 0;
                if self.attempts % cfg.publish_interval == 0 {
                    shared.slot.publish(&self.agent.actor);
                }
                (Some(c), Some(a))
            }
            Err(CoreError::Divergence(what)) => {
                self.aborted += 1;
                self.consecutive_aborts += 1;
                log::warn!("update {} aborted: non-finite {what}", self.attempts);
                if self.consecutive_aborts >= MAX_CONSECUTIVE_ABORTS {
                    return Err(Error::Halted(format!(
                        "{MAX_CONSECUTIVE_ABORTS} consecutive updates aborted (last: non-finite {what}) at update {}",
                        self.attempts
                    )));
                }
                (None, None)
            }
            Err(e) => return Err(e.into()),
        };
        if self.attempts % cfg.update_log_interval != 0 {
            return Ok(None);
        }
        let stats = shared.store.stats();
        Ok(Some(UpdateRecord {
            wall_clock_s: shared.clock(),
            env_steps_total: shared.steps.load(Ordering::Acquire),
            update_index: self.attempts,
            critic_loss,
            actor_objective,
            r_max: finite(stats.r_max),
            memory_occupancy: stats.memory_len,
            hmemory_occupancy: stats.hmemory_len,
            snapshot_version: shared.slot.version(),
        }))
    }
}

#[derive(Debug, Clone)]
pub struct WorkerSummary {
    pub worker_id: u32,
    pub steps: u64,
    pub episodes: u64,
    pub faults: u64,
    pub noise_rng: RngState,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub env_steps: u64,
    pub updates: u64,
    pub aborted_updates: u64,
    pub episodes: u64,
    pub steps_to_target: Option<u64>,
    pub elapsed: Duration,
    pub replay: ReplayStats,
    pub workers: Vec<WorkerSummary>,
    pub snapshot_version: u64,
    /// Largest `|updates - due|` seen by the learner at its pacing checks.
    pub max_pacing_gap: u64,
    pub agent: Agent,
    pub rng_states: NamedRngStates,
}

impl RunReport {
    pub fn steps_per_second(&self) -> f64 {
        self.env_steps as f64 / self.elapsed.as_secs_f64()
    }
}

/// Rolling window over finished episode returns.
struct TargetTracker {
    target: Option<Target>,
    window: VecDeque<f64>,
    hit: Option<u64>,
}

impl TargetTracker {
    fn observe(&mut self, rec: &EpisodeRecord) -> bool {
        let Some(t) = self.target else { return false };
        if self.hit.is_some() {
            return true;
        }
        self.window.push_back(rec.episode_reward);
        if self.window.len() > t.window {
            self.window.pop_front();
        }
        if self.window.len() == t.window && self.window.iter().sum::<f64>() / t.window as f64 >= t.threshold {
            self.hit = Some(rec.env_steps_total);
        }
        self.hit.is_some()
    }
}

/// Runs one experiment, streaming records to `sink`, and returns the final
/// learner state and counters.
pub fn run(config: &RunConfig, sink: &mut dyn Sink) -> Result<RunReport> {
    run_with_envs(config, &|_| make_env(&config.env), sink)
}

/// [`run`] with worker environments built by `make(worker_id)` instead of
/// from `config.env`.
pub fn run_with_envs(
    config: &RunConfig,
    make: &dyn Fn(u32) -> BoxedEnv,
    sink: &mut dyn Sink,
) -> Result<RunReport> {
    config.validate()?;
    let envs: Vec<BoxedEnv> = (0..config.num_workers as u32).map(make).collect();
    if envs.iter().any(|e| e.spec() != envs[0].spec()) {
        return Err(invalid("worker environments disagree on their spec"));
    }
    let agent = agent_for(config, envs[0].spec())?;
    let store = ReplayStore::new(
        agent.state_dim(),
        agent.action_dim(),
        config.memory_capacity,
        config.hmemory_capacity,
    )?;
    let shared = Shared {
        config,
        store: SharedReplay::new(store),
        slot: SnapshotSlot::new(agent.actor.clone()),
        claimed: AtomicU64::new(0),
        steps: AtomicU64::new(0),
        updates: AtomicU64::new(0),
        stop: AtomicBool::new(false),
        workers_running: AtomicUsize::new(config.num_workers),
        start: Instant::now(),
    };
    let workers = envs
        .into_iter()
        .enumerate()
        .map(|(id, env)| Worker::new(id as u32, config, env, &shared.slot))
        .collect::<Result<Vec<_>>>()?;
    let learner = Learner {
        agent,
        rng: seeded(learner_seed(config.seed)),
        attempts: 0,
        aborted: 0,
        consecutive_aborts: 0,
    };
    let mut tracker = TargetTracker {
        target: config.target,
        window: VecDeque::new(),
        hit: None,
    };
    let (workers, learner, gap, episodes) = match config.mode {
        Mode::Synchronous => run_synchronous(&shared, workers, learner, &mut tracker, sink)?,
        Mode::Threaded => run_threaded(&shared, workers, learner, &mut tracker, sink)?,
    };
    let elapsed = shared.start.elapsed();
    let mut rng_states = vec![("learner".to_string(), RngState::capture(&learner.rng))];
    rng_states.extend(workers.iter().map(|w| (format!("noise/{}", w.id), w.noise.rng_state())));
    Ok(RunReport {
        env_steps: shared.steps.load(Ordering::Acquire),
        updates: learner.attempts,
        aborted_updates: learner.aborted,
        episodes,
        steps_to_target: tracker.hit,
        elapsed,
        replay: shared.store.stats(),
        workers: workers
            .iter()
            .map(|w| WorkerSummary {
                worker_id: w.id,
                steps: w.steps,
                episodes: w.cache.episode_index(),
                faults: w.faults,
                noise_rng: w.noise.rng_state(),
            })
            .collect(),
        snapshot_version: shared.slot.version(),
        max_pacing_gap: gap,
        agent: learner.agent,
        rng_states,
    })
}

type Finished = (Vec<Worker>, Learner, u64, u64);

fn run_synchronous(
    shared: &Shared,
    mut workers: Vec<Worker>,
    mut learner: Learner,
    tracker: &mut TargetTracker,
    sink: &mut dyn Sink,
) -> Result<Finished> {
    let cfg = shared.config;
    let mut gap = 0;
    let mut episodes = 0;
    'outer: loop {
        for w in workers.iter_mut() {
            if !shared.claim_step() {
                break 'outer;
            }
            if let Some(rec) = w.step(shared)? {
                episodes += 1;
                let hit = tracker.observe(&rec);
                sink.record(&Record::Episode(rec))?;
                if hit {
                    break 'outer;
                }
            }
        }
        let due = cfg.updates_due(shared.steps.load(Ordering::Acquire));
        gap = gap.max(due.saturating_sub(learner.attempts));
        while learner.attempts < due {
            if let Some(rec) = learner.update(shared)? {
                sink.record(&Record::Update(rec))?;
            }
        }
    }
    Ok((workers, learner, gap, episodes))
}

enum Message {
    Record(Record),
    Failed(Error),
}

fn worker_loop(shared: &Shared, mut w: Worker, tx: mpsc::Sender<Message>) -> Worker {
    let cfg = shared.config;
    'run: while !shared.stop.load(Ordering::Acquire) {
        while !cfg.step_permitted(shared.claimed.load(Ordering::Acquire), shared.updates.load(Ordering::Acquire)) {
            if shared.stop.load(Ordering::Acquire) {
                break 'run;
            }
            std::thread::sleep(IDLE);
        }
        if !shared.claim_step() {
            break;
        }
        match w.step(shared) {
            Ok(Some(rec)) => {
                let _ = tx.send(Message::Record(Record::Episode(rec)));
            }
            Ok(None) => {}
            Err(e) => {
                shared.stop.store(true, Ordering::Release);
                let _ = tx.send(Message::Failed(e));
                break;
            }
        }
    }
    shared.workers_running.fetch_sub(1, Ordering::AcqRel);
    w
}

fn learner_loop(shared: &Shared, mut learner: Learner, tx: mpsc::Sender<Message>) -> (Learner, u64) {
    let cfg = shared.config;
    let mut gap = 0;
    if !cfg.learn {
        return (learner, gap);
    }
    while !shared.stop.load(Ordering::Acquire) && shared.workers_running.load(Ordering::Acquire) > 0 {
        let due = cfg.updates_due(shared.steps.load(Ordering::Acquire));
        gap = gap.max(due.saturating_sub(learner.attempts));
        if learner.attempts >= due {
            std::thread::sleep(IDLE);
            continue;
        }
        match learner.update(shared) {
            Ok(Some(rec)) => {
                let _ = tx.send(Message::Record(Record::Update(rec)));
            }
            Ok(None) => {}
            Err(e) => {
                shared.stop.store(true, Ordering::Release);
                let _ = tx.send(Message::Failed(e));
                break;
            }
        }
    }
    (learner, gap)
}

fn run_threaded(
    shared: &Shared,
    workers: Vec<Worker>,
    learner: Learner,
    tracker: &mut TargetTracker,
    sink: &mut dyn Sink,
) -> Result<Finished> {
    let (tx, rx) = mpsc::channel();
    let mut failure = None;
    let mut episodes = 0;
    let (workers, (learner, gap)) = std::thread::scope(|s| {
        let handles: Vec<_> = workers
            .into_iter()
            .map(|w| {
                let tx = tx.clone();
                std::thread::Builder::new()
                    .name(format!("worker-{}", w.id))
                    .spawn_scoped(s, move || worker_loop(shared, w, tx))
                    .expect("spawn worker")
            })
            .collect();
        let learner_tx = tx.clone();
        let learner = std::thread::Builder::new()
            .name("learner".into())
            .spawn_scoped(s, move || learner_loop(shared, learner, learner_tx))
            .expect("spawn learner");
        drop(tx);
        for msg in rx {
            let result = match msg {
                Message::Failed(e) => Err(e),
                Message::Record(rec) => {
                    let mut hit = false;
                    if let Record::Episode(e) = &rec {
                        episodes += 1;
                        hit = tracker.observe(e);
                    }
                    let written = sink.record(&rec);
                    if hit {
                        shared.stop.store(true, Ordering::Release);
                    }
                    written
                }
            };
            if let Err(e) = result {
                shared.stop.store(true, Ordering::Release);
                failure.get_or_insert(e);
            }
        }
        let workers: Vec<Worker> = handles.into_iter().map(|h| h.join().expect("worker panicked")).collect();
        (workers, learner.join().expect("learner panicked"))
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((workers, learner, gap, episodes))
}

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Runs one experiment into `dir`: `metrics.jsonl` is streamed during the
/// run and `checkpoint.bin` holds the final learner and generator state.
pub fn run_experiment(config: &RunConfig, variant: &str, dir: &std::path::Path) -> Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = crate::metrics::Header::new(variant, config.seed);
    let mut writer = crate::metrics::MetricsWriter::create(&dir.join(METRICS_FILE), &header)?;
    let outcome = run(config, &mut writer);
    writer.flush()?;
    let report = outcome?;
    crate::checkpoint::save(&dir.join(CHECKPOINT_FILE), &report.agent, &report.rng_states)?;
    Ok(report)
}
