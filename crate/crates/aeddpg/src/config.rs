//! Experiment configuration.
//!
//! The file format is one `key = value` assignment per line. `#` starts a
//! comment, blank lines are ignored, keys are dotted (`agent.tau`), optional
//! values take `none`, and lists are comma separated. Every key has a default;
//! see [`KEYS`] for the full list. Resolution order, later winning:
//!
//! 1. built-in defaults (the desk profile),
//! 2. the selected `profile`,
//! 3. assignments from the file,
//! 4. command-line overrides,
//! 5. fields forced by the selected `preset`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use aeddpg_core::{AgentConfig, NoiseKind};

use crate::envs::{DelayMode, EnvName, EnvSettings};
use crate::error::{Error, Result};
use crate::runner::{Mode, NoiseSettings, RunConfig, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    AeDdpg,
    VanillaDdpg,
    AblationReplay,
    AblationNoise,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::AeDdpg => "ae_ddpg",
            Preset::VanillaDdpg => "vanilla_ddpg",
            Preset::AblationReplay => "ablation_replay",
            Preset::AblationNoise => "ablation_noise",
        }
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Preset::AeDdpg, Preset::VanillaDdpg, Preset::AblationReplay, Preset::AblationNoise]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset '{s}' (expected ae_ddpg, vanilla_ddpg, ablation_replay or ablation_noise)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    /// Hyperparameters reported for the full-scale running task.
    PaperL2r,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::PaperL2r => "paper-l2r",
        }
    }

    fn assignments(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Profile::Desk => &[],
            Profile::PaperL2r => &[
                ("agent.actor_lr", "0.0003"),
                ("agent.critic_lr", "0.0003"),
                ("agent.batch_size", "96"),
                ("agent.gamma", "0.99"),
                ("agent.tau", "0.001"),
                ("replay.memory_capacity", "1000000"),
                ("replay.hmemory_capacity", "50000"),
                ("run.workers", "16"),
            ],
        }
    }
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper-l2r" => Ok(Profile::PaperL2r),
            _ => Err(format!("unknown profile '{s}' (expected desk or paper-l2r)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseName {
    RandomWalk,
    Gaussian,
    Ou,
}

impl NoiseName {
    pub fn name(self) -> &'static str {
        match self {
            NoiseName::RandomWalk => "random_walk",
            NoiseName::Gaussian => "gaussian",
            NoiseName::Ou => "ou",
        }
    }
}

impl FromStr for NoiseName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random_walk" => Ok(NoiseName::RandomWalk),
            "gaussian" => Ok(NoiseName::Gaussian),
            "ou" => Ok(NoiseName::Ou),
            _ => Err(format!("unknown noise kind '{s}' (expected random_walk, gaussian or ou)")),
        }
    }
}

/// Where a resolved field's value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Origin {
    Default,
    Profile,
    File,
    Flag,
    Preset,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Default => "default",
            Origin::Profile => "profile",
            Origin::File => "file",
            Origin::Flag => "flag",
            Origin::Preset => "preset",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub profile: Profile,
    pub env: EnvName,
    pub env_max_steps: Option<usize>,
    pub env_obstacles: usize,
    pub env_delay_ms: f64,
    pub env_delay_mode: DelayMode,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub max_grad_norm: Option<f64>,
    pub memory_capacity: usize,
    pub hmemory_capacity: usize,
    pub rho: f64,
    pub noise_kind: NoiseName,
    pub rw_sigma: f64,
    pub gaussian_sigma: f64,
    pub ou_sigma: f64,
    pub ou_theta: f64,
    pub noise_clip: Option<f64>,
    pub workers: usize,
    pub mode: Mode,
    pub learn: bool,
    pub warmup_steps: u64,
    pub update_ratio: f64,
    pub total_env_steps: u64,
    pub publish_interval: u64,
    pub worker_lead: Option<u64>,
    pub seed: u64,
    pub seeds: u64,
    pub target_return: Option<f64>,
    pub target_window: usize,
    pub update_log_interval: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let run = RunConfig::default();
        let agent = AgentConfig::default();
        Self {
            preset: Preset::AeDdpg,
            profile: Profile::Desk,
            env: EnvName::Pendulum,
            env_max_steps: None,
            env_obstacles: run.env.obstacles,
            env_delay_ms: 0.0,
            env_delay_mode: DelayMode::Busy,
            actor_lr: agent.actor_lr,
            critic_lr: agent.critic_lr,
            batch_size: run.batch_size,
            gamma: agent.gamma,
            tau: agent.tau,
            actor_hidden: agent.actor_hidden,
            critic_hidden: agent.critic_hidden,
            max_grad_norm: agent.max_grad_norm,
            memory_capacity: run.memory_capacity,
            hmemory_capacity: run.hmemory_capacity,
            rho: run.rho,
            noise_kind: NoiseName::RandomWalk,
            rw_sigma: 0.02,
            gaussian_sigma: 0.15,
            ou_sigma: 0.2,
            ou_theta: 0.15,
            noise_clip: Some(0.5),
            workers: run.num_workers,
            mode: Mode::Threaded,
            learn: true,
            warmup_steps: run.warmup_steps,
            update_ratio: run.update_ratio,
            total_env_steps: run.total_env_steps,
            publish_interval: run.publish_interval,
            worker_lead: run.worker_lead,
            seed: run.seed,
            seeds: 1,
            target_return: None,
            target_window: 20,
            update_log_interval: run.update_log_interval,
        }
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("preset", "ae_ddpg | vanilla_ddpg | ablation_replay | ablation_noise"),
    ("profile", "desk | paper-l2r; base hyperparameters applied before the file"),
    ("env.name", "pendulum | corridor"),
    ("env.max_steps", "episode horizon override, or none for the environment's own"),
    ("env.obstacles", "corridor obstacle count"),
    ("env.delay_ms", "wall-clock floor per environment step, milliseconds"),
    ("env.delay_mode", "busy | sleep"),
    ("agent.actor_lr", "actor Adam learning rate"),
    ("agent.critic_lr", "critic Adam learning rate"),
    ("agent.batch_size", "mini-batch size"),
    ("agent.gamma", "discount factor in [0, 1]"),
    ("agent.tau", "target tracking rate in (0, 1]"),
    ("agent.actor_hidden", "actor hidden layer widths"),
    ("agent.critic_hidden", "critic hidden layer widths"),
    ("agent.max_grad_norm", "gradient norm cap, or none"),
    ("replay.memory_capacity", "Memory capacity in transitions"),
    ("replay.hmemory_capacity", "HMemory capacity in transitions, below Memory's"),
    ("replay.rho", "probability of drawing from HMemory, in [0, 1]"),
    ("noise.kind", "random_walk | gaussian | ou"),
    ("noise.rw_sigma", "random-walk step scale, fraction of the action range"),
    ("noise.gaussian_sigma", "Gaussian scale, fraction of the action range"),
    ("noise.ou_sigma", "OU scale, fraction of the action range"),
    ("noise.ou_theta", "OU mean reversion rate in (0, 1]"),
    ("noise.clip", "noise magnitude cap as a fraction of the action range, or none"),
    ("run.workers", "interaction workers"),
    ("run.mode", "threaded | synchronous"),
    ("run.learn", "true | false; false only collects experience"),
    ("run.warmup_steps", "Memory occupancy before the first update"),
    ("run.update_ratio", "updates per environment step after warmup"),
    ("run.total_env_steps", "environment step budget per run"),
    ("run.publish_interval", "updates between actor snapshots"),
    ("run.worker_lead", "steps workers may run ahead of the learner, or none"),
    ("run.seed", "global seed of the first run"),
    ("run.seeds", "number of runs; run i uses seed + i"),
    ("run.target_return", "stop once the windowed mean return reaches this, or none"),
    ("run.target_window", "episodes in the target window"),
    ("run.update_log_interval", "write every n-th update record"),
];

fn parse_val<T: FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("expected {what}, got '{v}'"))
}

fn parse_opt<T: FromStr>(v: &str, what: &str) -> std::result::Result<Option<T>, String> {
    if v == "none" {
        Ok(None)
    } else {
        parse_val(v, what).map(Some)
    }
}

fn real(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = parse_val(v, "a real number")?;
    if !x.is_finite() {
        return Err(format!("expected a finite real number, got '{v}'"));
    }
    Ok(x)
}

fn positive_real(v: &str) -> std::result::Result<f64, String> {
    let x = real(v)?;
    if x <= 0.0 {
        return Err(format!("must be positive, got {v}"));
    }
    Ok(x)
}

fn positive_int<T: FromStr + PartialEq + Default>(v: &str) -> std::result::Result<T, String> {
    let x: T = parse_val(v, "a non-negative integer")?;
    if x == T::default() {
        return Err("must be positive".into());
    }
    Ok(x)
}

fn unit_interval(v: &str) -> std::result::Result<f64, String> {
    let x = real(v)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(format!("must lie in [0, 1], got {v}"));
    }
    Ok(x)
}

fn half_open_unit(v: &str) -> std::result::Result<f64, String> {
    let x = real(v)?;
    if !(x > 0.0 && x <= 1.0) {
        return Err(format!("must lie in (0, 1], got {v}"));
    }
    Ok(x)
}

fn widths(v: &str) -> std::result::Result<Vec<usize>, String> {
    match v.trim() {
        "" => return Err("expected comma-separated layer widths or none".into()),
        "none" => return Ok(Vec::new()),
        _ => {}
    }
    v.split(',').map(|w| positive_int(w.trim())).collect()
}

fn join(ws: &[usize]) -> String {
    if ws.is_empty() {
        return "none".into();
    }
    ws.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl ExperimentConfig {
    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "preset" => self.preset = v.parse()?,
            "profile" => self.profile = v.parse()?,
            "env.name" => self.env = v.parse()?,
            "env.max_steps" => {
                self.env_max_steps = match v {
                    "none" => None,
                    _ => Some(positive_int(v)?),
                }
            }
            "env.obstacles" => self.env_obstacles = parse_val(v, "a non-negative integer")?,
            "env.delay_ms" => {
                let x = real(v)?;
                if x < 0.0 {
                    return Err(format!("must be non-negative, got {v}"));
                }
                self.env_delay_ms = x;
            }
            "env.delay_mode" => self.env_delay_mode = v.parse()?,
            "agent.actor_lr" => self.actor_lr = positive_real(v)?,
            "agent.critic_lr" => self.critic_lr = positive_real(v)?,
            "agent.batch_size" => self.batch_size = positive_int(v)?,
            "agent.gamma" => self.gamma = unit_interval(v)?,
            "agent.tau" => self.tau = half_open_unit(v)?,
            "agent.actor_hidden" => self.actor_hidden = widths(v)?,
            "agent.critic_hidden" => self.critic_hidden = widths(v)?,
            "agent.max_grad_norm" => {
                self.max_grad_norm = match parse_opt::<f64>(v, "a real number or none")? {
                    Some(x) if !(x > 0.0 && x.is_finite()) => return Err(format!("must be positive, got {v}")),
                    other => other,
                }
            }
            "replay.memory_capacity" => self.memory_capacity = positive_int(v)?,
            "replay.hmemory_capacity" => self.hmemory_capacity = positive_int(v)?,
            "replay.rho" => self.rho = unit_interval(v)?,
            "noise.kind" => self.noise_kind = v.parse()?,
            "noise.rw_sigma" => self.rw_sigma = non_negative(v)?,
            "noise.gaussian_sigma" => self.gaussian_sigma = non_negative(v)?,
            "noise.ou_sigma" => self.ou_sigma = non_negative(v)?,
            "noise.ou_theta" => self.ou_theta = half_open_unit(v)?,
            "noise.clip" => {
                self.noise_clip = match v {
                    "none" => None,
                    _ => Some(positive_real(v)?),
                }
            }
            "run.workers" => self.workers = positive_int(v)?,
            "run.mode" => {
                self.mode = match v {
                    "threaded" => Mode::Threaded,
                    "synchronous" => Mode::Synchronous,
                    _ => return Err(format!("expected threaded or synchronous, got '{v}'")),
                }
            }
            "run.learn" => self.learn = parse_val(v, "true or false")?,
            "run.warmup_steps" => self.warmup_steps = parse_val(v, "a non-negative integer")?,
            "run.update_ratio" => self.update_ratio = positive_real(v)?,
            "run.total_env_steps" => self.total_env_steps = parse_val(v, "a non-negative integer")?,
            "run.publish_interval" => self.publish_interval = positive_int(v)?,
            "run.worker_lead" => {
                self.worker_lead = match v {
                    "none" => None,
                    _ => Some(positive_int(v)?),
                }
            }
            "run.seed" => self.seed = parse_val(v, "a non-negative integer")?,
            "run.seeds" => self.seeds = positive_int(v)?,
            "run.target_return" => self.target_return = parse_opt::<f64>(v, "a real number or none")?,
            "run.target_window" => self.target_window = positive_int(v)?,
            "run.update_log_interval" => self.update_log_interval = positive_int(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "preset" => self.preset.name().into(),
            "profile" => self.profile.name().into(),
            "env.name" => self.env.to_string(),
            "env.max_steps" => opt_str(&self.env_max_steps),
            "env.obstacles" => self.env_obstacles.to_string(),
            "env.delay_ms" => self.env_delay_ms.to_string(),
            "env.delay_mode" => self.env_delay_mode.to_string(),
            "agent.actor_lr" => self.actor_lr.to_string(),
            "agent.critic_lr" => self.critic_lr.to_string(),
            "agent.batch_size" => self.batch_size.to_string(),
            "agent.gamma" => self.gamma.to_string(),
            "agent.tau" => self.tau.to_string(),
            "agent.actor_hidden" => join(&self.actor_hidden),
            "agent.critic_hidden" => join(&self.critic_hidden),
            "agent.max_grad_norm" => opt_str(&self.max_grad_norm),
            "replay.memory_capacity" => self.memory_capacity.to_string(),
            "replay.hmemory_capacity" => self.hmemory_capacity.to_string(),
            "replay.rho" => self.rho.to_string(),
            "noise.kind" => self.noise_kind.name().into(),
            "noise.rw_sigma" => self.rw_sigma.to_string(),
            "noise.gaussian_sigma" => self.gaussian_sigma.to_string(),
            "noise.ou_sigma" => self.ou_sigma.to_string(),
            "noise.ou_theta" => self.ou_theta.to_string(),
            "noise.clip" => opt_str(&self.noise_clip),
            "run.workers" => self.workers.to_string(),
            "run.mode" => match self.mode {
                Mode::Threaded => "threaded".into(),
                Mode::Synchronous => "synchronous".into(),
            },
            "run.learn" => self.learn.to_string(),
            "run.warmup_steps" => self.warmup_steps.to_string(),
            "run.update_ratio" => self.update_ratio.to_string(),
            "run.total_env_steps" => self.total_env_steps.to_string(),
            "run.publish_interval" => self.publish_interval.to_string(),
            "run.worker_lead" => opt_str(&self.worker_lead),
            "run.seed" => self.seed.to_string(),
            "run.seeds" => self.seeds.to_string(),
            "run.target_return" => opt_str(&self.target_return),
            "run.target_window" => self.target_window.to_string(),
            "run.update_log_interval" => self.update_log_interval.to_string(),
            _ => return None,
        })
    }

    /// Canonical text form: every key, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|(k, _)| format!("{k} = {}\n", self.get(k).expect("listed key")))
            .collect()
    }

    pub fn noise_settings(&self) -> NoiseSettings {
        let (kind, sigma) = match self.noise_kind {
            NoiseName::RandomWalk => (NoiseKind::RandomWalk, self.rw_sigma),
            NoiseName::Gaussian => (NoiseKind::Gaussian, self.gaussian_sigma),
            NoiseName::Ou => (NoiseKind::OrnsteinUhlenbeck { theta: self.ou_theta }, self.ou_sigma),
        };
        NoiseSettings {
            kind,
            sigma,
            clip: self.noise_clip,
        }
    }

    /// Runner configuration for run `index` (seed `seed + index`).
    pub fn run_config(&self, index: u64) -> RunConfig {
        RunConfig {
            env: EnvSettings {
                name: self.env,
                max_episode_steps: self.env_max_steps,
                obstacles: self.env_obstacles,
                delay: Duration::from_secs_f64(self.env_delay_ms / 1000.0),
                delay_mode: self.env_delay_mode,
            },
            agent: AgentConfig {
                actor_hidden: self.actor_hidden.clone(),
                critic_hidden: self.critic_hidden.clone(),
                actor_lr: self.actor_lr,
                critic_lr: self.critic_lr,
                gamma: self.gamma,
                tau: self.tau,
                max_grad_norm: self.max_grad_norm,
            },
            noise: self.noise_settings(),
            memory_capacity: self.memory_capacity,
            hmemory_capacity: self.hmemory_capacity,
            rho: self.rho,
            batch_size: self.batch_size,
            num_workers: self.workers,
            warmup_steps: self.warmup_steps,
            update_ratio: self.update_ratio,
            total_env_steps: self.total_env_steps,
            publish_interval: self.publish_interval,
            worker_lead: self.worker_lead,
            mode: self.mode,
            learn: self.learn,
            seed: self.seed.wrapping_add(index),
            target: self.target_return.map(|threshold| Target {
                threshold,
                window: self.target_window,
            }),
            update_log_interval: self.update_log_interval,
        }
    }

    /// The runs a preset expands to, as `(variant name, config)`. Ablation
    /// variants differ from each other only in the ablated field.
    pub fn variants(&self) -> Vec<(String, ExperimentConfig)> {
        let with = |name: &str, f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = self.clone();
            f(&mut c);
            (name.to_string(), c)
        };
        match self.preset {
            Preset::AeDdpg | Preset::VanillaDdpg => vec![(self.preset.name().into(), self.clone())],
            Preset::AblationReplay => vec![
                with("episodic_replay", &|_| {}),
                with("vanilla_replay", &|c| c.rho = 0.0),
            ],
            Preset::AblationNoise => [NoiseName::RandomWalk, NoiseName::Gaussian, NoiseName::Ou]
                .into_iter()
                .map(|k| with(k.name(), &|c| c.noise_kind = k))
                .collect(),
        }
    }

    fn forced_by_preset(&self) -> &'static [(&'static str, &'static str)] {
        match self.preset {
            Preset::VanillaDdpg => &[("run.workers", "1"), ("replay.rho", "0"), ("noise.kind", "ou")],
            _ => &[],
        }
    }
}

fn non_negative(v: &str) -> std::result::Result<f64, String> {
    let x = real(v)?;
    if x < 0.0 {
        return Err(format!("must be non-negative, got {v}"));
    }
    Ok(x)
}

/// A resolved configuration and the origin of every field.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub origins: BTreeMap<&'static str, Origin>,
}

impl Resolved {
    pub fn origin(&self, key: &str) -> Option<Origin> {
        self.origins.get(key).copied()
    }

    /// Canonical text with each line annotated by its origin.
    pub fn describe(&self) -> String {
        KEYS.iter()
            .map(|(k, _)| {
                format!(
                    "{k} = {}  # {}\n",
                    self.config.get(k).expect("listed key"),
                    self.origins[k]
                )
            })
            .collect()
    }
}

struct Assignment<'a> {
    key: &'static str,
    value: &'a str,
    origin: Origin,
    /// 1-based line in the file; 0 for flags.
    line: usize,
}

fn canonical_key(key: &str) -> Option<&'static str> {
    KEYS.iter().map(|(k, _)| *k).find(|k| *k == key)
}

fn fail(a: &Assignment, msg: String) -> Error {
    match a.origin {
        Origin::File => Error::Config {
            line: a.line,
            message: format!("{}: {msg}", a.key),
        },
        _ => Error::Invalid(format!("override {}: {msg}", a.key)),
    }
}

/// Resolves `file_text` (may be empty) and `key=value` overrides.
pub fn parse_config(file_text: &str, overrides: &[String]) -> Result<Resolved> {
    let mut assignments = Vec::new();
    for (i, raw) in file_text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = canonical_key(k.trim()).ok_or_else(|| Error::Config {
            line: i + 1,
            message: format!("unknown key '{}'", k.trim()),
        })?;
        assignments.push(Assignment {
            key,
            value: v.trim(),
            origin: Origin::File,
            line: i + 1,
        });
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("override '{o}' is not key=value")))?;
        let key = canonical_key(k.trim()).ok_or_else(|| Error::Invalid(format!("unknown key '{}'", k.trim())))?;
        assignments.push(Assignment {
            key,
            value: v.trim(),
            origin: Origin::Flag,
            line: 0,
        });
    }

    let mut config = ExperimentConfig::default();
    let mut origins: BTreeMap<&'static str, Origin> = KEYS.iter().map(|(k, _)| (*k, Origin::Default)).collect();
    // The profile decides the base layer, so it is resolved first.
    for a in assignments.iter().filter(|a| a.key == "profile") {
        config.set(a.key, a.value).map_err(|m| fail(a, m))?;
    }
    for (k, v) in config.profile.assignments() {
        config.set(k, v).expect("profile values are valid");
        origins.insert(canonical_key(k).expect("profile key"), Origin::Profile);
    }
    for a in &assignments {
        config.set(a.key, a.value).map_err(|m| fail(a, m))?;
        origins.insert(a.key, a.origin);
    }
    for (k, v) in config.forced_by_preset() {
        let key = canonical_key(k).expect("preset key");
        if matches!(origins[key], Origin::File | Origin::Flag) && config.get(key).as_deref() != Some(v) {
            log::warn!("preset {} forces {key} = {v}", config.preset.name());
        }
        config.set(key, v).expect("preset values are valid");
        origins.insert(key, Origin::Preset);
    }
    let resolved = Resolved { config, origins };
    validate(&resolved, &assignments)?;
    Ok(resolved)
}

fn validate(r: &Resolved, assignments: &[Assignment]) -> Result<()> {
    let c = &r.config;
    let locate = |keys: &[&str], msg: String| -> Error {
        match assignments.iter().rev().find(|a| keys.contains(&a.key)) {
            Some(a) => fail(a, msg),
            None => Error::Invalid(msg),
        }
    };
    if c.hmemory_capacity >= c.memory_capacity {
        return Err(locate(
            &["replay.hmemory_capacity", "replay.memory_capacity"],
            format!(
                "hmemory_capacity ({}) must be below memory_capacity ({})",
                c.hmemory_capacity, c.memory_capacity
            ),
        ));
    }
    if c.learn && c.warmup_steps < c.batch_size as u64 {
        return Err(locate(
            &["run.warmup_steps", "agent.batch_size"],
            format!("warmup_steps ({}) must be at least batch_size ({})", c.warmup_steps, c.batch_size),
        ));
    }
    for (_, v) in c.variants() {
        v.run_config(0).validate()?;
    }
    Ok(())
}
