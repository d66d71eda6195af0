//! Environment construction and the per-step delay wrapper.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use aeddpg_core::{Corridor, CorridorConfig, EnvSpec, Environment, Pendulum, PendulumConfig, StepResult};

pub type BoxedEnv = Box<dyn Environment + Send>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvName {
    Pendulum,
    Corridor,
}

impl FromStr for EnvName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pendulum" => Ok(EnvName::Pendulum),
            "corridor" => Ok(EnvName::Corridor),
            _ => Err(format!("unknown environment '{s}' (expected pendulum or corridor)")),
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvName::Pendulum => "pendulum",
            EnvName::Corridor => "corridor",
        })
    }
}

/// How an injected step delay is spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayMode {
    /// Spin until the deadline, yielding the core between polls.
    Busy,
    Sleep,
}

impl FromStr for DelayMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "busy" => Ok(DelayMode::Busy),
            "sleep" => Ok(DelayMode::Sleep),
            _ => Err(format!("unknown delay mode '{s}' (expected busy or sleep)")),
        }
    }
}

impl fmt::Display for DelayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DelayMode::Busy => "busy",
            DelayMode::Sleep => "sleep",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSettings {
    pub name: EnvName,
    /// Overrides the environment's own horizon.
    pub max_episode_steps: Option<usize>,
    pub obstacles: usize,
    pub delay: Duration,
    pub delay_mode: DelayMode,
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self {
            name: EnvName::Pendulum,
            max_episode_steps: None,
            obstacles: CorridorConfig::default().obstacles,
            delay: Duration::ZERO,
            delay_mode: DelayMode::Busy,
        }
    }
}

pub fn make_env(settings: &EnvSettings) -> BoxedEnv {
    let inner: BoxedEnv = match settings.name {
        EnvName::Pendulum => {
            let mut cfg = PendulumConfig::default();
            if let Some(h) = settings.max_episode_steps {
                cfg.max_episode_steps = h;
            }
            Box::new(Pendulum::new(cfg))
        }
        EnvName::Corridor => {
            let mut cfg = CorridorConfig {
                obstacles: settings.obstacles,
                ..CorridorConfig::default()
            };
            if let Some(h) = settings.max_episode_steps {
                cfg.max_episode_steps = h;
            }
            Box::new(Corridor::new(cfg))
        }
    };
    if settings.delay.is_zero() {
        inner
    } else {
        Box::new(Delayed::new(inner, settings.delay, settings.delay_mode))
    }
}

/// Pads every `step` to at least `delay` of wall-clock time.
pub struct Delayed<E> {
    inner: E,
    delay: Duration,
    mode: DelayMode,
}

impl<E> Delayed<E> {
    pub fn new(inner: E, delay: Duration, mode: DelayMode) -> Self {
        Self { inner, delay, mode }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

pub fn wait_until(deadline: Instant, mode: DelayMode) {
    match mode {
        DelayMode::Sleep => {
            let now = Instant::now();
            if deadline > now {
                std::thread::sleep(deadline - now);
            }
        }
        DelayMode::Busy => {
            while Instant::now() < deadline {
                std::hint::spin_loop();
                std::thread::yield_now();
            }
        }
    }
}

impl<E: Environment> Environment for Delayed<E> {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> aeddpg_core::Result<StepResult> {
        let deadline = Instant::now() + self.delay;
        let out = self.inner.step(action);
        wait_until(deadline, self.mode);
        out
    }
}
