//! Seeded, deterministic continuous-control tasks.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::net::unit_f64;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub observation_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// A genuine terminal state. Reaching the horizon is not reported here;
    /// the caller counts steps against `max_episode_steps`.
    pub terminal: bool,
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;
    /// Starts a new episode whose randomness is fully determined by `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

impl<E: Environment + ?Sized> Environment for alloc::boxed::Box<E> {
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        (**self).reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        (**self).step(action)
    }
}

fn check_action(spec: &EnvSpec, action: &[f64]) -> Result<()> {
    check_len("action", spec.action_dim(), action.len())?;
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument("action is not finite".into()));
    }
    Ok(())
}

/// Angle wrapped into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = libm::fmod(theta + PI, two_pi);
    if r < 0.0 {
        r += two_pi;
    }
    r - PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumConfig {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub max_torque: f64,
    pub max_speed: f64,
    pub max_episode_steps: usize,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            max_torque: 2.0,
            max_speed: 8.0,
            max_episode_steps: 200,
        }
    }
}

/// Angle and angular velocity; `theta = 0` is upright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

/// Single rigid pendulum swing-up:
/// `theta'' = 3g/(2l) sin(theta) + 3/(m l^2) u`, semi-implicit Euler.
#[derive(Debug, Clone)]
pub struct Pendulum {
    config: PendulumConfig,
    spec: EnvSpec,
    state: PendulumState,
}

impl Pendulum {
    pub fn new(config: PendulumConfig) -> Self {
        Self {
            spec: EnvSpec {
                observation_dim: 3,
                action_low: vec![-config.max_torque],
                action_high: vec![config.max_torque],
                max_episode_steps: config.max_episode_steps,
            },
            config,
            state: PendulumState {
                theta: PI,
                theta_dot: 0.0,
            },
        }
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn set_state(&mut self, state: PendulumState) {
        self.state = state;
    }

    pub fn observe(state: PendulumState) -> Vec<f64> {
        vec![libm::cos(state.theta), libm::sin(state.theta), state.theta_dot]
    }

    /// One integration step from `state` under torque `u`. The reward scores
    /// the pre-step state and the applied (clipped) torque.
    pub fn dynamics(config: &PendulumConfig, state: PendulumState, u: f64) -> (PendulumState, f64) {
        let u = u.clamp(-config.max_torque, config.max_torque);
        let PendulumConfig {
            gravity: g,
            mass: m,
            length: l,
            dt,
            ..
        } = *config;
        let th = wrap_angle(state.theta);
        let reward = -(th * th + 0.1 * state.theta_dot * state.theta_dot + 0.001 * u * u);
        let accel = 3.0 * g / (2.0 * l) * libm::sin(state.theta) + 3.0 / (m * l * l) * u;
        let theta_dot = (state.theta_dot + accel * dt).clamp(-config.max_speed, config.max_speed);
        let theta = state.theta + theta_dot * dt;
        (PendulumState { theta, theta_dot }, reward)
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new(PendulumConfig::default())
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        self.state = PendulumState {
            theta: PI * (2.0 * unit_f64(&mut rng) - 1.0),
            theta_dot: 2.0 * unit_f64(&mut rng) - 1.0,
        };
        Self::observe(self.state)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(&self.spec, action)?;
        let (next, reward) = Self::dynamics(&self.config, self.state, action[0]);
        self.state = next;
        Ok(StepResult {
            observation: Self::observe(next),
            reward,
            terminal: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorConfig {
    pub dt: f64,
    pub drag: f64,
    pub max_speed: f64,
    pub half_width: f64,
    pub obstacles: usize,
    /// Obstacle centres are drawn with x in this range.
    pub obstacle_x: (f64, f64),
    pub obstacle_radius: (f64, f64),
    pub collision_penalty: f64,
    /// Velocity multiplier applied on every step spent inside an obstacle.
    pub collision_damping: f64,
    pub action_cost: f64,
    pub max_episode_steps: usize,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            drag: 0.5,
            max_speed: 2.0,
            half_width: 1.0,
            obstacles: 3,
            obstacle_x: (4.0, 30.0),
            obstacle_radius: (0.25, 0.5),
            collision_penalty: 2.0,
            collision_damping: 0.5,
            action_cost: 0.05,
            max_episode_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorridorState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// A point mass pushed down a straight corridor past seeded circular
/// obstacles. Reward per step is forward velocity minus a collision penalty
/// and a quadratic action cost; leaving the corridor is terminal.
///
/// Observation: `[y, vx, vy, dx, dy, r]` where `(dx, dy, r)` describe the
/// nearest obstacle not yet passed (dx capped at 10, zeros radius if none).
#[derive(Debug, Clone)]
pub struct Corridor {
    config: CorridorConfig,
    spec: EnvSpec,
    state: CorridorState,
    obstacles: Vec<Obstacle>,
}

const LOOKAHEAD: f64 = 10.0;

impl Corridor {
    pub fn new(config: CorridorConfig) -> Self {
        Self {
            spec: EnvSpec {
                observation_dim: 6,
                action_low: vec![-1.0, -1.0],
                action_high: vec![1.0, 1.0],
                max_episode_steps: config.max_episode_steps,
            },
            config,
            state: CorridorState::default(),
            obstacles: Vec::new(),
        }
    }

    pub fn state(&self) -> CorridorState {
        self.state
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn reward_bounds(&self) -> (f64, f64) {
        let c = &self.config;
        (-c.max_speed - c.collision_penalty - 2.0 * c.action_cost, c.max_speed)
    }

    fn colliding(&self, x: f64, y: f64) -> bool {
        self.obstacles.iter().any(|o| {
            let (dx, dy) = (x - o.x, y - o.y);
            dx * dx + dy * dy <= o.radius * o.radius
        })
    }

    pub fn observe(&self) -> Vec<f64> {
        let s = self.state;
        let next = self
            .obstacles
            .iter()
            .filter(|o| o.x + o.radius > s.x)
            .min_by(|a, b| a.x.total_cmp(&b.x));
        let (dx, dy, r) = match next {
            Some(o) => ((o.x - s.x).min(LOOKAHEAD), o.y - s.y, o.radius),
            None => (LOOKAHEAD, 0.0, 0.0),
        };
        vec![s.y, s.vx, s.vy, dx, dy, r]
    }
}

impl Default for Corridor {
    fn default() -> Self {
        Self::new(CorridorConfig::default())
    }
}

impl Environment for Corridor {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        let c = self.config;
        let mut u = || unit_f64(&mut rng);
        self.obstacles = (0..c.obstacles)
            .map(|_| Obstacle {
                x: c.obstacle_x.0 + (c.obstacle_x.1 - c.obstacle_x.0) * u(),
                y: 0.7 * c.half_width * (2.0 * u() - 1.0),
                radius: c.obstacle_radius.0 + (c.obstacle_radius.1 - c.obstacle_radius.0) * u(),
            })
            .collect();
        self.obstacles.sort_by(|a, b| a.x.total_cmp(&b.x));
        self.state = CorridorState {
            y: 0.3 * c.half_width * (2.0 * u() - 1.0),
            ..CorridorState::default()
        };
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        check_action(&self.spec, action)?;
        let c = self.config;
        let ax = action[0].clamp(-1.0, 1.0);
        let ay = action[1].clamp(-1.0, 1.0);
        let s = self.state;
        let mut vx = (s.vx + (ax - c.drag * s.vx) * c.dt).clamp(-c.max_speed, c.max_speed);
        let mut vy = (s.vy + (ay - c.drag * s.vy) * c.dt).clamp(-c.max_speed, c.max_speed);
        let x = s.x + vx * c.dt;
        let y = s.y + vy * c.dt;
        let hit = self.colliding(x, y);
        if hit {
            vx *= c.collision_damping;
            vy *= c.collision_damping;
        }
        self.state = CorridorState { x, y, vx, vy };
        let penalty = if hit { c.collision_penalty } else { 0.0 };
        let reward = vx - penalty - c.action_cost * (ax * ax + ay * ay);
        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminal: libm::fabs(y) > c.half_width,
        })
    }
}
