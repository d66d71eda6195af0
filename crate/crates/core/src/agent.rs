//! Deterministic policy gradient actor-critic with soft-tracking targets.
//!
//! The critic sees the state and action concatenated at its input layer. The
//! actor's `tanh` output is scaled per dimension by `max(|low|, |high|)`, then
//! noise is added and the result is clipped to the action bounds.

use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::adam::{AdamConfig, OptimizerState};
use crate::error::{check_len, Error, Result};
use crate::net::{dot, Activation, BatchTrace, DenseNet};
use crate::replay::Transition;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    /// Rescale gradients whose L2 norm exceeds this value. Off when `None`.
    pub max_grad_norm: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            gamma: 0.99,
            tau: 5e-3,
            max_grad_norm: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(alloc::format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidArgument(alloc::format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        AdamConfig::with_lr(self.actor_lr).validate()?;
        AdamConfig::with_lr(self.critic_lr).validate()?;
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument(alloc::format!("max_grad_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        check_len("action bounds", low.len(), high.len())?;
        if low.is_empty() || low.iter().zip(&high).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidArgument(alloc::format!(
                "action bounds must satisfy low < high elementwise, got {low:?} / {high:?}"
            )));
        }
        Ok(Self { low, high })
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn scale(&self) -> impl Iterator<Item = f64> + '_ {
        self.low.iter().zip(&self.high).map(|(l, h)| l.abs().max(h.abs()))
    }

    pub fn range(&self) -> impl Iterator<Item = f64> + '_ {
        self.low.iter().zip(&self.high).map(|(l, h)| h - l)
    }

    pub fn clip(&self, action: &mut [f64]) {
        for ((a, l), h) in action.iter_mut().zip(&self.low).zip(&self.high) {
            *a = a.clamp(*l, *h);
        }
    }
}

/// Deterministic policy output `scale * actor(state)`, before noise.
pub fn policy(actor: &DenseNet, bounds: &ActionBounds, state: &[f64]) -> Result<Vec<f64>> {
    let mut out = actor.forward(state)?;
    check_len("actor output", bounds.dim(), out.len())?;
    for (o, s) in out.iter_mut().zip(bounds.scale()) {
        *o *= s;
    }
    Ok(out)
}

/// `clip(policy(state) + noise)`; without noise this is the evaluation action.
pub fn act(actor: &DenseNet, bounds: &ActionBounds, state: &[f64], noise: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut action = policy(actor, bounds, state)?;
    if let Some(noise) = noise {
        check_len("noise sample", action.len(), noise.len())?;
        for (a, n) in action.iter_mut().zip(noise) {
            *a += n;
        }
    }
    bounds.clip(&mut action);
    Ok(action)
}

/// A mini-batch stored as flat row-major arrays.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub state_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn with_capacity(state_dim: usize, action_dim: usize, n: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            states: Vec::with_capacity(n * state_dim),
            actions: Vec::with_capacity(n * action_dim),
            rewards: Vec::with_capacity(n),
            next_states: Vec::with_capacity(n * state_dim),
            terminals: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: &Transition) {
        self.states.extend_from_slice(&t.state);
        self.actions.extend_from_slice(&t.action);
        self.rewards.push(t.reward);
        self.next_states.extend_from_slice(&t.next_state);
        self.terminals.push(t.terminal);
    }

    pub fn from_transitions<'a, I: IntoIterator<Item = &'a Transition>>(state_dim: usize, action_dim: usize, it: I) -> Self {
        let mut b = Self::with_capacity(state_dim, action_dim, 0);
        for t in it {
            b.push(t);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_dim..(i + 1) * self.action_dim]
    }

    pub fn next_state(&self, i: usize) -> &[f64] {
        &self.next_states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        check_len("batch states", n * self.state_dim, self.states.len())?;
        check_len("batch actions", n * self.action_dim, self.actions.len())?;
        check_len("batch next states", n * self.state_dim, self.next_states.len())?;
        check_len("batch terminal flags", n, self.terminals.len())?;
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument("batch contains a non-finite reward".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub target_actor: DenseNet,
    pub target_critic: DenseNet,
    pub actor_opt: OptimizerState,
    pub critic_opt: OptimizerState,
    pub gamma: f64,
    pub tau: f64,
    pub bounds: ActionBounds,
    pub max_grad_norm: Option<f64>,
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(hidden.len() + 2);
    s.push(input);
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

fn clip_norm(grad: &mut [f64], max_norm: Option<f64>) {
    if let Some(max_norm) = max_norm {
        let norm = libm::sqrt(dot(grad, grad));
        if norm > max_norm {
            let s = max_norm / norm;
            grad.iter_mut().for_each(|g| *g *= s);
        }
    }
}

impl Agent {
    /// Randomly initialized actor and critic with targets synced to them.
    pub fn new<R: RngCore>(state_dim: usize, bounds: ActionBounds, config: &AgentConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let action_dim = bounds.dim();
        let actor = DenseNet::random(&layer_sizes(state_dim, &config.actor_hidden, action_dim), Activation::Tanh, rng)?;
        let critic = DenseNet::random(
            &layer_sizes(state_dim + action_dim, &config.critic_hidden, 1),
            Activation::Linear,
            rng,
        )?;
        Self::from_nets(actor, critic, bounds, config)
    }

    pub fn from_nets(actor: DenseNet, critic: DenseNet, bounds: ActionBounds, config: &AgentConfig) -> Result<Self> {
        config.validate()?;
        check_len("actor output", bounds.dim(), actor.output_dim())?;
        check_len("critic input", actor.input_dim() + bounds.dim(), critic.input_dim())?;
        check_len("critic output", 1, critic.output_dim())?;
        Ok(Self {
            actor_opt: OptimizerState::new(actor.num_params(), AdamConfig::with_lr(config.actor_lr)),
            critic_opt: OptimizerState::new(critic.num_params(), AdamConfig::with_lr(config.critic_lr)),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            gamma: config.gamma,
            tau: config.tau,
            bounds,
            max_grad_norm: config.max_grad_norm,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn act(&self, state: &[f64], noise: Option<&[f64]>) -> Result<Vec<f64>> {
        act(&self.actor, &self.bounds, state, noise)
    }

    fn critic_input(state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        x
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        batch.validate()?;
        check_len("batch state width", self.state_dim(), batch.state_dim)?;
        check_len("batch action width", self.action_dim(), batch.action_dim)
    }

    /// `y_i = r_i + gamma * (1 - terminal_i) * Q'(s'_i, mu'(s'_i))`.
    pub fn td_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        if self.gamma == 0.0 || batch.terminals.iter().all(|t| *t) {
            return Ok(batch.rewards.clone());
        }
        let n = batch.len();
        let next_actions = self.scaled_actions(&self.target_actor.trace_batch(&batch.next_states, n)?);
        let x = self.critic_inputs(&batch.next_states, &next_actions, n);
        let q = self.target_critic.trace_batch(&x, n)?;
        Ok((0..n)
            .map(|i| {
                let r = batch.rewards[i];
                if batch.terminals[i] {
                    r
                } else {
                    r + self.gamma * q.output()[i]
                }
            })
            .collect())
    }

    fn scaled_actions(&self, actor_trace: &BatchTrace) -> Vec<f64> {
        let ad = self.action_dim();
        let mut a = actor_trace.output().to_vec();
        for row in a.chunks_exact_mut(ad) {
            for (v, sc) in row.iter_mut().zip(self.bounds.scale()) {
                *v *= sc;
            }
        }
        a
    }

    fn critic_inputs(&self, states: &[f64], actions: &[f64], n: usize) -> Vec<f64> {
        let (sd, ad) = (self.state_dim(), self.action_dim());
        let mut x = Vec::with_capacity(n * (sd + ad));
        for (s, a) in states.chunks_exact(sd).zip(actions.chunks_exact(ad)) {
            x.extend_from_slice(s);
            x.extend_from_slice(a);
        }
        x
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(&Self::critic_input(state, action))?[0])
    }

    /// Mean squared TD error and its gradient w.r.t. the critic parameters.
    pub fn critic_loss_and_grad(&self, batch: &Batch, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        check_len("TD targets", batch.len(), targets.len())?;
        let n = batch.len();
        let trace = self.critic.trace_batch(&self.critic_inputs(&batch.states, &batch.actions, n), n)?;
        let mut loss = 0.0;
        let out_grads: Vec<f64> = targets
            .iter()
            .zip(trace.output())
            .map(|(y, q)| {
                let err = y - q;
                loss += err * err;
                -2.0 * err / n as f64
            })
            .collect();
        let mut grad = vec![0.0; self.critic.num_params()];
        self.critic.backprop_batch(&trace, &out_grads, Some(&mut grad))?;
        Ok((loss / n as f64, grad))
    }

    /// One Adam step on the critic; returns the loss before the step.
    pub fn critic_update(&mut self, batch: &Batch) -> Result<f64> {
        let targets = self.td_targets(batch)?;
        let (loss, mut grad) = self.critic_loss_and_grad(batch, &targets)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence("critic loss"));
        }
        clip_norm(&mut grad, self.max_grad_norm);
        self.critic_opt.step(self.critic.params_mut(), &grad)?;
        Ok(loss)
    }

    /// Objective `(1/n) sum Q(s_i, policy(s_i))` and the gradient of its
    /// negation w.r.t. the actor parameters.
    pub fn actor_objective_and_grad(&self, batch: &Batch) -> Result<(f64, Vec<f64>)> {
        let (sd, ad) = (self.state_dim(), self.action_dim());
        self.actor_grad_batched(batch, |states, actions, n| {
            let trace = self.critic.trace_batch(&self.critic_inputs(states, actions, n), n)?;
            let dq_dx = self.critic.backprop_batch(&trace, &vec![1.0; n], None)?;
            let dq_da = dq_dx.chunks_exact(sd + ad).flat_map(|row| row[sd..].iter().copied()).collect();
            Ok((trace.output().to_vec(), dq_da))
        })
    }

    /// Same as [`Agent::actor_objective_and_grad`] against an arbitrary critic
    /// given as `(state, action) -> (Q, dQ/da)`.
    pub fn actor_objective_and_grad_with<F>(&self, batch: &Batch, mut critic: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnMut(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let (sd, ad) = (self.state_dim(), self.action_dim());
        self.actor_grad_batched(batch, |states, actions, n| {
            let mut q = Vec::with_capacity(n);
            let mut dq_da = Vec::with_capacity(n * ad);
            for (s, a) in states.chunks_exact(sd).zip(actions.chunks_exact(ad)) {
                let (qi, gi) = critic(s, a)?;
                check_len("critic action gradient", ad, gi.len())?;
                q.push(qi);
                dq_da.extend_from_slice(&gi);
            }
            Ok((q, dq_da))
        })
    }

    /// `critic(states, actions, n)` returns `n` values and `n` row-major
    /// action gradients.
    fn actor_grad_batched<F>(&self, batch: &Batch, critic: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnOnce(&[f64], &[f64], usize) -> Result<(Vec<f64>, Vec<f64>)>,
    {
        self.check_batch(batch)?;
        let n = batch.len();
        let trace = self.actor.trace_batch(&batch.states, n)?;
        let actions = self.scaled_actions(&trace);
        let (q, dq_da) = critic(&batch.states, &actions, n)?;
        check_len("critic values", n, q.len())?;
        check_len("critic action gradients", n * self.action_dim(), dq_da.len())?;
        let scale: Vec<f64> = self.bounds.scale().collect();
        let out_grads: Vec<f64> = dq_da
            .iter()
            .enumerate()
            .map(|(k, g)| -g * scale[k % scale.len()] / n as f64)
            .collect();
        let mut grad = vec![0.0; self.actor.num_params()];
        self.actor.backprop_batch(&trace, &out_grads, Some(&mut grad))?;
        Ok((q.iter().sum::<f64>() / n as f64, grad))
    }

    /// One Adam ascent step on the actor; returns the objective before the step.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<f64> {
        let (objective, mut grad) = self.actor_objective_and_grad(batch)?;
        if !objective.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence("actor objective"));
        }
        clip_norm(&mut grad, self.max_grad_norm);
        self.actor_opt.step(self.actor.params_mut(), &grad)?;
        Ok(objective)
    }

    /// `target <- tau * learned + (1 - tau) * target` for both pairs.
    ///
    /// Evaluated as `target + tau * (learned - target)` so that synced targets
    /// stay bit-identical; `tau = 1` copies.
    pub fn soft_update(&mut self) {
        let tau = self.tau;
        let track = |target: &mut DenseNet, learned: &DenseNet| {
            if tau == 1.0 {
                target.params_mut().copy_from_slice(learned.params());
                return;
            }
            for (t, l) in target.params_mut().iter_mut().zip(learned.params()) {
                *t += tau * (l - *t);
            }
        };
        track(&mut self.target_actor, &self.actor);
        track(&mut self.target_critic, &self.critic);
    }

    pub fn hard_sync(&mut self) {
        self.target_actor.params_mut().copy_from_slice(self.actor.params());
        self.target_critic.params_mut().copy_from_slice(self.critic.params());
    }
}
