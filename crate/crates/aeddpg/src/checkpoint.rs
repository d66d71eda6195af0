//! Versioned binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic  b"AEDDPGCK"        version u32
//! gamma f64  tau f64  max_grad_norm (u8 flag, f64)
//! bounds: dim u32, low f64 * dim, high f64 * dim
//! 4 nets (actor, critic, target actor, target critic):
//!     layers u32, sizes u32 * layers, hidden u8, output u8, params u64, f64 * params
//! 2 optimizers (actor, critic):
//!     lr beta1 beta2 epsilon f64, steps u64, len u64, m f64 * len, v f64 * len
//! rng states: count u32, then per entry
//!     name (len u32, utf8), seed [u8; 32], stream u64, word_pos u128
//! ```
//!
//! Floats are stored by bit pattern, so a load reproduces the saved state
//! exactly.

use std::path::Path;

use aeddpg_core::{ActionBounds, Activation, AdamConfig, Agent, DenseNet, OptimizerState, RngState};

use crate::error::{Error, Result};
use crate::shared::NamedRngStates;

pub const MAGIC: &[u8; 8] = b"AEDDPGCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub agent: Agent,
    pub rng_states: NamedRngStates,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits u32"));
    }

    fn net(&mut self, net: &DenseNet) {
        self.len(net.sizes().len());
        net.sizes().iter().for_each(|s| self.len(*s));
        self.u8(net.hidden_activation().tag());
        self.u8(net.output_activation().tag());
        self.u64(net.num_params() as u64);
        self.f64s(net.params());
    }

    fn optimizer(&mut self, opt: &OptimizerState) {
        let c = &opt.config;
        self.f64s(&[c.learning_rate, c.beta1, c.beta2, c.epsilon]);
        self.u64(opt.step_count);
        self.u64(opt.first_moment.len() as u64);
        self.f64s(&opt.first_moment);
        self.f64s(&opt.second_moment);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn count(&mut self, n: u64, elem: usize) -> Result<usize> {
        let n = usize::try_from(n).map_err(|_| corrupt("length overflow"))?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(corrupt(format!("length {n} exceeds remaining data at byte {}", self.pos)));
        }
        Ok(n)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn net(&mut self) -> Result<DenseNet> {
        let layers = self.u32()?;
        let layers = self.count(layers as u64, 4)?;
        let sizes = (0..layers).map(|_| self.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let hidden = Activation::from_tag(self.u8()?).ok_or_else(|| corrupt("unknown activation tag"))?;
        let output = Activation::from_tag(self.u8()?).ok_or_else(|| corrupt("unknown activation tag"))?;
        let n = self.u64()?;
        let n = self.count(n, 8)?;
        let params = self.f64s(n)?;
        let net = DenseNet::from_params(&sizes, output, params)?;
        if net.hidden_activation() != hidden {
            return Err(corrupt("hidden activation does not match this build"));
        }
        Ok(net)
    }

    fn optimizer(&mut self) -> Result<OptimizerState> {
        let config = AdamConfig {
            learning_rate: self.f64()?,
            beta1: self.f64()?,
            beta2: self.f64()?,
            epsilon: self.f64()?,
        };
        let step_count = self.u64()?;
        let n = self.u64()?;
        let n = self.count(n, 16)?;
        let mut opt = OptimizerState::new(n, config);
        opt.step_count = step_count;
        opt.first_moment = self.f64s(n)?;
        opt.second_moment = self.f64s(n)?;
        Ok(opt)
    }
}

pub fn encode(agent: &Agent, rng_states: &[(String, RngState)]) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.f64(agent.gamma);
    w.f64(agent.tau);
    w.u8(agent.max_grad_norm.is_some() as u8);
    w.f64(agent.max_grad_norm.unwrap_or(0.0));
    w.len(agent.bounds.dim());
    w.f64s(&agent.bounds.low);
    w.f64s(&agent.bounds.high);
    for net in [&agent.actor, &agent.critic, &agent.target_actor, &agent.target_critic] {
        w.net(net);
    }
    w.optimizer(&agent.actor_opt);
    w.optimizer(&agent.critic_opt);
    w.len(rng_states.len());
    for (name, st) in rng_states {
        w.len(name.len());
        w.0.extend_from_slice(name.as_bytes());
        w.0.extend_from_slice(&st.seed);
        w.u64(st.stream);
        w.0.extend_from_slice(&st.word_pos.to_le_bytes());
    }
    w.0
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version} (expected {VERSION})")));
    }
    let gamma = r.f64()?;
    let tau = r.f64()?;
    let has_clip = r.u8()? != 0;
    let clip = r.f64()?;
    let dim = r.u32()?;
    let dim = r.count(dim as u64, 16)?;
    let low = r.f64s(dim)?;
    let high = r.f64s(dim)?;
    let bounds = ActionBounds::new(low, high)?;
    let actor = r.net()?;
    let critic = r.net()?;
    let target_actor = r.net()?;
    let target_critic = r.net()?;
    if !target_actor.same_shape(&actor) || !target_critic.same_shape(&critic) {
        return Err(corrupt("target networks do not match their learned counterparts"));
    }
    let actor_opt = r.optimizer()?;
    let critic_opt = r.optimizer()?;
    if actor_opt.first_moment.len() != actor.num_params() || critic_opt.first_moment.len() != critic.num_params() {
        return Err(corrupt("optimizer state does not match network size"));
    }
    let n = r.u32()?;
    let n = r.count(n as u64, 60)?;
    let mut rng_states = Vec::with_capacity(n);
    for _ in 0..n {
        let len = r.u32()?;
        let len = r.count(len as u64, 1)?;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| corrupt("rng name is not utf-8"))?.to_string();
        let seed = r.array::<32>()?;
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.array()?);
        rng_states.push((name, RngState { seed, stream, word_pos }));
    }
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut agent = Agent::from_nets(
        actor,
        critic,
        bounds,
        &aeddpg_core::AgentConfig {
            actor_hidden: Vec::new(),
            critic_hidden: Vec::new(),
            actor_lr: actor_opt.config.learning_rate,
            critic_lr: critic_opt.config.learning_rate,
            gamma,
            tau,
            max_grad_norm: has_clip.then_some(clip),
        },
    )?;
    agent.target_actor = target_actor;
    agent.target_critic = target_critic;
    agent.actor_opt = actor_opt;
    agent.critic_opt = critic_opt;
    Ok(Checkpoint { agent, rng_states })
}

pub fn save(path: &Path, agent: &Agent, rng_states: &[(String, RngState)]) -> Result<()> {
    std::fs::write(path, encode(agent, rng_states)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use aeddpg_core::rng::seeded;
    use aeddpg_core::AgentConfig;

    fn agent() -> Agent {
        let cfg = AgentConfig {
            actor_hidden: vec![5],
            critic_hidden: vec![4, 3],
            max_grad_norm: Some(10.0),
            ..AgentConfig::default()
        };
        let bounds = ActionBounds::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap();
        let mut a = Agent::new(3, bounds, &cfg, &mut seeded(4)).unwrap();
        a.target_actor.params_mut()[0] = f64::from_bits(0x3ff0_0000_0000_0001);
        a.actor_opt.step_count = 17;
        a.critic_opt.second_moment[2] = 1e-300;
        a
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let a = agent();
        let rngs = vec![("learner".to_string(), RngState::capture(&seeded(9)))];
        let bytes = encode(&a, &rngs);
        let back = decode(&bytes).unwrap();
        assert_eq!(encode(&back.agent, &back.rng_states), bytes);
        assert_eq!(back.rng_states, rngs);
        assert_eq!(back.agent.target_actor.params(), a.target_actor.params());
        assert_eq!(back.agent.actor_opt.step_count, 17);
        assert_eq!(back.agent.max_grad_norm, Some(10.0));
    }

    #[test]
    fn damaged_input_is_rejected() {
        let bytes = encode(&agent(), &[]);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode(&magic).is_err());
        let mut version = bytes;
        version[8] = 2;
        assert!(decode(&version).unwrap_err().to_string().contains("version 2"));
    }
}
