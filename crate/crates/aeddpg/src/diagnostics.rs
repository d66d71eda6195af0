//! Self-checks exposed on the command line.

use aeddpg_core::rng::seeded;
use aeddpg_core::{
    max_relative_error, ActionBounds, Activation, Agent, AgentConfig, Batch, DenseNet, NoiseConfig, NoiseKind,
    NoiseProcess, Result as CoreResult, Transition,
};
use rand_core::RngCore;

use crate::error::Result;
use crate::spectral::psd_slope;

pub const FD_STEP: f64 = 1e-5;

/// Worst scale-relative error between backpropagation and central
/// differences, per gradient kind, over `trials` random small networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub trials: usize,
    pub network: f64,
    pub critic: f64,
    pub actor: f64,
}

impl GradReport {
    pub fn worst(&self) -> f64 {
        self.network.max(self.critic).max(self.actor)
    }
}

fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
}

fn fd<F: FnMut(&[f64]) -> f64>(params: &[f64], mut f: F) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + FD_STEP;
            let plus = f(&p);
            p[i] = orig - FD_STEP;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

fn random_batch(rng: &mut impl RngCore, sd: usize, ad: usize, n: usize) -> Batch {
    let mut vec = |k: usize, s: f64| (0..k).map(|_| uniform(rng, -s, s)).collect::<Vec<_>>();
    let ts: Vec<Transition> = (0..n)
        .map(|i| Transition {
            state: vec(sd, 1.0),
            action: vec(ad, 0.9),
            reward: vec(1, 2.0)[0],
            next_state: vec(sd, 1.0),
            terminal: i % 3 == 0,
        })
        .collect();
    Batch::from_transitions(sd, ad, &ts)
}

pub fn grad_check(trials: usize, seed: u64) -> CoreResult<GradReport> {
    let mut rng = seeded(seed);
    let mut report = GradReport {
        trials,
        network: 0.0,
        critic: 0.0,
        actor: 0.0,
    };
    let (sd, ad) = (3, 2);
    let cfg = AgentConfig {
        actor_hidden: vec![8, 8],
        critic_hidden: vec![8, 8],
        ..AgentConfig::default()
    };
    for _ in 0..trials {
        let net = DenseNet::random(&[sd, 8, 8, ad], Activation::Tanh, &mut rng)?;
        let x: Vec<f64> = (0..sd).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let g: Vec<f64> = (0..ad).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let exact = net.backward(&x, &g)?;
        let approx = net.finite_diff_grad(&x, &g, FD_STEP)?;
        report.network = report.network.max(max_relative_error(&exact.params, &approx));

        let bounds = ActionBounds::new(vec![-1.0; ad], vec![1.0; ad])?;
        let mut agent = Agent::new(sd, bounds, &cfg, &mut rng)?;
        let batch = random_batch(&mut rng, sd, ad, 8);
        let targets = agent.td_targets(&batch)?;
        let (_, exact) = agent.critic_loss_and_grad(&batch, &targets)?;
        let mut probe = agent.clone();
        let approx = fd(agent.critic.params(), |p| {
            probe.critic.params_mut().copy_from_slice(p);
            probe.critic_loss_and_grad(&batch, &targets).expect("shapes checked").0
        });
        report.critic = report.critic.max(max_relative_error(&exact, &approx));

        let (_, exact) = agent.actor_objective_and_grad(&batch)?;
        let approx = fd(&agent.actor.params().to_vec(), |p| {
            agent.actor.params_mut().copy_from_slice(p);
            -agent.actor_objective_and_grad(&batch).expect("shapes checked").0
        });
        report.actor = report.actor.max(max_relative_error(&exact, &approx));
    }
    Ok(report)
}

/// `psd_slope` of `samples` draws from a unit-scale, unclipped process.
pub fn spectral_check(kind: NoiseKind, samples: usize, seed: u64) -> Result<f64> {
    let mut p = NoiseProcess::new(
        NoiseConfig {
            kind,
            sigma: vec![1.0],
            clip: None,
        },
        seed,
    )?;
    let xs: Vec<f64> = (0..samples).map(|_| p.next_sample()[0]).collect();
    psd_slope(&xs)
}
