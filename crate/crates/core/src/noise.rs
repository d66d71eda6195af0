//! Action-space exploration noise.
//!
//! The random-walk process integrates white noise, `y_t = y_{t-1} + sigma x_t`,
//! which gives a `(1/f)^2` power spectrum: consecutive values are strongly
//! correlated while independently seeded instances are not. Gaussian and
//! Ornstein-Uhlenbeck processes are provided as baselines.

use alloc::vec;
use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::rng::{seeded, Rng, RngState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    RandomWalk,
    Gaussian,
    OrnsteinUhlenbeck { theta: f64 },
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::RandomWalk => "random_walk",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::OrnsteinUhlenbeck { .. } => "ou",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    /// Per-dimension step scale.
    pub sigma: Vec<f64>,
    /// Per-dimension magnitude cap on the returned sample.
    pub clip: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct NoiseProcess {
    config: NoiseConfig,
    state: Vec<f64>,
    rng: Rng,
}

impl NoiseProcess {
    pub fn new(config: NoiseConfig, seed: u64) -> Result<Self> {
        Self::with_rng(config, seeded(seed))
    }

    pub fn with_rng(config: NoiseConfig, rng: Rng) -> Result<Self> {
        let dim = config.sigma.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("noise dimension must be positive".into()));
        }
        if config.sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument("noise sigma must be finite and non-negative".into()));
        }
        if let Some(clip) = &config.clip {
            check_len("noise clip", dim, clip.len())?;
            if clip.iter().any(|c| !(*c > 0.0)) {
                return Err(Error::InvalidArgument("noise clip must be positive".into()));
            }
        }
        if let NoiseKind::OrnsteinUhlenbeck { theta } = config.kind {
            if !(theta > 0.0) {
                return Err(Error::InvalidArgument("OU theta must be positive".into()));
            }
        }
        Ok(Self {
            config,
            state: vec![0.0; dim],
            rng,
        })
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Internal value before clipping (random walk and OU only).
    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, y: &[f64]) -> Result<()> {
        check_len("noise state", self.state.len(), y.len())?;
        self.state.copy_from_slice(y);
        Ok(())
    }

    pub fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng)
    }

    /// Zeroes the internal value; the generator position is kept.
    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|y| *y = 0.0);
    }

    pub fn draw_unit(&mut self) -> Vec<f64> {
        (0..self.state.len()).map(|_| StandardNormal.sample(&mut self.rng)).collect()
    }

    pub fn next_sample(&mut self) -> Vec<f64> {
        let draws = self.draw_unit();
        self.advance(&draws).expect("draws sized to dim")
    }

    /// Advances the process with caller-supplied unit draws `x_t`.
    pub fn advance(&mut self, draws: &[f64]) -> Result<Vec<f64>> {
        check_len("unit draws", self.state.len(), draws.len())?;
        let sigma = &self.config.sigma;
        let mut out = match self.config.kind {
            NoiseKind::RandomWalk => {
                for ((y, x), s) in self.state.iter_mut().zip(draws).zip(sigma) {
                    *y += s * x;
                }
                self.state.clone()
            }
            NoiseKind::OrnsteinUhlenbeck { theta } => {
                for ((y, x), s) in self.state.iter_mut().zip(draws).zip(sigma) {
                    *y += theta * (0.0 - *y) + s * x;
                }
                self.state.clone()
            }
            NoiseKind::Gaussian => draws.iter().zip(sigma).map(|(x, s)| s * x).collect(),
        };
        if let Some(clip) = &self.config.clip {
            for (v, c) in out.iter_mut().zip(clip) {
                *v = v.clamp(-c, *c);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn process(kind: NoiseKind, sigma: f64, dim: usize, seed: u64) -> NoiseProcess {
        NoiseProcess::new(
            NoiseConfig {
                kind,
                sigma: vec![sigma; dim],
                clip: None,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn random_walk_accumulates_draws() {
        let mut p = process(NoiseKind::RandomWalk, 1.0, 1, 0);
        let out: Vec<f64> = [0.5, -0.2, 0.1].iter().map(|x| p.advance(&[*x]).unwrap()[0]).collect();
        let want = [0.5, 0.3, 0.4];
        for (a, b) in out.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_sigma_gaussian_is_silent() {
        let mut p = process(NoiseKind::Gaussian, 0.0, 3, 1);
        for _ in 0..10 {
            assert!(p.next_sample().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn ou_full_reversion_in_one_step() {
        let mut p = process(NoiseKind::OrnsteinUhlenbeck { theta: 1.0 }, 0.0, 1, 2);
        p.set_state(&[2.0]).unwrap();
        assert_eq!(p.next_sample(), vec![0.0]);
    }

    #[test]
    fn reset_restarts_from_zero() {
        let mut p = process(NoiseKind::RandomWalk, 0.3, 2, 3);
        for _ in 0..5 {
            p.next_sample();
        }
        p.reset();
        p.reset();
        assert_eq!(p.state(), &[0.0, 0.0]);
        let mut twin = p.clone();
        let g = twin.draw_unit();
        let first = p.next_sample();
        assert_eq!(first, vec![0.3 * g[0], 0.3 * g[1]]);
    }

    #[test]
    fn equal_seeds_and_resets_give_equal_streams() {
        let mut a = process(NoiseKind::RandomWalk, 0.1, 2, 77);
        let mut b = process(NoiseKind::RandomWalk, 0.1, 2, 77);
        for t in 0..300 {
            if t % 50 == 0 {
                a.reset();
                b.reset();
            }
            assert_eq!(a.next_sample(), b.next_sample());
        }
    }

    #[test]
    fn clip_caps_output_not_state() {
        let mut p = NoiseProcess::new(
            NoiseConfig {
                kind: NoiseKind::RandomWalk,
                sigma: vec![1.0],
                clip: Some(vec![0.5]),
            },
            0,
        )
        .unwrap();
        assert_eq!(p.advance(&[2.0]).unwrap(), vec![0.5]);
        assert_eq!(p.state(), &[2.0]);
        assert_eq!(p.advance(&[-1.75]).unwrap(), vec![0.25]);
    }

    #[test]
    fn rejects_invalid_settings() {
        let bad = |kind, sigma: Vec<f64>, clip| NoiseProcess::new(NoiseConfig { kind, sigma, clip }, 0).is_err();
        assert!(bad(NoiseKind::Gaussian, vec![], None));
        assert!(bad(NoiseKind::Gaussian, vec![-1.0], None));
        assert!(bad(NoiseKind::OrnsteinUhlenbeck { theta: 0.0 }, vec![1.0], None));
        assert!(bad(NoiseKind::RandomWalk, vec![1.0], Some(vec![1.0, 1.0])));
    }
}
