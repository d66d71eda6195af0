use std::sync::atomic::{AtomicU64, Ordering};

use aeddpg::checkpoint;
use aeddpg::envs::BoxedEnv;
use aeddpg::metrics::{read_metrics, EpisodeRecord, Record, UpdateRecord};
use aeddpg::runner::{
    initial_agent, learner_seed, noise_seed, run, run_experiment, run_with_envs, Mode, RunConfig, CHECKPOINT_FILE,
    METRICS_FILE,
};
use aeddpg::Error;
use aeddpg_core::rng::seeded;
use aeddpg_core::{
    act, derive_seed, AgentConfig, EnvSpec, EpisodeCache, Environment, NoiseProcess, Pendulum, ReplayStore,
    StepResult, Transition,
};

fn small(mode: Mode, workers: usize, steps: u64) -> RunConfig {
    RunConfig {
        agent: AgentConfig {
            actor_hidden: vec![16],
            critic_hidden: vec![16],
            ..AgentConfig::default()
        },
        memory_capacity: 5_000,
        hmemory_capacity: 1_000,
        batch_size: 16,
        warmup_steps: 100,
        num_workers: workers,
        total_env_steps: steps,
        mode,
        seed: 11,
        ..RunConfig::default()
    }
}

fn episodes(records: &[Record]) -> Vec<&EpisodeRecord> {
    records
        .iter()
        .filter_map(|r| match r {
            Record::Episode(e) => Some(e),
            _ => None,
        })
        .collect()
}

fn updates(records: &[Record]) -> Vec<&UpdateRecord> {
    records
        .iter()
        .filter_map(|r| match r {
            Record::Update(u) => Some(u),
            _ => None,
        })
        .collect()
}

/// One worker with one update per step and immediate publishing reproduces a
/// plain synchronous DDPG loop written directly against the core types.
#[test]
fn single_worker_strict_alternation_is_classical_ddpg() {
    let mut cfg = small(Mode::Synchronous, 1, 900);
    cfg.env.max_episode_steps = Some(150);
    let mut records = Vec::new();
    let report = run(&cfg, &mut records).unwrap();

    let mut agent = initial_agent(&cfg).unwrap();
    let bounds = agent.bounds.clone();
    let mut env = Pendulum::new(aeddpg_core::PendulumConfig {
        max_episode_steps: 150,
        ..Default::default()
    });
    let mut store = ReplayStore::new(3, 1, cfg.memory_capacity, cfg.hmemory_capacity).unwrap();
    let mut cache = EpisodeCache::new(0);
    let mut rng = seeded(learner_seed(cfg.seed));
    let mut noise = NoiseProcess::new(cfg.noise.process_config(&bounds), noise_seed(cfg.seed, 0)).unwrap();
    let mut episode = 0;
    let mut obs = env.reset(derive_seed(cfg.seed, 0, episode));
    let mut len = 0;
    let mut returns = Vec::new();
    let mut losses = Vec::new();
    for t in 1..=cfg.total_env_steps {
        let a = act(&agent.actor, &bounds, &obs, Some(&noise.next_sample())).unwrap();
        let sr = env.step(&a).unwrap();
        len += 1;
        store
            .store_step(
                &mut cache,
                Transition {
                    state: obs,
                    action: a,
                    reward: sr.reward,
                    next_state: sr.observation.clone(),
                    terminal: sr.terminal,
                },
            )
            .unwrap();
        obs = sr.observation;
        if len == 150 {
            returns.push(store.finalize_episode(&mut cache).unwrap().episode_return);
            episode += 1;
            obs = env.reset(derive_seed(cfg.seed, 0, episode));
            noise.reset();
            len = 0;
        }
        if t > cfg.warmup_steps {
            let batch = store.sample_batch(cfg.batch_size, cfg.rho, &mut rng).unwrap();
            losses.push(agent.critic_update(&batch).unwrap());
            agent.actor_update(&batch).unwrap();
            agent.soft_update();
        }
    }

    let got: Vec<f64> = episodes(&records).iter().map(|e| e.episode_reward).collect();
    assert_eq!(got, returns);
    let got: Vec<f64> = updates(&records).iter().map(|u| u.critic_loss.unwrap()).collect();
    assert_eq!(got, losses);
    assert_eq!(report.agent.actor.params(), agent.actor.params());
    assert_eq!(report.agent.target_critic.params(), agent.target_critic.params());
    assert_eq!(report.updates, cfg.total_env_steps - cfg.warmup_steps);
}

#[test]
fn collection_without_learning_matches_a_fixed_policy_rollout() {
    let mut cfg = small(Mode::Threaded, 1, 600);
    cfg.learn = false;
    let mut records = Vec::new();
    let report = run(&cfg, &mut records).unwrap();
    assert_eq!(report.updates, 0);
    assert_eq!(report.snapshot_version, 0);

    let agent = initial_agent(&cfg).unwrap();
    let mut env = Pendulum::default();
    let mut noise = NoiseProcess::new(cfg.noise.process_config(&agent.bounds), noise_seed(cfg.seed, 0)).unwrap();
    for (k, e) in episodes(&records).iter().enumerate() {
        assert_eq!(e.episode_seed, derive_seed(cfg.seed, 0, k as u64));
        let mut obs = env.reset(e.episode_seed);
        noise.reset();
        let mut ret = 0.0;
        for _ in 0..200 {
            let a = agent.act(&obs, Some(&noise.next_sample())).unwrap();
            let sr = env.step(&a).unwrap();
            ret += sr.reward;
            obs = sr.observation;
        }
        assert_eq!(e.episode_reward, ret, "episode {k}");
    }
    assert_eq!(episodes(&records).len(), 3);
}

#[test]
fn episode_seeds_of_different_workers_are_disjoint() {
    let mut cfg = small(Mode::Synchronous, 2, 4000);
    cfg.learn = false;
    let mut records = Vec::new();
    run(&cfg, &mut records).unwrap();
    let eps = episodes(&records);
    let seeds = |w: u32| -> std::collections::BTreeSet<u64> {
        eps.iter().filter(|e| e.worker_id == w).map(|e| e.episode_seed).collect()
    };
    let (a, b) = (seeds(0), seeds(1));
    assert_eq!(a.len(), 10);
    assert!(a.is_disjoint(&b));
}

#[test]
fn store_counters_match_worker_logs() {
    let mut cfg = small(Mode::Threaded, 4, 4 * 50 * 200);
    cfg.update_ratio = 0.02;
    cfg.worker_lead = Some(200);
    let mut records = Vec::new();
    let report = run(&cfg, &mut records).unwrap();
    let worker_steps: u64 = report.workers.iter().map(|w| w.steps).sum();
    assert_eq!(report.env_steps, cfg.total_env_steps);
    assert_eq!(worker_steps, cfg.total_env_steps);
    assert_eq!(report.replay.memory_inserts, worker_steps);
    let eps = episodes(&records);
    let admitted: u64 = eps.iter().filter(|e| e.admitted).map(|e| e.episode_len as u64).sum();
    assert_eq!(report.replay.hmemory_inserts, admitted);
    assert_eq!(report.replay.episodes_finalized, eps.len() as u64);
    let best = eps.iter().map(|e| e.episode_reward).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(report.replay.r_max, best);
    // Every admitted episode held the record at the time it was admitted.
    for e in &eps {
        assert_eq!(e.admitted, e.r_max == Some(e.episode_reward));
    }
}

#[test]
fn learner_keeps_pace_with_workers() {
    let mut cfg = small(Mode::Threaded, 4, 3_000);
    cfg.worker_lead = Some(32);
    let mut records = Vec::new();
    let report = run(&cfg, &mut records).unwrap();
    let due = cfg.updates_due(report.env_steps);
    let slack = 32 + cfg.num_workers as u64;
    assert!(report.updates <= due, "{} > {due}", report.updates);
    assert!(due - report.updates <= slack, "lag {} over {slack}", due - report.updates);
    assert!(report.max_pacing_gap <= slack, "gap {}", report.max_pacing_gap);
    let mut last = 0;
    for u in updates(&records) {
        assert!(u.update_index > last);
        last = u.update_index;
    }
}

#[test]
fn no_updates_before_warmup() {
    let mut cfg = small(Mode::Threaded, 2, 90);
    cfg.warmup_steps = 100;
    let report = run(&cfg, &mut Vec::new()).unwrap();
    assert_eq!(report.updates, 0);
    assert_eq!(report.env_steps, 90);
}

#[test]
fn full_tracking_and_immediate_publishing_act_with_the_newest_actor() {
    let mut cfg = small(Mode::Synchronous, 1, 800);
    cfg.agent.tau = 1.0;
    cfg.env.max_episode_steps = Some(50);
    let mut records = Vec::new();
    let report = run(&cfg, &mut records).unwrap();
    assert_eq!(report.snapshot_version, report.updates);
    assert_eq!(report.agent.target_actor.params(), report.agent.actor.params());
    for e in episodes(&records) {
        assert_eq!(e.snapshot_version, cfg.updates_due(e.env_steps_total - 1));
    }
}

#[test]
fn zero_budget_writes_header_and_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Mode::Threaded, 2, 0);
    let report = run_experiment(&cfg, "empty", dir.path()).unwrap();
    assert_eq!(report.env_steps, 0);
    let (header, records) = read_metrics(&dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(header.variant, "empty");
    assert!(records.is_empty());
    let ck = checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(ck.agent.actor.params(), initial_agent(&cfg).unwrap().actor.params());
    assert_eq!(ck.agent.critic_opt.step_count, 0);
}

#[test]
fn synchronous_runs_are_bit_identical() {
    let cfg = small(Mode::Synchronous, 1, 700);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, "x", a.path()).unwrap();
    run_experiment(&cfg, "x", b.path()).unwrap();
    for f in [METRICS_FILE, CHECKPOINT_FILE] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn checkpoint_reloads_the_final_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Mode::Threaded, 2, 500);
    let report = run_experiment(&cfg, "x", dir.path()).unwrap();
    let path = dir.path().join(CHECKPOINT_FILE);
    let ck = checkpoint::load(&path).unwrap();
    assert_eq!(checkpoint::encode(&ck.agent, &ck.rng_states), std::fs::read(&path).unwrap());
    assert_eq!(ck.agent.actor.params(), report.agent.actor.params());
    assert_eq!(ck.agent.actor_opt.step_count, report.agent.actor_opt.step_count);
    let names: Vec<&str> = ck.rng_states.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["learner", "noise/0", "noise/1"]);
    // The restored learner generator continues where the run left off.
    let learner = ck.rng_states[0].1.restore();
    assert_eq!(aeddpg_core::RngState::capture(&learner), report.rng_states[0].1);
}

/// Pendulum that fails every `period`-th step.
struct Flaky {
    inner: Pendulum,
    period: u64,
    count: AtomicU64,
}

impl Environment for Flaky {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed)
    }
    fn step(&mut self, action: &[f64]) -> aeddpg_core::Result<StepResult> {
        if self.count.fetch_add(1, Ordering::Relaxed) % self.period == self.period - 1 {
            return Err(aeddpg_core::Error::InvalidArgument("simulator fault".into()));
        }
        self.inner.step(action)
    }
}

#[test]
fn environment_faults_abandon_the_episode_and_continue() {
    let mut cfg = small(Mode::Synchronous, 1, 1000);
    cfg.learn = false;
    let make = |_| -> BoxedEnv {
        Box::new(Flaky {
            inner: Pendulum::default(),
            period: 150,
            count: AtomicU64::new(0),
        })
    };
    let mut records = Vec::new();
    let report = run_with_envs(&cfg, &make, &mut records).unwrap();
    assert_eq!(report.env_steps, 1000);
    assert!(report.workers[0].faults >= 6);
    // Every fault lands before an episode reaches its horizon.
    assert!(episodes(&records).is_empty());
    assert_eq!(report.replay.episodes_finalized, 0);
    assert_eq!(report.replay.memory_inserts, 1000);
}

/// Pendulum with rewards large enough to overflow the critic loss.
struct Blowup(Pendulum);

impl Environment for Blowup {
    fn spec(&self) -> &EnvSpec {
        self.0.spec()
    }
    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.0.reset(seed)
    }
    fn step(&mut self, action: &[f64]) -> aeddpg_core::Result<StepResult> {
        let mut r = self.0.step(action)?;
        r.reward = 1e300;
        Ok(r)
    }
}

#[test]
fn consecutive_aborts_halt_the_run() {
    let cfg = small(Mode::Synchronous, 1, 1000);
    let make = |_| -> BoxedEnv { Box::new(Blowup(Pendulum::default())) };
    let mut records = Vec::new();
    let err = run_with_envs(&cfg, &make, &mut records).unwrap_err();
    assert!(matches!(err, Error::Halted(_)), "{err}");
    let ups = updates(&records);
    assert_eq!(ups.len(), 2);
    assert!(ups.iter().all(|u| u.critic_loss.is_none()));
}

#[test]
fn invalid_configs_fail_before_work_starts() {
    let bad = [
        RunConfig {
            num_workers: 0,
            ..RunConfig::default()
        },
        RunConfig {
            warmup_steps: 10,
            ..RunConfig::default()
        },
        RunConfig {
            rho: 1.5,
            ..RunConfig::default()
        },
        RunConfig {
            hmemory_capacity: 200_000,
            ..RunConfig::default()
        },
    ];
    for cfg in bad {
        assert!(matches!(run(&cfg, &mut Vec::new()), Err(Error::Invalid(_))));
    }
}
