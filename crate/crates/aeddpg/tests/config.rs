use aeddpg::config::{parse_config, ExperimentConfig, NoiseName, Origin, Preset, KEYS};
use aeddpg::Error;
use proptest::prelude::*;

#[test]
fn defaults_resolve_from_empty_input() {
    let r = parse_config("", &[]).unwrap();
    assert_eq!(r.config, ExperimentConfig::default());
    assert!(KEYS.iter().all(|(k, _)| r.origin(k) == Some(Origin::Default)));
}

#[test]
fn flags_override_the_file_and_origins_are_tracked() {
    let file = "# comment\nagent.tau = 0.01\nreplay.rho=0.3  # trailing\n";
    let r = parse_config(file, &["replay.rho=0.2".into()]).unwrap();
    assert_eq!(r.config.tau, 0.01);
    assert_eq!(r.config.rho, 0.2);
    assert_eq!(r.origin("agent.tau"), Some(Origin::File));
    assert_eq!(r.origin("replay.rho"), Some(Origin::Flag));
    assert!(r.describe().contains("replay.rho = 0.2  # flag"));
}

#[test]
fn file_errors_carry_line_numbers() {
    let err = parse_config("agent.tau = 0.01\nagent.gamma = lots\n", &[]).unwrap_err();
    match err {
        Error::Config { line, message } => {
            assert_eq!(line, 2);
            assert!(message.contains("agent.gamma"), "{message}");
        }
        other => panic!("unexpected {other}"),
    }
    assert!(matches!(parse_config("bogus = 1", &[]), Err(Error::Config { line: 1, .. })));
    assert!(matches!(parse_config("no equals sign", &[]), Err(Error::Config { line: 1, .. })));
    assert!(matches!(parse_config("", &["bogus=1".into()]), Err(Error::Invalid(_))));
}

#[test]
fn cross_field_violations_are_rejected() {
    for bad in [
        "replay.rho = 1.5",
        "replay.hmemory_capacity = 200000",
        "run.workers = 0",
        "agent.tau = 0",
        "agent.batch_size = 0",
    ] {
        assert!(parse_config(bad, &[]).is_err(), "{bad}");
    }
}

#[test]
fn vanilla_preset_forces_its_fields() {
    let r = parse_config("preset = vanilla_ddpg\nrun.workers = 8\n", &[]).unwrap();
    assert_eq!(r.config.workers, 1);
    assert_eq!(r.config.rho, 0.0);
    assert_eq!(r.config.noise_kind, NoiseName::Ou);
    assert_eq!(r.origin("run.workers"), Some(Origin::Preset));
}

#[test]
fn l2r_profile_changes_base_values_only() {
    let r = parse_config("profile = paper-l2r\nagent.batch_size = 32\n", &[]).unwrap();
    assert_eq!(r.config.batch_size, 32);
    assert_eq!(r.config.gamma, 0.99);
    assert_eq!(r.config.tau, 0.001);
    assert_eq!(r.config.memory_capacity, 1_000_000);
    assert_eq!(r.origin("agent.tau"), Some(Origin::Profile));
}

fn is_the_only_difference(a: &ExperimentConfig, b: &ExperimentConfig, key: &str) -> bool {
    KEYS.iter().all(|(k, _)| *k == key || a.get(k) == b.get(k))
}

#[test]
fn ablation_variants_differ_only_in_the_ablated_field() {
    let noise = ExperimentConfig {
        preset: Preset::AblationNoise,
        ..Default::default()
    };
    let v = noise.variants();
    let names: Vec<&str> = v.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["random_walk", "gaussian", "ou"]);
    for (_, c) in &v {
        assert!(is_the_only_difference(c, &v[0].1, "noise.kind"));
    }
    let replay = ExperimentConfig {
        preset: Preset::AblationReplay,
        ..Default::default()
    };
    let v = replay.variants();
    assert_eq!(v[1].1.rho, 0.0);
    assert!(is_the_only_difference(&v[0].1, &v[1].1, "replay.rho"));
}

#[test]
fn every_key_round_trips_through_get_and_set() {
    let c = ExperimentConfig::default();
    for (k, _) in KEYS {
        let mut d = c.clone();
        d.set(k, &c.get(k).unwrap()).unwrap();
        assert_eq!(d, c, "{k}");
    }
}

fn hidden() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..300, 0..4)
}

proptest! {
    #[test]
    fn canonical_text_reparses_to_the_same_config(
        tau in 1e-6f64..1.0,
        gamma in 0.0f64..1.0,
        lr in 1e-7f64..1e-1,
        rho in 0.0f64..=1.0,
        workers in 1usize..64,
        seed in any::<u64>(),
        ah in hidden(),
        ch in hidden(),
        clip in prop::option::of(0.01f64..2.0),
        kind in prop::sample::select(vec!["random_walk", "gaussian", "ou"]),
        lead in prop::option::of(0u64..10_000),
        target in prop::option::of(-2000.0f64..0.0),
    ) {
        let mut c = ExperimentConfig { tau, gamma, actor_lr: lr, rho, workers, seed, ..Default::default() };
        c.actor_hidden = ah;
        c.critic_hidden = ch;
        c.noise_clip = clip;
        c.worker_lead = lead;
        c.target_return = target;
        c.set("noise.kind", kind).unwrap();
        let r = parse_config(&c.to_text(), &[]).unwrap();
        prop_assert_eq!(r.config, c);
    }
}
