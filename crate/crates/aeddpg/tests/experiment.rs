use std::collections::BTreeMap;

use aeddpg::config::parse_config;
use aeddpg::experiment::{run_preset, CONFIG_FILE, SUMMARY_JSON, SUMMARY_TEXT};
use aeddpg::metrics::{read_metrics, Record};
use aeddpg::runner::METRICS_FILE;
use serde_json::Value;

const SMALL: &str = "\
agent.actor_hidden = 8
agent.critic_hidden = 8
agent.batch_size = 8
replay.memory_capacity = 2000
replay.hmemory_capacity = 400
run.warmup_steps = 50
run.total_env_steps = 600
run.mode = synchronous
";

#[test]
fn vanilla_preset_writes_one_run_per_seed_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}preset = vanilla_ddpg\nrun.seeds = 3\nrun.seed = 40\n");
    let cfg = parse_config(&text, &[]).unwrap().config;
    let (entries, summary) = run_preset(&cfg, dir.path()).unwrap();
    assert_eq!(entries.len(), 3);
    for (i, e) in entries.iter().enumerate() {
        assert_eq!(e.seed, 40 + i as u64);
        assert_eq!(e.report.workers.len(), 1);
        let (h, records) = read_metrics(&e.dir.join(METRICS_FILE)).unwrap();
        assert_eq!((h.variant.as_str(), h.seed), ("vanilla_ddpg", e.seed));
        assert!(!records.is_empty());
    }
    assert_eq!(summary.runs.len(), 3);
    for f in [CONFIG_FILE, SUMMARY_TEXT, SUMMARY_JSON, "vanilla_ddpg.config.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let saved = std::fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(parse_config(&saved, &[]).unwrap().config, cfg);
}

/// Recomputes the step-bucketed table from the raw metrics files with
/// untyped JSON and compares against the written summary.
#[test]
fn summary_matches_an_independent_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}preset = ablation_replay\nrun.seeds = 2\nenv.max_steps = 60\n");
    let cfg = parse_config(&text, &[]).unwrap().config;
    let (entries, _) = run_preset(&cfg, dir.path()).unwrap();
    assert_eq!(entries.len(), 4);

    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_JSON)).unwrap()).unwrap();
    let width = summary["bucket_steps"].as_u64().unwrap();
    assert_eq!(width, 30);

    // variant -> bucket -> per-run means
    let mut grid: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for e in &entries {
        let text = std::fs::read_to_string(e.dir.join(METRICS_FILE)).unwrap();
        let mut lines = text.lines();
        let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        let variant = header["variant"].as_str().unwrap().to_string();
        let mut cells: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for l in lines {
            let v: Value = serde_json::from_str(l).unwrap();
            if v["kind"] == "episode" {
                let step = v["env_steps_total"].as_u64().unwrap();
                let b = (step + width - 1) / width - 1;
                let c = cells.entry(b).or_default();
                c.0 += v["episode_reward"].as_f64().unwrap();
                c.1 += 1.0;
            }
        }
        for (b, (s, n)) in cells {
            grid.entry(variant.clone()).or_default().entry(b).or_default().push(s / n);
        }
    }
    let rows = summary["by_steps"].as_array().unwrap();
    let expected: usize = grid.values().map(|m| m.len()).sum();
    assert_eq!(rows.len(), expected);
    for row in rows {
        let vals = &grid[row["variant"].as_str().unwrap()][&((row["start"].as_f64().unwrap() / width as f64) as u64)];
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert_eq!(row["runs"].as_u64().unwrap() as usize, vals.len());
        assert!((row["mean"].as_f64().unwrap() - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        assert!((row["std"].as_f64().unwrap() - std).abs() <= 1e-9 * mean.abs().max(1.0));
    }
    // Synchronous runs carry no wall clock, so that table is empty.
    assert!(summary["by_wall_clock"].as_array().unwrap().is_empty());
    // Replay ablation: the variant without episodic sampling never draws from HMemory,
    // but both still fill it.
    for e in &entries {
        let (_, recs) = read_metrics(&e.dir.join(METRICS_FILE)).unwrap();
        assert!(recs.iter().any(|r| matches!(r, Record::Episode(ep) if ep.hmemory_occupancy > 0)));
    }
}
