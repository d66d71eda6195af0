use aeddpg_core::{NoiseConfig, NoiseKind, NoiseProcess};

fn process(kind: NoiseKind, seed: u64) -> NoiseProcess {
    NoiseProcess::new(
        NoiseConfig {
            kind,
            sigma: vec![0.2],
            clip: None,
        },
        seed,
    )
    .unwrap()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn lag1(v: &[f64]) -> f64 {
    pearson(&v[..v.len() - 1], &v[1..])
}

#[test]
fn random_walk_obeys_ar1_identity() {
    let mut p = process(NoiseKind::RandomWalk, 5);
    let mut prev: f64 = 0.0;
    for _ in 0..10_000 {
        let mut twin = p.clone();
        let x = twin.draw_unit()[0];
        let y = p.next_sample()[0];
        let ulp = f64::EPSILON * (prev.abs() + (0.2 * x).abs());
        assert!((y - prev - 0.2 * x).abs() <= 2.0 * ulp);
        prev = y;
    }
}

#[test]
fn walks_are_instance_uncorrelated() {
    let stream = |seed| {
        let mut p = process(NoiseKind::RandomWalk, seed);
        let v: Vec<f64> = (0..10_001).map(|_| p.next_sample()[0]).collect();
        v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<f64>>()
    };
    let r = pearson(&stream(101), &stream(202));
    assert!(r.abs() <= 0.03, "increment correlation {r}");
}

#[test]
fn walk_is_temporally_correlated_gaussian_is_not() {
    let mut rw = process(NoiseKind::RandomWalk, 7);
    let mut g = process(NoiseKind::Gaussian, 7);
    let walk: Vec<f64> = (0..10_000).map(|_| rw.next_sample()[0]).collect();
    let white: Vec<f64> = (0..10_000).map(|_| g.next_sample()[0]).collect();
    assert!(lag1(&walk) > 0.95, "walk lag-1 {}", lag1(&walk));
    assert!(lag1(&white).abs() <= 0.03, "gaussian lag-1 {}", lag1(&white));
}

#[test]
fn ou_is_stationary_with_expected_variance() {
    // y <- (1 - theta) y + sigma x has stationary variance sigma^2 / (1 - (1 - theta)^2)
    let mut p = process(NoiseKind::OrnsteinUhlenbeck { theta: 0.15 }, 3);
    let v: Vec<f64> = (0..200_000).map(|_| p.next_sample()[0]).skip(1000).collect();
    let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let want = 0.04 / (1.0 - 0.85f64 * 0.85);
    assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
}
