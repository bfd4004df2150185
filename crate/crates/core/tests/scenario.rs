mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use risnoma::metrics::aggregate_user_channel;
use risnoma::numerics::cmatrix::{norm_sqr, C64};
use risnoma::scenario::channels::{distance, generate_channels, path_gain, rician_vector, steering};
use risnoma::scenario::{order_users, rng_for, RngStream, SystemConfig};

use common::unit_phases;

#[test]
fn rayleigh_entry_variance_matches_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let los = vec![C64::new(1.0, 0.0)];
    let gain = 2.5;
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| rician_vector(1, 0.0, &los, gain, &mut rng)[0].norm_sqr()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((mean - gain).abs() <= 3.0 * sd / (n as f64).sqrt(), "mean power {mean} vs {gain}");
}

#[test]
fn direct_link_power_matches_path_loss() {
    let cfg = SystemConfig::desk();
    let trials = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let ch = generate_channels(&cfg, &mut rng).unwrap();
        samples.push(norm_sqr(&ch.h_d[0]) / cfg.m as f64);
    }
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    let d = distance(cfg.geometry.bs, cfg.geometry.users[0]);
    let want = path_gain(d, cfg.pathloss_exponents.bs_user, cfg.pathloss_ref_db).unwrap();
    assert!((mean - want).abs() <= 3.0 * sd / (trials as f64).sqrt(), "{mean} vs {want}");
}

#[test]
fn generated_channels_are_finite_and_sized() {
    for seed in 0..20 {
        let cfg = SystemConfig { n: (seed % 4) as usize * 5, ..SystemConfig::desk() };
        let ch = generate_channels(&cfg, &mut rng_for(seed, RngStream::Channels)).unwrap();
        ch.check_dims(&cfg).unwrap();
        assert!(ch.all_finite());
        assert!(ch.h_d.iter().chain(&ch.g_d).all(|v| norm_sqr(v) > 0.0));
    }
}

#[test]
fn rng_streams_are_independent() {
    use rand::Rng;
    let a: u64 = rng_for(7, RngStream::Channels).gen();
    let b: u64 = rng_for(7, RngStream::Init).gen();
    let c: u64 = rng_for(7, RngStream::Channels).gen();
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn order_matches_brute_force_sort() {
    let cfg = SystemConfig::desk();
    for seed in 0..10 {
        let ch = generate_channels(&cfg, &mut rng_for(seed, RngStream::Channels)).unwrap();
        let v = unit_phases(cfg.n, &mut rng_for(seed, RngStream::Init));
        let perm = order_users(&ch, &v);
        let gains: Vec<f64> = (0..cfg.k).map(|k| norm_sqr(&aggregate_user_channel(&ch, &v, k))).collect();
        let mut sorted = gains.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let got: Vec<f64> = perm.iter().map(|&i| gains[i]).collect();
        assert_eq!(got, sorted);
    }
}

#[test]
fn steering_points_along_axis() {
    // endfire: sin θ = 1, so the phase advances by π per element
    let s = steering(3, [0.0, 0.0], [0.0, 1.0], [0.0, 5.0]);
    assert!((s[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    // broadside: all ones
    let s = steering(3, [0.0, 0.0], [0.0, 1.0], [5.0, 0.0]);
    assert!(s.iter().all(|x| (x - C64::new(1.0, 0.0)).norm() < 1e-12));
}

#[test]
fn config_files_load_from_toml_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("c.toml");
    std::fs::write(&toml_path, "N = 8\np_max_dbm = 30.0\n").unwrap();
    let json_path = dir.path().join("c.json");
    std::fs::write(&json_path, r#"{"preset": "paper", "K": 2}"#).unwrap();
    let a = SystemConfig::from_path(&toml_path).unwrap();
    assert_eq!((a.n, a.p_max_dbm, a.m), (8, 30.0, 6));
    let b = SystemConfig::from_path(&json_path).unwrap();
    assert_eq!((b.n, b.k), (60, 2));
    assert!(SystemConfig::from_toml_str("bogus_field = 1").is_err());
    assert!(SystemConfig::from_toml_str("K = 0").is_err());
}
