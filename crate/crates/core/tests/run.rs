use rio::io::KeyValues;
use rio::run::{ablation_variants, config_from_key_values, config_to_key_values, run_sequence, REPORT_HEADER};
use rio::simulator::{simulate, NoiseProfile, SceneParams, SimConfig};

fn sequence(duration: f64, profile: NoiseProfile) -> rio::io::Sequence {
    simulate(
        &SimConfig {
            duration,
            seed: 1,
            scene: SceneParams::default().with_dynamic_fraction(0.2),
            ..SimConfig::default()
        }
        .with_noise(profile),
    )
    .sequence
}

#[test]
fn config_keys_round_trip() {
    let seq = sequence(1.0, NoiseProfile::None);
    let kv = KeyValues::parse("w_d = 100\nw_p = 44\ndisable = rcs_filter\nsigma_g = 0.002\nfix_gauge_biases = false\n").unwrap();
    let cfg = config_from_key_values(&kv, &seq).unwrap();
    assert_eq!(cfg.estimator.w_d, 100.0);
    assert!(cfg.estimator.ablation.disable_rcs_filter);
    assert!(!cfg.estimator.fix_gauge_biases);
    assert_eq!(cfg.noise.sigma_g, 0.002);
    assert_eq!(cfg.ext, seq.meta.ext);

    let again = config_from_key_values(&config_to_key_values(&cfg), &seq).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn bad_config_is_rejected() {
    let seq = sequence(1.0, NoiseProfile::None);
    for text in ["w_x = 1\n", "w_d = -1\n", "window_k = 1\n", "disable = gps\n", "max_iters = many\n"] {
        let kv = KeyValues::parse(text).unwrap();
        assert!(config_from_key_values(&kv, &seq).is_err(), "{text}");
    }
}

#[test]
fn report_counts_shrink_along_the_chain() {
    let seq = sequence(8.0, NoiseProfile::Noisy);
    let cfg = config_from_key_values(&KeyValues::default(), &seq).unwrap();
    let res = run_sequence(&seq, &cfg, 1).unwrap();
    assert_eq!(res.records.len(), seq.scans.len());
    for r in &res.records {
        let c = r.counts;
        assert!(c.raw >= c.fov && c.fov >= c.radius && c.radius >= c.static_points && c.static_points >= c.matched);
        assert!(r.ape_t_inst.is_finite());
    }
    let csv = res.report_csv();
    assert!(csv.starts_with(REPORT_HEADER));
    assert_eq!(csv.lines().count(), seq.scans.len() + 1);
    assert!(res.metrics.is_some());
}

#[test]
fn six_ablation_variants() {
    let seq = sequence(1.0, NoiseProfile::None);
    let cfg = config_from_key_values(&KeyValues::default(), &seq).unwrap();
    let v = ablation_variants(&cfg);
    assert_eq!(v.len(), 6);
    assert_eq!(v[0].1, cfg);
    assert!(v[1].1.estimator.ablation.disable_imu_residual);
    assert!(v[5].1.estimator.ablation.disable_rcs_filter);
}
