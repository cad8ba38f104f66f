use mdla::harness::{run_ensemble, summarize, ExperimentSpec};
use mdla::model::{init_field, init_field_with_profile, ModelParams, TimeMode};
use mdla::rng;
use mdla::simulator::{dispersion_diagnostic, run_discrete, simulate_run, InitialCondition};
use rand_distr::{Distribution, Poisson};

#[test]
fn initial_mass_matches_poisson_expectation() {
    let mut params = ModelParams::new(0.4382, TimeMode::Discrete, 1e5, 0);
    let x_max = params.window_x_max().unwrap();
    assert_eq!(x_max, 2056);
    let masses: Vec<f64> = (0..1000u64)
        .map(|seed| {
            params.seed = seed;
            init_field(&params).unwrap().initial_mass as f64
        })
        .collect();
    let s = summarize(&masses).unwrap();
    let expected = 0.4382 * x_max as f64;
    assert!((s.mean - expected).abs() < 3.0 * s.se, "{} vs {expected}", s.mean);
}

#[test]
fn constant_profile_matches_uniform_initialization() {
    let mut params = ModelParams::new(0.8, TimeMode::Discrete, 1e3, 0);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for seed in 0..500u64 {
        params.seed = seed;
        a.push(init_field(&params).unwrap().initial_mass as f64);
        params.seed = seed + 10_000;
        b.push(init_field_with_profile(&params, |_| 0.8).unwrap().initial_mass as f64);
    }
    let (sa, sb) = (summarize(&a).unwrap(), summarize(&b).unwrap());
    let se = (sa.se.powi(2) + sb.se.powi(2)).sqrt();
    assert!((sa.mean - sb.mean).abs() < 4.0 * se);
    assert_eq!(init_field_with_profile(&params, |_| 0.0).unwrap().initial_mass, 0);
    assert!(init_field_with_profile(&params, |i| if i == 5 { -0.1 } else { 0.8 }).is_err());
}

#[test]
fn critical_continuous_growth_constant() {
    let horizon = 1e4;
    let spec = ExperimentSpec::new(ModelParams::new(1.0, TimeMode::Continuous, horizon, 31), 100);
    let trajs = run_ensemble(&spec).unwrap();
    let mean = trajs.iter().map(|t| t.last().unwrap().front as f64).sum::<f64>() / trajs.len() as f64;
    let scaled = mean / horizon.powf(2.0 / 3.0);
    let c = 0.5 * 1.5f64.powf(2.0 / 3.0);
    assert!((scaled / c - 1.0).abs() < 0.25, "{scaled} vs {c}");
}

#[test]
fn far_sites_stay_poisson() {
    let mut params = ModelParams::new(0.7, TimeMode::Discrete, 50.0, 0);
    params.x_max = Some(400);
    let n = 600;
    let samples: Vec<u32> = (0..n)
        .map(|k| {
            let mut rng = rng::stream(77, k);
            let mut field = mdla::model::poisson_field(&params, &mut rng).unwrap();
            run_discrete(&mut field, &params, k, &mut rng).unwrap();
            field.counts[400 - 10]
        })
        .collect();
    let ratio = dispersion_diagnostic(&samples).unwrap();
    assert!((ratio - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{ratio}");
}

#[test]
fn synthetic_poisson_dispersion() {
    let mut rng = rng::stream(5, 0);
    let d = Poisson::new(2.0).unwrap();
    let samples: Vec<u32> = (0..10_000).map(|_| d.sample(&mut rng) as u32).collect();
    let ratio = dispersion_diagnostic(&samples).unwrap();
    assert!((0.94..=1.06).contains(&ratio), "{ratio}");
}

#[test]
fn ensemble_csv_is_reproducible() {
    let mut params = ModelParams::new(1.0, TimeMode::Discrete, 2000.0, 8);
    params.profile_width = 16;
    let spec = ExperimentSpec::new(params, 5);
    let bytes = || {
        let trajs = run_ensemble(&spec).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        mdla::model::write_records_csv(&trajs, &mut a).unwrap();
        mdla::model::write_profiles_csv(&trajs, &mut b).unwrap();
        (a, b)
    };
    assert_eq!(bytes(), bytes());
}

/// Moving the wall from 6√T to 8√T beyond the predicted front shifts the
/// mean front by less than the standard error of a 100-run ensemble.
#[test]
fn window_margin_insensitivity() {
    let horizon = 1e4;
    let runs = 1600;
    let mean_and_sd = |margin: f64, seed: u64| {
        let mut params = ModelParams::new(0.4382, TimeMode::Discrete, horizon, seed);
        params.window_margin = margin;
        let trajs = run_ensemble(&ExperimentSpec::new(params, runs)).unwrap();
        let xs: Vec<f64> = trajs.iter().map(|t| t.last().unwrap().front as f64).collect();
        let s = summarize(&xs).unwrap();
        (s.mean, s.std)
    };
    let (m6, sd6) = mean_and_sd(6.0, 1);
    let (m8, _) = mean_and_sd(8.0, 2);
    let se_100 = sd6 / 10.0;
    assert!((m6 - m8).abs() < se_100, "margin 6: {m6}, margin 8: {m8}, 100-run se {se_100}");
}

#[test]
fn uniform_and_wave_runs_keep_ledger() {
    for (mu, init) in [(0.5, InitialCondition::Uniform), (1.3, InitialCondition::Wave { rate: 0.6 })] {
        for mode in [TimeMode::Continuous, TimeMode::Discrete] {
            let traj = simulate_run(&ModelParams::new(mu, mode, 500.0, 3), init, 0).unwrap();
            assert!(traj.is_consistent());
            let first = &traj.records[0];
            let last = traj.last().unwrap();
            assert_eq!(first.alive, last.alive + last.dead);
        }
    }
}
