use picsurv::comparators::{bootstrap_ci, fit_pi_mle, pi_summary, BootstrapConfig, MleConfig};
use picsurv::simulate::{benchmark_truth, simulate_cohort, DgpConfig};
use picsurv::{Error, LikelihoodEvaluator, ModelKind, Profile};
use rand::Rng;

fn no_cure_cohort(n: usize, seed: u64) -> Vec<picsurv::ObservationRecord> {
    let mut truth = benchmark_truth();
    truth.beta_delta = vec![-50.0, 0.0];
    simulate_cohort(&DgpConfig { n, seed, truth, ..Default::default() })
        .unwrap()
        .records
}

#[test]
fn recovers_weibull_parameters_without_cure() {
    let data = no_cure_cohort(4000, 21);
    let fit = fit_pi_mle(&data, &MleConfig::default()).unwrap();
    assert!(fit.converged);
    assert!((fit.point.alpha - 2.0).abs() < 0.1, "alpha {}", fit.point.alpha);
    assert!((fit.point.lambda - 2.2).abs() < 0.15, "lambda {}", fit.point.lambda);
    assert!((fit.point.gamma[0] + 0.5).abs() < 0.3);
    assert!(fit.se.iter().all(|s| s.is_finite() && *s > 0.0));
}

#[test]
fn optimum_beats_random_perturbations() {
    let data = no_cure_cohort(400, 5);
    let fit = fit_pi_mle(&data, &MleConfig::default()).unwrap();
    let eval = LikelihoodEvaluator::new(&data, ModelKind::Pi).unwrap();
    let best = eval.log_likelihood(&fit.point);
    assert!((best - fit.log_likelihood).abs() < 1e-9);
    let mut rng = picsurv::rng::substream(99, 0);
    for _ in 0..50 {
        let theta: Vec<f64> = fit.theta.iter().map(|t| t + rng.random_range(-0.1..0.1)).collect();
        assert!(eval.log_likelihood(&fit.layout.from_optimizer(&theta)) <= best);
    }
}

#[test]
fn fit_is_deterministic() {
    let data = no_cure_cohort(300, 8);
    let a = fit_pi_mle(&data, &MleConfig::default()).unwrap();
    let b = fit_pi_mle(&data, &MleConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bootstrap_rules_and_summary() {
    let data = no_cure_cohort(300, 13);
    let mut fit = fit_pi_mle(&data, &MleConfig::default()).unwrap();
    let small = BootstrapConfig { resamples: 2, ..Default::default() };
    assert!(matches!(bootstrap_ci(&data, &mut fit, &small, &[], &[]), Err(Error::InvalidConfig(_))));

    let profiles = [Profile::new("16", vec![1.0, 0.0], vec![0.0])];
    let config = BootstrapConfig { resamples: 100, seed: 3, ..Default::default() };
    let b = bootstrap_ci(&data, &mut fit, &config, &profiles, &[2.0, 10.0]).unwrap();
    assert_eq!(b.names.len(), b.lower.len());
    for k in 0..b.names.len() {
        assert!(b.lower[k] <= b.upper[k]);
    }
    assert_eq!(fit.bootstrap.as_ref().unwrap().len(), 100 - b.n_failed);

    let s = pi_summary(&fit, Some(&b), &profiles, &[2.0, 10.0], "years", data.len()).unwrap();
    assert_eq!(s.method, "pi-mle");
    let alpha = s.row("alpha").unwrap();
    assert!(alpha.se.unwrap() > 0.0 && alpha.lower.unwrap() < alpha.estimate && alpha.estimate < alpha.upper.unwrap());
    assert!(s.row("survival[16](t=10)").is_some());
    assert!(s.row("cure[16]").is_none());

    let again = bootstrap_ci(&data, &mut fit.clone(), &config, &profiles, &[2.0, 10.0]).unwrap();
    assert_eq!(again, b);
}
