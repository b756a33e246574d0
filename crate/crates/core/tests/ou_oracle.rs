use dopo_core::convergence::{ou_weak_convergence, OuProblem};
use dopo_core::sde::{run_batch, IntegrationConfig, Scheme};
use num_complex::Complex64;

fn ensemble_moments(problem: &OuProblem, scheme: Scheme, n: usize) -> (f64, f64, f64) {
    let config = IntegrationConfig {
        dt: 0.01,
        t_final: problem.t_final,
        scheme,
        sample_times: vec![problem.t_final],
        master_seed: 17,
        n_trajectories: n,
        max_failure_fraction: 0.0,
    };
    let (snaps, outcome) = run_batch(&problem.system(), &config, &[Complex64::new(problem.x0, 0.0)]).unwrap();
    assert_eq!(outcome.n_succeeded(), n);
    let xs: Vec<f64> = snaps[0].states.iter().map(|s| s[0].re).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let second = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, second, var)
}

#[test]
fn ensemble_mean_decays_like_the_analytic_solution() {
    let p = OuProblem { gamma: 1.5, sigma: 0.8, x0: 2.0, t_final: 1.0 };
    for scheme in [Scheme::EulerMaruyama, Scheme::WeakOrder2Platen] {
        let n = 10_000;
        let (mean, second, var) = ensemble_moments(&p, scheme, n);
        let exact = p.x0 * (-p.gamma * p.t_final).exp();
        let se = (var / n as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "{scheme:?}: {mean} vs {exact} ± {se}");
        // x² has variance 2v² + 4m²v for a Gaussian
        let se2 = ((2.0 * var * var + 4.0 * exact * exact * var) / n as f64).sqrt();
        let exact2 = p.exact_second_moment();
        assert!((second - exact2).abs() < 4.0 * se2 + 0.01, "{scheme:?}: {second} vs {exact2}");
    }
}

#[test]
fn halving_the_step_quarters_the_weak_two_error() {
    let r = ou_weak_convergence(&OuProblem::default(), Scheme::WeakOrder2Platen, &[0.02, 0.01], 20_000, 9).unwrap();
    let ratio = r.points[0].error / r.points[1].error;
    assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
}
