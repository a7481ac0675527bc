use danebench_core::data::{generate_synthetic, SyntheticSpec};
use danebench_core::metrics::{
    log10_of_subopt, population_error, solve_optimum, suboptimality, EvalContext, MomentStats,
};
use danebench_core::objective::{empirical_risk, mean_grad, RidgeLoss};
use danebench_core::linalg;

#[test]
fn feature_variances_follow_power_law() {
    let spec = SyntheticSpec::standard(3, 1_000_000, 17);
    let data = generate_synthetic(&spec).unwrap();
    let n = data.len() as f64;
    for j in 0..3 {
        let (mut sum, mut sq) = (0.0, 0.0);
        for k in 0..data.len() {
            let v = data.example(k).x[j];
            sum += v;
            sq += v * v;
        }
        let var = sq / n - (sum / n).powi(2);
        let expected = ((j + 1) as f64).powf(-1.2);
        assert!((var / expected - 1.0).abs() < 0.02, "coordinate {j}: {var} vs {expected}");
    }
}

#[test]
fn noiseless_optimum_recovers_w_star() {
    let mut spec = SyntheticSpec::standard(6, 500, 18);
    spec.noise_std = 0.0;
    spec.w_star = vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.0];
    let data = generate_synthetic(&spec).unwrap();
    let (w, _) = solve_optimum(&data, &RidgeLoss::new(1e-12).unwrap()).unwrap();
    let err = linalg::norm(&linalg::sub(&w, &spec.w_star)) / linalg::norm(&spec.w_star);
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn heavy_regularization_shrinks_optimum() {
    let spec = SyntheticSpec::standard(6, 500, 19);
    let data = generate_synthetic(&spec).unwrap();
    let (w, _) = solve_optimum(&data, &RidgeLoss::new(1e6).unwrap()).unwrap();
    assert!(linalg::norm(&w) < 1e-5 * linalg::norm(&spec.w_star));
}

#[test]
fn optimum_is_stationary_and_risk_matches() {
    let data = generate_synthetic(&SyntheticSpec::standard(30, 3_000, 20)).unwrap();
    let loss = RidgeLoss::default();
    let (w, f) = solve_optimum(&data, &loss).unwrap();
    assert!(linalg::norm(&mean_grad(&loss, &w, data.view())) <= 1e-8);
    let direct = empirical_risk(&loss, &w, data.view());
    assert!((f - direct).abs() <= 1e-10 * direct);
}

#[test]
fn suboptimality_identity_matches_risk_difference() {
    let data = generate_synthetic(&SyntheticSpec::standard(8, 400, 21)).unwrap();
    let loss = RidgeLoss::default();
    let ctx = EvalContext::new(&data, loss, MomentStats::from_view(data.view())).unwrap();
    assert_eq!(suboptimality(&ctx.w_opt, &ctx), 0.0);
    for scale in [0.0, 0.5, 2.0] {
        let w: Vec<f64> = ctx.w_opt.iter().map(|v| v * scale + 0.1).collect();
        let direct = empirical_risk(&loss, &w, data.view()) - ctx.f_opt;
        let identity = suboptimality(&w, &ctx);
        assert!((identity - direct).abs() <= 1e-9 * direct.abs().max(1e-3), "{identity} vs {direct}");
        assert!((ctx.train_risk(&w) - empirical_risk(&loss, &w, data.view())).abs() < 1e-10);
    }
    assert_eq!(log10_of_subopt(0.0), -16.0);
    assert_eq!(log10_of_subopt(1e-3), -3.0);
}

#[test]
fn population_error_at_w_star_is_noise_level() {
    let spec = SyntheticSpec::standard(5, 1_000, 22);
    let data = generate_synthetic(&spec).unwrap();
    let loss = RidgeLoss::default();
    let ctx = EvalContext::for_synthetic(&data, loss, &spec, 100_000).unwrap();
    let expected = 1.0 + loss.reg * linalg::dot(&spec.w_star, &spec.w_star);
    // squared standard Gaussian noise has variance 2
    let se = (2.0 / 100_000f64).sqrt();
    let got = population_error(&spec.w_star, &ctx);
    assert!((got - expected).abs() < 3.0 * se, "{got} vs {expected} ± {se}");
    let doubled: Vec<f64> = ctx.w_opt.iter().map(|v| 2.0 * v).collect();
    assert!(population_error(&ctx.w_opt, &ctx) <= population_error(&doubled, &ctx));
}

#[test]
fn holdout_is_reproducible_and_seeded() {
    let spec = SyntheticSpec::standard(4, 100, 23);
    let a = MomentStats::sample_holdout(&spec, 5_000).unwrap();
    let b = MomentStats::sample_holdout(&spec, 5_000).unwrap();
    assert_eq!(a.xx, b.xx);
    let mut other = spec.clone();
    other.seed = 24;
    assert_ne!(MomentStats::sample_holdout(&other, 5_000).unwrap().xx, a.xx);
    // holdout and training draws come from different streams
    let data = generate_synthetic(&SyntheticSpec::standard(4, 5_000, 23)).unwrap();
    assert_ne!(MomentStats::from_view(data.view()).xx, a.xx);
}
