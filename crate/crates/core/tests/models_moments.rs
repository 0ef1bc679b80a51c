use approx::assert_relative_eq;
use matcon::bounds::variance_param;
use matcon::models::{
    analytic_second_moments, center, make_example, pareto_max_sq_exact, pareto_sample, Example,
    IndependentSumModel, ModelDocument, SummandSpec, PARETO_SECOND_MOMENT,
};
use matcon::montecarlo::{empirical_second_moments, estimate_max_summand_sq, summarize, Estimator, MCConfig};
use matcon::rng::{CounterRng, RngSeed};

#[test]
fn builtin_examples_are_centered_with_known_variance() {
    for (ex, d, v) in [
        (Example::Sec71, 8, 1.0),
        (Example::Sec72, 8, 0.99),
        (Example::Sec73, 8, 8.0),
        (Example::Sec74, 8, 2.0),
    ] {
        let m = make_example(ex, d, 100).unwrap();
        assert!(m.centered, "{ex}");
        let moments = analytic_second_moments(&m).unwrap().unwrap();
        assert_relative_eq!(variance_param(&m, &moments).unwrap(), v, max_relative = 1e-12);
    }
}

#[test]
fn empirical_moments_track_analytic_ones() {
    let m = make_example(Example::Sec73, 6, 1).unwrap();
    let (l, r) = empirical_second_moments(&m, &MCConfig::new(4000, 5)).unwrap();
    let (la, ra) = analytic_second_moments(&m).unwrap().unwrap();
    // Entries of the empirical Gram are averages of ±1 products plus the
    // diagonal; a few standard errors at 4000 samples is well under 0.5.
    assert!(l.as_rect().max_abs_diff(la.as_rect()) < 0.5);
    assert!(r.as_rect().max_abs_diff(ra.as_rect()) < 0.5);
}

#[test]
fn centering_removes_the_mean_and_keeps_it_aside() {
    let d = 3;
    let summands: Vec<SummandSpec> = (0..d).map(|i| SummandSpec::BernoulliBasis { i, p: 0.25, d }).collect();
    let m = IndependentSumModel::new("bern", d, d, 1, summands).unwrap();
    assert!(!m.centered);
    assert!(analytic_second_moments(&m).is_err());
    let (c, mean) = center(&m).unwrap();
    assert!(c.centered);
    assert!(c.mean().is_zero());
    for i in 0..d {
        assert_relative_eq!(mean.get(i, i).re, 0.25);
    }
    let (l, _) = analytic_second_moments(&c).unwrap().unwrap();
    assert_relative_eq!(l.spectral_norm(), 0.25 * 0.75, max_relative = 1e-12);
}

#[test]
fn pareto_second_moment_from_1e5_draws() {
    let n = 100_000u64;
    let draws: Vec<f64> = (0..n)
        .map(|k| {
            let mut r = CounterRng::new(RngSeed(21), k, 0);
            let u = r.uniform_open_closed();
            let s = r.sign();
            pareto_sample(u, s).unwrap().powi(2)
        })
        .collect();
    let cfg = MCConfig::new(n, 21).with_estimator(Estimator::MedianOfMeans { blocks: 16 });
    let est = summarize(&draws, &cfg).unwrap();
    assert!((est.mean - PARETO_SECOND_MOMENT).abs() < 0.25, "MoM estimate {}", est.mean);
}

#[test]
fn pareto_sample_rejects_bad_variates() {
    assert!(pareto_sample(0.0, 1.0).is_err());
    assert!(pareto_sample(0.5, 0.3).is_err());
    assert_eq!(pareto_sample(1.0, -1.0).unwrap(), -1.0);
}

#[test]
fn pareto_max_sq_agrees_with_median_of_means() {
    let d = 16;
    let m = make_example(Example::Sec74, d, 1).unwrap();
    let cfg = MCConfig::new(20_000, 4).with_estimator(Estimator::MedianOfMeans { blocks: 16 });
    let est = estimate_max_summand_sq(&m, &cfg).unwrap();
    let exact = pareto_max_sq_exact(d);
    assert!((est.mean / exact - 1.0).abs() < 0.1, "MoM {} vs quadrature {exact}", est.mean);
}

#[test]
fn max_sq_norm_exact_matches_closed_forms() {
    let m = make_example(Example::Sec71, 4, 25).unwrap();
    assert_relative_eq!(m.max_sq_norm_exact().unwrap(), 1.0 / 25.0, max_relative = 1e-12);
    let m = make_example(Example::Sec73, 5, 1).unwrap();
    assert_relative_eq!(m.max_sq_norm_exact().unwrap(), 1.0, max_relative = 1e-12);
    assert!(make_example(Example::Sec74, 4, 1).unwrap().max_sq_norm_exact().is_none());
}

#[test]
fn model_documents_parse_both_shapes() {
    let m = ModelDocument::from_json(r#"{"name": "sec73", "d": 4}"#).unwrap();
    assert_eq!((m.d1, m.d2), (4, 4));
    let m = ModelDocument::from_json(
        r#"{"name": "two", "d1": 2, "d2": 2, "summands": [
            {"family": "scaled_basis_rademacher", "i": 0, "scale": 1.0, "d": 2},
            {"family": "rademacher_entry", "i": 0, "j": 1, "d": 2}
        ]}"#,
    )
    .unwrap();
    assert_eq!(m.summands.len(), 2);
    assert!(ModelDocument::from_json(r#"{"name": "nope", "d": 4}"#).is_err());
    assert!(ModelDocument::from_json("[1, 2").is_err());
}
