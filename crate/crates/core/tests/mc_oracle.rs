use matcon::models::IndependentSumModel;
use matcon::montecarlo::{estimate_max_summand_sq, estimate_norm_moment, Estimate, MCConfig};
use matcon::oracles::{brute_force_expected_norm, brute_force_max_sq_norm, random_finite_family, DEFAULT_CAP};
use matcon::rng::{CounterRng, RngSeed};

const SEEDS: u64 = 100;
const SAMPLES: u64 = 400;

fn family(k: u64) -> IndependentSumModel {
    let mut rng = CounterRng::new(RngSeed(99), k, 0);
    IndependentSumModel::from_finite(format!("finite_{k}"), random_finite_family(&mut rng, true)).unwrap()
}

/// `|mean − exact| / SE`; a degenerate sample must hit the exact value.
fn z_score(est: &Estimate, exact: f64) -> f64 {
    let se = est.std_error.expect("plain mean");
    let err = (est.mean - exact).abs();
    if se > 0.0 {
        err / se
    } else if err <= 1e-9 * exact.max(1.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

fn assert_coverage(label: &str, zs: &[f64]) {
    let hits = zs.iter().filter(|&&z| z <= 3.0).count();
    let worst = zs.iter().cloned().fold(0.0, f64::max);
    assert!(hits * 100 >= 99 * zs.len(), "{label}: {hits}/{} within 3 SE, worst z = {worst}", zs.len());
}

#[test]
fn norm_moments_agree_with_enumeration() {
    for r in [1u32, 2] {
        let zs: Vec<f64> = (0..SEEDS)
            .map(|k| {
                let m = family(k);
                let exact = brute_force_expected_norm(&m.to_finite().unwrap(), r, DEFAULT_CAP).unwrap();
                let est = estimate_norm_moment(&m, r, &MCConfig::new(SAMPLES, 1000 + k)).unwrap();
                z_score(&est, exact)
            })
            .collect();
        assert_coverage(&format!("E‖Z‖^{r}"), &zs);
    }
}

#[test]
fn max_summand_agrees_with_enumeration() {
    let zs: Vec<f64> = (0..SEEDS)
        .map(|k| {
            let m = family(k);
            let exact = brute_force_max_sq_norm(&m.to_finite().unwrap(), DEFAULT_CAP).unwrap();
            let est = estimate_max_summand_sq(&m, &MCConfig::new(SAMPLES, 1000 + k)).unwrap();
            z_score(&est, exact)
        })
        .collect();
    assert_coverage("E max ‖S_i‖²", &zs);
}

#[test]
fn exact_l_is_used_when_available() {
    let m = family(3);
    let rep = matcon::montecarlo::bound_report(&m, &MCConfig::new(100, 1)).unwrap();
    let exact = brute_force_max_sq_norm(&m.to_finite().unwrap(), DEFAULT_CAP).unwrap();
    assert!((rep.l * rep.l - exact).abs() <= 1e-9 * exact.max(1.0));
}
