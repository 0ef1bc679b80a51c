//! Seeded Monte Carlo estimates of `E‖Z‖`, `E‖Z‖²`, `E max_i ‖S_i‖²` and the
//! second-moment matrices, plus assembly of full bound reports.
//!
//! Sample `k` is a pure function of `(seed, k)`. Samples are evaluated in
//! parallel, collected in index order and reduced sequentially, so the
//! worker count never changes a result. `MATCON_THREADS` caps the workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, BoundInterval, Moment};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, HermitianMatrix, RectMatrix};
use crate::models::{self, IndependentSumModel, Sampler};
use crate::oracles::INEQUALITY_REL_TOL;
use crate::rng::RngSeed;

/// Samples per partial sum when reducing matrices; fixed so that the
/// reduction tree does not depend on the thread count.
const MOMENT_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Estimator {
    Mean,
    MedianOfMeans { blocks: u64 },
}

impl Estimator {
    /// Median-of-means with the largest block count `≤ 16` dividing `samples`.
    pub fn median_of_means_for(samples: u64) -> Self {
        let blocks = (1..=16.min(samples)).rev().find(|b| samples % b == 0).unwrap_or(1);
        Estimator::MedianOfMeans { blocks }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub samples: u64,
    pub seed: RngSeed,
    pub estimator: Estimator,
    /// Confidence multiplier applied to standard errors and spreads.
    pub k: f64,
}

impl MCConfig {
    /// Plain means with `k = 3`.
    pub fn new(samples: u64, seed: impl Into<RngSeed>) -> Self {
        MCConfig {
            samples,
            seed: seed.into(),
            estimator: Estimator::Mean,
            k: 3.0,
        }
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::invalid(format!("need at least 2 samples, got {}", self.samples)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!("confidence multiplier {} must be finite and ≥ 0", self.k)));
        }
        if let Estimator::MedianOfMeans { blocks } = self.estimator {
            if blocks == 0 || self.samples % blocks != 0 {
                return Err(Error::invalid(format!(
                    "{blocks} blocks do not divide {} samples",
                    self.samples
                )));
            }
        }
        Ok(())
    }
}

/// A Monte Carlo mean with its uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `√samples`; absent for median-of-means.
    pub std_error: Option<f64>,
    /// `std_error` for plain means; the median absolute deviation of the
    /// block means for median-of-means.
    pub spread: f64,
    pub samples: u64,
    pub seed: RngSeed,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Summarizes per-sample values in index order.
pub fn summarize(values: &[f64], cfg: &MCConfig) -> Result<Estimate> {
    cfg.validate()?;
    if values.len() as u64 != cfg.samples {
        return Err(Error::invalid(format!(
            "expected {} values, got {}",
            cfg.samples,
            values.len()
        )));
    }
    let n = values.len() as f64;
    match cfg.estimator {
        Estimator::Mean => {
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            Ok(Estimate {
                mean,
                std_error: Some(se),
                spread: se,
                samples: cfg.samples,
                seed: cfg.seed,
            })
        }
        Estimator::MedianOfMeans { blocks } => {
            let size = values.len() / blocks as usize;
            let mut means: Vec<f64> = values
                .chunks(size)
                .map(|c| c.iter().sum::<f64>() / size as f64)
                .collect();
            means.sort_by(f64::total_cmp);
            let med = median(&means);
            let mut dev: Vec<f64> = means.iter().map(|m| (m - med).abs()).collect();
            dev.sort_by(f64::total_cmp);
            Ok(Estimate {
                mean: med,
                std_error: None,
                spread: median(&dev),
                samples: cfg.samples,
                seed: cfg.seed,
            })
        }
    }
}

/// Runs `f` on a pool capped by `MATCON_THREADS` when that variable is set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var("MATCON_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Per-sample `‖Z_k‖` and `max_i ‖S_i^{(k)}‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub norms: Vec<f64>,
    pub max_sq: Vec<f64>,
}

impl SampleSet {
    pub fn norm_powers(&self, r: u32) -> Vec<f64> {
        self.norms.iter().map(|x| x.powi(r as i32)).collect()
    }
}

pub(crate) fn norm_of(z: &RectMatrix, hermitian: bool) -> f64 {
    if hermitian && !z.is_diagonal() {
        HermitianMatrix::symmetrized(z.clone()).spectral_norm()
    } else {
        spectral_norm(z)
    }
}

/// Draws `cfg.samples` realizations of the model.
pub fn draw_samples(model: &IndependentSumModel, cfg: &MCConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let sampler = Sampler::new(model);
    let hermitian = model.is_hermitian();
    let pairs: Vec<(f64, f64)> = with_thread_cap(|| {
        (0..cfg.samples)
            .into_par_iter()
            .map(|k| {
                let (z, max_sq) = sampler.realize(cfg.seed, k);
                (norm_of(&z, hermitian), max_sq)
            })
            .collect()
    });
    let (norms, max_sq) = pairs.into_iter().unzip();
    Ok(SampleSet { norms, max_sq })
}

/// `E‖Z‖^r` for `r ∈ {1, 2}`.
pub fn estimate_norm_moment(model: &IndependentSumModel, r: u32, cfg: &MCConfig) -> Result<Estimate> {
    if !(r == 1 || r == 2) {
        return Err(Error::invalid(format!("moment order must be 1 or 2, got {r}")));
    }
    let s = draw_samples(model, cfg)?;
    summarize(&s.norm_powers(r), cfg)
}

/// `E max_i ‖S_i‖²`.
pub fn estimate_max_summand_sq(model: &IndependentSumModel, cfg: &MCConfig) -> Result<Estimate> {
    let s = draw_samples(model, cfg)?;
    summarize(&s.max_sq, cfg)
}

/// Sample means of `Z Z*` and `Z* Z`, symmetrized.
pub fn empirical_second_moments(model: &IndependentSumModel, cfg: &MCConfig) -> Result<(HermitianMatrix, HermitianMatrix)> {
    if !model.centered {
        return Err(Error::NotCentered);
    }
    cfg.validate()?;
    let sampler = Sampler::new(model);
    let (d1, d2) = (model.d1, model.d2);
    let starts: Vec<u64> = (0..cfg.samples).step_by(MOMENT_CHUNK).collect();
    let partials: Vec<(RectMatrix, RectMatrix)> = with_thread_cap(|| {
        starts
            .par_iter()
            .map(|&start| {
                let end = (start + MOMENT_CHUNK as u64).min(cfg.samples);
                let mut left = RectMatrix::zeros(d1, d1);
                let mut right = RectMatrix::zeros(d2, d2);
                for k in start..end {
                    let (z, _) = sampler.realize(cfg.seed, k);
                    left.add_scaled_assign(1.0, z.gram_left().as_rect());
                    right.add_scaled_assign(1.0, z.gram_right().as_rect());
                }
                (left, right)
            })
            .collect()
    });
    let mut left = RectMatrix::zeros(d1, d1);
    let mut right = RectMatrix::zeros(d2, d2);
    for (l, r) in &partials {
        left.add_scaled_assign(1.0, l);
        right.add_scaled_assign(1.0, r);
    }
    let inv = 1.0 / cfg.samples as f64;
    Ok((
        HermitianMatrix::symmetrized(left.scaled(inv)),
        HermitianMatrix::symmetrized(right.scaled(inv)),
    ))
}

/// Where a parameter value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Empirical,
    MonteCarlo,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Analytic => "analytic",
            Provenance::Empirical => "empirical",
            Provenance::MonteCarlo => "monte_carlo",
        })
    }
}

/// Spread of `√X̄` from the spread of `X̄`, by the delta method.
pub fn root_spread(mean: f64, spread: f64) -> f64 {
    if mean > 0.0 {
        spread / (2.0 * mean.sqrt())
    } else {
        spread.max(0.0).sqrt()
    }
}

/// Everything known about one model: parameters, bounds and Monte Carlo checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub model: String,
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub v: f64,
    pub v_provenance: Provenance,
    /// Samples behind an empirical `v`.
    pub v_samples: Option<u64>,
    pub l: f64,
    pub l_provenance: Provenance,
    pub constant: f64,
    /// Interval for `(E‖Z‖²)^{1/2}`.
    pub second_moment: BoundInterval,
    /// Interval for `E‖Z‖`.
    pub first_moment: BoundInterval,
    pub mc_norm: Estimate,
    pub mc_sqnorm: Estimate,
    pub mc_max_sq: Estimate,
    /// Spread of `√mc_sqnorm.mean`.
    pub rms_spread: f64,
    pub k: f64,
    pub sandwich_ok: bool,
    /// `E‖Z‖ ≤ (E‖Z‖²)^{1/2}` within `k` combined spreads.
    pub jensen_ok: bool,
    /// `E‖Z‖` at least the first-moment lower bound within `k` spreads.
    pub first_moment_ok: bool,
    /// Uncentered input only: `‖E R‖`, the envelope for `(E‖R‖²)^{1/2}` and its check.
    pub uncentered: Option<UncenteredPart>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UncenteredPart {
    pub mean_norm: f64,
    pub envelope: BoundInterval,
    pub mc_sqnorm: Estimate,
    pub envelope_ok: bool,
}

impl BoundReport {
    pub fn lower(&self) -> f64 {
        self.second_moment.lower
    }

    pub fn upper(&self) -> f64 {
        self.second_moment.upper
    }

    pub fn rms(&self) -> f64 {
        self.mc_sqnorm.mean.max(0.0).sqrt()
    }

    pub fn row(&self) -> ReportRow {
        ReportRow {
            model: self.model.clone(),
            d1: self.d1,
            d2: self.d2,
            n: self.n,
            v: round_sig(self.v),
            v_provenance: self.v_provenance,
            l: round_sig(self.l),
            l_provenance: self.l_provenance,
            c: round_sig(self.constant),
            lower: round_sig(self.lower()),
            upper: round_sig(self.upper()),
            mc_sqnorm_mean: round_sig(self.mc_sqnorm.mean),
            mc_se: round_sig(self.mc_sqnorm.spread),
            samples: self.mc_sqnorm.samples,
            seed: self.mc_sqnorm.seed.0,
            sandwich_ok: self.sandwich_ok,
        }
    }
}

/// The flat form written by `report`, as CSV or JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub v: f64,
    pub v_provenance: Provenance,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "L_provenance")]
    pub l_provenance: Provenance,
    #[serde(rename = "C")]
    pub c: f64,
    pub lower: f64,
    pub upper: f64,
    pub mc_sqnorm_mean: f64,
    pub mc_se: f64,
    pub samples: u64,
    pub seed: u64,
    pub sandwich_ok: bool,
}

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Assembles parameters, bounds and Monte Carlo checks for `model`.
///
/// Uncentered models are centered first; the report then describes
/// `Z = R − E R` and adds the triangle-inequality envelope for `R`.
pub fn bound_report(model: &IndependentSumModel, cfg: &MCConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let (centered, mean) = models::center(model)?;

    let (moments, v_provenance, v_samples) = match models::analytic_second_moments(&centered)? {
        Some(m) => (m, Provenance::Analytic, None),
        None => (
            empirical_second_moments(&centered, cfg)?,
            Provenance::Empirical,
            Some(cfg.samples),
        ),
    };
    let v = bounds::variance_param(&centered, &moments)?;

    let samples = draw_samples(&centered, cfg)?;
    let mc_max_sq = summarize(&samples.max_sq, cfg)?;
    let (l, l_provenance) = match centered.max_sq_norm_exact() {
        Some(x) => (x.max(0.0).sqrt(), Provenance::Analytic),
        None => (mc_max_sq.mean.max(0.0).sqrt(), Provenance::MonteCarlo),
    };
    // An estimated L can be zero only when every draw vanished; v must follow.
    let v = if l == 0.0 { 0.0 } else { v };

    let second = bounds::main_interval(&BoundInputs::new(v, l, centered.d1, centered.d2, Moment::SecondMoment)?)?;
    let first = bounds::main_interval(&BoundInputs::new(v, l, centered.d1, centered.d2, Moment::FirstMoment)?)?;

    let mc_norm = summarize(&samples.norm_powers(1), cfg)?;
    let mc_sqnorm = summarize(&samples.norm_powers(2), cfg)?;
    let rms = mc_sqnorm.mean.max(0.0).sqrt();
    let rms_spread = root_spread(mc_sqnorm.mean, mc_sqnorm.spread);
    let k = cfg.k;

    let sandwich_ok = second.contains(rms, k * rms_spread);
    let combined = (mc_norm.spread.powi(2) + rms_spread.powi(2)).sqrt();
    // Jensen is exact on the sample itself; equality when ‖Z‖ is constant
    // can come out one ulp on the wrong side, hence the rounding allowance.
    let rounding = INEQUALITY_REL_TOL * rms.max(1.0);
    let jensen_ok = mc_norm.mean <= rms + k * combined + rounding;
    let first_moment_ok = mc_norm.mean >= first.lower - k * mc_norm.spread;

    let uncentered = if model.centered {
        None
    } else {
        let mean_norm = spectral_norm(&mean);
        let envelope = bounds::uncentered_envelope(mean_norm, &second);
        let raw = draw_samples(model, cfg)?;
        let raw_sq = summarize(&raw.norm_powers(2), cfg)?;
        let raw_rms = raw_sq.mean.max(0.0).sqrt();
        let envelope_ok = envelope.contains(raw_rms, k * root_spread(raw_sq.mean, raw_sq.spread));
        Some(UncenteredPart {
            mean_norm,
            envelope,
            mc_sqnorm: raw_sq,
            envelope_ok,
        })
    };
    let sandwich_ok = sandwich_ok && uncentered.as_ref().is_none_or(|u| u.envelope_ok);

    Ok(BoundReport {
        model: model.name.clone(),
        d1: model.d1,
        d2: model.d2,
        n: model.n,
        v,
        v_provenance,
        v_samples,
        l,
        l_provenance,
        constant: second.constant,
        second_moment: second,
        first_moment: first,
        mc_norm,
        mc_sqnorm,
        mc_max_sq,
        rms_spread,
        k,
        sandwich_ok,
        jensen_ok,
        first_moment_ok,
        uncentered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_example, Example, SummandSpec};
    use crate::oracles::{FiniteSummand, DEFAULT_CAP};
    use approx::assert_relative_eq;

    #[test]
    fn mom_block_choice() {
        assert_eq!(Estimator::median_of_means_for(200), Estimator::MedianOfMeans { blocks: 10 });
        assert_eq!(Estimator::median_of_means_for(1_000_000), Estimator::MedianOfMeans { blocks: 16 });
        assert_eq!(Estimator::median_of_means_for(7), Estimator::MedianOfMeans { blocks: 7 });
        assert_eq!(Estimator::median_of_means_for(17), Estimator::MedianOfMeans { blocks: 1 });
    }

    #[test]
    fn config_validation() {
        assert!(MCConfig::new(1, 0).validate().is_err());
        assert!(MCConfig::new(10, 0)
            .with_estimator(Estimator::MedianOfMeans { blocks: 3 })
            .validate()
            .is_err());
        assert!(MCConfig::new(12, 0)
            .with_estimator(Estimator::MedianOfMeans { blocks: 3 })
            .validate()
            .is_ok());
    }

    #[test]
    fn summaries() {
        let cfg = MCConfig::new(4, 0);
        let e = summarize(&[1.0, 2.0, 3.0, 4.0], &cfg).unwrap();
        assert_relative_eq!(e.mean, 2.5);
        assert_relative_eq!(e.std_error.unwrap(), (5.0f64 / 3.0 / 4.0).sqrt());
        let cfg = cfg.with_estimator(Estimator::MedianOfMeans { blocks: 2 });
        let e = summarize(&[1.0, 3.0, 10.0, 20.0], &cfg).unwrap();
        assert_relative_eq!(e.mean, 8.5);
        assert_relative_eq!(e.spread, 6.5);
        assert!(e.std_error.is_none());
    }

    #[test]
    fn deterministic_summand() {
        let m = RectMatrix::from_real_rows(&[&[3.0, 0.0], &[4.0, 0.0]]).unwrap();
        let model = IndependentSumModel::from_finite("pm", vec![FiniteSummand::point_mass(m)]).unwrap();
        let cfg = MCConfig::new(20, 1);
        let e = estimate_norm_moment(&model, 2, &cfg).unwrap();
        assert_relative_eq!(e.mean, 25.0, max_relative = 1e-12);
        assert_eq!(e.std_error, Some(0.0));
    }

    #[test]
    fn max_summand_of_sec71() {
        let model = make_example(Example::Sec71, 4, 9).unwrap();
        let s = draw_samples(&model, &MCConfig::new(30, 2)).unwrap();
        for x in s.max_sq {
            assert_relative_eq!(x, 1.0 / 9.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn rademacher_max_is_constant() {
        let h1 = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]).unwrap();
        let h2 = HermitianMatrix::from_real_rows(&[&[0.0, 2.0], &[2.0, 0.0]]).unwrap();
        let model = IndependentSumModel::rademacher_series("r", vec![h1, h2]).unwrap();
        let e = estimate_max_summand_sq(&model, &MCConfig::new(50, 3)).unwrap();
        assert_relative_eq!(e.mean, 4.0, max_relative = 1e-12);
        assert_eq!(e.std_error, Some(0.0));
    }

    #[test]
    fn agrees_with_enumeration() {
        let mut g = crate::rng::CounterRng::new(RngSeed(5), 0, 0);
        let hs: Vec<HermitianMatrix> = (0..3).map(|_| crate::rng::random_hermitian(&mut g, 3)).collect();
        let model = IndependentSumModel::rademacher_series("r", hs).unwrap();
        let exact = crate::oracles::brute_force_expected_norm(&model.to_finite().unwrap(), 2, DEFAULT_CAP).unwrap();
        let e = estimate_norm_moment(&model, 2, &MCConfig::new(4000, 6)).unwrap();
        assert!((e.mean - exact).abs() <= 3.0 * e.std_error.unwrap(), "{} vs {exact}", e.mean);
    }

    #[test]
    fn repeat_runs_are_identical() {
        let model = make_example(Example::Sec73, 5, 0).unwrap();
        let cfg = MCConfig::new(40, 8);
        assert_eq!(
            estimate_norm_moment(&model, 2, &cfg).unwrap(),
            estimate_norm_moment(&model, 2, &cfg).unwrap()
        );
    }

    #[test]
    fn moments_of_zero_model() {
        let model = IndependentSumModel::from_finite(
            "zero",
            vec![FiniteSummand::point_mass(RectMatrix::zeros(2, 3))],
        )
        .unwrap();
        let (l, r) = empirical_second_moments(&model, &MCConfig::new(10, 1)).unwrap();
        assert_eq!(l.frobenius_norm(), 0.0);
        assert_eq!(r.frobenius_norm(), 0.0);
        let rep = bound_report(&model, &MCConfig::new(10, 1)).unwrap();
        assert_eq!((rep.lower(), rep.upper(), rep.mc_sqnorm.mean), (0.0, 0.0, 0.0));
        assert!(rep.sandwich_ok);
    }

    #[test]
    fn empirical_moments_of_sec73() {
        let model = make_example(Example::Sec73, 4, 0).unwrap();
        let (l, _) = empirical_second_moments(&model, &MCConfig::new(2000, 4)).unwrap();
        // entries of Z Z*: diagonal is exactly 4, off-diagonal has sd 2
        for i in 0..4 {
            assert_relative_eq!(l.get(i, i).re, 4.0, max_relative = 1e-12);
            for j in 0..4 {
                if i != j {
                    assert!(l.get(i, j).norm() < 5.0 * 2.0 / (2000f64).sqrt());
                }
            }
        }
    }

    #[test]
    fn sec71_report() {
        let model = make_example(Example::Sec71, 16, 100).unwrap();
        let rep = bound_report(&model, &MCConfig::new(200, 7)).unwrap();
        assert!(rep.sandwich_ok);
        assert_relative_eq!(rep.v, 1.0, max_relative = 1e-12);
        assert_relative_eq!(rep.l, 0.1, max_relative = 1e-12);
        assert_eq!(rep.v_provenance, Provenance::Analytic);
    }

    #[test]
    fn uncentered_report_has_envelope() {
        let model = IndependentSumModel::new(
            "bern",
            3,
            3,
            6,
            (0..6).map(|k| SummandSpec::BernoulliBasis { i: k % 3, p: 0.4, d: 3 }).collect(),
        )
        .unwrap();
        let rep = bound_report(&model, &MCConfig::new(400, 2)).unwrap();
        let u = rep.uncentered.as_ref().unwrap();
        assert_relative_eq!(u.mean_norm, 0.8, max_relative = 1e-12);
        assert!(u.envelope_ok && rep.sandwich_ok);
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(123456.7890123456), 123456.789012);
    }
}
