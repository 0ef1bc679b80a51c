//! Closed-form parameters and bounds for the expected norm of an independent sum.
//!
//! For a centered sum `Z = Σ S_i` of `d1 × d2` matrices with
//! `v = max(‖E ZZ*‖, ‖E Z*Z‖)`, `L² = E max_i ‖S_i‖²` and
//! `C = 4(1 + 2⌈ln(d1 + d2)⌉)`:
//!
//! ```text
//! √(v/4) + L/4  ≤  (E‖Z‖²)^{1/2}  ≤  √(C v) + C L
//! √(v/8) + L/8  ≤   E‖Z‖          ≤  √(C v) + C L
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sum_of_squares, HermitianMatrix, RectMatrix};
use crate::models::IndependentSumModel;
use crate::montecarlo::{self, MCConfig};
use crate::oracles::{self, FiniteSummand, DEFAULT_CAP};
use crate::rng::{self, CounterRng, RngSeed};

/// `⌈ln d⌉` with the standard ceiling, so `⌈ln 1⌉ = 0`.
pub fn ceil_ln(d: usize) -> u32 {
    assert!(d >= 1, "dimension must be positive");
    (d as f64).ln().ceil() as u32
}

/// `4(1 + 2⌈ln d⌉)`.
pub fn constant_for_dim(d: usize) -> f64 {
    4.0 * (1.0 + 2.0 * ceil_ln(d) as f64)
}

/// `C(d1, d2) = 4(1 + 2⌈ln(d1 + d2)⌉)`.
///
/// ```
/// use matcon::bounds::dimensional_constant;
/// assert_eq!(dimensional_constant(1, 1), 12.0);
/// assert_eq!(dimensional_constant(4, 4), 28.0);
/// ```
pub fn dimensional_constant(d1: usize, d2: usize) -> f64 {
    constant_for_dim(d1 + d2)
}

/// Which moment of `‖Z‖` the interval refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    /// `(E‖Z‖²)^{1/2}`, lower constant `c = 1/4`.
    SecondMoment,
    /// `E‖Z‖`, lower constant `c′ = 1/8`.
    FirstMoment,
}

impl Moment {
    pub fn lower_constant(self) -> f64 {
        match self {
            Moment::SecondMoment => 0.25,
            Moment::FirstMoment => 0.125,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub v: f64,
    pub l: f64,
    pub d1: usize,
    pub d2: usize,
    pub moment: Moment,
}

impl BoundInputs {
    pub fn new(v: f64, l: f64, d1: usize, d2: usize, moment: Moment) -> Result<Self> {
        let inputs = BoundInputs { v, l, d1, d2, moment };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return Err(Error::invalid(format!("variance parameter {} must be finite and ≥ 0", self.v)));
        }
        if !(self.l >= 0.0 && self.l.is_finite()) {
            return Err(Error::invalid(format!("large-deviation parameter {} must be finite and ≥ 0", self.l)));
        }
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::EmptyMatrix {
                rows: self.d1,
                cols: self.d2,
            });
        }
        if self.l == 0.0 && self.v > 0.0 {
            return Err(Error::invalid("L = 0 forces v = 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInterval {
    pub lower: f64,
    pub upper: f64,
    pub constant: f64,
}

impl BoundInterval {
    pub fn contains(&self, x: f64, slack: f64) -> bool {
        self.lower - slack <= x && x <= self.upper + slack
    }
}

/// The matched lower and upper estimates.
///
/// ```
/// use matcon::bounds::{main_interval, BoundInputs, Moment};
/// let b = main_interval(&BoundInputs::new(1.0, 0.1, 2, 2, Moment::SecondMoment).unwrap()).unwrap();
/// assert!((b.lower - 0.525).abs() < 1e-15);
/// assert_eq!(b.constant, 20.0);
/// assert!((b.upper - (20f64.sqrt() + 2.0)).abs() < 1e-12);
/// ```
pub fn main_interval(inputs: &BoundInputs) -> Result<BoundInterval> {
    inputs.validate()?;
    let c = dimensional_constant(inputs.d1, inputs.d2);
    let lc = inputs.moment.lower_constant();
    Ok(BoundInterval {
        lower: (lc * inputs.v).sqrt() + lc * inputs.l,
        upper: (c * inputs.v).sqrt() + c * inputs.l,
        constant: c,
    })
}

/// `max(‖E[ZZ*]‖, ‖E[Z*Z]‖)`.
pub fn variance_param(model: &IndependentSumModel, moments: &(HermitianMatrix, HermitianMatrix)) -> Result<f64> {
    if !model.centered {
        return Err(Error::NotCentered);
    }
    let (left, right) = moments;
    if left.dim() != model.d1 || right.dim() != model.d2 {
        return Err(Error::DimensionMismatch {
            expected: (model.d1, model.d2),
            found: (left.dim(), right.dim()),
        });
    }
    Ok(left.spectral_norm().max(right.spectral_norm()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LargeDevMode {
    Analytic,
    MonteCarlo,
}

/// `L = (E max_i ‖S_i‖²)^{1/2}`.
///
/// `Analytic` is exact whenever every `‖S_i‖²` has a known discrete law.
pub fn large_dev_param(model: &IndependentSumModel, mode: LargeDevMode, cfg: &MCConfig) -> Result<f64> {
    match mode {
        LargeDevMode::Analytic => model
            .max_sq_norm_exact()
            .map(f64::sqrt)
            .ok_or_else(|| Error::NoClosedForm(format!("E max ‖S_i‖² for model `{}`", model.name))),
        LargeDevMode::MonteCarlo => Ok(montecarlo::estimate_max_summand_sq(model, cfg)?.mean.max(0.0).sqrt()),
    }
}

/// `√(1 + 2⌈ln d⌉) · ‖Σ H_i²‖^{1/2}`, an upper bound for `(E‖Σ ε_i H_i‖²)^{1/2}`.
pub fn rademacher_bound(hs: &[HermitianMatrix]) -> Result<f64> {
    if hs.is_empty() {
        return Ok(0.0);
    }
    let d = hs[0].dim();
    let sigma = sum_of_squares(hs)?.spectral_norm();
    Ok((1.0 + 2.0 * ceil_ln(d) as f64).sqrt() * sigma.sqrt())
}

/// `(d · (2p−1)!! · ‖Σ H_i²‖^p)^{1/(2p)}`. Returns `+∞` for `p = 0`, where
/// the bound says nothing.
pub fn trace_moment_bound(hs: &[HermitianMatrix], p: u32) -> Result<f64> {
    if p == 0 {
        return Ok(f64::INFINITY);
    }
    if hs.is_empty() {
        return Ok(0.0);
    }
    let d = hs[0].dim();
    let sigma = sum_of_squares(hs)?.spectral_norm();
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let ln = (d as f64).ln() + oracles::ln_double_factorial_odd(p) + p as f64 * sigma.ln();
    Ok((ln / (2.0 * p as f64)).exp())
}

/// Structural cases for the separate upper and lower bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// `W = Σ T_i` with PSD summands; bounds `E‖W‖`.
    Psd,
    /// `X = Σ Y_i` centered Hermitian; bounds `(E‖X‖²)^{1/2}`.
    Hermitian,
    /// `Z = Σ S_i` centered `d1 × d2`; bounds `E‖Z‖` (upper) and `(E‖Z‖²)^{1/2}` (lower).
    Rectangular,
}

/// Statistics consumed by [`case_upper`] and [`case_lower`].
///
/// * `Psd`: `variance = ‖E W‖`, `max_term = E max_i ‖T_i‖`.
/// * `Hermitian`: `variance = ‖E X²‖`, `max_term = E max_i ‖Y_i‖²`.
/// * `Rectangular`: `variance = max(‖E ZZ*‖, ‖E Z*Z‖)`, `max_term = E max_i ‖S_i‖²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStats {
    pub variance: f64,
    pub max_term: f64,
    pub d1: usize,
    pub d2: usize,
}

impl CaseStats {
    fn check(&self, case: Case) -> Result<f64> {
        if !(self.variance >= 0.0 && self.max_term >= 0.0) {
            return Err(Error::invalid(format!(
                "case statistics must be nonnegative (variance {}, max term {})",
                self.variance, self.max_term
            )));
        }
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::EmptyMatrix {
                rows: self.d1,
                cols: self.d2,
            });
        }
        match case {
            Case::Psd | Case::Hermitian => {
                if self.d1 != self.d2 {
                    return Err(Error::NotSquare {
                        rows: self.d1,
                        cols: self.d2,
                    });
                }
                Ok(constant_for_dim(self.d1))
            }
            Case::Rectangular => Ok(dimensional_constant(self.d1, self.d2)),
        }
    }
}

/// The case-specific upper bound.
pub fn case_upper(case: Case, stats: &CaseStats) -> Result<f64> {
    let c = stats.check(case)?;
    Ok(match case {
        Case::Psd => (stats.variance.sqrt() + c.sqrt() * stats.max_term.sqrt()).powi(2),
        Case::Hermitian | Case::Rectangular => c.sqrt() * stats.variance.sqrt() + c * stats.max_term.sqrt(),
    })
}

/// The case-specific lower bound.
pub fn case_lower(case: Case, stats: &CaseStats) -> Result<f64> {
    stats.check(case)?;
    Ok(match case {
        Case::Psd => 0.25 * (stats.variance.sqrt() + stats.max_term.sqrt()).powi(2),
        Case::Hermitian | Case::Rectangular => 0.5 * stats.variance.sqrt() + 0.25 * stats.max_term.sqrt(),
    })
}

/// Largest root of `t² = α + β t`, i.e. `½[β + √(β² + 4α)]`. Any `t ≥ 0` with
/// `t² ≤ α + β t` is at most this, which is at most `√α + β`.
pub fn quadratic_root(alpha: f64, beta: f64) -> f64 {
    0.5 * (beta + (beta * beta + 4.0 * alpha).sqrt())
}

/// Bounds for `(E‖R‖²)^{1/2}` with `R` uncentered, from an interval for the
/// centered part and `‖E R‖`: `‖E R‖ ∓ (E‖R − E R‖²)^{1/2}`.
pub fn uncentered_envelope(mean_norm: f64, centered: &BoundInterval) -> BoundInterval {
    BoundInterval {
        lower: (mean_norm - centered.upper).max(0.0),
        upper: mean_norm + centered.upper,
        constant: centered.constant,
    }
}

/// `sec71`-style asymptote: `E‖Z‖² ≈ 2 ln d`.
pub fn sharpness_scale(d: usize) -> f64 {
    (2.0 * (d as f64).ln()).sqrt()
}

/// Outcome of the exact domination sweep for Rademacher series.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RademacherSweep {
    pub families: u64,
    pub failures: u64,
    /// Smallest `(bound − exact) / bound` observed.
    pub min_relative_slack: f64,
    pub max_relative_slack: f64,
    pub first_failure: Option<RademacherFailure>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RademacherFailure {
    pub seed: RngSeed,
    pub family: u64,
    pub matrices: Vec<HermitianMatrix>,
    pub exact: f64,
    pub bound: f64,
}

/// Family `k` of the sweep: `n ∈ 1..=10` Gaussian Hermitian matrices of
/// dimension `d ∈ 1..=6`, drawn from stream `k`.
pub fn random_rademacher_family(seed: RngSeed, k: u64) -> Vec<HermitianMatrix> {
    let mut rng = CounterRng::new(seed, k, 0x4AD);
    let n = rng.range_inclusive(1, 10);
    let d = rng.range_inclusive(1, 6);
    (0..n).map(|_| rng::random_hermitian(&mut rng, d)).collect()
}

/// `(E‖Σ ε_i H_i‖²)^{1/2}` by enumerating all `2^n` sign patterns.
pub fn exact_rademacher_rms(hs: &[HermitianMatrix]) -> Result<f64> {
    let fam: Vec<FiniteSummand> = hs
        .iter()
        .map(|h| FiniteSummand::rademacher(h.as_rect().clone()))
        .collect();
    Ok(oracles::brute_force_expected_norm(&fam, 2, DEFAULT_CAP)?.sqrt())
}

/// Checks `rademacher_bound ≥ exact` with relative slack `≥ −1e−9` on
/// `families` random instances.
pub fn rademacher_sweep(seed: RngSeed, families: u64) -> Result<RademacherSweep> {
    let rows: Vec<(u64, Vec<HermitianMatrix>, f64, f64)> = (0..families)
        .into_par_iter()
        .map(|k| {
            let hs = random_rademacher_family(seed, k);
            let exact = exact_rademacher_rms(&hs)?;
            let bound = rademacher_bound(&hs)?;
            Ok((k, hs, exact, bound))
        })
        .collect::<Result<_>>()?;
    let mut out = RademacherSweep {
        families,
        failures: 0,
        min_relative_slack: f64::INFINITY,
        max_relative_slack: f64::NEG_INFINITY,
        first_failure: None,
    };
    for (k, hs, exact, bound) in rows {
        let rel = if bound > 0.0 { (bound - exact) / bound } else { 0.0 };
        out.min_relative_slack = out.min_relative_slack.min(rel);
        out.max_relative_slack = out.max_relative_slack.max(rel);
        if rel < -1e-9 {
            out.failures += 1;
            if out.first_failure.is_none() {
                out.first_failure = Some(RademacherFailure {
                    seed,
                    family: k,
                    matrices: hs,
                    exact,
                    bound,
                });
            }
        }
    }
    Ok(out)
}

/// Statistics of the Hermitian dilation of a rectangular model, in the
/// Hermitian case's terms: `‖E[dil(Z)²]‖` and `E max_i ‖dil(S_i)‖²`.
pub fn dilation_case_stats(left: &HermitianMatrix, right: &HermitianMatrix, max_sq: f64) -> CaseStats {
    let blocks = crate::linalg::block_diag(left.as_rect(), right.as_rect());
    let d = left.dim() + right.dim();
    let var = HermitianMatrix::symmetrized(blocks).spectral_norm();
    CaseStats {
        variance: var,
        max_term: max_sq,
        d1: d,
        d2: d,
    }
}

/// `Σ E[S_i S_i*]` style second moment of a fixed rectangular family under
/// Rademacher signs, used by examples and tests.
pub fn rademacher_rect_moments(bs: &[RectMatrix]) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let first = bs.first().ok_or_else(|| Error::invalid("empty family"))?;
    let (r, c) = first.shape();
    let mut left = RectMatrix::zeros(r, r);
    let mut right = RectMatrix::zeros(c, c);
    for b in bs {
        if b.shape() != (r, c) {
            return Err(Error::DimensionMismatch {
                expected: (r, c),
                found: b.shape(),
            });
        }
        left.add_scaled_assign(1.0, b.gram_left().as_rect());
        right.add_scaled_assign(1.0, b.gram_right().as_rect());
    }
    Ok((
        HermitianMatrix::symmetrized(left),
        HermitianMatrix::symmetrized(right),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_example, Example};
    use approx::assert_relative_eq;

    #[test]
    fn constants() {
        assert_eq!(dimensional_constant(1, 1), 12.0);
        assert_eq!(dimensional_constant(3, 5), 28.0);
        assert_eq!(constant_for_dim(1), 4.0);
        let mut prev = 0.0;
        for d in 2..2000 {
            let c = constant_for_dim(d);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn interval_examples() {
        let z = main_interval(&BoundInputs::new(0.0, 0.0, 3, 3, Moment::SecondMoment).unwrap()).unwrap();
        assert_eq!((z.lower, z.upper), (0.0, 0.0));
        let a = main_interval(&BoundInputs::new(1.0, 0.1, 2, 2, Moment::SecondMoment).unwrap()).unwrap();
        let b = main_interval(&BoundInputs::new(1.1, 0.1, 2, 2, Moment::SecondMoment).unwrap()).unwrap();
        let c = main_interval(&BoundInputs::new(1.0, 0.2, 2, 2, Moment::SecondMoment).unwrap()).unwrap();
        assert!(b.lower > a.lower && b.upper > a.upper);
        assert!(c.lower > a.lower && c.upper > a.upper);
        let f = main_interval(&BoundInputs::new(1.0, 0.1, 2, 2, Moment::FirstMoment).unwrap()).unwrap();
        assert_relative_eq!(f.lower, (1.0f64 / 8.0).sqrt() + 0.1 / 8.0);
        assert_eq!(f.upper, a.upper);
        assert!(BoundInputs::new(1.0, 0.0, 2, 2, Moment::SecondMoment).is_err());
        assert!(BoundInputs::new(-1.0, 1.0, 2, 2, Moment::SecondMoment).is_err());
    }

    #[test]
    fn variance_of_examples() {
        for (e, d, expect) in [(Example::Sec71, 5, 1.0), (Example::Sec73, 6, 6.0), (Example::Sec74, 4, 2.0)] {
            let m = make_example(e, d, 10).unwrap();
            let mom = crate::models::analytic_second_moments(&m).unwrap().unwrap();
            assert_relative_eq!(variance_param(&m, &mom).unwrap(), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn large_dev_analytic() {
        let cfg = MCConfig::new(10, RngSeed(1));
        let m = make_example(Example::Sec71, 4, 25).unwrap();
        assert_relative_eq!(large_dev_param(&m, LargeDevMode::Analytic, &cfg).unwrap(), 0.2, max_relative = 1e-12);
        let m = make_example(Example::Sec73, 4, 0).unwrap();
        assert_relative_eq!(large_dev_param(&m, LargeDevMode::Analytic, &cfg).unwrap(), 1.0);
        let m = make_example(Example::Sec74, 4, 0).unwrap();
        assert!(matches!(
            large_dev_param(&m, LargeDevMode::Analytic, &cfg),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn rademacher_bound_examples() {
        let h = HermitianMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 0.5]]).unwrap();
        let b = rademacher_bound(std::slice::from_ref(&h)).unwrap();
        assert_relative_eq!(b, 3f64.sqrt() * h.spectral_norm(), max_relative = 1e-12);
        assert!(b >= exact_rademacher_rms(&[h]).unwrap());
        let basis: Vec<HermitianMatrix> = (0..5)
            .map(|i| {
                let mut v = vec![0.0; 5];
                v[i] = 1.0;
                HermitianMatrix::from_real_diagonal(&v).unwrap()
            })
            .collect();
        assert_relative_eq!(rademacher_bound(&basis).unwrap(), (1.0 + 2.0 * 2.0f64).sqrt(), max_relative = 1e-12);
        assert_eq!(rademacher_bound(&[]).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_bound_is_tight() {
        let hs: Vec<HermitianMatrix> = [0.5, -1.0, 2.0]
            .iter()
            .map(|&x| HermitianMatrix::from_real_diagonal(&[x]).unwrap())
            .collect();
        assert_relative_eq!(
            rademacher_bound(&hs).unwrap(),
            exact_rademacher_rms(&hs).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn trace_moment_chain() {
        let mut g = CounterRng::new(RngSeed(4), 0, 0);
        let hs: Vec<HermitianMatrix> = (0..4).map(|_| rng::random_hermitian(&mut g, 4)).collect();
        let sigma = sum_of_squares(&hs).unwrap().spectral_norm();
        assert_relative_eq!(trace_moment_bound(&hs, 1).unwrap(), (4.0 * sigma).sqrt(), max_relative = 1e-12);
        let p = ceil_ln(4);
        let tm = trace_moment_bound(&hs, p).unwrap();
        assert!(tm <= rademacher_bound(&hs).unwrap() * (1.0 + 1e-12));
        assert!(trace_moment_bound(&hs, 0).unwrap().is_infinite());
        let tr = oracles::exact_trace_second_moment(&hs, DEFAULT_CAP).unwrap();
        let expect = sum_of_squares(&hs).unwrap().trace();
        assert_relative_eq!(tr, expect, max_relative = 1e-12);
    }

    #[test]
    fn case_examples() {
        let s = |v, m, d| CaseStats {
            variance: v,
            max_term: m,
            d1: d,
            d2: d,
        };
        assert_relative_eq!(case_upper(Case::Psd, &s(3.0, 0.0, 4)).unwrap(), 3.0, max_relative = 1e-15);
        assert_relative_eq!(case_upper(Case::Hermitian, &s(1.0, 0.0, 2)).unwrap(), 12f64.sqrt());
        assert_relative_eq!(case_lower(Case::Psd, &s(4.0, 1.0, 3)).unwrap(), 2.25);
        for c in [Case::Psd, Case::Hermitian, Case::Rectangular] {
            assert_eq!(case_lower(c, &s(0.0, 0.0, 3)).unwrap(), 0.0);
        }
        assert!(case_upper(Case::Hermitian, &s(-1.0, 0.0, 2)).is_err());
        assert!(case_upper(
            Case::Hermitian,
            &CaseStats {
                variance: 1.0,
                max_term: 1.0,
                d1: 2,
                d2: 3
            }
        )
        .is_err());
    }

    #[test]
    fn quadratic_step() {
        for (a, b) in [(0.0, 0.0), (1.0, 0.0), (0.0, 2.0), (3.0, 1.5)] {
            let t = quadratic_root(a, b);
            assert!((t * t - (a + b * t)).abs() < 1e-12);
            assert!(t <= a.sqrt() + b + 1e-15);
        }
    }

    #[test]
    fn small_rademacher_sweep() {
        let s = rademacher_sweep(RngSeed(2), 20).unwrap();
        assert_eq!(s.failures, 0);
        assert!(s.min_relative_slack >= -1e-9);
    }
}
