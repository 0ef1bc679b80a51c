//! Independent families `{S_i}` and their sums `Z = Σ S_i`: built-in
//! families, the four optimality examples, user-defined finite-support
//! summands, seeded samplers and closed-form moments.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, HermitianMatrix, RectMatrix, C64};
use crate::oracles::FiniteSummand;
use crate::rng::{CounterRng, RngSeed};

/// One summand `S_i`, described by its distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SummandSpec {
    /// `ε H` with a Rademacher sign.
    FixedRademacher { h: HermitianMatrix },
    /// `γ H` with a standard normal coefficient.
    FixedGaussian { h: HermitianMatrix },
    /// `scale · ε · E_ii` in dimension `d`.
    ScaledBasisRademacher { i: usize, scale: f64, d: usize },
    /// `(δ − p) E_ii` with `δ ~ Bernoulli(p)`.
    CenteredBernoulliBasis { i: usize, p: f64, d: usize },
    /// `δ E_ii` with `δ ~ Bernoulli(p)`; not centered.
    BernoulliBasis { i: usize, p: f64, d: usize },
    /// `ε E_ij` in a `d × d` matrix.
    RademacherEntry { i: usize, j: usize, d: usize },
    /// `P E_ii` where `P` is symmetric with `P{|P| ≥ t} = t^{−4}` for `t ≥ 1`.
    ParetoDiagonal { i: usize, d: usize },
    /// An explicit finite distribution.
    Finite { summand: FiniteSummand },
}

fn check_index(i: usize, d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if i >= d {
        return Err(Error::invalid(format!("index {i} outside dimension {d}")));
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("probability {p} outside (0, 1]")));
    }
    Ok(())
}

fn diag_unit(d: usize, i: usize, value: f64) -> HermitianMatrix {
    let mut diag = vec![0.0; d];
    diag[i] = value;
    HermitianMatrix::from_real_diagonal(&diag).expect("positive dimension")
}

impl SummandSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SummandSpec::FixedRademacher { .. } | SummandSpec::FixedGaussian { .. } => Ok(()),
            SummandSpec::ScaledBasisRademacher { i, scale, d } => {
                check_index(*i, *d)?;
                if !scale.is_finite() {
                    return Err(Error::invalid("scale must be finite"));
                }
                Ok(())
            }
            SummandSpec::CenteredBernoulliBasis { i, p, d } | SummandSpec::BernoulliBasis { i, p, d } => {
                check_index(*i, *d)?;
                check_probability(*p)
            }
            SummandSpec::RademacherEntry { i, j, d } => {
                check_index(*i, *d)?;
                check_index(*j, *d)
            }
            SummandSpec::ParetoDiagonal { i, d } => check_index(*i, *d),
            SummandSpec::Finite { .. } => Ok(()),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            SummandSpec::FixedRademacher { h } | SummandSpec::FixedGaussian { h } => (h.dim(), h.dim()),
            SummandSpec::ScaledBasisRademacher { d, .. }
            | SummandSpec::CenteredBernoulliBasis { d, .. }
            | SummandSpec::BernoulliBasis { d, .. }
            | SummandSpec::RademacherEntry { d, .. }
            | SummandSpec::ParetoDiagonal { d, .. } => (*d, *d),
            SummandSpec::Finite { summand } => summand.shape(),
        }
    }

    /// True when every realization is Hermitian.
    pub fn is_hermitian(&self) -> bool {
        match self {
            SummandSpec::RademacherEntry { i, j, .. } => i == j,
            SummandSpec::Finite { summand } => summand
                .outcomes()
                .iter()
                .all(|o| o.matrix.is_square() && o.matrix.max_abs_diff(&o.matrix.adjoint()) == 0.0),
            _ => true,
        }
    }

    /// `E S`.
    pub fn mean(&self) -> RectMatrix {
        let (r, c) = self.shape();
        match self {
            SummandSpec::BernoulliBasis { i, p, .. } => {
                let mut m = RectMatrix::zeros(r, c);
                m.set(*i, *i, C64::new(*p, 0.0));
                m
            }
            SummandSpec::Finite { summand } => summand.mean(),
            _ => RectMatrix::zeros(r, c),
        }
    }

    /// Adds `E S` into `acc` without materializing zero matrices.
    fn add_mean_to(&self, acc: &mut RectMatrix) {
        match self {
            SummandSpec::BernoulliBasis { i, p, .. } => acc.add_at(*i, *i, C64::new(*p, 0.0)),
            SummandSpec::Finite { summand } => acc.add_scaled_assign(1.0, &summand.mean()),
            _ => {}
        }
    }

    /// Adds `E SS*` and `E S*S` into the accumulators. Basis families touch
    /// one diagonal entry each. Returns `false` when there is no closed form.
    fn add_second_moments_to(&self, left: &mut RectMatrix, right: &mut RectMatrix) -> bool {
        let diag = |m: &mut RectMatrix, k: usize, x: f64| m.add_at(k, k, C64::new(x, 0.0));
        match self {
            SummandSpec::ScaledBasisRademacher { i, scale, .. } => {
                diag(left, *i, scale * scale);
                diag(right, *i, scale * scale);
            }
            SummandSpec::CenteredBernoulliBasis { i, p, .. } => {
                diag(left, *i, p * (1.0 - p));
                diag(right, *i, p * (1.0 - p));
            }
            SummandSpec::BernoulliBasis { i, p, .. } => {
                diag(left, *i, *p);
                diag(right, *i, *p);
            }
            SummandSpec::RademacherEntry { i, j, .. } => {
                diag(left, *i, 1.0);
                diag(right, *j, 1.0);
            }
            SummandSpec::ParetoDiagonal { i, .. } => {
                diag(left, *i, PARETO_SECOND_MOMENT);
                diag(right, *i, PARETO_SECOND_MOMENT);
            }
            _ => match self.second_moments() {
                Some((l, r)) => {
                    left.add_scaled_assign(1.0, l.as_rect());
                    right.add_scaled_assign(1.0, r.as_rect());
                }
                None => return false,
            },
        }
        true
    }

    pub fn is_centered(&self) -> bool {
        match self {
            SummandSpec::BernoulliBasis { .. } => false,
            SummandSpec::Finite { summand } => summand.is_centered(),
            _ => true,
        }
    }

    /// `S − E S` as a spec of the same kind where possible.
    pub fn centered(&self) -> SummandSpec {
        match self {
            SummandSpec::BernoulliBasis { i, p, d } => SummandSpec::CenteredBernoulliBasis {
                i: *i,
                p: *p,
                d: *d,
            },
            SummandSpec::Finite { summand } if !summand.is_centered() => SummandSpec::Finite {
                summand: summand.centered(),
            },
            other => other.clone(),
        }
    }

    /// `(E[S S*], E[S* S])`, or `None` without a closed form.
    pub fn second_moments(&self) -> Option<(HermitianMatrix, HermitianMatrix)> {
        Some(match self {
            SummandSpec::FixedRademacher { h } | SummandSpec::FixedGaussian { h } => {
                let sq = h.square();
                (sq.clone(), sq)
            }
            SummandSpec::ScaledBasisRademacher { i, scale, d } => {
                let m = diag_unit(*d, *i, scale * scale);
                (m.clone(), m)
            }
            SummandSpec::CenteredBernoulliBasis { i, p, d } => {
                let m = diag_unit(*d, *i, p * (1.0 - p));
                (m.clone(), m)
            }
            SummandSpec::BernoulliBasis { i, p, d } => {
                let m = diag_unit(*d, *i, *p);
                (m.clone(), m)
            }
            SummandSpec::RademacherEntry { i, j, d } => (diag_unit(*d, *i, 1.0), diag_unit(*d, *j, 1.0)),
            SummandSpec::ParetoDiagonal { i, d } => {
                let m = diag_unit(*d, *i, PARETO_SECOND_MOMENT);
                (m.clone(), m)
            }
            SummandSpec::Finite { summand } => summand.second_moments(),
        })
    }

    /// The distribution of `‖S‖²` as `(probability, value)` pairs when it is
    /// discrete and known.
    pub fn norm_sq_distribution(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            SummandSpec::FixedRademacher { h } => Some(vec![(1.0, h.spectral_norm().powi(2))]),
            SummandSpec::ScaledBasisRademacher { scale, .. } => Some(vec![(1.0, scale * scale)]),
            SummandSpec::CenteredBernoulliBasis { p, .. } => {
                if *p == 1.0 {
                    Some(vec![(1.0, 0.0)])
                } else {
                    Some(vec![(*p, (1.0 - p) * (1.0 - p)), (1.0 - p, p * p)])
                }
            }
            SummandSpec::BernoulliBasis { p, .. } => {
                if *p == 1.0 {
                    Some(vec![(1.0, 1.0)])
                } else {
                    Some(vec![(*p, 1.0), (1.0 - p, 0.0)])
                }
            }
            SummandSpec::RademacherEntry { .. } => Some(vec![(1.0, 1.0)]),
            SummandSpec::Finite { summand } => Some(
                summand
                    .outcomes()
                    .iter()
                    .map(|o| (o.prob, spectral_norm(&o.matrix).powi(2)))
                    .collect(),
            ),
            SummandSpec::FixedGaussian { .. } | SummandSpec::ParetoDiagonal { .. } => None,
        }
    }

    /// The same distribution as a [`FiniteSummand`], when the support is finite.
    pub fn to_finite(&self) -> Option<FiniteSummand> {
        let (r, c) = self.shape();
        let unit = |i: usize, j: usize, v: f64| {
            let mut m = RectMatrix::zeros(r, c);
            m.set(i, j, C64::new(v, 0.0));
            m
        };
        let two = |a: (f64, RectMatrix), b: (f64, RectMatrix)| {
            if a.0 >= 1.0 {
                FiniteSummand::new(vec![(1.0, a.1)]).ok()
            } else {
                FiniteSummand::new(vec![a, b]).ok()
            }
        };
        match self {
            SummandSpec::FixedRademacher { h } => Some(FiniteSummand::rademacher(h.as_rect().clone())),
            SummandSpec::ScaledBasisRademacher { i, scale, .. } => {
                Some(FiniteSummand::rademacher(unit(*i, *i, *scale)))
            }
            SummandSpec::CenteredBernoulliBasis { i, p, .. } => {
                two((*p, unit(*i, *i, 1.0 - p)), (1.0 - p, unit(*i, *i, -p)))
            }
            SummandSpec::BernoulliBasis { i, p, .. } => {
                two((*p, unit(*i, *i, 1.0)), (1.0 - p, RectMatrix::zeros(r, c)))
            }
            SummandSpec::RademacherEntry { i, j, .. } => Some(FiniteSummand::rademacher(unit(*i, *j, 1.0))),
            SummandSpec::Finite { summand } => Some(summand.clone()),
            SummandSpec::FixedGaussian { .. } | SummandSpec::ParetoDiagonal { .. } => None,
        }
    }
}

/// `E P² = 2` for the symmetric Pareto variable with tail `t^{−4}`.
pub const PARETO_SECOND_MOMENT: f64 = 2.0;

/// Inverse-transform sample of the symmetric Pareto variable: `s · u^{−1/4}`.
///
/// `u` must lie in `(0, 1]` and `s` must be `±1`.
pub fn pareto_sample(u: f64, s: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::invalid(format!("uniform variate {u} outside (0, 1]")));
    }
    if s != 1.0 && s != -1.0 {
        return Err(Error::invalid(format!("sign variate {s} is not ±1")));
    }
    Ok(s * u.powf(-0.25))
}

/// `E max_{i ≤ d} P_i²` for independent Pareto variables, by quadrature of
/// `1 + ∫_0^1 [1 − (1 − w²)^d] / w² dw`.
pub fn pareto_max_sq_exact(d: usize) -> f64 {
    let d = d as f64;
    let f = |w: f64| {
        if w == 0.0 {
            return d;
        }
        let w2 = w * w;
        -(d * (-w2).ln_1p()).exp_m1() / w2
    };
    // composite Simpson on a grid refined near zero via w = t²
    let g = |t: f64| 2.0 * t * f(t * t);
    let m = 20_000;
    let h = 1.0 / m as f64;
    let mut acc = g(0.0) + g(1.0);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(k as f64 * h);
    }
    1.0 + acc * h / 3.0
}

/// A sum `Z = Σ S_i` of independent summands with common shape `d1 × d2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependentSumModel {
    pub name: String,
    pub d1: usize,
    pub d2: usize,
    /// The size parameter reported alongside the model.
    pub n: usize,
    pub summands: Vec<SummandSpec>,
    pub centered: bool,
}

impl IndependentSumModel {
    pub fn new(name: impl Into<String>, d1: usize, d2: usize, n: usize, summands: Vec<SummandSpec>) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::EmptyMatrix { rows: d1, cols: d2 });
        }
        if summands.is_empty() {
            return Err(Error::invalid("model needs at least one summand"));
        }
        for s in &summands {
            s.validate()?;
            if s.shape() != (d1, d2) {
                return Err(Error::DimensionMismatch {
                    expected: (d1, d2),
                    found: s.shape(),
                });
            }
        }
        let centered = summands.iter().all(SummandSpec::is_centered);
        Ok(IndependentSumModel {
            name: name.into(),
            d1,
            d2,
            n,
            summands,
            centered,
        })
    }

    /// A Rademacher series `Σ ε_i H_i`.
    pub fn rademacher_series(name: impl Into<String>, hs: Vec<HermitianMatrix>) -> Result<Self> {
        let d = hs.first().map(HermitianMatrix::dim).unwrap_or(0);
        let n = hs.len();
        let summands = hs.into_iter().map(|h| SummandSpec::FixedRademacher { h }).collect();
        Self::new(name, d, d, n, summands)
    }

    /// A Gaussian series `Σ γ_i H_i`.
    pub fn gaussian_series(name: impl Into<String>, hs: Vec<HermitianMatrix>) -> Result<Self> {
        let d = hs.first().map(HermitianMatrix::dim).unwrap_or(0);
        let n = hs.len();
        let summands = hs.into_iter().map(|h| SummandSpec::FixedGaussian { h }).collect();
        Self::new(name, d, d, n, summands)
    }

    pub fn from_finite(name: impl Into<String>, summands: Vec<FiniteSummand>) -> Result<Self> {
        let (d1, d2) = summands
            .first()
            .map(FiniteSummand::shape)
            .ok_or_else(|| Error::invalid("model needs at least one summand"))?;
        let n = summands.len();
        let specs = summands.into_iter().map(|summand| SummandSpec::Finite { summand }).collect();
        Self::new(name, d1, d2, n, specs)
    }

    pub fn is_hermitian(&self) -> bool {
        self.d1 == self.d2 && self.summands.iter().all(SummandSpec::is_hermitian)
    }

    /// `E Z = Σ E S_i`.
    pub fn mean(&self) -> RectMatrix {
        let mut acc = RectMatrix::zeros(self.d1, self.d2);
        for s in &self.summands {
            s.add_mean_to(&mut acc);
        }
        acc
    }

    /// The summands as finite distributions, if all have finite support.
    pub fn to_finite(&self) -> Option<Vec<FiniteSummand>> {
        self.summands.iter().map(SummandSpec::to_finite).collect()
    }

    /// `E max_i ‖S_i‖²` computed exactly from the product of the per-summand
    /// distribution functions, when every `‖S_i‖²` has a known discrete law.
    pub fn max_sq_norm_exact(&self) -> Option<f64> {
        let dists: Vec<Vec<(f64, f64)>> = self
            .summands
            .iter()
            .map(SummandSpec::norm_sq_distribution)
            .collect::<Option<_>>()?;
        let mut values: Vec<f64> = dists.iter().flatten().map(|&(_, v)| v).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        // F(t) = Π_i P(‖S_i‖² ≤ t), in logs.
        let ln_cdf = |t: f64| -> f64 {
            let mut acc = 0.0;
            for dist in &dists {
                let p: f64 = dist.iter().filter(|&&(_, v)| v <= t).map(|&(p, _)| p).sum();
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                acc += p.min(1.0).ln();
            }
            acc
        };
        let mut prev = 0.0;
        let mut total = 0.0;
        for (k, &v) in values.iter().enumerate() {
            let f = if k + 1 == values.len() { 1.0 } else { ln_cdf(v).exp() };
            total += v * (f - prev);
            prev = f;
        }
        Some(total)
    }
}

/// The four built-in optimality examples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    Sec71,
    Sec72,
    Sec73,
    Sec74,
}

impl Example {
    pub const ALL: [Example; 4] = [Example::Sec71, Example::Sec72, Example::Sec73, Example::Sec74];

    pub fn name(self) -> &'static str {
        match self {
            Example::Sec71 => "sec71",
            Example::Sec72 => "sec72",
            Example::Sec73 => "sec73",
            Example::Sec74 => "sec74",
        }
    }

    /// Whether `n` is a free parameter of the example.
    pub fn uses_n(self) -> bool {
        matches!(self, Example::Sec71 | Example::Sec72)
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Example::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown example `{s}` (expected sec71, sec72, sec73 or sec74)")))
    }
}

/// Builds one of the optimality examples.
///
/// * `sec71`: `Σ_{i ≤ d} Σ_{j ≤ n} n^{−1/2} ε_ij E_ii`
/// * `sec72`: `Σ_{i ≤ d} Σ_{j ≤ n} (δ_ij − 1/n) E_ii` with `δ_ij ~ Bernoulli(1/n)`
/// * `sec73`: `Σ_{i, j ≤ d} ε_ij E_ij`
/// * `sec74`: `Σ_{i ≤ d} P_i E_ii` with Pareto `P_i`
///
/// `n` is ignored by `sec73` and `sec74`; their reported `n` is the number of summands.
pub fn make_example(example: Example, d: usize, n: usize) -> Result<IndependentSumModel> {
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    if example.uses_n() && n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let (summands, n_reported): (Vec<SummandSpec>, usize) = match example {
        Example::Sec71 => {
            let scale = 1.0 / (n as f64).sqrt();
            let s = (0..d)
                .flat_map(|i| (0..n).map(move |_| SummandSpec::ScaledBasisRademacher { i, scale, d }))
                .collect();
            (s, n)
        }
        Example::Sec72 => {
            let p = 1.0 / n as f64;
            let s = (0..d)
                .flat_map(|i| (0..n).map(move |_| SummandSpec::CenteredBernoulliBasis { i, p, d }))
                .collect();
            (s, n)
        }
        Example::Sec73 => {
            let s = (0..d)
                .flat_map(|i| (0..d).map(move |j| SummandSpec::RademacherEntry { i, j, d }))
                .collect();
            (s, d * d)
        }
        Example::Sec74 => ((0..d).map(|i| SummandSpec::ParetoDiagonal { i, d }).collect(), d),
    };
    IndependentSumModel::new(example.name(), d, d, n_reported, summands)
}

/// `(E[Z Z*], E[Z* Z]) = Σ_i (E[S_i S_i*], E[S_i* S_i])` for a centered model.
///
/// `Ok(None)` when some family has no closed form.
pub fn analytic_second_moments(model: &IndependentSumModel) -> Result<Option<(HermitianMatrix, HermitianMatrix)>> {
    if !model.centered {
        return Err(Error::NotCentered);
    }
    let mut left = RectMatrix::zeros(model.d1, model.d1);
    let mut right = RectMatrix::zeros(model.d2, model.d2);
    for s in &model.summands {
        if !s.add_second_moments_to(&mut left, &mut right) {
            return Ok(None);
        }
    }
    Ok(Some((
        HermitianMatrix::symmetrized(left),
        HermitianMatrix::symmetrized(right),
    )))
}

/// Subtracts every summand's mean. Returns the centered model and `E R = Σ E S_i`.
pub fn center(model: &IndependentSumModel) -> Result<(IndependentSumModel, RectMatrix)> {
    let mean = model.mean();
    if model.centered {
        return Ok((model.clone(), mean));
    }
    let summands = model.summands.iter().map(SummandSpec::centered).collect();
    let mut out = IndependentSumModel::new(model.name.clone(), model.d1, model.d2, model.n, summands)?;
    out.centered = true;
    Ok((out, mean))
}

/// One realized summand in compact form.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Draw {
    /// A single nonzero entry.
    Entry { row: usize, col: usize, value: f64 },
    /// `coef · mats[id]`.
    Scaled { id: usize, coef: f64 },
}

/// Precomputed matrices and norms for repeated sampling of one model.
pub(crate) struct Sampler<'a> {
    model: &'a IndependentSumModel,
    mats: Vec<RectMatrix>,
    norms_sq: Vec<f64>,
    /// Per summand: matrix ids (one for fixed families, one per outcome for finite).
    ids: Vec<Vec<usize>>,
    /// Per summand: cumulative outcome probabilities (finite families only).
    cum: Vec<Vec<f64>>,
}

impl<'a> Sampler<'a> {
    pub(crate) fn new(model: &'a IndependentSumModel) -> Self {
        let mut mats = Vec::new();
        let mut ids = Vec::with_capacity(model.summands.len());
        let mut cum = Vec::with_capacity(model.summands.len());
        for s in &model.summands {
            match s {
                SummandSpec::FixedRademacher { h } | SummandSpec::FixedGaussian { h } => {
                    ids.push(vec![mats.len()]);
                    mats.push(h.as_rect().clone());
                    cum.push(Vec::new());
                }
                SummandSpec::Finite { summand } => {
                    let mut v = Vec::new();
                    let mut c = Vec::new();
                    let mut acc = 0.0;
                    for o in summand.outcomes() {
                        v.push(mats.len());
                        mats.push(o.matrix.clone());
                        acc += o.prob;
                        c.push(acc);
                    }
                    ids.push(v);
                    cum.push(c);
                }
                _ => {
                    ids.push(Vec::new());
                    cum.push(Vec::new());
                }
            }
        }
        let norms_sq = mats.iter().map(|m| spectral_norm(m).powi(2)).collect();
        Sampler {
            model,
            mats,
            norms_sq,
            ids,
            cum,
        }
    }

    /// Realization of summand `position` in sample `index`.
    pub(crate) fn draw(&self, seed: RngSeed, index: u64, position: usize) -> Draw {
        let mut rng = CounterRng::new(seed, index, position as u64);
        match &self.model.summands[position] {
            SummandSpec::FixedRademacher { .. } => Draw::Scaled {
                id: self.ids[position][0],
                coef: rng.sign(),
            },
            SummandSpec::FixedGaussian { .. } => Draw::Scaled {
                id: self.ids[position][0],
                coef: rng.gaussian(),
            },
            SummandSpec::ScaledBasisRademacher { i, scale, .. } => Draw::Entry {
                row: *i,
                col: *i,
                value: scale * rng.sign(),
            },
            SummandSpec::CenteredBernoulliBasis { i, p, .. } => Draw::Entry {
                row: *i,
                col: *i,
                value: rng.bernoulli(*p) - p,
            },
            SummandSpec::BernoulliBasis { i, p, .. } => Draw::Entry {
                row: *i,
                col: *i,
                value: rng.bernoulli(*p),
            },
            SummandSpec::RademacherEntry { i, j, .. } => Draw::Entry {
                row: *i,
                col: *j,
                value: rng.sign(),
            },
            SummandSpec::ParetoDiagonal { i, .. } => {
                let u = rng.uniform_open_closed();
                let s = rng.sign();
                Draw::Entry {
                    row: *i,
                    col: *i,
                    value: pareto_sample(u, s).expect("u in (0, 1], s = ±1"),
                }
            }
            SummandSpec::Finite { .. } => {
                let u = rng.uniform();
                let cum = &self.cum[position];
                let k = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
                Draw::Scaled {
                    id: self.ids[position][k],
                    coef: 1.0,
                }
            }
        }
    }

    pub(crate) fn norm_sq(&self, draw: Draw) -> f64 {
        match draw {
            Draw::Entry { value, .. } => value * value,
            Draw::Scaled { id, coef } => coef * coef * self.norms_sq[id],
        }
    }

    pub(crate) fn materialize(&self, draw: Draw) -> RectMatrix {
        let mut m = RectMatrix::zeros(self.model.d1, self.model.d2);
        self.accumulate(&mut m, draw);
        m
    }

    pub(crate) fn accumulate(&self, z: &mut RectMatrix, draw: Draw) {
        match draw {
            Draw::Entry { row, col, value } => z.add_at(row, col, C64::new(value, 0.0)),
            Draw::Scaled { id, coef } => z.add_scaled_assign(coef, &self.mats[id]),
        }
    }

    /// One realization of `Z` together with `max_i ‖S_i‖²`.
    pub(crate) fn realize(&self, seed: RngSeed, index: u64) -> (RectMatrix, f64) {
        let mut z = RectMatrix::zeros(self.model.d1, self.model.d2);
        let mut max_sq: f64 = 0.0;
        for pos in 0..self.model.summands.len() {
            let draw = self.draw(seed, index, pos);
            max_sq = max_sq.max(self.norm_sq(draw));
            self.accumulate(&mut z, draw);
        }
        (z, max_sq)
    }
}

/// One realization of every summand for sample `index`. The summand at
/// position `i` depends only on `(seed, index, i)`.
pub fn sample_summands(model: &IndependentSumModel, seed: RngSeed, index: u64) -> Vec<RectMatrix> {
    let sampler = Sampler::new(model);
    (0..model.summands.len())
        .map(|pos| sampler.materialize(sampler.draw(seed, index, pos)))
        .collect()
}

/// A model description on disk: either a built-in example
/// `{"name": "sec71", "d": 16, "n": 100}` or a custom family
/// `{"name": "...", "d1": 2, "d2": 2, "summands": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelDocument {
    Custom {
        #[serde(default)]
        name: Option<String>,
        d1: usize,
        d2: usize,
        #[serde(default)]
        n: Option<usize>,
        summands: Vec<SummandSpec>,
    },
    Builtin {
        name: Example,
        d: usize,
        #[serde(default)]
        n: Option<usize>,
    },
}

impl ModelDocument {
    pub fn into_model(self) -> Result<IndependentSumModel> {
        match self {
            ModelDocument::Custom {
                name,
                d1,
                d2,
                n,
                summands,
            } => {
                let count = summands.len();
                IndependentSumModel::new(name.unwrap_or_else(|| "custom".into()), d1, d2, n.unwrap_or(count), summands)
            }
            ModelDocument::Builtin { name, d, n } => make_example(name, d, n.unwrap_or(1)),
        }
    }

    pub fn from_json(text: &str) -> Result<IndependentSumModel> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let doc: ModelDocument = if value.get("summands").is_some() {
            #[derive(Deserialize)]
            struct Custom {
                #[serde(default)]
                name: Option<String>,
                d1: usize,
                d2: usize,
                #[serde(default)]
                n: Option<usize>,
                summands: Vec<SummandSpec>,
            }
            let c: Custom = serde_json::from_value(value)?;
            ModelDocument::Custom {
                name: c.name,
                d1: c.d1,
                d2: c.d2,
                n: c.n,
                summands: c.summands,
            }
        } else {
            #[derive(Deserialize)]
            struct Builtin {
                name: Example,
                d: usize,
                #[serde(default)]
                n: Option<usize>,
            }
            let b: Builtin = serde_json::from_value(value)?;
            ModelDocument::Builtin {
                name: b.name,
                d: b.d,
                n: b.n,
            }
        };
        doc.into_model()
    }

    pub fn from_path(path: &Path) -> Result<IndependentSumModel> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl From<&IndependentSumModel> for ModelDocument {
    fn from(m: &IndependentSumModel) -> Self {
        ModelDocument::Custom {
            name: Some(m.name.clone()),
            d1: m.d1,
            d2: m.d2,
            n: Some(m.n),
            summands: m.summands.clone(),
        }
    }
}
