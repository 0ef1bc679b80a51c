//! Numerical checkers for the auxiliary matrix inequalities and identities,
//! and an exact expectation engine for independent finite-support families.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, dilation, eig_hermitian, loewner_leq, matrix_power, spectral_norm, trace,
    HermitianMatrix, RectMatrix,
};
use crate::rng::{self, CounterRng, RngSeed};

/// Default ceiling on the number of outcome combinations enumerated.
pub const DEFAULT_CAP: u64 = 1 << 20;
/// Relative tolerance for inequality checks, scaled by `max(1, |rhs|)`.
pub const INEQUALITY_REL_TOL: f64 = 1e-9;
/// Tolerance for PSD preconditions, scaled by `max(1, ‖A‖_F)`.
pub const PSD_REL_TOL: f64 = 1e-10;
/// Probabilities of a finite summand must sum to one within this.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Outcome of one numerical check.
///
/// For inequalities, `holds ⇔ lhs ≤ rhs + tolerance` and `slack = rhs − lhs`.
/// For identities, `lhs` is the residual norm, `rhs` is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn inequality(lhs: f64, rhs: f64) -> Self {
        let tolerance = INEQUALITY_REL_TOL * rhs.abs().max(1.0);
        CheckResult {
            holds: lhs <= rhs + tolerance,
            lhs,
            rhs,
            slack: rhs - lhs,
            tolerance,
        }
    }

    fn identity(residual: f64, tolerance: f64) -> Self {
        CheckResult {
            holds: residual <= tolerance,
            lhs: residual,
            rhs: 0.0,
            slack: -residual,
            tolerance,
        }
    }
}

/// The kinds of auxiliary facts that can be checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactKind {
    Heinz,
    GmAmTrace,
    SumSquares,
    TraceProduct,
    Monotonicity,
    DiffPowers,
    DoubleFactorial,
    DilationSquare,
}

impl FactKind {
    pub const ALL: [FactKind; 8] = [
        FactKind::Heinz,
        FactKind::GmAmTrace,
        FactKind::SumSquares,
        FactKind::TraceProduct,
        FactKind::Monotonicity,
        FactKind::DiffPowers,
        FactKind::DoubleFactorial,
        FactKind::DilationSquare,
    ];

    pub fn is_identity(self) -> bool {
        matches!(self, FactKind::DiffPowers | FactKind::DilationSquare)
    }
}

/// A concrete instance of one auxiliary fact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FactCase {
    /// `λ^θ μ^{1−θ} + λ^{1−θ} μ^θ ≤ λ + μ` for `λ, μ ≥ 0`, `θ ∈ [0, 1]`.
    Heinz { theta: f64, lambda: f64, mu: f64 },
    /// `tr[H W^q H Y^{2r−q}] + tr[H W^{2r−q} H Y^q] ≤ tr[H² (W^{2r} + Y^{2r})]`.
    GmAmTrace {
        h: HermitianMatrix,
        w: HermitianMatrix,
        y: HermitianMatrix,
        r: u32,
        q: u32,
    },
    /// `‖Σ A_i²‖ ≤ max_i ‖A_i‖ · ‖Σ A_i‖` for PSD `A_i`.
    SumSquares { a: Vec<HermitianMatrix> },
    /// `tr[H A] ≤ ‖H‖ · tr A` for PSD `A`.
    TraceProduct { h: HermitianMatrix, a: HermitianMatrix },
    /// `A ≼ H` implies `λ_max(A) ≤ λ_max(H)`.
    Monotonicity { a: HermitianMatrix, h: HermitianMatrix },
    /// `W^{2p−1} − Y^{2p−1} = Σ_{q=0}^{2p−2} W^q (W − Y) Y^{2p−2−q}`.
    DiffPowers {
        w: HermitianMatrix,
        y: HermitianMatrix,
        p: u32,
    },
    /// `(2p−1)!! ≤ ((2p+1)/e)^p`.
    DoubleFactorial { p: u32 },
    /// `dilation(B)² = blockdiag(B B*, B* B)`.
    DilationSquare { b: RectMatrix },
}

impl FactCase {
    pub fn kind(&self) -> FactKind {
        match self {
            FactCase::Heinz { .. } => FactKind::Heinz,
            FactCase::GmAmTrace { .. } => FactKind::GmAmTrace,
            FactCase::SumSquares { .. } => FactKind::SumSquares,
            FactCase::TraceProduct { .. } => FactKind::TraceProduct,
            FactCase::Monotonicity { .. } => FactKind::Monotonicity,
            FactCase::DiffPowers { .. } => FactKind::DiffPowers,
            FactCase::DoubleFactorial { .. } => FactKind::DoubleFactorial,
            FactCase::DilationSquare { .. } => FactKind::DilationSquare,
        }
    }
}

fn require_psd(a: &HermitianMatrix, what: &str) -> Result<()> {
    let tol = PSD_REL_TOL * a.frobenius_norm().max(1.0);
    let lmin = eig_hermitian(a)?.lambda_min();
    if lmin < -tol {
        return Err(Error::precondition(format!(
            "{what} must be positive semidefinite (λ_min = {lmin:.3e})"
        )));
    }
    Ok(())
}

fn require_same_dim(mats: &[&HermitianMatrix]) -> Result<()> {
    let d = mats[0].dim();
    for m in mats {
        if m.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: (d, d),
                found: (m.dim(), m.dim()),
            });
        }
    }
    Ok(())
}

/// `(2p−1)!!`, with `(−1)!! = 1`.
pub fn double_factorial_odd(p: u32) -> f64 {
    (1..=p).map(|k| (2 * k - 1) as f64).product()
}

/// `ln (2p−1)!!`.
pub fn ln_double_factorial_odd(p: u32) -> f64 {
    (1..=p).map(|k| ((2 * k - 1) as f64).ln()).sum()
}

fn tr_product(a: &RectMatrix, b: &RectMatrix) -> f64 {
    // tr[AB] without forming AB.
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a.get(i, k) * b.get(k, i)).re;
        }
    }
    acc
}

/// Evaluates both sides of the fact described by `case`.
///
/// Payloads that violate the fact's hypotheses are errors, never a `false`.
pub fn verify_fact(case: &FactCase) -> Result<CheckResult> {
    verify_fact_with(case, false)
}

/// As [`verify_fact`]; with `inject_fault` the GM–AM right-hand side is halved,
/// which the sweeps must detect.
pub fn verify_fact_with(case: &FactCase, inject_fault: bool) -> Result<CheckResult> {
    match case {
        FactCase::Heinz { theta, lambda, mu } => {
            let (t, l, m) = (*theta, *lambda, *mu);
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::precondition(format!("θ = {t} outside [0, 1]")));
            }
            if !(l >= 0.0 && m >= 0.0 && l.is_finite() && m.is_finite()) {
                return Err(Error::precondition(format!("λ = {l}, μ = {m} must be finite and ≥ 0")));
            }
            let lhs = l.powf(t) * m.powf(1.0 - t) + l.powf(1.0 - t) * m.powf(t);
            Ok(CheckResult::inequality(lhs, l + m))
        }
        FactCase::GmAmTrace { h, w, y, r, q } => {
            require_same_dim(&[h, w, y])?;
            if *q > 2 * r {
                return Err(Error::precondition(format!("q = {q} exceeds 2r = {}", 2 * r)));
            }
            let (r, q) = (*r, *q);
            let hw_a = h.matmul(&matrix_power(w, q))?;
            let hy_a = h.matmul(&matrix_power(y, 2 * r - q))?;
            let hw_b = h.matmul(&matrix_power(w, 2 * r - q))?;
            let hy_b = h.matmul(&matrix_power(y, q))?;
            let lhs = tr_product(&hw_a, &hy_a) + tr_product(&hw_b, &hy_b);
            let sum = matrix_power(w, 2 * r).add(&matrix_power(y, 2 * r))?;
            let mut rhs = tr_product(h.square().as_rect(), sum.as_rect());
            if inject_fault {
                rhs *= 0.5;
            }
            Ok(CheckResult::inequality(lhs, rhs))
        }
        FactCase::SumSquares { a } => {
            if a.is_empty() {
                return Err(Error::precondition("sum of squares needs at least one matrix"));
            }
            let refs: Vec<&HermitianMatrix> = a.iter().collect();
            require_same_dim(&refs)?;
            for (i, ai) in a.iter().enumerate() {
                require_psd(ai, &format!("A_{i}"))?;
            }
            let d = a[0].dim();
            let mut sq = HermitianMatrix::zeros(d);
            let mut sum = HermitianMatrix::zeros(d);
            let mut max_norm: f64 = 0.0;
            for ai in a {
                sq = sq.add(&ai.square())?;
                sum = sum.add(ai)?;
                max_norm = max_norm.max(ai.spectral_norm());
            }
            Ok(CheckResult::inequality(sq.spectral_norm(), max_norm * sum.spectral_norm()))
        }
        FactCase::TraceProduct { h, a } => {
            require_same_dim(&[h, a])?;
            require_psd(a, "A")?;
            let lhs = tr_product(h.as_rect(), a.as_rect());
            Ok(CheckResult::inequality(lhs, h.spectral_norm() * a.trace()))
        }
        FactCase::Monotonicity { a, h } => {
            require_same_dim(&[a, h])?;
            let tol = PSD_REL_TOL * a.frobenius_norm().max(h.frobenius_norm()).max(1.0);
            if !loewner_leq(a, h, tol)? {
                return Err(Error::precondition("A ≼ H does not hold"));
            }
            let la = eig_hermitian(a)?.lambda_max();
            let lh = eig_hermitian(h)?.lambda_max();
            Ok(CheckResult::inequality(la, lh))
        }
        FactCase::DiffPowers { w, y, p } => {
            require_same_dim(&[w, y])?;
            if *p == 0 {
                return Err(Error::precondition("p must be at least 1"));
            }
            let p = *p;
            let top = 2 * p - 2;
            let diff = w.sub(y)?;
            let lhs = matrix_power(w, 2 * p - 1).sub(&matrix_power(y, 2 * p - 1))?;
            let mut rhs = RectMatrix::zeros(w.dim(), w.dim());
            let mut scale = lhs.frobenius_norm();
            let (nw, ny, nd) = (w.frobenius_norm(), y.frobenius_norm(), diff.frobenius_norm());
            for q in 0..=top {
                let term = matrix_power(w, q)
                    .matmul(&diff)?
                    .matmul(matrix_power(y, top - q).as_rect())?;
                rhs.add_scaled_assign(1.0, &term);
                scale += nw.powi(q as i32) * nd * ny.powi((top - q) as i32);
            }
            let residual = lhs.into_rect().sub(&rhs)?.frobenius_norm();
            Ok(CheckResult::identity(residual, INEQUALITY_REL_TOL * scale.max(1.0)))
        }
        FactCase::DoubleFactorial { p } => {
            let lhs = double_factorial_odd(*p);
            let rhs = ((2 * p + 1) as f64 / std::f64::consts::E).powi(*p as i32);
            Ok(CheckResult::inequality(lhs, rhs))
        }
        FactCase::DilationSquare { b } => {
            let sq = dilation(b).square();
            let blocks = block_diag(b.gram_left().as_rect(), b.gram_right().as_rect());
            let residual = sq.as_rect().sub(&blocks)?.frobenius_norm();
            let scale = b.frobenius_norm().powi(2).max(1.0);
            Ok(CheckResult::identity(residual, 1e-12 * scale))
        }
    }
}

fn random_scale(rng: &mut CounterRng) -> f64 {
    10f64.powf(rng.uniform() * 2.0 - 1.0)
}

fn random_hermitian_scaled(rng: &mut CounterRng, d: usize) -> HermitianMatrix {
    let s = random_scale(rng);
    rng::random_hermitian(rng, d).scaled(s)
}

fn random_psd_scaled(rng: &mut CounterRng, d: usize) -> HermitianMatrix {
    let s = random_scale(rng);
    rng::random_psd(rng, d).scaled(s)
}

/// Draws a valid random instance of `kind`: dimensions up to 6, `r ≤ 3`,
/// `p ≤ 6` (up to 12 for the double-factorial claim).
pub fn random_fact_case(kind: FactKind, rng: &mut CounterRng) -> FactCase {
    let d = rng.range_inclusive(1, 6);
    match kind {
        FactKind::Heinz => {
            let nonneg = |rng: &mut CounterRng| {
                if rng.uniform() < 0.1 {
                    0.0
                } else {
                    -rng.uniform_open_closed().ln() * random_scale(rng)
                }
            };
            let lambda = nonneg(rng);
            let mu = nonneg(rng);
            let theta = match rng.index(10) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.uniform(),
            };
            FactCase::Heinz { theta, lambda, mu }
        }
        FactKind::GmAmTrace => {
            let r = rng.range_inclusive(0, 3) as u32;
            let q = rng.range_inclusive(0, 2 * r as usize) as u32;
            FactCase::GmAmTrace {
                h: random_hermitian_scaled(rng, d),
                w: random_hermitian_scaled(rng, d),
                y: random_hermitian_scaled(rng, d),
                r,
                q,
            }
        }
        FactKind::SumSquares => {
            let n = rng.range_inclusive(1, 6);
            FactCase::SumSquares {
                a: (0..n).map(|_| random_psd_scaled(rng, d)).collect(),
            }
        }
        FactKind::TraceProduct => FactCase::TraceProduct {
            h: random_hermitian_scaled(rng, d),
            a: random_psd_scaled(rng, d),
        },
        FactKind::Monotonicity => {
            let a = random_hermitian_scaled(rng, d);
            let gap = random_psd_scaled(rng, d);
            let h = a.add(&gap).expect("same dimension");
            FactCase::Monotonicity { a, h }
        }
        FactKind::DiffPowers => FactCase::DiffPowers {
            w: rng::random_hermitian(rng, d),
            y: rng::random_hermitian(rng, d),
            p: rng.range_inclusive(1, 6) as u32,
        },
        FactKind::DoubleFactorial => FactCase::DoubleFactorial {
            p: rng.range_inclusive(0, 12) as u32,
        },
        FactKind::DilationSquare => {
            let d2 = rng.range_inclusive(1, 6);
            let s = random_scale(rng);
            FactCase::DilationSquare {
                b: rng::gaussian_complex_matrix(rng, d, d2).scaled(s),
            }
        }
    }
}

/// Where a sweep case came from, enough to regenerate it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactFailure {
    pub seed: RngSeed,
    pub case_index: u64,
    pub case: FactCase,
    pub result: Option<CheckResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactSweep {
    pub kind: FactKind,
    pub cases: u64,
    pub failures: u64,
    /// Smallest `slack / max(1, |rhs|)` over the sweep (identities: `−residual / tolerance`).
    pub min_relative_slack: f64,
    pub first_failure: Option<FactFailure>,
}

impl FactSweep {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Case `i` of kind `k` is drawn from stream `i`, substream `k`.
pub fn fact_case_rng(seed: RngSeed, kind: FactKind, case_index: u64) -> CounterRng {
    let k = FactKind::ALL.iter().position(|&x| x == kind).unwrap_or(0) as u64;
    CounterRng::new(seed, case_index, 0x0F_AC70 + k)
}

/// Checks `cases` random instances of `kind`. Cases run in parallel; the
/// summary does not depend on scheduling.
pub fn fact_sweep(kind: FactKind, seed: RngSeed, cases: u64, inject_fault: bool) -> FactSweep {
    let outcomes: Vec<(FactCase, Result<CheckResult>)> = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = fact_case_rng(seed, kind, i);
            let case = random_fact_case(kind, &mut rng);
            let res = verify_fact_with(&case, inject_fault);
            (case, res)
        })
        .collect();

    let mut failures = 0;
    let mut first_failure = None;
    let mut min_relative_slack = f64::INFINITY;
    for (i, (case, res)) in outcomes.into_iter().enumerate() {
        let ok = match &res {
            Ok(r) => {
                let rel = if kind.is_identity() {
                    -r.lhs / r.tolerance
                } else {
                    r.slack / r.rhs.abs().max(1.0)
                };
                min_relative_slack = min_relative_slack.min(rel);
                r.holds
            }
            Err(_) => false,
        };
        if !ok {
            failures += 1;
            if first_failure.is_none() {
                let (result, error) = match res {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                first_failure = Some(FactFailure {
                    seed,
                    case_index: i as u64,
                    case,
                    result,
                    error,
                });
            }
        }
    }
    FactSweep {
        kind,
        cases,
        failures,
        min_relative_slack,
        first_failure,
    }
}

/// One outcome of a finite-support summand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub prob: f64,
    pub matrix: RectMatrix,
}

/// A random matrix with finitely many outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteSummandRepr", into = "FiniteSummandRepr")]
pub struct FiniteSummand {
    outcomes: Vec<Outcome>,
}

#[derive(Serialize, Deserialize)]
struct FiniteSummandRepr {
    outcomes: Vec<Outcome>,
}

impl TryFrom<FiniteSummandRepr> for FiniteSummand {
    type Error = Error;

    fn try_from(r: FiniteSummandRepr) -> Result<Self> {
        FiniteSummand::new(r.outcomes.into_iter().map(|o| (o.prob, o.matrix)).collect())
    }
}

impl From<FiniteSummand> for FiniteSummandRepr {
    fn from(f: FiniteSummand) -> Self {
        FiniteSummandRepr { outcomes: f.outcomes }
    }
}

impl FiniteSummand {
    pub fn new(outcomes: Vec<(f64, RectMatrix)>) -> Result<Self> {
        let first = outcomes
            .first()
            .ok_or_else(|| Error::invalid("finite summand needs at least one outcome"))?;
        let shape = first.1.shape();
        let mut total = 0.0;
        for (p, m) in &outcomes {
            if !(*p > 0.0 && p.is_finite()) {
                return Err(Error::invalid(format!("outcome probability {p} must be positive")));
            }
            if m.shape() != shape {
                return Err(Error::DimensionMismatch {
                    expected: shape,
                    found: m.shape(),
                });
            }
            total += p;
        }
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::invalid(format!("outcome probabilities sum to {total}, not 1")));
        }
        Ok(FiniteSummand {
            outcomes: outcomes
                .into_iter()
                .map(|(prob, matrix)| Outcome { prob, matrix })
                .collect(),
        })
    }

    pub fn point_mass(m: RectMatrix) -> Self {
        FiniteSummand {
            outcomes: vec![Outcome { prob: 1.0, matrix: m }],
        }
    }

    /// Uniform on `{M, −M}`.
    pub fn rademacher(m: RectMatrix) -> Self {
        let neg = m.scaled(-1.0);
        FiniteSummand {
            outcomes: vec![
                Outcome { prob: 0.5, matrix: m },
                Outcome { prob: 0.5, matrix: neg },
            ],
        }
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn support_len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.outcomes[0].matrix.shape()
    }

    pub fn mean(&self) -> RectMatrix {
        let (r, c) = self.shape();
        let mut acc = RectMatrix::zeros(r, c);
        for o in &self.outcomes {
            acc.add_scaled_assign(o.prob, &o.matrix);
        }
        acc
    }

    /// Largest outcome Frobenius norm; the scale for zero-mean tests.
    pub fn scale(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.matrix.frobenius_norm())
            .fold(0.0, f64::max)
    }

    pub fn is_centered(&self) -> bool {
        self.mean().frobenius_norm() <= 1e-12 * self.scale().max(1.0)
    }

    /// Outcomes shifted by the mean.
    pub fn centered(&self) -> Self {
        if self.outcomes.len() == 1 {
            let (r, c) = self.shape();
            return FiniteSummand::point_mass(RectMatrix::zeros(r, c));
        }
        let mean = self.mean();
        FiniteSummand {
            outcomes: self
                .outcomes
                .iter()
                .map(|o| Outcome {
                    prob: o.prob,
                    matrix: o.matrix.sub(&mean).expect("same shape"),
                })
                .collect(),
        }
    }

    /// The distribution of `ε S` with an independent sign `ε`.
    pub fn sign_augmented(&self) -> Self {
        let mut outcomes = Vec::with_capacity(2 * self.outcomes.len());
        for o in &self.outcomes {
            outcomes.push(Outcome {
                prob: 0.5 * o.prob,
                matrix: o.matrix.clone(),
            });
            outcomes.push(Outcome {
                prob: 0.5 * o.prob,
                matrix: o.matrix.scaled(-1.0),
            });
        }
        FiniteSummand { outcomes }
    }

    /// `E[S S*]` and `E[S* S]`.
    pub fn second_moments(&self) -> (HermitianMatrix, HermitianMatrix) {
        let (r, c) = self.shape();
        let mut left = RectMatrix::zeros(r, r);
        let mut right = RectMatrix::zeros(c, c);
        for o in &self.outcomes {
            left.add_scaled_assign(o.prob, o.matrix.gram_left().as_rect());
            right.add_scaled_assign(o.prob, o.matrix.gram_right().as_rect());
        }
        (
            HermitianMatrix::symmetrized(left),
            HermitianMatrix::symmetrized(right),
        )
    }
}

fn common_shape(summands: &[FiniteSummand]) -> Result<(usize, usize)> {
    let first = summands
        .first()
        .ok_or_else(|| Error::invalid("need at least one summand"))?;
    let shape = first.shape();
    for s in summands {
        if s.shape() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape,
                found: s.shape(),
            });
        }
    }
    Ok(shape)
}

/// Number of outcome combinations of the product distribution.
pub fn combination_count(summands: &[FiniteSummand]) -> u128 {
    summands
        .iter()
        .map(|s| s.support_len() as u128)
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// `E f(Σ S_i, outcome indices)` by full enumeration of the product distribution.
///
/// Combinations are visited in mixed-radix order with the last summand varying
/// fastest.
pub fn exact_expectation<F>(summands: &[FiniteSummand], cap: u64, f: F) -> Result<f64>
where
    F: Fn(&RectMatrix, &[usize]) -> f64,
{
    let (rows, cols) = common_shape(summands)?;
    let needed = combination_count(summands);
    if needed > cap as u128 {
        return Err(Error::CapExceeded { needed, cap });
    }
    let n = summands.len();
    // partial[k] = Σ_{i<k} chosen outcome of summand i; prob[k] likewise.
    let mut partial = vec![RectMatrix::zeros(rows, cols); n + 1];
    let mut prob = vec![1.0; n + 1];
    let mut digits = vec![0usize; n];
    let mut total = 0.0;

    // Fill levels from `from` onwards using the current digits.
    let refill = |from: usize, digits: &[usize], partial: &mut [RectMatrix], prob: &mut [f64]| {
        for k in from..n {
            let o = &summands[k].outcomes[digits[k]];
            let mut next = partial[k].clone();
            next.add_scaled_assign(1.0, &o.matrix);
            partial[k + 1] = next;
            prob[k + 1] = prob[k] * o.prob;
        }
    };
    refill(0, &digits, &mut partial, &mut prob);
    loop {
        total += prob[n] * f(&partial[n], &digits);
        // advance the mixed-radix counter
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(total);
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < summands[k].support_len() {
                break;
            }
            digits[k] = 0;
        }
        refill(k, &digits, &mut partial, &mut prob);
    }
}

/// `E ‖Σ S_i‖^r` exactly, for independent finite-support summands.
pub fn brute_force_expected_norm(summands: &[FiniteSummand], r: u32, cap: u64) -> Result<f64> {
    if r == 0 {
        return Err(Error::invalid("moment order r must be positive"));
    }
    exact_expectation(summands, cap, |z, _| spectral_norm(z).powi(r as i32))
}

/// `E max_i ‖S_i‖²` exactly.
pub fn brute_force_max_sq_norm(summands: &[FiniteSummand], cap: u64) -> Result<f64> {
    let norms: Vec<Vec<f64>> = summands
        .iter()
        .map(|s| s.outcomes.iter().map(|o| spectral_norm(&o.matrix).powi(2)).collect())
        .collect();
    exact_expectation(summands, cap, |_, idx| {
        idx.iter()
            .enumerate()
            .map(|(i, &k)| norms[i][k])
            .fold(0.0, f64::max)
    })
}

/// The three quantities behind the symmetrization sandwich.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationTerms {
    /// `(E‖Σ (S_i − E S_i)‖^r)^{1/r}`.
    pub m: f64,
    /// `(E‖Σ ε_i S_i‖^r)^{1/r}` on the summands as given.
    pub r_signed: f64,
    /// `(E‖Σ ε_i (S_i − E S_i)‖^r)^{1/r}`.
    pub r_centered: f64,
}

impl SymmetrizationTerms {
    /// `M ≤ 2R`, which holds for any independent family.
    pub fn upper_holds(&self, tol: f64) -> bool {
        self.m <= 2.0 * self.r_signed + tol
    }

    /// `R_c / 2 ≤ M`, the lower bound with signs applied to centered summands.
    pub fn lower_holds(&self, tol: f64) -> bool {
        0.5 * self.r_centered <= self.m + tol
    }

    /// `R / 2 ≤ M` with signs on the raw summands. This is only guaranteed
    /// when the summands are centered.
    pub fn raw_lower_holds(&self, tol: f64) -> bool {
        0.5 * self.r_signed <= self.m + tol
    }
}

pub fn symmetrization_terms(summands: &[FiniteSummand], r: u32, cap: u64) -> Result<SymmetrizationTerms> {
    if r == 0 {
        return Err(Error::invalid("moment order r must be positive"));
    }
    let centered: Vec<FiniteSummand> = summands.iter().map(FiniteSummand::centered).collect();
    let signed: Vec<FiniteSummand> = summands.iter().map(FiniteSummand::sign_augmented).collect();
    let signed_centered: Vec<FiniteSummand> =
        centered.iter().map(FiniteSummand::sign_augmented).collect();
    let root = |x: f64| x.powf(1.0 / r as f64);
    Ok(SymmetrizationTerms {
        m: root(brute_force_expected_norm(&centered, r, cap)?),
        r_signed: root(brute_force_expected_norm(&signed, r, cap)?),
        r_centered: root(brute_force_expected_norm(&signed_centered, r, cap)?),
    })
}

/// Exact symmetrization sandwich `½ R_c ≤ M ≤ 2 R`.
///
/// `lhs = M`, `rhs = R`, and `slack = min(2R − M, M − R_c/2)`. For centered
/// summands `R_c = R`. For uncentered summands the raw lower bound `½R ≤ M`
/// can fail (point masses give `M = 0 < R`), so the lower side signs the
/// centered summands.
pub fn symmetrization_check(summands: &[FiniteSummand], r: u32) -> Result<CheckResult> {
    symmetrization_check_capped(summands, r, DEFAULT_CAP)
}

pub fn symmetrization_check_capped(summands: &[FiniteSummand], r: u32, cap: u64) -> Result<CheckResult> {
    let t = symmetrization_terms(summands, r, cap)?;
    let tolerance = INEQUALITY_REL_TOL * t.r_signed.max(1.0);
    Ok(CheckResult {
        holds: t.upper_holds(tolerance) && t.lower_holds(tolerance),
        lhs: t.m,
        rhs: t.r_signed,
        slack: (2.0 * t.r_signed - t.m).min(t.m - 0.5 * t.r_centered),
        tolerance,
    })
}

/// A random instance for the symmetrization sweep: `n ≤ 5` summands with one
/// or two outcomes, shapes up to 3×3. With `centered`, every summand has mean zero.
pub fn random_finite_family(rng: &mut CounterRng, centered: bool) -> Vec<FiniteSummand> {
    let n = rng.range_inclusive(1, 5);
    let d1 = rng.range_inclusive(1, 3);
    let d2 = rng.range_inclusive(1, 3);
    (0..n)
        .map(|_| {
            let two = rng.uniform() < 0.75;
            let a = rng::gaussian_complex_matrix(rng, d1, d2);
            if !two {
                return if centered {
                    FiniteSummand::point_mass(RectMatrix::zeros(d1, d2))
                } else {
                    FiniteSummand::point_mass(a)
                };
            }
            let p = 0.05 + 0.9 * rng.uniform();
            let b = if centered {
                a.scaled(-p / (1.0 - p))
            } else {
                rng::gaussian_complex_matrix(rng, d1, d2)
            };
            FiniteSummand::new(vec![(p, a), (1.0 - p, b)]).expect("valid probabilities")
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetrizationSweep {
    pub instances: u64,
    pub failures: u64,
    /// Uncentered instances where the raw lower bound `½R ≤ M` fails.
    pub raw_lower_violations_uncentered: u64,
    pub uncentered_instances: u64,
    pub first_failure: Option<SymmetrizationFailure>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetrizationFailure {
    pub seed: RngSeed,
    pub instance: u64,
    pub r: u32,
    pub centered: bool,
    pub summands: Vec<FiniteSummand>,
    pub terms: Option<SymmetrizationTerms>,
    pub error: Option<String>,
}

/// Instance `i` uses stream `i`; even instances are centered, odd ones are not,
/// and `r` alternates between 1 and 2. Centered instances are held to the raw
/// sandwich `½R ≤ M ≤ 2R`, uncentered ones to `½R_c ≤ M ≤ 2R`.
pub fn symmetrization_sweep(seed: RngSeed, instances: u64) -> SymmetrizationSweep {
    let rows: Vec<_> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(seed, i, 0x5E_77);
            let centered = i % 2 == 0;
            let r = 1 + ((i / 2) % 2) as u32;
            let fam = random_finite_family(&mut rng, centered);
            let terms = symmetrization_terms(&fam, r, DEFAULT_CAP);
            (i, r, centered, fam, terms)
        })
        .collect();
    let mut out = SymmetrizationSweep {
        instances,
        failures: 0,
        raw_lower_violations_uncentered: 0,
        uncentered_instances: 0,
        first_failure: None,
    };
    for (i, r, centered, fam, terms) in rows {
        let ok = match &terms {
            Ok(t) => {
                let tol = INEQUALITY_REL_TOL * t.r_signed.max(1.0);
                if !centered {
                    out.uncentered_instances += 1;
                    if !t.raw_lower_holds(tol) {
                        out.raw_lower_violations_uncentered += 1;
                    }
                }
                let lower = if centered { t.raw_lower_holds(tol) } else { t.lower_holds(tol) };
                lower && t.upper_holds(tol)
            }
            Err(_) => false,
        };
        if !ok {
            out.failures += 1;
            if out.first_failure.is_none() {
                let (terms, error) = match terms {
                    Ok(t) => (Some(t), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                out.first_failure = Some(SymmetrizationFailure {
                    seed,
                    instance: i,
                    r,
                    centered,
                    summands: fam,
                    terms,
                    error,
                });
            }
        }
    }
    out
}

/// `E tr X²` for `X = Σ ε_i H_i`, enumerated over all sign patterns.
pub fn exact_trace_second_moment(hs: &[HermitianMatrix], cap: u64) -> Result<f64> {
    let fam: Vec<FiniteSummand> = hs
        .iter()
        .map(|h| FiniteSummand::rademacher(h.as_rect().clone()))
        .collect();
    exact_expectation(&fam, cap, |x, _| {
        trace(&x.matmul_unchecked(x)).map(|z| z.re).unwrap_or(f64::NAN)
    })
}
