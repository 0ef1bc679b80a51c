//! Dense complex linear algebra: Hermitian eigendecomposition by cyclic
//! Jacobi, spectral norm, Löwner order, integer powers, trace and the
//! Hermitian dilation.
//!
//! Matrices are stored row-major as `Complex64`. Everything here is a pure
//! function of its inputs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Maximum number of cyclic Jacobi sweeps.
pub const MAX_SWEEPS: usize = 30;
/// Jacobi stops once the off-diagonal Frobenius mass is below this fraction of `‖H‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-12;
/// Tolerated pre-symmetrization defect, relative to `max(1, ‖M‖_F)`.
pub const HERMITIAN_REL_TOL: f64 = 1e-12;

/// A dense `rows × cols` complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// On-disk form: `{"rows": 2, "cols": 2, "re": [...], "im": [...]}`, row-major,
/// `im` optional.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for RectMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let data = match r.im {
            None => r.re.iter().map(|&x| C64::new(x, 0.0)).collect(),
            Some(im) => {
                if im.len() != r.re.len() {
                    return Err(Error::EntryCount {
                        expected: r.re.len(),
                        found: im.len(),
                    });
                }
                r.re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect()
            }
        };
        RectMatrix::from_vec(r.rows, r.cols, data)
    }
}

impl From<RectMatrix> for MatrixRepr {
    fn from(m: RectMatrix) -> Self {
        let re = m.data.iter().map(|z| z.re).collect();
        let im = if m.data.iter().all(|z| z.im == 0.0) {
            None
        } else {
            Some(m.data.iter().map(|z| z.im).collect())
        };
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            re,
            im,
        }
    }
}

impl RectMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::EntryCount {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(RectMatrix { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Builds a matrix from nested rows of real numbers.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: (r, c),
                found: (r, bad.len()),
            });
        }
        let flat: Vec<f64> = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::from_real(r, c, &flat)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        RectMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = C64::new(1.0, 0.0);
        }
        m
    }

    /// The matrix unit `E_ij`.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m.set(i, j, C64::new(1.0, 0.0));
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub(crate) fn set(&mut self, r: usize, c: usize, z: C64) {
        self.data[r * self.cols + c] = z;
    }

    #[inline]
    pub(crate) fn add_at(&mut self, r: usize, c: usize, z: C64) {
        self.data[r * self.cols + c] += z;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.get(r, c).conj();
            }
        }
        out
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: (self.cols, other.cols),
                found: other.shape(),
            });
        }
        Ok(self.matmul_unchecked(other))
    }

    pub(crate) fn matmul_unchecked(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            let row_out = &mut out.data[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row_b = &other.data[l * m..(l + 1) * m];
                for (o, b) in row_out.iter_mut().zip(row_b) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.add_scaled_assign(1.0, other);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.add_scaled_assign(-1.0, other);
        Ok(out)
    }

    /// `self += coeff · other`; shapes must agree.
    pub(crate) fn add_scaled_assign(&mut self, coeff: f64, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * coeff;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        RectMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// True when every entry off the main diagonal is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if r != c {
                    let z = self.get(r, c);
                    if z.re != 0.0 || z.im != 0.0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// `B B*`.
    pub fn gram_left(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.matmul_unchecked(&self.adjoint()))
    }

    /// `B* B`.
    pub fn gram_right(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.adjoint().matmul_unchecked(self))
    }
}

/// A Hermitian matrix. Construction symmetrizes `(M + M*)/2` and rejects inputs
/// whose defect `‖M − M*‖_F / 2` exceeds `1e-12·max(1, ‖M‖_F)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RectMatrix", into = "RectMatrix")]
pub struct HermitianMatrix {
    inner: RectMatrix,
    defect: f64,
}

/// Equality compares entries only; the recorded defect is ignored.
impl PartialEq for HermitianMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

impl TryFrom<RectMatrix> for HermitianMatrix {
    type Error = Error;

    fn try_from(m: RectMatrix) -> Result<Self> {
        HermitianMatrix::new(m)
    }
}

impl From<HermitianMatrix> for RectMatrix {
    fn from(h: HermitianMatrix) -> Self {
        h.inner
    }
}

impl HermitianMatrix {
    pub fn new(m: RectMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        let tolerance = HERMITIAN_REL_TOL * m.frobenius_norm().max(1.0);
        let h = Self::symmetrized(m);
        if h.defect > tolerance {
            return Err(Error::NotHermitian {
                defect: h.defect,
                tolerance,
            });
        }
        Ok(h)
    }

    /// Symmetrizes without the defect check. Used for products that are
    /// Hermitian in exact arithmetic.
    pub(crate) fn symmetrized(mut m: RectMatrix) -> Self {
        debug_assert!(m.is_square());
        let d = m.rows;
        let mut defect_sq = 0.0;
        for r in 0..d {
            for c in r..d {
                let a = m.get(r, c);
                let b = m.get(c, r).conj();
                let diff = (a - b) * 0.5;
                let w = if r == c { 1.0 } else { 2.0 };
                defect_sq += w * diff.norm_sqr();
                let avg = (a + b) * 0.5;
                if r == c {
                    m.set(r, r, C64::new(avg.re, 0.0));
                } else {
                    m.set(r, c, avg);
                    m.set(c, r, avg.conj());
                }
            }
        }
        HermitianMatrix {
            inner: m,
            defect: defect_sq.sqrt(),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        if d == 0 {
            return Err(Error::EmptyMatrix { rows: 0, cols: 0 });
        }
        let m = RectMatrix::from_fn(d, d, |r, c| {
            if r == c {
                C64::new(diag[r], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })?;
        Ok(Self::symmetrized(m))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::new(RectMatrix::from_real_rows(rows)?)
    }

    pub fn identity(d: usize) -> Self {
        Self::symmetrized(RectMatrix::identity(d))
    }

    pub fn zeros(d: usize) -> Self {
        Self::symmetrized(RectMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.inner.rows
    }

    /// Pre-symmetrization defect recorded at construction.
    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn as_rect(&self) -> &RectMatrix {
        &self.inner
    }

    pub fn into_rect(self) -> RectMatrix {
        self.inner
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.inner.get(r, c)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.inner.shape(),
                found: other.inner.shape(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self::symmetrized(self.inner.add(&other.inner)?))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self::symmetrized(self.inner.sub(&other.inner)?))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::symmetrized(self.inner.scaled(s))
    }

    /// Plain matrix product; not Hermitian in general.
    pub fn matmul(&self, other: &Self) -> Result<RectMatrix> {
        self.check_dim(other)?;
        Ok(self.inner.matmul_unchecked(&other.inner))
    }

    pub fn square(&self) -> Self {
        Self::symmetrized(self.inner.matmul_unchecked(&self.inner))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.inner.get(i, i).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    pub fn eig(&self) -> Result<EigDecomposition> {
        eig_hermitian(self)
    }

    /// `max(λ_max, −λ_min)`.
    pub fn spectral_norm(&self) -> f64 {
        if self.inner.is_diagonal() {
            return (0..self.dim()).map(|i| self.inner.get(i, i).re.abs()).fold(0.0, f64::max);
        }
        let (vals, _) = jacobi(&self.inner, false);
        vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn lambda_max(&self) -> f64 {
        let (vals, _) = jacobi(&self.inner, false);
        vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lambda_min(&self) -> f64 {
        let (vals, _) = jacobi(&self.inner, false);
        vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `u* H u`, real for Hermitian `H`.
    pub fn quadratic_form(&self, u: &[C64]) -> f64 {
        let d = self.dim();
        assert_eq!(u.len(), d);
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..d {
            let mut row = C64::new(0.0, 0.0);
            for c in 0..d {
                row += self.inner.get(r, c) * u[c];
            }
            acc += u[r].conj() * row;
        }
        acc.re
    }
}

/// Eigenvalues sorted descending with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigDecomposition {
    /// `λ_1 ≥ … ≥ λ_d`.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub vectors: RectMatrix,
}

impl EigDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    pub fn vector(&self, i: usize) -> Vec<C64> {
        (0..self.dim()).map(|r| self.vectors.get(r, i)).collect()
    }

    /// `Σ f(λ_i) u_i u_i*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let d = self.dim();
        let mut out = RectMatrix::zeros(d, d);
        for (i, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for r in 0..d {
                let ur = self.vectors.get(r, i) * w;
                for c in 0..d {
                    out.add_at(r, c, ur * self.vectors.get(c, i).conj());
                }
            }
        }
        HermitianMatrix::symmetrized(out)
    }

    /// `Σ λ_i u_i u_i*`.
    pub fn reconstruct(&self) -> HermitianMatrix {
        self.apply(|x| x)
    }
}

/// Cyclic complex Jacobi. Returns unsorted eigenvalues, the accumulated
/// eigenvector matrix when requested, and the convergence outcome.
fn jacobi(h: &RectMatrix, want_vectors: bool) -> (Vec<f64>, JacobiOutcome) {
    let n = h.rows;
    let mut a = h.data.clone();
    let mut v = if want_vectors {
        Some(RectMatrix::identity(n).data)
    } else {
        None
    };
    let total = h.frobenius_norm();
    let tol = JACOBI_REL_TOL * total;

    let off_mass = |a: &[C64]| -> f64 {
        let mut s = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    s += a[r * n + c].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut outcome = JacobiOutcome {
        vectors: None,
        converged: false,
        sweeps: 0,
        residual: 0.0,
    };

    for sweep in 0..=MAX_SWEEPS {
        let off = off_mass(&a);
        outcome.residual = off;
        outcome.sweeps = sweep;
        if off <= tol {
            outcome.converged = true;
            break;
        }
        if sweep == MAX_SWEEPS {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // U = diag(1, conj(phase)) · [[c, s], [-s, c]] on the (p, q) plane.
                let u_pp = C64::new(c, 0.0);
                let u_pq = C64::new(s, 0.0);
                let u_qp = phase.conj() * (-s);
                let u_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * u_pp + akq * u_qp;
                    a[k * n + q] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[p * n + q] = C64::new(0.0, 0.0);
                a[q * n + p] = C64::new(0.0, 0.0);
                a[p * n + p] = C64::new(app - t * mag, 0.0);
                a[q * n + q] = C64::new(aqq + t * mag, 0.0);

                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * u_pp + vkq * u_qp;
                        v[k * n + q] = vkp * u_pq + vkq * u_qq;
                    }
                }
            }
        }
    }

    let eigenvalues = (0..n).map(|i| a[i * n + i].re).collect();
    outcome.vectors = v.map(|data| RectMatrix {
        rows: n,
        cols: n,
        data,
    });
    (eigenvalues, outcome)
}

struct JacobiOutcome {
    vectors: Option<RectMatrix>,
    converged: bool,
    sweeps: usize,
    residual: f64,
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius mass drops below
/// `1e-12·‖H‖_F`; fails with [`Error::NoConvergence`] after 30 sweeps.
/// Eigenvalues come back sorted descending, ties kept in diagonal order.
pub fn eig_hermitian(h: &HermitianMatrix) -> Result<EigDecomposition> {
    let (vals, outcome) = jacobi(&h.inner, true);
    if !outcome.converged {
        return Err(Error::NoConvergence {
            sweeps: outcome.sweeps,
            residual: outcome.residual,
        });
    }
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let raw = outcome.vectors.expect("vectors requested");
    let mut vectors = RectMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, dst, raw.get(r, src));
        }
    }
    Ok(EigDecomposition {
        eigenvalues: order.iter().map(|&i| vals[i]).collect(),
        vectors,
    })
}

/// Largest singular value.
///
/// Computed as `sqrt(λ_max)` of whichever of `M M*` and `M* M` is smaller.
/// Matrices with no off-diagonal mass short-circuit to `max_i |m_ii|`.
pub fn spectral_norm(m: &RectMatrix) -> f64 {
    if m.is_diagonal() {
        return (0..m.rows.min(m.cols)).map(|i| m.get(i, i).norm()).fold(0.0, f64::max);
    }
    let gram = if m.rows <= m.cols {
        m.gram_left()
    } else {
        m.gram_right()
    };
    let (vals, _) = jacobi(&gram.inner, false);
    vals.into_iter().fold(0.0, f64::max).max(0.0).sqrt()
}

/// `A ≼ H`, i.e. `λ_min(H − A) ≥ −tol`.
pub fn loewner_leq(a: &HermitianMatrix, h: &HermitianMatrix, tol: f64) -> Result<bool> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be finite and nonnegative, got {tol}")));
    }
    let diff = h.sub(a)?;
    let eig = eig_hermitian(&diff)?;
    Ok(eig.lambda_min() >= -tol)
}

/// Positive-semidefinite test, `0 ≼ A`.
pub fn is_psd(a: &HermitianMatrix, tol: f64) -> Result<bool> {
    loewner_leq(&HermitianMatrix::zeros(a.dim()), a, tol)
}

/// `H^r` by repeated squaring; `H^0 = I`.
pub fn matrix_power(h: &HermitianMatrix, r: u32) -> HermitianMatrix {
    let d = h.dim();
    let mut result = RectMatrix::identity(d);
    let mut base = h.inner.clone();
    let mut e = r;
    while e > 0 {
        if e & 1 == 1 {
            result = result.matmul_unchecked(&base);
        }
        e >>= 1;
        if e > 0 {
            base = base.matmul_unchecked(&base);
        }
    }
    HermitianMatrix::symmetrized(result)
}

/// Sum of the diagonal of a square matrix.
pub fn trace(m: &RectMatrix) -> Result<C64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    Ok((0..m.rows).map(|i| m.get(i, i)).sum())
}

/// The Hermitian dilation `[[0, B], [B*, 0]]`.
pub fn dilation(b: &RectMatrix) -> HermitianMatrix {
    let (d1, d2) = b.shape();
    let d = d1 + d2;
    let mut out = RectMatrix::zeros(d, d);
    for r in 0..d1 {
        for c in 0..d2 {
            let z = b.get(r, c);
            out.set(r, d1 + c, z);
            out.set(d1 + c, r, z.conj());
        }
    }
    HermitianMatrix::symmetrized(out)
}

/// `[[A, 0], [0, B]]`.
pub fn block_diag(a: &RectMatrix, b: &RectMatrix) -> RectMatrix {
    let (r1, c1) = a.shape();
    let (r2, c2) = b.shape();
    let mut out = RectMatrix::zeros(r1 + r2, c1 + c2);
    for r in 0..r1 {
        for c in 0..c1 {
            out.set(r, c, a.get(r, c));
        }
    }
    for r in 0..r2 {
        for c in 0..c2 {
            out.set(r1 + r, c1 + c, b.get(r, c));
        }
    }
    out
}

/// `Σ H_i²` over a nonempty family of equal dimension.
pub fn sum_of_squares(hs: &[HermitianMatrix]) -> Result<HermitianMatrix> {
    let first = hs
        .first()
        .ok_or_else(|| Error::invalid("sum of squares over an empty family"))?;
    let d = first.dim();
    let mut acc = RectMatrix::zeros(d, d);
    for h in hs {
        if h.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: (d, d),
                found: (h.dim(), h.dim()),
            });
        }
        acc.add_scaled_assign(1.0, h.square().as_rect());
    }
    Ok(HermitianMatrix::symmetrized(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, CounterRng, RngSeed};
    use approx::assert_relative_eq;

    fn rng(s: u64) -> CounterRng {
        CounterRng::new(RngSeed(s), 0, 0)
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let h = HermitianMatrix::from_real_diagonal(&[3.0, 1.0, 2.0]).unwrap();
        let e = eig_hermitian(&h).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn ties_keep_input_order() {
        let h = HermitianMatrix::from_real_diagonal(&[1.0, 5.0, 1.0]).unwrap();
        let e = eig_hermitian(&h).unwrap();
        assert_eq!(e.eigenvalues, vec![5.0, 1.0, 1.0]);
        // first tied eigenvector is e_0, second is e_2
        assert_relative_eq!(e.vectors.get(0, 1).norm(), 1.0);
        assert_relative_eq!(e.vectors.get(2, 2).norm(), 1.0);
    }

    #[test]
    fn swap_matrix_eigenpairs() {
        let h = HermitianMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let e = eig_hermitian(&h).unwrap();
        assert_relative_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.eigenvalues[1], -1.0, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = e.vector(0);
        // up to phase: |<u, (1,1)/√2>| = 1
        let overlap = (u[0].conj() * s + u[1].conj() * s).norm();
        assert_relative_eq!(overlap, 1.0, epsilon = 1e-12);
        let w = e.vector(1);
        let overlap = (w[0].conj() * s - w[1].conj() * s).norm();
        assert_relative_eq!(overlap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_by_two_matches_quadratic_formula() {
        let mut r = rng(1);
        for _ in 0..200 {
            let h = rng::random_hermitian(&mut r, 2);
            let a = h.get(0, 0).re;
            let d = h.get(1, 1).re;
            let b = h.get(0, 1).norm_sqr();
            let mid = (a + d) / 2.0;
            let rad = (((a - d) / 2.0).powi(2) + b).sqrt();
            let e = eig_hermitian(&h).unwrap();
            assert!((e.eigenvalues[0] - (mid + rad)).abs() < 1e-10);
            assert!((e.eigenvalues[1] - (mid - rad)).abs() < 1e-10);
        }
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut r = rng(2);
        for d in 1..=8 {
            let h = rng::random_hermitian(&mut r, d);
            let e = eig_hermitian(&h).unwrap();
            let back = e.reconstruct();
            let err = back.sub(&h).unwrap().frobenius_norm();
            assert!(err <= 1e-10 * h.frobenius_norm().max(1.0), "d={d} err={err}");
            let gram = e.vectors.adjoint().matmul(&e.vectors).unwrap();
            assert!(gram.max_abs_diff(&RectMatrix::identity(d)) < 1e-10);
            for w in e.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn zero_matrix_converges_immediately() {
        let e = eig_hermitian(&HermitianMatrix::zeros(4)).unwrap();
        assert!(e.eigenvalues.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn spectral_norm_simple_cases() {
        assert_eq!(spectral_norm(&RectMatrix::identity(3)), 1.0);
        let m = RectMatrix::from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]).unwrap();
        assert_relative_eq!(spectral_norm(&m), 2.0, epsilon = 1e-14);
    }

    /// Power iteration on `M* M`; independent of the Jacobi path.
    fn power_iteration_norm(m: &RectMatrix) -> f64 {
        let g = m.adjoint().matmul(m).unwrap();
        let n = g.rows();
        let mut x: Vec<C64> = (0..n).map(|i| C64::new(1.0 + i as f64 * 0.1, 0.3)).collect();
        let mut lam = 0.0;
        for _ in 0..5000 {
            let y: Vec<C64> = (0..n)
                .map(|r| (0..n).map(|c| g.get(r, c) * x[c]).sum())
                .collect();
            let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            lam = norm;
            x = y.into_iter().map(|z| z / norm).collect();
        }
        lam.sqrt()
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let mut r = rng(3);
        for _ in 0..10 {
            let m = rng::gaussian_complex_matrix(&mut r, 4, 3);
            let a = spectral_norm(&m);
            let b = power_iteration_norm(&m);
            assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn loewner_examples() {
        let zero = HermitianMatrix::zeros(2);
        let id = HermitianMatrix::identity(2);
        assert!(loewner_leq(&zero, &id, 0.0).unwrap());
        let a = HermitianMatrix::from_real_diagonal(&[1.0, 2.0]).unwrap();
        let h = HermitianMatrix::from_real_diagonal(&[2.0, 2.0]).unwrap();
        assert!(loewner_leq(&a, &h, 0.0).unwrap());
        assert!(!loewner_leq(&h, &a, 0.0).unwrap());
        assert!(loewner_leq(&a, &HermitianMatrix::identity(3), 0.0).is_err());
        assert!(loewner_leq(&a, &h, -1.0).is_err());
    }

    #[test]
    fn loewner_rank_one_update() {
        let mut r = rng(4);
        for d in 1..=6 {
            let a = rng::random_psd(&mut r, d);
            let v = rng::gaussian_complex_matrix(&mut r, d, 1);
            let h = a.add(&v.gram_left()).unwrap();
            assert!(loewner_leq(&a, &h, 1e-10).unwrap());
        }
    }

    #[test]
    fn power_examples() {
        let mut r = rng(5);
        let h = rng::random_hermitian(&mut r, 4);
        assert_eq!(matrix_power(&h, 0), HermitianMatrix::identity(4));
        let d = HermitianMatrix::from_real_diagonal(&[2.0, -1.0]).unwrap();
        assert_eq!(
            matrix_power(&d, 3),
            HermitianMatrix::from_real_diagonal(&[8.0, -1.0]).unwrap()
        );
        let e = eig_hermitian(&h).unwrap();
        let p4 = matrix_power(&h, 4);
        let mut expect: Vec<f64> = e.eigenvalues.iter().map(|x| x.powi(4)).collect();
        expect.sort_by(|a, b| b.total_cmp(a));
        let got = eig_hermitian(&p4).unwrap().eigenvalues;
        for (g, x) in got.iter().zip(&expect) {
            assert!((g - x).abs() <= 1e-9 * x.abs().max(1.0));
        }
        assert!(is_psd(&p4, 1e-10 * p4.frobenius_norm()).unwrap());
    }

    #[test]
    fn trace_properties() {
        assert_eq!(trace(&RectMatrix::identity(3)).unwrap(), C64::new(3.0, 0.0));
        assert!(trace(&RectMatrix::zeros(2, 3)).is_err());
        let mut r = rng(6);
        let b = rng::gaussian_complex_matrix(&mut r, 3, 2);
        let c = rng::gaussian_complex_matrix(&mut r, 2, 3);
        let bc = trace(&b.matmul(&c).unwrap()).unwrap();
        let cb = trace(&c.matmul(&b).unwrap()).unwrap();
        assert!((bc - cb).norm() < 1e-12);
        let h = rng::random_hermitian(&mut r, 5);
        let s: f64 = eig_hermitian(&h).unwrap().eigenvalues.iter().sum();
        assert!((h.trace() - s).abs() < 1e-10);
    }

    #[test]
    fn dilation_identities() {
        let one = RectMatrix::from_real(1, 1, &[1.0]).unwrap();
        assert_eq!(
            dilation(&one),
            HermitianMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
        );
        let mut r = rng(7);
        for (d1, d2) in [(1, 3), (3, 2), (4, 4)] {
            let b = rng::gaussian_complex_matrix(&mut r, d1, d2);
            let sq = dilation(&b).square();
            let blocks = block_diag(b.gram_left().as_rect(), b.gram_right().as_rect());
            assert!(sq.as_rect().max_abs_diff(&blocks) < 1e-12);
            let n1 = dilation(&b).spectral_norm();
            let n2 = spectral_norm(&b);
            assert!((n1 - n2).abs() < 1e-10 * n2.max(1.0));
        }
    }

    #[test]
    fn hermitian_constructor_rejects_asymmetry() {
        let m = RectMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian { .. })));
        let tiny = RectMatrix::from_real_rows(&[&[1.0, 1.0 + 1e-14], &[1.0, 1.0]]).unwrap();
        let h = HermitianMatrix::new(tiny).unwrap();
        assert!(h.defect() > 0.0 && h.defect() < 1e-13);
        assert!(HermitianMatrix::new(RectMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(RectMatrix::from_real(2, 2, &[1.0, 2.0, 3.0]).is_err());
        assert!(RectMatrix::from_real(1, 2, &[1.0, f64::NAN]).is_err());
        assert!(RectMatrix::from_real(0, 2, &[]).is_err());
    }

    #[test]
    fn json_form_round_trips() {
        let mut r = rng(8);
        let m = rng::gaussian_complex_matrix(&mut r, 2, 3);
        let s = serde_json::to_string(&m).unwrap();
        let back: RectMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let real: RectMatrix = serde_json::from_str(r#"{"rows":1,"cols":2,"re":[1,2]}"#).unwrap();
        assert_eq!(real.get(0, 1), C64::new(2.0, 0.0));
        let bad: std::result::Result<HermitianMatrix, _> =
            serde_json::from_str(r#"{"rows":2,"cols":2,"re":[0,1,0,0]}"#);
        assert!(bad.is_err());
    }
}
