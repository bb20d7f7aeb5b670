//! Univariate polynomials, bivariate kernel polynomials and symmetric
//! polynomial matrices in the monomial basis on the interval `[0, 1]`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when comparing coefficients.
pub const COEFF_TOL: f64 = 1e-9;

/// A real polynomial `Σ coeffs[k]·t^k`.
///
/// Trailing exact zeros are trimmed; no other rounding is ever applied.
#[derive(Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Poly {
    fn from(coeffs: Vec<f64>) -> Self {
        Poly::new(coeffs)
    }
}

impl From<Poly> for Vec<f64> {
    fn from(p: Poly) -> Self {
        p.coeffs
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·t")?,
                _ => write!(f, "{c}·t^{k}")?,
            }
        }
        Ok(())
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// `c·t^k`
    pub fn monomial(k: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Poly::new(coeffs)
    }

    /// The polynomial `t`.
    pub fn t() -> Self {
        Poly::monomial(1, 1.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `t^k`, zero past the stored length.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Largest index with a nonzero coefficient; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, a: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * a).collect())
    }

    /// Horner evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// `∫₀¹ p(t) dt`
    pub fn integral_01(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / (k as f64 + 1.0))
            .sum()
    }

    /// `q(t) = ∫₀ᵗ p(s) ds`
    pub fn antiderivative(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c / (k as f64 + 1.0)),
        );
        Poly::new(coeffs)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    /// Multiplies by `t^k`.
    pub fn shift(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![0.0; k];
        coeffs.extend_from_slice(&self.coeffs);
        Poly::new(coeffs)
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Poly) -> f64 {
        let len = self.coeffs.len().max(other.coeffs.len());
        (0..len)
            .map(|k| (self.coeff(k) - other.coeff(k)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn approx_eq(&self, other: &Poly, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        &self + &rhs
    }
}

impl AddAssign<&Poly> for Poly {
    fn add_assign(&mut self, rhs: &Poly) {
        if self.coeffs.len() < rhs.coeffs.len() {
            self.coeffs.resize(rhs.coeffs.len(), 0.0);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..len).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        &self - &rhs
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

/// Bivariate kernel polynomial `Σ c[j][k]·t^j·s^k`.
///
/// Serialized row-major: row `j` holds the coefficients of `t^j`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct BiPoly {
    coeffs: Vec<Vec<f64>>,
}

impl From<Vec<Vec<f64>>> for BiPoly {
    fn from(coeffs: Vec<Vec<f64>>) -> Self {
        BiPoly { coeffs }
    }
}

impl From<BiPoly> for Vec<Vec<f64>> {
    fn from(p: BiPoly) -> Self {
        p.coeffs
    }
}

impl BiPoly {
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        BiPoly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        BiPoly::new(vec![vec![c]])
    }

    /// `(t, s) ↦ D(s, t)`.
    pub fn transpose(&self) -> BiPoly {
        let width = self.coeffs.iter().map(Vec::len).max().unwrap_or(0);
        BiPoly::new(
            (0..width)
                .map(|k| {
                    self.coeffs
                        .iter()
                        .map(|r| r.get(k).copied().unwrap_or(0.0))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize, k: usize) -> f64 {
        self.coeffs
            .get(j)
            .and_then(|row| row.get(k))
            .copied()
            .unwrap_or(0.0)
    }

    fn nonzero_terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.coeffs.iter().enumerate().flat_map(|(j, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(move |(k, c)| (j, k, *c))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero_terms().next().is_none()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().flatten().all(|c| c.is_finite())
    }

    pub fn deg_t(&self) -> usize {
        self.nonzero_terms().map(|(j, _, _)| j).max().unwrap_or(0)
    }

    pub fn deg_s(&self) -> usize {
        self.nonzero_terms().map(|(_, k, _)| k).max().unwrap_or(0)
    }

    /// Largest `j + k` over nonzero terms.
    pub fn total_degree(&self) -> usize {
        self.nonzero_terms()
            .map(|(j, k, _)| j + k)
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, row| {
            acc * t + row.iter().rev().fold(0.0, |a, c| a * s + c)
        })
    }

    /// `∫₀ᵗ D(t,s)·p(s) ds` as a polynomial in `t`.
    pub fn kernel_forward(&self, p: &Poly) -> Poly {
        let mut out = Vec::new();
        for (j, k, c) in self.nonzero_terms() {
            for (a, pa) in p.coeffs().iter().enumerate() {
                let pow = j + k + a + 1;
                if out.len() <= pow {
                    out.resize(pow + 1, 0.0);
                }
                out[pow] += c * pa / (k + a + 1) as f64;
            }
        }
        Poly::new(out)
    }

    /// `∫ₜ¹ D(t,s)·p(s) ds` as a polynomial in `t`.
    pub fn kernel_backward(&self, p: &Poly) -> Poly {
        let mut out = Vec::new();
        for (j, k, c) in self.nonzero_terms() {
            for (a, pa) in p.coeffs().iter().enumerate() {
                let w = c * pa / (k + a + 1) as f64;
                let hi = j + k + a + 1;
                if out.len() <= hi {
                    out.resize(hi + 1, 0.0);
                }
                out[j] += w;
                out[hi] -= w;
            }
        }
        Poly::new(out)
    }

    /// `∫₀¹ D(t,s)·p(s) ds` as a polynomial in `t`.
    pub fn kernel_full(&self, p: &Poly) -> Poly {
        let mut out = Vec::new();
        for (j, k, c) in self.nonzero_terms() {
            for (a, pa) in p.coeffs().iter().enumerate() {
                if out.len() <= j {
                    out.resize(j + 1, 0.0);
                }
                out[j] += c * pa / (k + a + 1) as f64;
            }
        }
        Poly::new(out)
    }
}

/// A vector of polynomials, e.g. a trajectory `x(t) ∈ ℝⁿ[t]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolyVec(pub Vec<Poly>);

impl PolyVec {
    pub fn zeros(n: usize) -> Self {
        PolyVec(vec![Poly::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.0.iter().map(|p| p.eval(t)).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Poly> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for PolyVec {
    type Output = Poly;
    fn index(&self, i: usize) -> &Poly {
        &self.0[i]
    }
}

/// `Σᵢ ∫₀¹ pᵢ(t)·qᵢ(t) dt`
pub fn inner_ln(p: &PolyVec, q: &PolyVec) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "polynomial vector length",
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(p.iter()
        .zip(q.iter())
        .map(|(a, b)| (a * b).integral_01())
        .sum())
}

/// Shifted Legendre polynomials of degree `0..=n`, orthonormal on `[0, 1]`.
///
/// `√(2k+1) Σⱼ (−1)^{k+j} C(k,j) C(k+j,j) tʲ`; coefficients stay below 1e8 for
/// `n ≤ 14`, which bounds where they are a sensible conditioning basis.
pub fn legendre_01(n: usize) -> Vec<Poly> {
    (0..=n)
        .map(|k| {
            let norm = ((2 * k + 1) as f64).sqrt();
            let mut c = Vec::with_capacity(k + 1);
            let mut binom_k = 1.0; // C(k, j)
            let mut binom_kj = 1.0; // C(k+j, j)
            for j in 0..=k {
                if j > 0 {
                    binom_k *= (k + 1 - j) as f64 / j as f64;
                    binom_kj *= (k + j) as f64 / j as f64;
                }
                let sign = if (k + j) % 2 == 0 { 1.0 } else { -1.0 };
                c.push(norm * sign * binom_k * binom_kj);
            }
            Poly::new(c)
        })
        .collect()
}

/// Symmetric `m×m` polynomial matrix with upper-triangular storage.
///
/// Entry `(j, i)` aliases `(i, j)`. Storage is row-major over `i ≤ j`, which is
/// also the JSON layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPolyMatrix {
    m: usize,
    entries: Vec<Poly>,
}

impl SymPolyMatrix {
    pub fn zeros(m: usize) -> Self {
        assert!(m >= 1, "matrix side must be positive");
        SymPolyMatrix {
            m,
            entries: vec![Poly::zero(); m * (m + 1) / 2],
        }
    }

    pub fn identity(m: usize) -> Self {
        Self::diag((0..m).map(|_| Poly::constant(1.0)).collect())
    }

    pub fn diag(d: Vec<Poly>) -> Self {
        let mut out = Self::zeros(d.len());
        for (i, p) in d.into_iter().enumerate() {
            out.set(i, i, p);
        }
        out
    }

    /// Builds from the upper-triangle row-major list.
    pub fn from_upper(m: usize, entries: Vec<Poly>) -> Result<Self> {
        if m == 0 || entries.len() != m * (m + 1) / 2 {
            return Err(Error::DimensionMismatch {
                what: "upper-triangle entry count",
                expected: m * (m + 1) / 2,
                found: entries.len(),
            });
        }
        Ok(SymPolyMatrix { m, entries })
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> Poly) -> Self {
        let mut out = Self::zeros(m);
        for i in 0..m {
            for j in i..m {
                out.set(i, j, f(i, j));
            }
        }
        out
    }

    /// Constant matrix; only the upper triangle of `a` is read.
    pub fn from_constant(a: &DMatrix<f64>) -> Self {
        Self::from_fn(a.nrows(), |i, j| Poly::constant(a[(i, j)]))
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn upper_entries(&self) -> &[Poly] {
        &self.entries
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j < self.m, "index out of range");
        // row i starts after m + (m-1) + ... + (m-i+1) entries
        i * (2 * self.m - i + 1) / 2 + (j - i)
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.entries[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        let k = self.idx(i, j);
        self.entries[k] = p;
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Poly::is_zero)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(Poly::is_finite)
    }

    fn check_side(&self, other: &SymPolyMatrix) -> Result<()> {
        if self.m != other.m {
            return Err(Error::DimensionMismatch {
                what: "matrix side",
                expected: self.m,
                found: other.m,
            });
        }
        Ok(())
    }

    pub fn mat_add(&self, other: &SymPolyMatrix) -> Result<SymPolyMatrix> {
        self.check_side(other)?;
        Ok(SymPolyMatrix {
            m: self.m,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn mat_sub(&self, other: &SymPolyMatrix) -> Result<SymPolyMatrix> {
        self.check_side(other)?;
        Ok(SymPolyMatrix {
            m: self.m,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scale(&self, a: f64) -> SymPolyMatrix {
        SymPolyMatrix {
            m: self.m,
            entries: self.entries.iter().map(|p| p.scale(a)).collect(),
        }
    }

    /// Entrywise product with the scalar polynomial `w`.
    pub fn mat_scale_by_poly(&self, w: &Poly) -> SymPolyMatrix {
        SymPolyMatrix {
            m: self.m,
            entries: self.entries.iter().map(|p| p * w).collect(),
        }
    }

    /// `Tr(X(t)·Y(t))` as a polynomial.
    pub fn trace_product(&self, other: &SymPolyMatrix) -> Result<Poly> {
        self.check_side(other)?;
        let mut acc = Poly::zero();
        for i in 0..self.m {
            for j in i..self.m {
                let prod = self.get(i, j) * other.get(i, j);
                if i == j {
                    acc += &prod;
                } else {
                    acc += &prod.scale(2.0);
                }
            }
        }
        Ok(acc)
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        for i in 0..self.m {
            for j in i..self.m {
                let v = self.get(i, j).eval(t);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// Largest coefficient mismatch over all entries.
    pub fn max_abs_diff(&self, other: &SymPolyMatrix) -> Result<f64> {
        self.check_side(other)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.entries
            .iter()
            .map(Poly::max_abs_coeff)
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of `P(t)` over the uniform grid `{k/(N−1)}`.
    pub fn min_eig_on_grid(&self, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points, got {n}"
            )));
        }
        Ok((0..n)
            .map(|k| min_eigenvalue(&self.eval(k as f64 / (n - 1) as f64)))
            .fold(f64::INFINITY, f64::min))
    }
}

/// `∫₀¹ Tr(X(t)·Y(t)) dt`
pub fn inner_sm(p: &SymPolyMatrix, q: &SymPolyMatrix) -> Result<f64> {
    Ok(p.trace_product(q)?.integral_01())
}

/// Smallest eigenvalue of a dense symmetric matrix; `+∞` for an empty one.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
