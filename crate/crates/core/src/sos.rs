//! Gram maps for polynomial matrices that are PSD on `[0, 1]`.
//!
//! A symmetric polynomial matrix `X` of degree `d` is PSD on the interval
//! iff `X = α_d(Q₁) + β_d(Q₂)` for PSD constant `Q₁, Q₂`, where
//!
//! * odd `d`:  `α = t·Λ_{d−1}`, `β = (1−t)·Λ_{d−1}`
//! * even `d`: `α = Λ_d`, `β = t(1−t)·Λ_{d−2}` (no `β` term at `d = 0`)
//!
//! and `Λ_e(Q)_{ij} = Σ_{k,l} Q[(i,k),(j,l)] t^{k+l}` with `k, l ≤ e/2`.
//! Gram rows/columns are ordered degree-major: `(i, k) ↦ k·m + i`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polynomial::{legendre_01, Poly, SymPolyMatrix};

/// Position of the monomial `yᵢ·tᵏ` in the Gram basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonomialIndex {
    pub m: usize,
    pub half_deg: usize,
}

impl MonomialIndex {
    pub fn new(m: usize, half_deg: usize) -> Self {
        MonomialIndex { m, half_deg }
    }

    pub fn len(&self) -> usize {
        self.m * (self.half_deg + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn position(&self, i: usize, k: usize) -> usize {
        debug_assert!(i < self.m && k <= self.half_deg);
        k * self.m + i
    }

    /// Inverse of `position`: `(i, k)`.
    pub fn monomial(&self, pos: usize) -> (usize, usize) {
        (pos % self.m, pos / self.m)
    }
}

/// One of the two terms of the decomposition: `weight(t) · Λ_{lambda_deg}(Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramTerm {
    pub index: MonomialIndex,
    pub weight: Poly,
}

impl GramTerm {
    pub fn size(&self) -> usize {
        self.index.len()
    }

    /// Image of the symmetric unit `E_ab + E_ba` (or `E_aa`) as a single
    /// upper-triangle entry `(row, col, poly)`.
    pub fn unit_image(&self, a: usize, b: usize) -> (usize, usize, Poly) {
        let (i, k) = self.index.monomial(a);
        let (j, l) = self.index.monomial(b);
        let mult = if a != b && i == j { 2.0 } else { 1.0 };
        let p = self.weight.shift(k + l).scale(mult);
        (i.min(j), i.max(j), p)
    }

    /// `K = T ⊗ I_m` with rows of `T` the orthonormal Legendre polynomials in
    /// monomial coefficients: a Gram matrix `Q′` over the Legendre vector
    /// `K v(t, y)` equals `Kᵀ Q′ K` over the monomial one.
    pub fn legendre_transform(&self) -> DMatrix<f64> {
        let leg = legendre_01(self.index.half_deg);
        let s = self.size();
        DMatrix::from_fn(s, s, |r, c| {
            let (i, a) = self.index.monomial(r);
            let (j, k) = self.index.monomial(c);
            if i == j {
                leg[a].coeff(k)
            } else {
                0.0
            }
        })
    }

    pub fn apply(&self, q: &DMatrix<f64>) -> Result<SymPolyMatrix> {
        let s = self.size();
        if q.nrows() != s || q.ncols() != s {
            return Err(Error::DimensionMismatch {
                what: "Gram matrix side",
                expected: s,
                found: q.nrows(),
            });
        }
        let m = self.index.m;
        let h = self.index.half_deg;
        let mut out = SymPolyMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                let mut c = vec![0.0; 2 * h + 1];
                for k in 0..=h {
                    for l in 0..=h {
                        c[k + l] += q[(self.index.position(i, k), self.index.position(j, l))];
                    }
                }
                out.set(i, j, &self.weight * &Poly::new(c));
            }
        }
        Ok(out)
    }

    /// Adjoint: entry `((i,k),(j,l))` is `∫₀¹ t^{k+l} w(t) P_ij(t) dt`.
    pub fn adjoint(&self, p: &SymPolyMatrix) -> Result<DMatrix<f64>> {
        let m = self.index.m;
        if p.side() != m {
            return Err(Error::DimensionMismatch {
                what: "matrix side",
                expected: m,
                found: p.side(),
            });
        }
        let h = self.index.half_deg;
        let s = self.size();
        let mut out = DMatrix::zeros(s, s);
        for i in 0..m {
            for j in i..m {
                let wp = &self.weight * p.get(i, j);
                // moments ∫ t^e wP_ij for e = 0..2h
                let mom: Vec<f64> = (0..=2 * h)
                    .map(|e| {
                        wp.coeffs()
                            .iter()
                            .enumerate()
                            .map(|(q, c)| c / (e + q + 1) as f64)
                            .sum()
                    })
                    .collect();
                for k in 0..=h {
                    for l in 0..=h {
                        let a = self.index.position(i, k);
                        let b = self.index.position(j, l);
                        out[(a, b)] = mom[k + l];
                        out[(b, a)] = mom[k + l];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Shapes of the Gram matrices certifying a degree-`d` side-`m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramShape {
    pub d: usize,
    pub m: usize,
    pub alpha: GramTerm,
    pub beta: Option<GramTerm>,
}

impl GramShape {
    pub fn new(m: usize, d: usize) -> Self {
        let one_minus_t = Poly::new(vec![1.0, -1.0]);
        if d % 2 == 1 {
            let index = MonomialIndex::new(m, (d - 1) / 2);
            GramShape {
                d,
                m,
                alpha: GramTerm {
                    index,
                    weight: Poly::t(),
                },
                beta: Some(GramTerm {
                    index,
                    weight: one_minus_t,
                }),
            }
        } else {
            let beta = (d >= 2).then(|| GramTerm {
                index: MonomialIndex::new(m, (d - 2) / 2),
                weight: Poly::new(vec![0.0, 1.0, -1.0]),
            });
            GramShape {
                d,
                m,
                alpha: GramTerm {
                    index: MonomialIndex::new(m, d / 2),
                    weight: Poly::constant(1.0),
                },
                beta,
            }
        }
    }

    /// Recovers the shape from the two Gram sizes (`size_q2 = 0` for `d = 0`).
    pub fn from_sizes(m: usize, size_q1: usize, size_q2: usize) -> Result<Self> {
        let bad = || {
            Error::InvalidArgument(format!(
                "Gram sizes ({size_q1}, {size_q2}) do not fit side {m}"
            ))
        };
        if m == 0 || !size_q1.is_multiple_of(m) || !size_q2.is_multiple_of(m) || size_q1 == 0 {
            return Err(bad());
        }
        let d = if size_q1 == size_q2 {
            2 * size_q1 / m - 1
        } else if size_q1 == size_q2 + m {
            2 * size_q2 / m
        } else {
            return Err(bad());
        };
        Ok(GramShape::new(m, d))
    }

    pub fn size_q1(&self) -> usize {
        self.alpha.size()
    }

    pub fn size_q2(&self) -> usize {
        self.beta.as_ref().map_or(0, GramTerm::size)
    }

    /// `α(Q₁) + β(Q₂)`; `q2` is ignored (and may be empty) when `d = 0`.
    pub fn compose(&self, q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> Result<SymPolyMatrix> {
        let x = self.alpha.apply(q1)?;
        match &self.beta {
            Some(b) => x.mat_add(&b.apply(q2)?),
            None => Ok(x),
        }
    }
}

fn check_even(d: usize) -> Result<()> {
    if !d.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "Λ needs an even degree, got {d}"
        )));
    }
    Ok(())
}

pub fn lambda(m: usize, d_even: usize, q: &DMatrix<f64>) -> Result<SymPolyMatrix> {
    check_even(d_even)?;
    GramTerm {
        index: MonomialIndex::new(m, d_even / 2),
        weight: Poly::constant(1.0),
    }
    .apply(q)
}

pub fn lambda_adjoint(m: usize, d_even: usize, p: &SymPolyMatrix) -> Result<DMatrix<f64>> {
    check_even(d_even)?;
    GramTerm {
        index: MonomialIndex::new(m, d_even / 2),
        weight: Poly::constant(1.0),
    }
    .adjoint(p)
}

pub fn alpha(m: usize, d: usize, q: &DMatrix<f64>) -> Result<SymPolyMatrix> {
    GramShape::new(m, d).alpha.apply(q)
}

pub fn alpha_adjoint(m: usize, d: usize, p: &SymPolyMatrix) -> Result<DMatrix<f64>> {
    GramShape::new(m, d).alpha.adjoint(p)
}

fn beta_term(m: usize, d: usize) -> Result<GramTerm> {
    GramShape::new(m, d)
        .beta
        .ok_or_else(|| Error::InvalidArgument("β is undefined for d = 0".into()))
}

pub fn beta(m: usize, d: usize, q: &DMatrix<f64>) -> Result<SymPolyMatrix> {
    beta_term(m, d)?.apply(q)
}

pub fn beta_adjoint(m: usize, d: usize, p: &SymPolyMatrix) -> Result<DMatrix<f64>> {
    beta_term(m, d)?.adjoint(p)
}
