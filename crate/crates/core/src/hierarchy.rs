//! The primal (best polynomial solution) and dual (moment upper bound)
//! hierarchies, and decoding of solver output.
//!
//! Primal degree `d`: `x ∈ ℝⁿ_d[t]` and every block carries Gram matrices
//! with `Fx = α_{d′}(Q₁) + β_{d′}(Q₂)` coefficientwise, `d′ = fx_degree(d)`.
//! Dual level `d`: `x ∈ ℝⁿ_{d̂}[t]` with the constant LMIs `α*_d(Fx) ⪰ 0`,
//! `β*_d(Fx) ⪰ 0` per block and vanishing localized moments per equality.
//! The dual is posed in orthonormal Legendre coordinates (trajectory
//! coefficients, LMIs up to congruence, moment rows up to an invertible map);
//! the feasible set is the same, only the conditioning changes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{
    psd_entries, psd_row, AffineExpr, Backend, ConicProgram, ProgramBuilder, SolveResult,
    SolveStatus, SolverSettings,
};
use crate::error::{Error, Result};
use crate::model::{AffineBlock, EqualityConstraint, Sense, TvSdp};
use crate::polynomial::{inner_ln, legendre_01, min_eigenvalue, Poly, PolyVec, SymPolyMatrix};
use crate::sos::{GramShape, GramTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Primal,
    Dual,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Primal => "primal",
            Mode::Dual => "dual",
        }
    }
}

/// Objective coefficients of `x ↦ Σᵢ ∫₀¹ cᵢ xᵢ` when `xᵢ = Σₐ z[i·len + a]·basis[a]`.
fn objective_weights(c: &PolyVec, basis: &[Poly]) -> Vec<f64> {
    c.iter()
        .flat_map(|ci| basis.iter().map(move |b| (ci * b).integral_01()))
        .collect()
}

fn trajectory(z: &[f64], n: usize, basis: &[Poly]) -> PolyVec {
    let len = basis.len();
    PolyVec(
        (0..n)
            .map(|i| {
                basis
                    .iter()
                    .zip(&z[i * len..(i + 1) * len])
                    .fold(Poly::zero(), |acc, (b, &v)| &acc + &b.scale(v))
            })
            .collect(),
    )
}

fn monomials(d: usize) -> Vec<Poly> {
    (0..=d).map(|a| Poly::monomial(a, 1.0)).collect()
}

fn uses_var(block: &AffineBlock, i: usize) -> bool {
    !block.a[i].is_zero()
        || block
            .kernels
            .iter()
            .any(|k| k.var == i && !k.coeffs.is_zero())
}

fn eq_uses_var(eq: &EqualityConstraint, i: usize) -> bool {
    !eq.e[i].is_zero() || eq.kernels.iter().any(|k| k.var == i && !k.coeffs.is_zero())
}

/// Reads a symmetric matrix whose lower triangle sits at `offset` in `psd_entries` order.
fn read_sym(z: &[f64], offset: usize, side: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(side, side);
    for (r, c) in psd_entries(side) {
        let v = z[offset + psd_row(side, r, c)];
        q[(r, c)] = v;
        q[(c, r)] = v;
    }
    q
}

fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

fn rows_mat(rows: &[Vec<f64>], what: &'static str) -> Result<DMatrix<f64>> {
    let s = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != s) {
        return Err(Error::DimensionMismatch {
            what,
            expected: s,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(s, s, |r, c| rows[r][c]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalBlockLayout {
    pub d_prime: usize,
    pub shape: GramShape,
    pub q1_offset: usize,
    pub q2_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalEncoding {
    pub d: usize,
    pub n: usize,
    pub blocks: Vec<PrimalBlockLayout>,
    /// Number of coefficient rows per equality constraint.
    pub equality_rows: Vec<usize>,
    pub objective: Vec<f64>,
}

pub fn build_primal(inst: &TvSdp, d: usize) -> (ConicProgram, PrimalEncoding) {
    primal_program(inst, d, false)
}

/// Phase-1 variant of [`build_primal`]: maximize `ε ≤ 1` subject to
/// `Fx − εI` having a degree-`d′` certificate. The last variable is `ε`; an
/// optimal `ε < 0` certifies that the degree-`d` primal is infeasible.
pub fn build_primal_margin(inst: &TvSdp, d: usize) -> (ConicProgram, PrimalEncoding) {
    primal_program(inst, d, true)
}

fn primal_program(inst: &TvSdp, d: usize, margin: bool) -> (ConicProgram, PrimalEncoding) {
    let n = inst.n;
    let mut b = ProgramBuilder::new();
    let x0 = b.add_vars(n * (d + 1));
    let basis = monomials(d);
    let weights = objective_weights(&inst.objective, &basis);
    let eps = margin.then(|| b.add_vars(1));
    match eps {
        Some(e) => {
            b.set_objective(e, -1.0);
            b.add_nonneg(&[AffineExpr {
                constant: 1.0,
                terms: vec![(e, -1.0)],
            }]);
        }
        None => {
            for (k, w) in weights.iter().enumerate() {
                b.set_objective(x0 + k, -w);
            }
        }
    }

    let mut layouts = Vec::with_capacity(inst.blocks.len());
    let mut cones_after = Vec::new();
    for block in &inst.blocks {
        let m = block.side();
        let d_prime = block.fx_degree(d);
        let shape = GramShape::new(m, d_prime);
        let s1 = shape.size_q1();
        let s2 = shape.size_q2();
        let q1_offset = b.add_vars(s1 * (s1 + 1) / 2);
        let q2_offset = b.add_vars(s2 * (s2 + 1) / 2);

        // one row per (upper entry, power); entry index e = position in upper_entries
        let entry_index = |i: usize, j: usize| i * (2 * m - i + 1) / 2 + (j - i);
        let width = d_prime + 1;
        let mut rows = vec![AffineExpr::default(); m * (m + 1) / 2 * width];
        for (e, p) in block.a0.upper_entries().iter().enumerate() {
            for (k, c) in p.coeffs().iter().enumerate() {
                rows[e * width + k].constant = *c;
            }
        }
        if let Some(e) = eps {
            for i in 0..m {
                rows[entry_index(i, i) * width].add_term(e, -1.0);
            }
        }
        for i in (0..n).filter(|&i| uses_var(block, i)) {
            for (a, mono) in basis.iter().enumerate() {
                let img = block.variable_image(i, mono);
                for (e, p) in img.upper_entries().iter().enumerate() {
                    for (k, c) in p.coeffs().iter().enumerate() {
                        rows[e * width + k].add_term(x0 + i * (d + 1) + a, *c);
                    }
                }
            }
        }
        let mut gram_terms = vec![(&shape.alpha, q1_offset, s1)];
        if let Some(beta) = &shape.beta {
            gram_terms.push((beta, q2_offset, s2));
        }
        for (term, offset, side) in gram_terms {
            for (r, c) in psd_entries(side) {
                let (i, j, p) = term.unit_image(c, r);
                let e = entry_index(i, j);
                for (k, v) in p.coeffs().iter().enumerate() {
                    rows[e * width + k].add_term(offset + psd_row(side, r, c), -v);
                }
            }
        }
        b.add_zero(&rows);
        cones_after.push((q1_offset, s1, q2_offset, s2));
        layouts.push(PrimalBlockLayout {
            d_prime,
            shape,
            q1_offset,
            q2_offset,
        });
    }

    let mut equality_rows = Vec::with_capacity(inst.equalities.len());
    for eq in &inst.equalities {
        let deg = eq.residual_degree(d);
        let mut rows = vec![AffineExpr::default(); deg + 1];
        for (k, c) in eq.e0.coeffs().iter().enumerate() {
            rows[k].constant = *c;
        }
        for i in (0..n).filter(|&i| eq_uses_var(eq, i)) {
            for (a, mono) in basis.iter().enumerate() {
                for (k, c) in eq.variable_image(i, mono).coeffs().iter().enumerate() {
                    rows[k].add_term(x0 + i * (d + 1) + a, *c);
                }
            }
        }
        b.add_zero(&rows);
        equality_rows.push(deg + 1);
    }

    for (o1, s1, o2, s2) in cones_after {
        for (offset, side) in [(o1, s1), (o2, s2)] {
            if side > 0 {
                let entries: Vec<AffineExpr> = (0..side * (side + 1) / 2)
                    .map(|k| AffineExpr::var(offset + k))
                    .collect();
                b.add_psd(side, &entries);
            }
        }
    }

    (
        b.build(),
        PrimalEncoding {
            d,
            n,
            blocks: layouts,
            equality_rows,
            objective: weights,
        },
    )
}

/// Degree of the dual trajectory space at level `d`.
pub fn dual_degree(inst: &TvSdp, d: usize) -> usize {
    let mut deg = inst.objective.degree();
    for block in &inst.blocks {
        for a in block.a.iter().filter(|a| !a.is_zero()) {
            deg = deg.max(d + a.degree());
        }
        for k in block.kernels.iter().filter(|k| !k.coeffs.is_zero()) {
            deg = deg.max(d + 1 + k.coeffs.total_degree());
        }
    }
    for eq in &inst.equalities {
        for e in eq.e.iter().filter(|e| !e.is_zero()) {
            deg = deg.max(d + e.degree());
        }
        for k in eq.kernels.iter().filter(|k| !k.coeffs.is_zero()) {
            deg = deg.max(d + 1 + k.coeffs.total_degree());
        }
    }
    deg
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualEncoding {
    pub d: usize,
    pub d_hat: usize,
    pub n: usize,
    /// Per block: the side-`m` Gram shape at level `d` (its terms define the LMIs).
    pub shapes: Vec<GramShape>,
    pub objective: Vec<f64>,
}

fn terms(shape: &GramShape) -> Vec<&GramTerm> {
    std::iter::once(&shape.alpha)
        .chain(shape.beta.as_ref())
        .collect()
}

/// Localized moments `∫₀¹ tᵉ w(t) p(t) dt`, `e = 0..=2·half_deg`.
fn scalar_moments(term: &GramTerm, p: &Poly) -> Vec<f64> {
    let wp = &term.weight * p;
    (0..=2 * term.index.half_deg)
        .map(|e| {
            wp.coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| c / (e + k + 1) as f64)
                .sum()
        })
        .collect()
}

/// Same constraints as [`scalar_moments`], tested against orthonormal
/// Legendre polynomials instead of monomials.
fn legendre_moments(term: &GramTerm, p: &Poly) -> Vec<f64> {
    let wp = &term.weight * p;
    legendre_01(2 * term.index.half_deg)
        .iter()
        .map(|l| (l * &wp).integral_01())
        .collect()
}

/// Moment matrix in Legendre coordinates: a congruence, so PSD-ness is kept
/// while the Hilbert-matrix conditioning of raw moments goes away.
fn congruence(moments: &DMatrix<f64>, term: &GramTerm) -> DMatrix<f64> {
    let k = term.legendre_transform();
    &k * moments * k.transpose()
}

pub fn build_dual(inst: &TvSdp, d: usize) -> (ConicProgram, DualEncoding) {
    let n = inst.n;
    let d_hat = dual_degree(inst, d);
    let mut b = ProgramBuilder::new();
    let x0 = b.add_vars(n * (d_hat + 1));
    let basis = legendre_01(d_hat);
    let weights = objective_weights(&inst.objective, &basis);
    for (k, w) in weights.iter().enumerate() {
        b.set_objective(x0 + k, -w);
    }

    // equalities first so all zero rows form one cone
    let one = GramShape::new(1, d);
    for eq in &inst.equalities {
        for term in terms(&one) {
            let mut rows: Vec<AffineExpr> = legendre_moments(term, &eq.e0)
                .into_iter()
                .map(AffineExpr::constant)
                .collect();
            for i in (0..n).filter(|&i| eq_uses_var(eq, i)) {
                for (a, mono) in basis.iter().enumerate() {
                    let mom = legendre_moments(term, &eq.variable_image(i, mono));
                    for (row, v) in rows.iter_mut().zip(mom) {
                        row.add_term(x0 + i * (d_hat + 1) + a, v);
                    }
                }
            }
            b.add_zero(&rows);
        }
    }

    let mut shapes = Vec::with_capacity(inst.blocks.len());
    for block in &inst.blocks {
        let shape = GramShape::new(block.side(), d);
        for term in terms(&shape) {
            let side = term.size();
            let lmi = |p: &SymPolyMatrix| congruence(&term.adjoint(p).expect("block side"), term);
            let m0 = lmi(&block.a0);
            let mut entries: Vec<AffineExpr> = psd_entries(side)
                .map(|(r, c)| AffineExpr::constant(m0[(r, c)]))
                .collect();
            for i in (0..n).filter(|&i| uses_var(block, i)) {
                for (a, mono) in basis.iter().enumerate() {
                    let mi = lmi(&block.variable_image(i, mono));
                    for (e, (r, c)) in entries.iter_mut().zip(psd_entries(side)) {
                        e.add_term(x0 + i * (d_hat + 1) + a, mi[(r, c)]);
                    }
                }
            }
            b.add_psd(side, &entries);
        }
        shapes.push(shape);
    }

    (
        b.build(),
        DualEncoding {
            d,
            d_hat,
            n,
            shapes,
            objective: weights,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramBlock {
    #[serde(rename = "Q1")]
    pub q1: Vec<Vec<f64>>,
    #[serde(rename = "Q2")]
    pub q2: Vec<Vec<f64>>,
    pub residual: f64,
}

impl GramBlock {
    pub fn q1_matrix(&self) -> Result<DMatrix<f64>> {
        rows_mat(&self.q1, "Q1 row length")
    }

    pub fn q2_matrix(&self) -> Result<DMatrix<f64>> {
        rows_mat(&self.q2, "Q2 row length")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramCertificate {
    pub blocks: Vec<GramBlock>,
}

impl GramCertificate {
    pub fn max_residual(&self) -> f64 {
        self.blocks.iter().map(|b| b.residual).fold(0.0, f64::max)
    }
}

/// Constant moment matrices `α*_d(Fx)`, `β*_d(Fx)` of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBlock {
    pub alpha: DMatrix<f64>,
    pub beta: Option<DMatrix<f64>>,
}

impl MomentBlock {
    pub fn min_eigenvalue(&self) -> f64 {
        let a = min_eigenvalue(&self.alpha);
        self.beta.as_ref().map_or(a, |b| a.min(min_eigenvalue(b)))
    }
}

/// Moment LMIs of every block at level `d` for a given trajectory.
pub fn moment_blocks(inst: &TvSdp, d: usize, x: &PolyVec) -> Result<Vec<MomentBlock>> {
    inst.blocks
        .iter()
        .map(|block| {
            let fx = block.apply(x)?;
            let shape = GramShape::new(block.side(), d);
            Ok(MomentBlock {
                alpha: shape.alpha.adjoint(&fx)?,
                beta: shape.beta.as_ref().map(|t| t.adjoint(&fx)).transpose()?,
            })
        })
        .collect()
}

/// Largest localized moment of any equality residual at level `d`.
pub fn equality_moment_residual(inst: &TvSdp, d: usize, x: &PolyVec) -> Result<f64> {
    let one = GramShape::new(1, d);
    let mut worst = 0.0f64;
    for eq in &inst.equalities {
        let r = eq.apply(x)?;
        for term in terms(&one) {
            worst = scalar_moments(term, &r)
                .into_iter()
                .fold(worst, |w, v| w.max(v.abs()));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct HierarchySolution {
    pub mode: Mode,
    pub degree: usize,
    pub status: SolveStatus,
    pub sense: Sense,
    /// Present when the status carries a solution.
    pub x: Option<PolyVec>,
    /// `Σ∫cᵢxᵢ` recomputed from `x`, in maximization form.
    pub objective: Option<f64>,
    pub certificate: Option<GramCertificate>,
    pub moments: Option<Vec<MomentBlock>>,
    pub iterations: u32,
    pub backend_status: String,
}

impl HierarchySolution {
    /// Objective in the instance's original sense.
    pub fn reported_objective(&self) -> Option<f64> {
        self.objective.map(|v| match self.sense {
            Sense::Maximize => v,
            Sense::Minimize => -v,
        })
    }
}

/// `Σᵢ Σₖₗ |cᵢₖ||xᵢₗ|/(k+l+1)`: the size of the terms that cancel in `Σ∫cᵢxᵢ`.
fn objective_magnitude(c: &PolyVec, x: &PolyVec) -> f64 {
    c.iter()
        .zip(x.iter())
        .map(|(ci, xi)| {
            let mut s = 0.0;
            for (k, a) in ci.coeffs().iter().enumerate() {
                for (l, b) in xi.coeffs().iter().enumerate() {
                    s += (a * b).abs() / (k + l + 1) as f64;
                }
            }
            s
        })
        .sum()
}

fn check_objective(
    status: SolveStatus,
    decoded: f64,
    magnitude: f64,
    res: &SolveResult,
) -> Result<()> {
    let solver = -res.objective;
    // nearly free directions can leave coefficients large enough that the
    // recomputation itself is only accurate relative to `magnitude`
    let tol = 1e-6 * (1.0 + solver.abs()) + 1e-12 * magnitude;
    if status == SolveStatus::Optimal && (decoded - solver).abs() > tol {
        return Err(Error::ObjectiveMismatch { decoded, solver });
    }
    if status == SolveStatus::Inaccurate {
        log::warn!(
            "solver returned an inaccurate solution ({})",
            res.backend_status
        );
    }
    Ok(())
}

fn undecodable(mode: Mode, degree: usize, sense: Sense, res: &SolveResult) -> HierarchySolution {
    HierarchySolution {
        mode,
        degree,
        status: res.status,
        sense,
        x: None,
        objective: None,
        certificate: None,
        moments: None,
        iterations: res.iterations,
        backend_status: res.backend_status.clone(),
    }
}

pub fn decode_primal(
    inst: &TvSdp,
    res: &SolveResult,
    enc: &PrimalEncoding,
) -> Result<HierarchySolution> {
    if !res.status.has_solution() {
        return Err(Error::NotDecodable(res.status.to_string()));
    }
    let x = trajectory(&res.z, enc.n, &monomials(enc.d));
    let mut blocks = Vec::with_capacity(enc.blocks.len());
    for (block, lay) in inst.blocks.iter().zip(&enc.blocks) {
        let q1 = read_sym(&res.z, lay.q1_offset, lay.shape.size_q1());
        let q2 = read_sym(&res.z, lay.q2_offset, lay.shape.size_q2());
        let residual = block
            .apply(&x)?
            .max_abs_diff(&lay.shape.compose(&q1, &q2)?)?;
        blocks.push(GramBlock {
            q1: mat_rows(&q1),
            q2: mat_rows(&q2),
            residual,
        });
    }
    let objective = inner_ln(&inst.objective, &x)?;
    check_objective(
        res.status,
        objective,
        objective_magnitude(&inst.objective, &x),
        res,
    )?;
    Ok(HierarchySolution {
        mode: Mode::Primal,
        degree: enc.d,
        status: res.status,
        sense: inst.sense,
        x: Some(x),
        objective: Some(objective),
        certificate: Some(GramCertificate { blocks }),
        moments: None,
        iterations: res.iterations,
        backend_status: res.backend_status.clone(),
    })
}

pub fn decode_dual(
    inst: &TvSdp,
    res: &SolveResult,
    enc: &DualEncoding,
) -> Result<HierarchySolution> {
    if !res.status.has_solution() {
        return Err(Error::NotDecodable(res.status.to_string()));
    }
    let x = trajectory(&res.z, enc.n, &legendre_01(enc.d_hat));
    let objective = inner_ln(&inst.objective, &x)?;
    check_objective(
        res.status,
        objective,
        objective_magnitude(&inst.objective, &x),
        res,
    )?;
    Ok(HierarchySolution {
        mode: Mode::Dual,
        degree: enc.d,
        status: res.status,
        sense: inst.sense,
        moments: Some(moment_blocks(inst, enc.d, &x)?),
        x: Some(x),
        objective: Some(objective),
        certificate: None,
        iterations: res.iterations,
        backend_status: res.backend_status.clone(),
    })
}

/// Builds, solves and decodes the primal degree-`d` problem.
pub fn solve_primal(
    inst: &TvSdp,
    d: usize,
    backend: &dyn Backend,
    settings: &SolverSettings,
) -> Result<HierarchySolution> {
    let (prog, enc) = build_primal(inst, d);
    let res = backend.solve(&prog, settings)?;
    if res.status == SolveStatus::Failed {
        // a nearly feasible infeasible problem often stalls instead of
        // producing a ray; the phase-1 margin settles it
        if let Some(eps) = primal_margin(inst, d, backend, settings)? {
            if eps < -MARGIN_TOL {
                let mut sol = undecodable(Mode::Primal, d, inst.sense, &res);
                sol.status = SolveStatus::Infeasible;
                sol.backend_status = format!("{}; phase-1 margin {eps:.3e}", res.backend_status);
                return Ok(sol);
            }
        }
    }
    if !res.status.has_solution() {
        return Ok(undecodable(Mode::Primal, d, inst.sense, &res));
    }
    self_check(inst, decode_primal(inst, &res, &enc)?)
}

/// Margin below which a phase-1 optimum counts as an infeasibility proof.
pub const MARGIN_TOL: f64 = 1e-6;

/// Largest `ε ≤ 1` with `Fx − εI` certifiable at degree `d`, or `None` when
/// the phase-1 solve itself does not return a solution.
pub fn primal_margin(
    inst: &TvSdp,
    d: usize,
    backend: &dyn Backend,
    settings: &SolverSettings,
) -> Result<Option<f64>> {
    let (prog, _) = build_primal_margin(inst, d);
    let res = backend.solve(&prog, settings)?;
    Ok(res.status.has_solution().then(|| -res.objective))
}

/// Builds, solves and decodes the dual level-`d` problem (no implicit box).
pub fn solve_dual(
    inst: &TvSdp,
    d: usize,
    backend: &dyn Backend,
    settings: &SolverSettings,
) -> Result<HierarchySolution> {
    let (prog, enc) = build_dual(inst, d);
    let res = backend.solve(&prog, settings)?;
    if !res.status.has_solution() {
        return Ok(undecodable(Mode::Dual, d, inst.sense, &res));
    }
    self_check(inst, decode_dual(inst, &res, &enc)?)
}

/// Tolerance and grid of the default verification.
pub const VERIFY_TOL: f64 = 1e-6;
pub const VERIFY_GRID: usize = 1001;

/// Downgrades an optimal solution to inaccurate when it fails the default
/// verification; the backend's residuals are relative to the data scale,
/// which for ill-conditioned Gram matrices can exceed absolute tolerances.
fn self_check(inst: &TvSdp, mut sol: HierarchySolution) -> Result<HierarchySolution> {
    if sol.status == SolveStatus::Optimal {
        let rep = verify_solution(inst, &sol, VERIFY_TOL, VERIFY_GRID)?;
        if !rep.passed {
            log::warn!(
                "{} degree {} fails verification at tolerance {VERIFY_TOL:e}",
                sol.mode.as_str(),
                sol.degree
            );
            sol.status = SolveStatus::Inaccurate;
            sol.backend_status += "; fails verification";
        }
    }
    Ok(sol)
}

pub const MAX_MOMENT_DEGREE: usize = 12;

/// The degree-`d` polynomial with `∫₀¹ tⁱ p = moments[i]`, `i = 0..=d`
/// (the Hilbert system `H p = m`).
pub fn match_moments(moments: &[f64], d: usize) -> Result<Poly> {
    if d > MAX_MOMENT_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "moment matching is limited to degree {MAX_MOMENT_DEGREE} (Hilbert conditioning), got {d}"
        )));
    }
    if moments.len() != d + 1 {
        return Err(Error::DimensionMismatch {
            what: "moment count",
            expected: d + 1,
            found: moments.len(),
        });
    }
    let h = DMatrix::from_fn(d + 1, d + 1, |i, j| 1.0 / (i + j + 1) as f64);
    let rhs = nalgebra::DVector::from_column_slice(moments);
    let p = h
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("singular Hilbert system".into()))?;
    Ok(Poly::new(p.iter().copied().collect()))
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    generator: String,
    mode: Mode,
    degree: usize,
    status: SolveStatus,
    sense: Sense,
    objective: Option<f64>,
    x: Vec<Poly>,
    certificate: Option<GramCertificate>,
}

pub const GENERATOR: &str = concat!("tvsdp ", env!("CARGO_PKG_VERSION"));

pub fn solution_to_json(sol: &HierarchySolution) -> Result<String> {
    let j = SolutionJson {
        generator: GENERATOR.to_string(),
        mode: sol.mode,
        degree: sol.degree,
        status: sol.status,
        sense: sol.sense,
        objective: sol.reported_objective(),
        x: sol.x.as_ref().map(|x| x.0.clone()).unwrap_or_default(),
        certificate: sol.certificate.clone(),
    };
    Ok(serde_json::to_string_pretty(&j)?)
}

/// Reads a solution file back. Moment blocks are not stored; they are
/// recomputed from `x` by the verifier.
pub fn solution_from_json(s: &str) -> Result<HierarchySolution> {
    let j: SolutionJson = serde_json::from_str(s)?;
    let has_x = j.status.has_solution();
    let objective = j.objective.map(|v| match j.sense {
        Sense::Maximize => v,
        Sense::Minimize => -v,
    });
    Ok(HierarchySolution {
        mode: j.mode,
        degree: j.degree,
        status: j.status,
        sense: j.sense,
        x: has_x.then_some(PolyVec(j.x)),
        objective,
        certificate: j.certificate,
        moments: None,
        iterations: 0,
        backend_status: String::new(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockCheck {
    pub block: usize,
    pub coeff_residual: Option<f64>,
    pub min_eig_q1: Option<f64>,
    pub min_eig_q2: Option<f64>,
    /// Dual solutions: smallest eigenvalue of the moment LMIs.
    pub min_eig_moments: Option<f64>,
    pub grid_min_eig: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mode: Mode,
    pub degree: usize,
    pub tol: f64,
    pub grid: usize,
    pub blocks: Vec<BlockCheck>,
    /// Largest coefficient (primal) or localized moment (dual) of any equality residual.
    pub equality_residual: f64,
    pub objective_recomputed: f64,
    pub passed: bool,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Independent re-check of a decoded solution against its instance.
///
/// Primal: Gram identity and PSD Gram matrices per block (when a certificate
/// is present), pointwise PSD on a grid, equality residuals identically zero.
/// Dual: the moment LMIs and localized equality moments at the stated level.
pub fn verify_solution(
    inst: &TvSdp,
    sol: &HierarchySolution,
    tol: f64,
    grid: usize,
) -> Result<VerifyReport> {
    let x = sol
        .x
        .as_ref()
        .ok_or_else(|| Error::NotDecodable(sol.status.to_string()))?;
    if x.len() != inst.n {
        return Err(Error::DimensionMismatch {
            what: "solution length",
            expected: inst.n,
            found: x.len(),
        });
    }
    let mut blocks = Vec::with_capacity(inst.blocks.len());
    let moments = match sol.mode {
        Mode::Dual => Some(moment_blocks(inst, sol.degree, x)?),
        Mode::Primal => None,
    };
    if let Some(cert) = &sol.certificate {
        if cert.blocks.len() != inst.blocks.len() {
            return Err(Error::DimensionMismatch {
                what: "certificate blocks",
                expected: inst.blocks.len(),
                found: cert.blocks.len(),
            });
        }
    }
    for (k, block) in inst.blocks.iter().enumerate() {
        let grid_min_eig = block.apply(x)?.min_eig_on_grid(grid)?;
        let mut check = BlockCheck {
            block: k,
            coeff_residual: None,
            min_eig_q1: None,
            min_eig_q2: None,
            min_eig_moments: None,
            grid_min_eig,
            passed: true,
        };
        match (sol.mode, &sol.certificate, &moments) {
            (Mode::Primal, Some(cert), _) => {
                let gb = &cert.blocks[k];
                let rep = crate::conic::verify_certificate(
                    block,
                    x,
                    &gb.q1_matrix()?,
                    &gb.q2_matrix()?,
                    tol,
                    grid,
                )?;
                check.coeff_residual = Some(rep.coeff_residual);
                check.min_eig_q1 = finite_or_none(rep.min_eig_q1);
                check.min_eig_q2 = finite_or_none(rep.min_eig_q2);
                check.passed = rep.passed && grid_min_eig >= -tol;
            }
            (Mode::Primal, None, _) => check.passed = grid_min_eig >= -tol,
            (Mode::Dual, _, Some(mb)) => {
                let me = mb[k].min_eigenvalue();
                check.min_eig_moments = Some(me);
                check.passed = me >= -tol;
            }
            (Mode::Dual, _, None) => unreachable!(),
        }
        blocks.push(check);
    }
    let equality_residual = match sol.mode {
        Mode::Primal => inst
            .equalities
            .iter()
            .map(|eq| eq.apply(x).map(|r| r.max_abs_coeff()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max),
        Mode::Dual => equality_moment_residual(inst, sol.degree, x)?,
    };
    let passed = blocks.iter().all(|b| b.passed) && equality_residual <= tol;
    Ok(VerifyReport {
        mode: sol.mode,
        degree: sol.degree,
        tol,
        grid,
        blocks,
        equality_residual,
        objective_recomputed: inst.reported_objective(inner_ln(&inst.objective, x)?),
        passed,
    })
}
