//! Standard-form conic programs, the solver backend, SDPA export and
//! independent verification oracles.
//!
//! A program is `minimize qᵀz  s.t.  Gz + s = h,  s ∈ K` where `K` is a
//! product of zero cones, nonnegative orthants and PSD cones. PSD slack rows
//! hold the lower triangle column by column — `(0,0), (1,0), …, (1,1), …` —
//! in plain matrix units; the √2 off-diagonal scaling that makes the
//! vectorization an isometry is applied only when handing the program to a
//! backend, so coefficients survive the SDPA round trip unchanged.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AffineBlock, TvSdp};
use crate::polynomial::{min_eigenvalue, PolyVec};
use crate::sos::GramShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// PSD cone of the given matrix side.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(k) | Cone::Nonneg(k) => k,
            Cone::Psd(s) => s * (s + 1) / 2,
        }
    }
}

/// Lower-triangle column-stacked position of `(r, c)`, `r ≥ c`, in a side-`s` block.
pub fn psd_row(s: usize, r: usize, c: usize) -> usize {
    debug_assert!(r >= c && r < s);
    c * s - c * (c.saturating_sub(1)) / 2 + (r - c)
}

/// Inverse of `psd_row` listing for a side-`s` block.
pub fn psd_entries(s: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..s).flat_map(move |c| (c..s).map(move |r| (r, c)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub q: Vec<f64>,
    /// Nonzeros of `G` as `(row, col, value)`, sorted, no duplicates.
    pub g: Vec<(usize, usize, f64)>,
    pub h: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn num_rows(&self) -> usize {
        self.h.len()
    }

    pub fn check(&self) -> Result<()> {
        let dims: usize = self.cones.iter().map(Cone::dim).sum();
        if dims != self.h.len() {
            return Err(Error::DimensionMismatch {
                what: "cone dimension vs rows",
                expected: self.h.len(),
                found: dims,
            });
        }
        if self.q.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                what: "objective length",
                expected: self.num_vars,
                found: self.q.len(),
            });
        }
        if self.cones.iter().any(|c| matches!(c, Cone::Psd(0))) {
            return Err(Error::InvalidArgument("PSD cone of side 0".into()));
        }
        if self
            .g
            .iter()
            .any(|&(r, c, _)| r >= self.h.len() || c >= self.num_vars)
        {
            return Err(Error::InvalidArgument("G entry out of range".into()));
        }
        Ok(())
    }

    /// `h − Gz`.
    pub fn slack(&self, z: &[f64]) -> Vec<f64> {
        let mut s = self.h.clone();
        for &(r, c, v) in &self.g {
            s[r] -= v * z[c];
        }
        s
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.q.iter().zip(z).map(|(a, b)| a * b).sum()
    }
}

fn canonical(mut trip: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    trip.sort_by_key(|a| (a.0, a.1));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(trip.len());
    for (r, c, v) in trip {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out.retain(|e| e.2 != 0.0);
    out
}

/// `constant + Σ coef·z[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(v: usize) -> Self {
        AffineExpr {
            constant: 0.0,
            terms: vec![(v, 1.0)],
        }
    }

    pub fn add_term(&mut self, var: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * z[v]).sum::<f64>()
    }
}

/// Incremental construction of a `ConicProgram`.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    num_vars: usize,
    q: Vec<f64>,
    g: Vec<(usize, usize, f64)>,
    h: Vec<f64>,
    cones: Vec<Cone>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves `k` variables and returns the first index.
    pub fn add_vars(&mut self, k: usize) -> usize {
        let first = self.num_vars;
        self.num_vars += k;
        self.q.resize(self.num_vars, 0.0);
        first
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.q[var] = coef;
    }

    fn push_row(&mut self, e: &AffineExpr) {
        let row = self.h.len();
        for &(v, c) in &e.terms {
            self.g.push((row, v, -c));
        }
        self.h.push(e.constant);
    }

    fn push_cone(&mut self, cone: Cone) {
        match (self.cones.last_mut(), cone) {
            (Some(Cone::Zero(a)), Cone::Zero(b)) | (Some(Cone::Nonneg(a)), Cone::Nonneg(b)) => {
                *a += b
            }
            _ => self.cones.push(cone),
        }
    }

    /// `e = 0` for every expression. Rows reading `0 = 0` are dropped; they
    /// only make the KKT system singular.
    pub fn add_zero(&mut self, exprs: &[AffineExpr]) {
        let mut count = 0;
        for e in exprs {
            if e.constant == 0.0 && e.terms.iter().all(|t| t.1 == 0.0) {
                continue;
            }
            self.push_row(e);
            count += 1;
        }
        if count > 0 {
            self.push_cone(Cone::Zero(count));
        }
    }

    /// `e ≥ 0` for every expression.
    pub fn add_nonneg(&mut self, exprs: &[AffineExpr]) {
        if exprs.is_empty() {
            return;
        }
        exprs.iter().for_each(|e| self.push_row(e));
        self.push_cone(Cone::Nonneg(exprs.len()));
    }

    /// Side-`side` matrix with the given lower-triangle entries (`psd_entries` order) is PSD.
    pub fn add_psd(&mut self, side: usize, lower: &[AffineExpr]) {
        assert_eq!(lower.len(), side * (side + 1) / 2, "PSD entry count");
        if side == 0 {
            return;
        }
        lower.iter().for_each(|e| self.push_row(e));
        self.push_cone(Cone::Psd(side));
    }

    pub fn build(self) -> ConicProgram {
        ConicProgram {
            num_vars: self.num_vars,
            q: self.q,
            g: canonical(self.g),
            h: self.h,
            cones: self.cones,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Inaccurate,
    Infeasible,
    Unbounded,
    Failed,
}

impl SolveStatus {
    /// Whether the primal point carries a usable solution.
    pub fn has_solution(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Failed => "failed",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    /// Slacks in matrix units.
    pub s: Vec<f64>,
    /// Cone multipliers in matrix units.
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: u32,
    /// Raw backend status, for diagnostics.
    pub backend_status: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

/// Residual level under which a stalled solve is still reported as `Inaccurate`.
pub const INACCURATE_RESIDUAL: f64 = 1e-5;

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, prog: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult>;
}

/// Interior-point backend built on clarabel.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

/// Permutation/scaling between our PSD rows and clarabel's (upper triangle,
/// column-major, √2 off-diagonals): returns `(target row, scale)` per row.
fn clarabel_row_map(cones: &[Cone]) -> Vec<(usize, f64)> {
    let mut map = Vec::new();
    let mut offset = 0;
    for cone in cones {
        match *cone {
            Cone::Zero(k) | Cone::Nonneg(k) => map.extend((0..k).map(|i| (offset + i, 1.0))),
            Cone::Psd(s) => {
                for (r, c) in psd_entries(s) {
                    // lower (r, c) is upper (c, r); column r of the upper triangle
                    let target = offset + r * (r + 1) / 2 + c;
                    let scale = if r == c {
                        1.0
                    } else {
                        std::f64::consts::SQRT_2
                    };
                    map.push((target, scale));
                }
            }
        }
        offset += cone.dim();
    }
    map
}

fn map_status(status: SolverStatus, r_prim: f64, r_dual: f64) -> SolveStatus {
    use SolverStatus as S;
    match status {
        S::Solved => SolveStatus::Optimal,
        S::AlmostSolved => SolveStatus::Inaccurate,
        S::PrimalInfeasible | S::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        S::DualInfeasible | S::AlmostDualInfeasible => SolveStatus::Unbounded,
        S::MaxIterations | S::MaxTime | S::InsufficientProgress => {
            if r_prim.max(r_dual) <= INACCURATE_RESIDUAL {
                SolveStatus::Inaccurate
            } else {
                SolveStatus::Failed
            }
        }
        _ => SolveStatus::Failed,
    }
}

impl Backend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, prog: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult> {
        prog.check()?;
        let n = prog.num_vars;
        let m = prog.num_rows();
        let map = clarabel_row_map(&prog.cones);

        let mut b = vec![0.0; m];
        for (i, &(t, sc)) in map.iter().enumerate() {
            b[t] = prog.h[i] * sc;
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in &prog.g {
            let (t, sc) = map[r];
            cols[c].push((t, v * sc));
        }
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::with_capacity(prog.g.len());
        let mut nzval = Vec::with_capacity(prog.g.len());
        colptr.push(0);
        for col in &mut cols {
            col.sort_by_key(|e| e.0);
            for &(r, v) in col.iter() {
                rowval.push(r);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let p = CscMatrix::zeros((n, n));
        let cones: Vec<SupportedConeT<f64>> = prog
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(k) => SupportedConeT::ZeroConeT(k),
                Cone::Nonneg(k) => SupportedConeT::NonnegativeConeT(k),
                Cone::Psd(1) => SupportedConeT::NonnegativeConeT(1),
                Cone::Psd(s) => SupportedConeT::PSDTriangleConeT(s),
            })
            .collect();

        let cl_settings = DefaultSettingsBuilder::default()
            .verbose(settings.verbose)
            .max_iter(settings.max_iter)
            .tol_feas(settings.tol)
            .tol_gap_abs(settings.tol)
            .tol_gap_rel(settings.tol)
            .build()
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &prog.q, &a, &b, &cones, cl_settings)
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;

        let unmap = |v: &[f64]| -> Vec<f64> { map.iter().map(|&(t, sc)| v[t] / sc).collect() };
        let status = map_status(sol.status, sol.r_prim, sol.r_dual);
        log::debug!(
            "clarabel: {:?} after {} iterations (r_prim {:.2e}, r_dual {:.2e})",
            sol.status,
            sol.iterations,
            sol.r_prim,
            sol.r_dual
        );
        Ok(SolveResult {
            status,
            z: sol.x.clone(),
            s: unmap(&sol.s),
            y: unmap(&sol.z),
            objective: sol.obj_val,
            dual_objective: sol.obj_val_dual,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            iterations: sol.iterations,
            backend_status: format!("{:?}", sol.status),
        })
    }
}

pub const BACKENDS: &[&str] = &["clarabel"];

pub fn backend_by_name(name: &str) -> Result<Box<dyn Backend>> {
    match name {
        "clarabel" => Ok(Box::new(ClarabelBackend)),
        other => Err(Error::InvalidArgument(format!(
            "unknown backend '{other}' (available: {})",
            BACKENDS.join(", ")
        ))),
    }
}

pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<SolveResult> {
    ClarabelBackend.solve(prog, settings)
}

fn fmt_num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

/// SDPA sparse text. Zero cones become paired diagonal blocks `(s, −s)`; a
/// leading comment records the cone kinds so `parse_sdpa` can undo that.
pub fn to_sdpa_string(prog: &ConicProgram) -> Result<String> {
    prog.check()?;
    let mut out = String::new();
    let kinds: Vec<&str> = prog
        .cones
        .iter()
        .map(|c| match c {
            Cone::Zero(_) => "z",
            Cone::Nonneg(_) => "l",
            Cone::Psd(_) => "s",
        })
        .collect();
    writeln!(out, "* tvsdp-cones: {}", kinds.join(" ")).unwrap();
    writeln!(out, "{}", prog.num_vars).unwrap();
    writeln!(out, "{}", prog.cones.len()).unwrap();
    let sizes: Vec<String> = prog
        .cones
        .iter()
        .map(|c| match *c {
            Cone::Zero(k) => format!("-{}", 2 * k),
            Cone::Nonneg(k) => format!("-{k}"),
            Cone::Psd(s) => s.to_string(),
        })
        .collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    for (i, v) in prog.q.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        fmt_num(&mut out, *v);
    }
    out.push('\n');

    // row -> (block, i, j, sign) ; paired zero rows emit two entries
    let mut slots: Vec<Vec<(usize, usize, usize, f64)>> = Vec::with_capacity(prog.num_rows());
    for (blk, cone) in prog.cones.iter().enumerate() {
        match *cone {
            Cone::Zero(k) => {
                for i in 0..k {
                    slots.push(vec![
                        (blk + 1, i + 1, i + 1, 1.0),
                        (blk + 1, k + i + 1, k + i + 1, -1.0),
                    ]);
                }
            }
            Cone::Nonneg(k) => slots.extend((0..k).map(|i| vec![(blk + 1, i + 1, i + 1, 1.0)])),
            Cone::Psd(s) => {
                slots.extend(psd_entries(s).map(|(r, c)| vec![(blk + 1, c + 1, r + 1, 1.0)]))
            }
        }
    }
    let emit = |out: &mut String, mat: usize, row: usize, v: f64| {
        for &(blk, i, j, sign) in &slots[row] {
            write!(out, "{mat} {blk} {i} {j} ").unwrap();
            fmt_num(out, sign * v);
            out.push('\n');
        }
    };
    // F₀ = −h, Fᵢ = −G[:, i]
    for (r, &v) in prog.h.iter().enumerate() {
        if v != 0.0 {
            emit(&mut out, 0, r, -v);
        }
    }
    let mut by_col = prog.g.clone();
    by_col.sort_by_key(|e| (e.1, e.0));
    for (r, c, v) in by_col {
        emit(&mut out, c + 1, r, -v);
    }
    Ok(out)
}

pub fn export_sdpa(prog: &ConicProgram, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_sdpa_string(prog)?)?;
    Ok(())
}

/// Reads SDPA sparse text. Without a `tvsdp-cones` comment, diagonal blocks
/// are read as nonnegative orthants.
pub fn parse_sdpa(text: &str) -> Result<ConicProgram> {
    let err = |line: usize, msg: &str| Error::Sdpa {
        line,
        message: msg.to_string(),
    };
    let mut kinds: Option<Vec<char>> = None;
    let mut lines = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if let Some(rest) = l.strip_prefix("* tvsdp-cones:") {
            kinds = Some(
                rest.split_whitespace()
                    .filter_map(|s| s.chars().next())
                    .collect(),
            );
            continue;
        }
        if l.is_empty() || l.starts_with('*') || l.starts_with('"') {
            continue;
        }
        // SDPA allows punctuation around the size/objective vectors
        let cleaned: String = l
            .chars()
            .map(|c| {
                if matches!(c, '{' | '}' | '(' | ')' | ',') {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        lines.push((no + 1, cleaned));
    }
    let mut it = lines.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| err(0, &format!("missing {what}")));

    let (ln, l) = next("constraint count")?;
    let n: usize = l
        .split_whitespace()
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(ln, "bad constraint count"))?;
    let (ln, l) = next("block count")?;
    let nb: usize = l
        .split_whitespace()
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(ln, "bad block count"))?;
    let (ln, l) = next("block sizes")?;
    let sizes: Vec<i64> = l
        .split_whitespace()
        .map(|s| s.parse::<i64>().map_err(|_| err(ln, "bad block size")))
        .collect::<Result<_>>()?;
    if sizes.len() != nb || sizes.contains(&0) {
        return Err(err(ln, "block size list does not match block count"));
    }
    let kinds = kinds.unwrap_or_else(|| {
        sizes
            .iter()
            .map(|&s| if s < 0 { 'l' } else { 's' })
            .collect()
    });
    if kinds.len() != nb {
        return Err(err(ln, "cone kind comment does not match block count"));
    }
    let mut cones = Vec::with_capacity(nb);
    for (&sz, &k) in sizes.iter().zip(&kinds) {
        let cone = match (k, sz) {
            ('z', s) if s < 0 && s % 2 == 0 => Cone::Zero((-s / 2) as usize),
            ('l', s) if s < 0 => Cone::Nonneg((-s) as usize),
            ('s', s) if s > 0 => Cone::Psd(s as usize),
            _ => return Err(err(ln, "cone kind inconsistent with block size")),
        };
        cones.push(cone);
    }
    let mut offsets = Vec::with_capacity(nb);
    let mut total = 0;
    for c in &cones {
        offsets.push(total);
        total += c.dim();
    }

    let (ln, l) = next("objective")?;
    let q: Vec<f64> = l
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|_| err(ln, "bad objective entry")))
        .collect::<Result<_>>()?;
    if q.len() != n {
        return Err(err(ln, "objective length differs from constraint count"));
    }

    let mut h = vec![0.0; total];
    let mut g: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (ln, l) in it {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 5 {
            return Err(err(ln, "expected 'matno blkno i j value'"));
        }
        let ints: Vec<usize> = f[..4]
            .iter()
            .map(|s| s.parse().map_err(|_| err(ln, "bad index")))
            .collect::<Result<_>>()?;
        let v: f64 = f[4].parse().map_err(|_| err(ln, "bad value"))?;
        let (mat, blk, i, j) = (ints[0], ints[1], ints[2], ints[3]);
        if mat > n || blk == 0 || blk > nb || i == 0 || j == 0 {
            return Err(err(ln, "index out of range"));
        }
        let (i, j) = (i.min(j) - 1, i.max(j) - 1);
        let row = match cones[blk - 1] {
            Cone::Zero(k) => {
                if i != j || i >= 2 * k {
                    return Err(err(ln, "off-diagonal entry in a diagonal block"));
                }
                if i >= k {
                    continue; // mirrored half of the equality pair
                }
                offsets[blk - 1] + i
            }
            Cone::Nonneg(k) => {
                if i != j || i >= k {
                    return Err(err(ln, "off-diagonal entry in a diagonal block"));
                }
                offsets[blk - 1] + i
            }
            Cone::Psd(s) => {
                if j >= s {
                    return Err(err(ln, "index outside block"));
                }
                offsets[blk - 1] + psd_row(s, j, i)
            }
        };
        if mat == 0 {
            h[row] = -v;
        } else {
            g.insert((row, mat - 1), -v);
        }
    }
    let prog = ConicProgram {
        num_vars: n,
        q,
        g: canonical(g.into_iter().map(|((r, c), v)| (r, c, v)).collect()),
        h,
        cones,
    };
    prog.check()?;
    Ok(prog)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub coeff_residual: f64,
    pub min_eig_q1: f64,
    /// `+∞` (serialized as null) when there is no `Q₂`.
    pub min_eig_q2: f64,
    pub grid_min_eig: f64,
    pub passed: bool,
}

/// Checks `Fx = α(Q₁) + β(Q₂)` coefficientwise, PSD-ness of the Gram
/// matrices, and (as an independent proxy) `Fx(t) ⪰ 0` on a uniform grid.
pub fn verify_certificate(
    block: &AffineBlock,
    x: &PolyVec,
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
    tol: f64,
    grid: usize,
) -> Result<CertificateReport> {
    let shape = GramShape::from_sizes(block.side(), q1.nrows(), q2.nrows())?;
    let fx = block.apply(x)?;
    let residual = fx.max_abs_diff(&shape.compose(q1, q2)?)?;
    let sym = |q: &DMatrix<f64>| (q + q.transpose()) * 0.5;
    let min_eig_q1 = min_eigenvalue(&sym(q1));
    let min_eig_q2 = min_eigenvalue(&sym(q2));
    let grid_min_eig = fx.min_eig_on_grid(grid)?;
    let passed = residual <= tol && min_eig_q1 >= -tol && min_eig_q2 >= -tol;
    Ok(CertificateReport {
        coeff_residual: residual,
        min_eig_q1,
        min_eig_q2,
        grid_min_eig,
        passed,
    })
}

/// Optimal value of the constant SDP obtained by freezing time at `t`
/// (maximization sense of the instance; `±∞` for unbounded/infeasible).
pub fn pointwise_sdp_oracle(
    inst: &TvSdp,
    t: f64,
    backend: &dyn Backend,
    settings: &SolverSettings,
) -> Result<f64> {
    if inst.has_kernels() {
        return Err(Error::KernelTermsPresent(
            "the pointwise oracle freezes time and cannot drop memory terms".into(),
        ));
    }
    let mut b = ProgramBuilder::new();
    b.add_vars(inst.n);
    for (i, c) in inst.objective.iter().enumerate() {
        b.set_objective(i, -c.eval(t));
    }
    for block in &inst.blocks {
        let m = block.side();
        let a0 = block.a0.eval(t);
        let ai: Vec<DMatrix<f64>> = block.a.iter().map(|a| a.eval(t)).collect();
        let entries: Vec<AffineExpr> = psd_entries(m)
            .map(|(r, c)| {
                let mut e = AffineExpr::constant(a0[(r, c)]);
                for (i, a) in ai.iter().enumerate() {
                    e.add_term(i, a[(r, c)]);
                }
                e
            })
            .collect();
        b.add_psd(m, &entries);
    }
    let rows: Vec<AffineExpr> = inst
        .equalities
        .iter()
        .map(|eq| {
            let mut e = AffineExpr::constant(eq.e0.eval(t));
            for (i, p) in eq.e.iter().enumerate() {
                e.add_term(i, p.eval(t));
            }
            e
        })
        .collect();
    b.add_zero(&rows);
    let res = backend.solve(&b.build(), settings)?;
    match res.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => Ok(-res.objective),
        SolveStatus::Unbounded => Ok(f64::INFINITY),
        SolveStatus::Infeasible => Ok(f64::NEG_INFINITY),
        SolveStatus::Failed => Err(Error::Backend(format!(
            "pointwise solve at t = {t} failed ({})",
            res.backend_status
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::{Poly, SymPolyMatrix};

    #[test]
    fn psd_row_order() {
        let order: Vec<_> = psd_entries(3).collect();
        assert_eq!(order, vec![(0, 0), (1, 0), (2, 0), (1, 1), (2, 1), (2, 2)]);
        for (k, (r, c)) in order.into_iter().enumerate() {
            assert_eq!(psd_row(3, r, c), k);
        }
    }

    #[test]
    fn builder_merges_adjacent_cones() {
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(1);
        b.add_zero(&[AffineExpr::var(x)]);
        b.add_zero(&[AffineExpr::var(x)]);
        b.add_nonneg(&[AffineExpr::var(x)]);
        b.add_psd(1, &[AffineExpr::var(x)]);
        b.add_nonneg(&[AffineExpr::var(x)]);
        assert_eq!(
            b.build().cones,
            vec![
                Cone::Zero(2),
                Cone::Nonneg(1),
                Cone::Psd(1),
                Cone::Nonneg(1)
            ]
        );
    }

    #[test]
    fn solve_nonneg() {
        // minimize x s.t. x − 1 ≥ 0
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(1);
        b.set_objective(x, 1.0);
        b.add_nonneg(&[AffineExpr {
            constant: -1.0,
            terms: vec![(x, 1.0)],
        }]);
        let r = solve(&b.build(), &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn solve_psd() {
        // maximize z s.t. [[1, z], [z, 1]] ⪰ 0
        let mut b = ProgramBuilder::new();
        let z = b.add_vars(1);
        b.set_objective(z, -1.0);
        b.add_psd(
            2,
            &[
                AffineExpr::constant(1.0),
                AffineExpr::var(z),
                AffineExpr::constant(1.0),
            ],
        );
        let r = solve(&b.build(), &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.z[0] - 1.0).abs() < 1e-6);
        // slack comes back in matrix units
        assert!((r.s[1] - r.z[0]).abs() < 1e-6);
    }

    #[test]
    fn solve_infeasible() {
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(1);
        b.set_objective(x, 1.0);
        b.add_nonneg(&[
            AffineExpr {
                constant: -1.0,
                terms: vec![(x, 1.0)],
            },
            AffineExpr {
                constant: 0.0,
                terms: vec![(x, -1.0)],
            },
        ]);
        let r = solve(&b.build(), &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    fn sample_program() -> ConicProgram {
        let mut b = ProgramBuilder::new();
        let v = b.add_vars(3);
        b.set_objective(v, 0.1);
        b.set_objective(v + 2, -1.0 / 3.0);
        b.add_zero(&[AffineExpr {
            constant: 1.0 / 7.0,
            terms: vec![(v, 2.0), (v + 1, -1e-17)],
        }]);
        b.add_nonneg(&[AffineExpr {
            constant: -0.5,
            terms: vec![(v + 2, std::f64::consts::PI)],
        }]);
        b.add_psd(
            2,
            &[
                AffineExpr::constant(1.0),
                AffineExpr {
                    constant: 0.3,
                    terms: vec![(v + 1, 1.0 / 3.0)],
                },
                AffineExpr::var(v),
            ],
        );
        b.build()
    }

    #[test]
    fn sdpa_round_trip() {
        let p = sample_program();
        let text = to_sdpa_string(&p).unwrap();
        assert_eq!(parse_sdpa(&text).unwrap(), p);
    }

    #[test]
    fn sdpa_rejects_garbage() {
        assert!(parse_sdpa("2\n1\n2\n1 2\n0 1 1 1 x\n").is_err());
        assert!(parse_sdpa("1\n").is_err());
    }

    #[test]
    fn certificate_for_t() {
        let block = AffineBlock::new(
            SymPolyMatrix::diag(vec![Poly::t()]),
            vec![SymPolyMatrix::zeros(1)],
        );
        let x = PolyVec::zeros(1);
        let one = DMatrix::from_element(1, 1, 1.0);
        let zero = DMatrix::from_element(1, 1, 0.0);
        let r = verify_certificate(&block, &x, &one, &zero, 1e-12, 101).unwrap();
        assert!(r.passed && r.coeff_residual == 0.0);
        let bumped = DMatrix::from_element(1, 1, 1.0 + 1e-3);
        let r = verify_certificate(&block, &x, &bumped, &zero, 1e-6, 101).unwrap();
        assert!(!r.passed);
        assert!((r.coeff_residual - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn oracle_simple_box() {
        let mut inst = TvSdp::new(PolyVec(vec![Poly::constant(1.0)]));
        let one = SymPolyMatrix::diag(vec![Poly::constant(1.0)]);
        inst.blocks
            .push(AffineBlock::new(one.clone(), vec![one.scale(-1.0)]));
        inst.blocks
            .push(AffineBlock::new(SymPolyMatrix::zeros(1), vec![one]));
        for t in [0.0, 0.4, 1.0] {
            let v = pointwise_sdp_oracle(&inst, t, &ClarabelBackend, &SolverSettings::default())
                .unwrap();
            assert!((v - 1.0).abs() < 1e-7);
        }
    }
}
