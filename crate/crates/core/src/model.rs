//! TV-SDP instances: affine PSD blocks with kernel terms, equality
//! constraints, the operator `F`, its adjoint, and JSON (de)serialization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polynomial::{BiPoly, Poly, PolyVec, SymPolyMatrix};

/// One kernel entry `Dᵢ(t,s)[row][col]` (and its symmetric alias).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    #[serde(rename = "i")]
    pub var: usize,
    pub row: usize,
    pub col: usize,
    pub coeffs: BiPoly,
}

/// `Fx(t) = A₀(t) + Σᵢ xᵢ(t)Aᵢ(t) + Σᵢ ∫₀ᵗ xᵢ(s)Dᵢ(t,s) ds`, required to be PSD on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBlock {
    pub a0: SymPolyMatrix,
    pub a: Vec<SymPolyMatrix>,
    /// Sparse kernel data; absent entries are zero.
    pub kernels: Vec<KernelEntry>,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

impl AffineBlock {
    /// Kernel-free block.
    pub fn new(a0: SymPolyMatrix, a: Vec<SymPolyMatrix>) -> Self {
        AffineBlock {
            a0,
            a,
            kernels: Vec::new(),
        }
    }

    pub fn with_kernel(mut self, var: usize, row: usize, col: usize, coeffs: BiPoly) -> Self {
        self.kernels.push(KernelEntry {
            var,
            row: row.min(col),
            col: row.max(col),
            coeffs,
        });
        self
    }

    pub fn side(&self) -> usize {
        self.a0.side()
    }

    pub fn num_vars(&self) -> usize {
        self.a.len()
    }

    pub fn has_kernels(&self) -> bool {
        self.kernels.iter().any(|k| !k.coeffs.is_zero())
    }

    /// Image of the trajectory `x = p·eᵢ` under the linear part of `F`.
    pub fn variable_image(&self, var: usize, p: &Poly) -> SymPolyMatrix {
        let mut out = self.a[var].mat_scale_by_poly(p);
        for k in self.kernels.iter().filter(|k| k.var == var) {
            let add = k.coeffs.kernel_forward(p);
            let cur = out.get(k.row, k.col) + &add;
            out.set(k.row, k.col, cur);
        }
        out
    }

    /// `Fx` as an exact polynomial matrix.
    pub fn apply(&self, x: &PolyVec) -> Result<SymPolyMatrix> {
        check_len("trajectory length", self.num_vars(), x.len())?;
        let mut out = self.a0.clone();
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            out = out.mat_add(&self.variable_image(i, xi))?;
        }
        Ok(out)
    }

    /// Worst-case degree of `Fx` over `x ∈ ℝⁿ_d[t]`.
    ///
    /// Variables with zero data do not contribute; kernels count with their
    /// total degree in `(t, s)`.
    pub fn fx_degree(&self, d: usize) -> usize {
        let mut deg = self.a0.degree();
        for ai in self.a.iter().filter(|a| !a.is_zero()) {
            deg = deg.max(ai.degree() + d);
        }
        for k in self.kernels.iter().filter(|k| !k.coeffs.is_zero()) {
            deg = deg.max(k.coeffs.total_degree() + d + 1);
        }
        deg
    }

    /// `F*P`: entry 0 is `Tr(A₀P)`, entry `i` is `Tr(AᵢP) + ∫ₜ¹ Tr(Dᵢ(s,t)P(s)) ds`.
    pub fn adjoint(&self, p: &SymPolyMatrix) -> Result<PolyVec> {
        check_len("matrix side", self.side(), p.side())?;
        let mut out = Vec::with_capacity(self.num_vars() + 1);
        out.push(self.a0.trace_product(p)?);
        for ai in &self.a {
            out.push(ai.trace_product(p)?);
        }
        for k in &self.kernels {
            let w = if k.row == k.col { 1.0 } else { 2.0 };
            let back = k
                .coeffs
                .transpose()
                .kernel_backward(p.get(k.row, k.col))
                .scale(w);
            out[k.var + 1] += &back;
        }
        Ok(PolyVec(out))
    }

    pub(crate) fn validate(&self, n: usize, path: &str) -> Result<()> {
        let m = self.side();
        if self.a.len() != n {
            return Err(Error::schema(
                format!("{path}.A"),
                format!("expected {n} matrices, found {}", self.a.len()),
            ));
        }
        if !self.a0.is_finite() {
            return Err(Error::schema(
                format!("{path}.A0"),
                "non-finite coefficient",
            ));
        }
        for (i, ai) in self.a.iter().enumerate() {
            if ai.side() != m {
                return Err(Error::schema(
                    format!("{path}.A[{i}]"),
                    format!("side {} differs from block side {m}", ai.side()),
                ));
            }
            if !ai.is_finite() {
                return Err(Error::schema(
                    format!("{path}.A[{i}]"),
                    "non-finite coefficient",
                ));
            }
        }
        for (k, ker) in self.kernels.iter().enumerate() {
            let kp = format!("{path}.D[{k}]");
            if ker.var >= n {
                return Err(Error::schema(
                    kp,
                    format!("variable index {} out of range", ker.var),
                ));
            }
            if ker.row >= m || ker.col >= m {
                return Err(Error::schema(
                    kp,
                    format!("entry ({}, {}) outside side {m}", ker.row, ker.col),
                ));
            }
            if !ker.coeffs.is_finite() {
                return Err(Error::schema(kp, "non-finite coefficient"));
            }
        }
        Ok(())
    }
}

/// Scalar kernel of an equality constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityKernel {
    #[serde(rename = "i")]
    pub var: usize,
    pub coeffs: BiPoly,
}

/// `e₀(t) + Σᵢ eᵢ(t)xᵢ(t) + Σᵢ ∫₀ᵗ kᵢ(t,s)xᵢ(s) ds = 0` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityConstraint {
    pub e0: Poly,
    pub e: Vec<Poly>,
    #[serde(default, rename = "k")]
    pub kernels: Vec<EqualityKernel>,
}

impl EqualityConstraint {
    pub fn new(e0: Poly, e: Vec<Poly>) -> Self {
        EqualityConstraint {
            e0,
            e,
            kernels: Vec::new(),
        }
    }

    pub fn with_kernel(mut self, var: usize, coeffs: BiPoly) -> Self {
        self.kernels.push(EqualityKernel { var, coeffs });
        self
    }

    pub fn has_kernels(&self) -> bool {
        self.kernels.iter().any(|k| !k.coeffs.is_zero())
    }

    pub fn variable_image(&self, var: usize, p: &Poly) -> Poly {
        let mut out = &self.e[var] * p;
        for k in self.kernels.iter().filter(|k| k.var == var) {
            out += &k.coeffs.kernel_forward(p);
        }
        out
    }

    pub fn apply(&self, x: &PolyVec) -> Result<Poly> {
        check_len("trajectory length", self.e.len(), x.len())?;
        let mut out = self.e0.clone();
        for (i, xi) in x.iter().enumerate() {
            if !xi.is_zero() {
                out += &self.variable_image(i, xi);
            }
        }
        Ok(out)
    }

    /// Worst-case degree of the residual over `x ∈ ℝⁿ_d[t]`.
    pub fn residual_degree(&self, d: usize) -> usize {
        let mut deg = self.e0.degree();
        for ei in self.e.iter().filter(|e| !e.is_zero()) {
            deg = deg.max(ei.degree() + d);
        }
        for k in self.kernels.iter().filter(|k| !k.coeffs.is_zero()) {
            deg = deg.max(k.coeffs.total_degree() + d + 1);
        }
        deg
    }

    fn validate(&self, n: usize, path: &str) -> Result<()> {
        if self.e.len() != n {
            return Err(Error::schema(
                format!("{path}.e"),
                format!("expected {n} polynomials, found {}", self.e.len()),
            ));
        }
        if !self.e0.is_finite() || !self.e.iter().all(Poly::is_finite) {
            return Err(Error::schema(path.to_string(), "non-finite coefficient"));
        }
        for (k, ker) in self.kernels.iter().enumerate() {
            if ker.var >= n {
                return Err(Error::schema(
                    format!("{path}.k[{k}]"),
                    format!("variable index {} out of range", ker.var),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Maximize,
    Minimize,
}

/// A full TV-SDP in maximization form.
///
/// Instances read with `"sense": "minimize"` have their objective negated on
/// load (and back on save); `reported_objective` undoes the flip for display.
#[derive(Debug, Clone, PartialEq)]
pub struct TvSdp {
    pub n: usize,
    pub objective: PolyVec,
    pub blocks: Vec<AffineBlock>,
    pub equalities: Vec<EqualityConstraint>,
    /// Set when `with_box` has appended `|xᵢ(t)| ≤ γ` blocks.
    pub box_bound: Option<f64>,
    pub sense: Sense,
}

impl TvSdp {
    pub fn new(objective: PolyVec) -> Self {
        TvSdp {
            n: objective.len(),
            objective,
            blocks: Vec::new(),
            equalities: Vec::new(),
            box_bound: None,
            sense: Sense::Maximize,
        }
    }

    pub fn has_kernels(&self) -> bool {
        self.blocks.iter().any(AffineBlock::has_kernels)
            || self.equalities.iter().any(EqualityConstraint::has_kernels)
    }

    /// Converts a maximization-form value back to the instance's original sense.
    pub fn reported_objective(&self, value: f64) -> f64 {
        match self.sense {
            Sense::Maximize => value,
            Sense::Minimize => -value,
        }
    }

    /// Appends the `2n` scalar blocks `γ − xᵢ ⪰ 0` and `γ + xᵢ ⪰ 0`.
    pub fn with_box(&self, gamma: f64) -> Result<TvSdp> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "box bound must be positive and finite, got {gamma}"
            )));
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for sign in [-1.0, 1.0] {
                let a = (0..self.n)
                    .map(|j| {
                        let c = if j == i { sign } else { 0.0 };
                        SymPolyMatrix::diag(vec![Poly::constant(c)])
                    })
                    .collect();
                out.blocks.push(AffineBlock::new(
                    SymPolyMatrix::diag(vec![Poly::constant(gamma)]),
                    a,
                ));
            }
        }
        out.box_bound = Some(match self.box_bound {
            Some(g) => g.min(gamma),
            None => gamma,
        });
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n {
            return Err(Error::schema(
                "objective",
                format!(
                    "expected {} polynomials, found {}",
                    self.n,
                    self.objective.len()
                ),
            ));
        }
        if !self.objective.iter().all(Poly::is_finite) {
            return Err(Error::schema("objective", "non-finite coefficient"));
        }
        for (b, block) in self.blocks.iter().enumerate() {
            block.validate(self.n, &format!("blocks[{b}]"))?;
        }
        for (e, eq) in self.equalities.iter().enumerate() {
            eq.validate(self.n, &format!("equalities[{e}]"))?;
        }
        if let Some(g) = self.box_bound {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::schema("box", format!("must be positive, got {g}")));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<TvSdp> {
        let raw: InstanceJson = serde_json::from_str(s)?;
        raw.into_instance()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceJson::from_instance(
            self,
        ))?)
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<TvSdp> {
    TvSdp::from_json_str(&std::fs::read_to_string(path)?)
}

pub fn save_instance(inst: &TvSdp, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, inst.to_json_string()? + "\n")?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockJson {
    m: usize,
    #[serde(rename = "A0")]
    a0: Vec<Poly>,
    #[serde(rename = "A")]
    a: Vec<Vec<Poly>>,
    #[serde(rename = "D", default)]
    d: Vec<KernelEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    n: usize,
    objective: Vec<Poly>,
    blocks: Vec<BlockJson>,
    #[serde(default)]
    equalities: Vec<EqualityConstraint>,
    #[serde(rename = "box", default)]
    box_bound: Option<f64>,
    #[serde(default)]
    sense: Sense,
}

fn sym_from_json(m: usize, entries: Vec<Poly>, path: String) -> Result<SymPolyMatrix> {
    if m == 0 {
        return Err(Error::schema(path, "block side must be at least 1"));
    }
    let expected = m * (m + 1) / 2;
    if entries.len() != expected {
        return Err(Error::schema(
            path,
            format!(
                "expected {expected} upper-triangle entries, found {}",
                entries.len()
            ),
        ));
    }
    SymPolyMatrix::from_upper(m, entries)
}

impl InstanceJson {
    fn into_instance(self) -> Result<TvSdp> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (b, bj) in self.blocks.into_iter().enumerate() {
            let a0 = sym_from_json(bj.m, bj.a0, format!("blocks[{b}].A0"))?;
            let a =
                bj.a.into_iter()
                    .enumerate()
                    .map(|(i, e)| sym_from_json(bj.m, e, format!("blocks[{b}].A[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
            let kernels =
                bj.d.into_iter()
                    .map(|k| KernelEntry {
                        row: k.row.min(k.col),
                        col: k.row.max(k.col),
                        ..k
                    })
                    .collect();
            blocks.push(AffineBlock { a0, a, kernels });
        }
        let mut objective = PolyVec(self.objective);
        if self.sense == Sense::Minimize {
            objective = PolyVec(objective.iter().map(|p| p.scale(-1.0)).collect());
        }
        let inst = TvSdp {
            n: self.n,
            objective,
            blocks,
            equalities: self.equalities,
            box_bound: self.box_bound,
            sense: self.sense,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn from_instance(inst: &TvSdp) -> Self {
        let objective = match inst.sense {
            Sense::Maximize => inst.objective.0.clone(),
            Sense::Minimize => inst.objective.iter().map(|p| p.scale(-1.0)).collect(),
        };
        InstanceJson {
            n: inst.n,
            objective,
            blocks: inst
                .blocks
                .iter()
                .map(|b| BlockJson {
                    m: b.side(),
                    a0: b.a0.upper_entries().to_vec(),
                    a: b.a.iter().map(|a| a.upper_entries().to_vec()).collect(),
                    d: b.kernels.clone(),
                })
                .collect(),
            equalities: inst.equalities.clone(),
            box_bound: inst.box_bound,
            sense: inst.sense,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Poly {
        Poly::constant(v)
    }

    fn scalar(p: Poly) -> SymPolyMatrix {
        SymPolyMatrix::diag(vec![p])
    }

    #[test]
    fn apply_at_zero_is_a0() {
        let block = AffineBlock::new(
            SymPolyMatrix::from_fn(2, |i, j| Poly::monomial(i + j, 1.0)),
            vec![SymPolyMatrix::identity(2)],
        );
        let fx = block.apply(&PolyVec::zeros(1)).unwrap();
        assert_eq!(fx, block.a0);
        assert!(block.apply(&PolyVec::zeros(2)).is_err());
    }

    #[test]
    fn apply_with_kernel() {
        let block = AffineBlock::new(scalar(Poly::zero()), vec![scalar(c(1.0))]).with_kernel(
            0,
            0,
            0,
            BiPoly::constant(1.0),
        );
        let fx = block.apply(&PolyVec(vec![c(1.0)])).unwrap();
        assert!(fx.get(0, 0).approx_eq(&Poly::new(vec![1.0, 1.0]), 1e-15));
    }

    #[test]
    fn fx_degree_examples() {
        let constant = AffineBlock::new(scalar(c(1.0)), vec![scalar(c(2.0))]);
        assert_eq!(constant.fx_degree(3), 3);
        let a0_cubic = AffineBlock::new(scalar(Poly::monomial(3, 1.0)), vec![scalar(c(1.0))]);
        assert_eq!(a0_cubic.fx_degree(2), 3);
        let kern = AffineBlock::new(scalar(c(1.0)), vec![scalar(c(1.0))]).with_kernel(
            0,
            0,
            0,
            BiPoly::constant(1.0),
        );
        assert_eq!(kern.fx_degree(2), 3);
    }

    #[test]
    fn adjoint_examples() {
        let block = AffineBlock::new(scalar(c(1.0)), vec![scalar(Poly::t())]);
        let z = block.adjoint(&scalar(Poly::zero())).unwrap();
        assert!(z.iter().all(Poly::is_zero));
        let y = block.adjoint(&scalar(c(1.0))).unwrap();
        assert_eq!(y.0, vec![c(1.0), Poly::t()]);

        let kern = AffineBlock::new(scalar(c(0.0)), vec![scalar(Poly::zero())]).with_kernel(
            0,
            0,
            0,
            BiPoly::constant(1.0),
        );
        let y = kern.adjoint(&scalar(c(1.0))).unwrap();
        assert!(y[1].approx_eq(&Poly::new(vec![1.0, -1.0]), 1e-15));
    }

    #[test]
    fn box_blocks() {
        let inst = TvSdp::new(PolyVec(vec![c(1.0)]));
        let boxed = inst.with_box(1.0).unwrap();
        assert_eq!(boxed.blocks.len(), 2);
        let half = PolyVec(vec![c(0.5)]);
        let two = PolyVec(vec![c(2.0)]);
        let feasible = |x: &PolyVec| {
            boxed
                .blocks
                .iter()
                .all(|b| b.apply(x).unwrap().min_eig_on_grid(11).unwrap() >= 0.0)
        };
        assert!(feasible(&half));
        assert!(!feasible(&two));
        assert!(inst.with_box(0.0).is_err());
        assert!(inst.with_box(-1.0).is_err());
    }

    #[test]
    fn schema_errors_carry_paths() {
        let bad = r#"{"n": 1, "objective": [[1.0]], "blocks": [{"m": 2, "A0": [[1.0]], "A": [[[1.0],[],[1.0]]]}], "equalities": [], "box": null}"#;
        match TvSdp::from_json_str(bad) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "blocks[0].A0"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_n =
            r#"{"n": 2, "objective": [[1.0]], "blocks": [], "equalities": [], "box": null}"#;
        assert!(matches!(
            TvSdp::from_json_str(bad_n),
            Err(Error::Schema { .. })
        ));
        let bad_var = r#"{"n": 1, "objective": [[1.0]], "blocks": [{"m": 1, "A0": [[1.0]], "A": [[[1.0]]], "D": [{"i": 3, "row": 0, "col": 0, "coeffs": [[1.0]]}]}], "equalities": [], "box": null}"#;
        match TvSdp::from_json_str(bad_var) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "blocks[0].D[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minimize_sense_is_negated_on_load() {
        let s = r#"{"n": 1, "objective": [[2.0]], "blocks": [], "equalities": [], "box": null, "sense": "minimize"}"#;
        let inst = TvSdp::from_json_str(s).unwrap();
        assert_eq!(inst.objective[0], c(-2.0));
        assert_eq!(inst.reported_objective(-3.0), 3.0);
        let back = TvSdp::from_json_str(&inst.to_json_string().unwrap()).unwrap();
        assert_eq!(back, inst);
    }
}
