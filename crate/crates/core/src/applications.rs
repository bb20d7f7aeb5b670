//! Builders for the worked instances: a small introductory problem, a
//! problem with no continuous solution, time-varying max-flow, wireless
//! coverage of moving regions, and a one-shot Markowitz Pareto curve.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conic::{pointwise_sdp_oracle, Backend, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{AffineBlock, EqualityConstraint, Sense, TvSdp};
use crate::polynomial::{BiPoly, Poly, PolyVec, SymPolyMatrix};

fn p(c: &[f64]) -> Poly {
    Poly::new(c.to_vec())
}

fn scalar(q: Poly) -> SymPolyMatrix {
    SymPolyMatrix::diag(vec![q])
}

/// 1×1 block `a0 + Σ coef·x_var ≥ 0`.
fn scalar_block(n: usize, a0: Poly, terms: &[(usize, f64)]) -> AffineBlock {
    let mut a = vec![SymPolyMatrix::zeros(1); n];
    for &(v, c) in terms {
        a[v] = scalar(Poly::constant(c));
    }
    AffineBlock::new(scalar(a0), a)
}

/// Maximize `∫⟨c, x⟩` over the unit disk intersected with `x₂ ≤ (1 − 8t/5)²`.
///
/// The 4×4 block is `diag((1−8t/5)², 1, 1, 1) + x₁(E₂₃+E₃₂) + x₂(−E₁₁+E₂₄+E₄₂)`:
/// its lower 3×3 part is PSD iff `x₁² + x₂² ≤ 1`.
pub fn intro_instance() -> TvSdp {
    let a = p(&[1.0, -1.6]);
    let a0 = SymPolyMatrix::diag(vec![
        &a * &a,
        Poly::constant(1.0),
        Poly::constant(1.0),
        Poly::constant(1.0),
    ]);
    let mut a1 = SymPolyMatrix::zeros(4);
    a1.set(1, 2, Poly::constant(1.0));
    let mut a2 = SymPolyMatrix::zeros(4);
    a2.set(0, 0, Poly::constant(-1.0));
    a2.set(1, 3, Poly::constant(1.0));
    let mut inst = TvSdp::new(PolyVec(vec![
        p(&[1.0, -9.0, 9.0]),
        p(&[0.0, 12.0, -34.0, 23.0]),
    ]));
    inst.blocks.push(AffineBlock::new(a0, vec![a1, a2]));
    inst
}

/// `(t−½)x ≥ 0`, `(t−½)(x−1) ≥ 0`, `0 ≤ x ≤ 1`: the only solution is a step at ½.
pub fn example31_instance() -> TvSdp {
    let half = p(&[-0.5, 1.0]);
    let a0 = SymPolyMatrix::diag(vec![
        Poly::zero(),
        p(&[0.5, -1.0]),
        Poly::constant(1.0),
        Poly::zero(),
    ]);
    let a1 = SymPolyMatrix::diag(vec![
        half.clone(),
        half,
        Poly::constant(-1.0),
        Poly::constant(1.0),
    ]);
    let mut inst = TvSdp::new(PolyVec(vec![Poly::zero()]));
    inst.blocks.push(AffineBlock::new(a0, vec![a1]));
    inst
}

/// Directed network with node 1 as source and node `nodes` as target (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub capacities: Vec<Poly>,
    /// Edges whose flow rate of change is limited by `b_deriv`.
    pub e1: Vec<(usize, usize)>,
    pub b_deriv: Poly,
    /// Bound on the cumulative flow leaving the source.
    pub b_cum: Poly,
}

/// `t(a₁ + a₂t)² + (1−t)(a₃ + a₄t)²`, nonnegative on `[0, 1]` by construction.
pub fn capacity_poly(a: [f64; 4]) -> Poly {
    let l1 = p(&[a[0], a[1]]);
    let l2 = p(&[a[2], a[3]]);
    &(&Poly::t() * &(&l1 * &l1)) + &(&p(&[1.0, -1.0]) * &(&l2 * &l2))
}

/// `count` capacities from ChaCha8 seeded with `seed`, four `U[−1, 1]` draws each.
pub fn random_capacities(count: usize, seed: u64) -> Vec<Poly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut a = [0.0; 4];
            for v in &mut a {
                *v = rng.gen_range(-1.0..=1.0);
            }
            capacity_poly(a)
        })
        .collect()
}

pub const DEFAULT_EDGES: [(usize, usize); 15] = [
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 5),
    (2, 6),
    (3, 5),
    (3, 7),
    (4, 6),
    (4, 7),
    (5, 8),
    (5, 9),
    (6, 8),
    (6, 9),
    (7, 9),
    (8, 9),
];

/// Layered 9-node network with `E₁ = {(1,4), (5,9)}`, `b_deriv = ½`, `b_cum = t²`.
/// Capacities are drawn in lexicographic edge order.
pub fn default_network(seed: u64) -> FlowNetwork {
    let edges = DEFAULT_EDGES.to_vec();
    FlowNetwork {
        nodes: 9,
        capacities: random_capacities(edges.len(), seed),
        edges,
        e1: vec![(1, 4), (5, 9)],
        b_deriv: Poly::constant(0.5),
        b_cum: Poly::monomial(2, 1.0),
    }
}

impl FlowNetwork {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.nodes < 2 {
            return bad("network needs distinct source and target".into());
        }
        if self.capacities.len() != self.edges.len() {
            return bad(format!(
                "{} capacities for {} edges",
                self.capacities.len(),
                self.edges.len()
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j) in &self.edges {
            if i == 0 || j == 0 || i > self.nodes || j > self.nodes || i == j {
                return bad(format!("invalid edge ({i}, {j})"));
            }
            if !seen.insert((i, j)) {
                return bad(format!("duplicate edge ({i}, {j})"));
            }
        }
        if let Some(e) = self.e1.iter().find(|e| !seen.contains(e)) {
            return bad(format!("rate-limited edge {e:?} is not in the network"));
        }
        // source must reach target
        let mut reached = vec![false; self.nodes + 1];
        let mut queue = VecDeque::from([1]);
        reached[1] = true;
        while let Some(u) = queue.pop_front() {
            for &(i, j) in &self.edges {
                if i == u && !reached[j] {
                    reached[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if !reached[self.nodes] {
            return bad("target is not reachable from the source".into());
        }
        Ok(())
    }
}

/// Variables: one flow per edge (in `net.edges` order), then one rate per `E₁` edge.
pub fn maxflow_instance(net: &FlowNetwork) -> Result<TvSdp> {
    net.validate()?;
    let ne = net.edges.len();
    let n = ne + net.e1.len();
    let edge_var = |e: &(usize, usize)| net.edges.iter().position(|x| x == e).unwrap();

    let mut objective = PolyVec::zeros(n);
    for (k, &(i, _)) in net.edges.iter().enumerate() {
        if i == 1 {
            objective.0[k] = Poly::constant(1.0);
        }
    }
    let mut inst = TvSdp::new(objective);
    for (k, b) in net.capacities.iter().enumerate() {
        inst.blocks.push(scalar_block(n, Poly::zero(), &[(k, 1.0)]));
        inst.blocks.push(scalar_block(n, b.clone(), &[(k, -1.0)]));
    }
    for g in ne..n {
        inst.blocks
            .push(scalar_block(n, net.b_deriv.clone(), &[(g, -1.0)]));
        inst.blocks
            .push(scalar_block(n, net.b_deriv.clone(), &[(g, 1.0)]));
    }
    let mut cum = scalar_block(n, net.b_cum.clone(), &[]);
    for (k, &(i, _)) in net.edges.iter().enumerate() {
        if i == 1 {
            cum = cum.with_kernel(k, 0, 0, BiPoly::constant(-1.0));
        }
    }
    inst.blocks.push(cum);

    for v in 2..net.nodes {
        let mut e = vec![Poly::zero(); n];
        for (k, &(i, j)) in net.edges.iter().enumerate() {
            if i == v {
                e[k] = Poly::constant(1.0);
            } else if j == v {
                e[k] = Poly::constant(-1.0);
            }
        }
        if e.iter().any(|p| !p.is_zero()) {
            inst.equalities
                .push(EqualityConstraint::new(Poly::zero(), e));
        }
    }
    for (g, edge) in net.e1.iter().enumerate() {
        let mut e = vec![Poly::zero(); n];
        e[edge_var(edge)] = Poly::constant(-1.0);
        inst.equalities.push(
            EqualityConstraint::new(Poly::zero(), e).with_kernel(ne + g, BiPoly::constant(1.0)),
        );
    }
    Ok(inst)
}

/// Polynomial in `(x, y)` with coefficients in `ℝ[t]`, keyed by exponents `(a, b)` of `xᵃyᵇ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct XYPoly(pub BTreeMap<(usize, usize), Poly>);

impl XYPoly {
    pub fn constant(c: Poly) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert((0, 0), c);
        }
        XYPoly(m)
    }

    pub fn x() -> Self {
        XYPoly(BTreeMap::from([((1, 0), Poly::constant(1.0))]))
    }

    pub fn y() -> Self {
        XYPoly(BTreeMap::from([((0, 1), Poly::constant(1.0))]))
    }

    pub fn add(&self, o: &XYPoly) -> XYPoly {
        let mut out = self.0.clone();
        for (k, v) in &o.0 {
            let e = out.entry(*k).or_insert_with(Poly::zero);
            *e += v;
        }
        out.retain(|_, v| !v.is_zero());
        XYPoly(out)
    }

    pub fn scale(&self, s: &Poly) -> XYPoly {
        let mut out: BTreeMap<_, _> = self.0.iter().map(|(k, v)| (*k, v * s)).collect();
        out.retain(|_, v: &mut Poly| !v.is_zero());
        XYPoly(out)
    }

    pub fn mul(&self, o: &XYPoly) -> XYPoly {
        let mut out = XYPoly::default();
        for (&(a, b), u) in &self.0 {
            for (&(c, d), v) in &o.0 {
                out = out.add(&XYPoly(BTreeMap::from([((a + c, b + d), u * v)])));
            }
        }
        out
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.0
            .iter()
            .map(|(&(a, b), c)| c.eval(t) * x.powi(a as i32) * y.powi(b as i32))
            .sum()
    }

    /// `(x − (x₀ + x₁t))² + (y − (y₀ + y₁t))²`.
    pub fn dist2(cx: Poly, cy: Poly) -> XYPoly {
        let dx = XYPoly::x().add(&XYPoly::constant(-&cx));
        let dy = XYPoly::y().add(&XYPoly::constant(-&cy));
        dx.mul(&dx).add(&dy.mul(&dy))
    }
}

/// `(x, y)`-polynomial whose coefficients are affine in the decision
/// trajectories: `constant + Σ_var coef·x_var`, each part in `ℝ[t]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct XYPolyAffine {
    pub terms: BTreeMap<(usize, usize), (Poly, BTreeMap<usize, Poly>)>,
}

impl XYPolyAffine {
    pub fn add_constant(&mut self, q: &XYPoly) {
        for (k, v) in &q.0 {
            self.terms.entry(*k).or_default().0 += v;
        }
    }

    /// Adds `x_var · q`.
    pub fn add_var(&mut self, var: usize, q: &XYPoly) {
        for (k, v) in &q.0 {
            *self
                .terms
                .entry(*k)
                .or_default()
                .1
                .entry(var)
                .or_insert_with(Poly::zero) += v;
        }
    }

    /// One equality per monomial: the coefficient must vanish identically in `t`.
    pub fn into_equalities(self, n: usize) -> Vec<EqualityConstraint> {
        self.terms
            .into_values()
            .map(|(c, vars)| {
                let mut e = vec![Poly::zero(); n];
                for (v, q) in vars {
                    e[v] = q;
                }
                EqualityConstraint::new(c, e)
            })
            .filter(|eq| !(eq.e0.is_zero() && eq.e.iter().all(Poly::is_zero)))
            .collect()
    }

    /// Largest coefficient (over monomials and powers of `t`) at the given trajectories.
    pub fn residual(&self, x: &PolyVec) -> f64 {
        self.terms
            .values()
            .map(|(c, vars)| {
                let mut r = c.clone();
                for (v, q) in vars {
                    r += &(q * &x[*v]);
                }
                r.max_abs_coeff()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WirelessConfig {
    /// Required signal strength.
    pub threshold: f64,
    pub transmitters: Vec<(f64, f64)>,
    /// Region `j` is `{g ≥ 0 for all g in regions[j]}`; the first
    /// polynomial of each region is `r² − x² − y²`.
    pub regions: Vec<Vec<XYPoly>>,
    pub radius: f64,
    /// Degree of the monomial vector in the Putinar certificate.
    pub multiplier_degree: usize,
}

impl WirelessConfig {
    /// Two transmitters at `(0,0)` and `(5,5)`, two moving unit disks.
    pub fn paper_default() -> Self {
        let r = 10.0;
        let ball = XYPoly::constant(Poly::constant(r * r))
            .add(&XYPoly::x().mul(&XYPoly::x()).scale(&Poly::constant(-1.0)))
            .add(&XYPoly::y().mul(&XYPoly::y()).scale(&Poly::constant(-1.0)));
        let disk = |cx: Poly, cy: Poly| {
            XYPoly::constant(Poly::constant(1.0))
                .add(&XYPoly::dist2(cx, cy).scale(&Poly::constant(-1.0)))
        };
        WirelessConfig {
            threshold: 1.0,
            transmitters: vec![(0.0, 0.0), (5.0, 5.0)],
            regions: vec![
                vec![ball.clone(), disk(p(&[-3.0, 3.0]), p(&[0.0, 5.0]))],
                vec![ball, disk(Poly::zero(), p(&[-1.0, 5.0]))],
            ],
            radius: r,
            multiplier_degree: 1,
        }
    }

    pub fn monomials(&self) -> Vec<(usize, usize)> {
        let d = self.multiplier_degree;
        (0..=d)
            .flat_map(|tot| (0..=tot).rev().map(move |a| (a, tot - a)))
            .collect()
    }

    fn dist2(&self, i: usize) -> XYPoly {
        let (x, y) = self.transmitters[i];
        XYPoly::dist2(Poly::constant(x), Poly::constant(y))
    }

    /// Signal strength `Σ cᵢ(t)/‖(x,y) − Tᵢ‖²`.
    pub fn signal(&self, c: &[Poly], x: f64, y: f64, t: f64) -> f64 {
        self.transmitters
            .iter()
            .zip(c)
            .map(|(&(tx, ty), ci)| ci.eval(t) / ((x - tx).powi(2) + (y - ty).powi(2)))
            .sum()
    }
}

/// Decoded layout of the wireless instance.
#[derive(Debug, Clone, PartialEq)]
pub struct WirelessLayout {
    pub side: usize,
    /// First variable of each `P^(j)_k` (upper entries, row-major), `[j][k]`.
    pub p_offsets: Vec<Vec<usize>>,
    /// Certificate identity per region, affine in the decision trajectories.
    pub identities: Vec<XYPolyAffine>,
}

/// Variables: powers `c₁ … c_{n_T}`, then the upper entries of every Gram
/// matrix `P^(j)_k`, `k = 0 … k_j`. The objective `∫Σcᵢ` is minimized.
pub fn wireless_instance(cfg: &WirelessConfig) -> Result<(TvSdp, WirelessLayout)> {
    if cfg.multiplier_degree == 0 {
        return Err(Error::InvalidArgument(
            "multiplier degree must be at least 1".into(),
        ));
    }
    let nt = cfg.transmitters.len();
    let mons = cfg.monomials();
    let side = mons.len();
    let entries = side * (side + 1) / 2;
    let mut p_offsets = Vec::with_capacity(cfg.regions.len());
    let mut next = nt;
    for region in &cfg.regions {
        let offs: Vec<usize> = (0..=region.len()).map(|k| next + k * entries).collect();
        next += (region.len() + 1) * entries;
        p_offsets.push(offs);
    }
    let n = next;

    let mut objective = PolyVec::zeros(n);
    for i in 0..nt {
        objective.0[i] = Poly::constant(-1.0);
    }
    let mut inst = TvSdp::new(objective);
    inst.sense = Sense::Minimize;
    for i in 0..nt {
        inst.blocks.push(scalar_block(n, Poly::zero(), &[(i, 1.0)]));
    }
    let upper: Vec<(usize, usize)> = (0..side)
        .flat_map(|a| (a..side).map(move |b| (a, b)))
        .collect();
    for offs in &p_offsets {
        for &off in offs {
            let mut a = vec![SymPolyMatrix::zeros(side); n];
            for (e, &(r, c)) in upper.iter().enumerate() {
                a[off + e].set(r, c, Poly::constant(1.0));
            }
            inst.blocks
                .push(AffineBlock::new(SymPolyMatrix::zeros(side), a));
        }
    }

    let dists: Vec<XYPoly> = (0..nt).map(|i| cfg.dist2(i)).collect();
    let mut p_t = XYPolyAffine::default();
    let all = dists
        .iter()
        .fold(XYPoly::constant(Poly::constant(1.0)), |acc, d| acc.mul(d));
    p_t.add_constant(&all.scale(&Poly::constant(-cfg.threshold)));
    for i in 0..nt {
        let others = dists
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .fold(XYPoly::constant(Poly::constant(1.0)), |acc, (_, d)| {
                acc.mul(d)
            });
        p_t.add_var(i, &others);
    }
    // v v^T entries as (x, y)-monomials
    let vv = |a: usize, b: usize| {
        let (ea, eb) = (mons[a], mons[b]);
        let mult = if a == b { 1.0 } else { 2.0 };
        XYPoly(BTreeMap::from([(
            (ea.0 + eb.0, ea.1 + eb.1),
            Poly::constant(mult),
        )]))
    };
    let mut identities = Vec::with_capacity(cfg.regions.len());
    for (region, offs) in cfg.regions.iter().zip(&p_offsets) {
        let mut id = p_t.clone();
        let one = XYPoly::constant(Poly::constant(1.0));
        for (k, &off) in offs.iter().enumerate() {
            let g = if k == 0 { &one } else { &region[k - 1] };
            let neg_g = g.scale(&Poly::constant(-1.0));
            for (e, &(a, b)) in upper.iter().enumerate() {
                id.add_var(off + e, &vv(a, b).mul(&neg_g));
            }
        }
        inst.equalities.extend(id.clone().into_equalities(n));
        identities.push(id);
    }
    Ok((
        inst,
        WirelessLayout {
            side,
            p_offsets,
            identities,
        },
    ))
}

pub fn paper_markowitz_data() -> (Vec<f64>, DMatrix<f64>) {
    let r = vec![0.4170, 0.7203, 0.0001, 0.3023, 0.1468];
    #[rustfmt::skip]
    let sigma = DMatrix::from_row_slice(5, 5, &[
        6.0127, -0.7381, -0.5441, -4.9189, 1.7855,
        -0.7381, 9.8904, -0.7946, 0.2481, -5.5214,
        -0.5441, -0.7946, 5.1961, -3.6240, 1.5820,
        -4.9189, 0.2481, -3.6240, 10.4637, 1.7840,
        1.7855, -5.5214, 1.5820, 1.7840, 15.8475,
    ]);
    (r, sigma)
}

pub const MAX_CONDITION: f64 = 1e12;

/// Variables `x₁ … x_n, u`: maximize `∫rᵀx` with `x ≥ 0`, `Σx ≤ 1`, `u ≤ t`
/// and `[[u, xᵀ], [x, Σ⁻¹]] ⪰ 0` (i.e. `xᵀΣx ≤ u`).
pub fn markowitz_instance(r: &[f64], sigma: &DMatrix<f64>) -> Result<TvSdp> {
    let k = r.len();
    if sigma.nrows() != k || sigma.ncols() != k {
        return Err(Error::DimensionMismatch {
            what: "covariance side",
            expected: k,
            found: sigma.nrows(),
        });
    }
    if (sigma - sigma.transpose()).abs().max() > 1e-12 * (1.0 + sigma.abs().max()) {
        return Err(Error::NotPositiveDefinite(
            "covariance is not symmetric".into(),
        ));
    }
    let eig = sigma.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {lo:e}"
        )));
    }
    let cond = hi / lo;
    log::info!("covariance condition number {cond:.3e}");
    if cond > MAX_CONDITION {
        return Err(Error::NotPositiveDefinite(format!(
            "condition number {cond:e} exceeds {MAX_CONDITION:e}"
        )));
    }
    let inv = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?
        .inverse();

    let n = k + 1;
    let u = k;
    let mut objective = PolyVec::zeros(n);
    for (i, ri) in r.iter().enumerate() {
        objective.0[i] = Poly::constant(*ri);
    }
    let mut inst = TvSdp::new(objective);
    for i in 0..k {
        inst.blocks.push(scalar_block(n, Poly::zero(), &[(i, 1.0)]));
    }
    let all: Vec<(usize, f64)> = (0..k).map(|i| (i, -1.0)).collect();
    inst.blocks.push(scalar_block(n, Poly::constant(1.0), &all));
    inst.blocks.push(scalar_block(n, Poly::t(), &[(u, -1.0)]));

    let mut a0 = SymPolyMatrix::zeros(k + 1);
    for i in 0..k {
        for j in i..k {
            a0.set(
                i + 1,
                j + 1,
                Poly::constant((inv[(i, j)] + inv[(j, i)]) / 2.0),
            );
        }
    }
    let mut a = vec![SymPolyMatrix::zeros(k + 1); n];
    for (i, ai) in a.iter_mut().enumerate().take(k) {
        ai.set(0, i + 1, Poly::constant(1.0));
    }
    a[u].set(0, 0, Poly::constant(1.0));
    inst.blocks.push(AffineBlock::new(a0, a));
    Ok(inst)
}

/// Frozen-time optimal values `y(t)` at `samples` equally spaced times in `[0, 1]`.
pub fn pareto_reference(
    inst: &TvSdp,
    samples: usize,
    backend: &dyn Backend,
    settings: &SolverSettings,
) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "need at least two sample times".into(),
        ));
    }
    (0..samples)
        .map(|k| {
            let t = k as f64 / (samples - 1) as f64;
            Ok((t, pointwise_sdp_oracle(inst, t, backend, settings)?))
        })
        .collect()
}

pub const EXAMPLES: &[&str] = &["intro", "example31", "maxflow", "wireless", "markowitz"];

/// Instance for a named example (`seed` only affects `maxflow`).
pub fn example_by_name(name: &str, seed: u64) -> Result<TvSdp> {
    match name {
        "intro" => Ok(intro_instance()),
        "example31" => Ok(example31_instance()),
        "maxflow" => maxflow_instance(&default_network(seed)),
        "wireless" => Ok(wireless_instance(&WirelessConfig::paper_default())?.0),
        "markowitz" => {
            let (r, s) = paper_markowitz_data();
            markowitz_instance(&r, &s)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown example '{other}' (available: {})",
            EXAMPLES.join(", ")
        ))),
    }
}
