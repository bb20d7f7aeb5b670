//! Oracles and generators shared by the integration suites.
#![allow(dead_code)]

use proptest::prelude::*;
use tvsdp::model::AffineBlock;
use tvsdp::polynomial::{BiPoly, Poly, SymPolyMatrix};

pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        // force a few levels so a lucky coarse estimate cannot stop the recursion
        if depth == 0 || (depth < 36 && (left + right - whole).abs() <= 15.0 * tol) {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

pub fn poly(max_deg: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec(-2.0..2.0f64, 1..=max_deg + 1).prop_map(Poly::new)
}

pub fn bipoly(max_deg: usize) -> impl Strategy<Value = BiPoly> {
    prop::collection::vec(
        prop::collection::vec(-2.0..2.0f64, max_deg + 1),
        1..=max_deg + 1,
    )
    .prop_map(BiPoly::new)
}

pub fn sym(m: usize, max_deg: usize) -> impl Strategy<Value = SymPolyMatrix> {
    prop::collection::vec(poly(max_deg), m * (m + 1) / 2)
        .prop_map(move |e| SymPolyMatrix::from_upper(m, e).unwrap())
}

/// Random block with `n ≤ 3`, `m ≤ 3`, data degrees ≤ 3 and a few kernels.
pub fn block() -> impl Strategy<Value = (AffineBlock, usize, usize)> {
    (1..=3usize, 1..=3usize).prop_flat_map(|(n, m)| {
        (
            sym(m, 3),
            prop::collection::vec(sym(m, 3), n),
            prop::collection::vec((0..n, 0..m, 0..m, bipoly(3)), 0..=3),
        )
            .prop_map(move |(a0, a, ks)| {
                let mut b = AffineBlock::new(a0, a);
                for (v, r, c, k) in ks {
                    b = b.with_kernel(v, r, c, k);
                }
                (b, n, m)
            })
    })
}

pub fn magnitude(p: &SymPolyMatrix) -> f64 {
    p.max_abs_coeff()
}
