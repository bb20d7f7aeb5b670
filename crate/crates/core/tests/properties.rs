//! Randomized identities checked against independent oracles.

mod common;

use common::*;
use proptest::prelude::*;
use tvsdp::hierarchy::{build_dual, match_moments};
use tvsdp::model::TvSdp;
use tvsdp::polynomial::{inner_ln, inner_sm, Poly, PolyVec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn f_adjoint_identity(
        ((blk, n, _), p) in block().prop_flat_map(|b| {
            let m = b.2;
            (Just(b), sym(m, 3))
        }),
        xs in prop::collection::vec(poly(3), 3),
    ) {
        let x = PolyVec(xs[..n].to_vec());
        let fx = blk.apply(&x).unwrap();
        let lhs = inner_sm(&fx, &p).unwrap();
        let mut one_x = vec![Poly::constant(1.0)];
        one_x.extend(x.iter().cloned());
        let rhs = inner_ln(&PolyVec(one_x), &blk.adjoint(&p).unwrap()).unwrap();
        let scale = 1.0 + magnitude(&fx) * magnitude(&p);
        prop_assert!((lhs - rhs).abs() <= 1e-8 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn kernel_integrals_match_quadrature(d in bipoly(3), p in poly(4)) {
        let fwd = d.kernel_forward(&p);
        let bwd = d.kernel_backward(&p);
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            let want_f = simpson(&|s| d.eval(t, s) * p.eval(s), 0.0, t, 1e-10);
            let want_b = simpson(&|s| d.eval(t, s) * p.eval(s), t, 1.0, 1e-10);
            prop_assert!((fwd.eval(t) - want_f).abs() <= 1e-8, "forward at {t}: {} vs {want_f}", fwd.eval(t));
            prop_assert!((bwd.eval(t) - want_b).abs() <= 1e-8, "backward at {t}");
        }
    }

    #[test]
    fn forward_plus_backward_is_full(d in bipoly(3), p in poly(3)) {
        let split = &d.kernel_forward(&p) + &d.kernel_backward(&p);
        prop_assert!(split.approx_eq(&d.kernel_full(&p), 1e-10));
    }

    #[test]
    fn moment_matching_is_exact(p in poly(8)) {
        let d = p.degree();
        let moments: Vec<f64> = (0..=d).map(|i| p.shift(i).integral_01()).collect();
        let q = match_moments(&moments, d).unwrap();
        // coefficients are only determined to ~cond(H)·ε; the function is exact
        for k in 0..=200 {
            let t = k as f64 / 200.0;
            prop_assert!((q.eval(t) - p.eval(t)).abs() <= 1e-9, "at {t}: {q:?} vs {p:?}");
        }
    }

    #[test]
    fn dual_lmi_entries_are_affine(
        (blk, n, _m) in block(),
        c in prop::collection::vec(poly(2), 3),
        level in 0..=4usize,
        col in 0..1000usize,
    ) {
        let mut inst = TvSdp::new(PolyVec(c[..n].to_vec()));
        inst.blocks.push(blk);
        let (prog, _) = build_dual(&inst, level);
        // each entry is h − (Gz)ᵣ; perturb coordinate `j` with two steps
        let j = col % prog.num_vars;
        let z0: Vec<f64> = (0..prog.num_vars).map(|k| (k as f64 * 0.37).sin()).collect();
        let base = prog.slack(&z0);
        let mut slopes = Vec::new();
        for h in [1e-3, 1e-1] {
            let mut z = z0.clone();
            z[j] += h;
            let s = prog.slack(&z);
            slopes.push(s.iter().zip(&base).map(|(a, b)| (a - b) / h).collect::<Vec<f64>>());
        }
        for (a, b) in slopes[0].iter().zip(&slopes[1]) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs())));
        }
    }
}
