//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Runs without the libtest harness so every line is printed even when all
//! criteria pass.

mod common;

use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use tvsdp::applications::*;
use tvsdp::conic::*;
use tvsdp::hierarchy::*;
use tvsdp::model::{AffineBlock, TvSdp};
use tvsdp::polynomial::{inner_ln, inner_sm, Poly, PolyVec, SymPolyMatrix};
use tvsdp::sos::{alpha, alpha_adjoint, beta, beta_adjoint, lambda, lambda_adjoint, GramShape};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn within_rel(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |v| format!("{v:.5}"))
}

fn primal_value(inst: &TvSdp, d: usize) -> (SolveStatus, Option<f64>) {
    match solve_primal(inst, d, &ClarabelBackend, &settings()) {
        Ok(s) => (s.status, s.reported_objective()),
        Err(e) => {
            eprintln!("primal degree {d}: {e}");
            (SolveStatus::Failed, None)
        }
    }
}

fn dual_value(inst: &TvSdp, d: usize) -> (SolveStatus, Option<f64>) {
    match solve_dual(inst, d, &ClarabelBackend, &settings()) {
        Ok(s) => (s.status, s.reported_objective()),
        Err(e) => {
            eprintln!("dual level {d}: {e}");
            (SolveStatus::Failed, None)
        }
    }
}

fn intro() -> Outcome {
    let inst = intro_instance();
    let (ps, p) = primal_value(&inst, 20);
    let (ds, u) = dual_value(&inst.with_box(10.0).unwrap(), 10);
    let ok_p = ps.has_solution() && p.is_some_and(|v| (v - 0.89).abs() <= 0.01);
    let ok_u = ds.has_solution() && u.is_some_and(|v| (v - 0.93).abs() <= 0.01);
    outcome(
        ok_p && ok_u,
        format!(
            "primal d=20 {} [{ps}] (0.89 ± 0.01), dual level 10 {} [{ds}] (0.93 ± 0.01)",
            fmt(p),
            fmt(u)
        ),
    )
}

fn wireless() -> Outcome {
    let (inst, _) = wireless_instance(&WirelessConfig::paper_default()).unwrap();
    let sweep: Vec<(usize, SolveStatus, Option<f64>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (2..=10)
            .map(|d| {
                let inst = &inst;
                s.spawn(move || {
                    let (st, v) = primal_value(inst, d);
                    (d, st, v)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let (ds, u) = dual_value(&inst, 10);
    let at = |d: usize| sweep.iter().find(|r| r.0 == d).unwrap();
    let d2 = at(2).1 == SolveStatus::Infeasible;
    let d3 = at(3).2.is_some_and(|v| within_rel(v, 56.64, 0.02));
    let d10 = at(10).2.is_some_and(|v| within_rel(v, 53.93, 0.02));
    let du = ds.has_solution() && u.is_some_and(|v| within_rel(v, 52.66, 0.02));
    let table: Vec<String> = sweep
        .iter()
        .map(|(d, st, v)| format!("d={d}:{}[{st}]", fmt(*v)))
        .collect();
    outcome(
        d2 && d3 && d10 && du,
        format!(
            "d=2 infeasible: {d2}; d=3 {} (56.64 ± 2%), d=10 {} (53.93 ± 2%), dual level 10 {} (52.66 ± 2%); sweep {}",
            fmt(at(3).2),
            fmt(at(10).2),
            fmt(u),
            table.join(" ")
        ),
    )
}

fn markowitz() -> Outcome {
    let (r, sigma) = paper_markowitz_data();
    let inst = markowitz_instance(&r, &sigma).unwrap();
    let (ps, p) = primal_value(&inst, 10);
    let (ds, u) = dual_value(&inst, 10);
    let ok_p = ps.has_solution() && p.is_some_and(|v| within_rel(v, 0.3210, 0.01));
    let ok_u = ds.has_solution() && u.is_some_and(|v| within_rel(v, 0.3232, 0.01));
    outcome(
        ok_p && ok_u,
        format!(
            "primal d=10 {} [{ps}] (0.3210 ± 1%), dual level 10 {} [{ds}] (0.3232 ± 1%)",
            fmt(p),
            fmt(u)
        ),
    )
}

fn example31() -> Outcome {
    let inst = example31_instance();
    let statuses: Vec<SolveStatus> = (0..=8).map(|d| primal_value(&inst, d).0).collect();
    let ok = statuses.iter().all(|s| *s == SolveStatus::Infeasible);
    let list: Vec<String> = statuses
        .iter()
        .enumerate()
        .map(|(d, s)| format!("d={d}:{s}"))
        .collect();
    outcome(ok, list.join(" "))
}

struct FlowRun {
    seed: u64,
    primal: Vec<Option<f64>>,
    dual: Vec<Option<f64>>,
    verified: bool,
}

fn flow_run(seed: u64) -> FlowRun {
    let inst = maxflow_instance(&default_network(seed)).unwrap();
    let mut run = FlowRun {
        seed,
        primal: Vec::new(),
        dual: Vec::new(),
        verified: true,
    };
    for d in 2..=10 {
        match solve_primal(&inst, d, &ClarabelBackend, &settings()) {
            Ok(s) => {
                let ok = s.status.has_solution()
                    && verify_solution(&inst, &s, 1e-5, 1001).is_ok_and(|r| r.passed);
                run.verified &= ok;
                run.primal.push(s.reported_objective());
            }
            Err(_) => {
                run.verified = false;
                run.primal.push(None);
            }
        }
        run.dual.push(dual_value(&inst, d).1);
    }
    run
}

fn maxflow() -> Outcome {
    let runs: Vec<FlowRun> = std::thread::scope(|s| {
        let handles: Vec<_> = (1..=5u64)
            .map(|seed| s.spawn(move || flow_run(seed)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut ok = true;
    let mut lines = Vec::new();
    for run in &runs {
        let p: Option<Vec<f64>> = run.primal.iter().copied().collect();
        let u: Option<Vec<f64>> = run.dual.iter().copied().collect();
        let (Some(p), Some(u)) = (p, u) else {
            ok = false;
            lines.push(format!("seed {}: missing solution", run.seed));
            continue;
        };
        let mono_p = p.windows(2).all(|w| w[0] <= w[1] + 1e-5);
        let mono_u = u.windows(2).all(|w| w[1] <= w[0] + 1e-5);
        let weak = p.iter().zip(&u).all(|(a, b)| *a <= b + 1e-5);
        let (p10, u10) = (p[8], u[8]);
        let gap = (u10 - p10) / u10.abs().max(1e-12);
        let seed_ok = mono_p && mono_u && weak && gap < 0.2 && run.verified;
        ok &= seed_ok;
        lines.push(format!(
            "seed {}: p10 {p10:.5} u10 {u10:.5} gap {:.2}%{}",
            run.seed,
            100.0 * gap,
            if seed_ok {
                String::new()
            } else {
                format!(
                    " (monotone p {mono_p}, monotone u {mono_u}, weak duality {weak}, verified {})",
                    run.verified
                )
            }
        ));
    }
    outcome(ok, lines.join("; "))
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: 200,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn check<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> (bool, String) {
    match runner().run(&strategy, test) {
        Ok(()) => (true, format!("{name} ok")),
        Err(e) => (false, format!("{name} FAILED: {e}")),
    }
}

fn rand_sym(s: usize, v: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_fn(s, s, |i, j| v[(i * s + j) % v.len()]);
    (&a + a.transpose()) * 0.5
}

fn rand_psd(s: usize, v: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_fn(s, s, |i, j| v[(i * s + j) % v.len()]);
    &a * a.transpose()
}

/// Kernel-free instance that is strictly feasible at `x = 0` and bounded by a box.
fn kernel_free(n: usize, m: usize, a: Vec<SymPolyMatrix>, c: Vec<Poly>) -> TvSdp {
    let a0 = SymPolyMatrix::identity(m).scale(2.0);
    let mut inst = TvSdp::new(PolyVec(c[..n].to_vec()));
    inst.blocks.push(AffineBlock::new(a0, a[..n].to_vec()));
    inst.with_box(3.0).unwrap()
}

fn properties() -> Outcome {
    let mut results = Vec::new();

    results.push(check(
        "F adjoint",
        (
            block().prop_flat_map(|b| {
                let m = b.2;
                (Just(b), sym(m, 3))
            }),
            prop::collection::vec(poly(3), 3),
        ),
        |(((blk, n, _), p), xs)| {
            let x = PolyVec(xs[..n].to_vec());
            let fx = blk.apply(&x).unwrap();
            let lhs = inner_sm(&fx, &p).unwrap();
            let mut one_x = vec![Poly::constant(1.0)];
            one_x.extend(x.iter().cloned());
            let rhs = inner_ln(&PolyVec(one_x), &blk.adjoint(&p).unwrap()).unwrap();
            let scale = 1.0 + magnitude(&fx) * magnitude(&p);
            prop_assert!((lhs - rhs).abs() <= 1e-8 * scale, "{lhs} vs {rhs}");
            Ok(())
        },
    ));

    let vals = || prop::collection::vec(-1.0f64..1.0, 37);
    results.push(check(
        "Λ/α/β adjoints",
        (1usize..=3).prop_flat_map(move |m| (Just(m), 0usize..=6, vals(), sym(m, 4))),
        |(m, d, qv, pm)| {
            let g = GramShape::new(m, d);
            let mut maps: Vec<(DMatrix<f64>, SymPolyMatrix, DMatrix<f64>)> = Vec::new();
            let q = rand_sym(g.size_q1(), &qv);
            maps.push((
                q.clone(),
                alpha(m, d, &q).unwrap(),
                alpha_adjoint(m, d, &pm).unwrap(),
            ));
            if d > 0 {
                let q = rand_sym(g.size_q2(), &qv);
                maps.push((
                    q.clone(),
                    beta(m, d, &q).unwrap(),
                    beta_adjoint(m, d, &pm).unwrap(),
                ));
            }
            let even = 2 * (d / 2);
            let q = rand_sym(m * (even / 2 + 1), &qv);
            maps.push((
                q.clone(),
                lambda(m, even, &q).unwrap(),
                lambda_adjoint(m, even, &pm).unwrap(),
            ));
            for (q, image, adj) in maps {
                let lhs = inner_sm(&image, &pm).unwrap();
                let rhs = q.component_mul(&adj).sum();
                let scale = 1.0 + q.abs().sum() * magnitude(&pm);
                prop_assert!((lhs - rhs).abs() <= 1e-8 * scale, "{lhs} vs {rhs}");
            }
            Ok(())
        },
    ));

    results.push(check(
        "positivity transport",
        (1usize..=3, 0usize..=6, vals(), vals()),
        |(m, d, v1, v2)| {
            let g = GramShape::new(m, d);
            let x = g
                .compose(&rand_psd(g.size_q1(), &v1), &rand_psd(g.size_q2(), &v2))
                .unwrap();
            let e = x.min_eig_on_grid(1001).unwrap();
            prop_assert!(e >= -1e-8, "{e}");
            Ok(())
        },
    ));

    results.push(check(
        "kernel quadrature",
        (bipoly(3), poly(4)),
        |(d, p)| {
            let fwd = d.kernel_forward(&p);
            let bwd = d.kernel_backward(&p);
            for k in 0..=20 {
                let t = k as f64 / 20.0;
                let want_f = simpson(&|s| d.eval(t, s) * p.eval(s), 0.0, t, 1e-10);
                let want_b = simpson(&|s| d.eval(t, s) * p.eval(s), t, 1.0, 1e-10);
                prop_assert!((fwd.eval(t) - want_f).abs() <= 1e-8);
                prop_assert!((bwd.eval(t) - want_b).abs() <= 1e-8);
            }
            Ok(())
        },
    ));

    results.push(check("Hilbert moment matching", poly(8), |p| {
        let d = p.degree();
        let moments: Vec<f64> = (0..=d).map(|i| p.shift(i).integral_01()).collect();
        let q = match_moments(&moments, d).unwrap();
        for k in 0..=200 {
            let t = k as f64 / 200.0;
            prop_assert!((q.eval(t) - p.eval(t)).abs() <= 1e-9, "at {t}");
        }
        Ok(())
    }));

    // each case costs ~20 SDP solves, so this one runs on fewer instances
    let mut oracle_runner = TestRunner::new_with_rng(
        Config {
            cases: 10,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let oracle = oracle_runner.run(
        &(1usize..=2, 1usize..=2).prop_flat_map(|(n, m)| {
            (
                Just((n, m)),
                prop::collection::vec(sym(m, 2), n),
                prop::collection::vec(poly(2), n),
            )
        }),
        |((n, m), a, c)| {
            let inst = kernel_free(n, m, a, c);
            let s = solve_primal(&inst, 3, &ClarabelBackend, &settings()).unwrap();
            prop_assert!(s.status.has_solution(), "{}", s.backend_status);
            let x = s.x.unwrap();
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                let value: f64 = inst
                    .objective
                    .eval(t)
                    .iter()
                    .zip(x.eval(t))
                    .map(|(c, v)| c * v)
                    .sum();
                let bound = pointwise_sdp_oracle(&inst, t, &ClarabelBackend, &settings()).unwrap();
                prop_assert!(value <= bound + 1e-5, "t = {t}: {value} > {bound}");
            }
            Ok(())
        },
    );
    results.push(match oracle {
        Ok(()) => (true, "oracle dominance ok".into()),
        Err(e) => (false, format!("oracle dominance FAILED: {e}")),
    });

    let mut sdpa = true;
    for prog in [
        build_primal(&intro_instance(), 6).0,
        build_dual(&intro_instance().with_box(10.0).unwrap(), 6).0,
        build_primal(&maxflow_instance(&default_network(2)).unwrap(), 4).0,
        build_dual(&maxflow_instance(&default_network(2)).unwrap(), 4).0,
    ] {
        let text = to_sdpa_string(&prog).unwrap();
        let back = parse_sdpa(&text).unwrap();
        sdpa &= back == prog && to_sdpa_string(&back).unwrap() == text;
    }
    results.push((
        sdpa,
        format!("SDPA round trip {}", if sdpa { "ok" } else { "FAILED" }),
    ));

    let ok = results.iter().all(|r| r.0);
    let detail: Vec<String> = results.into_iter().map(|r| r.1).collect();
    outcome(ok, detail.join("; "))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 6] = [
        ("1 intro example", intro),
        ("2 wireless coverage", wireless),
        ("3 Markowitz", markowitz),
        ("4 infeasible example", example31),
        ("5 max-flow properties", maxflow),
        ("6 property suites", properties),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
