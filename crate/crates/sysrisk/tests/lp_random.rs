//! Randomized cross-checks of the simplex kernel against an exhaustive
//! vertex-enumeration oracle, plus certificate verification on open LPs.

mod common;

use common::{random_boxed_case, random_open_lp, rng, vertex_enumerate, VertexOracle};
use rand::Rng;
use sysrisk::lp::{LpResult, REPORT_TOL};

#[test]
fn boxed_lps_match_vertex_enumeration() {
    let mut rng = rng(0x5eed_1001);
    for case_idx in 0..160 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=8);
        let case = random_boxed_case(&mut rng, n, m);
        let oracle = vertex_enumerate(
            case.n,
            case.sense,
            &case.obj,
            &case.rows,
            &case.lower,
            &case.upper,
        );
        let text = case.lp.to_text();
        match case.lp.solve().expect("solve") {
            LpResult::Optimal(sol) => {
                let check = case.lp.check_optimal(&sol);
                assert!(check < REPORT_TOL, "case {case_idx}: residual {check}\n{text}");
                match oracle {
                    VertexOracle::Optimal(v) => assert!(
                        (v - sol.value).abs() <= 1e-8,
                        "case {case_idx}: solver {} vs oracle {v}\n{text}",
                        sol.value
                    ),
                    VertexOracle::Infeasible => {
                        panic!("case {case_idx}: solver optimal, oracle infeasible\n{text}")
                    }
                }
            }
            LpResult::Infeasible(cert) => {
                assert_eq!(
                    oracle,
                    VertexOracle::Infeasible,
                    "case {case_idx}: solver infeasible, oracle disagrees\n{text}"
                );
                let check = case.lp.check_farkas(&cert);
                assert!(check < REPORT_TOL, "case {case_idx}: farkas residual {check}\n{text}");
            }
            LpResult::Unbounded(_) => {
                panic!("case {case_idx}: boxed LP cannot be unbounded\n{text}")
            }
        }
    }
}

#[test]
fn open_lps_carry_verified_certificates() {
    let mut rng = rng(0x5eed_1002);
    let mut n_unbounded = 0;
    for case_idx in 0..120 {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=6);
        let lp = random_open_lp(&mut rng, n, m);
        match lp.solve().expect("solve") {
            LpResult::Optimal(sol) => {
                let check = lp.check_optimal(&sol);
                assert!(check < REPORT_TOL, "case {case_idx}: residual {check}\n{}", lp.to_text());
            }
            LpResult::Unbounded(ray) => {
                n_unbounded += 1;
                let check = lp.check_ray(&ray);
                assert!(check < REPORT_TOL, "case {case_idx}: ray residual {check}\n{}", lp.to_text());
            }
            LpResult::Infeasible(cert) => {
                let check = lp.check_farkas(&cert);
                assert!(check < REPORT_TOL, "case {case_idx}: farkas residual {check}\n{}", lp.to_text());
            }
        }
    }
    assert!(n_unbounded > 5, "generator should produce unbounded cases");
}
