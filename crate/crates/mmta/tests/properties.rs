//! Randomized properties of the solver, the program exchange format and the
//! assignment model.

mod common;

use proptest::prelude::*;

use mmta::analysis::{modal_share, price_of_anarchy, selfish_routing_bound, verify_equilibrium};
use mmta::costs::{bpr_time, Principle};
use mmta::model::{ConstraintFamily, MathProgram, Sense, VarFamily};
use mmta::oracle::{brute_force_solve, DEFAULT_CAP};
use mmta::paths::PathCatalog;
use mmta::run::{run, RunOptions};
use mmta::solver::{matrix_hash, parse_mps, solve, to_mps, LpOptions, LpStatus, Simplex, SolveStatus, SolverOptions};

/// A bounded program that is feasible at the origin: `<=` rows with
/// non-negative right-hand sides over boxes `[0, u]`.
fn program(integer: bool) -> impl Strategy<Value = MathProgram> {
    (2usize..6, 1usize..5).prop_flat_map(move |(n, m)| {
        (
            prop::collection::vec(-5i32..=5, n),
            prop::collection::vec(1u32..=4, n),
            prop::collection::vec(prop::collection::vec(-3i32..=4, n), m),
            prop::collection::vec(0u32..=8, m),
        )
            .prop_map(move |(cost, upper, rows, rhs)| {
                let mut p = MathProgram::new("random");
                for (j, (&c, &u)) in cost.iter().zip(&upper).enumerate() {
                    p.add_var(format!("x{j}"), 0.0, f64::from(u), integer, VarFamily::Generic);
                    p.objective[j] = f64::from(c);
                }
                for (i, (row, &b)) in rows.iter().zip(&rhs).enumerate() {
                    let terms = row.iter().enumerate().map(|(j, &a)| (j, f64::from(a))).collect();
                    p.add_row(format!("r{i}"), terms, Sense::Le, f64::from(b), vec![ConstraintFamily::Generic]);
                }
                p
            })
    })
}

fn lp_objective(p: &MathProgram, dual: bool) -> (LpStatus, f64, Vec<f64>) {
    let mut lp = Simplex::new(
        p,
        LpOptions {
            dual,
            ..LpOptions::default()
        },
    );
    let r = lp.solve();
    (r.status, r.objective, r.x)
}

/// Best objective over every integer point of the boxes.
fn enumerate(p: &MathProgram) -> f64 {
    let upper: Vec<u32> = p.variables.iter().map(|v| v.upper as u32).collect();
    let mut x = vec![0u32; upper.len()];
    let mut best = f64::INFINITY;
    loop {
        let point: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        if p.max_violation(&point) <= 1e-9 {
            best = best.min(p.objective_value(&point));
        }
        let mut k = 0;
        while k < x.len() && x[k] == upper[k] {
            x[k] = 0;
            k += 1;
        }
        if k == x.len() {
            return best;
        }
        x[k] += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn primal_and_dual_paths_agree(p in program(false)) {
        let (s1, z1, x1) = lp_objective(&p, true);
        let (s2, z2, x2) = lp_objective(&p, false);
        prop_assert_eq!(s1, LpStatus::Optimal);
        prop_assert_eq!(s2, LpStatus::Optimal);
        prop_assert!((z1 - z2).abs() <= 1e-7 * z1.abs().max(1.0), "{} vs {}", z1, z2);
        prop_assert!(p.max_violation(&x1) <= 1e-7);
        prop_assert!(p.max_violation(&x2) <= 1e-7);
    }

    #[test]
    fn branch_and_bound_finds_the_enumerated_optimum(p in program(true)) {
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let best = enumerate(&p);
        prop_assert!((sol.objective - best).abs() <= 1e-6, "{} vs {}", sol.objective, best);
        prop_assert!(sol.x.iter().all(|v| (v - v.round()).abs() <= 1e-6));
    }

    #[test]
    fn mps_round_trip_keeps_the_matrix(p in program(true)) {
        let text = to_mps(&p).unwrap();
        let back = parse_mps(&text).unwrap();
        prop_assert_eq!(matrix_hash(&back), matrix_hash(&p));
        prop_assert_eq!(to_mps(&back).unwrap(), text);
    }

    #[test]
    fn travel_time_grows_with_flow(
        t0 in 0.0f64..10.0,
        delay in 0.0f64..5.0,
        capacity in 0.5f64..50.0,
        beta in 1.0f64..6.0,
        x in 0.0f64..100.0,
        dx in 0.0f64..10.0,
    ) {
        let a = bpr_time(t0, delay, capacity, beta, x);
        let b = bpr_time(t0, delay, capacity, beta, x + dx);
        prop_assert!(a >= t0);
        prop_assert!(b >= a);
    }

    #[test]
    fn selfish_routing_bound_grows_with_beta(beta in 0.5f64..8.0, step in 0.01f64..2.0) {
        let low = selfish_routing_bound(beta);
        prop_assert!(low > 1.0);
        prop_assert!(selfish_routing_bound(beta + step) > low);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn equilibrium_never_beats_the_optimum(demand in 1u64..=40, capacity in 1.0f64..200.0) {
        let mut s = common::fixture("congested_pair.json");
        s.demand[0].travellers = demand;
        s.links[0].capacity = capacity;
        let catalog = PathCatalog::build(&s);
        let ue = run(&s, &catalog, Principle::Ue, &RunOptions::default()).unwrap();
        let so = run(&s, &catalog, Principle::So, &RunOptions::default()).unwrap();
        let poa = price_of_anarchy(ue.cost.total, so.cost.total).unwrap();
        prop_assert!(poa >= 1.0 - 1e-6, "PoA {}", poa);
        let report = verify_equilibrium(&s, &catalog, &ue.model.space, &ue.assignment, Principle::Ue, 1e-6);
        prop_assert!(report.passed());
    }

    #[test]
    fn solver_matches_enumeration_on_random_demand(
        name in prop::sample::select(common::micro_fixtures()),
        scale in prop::collection::vec(0u64..=3, 2),
        ue in any::<bool>(),
    ) {
        let mut s = common::fixture(&name);
        for (d, k) in s.demand.iter_mut().zip(&scale) {
            d.travellers = (d.travellers * k).min(5);
        }
        let principle = if ue { Principle::Ue } else { Principle::So };
        let catalog = PathCatalog::build(&s);
        let r = run(&s, &catalog, principle, &RunOptions::default()).unwrap();
        prop_assert!(r.check.is_feasible(), "{:?}", r.check);
        let total: f64 = modal_share(&catalog, &r.assignment).values().sum();
        if s.total_demand() > 0 {
            prop_assert!((total - 1.0).abs() <= 1e-9, "shares sum to {}", total);
        }
        let oracle = brute_force_solve(&s, &catalog, principle, Some(&r.passenger_time), DEFAULT_CAP).unwrap();
        let tol = r.model.approximation_bound + 1e-6 * oracle.objective.abs().max(1.0);
        prop_assert!((r.solution.objective - oracle.objective).abs() <= tol,
            "{} {:?}: {} vs {}", name, principle, r.solution.objective, oracle.objective);
    }
}
