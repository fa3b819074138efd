use std::collections::BTreeSet;

use proptest::prelude::*;

use crosscut::constraints::{candidate_matings, check_unique_edges, Tolerance};
use crosscut::eval::{evaluate, MatingWeight};
use crosscut::io::{puzzle_from_str, solution_from_str, to_json, SolveMode, FORMAT_VERSION};
use crosscut::puzzlegen::{generate, rng_from_seed, ShapeFamily};
use crosscut::solver::{solve_clean, SolverReport};
use crosscut::{ConvexPolygon, Mating, Point2, Pose, SolutionBundle};

fn family() -> impl Strategy<Value = ShapeFamily> {
    prop_oneof![Just(ShapeFamily::Circle), Just(ShapeFamily::Polygon)]
}

fn truth_solution(b: &crosscut::PuzzleBundle, motion: Pose) -> SolutionBundle {
    let gt = b.ground_truth.as_ref().unwrap();
    SolutionBundle {
        format_version: FORMAT_VERSION.to_string(),
        mode: SolveMode::KnownMatings,
        seed: b.seed,
        matings: gt.matings.clone(),
        poses: gt.poses.iter().map(|(&i, p)| (i, motion.compose(p))).collect(),
        report: SolverReport::default(),
        eval: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_puzzles_are_consistent(family in family(), a in 0usize..25, noisy in any::<bool>(), seed in any::<u64>()) {
        let xi = if noisy { 0.005 } else { 0.0 };
        let g = generate(family, a, xi, seed).unwrap();
        let b = &g.bundle;
        let ni = g.info.n_intersections;
        prop_assert_eq!(b.pieces.len(), ni + a + 1);
        prop_assert_eq!(g.info.n_cut_edges, a + 2 * ni);
        let gt = b.ground_truth.as_ref().unwrap();
        prop_assert_eq!(gt.matings.len(), g.info.n_cut_edges);
        prop_assert!(check_unique_edges(&gt.matings, Some(&b.polygons())).is_ok());

        let shape = ConvexPolygon::new(b.shape.vertices.clone()).unwrap();
        let total: f64 = g.solved.iter().map(ConvexPolygon::area).sum();
        prop_assert!((total - shape.area()).abs() <= 1e-6 * shape.area());

        let text = to_json(b);
        prop_assert_eq!(&puzzle_from_str(&text).unwrap(), b);
    }

    #[test]
    fn truth_is_always_a_candidate(family in family(), a in 2usize..20, xi in prop_oneof![Just(0.0), 0.0001f64..0.01], seed in any::<u64>()) {
        let g = generate(family, a, xi, seed).unwrap();
        let b = &g.bundle;
        let cand: BTreeSet<Mating> =
            candidate_matings(&b.polygons(), b.noise.epsilon, &Tolerance::for_diameter(b.diameter())).into_iter().collect();
        for m in &b.ground_truth.as_ref().unwrap().matings {
            prop_assert!(cand.contains(m), "{m:?} missing");
        }
    }

    #[test]
    fn truth_scores_perfectly_under_any_motion(
        family in family(),
        a in 1usize..15,
        seed in any::<u64>(),
        angle in -3.0f64..3.0,
        tx in -50.0f64..50.0,
        ty in -50.0f64..50.0,
    ) {
        let g = generate(family, a, 0.0, seed).unwrap();
        let b = &g.bundle;
        let sol = truth_solution(b, Pose::new(angle, Point2::new(tx, ty)));
        let e = evaluate(b, &sol, MatingWeight::MeanArea).unwrap();
        prop_assert!(e.q_positions > 1.0 - 1e-9, "{}", e.q_positions);
        prop_assert_eq!(e.precision, 1.0);
        prop_assert_eq!(e.recall, Some(1.0));

        let text = to_json(&sol);
        prop_assert_eq!(&solution_from_str(&text).unwrap(), &sol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clean_solver_recovers_every_mating(family in family(), a in 1usize..15, seed in any::<u64>()) {
        let g = generate(family, a, 0.0, seed).unwrap();
        let b = &g.bundle;
        let out = solve_clean(&b.polygons(), &Tolerance::for_diameter(b.diameter()), &mut rng_from_seed(seed)).unwrap();
        let got: BTreeSet<Mating> = out.matings.iter().copied().collect();
        let want: BTreeSet<Mating> = b.ground_truth.as_ref().unwrap().matings.iter().copied().collect();
        prop_assert_eq!(got, want);
        prop_assert_eq!(out.poses.len(), b.pieces.len());
    }
}
