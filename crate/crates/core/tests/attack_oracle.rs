//! Cross-checks between the tree search, the exhaustive oracle, and the
//! live protocol.
//!
//! The unit tests inside the attack module pin the engines against each
//! other; these tests pin the whole pipeline from the outside, using only
//! the public API: every exhaustive solution's prefix must survive every
//! tree level, and every matrix the attack produces must actually
//! authenticate in real sessions.

use tconj::attack::{
    brute_force_solve, extend_level, forge_check, plant_instance, tree_attack, AttackConfig,
    AttackOutcome, LevelOutcome, PartialSolution,
};
use tconj::protocol::{run_session, PrivateKey, SessionConfig};
use tconj::seeded_rng;

/// Completeness of the level filter: a prefix of any true solution is never
/// pruned, at any depth, on any instance. This is the property that makes
/// the tree an exact solver rather than a heuristic.
#[test]
fn no_true_solution_prefix_is_ever_pruned() {
    for seed in 0..20 {
        let n = 3;
        let cfg = AttackConfig::new(n);
        let instance = plant_instance(&cfg, &mut seeded_rng(seed)).unwrap();
        let solutions = brute_force_solve(instance.public()).unwrap();
        assert!(!solutions.is_empty(), "planted instances are satisfiable");

        let mut live = vec![PartialSolution::empty()];
        for depth in 1..=n {
            let LevelOutcome::Extended(next) =
                extend_level(instance.public(), &live, usize::MAX).unwrap()
            else {
                panic!("unbounded cap cannot be exceeded");
            };
            for s in &solutions {
                let prefix = PartialSolution::from_mat(s, depth);
                assert!(
                    next.binary_search(&prefix).is_ok(),
                    "prefix of a true solution pruned at depth {depth} (seed {seed})"
                );
            }
            live = next;
        }
        // at full depth the surviving set is exactly the solution set
        let mut expected: Vec<PartialSolution> =
            solutions.iter().map(|s| PartialSolution::from_mat(s, n)).collect();
        expected.sort_unstable();
        assert_eq!(live, expected);
    }
}

/// Recovered keys are as good as the real one: each solution of a planted
/// instance passes verification in a full multi-round session.
#[test]
fn recovered_keys_authenticate_in_live_sessions() {
    let n = 4;
    let cfg = AttackConfig::new(n).with_width_cap(AttackConfig::UNBOUNDED);
    for seed in 100..110 {
        let instance = plant_instance(&cfg, &mut seeded_rng(seed)).unwrap();
        let run = tree_attack(instance.public(), &cfg).unwrap();
        let AttackOutcome::Forged { solutions } = run.outcome else {
            panic!("planted instance with unbounded cap must forge (seed {seed})");
        };
        let session_cfg = SessionConfig::new(10, n).unwrap();
        // exercising a handful per instance keeps degenerate instances cheap
        for (i, s) in solutions.iter().take(8).enumerate() {
            assert!(forge_check(instance.public(), s).unwrap());
            let forged_key = PrivateKey::from_mat(s.clone());
            let transcript = run_session(
                instance.public(),
                &forged_key,
                session_cfg,
                &mut seeded_rng(1000 + i as u64),
                &mut seeded_rng(2000 + i as u64),
            )
            .unwrap();
            assert!(
                transcript.verdict.is_accept(),
                "solution {i} of seed {seed} failed a live session"
            );
        }
    }
}

/// The two parameter readings for mismatched endomorphism and matrix orders
/// produce structurally different instances, and the solver handles both.
#[test]
fn both_mismatched_order_readings_are_solvable_shapes() {
    // reduced reading: endomorphisms drawn wide, folded into the matrix ring
    let reduced = AttackConfig::new(6).with_endo_order(9);
    let instance = plant_instance(&reduced, &mut seeded_rng(7)).unwrap();
    assert_eq!(instance.public().n(), 6);
    let run = tree_attack(instance.public(), &reduced).unwrap();
    if let AttackOutcome::Forged { solutions } = &run.outcome {
        for s in solutions {
            assert!(forge_check(instance.public(), s).unwrap());
        }
    }

    // extended reading: the ring is widened instead, matrices zero-extended
    let extended = AttackConfig::new(6).with_endo_order(9).with_ring_order(9);
    let instance = plant_instance(&extended, &mut seeded_rng(7)).unwrap();
    assert_eq!(instance.public().n(), 9);
    let planted = instance.planted().unwrap().matrix();
    for e in planted.entries() {
        for d in 6..9 {
            assert!(!e.coeff(d), "matrix slots beyond the drawn order stay zero");
        }
    }
    let run = tree_attack(instance.public(), &extended).unwrap();
    if let AttackOutcome::Forged { solutions } = &run.outcome {
        for s in solutions {
            assert!(forge_check(instance.public(), s).unwrap());
        }
    }
}

/// Width profiles are consistent with outcomes: a forgery reports one width
/// per ring degree, early stops report exactly the completed levels.
#[test]
fn width_profiles_match_outcomes() {
    for seed in 0..20 {
        let cfg = AttackConfig::new(5).with_width_cap(64);
        let instance = plant_instance(&cfg, &mut seeded_rng(seed)).unwrap();
        let run = tree_attack(instance.public(), &cfg).unwrap();
        match &run.outcome {
            AttackOutcome::Forged { solutions } => {
                assert_eq!(run.widths.len(), 5);
                assert_eq!(*run.widths.last().unwrap(), solutions.len());
            }
            AttackOutcome::Exhausted { level } => {
                assert_eq!(run.widths.len(), level - 1);
            }
            AttackOutcome::WidthExceeded { level, width } => {
                assert_eq!(run.widths.len(), level - 1);
                assert!(*width > 64);
                assert!(*level <= 5);
            }
        }
        assert!(run.widths.iter().all(|&w| 0 < w && w <= 64));
    }
}
