//! Property tests: order-theoretic laws over arbitrary DAGs, and the two
//! directions of the terminality/causal-structure correspondence in
//! randomized, testable form.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use causeway_core::diagram::{BoxId, BoxSignature, Circuit, WireType};
use causeway_core::order::{is_downward_closed, maximal_boxes, past};
use causeway_core::semantics::{Backend, Interpretation, Payload};
use causeway_core::verify::{check_all_factorizations, check_factorization};
use causeway_testkit as tk;

fn ty() -> WireType {
    WireType::new("T2", 2).unwrap()
}

/// (node count, edge bitmask) pairs describing DAGs on up to 6 nodes.
fn dag_strategy() -> impl Strategy<Value = (usize, u32)> {
    (1usize..=6).prop_flat_map(|n| {
        let slots = n * (n - 1) / 2;
        (Just(n), 0u32..(1u32 << slots))
    })
}

fn edges_from_mask(n: usize, mask: u32) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let mut bit = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            if mask & (1 << bit) != 0 {
                edges.push((a, b));
            }
            bit += 1;
        }
    }
    edges
}

fn subset_from_mask(n: usize, mask: u32) -> BTreeSet<BoxId> {
    (0..n).filter(|i| mask & (1 << i) != 0).map(BoxId).collect()
}

proptest! {
    #[test]
    fn past_is_extensive_idempotent_and_monotone(
        (n, dag_mask) in dag_strategy(),
        e_mask in any::<u32>(),
        f_mask in any::<u32>(),
    ) {
        let c = tk::circuit_from_dag(n, &edges_from_mask(n, dag_mask), &ty());
        let e = subset_from_mask(n, e_mask);
        let f: BTreeSet<BoxId> = e.union(&subset_from_mask(n, f_mask)).copied().collect();
        let pe = past(&c, &e).unwrap();
        let pf = past(&c, &f).unwrap();
        prop_assert!(e.is_subset(&pe));
        prop_assert_eq!(&past(&c, &pe).unwrap(), &pe);
        prop_assert!(pe.is_subset(&pf), "monotonicity");
        prop_assert!(is_downward_closed(&c, &pe));
    }

    #[test]
    fn nonempty_co_downward_closed_sets_have_maximal_members(
        (n, dag_mask) in dag_strategy(),
        e_mask in any::<u32>(),
    ) {
        let c = tk::circuit_from_dag(n, &edges_from_mask(n, dag_mask), &ty());
        let keep = past(&c, &subset_from_mask(n, e_mask)).unwrap();
        let complement: BTreeSet<BoxId> =
            (0..n).map(BoxId).filter(|b| !keep.contains(b)).collect();
        if !complement.is_empty() {
            prop_assert!(!maximal_boxes(&c, &complement).unwrap().is_empty());
        }
    }

    #[test]
    fn parallel_composition_is_unital_and_boundary_ordered(
        (n, dag_mask) in dag_strategy(),
    ) {
        let c = tk::circuit_from_dag(n, &edges_from_mask(n, dag_mask), &ty());
        prop_assert_eq!(&c.compose_par(&Circuit::empty()), &c);
        prop_assert_eq!(&Circuit::empty().compose_par(&c), &c);
        let double = c.compose_par(&c);
        prop_assert_eq!(double.box_count(), 2 * c.box_count());
        prop_assert_eq!(
            double.open_inputs().len(),
            2 * c.open_inputs().len()
        );
    }
}

/// Forward direction, testable form: all payloads terminal implies the
/// factorization holds for every subset of every random circuit.
#[test]
fn terminal_theories_respect_causal_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(17001);
    for _ in 0..25 {
        let (c, interp) = tk::circuits::random_terminal_circuit(
            &mut rng,
            Backend::Stochastic,
            &tk::circuits::RandomCircuitConfig {
                min_boxes: 1,
                max_boxes: 6,
                dims: vec![2, 3],
                max_boundary: 5,
                wire_prob: 0.65,
            },
        );
        let reports = check_all_factorizations(&c, &interp, 1e-9).unwrap();
        assert!(reports.iter().all(|r| r.passed));
    }
}

/// Converse direction, testable form: a payload that fails terminality makes
/// the single-box circuit fail the factorization at the empty subset, with
/// matching deviation.
#[test]
fn nonterminal_payloads_break_the_empty_factorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(17002);
    use rand::Rng;
    for _ in 0..50 {
        let rows = rng.gen_range(1..=4);
        let cols = rng.gen_range(1..=4);
        let (payload, dev) = tk::random_nonterminal_stochastic(&mut rng, rows, cols, 0.05);
        let in_dims = [cols];
        let out_dims = [rows];
        let c = Circuit::single(BoxSignature::generic(
            "f",
            in_dims
                .iter()
                .map(|&d| WireType::new(format!("I{d}"), d).unwrap())
                .collect(),
            out_dims
                .iter()
                .map(|&d| WireType::new(format!("O{d}"), d).unwrap())
                .collect(),
        ));
        let interp = Interpretation::new(Backend::Stochastic)
            .with_payload("f", Payload::Stochastic(payload));
        let r = check_factorization(&c, &BTreeSet::new(), &interp, 1e-9).unwrap();
        assert!(!r.passed);
        assert!(
            (r.max_deviation - dev).abs() < 1e-12,
            "expected deviation {dev}, got {}",
            r.max_deviation
        );
    }
}

/// Quantum converse: scaled Kraus sets fail with the completeness deviation.
#[test]
fn incomplete_kraus_sets_break_the_empty_factorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(17003);
    use rand::Rng;
    for _ in 0..30 {
        let d_in = rng.gen_range(1..=3);
        let d_out = rng.gen_range(1..=3);
        let (q, _) = tk::random_nonterminal_kraus(&mut rng, d_in, d_out, 2, 0.05);
        let algebraic = tk::kraus_completeness_deviation(&q);
        let c = Circuit::single(BoxSignature::generic(
            "n",
            vec![WireType::new(format!("I{d_in}"), d_in).unwrap()],
            vec![WireType::new(format!("O{d_out}"), d_out).unwrap()],
        ));
        let interp = Interpretation::new(Backend::Quantum).with_payload("n", Payload::Quantum(q));
        let r = check_factorization(&c, &BTreeSet::new(), &interp, 1e-9).unwrap();
        assert!(!r.passed);
        assert!((r.max_deviation - algebraic).abs() < 1e-9);
        assert!(r.max_deviation >= 0.05 - 1e-9);
    }
}
