//! The rewrite engine against its structural and semantic obligations on
//! random circuits: elimination terminates in the predicted number of steps,
//! reproduces the directly-built factorization, preserves the evaluated
//! tensor when payloads are terminal, and is confluent across tie-break
//! policies.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use causeway_core::diagram::BoxId;
use causeway_core::order::past;
use causeway_core::rewrite::{
    build_phi_prime, capped_circuit, eliminate, factored_circuit, restrict_to_past, FactoredShape,
    TieBreak,
};
use causeway_core::semantics::{evaluate, Backend};
use causeway_core::tensor::tensors_equal;
use causeway_core::verify::check_factorization;
use causeway_testkit as tk;
use causeway_testkit::circuits::{random_terminal_circuit, RandomCircuitConfig};

fn random_subset(rng: &mut impl Rng, n: usize) -> BTreeSet<BoxId> {
    (0..n).filter(|_| rng.gen()).map(BoxId).collect()
}

#[test]
fn restriction_box_set_is_exactly_the_past() {
    let mut rng = ChaCha8Rng::seed_from_u64(13001);
    let t = causeway_core::diagram::WireType::new("T2", 2).unwrap();
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let edges = tk::random_index_ordered_dag(&mut rng, n, 0.4);
        let c = tk::circuit_from_dag(n, &edges, &t);
        let e = random_subset(&mut rng, n);
        let sub = restrict_to_past(&c, &e).unwrap();
        let closure = tk::reachability_closure(n, &edges);
        let expected: BTreeSet<String> = (0..n)
            .filter(|&a| e.iter().any(|&b| closure[a * n + b.0]))
            .map(|a| format!("b{a}"))
            .collect();
        let got: BTreeSet<String> = sub.boxes().iter().map(|b| b.label().to_string()).collect();
        assert_eq!(got, expected, "edges {edges:?}, e {e:?}");
    }
}

#[test]
fn elimination_halts_in_the_predicted_step_count_and_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(13002);
    for _ in 0..60 {
        let (c, _) = random_terminal_circuit(
            &mut rng,
            Backend::Stochastic,
            &RandomCircuitConfig::stochastic_desk(),
        );
        let e = random_subset(&mut rng, c.box_count());
        let r = eliminate(&c, &e, TieBreak::Lexicographic).unwrap();
        let keep = past(&c, &e).unwrap();
        assert_eq!(r.trace.len(), c.box_count() - keep.len());
        // structural postcondition: same factored shape as the direct build
        let rhs = factored_circuit(&c, &e).unwrap();
        assert_eq!(
            FactoredShape::of(&r.result, &c),
            FactoredShape::of(&rhs, &c)
        );
        // outputs are exactly out E; live inputs are exactly in past(E)
        let shape = FactoredShape::of(&r.result, &c);
        let expected_outs: BTreeSet<_> = c
            .open_outputs()
            .iter()
            .filter(|p| e.contains(&p.box_id))
            .map(|&p| causeway_core::rewrite::PortOrigin {
                box_label: c.label(p.box_id).to_string(),
                index: p.index,
            })
            .collect();
        assert_eq!(shape.open_outputs, expected_outs);
        let expected_live: BTreeSet<_> = c
            .open_inputs()
            .iter()
            .filter(|p| keep.contains(&p.box_id))
            .map(|&p| causeway_core::rewrite::PortOrigin {
                box_label: c.label(p.box_id).to_string(),
                index: p.index,
            })
            .collect();
        assert_eq!(shape.live_open_inputs, expected_live);
        let expected_discarded: BTreeSet<_> = c
            .open_inputs()
            .iter()
            .filter(|p| !keep.contains(&p.box_id))
            .map(|&p| causeway_core::rewrite::PortOrigin {
                box_label: c.label(p.box_id).to_string(),
                index: p.index,
            })
            .collect();
        assert_eq!(shape.discarded_inputs, expected_discarded);
    }
}

#[test]
fn each_eliminated_box_was_maximal_when_removed() {
    let mut rng = ChaCha8Rng::seed_from_u64(13003);
    for _ in 0..60 {
        let (c, _) = random_terminal_circuit(
            &mut rng,
            Backend::Stochastic,
            &RandomCircuitConfig::stochastic_desk(),
        );
        let e = random_subset(&mut rng, c.box_count());
        let r = eliminate(&c, &e, TieBreak::ReverseLexicographic).unwrap();
        let mut remaining: BTreeSet<String> =
            c.boxes().iter().map(|b| b.label().to_string()).collect();
        for step in &r.trace {
            // no wire from the eliminated box into a still-remaining box
            let victim = c.find_box(&step.eliminated).unwrap();
            remaining.remove(&step.eliminated);
            for succ in c.successors(victim) {
                assert!(
                    !remaining.contains(c.label(succ)),
                    "{} was not maximal",
                    step.eliminated
                );
            }
            assert_eq!(remaining, step.remaining);
        }
    }
}

#[test]
fn elimination_preserves_the_tensor_for_terminal_payloads() {
    let mut rng = ChaCha8Rng::seed_from_u64(13004);
    for backend in [Backend::Stochastic, Backend::Quantum] {
        let cfg = match backend {
            Backend::Quantum => RandomCircuitConfig::quantum_desk(),
            _ => RandomCircuitConfig::stochastic_desk(),
        };
        let trials = if backend == Backend::Quantum { 15 } else { 40 };
        for _ in 0..trials {
            let (c, interp) = random_terminal_circuit(&mut rng, backend, &cfg);
            let e = random_subset(&mut rng, c.box_count());
            let lhs = capped_circuit(&c, &e).unwrap();
            let t_lhs = evaluate(&lhs.circuit, &interp).unwrap();

            for tie in [TieBreak::Lexicographic, TieBreak::ReverseLexicographic] {
                let r = eliminate(&c, &e, tie).unwrap();
                let t_rewritten = evaluate(&r.result.circuit, &interp).unwrap();
                // align legs by origin before comparing
                let a = align(&t_lhs, &lhs);
                let b = align(&t_rewritten, &r.result);
                let cmp = tensors_equal(&a, &b, 1e-9);
                assert!(
                    cmp.equal,
                    "{backend}: rewrite changed the tensor by {}",
                    cmp.max_abs_diff
                );
            }
        }
    }
}

// Local copy of origin alignment for test use.
fn align(
    t: &causeway_core::tensor::Tensor,
    traced: &causeway_core::rewrite::TracedCircuit,
) -> causeway_core::tensor::Tensor {
    let n_out = traced.output_origins.len();
    let mut out_slots: Vec<usize> = (0..n_out).collect();
    out_slots.sort_by(|&a, &b| traced.output_origins[a].cmp(&traced.output_origins[b]));
    let mut in_slots: Vec<usize> = (0..traced.input_origins.len()).collect();
    in_slots.sort_by(|&a, &b| traced.input_origins[a].cmp(&traced.input_origins[b]));
    let perm: Vec<usize> = out_slots
        .into_iter()
        .chain(in_slots.into_iter().map(|i| i + n_out))
        .collect();
    t.permute(&perm)
}

#[test]
fn tie_break_policies_agree_on_the_evaluated_tensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(13005);
    for _ in 0..40 {
        let (c, interp) = random_terminal_circuit(
            &mut rng,
            Backend::Stochastic,
            &RandomCircuitConfig::stochastic_desk(),
        );
        let e = random_subset(&mut rng, c.box_count());
        let lex = eliminate(&c, &e, TieBreak::Lexicographic).unwrap();
        let rev = eliminate(&c, &e, TieBreak::ReverseLexicographic).unwrap();
        let a = align(
            &evaluate(&lex.result.circuit, &interp).unwrap(),
            &lex.result,
        );
        let b = align(
            &evaluate(&rev.result.circuit, &interp).unwrap(),
            &rev.result,
        );
        let cmp = tensors_equal(&a, &b, 1e-12);
        assert!(cmp.equal, "confluence violated by {}", cmp.max_abs_diff);
        assert_eq!(
            FactoredShape::of(&lex.result, &c),
            FactoredShape::of(&rev.result, &c)
        );
    }
}

#[test]
fn phi_prime_carries_the_selected_outputs_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(13006);
    for _ in 0..60 {
        let (c, _) = random_terminal_circuit(
            &mut rng,
            Backend::Stochastic,
            &RandomCircuitConfig::stochastic_desk(),
        );
        let e = random_subset(&mut rng, c.box_count());
        let phi = build_phi_prime(&c, &e).unwrap();
        let keep = past(&c, &e).unwrap();
        // outputs: exactly the open outputs of boxes in E
        let expected: BTreeSet<String> = c
            .open_outputs()
            .iter()
            .filter(|p| e.contains(&p.box_id))
            .map(|&p| c.port_label_out(p))
            .collect();
        let got: BTreeSet<String> = phi
            .circuit
            .open_outputs()
            .iter()
            .map(|&p| phi.circuit.port_label_out(p))
            .collect();
        assert_eq!(got, expected);
        // inputs: exactly the open inputs of past(E)
        let expected_in: BTreeSet<String> = c
            .open_inputs()
            .iter()
            .filter(|p| keep.contains(&p.box_id))
            .map(|&p| c.port_label_in(p))
            .collect();
        let got_in: BTreeSet<String> = phi
            .circuit
            .open_inputs()
            .iter()
            .map(|&p| phi.circuit.port_label_in(p))
            .collect();
        assert_eq!(got_in, expected_in);
    }
}

#[test]
fn factorization_check_accepts_terminal_circuits_on_random_subsets() {
    let mut rng = ChaCha8Rng::seed_from_u64(13007);
    for _ in 0..30 {
        let (c, interp) = random_terminal_circuit(
            &mut rng,
            Backend::Stochastic,
            &RandomCircuitConfig::stochastic_desk(),
        );
        let e = random_subset(&mut rng, c.box_count());
        let r = check_factorization(&c, &e, &interp, 1e-9).unwrap();
        assert!(r.passed, "deviation {}", r.max_deviation);
    }
}
