//! Verifier-level laws on random terminal interpretations: the affect
//! relation never outruns the box order, no-signalling agrees with the
//! wing factorizations on random Bell scenarios, and fully-discarded
//! terminal stochastic circuits are the number 1.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use causeway_core::diagram::{BoxId, BoxSignature, CircuitBuilder, InPort};
use causeway_core::order::box_order;
use causeway_core::semantics::{evaluate, Backend};
use causeway_core::verify::{check_affect, check_factorization, check_no_signalling};
use causeway_testkit as tk;

#[test]
fn affect_never_outruns_the_box_order() {
    // Contrapositive of affect => order: when a is not below b, probing a
    // cannot move b's marginal in a fully terminal interpretation.
    let mut rng = ChaCha8Rng::seed_from_u64(19001);
    for backend in [Backend::Stochastic, Backend::Quantum] {
        let trials = if backend == Backend::Quantum { 8 } else { 25 };
        for _ in 0..trials {
            let n = rng.gen_range(2..=4);
            let (skel, interp) = tk::random_terminal_skeleton(&mut rng, backend, n, 2, 0.5);
            let rel = box_order(&skel.circuit);
            for a in skel.order.events() {
                for b in skel.order.events() {
                    if a == b {
                        continue;
                    }
                    let ba = skel.events.get(a).unwrap().box_id;
                    let bb = skel.events.get(b).unwrap().box_id;
                    if rel.leq(ba, bb) {
                        continue;
                    }
                    let report = check_affect(&skel, a, b, &interp, &[], 1e-9).unwrap();
                    assert!(
                        report.passed,
                        "{backend}: affect {a} -> {b} against the order, dev {}",
                        report.max_deviation
                    );
                }
            }
        }
    }
}

#[test]
fn no_signalling_agrees_with_the_wing_factorizations() {
    let mut rng = ChaCha8Rng::seed_from_u64(19002);
    for backend in [Backend::Stochastic, Backend::Quantum] {
        for _ in 0..10 {
            let (skel, interp) = tk::random_bell_skeleton(&mut rng, backend);
            for (probe, wing) in [("B", "A"), ("A", "B")] {
                let ns = check_no_signalling(&skel, &interp, probe, 1e-9).unwrap();
                let e: BTreeSet<BoxId> =
                    [skel.circuit.find_box(wing).unwrap()].into_iter().collect();
                let fact = check_factorization(&skel.circuit, &e, &interp, 1e-9).unwrap();
                assert_eq!(ns.passed, fact.passed, "{backend} wing {wing}");
            }
        }
    }
}

#[test]
fn closed_terminal_stochastic_circuits_are_the_number_one() {
    // Feed every open input a normalized state and discard every output:
    // the closed diagram contracts to the scalar 1.
    let mut rng = ChaCha8Rng::seed_from_u64(19003);
    for _ in 0..25 {
        let (c, interp) = tk::circuits::random_terminal_circuit(
            &mut rng,
            Backend::Stochastic,
            &tk::circuits::RandomCircuitConfig::stochastic_desk(),
        );
        let mut builder = CircuitBuilder::from_circuit(&c);
        let mut extended = interp.clone();
        for (k, &p) in c.open_inputs().iter().enumerate() {
            let t = c.input_type(p).clone();
            let name = format!("state{k}");
            let sig = BoxSignature::generic(name.clone(), vec![], vec![t.clone()]);
            extended
                .insert_payload(
                    name.clone(),
                    causeway_core::semantics::Payload::Stochastic(tk::random_terminal_stochastic(
                        &mut rng,
                        t.dim(),
                        1,
                    )),
                )
                .unwrap();
            let (id, _) = builder.add_box_fresh(&name, sig);
            builder.connect(
                causeway_core::diagram::OutPort {
                    box_id: id,
                    index: 0,
                },
                p,
            );
        }
        for (k, &p) in c.open_outputs().iter().enumerate() {
            let t = c.output_type(p).clone();
            let (id, _) = builder.add_box_fresh(&format!("drop{k}"), BoxSignature::discard(&t));
            builder.connect(
                p,
                InPort {
                    box_id: id,
                    index: 0,
                },
            );
        }
        let closed = builder.build().unwrap();
        let value = evaluate(&closed, &extended).unwrap().as_scalar().unwrap();
        assert!(
            (value - Complex64::new(1.0, 0.0)).norm() < 1e-10,
            "closed circuit evaluated to {value}"
        );
    }
}
