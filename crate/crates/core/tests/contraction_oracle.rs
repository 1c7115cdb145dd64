//! The contraction engine against the brute-force evaluator, plus the
//! algebraic laws evaluation must satisfy: contraction-order invariance,
//! outer products for disconnected circuits, associativity and interchange
//! of composition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use causeway_core::diagram::{BoxSignature, Circuit, WireType};
use causeway_core::semantics::{evaluate, evaluate_with_order, Backend, Interpretation};
use causeway_core::tensor::tensors_equal;
use causeway_testkit as tk;
use causeway_testkit::circuits::{random_terminal_circuit, RandomCircuitConfig};
use causeway_testkit::naive::naive_evaluate;

fn small_config(backend: Backend) -> RandomCircuitConfig {
    // Sized for the exponential naive oracle. Mixed dims matter for the
    // quantum backend: they exercise the per-wire leg fusion of the
    // superoperator tensors.
    match backend {
        Backend::Quantum => RandomCircuitConfig {
            min_boxes: 1,
            max_boxes: 4,
            dims: vec![2, 3],
            max_boundary: 3,
            wire_prob: 0.7,
        },
        _ => RandomCircuitConfig {
            min_boxes: 1,
            max_boxes: 5,
            dims: vec![2, 3],
            max_boundary: 4,
            wire_prob: 0.65,
        },
    }
}

#[test]
fn engine_matches_the_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11001);
    for backend in [Backend::Stochastic, Backend::Raw, Backend::Quantum] {
        let trials = if backend == Backend::Quantum { 15 } else { 40 };
        for _ in 0..trials {
            let (c, interp) = random_terminal_circuit(&mut rng, backend, &small_config(backend));
            let fast = evaluate(&c, &interp).unwrap();
            let slow = naive_evaluate(&c, &interp);
            let cmp = tensors_equal(&fast, &slow, 1e-9);
            assert!(
                cmp.equal,
                "{backend}: engine deviates from oracle by {}",
                cmp.max_abs_diff
            );
        }
    }
}

#[test]
fn special_boxes_match_the_brute_force_oracle() {
    // Hand-assembled circuit exercising identity, swap, cup, and cap in the
    // raw backend, compared entry by entry against the naive route.
    use causeway_core::diagram::{CircuitBuilder, InPort, OutPort};
    let t = WireType::new("T2", 2).unwrap();
    let mut b = CircuitBuilder::new();
    let cup = b.add_box("cup", BoxSignature::cup(&t)).unwrap();
    let swap = b.add_box("swap", BoxSignature::swap(&t, &t)).unwrap();
    let id = b.add_box("id", BoxSignature::identity(&t)).unwrap();
    let cap = b.add_box("cap", BoxSignature::cap(&t)).unwrap();
    b.connect(
        OutPort {
            box_id: cup,
            index: 0,
        },
        InPort {
            box_id: swap,
            index: 0,
        },
    );
    b.connect(
        OutPort {
            box_id: cup,
            index: 1,
        },
        InPort {
            box_id: swap,
            index: 1,
        },
    );
    b.connect(
        OutPort {
            box_id: swap,
            index: 0,
        },
        InPort {
            box_id: id,
            index: 0,
        },
    );
    b.connect(
        OutPort {
            box_id: id,
            index: 0,
        },
        InPort {
            box_id: cap,
            index: 0,
        },
    );
    let c = b.build().unwrap();
    let interp = Interpretation::new(Backend::Raw);
    let fast = evaluate(&c, &interp).unwrap();
    let slow = naive_evaluate(&c, &interp);
    assert!(tensors_equal(&fast, &slow, 1e-12).equal);
}

#[test]
fn any_topological_order_gives_the_same_tensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(11002);
    for backend in [Backend::Stochastic, Backend::Quantum] {
        for _ in 0..20 {
            let cfg = match backend {
                Backend::Quantum => RandomCircuitConfig::quantum_desk(),
                _ => RandomCircuitConfig::stochastic_desk(),
            };
            let (c, interp) = random_terminal_circuit(&mut rng, backend, &cfg);
            let reference = evaluate(&c, &interp).unwrap();
            for _ in 0..3 {
                let order = tk::random_topological_order(&mut rng, &c);
                let other = evaluate_with_order(&c, &interp, &order).unwrap();
                let cmp = tensors_equal(&reference, &other, 1e-12);
                assert!(
                    cmp.equal,
                    "{backend}: orders disagree by {}",
                    cmp.max_abs_diff
                );
            }
        }
    }
}

#[test]
fn disconnection_evaluates_to_an_outer_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11003);
    for _ in 0..20 {
        let cfg = small_config(Backend::Stochastic);
        let (c1, i1) = random_terminal_circuit(&mut rng, Backend::Stochastic, &cfg);
        let (c2, i2) = random_terminal_circuit(&mut rng, Backend::Stochastic, &cfg);
        // merge payload maps; labels are f0.. in both, so rename the second
        let mut interp = i1.clone();
        let mut c2_renamed = Vec::new();
        for b in c2.box_ids() {
            let inst = c2.instance(b);
            let new_name = format!("g{}", b.0);
            c2_renamed.push((new_name.clone(), inst.signature().clone()));
            if let Some(p) = i2.payload(inst.signature().name()) {
                interp.insert_payload(new_name, p.clone()).unwrap();
            }
        }
        let mut builder = causeway_core::diagram::CircuitBuilder::new();
        let ids: Vec<_> = c2_renamed
            .into_iter()
            .map(|(name, sig)| {
                let renamed = BoxSignature::generic(
                    name.clone(),
                    sig.inputs().to_vec(),
                    sig.outputs().to_vec(),
                );
                builder.add_box(name, renamed).unwrap()
            })
            .collect();
        for w in c2.wires() {
            builder.connect(
                causeway_core::diagram::OutPort {
                    box_id: ids[w.from.box_id.0],
                    index: w.from.index,
                },
                causeway_core::diagram::InPort {
                    box_id: ids[w.to.box_id.0],
                    index: w.to.index,
                },
            );
        }
        let c2 = builder.build().unwrap();

        let joint = evaluate(&c1.compose_par(&c2), &interp).unwrap();
        let t1 = evaluate(&c1, &interp).unwrap();
        let t2 = evaluate(&c2, &interp).unwrap();
        // boundary of the parallel composite: outputs of c1 then c2, inputs
        // of c1 then c2 -- permute the outer product to match
        let (o1, i1n) = (c1.open_outputs().len(), c1.open_inputs().len());
        let (o2, i2n) = (c2.open_outputs().len(), c2.open_inputs().len());
        let mut perm = Vec::new();
        perm.extend(0..o1); // c1 outputs
        perm.extend((o1 + i1n)..(o1 + i1n + o2)); // c2 outputs
        perm.extend(o1..(o1 + i1n)); // c1 inputs
        perm.extend((o1 + i1n + o2)..(o1 + i1n + o2 + i2n)); // c2 inputs
        let expected = t1.outer(&t2).permute(&perm);
        let cmp = tensors_equal(&joint, &expected, 1e-12);
        assert!(cmp.equal, "outer product off by {}", cmp.max_abs_diff);
    }
}

#[test]
fn sequential_composition_is_associative_under_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11004);
    let t = WireType::new("T3", 3).unwrap();
    for backend in [Backend::Stochastic, Backend::Quantum, Backend::Raw] {
        for _ in 0..8 {
            let mk = |name: &str| {
                Circuit::single(BoxSignature::generic(
                    name,
                    vec![t.clone()],
                    vec![t.clone()],
                ))
            };
            let (a, b, c) = (mk("a"), mk("b"), mk("c"));
            let mut interp = Interpretation::new(backend);
            for name in ["a", "b", "c"] {
                interp
                    .insert_payload(
                        name,
                        tk::random_terminal_payload(&mut rng, backend, &[3], &[3]),
                    )
                    .unwrap();
            }
            let left = a.compose_seq(&b).unwrap().compose_seq(&c).unwrap();
            let right = a.compose_seq(&b.compose_seq(&c).unwrap()).unwrap();
            let tl = evaluate(&left, &interp).unwrap();
            let tr = evaluate(&right, &interp).unwrap();
            assert!(tensors_equal(&tl, &tr, 1e-12).equal, "{backend}");
        }
    }
}

#[test]
fn interchange_of_parallel_and_sequential_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11005);
    let t = WireType::new("T2", 2).unwrap();
    for _ in 0..10 {
        let mk = |name: &str| {
            Circuit::single(BoxSignature::generic(
                name,
                vec![t.clone()],
                vec![t.clone()],
            ))
        };
        let (d1, d2, d3, d4) = (mk("d1"), mk("d2"), mk("d3"), mk("d4"));
        let mut interp = Interpretation::new(Backend::Stochastic);
        for name in ["d1", "d2", "d3", "d4"] {
            interp
                .insert_payload(
                    name,
                    causeway_core::semantics::Payload::Stochastic(tk::random_terminal_stochastic(
                        &mut rng, 2, 2,
                    )),
                )
                .unwrap();
        }
        // (d1 (x) d2) ; (d3 (x) d4) = (d1 ; d3) (x) (d2 ; d4)
        let lhs = d1
            .compose_par(&d2)
            .compose_seq(&d3.compose_par(&d4))
            .unwrap();
        let rhs = d1
            .compose_seq(&d3)
            .unwrap()
            .compose_par(&d2.compose_seq(&d4).unwrap());
        let tl = evaluate(&lhs, &interp).unwrap();
        let tr = evaluate(&rhs, &interp).unwrap();
        assert!(tensors_equal(&tl, &tr, 1e-12).equal);
    }
}

#[test]
fn quantum_channel_semantics_match_density_matrix_simulation() {
    // Random single-wire chains rho -> N1 -> N2 -> trace, against textbook
    // matrix computation.
    let mut rng = ChaCha8Rng::seed_from_u64(11006);
    for _ in 0..25 {
        let d = rng.gen_range(2..=3);
        let t = WireType::new(format!("Q{d}"), d).unwrap();
        let state = Circuit::single(BoxSignature::generic("rho", vec![], vec![t.clone()]));
        let n1 = Circuit::single(BoxSignature::generic(
            "n1",
            vec![t.clone()],
            vec![t.clone()],
        ));
        let n2 = Circuit::single(BoxSignature::generic(
            "n2",
            vec![t.clone()],
            vec![t.clone()],
        ));
        let q_rho = tk::random_terminal_kraus(&mut rng, 1, d, 2);
        let q1 = tk::random_terminal_kraus(&mut rng, d, d, 2);
        let q2 = tk::random_terminal_kraus(&mut rng, d, d, 3);
        let chain = state.compose_seq(&n1).unwrap().compose_seq(&n2).unwrap();

        use causeway_core::semantics::Payload;
        let interp = Interpretation::new(Backend::Quantum)
            .with_payload("rho", Payload::Quantum(q_rho.clone()))
            .with_payload("n1", Payload::Quantum(q1.clone()))
            .with_payload("n2", Payload::Quantum(q2.clone()));
        let got = evaluate(&chain, &interp).unwrap();

        // density-matrix route
        let rho0 = tk::apply_channel(&q_rho.kraus, &tk::identity_matrix(1));
        let rho1 = tk::apply_channel(&q1.kraus, &rho0);
        let rho2 = tk::apply_channel(&q2.kraus, &rho1);
        assert_eq!(got.shape(), &[d * d]);
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let dev = (got.data()[i * d + j] - rho2.get(i, j)).norm();
                worst = worst.max(dev);
            }
        }
        assert!(worst < 1e-10, "flattened density matrix off by {worst}");
        // and tracing gives 1 for the trace-preserving chain
        let closed = chain.compose_seq(&Circuit::discard(&t)).unwrap();
        let total = evaluate(&closed, &interp).unwrap().as_scalar().unwrap();
        assert!((total.re - 1.0).abs() < 1e-10 && total.im.abs() < 1e-12);
    }
}
