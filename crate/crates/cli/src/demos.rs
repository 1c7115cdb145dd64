//! Built-in demonstration scenarios.
//!
//! `bell` builds the V-shaped two-wing scenario with a correlated source and
//! terminal wing channels, where no amount of probing one wing moves the
//! other wing's marginal. `counterexample` builds a two-event chain in the
//! raw backend whose payloads hide a cup/cap pair, so the later event's
//! input steers the earlier event's output: the factorization condition
//! breaks by a full unit and the affect check sees future-to-past flow.

use causeway_core::diagram::WireType;
use causeway_core::order::{skeleton_from_order, CausalOrder, Skeleton, SkeletonTyping};
use causeway_core::semantics::{
    Backend, CMatrix, Interpretation, Payload, QuantumBox, RawBox, StochasticBox,
};
use causeway_core::tensor::Tensor;
use num_complex::Complex64;

fn qubit() -> WireType {
    WireType::new("Q", 2).unwrap()
}

/// Bell-scenario skeleton: source `C` below wings `A` and `B`, with trivial
/// local ports at `C` and qubit-sized wires everywhere.
pub fn bell_skeleton() -> Skeleton {
    let order = CausalOrder::new(vec!["C", "A", "B"], vec![("C", "A"), ("C", "B")])
        .expect("V order is acyclic");
    let t = qubit();
    let mut typing = SkeletonTyping::default();
    typing.edges.insert(("C".into(), "A".into()), t.clone());
    typing.edges.insert(("C".into(), "B".into()), t.clone());
    typing.local_inputs.insert("A".into(), t.clone());
    typing.local_outputs.insert("A".into(), t.clone());
    typing.local_inputs.insert("B".into(), t.clone());
    typing.local_outputs.insert("B".into(), t);
    let (circuit, events) = skeleton_from_order(&order, &typing).expect("typed V order");
    Skeleton {
        circuit,
        order,
        events,
    }
}

/// Stochastic Bell interpretation: perfectly correlated bit source, wings
/// output their shared bit XOR their local input.
pub fn bell_stochastic() -> Interpretation {
    let xor = [
        1.0, 0.0, 0.0, 1.0, //
        0.0, 1.0, 1.0, 0.0,
    ];
    Interpretation::new(Backend::Stochastic)
        .with_payload(
            "C",
            Payload::Stochastic(
                StochasticBox::new(4, 1, vec![0.5, 0.0, 0.0, 0.5]).expect("joint source"),
            ),
        )
        .with_payload(
            "A",
            Payload::Stochastic(StochasticBox::new(2, 4, xor.to_vec()).expect("wing channel")),
        )
        .with_payload(
            "B",
            Payload::Stochastic(StochasticBox::new(2, 4, xor.to_vec()).expect("wing channel")),
        )
}

/// Quantum Bell interpretation: the source emits a maximally entangled pair;
/// each wing entangles its local input with its half via CNOT and measures
/// out the shared qubit.
pub fn bell_quantum() -> Interpretation {
    let re = |x: f64| Complex64::new(x, 0.0);
    // |Phi+> = (|00> + |11>)/sqrt(2) as a 4x1 Kraus column
    let amp = re(std::f64::consts::FRAC_1_SQRT_2);
    let phi_plus = CMatrix::new(4, 1, vec![amp, re(0.0), re(0.0), amp]).expect("Bell ket");
    // Wing channel 2x2 -> 2: CNOT (control = local input, target = shared
    // qubit), keep the target and measure out the control:
    // K_i = (<i| (x) I) CNOT, so the output is local XOR shared.
    let zero = re(0.0);
    let one = re(1.0);
    // CNOT on basis |c t>: |00>->|00>, |01>->|01>, |10>->|11>, |11>->|10>
    let cnot = [
        [one, zero, zero, zero],
        [zero, one, zero, zero],
        [zero, zero, zero, one],
        [zero, zero, one, zero],
    ];
    let kraus: Vec<CMatrix> = (0..2)
        .map(|i| {
            let mut data = Vec::with_capacity(2 * 4);
            for t_out in 0..2 {
                // row of CNOT for control i, target t_out
                data.extend_from_slice(&cnot[i * 2 + t_out]);
            }
            CMatrix::new(2, 4, data).expect("Kraus shape")
        })
        .collect();
    let wing = QuantumBox::new(kraus).expect("wing channel");
    Interpretation::new(Backend::Quantum)
        .with_payload(
            "C",
            Payload::Quantum(QuantumBox::new(vec![phi_plus]).expect("source state")),
        )
        .with_payload("A", Payload::Quantum(wing.clone()))
        .with_payload("B", Payload::Quantum(wing))
}

pub fn bell_interpretation(backend: Backend) -> Option<Interpretation> {
    match backend {
        Backend::Stochastic => Some(bell_stochastic()),
        Backend::Quantum => Some(bell_quantum()),
        Backend::Raw => None,
    }
}

/// Two-event chain `A -> B` in the raw backend whose payloads wire a Bell
/// pair and a Bell projection: `A` emits the pair on (local output, edge)
/// while ignoring its input, `B` projects (local input, edge) onto the
/// matched pair and emits a fixed state. `B`'s input then shows up verbatim
/// at `A`'s output.
pub fn teleport_skeleton() -> (Skeleton, Interpretation) {
    let order = CausalOrder::new(vec!["A", "B"], vec![("A", "B")]).expect("chain order");
    let typing = SkeletonTyping::uniform(&order, &qubit());
    let (circuit, events) = skeleton_from_order(&order, &typing).expect("typed chain");
    // A: legs [out_local, edge, in_local], entries delta(out_local, edge)
    let a_tensor = Tensor::from_real(vec![2, 2, 2], &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    // B: legs [out_local, in_local, edge], entries delta(in_local, edge) at
    // out_local = 0
    let b_tensor = Tensor::from_real(vec![2, 2, 2], &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let interp = Interpretation::new(Backend::Raw)
        .with_payload(
            "A",
            Payload::Raw(RawBox::new(a_tensor, 2).expect("2 output legs")),
        )
        .with_payload(
            "B",
            Payload::Raw(RawBox::new(b_tensor, 1).expect("1 output leg")),
        );
    (
        Skeleton {
            circuit,
            order,
            events,
        },
        interp,
    )
}
