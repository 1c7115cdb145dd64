//! Random circuit generation with terminal payloads, sized so that
//! exhaustive-subset verification stays fast: the generator keeps a running
//! cap on open ports plus dangling wires, which also bounds the contraction
//! frontier during evaluation.

use rand::Rng;

use causeway_core::diagram::{BoxSignature, Circuit, CircuitBuilder, InPort, OutPort, WireType};
use causeway_core::semantics::{Backend, Interpretation};

use crate::random_terminal_payload;

#[derive(Debug, Clone)]
pub struct RandomCircuitConfig {
    pub min_boxes: usize,
    pub max_boxes: usize,
    /// Candidate wire dimensions.
    pub dims: Vec<usize>,
    /// Cap on open inputs + (dangling or open) outputs at any time.
    pub max_boundary: usize,
    /// Probability of wiring an input to a dangling output when allowed.
    pub wire_prob: f64,
}

impl RandomCircuitConfig {
    pub fn stochastic_desk() -> Self {
        RandomCircuitConfig {
            min_boxes: 1,
            max_boxes: 8,
            dims: vec![2, 3],
            max_boundary: 6,
            wire_prob: 0.65,
        }
    }

    pub fn quantum_desk() -> Self {
        RandomCircuitConfig {
            min_boxes: 1,
            max_boxes: 5,
            dims: vec![2, 3],
            max_boundary: 4,
            wire_prob: 0.7,
        }
    }
}

fn wire_type(dim: usize) -> WireType {
    WireType::new(format!("T{dim}"), dim).expect("positive dim")
}

/// Random DAG-shaped circuit with one fresh generic signature per box
/// (`f0`, `f1`, ...) and a terminal payload for each in the given backend.
pub fn random_terminal_circuit(
    rng: &mut impl Rng,
    backend: Backend,
    cfg: &RandomCircuitConfig,
) -> (Circuit, Interpretation) {
    let n = rng.gen_range(cfg.min_boxes..=cfg.max_boxes);
    let mut builder = CircuitBuilder::new();
    let mut interp = Interpretation::new(backend);
    // Outputs produced so far and not yet consumed: (port, dim).
    let mut dangling: Vec<(OutPort, usize)> = Vec::new();
    let mut open_ins = 0usize;

    for j in 0..n {
        let mut n_in = rng.gen_range(0..=2);
        let mut n_out = rng.gen_range(0..=2);
        if n_in == 0 && n_out == 0 {
            if rng.gen_bool(0.5) {
                n_in = 1;
            } else {
                n_out = 1;
            }
        }

        // (wired source, dim) per accepted input slot.
        let mut in_specs: Vec<(Option<OutPort>, usize)> = Vec::new();
        for _ in 0..n_in {
            let boundary = open_ins + dangling.len();
            if !dangling.is_empty() && (boundary >= cfg.max_boundary || rng.gen_bool(cfg.wire_prob))
            {
                let k = rng.gen_range(0..dangling.len());
                let (port, dim) = dangling.swap_remove(k);
                in_specs.push((Some(port), dim));
            } else if boundary < cfg.max_boundary {
                let dim = cfg.dims[rng.gen_range(0..cfg.dims.len())];
                open_ins += 1;
                in_specs.push((None, dim));
            }
        }
        let room = cfg.max_boundary.saturating_sub(open_ins + dangling.len());
        n_out = n_out.min(room);
        if in_specs.is_empty() && n_out == 0 && room > 0 {
            n_out = 1;
        }
        let out_dims: Vec<usize> = (0..n_out)
            .map(|_| cfg.dims[rng.gen_range(0..cfg.dims.len())])
            .collect();
        let in_dims: Vec<usize> = in_specs.iter().map(|(_, d)| *d).collect();

        let name = format!("f{j}");
        let sig = BoxSignature::generic(
            name.clone(),
            in_dims.iter().map(|&d| wire_type(d)).collect(),
            out_dims.iter().map(|&d| wire_type(d)).collect(),
        );
        let id = builder.add_box(name.clone(), sig).expect("fresh label");
        for (slot, (source, _)) in in_specs.iter().enumerate() {
            if let Some(port) = source {
                builder.connect(
                    *port,
                    InPort {
                        box_id: id,
                        index: slot,
                    },
                );
            }
        }
        for (slot, &dim) in out_dims.iter().enumerate() {
            dangling.push((
                OutPort {
                    box_id: id,
                    index: slot,
                },
                dim,
            ));
        }
        interp
            .insert_payload(
                name,
                random_terminal_payload(rng, backend, &in_dims, &out_dims),
            )
            .expect("backend matches");
    }

    let circuit = builder.build().expect("generator only wires forward");
    (circuit, interp)
}

/// Single-box circuit for a generic signature with the given wire dims.
pub fn single_box_circuit(name: &str, in_dims: &[usize], out_dims: &[usize]) -> Circuit {
    let sig = BoxSignature::generic(
        name.to_string(),
        in_dims.iter().map(|&d| wire_type(d)).collect(),
        out_dims.iter().map(|&d| wire_type(d)).collect(),
    );
    Circuit::single(sig)
}
