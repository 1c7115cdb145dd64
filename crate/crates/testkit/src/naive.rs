//! Brute-force circuit evaluation: sum over every assignment of every wire
//! and boundary index, multiplying box entries computed straight from the
//! payload definitions. Exponential, but an entirely independent route from
//! the library's pairwise contraction engine.

use num_complex::Complex64;

use causeway_core::diagram::{BoxKind, BoxSignature, Circuit, InPort, OutPort};
use causeway_core::semantics::{Backend, Interpretation, Payload};
use causeway_core::tensor::Tensor;

use crate::{flatten, unflatten};

fn delta(a: usize, b: usize) -> Complex64 {
    Complex64::new(if a == b { 1.0 } else { 0.0 }, 0.0)
}

/// Entry of the tensor interpreting `sig`, at per-wire leg values `outs` /
/// `ins`, computed from first principles per backend.
fn box_entry(
    interp: &Interpretation,
    sig: &BoxSignature,
    outs: &[usize],
    ins: &[usize],
) -> Complex64 {
    let backend = interp.backend();
    match sig.kind() {
        BoxKind::Generic => {
            let payload = interp.payload(sig.name()).expect("payload present");
            match payload {
                Payload::Stochastic(m) => {
                    let out_dims: Vec<usize> = sig.outputs().iter().map(|t| t.dim()).collect();
                    let in_dims: Vec<usize> = sig.inputs().iter().map(|t| t.dim()).collect();
                    let row = flatten(outs, &out_dims);
                    let col = flatten(ins, &in_dims);
                    Complex64::new(m.get(row, col), 0.0)
                }
                Payload::Quantum(q) => {
                    // Split each fused leg value v on a dim-d wire into its
                    // ket (v / d) and bra (v % d) parts, then flatten kets
                    // and bras over the composite space.
                    let out_dims: Vec<usize> = sig.outputs().iter().map(|t| t.dim()).collect();
                    let in_dims: Vec<usize> = sig.inputs().iter().map(|t| t.dim()).collect();
                    let kets = |vals: &[usize], dims: &[usize]| -> (usize, usize) {
                        let ket: Vec<usize> = vals.iter().zip(dims).map(|(&v, &d)| v / d).collect();
                        let bra: Vec<usize> = vals.iter().zip(dims).map(|(&v, &d)| v % d).collect();
                        (flatten(&ket, dims), flatten(&bra, dims))
                    };
                    let (i, j) = kets(outs, &out_dims);
                    let (k, l) = kets(ins, &in_dims);
                    q.kraus
                        .iter()
                        .map(|m| m.get(i, k) * m.get(j, l).conj())
                        .sum()
                }
                Payload::Raw(r) => {
                    let mut idx = outs.to_vec();
                    idx.extend_from_slice(ins);
                    r.tensor.get(&idx)
                }
            }
        }
        BoxKind::Discard => {
            let t = &sig.inputs()[0];
            match backend {
                Backend::Quantum => {
                    let d = t.dim();
                    delta(ins[0] / d, ins[0] % d)
                }
                _ => interp.discard_covector(t).get(&[ins[0]]),
            }
        }
        BoxKind::Identity => delta(outs[0], ins[0]),
        BoxKind::Swap => {
            // outs = [b', a'], ins = [a, b]
            delta(outs[1], ins[0]) * delta(outs[0], ins[1])
        }
        BoxKind::Cup => delta(outs[0], outs[1]),
        BoxKind::Cap => delta(ins[0], ins[1]),
    }
}

/// Evaluate `c` by explicit summation. Result legs: open outputs then open
/// inputs, in boundary order, matching the engine's convention.
pub fn naive_evaluate(c: &Circuit, interp: &Interpretation) -> Tensor {
    let backend = interp.backend();
    let wire_dims: Vec<usize> = c
        .wires()
        .iter()
        .map(|w| backend.leg_dim(c.output_type(w.from)))
        .collect();
    let out_dims: Vec<usize> = c
        .open_outputs()
        .iter()
        .map(|&p| backend.leg_dim(c.output_type(p)))
        .collect();
    let in_dims: Vec<usize> = c
        .open_inputs()
        .iter()
        .map(|&p| backend.leg_dim(c.input_type(p)))
        .collect();

    let boundary_dims: Vec<usize> = out_dims.iter().chain(&in_dims).copied().collect();
    let boundary_len: usize = boundary_dims.iter().product();
    let wire_len: usize = wire_dims.iter().product();

    let mut data = vec![Complex64::new(0.0, 0.0); boundary_len];
    for (b_flat, slot) in data.iter_mut().enumerate() {
        let boundary = unflatten(b_flat, &boundary_dims);
        let (out_vals, in_vals) = boundary.split_at(out_dims.len());
        let mut total = Complex64::new(0.0, 0.0);
        for w_flat in 0..wire_len.max(1) {
            let wire_vals = unflatten(w_flat, &wire_dims);
            let mut product = Complex64::new(1.0, 0.0);
            for b in c.box_ids() {
                let sig = c.instance(b).signature();
                let outs: Vec<usize> = (0..sig.outputs().len())
                    .map(|k| {
                        let port = OutPort {
                            box_id: b,
                            index: k,
                        };
                        match c.wire_index_out_of(port) {
                            Some(w) => wire_vals[w],
                            None => {
                                let pos = c
                                    .open_outputs()
                                    .iter()
                                    .position(|&p| p == port)
                                    .expect("open port on boundary");
                                out_vals[pos]
                            }
                        }
                    })
                    .collect();
                let ins: Vec<usize> = (0..sig.inputs().len())
                    .map(|k| {
                        let port = InPort {
                            box_id: b,
                            index: k,
                        };
                        match c.wire_index_into(port) {
                            Some(w) => wire_vals[w],
                            None => {
                                let pos = c
                                    .open_inputs()
                                    .iter()
                                    .position(|&p| p == port)
                                    .expect("open port on boundary");
                                in_vals[pos]
                            }
                        }
                    })
                    .collect();
                product *= box_entry(interp, sig, &outs, &ins);
                if product == Complex64::new(0.0, 0.0) {
                    break;
                }
            }
            total += product;
        }
        *slot = total;
    }
    Tensor::new(boundary_dims, data)
}
