//! Test-only oracles and generators shared by the causeway test suites.
//!
//! Everything here is deliberately written against the *definitions* rather
//! than the library's evaluation machinery: the brute-force evaluator sums
//! over explicit index assignments, reachability is Floyd-Warshall, and the
//! terminality oracles are plain column sums and Kraus completeness. Tests
//! compare the library against these independent routes.

use num_complex::Complex64;
use rand::Rng;

use causeway_core::diagram::{
    BoxKind, BoxSignature, Circuit, CircuitBuilder, InPort, OutPort, WireType,
};
use causeway_core::order::{skeleton_from_order, CausalOrder, Skeleton, SkeletonTyping};
use causeway_core::semantics::{
    Backend, CMatrix, Interpretation, Payload, QuantumBox, RawBox, StochasticBox,
};
use causeway_core::tensor::Tensor;

pub mod circuits;
pub mod naive;

/// Row-major flattening of a multi-index.
pub fn flatten(index: &[usize], dims: &[usize]) -> usize {
    index
        .iter()
        .zip(dims)
        .fold(0usize, |acc, (&i, &d)| acc * d + i)
}

/// Row-major unflattening.
pub fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut index = vec![0usize; dims.len()];
    for k in (0..dims.len()).rev() {
        index[k] = flat % dims[k];
        flat /= dims[k];
    }
    index
}

/// Reflexive-transitive closure by Floyd-Warshall, row-major `n x n`.
pub fn reachability_closure(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let mut reach = vec![false; n * n];
    for i in 0..n {
        reach[i * n + i] = true;
    }
    for &(a, b) in edges {
        reach[a * n + b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i * n + k] && reach[k * n + j] {
                    reach[i * n + j] = true;
                }
            }
        }
    }
    reach
}

/// Every DAG on `n` nodes whose edges respect the index order (`a < b`),
/// i.e. all subsets of the upper-triangular edge set.
pub fn all_index_ordered_dags(n: usize) -> Vec<Vec<(usize, usize)>> {
    let slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    (0u64..(1u64 << slots.len()))
        .map(|mask| {
            slots
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &e)| e)
                .collect()
        })
        .collect()
}

/// Random DAG with edges respecting the index order.
pub fn random_index_ordered_dag(
    rng: &mut impl Rng,
    n: usize,
    edge_prob: f64,
) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen_bool(edge_prob) {
                edges.push((a, b));
            }
        }
    }
    edges
}

// ---------------------------------------------------------------------------
// complex-matrix helpers

pub fn cmat(rows: usize, cols: usize, data: Vec<Complex64>) -> CMatrix {
    CMatrix::new(rows, cols, data).expect("test matrix dimensions")
}

pub fn cmat_real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    cmat(
        rows,
        cols,
        data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
    )
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.cols, b.rows);
    let mut data = vec![Complex64::new(0.0, 0.0); a.rows * b.cols];
    for i in 0..a.rows {
        for k in 0..a.cols {
            let x = a.get(i, k);
            for j in 0..b.cols {
                data[i * b.cols + j] += x * b.get(k, j);
            }
        }
    }
    cmat(a.rows, b.cols, data)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    let mut data = vec![Complex64::new(0.0, 0.0); a.rows * a.cols];
    for i in 0..a.rows {
        for j in 0..a.cols {
            data[j * a.rows + i] = a.get(i, j).conj();
        }
    }
    cmat(a.cols, a.rows, data)
}

pub fn identity_matrix(d: usize) -> CMatrix {
    let mut data = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        data[i * d + i] = Complex64::new(1.0, 0.0);
    }
    cmat(d, d, data)
}

pub fn mat_trace(a: &CMatrix) -> Complex64 {
    assert_eq!(a.rows, a.cols);
    (0..a.rows).map(|i| a.get(i, i)).sum()
}

/// Apply a Kraus channel to a density matrix the textbook way.
pub fn apply_channel(kraus: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let d_out = kraus[0].rows;
    let mut acc = cmat(d_out, d_out, vec![Complex64::new(0.0, 0.0); d_out * d_out]);
    for k in kraus {
        let term = matmul(&matmul(k, rho), &dagger(k));
        for i in 0..acc.data.len() {
            let v = acc.data[i] + term.data[i];
            acc.data[i] = v;
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// terminality oracles (algebraic route)

/// Largest deviation of a column sum from 1.
pub fn column_sum_deviation(m: &StochasticBox) -> f64 {
    (0..m.cols)
        .map(|c| {
            let s: f64 = (0..m.rows).map(|r| m.get(r, c)).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest entry deviation of the Kraus completeness sum from the identity.
pub fn kraus_completeness_deviation(q: &QuantumBox) -> f64 {
    let d = q.d_in();
    let mut sum = cmat(d, d, vec![Complex64::new(0.0, 0.0); d * d]);
    for k in &q.kraus {
        let term = matmul(&dagger(k), k);
        for i in 0..sum.data.len() {
            let v = sum.data[i] + term.data[i];
            sum.data[i] = v;
        }
    }
    let eye = identity_matrix(d);
    sum.data
        .iter()
        .zip(&eye.data)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// random payloads

pub fn random_complex_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    let data = (0..rows * cols)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    cmat(rows, cols, data)
}

/// Orthonormalize the columns in place (modified Gram-Schmidt, two passes).
/// Requires `rows >= cols`; panics if a column degenerates.
pub fn orthonormalize_columns(m: &mut CMatrix) {
    assert!(m.rows >= m.cols, "cannot orthonormalize a wide matrix");
    for j in 0..m.cols {
        for _pass in 0..2 {
            for i in 0..j {
                let mut dot = Complex64::new(0.0, 0.0);
                for r in 0..m.rows {
                    dot += m.get(r, i).conj() * m.get(r, j);
                }
                for r in 0..m.rows {
                    let v = m.get(r, j) - dot * m.get(r, i);
                    m.data[r * m.cols + j] = v;
                }
            }
        }
        let norm: f64 = (0..m.rows)
            .map(|r| m.get(r, j).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(norm > 1e-8, "degenerate column in random isometry");
        for r in 0..m.rows {
            let v = m.get(r, j) / norm;
            m.data[r * m.cols + j] = v;
        }
    }
}

/// A complete (trace-preserving) Kraus set: slices of a random isometry from
/// dimension `d_in` into `num_kraus * d_out`.
pub fn random_terminal_kraus(
    rng: &mut impl Rng,
    d_in: usize,
    d_out: usize,
    num_kraus: usize,
) -> QuantumBox {
    let k = num_kraus.max(d_in.div_ceil(d_out));
    let mut iso = random_complex_matrix(rng, k * d_out, d_in);
    orthonormalize_columns(&mut iso);
    let kraus = (0..k)
        .map(|block| {
            let mut data = Vec::with_capacity(d_out * d_in);
            for r in 0..d_out {
                for c in 0..d_in {
                    data.push(iso.get(block * d_out + r, c));
                }
            }
            cmat(d_out, d_in, data)
        })
        .collect();
    QuantumBox::new(kraus).expect("isometry slices form a Kraus set")
}

/// A random Kraus set with completeness deviation of at least `min_dev`
/// (scaled from a terminal one).
pub fn random_nonterminal_kraus(
    rng: &mut impl Rng,
    d_in: usize,
    d_out: usize,
    num_kraus: usize,
    min_dev: f64,
) -> (QuantumBox, f64) {
    let q = random_terminal_kraus(rng, d_in, d_out, num_kraus);
    let dev = rng.gen_range(min_dev..(min_dev + 0.5));
    let scale = Complex64::new((1.0 + dev).sqrt(), 0.0);
    let kraus = q
        .kraus
        .iter()
        .map(|k| cmat(k.rows, k.cols, k.data.iter().map(|&z| z * scale).collect()))
        .collect();
    (QuantumBox::new(kraus).expect("scaled Kraus set"), dev)
}

/// Random nonnegative matrix with every column summing to 1.
pub fn random_terminal_stochastic(rng: &mut impl Rng, rows: usize, cols: usize) -> StochasticBox {
    let mut data = vec![0.0f64; rows * cols];
    for c in 0..cols {
        let mut sum = 0.0;
        for r in 0..rows {
            let x: f64 = rng.gen_range(0.01..1.0);
            data[r * cols + c] = x;
            sum += x;
        }
        for r in 0..rows {
            data[r * cols + c] /= sum;
        }
    }
    StochasticBox::new(rows, cols, data).expect("normalized nonnegative matrix")
}

/// Random column-normalized matrix with one column perturbed so its sum
/// deviates from 1 by exactly the returned amount (at least `min_dev`).
pub fn random_nonterminal_stochastic(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    min_dev: f64,
) -> (StochasticBox, f64) {
    let m = random_terminal_stochastic(rng, rows, cols);
    let mut data = m.data.clone();
    let dev = rng.gen_range(min_dev..(min_dev + 0.5));
    let c = rng.gen_range(0..cols);
    let r = rng.gen_range(0..rows);
    data[r * cols + c] += dev;
    (
        StochasticBox::new(rows, cols, data).expect("perturbed matrix stays nonnegative"),
        dev,
    )
}

pub fn random_raw_tensor(rng: &mut impl Rng, shape: Vec<usize>) -> Tensor {
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    Tensor::new(shape, data)
}

/// Terminal payload of the requested backend for a box with the given wire
/// dims. For the raw backend this returns tensors that satisfy the all-ones
/// discard equation by construction (a column-normalized real tensor).
pub fn random_terminal_payload(
    rng: &mut impl Rng,
    backend: Backend,
    in_dims: &[usize],
    out_dims: &[usize],
) -> Payload {
    let d_in: usize = in_dims.iter().product();
    let d_out: usize = out_dims.iter().product();
    match backend {
        Backend::Stochastic => Payload::Stochastic(random_terminal_stochastic(rng, d_out, d_in)),
        Backend::Quantum => {
            let k = rng.gen_range(1..=3);
            Payload::Quantum(random_terminal_kraus(rng, d_in, d_out, k))
        }
        Backend::Raw => {
            let m = random_terminal_stochastic(rng, d_out, d_in);
            let mut shape: Vec<usize> = out_dims.to_vec();
            shape.extend_from_slice(in_dims);
            let tensor = Tensor::from_real(shape, &m.data);
            Payload::Raw(RawBox::new(tensor, out_dims.len()).expect("shape matches"))
        }
    }
}

// ---------------------------------------------------------------------------
// skeletons

/// Bell-scenario skeleton: source `C` covered by wings `A` and `B`, trivial
/// local ports at `C`, and random terminal payloads everywhere.
pub fn random_bell_skeleton(rng: &mut impl Rng, backend: Backend) -> (Skeleton, Interpretation) {
    let mut fresh_dim = || rng.gen_range(2..=3);
    let t = |d: usize| WireType::new(format!("T{d}"), d).expect("positive dim");

    let order = CausalOrder::new(vec!["C", "A", "B"], vec![("C", "A"), ("C", "B")])
        .expect("V order is acyclic");
    let mut typing = SkeletonTyping::default();
    let (d_ca, d_cb) = (fresh_dim(), fresh_dim());
    typing.edges.insert(("C".into(), "A".into()), t(d_ca));
    typing.edges.insert(("C".into(), "B".into()), t(d_cb));
    let (in_a, out_a, in_b, out_b) = (fresh_dim(), fresh_dim(), fresh_dim(), fresh_dim());
    typing.local_inputs.insert("A".into(), t(in_a));
    typing.local_outputs.insert("A".into(), t(out_a));
    typing.local_inputs.insert("B".into(), t(in_b));
    typing.local_outputs.insert("B".into(), t(out_b));

    let (circuit, events) = skeleton_from_order(&order, &typing).expect("typed V order");
    let skeleton = Skeleton {
        circuit,
        order,
        events,
    };

    let mut interp = Interpretation::new(backend);
    interp
        .insert_payload(
            "C",
            random_terminal_payload(rng, backend, &[], &[d_ca, d_cb]),
        )
        .unwrap();
    interp
        .insert_payload(
            "A",
            random_terminal_payload(rng, backend, &[in_a, d_ca], &[out_a]),
        )
        .unwrap();
    interp
        .insert_payload(
            "B",
            random_terminal_payload(rng, backend, &[in_b, d_cb], &[out_b]),
        )
        .unwrap();
    (skeleton, interp)
}

/// Uniformly-typed skeleton over a random causal order on `n` events with
/// terminal payloads; event labels are `E0..`.
pub fn random_terminal_skeleton(
    rng: &mut impl Rng,
    backend: Backend,
    n: usize,
    dim: usize,
    edge_prob: f64,
) -> (Skeleton, Interpretation) {
    let labels: Vec<String> = (0..n).map(|i| format!("E{i}")).collect();
    let edges = random_index_ordered_dag(rng, n, edge_prob);
    let covers: Vec<(String, String)> = edges
        .iter()
        .map(|&(a, b)| (labels[a].clone(), labels[b].clone()))
        .collect();
    let order = CausalOrder::new(labels.clone(), covers).expect("index-ordered DAG is acyclic");
    let t = WireType::new(format!("T{dim}"), dim).expect("positive dim");
    let typing = SkeletonTyping::uniform(&order, &t);
    let (circuit, events) = skeleton_from_order(&order, &typing).expect("uniform typing is total");

    let mut interp = Interpretation::new(backend);
    for binding in events.entries() {
        let sig = circuit.instance(binding.box_id).signature();
        let in_dims: Vec<usize> = sig.inputs().iter().map(|t| t.dim()).collect();
        let out_dims: Vec<usize> = sig.outputs().iter().map(|t| t.dim()).collect();
        interp
            .insert_payload(
                binding.event.clone(),
                random_terminal_payload(rng, backend, &in_dims, &out_dims),
            )
            .unwrap();
    }
    let skeleton = Skeleton {
        circuit,
        order,
        events,
    };
    (skeleton, interp)
}

// ---------------------------------------------------------------------------
// circuits straight from DAGs (for order-theory oracles)

/// Circuit whose boxes and wires mirror a DAG: box `b{i}` has one input port
/// per incoming edge and one output port per outgoing edge. Multi-edges get
/// distinct ports.
pub fn circuit_from_dag(n: usize, edges: &[(usize, usize)], t: &WireType) -> Circuit {
    let mut in_count = vec![0usize; n];
    let mut out_count = vec![0usize; n];
    let mut slots = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        slots.push((a, out_count[a], b, in_count[b]));
        out_count[a] += 1;
        in_count[b] += 1;
    }
    let mut builder = CircuitBuilder::new();
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let sig = BoxSignature::generic(
            format!("b{i}"),
            vec![t.clone(); in_count[i]],
            vec![t.clone(); out_count[i]],
        );
        ids.push(
            builder
                .add_box(format!("b{i}"), sig)
                .expect("unique labels"),
        );
    }
    for (a, out_slot, b, in_slot) in slots {
        builder.connect(
            OutPort {
                box_id: ids[a],
                index: out_slot,
            },
            InPort {
                box_id: ids[b],
                index: in_slot,
            },
        );
    }
    builder.build().expect("DAG wiring is acyclic")
}

/// Signature kinds that evaluation treats specially, for quick test checks.
pub fn is_special(kind: BoxKind) -> bool {
    kind != BoxKind::Generic
}

/// A uniformly random valid topological order: run Kahn's algorithm picking
/// a random ready box each step.
pub fn random_topological_order(
    rng: &mut impl Rng,
    c: &Circuit,
) -> Vec<causeway_core::diagram::BoxId> {
    let n = c.box_count();
    let mut indegree = vec![0usize; n];
    for w in c.wires() {
        indegree[w.to.box_id.0] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&b| indegree[b] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        let pick = rng.gen_range(0..ready.len());
        let b = ready.swap_remove(pick);
        order.push(causeway_core::diagram::BoxId(b));
        for w in c.wires() {
            if w.from.box_id.0 == b {
                let t = w.to.box_id.0;
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(t);
                }
            }
        }
    }
    assert_eq!(order.len(), n, "circuit must be acyclic");
    order
}
