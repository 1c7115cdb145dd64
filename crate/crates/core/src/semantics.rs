//! Numerical semantics for circuits in three backends.
//!
//! * `Stochastic`: boxes are column-stochastic-shaped nonnegative matrices on
//!   probability vectors; discarding sums over values.
//! * `Quantum`: boxes are completely positive maps given by Kraus operators,
//!   acting on density matrices flattened row-major (ket index then bra
//!   index), so each wire of Hilbert dimension `d` carries a tensor leg of
//!   size `d^2`; discarding is the trace.
//! * `Raw`: boxes are arbitrary complex tensors; discarding defaults to the
//!   all-ones covector but may be overridden per wire type. This backend
//!   deliberately admits non-terminal generators such as cup and cap.
//!
//! A circuit evaluates to a [`Tensor`] over its open outputs then open
//! inputs, in boundary order, by contracting internal wires in topological
//! order. The result does not depend on which topological order is used.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::diagram::{BoxId, BoxKind, BoxSignature, Circuit, WireType};
use crate::tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no payload supplied for box `{0}`")]
    MissingPayload(String),
    #[error("payload for `{box_name}` is for the {found} backend, run uses {expected}")]
    PayloadBackendMismatch {
        box_name: String,
        expected: Backend,
        found: Backend,
    },
    #[error("shape mismatch for `{box_name}`: {detail}")]
    ShapeMismatch { box_name: String, detail: String },
    #[error("{kind} boxes are not interpretable in the {backend} backend")]
    BackendUnsupported { kind: BoxKind, backend: Backend },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("supplied box order is not a topological order of the circuit")]
    InvalidTopologicalOrder,
}

/// Which numerical theory interprets the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Stochastic,
    Quantum,
    Raw,
}

impl Backend {
    /// Tensor-leg size carried by one wire of the given type.
    pub fn leg_dim(&self, t: &WireType) -> usize {
        match self {
            Backend::Quantum => t.dim() * t.dim(),
            _ => t.dim(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Stochastic => "stochastic",
            Backend::Quantum => "quantum",
            Backend::Raw => "raw",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stochastic" => Ok(Backend::Stochastic),
            "quantum" => Ok(Backend::Quantum),
            "raw" => Ok(Backend::Raw),
            other => Err(format!("unknown backend `{other}`")),
        }
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, EvalError> {
        if data.len() != rows * cols {
            return Err(EvalError::InvalidPayload(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }
}

/// Nonnegative real matrix of shape (product of output dims) x (product of
/// input dims). Terminal exactly when every column sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticBox {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl StochasticBox {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, EvalError> {
        if data.len() != rows * cols {
            return Err(EvalError::InvalidPayload(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| x.is_nan() || **x < 0.0) {
            return Err(EvalError::InvalidPayload(format!(
                "stochastic entries must be nonnegative, got {x}"
            )));
        }
        Ok(StochasticBox { rows, cols, data })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// A completely positive map presented by Kraus operators of shape
/// d_out x d_in. Terminal exactly when the Kraus set is complete
/// (trace-preserving).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumBox {
    pub kraus: Vec<CMatrix>,
}

impl QuantumBox {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self, EvalError> {
        let first = kraus
            .first()
            .ok_or_else(|| EvalError::InvalidPayload("empty Kraus set".into()))?;
        let (rows, cols) = (first.rows, first.cols);
        if kraus.iter().any(|k| k.rows != rows || k.cols != cols) {
            return Err(EvalError::InvalidPayload(
                "Kraus operators must share one shape".into(),
            ));
        }
        Ok(QuantumBox { kraus })
    }

    pub fn d_out(&self) -> usize {
        self.kraus[0].rows
    }

    pub fn d_in(&self) -> usize {
        self.kraus[0].cols
    }
}

/// An arbitrary complex tensor with legs ordered outputs-then-inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBox {
    pub tensor: Tensor,
    pub num_outputs: usize,
}

impl RawBox {
    pub fn new(tensor: Tensor, num_outputs: usize) -> Result<Self, EvalError> {
        if num_outputs > tensor.rank() {
            return Err(EvalError::InvalidPayload(format!(
                "{num_outputs} output legs exceed tensor rank {}",
                tensor.rank()
            )));
        }
        Ok(RawBox {
            tensor,
            num_outputs,
        })
    }
}

/// Backend-specific numerical content of one generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Stochastic(StochasticBox),
    Quantum(QuantumBox),
    Raw(RawBox),
}

impl Payload {
    pub fn backend(&self) -> Backend {
        match self {
            Payload::Stochastic(_) => Backend::Stochastic,
            Payload::Quantum(_) => Backend::Quantum,
            Payload::Raw(_) => Backend::Raw,
        }
    }
}

/// Assignment of payloads to box (signature) names for one backend, plus any
/// per-type discard overrides for the raw backend.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    backend: Backend,
    payloads: BTreeMap<String, Payload>,
    raw_discards: BTreeMap<String, Vec<Complex64>>,
}

impl Interpretation {
    pub fn new(backend: Backend) -> Self {
        Interpretation {
            backend,
            payloads: BTreeMap::new(),
            raw_discards: BTreeMap::new(),
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn insert_payload(
        &mut self,
        name: impl Into<String>,
        payload: Payload,
    ) -> Result<(), EvalError> {
        let name = name.into();
        if payload.backend() != self.backend {
            return Err(EvalError::PayloadBackendMismatch {
                box_name: name,
                expected: self.backend,
                found: payload.backend(),
            });
        }
        self.payloads.insert(name, payload);
        Ok(())
    }

    pub fn with_payload(mut self, name: impl Into<String>, payload: Payload) -> Self {
        self.insert_payload(name, payload)
            .expect("payload backend must match interpretation backend");
        self
    }

    pub fn payload(&self, name: &str) -> Option<&Payload> {
        self.payloads.get(name)
    }

    pub fn payload_names(&self) -> impl Iterator<Item = &str> {
        self.payloads.keys().map(String::as_str)
    }

    /// Override the raw-backend discard covector for one wire type.
    pub fn set_raw_discard(
        &mut self,
        t: &WireType,
        covector: Vec<Complex64>,
    ) -> Result<(), EvalError> {
        if covector.len() != t.dim() {
            return Err(EvalError::InvalidPayload(format!(
                "discard covector for `{}` must have length {}, got {}",
                t.name(),
                t.dim(),
                covector.len()
            )));
        }
        self.raw_discards.insert(t.name().to_string(), covector);
        Ok(())
    }

    /// The discard covector this interpretation uses for one wire of type
    /// `t`: all-ones (stochastic, raw default), or the trace functional on
    /// flattened density matrices (quantum).
    pub fn discard_covector(&self, t: &WireType) -> Tensor {
        if self.backend == Backend::Raw {
            if let Some(custom) = self.raw_discards.get(t.name()) {
                return Tensor::new(vec![t.dim()], custom.clone());
            }
        }
        discard_tensor(self.backend, t)
    }
}

/// The designated discarding effect on one wire, as a covector tensor:
/// summation over values (stochastic), the trace functional (quantum), or
/// all-ones (raw default).
pub fn discard_tensor(backend: Backend, t: &WireType) -> Tensor {
    match backend {
        Backend::Stochastic | Backend::Raw => Tensor::ones(vec![t.dim()]),
        Backend::Quantum => {
            let d = t.dim();
            let mut data = vec![Complex64::new(0.0, 0.0); d * d];
            for i in 0..d {
                data[i * d + i] = Complex64::new(1.0, 0.0);
            }
            Tensor::new(vec![d * d], data)
        }
    }
}

fn dims(backend: Backend, types: &[WireType]) -> Vec<usize> {
    types.iter().map(|t| backend.leg_dim(t)).collect()
}

/// Superoperator tensor of a Kraus set, with one fused (ket, bra) leg per
/// wire: legs ordered output wires then input wires.
fn quantum_superop_tensor(q: &QuantumBox, out_dims: &[usize], in_dims: &[usize]) -> Tensor {
    let d_out: usize = out_dims.iter().product();
    let d_in: usize = in_dims.iter().product();
    let mut s = Tensor::zeros(vec![d_out, d_out, d_in, d_in]);
    for k in &q.kraus {
        for i in 0..d_out {
            for j in 0..d_out {
                for a in 0..d_in {
                    for b in 0..d_in {
                        let v = s.get(&[i, j, a, b]) + k.get(i, a) * k.get(j, b).conj();
                        s.set(&[i, j, a, b], v);
                    }
                }
            }
        }
    }
    // Split the grouped ket/bra axes per wire, interleave, and fuse so each
    // wire carries a single d^2 leg.
    let p = out_dims.len();
    let q_len = in_dims.len();
    let mut split = out_dims.to_vec();
    split.extend_from_slice(out_dims);
    split.extend_from_slice(in_dims);
    split.extend_from_slice(in_dims);
    let s = s.reshape(split);
    let mut perm = Vec::with_capacity(2 * (p + q_len));
    for t in 0..p {
        perm.push(t);
        perm.push(p + t);
    }
    for t in 0..q_len {
        perm.push(2 * p + t);
        perm.push(2 * p + q_len + t);
    }
    let s = s.permute(&perm);
    let mut fused: Vec<usize> = out_dims.iter().map(|d| d * d).collect();
    fused.extend(in_dims.iter().map(|d| d * d));
    s.reshape(fused)
}

/// The tensor interpreting one box: payload-driven for generic boxes,
/// backend-defined for the special kinds. Legs are ordered output ports then
/// input ports, one leg per wire.
pub fn box_tensor(interp: &Interpretation, sig: &BoxSignature) -> Result<Tensor, EvalError> {
    let backend = interp.backend();
    let out_dims = dims(backend, sig.outputs());
    let in_dims = dims(backend, sig.inputs());
    match sig.kind() {
        BoxKind::Generic => {
            let payload = interp
                .payload(sig.name())
                .ok_or_else(|| EvalError::MissingPayload(sig.name().to_string()))?;
            match (payload, backend) {
                (Payload::Stochastic(m), Backend::Stochastic) => {
                    let rows: usize = out_dims.iter().product();
                    let cols: usize = in_dims.iter().product();
                    if m.rows != rows || m.cols != cols {
                        return Err(EvalError::ShapeMismatch {
                            box_name: sig.name().to_string(),
                            detail: format!(
                                "expected {rows}x{cols} matrix, got {}x{}",
                                m.rows, m.cols
                            ),
                        });
                    }
                    let mut shape = out_dims;
                    shape.extend_from_slice(&in_dims);
                    Ok(Tensor::from_real(shape, &m.data))
                }
                (Payload::Quantum(q), Backend::Quantum) => {
                    let d_out: usize = sig.outputs().iter().map(|t| t.dim()).product();
                    let d_in: usize = sig.inputs().iter().map(|t| t.dim()).product();
                    if q.d_out() != d_out || q.d_in() != d_in {
                        return Err(EvalError::ShapeMismatch {
                            box_name: sig.name().to_string(),
                            detail: format!(
                                "expected {d_out}x{d_in} Kraus operators, got {}x{}",
                                q.d_out(),
                                q.d_in()
                            ),
                        });
                    }
                    let hilbert_out: Vec<usize> = sig.outputs().iter().map(|t| t.dim()).collect();
                    let hilbert_in: Vec<usize> = sig.inputs().iter().map(|t| t.dim()).collect();
                    Ok(quantum_superop_tensor(q, &hilbert_out, &hilbert_in))
                }
                (Payload::Raw(r), Backend::Raw) => {
                    let mut expected = out_dims;
                    expected.extend_from_slice(&in_dims);
                    if r.tensor.shape() != expected.as_slice()
                        || r.num_outputs != sig.outputs().len()
                    {
                        return Err(EvalError::ShapeMismatch {
                            box_name: sig.name().to_string(),
                            detail: format!(
                                "expected tensor shape {:?} with {} output legs, got {:?} with {}",
                                expected,
                                sig.outputs().len(),
                                r.tensor.shape(),
                                r.num_outputs
                            ),
                        });
                    }
                    Ok(r.tensor.clone())
                }
                (p, b) => Err(EvalError::PayloadBackendMismatch {
                    box_name: sig.name().to_string(),
                    expected: b,
                    found: p.backend(),
                }),
            }
        }
        BoxKind::Discard => Ok(interp.discard_covector(&sig.inputs()[0])),
        BoxKind::Identity => Ok(Tensor::delta(backend.leg_dim(&sig.inputs()[0]))),
        BoxKind::Swap => {
            let da = backend.leg_dim(&sig.inputs()[0]);
            let db = backend.leg_dim(&sig.inputs()[1]);
            // legs: out[0]=b', out[1]=a', in[0]=a, in[1]=b
            let t = Tensor::delta(db).outer(&Tensor::delta(da)); // [b', b, a', a]
            Ok(t.permute(&[0, 2, 3, 1]))
        }
        BoxKind::Cup | BoxKind::Cap => {
            if backend != Backend::Raw {
                return Err(EvalError::BackendUnsupported {
                    kind: sig.kind(),
                    backend,
                });
            }
            let d = match sig.kind() {
                BoxKind::Cup => sig.outputs()[0].dim(),
                _ => sig.inputs()[0].dim(),
            };
            Ok(Tensor::delta(d))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Leg {
    Wire(usize),
    OpenIn(usize),
    OpenOut(usize),
}

fn box_legs(c: &Circuit, b: BoxId) -> (Vec<Leg>, Vec<Leg>) {
    let sig = c.instance(b).signature();
    let outs = (0..sig.outputs().len())
        .map(|k| {
            let port = crate::diagram::OutPort {
                box_id: b,
                index: k,
            };
            match c.wire_index_out_of(port) {
                Some(w) => Leg::Wire(w),
                None => Leg::OpenOut(
                    c.open_outputs()
                        .iter()
                        .position(|&p| p == port)
                        .expect("unwired port is on the boundary"),
                ),
            }
        })
        .collect();
    let ins = (0..sig.inputs().len())
        .map(|k| {
            let port = crate::diagram::InPort {
                box_id: b,
                index: k,
            };
            match c.wire_index_into(port) {
                Some(w) => Leg::Wire(w),
                None => Leg::OpenIn(
                    c.open_inputs()
                        .iter()
                        .position(|&p| p == port)
                        .expect("unwired port is on the boundary"),
                ),
            }
        })
        .collect();
    (outs, ins)
}

/// Topological order tuned for contraction cost: among ready boxes, fold the
/// one with the smallest output-minus-input arity first (effects and discards
/// shrink the accumulated tensor), breaking ties by box index.
fn evaluation_order(c: &Circuit) -> Vec<BoxId> {
    let n = c.box_count();
    let mut indegree = vec![0usize; n];
    for w in c.wires() {
        indegree[w.to.box_id.0] += 1;
    }
    let score = |b: usize| {
        let sig = c.instance(BoxId(b)).signature();
        (
            sig.outputs().len() as isize - sig.inputs().len() as isize,
            b,
        )
    };
    let mut ready: Vec<usize> = (0..n).filter(|&b| indegree[b] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        let pos = ready
            .iter()
            .enumerate()
            .min_by_key(|(_, &b)| score(b))
            .map(|(i, _)| i)
            .expect("ready set is non-empty");
        let b = ready.swap_remove(pos);
        order.push(BoxId(b));
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
    debug_assert_eq!(order.len(), n, "validated circuits are acyclic");
    order
}

/// Evaluate a circuit to its tensor. Legs of the result: open outputs then
/// open inputs, in boundary order.
pub fn evaluate(c: &Circuit, interp: &Interpretation) -> Result<Tensor, EvalError> {
    evaluate_with_order(c, interp, &evaluation_order(c))
}

/// Evaluate contracting boxes in the given topological order; any valid
/// order yields the same tensor up to floating-point roundoff.
pub fn evaluate_with_order(
    c: &Circuit,
    interp: &Interpretation,
    order: &[BoxId],
) -> Result<Tensor, EvalError> {
    // The order must visit every box once, producers before consumers.
    if order.len() != c.box_count() {
        return Err(EvalError::InvalidTopologicalOrder);
    }
    let mut position = vec![usize::MAX; c.box_count()];
    for (i, b) in order.iter().enumerate() {
        if b.0 >= c.box_count() || position[b.0] != usize::MAX {
            return Err(EvalError::InvalidTopologicalOrder);
        }
        position[b.0] = i;
    }
    for w in c.wires() {
        if position[w.from.box_id.0] >= position[w.to.box_id.0] {
            return Err(EvalError::InvalidTopologicalOrder);
        }
    }

    let mut acc = Tensor::scalar(Complex64::new(1.0, 0.0));
    let mut acc_legs: Vec<Leg> = Vec::new();
    for &b in order {
        let tensor = box_tensor(interp, c.instance(b).signature())?;
        let (out_legs, in_legs) = box_legs(c, b);
        let legs: Vec<Leg> = out_legs.iter().chain(in_legs.iter()).copied().collect();
        let mut axes_acc = Vec::new();
        let mut axes_box = Vec::new();
        for (i, leg) in acc_legs.iter().enumerate() {
            if let Some(j) = legs.iter().position(|l| l == leg) {
                axes_acc.push(i);
                axes_box.push(j);
            }
        }
        acc = acc.contract(&axes_acc, &tensor, &axes_box);
        let kept_acc: Vec<Leg> = acc_legs
            .iter()
            .enumerate()
            .filter(|(i, _)| !axes_acc.contains(i))
            .map(|(_, l)| *l)
            .collect();
        let kept_box: Vec<Leg> = legs
            .iter()
            .enumerate()
            .filter(|(i, _)| !axes_box.contains(i))
            .map(|(_, l)| *l)
            .collect();
        acc_legs = kept_acc.into_iter().chain(kept_box).collect();
    }

    // Permute to the canonical boundary order.
    let mut target: Vec<Leg> = (0..c.open_outputs().len()).map(Leg::OpenOut).collect();
    target.extend((0..c.open_inputs().len()).map(Leg::OpenIn));
    debug_assert_eq!(acc_legs.len(), target.len());
    let perm: Vec<usize> = target
        .iter()
        .map(|t| {
            acc_legs
                .iter()
                .position(|l| l == t)
                .expect("every boundary leg survives contraction")
        })
        .collect();
    Ok(acc.permute(&perm))
}

/// Witnessed outcome of a terminality check.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalityReport {
    pub terminal: bool,
    pub max_deviation: f64,
    /// Multi-index (over input legs) where the worst deviation occurs.
    pub worst_input: Vec<usize>,
}

fn terminality_from_tensor(
    tensor: &Tensor,
    num_outputs: usize,
    out_discards: &[Tensor],
    in_discards: &[Tensor],
    tol: f64,
) -> TerminalityReport {
    debug_assert_eq!(num_outputs, out_discards.len());
    let mut lhs = tensor.clone();
    for d in out_discards {
        lhs = lhs.contract(&[0], d, &[0]);
    }
    let mut rhs = Tensor::scalar(Complex64::new(1.0, 0.0));
    for d in in_discards {
        rhs = rhs.outer(d);
    }
    let rhs = rhs.reshape(lhs.shape().to_vec());
    let mut max_deviation = 0.0f64;
    let mut worst_flat = 0usize;
    for (i, (a, b)) in lhs.data().iter().zip(rhs.data()).enumerate() {
        let dev = (a - b).norm();
        if dev > max_deviation {
            max_deviation = dev;
            worst_flat = i;
        }
    }
    let mut worst_input = Vec::with_capacity(lhs.rank());
    let mut rem = worst_flat;
    for k in 0..lhs.rank() {
        let block: usize = lhs.shape()[k + 1..].iter().product();
        worst_input.push(rem / block);
        rem %= block.max(1);
    }
    TerminalityReport {
        terminal: max_deviation <= tol,
        max_deviation,
        worst_input,
    }
}

/// Check one payload for terminality by direct contraction: discard every
/// output, compare against discards on every input. Uses the payload
/// backend's default discards, with inputs and outputs each treated as one
/// fused leg.
pub fn is_terminal(payload: &Payload, tol: f64) -> TerminalityReport {
    match payload {
        Payload::Stochastic(m) => {
            let tensor = Tensor::from_real(vec![m.rows, m.cols], &m.data);
            terminality_from_tensor(
                &tensor,
                1,
                &[Tensor::ones(vec![m.rows])],
                &[Tensor::ones(vec![m.cols])],
                tol,
            )
        }
        Payload::Quantum(q) => {
            let trace = |d: usize| {
                let mut data = vec![Complex64::new(0.0, 0.0); d * d];
                for i in 0..d {
                    data[i * d + i] = Complex64::new(1.0, 0.0);
                }
                Tensor::new(vec![d * d], data)
            };
            let tensor = quantum_superop_tensor(q, &[q.d_out()], &[q.d_in()]);
            terminality_from_tensor(&tensor, 1, &[trace(q.d_out())], &[trace(q.d_in())], tol)
        }
        Payload::Raw(r) => {
            let out_discards: Vec<Tensor> = r.tensor.shape()[..r.num_outputs]
                .iter()
                .map(|&d| Tensor::ones(vec![d]))
                .collect();
            let in_discards: Vec<Tensor> = r.tensor.shape()[r.num_outputs..]
                .iter()
                .map(|&d| Tensor::ones(vec![d]))
                .collect();
            terminality_from_tensor(&r.tensor, r.num_outputs, &out_discards, &in_discards, tol)
        }
    }
}

impl Interpretation {
    /// Terminality of a signature under this interpretation: resolves the
    /// payload (or special-kind tensor) and uses this interpretation's
    /// discards, including raw overrides.
    pub fn is_terminal_box(
        &self,
        sig: &BoxSignature,
        tol: f64,
    ) -> Result<TerminalityReport, EvalError> {
        let tensor = box_tensor(self, sig)?;
        let out_discards: Vec<Tensor> = sig
            .outputs()
            .iter()
            .map(|t| self.discard_covector(t))
            .collect();
        let in_discards: Vec<Tensor> = sig
            .inputs()
            .iter()
            .map(|t| self.discard_covector(t))
            .collect();
        Ok(terminality_from_tensor(
            &tensor,
            sig.outputs().len(),
            &out_discards,
            &in_discards,
            tol,
        ))
    }
}
