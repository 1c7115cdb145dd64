//! Typed circuits: DAGs of boxes wired output-to-input, with an ordered open
//! boundary.
//!
//! Wires are linear (no fan-out); copying, if wanted, must be an explicit box.
//! Circuits are immutable once built and cheap to share between concurrent
//! checks. Construction goes through [`CircuitBuilder`], which validates port
//! existence, type agreement on both ends of every wire, single use of every
//! port, and acyclicity.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiagramError {
    #[error("wire type dimension must be at least 1, got {dim} for `{name}`")]
    InvalidDimension { name: String, dim: usize },
    #[error("invalid signature for `{name}`: {reason}")]
    InvalidSignature { name: String, reason: String },
    #[error("duplicate type name `{0}`")]
    DuplicateType(String),
    #[error("unknown wire type `{0}`")]
    UnknownType(String),
    #[error("duplicate box label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown box `{0}`")]
    UnknownBox(String),
    #[error("port {port} out of range on `{label}` ({side}, arity {arity})")]
    InvalidPort {
        label: String,
        side: &'static str,
        port: usize,
        arity: usize,
    },
    #[error("type mismatch on wire {from} -> {to}: `{from_type}` vs `{to_type}`")]
    TypeMismatch {
        from: String,
        to: String,
        from_type: String,
        to_type: String,
    },
    #[error("port {0} used by more than one wire")]
    PortReuse(String),
    #[error("circuit contains a directed cycle")]
    CycleDetected,
    #[error("boundary arity mismatch: {left} outputs vs {right} inputs")]
    ArityMismatch { left: usize, right: usize },
}

/// A named system with a finite state-space dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WireType {
    name: String,
    dim: usize,
}

impl WireType {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self, DiagramError> {
        let name = name.into();
        if dim == 0 {
            return Err(DiagramError::InvalidDimension { name, dim });
        }
        Ok(WireType { name, dim })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl fmt::Display for WireType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Ordered registry of declared wire types with unique names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeTable {
    types: Vec<WireType>,
}

impl TypeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(
        &mut self,
        name: impl Into<String>,
        dim: usize,
    ) -> Result<WireType, DiagramError> {
        let t = WireType::new(name, dim)?;
        if self.types.iter().any(|u| u.name() == t.name()) {
            return Err(DiagramError::DuplicateType(t.name().to_string()));
        }
        self.types.push(t.clone());
        Ok(t)
    }

    pub fn get(&self, name: &str) -> Option<&WireType> {
        self.types.iter().find(|t| t.name() == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &WireType> {
        self.types.iter()
    }

    /// Single-box circuit discarding one wire of the named declared type.
    pub fn discard_of(&self, name: &str) -> Result<Circuit, DiagramError> {
        let t = self
            .get(name)
            .ok_or_else(|| DiagramError::UnknownType(name.to_string()))?;
        Ok(Circuit::discard(t))
    }

    /// Parallel discards, one per named type; composites discard wire-by-wire.
    pub fn discard_of_all(&self, names: &[&str]) -> Result<Circuit, DiagramError> {
        let mut acc = Circuit::empty();
        for name in names {
            acc = acc.compose_par(&self.discard_of(name)?);
        }
        Ok(acc)
    }
}

/// Generator role. Special kinds get backend-defined tensors; `Generic` boxes
/// are interpreted through payloads supplied per backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoxKind {
    Generic,
    Discard,
    Identity,
    Swap,
    Cup,
    Cap,
}

impl fmt::Display for BoxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoxKind::Generic => "generic",
            BoxKind::Discard => "discard",
            BoxKind::Identity => "identity",
            BoxKind::Swap => "swap",
            BoxKind::Cup => "cup",
            BoxKind::Cap => "cap",
        };
        write!(f, "{s}")
    }
}

/// A named generator with ordered, typed input and output ports.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoxSignature {
    name: String,
    inputs: Vec<WireType>,
    outputs: Vec<WireType>,
    kind: BoxKind,
}

impl BoxSignature {
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<WireType>,
        outputs: Vec<WireType>,
        kind: BoxKind,
    ) -> Result<Self, DiagramError> {
        let name = name.into();
        let fail = |reason: &str| DiagramError::InvalidSignature {
            name: name.clone(),
            reason: reason.to_string(),
        };
        match kind {
            BoxKind::Generic => {}
            BoxKind::Discard => {
                if inputs.len() != 1 || !outputs.is_empty() {
                    return Err(fail("discard takes exactly one input and no outputs"));
                }
            }
            BoxKind::Identity => {
                if inputs.len() != 1 || outputs.len() != 1 || inputs[0] != outputs[0] {
                    return Err(fail(
                        "identity must map one wire to one wire of the same type",
                    ));
                }
            }
            BoxKind::Swap => {
                if inputs.len() != 2
                    || outputs.len() != 2
                    || outputs[0] != inputs[1]
                    || outputs[1] != inputs[0]
                {
                    return Err(fail("swap must map [a, b] to [b, a]"));
                }
            }
            BoxKind::Cup => {
                if !inputs.is_empty() || outputs.len() != 2 || outputs[0] != outputs[1] {
                    return Err(fail("cup has no inputs and two outputs of equal type"));
                }
            }
            BoxKind::Cap => {
                if inputs.len() != 2 || !outputs.is_empty() || inputs[0] != inputs[1] {
                    return Err(fail("cap has two inputs of equal type and no outputs"));
                }
            }
        }
        Ok(BoxSignature {
            name,
            inputs,
            outputs,
            kind,
        })
    }

    pub fn generic(name: impl Into<String>, inputs: Vec<WireType>, outputs: Vec<WireType>) -> Self {
        BoxSignature::new(name, inputs, outputs, BoxKind::Generic).expect("generic is unrestricted")
    }

    pub fn discard(t: &WireType) -> Self {
        BoxSignature::new(
            format!("discard_{}", t.name()),
            vec![t.clone()],
            vec![],
            BoxKind::Discard,
        )
        .expect("valid discard signature")
    }

    pub fn identity(t: &WireType) -> Self {
        BoxSignature::new(
            format!("identity_{}", t.name()),
            vec![t.clone()],
            vec![t.clone()],
            BoxKind::Identity,
        )
        .expect("valid identity signature")
    }

    pub fn swap(a: &WireType, b: &WireType) -> Self {
        BoxSignature::new(
            format!("swap_{}_{}", a.name(), b.name()),
            vec![a.clone(), b.clone()],
            vec![b.clone(), a.clone()],
            BoxKind::Swap,
        )
        .expect("valid swap signature")
    }

    pub fn cup(t: &WireType) -> Self {
        BoxSignature::new(
            format!("cup_{}", t.name()),
            vec![],
            vec![t.clone(), t.clone()],
            BoxKind::Cup,
        )
        .expect("valid cup signature")
    }

    pub fn cap(t: &WireType) -> Self {
        BoxSignature::new(
            format!("cap_{}", t.name()),
            vec![t.clone(), t.clone()],
            vec![],
            BoxKind::Cap,
        )
        .expect("valid cap signature")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[WireType] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[WireType] {
        &self.outputs
    }

    pub fn kind(&self) -> BoxKind {
        self.kind
    }
}

/// Index of a box instance within its circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoxId(pub usize);

impl fmt::Display for BoxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// An output port coordinate: `box.out[index]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutPort {
    pub box_id: BoxId,
    pub index: usize,
}

/// An input port coordinate: `box.in[index]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InPort {
    pub box_id: BoxId,
    pub index: usize,
}

/// A connection from a producer output port to a consumer input port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wire {
    pub from: OutPort,
    pub to: InPort,
}

/// A labelled occurrence of a signature inside a circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxInstance {
    label: String,
    signature: BoxSignature,
}

impl BoxInstance {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn signature(&self) -> &BoxSignature {
        &self.signature
    }
}

/// Staged circuit construction; all validation happens in [`CircuitBuilder::build`].
#[derive(Debug, Clone, Default)]
pub struct CircuitBuilder {
    boxes: Vec<BoxInstance>,
    wires: Vec<Wire>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_box(
        &mut self,
        label: impl Into<String>,
        signature: BoxSignature,
    ) -> Result<BoxId, DiagramError> {
        let label = label.into();
        if self.boxes.iter().any(|b| b.label == label) {
            return Err(DiagramError::DuplicateLabel(label));
        }
        self.boxes.push(BoxInstance { label, signature });
        Ok(BoxId(self.boxes.len() - 1))
    }

    /// Like [`CircuitBuilder::add_box`], but resolves label collisions by
    /// appending a numeric suffix. Returns the id and the label actually used.
    pub fn add_box_fresh(&mut self, wanted: &str, signature: BoxSignature) -> (BoxId, String) {
        let label = Circuit::fresh_label(&self.boxes, wanted);
        let id = self
            .add_box(label.clone(), signature)
            .expect("fresh label cannot collide");
        (id, label)
    }

    /// Seed a builder with the boxes and wires of an existing circuit; box
    /// ids carry over unchanged.
    pub fn from_circuit(c: &Circuit) -> Self {
        CircuitBuilder {
            boxes: c.boxes().to_vec(),
            wires: c.wires().to_vec(),
        }
    }

    pub fn connect(&mut self, from: OutPort, to: InPort) -> &mut Self {
        self.wires.push(Wire { from, to });
        self
    }

    pub fn build(self) -> Result<Circuit, DiagramError> {
        Circuit::validate(self.boxes, self.wires)
    }
}

/// An acyclic wiring of box instances with an ordered open boundary.
///
/// Boundary order is canonical: box insertion order, then port index. Wires
/// are stored sorted by consumer port, so structurally identical circuits
/// compare equal regardless of the order ports were connected in.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    boxes: Vec<BoxInstance>,
    wires: Vec<Wire>,
    // per box, per port: index into `wires`
    in_wire: Vec<Vec<Option<usize>>>,
    out_wire: Vec<Vec<Option<usize>>>,
    open_inputs: Vec<InPort>,
    open_outputs: Vec<OutPort>,
}

impl Circuit {
    fn validate(boxes: Vec<BoxInstance>, mut wires: Vec<Wire>) -> Result<Self, DiagramError> {
        wires.sort_by_key(|w| (w.to, w.from));

        let port_name = |boxes: &[BoxInstance], side: &str, b: BoxId, k: usize| {
            format!("{}.{side}[{k}]", boxes[b.0].label)
        };

        let mut in_wire: Vec<Vec<Option<usize>>> = boxes
            .iter()
            .map(|b| vec![None; b.signature.inputs().len()])
            .collect();
        let mut out_wire: Vec<Vec<Option<usize>>> = boxes
            .iter()
            .map(|b| vec![None; b.signature.outputs().len()])
            .collect();

        for (w_idx, w) in wires.iter().enumerate() {
            for (side, b, k, arity) in [
                (
                    "out",
                    w.from.box_id,
                    w.from.index,
                    boxes
                        .get(w.from.box_id.0)
                        .map(|x| x.signature.outputs().len()),
                ),
                (
                    "in",
                    w.to.box_id,
                    w.to.index,
                    boxes.get(w.to.box_id.0).map(|x| x.signature.inputs().len()),
                ),
            ] {
                let arity = arity.ok_or_else(|| DiagramError::UnknownBox(format!("{}", b)))?;
                if k >= arity {
                    return Err(DiagramError::InvalidPort {
                        label: boxes[b.0].label.clone(),
                        side,
                        port: k,
                        arity,
                    });
                }
            }
            let from_type = &boxes[w.from.box_id.0].signature.outputs()[w.from.index];
            let to_type = &boxes[w.to.box_id.0].signature.inputs()[w.to.index];
            if from_type != to_type {
                return Err(DiagramError::TypeMismatch {
                    from: port_name(&boxes, "out", w.from.box_id, w.from.index),
                    to: port_name(&boxes, "in", w.to.box_id, w.to.index),
                    from_type: from_type.name().to_string(),
                    to_type: to_type.name().to_string(),
                });
            }
            let out_slot = &mut out_wire[w.from.box_id.0][w.from.index];
            if out_slot.is_some() {
                return Err(DiagramError::PortReuse(port_name(
                    &boxes,
                    "out",
                    w.from.box_id,
                    w.from.index,
                )));
            }
            *out_slot = Some(w_idx);
            let in_slot = &mut in_wire[w.to.box_id.0][w.to.index];
            if in_slot.is_some() {
                return Err(DiagramError::PortReuse(port_name(
                    &boxes,
                    "in",
                    w.to.box_id,
                    w.to.index,
                )));
            }
            *in_slot = Some(w_idx);
        }

        let open_inputs: Vec<InPort> = (0..boxes.len())
            .flat_map(|b| {
                in_wire[b]
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| w.is_none())
                    .map(move |(k, _)| InPort {
                        box_id: BoxId(b),
                        index: k,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let open_outputs: Vec<OutPort> = (0..boxes.len())
            .flat_map(|b| {
                out_wire[b]
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| w.is_none())
                    .map(move |(k, _)| OutPort {
                        box_id: BoxId(b),
                        index: k,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();

        let circuit = Circuit {
            boxes,
            wires,
            in_wire,
            out_wire,
            open_inputs,
            open_outputs,
        };
        // Kahn's algorithm doubles as the causal-loop check.
        circuit
            .topological_order()
            .ok_or(DiagramError::CycleDetected)?;
        Ok(circuit)
    }

    pub fn empty() -> Circuit {
        CircuitBuilder::new()
            .build()
            .expect("empty circuit is valid")
    }

    /// Single-box circuit of the given signature, labelled by signature name.
    pub fn single(signature: BoxSignature) -> Circuit {
        let mut b = CircuitBuilder::new();
        b.add_box(signature.name().to_string(), signature)
            .expect("first label cannot collide");
        b.build().expect("single box has no wires")
    }

    pub fn discard(t: &WireType) -> Circuit {
        Circuit::single(BoxSignature::discard(t))
    }

    /// Parallel discards, one per wire; the composite case of discarding.
    pub fn discards(types: &[WireType]) -> Circuit {
        let mut acc = Circuit::empty();
        for t in types {
            acc = acc.compose_par(&Circuit::discard(t));
        }
        acc
    }

    pub fn identity(t: &WireType) -> Circuit {
        Circuit::single(BoxSignature::identity(t))
    }

    pub fn cup(t: &WireType) -> Circuit {
        Circuit::single(BoxSignature::cup(t))
    }

    pub fn cap(t: &WireType) -> Circuit {
        Circuit::single(BoxSignature::cap(t))
    }

    pub fn boxes(&self) -> &[BoxInstance] {
        &self.boxes
    }

    pub fn box_count(&self) -> usize {
        self.boxes.len()
    }

    pub fn box_ids(&self) -> impl Iterator<Item = BoxId> {
        (0..self.boxes.len()).map(BoxId)
    }

    pub fn instance(&self, id: BoxId) -> &BoxInstance {
        &self.boxes[id.0]
    }

    pub fn label(&self, id: BoxId) -> &str {
        self.boxes[id.0].label()
    }

    pub fn find_box(&self, label: &str) -> Option<BoxId> {
        self.boxes.iter().position(|b| b.label == label).map(BoxId)
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn wire_into(&self, port: InPort) -> Option<&Wire> {
        self.in_wire[port.box_id.0][port.index].map(|i| &self.wires[i])
    }

    pub fn wire_out_of(&self, port: OutPort) -> Option<&Wire> {
        self.out_wire[port.box_id.0][port.index].map(|i| &self.wires[i])
    }

    pub fn wire_index_into(&self, port: InPort) -> Option<usize> {
        self.in_wire[port.box_id.0][port.index]
    }

    pub fn wire_index_out_of(&self, port: OutPort) -> Option<usize> {
        self.out_wire[port.box_id.0][port.index]
    }

    pub fn open_inputs(&self) -> &[InPort] {
        &self.open_inputs
    }

    pub fn open_outputs(&self) -> &[OutPort] {
        &self.open_outputs
    }

    pub fn input_type(&self, port: InPort) -> &WireType {
        &self.boxes[port.box_id.0].signature.inputs()[port.index]
    }

    pub fn output_type(&self, port: OutPort) -> &WireType {
        &self.boxes[port.box_id.0].signature.outputs()[port.index]
    }

    pub fn port_label_in(&self, port: InPort) -> String {
        format!("{}.in[{}]", self.label(port.box_id), port.index)
    }

    pub fn port_label_out(&self, port: OutPort) -> String {
        format!("{}.out[{}]", self.label(port.box_id), port.index)
    }

    pub fn successors(&self, id: BoxId) -> impl Iterator<Item = BoxId> + '_ {
        self.wires
            .iter()
            .filter(move |w| w.from.box_id == id)
            .map(|w| w.to.box_id)
    }

    pub fn predecessors(&self, id: BoxId) -> impl Iterator<Item = BoxId> + '_ {
        self.wires
            .iter()
            .filter(move |w| w.to.box_id == id)
            .map(|w| w.from.box_id)
    }

    /// Deterministic topological order (smallest box index first among ready
    /// boxes), or `None` if the wiring has a directed cycle.
    pub fn topological_order(&self) -> Option<Vec<BoxId>> {
        let n = self.boxes.len();
        let mut indegree = vec![0usize; n];
        for w in &self.wires {
            indegree[w.to.box_id.0] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&b| indegree[b] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(pos) = ready
            .iter()
            .enumerate()
            .min_by_key(|(_, &b)| b)
            .map(|(i, _)| i)
        {
            let b = ready.swap_remove(pos);
            order.push(BoxId(b));
            for w in &self.wires {
                if w.from.box_id.0 == b {
                    let t = w.to.box_id.0;
                    indegree[t] -= 1;
                    if indegree[t] == 0 {
                        ready.push(t);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    fn fresh_label(existing: &[BoxInstance], wanted: &str) -> String {
        if !existing.iter().any(|b| b.label == wanted) {
            return wanted.to_string();
        }
        let mut n = 2usize;
        loop {
            let candidate = format!("{wanted}_{n}");
            if !existing.iter().any(|b| b.label == candidate) {
                return candidate;
            }
            n += 1;
        }
    }

    fn append_boxes(target: &mut Vec<BoxInstance>, source: &[BoxInstance]) -> Vec<BoxId> {
        source
            .iter()
            .map(|b| {
                let label = Circuit::fresh_label(target, &b.label);
                target.push(BoxInstance {
                    label,
                    signature: b.signature.clone(),
                });
                BoxId(target.len() - 1)
            })
            .collect()
    }

    /// Sequential composition: every open output of `self` is wired to the
    /// positionally matching open input of `other`.
    pub fn compose_seq(&self, other: &Circuit) -> Result<Circuit, DiagramError> {
        if self.open_outputs.len() != other.open_inputs.len() {
            return Err(DiagramError::ArityMismatch {
                left: self.open_outputs.len(),
                right: other.open_inputs.len(),
            });
        }
        for (o, i) in self.open_outputs.iter().zip(other.open_inputs.iter()) {
            let ot = self.output_type(*o);
            let it = other.input_type(*i);
            if ot != it {
                return Err(DiagramError::TypeMismatch {
                    from: self.port_label_out(*o),
                    to: other.port_label_in(*i),
                    from_type: ot.name().to_string(),
                    to_type: it.name().to_string(),
                });
            }
        }
        let mut boxes = Vec::with_capacity(self.boxes.len() + other.boxes.len());
        let left_map = Circuit::append_boxes(&mut boxes, &self.boxes);
        let right_map = Circuit::append_boxes(&mut boxes, &other.boxes);
        let mut wires: Vec<Wire> = Vec::with_capacity(self.wires.len() + other.wires.len());
        for w in &self.wires {
            wires.push(Wire {
                from: OutPort {
                    box_id: left_map[w.from.box_id.0],
                    index: w.from.index,
                },
                to: InPort {
                    box_id: left_map[w.to.box_id.0],
                    index: w.to.index,
                },
            });
        }
        for w in &other.wires {
            wires.push(Wire {
                from: OutPort {
                    box_id: right_map[w.from.box_id.0],
                    index: w.from.index,
                },
                to: InPort {
                    box_id: right_map[w.to.box_id.0],
                    index: w.to.index,
                },
            });
        }
        for (o, i) in self.open_outputs.iter().zip(other.open_inputs.iter()) {
            wires.push(Wire {
                from: OutPort {
                    box_id: left_map[o.box_id.0],
                    index: o.index,
                },
                to: InPort {
                    box_id: right_map[i.box_id.0],
                    index: i.index,
                },
            });
        }
        Circuit::validate(boxes, wires)
    }

    /// Parallel composition: disjoint union, boundary of `self` first.
    pub fn compose_par(&self, other: &Circuit) -> Circuit {
        let mut boxes = Vec::with_capacity(self.boxes.len() + other.boxes.len());
        let left_map = Circuit::append_boxes(&mut boxes, &self.boxes);
        let right_map = Circuit::append_boxes(&mut boxes, &other.boxes);
        let mut wires: Vec<Wire> = Vec::with_capacity(self.wires.len() + other.wires.len());
        for (map, src) in [(&left_map, self), (&right_map, other)] {
            for w in &src.wires {
                wires.push(Wire {
                    from: OutPort {
                        box_id: map[w.from.box_id.0],
                        index: w.from.index,
                    },
                    to: InPort {
                        box_id: map[w.to.box_id.0],
                        index: w.to.index,
                    },
                });
            }
        }
        Circuit::validate(boxes, wires).expect("disjoint union of valid circuits is valid")
    }

    /// Relabel lookup used by callers that address boxes by label.
    pub fn resolve_labels(&self, labels: &[&str]) -> Result<Vec<BoxId>, DiagramError> {
        labels
            .iter()
            .map(|l| {
                self.find_box(l)
                    .ok_or_else(|| DiagramError::UnknownBox((*l).to_string()))
            })
            .collect()
    }
}

/// Build a circuit from explicit instance and wire lists.
pub fn build_circuit(
    boxes: Vec<(String, BoxSignature)>,
    wires: Vec<Wire>,
) -> Result<Circuit, DiagramError> {
    let mut builder = CircuitBuilder::new();
    for (label, sig) in boxes {
        builder.add_box(label, sig)?;
    }
    for w in wires {
        builder.connect(w.from, w.to);
    }
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ty(name: &str, dim: usize) -> WireType {
        WireType::new(name, dim).unwrap()
    }

    fn arrow(name: &str, from: &WireType, to: &WireType) -> BoxSignature {
        BoxSignature::generic(name, vec![from.clone()], vec![to.clone()])
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            WireType::new("A", 0),
            Err(DiagramError::InvalidDimension { .. })
        ));
    }

    #[test]
    fn single_box_is_a_circuit_with_its_ports_open() {
        let (a, b) = (ty("A", 2), ty("B", 3));
        let c = Circuit::single(arrow("f", &a, &b));
        assert_eq!(c.open_inputs().len(), 1);
        assert_eq!(c.open_outputs().len(), 1);
        assert_eq!(c.input_type(c.open_inputs()[0]), &a);
        assert_eq!(c.output_type(c.open_outputs()[0]), &b);
    }

    #[test]
    fn sequential_plugging_leaves_outer_boundary() {
        let (a, b, c_ty) = (ty("A", 2), ty("B", 2), ty("C", 2));
        let mut builder = CircuitBuilder::new();
        let f = builder.add_box("f", arrow("f", &a, &b)).unwrap();
        let g = builder.add_box("g", arrow("g", &b, &c_ty)).unwrap();
        builder.connect(
            OutPort {
                box_id: f,
                index: 0,
            },
            InPort {
                box_id: g,
                index: 0,
            },
        );
        let c = builder.build().unwrap();
        assert_eq!(
            c.open_inputs(),
            &[InPort {
                box_id: f,
                index: 0
            }]
        );
        assert_eq!(
            c.open_outputs(),
            &[OutPort {
                box_id: g,
                index: 0
            }]
        );
        assert_eq!(c.wires().len(), 1);
    }

    #[test]
    fn self_loop_is_a_causal_loop() {
        let a = ty("A", 2);
        let mut builder = CircuitBuilder::new();
        let f = builder.add_box("f", arrow("f", &a, &a)).unwrap();
        builder.connect(
            OutPort {
                box_id: f,
                index: 0,
            },
            InPort {
                box_id: f,
                index: 0,
            },
        );
        assert_eq!(builder.build().unwrap_err(), DiagramError::CycleDetected);
    }

    #[test]
    fn two_box_cycle_detected() {
        let a = ty("A", 2);
        let mut builder = CircuitBuilder::new();
        let f = builder.add_box("f", arrow("f", &a, &a)).unwrap();
        let g = builder.add_box("g", arrow("g", &a, &a)).unwrap();
        builder.connect(
            OutPort {
                box_id: f,
                index: 0,
            },
            InPort {
                box_id: g,
                index: 0,
            },
        );
        builder.connect(
            OutPort {
                box_id: g,
                index: 0,
            },
            InPort {
                box_id: f,
                index: 0,
            },
        );
        assert_eq!(builder.build().unwrap_err(), DiagramError::CycleDetected);
    }

    #[test]
    fn wire_endpoints_must_agree_on_type() {
        let (a, b, c_ty, d) = (ty("A", 2), ty("B", 2), ty("C", 3), ty("D", 2));
        let mut builder = CircuitBuilder::new();
        let f = builder.add_box("f", arrow("f", &a, &b)).unwrap();
        let g = builder.add_box("g", arrow("g", &c_ty, &d)).unwrap();
        builder.connect(
            OutPort {
                box_id: f,
                index: 0,
            },
            InPort {
                box_id: g,
                index: 0,
            },
        );
        match builder.build() {
            Err(DiagramError::TypeMismatch { from, to, .. }) => {
                assert_eq!(from, "f.out[0]");
                assert_eq!(to, "g.in[0]");
            }
            other => panic!("expected TypeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn ports_are_single_use() {
        let a = ty("A", 2);
        let mut builder = CircuitBuilder::new();
        let f = builder.add_box("f", arrow("f", &a, &a)).unwrap();
        let g = builder.add_box("g", arrow("g", &a, &a)).unwrap();
        let h = builder.add_box("h", arrow("h", &a, &a)).unwrap();
        builder.connect(
            OutPort {
                box_id: f,
                index: 0,
            },
            InPort {
                box_id: g,
                index: 0,
            },
        );
        builder.connect(
            OutPort {
                box_id: f,
                index: 0,
            },
            InPort {
                box_id: h,
                index: 0,
            },
        );
        assert!(matches!(
            builder.build(),
            Err(DiagramError::PortReuse(p)) if p == "f.out[0]"
        ));
    }

    #[test]
    fn identical_inputs_build_identical_circuits() {
        let build = || {
            let (a, b) = (ty("A", 2), ty("B", 3));
            let mut builder = CircuitBuilder::new();
            let f = builder.add_box("f", arrow("f", &a, &b)).unwrap();
            let g = builder.add_box("g", arrow("g", &b, &a)).unwrap();
            builder.connect(
                OutPort {
                    box_id: f,
                    index: 0,
                },
                InPort {
                    box_id: g,
                    index: 0,
                },
            );
            builder.build().unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn compose_seq_chains_boundaries() {
        let (a, b, c_ty) = (ty("A", 2), ty("B", 2), ty("C", 2));
        let f = Circuit::single(arrow("f", &a, &b));
        let g = Circuit::single(arrow("g", &b, &c_ty));
        let fg = f.compose_seq(&g).unwrap();
        assert_eq!(fg.open_inputs().len(), 1);
        assert_eq!(fg.open_outputs().len(), 1);
        assert_eq!(fg.input_type(fg.open_inputs()[0]), &a);
        assert_eq!(fg.output_type(fg.open_outputs()[0]), &c_ty);
    }

    #[test]
    fn state_then_discard_is_closed() {
        let a = ty("A", 2);
        let state = Circuit::single(BoxSignature::generic("s", vec![], vec![a.clone()]));
        let closed = state.compose_seq(&Circuit::discard(&a)).unwrap();
        assert!(closed.open_inputs().is_empty());
        assert!(closed.open_outputs().is_empty());
    }

    #[test]
    fn compose_seq_rejects_type_and_arity_mismatches() {
        let (a, b, c_ty, d) = (ty("A", 2), ty("B", 2), ty("C", 3), ty("D", 2));
        let f = Circuit::single(arrow("f", &a, &b));
        let g = Circuit::single(arrow("g", &c_ty, &d));
        assert!(matches!(
            f.compose_seq(&g),
            Err(DiagramError::TypeMismatch { .. })
        ));
        let two = f.compose_par(&f);
        assert!(matches!(
            f.compose_seq(&two),
            Err(DiagramError::ArityMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn compose_par_concatenates_boundaries() {
        let (a, b, c_ty, d) = (ty("A", 2), ty("B", 2), ty("C", 3), ty("D", 2));
        let f = Circuit::single(arrow("f", &a, &b));
        let g = Circuit::single(arrow("g", &c_ty, &d));
        let fg = f.compose_par(&g);
        let in_types: Vec<&WireType> = fg.open_inputs().iter().map(|&p| fg.input_type(p)).collect();
        assert_eq!(in_types, vec![&a, &c_ty]);
        let out_types: Vec<&WireType> = fg
            .open_outputs()
            .iter()
            .map(|&p| fg.output_type(p))
            .collect();
        assert_eq!(out_types, vec![&b, &d]);
    }

    #[test]
    fn empty_circuit_is_the_parallel_unit() {
        let (a, b) = (ty("A", 2), ty("B", 3));
        let f = Circuit::single(arrow("f", &a, &b));
        assert_eq!(f.compose_par(&Circuit::empty()), f);
        assert_eq!(Circuit::empty().compose_par(&f), f);
    }

    #[test]
    fn parallel_discards_have_inputs_only() {
        let (a, b) = (ty("A", 2), ty("B", 3));
        let d = Circuit::discard(&a).compose_par(&Circuit::discard(&b));
        assert_eq!(d.open_inputs().len(), 2);
        assert!(d.open_outputs().is_empty());
        assert_eq!(d, Circuit::discards(&[a, b]));
    }

    #[test]
    fn discard_of_requires_declared_type() {
        let mut table = TypeTable::new();
        table.declare("A", 2).unwrap();
        let d = table.discard_of("A").unwrap();
        assert_eq!(d.box_count(), 1);
        assert_eq!(d.boxes()[0].signature().kind(), BoxKind::Discard);
        assert_eq!(
            table.discard_of("Z").unwrap_err(),
            DiagramError::UnknownType("Z".into())
        );
        // composite systems discard wire by wire
        table.declare("B", 3).unwrap();
        let ab = table.discard_of_all(&["A", "B"]).unwrap();
        assert_eq!(ab.box_count(), 2);
        assert!(ab.open_outputs().is_empty());
    }

    #[test]
    fn special_signatures_enforce_their_shapes() {
        let (a, b) = (ty("A", 2), ty("B", 3));
        assert!(
            BoxSignature::new("d", vec![a.clone(), a.clone()], vec![], BoxKind::Discard).is_err()
        );
        assert!(
            BoxSignature::new("i", vec![a.clone()], vec![b.clone()], BoxKind::Identity).is_err()
        );
        assert!(BoxSignature::new(
            "s",
            vec![a.clone(), b.clone()],
            vec![a.clone(), b.clone()],
            BoxKind::Swap
        )
        .is_err());
        assert!(BoxSignature::new("c", vec![], vec![a.clone(), b.clone()], BoxKind::Cup).is_err());
        assert!(BoxSignature::new("c", vec![a.clone(), b.clone()], vec![], BoxKind::Cap).is_err());
        // and the canonical constructors satisfy them
        BoxSignature::discard(&a);
        BoxSignature::identity(&a);
        BoxSignature::swap(&a, &b);
        BoxSignature::cup(&a);
        BoxSignature::cap(&a);
    }

    #[test]
    fn every_built_circuit_has_a_topological_order() {
        let (a, b) = (ty("A", 2), ty("B", 2));
        let mut builder = CircuitBuilder::new();
        let f = builder.add_box("f", arrow("f", &a, &b)).unwrap();
        let g = builder.add_box("g", arrow("g", &b, &a)).unwrap();
        let h = builder.add_box("h", arrow("h", &a, &a)).unwrap();
        builder.connect(
            OutPort {
                box_id: f,
                index: 0,
            },
            InPort {
                box_id: g,
                index: 0,
            },
        );
        builder.connect(
            OutPort {
                box_id: g,
                index: 0,
            },
            InPort {
                box_id: h,
                index: 0,
            },
        );
        let c = builder.build().unwrap();
        let order = c.topological_order().unwrap();
        assert_eq!(order, vec![f, g, h]);
    }

    #[test]
    fn merge_renames_colliding_labels() {
        let a = ty("A", 2);
        let f1 = Circuit::single(arrow("f", &a, &a));
        let f2 = Circuit::single(arrow("f", &a, &a));
        let both = f1.compose_par(&f2);
        assert_eq!(both.label(BoxId(0)), "f");
        assert_eq!(both.label(BoxId(1)), "f_2");
    }
}
