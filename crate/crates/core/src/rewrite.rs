//! The terminality rewrite: given a circuit and a subset `E` of its boxes,
//! repeatedly remove a maximal box outside `past(E)` together with the
//! discards on its outputs, discarding its inputs instead, until only the
//! sub-circuit on `past(E)` and discarded inputs remain.
//!
//! Elimination is purely structural; no payloads are consulted. When every
//! payload is terminal in some backend, each step preserves the evaluated
//! tensor, so the final circuit evaluates equal to the original with the
//! non-selected outputs discarded.
//!
//! Transformed circuits are paired with *port origins*: for every open port
//! of the result, the port of the original circuit it stands for. Origins
//! let callers align tensor legs across differently-shaped circuits.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::diagram::{BoxId, BoxKind, BoxSignature, Circuit, CircuitBuilder, InPort, OutPort};
use crate::order::{maximal_boxes, past, OrderError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewriteError {
    #[error("unknown box {0:?}")]
    UnknownBox(BoxId),
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// A port of the original circuit, identified by box label and port index.
/// Whether it is an input or an output is fixed by context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortOrigin {
    pub box_label: String,
    pub index: usize,
}

impl PortOrigin {
    fn of_in(c: &Circuit, p: InPort) -> PortOrigin {
        PortOrigin {
            box_label: c.label(p.box_id).to_string(),
            index: p.index,
        }
    }

    fn of_out(c: &Circuit, p: OutPort) -> PortOrigin {
        PortOrigin {
            box_label: c.label(p.box_id).to_string(),
            index: p.index,
        }
    }
}

/// A circuit whose open boundary is annotated with the original ports each
/// slot corresponds to; `input_origins[i]` describes `circuit.open_inputs()[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedCircuit {
    pub circuit: Circuit,
    pub input_origins: Vec<PortOrigin>,
    pub output_origins: Vec<PortOrigin>,
}

fn check_subset(c: &Circuit, e: &BTreeSet<BoxId>) -> Result<(), RewriteError> {
    for &b in e {
        if b.0 >= c.box_count() {
            return Err(RewriteError::UnknownBox(b));
        }
    }
    Ok(())
}

/// Open output ports of `c` owned by boxes in `e` (the boundary `out E`),
/// in canonical order.
pub fn selected_outputs(c: &Circuit, e: &BTreeSet<BoxId>) -> Vec<OutPort> {
    c.open_outputs()
        .iter()
        .copied()
        .filter(|p| e.contains(&p.box_id))
        .collect()
}

fn discard_label(port: &str) -> String {
    format!("discard${port}")
}

/// The circuit with every open output outside `out E` capped by a discard
/// box: the left-hand side of the factorization condition.
pub fn capped_circuit(c: &Circuit, e: &BTreeSet<BoxId>) -> Result<TracedCircuit, RewriteError> {
    check_subset(c, e)?;
    let mut builder = CircuitBuilder::from_circuit(c);
    for &p in c.open_outputs() {
        if !e.contains(&p.box_id) {
            let t = c.output_type(p);
            let (d, _) = builder.add_box_fresh(
                &discard_label(&c.port_label_out(p)),
                BoxSignature::discard(t),
            );
            builder.connect(
                p,
                InPort {
                    box_id: d,
                    index: 0,
                },
            );
        }
    }
    let circuit = builder
        .build()
        .expect("capping open outputs keeps the circuit valid");
    // Original boxes keep their positions, so the open boundary stays in the
    // original canonical order.
    let input_origins = circuit
        .open_inputs()
        .iter()
        .map(|&p| PortOrigin::of_in(&circuit, p))
        .collect();
    let output_origins = circuit
        .open_outputs()
        .iter()
        .map(|&p| PortOrigin::of_out(&circuit, p))
        .collect();
    Ok(TracedCircuit {
        circuit,
        input_origins,
        output_origins,
    })
}

/// The induced sub-circuit on `past(E)`: wires among `past(E)` are kept,
/// wires leaving it become open outputs. Downward closure guarantees no wire
/// enters from outside, which is asserted.
pub fn restrict_to_past(c: &Circuit, e: &BTreeSet<BoxId>) -> Result<Circuit, RewriteError> {
    check_subset(c, e)?;
    let keep = past(c, e)?;
    let mut builder = CircuitBuilder::new();
    let mut new_id = vec![None; c.box_count()];
    for b in c.box_ids() {
        if keep.contains(&b) {
            let inst = c.instance(b);
            let id = builder
                .add_box(inst.label().to_string(), inst.signature().clone())
                .expect("labels were unique in the source circuit");
            new_id[b.0] = Some(id);
        }
    }
    for w in c.wires() {
        match (new_id[w.from.box_id.0], new_id[w.to.box_id.0]) {
            (Some(from), Some(to)) => {
                builder.connect(
                    OutPort {
                        box_id: from,
                        index: w.from.index,
                    },
                    InPort {
                        box_id: to,
                        index: w.to.index,
                    },
                );
            }
            (None, Some(_)) => {
                // A wire entering past(E) from outside would contradict
                // downward closure of past.
                panic!(
                    "downward closure violated: wire {} -> {} enters past(E)",
                    c.port_label_out(w.from),
                    c.port_label_in(w.to)
                );
            }
            // Wires leaving past(E) (or fully outside it) are dropped; the
            // producing port becomes an open output of the restriction.
            _ => {}
        }
    }
    Ok(builder
        .build()
        .expect("induced sub-circuit of a DAG is a DAG"))
}

/// `restrict_to_past` with every open output not in `out E` capped by a
/// discard: the factor that carries the selected outputs.
pub fn build_phi_prime(c: &Circuit, e: &BTreeSet<BoxId>) -> Result<TracedCircuit, RewriteError> {
    let sub = restrict_to_past(c, e)?;
    let selected: BTreeSet<PortOrigin> = selected_outputs(c, e)
        .into_iter()
        .map(|p| PortOrigin::of_out(c, p))
        .collect();
    let mut builder = CircuitBuilder::from_circuit(&sub);
    for &p in sub.open_outputs() {
        if !selected.contains(&PortOrigin::of_out(&sub, p)) {
            let t = sub.output_type(p);
            let (d, _) = builder.add_box_fresh(
                &discard_label(&sub.port_label_out(p)),
                BoxSignature::discard(t),
            );
            builder.connect(
                p,
                InPort {
                    box_id: d,
                    index: 0,
                },
            );
        }
    }
    let circuit = builder
        .build()
        .expect("capping open outputs keeps the circuit valid");
    let input_origins = circuit
        .open_inputs()
        .iter()
        .map(|&p| PortOrigin::of_in(&circuit, p))
        .collect();
    let output_origins = circuit
        .open_outputs()
        .iter()
        .map(|&p| PortOrigin::of_out(&circuit, p))
        .collect();
    Ok(TracedCircuit {
        circuit,
        input_origins,
        output_origins,
    })
}

/// The right-hand side of the factorization condition: `phi_prime` in
/// parallel with a discard on every open input of every box outside
/// `past(E)`.
pub fn factored_circuit(c: &Circuit, e: &BTreeSet<BoxId>) -> Result<TracedCircuit, RewriteError> {
    let phi = build_phi_prime(c, e)?;
    let keep = past(c, e)?;
    let mut builder = CircuitBuilder::from_circuit(&phi.circuit);
    let mut input_origins = phi.input_origins.clone();
    for &p in c.open_inputs() {
        if !keep.contains(&p.box_id) {
            let t = c.input_type(p);
            builder.add_box_fresh(
                &discard_label(&c.port_label_in(p)),
                BoxSignature::discard(t),
            );
            input_origins.push(PortOrigin::of_in(c, p));
        }
    }
    let circuit = builder
        .build()
        .expect("parallel discards keep the circuit valid");
    debug_assert_eq!(circuit.open_inputs().len(), input_origins.len());
    Ok(TracedCircuit {
        circuit,
        input_origins,
        output_origins: phi.output_origins,
    })
}

/// Which maximal box to eliminate when several qualify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Smallest instance label in lexicographic order (the default).
    #[default]
    Lexicographic,
    /// Largest instance label; distinct from the default whenever a choice
    /// exists, which makes it useful for confluence checks.
    ReverseLexicographic,
}

/// One application of the terminality rewrite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteStep {
    /// Label of the box removed; it was maximal among remaining boxes.
    pub eliminated: String,
    /// Ports that received a fresh discard: open inputs of the eliminated
    /// box, and outputs of boxes that fed it.
    pub discards_introduced: Vec<String>,
    /// Labels of the original boxes still present after this step.
    pub remaining: BTreeSet<String>,
}

/// Outcome of a full elimination run.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationResult {
    /// Final circuit: the sub-circuit on `past(E)` with non-selected outputs
    /// discarded, in parallel with discards on the eliminated boxes' inputs.
    pub result: TracedCircuit,
    /// The factor carrying `out E`, built independently of the rewrite loop.
    pub phi_prime: Circuit,
    /// Open input ports of the original circuit whose boxes were eliminated.
    pub discarded_inputs: Vec<PortOrigin>,
    pub trace: Vec<RewriteStep>,
}

/// Run the elimination loop: starting from the circuit with every output
/// outside `out E` discarded, repeatedly remove a maximal box outside
/// `past(E)` (ties broken by `tie_break`) and discard its inputs. Halts in
/// exactly `|boxes \ past(E)|` steps.
pub fn eliminate(
    c: &Circuit,
    e: &BTreeSet<BoxId>,
    tie_break: TieBreak,
) -> Result<FactorizationResult, RewriteError> {
    check_subset(c, e)?;
    let keep = past(c, e)?;
    let mut remaining: BTreeSet<BoxId> = c.box_ids().collect();
    // Original output ports currently capped by a discard box.
    let mut capped: BTreeSet<OutPort> = c
        .open_outputs()
        .iter()
        .copied()
        .filter(|p| !e.contains(&p.box_id))
        .collect();
    // Original open input ports whose box has been eliminated.
    let mut discarded_ins: BTreeSet<InPort> = BTreeSet::new();
    let mut trace = Vec::new();

    loop {
        let candidates: BTreeSet<BoxId> = maximal_boxes(c, &remaining)?
            .into_iter()
            .filter(|b| !keep.contains(b))
            .collect();
        let next = match tie_break {
            TieBreak::Lexicographic => candidates.iter().min_by_key(|&&b| c.label(b)),
            TieBreak::ReverseLexicographic => candidates.iter().max_by_key(|&&b| c.label(b)),
        };
        let Some(&victim) = next else {
            // No removable box outside past(E): the complement of a
            // downward-closed set always contains a maximal box, so the
            // complement must now be empty.
            assert_eq!(
                remaining, keep,
                "no maximal box outside past(E) even though boxes remain"
            );
            break;
        };
        remaining.remove(&victim);
        let sig = c.instance(victim).signature();
        // The victim's output caps disappear with it.
        for k in 0..sig.outputs().len() {
            capped.remove(&OutPort {
                box_id: victim,
                index: k,
            });
        }
        let mut introduced = Vec::new();
        for k in 0..sig.inputs().len() {
            let port = InPort {
                box_id: victim,
                index: k,
            };
            match c.wire_into(port) {
                Some(w) => {
                    capped.insert(w.from);
                    introduced.push(c.port_label_out(w.from));
                }
                None => {
                    discarded_ins.insert(port);
                    introduced.push(c.port_label_in(port));
                }
            }
        }
        trace.push(RewriteStep {
            eliminated: c.label(victim).to_string(),
            discards_introduced: introduced,
            remaining: remaining.iter().map(|&b| c.label(b).to_string()).collect(),
        });
    }

    // Materialize the final state as a circuit.
    let mut builder = CircuitBuilder::new();
    let mut new_id = vec![None; c.box_count()];
    for b in c.box_ids() {
        if remaining.contains(&b) {
            let inst = c.instance(b);
            let id = builder
                .add_box(inst.label().to_string(), inst.signature().clone())
                .expect("labels were unique in the source circuit");
            new_id[b.0] = Some(id);
        }
    }
    for w in c.wires() {
        if let (Some(from), Some(to)) = (new_id[w.from.box_id.0], new_id[w.to.box_id.0]) {
            builder.connect(
                OutPort {
                    box_id: from,
                    index: w.from.index,
                },
                InPort {
                    box_id: to,
                    index: w.to.index,
                },
            );
        }
    }
    for &p in &capped {
        let owner = new_id[p.box_id.0].expect("capped ports belong to remaining boxes");
        let t = c.output_type(p);
        let (d, _) = builder.add_box_fresh(
            &discard_label(&c.port_label_out(p)),
            BoxSignature::discard(t),
        );
        builder.connect(
            OutPort {
                box_id: owner,
                index: p.index,
            },
            InPort {
                box_id: d,
                index: 0,
            },
        );
    }
    let mut discard_input_origins = Vec::new();
    for &p in &discarded_ins {
        let t = c.input_type(p);
        builder.add_box_fresh(
            &discard_label(&c.port_label_in(p)),
            BoxSignature::discard(t),
        );
        discard_input_origins.push(PortOrigin::of_in(c, p));
    }
    let circuit = builder.build().expect("elimination preserves validity");

    // Boxes with id below `remaining.len()` are surviving originals; higher
    // ids are introduced discards. Introduced input discards were added in
    // `discarded_ins` order, matching the canonical boundary tail.
    let num_originals = remaining.len();
    let mut origin_iter = discard_input_origins.iter().cloned();
    let mut input_origins: Vec<PortOrigin> = Vec::new();
    for &p in circuit.open_inputs() {
        if p.box_id.0 < num_originals {
            input_origins.push(PortOrigin::of_in(&circuit, p));
        } else {
            input_origins.push(
                origin_iter
                    .next()
                    .expect("one origin per introduced input discard"),
            );
        }
    }
    debug_assert_eq!(input_origins.len(), circuit.open_inputs().len());
    let output_origins = circuit
        .open_outputs()
        .iter()
        .map(|&p| PortOrigin::of_out(&circuit, p))
        .collect();

    let result = TracedCircuit {
        circuit,
        input_origins,
        output_origins,
    };
    Ok(FactorizationResult {
        result,
        phi_prime: build_phi_prime(c, e)?.circuit,
        discarded_inputs: discard_input_origins,
        trace,
    })
}

/// Structure of a factored circuit up to renaming of the introduced discard
/// boxes: which original boxes survive, how they are wired, which of their
/// ports are discarded, and which boundary ports stay live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredShape {
    pub kept: BTreeSet<String>,
    pub internal_wires: BTreeSet<(PortOrigin, PortOrigin)>,
    pub capped_outputs: BTreeSet<PortOrigin>,
    pub discarded_inputs: BTreeSet<PortOrigin>,
    pub live_open_inputs: BTreeSet<PortOrigin>,
    pub open_outputs: BTreeSet<PortOrigin>,
}

impl FactoredShape {
    /// Read the shape off a traced circuit. Boxes whose labels appear in
    /// `original` count as kept; all others must be discards introduced by
    /// the rewrite.
    pub fn of(traced: &TracedCircuit, original: &Circuit) -> FactoredShape {
        let c = &traced.circuit;
        let mut shape = FactoredShape {
            kept: BTreeSet::new(),
            internal_wires: BTreeSet::new(),
            capped_outputs: BTreeSet::new(),
            discarded_inputs: BTreeSet::new(),
            live_open_inputs: BTreeSet::new(),
            open_outputs: traced.output_origins.iter().cloned().collect(),
        };
        let is_original = |b: BoxId| original.find_box(c.label(b)).is_some();
        for b in c.box_ids() {
            if is_original(b) {
                shape.kept.insert(c.label(b).to_string());
            } else {
                assert_eq!(
                    c.instance(b).signature().kind(),
                    BoxKind::Discard,
                    "only introduced discards may carry fresh labels"
                );
            }
        }
        for w in c.wires() {
            let from_orig = is_original(w.from.box_id);
            let to_orig = is_original(w.to.box_id);
            match (from_orig, to_orig) {
                (true, true) => {
                    shape
                        .internal_wires
                        .insert((PortOrigin::of_out(c, w.from), PortOrigin::of_in(c, w.to)));
                }
                (true, false) => {
                    shape.capped_outputs.insert(PortOrigin::of_out(c, w.from));
                }
                _ => panic!("introduced discards have no outputs"),
            }
        }
        for (i, &p) in c.open_inputs().iter().enumerate() {
            if is_original(p.box_id) {
                shape.live_open_inputs.insert(PortOrigin::of_in(c, p));
            } else {
                shape
                    .discarded_inputs
                    .insert(traced.input_origins[i].clone());
            }
        }
        shape
    }
}
