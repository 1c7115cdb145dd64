//! Finite causal orders and the order theory of circuits: the box order
//! induced by directed wire paths, causal pasts, downward closure, and
//! maximal boxes.
//!
//! A causal order turns into a circuit skeleton by giving each event a box
//! with a local input and a local output, and wiring box `A` into box `B`
//! exactly when `B` covers `A`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::diagram::{
    BoxId, BoxSignature, Circuit, CircuitBuilder, DiagramError, InPort, OutPort, WireType,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrderError {
    #[error("duplicate event label `{0}`")]
    DuplicateEvent(String),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("cover relation has a cycle through `{0}`")]
    CycleInOrder(String),
    #[error("no wire type assigned to cover edge {0} -> {1}")]
    MissingTypeAssignment(String, String),
    #[error("unknown box {0:?}")]
    UnknownBox(BoxId),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

/// A finite partial order on event labels, input as its cover (immediate
/// successor) relation; the full order is the reflexive-transitive closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalOrder {
    events: Vec<String>,
    covers: Vec<(usize, usize)>,
}

impl CausalOrder {
    pub fn new<S: Into<String>>(events: Vec<S>, covers: Vec<(S, S)>) -> Result<Self, OrderError> {
        let events: Vec<String> = events.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        for e in &events {
            if !seen.insert(e.clone()) {
                return Err(OrderError::DuplicateEvent(e.clone()));
            }
        }
        let index = |name: &str| {
            events
                .iter()
                .position(|e| e == name)
                .ok_or_else(|| OrderError::UnknownEvent(name.to_string()))
        };
        let mut cover_idx = Vec::with_capacity(covers.len());
        for (a, b) in covers {
            let (a, b) = (a.into(), b.into());
            cover_idx.push((index(&a)?, index(&b)?));
        }
        let order = CausalOrder {
            events,
            covers: cover_idx,
        };
        // Strictness: the transitive closure must be irreflexive.
        if let Some(e) = order.find_cycle() {
            return Err(OrderError::CycleInOrder(order.events[e].clone()));
        }
        Ok(order)
    }

    fn find_cycle(&self) -> Option<usize> {
        let n = self.events.len();
        let mut indegree = vec![0usize; n];
        for &(_, b) in &self.covers {
            indegree[b] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut removed = 0;
        while let Some(a) = queue.pop_front() {
            removed += 1;
            for &(x, y) in &self.covers {
                if x == a {
                    indegree[y] -= 1;
                    if indegree[y] == 0 {
                        queue.push_back(y);
                    }
                }
            }
        }
        (removed != n).then(|| (0..n).find(|&i| indegree[i] > 0).unwrap())
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn event_index(&self, name: &str) -> Option<usize> {
        self.events.iter().position(|e| e == name)
    }

    pub fn covers(&self) -> impl Iterator<Item = (&str, &str)> {
        self.covers
            .iter()
            .map(|&(a, b)| (self.events[a].as_str(), self.events[b].as_str()))
    }

    /// Reflexive-transitive closure as a row-major reachability matrix.
    pub fn leq_matrix(&self) -> Vec<bool> {
        let n = self.events.len();
        let mut leq = vec![false; n * n];
        for i in 0..n {
            leq[i * n + i] = true;
        }
        for &(a, b) in &self.covers {
            leq[a * n + b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if leq[i * n + k] {
                    for j in 0..n {
                        if leq[k * n + j] {
                            leq[i * n + j] = true;
                        }
                    }
                }
            }
        }
        leq
    }

    pub fn leq(&self, a: &str, b: &str) -> Result<bool, OrderError> {
        let i = self
            .event_index(a)
            .ok_or_else(|| OrderError::UnknownEvent(a.to_string()))?;
        let j = self
            .event_index(b)
            .ok_or_else(|| OrderError::UnknownEvent(b.to_string()))?;
        Ok(self.leq_matrix()[i * self.events.len() + j])
    }
}

/// Wire-type assignment for a skeleton: one type per cover edge, and an
/// optional local input/output type per event (absent means the event has a
/// trivial local port, i.e. none).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkeletonTyping {
    pub local_inputs: BTreeMap<String, WireType>,
    pub local_outputs: BTreeMap<String, WireType>,
    pub edges: BTreeMap<(String, String), WireType>,
}

impl SkeletonTyping {
    /// Every local port and cover edge gets the same type.
    pub fn uniform(order: &CausalOrder, t: &WireType) -> Self {
        let mut typing = SkeletonTyping::default();
        for e in order.events() {
            typing.local_inputs.insert(e.clone(), t.clone());
            typing.local_outputs.insert(e.clone(), t.clone());
        }
        for (a, b) in order.covers() {
            typing
                .edges
                .insert((a.to_string(), b.to_string()), t.clone());
        }
        typing
    }
}

/// Where each event lives in the skeleton circuit: its box and the port
/// indices of its local input/output (when non-trivial).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventBinding {
    pub event: String,
    pub box_id: BoxId,
    pub local_input: Option<InPort>,
    pub local_output: Option<OutPort>,
}

/// Bijection between events and skeleton boxes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventBoxMap {
    entries: Vec<EventBinding>,
}

impl EventBoxMap {
    pub fn entries(&self) -> &[EventBinding] {
        &self.entries
    }

    pub fn get(&self, event: &str) -> Option<&EventBinding> {
        self.entries.iter().find(|e| e.event == event)
    }
}

/// A skeleton circuit bundled with its causal order and event bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub circuit: Circuit,
    pub order: CausalOrder,
    pub events: EventBoxMap,
}

/// Build the circuit skeleton of a causal order: one box per event carrying
/// its local ports, and an internal wire per cover edge.
///
/// Port convention per box: the local input (if any) first, then incoming
/// cover wires ordered by predecessor event index; outputs symmetrically.
pub fn skeleton_from_order(
    order: &CausalOrder,
    typing: &SkeletonTyping,
) -> Result<(Circuit, EventBoxMap), OrderError> {
    let events = order.events();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); events.len()];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); events.len()];
    for (a, b) in order.covers() {
        let (i, j) = (order.event_index(a).unwrap(), order.event_index(b).unwrap());
        preds[j].push(i);
        succs[i].push(j);
    }
    for l in preds.iter_mut().chain(succs.iter_mut()) {
        l.sort_unstable();
        l.dedup();
    }

    let edge_type = |a: usize, b: usize| -> Result<WireType, OrderError> {
        typing
            .edges
            .get(&(events[a].clone(), events[b].clone()))
            .cloned()
            .ok_or_else(|| OrderError::MissingTypeAssignment(events[a].clone(), events[b].clone()))
    };

    let mut builder = CircuitBuilder::new();
    let mut bindings = Vec::with_capacity(events.len());
    // (pred, succ) -> (out port index at pred, in port index at succ)
    let mut edge_ports: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();

    for (i, event) in events.iter().enumerate() {
        let local_in = typing.local_inputs.get(event).cloned();
        let local_out = typing.local_outputs.get(event).cloned();
        let mut inputs = Vec::new();
        if let Some(t) = &local_in {
            inputs.push(t.clone());
        }
        for &p in &preds[i] {
            edge_ports
                .entry((p, i))
                .or_insert((usize::MAX, usize::MAX))
                .1 = inputs.len();
            inputs.push(edge_type(p, i)?);
        }
        let mut outputs = Vec::new();
        if let Some(t) = &local_out {
            outputs.push(t.clone());
        }
        for &s in &succs[i] {
            edge_ports
                .entry((i, s))
                .or_insert((usize::MAX, usize::MAX))
                .0 = outputs.len();
            outputs.push(edge_type(i, s)?);
        }
        let signature = BoxSignature::generic(event.clone(), inputs, outputs);
        let box_id = builder.add_box(event.clone(), signature)?;
        bindings.push(EventBinding {
            event: event.clone(),
            box_id,
            local_input: local_in.map(|_| InPort { box_id, index: 0 }),
            local_output: local_out.map(|_| OutPort { box_id, index: 0 }),
        });
    }

    for (&(a, b), &(out_idx, in_idx)) in &edge_ports {
        builder.connect(
            OutPort {
                box_id: bindings[a].box_id,
                index: out_idx,
            },
            InPort {
                box_id: bindings[b].box_id,
                index: in_idx,
            },
        );
    }

    let circuit = builder.build()?;
    Ok((circuit, EventBoxMap { entries: bindings }))
}

/// The partial order on box instances: `a <= b` iff `a = b` or a directed
/// path of wires leads from `a` to `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxOrder {
    n: usize,
    leq: Vec<bool>,
}

impl BoxOrder {
    pub fn leq(&self, a: BoxId, b: BoxId) -> bool {
        self.leq[a.0 * self.n + b.0]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Pairs `(a, b)` with `a <= b`, in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (BoxId, BoxId)> + '_ {
        (0..self.n).flat_map(move |a| {
            (0..self.n)
                .filter(move |&b| self.leq[a * self.n + b])
                .map(move |b| (BoxId(a), BoxId(b)))
        })
    }
}

/// Wire-path reachability closure over the boxes of `c`.
pub fn box_order(c: &Circuit) -> BoxOrder {
    let n = c.box_count();
    let mut leq = vec![false; n * n];
    for start in 0..n {
        leq[start * n + start] = true;
        let mut queue = VecDeque::from([start]);
        let mut seen = vec![false; n];
        seen[start] = true;
        while let Some(b) = queue.pop_front() {
            for succ in c.successors(BoxId(b)) {
                if !seen[succ.0] {
                    seen[succ.0] = true;
                    leq[start * n + succ.0] = true;
                    queue.push_back(succ.0);
                }
            }
        }
    }
    BoxOrder { n, leq }
}

fn check_members(c: &Circuit, set: &BTreeSet<BoxId>) -> Result<(), OrderError> {
    for &b in set {
        if b.0 >= c.box_count() {
            return Err(OrderError::UnknownBox(b));
        }
    }
    Ok(())
}

/// The causal past of `E`: every box below some member of `E`, including `E`
/// itself. Always downward closed.
pub fn past(c: &Circuit, e: &BTreeSet<BoxId>) -> Result<BTreeSet<BoxId>, OrderError> {
    check_members(c, e)?;
    let mut result = e.clone();
    let mut queue: VecDeque<BoxId> = e.iter().copied().collect();
    while let Some(b) = queue.pop_front() {
        for p in c.predecessors(b) {
            if result.insert(p) {
                queue.push_back(p);
            }
        }
    }
    Ok(result)
}

/// Members of `s` with no output wire into another member of `s`; when `s`
/// is the set of remaining boxes, these are the removable ones.
pub fn maximal_boxes(c: &Circuit, s: &BTreeSet<BoxId>) -> Result<BTreeSet<BoxId>, OrderError> {
    check_members(c, s)?;
    Ok(s.iter()
        .copied()
        .filter(|&b| c.successors(b).all(|succ| !s.contains(&succ)))
        .collect())
}

/// True iff `s` contains the full causal past of each of its members.
pub fn is_downward_closed(c: &Circuit, s: &BTreeSet<BoxId>) -> bool {
    s.iter().all(|&b| c.predecessors(b).all(|p| s.contains(&p)))
}
