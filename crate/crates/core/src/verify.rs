//! Numerical verification of the causal-structure conditions: terminality of
//! generators, the factorization condition for circuits and subsets of their
//! boxes, the interventional affect relation on skeleton circuits, and the
//! Bell-scenario no-signalling statement.
//!
//! All checks are exact contractions compared in max-abs-difference up to a
//! floating-point tolerance; there is no sampling noise anywhere.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use thiserror::Error;

use crate::diagram::{
    BoxId, BoxSignature, Circuit, CircuitBuilder, DiagramError, InPort, WireType,
};
use crate::order::{past, OrderError, Skeleton};
use crate::rewrite::{capped_circuit, factored_circuit, RewriteError, TracedCircuit};
use crate::semantics::{
    evaluate, Backend, CMatrix, EvalError, Interpretation, Payload, QuantumBox, RawBox,
    StochasticBox,
};
use crate::tensor::{Tensor, TensorComparison};

/// Default absolute tolerance for double-precision contraction at desk scale.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Exhaustive subset enumeration is refused above this many boxes.
pub const SUBSET_ENUMERATION_CAP: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("unknown box `{0}`")]
    UnknownBox(String),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("{boxes} boxes exceed the exhaustive subset bound of {cap}; sample instead")]
    SubsetExplosion { boxes: usize, cap: usize },
    #[error("affect check requires two distinct events, got `{0}` twice")]
    AffectPairEqual(String),
    #[error("event `{0}` has no local input to probe")]
    MissingLocalInput(String),
    #[error("event `{0}` has no local output to observe")]
    MissingLocalOutput(String),
    #[error("not a Bell-scenario skeleton: {0}")]
    NotBellShape(String),
    #[error("invalid probe state: {0}")]
    InvalidProbe(String),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Terminality,
    Factorization,
    Affect,
    NoSignalling,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Terminality => "terminality",
            CheckKind::Factorization => "factorization",
            CheckKind::Affect => "affect",
            CheckKind::NoSignalling => "no_signalling",
        }
    }
}

/// Per-check payload carried alongside the verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckDetails {
    Terminality {
        box_name: String,
        worst_input: Vec<usize>,
    },
    Factorization {
        subset: Vec<String>,
    },
    Affect {
        from: String,
        to: String,
        probe_count: usize,
    },
    NoSignalling {
        probed: String,
        observed: String,
    },
}

/// Outcome of one check. `passed` holds exactly when `max_deviation` is
/// within `tolerance` (NaN never passes).
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub kind: CheckKind,
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub details: CheckDetails,
}

impl VerificationReport {
    fn from_deviation(kind: CheckKind, dev: f64, tol: f64, details: CheckDetails) -> Self {
        VerificationReport {
            kind,
            passed: dev <= tol,
            max_deviation: dev,
            tolerance: tol,
            details,
        }
    }
}

/// Permute a circuit-evaluation tensor into origin-sorted leg order so that
/// tensors of differently-arranged circuits with the same boundary origins
/// become comparable slot by slot.
fn align_by_origins(tensor: &Tensor, traced: &TracedCircuit) -> Tensor {
    let n_out = traced.output_origins.len();
    let mut out_slots: Vec<usize> = (0..n_out).collect();
    out_slots.sort_by(|&a, &b| traced.output_origins[a].cmp(&traced.output_origins[b]));
    let mut in_slots: Vec<usize> = (0..traced.input_origins.len()).collect();
    in_slots.sort_by(|&a, &b| traced.input_origins[a].cmp(&traced.input_origins[b]));
    let perm: Vec<usize> = out_slots
        .into_iter()
        .chain(in_slots.into_iter().map(|i| i + n_out))
        .collect();
    tensor.permute(&perm)
}

/// Evaluate both sides of the factorization condition for the subset `e` and
/// compare: the circuit with outputs outside `out E` discarded, against the
/// `past(E)` factor in parallel with discards on the remaining inputs.
pub fn check_factorization(
    c: &Circuit,
    e: &BTreeSet<BoxId>,
    interp: &Interpretation,
    tol: f64,
) -> Result<VerificationReport, VerifyError> {
    let lhs = capped_circuit(c, e)?;
    let rhs = factored_circuit(c, e)?;
    let t_lhs = align_by_origins(&evaluate(&lhs.circuit, interp)?, &lhs);
    let t_rhs = align_by_origins(&evaluate(&rhs.circuit, interp)?, &rhs);
    let TensorComparison { max_abs_diff, .. } = crate::tensor::tensors_equal(&t_lhs, &t_rhs, tol);
    let subset: Vec<String> = e.iter().map(|&b| c.label(b).to_string()).collect();
    Ok(VerificationReport::from_deviation(
        CheckKind::Factorization,
        max_abs_diff,
        tol,
        CheckDetails::Factorization { subset },
    ))
}

/// Run `check_factorization` for every subset of the circuit's boxes, in
/// ascending bitmask order. Refuses circuits above
/// [`SUBSET_ENUMERATION_CAP`] boxes.
pub fn check_all_factorizations(
    c: &Circuit,
    interp: &Interpretation,
    tol: f64,
) -> Result<Vec<VerificationReport>, VerifyError> {
    let n = c.box_count();
    if n > SUBSET_ENUMERATION_CAP {
        return Err(VerifyError::SubsetExplosion {
            boxes: n,
            cap: SUBSET_ENUMERATION_CAP,
        });
    }
    let mut reports = Vec::with_capacity(1 << n);
    for mask in 0u64..(1u64 << n) {
        let e: BTreeSet<BoxId> = (0..n).filter(|i| mask & (1 << i) != 0).map(BoxId).collect();
        reports.push(check_factorization(c, &e, interp, tol)?);
    }
    Ok(reports)
}

/// Seeded random-subset variant for circuits too large to enumerate; the
/// sampled subsets are deduplicated and checked in canonical order.
pub fn check_sampled_factorizations(
    c: &Circuit,
    interp: &Interpretation,
    tol: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<VerificationReport>, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subsets: BTreeSet<BTreeSet<BoxId>> = BTreeSet::new();
    for _ in 0..samples {
        let e: BTreeSet<BoxId> = c.box_ids().filter(|_| rng.gen::<bool>()).collect();
        subsets.insert(e);
    }
    subsets
        .into_iter()
        .map(|e| check_factorization(c, &e, interp, tol))
        .collect()
}

/// A spanning set of probe states for one wire in the given backend: point
/// distributions (stochastic), an informationally complete family of pure
/// states (quantum), or basis vectors (raw). Linearity of evaluation makes
/// invariance on these spanning sets imply invariance on all states.
pub fn default_probes(backend: Backend, t: &WireType) -> Vec<Payload> {
    let d = t.dim();
    match backend {
        Backend::Stochastic => (0..d)
            .map(|i| {
                let mut col = vec![0.0; d];
                col[i] = 1.0;
                Payload::Stochastic(StochasticBox::new(d, 1, col).expect("valid point mass"))
            })
            .collect(),
        Backend::Quantum => {
            // |i>, (|i>+|j>)/sqrt(2), (|i>+i|j>)/sqrt(2): d^2 pure states
            // whose projectors span the Hermitian matrices.
            let mut probes = Vec::new();
            let ket = |entries: Vec<(usize, Complex64)>| {
                let mut v = vec![Complex64::new(0.0, 0.0); d];
                for (i, z) in entries {
                    v[i] = z;
                }
                Payload::Quantum(
                    QuantumBox::new(vec![CMatrix::new(d, 1, v).expect("ket shape")])
                        .expect("single Kraus column"),
                )
            };
            let inv_rt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            for i in 0..d {
                probes.push(ket(vec![(i, Complex64::new(1.0, 0.0))]));
            }
            for i in 0..d {
                for j in (i + 1)..d {
                    probes.push(ket(vec![(i, inv_rt2), (j, inv_rt2)]));
                    probes.push(ket(vec![
                        (i, inv_rt2),
                        (j, Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)),
                    ]));
                }
            }
            probes
        }
        Backend::Raw => (0..d)
            .map(|i| {
                let mut v = vec![Complex64::new(0.0, 0.0); d];
                v[i] = Complex64::new(1.0, 0.0);
                Payload::Raw(RawBox::new(Tensor::new(vec![d], v), 1).expect("rank-1 state tensor"))
            })
            .collect(),
    }
}

/// The fixed state fed to non-probed open inputs: uniform distribution,
/// maximally mixed state, or first basis vector.
pub fn default_context_state(backend: Backend, t: &WireType) -> Payload {
    let d = t.dim();
    match backend {
        Backend::Stochastic => Payload::Stochastic(
            StochasticBox::new(d, 1, vec![1.0 / d as f64; d]).expect("uniform distribution"),
        ),
        Backend::Quantum => {
            let scale = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
            let kraus = (0..d)
                .map(|i| {
                    let mut v = vec![Complex64::new(0.0, 0.0); d];
                    v[i] = scale;
                    CMatrix::new(d, 1, v).expect("ket shape")
                })
                .collect();
            Payload::Quantum(QuantumBox::new(kraus).expect("maximally mixed state"))
        }
        Backend::Raw => {
            let mut v = vec![Complex64::new(0.0, 0.0); d];
            v[0] = Complex64::new(1.0, 0.0);
            Payload::Raw(RawBox::new(Tensor::new(vec![d], v), 1).expect("rank-1 state tensor"))
        }
    }
}

fn state_signature(
    payload: &Payload,
    name: &str,
    t: &WireType,
) -> Result<BoxSignature, VerifyError> {
    let ok = match payload {
        Payload::Stochastic(s) => s.rows == t.dim() && s.cols == 1,
        Payload::Quantum(q) => q.d_out() == t.dim() && q.d_in() == 1,
        Payload::Raw(r) => r.tensor.shape() == [t.dim()] && r.num_outputs == 1,
    };
    if !ok {
        return Err(VerifyError::InvalidProbe(format!(
            "state `{name}` does not fit a wire of type `{}` (dim {})",
            t.name(),
            t.dim()
        )));
    }
    Ok(BoxSignature::generic(
        name.to_string(),
        vec![],
        vec![t.clone()],
    ))
}

/// Build the closed-but-for-one-output circuit used by the affect check: the
/// skeleton with `probe` feeding `probe_port`, context states on every other
/// open input, and every output except `observe_port` discarded.
fn affect_marginal(
    skel: &Skeleton,
    probe_port: InPort,
    probe: &Payload,
    observe_event: &str,
    interp: &Interpretation,
) -> Result<Tensor, VerifyError> {
    let c = &skel.circuit;
    let observed = skel
        .events
        .get(observe_event)
        .and_then(|b| b.local_output)
        .expect("caller validated the observed local output");
    let mut builder = CircuitBuilder::from_circuit(c);
    let mut extended = interp.clone();
    // Feed every open input: the probe on its port, context states elsewhere.
    for &p in c.open_inputs() {
        let t = c.input_type(p).clone();
        let (payload, name) = if p == probe_port {
            (probe.clone(), format!("$probe:{}", c.port_label_in(p)))
        } else {
            (
                default_context_state(interp.backend(), &t),
                format!("$context:{}", c.port_label_in(p)),
            )
        };
        let sig = state_signature(&payload, &name, &t)?;
        extended.insert_payload(name.clone(), payload)?;
        let (id, _) = builder.add_box_fresh(&name, sig);
        builder.connect(
            crate::diagram::OutPort {
                box_id: id,
                index: 0,
            },
            p,
        );
    }
    for &p in c.open_outputs() {
        if p != observed {
            let t = c.output_type(p).clone();
            let (id, _) = builder.add_box_fresh(
                &format!("$discard:{}", c.port_label_out(p)),
                BoxSignature::discard(&t),
            );
            builder.connect(
                p,
                InPort {
                    box_id: id,
                    index: 0,
                },
            );
        }
    }
    let circuit = builder
        .build()
        .expect("feeding and discarding keeps the circuit valid");
    Ok(evaluate(&circuit, &extended)?)
}

/// Can varying the local input at `from` change the local-output marginal at
/// `to`? Probes the `from` input over the given states (defaults when empty),
/// holds every other input fixed, discards every output except `to`'s, and
/// reports the largest pairwise marginal difference. Passing means *no*
/// affect was detected.
pub fn check_affect(
    skel: &Skeleton,
    from: &str,
    to: &str,
    interp: &Interpretation,
    probes: &[Payload],
    tol: f64,
) -> Result<VerificationReport, VerifyError> {
    if from == to {
        return Err(VerifyError::AffectPairEqual(from.to_string()));
    }
    let from_binding = skel
        .events
        .get(from)
        .ok_or_else(|| VerifyError::UnknownEvent(from.to_string()))?;
    let to_binding = skel
        .events
        .get(to)
        .ok_or_else(|| VerifyError::UnknownEvent(to.to_string()))?;
    let probe_port = from_binding
        .local_input
        .ok_or_else(|| VerifyError::MissingLocalInput(from.to_string()))?;
    if to_binding.local_output.is_none() {
        return Err(VerifyError::MissingLocalOutput(to.to_string()));
    }
    let probe_type = skel.circuit.input_type(probe_port).clone();
    let default;
    let probes = if probes.is_empty() {
        default = default_probes(interp.backend(), &probe_type);
        &default
    } else {
        probes
    };
    let marginals: Vec<Tensor> = probes
        .iter()
        .map(|p| affect_marginal(skel, probe_port, p, to, interp))
        .collect::<Result<_, _>>()?;
    let mut max_dev = 0.0f64;
    for i in 0..marginals.len() {
        for j in (i + 1)..marginals.len() {
            let d = marginals[i]
                .max_abs_diff(&marginals[j])
                .expect("marginals share the observed-output shape");
            max_dev = max_dev.max(d);
        }
    }
    Ok(VerificationReport::from_deviation(
        CheckKind::Affect,
        max_dev,
        tol,
        CheckDetails::Affect {
            from: from.to_string(),
            to: to.to_string(),
            probe_count: probes.len(),
        },
    ))
}

/// The two wings of a Bell-scenario skeleton, and its source event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BellShape {
    pub source: String,
    pub wings: [String; 2],
}

/// Validate the V-shaped causal order underlying a Bell scenario: one source
/// event covered by nothing, two wings covering it, trivial local ports at
/// the source, and full local ports at the wings.
pub fn bell_shape(skel: &Skeleton) -> Result<BellShape, VerifyError> {
    let events = skel.order.events();
    if events.len() != 3 {
        return Err(VerifyError::NotBellShape(format!(
            "expected 3 events, found {}",
            events.len()
        )));
    }
    let covers: Vec<(&str, &str)> = skel.order.covers().collect();
    if covers.len() != 2 || covers[0].0 != covers[1].0 {
        return Err(VerifyError::NotBellShape(
            "expected exactly two cover edges out of one common source".to_string(),
        ));
    }
    let source = covers[0].0.to_string();
    let wings = [covers[0].1.to_string(), covers[1].1.to_string()];
    if wings[0] == wings[1] {
        return Err(VerifyError::NotBellShape(
            "the two wings must be distinct events".to_string(),
        ));
    }
    let source_binding = skel
        .events
        .get(&source)
        .ok_or_else(|| VerifyError::UnknownEvent(source.clone()))?;
    if source_binding.local_input.is_some() || source_binding.local_output.is_some() {
        return Err(VerifyError::NotBellShape(format!(
            "source `{source}` must have trivial local input and output"
        )));
    }
    for wing in &wings {
        let b = skel
            .events
            .get(wing)
            .ok_or_else(|| VerifyError::UnknownEvent(wing.clone()))?;
        if b.local_input.is_none() {
            return Err(VerifyError::MissingLocalInput(wing.clone()));
        }
        if b.local_output.is_none() {
            return Err(VerifyError::MissingLocalOutput(wing.clone()));
        }
    }
    Ok(BellShape { source, wings })
}

/// No-signalling on a Bell skeleton: the local-output marginal at the
/// unprobed wing must not depend on the input of `probe_at`.
pub fn check_no_signalling(
    skel: &Skeleton,
    interp: &Interpretation,
    probe_at: &str,
    tol: f64,
) -> Result<VerificationReport, VerifyError> {
    let shape = bell_shape(skel)?;
    let observed = if probe_at == shape.wings[0] {
        shape.wings[1].clone()
    } else if probe_at == shape.wings[1] {
        shape.wings[0].clone()
    } else {
        return Err(VerifyError::NotBellShape(format!(
            "`{probe_at}` is not a wing of the Bell skeleton"
        )));
    };
    let affect = check_affect(skel, probe_at, &observed, interp, &[], tol)?;
    Ok(VerificationReport {
        kind: CheckKind::NoSignalling,
        passed: affect.passed,
        max_deviation: affect.max_deviation,
        tolerance: tol,
        details: CheckDetails::NoSignalling {
            probed: probe_at.to_string(),
            observed,
        },
    })
}

/// Resolve a subset of boxes given by labels.
pub fn subset_by_labels(c: &Circuit, labels: &[&str]) -> Result<BTreeSet<BoxId>, VerifyError> {
    labels
        .iter()
        .map(|l| {
            c.find_box(l)
                .ok_or_else(|| VerifyError::UnknownBox((*l).to_string()))
        })
        .collect()
}

/// Terminality report for one named signature under an interpretation.
pub fn check_terminality(
    sig: &BoxSignature,
    interp: &Interpretation,
    tol: f64,
) -> Result<VerificationReport, VerifyError> {
    let r = interp.is_terminal_box(sig, tol)?;
    Ok(VerificationReport::from_deviation(
        CheckKind::Terminality,
        r.max_deviation,
        tol,
        CheckDetails::Terminality {
            box_name: sig.name().to_string(),
            worst_input: r.worst_input,
        },
    ))
}

/// True when every box of the circuit lies in `past(e)`, in which case the
/// factorization holds syntactically.
pub fn subset_is_saturating(c: &Circuit, e: &BTreeSet<BoxId>) -> Result<bool, VerifyError> {
    Ok(past(c, e)?.len() == c.box_count())
}
