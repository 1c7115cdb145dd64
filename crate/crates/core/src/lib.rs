//! Process-theory circuits with causal-order analysis and numerical
//! verification.
//!
//! The crate is organized around one question: does discarding all outputs of
//! a circuit except those of a chosen subset `E` of boxes make the circuit
//! factor into its `past(E)` part and discards on everything else? That
//! factorization holds for every circuit and every subset exactly when every
//! generator is *terminal* — discarding a box's outputs is the same as
//! discarding its inputs.
//!
//! * [`diagram`] — typed circuits (DAGs of boxes) with composition and the
//!   designated discarding generator.
//! * [`order`] — causal orders, circuit skeletons, the wire-path box order,
//!   causal pasts, and maximal boxes.
//! * [`tensor`] — dense complex tensors and tolerance comparison.
//! * [`semantics`] — stochastic, quantum (Kraus), and raw linear backends;
//!   circuit evaluation by contraction; terminality of payloads.
//! * [`rewrite`] — the terminality rewrite that eliminates maximal boxes
//!   outside `past(E)`, with step traces.
//! * [`verify`] — factorization, affect, and no-signalling checks with
//!   witnessed reports.
//!
//! ```
//! use causeway_core::diagram::{BoxSignature, Circuit, WireType};
//! use causeway_core::semantics::{Backend, Interpretation, Payload, StochasticBox};
//! use causeway_core::verify::check_all_factorizations;
//!
//! let a = WireType::new("A", 2)?;
//! let circuit = Circuit::single(BoxSignature::generic("f", vec![a.clone()], vec![a]));
//! let interp = Interpretation::new(Backend::Stochastic).with_payload(
//!     "f",
//!     Payload::Stochastic(StochasticBox::new(2, 2, vec![0.4, 0.9, 0.6, 0.1])?),
//! );
//! for report in check_all_factorizations(&circuit, &interp, 1e-9)? {
//!     assert!(report.passed);
//! }
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod diagram;
pub mod order;
pub mod rewrite;
pub mod semantics;
pub mod tensor;
pub mod verify;

pub use diagram::{
    build_circuit, BoxId, BoxInstance, BoxKind, BoxSignature, Circuit, CircuitBuilder,
    DiagramError, InPort, OutPort, TypeTable, Wire, WireType,
};
pub use order::{
    box_order, is_downward_closed, maximal_boxes, past, skeleton_from_order, BoxOrder, CausalOrder,
    EventBinding, EventBoxMap, OrderError, Skeleton, SkeletonTyping,
};
pub use rewrite::{
    build_phi_prime, capped_circuit, eliminate, factored_circuit, restrict_to_past, FactoredShape,
    FactorizationResult, PortOrigin, RewriteError, RewriteStep, TieBreak, TracedCircuit,
};
pub use semantics::{
    box_tensor, discard_tensor, evaluate, evaluate_with_order, is_terminal, Backend, CMatrix,
    EvalError, Interpretation, Payload, QuantumBox, RawBox, StochasticBox, TerminalityReport,
};
pub use tensor::{tensors_equal, Tensor, TensorComparison};
pub use verify::{
    check_affect, check_all_factorizations, check_factorization, check_no_signalling,
    check_sampled_factorizations, check_terminality, default_context_state, default_probes,
    subset_by_labels, BellShape, CheckDetails, CheckKind, VerificationReport, VerifyError,
    DEFAULT_TOLERANCE, SUBSET_ENUMERATION_CAP,
};
