//! Report emission: human-readable text and a machine-readable structured
//! (JSON) form. Structured reports are byte-deterministic for identical
//! inputs: field order is fixed, maps are avoided, and no timestamps or
//! environment data are included.

use serde::Serialize;
use sha2::{Digest, Sha256};

use causeway_core::rewrite::FactorizationResult;
use causeway_core::verify::{CheckDetails, VerificationReport};

pub const TOOL_NAME: &str = "causeway";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `sha256:<hex>` digest of the raw input bytes.
pub fn input_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("sha256:{:x}", hasher.finalize())
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub kind: &'static str,
    pub passed: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_input: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probed: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<String>,
}

impl CheckRecord {
    pub fn from_report(r: &VerificationReport) -> CheckRecord {
        let mut record = CheckRecord {
            kind: r.kind.name(),
            passed: r.passed,
            max_deviation: r.max_deviation,
            tolerance: r.tolerance,
            circuit: None,
            subset: None,
            box_name: None,
            backend: None,
            worst_input: None,
            from: None,
            to: None,
            probe_count: None,
            probed: None,
            observed: None,
        };
        match &r.details {
            CheckDetails::Terminality {
                box_name,
                worst_input,
            } => {
                record.box_name = Some(box_name.clone());
                record.worst_input = Some(worst_input.clone());
            }
            CheckDetails::Factorization { subset } => {
                record.subset = Some(subset.clone());
            }
            CheckDetails::Affect {
                from,
                to,
                probe_count,
            } => {
                record.from = Some(from.clone());
                record.to = Some(to.clone());
                record.probe_count = Some(*probe_count);
            }
            CheckDetails::NoSignalling { probed, observed } => {
                record.probed = Some(probed.clone());
                record.observed = Some(observed.clone());
            }
        }
        record
    }

    pub fn with_circuit(mut self, circuit: &str) -> Self {
        self.circuit = Some(circuit.to_string());
        self
    }

    pub fn with_backend(mut self, backend: impl ToString) -> Self {
        self.backend = Some(backend.to_string());
        self
    }

    /// One text line: verdict, kind, context, deviation.
    pub fn text_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut ctx = Vec::new();
        if let Some(c) = &self.circuit {
            ctx.push(format!("circuit={c}"));
        }
        if let Some(b) = &self.backend {
            ctx.push(format!("backend={b}"));
        }
        if let Some(b) = &self.box_name {
            ctx.push(format!("box={b}"));
        }
        if let Some(s) = &self.subset {
            ctx.push(format!("E={{{}}}", s.join(",")));
        }
        if let (Some(f), Some(t)) = (&self.from, &self.to) {
            ctx.push(format!("from={f} to={t}"));
        }
        if let (Some(p), Some(o)) = (&self.probed, &self.observed) {
            ctx.push(format!("probe={p} observe={o}"));
        }
        format!(
            "[{verdict}] {} {} max_dev={:e} tol={:e}",
            self.kind,
            ctx.join(" "),
            self.max_deviation,
            self.tolerance,
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuredReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub input_digest: String,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

impl StructuredReport {
    pub fn new(
        digest: String,
        tolerance: f64,
        seed: Option<u64>,
        checks: Vec<CheckRecord>,
    ) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        StructuredReport {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            input_digest: digest,
            tolerance,
            seed,
            checks,
            passed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is total");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for check in &self.checks {
            out.push_str(&check.text_line());
            out.push('\n');
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        out.push_str(&format!(
            "overall: {} ({passed}/{} checks passed)\n",
            if self.passed { "PASS" } else { "FAIL" },
            self.checks.len(),
        ));
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub eliminated: String,
    pub discards_introduced: Vec<String>,
    pub remaining: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RewriteReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub input_digest: String,
    pub circuit: String,
    pub subset: Vec<String>,
    pub steps: Vec<StepRecord>,
    pub outputs: Vec<String>,
    pub live_inputs: Vec<String>,
    pub discarded_inputs: Vec<String>,
}

impl RewriteReport {
    pub fn new(
        digest: String,
        circuit_name: &str,
        subset: Vec<String>,
        result: &FactorizationResult,
    ) -> Self {
        let traced = &result.result;
        let outputs = traced
            .output_origins
            .iter()
            .map(|o| format!("{}.out[{}]", o.box_label, o.index))
            .collect();
        let discarded: Vec<String> = result
            .discarded_inputs
            .iter()
            .map(|o| format!("{}.in[{}]", o.box_label, o.index))
            .collect();
        let live_inputs = traced
            .input_origins
            .iter()
            .map(|o| format!("{}.in[{}]", o.box_label, o.index))
            .filter(|p| !discarded.contains(p))
            .collect();
        RewriteReport {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            input_digest: digest,
            circuit: circuit_name.to_string(),
            subset,
            steps: result
                .trace
                .iter()
                .map(|s| StepRecord {
                    eliminated: s.eliminated.clone(),
                    discards_introduced: s.discards_introduced.clone(),
                    remaining: s.remaining.iter().cloned().collect(),
                })
                .collect(),
            outputs,
            live_inputs,
            discarded_inputs: discarded,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is total");
        s.push('\n');
        s
    }

    pub fn to_text(&self, show_trace: bool) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "rewrite: circuit={} E={{{}}} steps={}\n",
            self.circuit,
            self.subset.join(","),
            self.steps.len(),
        ));
        if show_trace {
            for (i, s) in self.steps.iter().enumerate() {
                out.push_str(&format!(
                    "  step {}: eliminate {} (discards on {}; {} boxes remain)\n",
                    i + 1,
                    s.eliminated,
                    if s.discards_introduced.is_empty() {
                        "nothing".to_string()
                    } else {
                        s.discards_introduced.join(", ")
                    },
                    s.remaining.len(),
                ));
            }
        }
        out.push_str(&format!("  outputs: {}\n", brace_list(&self.outputs)));
        out.push_str(&format!(
            "  live inputs: {}\n",
            brace_list(&self.live_inputs)
        ));
        out.push_str(&format!(
            "  discarded inputs: {}\n",
            brace_list(&self.discarded_inputs)
        ));
        out
    }
}

fn brace_list(items: &[String]) -> String {
    format!("{{{}}}", items.join(", "))
}
