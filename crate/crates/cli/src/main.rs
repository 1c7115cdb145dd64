//! Command-line driver: parse theory files, run checks, emit reports.
//!
//! Exit status: 0 when every requested check passes, 1 when at least one
//! check fails, 2 for usage, parse, or input errors.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use causeway_cli::demos;
use causeway_cli::format::{parse_theory, CircuitEntry, TheoryFile};
use causeway_cli::report::{input_digest, CheckRecord, RewriteReport, StructuredReport};
use causeway_core::diagram::{BoxId, Circuit};
use causeway_core::order::Skeleton;
use causeway_core::rewrite::{eliminate, TieBreak};
use causeway_core::semantics::Backend;
use causeway_core::verify::{
    check_affect, check_all_factorizations, check_factorization, check_no_signalling,
    check_sampled_factorizations, check_terminality, VerificationReport, VerifyError,
    DEFAULT_TOLERANCE,
};

/// Subsets sampled when a circuit is too large to enumerate exhaustively.
const DEFAULT_SAMPLES: usize = 256;

#[derive(Parser)]
#[command(
    name = "causeway",
    version,
    about = "Verify causal-structure factorization and terminality of process-theory circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    #[default]
    Text,
    Structured,
}

#[derive(Args)]
struct CommonOpts {
    /// Absolute tolerance for tensor comparison.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Report format.
    #[arg(long, value_enum, default_value_t)]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification checks against a theory file.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Built-in demonstration scenarios.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Eliminate boxes outside past(E) and report the rewrite trace.
    Rewrite {
        file: PathBuf,
        /// Circuit to rewrite.
        #[arg(long)]
        circuit: String,
        /// Comma-separated box labels; an empty string is the empty subset.
        #[arg(long)]
        subset: String,
        /// Print one line per rewrite step.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Check terminality of declared box payloads.
    Terminality {
        file: PathBuf,
        /// Restrict to one declared box.
        #[arg(long = "box")]
        box_name: Option<String>,
        /// Restrict to one backend.
        #[arg(long)]
        backend: Option<Backend>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Check the causal-structure factorization over subsets of boxes.
    Causal {
        file: PathBuf,
        #[arg(long)]
        circuit: String,
        #[arg(long)]
        backend: Option<Backend>,
        /// One subset: comma-separated box labels ("" for the empty subset).
        #[arg(long, group = "subsets")]
        subset: Option<String>,
        /// Every subset (the default; circuits up to 12 boxes).
        #[arg(long, group = "subsets")]
        all: bool,
        /// A seeded random sample of subsets.
        #[arg(long, group = "subsets", value_name = "N")]
        sample: Option<usize>,
        /// Seed for --sample.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Check whether varying one event's input can affect another's output.
    Affect {
        file: PathBuf,
        #[arg(long)]
        circuit: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        backend: Option<Backend>,
        #[command(flatten)]
        common: CommonOpts,
    },
}

#[derive(Subcommand)]
enum DemoCommand {
    /// No-signalling in the two-wing scenario with a common source.
    Bell {
        #[arg(long, default_value = "stochastic")]
        backend: Backend,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Future-to-past signalling through a cup/cap pair in the raw backend.
    Counterexample {
        #[command(flatten)]
        common: CommonOpts,
    },
}

/// A non-zero exit with a message on the diagnostic stream.
struct Failure {
    message: String,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            message: e.to_string(),
        }
    }
}

fn fail(message: impl Into<String>) -> Failure {
    Failure {
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("causeway: {}", f.message);
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Check(check) => match check {
            CheckCommand::Terminality {
                file,
                box_name,
                backend,
                common,
            } => cmd_terminality(&file, box_name.as_deref(), backend, &common),
            CheckCommand::Causal {
                file,
                circuit,
                backend,
                subset,
                all,
                sample,
                seed,
                common,
            } => cmd_causal(&file, &circuit, backend, subset, all, sample, seed, &common),
            CheckCommand::Affect {
                file,
                circuit,
                from,
                to,
                backend,
                common,
            } => cmd_affect(&file, &circuit, &from, &to, backend, &common),
        },
        Command::Demo(demo) => match demo {
            DemoCommand::Bell { backend, common } => cmd_demo_bell(backend, &common),
            DemoCommand::Counterexample { common } => cmd_demo_counterexample(&common),
        },
        Command::Rewrite {
            file,
            circuit,
            subset,
            trace,
            common,
        } => cmd_rewrite(&file, &circuit, &subset, trace, &common),
    }
}

fn load(path: &PathBuf) -> Result<(TheoryFile, String), Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| fail(format!("cannot read `{}`: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| fail(format!("`{}` is not valid UTF-8", path.display())))?;
    let theory = parse_theory(&text).map_err(|d| fail(format!("{}: {d}", path.display())))?;
    Ok((theory, input_digest(&bytes)))
}

fn find_circuit<'a>(theory: &'a TheoryFile, name: &str) -> Result<&'a CircuitEntry, Failure> {
    theory.circuit(name).ok_or_else(|| {
        let known = theory.circuit_names().join(", ");
        fail(format!("unknown circuit `{name}` (declared: {known})"))
    })
}

/// Pick the backend: the flag if given, otherwise the unique backend whose
/// payloads cover every generic box of the circuit.
fn resolve_backend(
    theory: &TheoryFile,
    entry: &CircuitEntry,
    flag: Option<Backend>,
) -> Result<Backend, Failure> {
    if let Some(b) = flag {
        return Ok(b);
    }
    let covered = theory.covered_backends(entry);
    match covered.as_slice() {
        [unique] => Ok(*unique),
        [] => Err(fail(
            "no backend has payloads for every box of this circuit; supply them or pass --backend",
        )),
        many => {
            let names: Vec<&str> = many.iter().map(|b| b.name()).collect();
            Err(fail(format!(
                "several backends cover this circuit ({}); pass --backend",
                names.join(", ")
            )))
        }
    }
}

fn parse_subset(c: &Circuit, spec: &str) -> Result<BTreeSet<BoxId>, Failure> {
    let mut subset = BTreeSet::new();
    for label in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let id = c
            .find_box(label)
            .ok_or_else(|| fail(format!("unknown box `{label}` in --subset")))?;
        subset.insert(id);
    }
    Ok(subset)
}

fn emit(
    digest: String,
    tol: f64,
    seed: Option<u64>,
    checks: Vec<CheckRecord>,
    format: OutputFormat,
) -> bool {
    let report = StructuredReport::new(digest, tol, seed, checks);
    match format {
        OutputFormat::Text => print!("{}", report.to_text()),
        OutputFormat::Structured => print!("{}", report.to_json()),
    }
    report.passed
}

fn cmd_terminality(
    file: &PathBuf,
    box_name: Option<&str>,
    backend: Option<Backend>,
    common: &CommonOpts,
) -> Result<bool, Failure> {
    let (theory, digest) = load(file)?;
    let backends: Vec<Backend> = match backend {
        Some(b) => vec![b],
        None => vec![Backend::Stochastic, Backend::Quantum, Backend::Raw],
    };
    let decls: Vec<_> = match box_name {
        Some(name) => vec![theory
            .box_decl(name)
            .ok_or_else(|| fail(format!("unknown box `{name}`")))?],
        None => theory.box_decls().collect(),
    };
    let mut checks = Vec::new();
    for b in backends {
        let interp = theory.base_interpretation(b);
        for decl in &decls {
            if !decl.payloads.contains_key(&b) {
                continue;
            }
            let report = check_terminality(&decl.signature, &interp, common.tol)?;
            checks.push(CheckRecord::from_report(&report).with_backend(b));
        }
    }
    if checks.is_empty() {
        return Err(fail(
            "no payloads to check; declare some or adjust --box/--backend",
        ));
    }
    Ok(emit(digest, common.tol, None, checks, common.format))
}

#[allow(clippy::too_many_arguments)]
fn cmd_causal(
    file: &PathBuf,
    circuit: &str,
    backend: Option<Backend>,
    subset: Option<String>,
    all: bool,
    sample: Option<usize>,
    seed: u64,
    common: &CommonOpts,
) -> Result<bool, Failure> {
    let (theory, digest) = load(file)?;
    let entry = find_circuit(&theory, circuit)?;
    let b = resolve_backend(&theory, entry, backend)?;
    let interp = theory.interpretation_for(entry, b);
    let c = &entry.circuit;

    let (reports, used_seed): (Vec<VerificationReport>, Option<u64>) = if let Some(spec) = subset {
        let e = parse_subset(c, &spec)?;
        (vec![check_factorization(c, &e, &interp, common.tol)?], None)
    } else if let Some(n) = sample {
        (
            check_sampled_factorizations(c, &interp, common.tol, n, seed)?,
            Some(seed),
        )
    } else if all {
        (check_all_factorizations(c, &interp, common.tol)?, None)
    } else {
        // Default: every subset while that is tractable, otherwise a seeded
        // sample whose seed the report records.
        match check_all_factorizations(c, &interp, common.tol) {
            Ok(reports) => (reports, None),
            Err(VerifyError::SubsetExplosion { .. }) => {
                eprintln!(
                    "causeway: {} boxes exceed the exhaustive bound; sampling {DEFAULT_SAMPLES} subsets with seed {seed}",
                    c.box_count()
                );
                (
                    check_sampled_factorizations(c, &interp, common.tol, DEFAULT_SAMPLES, seed)?,
                    Some(seed),
                )
            }
            Err(other) => return Err(other.into()),
        }
    };
    let checks = reports
        .iter()
        .map(|r| {
            CheckRecord::from_report(r)
                .with_circuit(circuit)
                .with_backend(b)
        })
        .collect();
    Ok(emit(digest, common.tol, used_seed, checks, common.format))
}

fn skeleton_of<'a>(entry: &'a CircuitEntry, name: &str) -> Result<&'a Skeleton, Failure> {
    entry.skeleton.as_ref().map(|s| &s.skeleton).ok_or_else(|| {
        fail(format!(
            "circuit `{name}` is not a skeleton; affect checks need event boxes with local ports"
        ))
    })
}

fn cmd_affect(
    file: &PathBuf,
    circuit: &str,
    from: &str,
    to: &str,
    backend: Option<Backend>,
    common: &CommonOpts,
) -> Result<bool, Failure> {
    let (theory, digest) = load(file)?;
    let entry = find_circuit(&theory, circuit)?;
    let skel = skeleton_of(entry, circuit)?;
    let b = resolve_backend(&theory, entry, backend)?;
    let interp = theory.interpretation_for(entry, b);
    let report = check_affect(skel, from, to, &interp, &[], common.tol)?;
    let checks = vec![CheckRecord::from_report(&report)
        .with_circuit(circuit)
        .with_backend(b)];
    Ok(emit(digest, common.tol, None, checks, common.format))
}

fn cmd_demo_bell(backend: Backend, common: &CommonOpts) -> Result<bool, Failure> {
    let skel = demos::bell_skeleton();
    let interp = demos::bell_interpretation(backend)
        .ok_or_else(|| fail("demo bell supports --backend stochastic or quantum"))?;
    let mut checks = Vec::new();
    for probe_at in ["A", "B"] {
        let r = check_no_signalling(&skel, &interp, probe_at, common.tol)?;
        checks.push(
            CheckRecord::from_report(&r)
                .with_circuit("bell")
                .with_backend(backend),
        );
    }
    // The no-signalling statements are instances of the factorization at the
    // single-wing subsets; report those too.
    for wing in ["A", "B"] {
        let id = skel.circuit.find_box(wing).expect("wings are event boxes");
        let e: BTreeSet<BoxId> = [id].into_iter().collect();
        let r = check_factorization(&skel.circuit, &e, &interp, common.tol)?;
        checks.push(
            CheckRecord::from_report(&r)
                .with_circuit("bell")
                .with_backend(backend),
        );
    }
    Ok(emit(
        "builtin:bell".to_string(),
        common.tol,
        None,
        checks,
        common.format,
    ))
}

fn cmd_demo_counterexample(common: &CommonOpts) -> Result<bool, Failure> {
    let (skel, interp) = demos::teleport_skeleton();
    let mut checks = Vec::new();
    // Probing the later event's input moves the earlier event's output.
    let affect = check_affect(&skel, "B", "A", &interp, &[], common.tol)?;
    checks.push(
        CheckRecord::from_report(&affect)
            .with_circuit("teleport")
            .with_backend(Backend::Raw),
    );
    // The factorization at E = {A} breaks by a full unit.
    let a = skel.circuit.find_box("A").expect("event box");
    let e: BTreeSet<BoxId> = [a].into_iter().collect();
    let fact = check_factorization(&skel.circuit, &e, &interp, common.tol)?;
    checks.push(
        CheckRecord::from_report(&fact)
            .with_circuit("teleport")
            .with_backend(Backend::Raw),
    );
    Ok(emit(
        "builtin:counterexample".to_string(),
        common.tol,
        None,
        checks,
        common.format,
    ))
}

fn cmd_rewrite(
    file: &PathBuf,
    circuit: &str,
    subset: &str,
    trace: bool,
    common: &CommonOpts,
) -> Result<bool, Failure> {
    let (theory, digest) = load(file)?;
    let entry = find_circuit(&theory, circuit)?;
    let e = parse_subset(&entry.circuit, subset)?;
    let result = eliminate(&entry.circuit, &e, TieBreak::Lexicographic)?;
    let subset_labels: Vec<String> = e
        .iter()
        .map(|&b| entry.circuit.label(b).to_string())
        .collect();
    let report = RewriteReport::new(digest, circuit, subset_labels, &result);
    match common.format {
        OutputFormat::Text => print!("{}", report.to_text(trace)),
        OutputFormat::Structured => print!("{}", report.to_json()),
    }
    Ok(true)
}
