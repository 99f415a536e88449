//! Command-line driver: `infer`, `eval`, `check` and `suite`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::check::check;
use crate::eval::{AnswerKind, EvalOutcome, Machine, TraceStep};
use crate::expr::Expr;
use crate::infer::{generalize, infer_with, Env, InferOptions, InferResult, TypeError};
use crate::surface::{parse_expr_with, print_expr, ParseError, ParseOptions, Parsed, SourceSpan, Namer};
use crate::testkit::{run_metatheory_suite_with, Features, GenConfig, SuiteOptions};
use crate::types::Supply;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TYPE_ERROR: i32 = 2;
pub const EXIT_PARSE_ERROR: i32 = 3;
pub const EXIT_EXCEPTION: i32 = 4;
pub const EXIT_FAULTY: i32 = 5;
pub const EXIT_FUEL: i32 = 6;

#[derive(Parser, Debug)]
#[command(name = "effrow", version, about = "Type inference and evaluation for a row-polymorphic effect calculus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the principal type scheme and effect of a program.
    Infer(InputArgs),
    /// Type-check, then evaluate a program.
    Eval(EvalArgs),
    /// Infer, elaborate and re-check the typing derivation.
    Check(InputArgs),
    /// Run the metatheory properties over generated programs.
    Suite(SuiteArgs),
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Program text.
    #[arg(short = 'e', long = "expr", conflicts_with = "file")]
    pub expr: Option<String>,
    /// Program file.
    pub file: Option<PathBuf>,
    /// Emit machine-readable output.
    #[arg(long)]
    pub json: bool,
    /// Accept heaps, `#rN` references and partial applications.
    #[arg(long)]
    pub debug: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 100_000)]
    pub fuel: usize,
    /// Print every reduction step with its rule.
    #[arg(long)]
    pub trace: bool,
    /// Evaluate even when the program does not type-check.
    #[arg(long = "unsafe")]
    pub unsafe_: bool,
}

#[derive(Args, Debug)]
pub struct SuiteArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Effects generated programs may have, e.g. `exn,st`.
    #[arg(long, default_value = "exn,st,div")]
    pub allow: String,
    #[arg(long, default_value_t = 100_000)]
    pub fuel: usize,
    #[arg(long)]
    pub json: bool,
    /// Write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
}

impl Diagnostic {
    fn new(kind: &str, message: String, span: Option<SourceSpan>) -> Diagnostic {
        Diagnostic {
            kind: kind.into(),
            message,
            line: span.map(|s| s.line),
            column: span.map(|s| s.column),
            start: span.map(|s| s.start),
            end: span.map(|s| s.end),
        }
    }
}

/// The `--json` document.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Output {
    pub scheme: Option<String>,
    pub effect: Option<String>,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Runs the command line `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let mut io = Io { out, err };
    match cli.command {
        Command::Infer(a) => cmd_infer(&a, &mut io),
        Command::Eval(a) => cmd_eval(&a, &mut io),
        Command::Check(a) => cmd_check(&a, &mut io),
        Command::Suite(a) => cmd_suite(&a, &mut io),
    }
}

fn read_input(a: &InputArgs) -> Result<String, String> {
    match (&a.expr, &a.file) {
        (Some(e), None) => Ok(e.clone()),
        (None, Some(p)) => std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display())),
        _ => Err("give exactly one of -e TEXT or a file path".into()),
    }
}

enum Front {
    Typed(Parsed, InferResult),
    Untyped(Parsed, TypeError),
}

/// Parses and infers; on failure reports and yields the exit code.
fn front(a: &InputArgs, io: &mut Io, doc: &mut Output) -> Result<Front, i32> {
    let text = match read_input(a) {
        Ok(t) => t,
        Err(m) => {
            let _ = writeln!(io.err, "error: {m}");
            return Err(EXIT_USAGE);
        }
    };
    let parsed = match parse_expr_with(&text, ParseOptions { debug: a.debug }) {
        Ok(p) => p,
        Err(e) => {
            doc.diagnostics.push(parse_diagnostic(&e));
            return Err(EXIT_PARSE_ERROR);
        }
    };
    let opts = if a.debug { InferOptions::INTERNAL } else { InferOptions::SURFACE };
    match infer_with(&Env::new(), &parsed.expr, &mut Supply::new(), opts) {
        Ok(r) => {
            let mut namer = Namer::new();
            doc.scheme = Some(namer.print_scheme(&generalize(&Env::new(), &r.ty)));
            doc.effect = Some(namer.print_effect(&r.effect));
            Ok(Front::Typed(parsed, r))
        }
        Err(e) => Ok(Front::Untyped(parsed, e)),
    }
}

fn parse_diagnostic(e: &ParseError) -> Diagnostic {
    let mut message = e.message.clone();
    if !e.expected.is_empty() {
        message.push_str(&format!(" (expected {})", e.expected.join(", ")));
    }
    Diagnostic::new("parse", message, Some(e.span))
}

fn type_diagnostic(p: &Parsed, e: &TypeError) -> Diagnostic {
    Diagnostic::new("type", e.kind.to_string(), p.span(e.node))
}

fn finish(io: &mut Io, json: bool, doc: &Output, code: i32) -> i32 {
    if json {
        let text = serde_json::to_string_pretty(doc).expect("output serializes");
        let _ = writeln!(io.out, "{text}");
        return code;
    }
    for d in &doc.diagnostics {
        let at = match (d.line, d.column) {
            (Some(l), Some(c)) => format!(" at {l}:{c}"),
            _ => String::new(),
        };
        let _ = writeln!(io.err, "{} error{at}: {}", d.kind, d.message);
    }
    code
}

fn cmd_infer(a: &InputArgs, io: &mut Io) -> i32 {
    let mut doc = Output::default();
    let code = match front(a, io, &mut doc) {
        Err(code) => code,
        Ok(Front::Untyped(p, e)) => {
            doc.diagnostics.push(type_diagnostic(&p, &e));
            EXIT_TYPE_ERROR
        }
        Ok(Front::Typed(..)) => {
            if !a.json {
                let _ = writeln!(io.out, "{}", doc.scheme.as_deref().unwrap_or_default());
                let _ = writeln!(io.out, "effect: {}", doc.effect.as_deref().unwrap_or_default());
            }
            EXIT_OK
        }
    };
    finish(io, a.json, &doc, code)
}

fn cmd_check(a: &InputArgs, io: &mut Io) -> i32 {
    let mut doc = Output::default();
    let code = match front(a, io, &mut doc) {
        Err(code) => code,
        Ok(Front::Untyped(p, e)) => {
            doc.diagnostics.push(type_diagnostic(&p, &e));
            EXIT_TYPE_ERROR
        }
        Ok(Front::Typed(_, r)) => match check(&Env::new(), &r.elaborated, &r.ty, &r.effect) {
            Ok(d) => {
                if !a.json {
                    let _ = writeln!(io.out, "{}", doc.scheme.as_deref().unwrap_or_default());
                    let _ = writeln!(io.out, "effect: {}", doc.effect.as_deref().unwrap_or_default());
                    let _ = writeln!(io.out, "derivation: {} rules, root ({})", d.size(), d.rule);
                }
                EXIT_OK
            }
            Err(e) => {
                doc.diagnostics.push(Diagnostic::new("check", e.to_string(), None));
                EXIT_TYPE_ERROR
            }
        },
    };
    finish(io, a.json, &doc, code)
}

fn cmd_eval(a: &EvalArgs, io: &mut Io) -> i32 {
    let mut doc = Output::default();
    let expr: Expr = match front(&a.input, io, &mut doc) {
        Err(code) => return finish(io, a.input.json, &doc, code),
        Ok(Front::Typed(p, _)) => p.expr,
        Ok(Front::Untyped(p, e)) => {
            doc.diagnostics.push(type_diagnostic(&p, &e));
            if !a.unsafe_ {
                return finish(io, a.input.json, &doc, EXIT_TYPE_ERROR);
            }
            p.expr
        }
    };
    let mut trace: Vec<TraceStep> = Vec::new();
    let outcome = Machine::for_term(&expr).evaluate(&expr, a.fuel, a.trace.then_some(&mut trace));
    if a.trace && !a.input.json {
        for s in &trace {
            let _ = writeln!(io.out, "[{}] {}", s.rule, print_expr(&s.term));
        }
    }
    doc.steps = Some(outcome.steps());
    let (code, line) = match &outcome {
        EvalOutcome::Finished { answer, kind, .. } => {
            doc.answer = Some(print_expr(answer));
            doc.outcome = Some(kind.to_string());
            let code = match kind {
                AnswerKind::Value | AnswerKind::HeapValue => EXIT_OK,
                AnswerKind::Exception | AnswerKind::HeapException => EXIT_EXCEPTION,
            };
            (code, print_expr(answer))
        }
        EvalOutcome::Faulty { reason, at, .. } => {
            doc.outcome = Some(format!("faulty: {reason}"));
            doc.diagnostics.push(Diagnostic::new("faulty", format!("{reason} at `{}`", print_expr(at)), None));
            (EXIT_FAULTY, format!("faulty: {reason} at `{}`", print_expr(at)))
        }
        EvalOutcome::FuelExhausted { steps, .. } => {
            doc.outcome = Some("fuel exhausted".into());
            (EXIT_FUEL, format!("fuel exhausted after {steps} steps"))
        }
        EvalOutcome::Stuck { at, .. } => {
            doc.outcome = Some("stuck".into());
            doc.diagnostics.push(Diagnostic::new("stuck", format!("no rule applies to `{}`", print_expr(at)), None));
            (EXIT_FAULTY, format!("stuck at `{}`", print_expr(at)))
        }
    };
    if a.input.json {
        return finish(io, true, &doc, code);
    }
    let _ = writeln!(io.out, "{line}");
    let _ = writeln!(
        io.out,
        "-- {} in {} steps",
        doc.outcome.as_deref().unwrap_or_default(),
        outcome.steps()
    );
    for d in &doc.diagnostics {
        if d.kind == "type" {
            let _ = writeln!(io.err, "warning: evaluated despite type error: {}", d.message);
        }
    }
    code
}

fn cmd_suite(a: &SuiteArgs, io: &mut Io) -> i32 {
    let allow = match Features::parse(&a.allow) {
        Ok(f) => f,
        Err(m) => {
            let _ = writeln!(io.err, "error: {m}");
            return EXIT_USAGE;
        }
    };
    let cfg = match GenConfig::new(a.seed, a.depth, allow) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let opts = SuiteOptions { fuel: a.fuel, ..SuiteOptions::default() };
    let report = run_metatheory_suite_with(a.n, &cfg, opts);
    if let Some(path) = &a.out {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            let _ = writeln!(io.err, "error: cannot write {}: {e}", path.display());
            return EXIT_USAGE;
        }
    }
    if a.json {
        let _ = writeln!(io.out, "{}", report.to_json());
    } else {
        let _ = writeln!(io.out, "terms: {} (seed {}, depth {}, allow {})", report.terms, a.seed, a.depth, allow);
        let rows = [
            ("subject reduction", &report.subject_reduction),
            ("exceptions", &report.exceptions),
            ("state", &report.state),
            ("divergence", &report.divergence),
            ("faulty catalogue", &report.faulty),
        ];
        for (name, p) in rows {
            let _ = writeln!(io.out, "{name}: {} checked, {} violations", p.checked, p.violations);
            for c in &p.counterexamples {
                let _ = writeln!(io.out, "  {}\n    {}", c.term, c.detail);
            }
        }
        if report.generation_failures > 0 {
            let _ = writeln!(io.out, "generation failures: {}", report.generation_failures);
        }
        let _ = writeln!(io.out, "max steps: {}", report.max_steps);
    }
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_USAGE
    }
}
