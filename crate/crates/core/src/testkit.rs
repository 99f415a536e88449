//! Random well-typed programs and the property harness over them.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::check::validate_expr;
use crate::eval::{AnswerKind, EvalOutcome, FaultReason, Machine, StepResult};
use crate::expr::{app, apps, catch, constant, int, lam, let_, read, run, unit, Const, Expr};
use crate::infer::{infer, infer_internal, Env, TypeErrorKind};
use crate::rows::row_parts;
use crate::surface::{parse_expr_debug, print_expr};
use crate::types::{Supply, TyCon, Type};

pub const MAX_DEPTH: usize = 8;
const RETRIES: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Features {
    pub exn: bool,
    pub st: bool,
    pub div: bool,
}

impl Features {
    pub const NONE: Features = Features { exn: false, st: false, div: false };
    pub const ALL: Features = Features { exn: true, st: true, div: true };

    pub fn with_exn(self) -> Features {
        Features { exn: true, ..self }
    }

    pub fn with_st(self) -> Features {
        Features { st: true, ..self }
    }

    pub fn is_subset(self, other: Features) -> bool {
        (!self.exn || other.exn) && (!self.st || other.st) && (!self.div || other.div)
    }

    /// The features named by the labels of an effect row.
    pub fn of_effect(row: &Type) -> Features {
        let mut f = Features::NONE;
        for l in row_parts(row).0 {
            match l.head() {
                Some(TyCon::Exn) => f.exn = true,
                Some(TyCon::Div) => f.div = true,
                Some(TyCon::St) => f.st = true,
                _ => {}
            }
        }
        f
    }

    /// Parses a comma-separated list such as `exn,st`.
    pub fn parse(s: &str) -> Result<Features, String> {
        let mut f = Features::NONE;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "exn" => f.exn = true,
                "st" => f.st = true,
                "div" => f.div = true,
                "all" => f = Features::ALL,
                "none" => {}
                other => return Err(format!("unknown effect feature `{other}`")),
            }
        }
        Ok(f)
    }
}

impl fmt::Display for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.exn, "exn"), (self.st, "st"), (self.div, "div")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub max_depth: usize,
    pub allow: Features,
    pub constant_universe: Vec<Const>,
}

impl GenConfig {
    pub fn new(seed: u64, max_depth: usize, allow: Features) -> Result<GenConfig, GenError> {
        if max_depth > MAX_DEPTH {
            return Err(GenError::DepthTooLarge(max_depth));
        }
        Ok(GenConfig { seed, max_depth, allow, constant_universe: default_universe() })
    }
}

pub fn default_universe() -> Vec<Const> {
    vec![
        Const::Fix,
        Const::Throw,
        Const::Ref,
        Const::Read,
        Const::Assign,
        Const::Inc,
        Const::Dec,
        Const::Add,
        Const::If0,
    ]
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("maximum depth {0} exceeds {MAX_DEPTH}")]
    DepthTooLarge(usize),
    #[error("target type {0} is outside the generator's universe")]
    UnsupportedTarget(String),
    #[error("no well-typed term found after {0} attempts")]
    Exhausted(usize),
}

/// Ground shapes the generator works with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    Unit,
    Int,
    Fun(Box<Shape>, Box<Shape>),
    Ref(Box<Shape>),
}

impl Shape {
    pub fn of_type(t: &Type) -> Option<Shape> {
        match t {
            Type::Con(TyCon::Unit) => Some(Shape::Unit),
            Type::Con(TyCon::Int) => Some(Shape::Int),
            Type::App(TyCon::Fun, a) => Some(Shape::fun(Shape::of_type(&a[0])?, Shape::of_type(&a[2])?)),
            Type::App(TyCon::Ref, a) => Some(Shape::Ref(Box::new(Shape::of_type(&a[1])?))),
            _ => None,
        }
    }

    fn fun(a: Shape, b: Shape) -> Shape {
        Shape::Fun(Box::new(a), Box::new(b))
    }

    fn mentions_ref(&self) -> bool {
        match self {
            Shape::Unit | Shape::Int => false,
            Shape::Ref(_) => true,
            Shape::Fun(a, b) => a.mentions_ref() || b.mentions_ref(),
        }
    }

    fn is_base(&self) -> bool {
        matches!(self, Shape::Unit | Shape::Int)
    }
}

#[derive(Clone, Copy)]
struct Pos {
    /// Effects the current position may perform.
    allow: Features,
    /// Effects allowed in the bodies of lambdas created here.
    latent: Features,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Choice {
    Var,
    Intro,
    App,
    Let,
    Bind,
    Seq,
    Prim,
    If0,
    LazyIf0,
    Throw,
    Catch,
    Run,
    Read,
    Assign,
    Loop,
    Diverge,
}

/// A deterministic stream of generated terms.
pub struct Generator {
    cfg: GenConfig,
    rng: ChaCha8Rng,
    names: usize,
}

impl Generator {
    pub fn new(cfg: GenConfig) -> Generator {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Generator { cfg, rng, names: 0 }
    }

    /// Generator for the `index`-th term of a corpus, independent of the others.
    pub fn for_index(cfg: GenConfig, index: u64) -> Generator {
        let mut g = Generator::new(cfg);
        g.rng.set_stream(index);
        g
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    /// A random target shape suitable for a whole program.
    pub fn target(&mut self) -> Shape {
        let mut opts = vec![Shape::Unit, Shape::Int, Shape::Int, Shape::fun(Shape::Int, Shape::Int)];
        if self.cfg.allow.st && self.has(Const::Ref) {
            opts.push(Shape::Ref(Box::new(Shape::Int)));
        }
        opts.choose(&mut self.rng).cloned().unwrap_or(Shape::Int)
    }

    pub fn term(&mut self, target: &Type) -> Result<Expr, GenError> {
        let shape = Shape::of_type(target).ok_or_else(|| GenError::UnsupportedTarget(format!("{target:?}")))?;
        self.term_of_shape(&shape)
    }

    pub fn term_of_shape(&mut self, shape: &Shape) -> Result<Expr, GenError> {
        if self.cfg.max_depth > MAX_DEPTH {
            return Err(GenError::DepthTooLarge(self.cfg.max_depth));
        }
        let pos = Pos { allow: self.cfg.allow, latent: self.cfg.allow };
        for _ in 0..RETRIES {
            self.names = 0;
            let Some(e) = self.gen(shape, self.cfg.max_depth, &[], pos) else { continue };
            if let Ok(r) = infer(&Env::new(), &e, &mut Supply::new()) {
                if Features::of_effect(&r.effect).is_subset(self.cfg.allow) {
                    return Ok(e);
                }
            }
        }
        Err(GenError::Exhausted(RETRIES))
    }

    fn has(&self, c: Const) -> bool {
        self.cfg.constant_universe.contains(&c)
    }

    fn fresh(&mut self, base: &str) -> String {
        self.names += 1;
        format!("{base}{}", self.names)
    }

    fn arg_shape(&mut self, pos: Pos, depth: usize) -> Shape {
        let mut opts = vec![(Shape::Int, 4), (Shape::Unit, 2)];
        if depth > 1 {
            opts.push((Shape::fun(Shape::Int, Shape::Int), 2));
            opts.push((Shape::fun(Shape::Unit, Shape::Int), 1));
        }
        if pos.allow.st && self.has(Const::Ref) {
            opts.push((Shape::Ref(Box::new(Shape::Int)), 2));
        }
        opts.choose_weighted(&mut self.rng, |(_, w)| *w).map(|(s, _)| s.clone()).unwrap_or(Shape::Int)
    }

    fn gen(&mut self, t: &Shape, depth: usize, vars: &[(String, Shape)], pos: Pos) -> Option<Expr> {
        let mut opts: Vec<(Choice, u32)> = Vec::new();
        let has_var = vars.iter().any(|(_, s)| s == t);
        if has_var {
            opts.push((Choice::Var, 3));
        }
        let can_intro = !matches!(t, Shape::Ref(_)) || (pos.allow.st && self.has(Const::Ref));
        if can_intro {
            opts.push((Choice::Intro, if depth == 0 { 4 } else { 2 }));
        }
        if depth > 0 {
            opts.push((Choice::App, 3));
            opts.push((Choice::Let, 2));
            opts.push((Choice::Bind, 1));
            opts.push((Choice::Seq, 1));
            if *t == Shape::Int && [Const::Inc, Const::Dec, Const::Add].iter().any(|c| self.has(*c)) {
                opts.push((Choice::Prim, 3));
            }
            if self.has(Const::If0) {
                opts.push((Choice::If0, 1));
                opts.push((Choice::LazyIf0, 1));
            }
            if pos.allow.exn && self.has(Const::Throw) {
                opts.push((Choice::Throw, 1));
            }
            opts.push((Choice::Catch, 1));
            if !t.mentions_ref() && self.has(Const::Ref) {
                opts.push((Choice::Run, 2));
            }
            if pos.allow.st && pos.allow.div && self.has(Const::Read) && self.has(Const::Ref) {
                opts.push((Choice::Read, 2));
            }
            if *t == Shape::Unit && pos.allow.st && self.has(Const::Assign) && self.has(Const::Ref) {
                opts.push((Choice::Assign, 3));
            }
            if pos.allow.div && self.has(Const::Fix) && self.has(Const::If0) && self.has(Const::Dec) {
                opts.push((Choice::Loop, 1));
            }
            if pos.allow.div && self.has(Const::Fix) && self.rng.gen_ratio(1, 40) {
                opts.push((Choice::Diverge, 1));
            }
        }
        if depth == self.cfg.max_depth && depth > 1 {
            // Keep whole programs from being a bare literal or `throw ()`.
            let trivial = |c: &Choice| matches!(c, Choice::Var | Choice::Throw) || (*c == Choice::Intro && t.is_base());
            opts.retain(|(c, _)| !trivial(c));
        }
        let choice = opts.choose_weighted(&mut self.rng, |(_, w)| *w).ok()?.0;
        let d = depth.saturating_sub(1);
        Some(match choice {
            Choice::Var => {
                let cands: Vec<&String> = vars.iter().filter(|(_, s)| s == t).map(|(n, _)| n).collect();
                Expr::Var((*cands.choose(&mut self.rng)?).clone())
            }
            Choice::Intro => match t {
                Shape::Unit => unit(),
                Shape::Int => int(self.rng.gen_range(-3..10)),
                Shape::Fun(a, b) => {
                    let body_pos = Pos { allow: pos.latent, latent: pos.latent };
                    self.lambda(a, b, d, vars, body_pos)?
                }
                Shape::Ref(c) => app(constant(Const::Ref), self.gen(c, d, vars, pos)?),
            },
            Choice::App => {
                let a = self.arg_shape(pos, depth);
                let f = self.gen(&Shape::fun(a.clone(), t.clone()), d, vars, pos)?;
                let x = self.gen(&a, d, vars, pos)?;
                app(f, x)
            }
            Choice::Let => {
                let a = self.arg_shape(pos, depth);
                let pure = Pos { allow: Features::NONE, latent: pos.latent };
                let bound = self.gen(&a, d, vars, pure)?;
                let x = self.fresh("x");
                let body = self.gen(t, d, &extend(vars, &x, a), pos)?;
                let_(&x, bound, body)
            }
            Choice::Bind => {
                let a = self.arg_shape(pos, depth);
                let bound = self.gen(&a, d, vars, pos)?;
                let x = self.fresh("x");
                let body = self.gen(t, d, &extend(vars, &x, a), pos)?;
                app(lam(&x, body), bound)
            }
            Choice::Seq => {
                let a = if self.rng.gen_bool(0.5) { Shape::Unit } else { self.arg_shape(pos, depth) };
                let first = self.gen(&a, d, vars, pos)?;
                let rest = self.gen(t, d, vars, pos)?;
                let x = self.fresh("_");
                app(lam(&x, rest), first)
            }
            Choice::Prim => {
                let prims: Vec<Const> =
                    [Const::Inc, Const::Dec, Const::Add].into_iter().filter(|c| self.has(*c)).collect();
                let c = *prims.choose(&mut self.rng)?;
                let a = self.gen(&Shape::Int, d, vars, pos)?;
                if c == Const::Add {
                    let b = self.gen(&Shape::Int, d, vars, pos)?;
                    apps(constant(c), [a, b])
                } else {
                    app(constant(c), a)
                }
            }
            Choice::If0 => {
                let n = self.gen(&Shape::Int, d, vars, pos)?;
                let a = self.gen(t, d, vars, pos)?;
                let b = self.gen(t, d, vars, pos)?;
                apps(constant(Const::If0), [n, a, b])
            }
            Choice::LazyIf0 => {
                let n = self.gen(&Shape::Int, d, vars, pos)?;
                let now = Pos { allow: pos.allow, latent: pos.latent };
                let a = self.lambda(&Shape::Unit, t, d, vars, now)?;
                let b = self.lambda(&Shape::Unit, t, d, vars, now)?;
                app(apps(constant(Const::If0), [n, a, b]), unit())
            }
            Choice::Throw => app(constant(Const::Throw), unit()),
            Choice::Catch => {
                let inner = Pos { allow: pos.allow.with_exn(), latent: pos.latent };
                let body = self.gen(t, d, vars, inner)?;
                let handler = self.lambda(&Shape::Unit, t, d, vars, pos)?;
                catch(body, handler)
            }
            Choice::Run => {
                let local: Vec<(String, Shape)> = vars.iter().filter(|(_, s)| s.is_base()).cloned().collect();
                let inner = Pos { allow: pos.allow.with_st(), latent: pos.latent };
                run(self.gen(t, d, &local, inner)?)
            }
            Choice::Read => read(self.gen(&Shape::Ref(Box::new(t.clone())), d, vars, pos)?),
            Choice::Assign => {
                let a = if self.rng.gen_bool(0.7) { Shape::Int } else { Shape::Unit };
                let r = self.gen(&Shape::Ref(Box::new(a.clone())), d, vars, pos)?;
                let v = self.gen(&a, d, vars, pos)?;
                crate::expr::assign(r, v)
            }
            Choice::Loop => {
                // fix (\f. \n. if0 n (\_. base) (\_. f (dec n)) ()) k
                let f = self.fresh("f");
                let n = self.fresh("n");
                let inner = extend(vars, &n, Shape::Int);
                let base = self.lambda(&Shape::Unit, t, d, &inner, pos)?;
                let u = self.fresh("_");
                let again = lam(&u, app(Expr::Var(f.clone()), app(constant(Const::Dec), Expr::Var(n.clone()))));
                let step = app(apps(constant(Const::If0), [Expr::Var(n.clone()), base, again]), unit());
                let k = self.rng.gen_range(0..4);
                apps(constant(Const::Fix), [lam(&f, lam(&n, step)), int(k)])
            }
            Choice::Diverge => {
                let f = self.fresh("f");
                let x = self.fresh("x");
                let lp = lam(&f, lam(&x, app(Expr::Var(f.clone()), Expr::Var(x.clone()))));
                apps(constant(Const::Fix), [lp, unit()])
            }
        })
    }

    fn lambda(&mut self, a: &Shape, b: &Shape, depth: usize, vars: &[(String, Shape)], body_pos: Pos) -> Option<Expr> {
        let x = self.fresh(if *a == Shape::Unit { "_" } else { "x" });
        let body = self.gen(b, depth, &extend(vars, &x, a.clone()), body_pos)?;
        Some(lam(&x, body))
    }
}

fn extend(vars: &[(String, Shape)], x: &str, s: Shape) -> Vec<(String, Shape)> {
    let mut v = vars.to_vec();
    v.push((x.to_string(), s));
    v
}

pub fn gen_well_typed(cfg: &GenConfig, target: &Type) -> Result<Expr, GenError> {
    Generator::new(cfg.clone()).term(target)
}

/// `n` terms with random program targets; identical for identical configs.
pub fn corpus(cfg: &GenConfig, n: usize) -> Result<Vec<Expr>, GenError> {
    (0..n)
        .map(|i| {
            let mut g = Generator::for_index(cfg.clone(), i as u64);
            let shape = g.target();
            g.term_of_shape(&shape)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultyTemplate {
    pub bullet: FaultReason,
    pub source: &'static str,
}

/// Hand-written faulty programs, several per kind of runtime type error.
pub fn faulty_catalogue() -> Vec<FaultyTemplate> {
    use FaultReason::*;
    let t = |bullet, source| FaultyTemplate { bullet, source };
    vec![
        t(Undefined, "inc ()"),
        t(Undefined, "dec (\\x. x)"),
        t(Undefined, "add () 1"),
        t(Undefined, "{add 1} ()"),
        t(Undefined, "if0 () 1 2"),
        t(Undefined, "hp {r1 -> 1} inc #r1"),
        t(EscapingRead, "hp {r2 -> 5} run (hp {r1 -> 1} !#r2)"),
        t(EscapingRead, "hp {r2 -> 5} run (!#r2)"),
        t(EscapingRead, "hp {r2 -> \\x. x} run (hp {r1 -> 1} (!#r2) 3)"),
        t(EscapingWrite, "hp {r2 -> 5} run (hp {r1 -> 1} (#r2 :=) 3)"),
        t(EscapingWrite, "hp {r2 -> 5} run ((#r2 :=) 7)"),
        t(EscapingWrite, "hp {r2 -> ()} run (hp {r1 -> 0} (#r2 :=) ())"),
        t(EscapingReference, "run (hp {r1 -> 1} #r1)"),
        t(EscapingReference, "run (hp {r1 -> 2, r2 -> #r1} #r2)"),
        t(EscapingReference, "run (hp {r1 -> 1} (#r1 :=))"),
        t(NotAFunction, "() 1"),
        t(NotAFunction, "1 2"),
        t(NotAFunction, "hp {r1 -> 1} #r1 ()"),
        t(NotAFunction, "(\\x. x) (5 5)"),
        t(NotAReference, "!1"),
        t(NotAReference, "!(\\x. x)"),
        t(NotAReference, "(:=) ()"),
        t(NotAnException, "throw 1"),
        t(NotAnException, "catch (throw (\\x. x)) (\\x. x)"),
        t(NotAnException, "hp {r1 -> 1} throw 2"),
        t(NotAnException, "inc (throw 3)"),
    ]
}

/// Programs that go wrong in ML without a value restriction.
pub fn value_restriction_catalogue() -> Vec<&'static str> {
    vec![
        "let r = ref (\\x. x) in r := (\\x. inc x); (!r) ()",
        "let r = ref () in r",
    ]
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub term: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub checked: usize,
    pub violations: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl PropertyReport {
    fn pass(&mut self) {
        self.checked += 1;
    }

    fn fail(&mut self, term: &Expr, detail: impl Into<String>) {
        self.checked += 1;
        self.violations += 1;
        self.counterexamples.push(Counterexample { term: print_expr(term), detail: detail.into() });
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OutcomeCounts {
    pub values: usize,
    pub exceptions: usize,
    pub heap_values: usize,
    pub heap_exceptions: usize,
    pub fuel_exhausted: usize,
    pub faulty: usize,
    pub stuck: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub depth: usize,
    pub allow: String,
    pub terms: usize,
    pub generation_failures: usize,
    pub subject_reduction: PropertyReport,
    pub exceptions: PropertyReport,
    pub state: PropertyReport,
    pub divergence: PropertyReport,
    pub faulty: PropertyReport,
    pub outcomes: OutcomeCounts,
    pub reduction_steps_checked: usize,
    /// Longest evaluation among programs that finished.
    pub max_steps: usize,
}

impl Report {
    pub fn violations(&self) -> usize {
        self.generation_failures
            + self.subject_reduction.violations
            + self.exceptions.violations
            + self.state.violations
            + self.divergence.violations
            + self.faulty.violations
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteOptions {
    pub fuel: usize,
    /// Steps per term re-checked for subject reduction.
    pub checked_steps: usize,
    pub subject_reduction: bool,
    pub catalogue: bool,
}

impl Default for SuiteOptions {
    fn default() -> SuiteOptions {
        SuiteOptions { fuel: 100_000, checked_steps: 400, subject_reduction: true, catalogue: true }
    }
}

pub fn run_metatheory_suite(n: usize, cfg: &GenConfig) -> Report {
    run_metatheory_suite_with(n, cfg, SuiteOptions::default())
}

pub fn run_metatheory_suite_with(n: usize, cfg: &GenConfig, opts: SuiteOptions) -> Report {
    let mut report = Report {
        seed: cfg.seed,
        depth: cfg.max_depth,
        allow: cfg.allow.to_string(),
        ..Report::default()
    };
    for i in 0..n {
        let mut g = Generator::for_index(cfg.clone(), i as u64);
        let shape = g.target();
        match g.term_of_shape(&shape) {
            Ok(e) => check_term(&e, opts, &mut report),
            Err(_) => report.generation_failures += 1,
        }
    }
    if n > 0 && opts.catalogue {
        check_catalogue(&mut report.faulty);
    }
    report
}

/// Runs every per-term property on one closed surface program.
pub fn check_term(e: &Expr, opts: SuiteOptions, report: &mut Report) {
    let Ok(r) = infer(&Env::new(), e, &mut Supply::new()) else {
        report.generation_failures += 1;
        return;
    };
    report.terms += 1;
    let features = Features::of_effect(&r.effect);
    let mut machine = Machine::for_term(e);
    let mut cur = e.desugar();
    let mut steps = 0;
    let mut sr_ok = true;
    let outcome = loop {
        if steps >= opts.fuel {
            break EvalOutcome::FuelExhausted { last: cur, steps };
        }
        match machine.step(&cur) {
            StepResult::Reduced { next, rule } => {
                steps += 1;
                if opts.subject_reduction && sr_ok && steps <= opts.checked_steps {
                    report.reduction_steps_checked += 1;
                    if let Err(err) = validate_expr(&Env::new(), &next, &r.ty, &r.effect, &mut Supply::new()) {
                        sr_ok = false;
                        report.subject_reduction.fail(
                            e,
                            format!("step {steps} ({rule}) to `{}` does not re-check: {err}", print_expr(&next)),
                        );
                    }
                }
                cur = next;
            }
            StepResult::Answer(kind) => break EvalOutcome::Finished { answer: cur, kind, steps },
            StepResult::Faulty { reason, at } => break EvalOutcome::Faulty { reason, at, steps },
            StepResult::Stuck => break EvalOutcome::Stuck { at: cur, steps },
        }
    };
    if opts.subject_reduction && sr_ok {
        report.subject_reduction.pass();
    }
    if let EvalOutcome::Finished { steps, .. } = outcome {
        report.max_steps = report.max_steps.max(steps);
    }
    let counts = &mut report.outcomes;
    let kind = match &outcome {
        EvalOutcome::Finished { kind, .. } => {
            match kind {
                AnswerKind::Value => counts.values += 1,
                AnswerKind::Exception => counts.exceptions += 1,
                AnswerKind::HeapValue => counts.heap_values += 1,
                AnswerKind::HeapException => counts.heap_exceptions += 1,
            }
            Some(*kind)
        }
        EvalOutcome::FuelExhausted { .. } => {
            counts.fuel_exhausted += 1;
            None
        }
        EvalOutcome::Faulty { reason, .. } => {
            counts.faulty += 1;
            report.subject_reduction.fail(e, format!("well-typed program went wrong: {reason}"));
            None
        }
        EvalOutcome::Stuck { at, .. } => {
            counts.stuck += 1;
            report.subject_reduction.fail(e, format!("well-typed program is stuck at `{}`", print_expr(at)));
            None
        }
    };
    if !features.exn {
        match kind {
            Some(k @ (AnswerKind::Exception | AnswerKind::HeapException)) => {
                report.exceptions.fail(e, format!("effect lacks exn but the answer is a {k}"))
            }
            _ => report.exceptions.pass(),
        }
    }
    if !features.st {
        match kind {
            Some(k @ (AnswerKind::HeapValue | AnswerKind::HeapException)) => {
                report.state.fail(e, format!("effect lacks st but the answer is a {k}"))
            }
            _ => report.state.pass(),
        }
    }
    if !features.div {
        match outcome {
            EvalOutcome::FuelExhausted { steps, .. } => {
                report.divergence.fail(e, format!("effect lacks div but {steps} steps did not finish"))
            }
            _ => report.divergence.pass(),
        }
    }
}

/// Every faulty template must be rejected by inference and must really be
/// faulty for the stated reason.
pub fn check_catalogue(out: &mut PropertyReport) {
    for t in faulty_catalogue() {
        let e = match parse_expr_debug(t.source) {
            Ok(e) => e,
            Err(err) => {
                out.fail(&Expr::Var(t.source.into()), format!("template does not parse: {err}"));
                continue;
            }
        };
        if let Ok(r) = infer_internal(&Env::new(), &e, &mut Supply::new()) {
            let shown = crate::surface::print_type(&r.ty);
            out.fail(&e, format!("{} template accepted at type {shown}", t.bullet));
            continue;
        }
        match Machine::for_term(&e).evaluate(&e, 100, None) {
            EvalOutcome::Faulty { reason, .. } if reason == t.bullet => out.pass(),
            other => out.fail(&e, format!("template is not faulty as {}: {other:?}", t.bullet)),
        }
    }
    for src in value_restriction_catalogue() {
        let e = crate::surface::parse_expr(src).expect("catalogue parses");
        match infer(&Env::new(), &e, &mut Supply::new()) {
            Err(err) if matches!(err.kind, TypeErrorKind::ValueRestriction(_)) => out.pass(),
            Err(err) => out.fail(&e, format!("rejected for the wrong reason: {err}")),
            Ok(_) => out.fail(&e, "accepted despite the value restriction"),
        }
    }
}
