//! Deterministic small-step evaluation with heaps, exceptions and `run`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::expr::{app, fresh_name, int, lam, Const, Expr, Heap, RefId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleName {
    Delta,
    Beta,
    Let,
    Fix,
    Throw,
    CatchT,
    CatchV,
    CatchP,
    Alloc,
    Read,
    Write,
    Merge,
    Lift,
    RunL,
    RunC,
    RunP,
    RunH,
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleName::Delta => "delta",
            RuleName::Beta => "beta",
            RuleName::Let => "let",
            RuleName::Fix => "fix",
            RuleName::Throw => "throw",
            RuleName::CatchT => "catcht",
            RuleName::CatchV => "catchv",
            RuleName::CatchP => "catchp",
            RuleName::Alloc => "alloc",
            RuleName::Read => "read",
            RuleName::Write => "write",
            RuleName::Merge => "merge",
            RuleName::Lift => "lift",
            RuleName::RunL => "runl",
            RuleName::RunC => "runc",
            RuleName::RunP => "runp",
            RuleName::RunH => "runh",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnswerKind {
    Value,
    Exception,
    HeapValue,
    HeapException,
}

impl fmt::Display for AnswerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnswerKind::Value => "value",
            AnswerKind::Exception => "exception",
            AnswerKind::HeapValue => "heap value",
            AnswerKind::HeapException => "heap exception",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FaultReason {
    Undefined,
    EscapingRead,
    EscapingWrite,
    EscapingReference,
    NotAFunction,
    NotAReference,
    NotAnException,
}

impl fmt::Display for FaultReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FaultReason::Undefined => "undefined constant application",
            FaultReason::EscapingRead => "escaping read",
            FaultReason::EscapingWrite => "escaping write",
            FaultReason::EscapingReference => "escaping reference",
            FaultReason::NotAFunction => "not a function",
            FaultReason::NotAReference => "not a reference",
            FaultReason::NotAnException => "not an exception",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepResult {
    Reduced { next: Expr, rule: RuleName },
    Answer(AnswerKind),
    Faulty { reason: FaultReason, at: Expr },
    Stuck,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalOutcome {
    Finished { answer: Expr, kind: AnswerKind, steps: usize },
    Faulty { reason: FaultReason, at: Expr, steps: usize },
    FuelExhausted { last: Expr, steps: usize },
    Stuck { at: Expr, steps: usize },
}

impl EvalOutcome {
    pub fn steps(&self) -> usize {
        match self {
            EvalOutcome::Finished { steps, .. }
            | EvalOutcome::Faulty { steps, .. }
            | EvalOutcome::FuelExhausted { steps, .. }
            | EvalOutcome::Stuck { steps, .. } => *steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub rule: RuleName,
    pub term: Expr,
}

pub fn classify(e: &Expr) -> Option<AnswerKind> {
    if e.is_value() {
        return Some(AnswerKind::Value);
    }
    if e.as_throw().is_some() {
        return Some(AnswerKind::Exception);
    }
    match e {
        Expr::HeapBind(_, b) if b.is_value() => Some(AnswerKind::HeapValue),
        Expr::HeapBind(_, b) if b.as_throw().is_some() => Some(AnswerKind::HeapException),
        _ => None,
    }
}

/// The constant table: `None` where the application is undefined.
pub fn delta(head: &Expr, v: &Expr) -> Option<Expr> {
    use Const::*;
    match (head, v) {
        (Expr::Const(Inc), Expr::Const(Int(n))) => Some(int(n.wrapping_add(1))),
        (Expr::Const(Dec), Expr::Const(Int(n))) => Some(int(n.wrapping_sub(1))),
        (Expr::Const(Add), Expr::Const(Int(_))) => Some(Expr::PartialConst(Add, vec![v.clone()])),
        (Expr::PartialConst(Add, xs), Expr::Const(Int(m))) => match xs.as_slice() {
            [Expr::Const(Int(n))] => Some(int(n.wrapping_add(*m))),
            _ => None,
        },
        (Expr::Const(If0), Expr::Const(Int(_))) => Some(Expr::PartialConst(If0, vec![v.clone()])),
        (Expr::PartialConst(If0, xs), _) if v.is_value() => match xs.as_slice() {
            [n @ Expr::Const(Int(_))] => Some(Expr::PartialConst(If0, vec![n.clone(), v.clone()])),
            [Expr::Const(Int(n)), v1] => Some(if *n == 0 { v1.clone() } else { v.clone() }),
            _ => None,
        },
        _ => None,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Above {
    Top,
    Run,
}

#[derive(Clone, Copy)]
struct Ctx<'a> {
    /// Nearest heap reachable through evaluation frames that do not cross a
    /// heap or a `run`.
    heap: Option<&'a Heap>,
    /// What encloses that heap (or the frames, when there is no heap).
    above: Above,
}

enum Out {
    Reduced(Expr, RuleName),
    /// A write to `r` of value `v`; the expression is the redex's context
    /// filled with `()`.
    Write(RefId, Expr, Expr),
    Fault(FaultReason, Expr),
    Stuck,
    Done,
}

impl Out {
    fn map(self, f: impl FnOnce(Expr) -> Expr) -> Out {
        match self {
            Out::Reduced(e, r) => Out::Reduced(f(e), r),
            Out::Write(r, v, e) => Out::Write(r, v, f(e)),
            other => other,
        }
    }
}

/// Evaluation state: the supply of fresh reference names.
#[derive(Clone, Debug)]
pub struct Machine {
    next_ref: u32,
}

impl Machine {
    pub fn new(next_ref: u32) -> Machine {
        Machine { next_ref }
    }

    /// A machine whose fresh names avoid every reference in `e`.
    pub fn for_term(e: &Expr) -> Machine {
        Machine { next_ref: e.max_ref().map_or(1, |m| m + 1) }
    }

    fn fresh_ref(&mut self) -> RefId {
        let r = RefId(self.next_ref);
        self.next_ref += 1;
        r
    }

    pub fn step(&mut self, e: &Expr) -> StepResult {
        let e = if e.any(&|x| matches!(x, Expr::Bind(..))) { e.desugar() } else { e.clone() };
        match self.go(&e, Ctx { heap: None, above: Above::Top }) {
            Out::Reduced(next, rule) => StepResult::Reduced { next, rule },
            Out::Fault(reason, at) => StepResult::Faulty { reason, at },
            Out::Done => classify(&e).map_or(StepResult::Stuck, StepResult::Answer),
            Out::Write(..) | Out::Stuck => StepResult::Stuck,
        }
    }

    pub fn evaluate(&mut self, e: &Expr, fuel: usize, mut trace: Option<&mut Vec<TraceStep>>) -> EvalOutcome {
        let mut cur = e.desugar();
        let mut steps = 0;
        loop {
            match self.step(&cur) {
                StepResult::Answer(kind) => return EvalOutcome::Finished { answer: cur, kind, steps },
                StepResult::Faulty { reason, at } => return EvalOutcome::Faulty { reason, at, steps },
                StepResult::Stuck => return EvalOutcome::Stuck { at: cur, steps },
                StepResult::Reduced { next, rule } => {
                    if steps == fuel {
                        return EvalOutcome::FuelExhausted { last: cur, steps };
                    }
                    steps += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(TraceStep { rule, term: next.clone() });
                    }
                    cur = next;
                }
            }
        }
    }

    fn go(&mut self, e: &Expr, ctx: Ctx) -> Out {
        match e {
            Expr::App(f, a) => self.app(e, f, a, ctx),
            Expr::Let(x, e1, e2) => {
                if e1.is_value() {
                    return Out::Reduced(e2.subst(x, e1), RuleName::Let);
                }
                if e1.as_throw().is_some() {
                    return throw_out(e1);
                }
                if let Expr::HeapBind(h, inner) = &**e1 {
                    return self.lift(h, inner, &[e2], |n| Expr::Let(x.clone(), Box::new(n), e2.clone()));
                }
                self.go(e1, ctx).map(|n| Expr::Let(x.clone(), Box::new(n), e2.clone()))
            }
            Expr::Bind(..) => self.go(&e.desugar(), ctx),
            Expr::Catch(e1, e2) => {
                if let Some(c) = e1.as_throw() {
                    if *c != Expr::Const(Const::Unit) {
                        return Out::Fault(FaultReason::NotAnException, (**e1).clone());
                    }
                    return Out::Reduced(app((**e2).clone(), c.clone()), RuleName::CatchT);
                }
                if e1.is_value() {
                    return Out::Reduced((**e1).clone(), RuleName::CatchV);
                }
                if let Expr::HeapBind(h, inner) = &**e1 {
                    return self.lift(h, inner, &[e2], |n| Expr::Catch(Box::new(n), e2.clone()));
                }
                self.go(e1, ctx).map(|n| Expr::Catch(Box::new(n), e2.clone()))
            }
            Expr::Run(body) => self.run(e, body),
            Expr::HeapBind(h, body) => self.heap(h, body, ctx.above),
            _ if e.is_value() => Out::Done,
            _ => Out::Stuck,
        }
    }

    fn app(&mut self, e: &Expr, f: &Expr, a: &Expr, ctx: Ctx) -> Out {
        if f.is_value() {
            if matches!(f, Expr::Const(Const::Unit | Const::Int(_)) | Expr::RefName(_)) {
                return Out::Fault(FaultReason::NotAFunction, e.clone());
            }
            if let Some(c) = e.as_throw() {
                if *c != Expr::Const(Const::Unit) {
                    return Out::Fault(FaultReason::NotAnException, e.clone());
                }
                return Out::Done;
            }
            if a.as_throw().is_some() {
                return throw_out(a);
            }
            if let Expr::HeapBind(h, inner) = a {
                return self.lift(h, inner, &[f], |n| app(f.clone(), n));
            }
            if !a.is_value() {
                return self.go(a, ctx).map(|n| app(f.clone(), n));
            }
            return self.apply(e, f, a, ctx);
        }
        if f.as_throw().is_some() {
            return throw_out(f);
        }
        if let Expr::HeapBind(h, inner) = f {
            return self.lift(h, inner, &[a], |n| app(n, a.clone()));
        }
        self.go(f, ctx).map(|n| app(n, a.clone()))
    }

    fn apply(&mut self, e: &Expr, f: &Expr, a: &Expr, ctx: Ctx) -> Out {
        match f {
            Expr::Lam(x, body) => Out::Reduced(body.subst(x, a), RuleName::Beta),
            Expr::PartialCatch(body) => {
                Out::Reduced(Expr::Catch(body.clone(), Box::new(a.clone())), RuleName::CatchP)
            }
            Expr::PartialAssign(r) => self.write(*r, a, ctx, e),
            Expr::Const(c) => match c {
                Const::Throw => Out::Fault(FaultReason::NotAnException, e.clone()),
                Const::Ref => {
                    let r = self.fresh_ref();
                    let h = Heap::new(vec![(r, a.clone())]);
                    Out::Reduced(Expr::HeapBind(h, Box::new(Expr::RefName(r))), RuleName::Alloc)
                }
                Const::Read => match a {
                    Expr::RefName(r) => self.read(*r, ctx, e),
                    _ => Out::Fault(FaultReason::NotAReference, e.clone()),
                },
                Const::Assign => match a {
                    Expr::RefName(r) => Out::Reduced(Expr::PartialAssign(*r), RuleName::Delta),
                    _ => Out::Fault(FaultReason::NotAReference, e.clone()),
                },
                Const::Fix => {
                    let y = fresh_name("y", &a.fv());
                    let unrolled = lam(&y, app(app(Expr::Const(Const::Fix), a.clone()), Expr::Var(y.clone())));
                    Out::Reduced(app(a.clone(), unrolled), RuleName::Fix)
                }
                Const::Unit | Const::Int(_) => Out::Fault(FaultReason::NotAFunction, e.clone()),
                Const::Inc | Const::Dec | Const::Add | Const::If0 => self.delta(e, f, a),
            },
            Expr::PartialConst(..) => self.delta(e, f, a),
            Expr::RefName(_) => Out::Fault(FaultReason::NotAFunction, e.clone()),
            _ => Out::Stuck,
        }
    }

    fn delta(&mut self, e: &Expr, f: &Expr, a: &Expr) -> Out {
        match delta(f, a) {
            Some(r) => Out::Reduced(r, RuleName::Delta),
            None => Out::Fault(FaultReason::Undefined, e.clone()),
        }
    }

    fn read(&mut self, r: RefId, ctx: Ctx, e: &Expr) -> Out {
        match ctx.heap.and_then(|h| h.get(r)) {
            Some(v) => Out::Reduced(v.clone(), RuleName::Read),
            None if ctx.above == Above::Run => Out::Fault(FaultReason::EscapingRead, e.clone()),
            None => Out::Stuck,
        }
    }

    fn write(&mut self, r: RefId, v: &Expr, ctx: Ctx, e: &Expr) -> Out {
        match ctx.heap {
            Some(h) if h.contains(r) => Out::Write(r, v.clone(), Expr::Const(Const::Unit)),
            _ if ctx.above == Above::Run => Out::Fault(FaultReason::EscapingWrite, e.clone()),
            _ => Out::Stuck,
        }
    }

    fn heap(&mut self, h: &Heap, body: &Expr, above: Above) -> Out {
        if let Expr::HeapBind(h2, inner) = body {
            let mut avoid = h.domain();
            for (_, v) in &h.bindings {
                avoid.extend(v.frv());
            }
            let (h2, inner) = self.rename_apart(h2, inner, &avoid);
            let mut merged = h.clone();
            merged.bindings.extend(h2.bindings);
            return Out::Reduced(Expr::HeapBind(merged, Box::new(inner)), RuleName::Merge);
        }
        if let Some(c) = body.as_throw() {
            if *c != Expr::Const(Const::Unit) {
                return Out::Fault(FaultReason::NotAnException, body.clone());
            }
            return Out::Done;
        }
        if body.is_value() {
            return Out::Done;
        }
        match self.go(body, Ctx { heap: Some(h), above }) {
            Out::Reduced(n, rule) => Out::Reduced(Expr::HeapBind(h.clone(), Box::new(n)), rule),
            Out::Write(r, v, filled) => {
                let mut h2 = h.clone();
                h2.set(r, v);
                Out::Reduced(Expr::HeapBind(h2, Box::new(filled)), RuleName::Write)
            }
            Out::Done => Out::Stuck,
            other => other,
        }
    }

    fn run(&mut self, e: &Expr, body: &Expr) -> Out {
        let (h, inner) = match body {
            Expr::HeapBind(h, inner) => (Some(h), &**inner),
            _ => (None, body),
        };
        let wrap = |b: Expr| match h {
            Some(h) => Expr::HeapBind(h.clone(), Box::new(b)),
            None => b,
        };
        let run_of = |b: Expr| Expr::Run(Box::new(b));
        let finished = inner.is_value() || inner.as_throw().is_some();
        if !finished || matches!(inner, Expr::HeapBind(..)) {
            return match h {
                Some(h) => self.heap(h, inner, Above::Run).map(run_of),
                None => self.go(inner, Ctx { heap: None, above: Above::Run }).map(run_of),
            };
        }
        if let Some(c) = inner.as_throw() {
            if *c != Expr::Const(Const::Unit) {
                return Out::Fault(FaultReason::NotAnException, inner.clone());
            }
        }
        let dom = h.map(Heap::domain).unwrap_or_default();
        let escapes = |x: &Expr| !x.frv().is_disjoint(&dom);
        match inner {
            Expr::Lam(x, b) => Out::Reduced(lam(x, run_of(wrap((**b).clone()))), RuleName::RunL),
            Expr::PartialCatch(b) => {
                Out::Reduced(Expr::PartialCatch(Box::new(run_of(wrap((**b).clone())))), RuleName::RunC)
            }
            Expr::PartialConst(..) if escapes(inner) => {
                let y = "y";
                let body = app(inner.clone(), Expr::Var(y.into()));
                Out::Reduced(lam(y, run_of(wrap(body))), RuleName::RunP)
            }
            _ if escapes(inner) => Out::Fault(FaultReason::EscapingReference, e.clone()),
            _ => Out::Reduced(inner.clone(), RuleName::RunH),
        }
    }

    fn lift(&mut self, h: &Heap, inner: &Expr, others: &[&Expr], rebuild: impl FnOnce(Expr) -> Expr) -> Out {
        let avoid: BTreeSet<RefId> = others.iter().flat_map(|o| o.frv()).collect();
        let (h, inner) = self.rename_apart(h, inner, &avoid);
        Out::Reduced(Expr::HeapBind(h, Box::new(rebuild(inner))), RuleName::Lift)
    }

    /// Renames the binders of `h` that occur in `avoid`.
    fn rename_apart(&mut self, h: &Heap, body: &Expr, avoid: &BTreeSet<RefId>) -> (Heap, Expr) {
        let clashes: Vec<RefId> = h.bindings.iter().map(|(r, _)| *r).filter(|r| avoid.contains(r)).collect();
        if clashes.is_empty() {
            return (h.clone(), body.clone());
        }
        let map: BTreeMap<RefId, RefId> = clashes.into_iter().map(|r| (r, self.fresh_ref())).collect();
        match Expr::HeapBind(h.clone(), Box::new(body.clone())).rename_refs(&map) {
            Expr::HeapBind(h, b) => (h, *b),
            _ => unreachable!(),
        }
    }
}

fn throw_out(t: &Expr) -> Out {
    match t.as_throw() {
        Some(Expr::Const(Const::Unit)) => Out::Reduced(t.clone(), RuleName::Throw),
        _ => Out::Fault(FaultReason::NotAnException, t.clone()),
    }
}

pub fn step(e: &Expr) -> StepResult {
    Machine::for_term(e).step(e)
}

pub fn evaluate(e: &Expr, fuel: usize) -> EvalOutcome {
    Machine::for_term(e).evaluate(e, fuel, None)
}

pub fn evaluate_traced(e: &Expr, fuel: usize) -> (EvalOutcome, Vec<TraceStep>) {
    let mut trace = Vec::new();
    let out = Machine::for_term(e).evaluate(e, fuel, Some(&mut trace));
    (out, trace)
}
