//! Validation of typing derivations against the declarative rules.
//!
//! Checking is guided by the annotations of an elaborated term, so every
//! rule application is determined by the term's shape.

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::expr::{Const, Expr};
use crate::infer::{infer_with, instantiate_at, typeof_const, Elab, Env, InferOptions};
use crate::rows::{extract_label, type_eq};
use crate::types::{kind_of, Kind, Scheme, Supply, TyCon, TyVar, Type};
use crate::unify::match_type;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Var,
    Const,
    Lam,
    App,
    Let,
    Catch,
    Run,
    Heap,
    Ref,
    PartialCatch,
    PartialAssign,
    PartialConst,
    StExtend,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Var => "var",
            Rule::Const => "const",
            Rule::Lam => "lam",
            Rule::App => "app",
            Rule::Let => "let",
            Rule::Catch => "catch",
            Rule::Run => "run",
            Rule::Heap => "heap",
            Rule::Ref => "ref",
            Rule::PartialCatch => "partial-catch",
            Rule::PartialAssign => "partial-assign",
            Rule::PartialConst => "partial-const",
            Rule::StExtend => "st-extend",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub rule: Rule,
    pub env: Rc<Env>,
    pub expr: Expr,
    pub ty: Type,
    pub effect: Type,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("({rule}) {message}")]
pub struct CheckError {
    pub rule: Rule,
    pub message: String,
}

fn fail<T>(rule: Rule, message: impl Into<String>) -> Result<T, CheckError> {
    Err(CheckError { rule, message: message.into() })
}

fn require(cond: bool, rule: Rule, message: &str) -> Result<(), CheckError> {
    if cond {
        Ok(())
    } else {
        fail(rule, message)
    }
}

/// Builds the derivation for `el` at type `t` and effect `eff`.
pub fn check(env: &Env, el: &Elab, t: &Type, eff: &Type) -> Result<Derivation, CheckError> {
    let d = Checker { build: true }.go(&Rc::new(env.clone()), el, t, eff)?;
    Ok(d.expect("derivation requested"))
}

/// Like [`check`] but without materializing the derivation tree.
pub fn validate(env: &Env, el: &Elab, t: &Type, eff: &Type) -> Result<(), CheckError> {
    Checker { build: false }.go(&Rc::new(env.clone()), el, t, eff).map(|_| ())
}

/// Checks a plain expression: elaborates it by inference, specializes the
/// inferred typing to the target and validates the result.
pub fn check_expr(env: &Env, e: &Expr, t: &Type, eff: &Type, supply: &mut Supply) -> Result<Derivation, CheckError> {
    let el = elaborate_at(env, e, t, eff, supply)?;
    check(env, &el, t, eff)
}

/// [`check_expr`] without building the derivation.
pub fn validate_expr(env: &Env, e: &Expr, t: &Type, eff: &Type, supply: &mut Supply) -> Result<(), CheckError> {
    let el = elaborate_at(env, e, t, eff, supply)?;
    validate(env, &el, t, eff)
}

/// An elaboration of `e` whose typing is specialized to `t | eff`.
pub fn elaborate_at(env: &Env, e: &Expr, t: &Type, eff: &Type, supply: &mut Supply) -> Result<Elab, CheckError> {
    let bound = [t, eff]
        .iter()
        .flat_map(|x| x.ftv())
        .chain(env.ftv())
        .map(|v| v.id + 1)
        .max()
        .unwrap_or(0);
    supply.reserve(bound, 0);
    let r = infer_with(env, e, supply, InferOptions::INTERNAL_EXTEND)
        .map_err(|err| CheckError { rule: Rule::Var, message: format!("no typing: {err}") })?;
    let pattern = Type::fun(r.ty.clone(), r.effect.clone(), Type::unit());
    let target = Type::fun(t.clone(), eff.clone(), Type::unit());
    if let Some(m) = match_type(&pattern, &target) {
        return Ok(r.elaborated.apply(&m));
    }
    // The target may demand an extra `st` label that the principal effect lacks.
    if let Some((label, rest)) = first_st(eff) {
        let pattern = Type::fun(r.ty.clone(), r.effect.clone(), Type::unit());
        let target = Type::fun(t.clone(), rest, Type::unit());
        if let Some(m) = match_type(&pattern, &target) {
            let heap = label_heap(&label);
            return Ok(Elab::StExtend { heap, inner: Box::new(r.elaborated.apply(&m)) });
        }
    }
    fail(Rule::Var, "target typing is not an instance of the inferred one")
}

fn first_st(eff: &Type) -> Option<(Type, Type)> {
    let probe = Type::st(Type::heap_const(0));
    extract_label(eff, &probe).map(|(l, rest)| (l.clone(), rest))
}

fn label_heap(l: &Type) -> Type {
    match l {
        Type::App(TyCon::St, args) => args[0].clone(),
        _ => unreachable!("st label"),
    }
}

struct Checker {
    build: bool,
}

type Out = Result<Option<Derivation>, CheckError>;

impl Checker {
    fn node(&self, rule: Rule, env: &Rc<Env>, el: &Elab, t: &Type, eff: &Type, premises: Vec<Option<Derivation>>) -> Out {
        if !self.build {
            return Ok(None);
        }
        Ok(Some(Derivation {
            rule,
            env: env.clone(),
            expr: el.erase(),
            ty: t.clone(),
            effect: eff.clone(),
            premises: premises.into_iter().flatten().collect(),
        }))
    }

    fn go(&self, env: &Rc<Env>, el: &Elab, t: &Type, eff: &Type) -> Out {
        require(kind_of(t) == Ok(Kind::Star), Rule::Var, "type must have kind *")?;
        require(kind_of(eff) == Ok(Kind::Row), Rule::Var, "effect must have kind e")?;
        match el {
            Elab::Var { name, inst } => {
                let Some(b) = env.lookup(name) else {
                    return fail(Rule::Var, format!("unbound variable {name}"));
                };
                instance(Rule::Var, &b.scheme, inst, t)?;
                self.node(Rule::Var, env, el, t, eff, vec![])
            }
            Elab::Const { c, inst } => {
                instance(Rule::Const, &typeof_const(*c), inst, t)?;
                self.node(Rule::Const, env, el, t, eff, vec![])
            }
            Elab::Lam { param, param_ty, body } => {
                let Some((a, e2, r)) = t.as_fun() else {
                    return fail(Rule::Lam, "lambda at a non-function type");
                };
                require(type_eq(param_ty, a), Rule::Lam, "parameter type differs from the arrow's domain")?;
                let env2 = Rc::new(env.with_var(param, Scheme::mono(a.clone())));
                let p = self.go(&env2, body, r, e2)?;
                self.node(Rule::Lam, env, el, t, eff, vec![p])
            }
            Elab::App { fun, arg, arg_ty } => {
                let ft = Type::fun(arg_ty.clone(), eff.clone(), t.clone());
                let p1 = self.go(env, fun, &ft, eff)?;
                let p2 = self.go(env, arg, arg_ty, eff)?;
                self.node(Rule::App, env, el, t, eff, vec![p1, p2])
            }
            Elab::Let { name, bound, scheme, body } => {
                let distinct: BTreeSet<TyVar> = scheme.vars.iter().copied().collect();
                require(distinct.len() == scheme.vars.len(), Rule::Let, "quantified variables repeat")?;
                let fixed = env.ftv();
                require(
                    scheme.vars.iter().all(|v| !fixed.contains(v)),
                    Rule::Let,
                    "generalized variable is free in the environment",
                )?;
                require(kind_of(&scheme.body) == Ok(Kind::Star), Rule::Let, "scheme body must have kind *")?;
                let p1 = self.go(env, bound, &scheme.body, &Type::empty_row())?;
                let env2 = Rc::new(env.with_var(name, scheme.clone()));
                let p2 = self.go(&env2, body, t, eff)?;
                self.node(Rule::Let, env, el, t, eff, vec![p1, p2])
            }
            Elab::Catch { body, handler } => {
                let p1 = self.go(env, body, t, &Type::row([Type::exn()], eff.clone()))?;
                let ht = Type::fun(Type::unit(), eff.clone(), t.clone());
                let p2 = self.go(env, handler, &ht, eff)?;
                self.node(Rule::Catch, env, el, t, eff, vec![p1, p2])
            }
            Elab::Run { heap, body } => {
                let Type::Var(v) = heap else {
                    return fail(Rule::Run, "run heap must be a heap variable");
                };
                require(v.kind == Kind::Heap, Rule::Run, "run heap must have kind h")?;
                require(
                    !env.ftv().contains(v) && !t.occurs(*v) && !eff.occurs(*v),
                    Rule::Run,
                    "heap variable escapes into the environment, type or effect",
                )?;
                let inner = Type::row([Type::st(heap.clone())], eff.clone());
                let p = self.go(env, body, t, &inner)?;
                self.node(Rule::Run, env, el, t, eff, vec![p])
            }
            Elab::HeapBind { heap, bindings, body } => {
                require(kind_of(heap) == Ok(Kind::Heap), Rule::Heap, "heap type must have kind h")?;
                let st = Type::st(heap.clone());
                match extract_label(eff, &st) {
                    Some((l, _)) if type_eq(l, &st) => {}
                    _ => return fail(Rule::Heap, "effect does not start with the heap's st label"),
                }
                let mut env2 = (**env).clone();
                for (r, ty, _) in bindings {
                    env2 = env2.with_ref(*r, Type::reference(heap.clone(), ty.clone()));
                }
                let env2 = Rc::new(env2);
                let mut ps = Vec::new();
                for (_, ty, v) in bindings {
                    require(v.erase().is_value(), Rule::Heap, "heap binding is not a value")?;
                    ps.push(self.go(&env2, v, ty, &Type::empty_row())?);
                }
                ps.push(self.go(&env2, body, t, eff)?);
                self.node(Rule::Heap, env, el, t, eff, ps)
            }
            Elab::RefName(r) => {
                let Some(rt) = env.lookup_ref(*r) else {
                    return fail(Rule::Ref, format!("unbound reference #r{}", r.0));
                };
                require(type_eq(rt, t), Rule::Ref, "reference type differs")?;
                self.node(Rule::Ref, env, el, t, eff, vec![])
            }
            Elab::PartialAssign(r) => {
                let Some((h, a)) = env.lookup_ref(*r).and_then(Type::as_ref) else {
                    return fail(Rule::PartialAssign, format!("unbound reference #r{}", r.0));
                };
                let Some((a2, e2, res)) = t.as_fun() else {
                    return fail(Rule::PartialAssign, "partial assignment at a non-function type");
                };
                require(type_eq(a, a2) && *res == Type::unit(), Rule::PartialAssign, "assignment type differs")?;
                let st = Type::st(h.clone());
                match extract_label(e2, &st) {
                    Some((l, _)) if type_eq(l, &st) => {}
                    _ => return fail(Rule::PartialAssign, "latent effect lacks the reference's st label"),
                }
                self.node(Rule::PartialAssign, env, el, t, eff, vec![])
            }
            Elab::PartialCatch(body) => {
                let shape = t.as_fun().and_then(|(h, e0, t0)| h.as_fun().map(|(u, e1, t1)| (u, e1, t1, e0, t0)));
                let Some((u, e1, t1, e0, t0)) = shape else {
                    return fail(Rule::PartialCatch, "partial catch at a non-handler type");
                };
                require(
                    *u == Type::unit() && type_eq(e1, e0) && type_eq(t1, t0),
                    Rule::PartialCatch,
                    "handler type does not match the result",
                )?;
                let p = self.go(env, body, t0, &Type::row([Type::exn()], e0.clone()))?;
                self.node(Rule::PartialCatch, env, el, t, eff, vec![p])
            }
            Elab::PartialConst { c, captured } => {
                let ps = self.partial_const(env, *c, captured, t)?;
                self.node(Rule::PartialConst, env, el, t, eff, ps)
            }
            Elab::StExtend { heap, inner } => {
                let st = Type::st(heap.clone());
                let rest = match extract_label(eff, &st) {
                    Some((l, rest)) if type_eq(l, &st) => rest,
                    _ => return fail(Rule::StExtend, "effect does not start with the assumed st label"),
                };
                let p = self.go(env, inner, t, &rest)?;
                self.node(Rule::StExtend, env, el, t, eff, vec![p])
            }
        }
    }

    fn partial_const(&self, env: &Rc<Env>, c: Const, captured: &[Elab], t: &Type) -> Result<Vec<Option<Derivation>>, CheckError> {
        let rule = Rule::PartialConst;
        let pure = Type::empty_row();
        let Some((a, _, r)) = t.as_fun() else {
            return fail(rule, "partial application at a non-function type");
        };
        match (c, captured) {
            (Const::Add, [n]) => {
                require(*a == Type::int() && *r == Type::int(), rule, "add expects int -> int")?;
                Ok(vec![self.go(env, n, &Type::int(), &pure)?])
            }
            (Const::If0, [n]) => {
                let ok = r.as_fun().is_some_and(|(b, _, c)| type_eq(a, b) && type_eq(a, c));
                require(ok, rule, "if0 branches must share a type")?;
                Ok(vec![self.go(env, n, &Type::int(), &pure)?])
            }
            (Const::If0, [n, v]) => {
                require(type_eq(a, r), rule, "if0 branches must share a type")?;
                Ok(vec![self.go(env, n, &Type::int(), &pure)?, self.go(env, v, a, &pure)?])
            }
            _ => fail(rule, "malformed partial application"),
        }
    }
}

fn instance(rule: Rule, s: &Scheme, inst: &[Type], t: &Type) -> Result<(), CheckError> {
    require(inst.len() == s.vars.len(), rule, "instantiation arity differs")?;
    for (v, ty) in s.vars.iter().zip(inst) {
        require(kind_of(ty) == Ok(v.kind), rule, "instantiation changes a kind")?;
    }
    require(type_eq(&instantiate_at(s, inst), t), rule, "instance differs from the expected type")
}
