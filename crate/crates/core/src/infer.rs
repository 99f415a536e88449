//! Type and effect inference in the style of algorithm W.
//!
//! Inference returns a substitution, a type, an effect row and an elaborated
//! term that records instantiations and generalizations so the checker can
//! validate the result without search.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::expr::{Const, Expr, Heap, RefId};
use crate::rows::{effect_tail, row_parts};
use crate::types::{Kind, Scheme, Subst, Supply, TyVar, Type};
use crate::unify::{match_type, UnifyFailure, Unifier};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding {
    pub scheme: Scheme,
    /// Closed form of a let-bound scheme when closing changed it.
    pub closed: Option<Scheme>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Env {
    vars: Vec<(String, Binding)>,
    refs: Vec<(RefId, Type)>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn with_var(&self, x: &str, scheme: Scheme) -> Env {
        self.with_binding(x, Binding { scheme, closed: None })
    }

    pub fn with_binding(&self, x: &str, b: Binding) -> Env {
        let mut env = self.clone();
        env.vars.push((x.to_string(), b));
        env
    }

    pub fn with_ref(&self, r: RefId, ty: Type) -> Env {
        let mut env = self.clone();
        env.refs.push((r, ty));
        env
    }

    pub fn lookup(&self, x: &str) -> Option<&Binding> {
        self.vars.iter().rev().find(|(y, _)| y == x).map(|(_, b)| b)
    }

    pub fn lookup_ref(&self, r: RefId) -> Option<&Type> {
        self.refs.iter().rev().find(|(q, _)| *q == r).map(|(_, t)| t)
    }

    pub fn ftv(&self) -> BTreeSet<TyVar> {
        let mut s = BTreeSet::new();
        for (_, b) in &self.vars {
            s.extend(b.scheme.ftv());
        }
        for (_, t) in &self.refs {
            t.ftv_into(&mut s);
        }
        s
    }

    pub fn apply(&self, s: &Subst) -> Env {
        if s.is_empty() {
            return self.clone();
        }
        Env {
            vars: self
                .vars
                .iter()
                .map(|(x, b)| {
                    let closed = b.closed.as_ref().map(|c| s.apply_scheme(c));
                    (x.clone(), Binding { scheme: s.apply_scheme(&b.scheme), closed })
                })
                .collect(),
            refs: self.refs.iter().map(|(r, t)| (*r, s.apply(t))).collect(),
        }
    }

    pub fn refs(&self) -> &[(RefId, Type)] {
        &self.refs
    }
}

/// A term annotated with the types that pin down its derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Elab {
    Var { name: String, inst: Vec<Type> },
    Const { c: Const, inst: Vec<Type> },
    Lam { param: String, param_ty: Type, body: Box<Elab> },
    App { fun: Box<Elab>, arg: Box<Elab>, arg_ty: Type },
    Let { name: String, bound: Box<Elab>, scheme: Scheme, body: Box<Elab> },
    Catch { body: Box<Elab>, handler: Box<Elab> },
    Run { heap: Type, body: Box<Elab> },
    HeapBind { heap: Type, bindings: Vec<(RefId, Type, Elab)>, body: Box<Elab> },
    RefName(RefId),
    PartialCatch(Box<Elab>),
    PartialAssign(RefId),
    PartialConst { c: Const, captured: Vec<Elab> },
    /// Assumes an extra `st<heap>` effect for the inner term.
    StExtend { heap: Type, inner: Box<Elab> },
}

impl Elab {
    pub fn erase(&self) -> Expr {
        match self {
            Elab::Var { name, .. } => Expr::Var(name.clone()),
            Elab::Const { c, .. } => Expr::Const(*c),
            Elab::Lam { param, body, .. } => Expr::Lam(param.clone(), Box::new(body.erase())),
            Elab::App { fun, arg, .. } => Expr::App(Box::new(fun.erase()), Box::new(arg.erase())),
            Elab::Let { name, bound, body, .. } => {
                Expr::Let(name.clone(), Box::new(bound.erase()), Box::new(body.erase()))
            }
            Elab::Catch { body, handler } => {
                Expr::Catch(Box::new(body.erase()), Box::new(handler.erase()))
            }
            Elab::Run { body, .. } => Expr::Run(Box::new(body.erase())),
            Elab::HeapBind { bindings, body, .. } => Expr::HeapBind(
                Heap::new(bindings.iter().map(|(r, _, v)| (*r, v.erase())).collect()),
                Box::new(body.erase()),
            ),
            Elab::RefName(r) => Expr::RefName(*r),
            Elab::PartialCatch(e) => Expr::PartialCatch(Box::new(e.erase())),
            Elab::PartialAssign(r) => Expr::PartialAssign(*r),
            Elab::PartialConst { c, captured } => {
                Expr::PartialConst(*c, captured.iter().map(Elab::erase).collect())
            }
            Elab::StExtend { inner, .. } => inner.erase(),
        }
    }

    pub fn apply(&self, s: &Subst) -> Elab {
        let b = |e: &Elab| Box::new(e.apply(s));
        match self {
            Elab::Var { name, inst } => {
                Elab::Var { name: name.clone(), inst: inst.iter().map(|t| s.apply(t)).collect() }
            }
            Elab::Const { c, inst } => {
                Elab::Const { c: *c, inst: inst.iter().map(|t| s.apply(t)).collect() }
            }
            Elab::Lam { param, param_ty, body } => {
                Elab::Lam { param: param.clone(), param_ty: s.apply(param_ty), body: b(body) }
            }
            Elab::App { fun, arg, arg_ty } => {
                Elab::App { fun: b(fun), arg: b(arg), arg_ty: s.apply(arg_ty) }
            }
            Elab::Let { name, bound, scheme, body } => Elab::Let {
                name: name.clone(),
                bound: b(bound),
                scheme: s.apply_scheme(scheme),
                body: b(body),
            },
            Elab::Catch { body, handler } => Elab::Catch { body: b(body), handler: b(handler) },
            Elab::Run { heap, body } => Elab::Run { heap: s.apply(heap), body: b(body) },
            Elab::HeapBind { heap, bindings, body } => Elab::HeapBind {
                heap: s.apply(heap),
                bindings: bindings.iter().map(|(r, t, v)| (*r, s.apply(t), v.apply(s))).collect(),
                body: b(body),
            },
            Elab::RefName(r) => Elab::RefName(*r),
            Elab::PartialCatch(e) => Elab::PartialCatch(b(e)),
            Elab::PartialAssign(r) => Elab::PartialAssign(*r),
            Elab::PartialConst { c, captured } => Elab::PartialConst {
                c: *c,
                captured: captured.iter().map(|e| e.apply(s)).collect(),
            },
            Elab::StExtend { heap, inner } => Elab::StExtend { heap: s.apply(heap), inner: b(inner) },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeErrorKind {
    #[error("{0}")]
    Unify(UnifyFailure),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unbound reference #r{}", .0 .0)]
    UnboundReference(RefId),
    #[error("the heap of `run` escapes into its context")]
    RunEscape { heap: Type },
    #[error("value restriction: a let-bound expression must be total to be generalized ({0})")]
    ValueRestriction(UnifyFailure),
    #[error("internal form in a surface program")]
    InternalForm,
    #[error("heap binding holds a non-value")]
    NonValueInHeap,
    #[error("malformed partial application")]
    MalformedPartial,
}

/// A type error at the node with the given pre-order index.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub node: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InferResult {
    pub subst: Subst,
    pub ty: Type,
    pub effect: Type,
    pub elaborated: Elab,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InferOptions {
    /// Store let-bound schemes closed and open them at each use.
    pub simplify: bool,
    /// Accept heaps, references and partial applications.
    pub internal: bool,
    /// At `run` and heap bindings, fall back to assuming an extra `st` effect
    /// when the body's effect does not provide a suitable one.
    pub st_extend: bool,
}

impl InferOptions {
    pub const SURFACE: InferOptions = InferOptions { simplify: true, internal: false, st_extend: false };
    pub const INTERNAL: InferOptions = InferOptions { simplify: true, internal: true, st_extend: false };
    pub const INTERNAL_EXTEND: InferOptions = InferOptions { simplify: true, internal: true, st_extend: true };
}

pub fn infer(env: &Env, e: &Expr, supply: &mut Supply) -> Result<InferResult, TypeError> {
    infer_with(env, e, supply, InferOptions::SURFACE)
}

/// Inference for terms that may contain heaps and other internal forms.
pub fn infer_internal(env: &Env, e: &Expr, supply: &mut Supply) -> Result<InferResult, TypeError> {
    infer_with(env, e, supply, InferOptions::INTERNAL)
}

pub fn infer_with(
    env: &Env,
    e: &Expr,
    supply: &mut Supply,
    opts: InferOptions,
) -> Result<InferResult, TypeError> {
    let e = e.desugar();
    let mut w = Infer { supply, opts, node: 0 };
    let (s, ty, effect, el) = w.infer(env, &e)?;
    Ok(InferResult {
        ty: s.apply(&ty),
        effect: s.apply(&effect),
        elaborated: el.apply(&s),
        subst: s,
    })
}

/// Quantifies the free variables of `t` that are not free in `env`, in
/// first-occurrence order.
pub fn generalize(env: &Env, t: &Type) -> Scheme {
    let fixed = env.ftv();
    Scheme { vars: t.free_vars().into_iter().filter(|v| !fixed.contains(v)).collect(), body: t.clone() }
}

pub fn instantiate(s: &Scheme, supply: &mut Supply) -> Type {
    instantiate_with(s, supply).0
}

/// Instantiates `s` and also returns the fresh types used for its quantifiers.
pub fn instantiate_with(s: &Scheme, supply: &mut Supply) -> (Type, Vec<Type>) {
    let fresh: Vec<Type> = s.vars.iter().map(|v| supply.fresh(v.kind)).collect();
    (instantiate_at(s, &fresh), fresh)
}

pub fn instantiate_at(s: &Scheme, args: &[Type]) -> Type {
    let mut sub = Subst::new();
    for (v, t) in s.vars.iter().zip(args) {
        sub.insert(*v, t.clone()).expect("instantiation preserves kinds");
    }
    sub.apply(&s.body)
}

/// Closes the latent effect of a top-level arrow when its tail variable is
/// quantified and occurs nowhere else.
pub fn close_type(s: &Scheme) -> Scheme {
    let Some((arg, eff, res)) = s.body.as_fun() else {
        return s.clone();
    };
    let Type::Var(mu) = effect_tail(eff) else {
        return s.clone();
    };
    if !s.vars.contains(mu) {
        return s.clone();
    }
    let (labels, _) = row_parts(eff);
    let elsewhere = arg.occurs(*mu) || res.occurs(*mu) || labels.iter().any(|l| l.occurs(*mu));
    if elsewhere {
        return s.clone();
    }
    let closed = Type::closed_row(labels.into_iter().cloned());
    Scheme {
        vars: s.vars.iter().copied().filter(|v| v != mu).collect(),
        body: Type::fun(arg.clone(), closed, res.clone()),
    }
}

/// Re-opens the closed latent effect of a top-level arrow with a fresh tail.
pub fn open_type(t: &Type, supply: &mut Supply) -> Type {
    match t.as_fun() {
        Some((arg, eff, res)) if *effect_tail(eff) == Type::empty_row() => {
            let (labels, _) = row_parts(eff);
            let row = Type::row(labels.into_iter().cloned(), supply.fresh(Kind::Row));
            Type::fun(arg.clone(), row, res.clone())
        }
        _ => t.clone(),
    }
}

fn scheme_of(body: impl FnOnce(&mut dyn FnMut(Kind) -> Type) -> Type) -> Scheme {
    let mut supply = Supply::new();
    let mut fresh = |k: Kind| supply.fresh(k);
    let body = body(&mut fresh);
    Scheme { vars: body.free_vars(), body }
}

pub fn typeof_const(c: Const) -> Scheme {
    use Kind::{Heap, Row, Star};
    match c {
        Const::Unit => Scheme::mono(Type::unit()),
        Const::Int(_) => Scheme::mono(Type::int()),
        Const::Ref => scheme_of(|f| {
            let (a, xi, mu) = (f(Star), f(Heap), f(Row));
            Type::fun(a.clone(), Type::row([Type::st(xi.clone())], mu), Type::reference(xi, a))
        }),
        Const::Read => scheme_of(|f| {
            let (xi, a, mu) = (f(Heap), f(Star), f(Row));
            Type::fun(
                Type::reference(xi.clone(), a.clone()),
                Type::row([Type::st(xi), Type::div()], mu),
                a,
            )
        }),
        Const::Assign => scheme_of(|f| {
            let (xi, a, m1, m2) = (f(Heap), f(Star), f(Row), f(Row));
            Type::fun(
                Type::reference(xi.clone(), a.clone()),
                m1,
                Type::fun(a, Type::row([Type::st(xi)], m2), Type::unit()),
            )
        }),
        Const::Throw => scheme_of(|f| {
            let (a, mu) = (f(Star), f(Row));
            Type::fun(Type::unit(), Type::row([Type::exn()], mu), a)
        }),
        Const::Fix => scheme_of(|f| {
            let (a, b, mu, mu2) = (f(Star), f(Star), f(Row), f(Row));
            let g = Type::fun(a, Type::row([Type::div()], mu), b);
            Type::fun(Type::fun(g.clone(), mu2.clone(), g.clone()), mu2, g)
        }),
        Const::Inc | Const::Dec => scheme_of(|f| Type::fun(Type::int(), f(Row), Type::int())),
        Const::Add => scheme_of(|f| {
            let (m1, m2) = (f(Row), f(Row));
            Type::fun(Type::int(), m1, Type::fun(Type::int(), m2, Type::int()))
        }),
        Const::If0 => scheme_of(|f| {
            let (a, m1, m2, m3) = (f(Star), f(Row), f(Row), f(Row));
            Type::fun(
                Type::int(),
                m1,
                Type::fun(a.clone(), m2, Type::fun(a.clone(), m3, a)),
            )
        }),
    }
}

type Step = (Subst, Type, Type, Elab);

struct Infer<'s> {
    supply: &'s mut Supply,
    opts: InferOptions,
    node: usize,
}

impl<'s> Infer<'s> {
    fn row(&mut self) -> Type {
        self.supply.fresh(Kind::Row)
    }

    fn unify(&mut self, t1: &Type, t2: &Type, node: usize) -> Result<Subst, TypeError> {
        Unifier::new(self.supply)
            .unify(t1, t2)
            .map_err(|f| TypeError { kind: TypeErrorKind::Unify(f), node })
    }

    fn try_unify(&mut self, t1: &Type, t2: &Type) -> Result<Subst, UnifyFailure> {
        Unifier::new(self.supply).unify(t1, t2)
    }

    fn instantiate_binding(&mut self, b: &Binding) -> (Type, Vec<Type>) {
        match &b.closed {
            None => instantiate_with(&b.scheme, self.supply),
            Some(closed) => {
                let t = open_type(&instantiate(closed, self.supply), self.supply);
                let m = match_type(&b.scheme.body, &t).expect("opened type is an instance");
                let inst = b.scheme.vars.iter().map(|v| m.apply(&Type::Var(*v))).collect();
                (t, inst)
            }
        }
    }

    fn infer(&mut self, env: &Env, e: &Expr) -> Result<Step, TypeError> {
        let node = self.node;
        self.node += 1;
        let err = |kind| TypeError { kind, node };
        if !self.opts.internal && !matches!(
            e,
            Expr::Var(_)
                | Expr::Const(_)
                | Expr::Lam(..)
                | Expr::App(..)
                | Expr::Let(..)
                | Expr::Bind(..)
                | Expr::Catch(..)
                | Expr::Run(_)
        ) {
            return Err(err(TypeErrorKind::InternalForm));
        }
        match e {
            Expr::Var(x) => {
                let b = env.lookup(x).ok_or_else(|| err(TypeErrorKind::UnboundVariable(x.clone())))?;
                let (ty, inst) = self.instantiate_binding(&b.clone());
                let eff = self.row();
                Ok((Subst::new(), ty, eff, Elab::Var { name: x.clone(), inst }))
            }
            Expr::Const(c) => {
                let (ty, inst) = instantiate_with(&typeof_const(*c), self.supply);
                let eff = self.row();
                Ok((Subst::new(), ty, eff, Elab::Const { c: *c, inst }))
            }
            Expr::Lam(x, body) => {
                let a = self.supply.fresh(Kind::Star);
                let (s, t2, e2, eb) = self.infer(&env.with_var(x, Scheme::mono(a.clone())), body)?;
                let ty = Type::fun(s.apply(&a), e2, t2);
                let eff = self.row();
                Ok((s, ty, eff, Elab::Lam { param: x.clone(), param_ty: a, body: Box::new(eb) }))
            }
            Expr::App(f, a) => {
                let (s1, t1, e1, ef) = self.infer(env, f)?;
                let (s2, t2, e2, ea) = self.infer(&env.apply(&s1), a)?;
                let alpha = self.supply.fresh(Kind::Star);
                let s3 = self.unify(&s2.apply(&t1), &Type::fun(t2.clone(), e2.clone(), alpha.clone()), node)?;
                let s4 = self.unify(&s3.apply(&s2.apply(&e1)), &s3.apply(&e2), node)?;
                let s43 = Subst::compose(&s4, &s3);
                let s = Subst::compose(&s43, &Subst::compose(&s2, &s1));
                let el = Elab::App { fun: Box::new(ef), arg: Box::new(ea), arg_ty: t2 };
                Ok((s, s43.apply(&alpha), s43.apply(&e2), el))
            }
            Expr::Let(x, bound, body) => {
                let (s1, t1, e1, eb) = self.infer(env, bound)?;
                let s2 = self
                    .try_unify(&e1, &Type::empty_row())
                    .map_err(|f| err(TypeErrorKind::ValueRestriction(f)))?;
                let s21 = Subst::compose(&s2, &s1);
                let env1 = env.apply(&s21);
                let scheme = generalize(&env1, &s2.apply(&t1));
                let closed = if self.opts.simplify {
                    Some(close_type(&scheme)).filter(|c| *c != scheme)
                } else {
                    None
                };
                let binding = Binding { scheme: scheme.clone(), closed };
                let (s3, t, eff, ebody) = self.infer(&env1.with_binding(x, binding), body)?;
                let s = Subst::compose(&s3, &s21);
                let el = Elab::Let { name: x.clone(), bound: Box::new(eb), scheme, body: Box::new(ebody) };
                Ok((s, t, eff, el))
            }
            Expr::Bind(..) => self.infer(env, &e.desugar()),
            Expr::Catch(body, handler) => {
                let (s1, t1, e1, eb) = self.infer(env, body)?;
                let (s2, t2, e2, eh) = self.infer(&env.apply(&s1), handler)?;
                let s3 = self.unify(&s2.apply(&e1), &Type::row([Type::exn()], e2.clone()), node)?;
                let expected = Type::fun(Type::unit(), s3.apply(&e2), s3.apply(&s2.apply(&t1)));
                let s4 = self.unify(&s3.apply(&t2), &expected, node)?;
                let s43 = Subst::compose(&s4, &s3);
                let s = Subst::compose(&s43, &Subst::compose(&s2, &s1));
                let ty = s43.apply(&s2.apply(&t1));
                let el = Elab::Catch { body: Box::new(eb), handler: Box::new(eh) };
                Ok((s, ty, s43.apply(&e2), el))
            }
            Expr::Run(body) => {
                let (s1, t, eff, eb) = self.infer(env, body)?;
                let xi = self.supply.fresh(Kind::Heap);
                let mu = self.row();
                let failure = match self.try_unify(&eff, &Type::row([Type::st(xi.clone())], mu.clone())) {
                    Ok(s2) => {
                        let heap = s2.apply(&xi);
                        let s = Subst::compose(&s2, &s1);
                        let escapes = match heap {
                            Type::Var(v) => {
                                env.apply(&s).ftv().contains(&v)
                                    || s2.apply(&t).occurs(v)
                                    || s2.apply(&mu).occurs(v)
                            }
                            _ => true,
                        };
                        if !escapes {
                            let el = Elab::Run { heap: xi, body: Box::new(eb) };
                            return Ok((s, s2.apply(&t), s2.apply(&mu), el));
                        }
                        err(TypeErrorKind::RunEscape { heap })
                    }
                    Err(f) => err(TypeErrorKind::Unify(f)),
                };
                if !self.opts.st_extend {
                    return Err(failure);
                }
                let el = Elab::Run {
                    heap: xi.clone(),
                    body: Box::new(Elab::StExtend { heap: xi, inner: Box::new(eb) }),
                };
                Ok((s1, t, eff, el))
            }
            Expr::HeapBind(h, body) => {
                let xi = self.supply.fresh(Kind::Heap);
                let (s1, env1, bindings) = self.heap_env(env, h, &xi, node)?;
                let (s2, t, eff, eb) = self.infer(&env1, body)?;
                let s21 = Subst::compose(&s2, &s1);
                let mu = self.row();
                let target = Type::row([Type::st(s21.apply(&xi))], mu.clone());
                match self.try_unify(&eff, &target) {
                    Ok(s3) => {
                        let s = Subst::compose(&s3, &s21);
                        let el = Elab::HeapBind { heap: xi, bindings, body: Box::new(eb) };
                        Ok((s, s3.apply(&t), s3.apply(&target), el))
                    }
                    Err(_) if self.opts.st_extend => {
                        let eff = Type::row([Type::st(s21.apply(&xi))], eff);
                        let body = Elab::StExtend { heap: xi.clone(), inner: Box::new(eb) };
                        let el = Elab::HeapBind { heap: xi, bindings, body: Box::new(body) };
                        Ok((s21, t, eff, el))
                    }
                    Err(f) => Err(err(TypeErrorKind::Unify(f))),
                }
            }
            Expr::RefName(r) => {
                let ty = env.lookup_ref(*r).cloned().ok_or_else(|| err(TypeErrorKind::UnboundReference(*r)))?;
                let eff = self.row();
                Ok((Subst::new(), ty, eff, Elab::RefName(*r)))
            }
            Expr::PartialAssign(r) => {
                let rt = env.lookup_ref(*r).cloned().ok_or_else(|| err(TypeErrorKind::UnboundReference(*r)))?;
                let (h, a) = rt.as_ref().ok_or_else(|| err(TypeErrorKind::MalformedPartial))?;
                let m2 = self.row();
                let ty = Type::fun(a.clone(), Type::row([Type::st(h.clone())], m2), Type::unit());
                let eff = self.row();
                Ok((Subst::new(), ty, eff, Elab::PartialAssign(*r)))
            }
            Expr::PartialCatch(body) => {
                let (s1, t1, e1, eb) = self.infer(env, body)?;
                let mu = self.row();
                let s2 = self.unify(&e1, &Type::row([Type::exn()], mu.clone()), node)?;
                let (t1, mu) = (s2.apply(&t1), s2.apply(&mu));
                let handler = Type::fun(Type::unit(), mu.clone(), t1.clone());
                let ty = Type::fun(handler, mu, t1);
                let eff = self.row();
                Ok((Subst::compose(&s2, &s1), ty, eff, Elab::PartialCatch(Box::new(eb))))
            }
            Expr::PartialConst(c, captured) => self.partial_const(env, *c, captured, node),
        }
    }

    fn partial_const(&mut self, env: &Env, c: Const, captured: &[Expr], node: usize) -> Result<Step, TypeError> {
        let err = |kind| TypeError { kind, node };
        if !captured.iter().all(Expr::is_value) {
            return Err(err(TypeErrorKind::MalformedPartial));
        }
        let mut s = Subst::new();
        let mut tys = Vec::new();
        let mut els = Vec::new();
        for v in captured {
            let (s1, t, _, el) = self.infer(&env.apply(&s), v)?;
            s = Subst::compose(&s1, &s);
            tys.push(t);
            els.push(el);
        }
        let tys: Vec<Type> = tys.iter().map(|t| s.apply(t)).collect();
        let ty = match (c, tys.as_slice()) {
            (Const::Add, [n]) => {
                let s1 = self.unify(n, &Type::int(), node)?;
                s = Subst::compose(&s1, &s);
                let m = self.row();
                Type::fun(Type::int(), m, Type::int())
            }
            (Const::If0, [n]) => {
                let s1 = self.unify(n, &Type::int(), node)?;
                s = Subst::compose(&s1, &s);
                let a = self.supply.fresh(Kind::Star);
                let (m2, m3) = (self.row(), self.row());
                Type::fun(a.clone(), m2, Type::fun(a.clone(), m3, a))
            }
            (Const::If0, [n, v]) => {
                let s1 = self.unify(n, &Type::int(), node)?;
                s = Subst::compose(&s1, &s);
                let a = s1.apply(v);
                let m3 = self.row();
                Type::fun(a.clone(), m3, a)
            }
            _ => return Err(err(TypeErrorKind::MalformedPartial)),
        };
        let eff = self.row();
        Ok((s, ty, eff, Elab::PartialConst { c, captured: els }))
    }

    /// Types the references of a heap as `ref<xi, t_i>`, inferring each value
    /// under the extended environment and unifying with the placeholders.
    fn heap_env(
        &mut self,
        env: &Env,
        h: &Heap,
        xi: &Type,
        node: usize,
    ) -> Result<(Subst, Env, Vec<(RefId, Type, Elab)>), TypeError> {
        if !h.bindings.iter().all(|(_, v)| v.is_value()) {
            return Err(TypeError { kind: TypeErrorKind::NonValueInHeap, node });
        }
        let placeholders: Vec<Type> = h.bindings.iter().map(|_| self.supply.fresh(Kind::Star)).collect();
        let mut env1 = env.clone();
        for ((r, _), a) in h.bindings.iter().zip(&placeholders) {
            env1 = env1.with_ref(*r, Type::reference(xi.clone(), a.clone()));
        }
        let mut s = Subst::new();
        let mut els = Vec::new();
        for ((r, v), a) in h.bindings.iter().zip(&placeholders) {
            let (s1, t, e, el) = self.infer(&env1.apply(&s), v)?;
            s = Subst::compose(&s1, &s);
            let s2 = self.unify(&s.apply(a), &t, node)?;
            s = Subst::compose(&s2, &s);
            let s3 = self.unify(&s.apply(&e), &Type::empty_row(), node)?;
            s = Subst::compose(&s3, &s);
            els.push((*r, a.clone(), el));
        }
        Ok((s.clone(), env1.apply(&s), els))
    }
}

/// The reference environment of a heap: each reference typed `ref<h, t_i>`.
pub fn reference_env(h: &Heap, heap: &Type, env: &Env, supply: &mut Supply) -> Result<Env, TypeError> {
    let mut w = Infer { supply, opts: InferOptions::INTERNAL, node: 0 };
    let (_, env1, _) = w.heap_env(env, h, heap, 0)?;
    Ok(env1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;
    use crate::rows::{effect_contains, is_open};

    fn infer0(e: &Expr) -> Result<InferResult, TypeError> {
        infer(&Env::new(), e, &mut Supply::new())
    }

    #[test]
    fn identity_generalizes() {
        let e = let_("id", lam("x", var("x")), var("id"));
        let r = infer0(&e).unwrap();
        let s = generalize(&Env::new(), &r.ty);
        assert_eq!(s.vars.len(), 2);
        let (a, eff, b) = s.body.as_fun().unwrap();
        assert_eq!(a, b);
        assert!(matches!(eff, Type::Var(v) if v.kind == Kind::Row));
    }

    #[test]
    fn value_restriction() {
        let e = let_("r", app(constant(Const::Ref), unit()), var("r"));
        let err = infer0(&e).unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::ValueRestriction(_)));
    }

    #[test]
    fn run_escape() {
        let e = run(bind("x", app(constant(Const::Ref), int(1)), var("x")));
        let err = infer0(&e).unwrap_err();
        assert!(matches!(err.kind, TypeErrorKind::RunEscape { .. }));
    }

    #[test]
    fn throw_and_catch() {
        let r = infer0(&throw_unit()).unwrap();
        assert!(matches!(r.ty, Type::Var(_)));
        assert!(effect_contains(&Type::exn(), &r.effect));
        assert!(is_open(&r.effect));
        let r = infer0(&catch(throw_unit(), lam("x", unit()))).unwrap();
        assert_eq!(r.ty, Type::unit());
        assert!(matches!(r.effect, Type::Var(_)));
    }

    #[test]
    fn closing_and_opening() {
        let a = TyVar { id: 0, kind: Kind::Star };
        let mu = TyVar { id: 1, kind: Kind::Row };
        let s = Scheme {
            vars: vec![a, mu],
            body: Type::fun(Type::Var(a), Type::row([Type::exn()], Type::Var(mu)), Type::Var(a)),
        };
        let c = close_type(&s);
        assert_eq!(c.vars, vec![a]);
        assert_eq!(c.body, Type::fun(Type::Var(a), Type::closed_row([Type::exn()]), Type::Var(a)));
        let mut supply = Supply::starting_at(10, 0);
        let o = open_type(&c.body, &mut supply);
        assert_eq!(o, Type::fun(Type::Var(a), Type::row([Type::exn()], Type::var(10, Kind::Row)), Type::Var(a)));
        let id = Scheme { vars: vec![a, mu], body: Type::fun(Type::Var(a), Type::Var(mu), Type::Var(a)) };
        assert_eq!(close_type(&id).body, Type::fun(Type::Var(a), Type::empty_row(), Type::Var(a)));
        let shared = Scheme {
            vars: vec![mu],
            body: Type::fun(Type::fun(Type::unit(), Type::Var(mu), Type::unit()), Type::Var(mu), Type::unit()),
        };
        assert_eq!(close_type(&shared), shared);
    }

    #[test]
    fn generalize_respects_env() {
        let a = Type::var(0, Kind::Star);
        let env = Env::new().with_var("y", Scheme::mono(a.clone()));
        let t = Type::fun(a.clone(), Type::empty_row(), a.clone());
        assert!(generalize(&env, &t).vars.is_empty());
        assert!(generalize(&Env::new(), &Type::int()).vars.is_empty());
    }

    #[test]
    fn constant_table() {
        let t = typeof_const(Const::Throw);
        assert_eq!(t.vars.len(), 2);
        let (_, eff, _) = typeof_const(Const::Read).body.as_fun().map(|(a, e, r)| (a.clone(), e.clone(), r.clone())).unwrap();
        assert!(effect_contains(&Type::div(), &eff));
        assert_eq!(typeof_const(Const::Unit), Scheme::mono(Type::unit()));
        let mut supply = Supply::new();
        let t1 = instantiate(&typeof_const(Const::Throw), &mut supply);
        let t2 = instantiate(&typeof_const(Const::Throw), &mut supply);
        assert!(t1.ftv().is_disjoint(&t2.ftv()));
    }

    #[test]
    fn heap_reference_types() {
        let h = Heap::new(vec![(RefId(1), int(1))]);
        let mut supply = Supply::new();
        let xi = supply.fresh(Kind::Heap);
        let env = reference_env(&h, &xi, &Env::new(), &mut supply).unwrap();
        assert_eq!(env.lookup_ref(RefId(1)), Some(&Type::reference(xi.clone(), Type::int())));

        let h = Heap::new(vec![(RefId(1), Expr::PartialAssign(RefId(2))), (RefId(2), unit())]);
        let env = reference_env(&h, &xi, &Env::new(), &mut supply).unwrap();
        let (_, t1) = env.lookup_ref(RefId(1)).unwrap().as_ref().unwrap();
        let (a, eff, r) = t1.as_fun().unwrap();
        assert_eq!((a, r), (&Type::unit(), &Type::unit()));
        assert!(effect_contains(&Type::st(xi.clone()), eff));
        assert_eq!(env.lookup_ref(RefId(2)), Some(&Type::reference(xi, Type::unit())));
    }

    #[test]
    fn internal_forms_need_internal_mode() {
        let e = heap(vec![(1, int(1))], reference(1));
        assert_eq!(infer0(&e).unwrap_err().kind, TypeErrorKind::InternalForm);
        let r = infer_internal(&Env::new(), &e, &mut Supply::new()).unwrap();
        assert!(matches!(r.ty, Type::App(crate::types::TyCon::Ref, _)));
    }
}
