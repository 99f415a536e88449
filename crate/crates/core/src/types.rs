//! Kinds, types, schemes and substitutions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Star,
    Row,
    Label,
    Heap,
    Arrow(&'static [Kind], &'static Kind),
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Star => write!(f, "*"),
            Kind::Row => write!(f, "e"),
            Kind::Label => write!(f, "k"),
            Kind::Heap => write!(f, "h"),
            Kind::Arrow(params, res) => {
                write!(f, "(")?;
                for (i, k) in params.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}")?;
                }
                write!(f, ") -> {res}")
            }
        }
    }
}

/// Built-in type constants. `HeapConst` names a concrete heap and only shows
/// up in tests and hand-written typings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TyCon {
    Unit,
    Int,
    Fun,
    EmptyRow,
    Extend,
    Ref,
    Exn,
    Div,
    St,
    HeapConst(u32),
}

impl TyCon {
    pub fn kind(self) -> Kind {
        use Kind::*;
        match self {
            TyCon::Unit | TyCon::Int => Star,
            TyCon::Fun => Arrow(&[Star, Row, Star], &Star),
            TyCon::EmptyRow => Row,
            TyCon::Extend => Arrow(&[Label, Row], &Row),
            TyCon::Ref => Arrow(&[Heap, Star], &Star),
            TyCon::Exn | TyCon::Div => Label,
            TyCon::St => Arrow(&[Heap], &Label),
            TyCon::HeapConst(_) => Heap,
        }
    }

    pub fn name(self) -> String {
        match self {
            TyCon::Unit => "()".into(),
            TyCon::Int => "int".into(),
            TyCon::Fun => "->".into(),
            TyCon::EmptyRow => "<>".into(),
            TyCon::Extend => "<|>".into(),
            TyCon::Ref => "ref".into(),
            TyCon::Exn => "exn".into(),
            TyCon::Div => "div".into(),
            TyCon::St => "st".into(),
            TyCon::HeapConst(n) => format!("H{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TyVar {
    pub id: u32,
    pub kind: Kind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Var(TyVar),
    Con(TyCon),
    App(TyCon, Arc<[Type]>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum KindError {
    #[error("malformed application of {head}: expected {expected} arguments, got {got}")]
    Arity { head: String, expected: usize, got: usize },
    #[error("argument {index} of {head} has kind {got}, expected {expected}")]
    Argument { head: String, index: usize, expected: Kind, got: Kind },
    #[error("constructor {0} applied to no arguments")]
    NotArrow(String),
    #[error("type variable {0} has kind k")]
    LabelVar(u32),
    #[error("cannot bind variable of kind {var} to a type of kind {ty}")]
    Mismatch { var: Kind, ty: Kind },
}

pub fn kind_of(t: &Type) -> Result<Kind, KindError> {
    kind_with(t, &kind_of)
}

/// The kind of `t`, trusting that its arguments are well-kinded.
pub fn kind_shallow(t: &Type) -> Result<Kind, KindError> {
    kind_with(t, &|a| {
        Ok(match a {
            Type::Var(v) => v.kind,
            Type::Con(c) => c.kind(),
            Type::App(c, _) => match c.kind() {
                Kind::Arrow(_, res) => *res,
                k => k,
            },
        })
    })
}

fn kind_with(t: &Type, arg_kind: &dyn Fn(&Type) -> Result<Kind, KindError>) -> Result<Kind, KindError> {
    match t {
        Type::Var(v) => {
            if v.kind == Kind::Label {
                Err(KindError::LabelVar(v.id))
            } else {
                Ok(v.kind)
            }
        }
        Type::Con(c) => Ok(c.kind()),
        Type::App(c, args) => match c.kind() {
            Kind::Arrow(params, res) => {
                if params.len() != args.len() {
                    return Err(KindError::Arity {
                        head: c.name(),
                        expected: params.len(),
                        got: args.len(),
                    });
                }
                for (i, (p, a)) in params.iter().zip(args.iter()).enumerate() {
                    let k = arg_kind(a)?;
                    if k != *p {
                        return Err(KindError::Argument {
                            head: c.name(),
                            index: i,
                            expected: *p,
                            got: k,
                        });
                    }
                }
                Ok(*res)
            }
            _ => Err(KindError::NotArrow(c.name())),
        },
    }
}

impl Type {
    pub fn app(head: TyCon, args: Vec<Type>) -> Type {
        let t = Type::App(head, args.into());
        debug_assert!(kind_shallow(&t).is_ok(), "ill-kinded type {t:?}");
        t
    }

    pub fn var(id: u32, kind: Kind) -> Type {
        Type::Var(TyVar { id, kind })
    }

    pub fn unit() -> Type {
        Type::Con(TyCon::Unit)
    }

    pub fn int() -> Type {
        Type::Con(TyCon::Int)
    }

    pub fn exn() -> Type {
        Type::Con(TyCon::Exn)
    }

    pub fn div() -> Type {
        Type::Con(TyCon::Div)
    }

    pub fn st(heap: Type) -> Type {
        Type::app(TyCon::St, vec![heap])
    }

    pub fn heap_const(n: u32) -> Type {
        Type::Con(TyCon::HeapConst(n))
    }

    pub fn empty_row() -> Type {
        Type::Con(TyCon::EmptyRow)
    }

    pub fn extend(label: Type, tail: Type) -> Type {
        Type::app(TyCon::Extend, vec![label, tail])
    }

    /// `<l1,...,ln|tail>`
    pub fn row(labels: impl IntoIterator<Item = Type>, tail: Type) -> Type {
        let labels: Vec<Type> = labels.into_iter().collect();
        labels
            .into_iter()
            .rev()
            .fold(tail, |acc, l| Type::extend(l, acc))
    }

    pub fn closed_row(labels: impl IntoIterator<Item = Type>) -> Type {
        Type::row(labels, Type::empty_row())
    }

    pub fn fun(arg: Type, eff: Type, res: Type) -> Type {
        Type::app(TyCon::Fun, vec![arg, eff, res])
    }

    pub fn reference(heap: Type, content: Type) -> Type {
        Type::app(TyCon::Ref, vec![heap, content])
    }

    pub fn as_var(&self) -> Option<TyVar> {
        match self {
            Type::Var(v) => Some(*v),
            _ => None,
        }
    }

    /// Splits `a -> e b` into its parts.
    pub fn as_fun(&self) -> Option<(&Type, &Type, &Type)> {
        match self {
            Type::App(TyCon::Fun, args) => Some((&args[0], &args[1], &args[2])),
            _ => None,
        }
    }

    pub fn as_extend(&self) -> Option<(&Type, &Type)> {
        match self {
            Type::App(TyCon::Extend, args) => Some((&args[0], &args[1])),
            _ => None,
        }
    }

    pub fn as_ref(&self) -> Option<(&Type, &Type)> {
        match self {
            Type::App(TyCon::Ref, args) => Some((&args[0], &args[1])),
            _ => None,
        }
    }

    pub fn head(&self) -> Option<TyCon> {
        match self {
            Type::Var(_) => None,
            Type::Con(c) | Type::App(c, _) => Some(*c),
        }
    }

    /// Free variables in left-to-right first-occurrence order.
    pub fn free_vars(&self) -> Vec<TyVar> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<TyVar>) {
        match self {
            Type::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Type::Con(_) => {}
            Type::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn ftv(&self) -> BTreeSet<TyVar> {
        let mut out = BTreeSet::new();
        self.ftv_into(&mut out);
        out
    }

    pub fn ftv_into(&self, out: &mut BTreeSet<TyVar>) {
        match self {
            Type::Var(v) => {
                out.insert(*v);
            }
            Type::Con(_) => {}
            Type::App(_, args) => args.iter().for_each(|a| a.ftv_into(out)),
        }
    }

    pub fn occurs(&self, v: TyVar) -> bool {
        match self {
            Type::Var(w) => *w == v,
            Type::Con(_) => false,
            Type::App(_, args) => args.iter().any(|a| a.occurs(v)),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Type::Var(_) | Type::Con(_) => 1,
            Type::App(_, args) => 1 + args.iter().map(Type::size).sum::<usize>(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scheme {
    pub vars: Vec<TyVar>,
    pub body: Type,
}

impl Scheme {
    pub fn mono(body: Type) -> Scheme {
        Scheme { vars: Vec::new(), body }
    }

    pub fn ftv(&self) -> BTreeSet<TyVar> {
        let mut s = self.body.ftv();
        for v in &self.vars {
            s.remove(v);
        }
        s
    }

    /// Drops quantifiers that do not occur in the body.
    pub fn normalize(mut self) -> Scheme {
        let fv = self.body.ftv();
        self.vars.retain(|v| fv.contains(v));
        self
    }
}

/// Finite, kind-preserving map from type variables to types.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subst {
    map: BTreeMap<TyVar, Type>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn singleton(v: TyVar, t: Type) -> Result<Subst, KindError> {
        let mut s = Subst::new();
        s.insert(v, t)?;
        Ok(s)
    }

    /// Adds `v ↦ t`; `t` itself is assumed well-kinded.
    pub fn insert(&mut self, v: TyVar, t: Type) -> Result<(), KindError> {
        let k = kind_shallow(&t)?;
        if k != v.kind {
            return Err(KindError::Mismatch { var: v.kind, ty: k });
        }
        self.map.insert(v, t);
        Ok(())
    }

    pub fn get(&self, v: TyVar) -> Option<&Type> {
        self.map.get(&v)
    }

    pub fn contains(&self, v: TyVar) -> bool {
        self.map.contains_key(&v)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TyVar, &Type)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = TyVar> + '_ {
        self.map.keys().copied()
    }

    pub fn apply(&self, t: &Type) -> Type {
        if self.map.is_empty() {
            return t.clone();
        }
        self.apply_changed(t).unwrap_or_else(|| t.clone())
    }

    /// `None` when `t` is unaffected, so that unchanged subtrees stay shared.
    fn apply_changed(&self, t: &Type) -> Option<Type> {
        match t {
            Type::Var(v) => self.map.get(v).cloned(),
            Type::Con(_) => None,
            Type::App(c, args) => {
                let mut out: Option<Vec<Type>> = None;
                for (i, a) in args.iter().enumerate() {
                    match (self.apply_changed(a), out.as_mut()) {
                        (Some(n), Some(v)) => v.push(n),
                        (Some(n), None) => {
                            let mut v = args[..i].to_vec();
                            v.push(n);
                            out = Some(v);
                        }
                        (None, Some(v)) => v.push(a.clone()),
                        (None, None) => {}
                    }
                }
                out.map(|v| Type::App(*c, v.into()))
            }
        }
    }

    pub fn apply_scheme(&self, s: &Scheme) -> Scheme {
        if s.vars.iter().all(|v| !self.contains(*v)) {
            return Scheme { vars: s.vars.clone(), body: self.apply(&s.body) };
        }
        let mut inner = self.clone();
        for v in &s.vars {
            inner.map.remove(v);
        }
        Scheme { vars: s.vars.clone(), body: inner.apply(&s.body) }
    }

    /// `compose(s2, s1)` applies `s1` first, then `s2`.
    pub fn compose(s2: &Subst, s1: &Subst) -> Subst {
        if s2.map.is_empty() {
            return s1.clone();
        }
        let mut map: BTreeMap<TyVar, Type> =
            s1.map.iter().map(|(v, t)| (*v, s2.apply(t))).collect();
        for (v, t) in &s2.map {
            map.entry(*v).or_insert_with(|| t.clone());
        }
        map.retain(|v, t| *t != Type::Var(*v));
        Subst { map }
    }

    pub fn then(&self, later: &Subst) -> Subst {
        Subst::compose(later, self)
    }

    pub fn is_idempotent(&self) -> bool {
        self.map.values().all(|t| t.ftv().iter().all(|v| !self.map.contains_key(v)))
    }

    pub fn remove(&mut self, v: TyVar) {
        self.map.remove(&v);
    }
}

/// Per-session supply of fresh type variables and reference names.
#[derive(Clone, Debug, Default)]
pub struct Supply {
    next_var: u32,
    next_ref: u32,
}

impl Supply {
    pub fn new() -> Supply {
        Supply::default()
    }

    pub fn starting_at(next_var: u32, next_ref: u32) -> Supply {
        Supply { next_var, next_ref }
    }

    pub fn fresh_var(&mut self, kind: Kind) -> TyVar {
        debug_assert!(kind != Kind::Label);
        let id = self.next_var;
        self.next_var += 1;
        TyVar { id, kind }
    }

    pub fn fresh(&mut self, kind: Kind) -> Type {
        Type::Var(self.fresh_var(kind))
    }

    pub fn fresh_ref(&mut self) -> u32 {
        let id = self.next_ref;
        self.next_ref += 1;
        id
    }

    pub fn peek_var(&self) -> u32 {
        self.next_var
    }

    /// Makes sure later fresh names avoid everything below the bounds.
    pub fn reserve(&mut self, var_bound: u32, ref_bound: u32) {
        self.next_var = self.next_var.max(var_bound);
        self.next_ref = self.next_ref.max(ref_bound);
    }
}
