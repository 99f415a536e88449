//! Test-side oracles written independently of the library's own row code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use effrow::expr::{Expr, Heap};
use effrow::types::{Kind, Subst, Supply, TyCon, TyVar, Type};
use effrow::unify::unify;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Type equivalence

/// Flattens a row into its labels and tail without going through the library.
fn flatten(row: &Type) -> (Vec<Type>, Type) {
    let mut labels = Vec::new();
    let mut cur = row.clone();
    loop {
        match &cur {
            Type::App(TyCon::Extend, args) => {
                labels.push(args[0].clone());
                let next = args[1].clone();
                cur = next;
            }
            _ => return (labels, cur),
        }
    }
}

fn is_row(t: &Type) -> bool {
    match t {
        Type::Var(v) => v.kind == Kind::Row,
        Type::Con(TyCon::EmptyRow) | Type::App(TyCon::Extend, _) => true,
        _ => false,
    }
}

fn head_of(l: &Type) -> TyCon {
    match l {
        Type::Con(c) | Type::App(c, _) => *c,
        Type::Var(_) => panic!("label variable"),
    }
}

/// Labels grouped by head, keeping the relative order inside each group.
fn by_head(labels: &[Type]) -> BTreeMap<TyCon, Vec<&Type>> {
    let mut m: BTreeMap<TyCon, Vec<&Type>> = BTreeMap::new();
    for l in labels {
        m.entry(head_of(l)).or_default().push(l);
    }
    m
}

/// Two types are equivalent when they agree structurally and each row has
/// the same tail and, per label head, the same sequence of labels.
pub fn equiv(a: &Type, b: &Type) -> bool {
    if is_row(a) && is_row(b) {
        let (la, ta) = flatten(a);
        let (lb, tb) = flatten(b);
        if ta != tb || la.len() != lb.len() {
            return false;
        }
        let (ga, gb) = (by_head(&la), by_head(&lb));
        return ga.len() == gb.len()
            && ga.iter().all(|(h, xs)| {
                gb.get(h)
                    .is_some_and(|ys| xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| equiv(x, y)))
            });
    }
    match (a, b) {
        (Type::Var(x), Type::Var(y)) => x == y,
        (Type::Con(c), Type::Con(d)) => c == d,
        (Type::App(c, xs), Type::App(d, ys)) => {
            c == d && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| equiv(x, y))
        }
        _ => false,
    }
}

pub fn vars_of(t: &Type, out: &mut Vec<TyVar>) {
    match t {
        Type::Var(v) => {
            if !out.contains(v) {
                out.push(*v);
            }
        }
        Type::Con(_) => {}
        Type::App(_, args) => args.iter().for_each(|a| vars_of(a, out)),
    }
}

pub fn subst_of(pairs: &[(TyVar, Type)]) -> Subst {
    let mut s = Subst::new();
    for (v, t) in pairs {
        s.insert(*v, t.clone()).expect("well-kinded");
    }
    s
}

// ---------------------------------------------------------------------------
// Random well-kinded types

pub const STAR_POOL: [u32; 3] = [0, 1, 2];
pub const ROW_POOL: [u32; 3] = [10, 11, 12];
pub const HEAP_POOL: [u32; 2] = [20, 21];

/// A supply whose fresh variables never collide with the pools above.
pub fn fresh_supply() -> Supply {
    Supply::starting_at(1000, 1)
}

pub struct TypeGen {
    pub rng: ChaCha8Rng,
}

impl TypeGen {
    pub fn new(rng: ChaCha8Rng) -> TypeGen {
        TypeGen { rng }
    }

    fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.rng.gen_range(0..xs.len())]
    }

    pub fn heap(&mut self) -> Type {
        match self.rng.gen_range(0..4) {
            0 => Type::heap_const(self.rng.gen_range(0..2)),
            _ => Type::var(self.pick(&HEAP_POOL), Kind::Heap),
        }
    }

    pub fn label(&mut self) -> Type {
        match self.rng.gen_range(0..5) {
            0 | 1 => Type::exn(),
            2 | 3 => Type::div(),
            _ => Type::st(self.heap()),
        }
    }

    pub fn row(&mut self) -> Type {
        let n = self.rng.gen_range(0..=2);
        let labels: Vec<Type> = (0..n).map(|_| self.label()).collect();
        let tail = if self.rng.gen_bool(0.6) { Type::var(self.pick(&ROW_POOL), Kind::Row) } else { Type::empty_row() };
        Type::row(labels, tail)
    }

    pub fn star(&mut self, depth: usize) -> Type {
        let top = if depth == 0 { 3 } else { 6 };
        match self.rng.gen_range(0..top) {
            0 => Type::var(self.pick(&STAR_POOL), Kind::Star),
            1 => Type::unit(),
            2 => Type::int(),
            3 | 4 => {
                let a = self.star(depth - 1);
                let e = self.row();
                let r = self.star(depth - 1);
                Type::fun(a, e, r)
            }
            _ => {
                let h = self.heap();
                Type::reference(h, self.star(depth - 1))
            }
        }
    }

    fn of_kind(&mut self, k: Kind) -> Type {
        match k {
            Kind::Star => self.star(1),
            Kind::Row => self.row(),
            Kind::Heap => self.heap(),
            _ => unreachable!(),
        }
    }

    /// Rotates the labels of every row by a random amount.
    pub fn shuffle_rows(&mut self, t: &Type) -> Type {
        if is_row(t) {
            let (mut labels, tail) = flatten(t);
            let labels_len = labels.len();
            if labels_len > 1 {
                let k = self.rng.gen_range(0..labels_len);
                labels.rotate_left(k);
            }
            let labels: Vec<Type> = labels.iter().map(|l| self.shuffle_rows(l)).collect();
            return Type::row(labels, tail);
        }
        match t {
            Type::App(c, args) => {
                let args: Vec<Type> = args.iter().map(|a| self.shuffle_rows(a)).collect();
                Type::app(*c, args)
            }
            _ => t.clone(),
        }
    }

    /// A pair of types of the same kind. Most pairs share structure so that a
    /// good share of them unify.
    pub fn pair(&mut self) -> (Type, Type) {
        let row = self.rng.gen_bool(0.3);
        let fresh = |g: &mut TypeGen| if row { g.row() } else { g.star(2) };
        let t1 = fresh(self);
        let t2 = match self.rng.gen_range(0..4) {
            0 => fresh(self),
            1 => self.shuffle_rows(&t1),
            _ => {
                let mut vs = Vec::new();
                vars_of(&t1, &mut vs);
                let mut pairs = Vec::new();
                for v in vs {
                    if self.rng.gen_bool(0.5) {
                        pairs.push((v, self.of_kind(v.kind)));
                    }
                }
                let t = subst_of(&pairs).apply(&t1);
                self.shuffle_rows(&t)
            }
        };
        if self.rng.gen_bool(0.5) {
            (t1, t2)
        } else {
            (t2, t1)
        }
    }
}

// ---------------------------------------------------------------------------
// Ground universe and instance matching

pub fn ground_universe(k: Kind) -> Vec<Type> {
    match k {
        Kind::Star => vec![Type::unit(), Type::int()],
        Kind::Heap => vec![Type::heap_const(0), Type::heap_const(1)],
        Kind::Row => {
            let ls = [Type::exn(), Type::div()];
            let mut out = vec![Type::empty_row()];
            for a in &ls {
                out.push(Type::closed_row([a.clone()]));
                for b in &ls {
                    out.push(Type::closed_row([a.clone(), b.clone()]));
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

/// Every ground substitution of `vars` over the universe, or `None` when
/// there would be more than `cap` of them.
pub fn ground_substs(vars: &[TyVar], cap: usize) -> Option<Vec<Vec<(TyVar, Type)>>> {
    let unis: Vec<Vec<Type>> = vars.iter().map(|v| ground_universe(v.kind)).collect();
    let total = unis.iter().try_fold(1usize, |acc, u| acc.checked_mul(u.len()))?;
    if total > cap {
        return None;
    }
    let mut out = vec![Vec::new()];
    for (v, u) in vars.iter().zip(&unis) {
        let mut next = Vec::with_capacity(out.len() * u.len());
        for partial in &out {
            for t in u {
                let mut p: Vec<(TyVar, Type)> = partial.clone();
                p.push((*v, t.clone()));
                next.push(p);
            }
        }
        out = next;
    }
    Some(out)
}

/// Extends `rho` so that `rho(pattern)` is equivalent to the ground type
/// `target`.
pub fn match_ground(pattern: &Type, target: &Type, rho: &mut BTreeMap<TyVar, Type>) -> bool {
    if let Type::Var(v) = pattern {
        return match rho.get(v) {
            Some(t) => equiv(t, target),
            None => {
                rho.insert(*v, target.clone());
                true
            }
        };
    }
    if is_row(pattern) {
        if !is_row(target) {
            return false;
        }
        let (pl, ptail) = flatten(pattern);
        let (mut tl, ttail) = flatten(target);
        if ttail != Type::empty_row() {
            return false;
        }
        for l in &pl {
            let h = head_of(l);
            let Some(i) = tl.iter().position(|m| head_of(m) == h) else { return false };
            let m = tl.remove(i);
            if !match_ground(l, &m, rho) {
                return false;
            }
        }
        return match ptail {
            Type::Var(_) => match_ground(&ptail, &Type::closed_row(tl), rho),
            _ => tl.is_empty(),
        };
    }
    match (pattern, target) {
        (Type::Con(c), Type::Con(d)) => c == d,
        (Type::App(c, xs), Type::App(d, ys)) => {
            c == d && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| match_ground(x, y, rho))
        }
        _ => false,
    }
}

#[derive(Debug, Default)]
pub struct PairStats {
    pub unified: usize,
    pub failed: usize,
    pub ground_checked: usize,
    pub ground_unifiers: usize,
}

/// Checks soundness of `unify(t1, t2)` and, when the variables are few enough,
/// that every ground unifier over the universe factors through the result
/// (and that none exists when unification fails).
pub fn check_pair(t1: &Type, t2: &Type, stats: &mut PairStats) -> Result<(), String> {
    let mut supply = fresh_supply();
    let result = unify(t1, t2, &mut supply);
    if let Ok(theta) = &result {
        stats.unified += 1;
        let (a, b) = (theta.apply(t1), theta.apply(t2));
        if !equiv(&a, &b) {
            return Err(format!("unsound: {t1:?} ~ {t2:?} gave {a:?} vs {b:?}"));
        }
    } else {
        stats.failed += 1;
    }
    let mut vars = Vec::new();
    vars_of(t1, &mut vars);
    vars_of(t2, &mut vars);
    let Some(sigmas) = ground_substs(&vars, 3000) else { return Ok(()) };
    stats.ground_checked += 1;
    for sigma in sigmas {
        let s = subst_of(&sigma);
        if !equiv(&s.apply(t1), &s.apply(t2)) {
            continue;
        }
        stats.ground_unifiers += 1;
        let theta = match &result {
            Ok(theta) => theta,
            Err(f) => return Err(format!("incomplete: {t1:?} ~ {t2:?} failed ({f}) but {sigma:?} unifies")),
        };
        let mut rho = BTreeMap::new();
        for (v, g) in &sigma {
            if !match_ground(&theta.apply(&Type::Var(*v)), g, &mut rho) {
                return Err(format!("not most general: {t1:?} ~ {t2:?}, {sigma:?} is no instance of {theta:?}"));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Nondeterministic heap lifting and merging

/// `frame[hole]` for a single evaluation frame that heaps can be lifted out of.
#[derive(Clone, Debug)]
enum Frame {
    AppFun(Expr),
    AppArg(Expr),
    Let(String, Expr),
    Catch(Expr),
}

impl Frame {
    fn plug(&self, e: Expr) -> Expr {
        match self {
            Frame::AppFun(a) => Expr::App(Box::new(e), Box::new(a.clone())),
            Frame::AppArg(f) => Expr::App(Box::new(f.clone()), Box::new(e)),
            Frame::Let(x, b) => Expr::Let(x.clone(), Box::new(e), Box::new(b.clone())),
            Frame::Catch(h) => Expr::Catch(Box::new(e), Box::new(h.clone())),
        }
    }
}

/// The immediate frame around a lift position, if `e` is one.
fn split(e: &Expr) -> Option<(Frame, &Expr)> {
    match e {
        Expr::App(f, a) if f.is_value() => Some((Frame::AppArg((**f).clone()), a)),
        Expr::App(f, a) => Some((Frame::AppFun((**a).clone()), f)),
        Expr::Let(x, a, b) => Some((Frame::Let(x.clone(), (**b).clone()), a)),
        Expr::Catch(b, h) => Some((Frame::Catch((**h).clone()), b)),
        _ => None,
    }
}

/// Every way to lift a heap out of a nonempty stack of frames at the root of `e`.
fn lifts_at(e: &Expr) -> Vec<Expr> {
    let mut out = Vec::new();
    let mut frames: Vec<Frame> = Vec::new();
    let mut cur = e;
    while let Some((f, inner)) = split(cur) {
        frames.push(f);
        if let Expr::HeapBind(h, body) = inner {
            let mut rebuilt = (**body).clone();
            for f in frames.iter().rev() {
                rebuilt = f.plug(rebuilt);
            }
            out.push(Expr::HeapBind(h.clone(), Box::new(rebuilt)));
        }
        cur = inner;
    }
    out
}

fn merge_at(e: &Expr) -> Option<Expr> {
    let Expr::HeapBind(h1, body) = e else { return None };
    let Expr::HeapBind(h2, inner) = &**body else { return None };
    let mut bindings = h1.bindings.clone();
    bindings.extend(h2.bindings.iter().cloned());
    Some(Expr::HeapBind(Heap::new(bindings), inner.clone()))
}

/// Rebuilds `e` with its `i`-th child replaced.
fn replace_child(e: &Expr, i: usize, new: Expr) -> Expr {
    let mut k = 0;
    let mut slot = Some(new);
    let replace = |c: &Expr| {
        let out = if k == i { slot.take().unwrap() } else { c.clone() };
        k += 1;
        out
    };
    map_children_mut(e, replace)
}

fn map_children_mut(e: &Expr, mut f: impl FnMut(&Expr) -> Expr) -> Expr {
    let b = |x: Expr| Box::new(x);
    match e {
        Expr::Lam(x, body) => Expr::Lam(x.clone(), b(f(body))),
        Expr::App(g, a) => {
            let g = f(g);
            Expr::App(b(g), b(f(a)))
        }
        Expr::Let(x, a, body) => {
            let a = f(a);
            Expr::Let(x.clone(), b(a), b(f(body)))
        }
        Expr::Catch(body, h) => {
            let body = f(body);
            Expr::Catch(b(body), b(f(h)))
        }
        Expr::Run(body) => Expr::Run(b(f(body))),
        Expr::HeapBind(h, body) => {
            let bindings = h.bindings.iter().map(|(r, v)| (*r, f(v))).collect();
            Expr::HeapBind(Heap::new(bindings), b(f(body)))
        }
        _ => e.clone(),
    }
}

fn children_in_order(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Lam(_, body) | Expr::Run(body) => vec![body],
        Expr::App(g, a) => vec![g, a],
        Expr::Let(_, a, body) => vec![a, body],
        Expr::Catch(body, h) => vec![body, h],
        Expr::HeapBind(h, body) => {
            let mut v: Vec<&Expr> = h.bindings.iter().map(|(_, x)| x).collect();
            v.push(body);
            v
        }
        _ => Vec::new(),
    }
}

/// All terms reachable from `e` by one `lift` or `merge` anywhere in `e`.
/// Binders are assumed distinct, so no renaming is needed.
pub fn lift_merge_steps(e: &Expr) -> Vec<(&'static str, Expr)> {
    let mut out: Vec<(&'static str, Expr)> = lifts_at(e).into_iter().map(|x| ("lift", x)).collect();
    if let Some(m) = merge_at(e) {
        out.push(("merge", m));
    }
    for (i, c) in children_in_order(e).into_iter().enumerate() {
        for (rule, n) in lift_merge_steps(c) {
            out.push((rule, replace_child(e, i, n)));
        }
    }
    out
}

/// Canonical forms of everything reachable from `e` in at most `k` steps.
pub fn reachable(e: &Expr, k: usize) -> Vec<Expr> {
    let mut seen = vec![e.canonical()];
    let mut frontier = vec![e.clone()];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in &frontier {
            for (_, n) in lift_merge_steps(t) {
                let c = n.canonical();
                if !seen.contains(&c) {
                    seen.push(c);
                    next.push(n);
                }
            }
        }
        frontier = next;
    }
    seen
}
