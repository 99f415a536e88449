//! Expressions, heaps and the term-level free-variable and substitution algebra.

use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Unit,
    Int(i64),
    Fix,
    Throw,
    Ref,
    Read,
    Assign,
    Inc,
    Dec,
    Add,
    If0,
}

impl Const {
    pub fn name(self) -> String {
        match self {
            Const::Unit => "()".into(),
            Const::Int(n) => n.to_string(),
            Const::Fix => "fix".into(),
            Const::Throw => "throw".into(),
            Const::Ref => "ref".into(),
            Const::Read => "(!)".into(),
            Const::Assign => "(:=)".into(),
            Const::Inc => "inc".into(),
            Const::Dec => "dec".into(),
            Const::Add => "add".into(),
            Const::If0 => "if0".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RefId(pub u32);

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Heap {
    pub bindings: Vec<(RefId, Expr)>,
}

impl Heap {
    pub fn new(bindings: Vec<(RefId, Expr)>) -> Heap {
        Heap { bindings }
    }

    pub fn get(&self, r: RefId) -> Option<&Expr> {
        self.bindings.iter().find(|(k, _)| *k == r).map(|(_, v)| v)
    }

    pub fn contains(&self, r: RefId) -> bool {
        self.bindings.iter().any(|(k, _)| *k == r)
    }

    pub fn set(&mut self, r: RefId, v: Expr) -> bool {
        match self.bindings.iter_mut().find(|(k, _)| *k == r) {
            Some(slot) => {
                slot.1 = v;
                true
            }
            None => false,
        }
    }

    pub fn domain(&self) -> BTreeSet<RefId> {
        self.bindings.iter().map(|(r, _)| *r).collect()
    }

    pub fn binders_distinct(&self) -> bool {
        self.domain().len() == self.bindings.len()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(String),
    Const(Const),
    Lam(String, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    Let(String, Box<Expr>, Box<Expr>),
    Bind(String, Box<Expr>, Box<Expr>),
    Catch(Box<Expr>, Box<Expr>),
    Run(Box<Expr>),
    HeapBind(Heap, Box<Expr>),
    RefName(RefId),
    PartialCatch(Box<Expr>),
    PartialAssign(RefId),
    PartialConst(Const, Vec<Expr>),
}

pub fn var(x: &str) -> Expr {
    Expr::Var(x.to_string())
}

pub fn int(n: i64) -> Expr {
    Expr::Const(Const::Int(n))
}

pub fn unit() -> Expr {
    Expr::Const(Const::Unit)
}

pub fn constant(c: Const) -> Expr {
    Expr::Const(c)
}

pub fn lam(x: &str, body: Expr) -> Expr {
    Expr::Lam(x.to_string(), Box::new(body))
}

pub fn app(f: Expr, a: Expr) -> Expr {
    Expr::App(Box::new(f), Box::new(a))
}

pub fn apps(f: Expr, args: impl IntoIterator<Item = Expr>) -> Expr {
    args.into_iter().fold(f, app)
}

pub fn let_(x: &str, bound: Expr, body: Expr) -> Expr {
    Expr::Let(x.to_string(), Box::new(bound), Box::new(body))
}

pub fn bind(x: &str, bound: Expr, body: Expr) -> Expr {
    Expr::Bind(x.to_string(), Box::new(bound), Box::new(body))
}

pub fn catch(body: Expr, handler: Expr) -> Expr {
    Expr::Catch(Box::new(body), Box::new(handler))
}

pub fn run(e: Expr) -> Expr {
    Expr::Run(Box::new(e))
}

pub fn heap(bindings: Vec<(u32, Expr)>, body: Expr) -> Expr {
    Expr::HeapBind(
        Heap::new(bindings.into_iter().map(|(r, v)| (RefId(r), v)).collect()),
        Box::new(body),
    )
}

pub fn reference(r: u32) -> Expr {
    Expr::RefName(RefId(r))
}

pub fn throw_unit() -> Expr {
    app(constant(Const::Throw), unit())
}

pub fn read(e: Expr) -> Expr {
    app(constant(Const::Read), e)
}

pub fn assign(r: Expr, v: Expr) -> Expr {
    apps(constant(Const::Assign), [r, v])
}

impl Expr {
    pub fn is_value(&self) -> bool {
        match self {
            Expr::Lam(..) | Expr::PartialCatch(_) => true,
            _ => self.is_basic_value(),
        }
    }

    /// Values whose shape never hides a heap access: variables, constants,
    /// references and partial applications of constants.
    pub fn is_basic_value(&self) -> bool {
        matches!(
            self,
            Expr::Var(_)
                | Expr::Const(_)
                | Expr::RefName(_)
                | Expr::PartialAssign(_)
                | Expr::PartialConst(..)
        )
    }

    /// `throw c` for a constant `c`; returns the payload.
    pub fn as_throw(&self) -> Option<&Expr> {
        match self {
            Expr::App(f, c) if **f == Expr::Const(Const::Throw) && matches!(**c, Expr::Const(_)) => {
                Some(c)
            }
            _ => None,
        }
    }

    pub fn is_throw_unit(&self) -> bool {
        matches!(self.as_throw(), Some(Expr::Const(Const::Unit)))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) | Expr::Const(_) | Expr::RefName(_) | Expr::PartialAssign(_) => vec![],
            Expr::Lam(_, b) | Expr::Run(b) | Expr::PartialCatch(b) => vec![b],
            Expr::App(a, b) | Expr::Let(_, a, b) | Expr::Bind(_, a, b) | Expr::Catch(a, b) => {
                vec![a, b]
            }
            Expr::HeapBind(h, b) => {
                let mut v: Vec<&Expr> = h.bindings.iter().map(|(_, e)| e).collect();
                v.push(b);
                v
            }
            Expr::PartialConst(_, vs) => vs.iter().collect(),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn any(&self, p: &impl Fn(&Expr) -> bool) -> bool {
        p(self) || self.children().iter().any(|c| c.any(p))
    }

    pub fn is_surface(&self) -> bool {
        !self.any(&|e| {
            matches!(
                e,
                Expr::HeapBind(..)
                    | Expr::RefName(_)
                    | Expr::PartialCatch(_)
                    | Expr::PartialAssign(_)
                    | Expr::PartialConst(..)
            )
        })
    }

    pub fn fv(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.fv_into(&mut Vec::new(), &mut out);
        out
    }

    fn fv_into(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Expr::Lam(x, b) => {
                bound.push(x.clone());
                b.fv_into(bound, out);
                bound.pop();
            }
            Expr::Let(x, e1, e2) | Expr::Bind(x, e1, e2) => {
                e1.fv_into(bound, out);
                bound.push(x.clone());
                e2.fv_into(bound, out);
                bound.pop();
            }
            _ => self.children().iter().for_each(|c| c.fv_into(bound, out)),
        }
    }

    pub fn frv(&self) -> BTreeSet<RefId> {
        match self {
            Expr::RefName(r) | Expr::PartialAssign(r) => BTreeSet::from([*r]),
            Expr::HeapBind(h, b) => {
                let mut s = b.frv();
                for (_, v) in &h.bindings {
                    s.extend(v.frv());
                }
                for (r, _) in &h.bindings {
                    s.remove(r);
                }
                s
            }
            _ => {
                let mut s = BTreeSet::new();
                for c in self.children() {
                    s.extend(c.frv());
                }
                s
            }
        }
    }

    /// Largest reference name mentioned anywhere, bound or free.
    pub fn max_ref(&self) -> Option<u32> {
        let own = match self {
            Expr::RefName(r) | Expr::PartialAssign(r) => Some(r.0),
            Expr::HeapBind(h, _) => h.bindings.iter().map(|(r, _)| r.0).max(),
            _ => None,
        };
        self.children().iter().filter_map(|c| c.max_ref()).chain(own).max()
    }

    /// Rewrites every `Bind` into the application it abbreviates.
    pub fn desugar(&self) -> Expr {
        match self {
            Expr::Bind(x, e1, e2) => app(lam(x, e2.desugar()), e1.desugar()),
            _ => self.map_children(&|c| c.desugar()),
        }
    }

    pub fn map_children(&self, f: &impl Fn(&Expr) -> Expr) -> Expr {
        match self {
            Expr::Var(_) | Expr::Const(_) | Expr::RefName(_) | Expr::PartialAssign(_) => {
                self.clone()
            }
            Expr::Lam(x, b) => Expr::Lam(x.clone(), Box::new(f(b))),
            Expr::App(a, b) => Expr::App(Box::new(f(a)), Box::new(f(b))),
            Expr::Let(x, a, b) => Expr::Let(x.clone(), Box::new(f(a)), Box::new(f(b))),
            Expr::Bind(x, a, b) => Expr::Bind(x.clone(), Box::new(f(a)), Box::new(f(b))),
            Expr::Catch(a, b) => Expr::Catch(Box::new(f(a)), Box::new(f(b))),
            Expr::Run(b) => Expr::Run(Box::new(f(b))),
            Expr::PartialCatch(b) => Expr::PartialCatch(Box::new(f(b))),
            Expr::HeapBind(h, b) => Expr::HeapBind(
                Heap::new(h.bindings.iter().map(|(r, v)| (*r, f(v))).collect()),
                Box::new(f(b)),
            ),
            Expr::PartialConst(c, vs) => Expr::PartialConst(*c, vs.iter().map(f).collect()),
        }
    }

    /// Capture-avoiding `[x := v] self`.
    pub fn subst(&self, x: &str, v: &Expr) -> Expr {
        let fv_v = v.fv();
        self.subst_with(x, v, &fv_v)
    }

    fn subst_with(&self, x: &str, v: &Expr, fv_v: &BTreeSet<String>) -> Expr {
        match self {
            Expr::Var(y) => {
                if y == x {
                    v.clone()
                } else {
                    self.clone()
                }
            }
            Expr::Lam(y, b) => {
                if y == x {
                    return self.clone();
                }
                let (y, b) = avoid_capture(y, b, x, fv_v);
                Expr::Lam(y, Box::new(b.subst_with(x, v, fv_v)))
            }
            Expr::Let(y, e1, e2) | Expr::Bind(y, e1, e2) => {
                let e1 = e1.subst_with(x, v, fv_v);
                let (y, e2) = if y == x {
                    (y.clone(), (**e2).clone())
                } else {
                    let (y, e2) = avoid_capture(y, e2, x, fv_v);
                    let e2 = e2.subst_with(x, v, fv_v);
                    (y, e2)
                };
                if matches!(self, Expr::Let(..)) {
                    Expr::Let(y, Box::new(e1), Box::new(e2))
                } else {
                    Expr::Bind(y, Box::new(e1), Box::new(e2))
                }
            }
            _ => self.map_children(&|c| c.subst_with(x, v, fv_v)),
        }
    }

    /// Renames reference names (free and bound) according to `map`.
    pub fn rename_refs(&self, map: &BTreeMap<RefId, RefId>) -> Expr {
        let rn = |r: &RefId| *map.get(r).unwrap_or(r);
        match self {
            Expr::RefName(r) => Expr::RefName(rn(r)),
            Expr::PartialAssign(r) => Expr::PartialAssign(rn(r)),
            Expr::HeapBind(h, b) => Expr::HeapBind(
                Heap::new(h.bindings.iter().map(|(r, v)| (rn(r), v.rename_refs(map))).collect()),
                Box::new(b.rename_refs(map)),
            ),
            _ => self.map_children(&|c| c.rename_refs(map)),
        }
    }

    /// Heap binder sets are pairwise distinct everywhere in the term.
    pub fn heap_hygienic(&self) -> bool {
        let own = match self {
            Expr::HeapBind(h, _) => h.binders_distinct(),
            _ => true,
        };
        own && self.children().iter().all(|c| c.heap_hygienic())
    }

    /// Renames bound term variables and bound reference names to a canonical
    /// sequence so alpha-equivalent terms become syntactically equal.
    pub fn canonical(&self) -> Expr {
        let mut c = Canon::default();
        c.go(self, &mut Vec::new(), &mut Vec::new())
    }

    pub fn alpha_eq(&self, other: &Expr) -> bool {
        self.canonical() == other.canonical()
    }
}

fn avoid_capture(y: &str, body: &Expr, x: &str, fv_v: &BTreeSet<String>) -> (String, Expr) {
    if !fv_v.contains(y) || !body.fv().contains(x) {
        return (y.to_string(), body.clone());
    }
    let mut avoid = body.fv();
    avoid.extend(fv_v.iter().cloned());
    avoid.insert(x.to_string());
    let fresh = fresh_name(y, &avoid);
    let body = body.subst(y, &Expr::Var(fresh.clone()));
    (fresh, body)
}

/// `base` with a numeric suffix so that it avoids `taken`.
pub fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    (1..)
        .map(|i| format!("{stem}{i}"))
        .find(|n| !taken.contains(n))
        .expect("infinite supply")
}

#[derive(Default)]
struct Canon {
    next_var: usize,
    next_ref: u32,
}

const CANON_REF_BASE: u32 = 1 << 30;

impl Canon {
    fn go(&mut self, e: &Expr, vars: &mut Vec<(String, String)>, refs: &mut Vec<(RefId, RefId)>) -> Expr {
        let look_var = |vars: &Vec<(String, String)>, x: &String| {
            vars.iter().rev().find(|(a, _)| a == x).map(|(_, b)| b.clone()).unwrap_or_else(|| x.clone())
        };
        let look_ref = |refs: &Vec<(RefId, RefId)>, r: &RefId| {
            refs.iter().rev().find(|(a, _)| a == r).map(|(_, b)| *b).unwrap_or(*r)
        };
        match e {
            Expr::Var(x) => Expr::Var(look_var(vars, x)),
            Expr::RefName(r) => Expr::RefName(look_ref(refs, r)),
            Expr::PartialAssign(r) => Expr::PartialAssign(look_ref(refs, r)),
            Expr::Lam(x, b) => {
                let n = self.fresh_var();
                vars.push((x.clone(), n.clone()));
                let b = self.go(b, vars, refs);
                vars.pop();
                Expr::Lam(n, Box::new(b))
            }
            Expr::Let(x, e1, e2) | Expr::Bind(x, e1, e2) => {
                let e1 = self.go(e1, vars, refs);
                let n = self.fresh_var();
                vars.push((x.clone(), n.clone()));
                let e2 = self.go(e2, vars, refs);
                vars.pop();
                if matches!(e, Expr::Let(..)) {
                    Expr::Let(n, Box::new(e1), Box::new(e2))
                } else {
                    Expr::Bind(n, Box::new(e1), Box::new(e2))
                }
            }
            Expr::HeapBind(h, b) => {
                let mark = refs.len();
                let mut names = Vec::new();
                for (r, _) in &h.bindings {
                    let n = RefId(CANON_REF_BASE + self.next_ref);
                    self.next_ref += 1;
                    refs.push((*r, n));
                    names.push(n);
                }
                let mut bindings: Vec<(RefId, Expr)> = h
                    .bindings
                    .iter()
                    .zip(names)
                    .map(|((_, v), n)| (n, self.go(v, vars, refs)))
                    .collect();
                bindings.sort_by_key(|(r, _)| *r);
                let b = self.go(b, vars, refs);
                refs.truncate(mark);
                Expr::HeapBind(Heap::new(bindings), Box::new(b))
            }
            Expr::App(a, b) => {
                let a = self.go(a, vars, refs);
                Expr::App(Box::new(a), Box::new(self.go(b, vars, refs)))
            }
            Expr::Catch(a, b) => {
                let a = self.go(a, vars, refs);
                Expr::Catch(Box::new(a), Box::new(self.go(b, vars, refs)))
            }
            Expr::Run(b) => Expr::Run(Box::new(self.go(b, vars, refs))),
            Expr::PartialCatch(b) => Expr::PartialCatch(Box::new(self.go(b, vars, refs))),
            Expr::PartialConst(c, vs) => {
                Expr::PartialConst(*c, vs.iter().map(|v| self.go(v, vars, refs)).collect())
            }
            Expr::Const(_) => e.clone(),
        }
    }

    fn fresh_var(&mut self) -> String {
        let n = format!("%{}", self.next_var);
        self.next_var += 1;
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_reference_names() {
        assert_eq!(reference(1).frv(), BTreeSet::from([RefId(1)]));
        assert!(heap(vec![(1, int(1))], reference(1)).frv().is_empty());
        assert_eq!(Expr::PartialAssign(RefId(4)).frv(), BTreeSet::from([RefId(4)]));
        let e = heap(vec![(1, reference(2))], app(reference(1), reference(3)));
        assert_eq!(e.frv(), BTreeSet::from([RefId(2), RefId(3)]));
    }

    #[test]
    fn substitution_avoids_capture() {
        let e = lam("y", app(var("x"), var("y")));
        let r = e.subst("x", &var("y"));
        match &r {
            Expr::Lam(y, body) => {
                assert_ne!(y, "y");
                assert_eq!(**body, app(var("y"), var(y)));
            }
            _ => panic!("{r:?}"),
        }
        let shadow = lam("x", var("x"));
        assert_eq!(shadow.subst("x", &int(1)), shadow);
        let l = let_("x", var("x"), var("x"));
        assert_eq!(l.subst("x", &int(1)), let_("x", int(1), var("x")));
    }

    #[test]
    fn alpha_equivalence_over_terms_and_heaps() {
        assert!(lam("x", var("x")).alpha_eq(&lam("z", var("z"))));
        assert!(!lam("x", var("y")).alpha_eq(&lam("z", var("z"))));
        let a = heap(vec![(1, int(1)), (2, unit())], app(reference(1), reference(2)));
        let b = heap(vec![(7, int(1)), (9, unit())], app(reference(7), reference(9)));
        assert!(a.alpha_eq(&b));
        let c = heap(vec![(7, int(1)), (9, unit())], app(reference(9), reference(7)));
        assert!(!a.alpha_eq(&c));
        assert!(!reference(1).alpha_eq(&reference(2)));
    }

    #[test]
    fn desugar_bind() {
        let e = bind("x", int(1), var("x"));
        assert_eq!(e.desugar(), app(lam("x", var("x")), int(1)));
    }

    #[test]
    fn value_shapes() {
        assert!(lam("x", var("x")).is_value());
        assert!(Expr::PartialCatch(Box::new(throw_unit())).is_value());
        assert!(!throw_unit().is_value());
        assert!(throw_unit().is_throw_unit());
        assert!(app(constant(Const::Throw), int(3)).as_throw().is_some());
    }
}
