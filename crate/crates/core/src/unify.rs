//! Unification of types, including effect rows with scoped labels.

use std::fmt;

use thiserror::Error;

use crate::rows::{effect_eq, effect_tail, label_eq, row_parts, type_eq};
use crate::types::{kind_of, Kind, Subst, Supply, TyVar, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnifyFailureReason {
    OccursCheck,
    HeadMismatch,
    KindMismatch,
    MissingLabel,
    TailEscape,
}

impl fmt::Display for UnifyFailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            UnifyFailureReason::OccursCheck => "occurs check",
            UnifyFailureReason::HeadMismatch => "type mismatch",
            UnifyFailureReason::KindMismatch => "kind mismatch",
            UnifyFailureReason::MissingLabel => "missing effect label",
            UnifyFailureReason::TailEscape => "row tail escapes",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{reason}")]
pub struct UnifyFailure {
    pub reason: UnifyFailureReason,
    pub left: Type,
    pub right: Type,
}

fn fail(reason: UnifyFailureReason, left: &Type, right: &Type) -> UnifyFailure {
    UnifyFailure { reason, left: left.clone(), right: right.clone() }
}

/// Unification state: the caller's fresh supply plus a count of recursive calls.
pub struct Unifier<'s> {
    supply: &'s mut Supply,
    pub calls: usize,
}

impl<'s> Unifier<'s> {
    pub fn new(supply: &'s mut Supply) -> Unifier<'s> {
        Unifier { supply, calls: 0 }
    }

    pub fn unify(&mut self, t1: &Type, t2: &Type) -> Result<Subst, UnifyFailure> {
        self.calls += 1;
        let k1 = kind_of(t1).map_err(|_| fail(UnifyFailureReason::KindMismatch, t1, t2))?;
        let k2 = kind_of(t2).map_err(|_| fail(UnifyFailureReason::KindMismatch, t1, t2))?;
        if k1 != k2 {
            return Err(fail(UnifyFailureReason::KindMismatch, t1, t2));
        }
        match (t1, t2) {
            (Type::Var(a), Type::Var(b)) if a == b => Ok(Subst::new()),
            (Type::Var(a), t) => bind_var(*a, t, t1, t2),
            (t, Type::Var(a)) => bind_var(*a, t, t1, t2),
            _ if k1 == Kind::Row => self.unify_rows(t1, t2),
            (Type::Con(c), Type::Con(d)) if c == d => Ok(Subst::new()),
            (Type::App(c, xs), Type::App(d, ys)) if c == d && xs.len() == ys.len() => {
                let mut theta = Subst::new();
                for (x, y) in xs.iter().zip(ys.iter()) {
                    let step = self.unify(&theta.apply(x), &theta.apply(y))?;
                    theta = Subst::compose(&step, &theta);
                }
                Ok(theta)
            }
            _ => Err(fail(UnifyFailureReason::HeadMismatch, t1, t2)),
        }
    }

    fn unify_rows(&mut self, t1: &Type, t2: &Type) -> Result<Subst, UnifyFailure> {
        match (t1.as_extend(), t2.as_extend()) {
            (Some((l, e1)), _) => self.unify_extension(l, e1, t2, t1, t2),
            (None, Some((l, e1))) => self.unify_extension(l, e1, t1, t1, t2),
            (None, None) => Ok(Subst::new()),
        }
    }

    /// Unifies `<l|e1>` with `e2`.
    fn unify_extension(
        &mut self,
        l: &Type,
        e1: &Type,
        e2: &Type,
        left: &Type,
        right: &Type,
    ) -> Result<Subst, UnifyFailure> {
        let (e3, theta1) = self.unify_effect(e2, l).map_err(|f| match f.reason {
            UnifyFailureReason::MissingLabel => fail(f.reason, left, right),
            _ => f,
        })?;
        if !tail_guard(e1, &theta1) {
            return Err(fail(UnifyFailureReason::TailEscape, left, right));
        }
        let theta2 = self.unify(&theta1.apply(e1), &theta1.apply(&e3))?;
        Ok(Subst::compose(&theta2, &theta1))
    }

    /// Finds `l` in `row`, returning the rest of the row and the substitution
    /// that makes `row` equivalent to `<l|rest>`.
    pub fn unify_effect(&mut self, row: &Type, l: &Type) -> Result<(Type, Subst), UnifyFailure> {
        self.calls += 1;
        match row {
            Type::Var(mu) if mu.kind == Kind::Row => {
                let tail = self.supply.fresh(Kind::Row);
                let theta = Subst::singleton(*mu, Type::extend(l.clone(), tail.clone()))
                    .map_err(|_| fail(UnifyFailureReason::KindMismatch, row, l))?;
                Ok((tail, theta))
            }
            _ => match row.as_extend() {
                Some((l2, rest)) if label_eq(l, l2) => {
                    let theta = self.unify(l, l2)?;
                    Ok((rest.clone(), theta))
                }
                Some((l2, rest)) => {
                    let (rest2, theta) = self.unify_effect(rest, l)?;
                    Ok((Type::extend(l2.clone(), rest2), theta))
                }
                None if *row == Type::empty_row() => {
                    Err(fail(UnifyFailureReason::MissingLabel, row, l))
                }
                None => Err(fail(UnifyFailureReason::KindMismatch, row, l)),
            },
        }
    }
}

fn bind_var(a: TyVar, t: &Type, left: &Type, right: &Type) -> Result<Subst, UnifyFailure> {
    if t.occurs(a) {
        return Err(fail(UnifyFailureReason::OccursCheck, left, right));
    }
    Subst::singleton(a, t.clone()).map_err(|_| fail(UnifyFailureReason::KindMismatch, left, right))
}

pub fn unify(t1: &Type, t2: &Type, supply: &mut Supply) -> Result<Subst, UnifyFailure> {
    Unifier::new(supply).unify(t1, t2)
}

pub fn unify_effect(row: &Type, l: &Type, supply: &mut Supply) -> Result<(Type, Subst), UnifyFailure> {
    Unifier::new(supply).unify_effect(row, l)
}

/// The tail of `e1` must stay outside the domain of `s`.
pub fn tail_guard(e1: &Type, s: &Subst) -> bool {
    match effect_tail(e1) {
        Type::Var(v) => !s.contains(*v),
        _ => true,
    }
}

/// One-way matching: a substitution on the variables of `pattern` that makes
/// it equal to `target` (rows compared up to equivalence). Variables of the
/// target are treated as constants.
pub fn match_type(pattern: &Type, target: &Type) -> Option<Subst> {
    let mut s = Subst::new();
    match_into(pattern, target, &mut s).then_some(s)
}

pub fn match_into(pattern: &Type, target: &Type, s: &mut Subst) -> bool {
    match pattern {
        Type::Var(v) => match s.get(*v) {
            Some(bound) => type_eq(bound, target),
            None => kind_of(target) == Ok(v.kind) && s.insert(*v, target.clone()).is_ok(),
        },
        Type::App(crate::types::TyCon::Extend, _) => match_row(pattern, target, s),
        Type::Con(c) => match target {
            Type::Con(d) => c == d,
            _ => false,
        },
        Type::App(c, xs) => match target {
            Type::App(d, ys) if c == d && xs.len() == ys.len() => {
                xs.iter().zip(ys.iter()).all(|(x, y)| match_into(x, y, s))
            }
            _ => false,
        },
    }
}

fn match_row(pattern: &Type, target: &Type, s: &mut Subst) -> bool {
    let (pls, ptail) = row_parts(pattern);
    let (tls, ttail) = row_parts(target);
    let mut remaining: Vec<&Type> = tls;
    for p in pls {
        match remaining.iter().position(|m| label_eq(p, m)) {
            Some(i) => {
                if !match_into(p, remaining[i], s) {
                    return false;
                }
                remaining.remove(i);
            }
            None => return false,
        }
    }
    let rest = Type::row(remaining.into_iter().cloned(), ttail.clone());
    match ptail {
        Type::Var(_) => match_into(ptail, &rest, s),
        _ => effect_eq(ptail, &rest),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu(i: u32) -> Type {
        Type::var(i, Kind::Row)
    }

    fn star(i: u32) -> Type {
        Type::var(i, Kind::Star)
    }

    fn heap(i: u32) -> Type {
        Type::var(i, Kind::Heap)
    }

    fn supply() -> Supply {
        Supply::starting_at(1000, 0)
    }

    fn assert_unifies(t1: &Type, t2: &Type, s: &Subst) {
        assert!(type_eq(&s.apply(t1), &s.apply(t2)), "{:?} vs {:?}", s.apply(t1), s.apply(t2));
    }

    #[test]
    fn closing_an_open_row() {
        let t1 = Type::row([Type::exn()], mu(1));
        let t2 = Type::closed_row([Type::exn()]);
        let s = unify(&t1, &t2, &mut supply()).unwrap();
        assert_eq!(s, Subst::singleton(TyVar { id: 1, kind: Kind::Row }, Type::empty_row()).unwrap());
    }

    #[test]
    fn two_open_rows_meet() {
        let t1 = Type::row([Type::exn()], mu(1));
        let t2 = Type::row([Type::div()], mu(2));
        let s = unify(&t1, &t2, &mut supply()).unwrap();
        let m3 = mu(1000);
        assert_eq!(s.apply(&mu(1)), Type::row([Type::div()], m3.clone()));
        assert_eq!(s.apply(&mu(2)), Type::row([Type::exn()], m3.clone()));
        assert!(effect_eq(&s.apply(&t1), &Type::row([Type::exn(), Type::div()], m3)));
    }

    #[test]
    fn occurs_check() {
        let a = star(1);
        let t = Type::reference(heap(2), a.clone());
        let err = unify(&a, &t, &mut supply()).unwrap_err();
        assert_eq!(err.reason, UnifyFailureReason::OccursCheck);
    }

    #[test]
    fn function_types() {
        let t1 = Type::fun(star(1), mu(2), star(3));
        let t2 = Type::fun(Type::int(), Type::closed_row([Type::exn()]), Type::int());
        let s = unify(&t1, &t2, &mut supply()).unwrap();
        assert_eq!(s.apply(&star(1)), Type::int());
        assert_eq!(s.apply(&star(3)), Type::int());
        assert_eq!(s.apply(&mu(2)), Type::closed_row([Type::exn()]));
        assert_unifies(&t1, &t2, &s);
    }

    #[test]
    fn effect_extraction() {
        let row = Type::row([Type::div(), Type::exn()], mu(1));
        let (rest, s) = unify_effect(&row, &Type::exn(), &mut supply()).unwrap();
        assert_eq!(rest, Type::row([Type::div()], mu(1)));
        assert!(s.is_empty());

        let (rest, s) = unify_effect(&mu(1), &Type::exn(), &mut supply()).unwrap();
        assert_eq!(rest, mu(1000));
        assert_eq!(s.apply(&mu(1)), Type::row([Type::exn()], mu(1000)));

        let err = unify_effect(&Type::closed_row([Type::div()]), &Type::exn(), &mut supply()).unwrap_err();
        assert_eq!(err.reason, UnifyFailureReason::MissingLabel);
    }

    #[test]
    fn st_labels_unify_heaps() {
        let row = Type::row([Type::st(heap(1))], mu(3));
        let (rest, s) = unify_effect(&row, &Type::st(heap(2)), &mut supply()).unwrap();
        assert_eq!(rest, mu(3));
        assert_eq!(s.apply(&heap(1)), s.apply(&heap(2)));
        assert_eq!(s.len(), 1);
        let row2 = Type::row([Type::st(heap(2))], mu(3));
        let (_, s2) = unify_effect(&row2, &Type::st(heap(1)), &mut supply()).unwrap();
        assert_eq!(s2.apply(&heap(1)), s2.apply(&heap(2)));
    }

    #[test]
    fn tail_guard_cases() {
        let e1 = Type::row([Type::exn()], mu(1));
        let s = Subst::singleton(TyVar { id: 2, kind: Kind::Row }, Type::row([Type::exn()], mu(3))).unwrap();
        assert!(tail_guard(&e1, &s));
        let s = Subst::singleton(TyVar { id: 1, kind: Kind::Row }, Type::row([Type::div()], mu(3))).unwrap();
        assert!(!tail_guard(&e1, &s));
        assert!(tail_guard(&Type::closed_row([Type::exn()]), &s));
    }

    #[test]
    fn tail_escape_stops_recursion() {
        let t1 = Type::row([Type::exn()], mu(1));
        let t2 = Type::row([Type::div()], mu(1));
        let err = unify(&t1, &t2, &mut supply()).unwrap_err();
        assert_eq!(err.reason, UnifyFailureReason::TailEscape);
    }

    #[test]
    fn duplicate_labels_are_kept() {
        let t1 = Type::row([Type::exn()], mu(1));
        let t2 = Type::closed_row([Type::exn(), Type::exn()]);
        let s = unify(&t1, &t2, &mut supply()).unwrap();
        assert_eq!(s.apply(&mu(1)), Type::closed_row([Type::exn()]));
    }

    #[test]
    fn kind_and_head_mismatch() {
        assert_eq!(
            unify(&Type::int(), &mu(1), &mut supply()).unwrap_err().reason,
            UnifyFailureReason::KindMismatch
        );
        assert_eq!(
            unify(&Type::int(), &Type::unit(), &mut supply()).unwrap_err().reason,
            UnifyFailureReason::HeadMismatch
        );
        assert_eq!(
            unify(&Type::closed_row([Type::exn()]), &Type::empty_row(), &mut supply()).unwrap_err().reason,
            UnifyFailureReason::MissingLabel
        );
    }

    #[test]
    fn matching_modulo_rows() {
        let p = Type::fun(star(1), Type::row([Type::exn()], mu(2)), star(1));
        let t = Type::fun(Type::int(), Type::closed_row([Type::div(), Type::exn()]), Type::int());
        let s = match_type(&p, &t).unwrap();
        assert_eq!(s.apply(&mu(2)), Type::closed_row([Type::div()]));
        let bad = Type::fun(Type::int(), Type::closed_row([Type::div()]), Type::int());
        assert!(match_type(&p, &bad).is_none());
    }
}
