//! Effect rows: label comparison, equivalence, membership and tails.

use crate::types::{TyCon, Type};

/// Splits a row into its labels and its tail (`<>` or a row variable).
pub fn row_parts(row: &Type) -> (Vec<&Type>, &Type) {
    let mut labels = Vec::new();
    let mut cur = row;
    while let Some((l, rest)) = cur.as_extend() {
        labels.push(l);
        cur = rest;
    }
    (labels, cur)
}

/// Labels are equal when their constructor heads are, whatever the arguments.
pub fn label_eq(l1: &Type, l2: &Type) -> bool {
    l1.head().is_some() && l1.head() == l2.head()
}

pub fn effect_tail(row: &Type) -> &Type {
    row_parts(row).1
}

pub fn is_open(row: &Type) -> bool {
    matches!(effect_tail(row), Type::Var(_))
}

pub fn effect_contains(l: &Type, row: &Type) -> bool {
    row_parts(row).0.iter().any(|m| label_eq(l, m))
}

/// Removes the first label with the same head as `l` from `row`, without any
/// substitution. Labels with the same head never swap, so this is the only
/// candidate that can match.
pub fn extract_label<'a>(row: &'a Type, l: &Type) -> Option<(&'a Type, Type)> {
    let (labels, tail) = row_parts(row);
    let pos = labels.iter().position(|m| label_eq(l, m))?;
    let rest = labels
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != pos)
        .map(|(_, m)| (*m).clone());
    Some((labels[pos], Type::row(rest, tail.clone())))
}

pub fn effect_eq(e1: &Type, e2: &Type) -> bool {
    let (l1, t1) = row_parts(e1);
    let (l2, t2) = row_parts(e2);
    if l1.len() != l2.len() || t1 != t2 {
        return false;
    }
    let mut remaining: Vec<&Type> = l2;
    for l in l1 {
        match remaining.iter().position(|m| label_eq(l, m)) {
            Some(i) => {
                if !type_eq(l, remaining[i]) {
                    return false;
                }
                remaining.remove(i);
            }
            None => return false,
        }
    }
    true
}

/// Structural equality with rows compared up to `effect_eq`.
pub fn type_eq(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Var(x), Type::Var(y)) => x == y,
        (Type::Con(c), Type::Con(d)) => c == d,
        (Type::App(TyCon::Extend, _), _) | (_, Type::App(TyCon::Extend, _)) => effect_eq(a, b),
        (Type::App(c, xs), Type::App(d, ys)) => {
            c == d && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| type_eq(x, y))
        }
        _ => false,
    }
}

/// Stable display order: exn, then div, then st, otherwise unchanged.
pub fn display_labels<'a>(labels: &[&'a Type]) -> Vec<&'a Type> {
    let rank = |l: &Type| match l.head() {
        Some(TyCon::Exn) => 0,
        Some(TyCon::Div) => 1,
        Some(TyCon::St) => 2,
        _ => 3,
    };
    let mut v = labels.to_vec();
    v.sort_by_key(|l| rank(l));
    v
}

/// Rewrites every row inside `t` into display order, giving a representative
/// of the `effect_eq` class that is unique up to the order of equal heads.
pub fn normalize_rows(t: &Type) -> Type {
    match t {
        Type::App(TyCon::Extend, _) => {
            let (labels, tail) = row_parts(t);
            let labels: Vec<Type> = display_labels(&labels).into_iter().map(normalize_rows).collect();
            Type::row(labels, tail.clone())
        }
        Type::App(c, args) => Type::App(*c, args.iter().map(normalize_rows).collect::<Vec<_>>().into()),
        _ => t.clone(),
    }
}
