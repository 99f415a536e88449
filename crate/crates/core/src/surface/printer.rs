use std::collections::BTreeMap;

use crate::expr::{Const, Expr};
use crate::rows::{normalize_rows, row_parts};
use crate::types::{Kind, Scheme, TyCon, TyVar, Type};

const STAR_LETTERS: &[u8] = b"abcdfgijklmnopqrstuvwxyz";

/// Assigns canonical names (`a`, `e1`, `h1`, ...) to variables in the order
/// they are first printed.
#[derive(Clone, Debug, Default)]
pub struct Namer {
    names: BTreeMap<TyVar, String>,
    order: Vec<TyVar>,
    stars: usize,
    rows: usize,
    heaps: usize,
}

impl Namer {
    pub fn new() -> Namer {
        Namer::default()
    }

    pub fn name(&mut self, v: TyVar) -> String {
        if let Some(n) = self.names.get(&v) {
            return n.clone();
        }
        let n = match v.kind {
            Kind::Row => {
                self.rows += 1;
                format!("e{}", self.rows)
            }
            Kind::Heap => {
                self.heaps += 1;
                format!("h{}", self.heaps)
            }
            _ => {
                let i = self.stars;
                self.stars += 1;
                let letter = STAR_LETTERS[i % STAR_LETTERS.len()] as char;
                match i / STAR_LETTERS.len() {
                    0 => letter.to_string(),
                    k => format!("{letter}{k}"),
                }
            }
        };
        self.names.insert(v, n.clone());
        self.order.push(v);
        n
    }

    fn ty(&mut self, t: &Type, atom: bool, out: &mut String) {
        match t {
            Type::Var(v) => out.push_str(&self.name(*v)),
            Type::Con(TyCon::EmptyRow) => out.push_str("<>"),
            Type::Con(c) => out.push_str(&c.name()),
            Type::App(TyCon::Fun, args) => {
                if atom {
                    out.push('(');
                }
                self.ty(&args[0], true, out);
                out.push_str(" -> ");
                if args[1] != Type::empty_row() {
                    self.effect(&args[1], out);
                    out.push(' ');
                }
                self.ty(&args[2], false, out);
                if atom {
                    out.push(')');
                }
            }
            Type::App(TyCon::Ref, args) => {
                out.push_str("ref<");
                self.ty(&args[0], false, out);
                out.push_str(", ");
                self.ty(&args[1], false, out);
                out.push('>');
            }
            Type::App(TyCon::St, args) => {
                out.push_str("st<");
                self.ty(&args[0], false, out);
                out.push('>');
            }
            Type::App(TyCon::Extend, _) => self.effect(t, out),
            Type::App(c, args) => {
                out.push_str(&c.name());
                out.push('<');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    self.ty(a, false, out);
                }
                out.push('>');
            }
        }
    }

    fn effect(&mut self, row: &Type, out: &mut String) {
        if let Type::Var(v) = row {
            out.push_str(&self.name(*v));
            return;
        }
        let (labels, tail) = row_parts(row);
        out.push('<');
        for (i, l) in labels.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            self.ty(l, false, out);
        }
        if *tail != Type::empty_row() {
            out.push('|');
            self.ty(tail, false, out);
        }
        out.push('>');
    }

    pub fn print_type(&mut self, t: &Type) -> String {
        let mut out = String::new();
        self.ty(&normalize_rows(t), false, &mut out);
        out
    }

    pub fn print_effect(&mut self, row: &Type) -> String {
        let mut out = String::new();
        self.effect(&normalize_rows(row), &mut out);
        out
    }

    pub fn print_scheme(&mut self, s: &Scheme) -> String {
        let body = self.print_type(&s.body);
        let quantified: Vec<String> = self
            .order
            .iter()
            .filter(|v| s.vars.contains(v))
            .map(|v| self.names[v].clone())
            .collect();
        if quantified.is_empty() {
            body
        } else {
            format!("forall {}. {body}", quantified.join(" "))
        }
    }
}

pub fn print_type(t: &Type) -> String {
    Namer::new().print_type(t)
}

pub fn print_scheme(s: &Scheme) -> String {
    Namer::new().print_scheme(s)
}

pub fn print_effect(row: &Type) -> String {
    Namer::new().print_effect(row)
}

/// Prints a scheme and an effect with one shared naming of their variables.
pub fn print_typing(s: &Scheme, effect: &Type) -> (String, String) {
    let mut n = Namer::new();
    let s = n.print_scheme(s);
    (s, n.print_effect(effect))
}

const SEQ: u8 = 0;
const ASSIGN: u8 = 1;
const APP: u8 = 2;
const ATOM: u8 = 3;

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr(e, SEQ, &mut out);
    out
}

fn wrap(out: &mut String, paren: bool, f: impl FnOnce(&mut String)) {
    if paren {
        out.push('(');
    }
    f(out);
    if paren {
        out.push(')');
    }
}

fn expr(e: &Expr, level: u8, out: &mut String) {
    match e {
        Expr::Var(x) => out.push_str(x),
        Expr::Const(c) => out.push_str(&c.name()),
        Expr::RefName(r) => out.push_str(&format!("#r{}", r.0)),
        Expr::PartialAssign(r) => out.push_str(&format!("(#r{} :=)", r.0)),
        Expr::Lam(x, b) => wrap(out, level > SEQ, |out| {
            out.push('\\');
            out.push_str(x);
            out.push_str(". ");
            expr(b, SEQ, out);
        }),
        Expr::Let(x, a, b) => wrap(out, level > SEQ, |out| {
            out.push_str(&format!("let {x} = "));
            expr(a, SEQ, out);
            out.push_str(" in ");
            expr(b, SEQ, out);
        }),
        Expr::Bind(x, a, b) => wrap(out, level > SEQ, |out| {
            out.push_str(&format!("{x} <- "));
            expr(a, ASSIGN, out);
            out.push_str("; ");
            expr(b, SEQ, out);
        }),
        Expr::HeapBind(h, b) => wrap(out, level > SEQ, |out| {
            out.push_str("hp {");
            for (i, (r, v)) in h.bindings.iter().enumerate() {
                out.push_str(if i > 0 { ", " } else { " " });
                out.push_str(&format!("r{} -> ", r.0));
                expr(v, SEQ, out);
            }
            out.push_str(if h.is_empty() { "} " } else { " } " });
            expr(b, SEQ, out);
        }),
        Expr::App(f, a) => match (&**f, &**a) {
            (Expr::Lam(x, b), _) if x.starts_with('_') && !b.fv().contains(x) => {
                wrap(out, level > SEQ, |out| {
                    expr(a, ASSIGN, out);
                    out.push_str("; ");
                    expr(b, SEQ, out);
                })
            }
            (Expr::App(g, r), _) if **g == Expr::Const(Const::Assign) => {
                wrap(out, level > ASSIGN, |out| {
                    expr(r, APP, out);
                    out.push_str(" := ");
                    expr(a, APP, out);
                })
            }
            (Expr::Const(Const::Read), _) => {
                out.push('!');
                expr(a, ATOM, out);
            }
            _ => wrap(out, level > APP, |out| {
                expr(f, APP, out);
                out.push(' ');
                expr(a, ATOM, out);
            }),
        },
        Expr::Catch(b, h) => wrap(out, level > APP, |out| {
            out.push_str("catch ");
            expr(b, ATOM, out);
            out.push(' ');
            expr(h, ATOM, out);
        }),
        Expr::Run(b) => wrap(out, level > APP, |out| {
            out.push_str("run ");
            expr(b, ATOM, out);
        }),
        Expr::PartialCatch(b) => {
            out.push_str("(catch ");
            expr(b, ATOM, out);
            out.push(')');
        }
        Expr::PartialConst(c, vs) => {
            out.push('{');
            out.push_str(&c.name());
            for v in vs {
                out.push(' ');
                expr(v, ATOM, out);
            }
            out.push('}');
        }
    }
}
