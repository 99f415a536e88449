use std::collections::BTreeMap;

use super::lexer::{lex, Tok, Token};
use super::{ParseError, SourceSpan};
use crate::expr::{fresh_name, Const, Expr, Heap, RefId};
use crate::types::{Kind, Scheme, Supply, TyVar, Type};

const KEYWORDS: &[&str] = &["let", "in", "run", "catch", "hp", "forall"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept heap literals, `#rN` references and partial applications.
    pub debug: bool,
}

/// A parsed expression with one span per node, in preorder.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed {
    pub expr: Expr,
    pub spans: Vec<SourceSpan>,
}

impl Parsed {
    pub fn span(&self, node: usize) -> Option<SourceSpan> {
        self.spans.get(node).copied()
    }
}

#[derive(Clone, Debug)]
struct SpanTree {
    span: SourceSpan,
    kids: Vec<SpanTree>,
}

impl SpanTree {
    fn leaf(span: SourceSpan) -> SpanTree {
        SpanTree { span, kids: vec![] }
    }

    fn flatten(&self, out: &mut Vec<SourceSpan>) {
        out.push(self.span);
        for k in &self.kids {
            k.flatten(out);
        }
    }
}

type Node = (Expr, SpanTree);

fn node(e: Expr, span: SourceSpan, kids: Vec<SpanTree>) -> Node {
    (e, SpanTree { span, kids })
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    parse_expr_with(text, ParseOptions::default()).map(|p| p.expr)
}

pub fn parse_expr_debug(text: &str) -> Result<Expr, ParseError> {
    parse_expr_with(text, ParseOptions { debug: true }).map(|p| p.expr)
}

pub fn parse_expr_with(text: &str, opts: ParseOptions) -> Result<Parsed, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks: &toks, pos: 0, opts };
    let (expr, tree) = p.expr()?;
    p.expect_eof()?;
    if !opts.debug {
        check_throw(&expr, &tree)?;
    }
    let mut spans = Vec::new();
    tree.flatten(&mut spans);
    Ok(Parsed { expr, spans })
}

fn check_throw(e: &Expr, t: &SpanTree) -> Result<(), ParseError> {
    match e {
        Expr::App(f, _) if **f == Expr::Const(Const::Throw) => {
            if e.is_throw_unit() {
                Ok(())
            } else {
                Err(ParseError::new("throw must be applied to ()", t.span, vec!["`()`".into()]))
            }
        }
        Expr::Const(Const::Throw) => {
            Err(ParseError::new("throw must be applied to ()", t.span, vec!["`()`".into()]))
        }
        _ => e.children().into_iter().zip(&t.kids).try_for_each(|(c, k)| check_throw(c, k)),
    }
}

fn const_named(s: &str) -> Option<Const> {
    Some(match s {
        "fix" => Const::Fix,
        "throw" => Const::Throw,
        "ref" => Const::Ref,
        "inc" => Const::Inc,
        "dec" => Const::Dec,
        "add" => Const::Add,
        "if0" => Const::If0,
        _ => return None,
    })
}

fn ref_named(s: &str) -> Option<RefId> {
    let digits = s.strip_prefix('r')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(RefId)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    opts: ParseOptions,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &'a Tok {
        self.peek_at(0)
    }

    fn peek_at(&self, n: usize) -> &'a Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn prev_end(&self, start: SourceSpan) -> SourceSpan {
        let end = if self.pos == 0 { start } else { self.toks[self.pos - 1].span };
        start.join(end)
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::new(
            format!("unexpected {}", t.tok.describe()),
            t.span,
            expected.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn expect(&mut self, tok: Tok) -> Result<&'a Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[&format!("`{}`", tok.text())]))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{kw}`")]))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input"]))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn binder(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && const_named(s).is_none() => {
                self.bump();
                Ok(s.clone())
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let start = self.span();
        match self.peek() {
            Tok::Backslash => {
                self.bump();
                let mut params = vec![self.binder()?];
                while matches!(self.peek(), Tok::Ident(_)) {
                    params.push(self.binder()?);
                }
                self.expect(Tok::Dot)?;
                let mut acc = self.expr()?;
                let span = self.prev_end(start);
                for x in params.into_iter().rev() {
                    acc = node(Expr::Lam(x, Box::new(acc.0)), span, vec![acc.1]);
                }
                Ok(acc)
            }
            Tok::Ident(s) if s == "let" => {
                self.bump();
                let x = self.binder()?;
                self.expect(Tok::Eq)?;
                let bound = self.expr()?;
                self.expect_keyword("in")?;
                let body = self.expr()?;
                let span = self.prev_end(start);
                Ok(node(Expr::Let(x, Box::new(bound.0), Box::new(body.0)), span, vec![bound.1, body.1]))
            }
            Tok::Ident(s) if s == "hp" => {
                if !self.opts.debug {
                    return Err(ParseError::new("heap literals are only accepted in debug mode", start, vec![]));
                }
                self.bump();
                self.expect(Tok::LBrace)?;
                let mut bindings = Vec::new();
                let mut kids = Vec::new();
                if *self.peek() != Tok::RBrace {
                    loop {
                        if *self.peek() == Tok::Hash {
                            self.bump();
                        }
                        let r = self.ref_id()?;
                        self.expect(Tok::Arrow)?;
                        let (v, t) = self.expr()?;
                        bindings.push((r, v));
                        kids.push(t);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrace)?;
                let (body, bt) = self.expr()?;
                kids.push(bt);
                let span = self.prev_end(start);
                Ok(node(Expr::HeapBind(Heap::new(bindings), Box::new(body)), span, kids))
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::LArrow => {
                let x = self.binder()?;
                self.bump();
                let bound = self.assign()?;
                self.expect(Tok::Semi)?;
                let body = self.expr()?;
                let span = self.prev_end(start);
                let lam = node(Expr::Lam(x, Box::new(body.0)), span, vec![body.1]);
                Ok(node(Expr::App(Box::new(lam.0), Box::new(bound.0)), span, vec![lam.1, bound.1]))
            }
            _ => {
                let first = self.assign()?;
                if *self.peek() != Tok::Semi {
                    return Ok(first);
                }
                self.bump();
                let body = self.expr()?;
                let span = self.prev_end(start);
                let x = fresh_name("_", &body.0.fv());
                let lam = node(Expr::Lam(x, Box::new(body.0)), body.1.span, vec![body.1]);
                Ok(node(Expr::App(Box::new(lam.0), Box::new(first.0)), span, vec![lam.1, first.1]))
            }
        }
    }

    fn assign(&mut self) -> Result<Node, ParseError> {
        let start = self.span();
        let lhs = self.app()?;
        if *self.peek() != Tok::ColonEq {
            return Ok(lhs);
        }
        let op = self.bump().span;
        let rhs = self.app()?;
        let inner_span = start.join(op);
        let inner = node(
            Expr::App(Box::new(Expr::Const(Const::Assign)), Box::new(lhs.0)),
            inner_span,
            vec![SpanTree::leaf(op), lhs.1],
        );
        let span = self.prev_end(start);
        Ok(node(Expr::App(Box::new(inner.0), Box::new(rhs.0)), span, vec![inner.1, rhs.1]))
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()),
            Tok::Int(_) | Tok::LParen | Tok::Bang => true,
            Tok::Hash | Tok::LBrace => self.opts.debug,
            _ => false,
        }
    }

    fn atom_required(&mut self) -> Result<Node, ParseError> {
        if self.starts_atom() {
            self.atom()
        } else {
            Err(self.unexpected(&["expression"]))
        }
    }

    fn app(&mut self) -> Result<Node, ParseError> {
        let start = self.span();
        let mut head = if self.is_keyword("run") {
            self.bump();
            let (b, t) = self.atom_required()?;
            node(Expr::Run(Box::new(b)), self.prev_end(start), vec![t])
        } else if self.is_keyword("catch") {
            self.bump();
            let (b, bt) = self.atom_required()?;
            if self.starts_atom() {
                let (h, ht) = self.atom()?;
                node(Expr::Catch(Box::new(b), Box::new(h)), self.prev_end(start), vec![bt, ht])
            } else if self.opts.debug {
                node(Expr::PartialCatch(Box::new(b)), self.prev_end(start), vec![bt])
            } else {
                return Err(self.unexpected(&["handler expression"]));
            }
        } else {
            self.atom_required()?
        };
        while self.starts_atom() {
            let (a, at) = self.atom()?;
            let span = self.prev_end(start);
            head = node(Expr::App(Box::new(head.0), Box::new(a)), span, vec![head.1, at]);
        }
        Ok(head)
    }

    fn ref_id(&mut self) -> Result<RefId, ParseError> {
        match self.peek() {
            Tok::Ident(s) => match ref_named(s) {
                Some(r) => {
                    self.bump();
                    Ok(r)
                }
                None => Err(self.unexpected(&["reference name `rN`"])),
            },
            _ => Err(self.unexpected(&["reference name `rN`"])),
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let start = self.span();
        match self.peek() {
            Tok::Ident(s) => {
                if KEYWORDS.contains(&s.as_str()) {
                    return Err(self.unexpected(&["expression"]));
                }
                self.bump();
                let e = match const_named(s) {
                    Some(c) => Expr::Const(c),
                    None => Expr::Var(s.clone()),
                };
                Ok(node(e, start, vec![]))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(node(Expr::Const(Const::Int(*n)), start, vec![]))
            }
            Tok::Bang => {
                self.bump();
                let (a, at) = self.atom_required()?;
                let span = self.prev_end(start);
                Ok(node(
                    Expr::App(Box::new(Expr::Const(Const::Read)), Box::new(a)),
                    span,
                    vec![SpanTree::leaf(start), at],
                ))
            }
            Tok::Hash if self.opts.debug => {
                self.bump();
                let r = self.ref_id()?;
                Ok(node(Expr::RefName(r), self.prev_end(start), vec![]))
            }
            Tok::LBrace if self.opts.debug => {
                self.bump();
                let c = match self.peek() {
                    Tok::Ident(s) => const_named(s).ok_or_else(|| self.unexpected(&["constant name"]))?,
                    _ => return Err(self.unexpected(&["constant name"])),
                };
                self.bump();
                let mut args = Vec::new();
                let mut kids = Vec::new();
                while *self.peek() != Tok::RBrace {
                    let (a, t) = self.atom_required()?;
                    args.push(a);
                    kids.push(t);
                }
                self.bump();
                Ok(node(Expr::PartialConst(c, args), self.prev_end(start), kids))
            }
            Tok::LParen => self.paren(start),
            _ => Err(self.unexpected(&["expression"])),
        }
    }

    fn paren(&mut self, start: SourceSpan) -> Result<Node, ParseError> {
        let simple = match (self.peek_at(1), self.peek_at(2)) {
            (Tok::RParen, _) => Some((Const::Unit, 2)),
            (Tok::Bang, Tok::RParen) => Some((Const::Read, 3)),
            (Tok::ColonEq, Tok::RParen) => Some((Const::Assign, 3)),
            _ => None,
        };
        if let Some((c, n)) = simple {
            for _ in 0..n {
                self.bump();
            }
            return Ok(node(Expr::Const(c), self.prev_end(start), vec![]));
        }
        if self.opts.debug && *self.peek_at(1) == Tok::Hash && *self.peek_at(3) == Tok::ColonEq {
            if let (Tok::Ident(s), Tok::RParen) = (self.peek_at(2), self.peek_at(4)) {
                if let Some(r) = ref_named(s) {
                    for _ in 0..5 {
                        self.bump();
                    }
                    return Ok(node(Expr::PartialAssign(r), self.prev_end(start), vec![]));
                }
            }
        }
        self.bump();
        let (e, mut t) = self.expr()?;
        self.expect(Tok::RParen)?;
        t.span = self.prev_end(start);
        Ok((e, t))
    }
}

/// Parses a type; variables take their kind from their position, with
/// `eN` names reserved for rows and `hN` names for heaps.
pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    parse_scheme(text).and_then(|s| {
        if s.vars.is_empty() {
            Ok(s.body)
        } else {
            Err(ParseError::new("expected a type, found a type scheme", SourceSpan::default(), vec![]))
        }
    })
}

pub fn parse_scheme(text: &str) -> Result<Scheme, ParseError> {
    let toks = lex(text)?;
    let mut p = TypeParser { p: Parser { toks: &toks, pos: 0, opts: ParseOptions::default() }, names: BTreeMap::new(), supply: Supply::new() };
    let mut vars = Vec::new();
    if p.p.is_keyword("forall") {
        p.p.bump();
        while let Tok::Ident(s) = p.p.peek() {
            let kind = kind_by_name(s);
            let v = p.var(s, kind)?;
            p.p.bump();
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        p.p.expect(Tok::Dot)?;
    }
    let body = p.ty()?;
    p.p.expect_eof()?;
    Ok(Scheme { vars, body })
}

fn kind_by_name(s: &str) -> Kind {
    let numbered = |prefix: char| {
        s.strip_prefix(prefix).is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
    };
    if numbered('e') {
        Kind::Row
    } else if numbered('h') {
        Kind::Heap
    } else {
        Kind::Star
    }
}

fn heap_const(s: &str) -> Option<u32> {
    let d = s.strip_prefix('H')?;
    if d.is_empty() || !d.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    d.parse().ok()
}

struct TypeParser<'a> {
    p: Parser<'a>,
    names: BTreeMap<String, TyVar>,
    supply: Supply,
}

impl<'a> TypeParser<'a> {
    fn var(&mut self, name: &str, kind: Kind) -> Result<TyVar, ParseError> {
        if let Some(v) = self.names.get(name) {
            if v.kind != kind {
                return Err(ParseError::new(
                    format!("type variable {name} used at kind {kind} and {}", v.kind),
                    self.p.span(),
                    vec![],
                ));
            }
            return Ok(*v);
        }
        let v = self.supply.fresh_var(kind);
        self.names.insert(name.to_string(), v);
        Ok(v)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.p.peek() {
            Tok::Ident(s) => {
                self.p.bump();
                Ok(s.clone())
            }
            _ => Err(self.p.unexpected(&["identifier"])),
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        let arg = self.btype()?;
        if *self.p.peek() != Tok::Arrow {
            return Ok(arg);
        }
        self.p.bump();
        let eff = match self.p.peek() {
            Tok::Lt => self.row()?,
            Tok::Ident(s) if kind_by_name(s) == Kind::Row => {
                let v = self.var(s, Kind::Row)?;
                self.p.bump();
                Type::Var(v)
            }
            _ => Type::empty_row(),
        };
        let res = self.ty()?;
        Ok(Type::fun(arg, eff, res))
    }

    fn btype(&mut self) -> Result<Type, ParseError> {
        match self.p.peek() {
            Tok::LParen => {
                self.p.bump();
                if *self.p.peek() == Tok::RParen {
                    self.p.bump();
                    return Ok(Type::unit());
                }
                let t = self.ty()?;
                self.p.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(s) if s == "int" => {
                self.p.bump();
                Ok(Type::int())
            }
            Tok::Ident(s) if s == "ref" => {
                self.p.bump();
                self.p.expect(Tok::Lt)?;
                let h = self.heap()?;
                self.p.expect(Tok::Comma)?;
                let t = self.ty()?;
                self.p.expect(Tok::Gt)?;
                Ok(Type::reference(h, t))
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && kind_by_name(s) == Kind::Star => {
                let v = self.var(s, Kind::Star)?;
                self.p.bump();
                Ok(Type::Var(v))
            }
            _ => Err(self.p.unexpected(&["type"])),
        }
    }

    fn heap(&mut self) -> Result<Type, ParseError> {
        let s = self.ident()?;
        match heap_const(&s) {
            Some(n) => Ok(Type::heap_const(n)),
            None => Ok(Type::Var(self.var(&s, Kind::Heap)?)),
        }
    }

    fn label(&mut self) -> Result<Type, ParseError> {
        match self.p.peek() {
            Tok::Ident(s) if s == "exn" => {
                self.p.bump();
                Ok(Type::exn())
            }
            Tok::Ident(s) if s == "div" => {
                self.p.bump();
                Ok(Type::div())
            }
            Tok::Ident(s) if s == "st" => {
                self.p.bump();
                self.p.expect(Tok::Lt)?;
                let h = self.heap()?;
                self.p.expect(Tok::Gt)?;
                Ok(Type::st(h))
            }
            _ => Err(self.p.unexpected(&["`exn`", "`div`", "`st`"])),
        }
    }

    fn row(&mut self) -> Result<Type, ParseError> {
        self.p.expect(Tok::Lt)?;
        let mut labels = Vec::new();
        if !matches!(self.p.peek(), Tok::Gt | Tok::Bar) {
            loop {
                labels.push(self.label()?);
                if *self.p.peek() == Tok::Comma {
                    self.p.bump();
                } else {
                    break;
                }
            }
        }
        let tail = if *self.p.peek() == Tok::Bar {
            self.p.bump();
            let s = self.ident()?;
            Type::Var(self.var(&s, Kind::Row)?)
        } else {
            Type::empty_row()
        };
        self.p.expect(Tok::Gt)?;
        Ok(Type::row(labels, tail))
    }
}
