use super::{ParseError, SourceSpan};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Backslash,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    ColonEq,
    LArrow,
    Arrow,
    Bang,
    Eq,
    Lt,
    Gt,
    Bar,
    Hash,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Eof => "end of input".into(),
            t => format!("`{}`", t.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::Backslash => "\\",
            Tok::Dot => ".",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::ColonEq => ":=",
            Tok::LArrow => "<-",
            Tok::Arrow => "->",
            Tok::Bang => "!",
            Tok::Eq => "=",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Bar => "|",
            Tok::Hash => "#",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

struct Pos {
    offset: usize,
    line: usize,
    column: usize,
}

/// Splits `src` into tokens. `--` starts a comment that runs to the end of the line.
pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut p = Pos { offset: 0, line: 1, column: 1 };
    let advance = |p: &mut Pos, n: usize| {
        for &b in &bytes[p.offset..p.offset + n] {
            if b == b'\n' {
                p.line += 1;
                p.column = 1;
            } else if b & 0xC0 != 0x80 {
                p.column += 1;
            }
        }
        p.offset += n;
    };
    while p.offset < bytes.len() {
        let c = bytes[p.offset];
        let rest = &bytes[p.offset..];
        if c.is_ascii_whitespace() {
            advance(&mut p, 1);
            continue;
        }
        if rest.starts_with(b"--") {
            let n = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
            advance(&mut p, n);
            continue;
        }
        let start = SourceSpan { start: p.offset, end: p.offset, line: p.line, column: p.column };
        let (tok, len) = if c.is_ascii_alphabetic() || c == b'_' {
            let n = rest
                .iter()
                .position(|&b| !(b.is_ascii_alphanumeric() || b == b'_' || b == b'\''))
                .unwrap_or(rest.len());
            (Tok::Ident(src[p.offset..p.offset + n].to_string()), n)
        } else if c.is_ascii_digit() || (c == b'-' && rest.get(1).is_some_and(u8::is_ascii_digit)) {
            let n = 1 + rest[1..].iter().position(|b| !b.is_ascii_digit()).unwrap_or(rest.len() - 1);
            let text = &src[p.offset..p.offset + n];
            match text.parse::<i64>() {
                Ok(v) => (Tok::Int(v), n),
                Err(_) => {
                    return Err(ParseError::new(
                        format!("integer literal {text} out of range"),
                        SourceSpan { end: p.offset + n, ..start },
                        vec![],
                    ))
                }
            }
        } else {
            let two = |s: &[u8]| rest.starts_with(s);
            if two(b":=") {
                (Tok::ColonEq, 2)
            } else if two(b"<-") {
                (Tok::LArrow, 2)
            } else if two(b"->") {
                (Tok::Arrow, 2)
            } else {
                let t = match c {
                    b'\\' => Tok::Backslash,
                    b'.' => Tok::Dot,
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b',' => Tok::Comma,
                    b';' => Tok::Semi,
                    b'!' => Tok::Bang,
                    b'=' => Tok::Eq,
                    b'<' => Tok::Lt,
                    b'>' => Tok::Gt,
                    b'|' => Tok::Bar,
                    b'#' => Tok::Hash,
                    _ => {
                        let ch = src[p.offset..].chars().next().unwrap_or('?');
                        let len = ch.len_utf8();
                        return Err(ParseError::new(
                            format!("unexpected character {ch:?}"),
                            SourceSpan { end: p.offset + len, ..start },
                            vec![],
                        ));
                    }
                };
                (t, 1)
            }
        };
        advance(&mut p, len);
        out.push(Token { tok, span: SourceSpan { end: p.offset, ..start } });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: SourceSpan { start: p.offset, end: p.offset, line: p.line, column: p.column },
    });
    Ok(out)
}
