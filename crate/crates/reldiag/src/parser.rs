//! Concrete text syntax for queries, with a round-tripping pretty-printer.
//!
//! Grammar sketch (precedence low to high: `->`, `or`, `and`; `not(...)`
//! takes an explicit parenthesized argument; `[...]` delimits quantifier
//! scope):
//!
//! ```text
//! query    := '{' ident '(' ident (',' ident)* ')' '|' formula '}' | formula
//! formula  := or ('->' formula)?
//! or       := and ('or' and)*
//! and      := unit ('and' unit)*
//! unit     := 'not' '(' formula ')'
//!           | ('exists'|'forall') binding (',' binding)* '[' formula? ']'
//!           | '(' formula ')'
//!           | operand cmp operand
//! binding  := ident 'in' (ident | string)
//! operand  := ident '.' ident | integer | string
//! ```
//!
//! Relation names may be double-quoted strings, which is how the built-in
//! comparison relations (`"<"`, `"=4"`, ...) are written.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ast::{AstError, AttrRef, Binding, CmpOp, Constant, Formula, Query};

/// Byte range into the source text.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    fn join(self, other: SourceSpan) -> SourceSpan {
        SourceSpan { start: self.start.min(other.start), end: self.end.max(other.end) }
    }
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
#[error("{message} at byte {}..{}", span.start, span.end)]
pub struct ParseError {
    pub message: String,
    pub span: SourceSpan,
}

/// Parse result: the normalized query plus the source span of every
/// predicate leaf, in depth-first order (normalization preserves leaf
/// order, so these line up with leaf indices used by safety reports).
#[derive(Clone, Debug)]
pub struct ParsedQuery {
    pub query: Query,
    pub atom_spans: Vec<SourceSpan>,
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, PartialEq, Eq, Debug)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Cmp(CmpOp),
    Arrow,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Pipe,
    Comma,
    Dot,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_' || c == b'$'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn error(&self, message: impl Into<String>, start: usize) -> ParseError {
        ParseError { message: message.into(), span: SourceSpan { start, end: self.pos.max(start + 1).min(self.src.len().max(start + 1)) } }
    }

    fn next_token(&mut self) -> Result<(Tok, SourceSpan), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, SourceSpan { start, end: start }));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'{' => {
                self.pos += 1;
                Tok::LBrace
            }
            b'}' => {
                self.pos += 1;
                Tok::RBrace
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'[' => {
                self.pos += 1;
                Tok::LBracket
            }
            b']' => {
                self.pos += 1;
                Tok::RBracket
            }
            b'|' => {
                self.pos += 1;
                Tok::Pipe
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'.' => {
                self.pos += 1;
                Tok::Dot
            }
            b'-' => {
                self.pos += 1;
                if self.pos < self.src.len() && self.src[self.pos] == b'>' {
                    self.pos += 1;
                    Tok::Arrow
                } else if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    return self.lex_int(start, true);
                } else {
                    return Err(self.error("expected `>` or digit after `-`", start));
                }
            }
            b'=' => {
                self.pos += 1;
                Tok::Cmp(CmpOp::Eq)
            }
            b'!' => {
                self.pos += 1;
                if self.pos < self.src.len() && self.src[self.pos] == b'=' {
                    self.pos += 1;
                    Tok::Cmp(CmpOp::Ne)
                } else {
                    return Err(self.error("expected `=` after `!`", start));
                }
            }
            b'<' => {
                self.pos += 1;
                if self.pos < self.src.len() && self.src[self.pos] == b'=' {
                    self.pos += 1;
                    Tok::Cmp(CmpOp::Le)
                } else {
                    Tok::Cmp(CmpOp::Lt)
                }
            }
            b'>' => {
                self.pos += 1;
                if self.pos < self.src.len() && self.src[self.pos] == b'=' {
                    self.pos += 1;
                    Tok::Cmp(CmpOp::Ge)
                } else {
                    Tok::Cmp(CmpOp::Gt)
                }
            }
            b'"' => {
                self.pos += 1;
                let mut out = String::new();
                loop {
                    if self.pos >= self.src.len() {
                        return Err(self.error("unterminated string literal", start));
                    }
                    match self.src[self.pos] {
                        b'"' => {
                            self.pos += 1;
                            break;
                        }
                        b'\\' => {
                            self.pos += 1;
                            if self.pos >= self.src.len() {
                                return Err(self.error("unterminated escape", start));
                            }
                            match self.src[self.pos] {
                                b'"' => out.push('"'),
                                b'\\' => out.push('\\'),
                                other => {
                                    return Err(self.error(
                                        format!("unsupported escape `\\{}`", other as char),
                                        self.pos,
                                    ))
                                }
                            }
                            self.pos += 1;
                        }
                        other => {
                            out.push(other as char);
                            self.pos += 1;
                        }
                    }
                }
                Tok::Str(out)
            }
            c if c.is_ascii_digit() => return self.lex_int(start, false),
            c if is_ident_start(c) => {
                while self.pos < self.src.len() && is_ident_char(self.src[self.pos]) {
                    self.pos += 1;
                }
                Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
            other => {
                self.pos += 1;
                return Err(self.error(format!("unexpected character `{}`", other as char), start));
            }
        };
        Ok((tok, SourceSpan { start, end: self.pos }))
    }

    fn lex_int(&mut self, start: usize, negative: bool) -> Result<(Tok, SourceSpan), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.src[start + usize::from(negative)..self.pos]).unwrap();
        let value: i64 = digits
            .parse()
            .map_err(|_| self.error("integer literal out of range", start))?;
        let value = if negative { -value } else { value };
        Ok((Tok::Int(value), SourceSpan { start, end: self.pos }))
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    atom_spans: Vec<SourceSpan>,
    binding_spans: Vec<(String, SourceSpan)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { message: message.into(), span: self.peek_span() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<SourceSpan, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, SourceSpan), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                if matches!(s.as_str(), "exists" | "forall" | "in" | "and" | "or" | "not") {
                    return Err(self.error(format!("expected {what}, found keyword `{s}`")));
                }
                let span = self.bump().1;
                Ok((s, span))
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        if *self.peek() == Tok::LBrace {
            self.bump();
            let (out_var, _) = self.ident("output variable")?;
            self.expect(Tok::LParen, "`(`")?;
            let mut header = Vec::new();
            loop {
                let (attr, _) = self.ident("header attribute")?;
                header.push(attr);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen, "`)`")?;
            self.expect(Tok::Pipe, "`|`")?;
            let body = self.formula()?;
            self.expect(Tok::RBrace, "`}`")?;
            self.expect(Tok::Eof, "end of input")?;
            Ok(Query::NonBoolean { out_var, header, body })
        } else {
            let body = self.formula()?;
            self.expect(Tok::Eof, "end of input")?;
            Ok(Query::Boolean(body))
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or_level()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?; // right-associative
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn or_level(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.and_level()?];
        while self.is_keyword("or") {
            self.bump();
            parts.push(self.and_level()?);
        }
        Ok(Formula::or(parts))
    }

    fn and_level(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.unit()?];
        while self.is_keyword("and") {
            self.bump();
            parts.push(self.unit()?);
        }
        Ok(Formula::and(parts))
    }

    fn unit(&mut self) -> Result<Formula, ParseError> {
        if self.eat_keyword("not") {
            self.expect(Tok::LParen, "`(` after `not`")?;
            let inner = self.formula()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Formula::not(inner));
        }
        if self.is_keyword("exists") || self.is_keyword("forall") {
            let existential = self.is_keyword("exists");
            self.bump();
            let mut bindings = Vec::new();
            loop {
                let (var, vspan) = self.ident("tuple variable")?;
                if !self.eat_keyword("in") {
                    return Err(self.error("expected `in`"));
                }
                let relation = match self.peek().clone() {
                    Tok::Ident(_) => self.ident("relation name")?.0,
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.error("expected relation name")),
                };
                self.binding_spans.push((var.clone(), vspan));
                bindings.push(Binding { var, relation });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::LBracket, "`[`")?;
            let body = if *self.peek() == Tok::RBracket { None } else { Some(self.formula()?) };
            self.expect(Tok::RBracket, "`]`")?;
            return Ok(if existential {
                Formula::exists(bindings, body)
            } else {
                Formula::forall(bindings, body)
            });
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let inner = self.formula()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Formula, ParseError> {
        let start = self.peek_span();
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Cmp(op) => {
                let op = *op;
                self.bump();
                op
            }
            _ => return Err(self.error("expected comparison operator")),
        };
        let right = self.operand()?;
        let end = self.toks[self.pos.saturating_sub(1)].1;
        let span = start.join(end);
        let pred = match (left, right) {
            (Operand::Attr(l), Operand::Attr(r)) => Formula::Join { left: l, op, right: r },
            (Operand::Attr(l), Operand::Const(c)) => {
                Formula::Sel { left: l, op, constant: c }
            }
            (Operand::Const(c), Operand::Attr(r)) => {
                // normalize constant-first form to attribute-first with mirror
                Formula::Sel { left: r, op: op.mirror(), constant: c }
            }
            (Operand::Const(_), Operand::Const(_)) => {
                return Err(ParseError {
                    message: "predicate must reference at least one attribute".into(),
                    span,
                })
            }
        };
        self.atom_spans.push(span);
        Ok(pred)
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Operand::Const(Constant::Int(v)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Operand::Const(Constant::Str(s)))
            }
            Tok::Ident(_) => {
                let (var, _) = self.ident("tuple variable")?;
                self.expect(Tok::Dot, "`.` (attribute references must be qualified)")?;
                let (attr, _) = self.ident("attribute name")?;
                Ok(Operand::Attr(AttrRef { var, attr }))
            }
            _ => Err(self.error("expected attribute reference or constant")),
        }
    }
}

enum Operand {
    Attr(AttrRef),
    Const(Constant),
}

/// Parse and normalize a query. Well-formedness errors are mapped back to
/// source spans where possible (the span of the offending variable's
/// binding, or the whole input).
pub fn parse_query(text: &str) -> Result<ParsedQuery, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    loop {
        let (tok, span) = lexer.next_token()?;
        let done = tok == Tok::Eof;
        toks.push((tok, span));
        if done {
            break;
        }
    }
    let mut p = Parser { toks, pos: 0, atom_spans: Vec::new(), binding_spans: Vec::new() };
    let query = p.query()?;
    let query = query.normalize().map_err(|e| {
        let span = match &e {
            AstError::Rebind(v) | AstError::FreeBound(v) | AstError::OutVarBound(v) => p
                .binding_spans
                .iter()
                .rev()
                .find(|(name, _)| name == v)
                .map(|(_, s)| *s),
            _ => None,
        };
        ParseError {
            message: e.to_string(),
            span: span.unwrap_or(SourceSpan { start: 0, end: text.len() }),
        }
    })?;
    Ok(ParsedQuery { query, atom_spans: p.atom_spans })
}

// ---------------------------------------------------------------------------
// Pretty printer

/// Precedence levels for printing; higher binds tighter.
fn level(f: &Formula) -> u8 {
    match f {
        Formula::Implies(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        _ => 4,
    }
}

fn write_formula(out: &mut String, f: &Formula, min_level: u8) {
    let lvl = level(f);
    let parens = lvl < min_level;
    if parens {
        out.push('(');
    }
    match f {
        Formula::Join { left, op, right } => {
            let _ = write!(out, "{left} {op} {right}");
        }
        Formula::Sel { left, op, constant } => {
            let _ = write!(out, "{left} {op} {constant}");
        }
        Formula::Not(x) => {
            out.push_str("not(");
            write_formula(out, x, 0);
            out.push(')');
        }
        Formula::And(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" and ");
                }
                write_formula(out, c, 4);
            }
        }
        Formula::Or(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" or ");
                }
                write_formula(out, c, 3);
            }
        }
        Formula::Implies(a, b) => {
            // right-associative: parenthesize an implication on the left
            write_formula(out, a, 2);
            out.push_str(" -> ");
            write_formula(out, b, 1);
        }
        Formula::Exists(bs, body) | Formula::Forall(bs, body) => {
            out.push_str(if matches!(f, Formula::Exists(..)) { "exists " } else { "forall " });
            for (i, b) in bs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{} in {}", b.var, relation_lexeme(&b.relation));
            }
            out.push_str(" [");
            if let Some(body) = body {
                write_formula(out, body, 0);
            }
            out.push(']');
        }
    }
    if parens {
        out.push(')');
    }
}

fn is_plain_ident(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().next().map(is_ident_start).unwrap_or(false)
        && s.bytes().all(is_ident_char)
        && !matches!(s, "exists" | "forall" | "in" | "and" | "or" | "not")
}

fn relation_lexeme(name: &str) -> String {
    if is_plain_ident(name) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

/// Render a query with minimal parentheses; `parse_query(pretty(q))`
/// reproduces the normalized query.
pub fn pretty(q: &Query) -> String {
    let mut out = String::new();
    match q {
        Query::Boolean(f) => write_formula(&mut out, f, 0),
        Query::NonBoolean { out_var, header, body } => {
            let _ = write!(out, "{{ {out_var}({}) | ", header.join(", "));
            write_formula(&mut out, body, 0);
            out.push_str(" }");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{alpha_equiv, Binding, CmpOp, Constant, Formula, Query};

    fn parse(s: &str) -> Query {
        parse_query(s).unwrap().query
    }

    #[test]
    fn parses_union_query() {
        let q = parse("{ q(A) | exists r in R [q.A = r.A] or exists s in S [q.A = s.A] }");
        match &q {
            Query::NonBoolean { out_var, header, body } => {
                assert_eq!(out_var, "q");
                assert_eq!(header, &vec!["A".to_string()]);
                assert!(matches!(body, Formula::Or(cs) if cs.len() == 2));
            }
            _ => panic!("expected non-boolean query"),
        }
    }

    #[test]
    fn parses_simple_disjunction() {
        let q = parse("exists r in R [r.A = 1 or r.A = 2]");
        match &q {
            Query::Boolean(Formula::Exists(bs, Some(body))) => {
                assert_eq!(bs, &vec![Binding::new("r", "R")]);
                assert!(matches!(&**body, Formula::Or(cs) if cs.len() == 2));
            }
            _ => panic!("unexpected shape"),
        }
    }

    #[test]
    fn parses_negated_selection() {
        let q = parse("exists r in R [not(r.A < 4)]");
        match &q {
            Query::Boolean(Formula::Exists(_, Some(body))) => match &**body {
                Formula::Not(inner) => assert!(matches!(
                    &**inner,
                    Formula::Sel { op: CmpOp::Lt, constant: Constant::Int(4), .. }
                )),
                _ => panic!("expected negation"),
            },
            _ => panic!("unexpected shape"),
        }
    }

    #[test]
    fn precedence_and_binds_tighter_than_or() {
        let q = parse("exists r in R [r.A = 1 or r.B = 2 and r.C = 3]");
        match &q {
            Query::Boolean(Formula::Exists(_, Some(body))) => match &**body {
                Formula::Or(cs) => {
                    assert_eq!(cs.len(), 2);
                    assert!(matches!(&cs[1], Formula::And(inner) if inner.len() == 2));
                }
                _ => panic!("expected disjunction at top"),
            },
            _ => panic!("unexpected shape"),
        }
    }

    #[test]
    fn implies_is_right_associative_and_lowest() {
        let q = parse("exists r in R [r.A = 1 -> r.B = 2 -> r.C = 3]");
        match &q {
            Query::Boolean(Formula::Exists(_, Some(body))) => match &**body {
                Formula::Implies(_, rhs) => assert!(matches!(&**rhs, Formula::Implies(..))),
                _ => panic!("expected implication"),
            },
            _ => panic!("unexpected shape"),
        }
    }

    #[test]
    fn quoted_relation_names() {
        let q = parse("exists r in R, c in \">0\" [r.A = c.$1]");
        match &q {
            Query::Boolean(Formula::Exists(bs, _)) => {
                assert_eq!(bs[1].relation, ">0");
            }
            _ => panic!("unexpected shape"),
        }
    }

    #[test]
    fn empty_quantifier_body() {
        let q = parse("exists r in R []");
        assert!(matches!(q, Query::Boolean(Formula::Exists(_, None))));
        assert_eq!(pretty(&q), "exists r in R []");
    }

    #[test]
    fn constant_first_predicate_mirrors() {
        let q = parse("exists r in R [4 < r.A]");
        match &q {
            Query::Boolean(Formula::Exists(_, Some(body))) => {
                assert!(matches!(
                    &**body,
                    Formula::Sel { op: CmpOp::Gt, constant: Constant::Int(4), .. }
                ));
            }
            _ => panic!("unexpected shape"),
        }
    }

    #[test]
    fn syntax_error_has_in_bounds_span() {
        let text = "exists r in R [r.A = ]";
        let err = parse_query(text).unwrap_err();
        assert!(err.span.start <= err.span.end);
        assert!(err.span.end <= text.len());
    }

    #[test]
    fn rebind_error_surfaces_with_span() {
        let text = "exists r in R [r.A = 1] and exists r in S [r.B = 2]";
        let err = parse_query(text).unwrap_err();
        assert!(err.message.contains("bound more than once"), "{}", err.message);
        assert!(err.span.end <= text.len());
    }

    #[test]
    fn pretty_round_trip_fixtures() {
        let cases = [
            "{ q(A) | exists r in R [q.A = r.A] or exists s in S [q.A = s.A] }",
            "exists r in R [r.A = 1 or r.A = 2]",
            "exists r in R [not(r.A < 4)]",
            "exists r in R [not(not(r.A = 1) and not(r.A = 2))]",
            "forall s in S [s.A > 0 -> exists r in R [r.B = s.B]]",
            "exists r in R, c in \">0\" [r.A = c.$1]",
            "{ q(A, B) | (q.A = 0 and (exists r in R [q.B = r.B] or q.B = 1)) or exists s in R [q.A = s.A and q.B = s.B] }",
        ];
        for text in cases {
            let q = parse(text);
            let printed = pretty(&q);
            let q2 = parse(&printed);
            assert_eq!(q, q2, "round trip failed for `{text}` -> `{printed}`");
        }
    }

    #[test]
    fn pretty_uses_minimal_parens() {
        let q = parse("exists r in R [(r.A = 1 or r.A = 2) and r.B = 3]");
        assert_eq!(pretty(&q), "exists r in R [(r.A = 1 or r.A = 2) and r.B = 3]");
        let q = parse("exists r in R [r.A = 1 or (r.A = 2 and r.B = 3)]");
        assert_eq!(pretty(&q), "exists r in R [r.A = 1 or r.A = 2 and r.B = 3]");
    }

    #[test]
    fn atom_spans_cover_predicates() {
        let text = "exists r in R [r.A = 1 and r.B = 2]";
        let parsed = parse_query(text).unwrap();
        assert_eq!(parsed.atom_spans.len(), 2);
        assert_eq!(&text[parsed.atom_spans[0].start..parsed.atom_spans[0].end], "r.A = 1");
        assert_eq!(&text[parsed.atom_spans[1].start..parsed.atom_spans[1].end], "r.B = 2");
    }

    #[test]
    fn alpha_equiv_after_round_trip() {
        let q = parse("exists r in R [r.A < r.B]");
        let q2 = parse("exists x in R [x.B > x.A]");
        assert!(alpha_equiv(&q, &q2));
    }
}
