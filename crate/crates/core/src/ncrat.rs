//! Noncommutative rational expressions: parser, printer, evaluator.
//!
//! Grammar (whitespace insensitive, `*` mandatory, no juxtaposition):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := '-' factor | 'inv' '(' expr ')' | '(' expr ')' | atom
//! atom   := 'Z' digits | literal
//! literal:= a | bi | a+bi | a-bi | i        (a, b decimal floats)
//! ```
//!
//! A leading `-` directly before a literal is folded into the constant;
//! everywhere else it builds a `Neg` node.  A real literal merges with a
//! following `+/- bi` into one complex constant unless the imaginary half
//! is itself the start of a product (lookahead on `*`), so `1 - 2i` is one
//! constant while `1 - 2i*Z1` subtracts a product.  Multiplication is
//! matrix multiplication in written order; nothing commutes and nothing
//! simplifies: the printed form of an AST parses back to the identical
//! tree, which is what the property tests pin down.

use crate::linalg::{c, cr, guarded_inverse, CMatrix, C64, ONE};
use rand::Rng;
use thiserror::Error;

/// Byte range in the source text, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    fn merge(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    /// 1-based variable `Z<k>`.
    Var(u32),
    Const(C64),
    Add(Vec<Expr>),
    Neg(Box<Expr>),
    Mul(Vec<Expr>),
    Inv(Box<Expr>),
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

/// Structural equality; spans are diagnostics, not structure.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

#[derive(Debug, Error)]
pub enum NcratError {
    #[error("syntax error at bytes {}..{}: {message}", span.start, span.end)]
    Syntax { message: String, span: Span },
    #[error("unbound variable Z{index} at bytes {}..{}", span.start, span.end)]
    UnboundVariable { index: u32, span: Span },
    #[error("singular inverse at bytes {}..{}: sigma_min {sigma_min:.3e}", span.start, span.end)]
    SingularInverse { sigma_min: f64, span: Span },
    #[error("variables must be square matrices of one common size")]
    BadVariables,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Real(f64),
    Imag(f64),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Inv,
    Var(u32),
}

#[derive(Debug, Clone, Copy)]
struct Token {
    tok: Tok,
    span: Span,
}

fn lex(text: &str) -> Result<Vec<Token>, NcratError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'+' | b'-' | b'*' | b'(' | b')' => {
                let tok = match b {
                    b'+' => Tok::Plus,
                    b'-' => Tok::Minus,
                    b'*' => Tok::Star,
                    b'(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                out.push(Token {
                    tok,
                    span: Span::new(i, i + 1),
                });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let value: f64 = text[start..i].parse().map_err(|_| NcratError::Syntax {
                    message: format!("bad numeric literal `{}`", &text[start..i]),
                    span: Span::new(start, i),
                })?;
                // 'i' glues as an imaginary suffix only when it is not the
                // start of a longer identifier such as `inv`
                let imag_suffix = i < bytes.len()
                    && bytes[i] == b'i'
                    && !(i + 1 < bytes.len() && bytes[i + 1].is_ascii_alphanumeric());
                if imag_suffix {
                    i += 1;
                    out.push(Token {
                        tok: Tok::Imag(value),
                        span: Span::new(start, i),
                    });
                } else {
                    out.push(Token {
                        tok: Tok::Real(value),
                        span: Span::new(start, i),
                    });
                }
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let word = &text[start..i];
                let span = Span::new(start, i);
                let tok = match word {
                    "i" => Tok::Imag(1.0),
                    "inv" => Tok::Inv,
                    _ if word.starts_with('Z') && word.len() > 1 => {
                        let index: u32 =
                            word[1..].parse().map_err(|_| NcratError::Syntax {
                                message: format!("bad variable name `{word}`"),
                                span,
                            })?;
                        if index == 0 {
                            return Err(NcratError::Syntax {
                                message: "variable indices start at Z1".to_string(),
                                span,
                            });
                        }
                        Tok::Var(index)
                    }
                    _ => {
                        return Err(NcratError::Syntax {
                            message: format!("unknown token `{word}`"),
                            span,
                        })
                    }
                };
                out.push(Token { tok, span });
            }
            _ => {
                return Err(NcratError::Syntax {
                    message: format!("unexpected byte `{}`", text[i..].chars().next().unwrap()),
                    span: Span::new(i, i + 1),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self, ahead: usize) -> Option<Tok> {
        self.tokens.get(self.pos + ahead).map(|t| t.tok)
    }

    fn here(&self) -> Span {
        self.tokens
            .get(self.pos)
            .map(|t| t.span)
            .unwrap_or(Span::new(self.end, self.end))
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, NcratError> {
        if self.peek(0) == Some(tok) {
            Ok(self.bump())
        } else {
            Err(NcratError::Syntax {
                message: format!("expected {what}"),
                span: self.here(),
            })
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, NcratError> {
        let first = self.parse_term()?;
        let mut span = first.span;
        let mut items = vec![first];
        loop {
            match self.peek(0) {
                Some(Tok::Plus) => {
                    self.bump();
                    let term = self.parse_term()?;
                    span = span.merge(term.span);
                    items.push(term);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let term = self.parse_term()?;
                    span = span.merge(term.span);
                    let term_span = term.span;
                    items.push(Expr::new(ExprKind::Neg(Box::new(term)), term_span));
                }
                _ => break,
            }
        }
        if items.len() == 1 {
            Ok(items.pop().unwrap())
        } else {
            Ok(Expr::new(ExprKind::Add(items), span))
        }
    }

    fn parse_term(&mut self) -> Result<Expr, NcratError> {
        let first = self.parse_factor()?;
        let mut span = first.span;
        let mut items = vec![first];
        while self.peek(0) == Some(Tok::Star) {
            self.bump();
            let factor = self.parse_factor()?;
            span = span.merge(factor.span);
            items.push(factor);
        }
        if items.len() == 1 {
            Ok(items.pop().unwrap())
        } else {
            Ok(Expr::new(ExprKind::Mul(items), span))
        }
    }

    fn parse_factor(&mut self) -> Result<Expr, NcratError> {
        match self.peek(0) {
            Some(Tok::Minus) => {
                let minus = self.bump();
                match self.peek(0) {
                    // a leading minus folds into a numeric literal
                    Some(Tok::Real(_)) | Some(Tok::Imag(_)) => {
                        let lit = self.parse_literal(true)?;
                        Ok(Expr::new(lit.kind, minus.span.merge(lit.span)))
                    }
                    _ => {
                        let inner = self.parse_factor()?;
                        let span = minus.span.merge(inner.span);
                        Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span))
                    }
                }
            }
            Some(Tok::Inv) => {
                let kw = self.bump();
                self.expect(Tok::LParen, "`(` after inv")?;
                let inner = self.parse_expr()?;
                let close = self.expect(Tok::RParen, "`)` closing inv")?;
                let span = kw.span.merge(close.span);
                Ok(Expr::new(ExprKind::Inv(Box::new(inner)), span))
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Var(index)) => {
                let t = self.bump();
                Ok(Expr::new(ExprKind::Var(index), t.span))
            }
            Some(Tok::Real(_)) | Some(Tok::Imag(_)) => self.parse_literal(false),
            _ => Err(NcratError::Syntax {
                message: "expected a factor".to_string(),
                span: self.here(),
            }),
        }
    }

    /// One complex literal starting at a numeric token.  A real part may
    /// absorb `+ bi` / `- bi` unless that imaginary token starts a product.
    fn parse_literal(&mut self, negate: bool) -> Result<Expr, NcratError> {
        let lead = self.bump();
        let sign = if negate { -1.0 } else { 1.0 };
        match lead.tok {
            Tok::Imag(b) => Ok(Expr::new(ExprKind::Const(c(0.0, sign * b)), lead.span)),
            Tok::Real(a) => {
                let glue = matches!(self.peek(0), Some(Tok::Plus) | Some(Tok::Minus))
                    && matches!(self.peek(1), Some(Tok::Imag(_)))
                    && self.peek(2) != Some(Tok::Star);
                if glue {
                    let op = self.bump();
                    let im_tok = self.bump();
                    let b = match im_tok.tok {
                        Tok::Imag(b) => b,
                        _ => unreachable!(),
                    };
                    // the leading sign negates only the leading token;
                    // the imaginary tail carries its own sign
                    let b = if op.tok == Tok::Minus { -b } else { b };
                    Ok(Expr::new(
                        ExprKind::Const(c(sign * a, b)),
                        lead.span.merge(im_tok.span),
                    ))
                } else {
                    Ok(Expr::new(ExprKind::Const(cr(sign * a)), lead.span))
                }
            }
            _ => unreachable!("parse_literal called on a numeric token"),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, NcratError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let expr = parser.parse_expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(NcratError::Syntax {
            message: "trailing input".to_string(),
            span: parser.here(),
        });
    }
    Ok(expr)
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_const(z: C64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else if z.re == 0.0 {
        if z.im == 1.0 {
            "i".to_string()
        } else if z.im == -1.0 {
            "-i".to_string()
        } else {
            format!("{}i", fmt_f64(z.im))
        }
    } else {
        let im_mag = z.im.abs();
        let im_txt = if im_mag == 1.0 {
            "i".to_string()
        } else {
            format!("{}i", fmt_f64(im_mag))
        };
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{}{}{}", fmt_f64(z.re), sign, im_txt)
    }
}

fn is_composite_const(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::Const(z) if z.re != 0.0 && z.im != 0.0)
}

fn is_pure_imag_const(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::Const(z) if z.re == 0.0 && z.im != 0.0)
}

/// Canonical printing: `parse(format(e))` is structurally `e`.  Beyond
/// precedence, two lexical hazards force parentheses — a composite
/// constant inside a product, and a bare imaginary constant after `+`/`-`
/// where it would glue onto a preceding real literal.
pub fn format(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

fn write_expr(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Add(items) => {
            for (k, item) in items.iter().enumerate() {
                if k == 0 {
                    write_wrapped(item, matches!(item.kind, ExprKind::Add(_)), out);
                    continue;
                }
                if let ExprKind::Neg(inner) = &item.kind {
                    out.push_str(" - ");
                    let parens = matches!(
                        inner.kind,
                        ExprKind::Add(_) | ExprKind::Const(_) | ExprKind::Neg(_)
                    );
                    write_wrapped(inner, parens, out);
                } else {
                    out.push_str(" + ");
                    let parens =
                        matches!(item.kind, ExprKind::Add(_)) || is_pure_imag_const(item);
                    write_wrapped(item, parens, out);
                }
            }
        }
        ExprKind::Mul(items) => {
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push('*');
                }
                let parens = matches!(
                    item.kind,
                    ExprKind::Add(_) | ExprKind::Mul(_) | ExprKind::Neg(_)
                ) || is_composite_const(item);
                write_wrapped(item, parens, out);
            }
        }
        ExprKind::Neg(inner) => {
            out.push('-');
            let parens = matches!(
                inner.kind,
                ExprKind::Const(_) | ExprKind::Neg(_) | ExprKind::Add(_) | ExprKind::Mul(_)
            );
            write_wrapped(inner, parens, out);
        }
        ExprKind::Inv(inner) => {
            out.push_str("inv(");
            write_expr(inner, out);
            out.push(')');
        }
        ExprKind::Var(k) => {
            out.push('Z');
            out.push_str(&k.to_string());
        }
        ExprKind::Const(z) => out.push_str(&fmt_const(*z)),
    }
}

fn write_wrapped(e: &Expr, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

/// Literal AST evaluation on square matrices: `Z<k>` is `vars[k-1]`, a
/// constant is a multiple of the identity, products multiply in written
/// order.  With no variables the context is 1x1.
pub fn eval(e: &Expr, vars: &[CMatrix]) -> Result<CMatrix, NcratError> {
    let n = if vars.is_empty() { 1 } else { vars[0].nrows() };
    if vars
        .iter()
        .any(|m| m.nrows() != n || m.ncols() != n)
    {
        return Err(NcratError::BadVariables);
    }
    eval_inner(e, vars, n)
}

fn eval_inner(e: &Expr, vars: &[CMatrix], n: usize) -> Result<CMatrix, NcratError> {
    match &e.kind {
        ExprKind::Var(k) => vars
            .get((*k - 1) as usize)
            .cloned()
            .ok_or(NcratError::UnboundVariable {
                index: *k,
                span: e.span,
            }),
        ExprKind::Const(z) => Ok(CMatrix::identity(n, n).map(|x| x * z)),
        ExprKind::Add(items) => {
            let mut acc = CMatrix::zeros(n, n);
            for item in items {
                acc += eval_inner(item, vars, n)?;
            }
            Ok(acc)
        }
        ExprKind::Neg(inner) => Ok(-eval_inner(inner, vars, n)?),
        ExprKind::Mul(items) => {
            let mut acc = CMatrix::identity(n, n);
            for item in items {
                acc = acc * eval_inner(item, vars, n)?;
            }
            Ok(acc)
        }
        ExprKind::Inv(inner) => {
            let m = eval_inner(inner, vars, n)?;
            guarded_inverse(&m).map_err(|s| NcratError::SingularInverse {
                sigma_min: s.sigma_min,
                span: e.span,
            })
        }
    }
}

/// Random AST for round-trip property tests.
pub fn random_expr<R: Rng>(rng: &mut R, max_depth: usize, max_var: u32) -> Expr {
    let span = Span::new(0, 0);
    if max_depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.5) {
            Expr::new(ExprKind::Var(rng.random_range(1..=max_var)), span)
        } else {
            let z = match rng.random_range(0..5u32) {
                0 => cr(rng.random_range(-4..=4) as f64),
                1 => c(0.0, rng.random_range(-4..=4) as f64),
                2 => c(
                    rng.random_range(-3..=3) as f64,
                    rng.random_range(-3..=3) as f64,
                ),
                3 => ONE,
                _ => cr(rng.random_range(-2.5..2.5)),
            };
            Expr::new(ExprKind::Const(z), span)
        };
    }
    match rng.random_range(0..4u32) {
        0 => {
            let k = rng.random_range(2..=3);
            let items = (0..k)
                .map(|_| random_expr(rng, max_depth - 1, max_var))
                .collect();
            Expr::new(ExprKind::Add(items), span)
        }
        1 => {
            let k = rng.random_range(2..=3);
            let items = (0..k)
                .map(|_| random_expr(rng, max_depth - 1, max_var))
                .collect();
            Expr::new(ExprKind::Mul(items), span)
        }
        2 => Expr::new(
            ExprKind::Neg(Box::new(random_expr(rng, max_depth - 1, max_var))),
            span,
        ),
        _ => Expr::new(
            ExprKind::Inv(Box::new(random_expr(rng, max_depth - 1, max_var))),
            span,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::{counterexample_closed_form, COUNTEREXAMPLE_EXPR, COUNTEREXAMPLE_EXPR_EXPANDED};
    use crate::linalg::{trial_rng, IM};

    fn var(k: u32) -> Expr {
        Expr::new(ExprKind::Var(k), Span::new(0, 0))
    }

    fn konst(z: C64) -> Expr {
        Expr::new(ExprKind::Const(z), Span::new(0, 0))
    }

    #[test]
    fn parses_negated_inverse() {
        let e = parse("-inv(Z1)").unwrap();
        let expected = Expr::new(
            ExprKind::Neg(Box::new(Expr::new(
                ExprKind::Inv(Box::new(var(1))),
                Span::new(0, 0),
            ))),
            Span::new(0, 0),
        );
        assert_eq!(e, expected);
        assert_eq!(format(&expected), "-inv(Z1)");
    }

    #[test]
    fn parses_counterexample_component() {
        let e = parse(COUNTEREXAMPLE_EXPR_EXPANDED).unwrap();
        // -inv(Z2)*inv(...) : the leading minus binds to the first factor
        match &e.kind {
            ExprKind::Mul(items) => {
                assert_eq!(items.len(), 2);
                match &items[0].kind {
                    ExprKind::Neg(inner) => {
                        assert!(matches!(inner.kind, ExprKind::Inv(_)))
                    }
                    other => panic!("expected Neg(Inv) first, got {other:?}"),
                }
                assert!(matches!(items[1].kind, ExprKind::Inv(_)));
            }
            other => panic!("expected Mul at root, got {other:?}"),
        }
        let round = parse(&format(&e)).unwrap();
        assert_eq!(round, e);
    }

    #[test]
    fn reports_span_on_truncated_input() {
        match parse("inv(") {
            Err(NcratError::Syntax { span, .. }) => {
                assert_eq!(span.start, 4);
                assert_eq!(span.end, 4);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn literal_gluing_respects_products() {
        // one constant
        let e = parse("1 - 2i").unwrap();
        assert_eq!(e, konst(c(1.0, -2.0)));
        // a product: the imaginary literal starts a term
        let e = parse("1 - 2i*Z1").unwrap();
        match &e.kind {
            ExprKind::Add(items) => {
                assert_eq!(items.len(), 2);
                assert_eq!(items[0], konst(cr(1.0)));
                assert!(matches!(items[1].kind, ExprKind::Neg(_)));
            }
            other => panic!("expected Add, got {other:?}"),
        }
    }

    #[test]
    fn evaluates_scalar_arithmetic() {
        let e = parse("(1+2i)*Z1 - inv(Z2) + 3").unwrap();
        let z1 = c(0.4, 0.3);
        let z2 = c(-1.0, 2.0);
        let got = eval(
            &e,
            &[
                CMatrix::from_element(1, 1, z1),
                CMatrix::from_element(1, 1, z2),
            ],
        )
        .unwrap();
        let want = c(1.0, 2.0) * z1 - ONE / z2 + cr(3.0);
        assert!((got[(0, 0)] - want).norm() < 1e-14);
    }

    #[test]
    fn products_respect_written_order() {
        let mut rng = trial_rng(5, 0);
        let x = crate::linalg::ginibre(&mut rng, 2, 2);
        let y = crate::linalg::ginibre(&mut rng, 2, 2);
        let xy = eval(&parse("Z1*Z2").unwrap(), &[x.clone(), y.clone()]).unwrap();
        let yx = eval(&parse("Z2*Z1").unwrap(), &[x, y]).unwrap();
        assert!(crate::linalg::operator_norm(&(xy - yx)) > 1e-6);
    }

    #[test]
    fn unbound_variable_is_reported() {
        let e = parse("Z3").unwrap();
        match eval(&e, &[CMatrix::identity(2, 2)]) {
            Err(NcratError::UnboundVariable { index: 3, .. }) => {}
            other => panic!("expected unbound Z3, got {other:?}"),
        }
    }

    #[test]
    fn singular_inverse_is_reported_with_span() {
        let text = "Z1 + inv(Z1 - Z1)";
        let e = parse(text).unwrap();
        match eval(&e, &[CMatrix::identity(2, 2)]) {
            Err(NcratError::SingularInverse { span, .. }) => {
                assert_eq!(&text[span.start..span.end], "inv(Z1 - Z1)");
            }
            other => panic!("expected singular inverse, got {other:?}"),
        }
    }

    #[test]
    fn counterexample_expressions_match_closed_form() {
        let first = parse(COUNTEREXAMPLE_EXPR[0]).unwrap();
        let second = parse(COUNTEREXAMPLE_EXPR[1]).unwrap();
        let expanded = parse(COUNTEREXAMPLE_EXPR_EXPANDED).unwrap();
        let mut rng = trial_rng(9, 2);
        for _ in 0..50 {
            let z1 = c(rng.random_range(-2.0..2.0), rng.random_range(0.2..2.0));
            let z2 = c(rng.random_range(-2.0..2.0), rng.random_range(0.2..2.0));
            let vars = [
                CMatrix::from_element(1, 1, z1),
                CMatrix::from_element(1, 1, z2),
            ];
            let (f1, f2) = counterexample_closed_form(z1, z2).unwrap();
            let got1 = eval(&first, &vars).unwrap()[(0, 0)];
            let got2 = eval(&second, &vars).unwrap()[(0, 0)];
            let got2b = eval(&expanded, &vars).unwrap()[(0, 0)];
            assert!((got1 - f1).norm() < 1e-12);
            assert!((got2 - f2).norm() < 1e-12);
            assert!((got2b - f2).norm() < 1e-12);
        }
    }

    #[test]
    fn counterexample_expression_forms_agree_at_matrix_points() {
        let short = parse(COUNTEREXAMPLE_EXPR[1]).unwrap();
        let long = parse(COUNTEREXAMPLE_EXPR_EXPANDED).unwrap();
        let mut rng = trial_rng(10, 3);
        for _ in 0..10 {
            let margin = CMatrix::identity(3, 3).map(|x| x * c(0.0, 1.2));
            let z1 = crate::linalg::random_hermitian(&mut rng, 3) + margin.clone();
            let z2 = crate::linalg::random_hermitian(&mut rng, 3) + margin;
            let vars = [z1, z2];
            let a = eval(&short, &vars).unwrap();
            let b = eval(&long, &vars).unwrap();
            assert!(crate::linalg::operator_norm(&(a - b)) < 1e-10);
        }
    }

    #[test]
    fn format_parse_round_trips_random_asts() {
        let mut rng = trial_rng(11, 4);
        for trial in 0..1000 {
            let e = random_expr(&mut rng, 5, 3);
            let text = format(&e);
            let back = parse(&text).unwrap_or_else(|err| {
                panic!("trial {trial}: `{text}` failed to parse: {err}")
            });
            assert_eq!(back, e, "trial {trial}: `{text}`");
        }
    }

    #[test]
    fn direct_sums_pass_through_evaluation() {
        let mut rng = trial_rng(12, 5);
        let mut checked = 0;
        for _ in 0..200 {
            let e = random_expr(&mut rng, 4, 2);
            let x: Vec<CMatrix> = (0..2)
                .map(|_| {
                    crate::linalg::random_hermitian(&mut rng, 2)
                        + CMatrix::identity(2, 2).map(|v| v * c(0.0, 1.1))
                })
                .collect();
            let y: Vec<CMatrix> = (0..2)
                .map(|_| {
                    crate::linalg::random_hermitian(&mut rng, 2)
                        + CMatrix::identity(2, 2).map(|v| v * c(0.0, 1.3))
                })
                .collect();
            let sums: Vec<CMatrix> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| {
                    let mut s = CMatrix::zeros(4, 4);
                    s.view_mut((0, 0), (2, 2)).copy_from(a);
                    s.view_mut((2, 2), (2, 2)).copy_from(b);
                    s
                })
                .collect();
            let (ex, ey, es) = match (eval(&e, &x), eval(&e, &y), eval(&e, &sums)) {
                (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                _ => continue,
            };
            let mut want = CMatrix::zeros(4, 4);
            want.view_mut((0, 0), (2, 2)).copy_from(&ex);
            want.view_mut((2, 2), (2, 2)).copy_from(&ey);
            let scale = 1.0 + crate::linalg::operator_norm(&want);
            assert!(crate::linalg::operator_norm(&(es - want)) < 1e-9 * scale);
            checked += 1;
        }
        assert!(checked > 100, "only {checked} trials evaluated cleanly");
    }

    #[test]
    fn no_variables_means_scalar_context() {
        let e = parse("2 + 3i").unwrap();
        let got = eval(&e, &[]).unwrap();
        assert_eq!(got.nrows(), 1);
        assert!((got[(0, 0)] - c(2.0, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn imaginary_unit_forms() {
        assert_eq!(parse("i").unwrap(), konst(IM));
        assert_eq!(parse("-i").unwrap(), konst(-IM));
        assert_eq!(parse("2i").unwrap(), konst(c(0.0, 2.0)));
        assert_eq!(parse("1+i").unwrap(), konst(c(1.0, 1.0)));
        assert_eq!(parse("0.5-2.25i").unwrap(), konst(c(0.5, -2.25)));
    }
}
