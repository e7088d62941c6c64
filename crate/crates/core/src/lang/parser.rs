//! Recursive-descent parser for goal formulas and denoting expressions.
//!
//! ```text
//! goal   := ["exists" var ("," var)* "."] fluent ("&" fluent)*
//! fluent := "B(" phi "," prob ")" | "KRD(" term ")" | "BContents(" name "," prob ")"
//!         | "B(ExistsIn(" expr "," name ")," prob ")"
//! phi    := "den(" expr "," term ")" | rel "(" term ("," term)* ")"
//! expr   := "lambda" var "." body
//! body   := rel "(" var ")" | "and(" body "," body ")" | "or(" body "," body ")"
//!         | "exists(" var "," body ")"
//! ```
//!
//! Keywords are case-insensitive. Relation arguments inside a body may also
//! be constants.

use std::sync::Arc;

use thiserror::Error;

use super::ast::{DenotingExpr, Fluent, GoalFormula, Phi, Term};
use crate::belief::{Anchor, BeliefState, RelationSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("definite descriptions are not supported")]
    DefiniteDescription,
    #[error("probability {0} outside (0, 1]")]
    Probability(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
}

/// Name resolution available to the parser.
pub trait Symbols {
    fn relation_arity(&self, name: &str) -> Option<usize>;
    fn constant(&self, name: &str) -> Option<Anchor>;
}

impl Symbols for RelationSet {
    fn relation_arity(&self, name: &str) -> Option<usize> {
        self.lookup(name).map(|k| k.arity())
    }

    fn constant(&self, name: &str) -> Option<Anchor> {
        Anchor::parse_internal(name)
    }
}

impl Symbols for BeliefState {
    fn relation_arity(&self, name: &str) -> Option<usize> {
        self.relations.relation_arity(name)
    }

    fn constant(&self, name: &str) -> Option<Anchor> {
        self.resolve(name)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Dot,
    Amp,
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (sl, sc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '&' => Some(Tok::Amp),
            '.' if !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => Some(Tok::Dot),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line: sl, col: sc });
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || matches!(chars[i], '.' | 'e' | 'E' | '-' | '+')) {
                // only accept a sign right after an exponent marker
                if matches!(chars[i], '-' | '+') && !matches!(chars[i - 1], 'e' | 'E') {
                    break;
                }
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| ParseError {
                kind: ParseErrorKind::Syntax(format!("bad number `{text}`")),
                line: sl,
                col: sc,
            })?;
            out.push(Spanned { tok: Tok::Num(v), line: sl, col: sc });
        } else if c.is_alphanumeric() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Spanned {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: sl,
                col: sc,
            });
        } else {
            return Err(ParseError {
                kind: ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
                line: sl,
                col: sc,
            });
        }
        col += i - start;
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser<'a, S: Symbols + ?Sized> {
    toks: Vec<Spanned>,
    pos: usize,
    syms: &'a S,
    scope: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a, S: Symbols + ?Sized> Parser<'a, S> {
    fn new(src: &str, syms: &'a S) -> PResult<Self> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            syms,
            scope: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn err_here(&self, kind: ParseErrorKind) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError {
            kind,
            line: s.line,
            col: s.col,
        }
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.err_here(ParseErrorKind::Syntax(format!(
                "expected {want:?}, found {:?}",
                self.peek()
            ))))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.err_here(ParseErrorKind::Syntax(format!(
                "expected identifier, found {other:?}"
            )))),
        }
    }

    fn keyword_is(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.keyword_is(kw) {
            self.next();
            Ok(())
        } else {
            Err(self.err_here(ParseErrorKind::Syntax(format!(
                "expected `{kw}`, found {:?}",
                self.peek()
            ))))
        }
    }

    fn prob(&mut self) -> PResult<f64> {
        match self.peek().clone() {
            Tok::Num(v) => {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(self.err_here(ParseErrorKind::Probability(v)));
                }
                self.next();
                Ok(v)
            }
            other => Err(self.err_here(ParseErrorKind::Syntax(format!(
                "expected probability, found {other:?}"
            )))),
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let save = self.pos;
        let name = self.ident()?;
        if self.scope.contains(&name) {
            return Ok(Term::Var(name));
        }
        if let Some(a) = self.syms.constant(&name) {
            return Ok(Term::Const(a));
        }
        self.pos = save;
        Err(self.err_here(ParseErrorKind::UnboundVariable(name)))
    }

    fn region_name(&mut self) -> PResult<Term> {
        let save = self.pos;
        let name = self.ident()?;
        match self.syms.constant(&name) {
            Some(a) => Ok(Term::Const(a)),
            None if self.scope.contains(&name) => Ok(Term::Var(name)),
            None => {
                self.pos = save;
                Err(self.err_here(ParseErrorKind::UnboundVariable(name)))
            }
        }
    }

    fn rel_app(&mut self) -> PResult<(String, Vec<Term>)> {
        let save = self.pos;
        let name = self.ident()?.to_lowercase();
        let arity = self.syms.relation_arity(&name).ok_or_else(|| {
            let mut e = self.err_here(ParseErrorKind::UnknownRelation(name.clone()));
            e.col = self.toks[save].col;
            e.line = self.toks[save].line;
            e
        })?;
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.next();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        if args.len() != arity {
            self.pos = save;
            return Err(self.err_here(ParseErrorKind::Arity {
                name,
                expected: arity,
                got: args.len(),
            }));
        }
        Ok((name, args))
    }

    fn expr(&mut self) -> PResult<DenotingExpr> {
        if self.keyword_is("the") || self.keyword_is("iota") {
            return Err(self.err_here(ParseErrorKind::DefiniteDescription));
        }
        self.keyword("lambda")?;
        let v = self.ident()?;
        self.expect(Tok::Dot)?;
        self.scope.push(v.clone());
        let body = self.body();
        self.scope.pop();
        Ok(DenotingExpr::lambda(&v, body?))
    }

    fn body(&mut self) -> PResult<DenotingExpr> {
        let is_call = *self.peek_at(1) == Tok::LParen;
        if is_call && (self.keyword_is("and") || self.keyword_is("or")) {
            let is_and = self.keyword_is("and");
            self.next();
            self.expect(Tok::LParen)?;
            let a = self.body()?;
            self.expect(Tok::Comma)?;
            let b = self.body()?;
            self.expect(Tok::RParen)?;
            return Ok(if is_and {
                DenotingExpr::and(a, b)
            } else {
                DenotingExpr::or(a, b)
            });
        }
        if is_call && self.keyword_is("exists") {
            self.next();
            self.expect(Tok::LParen)?;
            let v = self.ident()?;
            self.expect(Tok::Comma)?;
            self.scope.push(v.clone());
            let b = self.body();
            self.scope.pop();
            self.expect(Tok::RParen)?;
            return Ok(DenotingExpr::exists(&v, b?));
        }
        if self.keyword_is("the") {
            return Err(self.err_here(ParseErrorKind::DefiniteDescription));
        }
        let (name, args) = self.rel_app()?;
        Ok(DenotingExpr::Rel { name, args })
    }

    fn fluent(&mut self) -> PResult<Fluent> {
        if self.keyword_is("KRD") {
            self.next();
            self.expect(Tok::LParen)?;
            let t = self.term()?;
            self.expect(Tok::RParen)?;
            return Ok(Fluent::Krd(t));
        }
        if self.keyword_is("BContents") {
            self.next();
            self.expect(Tok::LParen)?;
            let region = self.region_name()?;
            self.expect(Tok::Comma)?;
            let p = self.prob()?;
            self.expect(Tok::RParen)?;
            return Ok(Fluent::BContents { region, p });
        }
        self.keyword("B")?;
        self.expect(Tok::LParen)?;
        if self.keyword_is("ExistsIn") {
            self.next();
            self.expect(Tok::LParen)?;
            let expr = self.expr()?;
            self.expect(Tok::Comma)?;
            let region = self.region_name()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Comma)?;
            let p = self.prob()?;
            self.expect(Tok::RParen)?;
            return Ok(Fluent::ExistsIn {
                expr: Arc::new(expr),
                region,
                p,
            });
        }
        let phi = if self.keyword_is("den") && *self.peek_at(1) == Tok::LParen {
            self.next();
            self.expect(Tok::LParen)?;
            let e = self.expr()?;
            self.expect(Tok::Comma)?;
            let t = self.term()?;
            self.expect(Tok::RParen)?;
            Phi::Den(Arc::new(e), t)
        } else {
            let (name, args) = self.rel_app()?;
            Phi::Rel(name, args)
        };
        self.expect(Tok::Comma)?;
        let p = self.prob()?;
        self.expect(Tok::RParen)?;
        Ok(Fluent::BBool { phi, p })
    }

    fn goal(&mut self) -> PResult<GoalFormula> {
        let mut vars = Vec::new();
        if self.keyword_is("exists") && *self.peek_at(1) != Tok::LParen {
            self.next();
            vars.push(self.ident()?);
            while *self.peek() == Tok::Comma {
                self.next();
                vars.push(self.ident()?);
            }
            self.expect(Tok::Dot)?;
        }
        self.scope.extend(vars.iter().cloned());
        let mut fluents = vec![self.fluent()?];
        while *self.peek() == Tok::Amp {
            self.next();
            fluents.push(self.fluent()?);
        }
        self.expect(Tok::Eof)?;
        Ok(GoalFormula { vars, fluents })
    }
}

pub fn parse_goal<S: Symbols + ?Sized>(text: &str, syms: &S) -> Result<GoalFormula, ParseError> {
    Parser::new(text, syms)?.goal()
}

pub fn parse_expr<S: Symbols + ?Sized>(text: &str, syms: &S) -> Result<DenotingExpr, ParseError> {
    let mut p = Parser::new(text, syms)?;
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::RelationSet;
    use std::sync::Arc as StdArc;

    fn rels() -> RelationSet {
        RelationSet::with_defaults(vec!["can".into(), "box".into(), "soda".into()])
    }

    #[test]
    fn illustrative_expression() {
        let e = parse_expr("lambda x. and(can(x), and(green(x), heavy(x)))", &rels()).unwrap();
        let x = || vec![Term::var("x")];
        assert_eq!(
            e,
            DenotingExpr::lambda(
                "x",
                DenotingExpr::and(
                    DenotingExpr::rel("can", x()),
                    DenotingExpr::and(DenotingExpr::rel("green", x()), DenotingExpr::rel("heavy", x()))
                )
            )
        );
    }

    #[test]
    fn nested_goal_parses() {
        let mut b = BeliefState::new(StdArc::new(rels()));
        let t1 = b.add_region(Some("table1"), [0.0; 3], [1.0; 3], 0.0, 1.0);
        let g = parse_goal(
            "exists o. B(den(lambda x. green(x), o), 0.9) & B(in(o, table1), 0.9)",
            &b,
        )
        .unwrap();
        assert_eq!(g.vars, vec!["o".to_string()]);
        assert_eq!(g.fluents.len(), 2);
        assert_eq!(
            g.fluents[1],
            Fluent::BBool {
                phi: Phi::Rel("in".into(), vec![Term::var("o"), Term::Const(t1)]),
                p: 0.9
            }
        );
        // keywords are case-insensitive
        assert!(parse_goal("EXISTS o. b(DEN(LAMBDA x. Green(x), o), 0.9)", &b).is_ok());
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_expr("lambda x. green(y)", &rels()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnboundVariable("y".into()));
        assert_eq!((e.line, e.col), (1, 17));

        let e = parse_expr("lambda x. purple(x)", &rels()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownRelation("purple".into()));

        let e = parse_expr("lambda x.\n  and(green(x) red(x))", &rels()).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        assert_eq!(e.line, 2);

        let e = parse_expr("the x. green(x)", &rels()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DefiniteDescription);

        let e = parse_goal("B(den(lambda x. green(x), _o1_), 1.5)", &rels()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Probability(1.5));

        let e = parse_expr("lambda x. green(x, x)", &rels()).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Arity { .. }));
    }

    #[test]
    fn other_fluent_forms() {
        let g = parse_goal(
            "B(ExistsIn(lambda x. green(x), _reg2_), 0.1) & BContents(_reg2_, 0.9) & KRD(_o2_)",
            &rels(),
        )
        .unwrap();
        assert_eq!(g.fluents.len(), 3);
        assert_eq!(g.fluents[2], Fluent::Krd(Term::Const(Anchor::object(2))));
        let printed = g.to_string();
        assert_eq!(parse_goal(&printed, &rels()).unwrap(), g);
    }

    #[test]
    fn nested_exists_in_body() {
        let e = parse_expr("lambda x. exists(y, or(red(y), blue(x)))", &rels()).unwrap();
        assert!(e.is_closed());
        assert_eq!(parse_expr(&e.to_string(), &rels()).unwrap(), e);
    }
}
