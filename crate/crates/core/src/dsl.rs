//! The problem-description language: parser, canonical printer, and JSON
//! result emitters.
//!
//! A problem file declares coordinates, a deformation variable, fields,
//! bracket relations, per-order ansatz blocks with named unknown
//! coefficients, side constraints over those unknowns, and options:
//!
//! ```text
//! vars t v y;
//! deform t;
//! field E1 = -v^2*y^2 d/y;
//! relation [E1, E6] = -2*E1;
//! ansatz E1 order 1 d/v : A_1*v^2 + B_1*v + C_1;
//! constraint k_1 = B_1;
//! option max_order 2;
//! ```
//!
//! Identifiers appearing in an ansatz polynomial that are not coordinates are
//! unknowns, minted at the statement's order on first use; later statements
//! (including higher-order blocks and constraints) refer back to them by
//! name. Comments run from `#` to end of line.

use crate::extend::{
    AnsatzTemplate, ExtensionProblem, ExtensionResult, LieAlgebraSpec, ObstructionReport,
    VerificationReport,
};
use crate::linsolve::{AffineForm, FreePolicy, Provenance, SolutionSet, UnknownSet};
use crate::poly::{Coefficient, PolyError, Polynomial};
use crate::rational::Rational;
use crate::vars::{VarList, Variable};
use crate::vfield::VectorField;
use num_bigint::BigInt;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt;

/// Parse or semantic error with source position (1-based).
#[derive(Clone, Debug, PartialEq)]
pub enum DslError {
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
}

impl DslError {
    fn parse(line: usize, col: usize, message: impl Into<String>) -> DslError {
        DslError::Parse {
            line,
            col,
            message: message.into(),
        }
    }

    fn semantic(line: usize, col: usize, message: impl Into<String>) -> DslError {
        DslError::Semantic {
            line,
            col,
            message: message.into(),
        }
    }

    pub fn line(&self) -> usize {
        match self {
            DslError::Parse { line, .. } | DslError::Semantic { line, .. } => *line,
        }
    }

    pub fn col(&self) -> usize {
        match self {
            DslError::Parse { col, .. } | DslError::Semantic { col, .. } => *col,
        }
    }
}

impl fmt::Display for DslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DslError::Parse { line, col, message } => {
                write!(f, "parse error at {}:{}: {}", line, col, message)
            }
            DslError::Semantic { line, col, message } => {
                write!(f, "error at {}:{}: {}", line, col, message)
            }
        }
    }
}

impl std::error::Error for DslError {}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
    DSlash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Eq,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{}`", s),
            Tok::Int(n) => write!(f, "`{}`", n),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::DSlash => write!(f, "`d/`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Eq => write!(f, "`=`"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1usize;
    let mut col = 1usize;
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n = text.parse::<BigInt>().map_err(|e| {
                    DslError::parse(tline, tcol, format!("bad integer literal: {}", e))
                })?;
                out.push(Token {
                    tok: Tok::Int(n),
                    line: tline,
                    col: tcol,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                    col += 1;
                }
                let text: String = chars[start..i].iter().collect();
                if text == "d" && i < chars.len() && chars[i] == '/' {
                    i += 1;
                    col += 1;
                    out.push(Token {
                        tok: Tok::DSlash,
                        line: tline,
                        col: tcol,
                    });
                } else {
                    out.push(Token {
                        tok: Tok::Ident(text),
                        line: tline,
                        col: tcol,
                    });
                }
            }
            _ => {
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    '/' => Tok::Slash,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    ':' => Tok::Colon,
                    '=' => Tok::Eq,
                    other => {
                        return Err(DslError::parse(
                            tline,
                            tcol,
                            format!("unexpected character `{}`", other),
                        ))
                    }
                };
                i += 1;
                col += 1;
                out.push(Token {
                    tok,
                    line: tline,
                    col: tcol,
                });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Document
// ---------------------------------------------------------------------------

/// One bracket relation `[E_i, E_j] = sum c * E_k`, indices 0-based, `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub pair: (usize, usize),
    pub rhs: Vec<(Rational, usize)>,
}

/// One ansatz block: the `t^order`-coefficient polynomial of a component.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzBlock {
    pub field: usize,
    pub order: u32,
    pub component: Variable,
    pub poly: Polynomial<AffineForm>,
}

/// A fully resolved problem file.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ProblemDocument {
    pub var_names: Vec<String>,
    pub deform_name: Option<String>,
    pub fields: Vec<(String, VectorField<Rational>)>,
    pub relations: Vec<Relation>,
    pub ansatz_blocks: Vec<AnsatzBlock>,
    pub constraints: Vec<AffineForm>,
    pub max_order: Option<u32>,
    pub free_policy: Option<FreePolicy>,
    pub unknowns: UnknownSet,
}

impl ProblemDocument {
    pub fn var_list(&self) -> VarList {
        VarList::new(self.var_names.iter().cloned())
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|(n, _)| n == name)
    }

    pub fn field_names(&self) -> Vec<String> {
        self.fields.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn lie_spec(&self) -> LieAlgebraSpec {
        let mut relations = BTreeMap::new();
        for r in &self.relations {
            relations.insert(r.pair, r.rhs.clone());
        }
        LieAlgebraSpec::new(self.field_names(), relations)
    }

    pub fn base_fields(&self) -> Vec<VectorField<Rational>> {
        self.fields.iter().map(|(_, f)| f.clone()).collect()
    }
}

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum Atom {
    Var(Variable),
    Form(AffineForm),
}

trait IdentResolver {
    fn resolve(&mut self, name: &str, line: usize, col: usize) -> Result<Atom, DslError>;
}

struct VarsOnly<'a> {
    vars: &'a VarList,
}

impl IdentResolver for VarsOnly<'_> {
    fn resolve(&mut self, name: &str, line: usize, col: usize) -> Result<Atom, DslError> {
        match self.vars.var(name) {
            Some(v) => Ok(Atom::Var(v)),
            None => Err(DslError::semantic(
                line,
                col,
                format!("undeclared variable `{}`", name),
            )),
        }
    }
}

struct AnsatzResolver<'a> {
    vars: &'a VarList,
    deform: Variable,
    unknowns: &'a mut UnknownSet,
    order: u32,
}

impl IdentResolver for AnsatzResolver<'_> {
    fn resolve(&mut self, name: &str, line: usize, col: usize) -> Result<Atom, DslError> {
        if let Some(v) = self.vars.var(name) {
            if v == self.deform {
                return Err(DslError::semantic(
                    line,
                    col,
                    "the deformation variable cannot appear inside an ansatz block",
                ));
            }
            return Ok(Atom::Var(v));
        }
        if let Some(u) = self.unknowns.get(name) {
            if u.order_tag() > self.order {
                return Err(DslError::semantic(
                    line,
                    col,
                    format!(
                        "unknown `{}` belongs to order {} and cannot appear at order {}",
                        name,
                        u.order_tag(),
                        self.order
                    ),
                ));
            }
            return Ok(Atom::Form(AffineForm::unknown(u.clone())));
        }
        let u = self.unknowns.mint(name, self.order).expect("name checked");
        Ok(Atom::Form(AffineForm::unknown(u)))
    }
}

struct ConstraintResolver<'a> {
    vars: &'a VarList,
    unknowns: &'a UnknownSet,
}

impl IdentResolver for ConstraintResolver<'_> {
    fn resolve(&mut self, name: &str, line: usize, col: usize) -> Result<Atom, DslError> {
        if self.vars.var(name).is_some() {
            return Err(DslError::semantic(
                line,
                col,
                format!(
                    "coordinate variable `{}` cannot appear in a constraint",
                    name
                ),
            ));
        }
        match self.unknowns.get(name) {
            Some(u) => Ok(Atom::Form(AffineForm::unknown(u.clone()))),
            None => Err(DslError::semantic(
                line,
                col,
                format!("undeclared unknown `{}`", name),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Token cursor and expression grammar
// ---------------------------------------------------------------------------

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn end_pos(&self) -> (usize, usize) {
        self.tokens
            .last()
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1))
    }

    fn here(&self) -> (usize, usize) {
        self.peek()
            .map(|t| (t.line, t.col))
            .unwrap_or_else(|| self.end_pos())
    }

    fn next(&mut self, what: &str) -> Result<Token, DslError> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => {
                let (line, col) = self.end_pos();
                Err(DslError::parse(
                    line,
                    col,
                    format!("unexpected end of input, expected {}", what),
                ))
            }
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, DslError> {
        let t = self.next(&tok.to_string())?;
        if t.tok == tok {
            Ok(t)
        } else {
            Err(DslError::parse(
                t.line,
                t.col,
                format!("expected {}, found {}", tok, t.tok),
            ))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize, usize), DslError> {
        let t = self.next(what)?;
        match t.tok {
            Tok::Ident(s) => Ok((s, t.line, t.col)),
            other => Err(DslError::parse(
                t.line,
                t.col,
                format!("expected {}, found {}", what, other),
            )),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if let Some(t) = self.peek() {
            if &t.tok == tok {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    /// `INT ['/' INT]` after the numerator token has been consumed.
    fn finish_rational(&mut self, num: BigInt) -> Result<Rational, DslError> {
        let mut den = BigInt::from(1);
        if self.eat(&Tok::Slash) {
            let d = self.next("a denominator")?;
            den = match d.tok {
                Tok::Int(n) => n,
                other => {
                    return Err(DslError::parse(
                        d.line,
                        d.col,
                        format!("expected a denominator, found {}", other),
                    ))
                }
            };
            if den == BigInt::from(0) {
                return Err(DslError::semantic(d.line, d.col, "zero denominator"));
            }
        }
        Ok(Rational::from_big(num, den))
    }
}

fn mul_error(e: PolyError, line: usize, col: usize) -> DslError {
    match e {
        PolyError::NonlinearTerm => DslError::semantic(
            line,
            col,
            "nonlinear expression: product of two unknown-bearing factors",
        ),
        PolyError::DomainMismatch => DslError::semantic(line, col, "mixed variable lists"),
    }
}

/// `polyexpr := ['+'|'-'] term (('+'|'-') term)*`
fn parse_polyexpr(
    cur: &mut Cursor,
    vars: &VarList,
    resolver: &mut dyn IdentResolver,
) -> Result<Polynomial<AffineForm>, DslError> {
    let negate = if cur.eat(&Tok::Minus) {
        true
    } else {
        cur.eat(&Tok::Plus);
        false
    };
    let mut acc = parse_term(cur, vars, resolver)?;
    if negate {
        acc = acc.neg();
    }
    loop {
        let (line, col) = cur.here();
        if cur.eat(&Tok::Plus) {
            let t = parse_term(cur, vars, resolver)?;
            acc = acc.add(&t).map_err(|e| mul_error(e, line, col))?;
        } else if cur.eat(&Tok::Minus) {
            let t = parse_term(cur, vars, resolver)?;
            acc = acc.sub(&t).map_err(|e| mul_error(e, line, col))?;
        } else {
            break;
        }
    }
    Ok(acc)
}

/// `term := factor ('*' factor)*`
fn parse_term(
    cur: &mut Cursor,
    vars: &VarList,
    resolver: &mut dyn IdentResolver,
) -> Result<Polynomial<AffineForm>, DslError> {
    let mut acc = parse_factor(cur, vars, resolver)?;
    while cur.eat(&Tok::Star) {
        let (line, col) = cur.here();
        let f = parse_factor(cur, vars, resolver)?;
        acc = acc.mul(&f, None).map_err(|e| mul_error(e, line, col))?;
    }
    Ok(acc)
}

/// `factor := primary ['^' INT]`
fn parse_factor(
    cur: &mut Cursor,
    vars: &VarList,
    resolver: &mut dyn IdentResolver,
) -> Result<Polynomial<AffineForm>, DslError> {
    let base = parse_primary(cur, vars, resolver)?;
    if cur.eat(&Tok::Caret) {
        let t = cur.next("an exponent")?;
        let e = match t.tok {
            Tok::Int(n) => u32::try_from(n)
                .map_err(|_| DslError::parse(t.line, t.col, "exponent too large"))?,
            other => {
                return Err(DslError::parse(
                    t.line,
                    t.col,
                    format!("expected an exponent, found {}", other),
                ))
            }
        };
        let mut acc = Polynomial::constant(vars, AffineForm::one());
        for _ in 0..e {
            acc = acc
                .mul(&base, None)
                .map_err(|err| mul_error(err, t.line, t.col))?;
        }
        return Ok(acc);
    }
    Ok(base)
}

/// `primary := INT ['/' INT] | IDENT | '(' polyexpr ')'`
fn parse_primary(
    cur: &mut Cursor,
    vars: &VarList,
    resolver: &mut dyn IdentResolver,
) -> Result<Polynomial<AffineForm>, DslError> {
    let t = cur.next("a number, identifier or `(`")?;
    match t.tok {
        Tok::Int(num) => {
            let r = cur.finish_rational(num)?;
            Ok(Polynomial::constant(vars, AffineForm::constant(r)))
        }
        Tok::Ident(name) => match resolver.resolve(&name, t.line, t.col)? {
            Atom::Var(v) => Ok(Polynomial::variable(vars, v)),
            Atom::Form(form) => Ok(Polynomial::constant(vars, form)),
        },
        Tok::LParen => {
            let inner = parse_polyexpr(cur, vars, resolver)?;
            cur.expect(Tok::RParen)?;
            Ok(inner)
        }
        other => Err(DslError::parse(
            t.line,
            t.col,
            format!("expected a number, identifier or `(`, found {}", other),
        )),
    }
}

// ---------------------------------------------------------------------------
// Statement parser
// ---------------------------------------------------------------------------

struct Parser {
    cur: Cursor,
    doc: ProblemDocument,
    vars: Option<VarList>,
    deform: Option<Variable>,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Parser {
        Parser {
            cur: Cursor { tokens, pos: 0 },
            doc: ProblemDocument::default(),
            vars: None,
            deform: None,
        }
    }

    fn var_list(&self, line: usize, col: usize) -> Result<VarList, DslError> {
        self.vars
            .clone()
            .ok_or_else(|| DslError::semantic(line, col, "no variables declared yet"))
    }

    fn parse_vars(&mut self, line: usize, col: usize) -> Result<(), DslError> {
        if self.vars.is_some() {
            return Err(DslError::semantic(line, col, "duplicate vars declaration"));
        }
        let mut names = Vec::new();
        loop {
            let (name, l, c) = self.cur.expect_ident("a variable name")?;
            if names.contains(&name) {
                return Err(DslError::semantic(
                    l,
                    c,
                    format!("duplicate variable `{}`", name),
                ));
            }
            names.push(name);
            if self.cur.eat(&Tok::Semi) {
                break;
            }
        }
        self.doc.var_names = names.clone();
        self.vars = Some(VarList::new(names));
        Ok(())
    }

    fn parse_deform(&mut self) -> Result<(), DslError> {
        let (name, l, c) = self.cur.expect_ident("the deformation variable")?;
        if self.doc.deform_name.is_some() {
            return Err(DslError::semantic(l, c, "duplicate deform declaration"));
        }
        let vars = self.var_list(l, c)?;
        let v = vars
            .var(&name)
            .ok_or_else(|| DslError::semantic(l, c, format!("undeclared variable `{}`", name)))?;
        self.doc.deform_name = Some(name);
        self.deform = Some(v);
        self.cur.expect(Tok::Semi)?;
        Ok(())
    }

    fn parse_field(&mut self) -> Result<(), DslError> {
        let (name, l, c) = self.cur.expect_ident("a field name")?;
        if self.doc.field_index(&name).is_some() {
            return Err(DslError::semantic(
                l,
                c,
                format!("duplicate field `{}`", name),
            ));
        }
        let vars = self.var_list(l, c)?;
        self.cur.expect(Tok::Eq)?;

        let mut components: Vec<(Variable, Polynomial<AffineForm>)> = Vec::new();
        let mut negate = self.cur.eat(&Tok::Minus);
        if !negate {
            self.cur.eat(&Tok::Plus);
        }
        loop {
            let mut resolver = VarsOnly { vars: &vars };
            let mut poly = parse_term(&mut self.cur, &vars, &mut resolver)?;
            if negate {
                poly = poly.neg();
            }
            self.cur.expect(Tok::DSlash)?;
            let (vname, vl, vc) = self.cur.expect_ident("a variable after `d/`")?;
            let var = vars.var(&vname).ok_or_else(|| {
                DslError::semantic(vl, vc, format!("undeclared variable `{}`", vname))
            })?;
            components.push((var, poly));
            if self.cur.eat(&Tok::Semi) {
                break;
            } else if self.cur.eat(&Tok::Plus) {
                negate = false;
            } else if self.cur.eat(&Tok::Minus) {
                negate = true;
            } else {
                let (line, col) = self.cur.here();
                return Err(DslError::parse(line, col, "expected `+`, `-` or `;`"));
            }
        }

        let mut rational_components = Vec::new();
        for (x, p) in components {
            let q = p
                .try_map_coefficients(|form| form.as_constant().cloned().ok_or(()))
                .map_err(|_| DslError::semantic(l, c, "unknowns are not allowed in a field"))?;
            rational_components.push((x, q));
        }
        let field = VectorField::new(&vars, rational_components)
            .map_err(|e| DslError::semantic(l, c, e.to_string()))?;
        self.doc.fields.push((name, field));
        Ok(())
    }

    fn parse_relation(&mut self) -> Result<(), DslError> {
        self.cur.expect(Tok::LBracket)?;
        let (a, al, ac) = self.cur.expect_ident("a field name")?;
        self.cur.expect(Tok::Comma)?;
        let (b, bl, bc) = self.cur.expect_ident("a field name")?;
        self.cur.expect(Tok::RBracket)?;
        self.cur.expect(Tok::Eq)?;

        let ia = self
            .doc
            .field_index(&a)
            .ok_or_else(|| DslError::semantic(al, ac, format!("undeclared field `{}`", a)))?;
        let ib = self
            .doc
            .field_index(&b)
            .ok_or_else(|| DslError::semantic(bl, bc, format!("undeclared field `{}`", b)))?;
        if ia == ib {
            return Err(DslError::semantic(
                al,
                ac,
                "a bracket of a field with itself is identically zero",
            ));
        }

        // Right-hand side: 0 or a signed combination of field names.
        let mut rhs: BTreeMap<usize, Rational> = BTreeMap::new();
        if let Some(t) = self.cur.peek() {
            if t.tok == Tok::Int(BigInt::from(0)) {
                self.cur.pos += 1;
                self.cur.expect(Tok::Semi)?;
                return self.finish_relation(ia, ib, rhs, al, ac);
            }
        }
        let mut negate = self.cur.eat(&Tok::Minus);
        if !negate {
            self.cur.eat(&Tok::Plus);
        }
        loop {
            let t = self.cur.next("a coefficient or field name")?;
            let (coeff, name, nl, nc) = match t.tok {
                Tok::Int(num) => {
                    let r = self.cur.finish_rational(num)?;
                    self.cur.expect(Tok::Star)?;
                    let (name, nl, nc) = self.cur.expect_ident("a field name")?;
                    (r, name, nl, nc)
                }
                Tok::Ident(name) => (Rational::one(), name, t.line, t.col),
                other => {
                    return Err(DslError::parse(
                        t.line,
                        t.col,
                        format!("expected a coefficient or field name, found {}", other),
                    ))
                }
            };
            let k = self.doc.field_index(&name).ok_or_else(|| {
                DslError::semantic(nl, nc, format!("undeclared field `{}`", name))
            })?;
            let coeff = if negate { -&coeff } else { coeff };
            let entry = rhs.entry(k).or_insert_with(Rational::zero);
            *entry = &*entry + &coeff;

            if self.cur.eat(&Tok::Semi) {
                break;
            } else if self.cur.eat(&Tok::Plus) {
                negate = false;
            } else if self.cur.eat(&Tok::Minus) {
                negate = true;
            } else {
                let (line, col) = self.cur.here();
                return Err(DslError::parse(line, col, "expected `+`, `-` or `;`"));
            }
        }
        self.finish_relation(ia, ib, rhs, al, ac)
    }

    fn finish_relation(
        &mut self,
        ia: usize,
        ib: usize,
        rhs: BTreeMap<usize, Rational>,
        line: usize,
        col: usize,
    ) -> Result<(), DslError> {
        // Normalise to i < j; [B, A] = -[A, B].
        let (pair, flip) = if ia < ib {
            ((ia, ib), false)
        } else {
            ((ib, ia), true)
        };
        if self.doc.relations.iter().any(|r| r.pair == pair) {
            return Err(DslError::semantic(
                line,
                col,
                "duplicate relation for this pair of fields",
            ));
        }
        let rhs: Vec<(Rational, usize)> = rhs
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (if flip { -&c } else { c }, k))
            .collect();
        self.doc.relations.push(Relation { pair, rhs });
        Ok(())
    }

    fn parse_ansatz(&mut self) -> Result<(), DslError> {
        let (fname, fl, fc) = self.cur.expect_ident("a field name")?;
        let field = self
            .doc
            .field_index(&fname)
            .ok_or_else(|| DslError::semantic(fl, fc, format!("undeclared field `{}`", fname)))?;
        let (kw, kl, kc) = self.cur.expect_ident("`order`")?;
        if kw != "order" {
            return Err(DslError::parse(kl, kc, "expected `order`"));
        }
        let t = self.cur.next("an order")?;
        let order = match t.tok {
            Tok::Int(n) => {
                u32::try_from(n).map_err(|_| DslError::parse(t.line, t.col, "order too large"))?
            }
            other => {
                return Err(DslError::parse(
                    t.line,
                    t.col,
                    format!("expected an order, found {}", other),
                ))
            }
        };
        if order == 0 {
            return Err(DslError::semantic(
                t.line,
                t.col,
                "ansatz order must be at least 1",
            ));
        }
        self.cur.expect(Tok::DSlash)?;
        let (vname, vl, vc) = self.cur.expect_ident("a variable after `d/`")?;
        let vars = self.var_list(vl, vc)?;
        let component = vars.var(&vname).ok_or_else(|| {
            DslError::semantic(vl, vc, format!("undeclared variable `{}`", vname))
        })?;
        let deform = self
            .deform
            .ok_or_else(|| DslError::semantic(vl, vc, "an ansatz requires a deform declaration"))?;
        if self
            .doc
            .ansatz_blocks
            .iter()
            .any(|b| b.field == field && b.order == order && b.component == component)
        {
            return Err(DslError::semantic(
                fl,
                fc,
                "duplicate ansatz block for this field, order and component",
            ));
        }
        self.cur.expect(Tok::Colon)?;
        let mut resolver = AnsatzResolver {
            vars: &vars,
            deform,
            unknowns: &mut self.doc.unknowns,
            order,
        };
        let poly = parse_polyexpr(&mut self.cur, &vars, &mut resolver)?;
        self.cur.expect(Tok::Semi)?;
        self.doc.ansatz_blocks.push(AnsatzBlock {
            field,
            order,
            component,
            poly,
        });
        Ok(())
    }

    fn parse_constraint(&mut self) -> Result<(), DslError> {
        let (line, col) = self.cur.here();
        let vars = self.var_list(line, col)?;
        let lhs = {
            let mut resolver = ConstraintResolver {
                vars: &vars,
                unknowns: &self.doc.unknowns,
            };
            parse_polyexpr(&mut self.cur, &vars, &mut resolver)?
        };
        self.cur.expect(Tok::Eq)?;
        let rhs = {
            let mut resolver = ConstraintResolver {
                vars: &vars,
                unknowns: &self.doc.unknowns,
            };
            parse_polyexpr(&mut self.cur, &vars, &mut resolver)?
        };
        self.cur.expect(Tok::Semi)?;
        let diff = lhs
            .sub(&rhs)
            .map_err(|_| DslError::semantic(line, col, "mixed variable lists"))?;
        let form = constant_form(&diff).ok_or_else(|| {
            DslError::semantic(line, col, "constraints must not involve coordinates")
        })?;
        if form.as_constant().is_some() {
            return Err(DslError::semantic(
                line,
                col,
                "constraint mentions no unknown",
            ));
        }
        self.doc.constraints.push(form);
        Ok(())
    }

    fn parse_option(&mut self) -> Result<(), DslError> {
        let (name, l, c) = self.cur.expect_ident("an option name")?;
        match name.as_str() {
            "max_order" => {
                let t = self.cur.next("an order")?;
                let n = match t.tok {
                    Tok::Int(n) => u32::try_from(n)
                        .map_err(|_| DslError::parse(t.line, t.col, "order too large"))?,
                    other => {
                        return Err(DslError::parse(
                            t.line,
                            t.col,
                            format!("expected an order, found {}", other),
                        ))
                    }
                };
                if self.doc.max_order.is_some() {
                    return Err(DslError::semantic(l, c, "duplicate max_order option"));
                }
                self.doc.max_order = Some(n);
            }
            "free_policy" => {
                let (value, vl, vc) = self.cur.expect_ident("`zero_fill` or `keep_symbolic`")?;
                let policy = match value.as_str() {
                    "zero_fill" => FreePolicy::ZeroFill,
                    "keep_symbolic" => FreePolicy::KeepSymbolic,
                    other => {
                        return Err(DslError::semantic(
                            vl,
                            vc,
                            format!("unknown free policy `{}`", other),
                        ))
                    }
                };
                if self.doc.free_policy.is_some() {
                    return Err(DslError::semantic(l, c, "duplicate free_policy option"));
                }
                self.doc.free_policy = Some(policy);
            }
            other => {
                return Err(DslError::semantic(
                    l,
                    c,
                    format!("unknown option `{}`", other),
                ))
            }
        }
        self.cur.expect(Tok::Semi)?;
        Ok(())
    }

    fn parse_document(mut self) -> Result<ProblemDocument, DslError> {
        while !self.cur.at_end() {
            let (head, l, c) = self.cur.expect_ident("a statement")?;
            match head.as_str() {
                "vars" => self.parse_vars(l, c)?,
                "deform" => self.parse_deform()?,
                "field" => self.parse_field()?,
                "relation" => self.parse_relation()?,
                "ansatz" => self.parse_ansatz()?,
                "constraint" => self.parse_constraint()?,
                "option" => self.parse_option()?,
                other => {
                    return Err(DslError::parse(
                        l,
                        c,
                        format!("unknown statement `{}`", other),
                    ))
                }
            }
        }
        // Canonical block order, independent of file order.
        self.doc
            .ansatz_blocks
            .sort_by_key(|b| (b.order, b.field, b.component));
        Ok(self.doc)
    }
}

/// The constant-monomial coefficient, provided no coordinate appears.
fn constant_form(p: &Polynomial<AffineForm>) -> Option<AffineForm> {
    let mut out = AffineForm::zero();
    for (m, c) in p.terms() {
        if !m.is_one() {
            return None;
        }
        out = out.add(c);
    }
    Some(out)
}

/// Parses a problem document.
pub fn parse(text: &str) -> Result<ProblemDocument, DslError> {
    Parser::new(lex(text)?).parse_document()
}

/// Parses a rational-coefficient polynomial over the given variables; the
/// canonical printer's output parses back to the same polynomial.
pub fn parse_polynomial(text: &str, vars: &VarList) -> Result<Polynomial<Rational>, DslError> {
    let tokens = lex(text)?;
    let mut cur = Cursor { tokens, pos: 0 };
    let mut resolver = VarsOnly { vars };
    let poly = parse_polyexpr(&mut cur, vars, &mut resolver)?;
    if !cur.at_end() {
        let t = cur.peek().unwrap();
        return Err(DslError::parse(
            t.line,
            t.col,
            format!("unexpected {}", t.tok),
        ));
    }
    poly.try_map_coefficients(|form| form.as_constant().cloned().ok_or(()))
        .map_err(|_| DslError::semantic(1, 1, "unexpected unknowns in polynomial"))
}

// ---------------------------------------------------------------------------
// Canonical printer
// ---------------------------------------------------------------------------

/// Canonical text form; `parse(print(doc)) == doc` and printing is a fixed
/// point on its own output.
pub fn print(doc: &ProblemDocument) -> String {
    let mut out = String::new();
    if !doc.var_names.is_empty() {
        out.push_str(&format!("vars {};\n", doc.var_names.join(" ")));
    }
    if let Some(d) = &doc.deform_name {
        out.push_str(&format!("deform {};\n", d));
    }
    let vars = doc.var_list();
    for (name, field) in &doc.fields {
        let body = if field.is_zero() {
            format!(
                "(0) d/{}",
                doc.var_names.first().map(String::as_str).unwrap_or("t")
            )
        } else {
            field
                .components()
                .map(|(x, p)| format!("({}) d/{}", p, vars.name(x)))
                .collect::<Vec<_>>()
                .join(" + ")
        };
        out.push_str(&format!("field {} = {};\n", name, body));
    }
    for r in &doc.relations {
        let lhs = format!("[{}, {}]", doc.fields[r.pair.0].0, doc.fields[r.pair.1].0);
        let rhs = if r.rhs.is_empty() {
            "0".to_string()
        } else {
            let mut s = String::new();
            for (i, (c, k)) in r.rhs.iter().enumerate() {
                let name = &doc.fields[*k].0;
                let neg = c.is_negative();
                let a = c.abs();
                if i == 0 {
                    if neg {
                        s.push('-');
                    }
                } else if neg {
                    s.push_str(" - ");
                } else {
                    s.push_str(" + ");
                }
                if a.is_one() {
                    s.push_str(name);
                } else {
                    s.push_str(&format!("{}*{}", a, name));
                }
            }
            s
        };
        out.push_str(&format!("relation {} = {};\n", lhs, rhs));
    }
    for b in &doc.ansatz_blocks {
        out.push_str(&format!(
            "ansatz {} order {} d/{} : {};\n",
            doc.fields[b.field].0,
            b.order,
            vars.name(b.component),
            b.poly
        ));
    }
    for form in &doc.constraints {
        out.push_str(&format!("constraint {} = 0;\n", form));
    }
    if let Some(n) = doc.max_order {
        out.push_str(&format!("option max_order {};\n", n));
    }
    if let Some(p) = doc.free_policy {
        let name = match p {
            FreePolicy::ZeroFill => "zero_fill",
            FreePolicy::KeepSymbolic => "keep_symbolic",
        };
        out.push_str(&format!("option free_policy {};\n", name));
    }
    out
}

// ---------------------------------------------------------------------------
// Problem assembly
// ---------------------------------------------------------------------------

/// Builds the extension problem, with optional command-line overrides taking
/// precedence over the document's options. The default maximal order is 2.
pub fn to_problem(
    doc: &ProblemDocument,
    max_order: Option<u32>,
    free_policy: Option<FreePolicy>,
) -> Result<ExtensionProblem, DslError> {
    let vars = doc.var_list();
    let deform_name = doc
        .deform_name
        .as_ref()
        .ok_or_else(|| DslError::semantic(1, 1, "no deform variable declared"))?;
    let deform = vars.var(deform_name).expect("deform is declared");
    if doc.fields.is_empty() {
        return Err(DslError::semantic(1, 1, "no fields declared"));
    }
    let mut blocks = BTreeMap::new();
    for b in &doc.ansatz_blocks {
        blocks.insert((b.field, b.order, b.component), b.poly.clone());
    }
    Ok(ExtensionProblem {
        vars,
        deform,
        base_fields: doc.base_fields(),
        spec: doc.lie_spec(),
        ansatz: AnsatzTemplate {
            blocks,
            side_constraints: doc.constraints.clone(),
        },
        unknowns: doc.unknowns.clone(),
        max_order: max_order.or(doc.max_order).unwrap_or(2),
        free_policy: free_policy
            .or(doc.free_policy)
            .unwrap_or(FreePolicy::ZeroFill),
    })
}

// ---------------------------------------------------------------------------
// JSON emission
// ---------------------------------------------------------------------------

fn solution_json(s: &SolutionSet) -> Value {
    match s {
        SolutionSet::Solved { assignments, free } => {
            let mut m = Map::new();
            m.insert("status".into(), json!("solved"));
            let mut a = Map::new();
            for (u, form) in assignments {
                a.insert(u.name().to_string(), json!(form.to_string()));
            }
            m.insert("assignments".into(), Value::Object(a));
            m.insert(
                "free".into(),
                Value::Array(free.iter().map(|u| json!(u.name())).collect()),
            );
            Value::Object(m)
        }
        SolutionSet::Inconsistent {
            certificate,
            residual_constant,
        } => {
            let mut m = Map::new();
            m.insert("status".into(), json!("inconsistent"));
            m.insert("certificate".into(), certificate_json(certificate));
            m.insert("residual".into(), json!(residual_constant.to_string()));
            Value::Object(m)
        }
    }
}

fn certificate_json(certificate: &[(usize, Rational)]) -> Value {
    Value::Array(
        certificate
            .iter()
            .map(|(idx, mult)| json!([idx, mult.to_string()]))
            .collect(),
    )
}

/// Renders a solution set in the documented JSON shape.
pub fn solution_set_json(s: &SolutionSet) -> String {
    pretty(&solution_json(s))
}

fn provenance_string(p: &Provenance, problem: &ExtensionProblem) -> String {
    match p {
        Provenance::Bracket {
            relation,
            component,
            monomial,
        } => format!(
            "relation [{}, {}], d/{}, {}",
            problem.spec.field_name(relation.0),
            problem.spec.field_name(relation.1),
            problem.vars.name(*component),
            monomial.display_with(&problem.vars)
        ),
        Provenance::Side { order, index } => {
            format!("side constraint #{} at order {}", index + 1, order)
        }
        Provenance::Given { index } => format!("constraint #{}", index + 1),
    }
}

fn obstruction_json(report: &ObstructionReport, problem: &ExtensionProblem) -> Value {
    let mut m = Map::new();
    m.insert("order".into(), json!(report.order));
    m.insert(
        "relation".into(),
        json!([
            problem.spec.field_name(report.failing_relation.0),
            problem.spec.field_name(report.failing_relation.1)
        ]),
    );
    m.insert(
        "component".into(),
        json!(problem.vars.name(report.component)),
    );
    m.insert("residual".into(), json!(report.residual.to_string()));
    m.insert("certificate".into(), certificate_json(&report.certificate));
    m.insert(
        "residual_constant".into(),
        json!(report.residual_constant.to_string()),
    );
    m.insert(
        "inconsistent".into(),
        Value::Array(
            report
                .inconsistent_provenances
                .iter()
                .map(|p| json!(provenance_string(p, problem)))
                .collect(),
        ),
    );
    Value::Object(m)
}

/// Full extension run in JSON.
pub fn extension_json(result: &ExtensionResult, problem: &ExtensionProblem) -> String {
    let mut m = Map::new();
    m.insert("command".into(), json!("extend"));
    m.insert(
        "status".into(),
        json!(if result.obstruction.is_some() {
            "obstructed"
        } else {
            "solved"
        }),
    );
    if let Some(report) = &result.obstruction {
        m.insert("order".into(), json!(report.order));
    }
    m.insert("achieved_order".into(), json!(result.achieved_order));
    m.insert("max_order".into(), json!(problem.max_order));
    let mut orders = Vec::new();
    for stage in &result.stages {
        let mut s = Map::new();
        s.insert("order".into(), json!(stage.order));
        let mut fields = Map::new();
        for (name, field) in problem.spec.field_names().iter().zip(&stage.fields) {
            fields.insert(name.clone(), json!(field.to_string()));
        }
        s.insert("fields".into(), Value::Object(fields));
        let solution = SolutionSet::Solved {
            assignments: stage.assignments.clone(),
            free: stage.free.clone(),
        };
        s.insert("solution".into(), solution_json(&solution));
        let mut pinned = Map::new();
        for (u, value) in &stage.pinned {
            pinned.insert(u.name().to_string(), json!(value.to_string()));
        }
        s.insert("pinned".into(), Value::Object(pinned));
        orders.push(Value::Object(s));
    }
    m.insert("orders".into(), Value::Array(orders));
    if let Some(report) = &result.obstruction {
        m.insert("obstruction".into(), obstruction_json(report, problem));
    }
    pretty(&Value::Object(m))
}

/// Verification report in JSON.
pub fn verification_json<C: Coefficient>(
    report: &VerificationReport<C>,
    field_names: &[String],
) -> String {
    let mut m = Map::new();
    m.insert("command".into(), json!("verify"));
    m.insert(
        "status".into(),
        json!(if report.all_hold() { "ok" } else { "failed" }),
    );
    m.insert(
        "relations_checked".into(),
        json!(report.relations_checked()),
    );
    let failures: Vec<Value> = report
        .failures()
        .map(|check| {
            let mut f = Map::new();
            f.insert(
                "relation".into(),
                json!([
                    field_names[check.pair.0].as_str(),
                    field_names[check.pair.1].as_str()
                ]),
            );
            f.insert("difference".into(), json!(check.difference.to_string()));
            Value::Object(f)
        })
        .collect();
    m.insert("failures".into(), Value::Array(failures));
    pretty(&Value::Object(m))
}

/// Bracket of two named fields in JSON.
pub fn bracket_json(a: &str, b: &str, bracket: &VectorField<Rational>) -> String {
    let mut m = Map::new();
    m.insert("command".into(), json!("bracket"));
    m.insert("fields".into(), json!([a, b]));
    m.insert("bracket".into(), json!(bracket.to_string()));
    pretty(&Value::Object(m))
}

/// Parse-check outcome in JSON.
pub fn parse_check_json() -> String {
    pretty(&json!({"command": "parse-check", "status": "ok"}))
}

/// Human-readable provenance line, used by reports.
pub fn describe_provenance(p: &Provenance, problem: &ExtensionProblem) -> String {
    provenance_string(p, problem)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}
