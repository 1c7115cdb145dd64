//! The theory file format: a structured text format declaring wire types,
//! boxes with backend payloads, circuits, causal orders, and skeletons.
//!
//! Parsing is deterministic and order-preserving; `serialize` emits a
//! canonical normal form, so `serialize(parse(serialize(x))) ==
//! serialize(x)` byte for byte. The grammar ships in `docs/FORMAT.md`.
//!
//! Diagnostics carry a line, a column, and a one-line explanation, and come
//! in two kinds: syntax (tokens) and semantic (names, shapes, cycles).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use causeway_core::diagram::{
    BoxKind, BoxSignature, Circuit, CircuitBuilder, InPort, OutPort, TypeTable, WireType,
};
use causeway_core::order::{skeleton_from_order, CausalOrder, Skeleton, SkeletonTyping};
use causeway_core::semantics::{
    Backend, CMatrix, Interpretation, Payload, QuantumBox, RawBox, StochasticBox,
};
use causeway_core::tensor::Tensor;

/// Declared dimensions above this are refused; contraction at desk scale
/// has no use for them and they only invite allocation blowups.
pub const MAX_DIMENSION: usize = 4096;

const MAX_ARRAY_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    Semantic,
}

/// A positioned parse or validation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Semantic => "error",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for Diagnostic {}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind: DiagnosticKind::Syntax,
        line,
        col,
        message: message.into(),
    }
}

fn semantic(line: usize, col: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind: DiagnosticKind::Semantic,
        line,
        col,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    Equals,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(s) => write!(f, "number `{s}`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Equals => write!(f, "`=`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut tokens = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            tokens.push(Token {
                tok: $tok,
                line: $l,
                col: $c,
            })
        };
    }
    while let Some(&ch) = chars.peek() {
        let (l, c) = (line, col);
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&ch) = chars.peek() {
                    if ch == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '{' => {
                chars.next();
                col += 1;
                push!(Tok::LBrace, l, c);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(Tok::RBrace, l, c);
            }
            '[' => {
                chars.next();
                col += 1;
                push!(Tok::LBracket, l, c);
            }
            ']' => {
                chars.next();
                col += 1;
                push!(Tok::RBracket, l, c);
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, l, c);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, l, c);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, l, c);
            }
            ':' => {
                chars.next();
                col += 1;
                push!(Tok::Colon, l, c);
            }
            '.' => {
                chars.next();
                col += 1;
                push!(Tok::Dot, l, c);
            }
            '=' => {
                chars.next();
                col += 1;
                push!(Tok::Equals, l, c);
            }
            '-' => {
                chars.next();
                col += 1;
                match chars.peek() {
                    Some('>') => {
                        chars.next();
                        col += 1;
                        push!(Tok::Arrow, l, c);
                    }
                    Some(d) if d.is_ascii_digit() || *d == '.' => {
                        let mut s = String::from("-");
                        lex_number_tail(&mut chars, &mut col, &mut s);
                        push!(Tok::Number(s), l, c);
                    }
                    _ => return Err(syntax(l, c, "expected `>` or a digit after `-`")),
                }
            }
            d if d.is_ascii_digit() => {
                let mut s = String::new();
                lex_number_tail(&mut chars, &mut col, &mut s);
                push!(Tok::Number(s), l, c);
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        s.push(ch);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(s), l, c);
            }
            other => {
                return Err(syntax(l, c, format!("unexpected character `{other}`")));
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(tokens)
}

fn lex_number_tail(
    chars: &mut std::iter::Peekable<std::str::Chars<'_>>,
    col: &mut usize,
    s: &mut String,
) {
    let mut seen_exp = false;
    while let Some(&ch) = chars.peek() {
        let take = ch.is_ascii_digit()
            || ch == '.'
            || ch == 'e'
            || ch == 'E'
            || ((ch == '+' || ch == '-')
                && seen_exp
                && matches!(s.chars().last(), Some('e' | 'E')));
        if ch == 'e' || ch == 'E' {
            seen_exp = true;
        }
        if take {
            s.push(ch);
            chars.next();
            *col += 1;
        } else {
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// raw values (nested arrays of numbers)

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Arr(Vec<Value>),
}

#[derive(Debug, Clone)]
struct Spanned<T> {
    v: T,
    line: usize,
    col: usize,
}

// ---------------------------------------------------------------------------
// parsed structures

/// A declared generic box with optional payloads per backend.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDecl {
    pub name: String,
    pub signature: BoxSignature,
    pub payloads: BTreeMap<Backend, Payload>,
}

/// A skeleton declaration resolved against its causal order.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonEntry {
    pub order_name: String,
    pub typing: SkeletonTyping,
    /// event -> declared box supplying its payloads, sorted by event.
    pub assigns: Vec<(String, String)>,
    pub skeleton: Skeleton,
}

/// A named circuit: either a plain wiring or one derived from a skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitEntry {
    pub circuit: Circuit,
    pub skeleton: Option<SkeletonEntry>,
}

/// One top-level declaration, in file order.
#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Type(WireType),
    BoxDecl(BoxDecl),
    RawDiscard(String, Vec<Complex64>),
    Circuit(String, Box<CircuitEntry>),
    Order(String, CausalOrder),
}

/// A fully validated theory file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoryFile {
    pub types: TypeTable,
    pub items: Vec<Item>,
}

impl TheoryFile {
    pub fn box_decl(&self, name: &str) -> Option<&BoxDecl> {
        self.items.iter().find_map(|i| match i {
            Item::BoxDecl(b) if b.name == name => Some(b),
            _ => None,
        })
    }

    pub fn box_decls(&self) -> impl Iterator<Item = &BoxDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::BoxDecl(b) => Some(b),
            _ => None,
        })
    }

    pub fn circuit(&self, name: &str) -> Option<&CircuitEntry> {
        self.items.iter().find_map(|i| match i {
            Item::Circuit(n, e) if n == name => Some(e.as_ref()),
            _ => None,
        })
    }

    pub fn circuit_names(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter_map(|i| match i {
                Item::Circuit(n, _) => Some(n.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn order(&self, name: &str) -> Option<&CausalOrder> {
        self.items.iter().find_map(|i| match i {
            Item::Order(n, o) if n == name => Some(o),
            _ => None,
        })
    }

    pub fn raw_discards(&self) -> impl Iterator<Item = (&str, &[Complex64])> {
        self.items.iter().filter_map(|i| match i {
            Item::RawDiscard(n, v) => Some((n.as_str(), v.as_slice())),
            _ => None,
        })
    }

    /// Backends for which every generic box of the named circuit has a
    /// payload.
    pub fn covered_backends(&self, entry: &CircuitEntry) -> Vec<Backend> {
        let mut needed: BTreeSet<&str> = BTreeSet::new();
        for b in entry.circuit.boxes() {
            if b.signature().kind() == BoxKind::Generic {
                needed.insert(b.signature().name());
            }
        }
        let payload_source = |sig_name: &str| -> Option<&BoxDecl> {
            if let Some(skel) = &entry.skeleton {
                if let Some((_, declared)) =
                    skel.assigns.iter().find(|(event, _)| event == sig_name)
                {
                    return self.box_decl(declared);
                }
            }
            self.box_decl(sig_name)
        };
        [Backend::Stochastic, Backend::Quantum, Backend::Raw]
            .into_iter()
            .filter(|backend| {
                needed.iter().all(|name| {
                    payload_source(name)
                        .map(|d| d.payloads.contains_key(backend))
                        .unwrap_or(false)
                })
            })
            .collect()
    }

    /// Interpretation with every declared payload of the backend, plus raw
    /// discard overrides; no skeleton assigns.
    pub fn base_interpretation(&self, backend: Backend) -> Interpretation {
        let mut interp = Interpretation::new(backend);
        for decl in self.box_decls() {
            if let Some(p) = decl.payloads.get(&backend) {
                interp
                    .insert_payload(decl.name.clone(), p.clone())
                    .expect("payload backend is keyed consistently");
            }
        }
        if backend == Backend::Raw {
            for (type_name, covector) in self.raw_discards() {
                if let Some(t) = self.types.get(type_name) {
                    interp
                        .set_raw_discard(t, covector.to_vec())
                        .expect("covector length validated at parse time");
                }
            }
        }
        interp
    }

    /// Build the interpretation for one circuit: declared box payloads under
    /// their own names, and skeleton assigns copied under the event labels.
    pub fn interpretation_for(&self, entry: &CircuitEntry, backend: Backend) -> Interpretation {
        let mut interp = self.base_interpretation(backend);
        if let Some(skel) = &entry.skeleton {
            for (event, declared) in &skel.assigns {
                if let Some(p) = self
                    .box_decl(declared)
                    .and_then(|d| d.payloads.get(&backend))
                {
                    interp
                        .insert_payload(event.clone(), p.clone())
                        .expect("payload backend is keyed consistently");
                }
            }
        }
        interp
    }
}

// ---------------------------------------------------------------------------
// parser

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn expect_tok(&mut self, want: Tok) -> Result<Token, Diagnostic> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(syntax(
                t.line,
                t.col,
                format!("expected {want}, found {}", t.tok),
            ))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<Spanned<String>, Diagnostic> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok(Spanned {
                v: s,
                line: t.line,
                col: t.col,
            }),
            other => Err(syntax(
                t.line,
                t.col,
                format!("expected {what}, found {other}"),
            )),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Token, Diagnostic> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if s == kw => Ok(t),
            other => Err(syntax(
                t.line,
                t.col,
                format!("expected `{kw}`, found {other}"),
            )),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect_nat(&mut self, what: &str) -> Result<Spanned<usize>, Diagnostic> {
        let t = self.next();
        match &t.tok {
            Tok::Number(s) => {
                let n: usize = s.parse().map_err(|_| {
                    syntax(
                        t.line,
                        t.col,
                        format!("expected {what} (a plain natural number), found `{s}`"),
                    )
                })?;
                Ok(Spanned {
                    v: n,
                    line: t.line,
                    col: t.col,
                })
            }
            other => Err(syntax(
                t.line,
                t.col,
                format!("expected {what}, found {other}"),
            )),
        }
    }

    fn parse_value(&mut self, depth: usize) -> Result<Spanned<Value>, Diagnostic> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Number(s) => {
                self.next();
                let x: f64 = s
                    .parse()
                    .map_err(|_| syntax(t.line, t.col, format!("malformed number `{s}`")))?;
                if !x.is_finite() {
                    return Err(syntax(t.line, t.col, format!("number `{s}` out of range")));
                }
                Ok(Spanned {
                    v: Value::Num(x),
                    line: t.line,
                    col: t.col,
                })
            }
            Tok::LBracket => {
                if depth >= MAX_ARRAY_DEPTH {
                    return Err(syntax(t.line, t.col, "array nesting too deep"));
                }
                self.next();
                let mut items = Vec::new();
                if !matches!(self.peek().tok, Tok::RBracket) {
                    loop {
                        items.push(self.parse_value(depth + 1)?.v);
                        match self.peek().tok {
                            Tok::Comma => {
                                self.next();
                            }
                            _ => break,
                        }
                    }
                }
                self.expect_tok(Tok::RBracket)?;
                Ok(Spanned {
                    v: Value::Arr(items),
                    line: t.line,
                    col: t.col,
                })
            }
            other => Err(syntax(
                t.line,
                t.col,
                format!("expected a number or `[`, found {other}"),
            )),
        }
    }

    fn parse_ident_list(&mut self) -> Result<Vec<Spanned<String>>, Diagnostic> {
        self.expect_tok(Tok::LBracket)?;
        let mut names = Vec::new();
        if !matches!(self.peek().tok, Tok::RBracket) {
            loop {
                names.push(self.expect_ident("a name")?);
                match self.peek().tok {
                    Tok::Comma => {
                        self.next();
                    }
                    _ => break,
                }
            }
        }
        self.expect_tok(Tok::RBracket)?;
        Ok(names)
    }
}

// ---------------------------------------------------------------------------
// value -> payload conversions

fn as_complex(v: &Value, line: usize, col: usize) -> Result<Complex64, Diagnostic> {
    match v {
        Value::Arr(pair) => {
            if let [Value::Num(re), Value::Num(im)] = pair.as_slice() {
                Ok(Complex64::new(*re, *im))
            } else {
                Err(semantic(
                    line,
                    col,
                    "complex entries are two-element arrays [re, im]",
                ))
            }
        }
        Value::Num(_) => Err(semantic(
            line,
            col,
            "complex entries are two-element arrays [re, im], not bare numbers",
        )),
    }
}

fn as_real_matrix(
    v: &Spanned<Value>,
    rows: usize,
    cols: usize,
    context: &str,
) -> Result<Vec<f64>, Diagnostic> {
    let Value::Arr(row_vals) = &v.v else {
        return Err(semantic(
            v.line,
            v.col,
            format!("{context}: expected an array of rows"),
        ));
    };
    if row_vals.len() != rows {
        return Err(semantic(
            v.line,
            v.col,
            format!("{context}: expected {rows} rows, found {}", row_vals.len()),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for row in row_vals {
        let Value::Arr(entries) = row else {
            return Err(semantic(
                v.line,
                v.col,
                format!("{context}: rows must be arrays of numbers"),
            ));
        };
        if entries.len() != cols {
            return Err(semantic(
                v.line,
                v.col,
                format!(
                    "{context}: expected {cols} columns, found {}",
                    entries.len()
                ),
            ));
        }
        for e in entries {
            let Value::Num(x) = e else {
                return Err(semantic(
                    v.line,
                    v.col,
                    format!("{context}: entries must be plain numbers"),
                ));
            };
            data.push(*x);
        }
    }
    Ok(data)
}

fn as_complex_matrix(
    v: &Value,
    rows: usize,
    cols: usize,
    line: usize,
    col: usize,
    context: &str,
) -> Result<CMatrix, Diagnostic> {
    let Value::Arr(row_vals) = v else {
        return Err(semantic(
            line,
            col,
            format!("{context}: expected an array of rows"),
        ));
    };
    if row_vals.len() != rows {
        return Err(semantic(
            line,
            col,
            format!("{context}: expected {rows} rows, found {}", row_vals.len()),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for row in row_vals {
        let Value::Arr(entries) = row else {
            return Err(semantic(
                line,
                col,
                format!("{context}: rows must be arrays"),
            ));
        };
        if entries.len() != cols {
            return Err(semantic(
                line,
                col,
                format!(
                    "{context}: expected {cols} columns, found {}",
                    entries.len()
                ),
            ));
        }
        for e in entries {
            data.push(as_complex(e, line, col)?);
        }
    }
    CMatrix::new(rows, cols, data).map_err(|e| semantic(line, col, e.to_string()))
}

fn as_raw_tensor(v: &Spanned<Value>, shape: &[usize], context: &str) -> Result<Tensor, Diagnostic> {
    fn walk(
        v: &Value,
        shape: &[usize],
        out: &mut Vec<Complex64>,
        line: usize,
        col: usize,
        context: &str,
    ) -> Result<(), Diagnostic> {
        match shape.split_first() {
            None => {
                out.push(as_complex(v, line, col)?);
                Ok(())
            }
            Some((&d, rest)) => {
                let Value::Arr(items) = v else {
                    return Err(semantic(
                        line,
                        col,
                        format!("{context}: expected an array level of length {d}"),
                    ));
                };
                if items.len() != d {
                    return Err(semantic(
                        line,
                        col,
                        format!(
                            "{context}: expected length {d} at this level, found {}",
                            items.len()
                        ),
                    ));
                }
                for item in items {
                    walk(item, rest, out, line, col, context)?;
                }
                Ok(())
            }
        }
    }
    let mut data = Vec::new();
    walk(&v.v, shape, &mut data, v.line, v.col, context)?;
    Ok(Tensor::new(shape.to_vec(), data))
}

// ---------------------------------------------------------------------------
// top-level parse

/// Parse and validate a theory file.
pub fn parse_theory(text: &str) -> Result<TheoryFile, Diagnostic> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut theory = TheoryFile::default();

    while !p.at_eof() {
        let t = p.peek().clone();
        match &t.tok {
            Tok::Ident(kw) => match kw.as_str() {
                "type" => parse_type_decl(&mut p, &mut theory)?,
                "box" => parse_box_decl(&mut p, &mut theory)?,
                "discard" => parse_raw_discard(&mut p, &mut theory)?,
                "circuit" => parse_circuit_decl(&mut p, &mut theory)?,
                "order" => parse_order_decl(&mut p, &mut theory)?,
                "skeleton" => parse_skeleton_decl(&mut p, &mut theory)?,
                other => {
                    return Err(syntax(
                        t.line,
                        t.col,
                        format!("expected a declaration (type, box, discard, circuit, order, skeleton), found `{other}`"),
                    ))
                }
            },
            other => {
                return Err(syntax(
                    t.line,
                    t.col,
                    format!("expected a declaration keyword, found {other}"),
                ))
            }
        }
    }
    Ok(theory)
}

fn lookup_type(theory: &TheoryFile, name: &Spanned<String>) -> Result<WireType, Diagnostic> {
    theory.types.get(&name.v).cloned().ok_or_else(|| {
        semantic(
            name.line,
            name.col,
            format!("unknown wire type `{}`", name.v),
        )
    })
}

fn parse_type_decl(p: &mut Parser, theory: &mut TheoryFile) -> Result<(), Diagnostic> {
    p.expect_keyword("type")?;
    let name = p.expect_ident("a type name")?;
    p.expect_keyword("dim")?;
    let dim = p.expect_nat("a dimension")?;
    if dim.v == 0 {
        return Err(semantic(dim.line, dim.col, "dimension must be at least 1"));
    }
    if dim.v > MAX_DIMENSION {
        return Err(semantic(
            dim.line,
            dim.col,
            format!(
                "dimension {} exceeds the supported maximum {MAX_DIMENSION}",
                dim.v
            ),
        ));
    }
    let t = theory
        .types
        .declare(name.v.clone(), dim.v)
        .map_err(|e| semantic(name.line, name.col, e.to_string()))?;
    theory.items.push(Item::Type(t));
    Ok(())
}

fn parse_type_list(p: &mut Parser, theory: &TheoryFile) -> Result<Vec<WireType>, Diagnostic> {
    let names = p.parse_ident_list()?;
    names.iter().map(|n| lookup_type(theory, n)).collect()
}

fn parse_box_decl(p: &mut Parser, theory: &mut TheoryFile) -> Result<(), Diagnostic> {
    p.expect_keyword("box")?;
    let name = p.expect_ident("a box name")?;
    if theory.box_decl(&name.v).is_some() {
        return Err(semantic(
            name.line,
            name.col,
            format!("box `{}` is declared twice", name.v),
        ));
    }
    p.expect_tok(Tok::Colon)?;
    let inputs = parse_type_list(p, theory)?;
    p.expect_tok(Tok::Arrow)?;
    let outputs = parse_type_list(p, theory)?;
    let signature = BoxSignature::generic(name.v.clone(), inputs, outputs);

    let mut payloads: BTreeMap<Backend, Payload> = BTreeMap::new();
    loop {
        let backend = if p.at_keyword("stochastic") {
            Backend::Stochastic
        } else if p.at_keyword("quantum") {
            Backend::Quantum
        } else if p.at_keyword("raw") {
            Backend::Raw
        } else {
            break;
        };
        let kw = p.next(); // the backend keyword
        if payloads.contains_key(&backend) {
            return Err(semantic(
                kw.line,
                kw.col,
                format!("box `{}` has two {backend} payloads", name.v),
            ));
        }
        let value = p.parse_value(0)?;
        let payload = payload_from_value(&signature, backend, &value, &name.v)?;
        payloads.insert(backend, payload);
    }
    theory.items.push(Item::BoxDecl(BoxDecl {
        name: name.v,
        signature,
        payloads,
    }));
    Ok(())
}

fn payload_from_value(
    sig: &BoxSignature,
    backend: Backend,
    value: &Spanned<Value>,
    box_name: &str,
) -> Result<Payload, Diagnostic> {
    let out_dims: Vec<usize> = sig.outputs().iter().map(|t| t.dim()).collect();
    let in_dims: Vec<usize> = sig.inputs().iter().map(|t| t.dim()).collect();
    let rows: usize = out_dims.iter().product();
    let cols: usize = in_dims.iter().product();
    match backend {
        Backend::Stochastic => {
            let ctx = format!("stochastic payload of `{box_name}`");
            let data = as_real_matrix(value, rows, cols, &ctx)?;
            StochasticBox::new(rows, cols, data)
                .map(Payload::Stochastic)
                .map_err(|e| semantic(value.line, value.col, format!("{ctx}: {e}")))
        }
        Backend::Quantum => {
            let ctx = format!("quantum payload of `{box_name}`");
            let Value::Arr(kraus_vals) = &value.v else {
                return Err(semantic(
                    value.line,
                    value.col,
                    format!("{ctx}: expected an array of Kraus matrices"),
                ));
            };
            let kraus: Vec<CMatrix> = kraus_vals
                .iter()
                .map(|k| as_complex_matrix(k, rows, cols, value.line, value.col, &ctx))
                .collect::<Result<_, _>>()?;
            QuantumBox::new(kraus)
                .map(Payload::Quantum)
                .map_err(|e| semantic(value.line, value.col, format!("{ctx}: {e}")))
        }
        Backend::Raw => {
            let ctx = format!("raw payload of `{box_name}`");
            let mut shape = out_dims.clone();
            shape.extend_from_slice(&in_dims);
            let tensor = as_raw_tensor(value, &shape, &ctx)?;
            RawBox::new(tensor, out_dims.len())
                .map(Payload::Raw)
                .map_err(|e| semantic(value.line, value.col, format!("{ctx}: {e}")))
        }
    }
}

fn parse_raw_discard(p: &mut Parser, theory: &mut TheoryFile) -> Result<(), Diagnostic> {
    p.expect_keyword("discard")?;
    let name = p.expect_ident("a type name")?;
    let t = lookup_type(theory, &name)?;
    if theory.raw_discards().any(|(n, _)| n == name.v) {
        return Err(semantic(
            name.line,
            name.col,
            format!("discard override for `{}` is declared twice", name.v),
        ));
    }
    let value = p.parse_value(0)?;
    let Value::Arr(entries) = &value.v else {
        return Err(semantic(
            value.line,
            value.col,
            "discard override must be an array of complex entries",
        ));
    };
    if entries.len() != t.dim() {
        return Err(semantic(
            value.line,
            value.col,
            format!(
                "discard override for `{}` must have {} entries, found {}",
                name.v,
                t.dim(),
                entries.len()
            ),
        ));
    }
    let covector: Vec<Complex64> = entries
        .iter()
        .map(|e| as_complex(e, value.line, value.col))
        .collect::<Result<_, _>>()?;
    theory.items.push(Item::RawDiscard(name.v, covector));
    Ok(())
}

fn check_fresh_circuit_name(theory: &TheoryFile, name: &Spanned<String>) -> Result<(), Diagnostic> {
    if theory.circuit(&name.v).is_some() {
        return Err(semantic(
            name.line,
            name.col,
            format!("circuit `{}` is declared twice", name.v),
        ));
    }
    Ok(())
}

fn parse_circuit_decl(p: &mut Parser, theory: &mut TheoryFile) -> Result<(), Diagnostic> {
    let kw = p.expect_keyword("circuit")?;
    let name = p.expect_ident("a circuit name")?;
    check_fresh_circuit_name(theory, &name)?;
    p.expect_tok(Tok::LBrace)?;

    let mut builder = CircuitBuilder::new();
    let mut labels: BTreeMap<String, causeway_core::diagram::BoxId> = BTreeMap::new();
    let mut signatures: BTreeMap<String, BoxSignature> = BTreeMap::new();
    loop {
        if p.at_keyword("box") {
            p.next();
            let label = p.expect_ident("an instance label")?;
            let sig = parse_generator(p, theory)?;
            let id = builder
                .add_box(label.v.clone(), sig.clone())
                .map_err(|e| semantic(label.line, label.col, e.to_string()))?;
            labels.insert(label.v.clone(), id);
            signatures.insert(label.v, sig);
        } else if p.at_keyword("wire") {
            p.next();
            let (from_label, from_side, from_idx, from_pos) = parse_port_ref(p)?;
            p.expect_tok(Tok::Arrow)?;
            let (to_label, to_side, to_idx, to_pos) = parse_port_ref(p)?;
            if from_side != "out" {
                return Err(semantic(
                    from_pos.0,
                    from_pos.1,
                    "wires must start at an `out` port",
                ));
            }
            if to_side != "in" {
                return Err(semantic(
                    to_pos.0,
                    to_pos.1,
                    "wires must end at an `in` port",
                ));
            }
            let from_id = *labels.get(&from_label).ok_or_else(|| {
                semantic(
                    from_pos.0,
                    from_pos.1,
                    format!("unknown box `{from_label}`"),
                )
            })?;
            let to_id = *labels
                .get(&to_label)
                .ok_or_else(|| semantic(to_pos.0, to_pos.1, format!("unknown box `{to_label}`")))?;
            builder.connect(
                OutPort {
                    box_id: from_id,
                    index: from_idx,
                },
                InPort {
                    box_id: to_id,
                    index: to_idx,
                },
            );
        } else {
            break;
        }
    }
    p.expect_tok(Tok::RBrace)?;
    let circuit = builder
        .build()
        .map_err(|e| semantic(kw.line, kw.col, format!("circuit `{}`: {e}", name.v)))?;
    theory.items.push(Item::Circuit(
        name.v,
        Box::new(CircuitEntry {
            circuit,
            skeleton: None,
        }),
    ));
    Ok(())
}

/// `f` | `discard(A)` | `identity(A)` | `cup(A)` | `cap(A)` | `swap(A, B)`
fn parse_generator(p: &mut Parser, theory: &TheoryFile) -> Result<BoxSignature, Diagnostic> {
    let name = p.expect_ident("a generator")?;
    let special = matches!(
        name.v.as_str(),
        "discard" | "identity" | "cup" | "cap" | "swap"
    ) && matches!(p.peek().tok, Tok::LParen);
    if !special {
        return theory
            .box_decl(&name.v)
            .map(|d| d.signature.clone())
            .ok_or_else(|| semantic(name.line, name.col, format!("unknown box `{}`", name.v)));
    }
    p.expect_tok(Tok::LParen)?;
    let first = p.expect_ident("a type name")?;
    let t1 = lookup_type(theory, &first)?;
    let sig = match name.v.as_str() {
        "swap" => {
            p.expect_tok(Tok::Comma)?;
            let second = p.expect_ident("a type name")?;
            let t2 = lookup_type(theory, &second)?;
            BoxSignature::swap(&t1, &t2)
        }
        "discard" => BoxSignature::discard(&t1),
        "identity" => BoxSignature::identity(&t1),
        "cup" => BoxSignature::cup(&t1),
        _ => BoxSignature::cap(&t1),
    };
    p.expect_tok(Tok::RParen)?;
    Ok(sig)
}

type PortRef = (String, &'static str, usize, (usize, usize));

fn parse_port_ref(p: &mut Parser) -> Result<PortRef, Diagnostic> {
    let label = p.expect_ident("an instance label")?;
    p.expect_tok(Tok::Dot)?;
    let side = p.expect_ident("`in` or `out`")?;
    let side_str: &'static str = match side.v.as_str() {
        "in" => "in",
        "out" => "out",
        other => {
            return Err(syntax(
                side.line,
                side.col,
                format!("expected `in` or `out`, found `{other}`"),
            ))
        }
    };
    p.expect_tok(Tok::LBracket)?;
    let idx = p.expect_nat("a port index")?;
    p.expect_tok(Tok::RBracket)?;
    Ok((label.v, side_str, idx.v, (label.line, label.col)))
}

fn parse_order_decl(p: &mut Parser, theory: &mut TheoryFile) -> Result<(), Diagnostic> {
    p.expect_keyword("order")?;
    let name = p.expect_ident("an order name")?;
    if theory.order(&name.v).is_some() {
        return Err(semantic(
            name.line,
            name.col,
            format!("order `{}` is declared twice", name.v),
        ));
    }
    p.expect_tok(Tok::LBrace)?;
    p.expect_keyword("events")?;
    let events = p.parse_ident_list()?;
    let mut covers = Vec::new();
    while p.at_keyword("cover") {
        p.next();
        let a = p.expect_ident("an event")?;
        p.expect_tok(Tok::Arrow)?;
        let b = p.expect_ident("an event")?;
        covers.push((a, b));
    }
    p.expect_tok(Tok::RBrace)?;
    let order = CausalOrder::new(
        events.iter().map(|e| e.v.clone()).collect(),
        covers
            .iter()
            .map(|(a, b)| (a.v.clone(), b.v.clone()))
            .collect(),
    )
    .map_err(|e| semantic(name.line, name.col, format!("order `{}`: {e}", name.v)))?;
    theory.items.push(Item::Order(name.v, order));
    Ok(())
}

fn parse_skeleton_decl(p: &mut Parser, theory: &mut TheoryFile) -> Result<(), Diagnostic> {
    p.expect_keyword("skeleton")?;
    let name = p.expect_ident("a skeleton name")?;
    check_fresh_circuit_name(theory, &name)?;
    p.expect_tok(Tok::LBrace)?;
    p.expect_keyword("order")?;
    let order_name = p.expect_ident("an order name")?;
    let order = theory.order(&order_name.v).cloned().ok_or_else(|| {
        semantic(
            order_name.line,
            order_name.col,
            format!("unknown order `{}`", order_name.v),
        )
    })?;

    let mut typing = SkeletonTyping::default();
    let mut assigns: Vec<(String, String)> = Vec::new();
    let known_event = |order: &CausalOrder, e: &Spanned<String>| -> Result<(), Diagnostic> {
        if order.event_index(&e.v).is_none() {
            return Err(semantic(
                e.line,
                e.col,
                format!("`{}` is not an event of order `{}`", e.v, order_name.v),
            ));
        }
        Ok(())
    };
    loop {
        if p.at_keyword("edge") {
            p.next();
            let a = p.expect_ident("an event")?;
            p.expect_tok(Tok::Arrow)?;
            let b = p.expect_ident("an event")?;
            p.expect_tok(Tok::Colon)?;
            let tname = p.expect_ident("a type name")?;
            known_event(&order, &a)?;
            known_event(&order, &b)?;
            if !order.covers().any(|(x, y)| x == a.v && y == b.v) {
                return Err(semantic(
                    a.line,
                    a.col,
                    format!(
                        "{} -> {} is not a cover edge of `{}`",
                        a.v, b.v, order_name.v
                    ),
                ));
            }
            let t = lookup_type(theory, &tname)?;
            if typing.edges.insert((a.v.clone(), b.v.clone()), t).is_some() {
                return Err(semantic(
                    a.line,
                    a.col,
                    format!("edge {} -> {} is typed twice", a.v, b.v),
                ));
            }
        } else if p.at_keyword("local_in") || p.at_keyword("local_out") {
            let which = p.next();
            let event = p.expect_ident("an event")?;
            p.expect_tok(Tok::Colon)?;
            let tname = p.expect_ident("a type name")?;
            known_event(&order, &event)?;
            let t = lookup_type(theory, &tname)?;
            let map = if matches!(&which.tok, Tok::Ident(s) if s == "local_in") {
                &mut typing.local_inputs
            } else {
                &mut typing.local_outputs
            };
            if map.insert(event.v.clone(), t).is_some() {
                return Err(semantic(
                    event.line,
                    event.col,
                    format!("local port of `{}` is typed twice", event.v),
                ));
            }
        } else if p.at_keyword("assign") {
            p.next();
            let event = p.expect_ident("an event")?;
            p.expect_tok(Tok::Equals)?;
            let box_name = p.expect_ident("a box name")?;
            known_event(&order, &event)?;
            if theory.box_decl(&box_name.v).is_none() {
                return Err(semantic(
                    box_name.line,
                    box_name.col,
                    format!("unknown box `{}`", box_name.v),
                ));
            }
            if assigns.iter().any(|(e, _)| e == &event.v) {
                return Err(semantic(
                    event.line,
                    event.col,
                    format!("event `{}` is assigned twice", event.v),
                ));
            }
            assigns.push((event.v, box_name.v));
        } else {
            break;
        }
    }
    p.expect_tok(Tok::RBrace)?;

    let (circuit, events) = skeleton_from_order(&order, &typing)
        .map_err(|e| semantic(name.line, name.col, format!("skeleton `{}`: {e}", name.v)))?;

    // Assigned boxes must match the event signature exactly.
    for (event, declared) in &assigns {
        let decl = theory.box_decl(declared).expect("checked above");
        let binding = events.get(event).expect("checked above");
        let event_sig = circuit.instance(binding.box_id).signature();
        if decl.signature.inputs() != event_sig.inputs()
            || decl.signature.outputs() != event_sig.outputs()
        {
            return Err(semantic(
                name.line,
                name.col,
                format!(
                    "skeleton `{}`: box `{declared}` has signature {} -> {} but event `{event}` needs {} -> {}",
                    name.v,
                    type_list_string(decl.signature.inputs()),
                    type_list_string(decl.signature.outputs()),
                    type_list_string(event_sig.inputs()),
                    type_list_string(event_sig.outputs()),
                ),
            ));
        }
    }
    assigns.sort();

    let skeleton = Skeleton {
        circuit: circuit.clone(),
        order,
        events,
    };
    theory.items.push(Item::Circuit(
        name.v,
        Box::new(CircuitEntry {
            circuit,
            skeleton: Some(SkeletonEntry {
                order_name: order_name.v,
                typing,
                assigns,
                skeleton,
            }),
        }),
    ));
    Ok(())
}

fn type_list_string(types: &[WireType]) -> String {
    let names: Vec<&str> = types.iter().map(|t| t.name()).collect();
    format!("[{}]", names.join(", "))
}

// ---------------------------------------------------------------------------
// serializer

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_complex(z: Complex64) -> String {
    format!("[{}, {}]", fmt_f64(z.re), fmt_f64(z.im))
}

fn fmt_real_matrix(rows: usize, cols: usize, data: &[f64]) -> String {
    let row_strs: Vec<String> = (0..rows)
        .map(|r| {
            let entries: Vec<String> = (0..cols).map(|c| fmt_f64(data[r * cols + c])).collect();
            format!("[{}]", entries.join(", "))
        })
        .collect();
    format!("[{}]", row_strs.join(", "))
}

fn fmt_cmatrix(m: &CMatrix) -> String {
    let row_strs: Vec<String> = (0..m.rows)
        .map(|r| {
            let entries: Vec<String> = (0..m.cols).map(|c| fmt_complex(m.get(r, c))).collect();
            format!("[{}]", entries.join(", "))
        })
        .collect();
    format!("[{}]", row_strs.join(", "))
}

fn fmt_raw_tensor(t: &Tensor) -> String {
    fn walk(shape: &[usize], data: &[Complex64], offset: usize) -> String {
        match shape.split_first() {
            None => fmt_complex(data[offset]),
            Some((&d, rest)) => {
                let stride: usize = rest.iter().product();
                let parts: Vec<String> = (0..d)
                    .map(|i| walk(rest, data, offset + i * stride))
                    .collect();
                format!("[{}]", parts.join(", "))
            }
        }
    }
    walk(t.shape(), t.data(), 0)
}

fn fmt_generator(sig: &BoxSignature) -> String {
    match sig.kind() {
        BoxKind::Generic => sig.name().to_string(),
        BoxKind::Discard => format!("discard({})", sig.inputs()[0].name()),
        BoxKind::Identity => format!("identity({})", sig.inputs()[0].name()),
        BoxKind::Swap => format!(
            "swap({}, {})",
            sig.inputs()[0].name(),
            sig.inputs()[1].name()
        ),
        BoxKind::Cup => format!("cup({})", sig.outputs()[0].name()),
        BoxKind::Cap => format!("cap({})", sig.inputs()[0].name()),
    }
}

/// Canonical textual form of a theory file.
pub fn serialize_theory(theory: &TheoryFile) -> String {
    let mut out = String::new();
    let mut first = true;
    for item in &theory.items {
        if !first {
            out.push('\n');
        }
        first = false;
        match item {
            Item::Type(t) => {
                out.push_str(&format!("type {} dim {}\n", t.name(), t.dim()));
            }
            Item::BoxDecl(decl) => {
                out.push_str(&format!(
                    "box {} : {} -> {}\n",
                    decl.name,
                    type_list_string(decl.signature.inputs()),
                    type_list_string(decl.signature.outputs()),
                ));
                for (backend, payload) in &decl.payloads {
                    let body = match payload {
                        Payload::Stochastic(m) => fmt_real_matrix(m.rows, m.cols, &m.data),
                        Payload::Quantum(q) => {
                            let parts: Vec<String> = q.kraus.iter().map(fmt_cmatrix).collect();
                            format!("[{}]", parts.join(", "))
                        }
                        Payload::Raw(r) => fmt_raw_tensor(&r.tensor),
                    };
                    out.push_str(&format!("  {backend} {body}\n"));
                }
            }
            Item::RawDiscard(name, covector) => {
                let entries: Vec<String> = covector.iter().map(|&z| fmt_complex(z)).collect();
                out.push_str(&format!("discard {name} [{}]\n", entries.join(", ")));
            }
            Item::Circuit(name, entry) => match &entry.skeleton {
                None => {
                    out.push_str(&format!("circuit {name} {{\n"));
                    for b in entry.circuit.boxes() {
                        out.push_str(&format!(
                            "  box {} {}\n",
                            b.label(),
                            fmt_generator(b.signature())
                        ));
                    }
                    for w in entry.circuit.wires() {
                        out.push_str(&format!(
                            "  wire {}.out[{}] -> {}.in[{}]\n",
                            entry.circuit.label(w.from.box_id),
                            w.from.index,
                            entry.circuit.label(w.to.box_id),
                            w.to.index,
                        ));
                    }
                    out.push_str("}\n");
                }
                Some(skel) => {
                    out.push_str(&format!("skeleton {name} {{\n"));
                    out.push_str(&format!("  order {}\n", skel.order_name));
                    for ((a, b), t) in &skel.typing.edges {
                        out.push_str(&format!("  edge {a} -> {b} : {}\n", t.name()));
                    }
                    for (e, t) in &skel.typing.local_inputs {
                        out.push_str(&format!("  local_in {e} : {}\n", t.name()));
                    }
                    for (e, t) in &skel.typing.local_outputs {
                        out.push_str(&format!("  local_out {e} : {}\n", t.name()));
                    }
                    for (e, b) in &skel.assigns {
                        out.push_str(&format!("  assign {e} = {b}\n"));
                    }
                    out.push_str("}\n");
                }
            },
            Item::Order(name, order) => {
                out.push_str(&format!("order {name} {{\n"));
                let events: Vec<&str> = order.events().iter().map(String::as_str).collect();
                out.push_str(&format!("  events [{}]\n", events.join(", ")));
                for (a, b) in order.covers() {
                    out.push_str(&format!("  cover {a} -> {b}\n"));
                }
                out.push_str("}\n");
            }
        }
    }
    out
}
