//! LTL over finite traces: syntax, concrete-syntax parser, finite-trace
//! semantics and negation.
//!
//! Traces carry exactly one atomic proposition per step, so a trace is a
//! sequence of proposition indices into an [`Alphabet`].

mod parser;
mod rewrite;
mod semantics;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parser::parse;
pub use rewrite::{negate, nnf, simplify};
pub use semantics::{evaluate, evaluate_all};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown proposition `{name}` at position {position}")]
    UnknownProposition { name: String, position: usize },
    #[error("position {index} out of range for trace of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("traces must be non-empty")]
    EmptyTrace,
    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
}

/// One atomic proposition of Π.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AtomicProposition {
    pub id: String,
    pub index: usize,
}

/// The ordered proposition set Π. Also the DFA alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    props: Vec<AtomicProposition>,
}

impl Alphabet {
    pub fn new<I, T>(names: I) -> Result<Self, FormulaError>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let mut props: Vec<AtomicProposition> = Vec::new();
        for (index, name) in names.into_iter().enumerate() {
            let id = name.into();
            if !is_identifier(&id) || parser::is_reserved(&id) {
                return Err(FormulaError::InvalidAlphabet(format!(
                    "`{id}` is not a usable proposition name"
                )));
            }
            if props.iter().any(|p| p.id == id) {
                return Err(FormulaError::InvalidAlphabet(format!(
                    "duplicate proposition `{id}`"
                )));
            }
            props.push(AtomicProposition { id, index });
        }
        Ok(Self { props })
    }

    /// `p0, p1, …, p{n-1}`.
    pub fn indexed(n: usize) -> Self {
        Self::new((0..n).map(|i| format!("p{i}"))).expect("generated names are valid")
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.props.iter().position(|p| p.id == id)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.props[index].id
    }

    pub fn props(&self) -> &[AtomicProposition] {
        &self.props
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A non-empty finite word over Π.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trace(Vec<usize>);

impl Trace {
    pub fn new(symbols: Vec<usize>) -> Result<Self, FormulaError> {
        if symbols.is_empty() {
            return Err(FormulaError::EmptyTrace);
        }
        Ok(Self(symbols))
    }

    /// Builds a trace and checks every symbol against the alphabet.
    pub fn over(symbols: Vec<usize>, alphabet: &Alphabet) -> Result<Self, FormulaError> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= alphabet.len()) {
            return Err(FormulaError::SymbolOutOfRange {
                symbol: bad,
                size: alphabet.len(),
            });
        }
        Self::new(symbols)
    }

    pub fn from_names(names: &[&str], alphabet: &Alphabet) -> Result<Self, FormulaError> {
        let symbols = names
            .iter()
            .map(|n| {
                alphabet
                    .index_of(n)
                    .ok_or_else(|| FormulaError::UnknownProposition {
                        name: n.to_string(),
                        position: 0,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }
}

/// LTLf abstract syntax tree. `false` is represented as `Not(True)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    Ap(usize),
    Not(Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    Or(Arc<Formula>, Arc<Formula>),
    Next(Arc<Formula>),
    Eventually(Arc<Formula>),
    Always(Arc<Formula>),
    Until(Arc<Formula>, Arc<Formula>),
}

impl Formula {
    pub fn tt() -> Self {
        Formula::True
    }

    pub fn ff() -> Self {
        Formula::Not(Arc::new(Formula::True))
    }

    pub fn ap(index: usize) -> Self {
        Formula::Ap(index)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Arc::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Arc::new(a), Arc::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Arc::new(a), Arc::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Arc::new(f))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Arc::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Arc::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Arc::new(a), Arc::new(b))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::Not(inner) if **inner == Formula::True)
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::True | Formula::Ap(_) => vec![],
            Formula::Not(a) | Formula::Next(a) | Formula::Eventually(a) | Formula::Always(a) => {
                vec![a]
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) => vec![a, b],
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Highest proposition index mentioned, if any.
    pub fn max_prop(&self) -> Option<usize> {
        match self {
            Formula::Ap(i) => Some(*i),
            _ => self.children().iter().filter_map(|c| c.max_prop()).max(),
        }
    }

    /// Renders with the concrete syntax accepted by [`parse`].
    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> FormulaDisplay<'a> {
        FormulaDisplay {
            formula: self,
            alphabet,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Until(..) => 3,
            Formula::Not(_) | Formula::Next(_) | Formula::Eventually(_) | Formula::Always(_) => 4,
            Formula::True | Formula::Ap(_) => 5,
        }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    alphabet: &'a Alphabet,
}

impl FormulaDisplay<'_> {
    fn child(&self, f: &Formula, parens: bool, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if parens {
            write!(out, "({})", f.display(self.alphabet))
        } else {
            write!(out, "{}", f.display(self.alphabet))
        }
    }
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let f = self.formula;
        let prec = f.precedence();
        match f {
            Formula::True => write!(out, "true"),
            Formula::Ap(i) => write!(out, "{}", self.alphabet.name(*i)),
            Formula::Not(a) if **a == Formula::True => write!(out, "false"),
            Formula::Not(a) | Formula::Next(a) | Formula::Eventually(a) | Formula::Always(a) => {
                let op = match f {
                    Formula::Not(_) => "!",
                    Formula::Next(_) => "X ",
                    Formula::Eventually(_) => "F ",
                    _ => "G ",
                };
                write!(out, "{op}")?;
                self.child(a, a.precedence() < prec, out)
            }
            // `&` and `|` associate to the left, `U` to the right.
            Formula::And(a, b) | Formula::Or(a, b) => {
                let op = if matches!(f, Formula::And(..)) {
                    " & "
                } else {
                    " | "
                };
                self.child(a, a.precedence() < prec, out)?;
                write!(out, "{op}")?;
                self.child(b, b.precedence() <= prec, out)
            }
            Formula::Until(a, b) => {
                self.child(a, a.precedence() <= prec, out)?;
                write!(out, " U ")?;
                self.child(b, b.precedence() < prec, out)
            }
        }
    }
}
