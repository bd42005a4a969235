//! Assertion grammar for block-weight propositions and their vector encoding.
//!
//! An assertion is a `&`-separated conjunction of atoms of the form
//! `<block> <op> <grams>` or `<block> <op> <block>`, with
//! `op ∈ {=, !=, <, >, <=, >=}`:
//!
//! ```
//! use def_core::dsl::{parse, Block, Relation};
//!
//! let set = parse("red = 10 & Blue != 20").unwrap();
//! assert_eq!(set.atoms()[1].subject, Block::Blue);
//! assert_eq!(set.atoms()[1].relation, Relation::Neq);
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefVector, Vec5};

/// Number of blocks in the task, and the dimension of every belief vector.
pub const BLOCK_COUNT: usize = 5;

/// The colored blocks, in the fixed component order of every vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Red,
    Blue,
    Green,
    Purple,
    Yellow,
}

impl Block {
    pub const ALL: [Block; BLOCK_COUNT] = [
        Block::Red,
        Block::Blue,
        Block::Green,
        Block::Purple,
        Block::Yellow,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Block> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::Red => "red",
            Block::Blue => "blue",
            Block::Green => "green",
            Block::Purple => "purple",
            Block::Yellow => "yellow",
        }
    }

    /// Case-insensitive lookup by color name.
    pub fn from_name(name: &str) -> Option<Block> {
        Self::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    Eq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Neq => "!=",
            Relation::Lt => "<",
            Relation::Gt => ">",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Relation> {
        Some(match symbol {
            "=" => Relation::Eq,
            "!=" => Relation::Neq,
            "<" => Relation::Lt,
            ">" => Relation::Gt,
            "<=" => Relation::Le,
            ">=" => Relation::Ge,
            _ => return None,
        })
    }

    /// The complementary relation, so that `a R b` holds iff `a R.negate() b` fails.
    pub fn negate(self) -> Relation {
        match self {
            Relation::Eq => Relation::Neq,
            Relation::Neq => Relation::Eq,
            Relation::Lt => Relation::Ge,
            Relation::Ge => Relation::Lt,
            Relation::Gt => Relation::Le,
            Relation::Le => Relation::Gt,
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Eq => lhs == rhs,
            Relation::Neq => lhs != rhs,
            Relation::Lt => lhs < rhs,
            Relation::Gt => lhs > rhs,
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
        }
    }
}

/// A strictly positive, finite weight in grams.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Grams(f64);

impl Grams {
    pub fn new(value: f64) -> Option<Grams> {
        (value.is_finite() && value > 0.0).then_some(Grams(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Grams {
    type Error = String;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Grams::new(value).ok_or_else(|| format!("weight must be finite and positive, got {value}"))
    }
}

impl From<Grams> for f64 {
    fn from(g: Grams) -> f64 {
        g.0
    }
}

impl PartialEq for Grams {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}

impl Eq for Grams {}

impl PartialOrd for Grams {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Grams {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl std::hash::Hash for Grams {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl fmt::Display for Grams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Right-hand side of an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operand {
    Weight(Grams),
    Block(Block),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Weight(g) => g.fmt(f),
            Operand::Block(b) => b.fmt(f),
        }
    }
}

/// One atom: `subject relation object`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Proposition {
    pub subject: Block,
    pub relation: Relation,
    pub object: Operand,
}

impl Proposition {
    pub fn eq_weight(block: Block, grams: f64) -> Proposition {
        Proposition {
            subject: block,
            relation: Relation::Eq,
            object: Operand::Weight(Grams::new(grams).expect("weight must be positive")),
        }
    }

    pub fn negate(self) -> Proposition {
        Proposition {
            relation: self.relation.negate(),
            ..self
        }
    }

    /// Positive polarity: every relation except `!=`.
    pub fn is_positive(&self) -> bool {
        self.relation != Relation::Neq
    }

    /// `block = grams`: the only form that can be assigned directly to a belief.
    pub fn specific_weight(&self) -> Option<(Block, f64)> {
        match (self.relation, self.object) {
            (Relation::Eq, Operand::Weight(g)) => Some((self.subject, g.get())),
            _ => None,
        }
    }

    /// Truth of the atom under a (possibly partial) weight assignment.
    /// `None` when a mentioned block has no value.
    pub fn eval(&self, weights: &[Option<f64>; BLOCK_COUNT]) -> Option<bool> {
        let lhs = weights[self.subject.index()]?;
        let rhs = match self.object {
            Operand::Weight(g) => g.get(),
            Operand::Block(b) => weights[b.index()]?,
        };
        Some(self.relation.holds(lhs, rhs))
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.subject,
            self.relation.symbol(),
            self.object
        )
    }
}

/// A conjunction of atoms with at most one atom per subject block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AssertionSet {
    atoms: Vec<Proposition>,
}

impl AssertionSet {
    /// Builds a set, rejecting a second atom on the same subject block.
    pub fn new(atoms: Vec<Proposition>) -> Result<AssertionSet, Block> {
        let mut seen = [false; BLOCK_COUNT];
        for atom in &atoms {
            let i = atom.subject.index();
            if seen[i] {
                return Err(atom.subject);
            }
            seen[i] = true;
        }
        Ok(AssertionSet { atoms })
    }

    pub fn atoms(&self) -> &[Proposition] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atom-wise negation (the reading used for denials).
    pub fn negated(&self) -> AssertionSet {
        AssertionSet {
            atoms: self.atoms.iter().map(|a| a.negate()).collect(),
        }
    }
}

impl fmt::Display for AssertionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            atom.fmt(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty assertion")]
    EmptyInput,
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("block `{0}` is mentioned twice")]
    DuplicateBlock(Block),
    #[error("weight `{0}` is not a positive finite number")]
    NonPositiveWeight(String),
    #[error("atom compares `{0}` with itself")]
    SelfComparison(Block),
    #[error("expected {0}")]
    Expected(&'static str),
}

/// A parse failure with the byte span of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {}..{}", span.start, span.end)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Range<usize>,
}

impl ParseError {
    fn new(kind: ParseErrorKind, span: Range<usize>) -> ParseError {
        ParseError { kind, span }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TokenKind {
    Word,
    Number,
    Op,
    And,
}

#[derive(Debug, Clone)]
struct Token<'a> {
    kind: TokenKind,
    text: &'a str,
    span: Range<usize>,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            TokenKind::Word
        } else if c.is_ascii_digit() || c == b'.' || c == b'-' || c == b'+' {
            i += 1;
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'_')
            {
                i += 1;
            }
            TokenKind::Number
        } else if c == b'&' {
            i += 1;
            TokenKind::And
        } else {
            // Operator run: any punctuation up to the next operand.
            while i < bytes.len() {
                let b = bytes[i];
                if b.is_ascii_whitespace()
                    || b.is_ascii_alphanumeric()
                    || matches!(b, b'&' | b'.' | b'-' | b'+' | b'_')
                    || !b.is_ascii()
                {
                    break;
                }
                i += 1;
            }
            if i == start {
                // Non-ASCII character: consume it whole.
                i += text[start..].chars().next().map_or(1, char::len_utf8);
            }
            TokenKind::Op
        };
        tokens.push(Token {
            kind,
            text: &text[start..i],
            span: start..i,
        });
    }
    tokens
}

fn parse_operand(token: &Token<'_>) -> Result<Operand, ParseError> {
    match token.kind {
        TokenKind::Word => Block::from_name(token.text)
            .map(Operand::Block)
            .ok_or_else(|| {
                ParseError::new(
                    ParseErrorKind::UnknownBlock(token.text.to_string()),
                    token.span.clone(),
                )
            }),
        TokenKind::Number => token
            .text
            .parse::<f64>()
            .ok()
            .and_then(Grams::new)
            .map(Operand::Weight)
            .ok_or_else(|| {
                ParseError::new(
                    ParseErrorKind::NonPositiveWeight(token.text.to_string()),
                    token.span.clone(),
                )
            }),
        _ => Err(ParseError::new(
            ParseErrorKind::Expected("a weight or a block"),
            token.span.clone(),
        )),
    }
}

fn parse_atom(tokens: &[Token<'_>], end: usize) -> Result<Proposition, ParseError> {
    let expected = |what, span: Range<usize>| ParseError::new(ParseErrorKind::Expected(what), span);
    let subject_tok = &tokens[0];
    let subject = match subject_tok.kind {
        TokenKind::Word => Block::from_name(subject_tok.text).ok_or_else(|| {
            ParseError::new(
                ParseErrorKind::UnknownBlock(subject_tok.text.to_string()),
                subject_tok.span.clone(),
            )
        })?,
        _ => return Err(expected("a block name", subject_tok.span.clone())),
    };
    let op_tok = tokens
        .get(1)
        .ok_or_else(|| expected("a relation", end..end))?;
    let relation = match op_tok.kind {
        TokenKind::Op => Relation::from_symbol(op_tok.text).ok_or_else(|| {
            ParseError::new(
                ParseErrorKind::UnknownRelation(op_tok.text.to_string()),
                op_tok.span.clone(),
            )
        })?,
        TokenKind::Word => {
            return Err(ParseError::new(
                ParseErrorKind::UnknownRelation(op_tok.text.to_string()),
                op_tok.span.clone(),
            ))
        }
        _ => return Err(expected("a relation", op_tok.span.clone())),
    };
    let obj_tok = tokens
        .get(2)
        .ok_or_else(|| expected("a weight or a block", end..end))?;
    let object = parse_operand(obj_tok)?;
    if let Some(extra) = tokens.get(3) {
        return Err(expected("`&` or end of input", extra.span.clone()));
    }
    if object == Operand::Block(subject) {
        return Err(ParseError::new(
            ParseErrorKind::SelfComparison(subject),
            subject_tok.span.start..obj_tok.span.end,
        ));
    }
    Ok(Proposition {
        subject,
        relation,
        object,
    })
}

/// Parses atoms without the one-atom-per-block restriction, returning each
/// atom with its span.
pub(crate) fn parse_atoms(text: &str) -> Result<Vec<(Proposition, Range<usize>)>, ParseError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(ParseError::new(ParseErrorKind::EmptyInput, 0..text.len()));
    }
    let mut atoms = Vec::new();
    let mut segment_start = 0;
    for seg in tokens.split(|t| t.kind == TokenKind::And) {
        let span_end = seg.last().map_or(segment_start, |t| t.span.end);
        if seg.is_empty() {
            // Dangling or doubled `&`.
            let at = tokens
                .iter()
                .filter(|t| t.kind == TokenKind::And)
                .map(|t| t.span.clone())
                .find(|s| s.start >= segment_start)
                .unwrap_or(text.len()..text.len());
            return Err(ParseError::new(ParseErrorKind::EmptyInput, at));
        }
        let atom = parse_atom(seg, span_end)?;
        let span = seg[0].span.start..span_end;
        segment_start = span_end;
        atoms.push((atom, span));
    }
    Ok(atoms)
}

/// Parses an assertion string into a conjunction of atoms, in input order.
pub fn parse(text: &str) -> Result<AssertionSet, ParseError> {
    let atoms = parse_atoms(text)?;
    let mut seen = [false; BLOCK_COUNT];
    for (atom, span) in &atoms {
        let i = atom.subject.index();
        if seen[i] {
            return Err(ParseError::new(
                ParseErrorKind::DuplicateBlock(atom.subject),
                span.clone(),
            ));
        }
        seen[i] = true;
    }
    Ok(AssertionSet {
        atoms: atoms.into_iter().map(|(a, _)| a).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("atom `{0}` needs a nonzero believed magnitude for its reference block")]
    MissingBeliefContext(Proposition),
}

/// What `encode` needs besides the atoms: a random source for the bound
/// jitter and, for block-to-block atoms, the listener's current belief.
pub struct EncodingContext<'a, R: Rng + ?Sized> {
    pub rng: &'a mut R,
    pub belief: Option<&'a BeliefVector>,
}

impl<'a, R: Rng + ?Sized> EncodingContext<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        EncodingContext { rng, belief: None }
    }

    pub fn with_belief(rng: &'a mut R, belief: &'a BeliefVector) -> Self {
        EncodingContext {
            rng,
            belief: Some(belief),
        }
    }
}

/// Vector for a conjunction: `=` gives `+w`, `!=` gives `-w`, upper bounds
/// give `w - u` and lower bounds `w + u` with `u ~ U(0,1)` open; unmentioned
/// blocks stay 0.
pub fn encode<R: Rng + ?Sized>(
    set: &AssertionSet,
    ctx: &mut EncodingContext<'_, R>,
) -> Result<Vec5, EncodeError> {
    let mut out = [0.0; BLOCK_COUNT];
    for atom in &set.atoms {
        let value = match atom.object {
            Operand::Weight(g) => g.get(),
            Operand::Block(reference) => {
                let magnitude = ctx
                    .belief
                    .map(|b| b.get(reference).abs())
                    .filter(|m| *m > 0.0 && m.is_finite());
                magnitude.ok_or(EncodeError::MissingBeliefContext(*atom))?
            }
        };
        out[atom.subject.index()] = match atom.relation {
            Relation::Eq => value,
            Relation::Neq => -value,
            Relation::Lt | Relation::Le => value - ctx.rng.sample::<f64, _>(Open01),
            Relation::Gt | Relation::Ge => value + ctx.rng.sample::<f64, _>(Open01),
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn enc(text: &str, seed: u64) -> Vec5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        encode(&parse(text).unwrap(), &mut EncodingContext::new(&mut rng)).unwrap()
    }

    #[test]
    fn block_order_is_fixed() {
        let names: Vec<_> = Block::ALL.iter().map(|b| b.name()).collect();
        assert_eq!(names, ["red", "blue", "green", "purple", "yellow"]);
        for (i, b) in Block::ALL.iter().enumerate() {
            assert_eq!(b.index(), i);
            assert_eq!(Block::from_index(i), Some(*b));
        }
        assert_eq!(Block::from_name("YeLLow"), Some(Block::Yellow));
    }

    #[test]
    fn parses_conjunction_in_order() {
        let set = parse("red=10 & blue=10").unwrap();
        assert_eq!(
            set.atoms(),
            &[
                Proposition::eq_weight(Block::Red, 10.0),
                Proposition::eq_weight(Block::Blue, 10.0)
            ]
        );
    }

    #[test]
    fn parses_negation_and_block_objects() {
        let set = parse("green!=20").unwrap();
        assert_eq!(set.atoms()[0].relation, Relation::Neq);
        assert!(!set.atoms()[0].is_positive());

        let set = parse("  PURPLE>=green&yellow < 40.5 ").unwrap();
        assert_eq!(set.atoms()[0].object, Operand::Block(Block::Green));
        assert_eq!(set.atoms()[0].relation, Relation::Ge);
        assert_eq!(
            set.atoms()[1].object,
            Operand::Weight(Grams::new(40.5).unwrap())
        );
    }

    #[test]
    fn duplicate_block_is_rejected_with_span() {
        let err = parse("red=10 & red=20").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateBlock(Block::Red));
        assert_eq!(err.span, 9..15);
    }

    #[test]
    fn error_kinds_carry_spans() {
        let err = parse("orange=10").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownBlock("orange".into()));
        assert_eq!(err.span, 0..6);

        let err = parse("red ~ 10").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownRelation("~".into()));
        assert_eq!(err.span, 4..5);

        let err = parse("red == 10").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownRelation("==".into()));

        let err = parse("red = 0").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonPositiveWeight("0".into()));
        let err = parse("red = -5").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonPositiveWeight("-5".into()));

        assert_eq!(parse("   ").unwrap_err().kind, ParseErrorKind::EmptyInput);
        assert_eq!(
            parse("red=10 &").unwrap_err().kind,
            ParseErrorKind::EmptyInput
        );
        assert_eq!(
            parse("red=ten").unwrap_err().kind,
            ParseErrorKind::UnknownBlock("ten".into())
        );
        assert!(matches!(
            parse("red =").unwrap_err().kind,
            ParseErrorKind::Expected(_)
        ));
        assert_eq!(
            parse("red < red").unwrap_err().kind,
            ParseErrorKind::SelfComparison(Block::Red)
        );
    }

    #[test]
    fn encodes_equalities_and_negations() {
        assert_eq!(enc("red=10 & blue=10", 0), [10.0, 10.0, 0.0, 0.0, 0.0]);
        assert_eq!(enc("green!=20", 0), [0.0, 0.0, -20.0, 0.0, 0.0]);
    }

    #[test]
    fn encodes_bounds_with_open_unit_jitter() {
        let v = enc("yellow<40", 7);
        assert_eq!(&v[..4], &[0.0; 4]);
        assert!(v[4] > 39.0 && v[4] < 40.0, "{v:?}");
        assert_eq!(v, enc("yellow<40", 7));

        let v = enc("yellow>40", 7);
        assert!(v[4] > 40.0 && v[4] < 41.0);
        // Non-strict bounds share the strict encoding.
        assert_eq!(enc("yellow<=40", 7), enc("yellow<40", 7));
    }

    #[test]
    fn block_reference_needs_belief() {
        let set = parse("purple > green").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = encode(&set, &mut EncodingContext::new(&mut rng)).unwrap_err();
        assert!(matches!(err, EncodeError::MissingBeliefContext(_)));

        let zero = BeliefVector::new([10.0, 0.0, 0.0, 0.0, 0.0]);
        let err = encode(&set, &mut EncodingContext::with_belief(&mut rng, &zero)).unwrap_err();
        assert!(matches!(err, EncodeError::MissingBeliefContext(_)));

        let belief = BeliefVector::new([10.0, 10.0, 20.0, 0.0, 0.0]);
        let v = encode(&set, &mut EncodingContext::with_belief(&mut rng, &belief)).unwrap();
        assert!(v[3] > 20.0 && v[3] < 21.0);

        let v = encode(
            &parse("blue != red").unwrap(),
            &mut EncodingContext::with_belief(&mut rng, &belief),
        )
        .unwrap();
        assert_eq!(v, [0.0, -10.0, 0.0, 0.0, 0.0]);
    }

    fn arb_proposition() -> impl Strategy<Value = Proposition> {
        let relation = prop::sample::select(vec![
            Relation::Eq,
            Relation::Neq,
            Relation::Lt,
            Relation::Gt,
            Relation::Le,
            Relation::Ge,
        ]);
        let block = (0..BLOCK_COUNT).prop_map(|i| Block::ALL[i]);
        let weight =
            (1u32..100_000).prop_map(|n| Operand::Weight(Grams::new(n as f64 / 100.0).unwrap()));
        (
            block.clone(),
            relation,
            prop_oneof![weight, block.prop_map(Operand::Block)],
        )
            .prop_filter("no self comparison", |(s, _, o)| *o != Operand::Block(*s))
            .prop_map(|(subject, relation, object)| Proposition {
                subject,
                relation,
                object,
            })
    }

    fn arb_set() -> impl Strategy<Value = AssertionSet> {
        prop::collection::vec(arb_proposition(), 1..=BLOCK_COUNT).prop_map(|atoms| {
            let mut seen = [false; BLOCK_COUNT];
            let atoms = atoms
                .into_iter()
                .filter(|a| !std::mem::replace(&mut seen[a.subject.index()], true))
                .collect();
            AssertionSet::new(atoms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn format_then_parse_round_trips(set in arb_set()) {
            prop_assert_eq!(parse(&set.to_string()).unwrap(), set);
        }

        #[test]
        fn encoding_is_deterministic_and_sparse(set in arb_set(), seed in any::<u64>()) {
            let belief = BeliefVector::new([10.0, 10.0, 20.0, 30.0, 50.0]);
            let run = |seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                encode(&set, &mut EncodingContext::with_belief(&mut rng, &belief)).unwrap()
            };
            let v = run(seed);
            prop_assert_eq!(v, run(seed));
            for b in Block::ALL {
                let mentioned = set.atoms().iter().any(|a| a.subject == b);
                prop_assert_eq!(v[b.index()] != 0.0, mentioned);
            }
        }

        #[test]
        fn bounds_are_strict(w in 1.0f64..1000.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lt = AssertionSet::new(vec![Proposition { subject: Block::Yellow, relation: Relation::Lt, object: Operand::Weight(Grams::new(w).unwrap()) }]).unwrap();
            let gt = AssertionSet::new(vec![Proposition { subject: Block::Yellow, relation: Relation::Gt, object: Operand::Weight(Grams::new(w).unwrap()) }]).unwrap();
            let below = encode(&lt, &mut EncodingContext::new(&mut rng)).unwrap()[4];
            let above = encode(&gt, &mut EncodingContext::new(&mut rng)).unwrap()[4];
            prop_assert!(below < w && below > w - 1.0);
            prop_assert!(above > w && above < w + 1.0);
        }
    }
}
