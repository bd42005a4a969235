//! Dynamic epistemic friction: a small proposition language over block
//! weights, vector belief updates with friction, a possible-worlds oracle,
//! common-ground banks, a friction equilibrium solver and the evaluation
//! harness used to predict a group's final accepted facts.

pub mod belief;
pub mod common_ground;
pub mod del;
pub mod dialogue;
pub mod dsl;
pub mod equilibrium;
pub mod eval;

pub use belief::{def_update, direct_assign, BeliefVector, FrictionConfig};
pub use dsl::{parse, Block, Proposition, Relation};

/// Any failure surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] dsl::ParseError),
    #[error(transparent)]
    Encode(#[from] dsl::EncodeError),
    #[error(transparent)]
    Belief(#[from] belief::BeliefError),
    #[error(transparent)]
    Del(#[from] del::DelError),
    #[error(transparent)]
    Bank(#[from] common_ground::BankError),
    #[error(transparent)]
    Dialogue(#[from] dialogue::DialogueError),
    #[error(transparent)]
    Equilibrium(#[from] equilibrium::EquilibriumError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
