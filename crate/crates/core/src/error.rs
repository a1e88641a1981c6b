use thiserror::Error;

use crate::qarith::Flavor;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level r = {0} is below 3")]
    LevelTooSmall(u32),

    #[error("SO(3) roots need an odd level, got r = {0}")]
    EvenLevelForSo3(u32),

    #[error("root exponent {exponent} does not give a primitive root of unity at level {r}")]
    NotPrimitive { r: u32, exponent: u32 },

    #[error("operation requires a {expected:?} root, context is {found:?}")]
    FlavorMismatch { expected: Flavor, found: Flavor },

    #[error("color {color} is outside I_r = {{0, ..., {max}}}")]
    ColorOutOfRange { color: u32, max: u32 },

    #[error("argument {value} out of range: {reason}")]
    OutOfRange { value: i64, reason: &'static str },

    #[error("inadmissible colors {0:?}")]
    Inadmissible(Vec<u32>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid triangulation: {0}")]
    Validation(String),

    #[error("link expression: {0}")]
    LinkSyntax(String),

    #[error("invalid link: {0}")]
    InvalidLink(String),

    #[error("expected {expected} colors, got {found}")]
    ColorCount { expected: usize, found: usize },

    #[error("colors must be at least 1, got {0}")]
    NonPositiveColor(i64),

    #[error("connected sum is undefined at color {0}: the quantum integer vanishes")]
    VanishingQuantumInteger(i64),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}
