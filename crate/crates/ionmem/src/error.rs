//! Error type shared across the crate.

use crate::angular::HalfInt;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A (j, m) pair is out of range or has mismatched parity.
    #[error("invalid quantum numbers for {name}: j = {j}, m = {m}")]
    InvalidQuantumNumbers {
        name: &'static str,
        j: HalfInt,
        m: HalfInt,
    },

    #[error("angular momenta violate the triangle rule: ({j1}, {j2}, {j3})")]
    TriangleViolation {
        j1: HalfInt,
        j2: HalfInt,
        j3: HalfInt,
    },

    #[error("manifolds {lower} and {upper} are not dipole-coupled")]
    NotDipoleCoupled {
        lower: &'static str,
        upper: &'static str,
    },

    #[error("sublevel m = {m} does not exist in {manifold}")]
    NoSuchSublevel { manifold: &'static str, m: HalfInt },

    #[error("states live in different manifolds: {a} vs {b}")]
    ManifoldMismatch { a: &'static str, b: &'static str },

    #[error("operation requires a nonzero state")]
    ZeroState,

    #[error("angle {name} = {value} rad is outside [0, pi]")]
    AngleRange { name: &'static str, value: f64 },

    #[error("sublevel m = {m} cannot be reached from S1/2 with |dm| <= 2 transfer pulses")]
    UnreachableSublevel { m: HalfInt },

    #[error("unknown scheme '{0}' (expected a catalog name a-e or a readable file path)")]
    UnknownScheme(String),

    #[error("invalid scheme record: {0}")]
    InvalidScheme(String),

    #[error("invalid search space: {0}")]
    InvalidSearchSpace(String),

    #[error("sweep needs at least 2 steps")]
    TooFewSteps,

    #[error("unknown sweep parameter '{0}'")]
    UnknownParameter(String),

    #[error("cannot parse '{0}' as a half-integer (expected forms: 2, -3/2)")]
    ParseHalfInt(String),
}
