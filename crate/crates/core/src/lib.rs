//! Exact geodesic and billiard flow on polysquare (square-tiled) surfaces.
//!
//! Coordinates, slopes and lengths live in a real quadratic field and every
//! geometric decision is made by an exact sign test. The crate covers finite
//! and lazily generated infinite surfaces, the shortline renormalization of
//! quadratic-irrational geodesics, rational-direction cylinder decompositions,
//! and the density and escape measurements built on top of them.

pub mod analysis;
pub mod contfrac;
pub mod cylinders;
pub mod exactnum;
pub mod experiment;
pub mod flow;
pub mod generators;
pub mod shortline;
pub mod surface;

pub use contfrac::{BadApproxCertificate, ContinuedFraction, Convergents};
pub use exactnum::QuadRat;
pub use flow::{CrossingEvent, EdgeInterval, PhasePoint, Trajectory, TraceStatus};
pub use shortline::{ShortlineChain, UnitType};
pub use surface::{FaceId, Side, Street, Surface};

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("incompatible quadratic fields: sqrt({0}) and sqrt({1})")]
    FieldMismatch(u64, u64),
    #[error("cannot parse number {0:?}: {1}")]
    Parse(String, String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("face {0} is not part of the surface")]
    UnknownFace(String),
    #[error("unreachable within budget: {0}")]
    Unreachable(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("coefficient overflow in fast tracer")]
    Overflow,
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
