//! Numerical engine for cataclysm deformations of Anosov surface-group
//! representations into SL(n,R).
//!
//! The crate is organized around the objects the deformation needs:
//!
//! * [`liealg`] — Cartan subspace of sl(n,R), root subsets, opposition
//!   involution, Iwasawa decomposition, Busemann cocycle, Cartan projection.
//! * [`flags`] — partial flags, transversality, adapted frames and unipotent
//!   transporters.
//! * [`hypgeom`] — upper half-plane geometry: Möbius actions, axes, crossing
//!   tests in the Minkowski model.
//! * [`surface`] — the genus-2 surface group with an explicit discrete
//!   faithful SL(2,R) representation built from the regular octagon.
//! * [`lamination`] — finite geodesic laminations from multicurves, lifts to
//!   the universal cover and separation chains along transverse arcs.
//! * [`cycles`] — a_theta-valued twisted transverse cycles and the dimension
//!   formulas for their parameter space.
//! * [`anosov`] — representation builders (Hitchin, horocyclic, exterior
//!   square) and eigenflag boundary oracles.
//! * [`cataclysm`] — stretching, slithering and shearing maps, the cataclysm
//!   deformation itself, Busemann recovery and the triviality criterion.
//! * [`suites`] — the randomized verification suites shared by the CLI and
//!   the acceptance tests.

pub mod anosov;
pub mod cataclysm;
pub mod cycles;
pub mod flags;
pub mod hypgeom;
pub mod lamination;
pub mod liealg;
pub mod suites;
pub mod surface;

use thiserror::Error;

/// Errors produced by the geometric and numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("element is not theta-proximal: gap ratio {ratio:.6e} at dimension {dim}")]
    NotProximal { dim: usize, ratio: f64 },
    #[error("flags are not transverse (pairing determinant {det:.3e})")]
    NotTransverse { det: f64 },
    #[error("flag type mismatch")]
    FlagTypeMismatch,
    #[error("numerically singular decomposition (pivot {pivot:.3e})")]
    Singular { pivot: f64 },
    #[error("ill-conditioned transporter solve (residual {residual:.3e})")]
    IllConditioned { residual: f64 },
    #[error("arc is tangent to a leaf (margin {margin:.3e})")]
    Tangent { margin: f64 },
    #[error("crossing set unstable under depth increase: depth {depth} insufficient")]
    DepthInsufficient { depth: usize },
    #[error("arc is not tightly transverse: leaf crossed twice in a row at crossing {index}")]
    NotTightlyTransverse { index: usize },
    #[error("element is not hyperbolic (|trace| = {trace:.6})")]
    NotHyperbolic { trace: f64 },
    #[error("unknown generator index {0}")]
    UnknownGenerator(i32),
    #[error("missing cycle weight for curve `{0}`")]
    MissingWeight(String),
    #[error("weight is not in a_theta (violation {0:.3e})")]
    WeightOutsideATheta(f64),
    #[error("weight is not in the anti-invariant line a' (violation {0:.3e})")]
    WeightOutsideAPrime(f64),
    #[error("relator residual {residual:.3e} exceeds {limit:.3e}")]
    RelatorResidual { residual: f64, limit: f64 },
    #[error("leaves do not share the required endpoint")]
    EndpointsNotShared,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
