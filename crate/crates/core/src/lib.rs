//! Exact symbolic calculus for N=1 superconformal sewing.
//!
//! The crate implements, at user-chosen truncation orders with exact
//! Gaussian-rational arithmetic:
//!
//! * finite Grassmann algebras (body/soul decomposition, inverses,
//!   exponentials, logarithms) and two bookkeeping coefficient rings;
//! * truncated Laurent superfunctions in one even and one odd variable with
//!   the superconformal structure operations (composition, reversion,
//!   square roots, the odd derivation D);
//! * the superderivations L_j, G_{j−1/2}, exponentials of derivation sums,
//!   and the coordinate bijections between series and exponential data;
//! * the formal sewing-equation solver with its boundary conditions, the
//!   canonical Ψ-series, Θ-series, and the normal-ordering identity;
//! * the abstract Neveu-Schwarz algebra, Verma modules with positive-energy
//!   truncation, and the central-charge series Γ;
//! * the moduli-space data type for superspheres with tubes, the sewing
//!   operation, the symmetric-group action, one-parameter flows,
//!   superprojective transformations, and the tangent-space bracket.

pub mod alpha;
pub mod bigraded;
pub mod coeff;
pub mod deriv;
pub mod error;
pub mod grassmann;
pub mod json;
pub mod moduli;
pub mod nsalg;
pub mod sampling;
pub mod scalar;
pub mod series;
pub mod sewing;
pub mod verify;
pub mod verma;

pub use error::{Error, Result};
