//! Analytic construction of Riemann surfaces of hyperelliptic and trigonal
//! plane curves from radical root formulas, with first- and second-kind
//! period matrices, Abel maps, Riemann theta functions with characteristics,
//! and Kleinian wp-functions, plus the verification battery (Legendre
//! relation, closure identities, Bolza formulas, Jacobi inversion).

pub mod algebra;
pub mod cli;
pub mod cohomology;
pub mod error;
pub mod jacobian;
pub mod periods;
pub mod quad;
pub mod report;
pub mod scalar;
pub mod sheets;
pub mod theta;

pub use algebra::{CurveFamily, CurveSpec, Poly};
pub use error::{Error, Result};
pub use scalar::{c64, C64};
