//! Thermodynamically consistent neural surrogates for interfacial
//! traction-separation relations.
//!
//! A small `tanh` network maps a loading point `(|δ|, φ)` to the normal and
//! tangential J-integrals `(J_n, J_t)`. Training minimizes a weighted sum of
//! the data misfit and three penalties evaluated on a collocation grid of
//! fixed-angle loading paths:
//!
//! * energy is never released along a monotonic loading path,
//! * damage grows fastest along the loading path rather than across paths,
//! * the traction vector stays aligned with the separation vector.
//!
//! The [`audit`] module measures how often any J surface breaks those rules.
//!
//! ```
//! use tcnn_core::oracle::{reproduction_dataset, OracleParams};
//!
//! let data = reproduction_dataset(&OracleParams::consistent()).unwrap();
//! assert_eq!(data.len(), 236);
//! ```

pub mod audit;
pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod losses;
pub mod mlp;
pub mod oracle;
pub mod trainer;
pub mod tsr;

pub use error::{Error, Result};
