//! Quantum correlation measures and the conditional-entropy collapse on
//! premeasured states.

pub mod error;
pub mod linalg;
pub mod sdp;
pub mod states;
pub mod premeasurement;
pub mod divergence;
pub mod optimize;
pub mod entropies;
pub mod io;
pub mod correlations;
pub mod smooth;
pub mod uncertainty;

pub use error::{Error, Result};
