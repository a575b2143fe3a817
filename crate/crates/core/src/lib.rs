//! Entanglement-enhanced covert phase sensing in Gaussian phase space.
//!
//! The phase-space engine ([`gaussian`]) is generic over [`Real`]; receiver,
//! adversary and Monte Carlo layers work in `f64`, and the Fisher-information
//! routine switches to double-double internally.

pub mod adversary;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod metrology;
pub mod montecarlo;
pub mod receivers;
pub mod scalar;
pub mod sources;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, PhotonStats, SymplecticOp};
pub use linalg::Mat;
pub use scalar::Real;
pub use sources::{ProtocolVariant, SensingScenario};

/// Double-double scalar used for high-precision fidelity differences.
pub use twofloat::TwoFloat;

pub type State = GaussianState<f64>;
pub type State32 = GaussianState<f32>;
pub type StateDD = GaussianState<TwoFloat>;
pub type Symplectic = SymplecticOp<f64>;
