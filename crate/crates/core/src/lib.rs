//! Variational adiabatic gauge transformation (VAGT): Pauli algebra, a
//! statevector simulator, layered ansätze, the per-step linear system and
//! the driver that follows `U_μ` from `μ = 0` to `λ`.

pub mod ansatz;
pub mod cheap_n2;
pub mod effective;
pub mod error;
pub mod estimator;
pub mod models;
pub mod oracle;
pub mod pauli;
pub mod simulator;
pub mod vagt;

pub use ansatz::{builtin_ansatz, AnsatzSpec, U0};
pub use error::{Error, Result};
pub use estimator::Strategy;
pub use models::HamiltonianPair;
pub use pauli::{Pauli, PauliString, PauliSum};
pub use vagt::{run, VagtConfig, VagtResult};

/// Dense complex matrix used by the simulator and the oracle.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
