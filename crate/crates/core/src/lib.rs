//! Thermal quench dynamics of the mixed-field Ising chain.
//!
//! A thermal expectation `Tr[rho O(t)]` is rebuilt from pure-state matrix
//! elements `<n|O(t)|m>` weighted by a (possibly truncated, possibly
//! sampled) initial density matrix. The crate provides the pieces:
//!
//! - [`model`]: basis encoding, Hamiltonian and order parameters
//! - [`exact`]: exact-diagonalization oracle
//! - [`dmqmc`]: density-matrix quantum Monte Carlo sampler
//! - [`truncation`]: magnitude truncation and Frobenius weights
//! - [`symmetry`]: symmetry orbits that cut the number of simulations
//! - [`dynamics`]: pure-state propagation and reconstruction
//! - [`circuits`]: state-preparation circuits and the Hadamard test
//! - [`cli`]: config-driven batch front end

pub mod circuits;
pub mod cli;
pub mod density;
pub mod dmqmc;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod krylov;
pub mod model;
pub mod series;
pub mod symmetry;
pub mod truncation;

pub use density::{DensityMatrix, Entry, Source};
pub use error::{Error, Result};
pub use model::{Basis, BasisState, ModelParams, Observable, ObservableKind, C64};
pub use series::{SeriesMeta, TimeSeries};
