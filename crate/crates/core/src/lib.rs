//! Continuous-time quantum walks (CTQW) on graphs under generalized dynamical
//! percolation.
//!
//! The walker evolves under the graph-Laplacian Hamiltonian `H = -J0 L`, with
//! tunneling amplitudes (and optionally on-site energies) fluctuating as
//! random telegraph noise: each coupling switches between `J0 - nu` and
//! `J0 + nu` at percolation rate `gamma`. Noise trajectories are piecewise
//! constant, so propagation is event-driven and exact between switches; noisy
//! observables are Monte Carlo averages over trajectories (and, on the line,
//! over randomly drawn spatial correlation domains).
//!
//! The crate covers:
//!
//! - [`graph`]: line/ring, complete, star and custom graphs, plus Laplacians.
//! - [`noise`]: RTN trajectory sampling, correlation-domain partitions, and
//!   reproducible per-source RNG streams.
//! - [`dynamics`]: noisy Hamiltonian assembly, exact piecewise propagation,
//!   and ensemble averaging.
//! - [`observables`]: position distributions, spreading variance, the Bessel
//!   oracle for the noiseless line, and propagation-regime classification.
//! - [`search`]: spatial search on complete/star graphs, noiseless baselines,
//!   noisy runs, and running-time scaling fits.
//! - [`multiparticle`]: two-particle walks with shared noise, contact
//!   interactions and exchange statistics.
//! - [`cli`]: config-driven experiment runner behind the `perqwalk` binary.

pub mod bessel;
pub mod cli;
pub mod dynamics;
pub mod graph;
pub mod linalg;
pub mod multiparticle;
pub mod noise;
pub mod observables;
pub mod search;

mod error;
mod operator;
mod propagator;

pub use error::{Error, Result};
pub use graph::Graph;
pub use noise::{DomainPartition, NoiseSpec, NoiseTarget, RtnTrajectory};
pub use dynamics::{EnsembleOptions, EnsembleResult, HamiltonianSpec, StateVector};
pub use search::{SearchProblem, SearchResult, TargetPlacement};
