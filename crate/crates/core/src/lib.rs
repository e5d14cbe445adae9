//! Random-loop representation of quantum Heisenberg-type spin systems in
//! transverse fields.
//!
//! The crate samples the Poisson bridge process, traces its loop
//! decomposition, evaluates loop activities, and turns all of it into
//! importance-sampling estimators for the partition function, the transverse
//! two-point function and Schwinger functions. A dense exact-diagonalization
//! oracle checks those estimators on small lattices, and the [`percolation`]
//! module provides the passage-time machinery behind exponential decay.
//!
//! Batches of Monte Carlo samples run on rayon when the `parallel` feature is
//! enabled (the default); otherwise, or with [`exec::Execution::Sequential`],
//! they run on the calling thread. Both paths produce bit-identical results.

pub mod bridges;
pub mod config;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod experiment;
pub mod fit;
pub mod lattice;
pub mod loops;
pub mod oracle;
pub mod percolation;
pub mod report;
pub mod rng;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
pub use lattice::Lattice;
pub use weights::{Field, Spin};
