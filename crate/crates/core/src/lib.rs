//! Mass-action reaction mechanism toolkit.
//!
//! The crate enumerates chemically admissible reaction mechanisms for a given
//! species count, analyzes network structure (linkage classes, deficiency,
//! mass conservation, detailed balance), simulates the induced kinetic ODEs,
//! fits rate coefficients to concentration-time data, and screens candidate
//! mechanisms against a dataset ranked by information criteria.

pub mod analysis; // FHJ graph, deficiency, mass conservation, detailed balance
pub mod cli; // command-line surface
pub mod data; // CSV ingestion, fixtures, config files, plot emission
pub mod enumeration; // complexes, steps, mechanism streams, counting formulas
pub mod fitting; // least-squares estimation, DB-constrained parametrization
pub mod kinetics; // induced ODE right-hand side, integration, noisy sampling
pub mod linalg; // exact rational elimination and simplex
pub mod lm; // Levenberg-Marquardt core
pub mod mechanism; // species, complexes, steps, mechanisms, text grammar
pub mod ode; // Dormand-Prince 5(4) with dense output
pub mod pipeline; // screening, ranking, JSONL persistence

mod error;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
