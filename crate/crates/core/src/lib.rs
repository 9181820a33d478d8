//! Estimation of dense stochastic block models explored by a random walk.
//!
//! A random walk on a step graphon visits "continuous vertices" with a bias
//! towards well-connected classes. The walk path, completed with independent
//! edges between the visited positions, is the observed graph. This crate
//! provides:
//!
//! * the SBM parameterization and its biased stationary profile ([`graphon`], [`sbm`]),
//! * the walk and graph simulator with sufficient statistics ([`sampler`]),
//! * subgraph densities and the truncated `d_sub` distance ([`metrics`]),
//! * the random-walk likelihood and its complete-data maximizer ([`mle`]),
//! * stochastic approximation EM for unobserved types ([`saem`]),
//! * three corrections of the biased class weights ([`debias`]),
//! * a seeded Monte Carlo harness ([`harness`]).

pub mod debias;
pub mod error;
pub mod graphon;
pub mod harness;
pub mod metrics;
pub mod mle;
pub mod optim;
pub mod saem;
pub mod sampler;
pub mod sbm;

pub use error::{Error, Result};
pub use graphon::BiasedProfile;
pub use mle::{Estimate, Method};
pub use sampler::{Adjacency, CountStats, EmpiricalCdf, RdsSample};
pub use sbm::{ClassPartition, SbmParams, SymMatrix};
