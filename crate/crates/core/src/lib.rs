//! Bayesian hierarchical multi-layer dissolution ERGMs for weighted
//! signed networks.
//!
//! A weighted signed network is decomposed into nested binary layers plus
//! a sign layer; each layer transition follows an exponential-family model
//! over signed dyad states whose coefficients are partially pooled through
//! a normal / inverse-Wishart hierarchy. Posterior sampling uses an
//! adaptive approximate exchange algorithm with conjugate Gibbs updates
//! for the hyperparameters.
//!
//! Module map:
//! - [`network`]: weighted signed networks, layer stacks, decomposition
//!   and validation, edge-list IO.
//! - [`stats`]: layer-transition sufficient statistics and O(degree)
//!   change statistics.
//! - [`sampler`]: Metropolis-within-Gibbs simulation of transitions and
//!   full cascades.
//! - [`inference`]: the adaptive exchange sampler with hierarchical Gibbs
//!   updates, chain storage and export.
//! - [`gof`]: prior/posterior predictive ensembles, goodness-of-fit
//!   reports, effective sample size.
//! - [`ingest`]: bill-sponsorship pipeline (row centring, cosine
//!   similarity, density-targeted thresholds).
//! - [`oracle`]: exact enumeration and quadrature references backing the
//!   acceptance tests.

pub mod error;
pub mod gof;
pub mod graph;
pub mod inference;
pub mod ingest;
pub mod mvn;
pub mod network;
pub mod oracle;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
