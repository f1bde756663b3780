//! Bayesian small-area estimation of binomial incidence rates with
//! measured — and optionally constrained — prior informativeness.
//!
//! The crate provides:
//!
//! - [`informativeness`]: the closed-form link between beta and
//!   logitnormal priors and the "equivalent prior events" measures for
//!   independent and CAR priors;
//! - [`graph`]: validated spatial adjacency for the CAR model;
//! - [`mcmc`]: a seed-reproducible Metropolis-within-Gibbs engine with
//!   adaptive proposals and convergence diagnostics;
//! - [`models`]: the hierarchical beta-binomial, hierarchical
//!   logitnormal, and BYM/CAR model fits, with optional constraints on
//!   the global informativeness;
//! - [`simulation`]: the beta-binomial vs logitnormal comparison study;
//! - [`summaries`]: posterior summaries, crude rates, and between-group
//!   disparity estimation;
//! - [`io`]: count-table ingestion and stable result/metadata output.

pub mod graph;
pub mod informativeness;
pub mod mcmc;
pub mod models;
pub mod simulation;
pub mod summaries;
pub mod io;

mod fmt;
mod stats;
