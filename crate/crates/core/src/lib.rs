//! Cluster statistics of collisional particle systems.
//!
//! Particles are linked when they collide; the connected components of the
//! collision graph up to time `t` are the clusters. The crate provides the
//! closed-form cluster-size laws of the Maxwell-molecule gas
//! ([`analytics`], [`trees`]), two particle engines that produce collision
//! logs ([`md`] for hard spheres, [`dsmc`] for the stochastic Maxwell gas),
//! cluster extraction from logs ([`clusters`]) and the ensemble harness
//! behind the `clusterkin` binary ([`experiments`]).
//!
//! The analytic code is generic over [`scalar::Real`]; the `*64` aliases
//! below fix it to `f64`.

pub mod analytics;
pub mod clusters;
pub mod collision;
pub mod dsmc;
pub mod error;
pub mod experiments;
pub mod log;
pub mod md;
pub mod scalar;
pub mod seed;
pub mod trees;

pub use error::{Error, Result};

pub type KineticTime64 = analytics::KineticTime<f64>;
pub type SeriesPolicy64 = analytics::SeriesPolicy<f64>;
pub type SeriesValue64 = analytics::SeriesValue<f64>;
pub type AnalyticDistribution64 = analytics::AnalyticDistribution<f64>;
pub type ConjugateSolution64 = analytics::ConjugateSolution<f64>;
pub type PowerLawFit64 = analytics::PowerLawFit<f64>;
pub type DampingScale64 = analytics::DampingScale<f64>;
pub type ScatteringLaw64 = collision::ScatteringLaw<f64>;
