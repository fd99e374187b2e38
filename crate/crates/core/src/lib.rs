//! A marriage market in which singles meet partners directly or through
//! friends, and in which friendships are a costly investment.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`] holds the market primitives and socialization profiles.
//! - [`rates`] evaluates the closed-form and finite-population meeting
//!   rates, expected utilities and marriage rates through friends.
//! - [`equilibrium`] solves for interior symmetric socialization equilibria
//!   with one or two education types, plus the comparative-statics
//!   derivative of the one-type model.
//! - [`sweep`] runs parameter grids, detects humps and writes CSV/JSON.
//! - [`simulator`] realizes the model on sampled friendship graphs and
//!   checks the large-market formulas against Monte Carlo frequencies.
//! - [`verify`] bundles the invariant suites behind `matchnet verify`.
//!
//! All numerical code up to the sweep is generic over the floating-point
//! type through [`Scalar`]. The aliases below fix it to `f64`, which is what
//! the simulator and the command-line tool use.

pub mod equilibrium;
pub mod error;
pub mod numdiff;
pub mod params;
pub mod rates;
pub mod scalar;
pub mod simulator;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use params::{Education, ModelParams, Profile};
pub use scalar::Scalar;

/// Market parameters in double precision.
pub type Params = params::ModelParams<f64>;
/// Socialization profile in double precision.
pub type Profile64 = params::Profile<f64>;
/// All eight channel rates in double precision.
pub type Rates = rates::MatchingRates<f64>;
/// One-type equilibrium in double precision.
pub type HomogeneousEquilibrium = equilibrium::HomogeneousEquilibrium<f64>;
/// Two-type equilibrium in double precision.
pub type HeterogeneousEquilibrium = equilibrium::HeterogeneousEquilibrium<f64>;
/// Sweep table in double precision.
pub type SweepTable = sweep::SweepTable<f64>;
