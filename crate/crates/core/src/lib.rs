//! Learning digital modulation from scratch.
//!
//! The crate provides classic Gray-coded modulation baselines over an AWGN
//! channel, a clustering receiver that discovers the modulation order by the
//! jump method, a preamble-referenced kNN demodulator, a stochastic neural
//! transmitter trained by policy gradients, and the two-agent echo protocol
//! that lets a pair of such transceivers agree on a modulation scheme without
//! any shared weights or gradients.
//!
//! Everything numeric is generic over the scalar type through [`num::Real`]
//! (in practice `f32` or `f64`); the aliases below fix the common choices.

pub mod bits;
pub mod channel;
pub mod cluster;
pub mod error;
pub mod knn;
pub mod modem;
pub mod num;
pub mod policy;
pub mod rng;
pub mod trainer;

pub use bits::BitWord;
pub use error::{Error, Result};
pub use num::Real;
pub use rng::derive_rng;

/// Default-precision aliases.
pub type IQSymbol = modem::IQSymbol<f64>;
pub type Constellation = modem::Constellation<f64>;
pub type ChannelSpec = channel::ChannelSpec<f64>;
pub type MultipathSpec = channel::MultipathSpec<f64>;
pub type Clustering = cluster::Clustering<f64>;
pub type LabeledDemod = cluster::LabeledDemod<f64>;
pub type PolicyState = policy::PolicyState<f64>;
pub type TxConfig = policy::TxConfig<f64>;
pub type TrainConfig = trainer::TrainConfig<f64>;
pub type Agent = trainer::Agent<f64>;
pub type RunMetrics = trainer::RunMetrics<f64>;

/// Single-precision aliases.
pub type IQSymbol32 = modem::IQSymbol<f32>;
pub type Constellation32 = modem::Constellation<f32>;
pub type ChannelSpec32 = channel::ChannelSpec<f32>;
pub type PolicyState32 = policy::PolicyState<f32>;

pub use modem::{theoretical_ber, Scheme, SnrSpec};
