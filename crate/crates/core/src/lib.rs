//! Simulation and analysis toolkit for multiuser photon-counting uplinks
//! received by a sectored detector array.
//!
//! * [`channel`]: Poisson count channel, weighted sums and their moments.
//! * [`pilot`]: balanced pilot matrices, LS channel estimation and MSE.
//! * [`two_user`]: weighted-sum threshold separation of two hypotheses.
//! * [`multiuser`]: ML and successive-elimination detection under
//!   unknown interference, with the closed-form error upper bound.
//! * [`sim`]: seeded Monte-Carlo experiment drivers and report output.

pub mod channel;
pub mod error;
pub mod fmt17;
pub mod lattice;
pub mod linalg;
pub mod multiuser;
pub mod pilot;
pub mod poisson;
pub mod rng;
pub mod sim;
pub mod special;
pub mod stats;
pub mod two_user;

pub use error::{Error, Result};

/// Library version recorded in every experiment report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
