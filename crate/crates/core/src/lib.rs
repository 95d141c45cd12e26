//! Sequential prisoner's dilemma under position uncertainty: exact
//! equilibrium checks, behavioral type kernels, a noisy choice model,
//! session simulation, finite-mixture estimation, descriptive tests and
//! file formats.
//!
//! ```
//! use seqpd::game::{equilibrium_condition_general, GameConfig};
//!
//! let check = equilibrium_condition_general(&GameConfig::experimental()).unwrap();
//! assert!(check.holds);
//! ```

pub mod choice;
pub mod config;
pub mod error;
pub mod estimate;
pub mod game;
pub mod io;
pub mod kernels;
pub mod model;
pub mod recovery;
pub mod sim;
pub mod stats;

pub use error::{Error, ErrorCategory, Result};
