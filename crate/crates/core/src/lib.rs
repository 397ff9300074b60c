//! Private information delivery over storage-constrained servers.
//!
//! `N` servers each hold coded pieces of some of `K` messages plus a share of
//! common randomness. They send one message to a user, who decodes it but
//! learns nothing about which index was sent.
//!
//! ```
//! use pid_core::{CapacityScheme, CodePair, Modulus, PidConfig, deliver};
//! use pid_core::protocol::random_messages;
//! use pid_core::verify::{exhaustive_privacy, DEFAULT_BUDGET};
//!
//! # fn main() -> pid_core::Result<()> {
//! let f = Modulus::new(5)?;
//! let config = PidConfig::canonical(f, 3, 3, 2)?;
//! let code = CodePair::vandermonde(f, 3, 2, None)?;
//! let scheme = CapacityScheme::new(config, code)?;
//! let w = random_messages(f, 3, 2, 7);
//! let t = deliver(&scheme, &w, 2, 7)?;
//! assert_eq!(t.decoded, w[1]);
//! assert!(exhaustive_privacy(&scheme, DEFAULT_BUDGET)?.pass);
//! # Ok(())
//! # }
//! ```

pub mod analysis;
pub mod code;
pub mod config;
pub mod error;
pub mod field;
pub mod matrix;
pub mod protocol;
pub mod schemes;
pub mod sim;
pub mod verify;

pub use code::CodePair;
pub use error::{Error, Result};
pub use field::{FieldElement, Modulus};
pub use matrix::FieldMatrix;
pub use protocol::{
    deliver, deliver_with, AssociationMode, CapacityScheme, DeliveryScheme, DeliveryTranscript, Message,
    PidConfig, Rational, Seed, ServerState,
};
