pub mod densela;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod flowsim;
pub mod netgraph;
pub mod oracle;
pub mod partition;
pub mod rates;
pub mod verify;

pub use error::{Error, Result};
