mod dd;
pub mod bounds;
pub mod error;
pub mod fracseries;
pub mod oracle;
pub mod pipeline;
pub mod quasiopt;
pub mod reconstruct;
pub mod regression;
pub mod scenario;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
