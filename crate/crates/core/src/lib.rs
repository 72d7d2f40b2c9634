pub mod bipartite;
pub mod echo;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod oracle;
pub mod response;
pub mod spin;

pub use error::{EchoError, Result};
