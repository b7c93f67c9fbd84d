pub mod config;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod exec;
pub mod io;
pub mod ring;
pub mod roots;
pub mod specfun;
pub mod spectrum;

pub use error::{Error, Result};
pub use exec::Execution;
