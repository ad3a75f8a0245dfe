pub mod aux;
pub mod cphd;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod scenario;
pub mod smc;
pub mod unscented;

pub use error::{Error, Result};
