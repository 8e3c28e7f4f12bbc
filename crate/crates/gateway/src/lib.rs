//! Command-line and HTTP front ends over the worldgrid simulator.

pub mod api;
pub mod client;
pub mod commands;
pub mod error;
pub mod http;
pub mod script;
pub mod server;

pub use api::{ApiRequest, Reply};
pub use error::ApiError;
