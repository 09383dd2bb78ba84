pub mod config;
pub mod coref;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod neural;
pub mod synthetic;
pub mod typepred;

pub use error::{Error, Result};
