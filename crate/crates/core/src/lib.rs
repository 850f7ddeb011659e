//! Joint scientific claim verification: candidate retrieval, rationale
//! selection and stance prediction trained together under a weighted loss
//! with a rationale-attention regularizer, plus the matching evaluation
//! protocol.

pub mod attention;
pub mod cli;
pub mod compute;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod heads;
pub mod loss;
pub mod retrieval;
pub mod text;
pub mod train;
pub mod tune;

pub use error::{Error, Result};
