//! Discrete, asynchronous, simple-fair cake-cutting.

pub mod auction;
pub mod engine;
pub mod fixtures;
pub mod measure;
pub mod group_crypto;
pub mod refproto;
pub mod transcript;
