//! Command-line entry points and the curation service.

pub mod commands;
pub mod provenance;
pub mod service;
pub mod workspace;
