//! Theorem-grounded synthetic geometry data engine.
//!
//! Builds figures step by step from a theorem and substrate catalog,
//! computes exact ground-truth properties from coordinates, renders SVG,
//! and turns figure descriptions into validated chain-of-thought
//! question/answer pairs through a pluggable completion client.

pub mod geometry;
pub mod catalog;
pub mod engine;
pub mod reasoner;
pub mod dataset;
