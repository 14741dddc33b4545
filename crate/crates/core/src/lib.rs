//! Multimodal intent disambiguation for robot commands.
//!
//! Voice transcripts, gaze rays and finger-pointing rays captured with a ring protocol are
//! grounded against a scene graph, turned into nine ranked candidate instructions, confirmed
//! by the user and compiled into behavior-tree plans.

pub mod cli;
pub mod config;
pub mod disambiguation;
pub mod eval;
pub mod gateway;
pub mod plan;
pub mod scene;
pub mod session;
pub mod targeting;
