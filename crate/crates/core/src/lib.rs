//! Reachability-based trajectory design for robots among moving obstacles.

pub mod audit;
pub mod certificate;
pub mod config;
pub mod discretize;
pub mod error;
pub mod export;
pub mod frs;
pub mod geometry;
pub mod interval;
pub mod models;
pub mod planner;
pub mod poly;
pub mod sim;
pub mod trace;
pub mod tracking;
pub mod world;

pub use error::{Error, Result};
