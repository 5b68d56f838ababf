//! Time-slot simulator for edge-hosted text-to-image services.
//!
//! Each slot, prompts arrive with category labels, are routed to one of
//! several diffusion models, and the edge picks per-model denoising steps
//! and compute shares to trade generation quality against delay.

pub mod alloc;
pub mod assign;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod gaussian;
pub mod output;
pub mod profiles;
pub mod rng;
pub mod workload;

pub use error::{Result, SimError};
