//! Neural hand perception and control on synthetic data.
//!
//! The crate bundles the building blocks of a desk-scale hand perception
//! stack: Gabor-jet image features, local linear map (LLM) networks, a
//! two-level fingertip detection hierarchy with multiplicative stream
//! fusion, PSOM-based 3D posture reconstruction, a feature-map attention
//! engine, and a finite-state grasp controller over a simulated finger
//! plant. Everything runs on rendered images of an articulated hand model,
//! so every pipeline is reproducible from a seed.

pub mod attention;
pub mod config;
pub mod error;
pub mod gabor;
pub mod grasp;
pub mod hand;
pub mod hierarchy;
pub mod imaging;
pub mod llm;
pub mod psom;

pub use error::{Error, Result};
