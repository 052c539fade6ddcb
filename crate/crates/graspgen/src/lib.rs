//! Full-body grasping pose synthesis engine.
//!
//! The crate generates a standing human body grasping a desk-scale object:
//! a diffusion model proposes the body pose, a conditional VAE proposes the
//! hand grasp, rigid palm alignment welds the two together, a software
//! rasterizer renders condition maps for downstream image generators, and a
//! metrics suite scores the result.

pub mod align;
pub mod body;
pub mod diffusion;
pub mod geom;
pub mod grasp;
pub mod neural;
pub mod rng;
pub mod synth;
