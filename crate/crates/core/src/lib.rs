//! Laser-speckle process monitoring.
//!
//! The crate has two halves. The simulation half ([`optics`], [`ablation`])
//! builds rough metal surfaces, carves grooves or percussion-drilled craters
//! into them and renders the coherent far-field speckle a high-speed camera
//! would record. The learning half ([`dataset`], [`tensor`], [`net`]) turns
//! those frames into normalized three-frame inputs and trains a residual CNN
//! that regresses ablation depth (or volume) while classifying the material.
//! [`harness`] wires everything into the `speckle-monitor` command.

pub mod ablation;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod net;
pub mod optics;
pub mod tensor;

pub use error::{Error, Result};
