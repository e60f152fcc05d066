//! Rough-surface synthesis and coherent far-field rendering.

mod far_field;
mod fft;
mod grid;
mod render;
mod surface;

pub use far_field::{
    aperture_field, far_field_intensity, propagate_far_field, speckle_contrast, IntensityFrame,
    OpticalConfig,
};
pub use fft::{fft2, fftshift};
pub use grid::{Grid2D, HeightMap};
pub use render::{render_frames, render_sequence};
pub use surface::{
    carve_crater, carve_groove, carve_groove_segment, crater_profile, groove_profile,
    synthesize_ripple_texture, synthesize_rough_surface, RippleSpec, RoughnessSpec,
};
