//! Simulation and tensor analysis of beam-steered 60 GHz indoor links
//! under human-body blockage.
//!
//! The crate covers the full measurement-to-analysis chain:
//!
//! * [`geometry`]: scenes, blocker trajectories, and image-method path
//!   tracing over first-order wall reflections.
//! * [`blockage`]: double knife-edge screen attenuation for moving
//!   blockers, including reflected-path shadowing via unfolded geometry.
//! * [`array`]: phased-array codebooks and per-beam gain evaluation.
//! * [`sounder`]: channel impulse response synthesis and the scan loop
//!   that produces the 4-way measurement tensor
//!   (delay x rx beam x tx beam x scan).
//! * [`tensorops`]: lossless beam-pair unfolding, delay-power collapse,
//!   and the dense kernels (matricization, Khatri-Rao) used by the
//!   decomposition.
//! * [`parafac`]: CP decomposition via alternating least squares, plus a
//!   PCA baseline on the fully unfolded matrix and factor alignment.
//! * [`blocktrace`]: per-component gain traces, piecewise-linear
//!   segmentation, blocked/unblocked labeling, event extraction, Markov
//!   transition models, and joint outage statistics.
//! * [`io`]: binary tensor files, scene descriptions, and CSV/SVG export.

pub mod array;
pub mod blockage;
pub mod blocktrace;
pub mod cli;
pub mod geometry;
pub mod io;
mod linalg;
pub mod parafac;
pub mod sounder;
pub mod tensorops;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Wavelength in metres for a carrier given in GHz.
pub fn wavelength_m(carrier_ghz: f64) -> f64 {
    SPEED_OF_LIGHT_M_S / (carrier_ghz * 1e9)
}
