//! Phased-array codebooks and per-beam azimuth gain patterns.
//!
//! Both ends of the link sweep a small codebook of pre-steered beams.
//! Each beam has a Gaussian-shaped mainlobe clamped to a flat sidelobe
//! floor: power gain dB = peak + max(-3 (2 delta / hpbw)^2, floor),
//! where delta is the azimuth offset from the steering direction. The
//! default codebook has 12 beams uniformly steered across +/-45 degrees
//! with 23 dBi peak gain and a 30 degree half-power beamwidth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::wrap_deg;

pub const DEFAULT_BEAM_COUNT: usize = 12;
pub const DEFAULT_STEERING_RANGE_DEG: f64 = 45.0;
pub const DEFAULT_PEAK_GAIN_DBI: f64 = 23.0;
pub const DEFAULT_HPBW_DEG: f64 = 30.0;
pub const DEFAULT_SIDELOBE_FLOOR_DB: f64 = -20.0;

#[derive(Debug, Error)]
pub enum ArrayError {
    #[error("codebook needs at least one beam")]
    EmptyCodebook,
    #[error("invalid codebook parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("beam index {index} out of range for {count} beams")]
    BeamOutOfRange { index: usize, count: usize },
}

/// One pre-steered beam of a codebook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub steering_az_deg: f64,
    pub peak_gain_dbi: f64,
    pub hpbw_deg: f64,
    /// Sidelobe level relative to the peak; non-positive.
    pub sidelobe_floor_db: f64,
}

/// Linear field gain of a beam toward some azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGain {
    pub amplitude: f64,
}

impl BeamGain {
    pub fn power_db(self) -> f64 {
        20.0 * self.amplitude.log10()
    }
}

/// Immutable set of pre-steered beams swept during a measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    beams: Vec<Beam>,
}

/// Builds a codebook of `n` identical beams steered uniformly over
/// [-range_deg, +range_deg], endpoints included. A single beam points
/// at boresight.
pub fn make_codebook(
    n: usize,
    range_deg: f64,
    peak_gain_dbi: f64,
    hpbw_deg: f64,
    sidelobe_floor_db: f64,
) -> Result<Codebook, ArrayError> {
    if n == 0 {
        return Err(ArrayError::EmptyCodebook);
    }
    if !(range_deg > 0.0) || range_deg > 180.0 {
        return Err(ArrayError::InvalidParameter("steering range must be in (0, 180]"));
    }
    if !(hpbw_deg > 0.0) {
        return Err(ArrayError::InvalidParameter("half-power beamwidth must be positive"));
    }
    if !(sidelobe_floor_db <= 0.0) {
        return Err(ArrayError::InvalidParameter("sidelobe floor must be <= 0 dB"));
    }
    if !peak_gain_dbi.is_finite() {
        return Err(ArrayError::InvalidParameter("peak gain must be finite"));
    }
    let beams = (0..n)
        .map(|k| {
            let steering_az_deg = if n == 1 {
                0.0
            } else {
                -range_deg + 2.0 * range_deg * k as f64 / (n - 1) as f64
            };
            Beam { steering_az_deg, peak_gain_dbi, hpbw_deg, sidelobe_floor_db }
        })
        .collect();
    Ok(Codebook { beams })
}

impl Default for Codebook {
    fn default() -> Self {
        make_codebook(
            DEFAULT_BEAM_COUNT,
            DEFAULT_STEERING_RANGE_DEG,
            DEFAULT_PEAK_GAIN_DBI,
            DEFAULT_HPBW_DEG,
            DEFAULT_SIDELOBE_FLOOR_DB,
        )
        .expect("default codebook parameters are valid")
    }
}

impl Codebook {
    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Power gain in dB of beam `index` toward `azimuth_deg`.
    pub fn power_gain_db(&self, index: usize, azimuth_deg: f64) -> Result<f64, ArrayError> {
        let beam = self
            .beams
            .get(index)
            .ok_or(ArrayError::BeamOutOfRange { index, count: self.beams.len() })?;
        let delta = wrap_deg(azimuth_deg - beam.steering_az_deg);
        let mainlobe = -3.0 * (2.0 * delta / beam.hpbw_deg).powi(2);
        Ok(beam.peak_gain_dbi + mainlobe.max(beam.sidelobe_floor_db))
    }

    /// Linear field gain of beam `index` toward `azimuth_deg`.
    pub fn gain(&self, index: usize, azimuth_deg: f64) -> Result<BeamGain, ArrayError> {
        let db = self.power_gain_db(index, azimuth_deg)?;
        Ok(BeamGain { amplitude: 10f64.powf(db / 20.0) })
    }
}
