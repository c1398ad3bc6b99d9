//! Channel sounding: sweeps every TX/RX beam pair, synthesizes complex
//! CIRs per pair, and stacks repeated scans into the 4-way measurement
//! tensor.
//!
//! One scan holds the scene still and evaluates all beam-pair CIRs at
//! the same instant (beam switching is orders of magnitude faster than
//! blocker motion). A measurement repeats scans every `scan_period_s`
//! for `duration_s`, so the tensor is indexed by delay tap, RX beam,
//! TX beam, and scan time. Each propagation path lands on its nearest
//! delay bin with amplitude
//!
//! ```text
//! lambda / (4 pi d) * txGain(aod) * rxGain(aoa) * 10^(-(reflLoss + kedLoss)/20)
//! ```
//!
//! and phase -2 pi f tau. Optional circular complex Gaussian noise is
//! calibrated so the unblocked LOS peak tap sits `snr_db` above the
//! per-tap noise floor; each scan draws from its own seeded stream, so
//! tensors are bit-reproducible regardless of evaluation order.

use ndarray::{Array3, Array4, ShapeBuilder};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{ArrayError, Codebook};
use crate::blockage::{path_blockage_loss, BlockageError};
use crate::geometry::{trace_paths, GeometryError, PathKind, PropagationPath, Scene};
use crate::{wavelength_m, SPEED_OF_LIGHT_M_S};

#[derive(Debug, Error)]
pub enum SounderError {
    #[error("invalid scan config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Blockage(#[from] BlockageError),
    #[error(transparent)]
    Array(#[from] ArrayError),
}

// ---------------------------------------------------------------- config

/// Sounder timing, bandwidth, carrier, noise, and seeding parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub n_delay_taps: usize,
    pub tap_spacing_ns: f64,
    pub scan_period_s: f64,
    pub duration_s: f64,
    pub carrier_ghz: f64,
    /// SNR of the unblocked LOS peak tap over the per-tap noise floor;
    /// `None` disables noise entirely.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            n_delay_taps: 64,
            tap_spacing_ns: 1.0,
            scan_period_s: 0.003,
            duration_s: 5.0,
            carrier_ghz: 60.48,
            snr_db: Some(30.0),
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), SounderError> {
        if self.n_delay_taps == 0 {
            return Err(SounderError::InvalidConfig("n_delay_taps must be at least 1"));
        }
        if !(self.tap_spacing_ns > 0.0) {
            return Err(SounderError::InvalidConfig("tap_spacing_ns must be positive"));
        }
        if !(self.scan_period_s > 0.0) {
            return Err(SounderError::InvalidConfig("scan_period_s must be positive"));
        }
        if !(self.duration_s >= self.scan_period_s) {
            return Err(SounderError::InvalidConfig("duration_s must cover at least one scan"));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(SounderError::InvalidConfig("carrier_ghz must be positive"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(SounderError::InvalidConfig("snr_db must be finite"));
            }
        }
        Ok(())
    }

    /// Number of scans in a measurement.
    pub fn scan_count(&self) -> usize {
        (self.duration_s / self.scan_period_s).floor() as usize
    }
}

// ----------------------------------------------------------------- types

/// Complex channel impulse response of one beam pair at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub taps: Vec<Complex64>,
}

/// 4-way complex measurement indexed `[delay tap, rx beam, tx beam, scan]`.
///
/// The backing storage runs delay-fastest (then RX beam, TX beam, scan),
/// matching the on-disk layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementTensor {
    pub data: Array4<Complex64>,
    /// Scan acquisition times, `k * scan_period_s` exactly.
    pub timestamps: Vec<f64>,
    pub config: ScanConfig,
    /// Paths whose delay fell outside the tap window and were skipped.
    pub dropped_paths: usize,
}

impl MeasurementTensor {
    pub fn n_delay_taps(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn n_rx_beams(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn n_tx_beams(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn n_scans(&self) -> usize {
        self.data.shape()[3]
    }
}

// --------------------------------------------------------------- sounder

/// Derives a per-scan noise stream so scans can be generated in any
/// order (or in parallel) without changing the result.
fn scan_stream_seed(seed: u64, scan_index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(scan_index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct PathTap {
    /// Delay bin, `None` when the delay exceeds the tap window.
    bin: Option<usize>,
    /// Per-path amplitude before beam gains and blockage.
    base_amplitude: f64,
    /// Carrier phase rotation of the path delay.
    phasor: Complex64,
    /// Field gain of every TX beam toward the departure azimuth.
    tx_gains: Vec<f64>,
    /// Field gain of every RX beam toward the arrival azimuth.
    rx_gains: Vec<f64>,
}

/// Beam-sweeping channel sounder bound to one scene.
pub struct Sounder {
    scene: Scene,
    paths: Vec<PropagationPath>,
    taps: Vec<PathTap>,
    tx_codebook: Codebook,
    rx_codebook: Codebook,
    config: ScanConfig,
    wavelength_m: f64,
    dropped_paths: usize,
    /// Per-component standard deviation of the complex noise.
    noise_sigma: Option<f64>,
}

impl Sounder {
    pub fn new(
        scene: Scene,
        tx_codebook: Codebook,
        rx_codebook: Codebook,
        config: ScanConfig,
    ) -> Result<Self, SounderError> {
        config.validate()?;
        if tx_codebook.is_empty() || rx_codebook.is_empty() {
            return Err(SounderError::InvalidConfig("codebooks must not be empty"));
        }
        let paths = trace_paths(&scene)?;
        let lambda = wavelength_m(config.carrier_ghz);
        let carrier_hz = config.carrier_ghz * 1e9;

        let mut dropped_paths = 0;
        let mut taps = Vec::with_capacity(paths.len());
        for path in &paths {
            let tau_s = path.length_m / SPEED_OF_LIGHT_M_S;
            let bin_f = (tau_s * 1e9 / config.tap_spacing_ns).round();
            let bin = if (bin_f as usize) < config.n_delay_taps {
                Some(bin_f as usize)
            } else {
                dropped_paths += 1;
                None
            };
            let base_amplitude = lambda / (4.0 * std::f64::consts::PI * path.length_m)
                * 10f64.powf(-path.reflection_loss_db / 20.0);
            let phase = -2.0 * std::f64::consts::PI * carrier_hz * tau_s;
            let tx_gains = (0..tx_codebook.len())
                .map(|x| Ok(tx_codebook.gain(x, path.aod_az_deg)?.amplitude))
                .collect::<Result<_, SounderError>>()?;
            let rx_gains = (0..rx_codebook.len())
                .map(|r| Ok(rx_codebook.gain(r, path.aoa_az_deg)?.amplitude))
                .collect::<Result<_, SounderError>>()?;
            taps.push(PathTap {
                bin,
                base_amplitude,
                phasor: Complex64::from_polar(1.0, phase),
                tx_gains,
                rx_gains,
            });
        }

        // reference the noise floor to the unblocked LOS peak across all
        // beam pairs, so snr_db means the same thing in every scene
        let noise_sigma = match config.snr_db {
            None => None,
            Some(snr_db) => {
                let los = paths
                    .iter()
                    .position(|p| p.kind == PathKind::Los)
                    .expect("trace_paths always yields a LOS path");
                let max_tx = taps[los].tx_gains.iter().cloned().fold(0.0, f64::max);
                let max_rx = taps[los].rx_gains.iter().cloned().fold(0.0, f64::max);
                let reference = taps[los].base_amplitude * max_tx * max_rx;
                Some(reference * 10f64.powf(-snr_db / 20.0))
            }
        };

        Ok(Sounder {
            scene,
            paths,
            taps,
            tx_codebook,
            rx_codebook,
            config,
            wavelength_m: lambda,
            dropped_paths,
            noise_sigma,
        })
    }

    pub fn paths(&self) -> &[PropagationPath] {
        &self.paths
    }

    pub fn config(&self) -> &ScanConfig {
        &self.config
    }

    pub fn tx_codebook(&self) -> &Codebook {
        &self.tx_codebook
    }

    pub fn rx_codebook(&self) -> &Codebook {
        &self.rx_codebook
    }

    /// Paths outside the delay window, skipped in every CIR.
    pub fn dropped_paths(&self) -> usize {
        self.dropped_paths
    }

    /// Per-path blockage losses at time `t_s`, in dB.
    fn blockage_losses(&self, t_s: f64) -> Result<Vec<f64>, SounderError> {
        self.paths
            .iter()
            .map(|p| {
                Ok(path_blockage_loss(p, &self.scene.blockers, t_s, self.wavelength_m)?)
            })
            .collect()
    }

    fn cir_into(
        &self,
        tx_beam: usize,
        rx_beam: usize,
        losses_db: &[f64],
        out: &mut [Complex64],
        mut rng: Option<&mut ChaCha8Rng>,
    ) {
        out.fill(Complex64::ZERO);
        for (tap, loss_db) in self.taps.iter().zip(losses_db) {
            let Some(bin) = tap.bin else { continue };
            let amp = tap.base_amplitude
                * tap.tx_gains[tx_beam]
                * tap.rx_gains[rx_beam]
                * 10f64.powf(-loss_db / 20.0);
            out[bin] += tap.phasor * amp;
        }
        if let (Some(rng), Some(sigma)) = (rng.as_deref_mut(), self.noise_sigma) {
            let scale = sigma / std::f64::consts::SQRT_2;
            for v in out.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *v += Complex64::new(re * scale, im * scale);
            }
        }
    }

    /// CIR of one beam pair at time `t_s`. Pass a noise stream to add
    /// the configured receiver noise.
    pub fn synthesize_cir(
        &self,
        tx_beam: usize,
        rx_beam: usize,
        t_s: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Cir, SounderError> {
        // surface bad indices as codebook errors
        self.tx_codebook.gain(tx_beam, 0.0)?;
        self.rx_codebook.gain(rx_beam, 0.0)?;
        let losses = self.blockage_losses(t_s)?;
        let mut taps = vec![Complex64::ZERO; self.config.n_delay_taps];
        self.cir_into(tx_beam, rx_beam, &losses, &mut taps, rng);
        Ok(Cir { taps })
    }

    /// Writes one scan in storage order (delay fastest, TX beam slowest)
    /// into `out`. The TX sweeps its beams in codebook order while the
    /// RX cycles through all of its beams per TX setting; noise draws
    /// follow that same order.
    fn scan_into(
        &self,
        t_s: f64,
        out: &mut [Complex64],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(), SounderError> {
        let n_taps = self.config.n_delay_taps;
        let n_rx = self.rx_codebook.len();
        let losses = self.blockage_losses(t_s)?;
        for x in 0..self.tx_codebook.len() {
            for r in 0..n_rx {
                let start = (x * n_rx + r) * n_taps;
                self.cir_into(x, r, &losses, &mut out[start..start + n_taps], rng.as_deref_mut());
            }
        }
        Ok(())
    }

    /// All beam-pair CIRs at one instant, shaped `[delay, rx, tx]`.
    pub fn run_scan(
        &self,
        t_s: f64,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Array3<Complex64>, SounderError> {
        let (n_taps, n_rx, n_tx) =
            (self.config.n_delay_taps, self.rx_codebook.len(), self.tx_codebook.len());
        let mut flat = vec![Complex64::ZERO; n_taps * n_rx * n_tx];
        self.scan_into(t_s, &mut flat, rng)?;
        Ok(Array3::from_shape_vec((n_taps, n_rx, n_tx).f(), flat)
            .expect("scan buffer matches its shape"))
    }

    /// Repeats scans every `scan_period_s` for `duration_s` and stacks
    /// them into the measurement tensor. Deterministic given the seed.
    pub fn run_measurement(&self) -> Result<MeasurementTensor, SounderError> {
        let (n_taps, n_rx, n_tx) =
            (self.config.n_delay_taps, self.rx_codebook.len(), self.tx_codebook.len());
        let n_scans = self.config.scan_count();
        let scan_len = n_taps * n_rx * n_tx;
        let mut flat = vec![Complex64::ZERO; scan_len * n_scans];
        let mut timestamps = Vec::with_capacity(n_scans);
        for k in 0..n_scans {
            let t_s = k as f64 * self.config.scan_period_s;
            timestamps.push(t_s);
            let mut rng = self
                .noise_sigma
                .map(|_| ChaCha8Rng::seed_from_u64(scan_stream_seed(self.config.seed, k as u64)));
            self.scan_into(t_s, &mut flat[k * scan_len..(k + 1) * scan_len], rng.as_mut())?;
        }
        let data = Array4::from_shape_vec((n_taps, n_rx, n_tx, n_scans).f(), flat)
            .expect("measurement buffer matches its shape");
        Ok(MeasurementTensor {
            data,
            timestamps,
            config: self.config,
            dropped_paths: self.dropped_paths,
        })
    }
}
