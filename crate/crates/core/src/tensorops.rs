//! Reshaping and aggregation of measurement tensors: beam-pair
//! interleaving, delay-power collapse, full unfolding for matrix
//! baselines, and the mode-n matricization / Khatri-Rao kernels used by
//! the CP decomposition.
//!
//! All analysis runs on received power (squared magnitudes), so the
//! first step interleaves the RX and TX beam modes of the complex 4-way
//! measurement into a single beam-pair mode of size 144 while squaring
//! away the phase. The canonical pair index is `j = txBeam * nRx + rxBeam`
//! (RX fastest), mirroring the acquisition order in which the TX holds a
//! beam while the RX sweeps.

use ndarray::{Array2, Array3, Array4, ArrayView2};
use thiserror::Error;

use crate::sounder::MeasurementTensor;

#[derive(Debug, Error)]
pub enum TensorOpsError {
    #[error("tensor mode must be 0, 1, or 2, got {0}")]
    InvalidMode(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Compensated accumulator; keeps long power sums exact to a few ulps.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

// ----------------------------------------------------------------- types

/// Nonnegative power tensor `[delay i, beam pair j, scan k]` produced by
/// partially unfolding a complex measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTensor3 {
    pub data: Array3<f64>,
    pub timestamps: Vec<f64>,
    /// RX beam count of the pair interleaving `j = tx * n_rx_beams + rx`.
    pub n_rx_beams: usize,
}

impl PowerTensor3 {
    pub fn n_delay_taps(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn n_beam_pairs(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn n_scans(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn n_tx_beams(&self) -> usize {
        self.n_beam_pairs() / self.n_rx_beams
    }

    /// Pair index of `(txBeam, rxBeam)`.
    pub fn pair_index(&self, tx_beam: usize, rx_beam: usize) -> usize {
        tx_beam * self.n_rx_beams + rx_beam
    }

    /// `(txBeam, rxBeam)` of a pair index.
    pub fn beam_pair(&self, j: usize) -> (usize, usize) {
        (j / self.n_rx_beams, j % self.n_rx_beams)
    }
}

/// Nonnegative power matrix `[beam pair j, scan k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatrix {
    pub data: Array2<f64>,
    pub timestamps: Vec<f64>,
    pub n_rx_beams: usize,
}

// ------------------------------------------------------------ reshaping

/// Interleaves the RX and TX beam modes of a complex measurement into a
/// single beam-pair mode and squares the magnitudes. Lossless up to the
/// deliberate phase removal: every entry of the input appears exactly
/// once in the output.
pub fn partial_unfold(t4: &MeasurementTensor) -> PowerTensor3 {
    let (n_taps, n_rx, n_tx, n_scans) = t4.data.dim();
    let mut out = Array3::zeros((n_taps, n_rx * n_tx, n_scans));
    for ((i, r, x, k), v) in t4.data.indexed_iter() {
        out[[i, x * n_rx + r, k]] = v.norm_sqr();
    }
    PowerTensor3 { data: out, timestamps: t4.timestamps.clone(), n_rx_beams: n_rx }
}

/// Inverse of the pair interleaving: rebuilds the power 4-way array
/// `[delay, rxBeam, txBeam, scan]` from a beam-pair power tensor.
pub fn refold(t3: &PowerTensor3) -> Result<Array4<f64>, TensorOpsError> {
    let (n_taps, n_pairs, n_scans) = t3.data.dim();
    let n_rx = t3.n_rx_beams;
    if n_rx == 0 || n_pairs % n_rx != 0 {
        return Err(TensorOpsError::ShapeMismatch(format!(
            "beam-pair count {n_pairs} is not a multiple of the RX beam count {n_rx}"
        )));
    }
    let n_tx = n_pairs / n_rx;
    let mut out = Array4::zeros((n_taps, n_rx, n_tx, n_scans));
    for ((i, j, k), &v) in t3.data.indexed_iter() {
        out[[i, j % n_rx, j / n_rx, k]] = v;
    }
    Ok(out)
}

/// Collapses the delay mode by summing tap powers per (beam pair, scan).
pub fn delay_power(t3: &PowerTensor3) -> PowerMatrix {
    let (n_taps, n_pairs, n_scans) = t3.data.dim();
    let mut out = Array2::zeros((n_pairs, n_scans));
    for j in 0..n_pairs {
        for k in 0..n_scans {
            let mut acc = KahanSum::new();
            for i in 0..n_taps {
                acc.add(t3.data[[i, j, k]]);
            }
            out[[j, k]] = acc.value();
        }
    }
    PowerMatrix { data: out, timestamps: t3.timestamps.clone(), n_rx_beams: t3.n_rx_beams }
}

/// Best-AoA view: for every TX beam and scan, the maximum power over
/// the RX beams.
pub fn best_rx_per_tx(pm: &PowerMatrix) -> Result<Array2<f64>, TensorOpsError> {
    let (n_pairs, n_scans) = pm.data.dim();
    let n_rx = pm.n_rx_beams;
    if n_rx == 0 || n_pairs % n_rx != 0 {
        return Err(TensorOpsError::ShapeMismatch(format!(
            "beam-pair count {n_pairs} is not a multiple of the RX beam count {n_rx}"
        )));
    }
    let n_tx = n_pairs / n_rx;
    let mut out = Array2::zeros((n_tx, n_scans));
    for x in 0..n_tx {
        for k in 0..n_scans {
            let mut best = f64::NEG_INFINITY;
            for r in 0..n_rx {
                best = best.max(pm.data[[x * n_rx + r, k]]);
            }
            out[[x, k]] = best;
        }
    }
    Ok(out)
}

/// Unfolds the full tensor into a `[(delay * beam pair) x scan]` matrix
/// with row index `i * nPairs + j`, the layout the matrix baselines use.
pub fn full_unfold(t3: &PowerTensor3) -> Array2<f64> {
    let (n_taps, n_pairs, n_scans) = t3.data.dim();
    let mut out = Array2::zeros((n_taps * n_pairs, n_scans));
    for ((i, j, k), &v) in t3.data.indexed_iter() {
        out[[i * n_pairs + j, k]] = v;
    }
    out
}

// ----------------------------------------------------- CP-ALS kernels

/// Mode-n unfolding of a 3-way array with the complementary modes kept
/// in ascending order (earlier mode varying fastest along columns).
pub fn matricize(t3: &PowerTensor3, mode: usize) -> Result<Array2<f64>, TensorOpsError> {
    let (n0, n1, n2) = t3.data.dim();
    let out = match mode {
        0 => {
            let mut m = Array2::zeros((n0, n1 * n2));
            for ((i, j, k), &v) in t3.data.indexed_iter() {
                m[[i, j + n1 * k]] = v;
            }
            m
        }
        1 => {
            let mut m = Array2::zeros((n1, n0 * n2));
            for ((i, j, k), &v) in t3.data.indexed_iter() {
                m[[j, i + n0 * k]] = v;
            }
            m
        }
        2 => {
            let mut m = Array2::zeros((n2, n0 * n1));
            for ((i, j, k), &v) in t3.data.indexed_iter() {
                m[[k, i + n0 * j]] = v;
            }
            m
        }
        other => return Err(TensorOpsError::InvalidMode(other)),
    };
    Ok(out)
}

/// Inverse of [`matricize`]: folds a mode-n unfolding back into a 3-way
/// array of the given dimensions.
pub fn fold(
    m: &ArrayView2<f64>,
    mode: usize,
    dims: (usize, usize, usize),
) -> Result<Array3<f64>, TensorOpsError> {
    let (n0, n1, n2) = dims;
    let expected = match mode {
        0 => (n0, n1 * n2),
        1 => (n1, n0 * n2),
        2 => (n2, n0 * n1),
        other => return Err(TensorOpsError::InvalidMode(other)),
    };
    if m.dim() != expected {
        return Err(TensorOpsError::ShapeMismatch(format!(
            "mode-{mode} unfolding of {dims:?} must be {expected:?}, got {:?}",
            m.dim()
        )));
    }
    let mut out = Array3::zeros(dims);
    for ((i, j, k), v) in out.indexed_iter_mut() {
        *v = match mode {
            0 => m[[i, j + n1 * k]],
            1 => m[[j, i + n0 * k]],
            _ => m[[k, i + n0 * j]],
        };
    }
    Ok(out)
}

/// Columnwise Kronecker product: for each column l, `out[.., l] =
/// a[.., l] (x) b[.., l]` with the B index varying fastest.
pub fn khatri_rao(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Array2<f64>, TensorOpsError> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    if ca != cb {
        return Err(TensorOpsError::ShapeMismatch(format!(
            "column counts must match, got {ca} and {cb}"
        )));
    }
    let mut out = Array2::zeros((ra * rb, ca));
    for l in 0..ca {
        for ia in 0..ra {
            for ib in 0..rb {
                out[[ia * rb + ib, l]] = a[[ia, l]] * b[[ib, l]];
            }
        }
    }
    Ok(out)
}
