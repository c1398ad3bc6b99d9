//! Binary tensor container ("BMT1").
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic        4 bytes  "BMT1"
//! mode count   u32      3 or 4
//! sizes        u32 * n  per-mode extents
//! value kind   u32      0 = complex pairs, 1 = real power
//! scan period  f64      seconds
//! tap spacing  f64      nanoseconds
//! carrier      f64      GHz
//! pair map     u32      0 = separate beam modes (4-way);
//!                       RX beam count of the tx-major pair
//!                       flattening (3-way)
//! payload      f32 * …  delay index fastest; complex values as
//!                       (re, im) pairs
//! ```
//!
//! The payload linear index is `((k*J + j)*I + i)` for a 3-way tensor
//! and `(((k*X + x)*R + r)*I + i)` for a 4-way tensor, i.e. the same
//! delay-fastest order the in-memory measurement tensor uses. Values
//! are stored as 32-bit floats, matching measurement dynamic range at
//! half the footprint of doubles.

use std::fs;
use std::path::Path;

use ndarray::{Array3, Array4, ShapeBuilder};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::io::{write_atomic, IoError};
use crate::sounder::{MeasurementTensor, ScanConfig};
use crate::tensorops::PowerTensor3;

pub const MAGIC: [u8; 4] = *b"BMT1";
pub const VALUE_KIND_COMPLEX: u32 = 0;
pub const VALUE_KIND_POWER: u32 = 1;

/// Acquisition metadata carried in every tensor file header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub scan_period_s: f64,
    pub tap_spacing_ns: f64,
    pub carrier_ghz: f64,
}

impl TensorMeta {
    pub fn from_config(config: &ScanConfig) -> Self {
        TensorMeta {
            scan_period_s: config.scan_period_s,
            tap_spacing_ns: config.tap_spacing_ns,
            carrier_ghz: config.carrier_ghz,
        }
    }

    fn validate(&self) -> Result<(), IoError> {
        for (name, v) in [
            ("scan period", self.scan_period_s),
            ("tap spacing", self.tap_spacing_ns),
            ("carrier", self.carrier_ghz),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(IoError::HeaderMismatch(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn header_bytes(sizes: &[usize], value_kind: u32, meta: &TensorMeta, pair_map: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 4 * sizes.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&value_kind.to_le_bytes());
    out.extend_from_slice(&meta.scan_period_s.to_le_bytes());
    out.extend_from_slice(&meta.tap_spacing_ns.to_le_bytes());
    out.extend_from_slice(&meta.carrier_ghz.to_le_bytes());
    out.extend_from_slice(&pair_map.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        if self.offset + n > self.bytes.len() {
            return Err(IoError::TruncatedPayload {
                expected: (self.offset + n) as u64,
                found: self.bytes.len() as u64,
            });
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

struct Header {
    sizes: Vec<usize>,
    value_kind: u32,
    meta: TensorMeta,
    pair_map: u32,
}

fn parse_header(r: &mut Reader) -> Result<Header, IoError> {
    if r.take(4)? != MAGIC {
        return Err(IoError::BadMagic);
    }
    let modes = r.u32()?;
    if modes != 3 && modes != 4 {
        return Err(IoError::BadModeCount(modes));
    }
    let mut sizes = Vec::with_capacity(modes as usize);
    for _ in 0..modes {
        let s = r.u32()?;
        if s == 0 {
            return Err(IoError::SizeOverflow("mode size is zero".into()));
        }
        sizes.push(s as usize);
    }
    let value_kind = r.u32()?;
    if value_kind != VALUE_KIND_COMPLEX && value_kind != VALUE_KIND_POWER {
        return Err(IoError::BadValueKind(value_kind));
    }
    let meta = TensorMeta {
        scan_period_s: r.f64()?,
        tap_spacing_ns: r.f64()?,
        carrier_ghz: r.f64()?,
    };
    meta.validate()?;
    let pair_map = r.u32()?;
    Ok(Header { sizes, value_kind, meta, pair_map })
}

/// Element count with overflow checking, and the payload byte length
/// for the given per-element width.
fn payload_len(sizes: &[usize], width: usize) -> Result<usize, IoError> {
    let mut count: usize = 1;
    for &s in sizes {
        count = count
            .checked_mul(s)
            .ok_or_else(|| IoError::SizeOverflow(format!("{sizes:?} overflows")))?;
    }
    count
        .checked_mul(width)
        .ok_or_else(|| IoError::SizeOverflow(format!("{sizes:?} overflows")))
}

fn check_payload(r: &Reader, expected: usize) -> Result<(), IoError> {
    let found = r.bytes.len() - r.offset;
    if found < expected {
        return Err(IoError::TruncatedPayload {
            expected: (r.offset + expected) as u64,
            found: r.bytes.len() as u64,
        });
    }
    if found > expected {
        return Err(IoError::TrailingBytes((found - expected) as u64));
    }
    Ok(())
}

// ------------------------------------------------------ 4-way complex

/// Writes a complex measurement tensor as a 4-way BMT1 file.
pub fn write_measurement_tensor(path: &Path, t: &MeasurementTensor) -> Result<(), IoError> {
    let (n_i, n_r, n_x, n_k) = t.data.dim();
    let meta = TensorMeta::from_config(&t.config);
    meta.validate()?;
    let mut bytes = header_bytes(&[n_i, n_r, n_x, n_k], VALUE_KIND_COMPLEX, &meta, 0);
    bytes.reserve(payload_len(&[n_i, n_r, n_x, n_k], 8)?);
    for k in 0..n_k {
        for x in 0..n_x {
            for r in 0..n_r {
                for i in 0..n_i {
                    let v = t.data[[i, r, x, k]];
                    bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
                    bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
                }
            }
        }
    }
    write_atomic(path, &bytes)
}

/// Reads a 4-way complex BMT1 file back into a measurement tensor.
///
/// Noise level and seed are not part of the container, so the
/// reconstructed scan config carries `snr_db: None` and `seed: 0`;
/// timestamps are rebuilt as `k * scan_period_s`.
pub fn read_measurement_tensor(path: &Path) -> Result<MeasurementTensor, IoError> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, offset: 0 };
    let h = parse_header(&mut r)?;
    if h.sizes.len() != 4 {
        return Err(IoError::HeaderMismatch(format!(
            "expected a 4-way tensor, found {} modes",
            h.sizes.len()
        )));
    }
    if h.value_kind != VALUE_KIND_COMPLEX {
        return Err(IoError::HeaderMismatch("expected complex values in a 4-way file".into()));
    }
    if h.pair_map != 0 {
        return Err(IoError::HeaderMismatch(
            "4-way files must not carry a beam-pair map".into(),
        ));
    }
    let (n_i, n_r, n_x, n_k) = (h.sizes[0], h.sizes[1], h.sizes[2], h.sizes[3]);
    let expected = payload_len(&h.sizes, 8)?;
    check_payload(&r, expected)?;

    let count = expected / 8;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let re = f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as f64;
        let im = f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as f64;
        values.push(Complex64::new(re, im));
    }
    // file order is exactly the delay-fastest storage order
    let data = Array4::from_shape_vec((n_i, n_r, n_x, n_k).f(), values)
        .expect("length checked against the header");
    let config = ScanConfig {
        n_delay_taps: n_i,
        tap_spacing_ns: h.meta.tap_spacing_ns,
        scan_period_s: h.meta.scan_period_s,
        duration_s: n_k as f64 * h.meta.scan_period_s,
        carrier_ghz: h.meta.carrier_ghz,
        snr_db: None,
        seed: 0,
    };
    let timestamps = (0..n_k).map(|k| k as f64 * h.meta.scan_period_s).collect();
    Ok(MeasurementTensor { data, timestamps, config, dropped_paths: 0 })
}

// -------------------------------------------------------- 3-way power

/// Writes a real power tensor as a 3-way BMT1 file. The header's pair
/// map records the tensor's RX beam count so the beam-pair mode can be
/// split again on load.
pub fn write_power_tensor(path: &Path, t: &PowerTensor3, meta: &TensorMeta) -> Result<(), IoError> {
    meta.validate()?;
    let (n_i, n_j, n_k) = t.data.dim();
    if t.n_rx_beams == 0 || n_j % t.n_rx_beams != 0 {
        return Err(IoError::HeaderMismatch(format!(
            "RX beam count {} does not divide {} beam pairs",
            t.n_rx_beams, n_j
        )));
    }
    let mut bytes = header_bytes(&[n_i, n_j, n_k], VALUE_KIND_POWER, meta, t.n_rx_beams as u32);
    bytes.reserve(payload_len(&[n_i, n_j, n_k], 4)?);
    for k in 0..n_k {
        for j in 0..n_j {
            for i in 0..n_i {
                bytes.extend_from_slice(&(t.data[[i, j, k]] as f32).to_le_bytes());
            }
        }
    }
    write_atomic(path, &bytes)
}

/// Reads a 3-way power BMT1 file. Timestamps are rebuilt as
/// `k * scan_period_s`.
pub fn read_power_tensor(path: &Path) -> Result<(PowerTensor3, TensorMeta), IoError> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, offset: 0 };
    let h = parse_header(&mut r)?;
    if h.sizes.len() != 3 {
        return Err(IoError::HeaderMismatch(format!(
            "expected a 3-way tensor, found {} modes",
            h.sizes.len()
        )));
    }
    if h.value_kind != VALUE_KIND_POWER {
        return Err(IoError::HeaderMismatch("expected power values in a 3-way file".into()));
    }
    let (n_i, n_j, n_k) = (h.sizes[0], h.sizes[1], h.sizes[2]);
    let n_rx = h.pair_map as usize;
    if n_rx == 0 || n_j % n_rx != 0 {
        return Err(IoError::HeaderMismatch(format!(
            "beam-pair map {n_rx} does not divide {n_j} beam pairs"
        )));
    }
    let expected = payload_len(&h.sizes, 4)?;
    check_payload(&r, expected)?;

    let count = expected / 4;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as f64);
    }
    // file order is delay-fastest; the in-memory layout is scan-fastest,
    // so rebuild in standard layout
    let data = Array3::from_shape_vec((n_i, n_j, n_k).f(), values)
        .expect("length checked against the header")
        .as_standard_layout()
        .into_owned();
    let timestamps = (0..n_k).map(|k| k as f64 * h.meta.scan_period_s).collect();
    Ok((PowerTensor3 { data, timestamps, n_rx_beams: n_rx }, h.meta))
}
