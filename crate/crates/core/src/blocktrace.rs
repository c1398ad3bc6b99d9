//! Blockage analytics on component gain trajectories: dB-domain traces,
//! piecewise-linear segmentation, Blocked/Unblocked state labeling,
//! per-event statistics (depth, fade/blocked/rise durations), per-path
//! and joint Markov transition models, and multi-path outage overlap.
//!
//! The entry point is [`gain_trajectories`], which converts a fitted
//! tensor model's gain trajectories into dB traces; everything else
//! operates on those traces or on the labeled state sequences derived
//! from them. All functions are pure and deterministic.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parafac::CpModel;

/// Default dB floor keeping the log of near-zero gains finite.
pub const DEFAULT_LEVEL_FLOOR_DB: f64 = -120.0;
/// Default segmentation stopping threshold.
pub const DEFAULT_MAX_RMSE_DB: f64 = 1.5;
/// Default drop below the unblocked reference that counts as blocked.
pub const DEFAULT_BLOCK_THRESHOLD_DB: f64 = 10.0;
/// Levels within this margin of the reference delimit the fading and
/// rising regions around an event, and select the samples whose median
/// defines the unblocked reference itself.
pub const REF_WINDOW_DB: f64 = 3.0;
/// Largest path count for which the joint product-state Markov model
/// (2^P states) is still built.
pub const MAX_JOINT_PATHS: usize = 10;

#[derive(Debug, Error)]
pub enum BlocktraceError {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state sequences inconsistent: {0}")]
    StateMismatch(String),
    #[error("joint model over {0} paths exceeds the {MAX_JOINT_PATHS}-path limit")]
    TooManyPaths(usize),
}

// ---------------------------------------------------------------- types

/// Received-power level of one component (or path) over time, in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTrace {
    /// Index of the source component or path.
    pub component_id: usize,
    pub timestamps: Vec<f64>,
    pub levels_db: Vec<f64>,
}

impl GainTrace {
    pub fn new(
        component_id: usize,
        timestamps: Vec<f64>,
        levels_db: Vec<f64>,
    ) -> Result<Self, BlocktraceError> {
        let trace = GainTrace { component_id, timestamps, levels_db };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), BlocktraceError> {
        if self.timestamps.is_empty() {
            return Err(BlocktraceError::InvalidTrace("trace is empty".into()));
        }
        if self.timestamps.len() != self.levels_db.len() {
            return Err(BlocktraceError::InvalidTrace(format!(
                "{} timestamps for {} levels",
                self.timestamps.len(),
                self.levels_db.len()
            )));
        }
        if self.timestamps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(BlocktraceError::InvalidTrace(
                "timestamps must be strictly increasing".into(),
            ));
        }
        if self.timestamps.iter().chain(&self.levels_db).any(|v| !v.is_finite()) {
            return Err(BlocktraceError::InvalidTrace("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels_db.is_empty()
    }
}

/// One fitted line over the sample range `[start_idx, end_idx)`. The
/// line evaluates as `intercept_db + slope_db_per_s * (t - t_start)`
/// with `t_start` the timestamp at `start_idx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_idx: usize,
    pub end_idx: usize,
    pub slope_db_per_s: f64,
    pub intercept_db: f64,
    pub rmse_db: f64,
}

/// Contiguous piecewise-linear partition of a trace's index range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedTrace {
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathState {
    Unblocked = 0,
    Blocked = 1,
}

/// Per-slot Blocked/Unblocked labels for one trace, together with the
/// unblocked reference level the labels were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSequence {
    pub states: Vec<PathState>,
    pub unblocked_ref_db: f64,
}

/// One contiguous blockage: the level fades below the threshold at
/// `t_block_start_s`, stays blocked until `t_block_end_s`, and the
/// surrounding fade and rise regions extend to where the level last
/// (resp. first) sat within [`REF_WINDOW_DB`] of the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageEvent {
    pub t_fade_start_s: f64,
    pub t_block_start_s: f64,
    pub t_block_end_s: f64,
    pub t_rise_end_s: f64,
    /// Reference level minus the deepest level inside the blocked run.
    pub depth_db: f64,
    pub t_blocked_s: f64,
    pub t_fading_s: f64,
    pub t_rising_s: f64,
}

/// Maximum-likelihood discrete-time Markov model over path states.
///
/// Transition matrices are indexed `[from, to]` with state 0 =
/// Unblocked and 1 = Blocked. In the joint model, path `p`'s state
/// occupies bit `p` of the product-state index (so path 0 is the least
/// significant bit). Rows that were never visited get a self-loop and
/// are flagged, keeping every row stochastic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    pub per_path: Vec<[[f64; 2]; 2]>,
    pub per_path_counts: Vec<[[u64; 2]; 2]>,
    pub per_path_unvisited: Vec<[bool; 2]>,
    /// `[2^P x 2^P]` transition matrix over the product state.
    pub joint: Array2<f64>,
    pub joint_counts: Array2<u64>,
    pub joint_unvisited: Vec<bool>,
    pub slot_duration_s: f64,
}

/// Co-blockage statistics across a set of paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointOutage {
    /// True when some slot has every path blocked at once.
    pub ever_all_blocked: bool,
    /// Fraction of slots with every path blocked.
    pub all_blocked_fraction: f64,
    /// `overlap_matrix[p][q]` is the fraction of slots where paths `p`
    /// and `q` are both blocked; the diagonal holds per-path blocked
    /// fractions.
    pub overlap_matrix: Array2<f64>,
}

// ------------------------------------------------------------- traces

/// Converts each model component's gain trajectory into a dB trace,
/// `level[k] = 10 log10(g[k]^2 * scale)` floored at `floor_db`, where
/// `scale` restores the magnitude carried by the delay and spatial
/// signature columns. Traces come out in the model's component order.
pub fn gain_trajectories(
    m: &CpModel,
    floor_db: f64,
) -> Result<Vec<GainTrace>, BlocktraceError> {
    if !floor_db.is_finite() {
        return Err(BlocktraceError::InvalidParameter("level floor must be finite".into()));
    }
    let mut traces = Vec::with_capacity(m.rank);
    for l in 0..m.rank {
        let scale: f64 = m.delay_signatures.column(l).iter().map(|v| v * v).sum::<f64>()
            * m.spatial_signatures.column(l).iter().map(|v| v * v).sum::<f64>();
        let levels = m
            .gain_trajectories
            .column(l)
            .iter()
            .map(|&g| (10.0 * (g * g * scale).log10()).max(floor_db))
            .collect();
        traces.push(GainTrace::new(l, m.timestamps.clone(), levels)?);
    }
    Ok(traces)
}

/// Least-squares line over samples `[start, end)`: returns the slope,
/// the intercept referenced to the first timestamp of the range, and
/// the root-mean-square residual.
fn line_stats(ts: &[f64], lv: &[f64], start: usize, end: usize) -> (f64, f64, f64) {
    let n = (end - start) as f64;
    let mt = ts[start..end].iter().sum::<f64>() / n;
    let mv = lv[start..end].iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxv = 0.0;
    for k in start..end {
        let dt = ts[k] - mt;
        sxx += dt * dt;
        sxv += dt * (lv[k] - mv);
    }
    let slope = if sxx > 0.0 { sxv / sxx } else { 0.0 };
    let mut sse = 0.0;
    for k in start..end {
        let r = lv[k] - (mv + slope * (ts[k] - mt));
        sse += r * r;
    }
    (slope, mv - slope * (mt - ts[start]), (sse / n).sqrt())
}

/// Bottom-up piecewise-linear segmentation. Starting from single-sample
/// segments, repeatedly merges the adjacent pair whose merged fit has
/// the lowest RMSE (leftmost on ties) and stops once the cheapest merge
/// would exceed `max_rmse_db`.
pub fn fit_piecewise(
    trace: &GainTrace,
    max_rmse_db: f64,
) -> Result<SegmentedTrace, BlocktraceError> {
    trace.validate()?;
    let n = trace.len();
    if n < 2 {
        return Err(BlocktraceError::InvalidTrace(
            "piecewise fit needs at least two samples".into(),
        ));
    }
    if max_rmse_db.is_nan() || max_rmse_db < 0.0 {
        return Err(BlocktraceError::InvalidParameter(
            "max RMSE must be nonnegative".into(),
        ));
    }
    let ts = &trace.timestamps;
    let lv = &trace.levels_db;
    let merged_rmse = |s: usize, e: usize| line_stats(ts, lv, s, e).2;

    // bounds[i]..bounds[i+1] delimit segment i
    let mut bounds: Vec<usize> = (0..=n).collect();
    let mut costs: Vec<f64> = (0..n - 1).map(|i| merged_rmse(bounds[i], bounds[i + 2])).collect();
    while !costs.is_empty() {
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for (i, &c) in costs.iter().enumerate() {
            if c < best_cost {
                best = i;
                best_cost = c;
            }
        }
        if best_cost > max_rmse_db {
            break;
        }
        bounds.remove(best + 1);
        costs.remove(best);
        if best > 0 {
            costs[best - 1] = merged_rmse(bounds[best - 1], bounds[best + 1]);
        }
        if best < costs.len() {
            costs[best] = merged_rmse(bounds[best], bounds[best + 2]);
        }
    }

    let segments = bounds
        .windows(2)
        .map(|w| {
            let (slope, intercept, rmse) = line_stats(ts, lv, w[0], w[1]);
            Segment {
                start_idx: w[0],
                end_idx: w[1],
                slope_db_per_s: slope,
                intercept_db: intercept,
                rmse_db: rmse,
            }
        })
        .collect();
    Ok(SegmentedTrace { segments })
}

/// Replaces each sample by the value of its segment's fitted line,
/// for labeling noisy traces on the segment level instead of raw
/// samples.
pub fn smoothed(trace: &GainTrace, segmented: &SegmentedTrace) -> GainTrace {
    let mut levels = trace.levels_db.clone();
    for seg in &segmented.segments {
        let t0 = trace.timestamps[seg.start_idx];
        for k in seg.start_idx..seg.end_idx {
            levels[k] = seg.intercept_db + seg.slope_db_per_s * (trace.timestamps[k] - t0);
        }
    }
    GainTrace { component_id: trace.component_id, timestamps: trace.timestamps.clone(), levels_db: levels }
}

// ------------------------------------------------------------- states

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Labels each slot Blocked or Unblocked. The unblocked reference is
/// the median of all levels within [`REF_WINDOW_DB`] of the global
/// maximum; Blocked is entered when the level drops below
/// `ref - threshold_db` and left once it exceeds
/// `ref - threshold_db + hysteresis_db`. With zero hysteresis, brief
/// recoveries split a blockage into separate runs rather than being
/// smoothed away.
pub fn label_states(
    trace: &GainTrace,
    threshold_db: f64,
    hysteresis_db: f64,
) -> Result<StateSequence, BlocktraceError> {
    trace.validate()?;
    if !threshold_db.is_finite() || threshold_db <= 0.0 {
        return Err(BlocktraceError::InvalidParameter(
            "threshold must be positive and finite".into(),
        ));
    }
    if !hysteresis_db.is_finite() || hysteresis_db < 0.0 || hysteresis_db >= threshold_db {
        return Err(BlocktraceError::InvalidParameter(
            "hysteresis must lie in [0, threshold)".into(),
        ));
    }
    let lv = &trace.levels_db;
    let max = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let near_max: Vec<f64> = lv.iter().cloned().filter(|&v| v >= max - REF_WINDOW_DB).collect();
    let reference = median(near_max);
    let enter = reference - threshold_db;
    let exit = enter + hysteresis_db;

    let mut states = Vec::with_capacity(lv.len());
    let mut blocked = false;
    for &v in lv {
        if blocked {
            if v > exit {
                blocked = false;
            }
        } else if v < enter {
            blocked = true;
        }
        states.push(if blocked { PathState::Blocked } else { PathState::Unblocked });
    }
    Ok(StateSequence { states, unblocked_ref_db: reference })
}

// ------------------------------------------------------------- events

/// Median sample spacing, used as the nominal slot duration.
pub fn slot_spacing(ts: &[f64]) -> f64 {
    if ts.len() < 2 {
        return 0.0;
    }
    let mut diffs: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(|a, b| a.total_cmp(b));
    diffs[diffs.len() / 2]
}

/// Index of the largest level in `lo..=hi`, leftmost on ties.
fn peak_index(lv: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for k in lo..=hi {
        if lv[k] > lv[best] {
            best = k;
        }
    }
    best
}

/// Extracts one event per maximal Blocked run. Each slot is treated as
/// covering one sample spacing, so a run of n slots has a blocked
/// duration of n spacings. Fade and rise regions extend to the nearest
/// sample within [`REF_WINDOW_DB`] of the reference; when a gap between
/// two runs never recovers that far, the gap's peak splits it between
/// the earlier event's rise and the later event's fade, keeping events
/// disjoint.
pub fn detect_events(
    trace: &GainTrace,
    states: &StateSequence,
) -> Result<Vec<BlockageEvent>, BlocktraceError> {
    trace.validate()?;
    let n = trace.len();
    if states.states.len() != n {
        return Err(BlocktraceError::StateMismatch(format!(
            "{} states for {} samples",
            states.states.len(),
            n
        )));
    }
    let ts = &trace.timestamps;
    let lv = &trace.levels_db;
    let dt = slot_spacing(ts);
    let recovered = |k: usize| lv[k] >= states.unblocked_ref_db - REF_WINDOW_DB;

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < n {
        if states.states[k] == PathState::Blocked {
            let a = k;
            while k + 1 < n && states.states[k + 1] == PathState::Blocked {
                k += 1;
            }
            runs.push((a, k));
        }
        k += 1;
    }

    let mut events = Vec::with_capacity(runs.len());
    for (e, &(a, b)) in runs.iter().enumerate() {
        let t_block_start = ts[a];
        let t_block_end = ts[b] + dt;

        let lo = if e > 0 { runs[e - 1].1 + 1 } else { 0 };
        let t_fade_start = match (lo..a).rev().find(|&k| recovered(k)) {
            Some(f) => ts[f] + dt,
            None if e > 0 => ts[peak_index(lv, lo, a - 1)] + dt,
            None => ts[0],
        }
        .min(t_block_start);

        let hi = if e + 1 < runs.len() { runs[e + 1].0 - 1 } else { n - 1 };
        let t_rise_end = if b == n - 1 {
            ts[n - 1] + dt
        } else {
            match (b + 1..=hi).find(|&k| recovered(k)) {
                Some(r) => ts[r],
                None if e + 1 < runs.len() => ts[peak_index(lv, b + 1, hi)],
                None => ts[n - 1] + dt,
            }
        }
        .max(t_block_end);

        let depth_db = states.unblocked_ref_db
            - lv[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
        events.push(BlockageEvent {
            t_fade_start_s: t_fade_start,
            t_block_start_s: t_block_start,
            t_block_end_s: t_block_end,
            t_rise_end_s: t_rise_end,
            depth_db,
            t_blocked_s: t_block_end - t_block_start,
            t_fading_s: t_block_start - t_fade_start,
            t_rising_s: t_rise_end - t_block_end,
        });
    }
    Ok(events)
}

// ------------------------------------------------------------- markov

fn check_sequences(seqs: &[StateSequence]) -> Result<usize, BlocktraceError> {
    if seqs.is_empty() {
        return Err(BlocktraceError::InvalidParameter(
            "at least one state sequence required".into(),
        ));
    }
    let n = seqs[0].states.len();
    if seqs.iter().any(|s| s.states.len() != n) {
        return Err(BlocktraceError::StateMismatch(
            "state sequences have different lengths".into(),
        ));
    }
    Ok(n)
}

/// Maximum-likelihood Markov transition estimates from slot-to-slot
/// transition counts, per path and over the joint product state of all
/// paths. Rows never visited get an identity self-loop and a flag.
pub fn fit_markov(
    seqs: &[StateSequence],
    slot_duration_s: f64,
) -> Result<MarkovModel, BlocktraceError> {
    let n = check_sequences(seqs)?;
    if n < 2 {
        return Err(BlocktraceError::InvalidParameter(
            "sequences need at least two slots".into(),
        ));
    }
    let p = seqs.len();
    if p > MAX_JOINT_PATHS {
        return Err(BlocktraceError::TooManyPaths(p));
    }
    if !slot_duration_s.is_finite() || slot_duration_s < 0.0 {
        return Err(BlocktraceError::InvalidParameter(
            "slot duration must be nonnegative and finite".into(),
        ));
    }

    let mut per_path_counts = vec![[[0u64; 2]; 2]; p];
    for (q, s) in seqs.iter().enumerate() {
        for w in s.states.windows(2) {
            per_path_counts[q][w[0] as usize][w[1] as usize] += 1;
        }
    }
    let mut per_path = vec![[[0.0f64; 2]; 2]; p];
    let mut per_path_unvisited = vec![[false; 2]; p];
    for q in 0..p {
        for from in 0..2 {
            let total = per_path_counts[q][from][0] + per_path_counts[q][from][1];
            if total == 0 {
                per_path[q][from][from] = 1.0;
                per_path_unvisited[q][from] = true;
            } else {
                for to in 0..2 {
                    per_path[q][from][to] = per_path_counts[q][from][to] as f64 / total as f64;
                }
            }
        }
    }

    let m = 1usize << p;
    let code = |k: usize| -> usize {
        seqs.iter().enumerate().map(|(q, s)| (s.states[k] as usize) << q).sum()
    };
    let mut joint_counts = Array2::<u64>::zeros((m, m));
    for k in 0..n - 1 {
        joint_counts[[code(k), code(k + 1)]] += 1;
    }
    let mut joint = Array2::<f64>::zeros((m, m));
    let mut joint_unvisited = vec![false; m];
    for from in 0..m {
        let total: u64 = (0..m).map(|to| joint_counts[[from, to]]).sum();
        if total == 0 {
            joint[[from, from]] = 1.0;
            joint_unvisited[from] = true;
        } else {
            for to in 0..m {
                joint[[from, to]] = joint_counts[[from, to]] as f64 / total as f64;
            }
        }
    }

    Ok(MarkovModel {
        per_path,
        per_path_counts,
        per_path_unvisited,
        joint,
        joint_counts,
        joint_unvisited,
        slot_duration_s,
    })
}

/// Co-blockage statistics: whether all paths were ever blocked at once,
/// how often, and the pairwise co-blocked fractions.
pub fn joint_outage(seqs: &[StateSequence]) -> Result<JointOutage, BlocktraceError> {
    let n = check_sequences(seqs)?;
    if n == 0 {
        return Err(BlocktraceError::InvalidParameter("state sequences are empty".into()));
    }
    let p = seqs.len();
    let mut all_blocked = 0usize;
    let mut overlap = Array2::<f64>::zeros((p, p));
    for k in 0..n {
        let blocked: Vec<bool> =
            seqs.iter().map(|s| s.states[k] == PathState::Blocked).collect();
        if blocked.iter().all(|&b| b) {
            all_blocked += 1;
        }
        for a in 0..p {
            if !blocked[a] {
                continue;
            }
            for b in 0..p {
                if blocked[b] {
                    overlap[[a, b]] += 1.0;
                }
            }
        }
    }
    overlap.mapv_inplace(|v| v / n as f64);
    Ok(JointOutage {
        ever_all_blocked: all_blocked > 0,
        all_blocked_fraction: all_blocked as f64 / n as f64,
        overlap_matrix: overlap,
    })
}
