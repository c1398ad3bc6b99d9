//! CSV and SVG exports.
//!
//! Exports are pure sinks: they render analysis results without
//! touching them, and identical inputs always produce byte-identical
//! output. SVG is hand-rolled so plots need no external renderer and
//! stay deterministic.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::blocktrace::{BlockageEvent, GainTrace, MarkovModel};
use crate::io::{write_atomic, IoError};

/// Writes UTF-8 text atomically (temp file plus rename).
pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    write_atomic(path, text.as_bytes())
}

// ------------------------------------------------------------------ CSV

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// Renders gain traces as CSV: a `time_s` column followed by one
/// `trace_<id>` column per component, levels in dB to 6 decimals.
pub fn traces_csv(traces: &[GainTrace]) -> Result<String, IoError> {
    let first = traces
        .first()
        .ok_or_else(|| IoError::Export("no traces to export".into()))?;
    for t in traces {
        if t.timestamps != first.timestamps {
            return Err(IoError::Export(format!(
                "trace {} is on a different time grid than trace {}",
                t.component_id, first.component_id
            )));
        }
    }
    let mut out = String::from("time_s");
    for t in traces {
        write!(out, ",trace_{}", t.component_id).expect("string write");
    }
    out.push('\n');
    for (k, &ts) in first.timestamps.iter().enumerate() {
        out.push_str(&fmt6(ts));
        for t in traces {
            out.push(',');
            out.push_str(&fmt6(t.levels_db[k]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses CSV in the `traces_csv` layout back into gain traces.
pub fn parse_traces_csv(text: &str) -> Result<Vec<GainTrace>, IoError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| IoError::Export("empty CSV".into()))?;
    let mut cols = header.split(',');
    if cols.next() != Some("time_s") {
        return Err(IoError::Export("first CSV column must be time_s".into()));
    }
    let ids: Vec<usize> = cols
        .enumerate()
        .map(|(n, name)| {
            name.strip_prefix("trace_")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| IoError::Export(format!("bad trace column {} ({name})", n + 1)))
        })
        .collect::<Result<_, _>>()?;
    if ids.is_empty() {
        return Err(IoError::Export("CSV has no trace columns".into()));
    }

    let mut timestamps = Vec::new();
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != ids.len() + 1 {
            return Err(IoError::Export(format!(
                "row {}: expected {} fields, found {}",
                row + 2,
                ids.len() + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| IoError::Export(format!("row {}: bad number {s:?}", row + 2)))
        };
        timestamps.push(parse(fields[0])?);
        for (c, f) in fields[1..].iter().enumerate() {
            levels[c].push(parse(f)?);
        }
    }
    ids.into_iter()
        .zip(levels)
        .map(|(id, lv)| GainTrace::new(id, timestamps.clone(), lv).map_err(IoError::from))
        .collect()
}

/// Renders blockage events as CSV, one row per event with its
/// component id and the four boundary times plus durations and depth.
pub fn events_csv(events: &[(usize, Vec<BlockageEvent>)]) -> String {
    let mut out = String::from(
        "component,event,t_fade_start_s,t_block_start_s,t_block_end_s,t_rise_end_s,\
         depth_db,t_blocked_s,t_fading_s,t_rising_s\n",
    );
    for (id, list) in events {
        for (n, e) in list.iter().enumerate() {
            writeln!(
                out,
                "{id},{n},{},{},{},{},{},{},{},{}",
                fmt6(e.t_fade_start_s),
                fmt6(e.t_block_start_s),
                fmt6(e.t_block_end_s),
                fmt6(e.t_rise_end_s),
                fmt6(e.depth_db),
                fmt6(e.t_blocked_s),
                fmt6(e.t_fading_s),
                fmt6(e.t_rising_s),
            )
            .expect("string write");
        }
    }
    out
}

/// Renders per-path and joint transition matrices as CSV. Per-path
/// rows name the path index; joint rows name the packed state code.
pub fn markov_csv(m: &MarkovModel) -> String {
    let mut out = String::from("matrix,row,p_to_unblocked,p_to_blocked\n");
    for (p, mat) in m.per_path.iter().enumerate() {
        for (s, label) in [(0usize, "U"), (1, "B")] {
            writeln!(
                out,
                "path_{p},{label},{},{}",
                fmt6(mat[s][0]),
                fmt6(mat[s][1])
            )
            .expect("string write");
        }
    }
    let n = m.joint.nrows();
    for from in 0..n {
        let row: Vec<String> = (0..n).map(|to| fmt6(m.joint[[from, to]])).collect();
        writeln!(out, "joint,{from},{}", row.join(",")).expect("string write");
    }
    out
}

// ------------------------------------------------------------------ SVG

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#e377c2",
];

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let w = SVG_W - MARGIN_L - MARGIN_R;
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * w
    }

    /// SVG y grows downward; data y grows upward.
    fn y(&self, v: f64) -> f64 {
        let h = SVG_H - MARGIN_T - MARGIN_B;
        MARGIN_T + (self.y_max - v) / (self.y_max - self.y_min) * h
    }
}

fn svg_open(out: &mut String) {
    write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    )
    .expect("string write");
}

fn svg_axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (MARGIN_L, SVG_W - MARGIN_R);
    let (y0, y1) = (SVG_H - MARGIN_B, MARGIN_T);
    write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    )
    .expect("string write");
    for n in 0..=4 {
        let fx = f.x_min + (f.x_max - f.x_min) * n as f64 / 4.0;
        let px = f.x(fx);
        write!(
            out,
            "<line x1=\"{}\" y1=\"{y0}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt2(px),
            fmt2(px),
            y0 + 5.0,
            fmt2(px),
            y0 + 20.0,
            fmt2(fx)
        )
        .expect("string write");
        let fy = f.y_min + (f.y_max - f.y_min) * n as f64 / 4.0;
        let py = f.y(fy);
        write!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{x0}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            x0 - 5.0,
            fmt2(py),
            fmt2(py),
            x0 - 8.0,
            fmt2(py + 4.0),
            fmt2(fy)
        )
        .expect("string write");
    }
    write!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        (x0 + x1) / 2.0,
        SVG_H - 10.0,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
    )
    .expect("string write");
}

/// Line plot of gain traces over time, one colored polyline per
/// component, with labeled axes and a legend.
pub fn svg_traces(traces: &[GainTrace]) -> Result<String, IoError> {
    if traces.is_empty() {
        return Err(IoError::Export("no traces to plot".into()));
    }
    let x_min = traces
        .iter()
        .flat_map(|t| t.timestamps.first())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let x_max = traces
        .iter()
        .flat_map(|t| t.timestamps.last())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for t in traces {
        for &v in &t.levels_db {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    let pad = ((y_max - y_min) * 0.05).max(1.0);
    let f = Frame {
        x_min,
        x_max: if x_max > x_min { x_max } else { x_min + 1.0 },
        y_min: y_min - pad,
        y_max: y_max + pad,
    };

    let mut out = String::new();
    svg_open(&mut out);
    svg_axes(&mut out, &f, "time [s]", "level [dB]");
    for (n, t) in traces.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let points: Vec<String> = t
            .timestamps
            .iter()
            .zip(&t.levels_db)
            .map(|(&ts, &lv)| format!("{},{}", fmt2(f.x(ts)), fmt2(f.y(lv))))
            .collect();
        write!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
             points=\"{}\"/>\n",
            points.join(" ")
        )
        .expect("string write");
        write!(
            out,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">trace_{}</text>\n",
            SVG_W - MARGIN_R - 70.0,
            MARGIN_T + 16.0 * (n as f64 + 1.0),
            t.component_id
        )
        .expect("string write");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Three-stop color ramp from dark blue through red to yellow.
fn heat_color(t: f64) -> String {
    let stops = [(13.0, 8.0, 135.0), (219.0, 92.0, 104.0), (240.0, 249.0, 33.0)];
    let t = t.clamp(0.0, 1.0);
    let (a, b, frac) = if t < 0.5 {
        (stops[0], stops[1], t * 2.0)
    } else {
        (stops[1], stops[2], (t - 0.5) * 2.0)
    };
    let lerp = |lo: f64, hi: f64| (lo + (hi - lo) * frac).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

/// Heatmap of a matrix with one SVG cell per entry; rows run bottom-up
/// along the y axis. Values are rendered on a linear color scale from
/// the matrix minimum to its maximum, so pass dB values for power.
pub fn svg_heatmap(values: &Array2<f64>, x_label: &str, y_label: &str) -> Result<String, IoError> {
    let (rows, cols) = values.dim();
    if rows == 0 || cols == 0 {
        return Err(IoError::Export("empty matrix".into()));
    }
    let mut v_min = f64::INFINITY;
    let mut v_max = f64::NEG_INFINITY;
    for &v in values.iter() {
        if !v.is_finite() {
            return Err(IoError::Export("non-finite matrix entry".into()));
        }
        v_min = v_min.min(v);
        v_max = v_max.max(v);
    }
    let span = if v_max > v_min { v_max - v_min } else { 1.0 };

    let f = Frame { x_min: 0.0, x_max: cols as f64, y_min: 0.0, y_max: rows as f64 };
    let mut out = String::new();
    svg_open(&mut out);
    svg_axes(&mut out, &f, x_label, y_label);
    let cell_w = (SVG_W - MARGIN_L - MARGIN_R) / cols as f64;
    let cell_h = (SVG_H - MARGIN_T - MARGIN_B) / rows as f64;
    for r in 0..rows {
        for c in 0..cols {
            let t = (values[[r, c]] - v_min) / span;
            write!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                fmt2(f.x(c as f64)),
                fmt2(f.y((r + 1) as f64)),
                fmt2(cell_w + 0.01),
                fmt2(cell_h + 0.01),
                heat_color(t)
            )
            .expect("string write");
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
