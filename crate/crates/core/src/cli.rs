//! Command-line pipeline: simulate, preprocess, decompose, analyze,
//! and plot, each a small wrapper over the library with file-based
//! handoff between stages.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::blocktrace::{
    self, detect_events, fit_markov, fit_piecewise, gain_trajectories, joint_outage,
    label_states, slot_spacing, smoothed, BlockageEvent, JointOutage, MarkovModel,
};
use crate::io::export::{parse_traces_csv, svg_heatmap, svg_traces, traces_csv, write_text};
use crate::io::scene::load_scene;
use crate::io::tensor_file::{
    read_measurement_tensor, read_power_tensor, write_measurement_tensor, write_power_tensor,
    TensorMeta,
};
use crate::parafac::{cp_als, pca_baseline, AlsOptions, CpModel, InitMethod};
use crate::sounder::Sounder;
use crate::tensorops::{best_rx_per_tx, delay_power, partial_unfold};

#[derive(Debug, Parser)]
#[command(
    name = "beamscan",
    version,
    about = "Beam-steered 60 GHz link simulation and blockage analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Seed factors from truncated SVDs of the matricizations
    Svd,
    /// Seed factors from uniform random entries
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Line plot of gain traces from an analyze CSV
    Traces,
    /// Beam-pair power heatmap over scans from a power tensor
    Heatmap,
    /// Departure-beam power heatmap over scans (best RX per TX beam)
    Aod,
}

/// Input selector for `plot`: exactly one of a trace CSV or a power
/// tensor file.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PlotSource {
    /// Trace CSV written by `analyze --csv`
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// 3-way power tensor file
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a beam-swept measurement and write the 4-way tensor
    Simulate {
        /// Scene description JSON
        #[arg(long)]
        scene: PathBuf,
        /// Output tensor file
        #[arg(long)]
        out: PathBuf,
        /// Override the scene's noise seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Collapse the beam modes to beam pairs and square to power
    Preprocess {
        /// 4-way measurement tensor file
        #[arg(long = "in")]
        input: PathBuf,
        /// Output 3-way power tensor file
        #[arg(long)]
        out: PathBuf,
    },
    /// Decompose a power tensor into rank-1 path components
    Decompose {
        /// 3-way power tensor file
        #[arg(long = "in")]
        input: PathBuf,
        /// Number of components to extract
        #[arg(long)]
        rank: usize,
        /// Sweep limit
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        /// Stop when the fit improves by less than this
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Factor initialization
        #[arg(long, value_enum, default_value_t = InitArg::Svd)]
        init: InitArg,
        /// Clamp factors to be nonnegative after every update
        #[arg(long)]
        nonneg: bool,
        /// Output model JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Principal-component baseline on the fully unfolded tensor
    BaselinePca {
        /// 3-way power tensor file
        #[arg(long = "in")]
        input: PathBuf,
        /// Number of components to keep
        #[arg(long)]
        rank: usize,
        /// Output model JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment gain traces, label blockage, and fit Markov models
    Analyze {
        /// Decomposition model JSON
        #[arg(long)]
        model: PathBuf,
        /// Blockage entry threshold below the unblocked reference, dB
        #[arg(long, default_value_t = blocktrace::DEFAULT_BLOCK_THRESHOLD_DB)]
        threshold_db: f64,
        /// Extra recovery margin above the entry threshold, dB
        #[arg(long, default_value_t = 0.0)]
        hysteresis_db: f64,
        /// Piecewise-linear segmentation error budget, dB RMSE
        #[arg(long, default_value_t = blocktrace::DEFAULT_MAX_RMSE_DB)]
        max_rmse_db: f64,
        /// Label states on the segment means instead of the raw trace
        #[arg(long)]
        smooth: bool,
        /// Output report JSON
        #[arg(long)]
        out: PathBuf,
        /// Also write the gain traces as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Render traces or power heatmaps as SVG
    Plot {
        #[command(flatten)]
        source: PlotSource,
        /// What to draw
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output SVG file
        #[arg(long)]
        out: PathBuf,
    },
}

/// Per-component analysis results in the report.
#[derive(Debug, Serialize)]
pub struct ComponentReport {
    pub component_id: usize,
    pub unblocked_ref_db: f64,
    pub segment_count: usize,
    pub blocked_fraction: f64,
    pub events: Vec<BlockageEvent>,
}

/// Full analysis report written by `analyze`.
#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub threshold_db: f64,
    pub hysteresis_db: f64,
    pub max_rmse_db: f64,
    pub slot_duration_s: f64,
    pub components: Vec<ComponentReport>,
    pub markov: MarkovModel,
    pub joint_outage: JointOutage,
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn power_db(v: f64) -> f64 {
    10.0 * v.max(1e-300).log10()
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { scene, out, seed } => {
            let mut loaded =
                load_scene(&scene).with_context(|| format!("loading {}", scene.display()))?;
            if let Some(seed) = seed {
                loaded.config.seed = seed;
            }
            let sounder =
                Sounder::new(loaded.scene, loaded.tx_codebook, loaded.rx_codebook, loaded.config)?;
            let tensor = sounder.run_measurement()?;
            let (n_i, n_r, n_x, n_k) = tensor.data.dim();
            write_measurement_tensor(&out, &tensor)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {}: {n_i}x{n_r}x{n_x}x{n_k} complex taps, {} out-of-window paths dropped",
                out.display(),
                tensor.dropped_paths
            );
        }
        Command::Preprocess { input, out } => {
            let tensor = read_measurement_tensor(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let power = partial_unfold(&tensor);
            let meta = TensorMeta::from_config(&tensor.config);
            write_power_tensor(&out, &power, &meta)
                .with_context(|| format!("writing {}", out.display()))?;
            let (n_i, n_j, n_k) = power.data.dim();
            println!("wrote {}: {n_i}x{n_j}x{n_k} power tensor", out.display());
        }
        Command::Decompose { input, rank, max_iters, tol, init, nonneg, out } => {
            let (power, _) = read_power_tensor(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let opts = AlsOptions {
                max_iters,
                tol,
                init: match init {
                    InitArg::Svd => InitMethod::Svd,
                    InitArg::Random => InitMethod::Random,
                },
                nonneg,
                ..AlsOptions::default()
            };
            let model = cp_als(&power, rank, &opts)?;
            write_json(&out, &model)?;
            println!(
                "wrote {}: rank {rank}, fit {:.6} after {} sweeps{}",
                out.display(),
                model.fit,
                model.iterations,
                if model.converged { "" } else { " (sweep limit hit)" }
            );
        }
        Command::BaselinePca { input, rank, out } => {
            let (power, _) = read_power_tensor(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let model = pca_baseline(&power, rank)?;
            write_json(&out, &model)?;
            println!("wrote {}: {rank} principal components", out.display());
        }
        Command::Analyze { model, threshold_db, hysteresis_db, max_rmse_db, smooth, out, csv } => {
            let text = std::fs::read_to_string(&model)
                .with_context(|| format!("reading {}", model.display()))?;
            let model: CpModel = serde_json::from_str(&text)
                .with_context(|| "parsing the decomposition model")?;
            let traces = gain_trajectories(&model, blocktrace::DEFAULT_LEVEL_FLOOR_DB)?;

            let mut components = Vec::with_capacity(traces.len());
            let mut sequences = Vec::with_capacity(traces.len());
            for trace in &traces {
                let segmented = fit_piecewise(trace, max_rmse_db)?;
                let labeled =
                    if smooth { smoothed(trace, &segmented) } else { trace.clone() };
                let states = label_states(&labeled, threshold_db, hysteresis_db)?;
                let events = detect_events(&labeled, &states)?;
                let blocked = states
                    .states
                    .iter()
                    .filter(|s| **s == blocktrace::PathState::Blocked)
                    .count();
                components.push(ComponentReport {
                    component_id: trace.component_id,
                    unblocked_ref_db: states.unblocked_ref_db,
                    segment_count: segmented.segments.len(),
                    blocked_fraction: blocked as f64 / states.states.len() as f64,
                    events,
                });
                sequences.push(states);
            }
            let slot = slot_spacing(&model.timestamps);
            let report = AnalysisReport {
                threshold_db,
                hysteresis_db,
                max_rmse_db,
                slot_duration_s: slot,
                markov: fit_markov(&sequences, slot)?,
                joint_outage: joint_outage(&sequences)?,
                components,
            };
            write_json(&out, &report)?;
            if let Some(csv_path) = csv {
                write_text(&csv_path, &traces_csv(&traces)?)
                    .with_context(|| format!("writing {}", csv_path.display()))?;
            }
            let total: usize = report.components.iter().map(|c| c.events.len()).sum();
            println!(
                "wrote {}: {} components, {total} blockage events, all paths blocked at once: {}",
                out.display(),
                report.components.len(),
                if report.joint_outage.ever_all_blocked { "yes" } else { "no" }
            );
        }
        Command::Plot { source, kind, out } => {
            let svg = match kind {
                PlotKind::Traces => {
                    let Some(csv) = source.csv else {
                        bail!("--kind traces needs --csv (a trace CSV from analyze)");
                    };
                    let text = std::fs::read_to_string(&csv)
                        .with_context(|| format!("reading {}", csv.display()))?;
                    svg_traces(&parse_traces_csv(&text)?)?
                }
                PlotKind::Heatmap | PlotKind::Aod => {
                    let Some(input) = source.input else {
                        bail!("--kind heatmap/aod needs --in (a power tensor file)");
                    };
                    let (power, _) = read_power_tensor(&input)
                        .with_context(|| format!("reading {}", input.display()))?;
                    let pairs = delay_power(&power);
                    if kind == PlotKind::Heatmap {
                        svg_heatmap(&pairs.data.mapv(power_db), "scan index", "beam pair index")?
                    } else {
                        let aod = best_rx_per_tx(&pairs)?;
                        svg_heatmap(&aod.mapv(power_db), "scan index", "TX beam index")?
                    }
                }
            };
            write_text(&out, &svg).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
