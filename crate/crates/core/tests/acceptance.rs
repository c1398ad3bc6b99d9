//! Acceptance suite for the headline requirements of the crate.
//!
//! Runs without the default test harness so that every criterion prints
//! exactly one PASS/FAIL line, in order, regardless of which ones fail.
//! The process exits nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ndarray::{Array2, Array3, Array4, ShapeBuilder};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use beamscan::array::make_codebook;
use beamscan::blocktrace::{
    detect_events, gain_trajectories, fit_markov, joint_outage, label_states, BlockageEvent,
    PathState, StateSequence, DEFAULT_LEVEL_FLOOR_DB,
};
use beamscan::geometry::{Blocker, Point, Scene, Trajectory, Wall};
use beamscan::io::scene::{load_scene, LoadedScene};
use beamscan::parafac::{align_factors, cp_als, pca_baseline, AlsOptions, CpModel, InitMethod};
use beamscan::sounder::{MeasurementTensor, ScanConfig, Sounder};
use beamscan::tensorops::{delay_power, partial_unfold, refold, PowerTensor3};

fn main() {
    let criteria: Vec<(&str, fn() -> String)> = vec![
        ("criterion 1 (single-blocker event anatomy)", criterion_1),
        ("criterion 2 (LOS/NLOS trajectory separation)", criterion_2),
        ("criterion 3 (noiseless CP recovery)", criterion_3),
        ("criterion 4 (ALS sweep monotonicity)", criterion_4),
        ("criterion 5 (CP beats the PCA baseline)", criterion_5),
        ("criterion 6 (lossless unfolding)", criterion_6),
        ("criterion 7 (Markov estimation)", criterion_7),
        ("criterion 8 (three-blocker joint outage)", criterion_8),
        ("criterion 9 (scan protocol arithmetic)", criterion_9),
        ("criterion 10 (pipeline determinism)", criterion_10),
    ];

    // The default hook would print its own panic report between the
    // PASS/FAIL lines; failures are summarised by the lines themselves.
    std::panic::set_hook(Box::new(|_| {}));

    let mut failures = 0usize;
    for (name, run) in criteria {
        let start = Instant::now();
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(detail) => {
                println!("{name}: PASS - {detail} [{:.1} s]", start.elapsed().as_secs_f64());
            }
            Err(payload) => {
                failures += 1;
                println!("{name}: FAIL - {}", panic_text(payload.as_ref()));
            }
        }
    }
    let _ = std::panic::take_hook();

    if failures > 0 {
        println!("acceptance: {failures} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 10 criteria passed");
}

fn panic_text(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else {
        "panicked without a message".to_string()
    }
}

// ----------------------------------------------------------- shared helpers

fn scene_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

/// Loads a bundled scene and runs the full scan loop.
fn simulate_scene(name: &str) -> (MeasurementTensor, LoadedScene) {
    let loaded = load_scene(&scene_path(name)).expect("bundled scene loads");
    let sounder = Sounder::new(
        loaded.scene.clone(),
        loaded.tx_codebook.clone(),
        loaded.rx_codebook.clone(),
        loaded.config,
    )
    .expect("sounder construction");
    let mt = sounder.run_measurement().expect("measurement run");
    (mt, loaded)
}

/// Labels every component of a model and extracts its blockage events.
fn events_per_component(
    model: &CpModel,
    threshold_db: f64,
) -> (Vec<Vec<BlockageEvent>>, Vec<StateSequence>) {
    let traces = gain_trajectories(model, DEFAULT_LEVEL_FLOOR_DB).expect("gain traces");
    let mut events = Vec::with_capacity(traces.len());
    let mut seqs = Vec::with_capacity(traces.len());
    for trace in &traces {
        let states = label_states(trace, threshold_db, 0.0).expect("state labels");
        events.push(detect_events(trace, &states).expect("event extraction"));
        seqs.push(states);
    }
    (events, seqs)
}

/// Delay bin where a component's delay signature peaks, used to match
/// components to propagation paths (shorter paths peak earlier).
fn peak_delay_bin(model: &CpModel, component: usize) -> usize {
    let col = model.delay_signatures.column(component);
    let mut best = 0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    best
}

// --------------------------------------------------- geometric shadow oracle
//
// Independent 2-D reimplementation of the hard-shadow geometry: screens
// face the segment they attenuate, so a screen centred at `b` shadows the
// segment `a -> c` exactly when the perpendicular foot of `b` falls inside
// the segment and the perpendicular distance is under half the width.
// Reflections are handled on the unfolded segment, testing the blocker in
// place against the TX-side half and mirrored against the wall-side half.

#[derive(Clone, Copy)]
struct Pt(f64, f64);

fn screen_blocks(b: Pt, a: Pt, c: Pt, half_w: f64, lo: f64, hi: f64) -> bool {
    let (vx, vy) = (c.0 - a.0, c.1 - a.1);
    let (px, py) = (b.0 - a.0, b.1 - a.1);
    let t = (px * vx + py * vy) / (vx * vx + vy * vy);
    if t <= lo.max(0.0) || t >= hi.min(1.0) {
        return false;
    }
    let (fx, fy) = (a.0 + t * vx, a.1 + t * vy);
    ((b.0 - fx).powi(2) + (b.1 - fy).powi(2)).sqrt() < half_w
}

fn reflection_blocked(b: Pt, tx: Pt, rx_mirror: Pt, wall_y: f64, half_w: f64) -> bool {
    let split = (wall_y - tx.1) / (rx_mirror.1 - tx.1);
    screen_blocks(b, tx, rx_mirror, half_w, 0.0, split)
        || screen_blocks(Pt(b.0, 2.0 * wall_y - b.1), tx, rx_mirror, half_w, split, 1.0)
}

/// Collapses per-slot flags into `[start, end)` intervals in seconds.
fn blocked_intervals(flags: &[bool], period: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((s as f64 * period, k as f64 * period));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s as f64 * period, flags.len() as f64 * period));
    }
    out
}

/// Piecewise-linear 2-D track with clamping outside the waypoint span.
fn track_pos(waypoints: &[(f64, Pt)], t: f64) -> Pt {
    if t <= waypoints[0].0 {
        return waypoints[0].1;
    }
    for w in waypoints.windows(2) {
        let ((t0, p0), (t1, p1)) = (w[0], w[1]);
        if t <= t1 {
            let u = (t - t0) / (t1 - t0);
            return Pt(p0.0 + u * (p1.0 - p0.0), p0.1 + u * (p1.1 - p0.1));
        }
    }
    waypoints[waypoints.len() - 1].1
}

// ------------------------------------------------------- synthetic builders

fn bump(n: usize, centre: f64, width: f64) -> Vec<f64> {
    (0..n).map(|i| (-(i as f64 - centre).powi(2) / width).exp()).collect()
}

/// Builds a tensor from two known rank-one components plus the matching
/// reference model (unit-norm signatures, gains carrying the magnitudes).
fn two_component_tensor(
    d: [&[f64]; 2],
    s: [&[f64]; 2],
    g: [&[f64]; 2],
    n_rx_beams: usize,
) -> (PowerTensor3, CpModel) {
    let (ni, nj, nk) = (d[0].len(), s[0].len(), g[0].len());
    let mut data = Array3::<f64>::zeros((ni, nj, nk));
    for l in 0..2 {
        for i in 0..ni {
            for j in 0..nj {
                for k in 0..nk {
                    data[[i, j, k]] += d[l][i] * s[l][j] * g[l][k];
                }
            }
        }
    }
    let timestamps: Vec<f64> = (0..nk).map(|k| k as f64 * 0.003).collect();

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut dm = Array2::<f64>::zeros((ni, 2));
    let mut sm = Array2::<f64>::zeros((nj, 2));
    let mut gm = Array2::<f64>::zeros((nk, 2));
    for l in 0..2 {
        let (dn, sn) = (norm(d[l]), norm(s[l]));
        for i in 0..ni {
            dm[[i, l]] = d[l][i] / dn;
        }
        for j in 0..nj {
            sm[[j, l]] = s[l][j] / sn;
        }
        for k in 0..nk {
            gm[[k, l]] = g[l][k] * dn * sn;
        }
    }
    let reference = CpModel {
        rank: 2,
        delay_signatures: dm,
        spatial_signatures: sm,
        gain_trajectories: gm,
        timestamps: timestamps.clone(),
        fit: 0.0,
        fit_history: Vec::new(),
        iterations: 0,
        converged: true,
        regularized: false,
    };
    (PowerTensor3 { data, timestamps, n_rx_beams }, reference)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}

// ----------------------------------------------------------- the criteria

/// One 0.4 m blocker crossing a 4 m link at midlink, 1 m/s: exactly one
/// blockage event of depth >= 20 dB lasting 0.1 .. 0.4 s, full pipeline
/// under 60 s at desk scale (64 taps x 144 pairs x 1666 scans).
fn criterion_1() -> String {
    let start = Instant::now();
    let (mt, _) = simulate_scene("midlink_crossing.json");
    assert_eq!(
        (mt.n_delay_taps(), mt.n_rx_beams() * mt.n_tx_beams(), mt.n_scans()),
        (64, 144, 1666),
        "criterion 1 expects the desk-scale tensor"
    );
    let t3 = partial_unfold(&mt);
    let model = cp_als(&t3, 1, &AlsOptions::default()).expect("rank-1 decomposition");
    // The depth bound doubles as the detection threshold: anything
    // shallower than the required 20 dB must not count as an event.
    let (events, _) = events_per_component(&model, 20.0);
    assert_eq!(events[0].len(), 1, "expected exactly one blockage event, got {}", events[0].len());
    let e = events[0][0];
    assert!(e.depth_db >= 20.0, "event depth {:.2} dB is below 20 dB", e.depth_db);
    assert!(
        (0.1..=0.4).contains(&e.t_blocked_s),
        "blocked duration {:.3} s outside [0.1, 0.4] s",
        e.t_blocked_s
    );
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "pipeline took {secs:.1} s, limit is 60 s");
    format!("one event, depth {:.1} dB, blocked {:.3} s", e.depth_db, e.t_blocked_s)
}

/// Wall-facing single-blocker scene, rank-2 decomposition: LOS and NLOS
/// blocked intervals match the geometric oracle within two scan periods
/// per boundary, LOS dips first, and the dips overlap.
fn criterion_2() -> String {
    let (mt, loaded) = simulate_scene("living_room.json");
    let period = loaded.config.scan_period_s;
    let n = mt.n_scans();
    let t3 = partial_unfold(&mt);
    let model = cp_als(&t3, 2, &AlsOptions::default()).expect("rank-2 decomposition");

    // Scene constants: TX (1,2), RX (5,2), wall at y = 5, blocker track
    // x = 4.85 moving +y at 1 m/s from y = 0.5.
    let (tx, rx, rx_mirror) = (Pt(1.0, 2.0), Pt(5.0, 2.0), Pt(5.0, 8.0));
    let mut los_flags = vec![false; n];
    let mut nlos_flags = vec![false; n];
    for k in 0..n {
        let b = Pt(4.85, 0.5 + k as f64 * period);
        los_flags[k] = screen_blocks(b, tx, rx, 0.2, 0.0, 1.0);
        nlos_flags[k] = reflection_blocked(b, tx, rx_mirror, 5.0, 0.2);
    }
    let oracle_los = blocked_intervals(&los_flags, period);
    let oracle_nlos = blocked_intervals(&nlos_flags, period);
    assert_eq!(oracle_los.len(), 1, "oracle expects one LOS crossing");
    assert_eq!(oracle_nlos.len(), 1, "oracle expects one NLOS crossing");

    // 11 dB sits between the Fresnel ripple just outside the reflected
    // component's shadow edge (~10 dB) and its full shadow depth (~16 dB).
    let (events, seqs) = events_per_component(&model, 11.0);
    let bins: Vec<usize> = (0..2).map(|l| peak_delay_bin(&model, l)).collect();
    assert_ne!(bins[0], bins[1], "components must separate by path delay");
    let (los_c, nlos_c) = if bins[0] < bins[1] { (0, 1) } else { (1, 0) };

    let tol = 2.0 * period + 1e-9;
    for (name, comp, oracle) in
        [("LOS", los_c, &oracle_los[0]), ("NLOS", nlos_c, &oracle_nlos[0])]
    {
        assert_eq!(
            events[comp].len(),
            1,
            "{name} component detected {} blocked intervals, expected 1",
            events[comp].len()
        );
        let e = events[comp][0];
        assert!(
            (e.t_block_start_s - oracle.0).abs() <= tol,
            "{name} start {:.4} s vs oracle {:.4} s exceeds two scan periods",
            e.t_block_start_s,
            oracle.0
        );
        assert!(
            (e.t_block_end_s - oracle.1).abs() <= tol,
            "{name} end {:.4} s vs oracle {:.4} s exceeds two scan periods",
            e.t_block_end_s,
            oracle.1
        );
    }
    let los_start = events[los_c][0].t_block_start_s;
    let nlos_start = events[nlos_c][0].t_block_start_s;
    assert!(los_start < nlos_start, "LOS must dip before the NLOS component");
    let jo = joint_outage(&seqs).expect("joint outage");
    assert!(jo.ever_all_blocked, "expected an overlap between the LOS and NLOS dips");
    format!(
        "LOS [{:.3}, {:.3}] s, NLOS [{:.3}, {:.3}] s match the oracle; overlap {:.1}% of scans",
        events[los_c][0].t_block_start_s,
        events[los_c][0].t_block_end_s,
        events[nlos_c][0].t_block_start_s,
        events[nlos_c][0].t_block_end_s,
        jo.all_blocked_fraction * 100.0
    )
}

/// Noiseless rank-2 recovery on a 16 x 36 x 200 tensor: fit < 1e-6 within
/// 500 sweeps, aligned congruence > 0.999 per component, under 10 s.
fn criterion_3() -> String {
    let start = Instant::now();
    let nk = 200;
    let d1 = bump(16, 4.0, 4.0);
    let d2 = bump(16, 11.0, 6.0);
    let s1 = bump(36, 10.0, 30.0);
    let s2 = bump(36, 24.0, 40.0);
    let g1: Vec<f64> = (0..nk).map(|k| 2.0 + 0.5 * (k as f64 * 0.08).sin()).collect();
    let g2: Vec<f64> = (0..nk).map(|k| 1.2 + 0.8 * (-(k as f64 - 120.0).powi(2) / 800.0).exp()).collect();
    let (t3, reference) = two_component_tensor([&d1, &d2], [&s1, &s2], [&g1, &g2], 6);

    let model = cp_als(&t3, 2, &AlsOptions::default()).expect("rank-2 decomposition");
    assert!(model.fit < 1e-6, "fit {:.2e} is not below 1e-6", model.fit);
    assert!(model.iterations <= 500, "took {} sweeps", model.iterations);
    assert!(model.converged, "ALS hit the sweep limit before settling");
    let alignment = align_factors(&model, &reference).expect("factor alignment");
    for (l, c) in alignment.congruence.iter().enumerate() {
        assert!(*c > 0.999, "component {l} congruence {c:.6} is not above 0.999");
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 10.0, "recovery took {secs:.1} s, limit is 10 s");
    format!(
        "fit {:.1e} in {} sweeps, congruence [{:.6}, {:.6}]",
        model.fit, model.iterations, alignment.congruence[0], alignment.congruence[1]
    )
}

/// Every ALS sweep is non-increasing in reconstruction error, with slack
/// 1e-12 * ||x||_F, across 100 seeded random 8 x 16 x 32 tensors.
fn criterion_4() -> String {
    let mut violations = 0usize;
    let mut sweeps = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array3::from_shape_fn((8, 16, 32), |_| rng.random::<f64>());
        let t3 = PowerTensor3 {
            data,
            timestamps: (0..32).map(|k| k as f64 * 0.003).collect(),
            n_rx_beams: 4,
        };
        let opts = AlsOptions {
            max_iters: 40,
            tol: 1e-15,
            init: InitMethod::Random,
            nonneg: false,
            seed,
        };
        let model = cp_als(&t3, 3, &opts).expect("rank-3 decomposition");
        // fit is already relative, so the absolute slack 1e-12 * ||x||_F
        // becomes 1e-12 on consecutive fit values.
        for w in model.fit_history.windows(2) {
            sweeps += 1;
            if w[1] > w[0] + 1e-12 {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0, "{violations} sweep(s) increased the objective");
    format!("0 violations across {sweeps} sweeps in 100 seeded runs")
}

/// At 20 dB SNR the CP gain trajectories track the ground truth better
/// than the PCA baseline scores in at least 8 of 10 seeded runs.
fn criterion_5() -> String {
    let nk = 120;
    let d1 = bump(16, 5.0, 8.0);
    let d2 = bump(16, 8.0, 8.0);
    let s1 = bump(36, 14.0, 60.0);
    let s2 = bump(36, 20.0, 60.0);
    let g1: Vec<f64> =
        (0..nk).map(|k| if (30..55).contains(&k) { 0.25 } else { 1.0 }).collect();
    let g2: Vec<f64> =
        (0..nk).map(|k| if (70..95).contains(&k) { 0.2 } else { 0.75 }).collect();
    let (clean, reference) = two_component_tensor([&d1, &d2], [&s1, &s2], [&g1, &g2], 6);
    let signal_power: f64 = clean.data.iter().map(|v| v * v).sum();
    let n_entries = clean.data.len() as f64;
    let sigma = (signal_power / (n_entries * 100.0)).sqrt();

    let mut cp_wins = 0usize;
    let mut cp_mean = 0.0;
    let mut pca_mean = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noisy = clean.clone();
        noisy.data.mapv_inplace(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));

        let model = cp_als(&noisy, 2, &AlsOptions::default()).expect("rank-2 decomposition");
        let alignment = align_factors(&model, &reference).expect("factor alignment");
        let truth = [&g1, &g2];
        let cp_corr: f64 = (0..2)
            .map(|l| {
                let col: Vec<f64> =
                    model.gain_trajectories.column(alignment.permutation[l]).to_vec();
                pearson(&col, truth[l]).abs()
            })
            .sum::<f64>()
            / 2.0;

        let pca = pca_baseline(&noisy, 2).expect("PCA baseline");
        let score: Vec<Vec<f64>> =
            (0..2).map(|l| pca.scores.column(l).to_vec()).collect();
        let assign_a =
            (pearson(&score[0], &g1).abs() + pearson(&score[1], &g2).abs()) / 2.0;
        let assign_b =
            (pearson(&score[1], &g1).abs() + pearson(&score[0], &g2).abs()) / 2.0;
        let pca_corr = assign_a.max(assign_b);

        cp_mean += cp_corr / 10.0;
        pca_mean += pca_corr / 10.0;
        if cp_corr > pca_corr {
            cp_wins += 1;
        }
    }
    assert!(cp_wins >= 8, "CP beat PCA in only {cp_wins} of 10 seeds");
    format!("CP wins {cp_wins}/10 (mean correlation {cp_mean:.4} vs {pca_mean:.4})")
}

/// refold(partial_unfold(t4)) reproduces |t4|^2 bit-exactly on 1000 random
/// tensors, and delay_power conserves total power to 1e-12 relative.
fn criterion_6() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut checked = 0usize;
    for _ in 0..1000 {
        let (ni, nr, nx, nk) = (
            rng.random_range(1..=6),
            rng.random_range(1..=4),
            rng.random_range(1..=4),
            rng.random_range(1..=6),
        );
        let data = Array4::from_shape_fn((ni, nr, nx, nk).f(), |_| {
            Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        });
        let config = ScanConfig {
            n_delay_taps: ni,
            duration_s: nk as f64 * 0.003,
            snr_db: None,
            ..ScanConfig::default()
        };
        let mt = MeasurementTensor {
            data,
            timestamps: (0..nk).map(|k| k as f64 * 0.003).collect(),
            config,
            dropped_paths: 0,
        };
        let t3 = partial_unfold(&mt);
        let back = refold(&t3).expect("refold");
        for i in 0..ni {
            for r in 0..nr {
                for x in 0..nx {
                    for k in 0..nk {
                        let expect = mt.data[[i, r, x, k]].norm_sqr();
                        let got = back[[i, r, x, k]];
                        assert_eq!(
                            got.to_bits(),
                            expect.to_bits(),
                            "refold mismatch at [{i},{r},{x},{k}]: {got:e} vs {expect:e}"
                        );
                        checked += 1;
                    }
                }
            }
        }
        let pm = delay_power(&t3);
        let total_t3: f64 = t3.data.iter().sum();
        let total_pm: f64 = pm.data.iter().sum();
        assert!(
            (total_t3 - total_pm).abs() <= 1e-12 * total_t3.abs().max(1e-300),
            "delay_power total {total_pm:e} vs tensor total {total_t3:e}"
        );
    }
    format!("1000 tensors round-tripped bit-exactly ({checked} entries), power conserved")
}

/// Markov estimation: the hand-counted U,U,B,B,B,U example gives rows
/// (1/2, 1/2) and (1/3, 2/3) exactly, and marginalizing the joint counts
/// reproduces the per-path counts on 100 random multi-path sequences.
fn criterion_7() -> String {
    use PathState::{Blocked as B, Unblocked as U};
    let seq = StateSequence { states: vec![U, U, B, B, B, U], unblocked_ref_db: 0.0 };
    let model = fit_markov(&[seq], 0.003).expect("markov fit");
    assert_eq!(model.per_path[0][0], [0.5, 0.5], "unblocked row");
    assert_eq!(model.per_path[0][1], [1.0 / 3.0, 2.0 / 3.0], "blocked row");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100usize {
        let n_paths = 2 + case % 2;
        let len = 40;
        let seqs: Vec<StateSequence> = (0..n_paths)
            .map(|_| StateSequence {
                states: (0..len)
                    .map(|_| if rng.random::<bool>() { B } else { U })
                    .collect(),
                unblocked_ref_db: 0.0,
            })
            .collect();
        let m = fit_markov(&seqs, 0.003).expect("markov fit");
        for (q, expect) in m.per_path_counts.iter().enumerate() {
            let mut marginal = [[0u64; 2]; 2];
            let states = 1usize << n_paths;
            for from in 0..states {
                for to in 0..states {
                    marginal[(from >> q) & 1][(to >> q) & 1] += m.joint_counts[[from, to]];
                }
            }
            assert_eq!(marginal, *expect, "case {case}: path {q} marginal counts differ");
        }
    }
    "hand example exact; joint marginals equal per-path counts in 100 cases".to_string()
}

/// Bundled three-blocker scene: per-path blockage matches the geometric
/// oracle and there is never a slot with all three paths blocked.
fn criterion_8() -> String {
    let (mt, loaded) = simulate_scene("three_blockers.json");
    let period = loaded.config.scan_period_s;
    let n = mt.n_scans();
    let t3 = partial_unfold(&mt);
    let model = cp_als(&t3, 3, &AlsOptions::default()).expect("rank-3 decomposition");

    // Scene constants: TX (1,2.4), RX (5,2.4), walls at y = 0 and y = 5.
    let tx = Pt(1.0, 2.4);
    let rx = Pt(5.0, 2.4);
    let rx_low = Pt(5.0, -2.4);
    let rx_high = Pt(5.0, 7.6);
    let tracks: [&[(f64, Pt)]; 3] = [
        &[(0.0, Pt(2.0, 1.7)), (1.3, Pt(2.0, 3.0))],
        &[(1.5, Pt(4.0, 0.5)), (2.8, Pt(4.0, 1.8))],
        &[(3.2, Pt(4.0, 4.4)), (4.6, Pt(4.0, 3.0))],
    ];
    let mut flags = vec![vec![false; n]; 3];
    for k in 0..n {
        let t = k as f64 * period;
        let bs: Vec<Pt> = tracks.iter().map(|w| track_pos(w, t)).collect();
        flags[0][k] = bs.iter().any(|&b| screen_blocks(b, tx, rx, 0.2, 0.0, 1.0));
        flags[1][k] = bs.iter().any(|&b| reflection_blocked(b, tx, rx_low, 0.0, 0.2));
        flags[2][k] = bs.iter().any(|&b| reflection_blocked(b, tx, rx_high, 5.0, 0.2));
    }
    let oracle: Vec<Vec<(f64, f64)>> =
        flags.iter().map(|f| blocked_intervals(f, period)).collect();
    let oracle_all_blocked =
        (0..n).any(|k| flags.iter().all(|f| f[k]));
    assert!(!oracle_all_blocked, "oracle should never see all three paths blocked");

    let (events, seqs) = events_per_component(&model, 11.0);
    // Components sorted by delay: LOS, lower-wall leg, upper-wall leg.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by_key(|&l| peak_delay_bin(&model, l));
    for (path, &comp) in order.iter().enumerate() {
        assert_eq!(oracle[path].len(), 1, "oracle expects one crossing of path {path}");
        assert_eq!(
            events[comp].len(),
            1,
            "path {path} detected {} blocked intervals, expected 1",
            events[comp].len()
        );
        let e = events[comp][0];
        let (lo, hi) = oracle[path][0];
        assert!(
            (e.t_block_start_s - lo).abs() <= 0.02 && (e.t_block_end_s - hi).abs() <= 0.02,
            "path {path} interval [{:.3}, {:.3}] s disagrees with oracle [{lo:.3}, {hi:.3}] s",
            e.t_block_start_s,
            e.t_block_end_s
        );
    }
    let jo = joint_outage(&seqs).expect("joint outage");
    assert!(!jo.ever_all_blocked, "detected a slot with all three paths blocked");
    format!(
        "3 crossings at [{:.2}, {:.2}, {:.2}] s, never all blocked (oracle agrees)",
        events[order[0]][0].t_block_start_s,
        events[order[1]][0].t_block_start_s,
        events[order[2]][0].t_block_start_s
    )
}

/// 5 s at a 3 ms period yields 1666 scans with timestamps k * 0.003
/// exactly; a static scene is constant along the scan mode with noise off.
fn criterion_9() -> String {
    let config = ScanConfig { n_delay_taps: 16, snr_db: None, ..ScanConfig::default() };
    assert_eq!(config.scan_count(), 1666, "5 s / 3 ms must give 1666 scans");

    let scene = Scene {
        room_min: Point::new(0.0, 0.0, 0.0),
        room_max: Point::new(6.0, 5.0, 3.0),
        tx: Point::new(1.0, 2.0, 1.0),
        rx: Point::new(5.0, 2.0, 1.0),
        tx_boresight_az_deg: 0.0,
        rx_boresight_az_deg: 180.0,
        walls: vec![Wall {
            origin: Point::new(0.0, 5.0, 0.0),
            normal: Point::new(0.0, -1.0, 0.0),
            width_m: 6.0,
            height_m: 3.0,
            reflection_loss_db: 10.0,
        }],
        blockers: vec![Blocker::new(
            0.4,
            1.8,
            Trajectory::stationary(Point::new(3.0, 3.2, 0.0)),
        )],
    };
    let cb = make_codebook(12, 45.0, 23.0, 30.0, -20.0).expect("codebook");
    let sounder = Sounder::new(scene, cb.clone(), cb, config).expect("sounder");
    let mt = sounder.run_measurement().expect("measurement run");

    assert_eq!(mt.n_scans(), 1666);
    assert_eq!(mt.n_rx_beams() * mt.n_tx_beams(), 144);
    for (k, &t) in mt.timestamps.iter().enumerate() {
        assert!(t == k as f64 * 0.003, "timestamp {k} is {t:e}, not exactly k*0.003");
    }
    let mut max_rel = 0.0f64;
    for i in 0..mt.n_delay_taps() {
        for r in 0..mt.n_rx_beams() {
            for x in 0..mt.n_tx_beams() {
                let v0 = mt.data[[i, r, x, 0]];
                for k in 1..mt.n_scans() {
                    let v = mt.data[[i, r, x, k]];
                    let rel = (v - v0).norm() / v0.norm().max(1e-300);
                    if v0.norm() == 0.0 {
                        assert_eq!(v, v0, "empty tap [{i},{r},{x}] changed at scan {k}");
                    } else {
                        max_rel = max_rel.max(rel);
                    }
                }
            }
        }
    }
    assert!(max_rel <= 1e-12, "scan-mode variation {max_rel:e} exceeds 1e-12");
    format!("1666 scans, exact timestamps, scan-mode variation {max_rel:.1e}")
}

/// Running the CLI pipeline twice with the same seeds produces
/// byte-identical tensor files, model, report, and trace CSV.
fn criterion_10() -> String {
    let bin = env!("CARGO_BIN_EXE_beamscan");
    let dir = tempfile::tempdir().expect("temp dir");

    // Shrunken copy of the midlink scene so two full runs stay quick.
    let mut scene: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(scene_path("midlink_crossing.json")).unwrap())
            .unwrap();
    scene["scan"] = serde_json::json!({
        "n_delay_taps": 16,
        "duration_s": 2.0,
        "snr_db": 30.0,
        "seed": 11
    });
    let scene_file = dir.path().join("scene.json");
    std::fs::write(&scene_file, serde_json::to_string_pretty(&scene).unwrap()).unwrap();

    let run = |tag: &str| -> Vec<PathBuf> {
        let base = dir.path().join(tag);
        std::fs::create_dir(&base).unwrap();
        let tensor = base.join("tensor.bmt");
        let power = base.join("power.bmt");
        let model = base.join("model.json");
        let report = base.join("report.json");
        let csv = base.join("traces.csv");
        let steps: Vec<Vec<String>> = vec![
            vec!["simulate", "--scene", scene_file.to_str().unwrap(), "--out", tensor.to_str().unwrap()],
            vec!["preprocess", "--in", tensor.to_str().unwrap(), "--out", power.to_str().unwrap()],
            vec!["decompose", "--in", power.to_str().unwrap(), "--rank", "1", "--out", model.to_str().unwrap()],
            vec!["analyze", "--model", model.to_str().unwrap(), "--out", report.to_str().unwrap(), "--csv", csv.to_str().unwrap()],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        for step in &steps {
            let out = Command::new(bin).args(step).output().expect("CLI step runs");
            assert!(
                out.status.success(),
                "CLI step {:?} failed: {}",
                step[0],
                String::from_utf8_lossy(&out.stderr)
            );
        }
        vec![tensor, power, model, report, csv]
    };

    let first = run("a");
    let second = run("b");
    for (fa, fb) in first.iter().zip(&second) {
        let (ba, bb) = (std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap());
        assert_eq!(
            ba,
            bb,
            "{} differs between identically seeded runs",
            fa.file_name().unwrap().to_string_lossy()
        );
    }
    format!("{} artifacts byte-identical across two runs", first.len())
}
