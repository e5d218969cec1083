//! Scripted experiment recipes: angular sweep, frequency-hopping subset
//! analysis, indoor line walk, two-anchor positioning grid, attack demo,
//! and chain calibration. Each writes CSV artifacts when given an output
//! directory and returns its results for programmatic use.

use std::path::Path;

use rayon::prelude::*;

use crate::airsim::{ArrayGeometry, SourcePose, SwitchPattern};
use crate::dfrx::{aggregate_channels, calibrate_chain_offset, AoaMeasurement};
use crate::error::{AoaError, Result};
use crate::harness::config::{aggregation_channels, ExperimentConfig, HopSequence};
use crate::locate::{locate_target, AnchorConfig, PositionFix};
use crate::phy::{data_channels, wavelength_m, CteConfig};
use crate::pipeline::{simulate_packet, PacketSim, SimOutput};
use crate::redteam::{
    coherent_reference_angle, detect_attack, omega_schedule, AttackProfile, DefensePolicy, Verdict,
};

/// Deterministic seed mixing (splitmix64 finalizer over chained tags).
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut z = base;
    for &t in tags {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(t);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

const DETECT_ATTEMPTS: u64 = 3;

/// One measurement trial: build the channel realization, run the pipeline,
/// retry with a fresh seed if the detector misses under heavy noise.
#[allow(clippy::too_many_arguments)]
fn run_trial(
    cfg: &ExperimentConfig,
    channel: u8,
    seq: u32,
    t0: f64,
    geometry: &ArrayGeometry,
    pose: SourcePose,
    direct_theta_deg: f64,
    pattern: &SwitchPattern,
    chain_offset_cal: f64,
    attack: Option<AttackProfile>,
    seed: u64,
) -> Result<SimOutput> {
    let mut last = AoaError::InsufficientData("no attempts".into());
    for attempt in 0..DETECT_ATTEMPTS {
        let trial_seed = derive_seed(seed, &[attempt]);
        let sim = PacketSim {
            channel,
            seq,
            cte: CteConfig::new(cfg.cte.duration_us, cfg.cte.slot_len_us),
            pattern: pattern.clone(),
            geometry: geometry.clone(),
            pose,
            profile: cfg
                .profile
                .instantiate(channel, direct_theta_deg, trial_seed),
            oversample: cfg.oversample,
            chain_offset_cal,
            attack,
            t0,
        };
        match simulate_packet(&sim, trial_seed) {
            Ok(out) => return Ok(out),
            Err(e) => last = e,
        }
    }
    Err(last)
}

// ---------------------------------------------------------------------------
// angular sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct SweepMeasurement {
    pub theta_true_deg: f64,
    pub t0_s: f64,
    pub m: AoaMeasurement,
}

#[derive(Debug, Clone, Copy)]
pub struct AngleChannelStat {
    pub theta_true_deg: f64,
    pub channel_index: u8,
    pub mean_theta_deg: f64,
    pub std_theta_deg: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub measurements: Vec<SweepMeasurement>,
    pub per_angle_channel: Vec<AngleChannelStat>,
    /// (theta_true, channel-averaged estimate, abs error) per angle.
    pub channel_avg: Vec<(f64, f64, f64)>,
    /// Trials whose packet was never detected.
    pub dropped: usize,
}

/// Fixed far-field transmitter angles, `packets_per_channel` packets on each
/// configured channel per angle.
pub fn run_angular_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SweepResult> {
    cfg.validate()?;
    let channels = cfg.channels()?;
    let angles = cfg.sweep.angles();
    let geometry = ArrayGeometry::two_element([0.0, 0.0], [1.0, 0.0], cfg.geometry.spacing_m);
    let pattern = SwitchPattern::minimal(0, 1);
    let cal = cfg.profile.ideal_chain_offset();
    let ppc = cfg.packets_per_channel;
    let nch = channels.len();

    let jobs: Vec<(usize, usize)> = (0..angles.len())
        .flat_map(|ai| (0..nch).map(move |ci| (ai, ci)))
        .collect();

    let per_job: Vec<Vec<SweepMeasurement>> = jobs
        .par_iter()
        .map(|&(ai, ci)| {
            let theta = angles[ai];
            let channel = channels[ci];
            let mut out = Vec::with_capacity(ppc as usize);
            for k in 0..ppc {
                let global = ((ai * nch + ci) as u32) * ppc + k;
                let t0 = f64::from(global) / cfg.packet_rate_hz;
                let seed = derive_seed(cfg.rng_seed, &[1, ai as u64, u64::from(channel), u64::from(k)]);
                if let Ok(sim_out) = run_trial(
                    cfg,
                    channel,
                    global,
                    t0,
                    &geometry,
                    SourcePose::Angle(theta),
                    theta,
                    &pattern,
                    cal,
                    None,
                    seed,
                ) {
                    out.push(SweepMeasurement {
                        theta_true_deg: theta,
                        t0_s: t0,
                        m: sim_out.measurement,
                    });
                }
            }
            out
        })
        .collect();

    let expected = angles.len() * nch * ppc as usize;
    let measurements: Vec<SweepMeasurement> = per_job.into_iter().flatten().collect();
    let dropped = expected - measurements.len();

    // per-(angle, channel) statistics
    let mut per_angle_channel = Vec::new();
    for (ai, &theta) in angles.iter().enumerate() {
        for &channel in &channels {
            let vals: Vec<f64> = measurements
                .iter()
                .filter(|s| {
                    s.m.channel_index == channel
                        && !s.m.clamped
                        && (s.theta_true_deg - theta).abs() < 1e-9
                })
                .map(|s| s.m.theta_deg)
                .collect();
            let _ = ai;
            if vals.is_empty() {
                continue;
            }
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            per_angle_channel.push(AngleChannelStat {
                theta_true_deg: theta,
                channel_index: channel,
                mean_theta_deg: mean,
                std_theta_deg: var.sqrt(),
                n,
            });
        }
    }

    // per-angle channel-averaged estimate over the data channels
    let agg_set = aggregation_channels(&channels);
    let mut channel_avg = Vec::new();
    for &theta in &angles {
        let ms: Vec<AoaMeasurement> = measurements
            .iter()
            .filter(|s| (s.theta_true_deg - theta).abs() < 1e-9)
            .map(|s| s.m)
            .collect();
        let est = aggregate_channels(&ms, &agg_set)?;
        channel_avg.push((theta, est, (est - theta).abs()));
    }

    let result = SweepResult {
        measurements,
        per_angle_channel,
        channel_avg,
        dropped,
    };
    if let Some(dir) = out {
        write_sweep_csv(dir, &result)?;
    }
    Ok(result)
}

fn write_sweep_csv(dir: &Path, r: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("sweep_measurements.csv"))?;
    w.write_record([
        "theta_true_deg",
        "t0_s",
        "packet_seq",
        "channel_index",
        "phi_rad",
        "theta_deg",
        "crc_valid",
        "clamped",
    ])?;
    for s in &r.measurements {
        w.write_record([
            format!("{:.4}", s.theta_true_deg),
            format!("{:.6}", s.t0_s),
            s.m.packet_seq.to_string(),
            s.m.channel_index.to_string(),
            format!("{:.9}", s.m.phi),
            format!("{:.6}", s.m.theta_deg),
            s.m.crc_valid.to_string(),
            s.m.clamped.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("sweep_channel_stats.csv"))?;
    w.write_record([
        "theta_true_deg",
        "channel_index",
        "mean_theta_deg",
        "std_theta_deg",
        "n",
    ])?;
    for s in &r.per_angle_channel {
        w.write_record([
            format!("{:.4}", s.theta_true_deg),
            s.channel_index.to_string(),
            format!("{:.6}", s.mean_theta_deg),
            format!("{:.6}", s.std_theta_deg),
            s.n.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("sweep_summary.csv"))?;
    w.write_record(["theta_true_deg", "theta_est_deg", "abs_error_deg"])?;
    for &(t, e, err) in &r.channel_avg {
        w.write_record([
            format!("{t:.4}"),
            format!("{e:.6}"),
            format!("{err:.6}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// frequency-hopping subset analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct FhRow {
    /// Channels averaged.
    pub k: usize,
    /// Mean absolute angle error across angles and hop sequences, degrees.
    pub mean_abs_error_deg: f64,
    pub n_sequences: usize,
}

#[derive(Debug, Clone)]
pub struct FhSubsetResult {
    pub rows: Vec<FhRow>,
}

/// Error of the k-channel running average over every (start, hop) hopping
/// sequence of the data channels, evaluated on a sweep dataset restricted to
/// the central angular cone.
pub fn run_fh_subset(
    _cfg: &ExperimentConfig,
    sweep: &SweepResult,
    out: Option<&Path>,
) -> Result<FhSubsetResult> {
    let set = data_channels();
    let n = set.len();

    // per-(angle, data channel) mean estimate
    let mut angles: Vec<f64> = Vec::new();
    for s in &sweep.measurements {
        if !angles.iter().any(|&a| (a - s.theta_true_deg).abs() < 1e-9) {
            angles.push(s.theta_true_deg);
        }
    }
    angles.retain(|&a| (45.0..=135.0).contains(&a));
    if angles.is_empty() {
        return Err(AoaError::InsufficientData(
            "sweep dataset has no angles in the 45..135 degree cone".into(),
        ));
    }

    let mut means = vec![vec![f64::NAN; n]; angles.len()];
    for (ai, &theta) in angles.iter().enumerate() {
        for (ci, &channel) in set.iter().enumerate() {
            let vals: Vec<f64> = sweep
                .measurements
                .iter()
                .filter(|s| {
                    (s.theta_true_deg - theta).abs() < 1e-9
                        && s.m.channel_index == channel
                        && !s.m.clamped
                })
                .map(|s| s.m.theta_deg)
                .collect();
            if !vals.is_empty() {
                means[ai][ci] = vals.iter().sum::<f64>() / vals.len() as f64;
            }
        }
    }

    // running average error along every full-span hopping sequence
    let mut err_sum = vec![0.0f64; n + 1];
    let mut err_n = vec![0usize; n + 1];
    let mut n_sequences = 0usize;
    for start in 0..n {
        for hop in 1..n {
            let seq = match HopSequence::new(&set, start, hop) {
                Ok(s) => s,
                Err(_) => continue,
            };
            n_sequences += 1;
            for (ai, &theta) in angles.iter().enumerate() {
                let mut acc = 0.0;
                let mut cnt = 0usize;
                for (j, &ch) in seq.channels.iter().enumerate() {
                    let ci = set.iter().position(|&x| x == ch).unwrap();
                    if means[ai][ci].is_finite() {
                        acc += means[ai][ci];
                        cnt += 1;
                    }
                    if cnt > 0 {
                        let avg = acc / cnt as f64;
                        err_sum[j + 1] += (avg - theta).abs();
                        err_n[j + 1] += 1;
                    }
                }
            }
        }
    }

    let rows: Vec<FhRow> = (1..=n)
        .filter(|&k| err_n[k] > 0)
        .map(|k| FhRow {
            k,
            mean_abs_error_deg: err_sum[k] / err_n[k] as f64,
            n_sequences,
        })
        .collect();

    let result = FhSubsetResult { rows };
    if let Some(dir) = out {
        let mut w = csv::Writer::from_path(dir.join("fh_subset.csv"))?;
        w.write_record(["k", "mean_abs_error_deg", "n_sequences"])?;
        for row in &result.rows {
            w.write_record([
                row.k.to_string(),
                format!("{:.6}", row.mean_abs_error_deg),
                row.n_sequences.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// indoor line walk
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LinePoint {
    pub x_m: f64,
    pub theta_true_deg: f64,
    pub theta_est_deg: f64,
    pub per_channel_mean: Vec<(u8, f64)>,
}

#[derive(Debug, Clone)]
pub struct LineResult {
    pub points: Vec<LinePoint>,
    /// Positions outside the supported angular cone, with their true angles.
    pub skipped: Vec<(f64, f64)>,
    pub dropped: usize,
}

/// Transmitter walked along a straight line parallel to the array, at the
/// configured perpendicular range, in fixed steps. Positions whose true
/// angle falls outside the configured cone are skipped and logged.
pub fn run_indoor_line(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<LineResult> {
    cfg.validate()?;
    let channels = cfg.channels()?;
    let agg_set = aggregation_channels(&channels);
    let geometry = ArrayGeometry::two_element([0.0, 0.0], [1.0, 0.0], cfg.geometry.spacing_m);
    let pattern = SwitchPattern::minimal(0, 1);
    let cal = cfg.profile.ideal_chain_offset();
    let range = cfg.line.range_m;
    let step = cfg.line.step_m;

    let k_max = (range / step).floor() as i64;
    let mut xs = Vec::new();
    let mut skipped = Vec::new();
    for k in -k_max..=k_max {
        let x = k as f64 * step;
        let theta = (x / (x * x + range * range).sqrt()).acos().to_degrees();
        if theta >= cfg.line.cone_min_deg && theta <= cfg.line.cone_max_deg {
            xs.push((x, theta));
        } else {
            skipped.push((x, theta));
        }
    }

    let ppc = cfg.packets_per_channel;
    let results: Vec<(LinePoint, usize)> = xs
        .par_iter()
        .enumerate()
        .map(|(pi, &(x, theta_true))| {
            let pose = SourcePose::Position([x, range]);
            let mut ms: Vec<AoaMeasurement> = Vec::new();
            let mut dropped = 0usize;
            for (ci, &channel) in channels.iter().enumerate() {
                for k in 0..ppc {
                    let global = ((pi * channels.len() + ci) as u32) * ppc + k;
                    let t0 = f64::from(global) / cfg.packet_rate_hz;
                    let seed = derive_seed(
                        cfg.rng_seed,
                        &[2, pi as u64, u64::from(channel), u64::from(k)],
                    );
                    match run_trial(
                        cfg,
                        channel,
                        global,
                        t0,
                        &geometry,
                        pose,
                        theta_true,
                        &pattern,
                        cal,
                        None,
                        seed,
                    ) {
                        Ok(o) => ms.push(o.measurement),
                        Err(_) => dropped += 1,
                    }
                }
            }
            let per_channel_mean: Vec<(u8, f64)> = channels
                .iter()
                .filter_map(|&ch| {
                    let vals: Vec<f64> = ms
                        .iter()
                        .filter(|m| m.channel_index == ch && !m.clamped)
                        .map(|m| m.theta_deg)
                        .collect();
                    (!vals.is_empty())
                        .then(|| (ch, vals.iter().sum::<f64>() / vals.len() as f64))
                })
                .collect();
            let theta_est = aggregate_channels(&ms, &agg_set).unwrap_or(f64::NAN);
            (
                LinePoint {
                    x_m: x,
                    theta_true_deg: theta_true,
                    theta_est_deg: theta_est,
                    per_channel_mean,
                },
                dropped,
            )
        })
        .collect();

    let dropped = results.iter().map(|(_, d)| d).sum();
    let points = results.into_iter().map(|(p, _)| p).collect();
    let result = LineResult {
        points,
        skipped,
        dropped,
    };
    if let Some(dir) = out {
        write_line_csv(dir, &result)?;
    }
    Ok(result)
}

fn write_line_csv(dir: &Path, r: &LineResult) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("line_summary.csv"))?;
    w.write_record(["x_m", "theta_true_deg", "theta_est_deg", "abs_error_deg"])?;
    for p in &r.points {
        w.write_record([
            format!("{:.3}", p.x_m),
            format!("{:.4}", p.theta_true_deg),
            format!("{:.6}", p.theta_est_deg),
            format!("{:.6}", (p.theta_est_deg - p.theta_true_deg).abs()),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("line_channels.csv"))?;
    w.write_record(["x_m", "channel_index", "mean_theta_deg"])?;
    for p in &r.points {
        for &(ch, mean) in &p.per_channel_mean {
            w.write_record([
                format!("{:.3}", p.x_m),
                ch.to_string(),
                format!("{mean:.6}"),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("line_skipped.csv"))?;
    w.write_record(["x_m", "theta_true_deg"])?;
    for &(x, t) in &r.skipped {
        w.write_record([format!("{x:.3}"), format!("{t:.4}")])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// two-anchor positioning grid
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GridFix {
    pub true_xy: [f64; 2],
    pub fix: Option<PositionFix>,
    pub error_m: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub fixes: Vec<GridFix>,
}

impl GridResult {
    /// Sorted position errors of the valid fixes.
    pub fn sorted_errors(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.fixes.iter().filter_map(|f| f.error_m).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    /// Percentile (0..=100) of the valid-fix error distribution.
    pub fn error_percentile(&self, p: f64) -> Option<f64> {
        let e = self.sorted_errors();
        if e.is_empty() {
            return None;
        }
        let idx = ((p / 100.0) * (e.len() - 1) as f64).round() as usize;
        Some(e[idx.min(e.len() - 1)])
    }
}

/// Anchors from the config section, with the experiment's array spacing and
/// an ideal chain calibration.
pub fn configured_anchors(cfg: &ExperimentConfig) -> (AnchorConfig, AnchorConfig) {
    let build = |pos: [f64; 2], axis: [f64; 2], side: [f64; 2]| {
        let mut a = AnchorConfig::new(pos, axis, side);
        a.geometry = ArrayGeometry::two_element(pos, axis, cfg.geometry.spacing_m);
        a.chain_offset = cfg.profile.ideal_chain_offset();
        a
    };
    (
        build(cfg.anchors.a1_position, cfg.anchors.a1_axis, cfg.anchors.a1_side),
        build(cfg.anchors.a2_position, cfg.anchors.a2_axis, cfg.anchors.a2_side),
    )
}

/// Transmitter at each grid point, measured independently by both anchors,
/// fused into a position fix.
pub fn run_positioning_grid(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<GridResult> {
    cfg.validate()?;
    let channels = cfg.channels()?;
    let agg_set = aggregation_channels(&channels);
    let (a1, a2) = configured_anchors(cfg);
    let pattern = SwitchPattern::minimal(0, 1);
    let ppc = cfg.packets_per_channel;
    let points = cfg.grid.points();

    let fixes: Vec<GridFix> = points
        .par_iter()
        .enumerate()
        .map(|(pi, &target)| {
            let mut per_anchor: Vec<Vec<AoaMeasurement>> = Vec::new();
            for (anchor_id, anchor) in [&a1, &a2].into_iter().enumerate() {
                let theta_true = anchor.true_theta(target);
                let mut ms = Vec::new();
                for (ci, &channel) in channels.iter().enumerate() {
                    for k in 0..ppc {
                        let global = ((pi * 2 + anchor_id) * channels.len() + ci) as u32 * ppc + k;
                        let t0 = f64::from(global) / cfg.packet_rate_hz;
                        let seed = derive_seed(
                            cfg.rng_seed,
                            &[3, pi as u64, anchor_id as u64, u64::from(channel), u64::from(k)],
                        );
                        if let Ok(o) = run_trial(
                            cfg,
                            channel,
                            global,
                            t0,
                            &anchor.geometry,
                            SourcePose::Position(target),
                            theta_true,
                            &pattern,
                            anchor.chain_offset,
                            None,
                            seed,
                        ) {
                            ms.push(o.measurement);
                        }
                    }
                }
                per_anchor.push(ms);
            }
            match locate_target((&a1, &a2), (&per_anchor[0], &per_anchor[1]), &agg_set) {
                Ok(fix) => {
                    let err = ((fix.xy[0] - target[0]).powi(2)
                        + (fix.xy[1] - target[1]).powi(2))
                    .sqrt();
                    GridFix {
                        true_xy: target,
                        error_m: fix.valid.then_some(err),
                        fix: Some(fix),
                    }
                }
                Err(_) => GridFix {
                    true_xy: target,
                    fix: None,
                    error_m: None,
                },
            }
        })
        .collect();

    let result = GridResult { fixes };
    if let Some(dir) = out {
        write_grid_csv(dir, &result)?;
    }
    Ok(result)
}

fn write_grid_csv(dir: &Path, r: &GridResult) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("grid.csv"))?;
    w.write_record([
        "true_x_m",
        "true_y_m",
        "est_x_m",
        "est_y_m",
        "theta1_deg",
        "theta2_deg",
        "condition_number",
        "valid",
        "error_m",
    ])?;
    for f in &r.fixes {
        match &f.fix {
            Some(fix) => w.write_record([
                format!("{:.3}", f.true_xy[0]),
                format!("{:.3}", f.true_xy[1]),
                format!("{:.6}", fix.xy[0]),
                format!("{:.6}", fix.xy[1]),
                format!("{:.6}", fix.theta_pair.0),
                format!("{:.6}", fix.theta_pair.1),
                format!("{:.6}", fix.condition_number),
                fix.valid.to_string(),
                f.error_m.map_or("nan".into(), |e| format!("{e:.6}")),
            ])?,
            None => w.write_record([
                format!("{:.3}", f.true_xy[0]),
                format!("{:.3}", f.true_xy[1]),
                "nan".into(),
                "nan".into(),
                "nan".into(),
                "nan".into(),
                "nan".into(),
                "false".to_string(),
                "nan".into(),
            ])?,
        }
    }
    w.flush()?;

    let errors = r.sorted_errors();
    let mut w = csv::Writer::from_path(dir.join("grid_ecdf.csv"))?;
    w.write_record(["error_m", "cumulative_fraction"])?;
    for (i, e) in errors.iter().enumerate() {
        w.write_record([
            format!("{e:.6}"),
            format!("{:.6}", (i + 1) as f64 / errors.len() as f64),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// attack demo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct AttackSweepRow {
    pub packet_seq: u32,
    pub omega_rad: f64,
    pub theta_switched_deg: f64,
    pub theta_coherent_deg: f64,
}

#[derive(Debug, Clone)]
pub struct DefenseRow {
    pub packet_seq: u32,
    pub pattern_id: usize,
    pub omega_rad: f64,
    pub phi_rad: f64,
    /// None until both patterns have enough packets.
    pub verdict_so_far: Option<Verdict>,
    pub evidence_deg: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AttackDemoResult {
    pub sweep: Vec<AttackSweepRow>,
    pub honest: Vec<DefenseRow>,
    pub attacked: Vec<DefenseRow>,
    pub honest_verdict: Verdict,
    pub attacked_verdict: Verdict,
}

/// Part 1: ramp the injected phase step and record the switched-receiver and
/// coherent-receiver angles. Part 2: run the pattern-alternation detector
/// against an honest transmitter and a fixed-pattern-assuming attacker.
pub fn run_attack_demo(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<AttackDemoResult> {
    cfg.validate()?;
    let geometry = ArrayGeometry::two_element([0.0, 0.0], [1.0, 0.0], cfg.geometry.spacing_m);
    let cal = cfg.profile.ideal_chain_offset();
    let channel = cfg.attack.channel;
    let theta = cfg.attack.theta_deg;
    let cte = CteConfig::new(cfg.cte.duration_us, cfg.cte.slot_len_us);
    let pattern0 = SwitchPattern::minimal(0, 1);

    // part 1: omega sweep with both receivers
    let omegas = omega_schedule(
        (cfg.attack.omega_min_rad, cfg.attack.omega_max_rad),
        cfg.attack.n_packets,
    );
    let mut sweep = Vec::with_capacity(omegas.len());
    for (i, &omega) in omegas.iter().enumerate() {
        let seed = derive_seed(cfg.rng_seed, &[4, i as u64]);
        let o = run_trial(
            cfg,
            channel,
            i as u32,
            i as f64 / cfg.packet_rate_hz,
            &geometry,
            SourcePose::Angle(theta),
            theta,
            &pattern0,
            cal,
            Some(AttackProfile::constant(omega, &cte)),
            seed,
        )?;
        sweep.push(AttackSweepRow {
            packet_seq: i as u32,
            omega_rad: omega,
            theta_switched_deg: o.measurement.theta_deg,
            theta_coherent_deg: coherent_reference_angle(&o.per_antenna_rx, &o.timing, &geometry),
        });
    }

    // part 2: detector trace against honest and attacking transmitters
    let policy = DefensePolicy {
        patterns: vec![SwitchPattern::minimal(0, 1), SwitchPattern::minimal(1, 0)],
        rng_seed: derive_seed(cfg.rng_seed, &[5]),
        detection_threshold_deg: cfg.defense.detection_threshold_deg,
    };
    let d = geometry.adjacent_spacing();
    let lambda = wavelength_m(channel);
    let run_scenario = |attacker_omega: Option<f64>, tag: u64| -> Result<Vec<DefenseRow>> {
        let need = cfg.defense.packets_per_pattern;
        let mut rows = Vec::new();
        let mut obs: Vec<(usize, f64)> = Vec::new();
        let mut counts = vec![0usize; policy.patterns.len()];
        let mut seq = 0u32;
        while counts.iter().any(|&c| c < need) && (seq as usize) < need * 20 {
            let (pid, pattern) = policy.pattern_for_packet(seq);
            let seed = derive_seed(cfg.rng_seed, &[6, tag, u64::from(seq)]);
            let attack = attacker_omega.map(|w| AttackProfile::constant(w, &cte));
            let o = run_trial(
                cfg,
                channel,
                seq,
                f64::from(seq) / cfg.packet_rate_hz,
                &geometry,
                SourcePose::Angle(theta),
                theta,
                pattern,
                cal,
                attack,
                seed,
            )?;
            counts[pid] += 1;
            obs.push((pid, o.measurement.phi));
            let (verdict, evidence) = match detect_attack(&obs, &policy, d, lambda) {
                Ok(ev) => (Some(ev.verdict), Some(ev.evidence_deg)),
                Err(_) => (None, None),
            };
            rows.push(DefenseRow {
                packet_seq: seq,
                pattern_id: pid,
                omega_rad: attacker_omega.unwrap_or(0.0),
                phi_rad: o.measurement.phi,
                verdict_so_far: verdict,
                evidence_deg: evidence,
            });
            seq += 1;
        }
        if rows.last().and_then(|r| r.verdict_so_far).is_none() {
            return Err(AoaError::InsufficientData(
                "defense scenario never reached the per-pattern packet quota".into(),
            ));
        }
        Ok(rows)
    };

    let honest = run_scenario(None, 0)?;
    let attacked = run_scenario(Some(cfg.defense.attacker_omega_rad), 1)?;
    let honest_verdict = honest.last().unwrap().verdict_so_far.unwrap();
    let attacked_verdict = attacked.last().unwrap().verdict_so_far.unwrap();

    let result = AttackDemoResult {
        sweep,
        honest,
        attacked,
        honest_verdict,
        attacked_verdict,
    };
    if let Some(dir) = out {
        write_attack_csv(dir, &result)?;
    }
    Ok(result)
}

fn write_attack_csv(dir: &Path, r: &AttackDemoResult) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("attack_sweep.csv"))?;
    w.write_record([
        "packet_seq",
        "omega_rad",
        "theta_switched_deg",
        "theta_coherent_deg",
    ])?;
    for s in &r.sweep {
        w.write_record([
            s.packet_seq.to_string(),
            format!("{:.9}", s.omega_rad),
            format!("{:.6}", s.theta_switched_deg),
            format!("{:.6}", s.theta_coherent_deg),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("attack_defense.csv"))?;
    w.write_record([
        "scenario",
        "packet_seq",
        "pattern_id",
        "omega_rad",
        "phi_rad",
        "verdict_so_far",
        "evidence_deg",
    ])?;
    for (name, rows) in [("honest", &r.honest), ("attacked", &r.attacked)] {
        for row in rows {
            w.write_record([
                name.to_string(),
                row.packet_seq.to_string(),
                row.pattern_id.to_string(),
                format!("{:.9}", row.omega_rad),
                format!("{:.9}", row.phi_rad),
                match row.verdict_so_far {
                    None => "pending".into(),
                    Some(Verdict::Clean) => "clean".to_string(),
                    Some(Verdict::Attacked) => "attacked".to_string(),
                },
                row.evidence_deg
                    .map_or("nan".into(), |e| format!("{e:.6}")),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// chain calibration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct CalibrationResult {
    pub injected_rad: f64,
    pub recovered_rad: f64,
    pub n_measurements: usize,
}

/// Wired-splitter fixture: equal path lengths to both chains (broadside
/// geometry, no multipath), with an injected inter-chain phase offset that
/// the calibration procedure must recover.
pub fn run_calibration(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<CalibrationResult> {
    cfg.validate()?;
    let mut fixture = cfg.clone();
    fixture.profile.rays.clear();
    fixture.profile.chain_offsets_rad = vec![cfg.calibration.chain_offset_rad, 0.0];

    let channels = fixture.channels()?;
    let geometry = ArrayGeometry::two_element([0.0, 0.0], [1.0, 0.0], cfg.geometry.spacing_m);
    let pattern = SwitchPattern::minimal(0, 1);
    let ppc = fixture.packets_per_channel;

    let ms: Vec<AoaMeasurement> = channels
        .par_iter()
        .enumerate()
        .flat_map_iter(|(ci, &channel)| {
            let fixture = &fixture;
            let geometry = &geometry;
            let pattern = &pattern;
            (0..ppc).filter_map(move |k| {
                let global = ci as u32 * ppc + k;
                let seed = derive_seed(
                    fixture.rng_seed,
                    &[7, u64::from(channel), u64::from(k)],
                );
                run_trial(
                    fixture,
                    channel,
                    global,
                    f64::from(global) / fixture.packet_rate_hz,
                    geometry,
                    SourcePose::Angle(90.0),
                    90.0,
                    pattern,
                    0.0, // uncalibrated receiver
                    None,
                    seed,
                )
                .ok()
                .map(|o| o.measurement)
            })
        })
        .collect();

    let recovered = calibrate_chain_offset(&ms)?;
    let result = CalibrationResult {
        injected_rad: cfg.calibration.chain_offset_rad,
        recovered_rad: recovered,
        n_measurements: ms.len(),
    };
    if let Some(dir) = out {
        let mut w = csv::Writer::from_path(dir.join("calibration.csv"))?;
        w.write_record([
            "injected_rad",
            "recovered_rad",
            "error_rad",
            "n_measurements",
        ])?;
        w.write_record([
            format!("{:.9}", result.injected_rad),
            format!("{:.9}", result.recovered_rad),
            format!("{:.9}", (result.recovered_rad - result.injected_rad).abs()),
            result.n_measurements.to_string(),
        ])?;
        w.flush()?;
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// dispatcher
// ---------------------------------------------------------------------------

pub const EXPERIMENT_IDS: [&str; 6] = [
    "angular-sweep",
    "indoor-line",
    "fh-subset",
    "positioning-grid",
    "attack-demo",
    "calibration",
];

/// Run one experiment by id, writing artifacts into `out`.
pub fn run_experiment(id: &str, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    match id {
        "angular-sweep" => {
            run_angular_sweep(cfg, Some(out))?;
        }
        "indoor-line" => {
            run_indoor_line(cfg, Some(out))?;
        }
        "fh-subset" => {
            let sweep = run_angular_sweep(cfg, None)?;
            run_fh_subset(cfg, &sweep, Some(out))?;
        }
        "positioning-grid" => {
            run_positioning_grid(cfg, Some(out))?;
        }
        "attack-demo" => {
            run_attack_demo(cfg, Some(out))?;
        }
        "calibration" => {
            run_calibration(cfg, Some(out))?;
        }
        other => {
            return Err(AoaError::Config(format!(
                "unknown experiment {other:?}; expected one of {EXPERIMENT_IDS:?}"
            )))
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Small noise-free config for fast structural tests.
    #[allow(clippy::field_reassign_with_default)]
    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.packets_per_channel = 2;
        cfg.channel_policy = crate::harness::config::ChannelPolicy::Explicit {
            explicit: vec![1, 19, 38],
        };
        cfg.sweep.theta_start_deg = 90.0;
        cfg.sweep.theta_stop_deg = 60.0;
        cfg.sweep.theta_step_deg = -15.0;
        cfg
    }

    #[test]
    fn sweep_is_exact_when_noise_free() {
        let cfg = tiny_config();
        let r = run_angular_sweep(&cfg, None).unwrap();
        assert_eq!(r.dropped, 0);
        assert_eq!(r.measurements.len(), 3 * 3 * 2);
        for &(theta_true, est, err) in &r.channel_avg {
            assert_abs_diff_eq!(est, theta_true, epsilon = 1e-6);
            assert!(err < 1e-6);
        }
        for s in &r.per_angle_channel {
            assert!(s.std_theta_deg < 1e-9, "noise-free std should vanish");
        }
    }

    #[test]
    fn sweep_is_deterministic_per_seed() {
        let mut cfg = tiny_config();
        cfg.profile.snr_db = Some(10.0);
        let a = run_angular_sweep(&cfg, None).unwrap();
        let b = run_angular_sweep(&cfg, None).unwrap();
        assert_eq!(a.measurements.len(), b.measurements.len());
        for (x, y) in a.measurements.iter().zip(&b.measurements) {
            assert_eq!(x.m.phi, y.m.phi);
        }
        cfg.rng_seed = 2;
        let c = run_angular_sweep(&cfg, None).unwrap();
        assert!(a
            .measurements
            .iter()
            .zip(&c.measurements)
            .any(|(x, y)| x.m.phi != y.m.phi));
    }

    #[test]
    #[allow(clippy::field_reassign_with_default)]
    fn fh_full_average_matches_sweep_aggregate() {
        // k = 37 averages every data channel: identical to the sweep's
        // channel-averaged estimate, so identical error.
        let mut cfg = ExperimentConfig::default();
        cfg.packets_per_channel = 1;
        cfg.channel_policy = crate::harness::config::ChannelPolicy::Named("data-only".into());
        cfg.sweep.theta_start_deg = 70.0;
        cfg.sweep.theta_stop_deg = 70.0;
        cfg.profile.snr_db = Some(20.0);
        let sweep = run_angular_sweep(&cfg, None).unwrap();
        let fh = run_fh_subset(&cfg, &sweep, None).unwrap();
        let last = fh.rows.last().unwrap();
        assert_eq!(last.k, 37);
        assert_abs_diff_eq!(
            last.mean_abs_error_deg,
            sweep.channel_avg[0].2,
            epsilon = 1e-9
        );
    }

    #[test]
    fn line_skips_positions_outside_cone() {
        let mut cfg = tiny_config();
        let r = run_indoor_line(&cfg, None).unwrap();
        assert!(!r.points.is_empty());
        assert!(!r.skipped.is_empty(), "line endpoints fall outside the cone");
        for p in &r.points {
            assert!(p.theta_true_deg >= cfg.line.cone_min_deg);
            assert!(p.theta_true_deg <= cfg.line.cone_max_deg);
            // noise-free far-from-boundary estimates are near-exact (the
            // source is at finite range; the model is far-field, so allow a
            // small parallax tolerance)
            assert!((p.theta_est_deg - p.theta_true_deg).abs() < 0.05);
        }
        cfg.line.cone_min_deg = 0.1;
        cfg.line.cone_max_deg = 179.9;
        let r2 = run_indoor_line(&cfg, None).unwrap();
        assert!(r2.points.len() > r.points.len());
    }

    #[test]
    fn grid_is_near_exact_when_noise_free() {
        let mut cfg = tiny_config();
        cfg.grid.nx = 2;
        cfg.grid.ny = 2;
        let r = run_positioning_grid(&cfg, None).unwrap();
        assert_eq!(r.fixes.len(), 4);
        for f in &r.fixes {
            let fix = f.fix.as_ref().expect("fix computed");
            assert!(fix.valid);
            // finite-range parallax across the 6 cm array is the only error
            assert!(f.error_m.unwrap() < 0.01, "error {:?}", f.error_m);
        }
    }

    #[test]
    fn attack_demo_sweep_and_verdicts() {
        let mut cfg = tiny_config();
        cfg.attack.n_packets = 5;
        cfg.defense.packets_per_pattern = 5;
        let r = run_attack_demo(&cfg, None).unwrap();
        assert_eq!(r.sweep.len(), 5);
        // switched receiver is fooled, coherent receiver is not
        let mid = &r.sweep[2]; // omega = 0
        assert_abs_diff_eq!(mid.omega_rad, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.theta_switched_deg, 90.0, epsilon = 0.05);
        for s in &r.sweep {
            assert_abs_diff_eq!(s.theta_coherent_deg, 90.0, epsilon = 0.2);
        }
        let first = &r.sweep[0];
        assert!(
            (first.theta_switched_deg - 90.0).abs() > 5.0,
            "omega = -pi/6 must visibly shift the switched estimate"
        );
        assert_eq!(r.honest_verdict, Verdict::Clean);
        assert_eq!(r.attacked_verdict, Verdict::Attacked);
    }

    #[test]
    fn calibration_recovers_injected_offset() {
        let mut cfg = tiny_config();
        cfg.packets_per_channel = 4;
        cfg.calibration.chain_offset_rad = 0.3;
        let r = run_calibration(&cfg, None).unwrap();
        assert_abs_diff_eq!(r.recovered_rad, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn dispatcher_rejects_unknown_id() {
        let cfg = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        assert!(run_experiment("bogus", &cfg, dir.path()).is_err());
    }

    #[test]
    fn dispatcher_writes_artifacts() {
        let mut cfg = tiny_config();
        cfg.packets_per_channel = 4;
        let dir = tempfile::tempdir().unwrap();
        run_experiment("calibration", &cfg, dir.path()).unwrap();
        assert!(dir.path().join("calibration.csv").exists());
    }
}
