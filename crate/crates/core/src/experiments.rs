//! Scenario harness: closed-loop force-bandwidth sweeps, collision
//! approaches from inside and outside the fine-stage stroke, and smooth
//! reference force trajectories, each run across the three architectures and
//! condensed into a comparison table.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::{build_closed_loop, ArchitectureKind, ClosedLoop, ControllerSet, Setpoints};
use crate::error::{Error, Result};
use crate::plant::{Axis, AxisPlant};
use crate::report::{stacked_svg, write_file, Curve, Plot};
use crate::sim::{extract_metrics, simulate, MetricSet, MetricThresholds, SimConfig, SimTrace};
use crate::synth::{crossover_search, crossover_search_rb, SynthesisResult, WeightSpec};
use crate::sysid::{
    cutoff_minus3db, cutoff_minus3db_ss, estimate_frf, fit_reduced_order, sweep_phase, FitResult,
    FrfConfig, SweepSpec, TimeSeries,
};

/// Step overshoot the deflection-recentering baseline is tuned to.
pub const LF_OVERSHOOT_TARGET: f64 = 0.10;
/// Force sweep span for the bandwidth study, Hz.
pub const SWEEP_RANGE_HZ: (f64, f64) = (0.1, 50.0);
/// Force sweep amplitude, N.
pub const SWEEP_AMPLITUDE_N: f64 = 5.0;
/// Force sweep offset; keeps the tool pressed on the wall throughout.
pub const SWEEP_OFFSET_N: f64 = 15.0;
/// Step level for the collision scenarios, N.
pub const COLLISION_FORCE_N: f64 = 20.0;
/// Force levels the trajectory scenario blends between, N.
pub const TRAJECTORY_LEVELS_N: (f64, f64) = (10.0, 20.0);

const SWEEP_DURATION: f64 = 120.0;
const SETTLE: f64 = 8.0;
const TRAJECTORY_HOLD: f64 = 2.0;
const TRAJECTORY_CYCLES: usize = 2;
const FIT_BAND_HZ: (f64, f64) = (0.2, 45.0);
const PLOT_POINTS: usize = 1500;

/// Controller gains for all three architectures, with the synthesis records
/// kept alongside so reports can quote achieved norms and crossovers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunedGains {
    pub proposed: SynthesisResult,
    pub rb: SynthesisResult,
    pub lf: ControllerSet,
}

impl TunedGains {
    pub fn for_kind(&self, kind: ArchitectureKind) -> ControllerSet {
        match kind {
            ArchitectureKind::Proposed => self.proposed.gains,
            ArchitectureKind::LeaderFollower => self.lf,
            ArchitectureKind::RobotOnly => self.rb.gains,
        }
    }
}

/// Run the full tuning stack: weighted synthesis for the proposed and
/// robot-only controllers, step-overshoot tuning for the baseline.
pub fn tune_all(plant: &AxisPlant, weights: &WeightSpec) -> Result<TunedGains> {
    Ok(TunedGains {
        proposed: crossover_search(plant, weights)?,
        rb: crossover_search_rb(plant, weights)?,
        lf: tune_lf(plant, LF_OVERSHOOT_TARGET)?,
    })
}

/// Gain search for the leader-follower baseline, judged on the same
/// approach-and-touch scenarios the baseline is compared on.
///
/// Tuning on an in-contact force step leaves the approach unconstrained:
/// at the resulting gains the carrier slams the wall at its velocity limit
/// and the touch overshoots severalfold. Both touches instead share one
/// limiting mechanism — the fine stage runs out of stroke and the carrier
/// completes the approach faster than the fine stage can back out — so the
/// overshoot rises with the carrier PD *and* with the force damping, and
/// the two touches constrain the gain pair along nearly the same curve.
/// The classic recipe resolves the spare degree of freedom:
///
/// 1. find the fine-stage force damping where the in-contact loop goes
///    unstable (visible on the 2 mm touch as chatter or a force that never
///    holds), and back off a factor of two;
/// 2. bisect the carrier PD until the *worse* of the 2 mm and 10 mm touch
///    overshoots sits within ±1 percentage point of the target.
pub fn tune_lf(plant: &AxisPlant, overshoot_target: f64) -> Result<ControllerSet> {
    if !(overshoot_target > 0.0 && overshoot_target <= 0.5) {
        return Err(Error::LfTuningFailed(format!(
            "overshoot target {overshoot_target} outside (0, 0.5]"
        )));
    }
    let band = 0.01;
    let f_des = COLLISION_FORCE_N;

    let base = |c_mu: f64, k_x: f64| ControllerSet {
        c_ctrl_f_m: f64::INFINITY, // unused by this architecture
        c_ctrl_f_mu: c_mu,
        k_ctrl_x: k_x,
        c_ctrl_x: 0.05 * k_x,
        t_filter: 2e-3,
    };

    // Peak and final force of one touch.
    let touch = |gains: ControllerSet, standoff: f64, duration: f64| -> Result<(f64, f64)> {
        let cl = ClosedLoop {
            plant: plant.clone(),
            kind: ArchitectureKind::LeaderFollower,
            gains,
            setpoints: Setpoints { f_des, x_tilde_des: 0.0 },
        };
        let cfg = SimConfig { duration, x_dist: standoff, ..SimConfig::default() };
        let trace = simulate(&cl, &cfg, |_| f_des, |_| 0.0)?;
        let peak = trace.f_act.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((peak, *trace.f_act.last().expect("trace is nonempty")))
    };

    // Span each touch long enough for the slowest candidate to arrive and
    // ring down.
    let inside = ExperimentKind::CollisionInside.x_dist();
    let outside = ExperimentKind::CollisionOutside.x_dist();
    let inside_duration = |c_mu: f64| {
        let approach = plant.micro_active.gain * f_des / c_mu;
        (inside / approach + 12.0).clamp(20.0, 150.0)
    };
    let outside_duration = |k_x: f64| {
        let approach = plant.macro_stage.gain * k_x * plant.mech.rom;
        ((outside - plant.mech.rom) / approach + 12.0).clamp(20.0, 150.0)
    };

    // Step one: ultimate force damping. A token PD keeps the carrier feeding
    // stroke so the loop actually regulates at the setpoint; an unstable
    // candidate either rings far past the target or bounces off the wall.
    let seed_k = 0.3;
    let misbehaves = |c_mu: f64| -> Result<bool> {
        let duration = inside_duration(c_mu).max(30.0);
        let (peak, end) = touch(base(c_mu, seed_k), inside, duration)?;
        Ok(peak > 1.5 * f_des || (end - f_des).abs() > 0.025 * f_des)
    };
    let (mut lo, mut hi) = (2e2, 2e4);
    if misbehaves(hi)? {
        return Err(Error::LfTuningFailed(
            "force loop misbehaves even at the gentlest damping".into(),
        ));
    }
    if misbehaves(lo)? {
        for _ in 0..24 {
            let mid = (lo * hi).sqrt();
            if misbehaves(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let c_mu = 2.0 * hi; // smallest damping observed stable, doubled

    // Step two: carrier PD against the worse touch overshoot.
    let worst_overshoot = |k_x: f64| -> Result<f64> {
        let (peak_in, _) = touch(base(c_mu, k_x), inside, inside_duration(c_mu))?;
        let (peak_out, _) = touch(base(c_mu, k_x), outside, outside_duration(k_x))?;
        Ok(((peak_in.max(peak_out) - f_des) / f_des).max(0.0))
    };
    let mut k_lo = 0.05;
    if worst_overshoot(k_lo)? > overshoot_target {
        return Err(Error::LfTuningFailed(
            "touch overshoots the target even with a crawling carrier".into(),
        ));
    }
    let mut k_hi = 0.5;
    let mut bracketed = false;
    for _ in 0..24 {
        if worst_overshoot(k_hi)? >= overshoot_target {
            bracketed = true;
            break;
        }
        k_lo = k_hi;
        k_hi *= 2.0;
    }
    if !bracketed {
        return Err(Error::LfTuningFailed(
            "carrier PD cannot reach the overshoot target".into(),
        ));
    }
    let mut k_x = (k_lo * k_hi).sqrt();
    for _ in 0..48 {
        let os = worst_overshoot(k_x)?;
        if (os - overshoot_target).abs() <= 0.2 * band {
            break;
        }
        if os > overshoot_target {
            k_hi = k_x;
        } else {
            k_lo = k_x;
        }
        k_x = (k_lo * k_hi).sqrt();
    }

    let gains = base(c_mu, k_x);
    let os = worst_overshoot(k_x)?;
    if (os - overshoot_target).abs() > band {
        return Err(Error::LfTuningFailed(format!(
            "touch tuning stalled at overshoot {os:.3} for target {overshoot_target:.3}"
        )));
    }
    Ok(gains)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    Bandwidth,
    CollisionInside,
    CollisionOutside,
    ForceTrajectory,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Bandwidth => "bandwidth",
            ExperimentKind::CollisionInside => "collision_inside",
            ExperimentKind::CollisionOutside => "collision_outside",
            ExperimentKind::ForceTrajectory => "force_trajectory",
        }
    }

    /// Initial gap between tool and wall, m. The inside/outside collision
    /// cases are pinned to 2 mm and 10 mm — inside and outside the ±2.5 mm
    /// stroke; the other scenarios start in contact.
    pub fn x_dist(self) -> f64 {
        match self {
            ExperimentKind::CollisionInside => 2e-3,
            ExperimentKind::CollisionOutside => 10e-3,
            _ => 0.0,
        }
    }
}

/// What to run and on which axis. `repetitions` only produces distinct runs
/// when measurement noise is enabled; the run seed is offset per repetition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub architectures: Vec<ArchitectureKind>,
    pub axis: Axis,
    pub repetitions: usize,
    /// Blend time of the trajectory scenario, s.
    pub blend_duration: f64,
    /// Replace the standoff implied by `kind` (collision cases only).
    pub x_dist_override: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            architectures: vec![
                ArchitectureKind::Proposed,
                ArchitectureKind::LeaderFollower,
                ArchitectureKind::RobotOnly,
            ],
            axis: Axis::X,
            repetitions: 1,
            blend_duration: 0.2,
            x_dist_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.architectures.is_empty() {
            return Err(Error::InvalidParameter(
                "experiment needs at least one architecture".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        if self.blend_duration <= 0.0 {
            return Err(Error::InvalidParameter("blend duration must be positive".into()));
        }
        if self.x_dist_override.is_some_and(|d| d < 0.0) {
            return Err(Error::InvalidParameter("standoff override must be nonnegative".into()));
        }
        Ok(())
    }

    fn x_dist(&self) -> f64 {
        self.x_dist_override.unwrap_or_else(|| self.kind.x_dist())
    }
}

/// Minimum-jerk interpolation from `f0` to `f1` over `duration`: zero first
/// and second derivatives at both ends, monotone in between. `t` outside the
/// segment clamps to the nearer endpoint.
pub fn quintic_blend(f0: f64, f1: f64, duration: f64, t: f64) -> Result<f64> {
    if duration <= 0.0 {
        return Err(Error::InvalidParameter("blend duration must be positive".into()));
    }
    Ok(f0 + (f1 - f0) * quintic(t / duration))
}

fn quintic(tau: f64) -> f64 {
    let tau = tau.clamp(0.0, 1.0);
    tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
}

/// Periodic low/high force profile with smooth blends: settle at `low`, then
/// repeat blend-up / hold / blend-down / hold.
#[derive(Debug, Clone, Copy)]
pub struct ForceSchedule {
    pub low: f64,
    pub high: f64,
    pub blend: f64,
    pub hold: f64,
    pub settle: f64,
}

impl ForceSchedule {
    pub fn new(low: f64, high: f64, blend: f64, hold: f64, settle: f64) -> Result<Self> {
        if blend <= 0.0 {
            return Err(Error::InvalidParameter("blend duration must be positive".into()));
        }
        if hold < 0.0 || settle < 0.0 {
            return Err(Error::InvalidParameter("hold and settle times must be nonnegative".into()));
        }
        Ok(ForceSchedule { low, high, blend, hold, settle })
    }

    /// Duration of one low→high→low cycle, s.
    pub fn cycle(&self) -> f64 {
        2.0 * (self.blend + self.hold)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < self.settle {
            return self.low;
        }
        let tc = (t - self.settle) % self.cycle();
        if tc < self.blend {
            self.low + (self.high - self.low) * quintic(tc / self.blend)
        } else if tc < self.blend + self.hold {
            self.high
        } else if tc < 2.0 * self.blend + self.hold {
            self.high + (self.low - self.high) * quintic((tc - self.blend - self.hold) / self.blend)
        } else {
            self.low
        }
    }
}

/// One architecture's bandwidth measurement: swept-sine response, fitted
/// model, and the −3 dB cutoff from the fit next to the one computed from
/// the linear in-contact loop.
#[derive(Debug, Clone)]
pub struct BandwidthRun {
    pub architecture: ArchitectureKind,
    pub freqs_hz: Vec<f64>,
    pub response: Vec<Complex64>,
    pub fit: FitResult,
    pub cutoff_hz: f64,
    pub analytic_cutoff_hz: f64,
}

#[derive(Debug, Clone)]
pub struct CollisionRun {
    pub architecture: ArchitectureKind,
    pub repetition: usize,
    pub metrics: MetricSet,
    pub trace: SimTrace,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub architecture: ArchitectureKind,
    pub repetition: usize,
    pub max_force_err: f64,
    pub rmse_force: f64,
    /// Deflection RMSE about centre; absent for the rigid architecture.
    pub rmse_pos: Option<f64>,
    pub trace: SimTrace,
}

/// Run independent jobs on scoped threads, preserving job order in the
/// result. Worker panics propagate to the caller.
fn fan_out<T, R, F>(jobs: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync,
{
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = jobs.into_iter().map(|job| scope.spawn(move || f(job))).collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(r) => r,
                Err(payload) => std::panic::resume_unwind(payload),
            })
            .collect()
    })
}

fn closed_loop(plant: &AxisPlant, gains: &TunedGains, kind: ArchitectureKind, f_des: f64) -> ClosedLoop {
    ClosedLoop {
        plant: plant.clone(),
        kind,
        gains: gains.for_kind(kind),
        setpoints: Setpoints { f_des, x_tilde_des: 0.0 },
    }
}

/// Swept-sine force bandwidth per architecture: settle on the wall at the
/// sweep offset, apply the logarithmic sweep to the force reference, estimate
/// the tracking response, fit low-order models (best of orders 1–3) and
/// report the −3 dB cutoff.
pub fn run_bandwidth(
    plant: &AxisPlant,
    gains: &TunedGains,
    spec: &ExperimentSpec,
    sim: &SimConfig,
) -> Result<Vec<BandwidthRun>> {
    spec.validate()?;
    let sweep = SweepSpec {
        f_start: SWEEP_RANGE_HZ.0,
        f_end: SWEEP_RANGE_HZ.1,
        amplitude: SWEEP_AMPLITUDE_N,
        offset: SWEEP_OFFSET_N,
        duration: SWEEP_DURATION,
        sample_rate: 1.0 / sim.ts,
    };
    fan_out(spec.architectures.clone(), |arch| {
        let cl = closed_loop(plant, gains, arch, SWEEP_OFFSET_N);
        let cfg = SimConfig {
            duration: SETTLE + SWEEP_DURATION,
            x_dist: 0.0,
            ..*sim
        };
        let trace = simulate(
            &cl,
            &cfg,
            |t| {
                if t < SETTLE {
                    SWEEP_OFFSET_N
                } else {
                    SWEEP_OFFSET_N + SWEEP_AMPLITUDE_N * sweep_phase(&sweep, t - SETTLE).sin()
                }
            },
            |_| 0.0,
        )?;
        let w = trace.index_at(SETTLE);
        let data = TimeSeries::new(
            trace.t[w..].to_vec(),
            trace.f_des[w..].to_vec(),
            trace.f_act[w..].to_vec(),
        )?;

        let grid: Vec<f64> = crate::lti::log_grid(
            2.0 * std::f64::consts::PI * 0.15,
            2.0 * std::f64::consts::PI * 48.0,
            80,
        )
        .into_iter()
        .map(|w| w / (2.0 * std::f64::consts::PI))
        .collect();
        let frf = estimate_frf(&data, &grid, &FrfConfig::default())?;
        let response: Vec<Complex64> = frf.values.iter().map(|m| m[(0, 0)]).collect();

        let mut fit: Option<FitResult> = None;
        for order in 1..=3 {
            if let Ok(candidate) = fit_reduced_order(&data, order, FIT_BAND_HZ) {
                if fit.as_ref().is_none_or(|best| candidate.fit_percent > best.fit_percent) {
                    fit = Some(candidate);
                }
            }
        }
        let fit = fit.ok_or_else(|| {
            Error::IdentificationFailed("no reduced-order model fit converged".into())
        })?;
        let cutoff_hz = cutoff_minus3db(&fit.model)?;
        let analytic = cutoff_minus3db_ss(&build_closed_loop(&cl, true)?, 0, 0)?;
        Ok(BandwidthRun {
            architecture: arch,
            freqs_hz: grid,
            response,
            fit,
            cutoff_hz,
            analytic_cutoff_hz: analytic,
        })
    })
}

/// Step the force reference to 20 N with the tool initially hovering
/// `x_dist` off the wall, and extract the approach/settling metrics.
pub fn run_collision(
    plant: &AxisPlant,
    gains: &TunedGains,
    spec: &ExperimentSpec,
    sim: &SimConfig,
) -> Result<Vec<CollisionRun>> {
    spec.validate()?;
    if !matches!(spec.kind, ExperimentKind::CollisionInside | ExperimentKind::CollisionOutside) {
        return Err(Error::InvalidParameter(
            "collision runner needs a collision experiment kind".into(),
        ));
    }
    // Long tails: the proposed architecture hands the deflection back to the
    // carrier through the force loop, and that handoff settles over tens of
    // seconds at the tuned position gains.
    let duration = if spec.kind == ExperimentKind::CollisionInside { 60.0 } else { 75.0 };
    let thresholds = MetricThresholds { rom: plant.mech.rom, ..MetricThresholds::default() };
    let jobs: Vec<(ArchitectureKind, usize)> = spec
        .architectures
        .iter()
        .flat_map(|&a| (0..spec.repetitions).map(move |r| (a, r)))
        .collect();
    fan_out(jobs, |(arch, rep)| {
        let cl = closed_loop(plant, gains, arch, COLLISION_FORCE_N);
        let cfg = SimConfig {
            duration,
            x_dist: spec.x_dist(),
            seed: sim.seed.wrapping_add(rep as u64),
            ..*sim
        };
        let trace = simulate(&cl, &cfg, |_| COLLISION_FORCE_N, |_| 0.0)?;
        let metrics = extract_metrics(&trace, COLLISION_FORCE_N, &thresholds);
        Ok(CollisionRun { architecture: arch, repetition: rep, metrics, trace })
    })
}

/// Track the smooth 10 N ↔ 20 N profile while pressed on the wall and
/// collect tracking-error metrics over the active part of the run.
pub fn run_force_trajectory(
    plant: &AxisPlant,
    gains: &TunedGains,
    spec: &ExperimentSpec,
    sim: &SimConfig,
) -> Result<Vec<TrajectoryRun>> {
    spec.validate()?;
    let schedule = ForceSchedule::new(
        TRAJECTORY_LEVELS_N.0,
        TRAJECTORY_LEVELS_N.1,
        spec.blend_duration,
        TRAJECTORY_HOLD,
        SETTLE,
    )?;
    let duration = schedule.settle + TRAJECTORY_CYCLES as f64 * schedule.cycle();
    let jobs: Vec<(ArchitectureKind, usize)> = spec
        .architectures
        .iter()
        .flat_map(|&a| (0..spec.repetitions).map(move |r| (a, r)))
        .collect();
    fan_out(jobs, |(arch, rep)| {
        let cl = closed_loop(plant, gains, arch, TRAJECTORY_LEVELS_N.0);
        let cfg = SimConfig {
            duration,
            x_dist: 0.0,
            seed: sim.seed.wrapping_add(rep as u64),
            ..*sim
        };
        let trace = simulate(&cl, &cfg, |t| schedule.eval(t), |_| 0.0)?;
        let w = trace.index_at(schedule.settle);
        let mut max_err: f64 = 0.0;
        let mut sum_f = 0.0;
        let mut sum_p = 0.0;
        let n = (trace.len() - w) as f64;
        for k in w..trace.len() {
            let e = trace.f_act[k] - trace.f_des[k];
            max_err = max_err.max(e.abs());
            sum_f += e * e;
            sum_p += trace.x_tilde_mu_p[k] * trace.x_tilde_mu_p[k];
        }
        let rmse_pos = if arch == ArchitectureKind::RobotOnly {
            None
        } else {
            Some((sum_p / n).sqrt())
        };
        Ok(TrajectoryRun {
            architecture: arch,
            repetition: rep,
            max_force_err: max_err,
            rmse_force: (sum_f / n).sqrt(),
            rmse_pos,
            trace,
        })
    })
}

/// Whether a smaller or a larger value of a metric is preferable; fixes the
/// sign convention of improvement percentages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Better {
    Lower,
    Higher,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub experiment: String,
    pub architecture: ArchitectureKind,
    pub metric: String,
    /// Missing when the underlying condition was never met in the run.
    pub value: Option<f64>,
    pub better: Better,
}

/// Raw metric values per (experiment, architecture, metric). Improvements
/// are always derived from the stored values on demand, never cached.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn push(
        &mut self,
        experiment: &str,
        architecture: ArchitectureKind,
        metric: &str,
        value: Option<f64>,
        better: Better,
    ) {
        self.rows.push(ComparisonRow {
            experiment: experiment.into(),
            architecture,
            metric: metric.into(),
            value,
            better,
        });
    }

    pub fn merge(&mut self, other: ComparisonTable) {
        self.rows.extend(other.rows);
    }

    pub fn value(&self, experiment: &str, architecture: ArchitectureKind, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.experiment == experiment && r.architecture == architecture && r.metric == metric)
            .and_then(|r| r.value)
    }

    /// Relative improvement of the proposed architecture over `baseline` for
    /// one metric, as a fraction; positive means the proposed one is better.
    pub fn improvement(
        &self,
        experiment: &str,
        metric: &str,
        baseline: ArchitectureKind,
    ) -> Option<f64> {
        let row = self.rows.iter().find(|r| {
            r.experiment == experiment
                && r.architecture == ArchitectureKind::Proposed
                && r.metric == metric
        })?;
        let ours = row.value?;
        let base = self.value(experiment, baseline, metric)?;
        if base == 0.0 {
            return None;
        }
        Some(match row.better {
            Better::Lower => (base - ours) / base,
            Better::Higher => (ours - base) / base,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("experiment,architecture,metric,value,improvement_vs_lf_pct,improvement_vs_rb_pct\n");
        for r in &self.rows {
            let value = r.value.map(|v| v.to_string()).unwrap_or_default();
            let (lf, rb) = if r.architecture == ArchitectureKind::Proposed {
                (
                    self.improvement(&r.experiment, &r.metric, ArchitectureKind::LeaderFollower),
                    self.improvement(&r.experiment, &r.metric, ArchitectureKind::RobotOnly),
                )
            } else {
                (None, None)
            };
            let fmt = |x: Option<f64>| x.map(|v| format!("{:.2}", 100.0 * v)).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.experiment,
                r.architecture.label(),
                r.metric,
                value,
                fmt(lf),
                fmt(rb)
            ));
        }
        out
    }
}

pub fn bandwidth_table(runs: &[BandwidthRun]) -> ComparisonTable {
    let mut t = ComparisonTable::default();
    let exp = ExperimentKind::Bandwidth.label();
    for r in runs {
        t.push(exp, r.architecture, "cutoff_hz", Some(r.cutoff_hz), Better::Higher);
        t.push(exp, r.architecture, "model_fit_pct", Some(r.fit.fit_percent), Better::Higher);
    }
    t
}

pub fn collision_table(kind: ExperimentKind, runs: &[CollisionRun]) -> ComparisonTable {
    let mut t = ComparisonTable::default();
    let exp = kind.label();
    for r in runs.iter().filter(|r| r.repetition == 0) {
        let m = &r.metrics;
        t.push(exp, r.architecture, "t_contact_s", m.t_contact, Better::Lower);
        t.push(exp, r.architecture, "t_force_reached_s", m.t_force_reached, Better::Lower);
        if r.architecture != ArchitectureKind::RobotOnly {
            t.push(exp, r.architecture, "t_pos_reached_s", m.t_pos_reached, Better::Lower);
        }
        t.push(exp, r.architecture, "rmse_force_n", Some(m.rmse_force), Better::Lower);
        t.push(exp, r.architecture, "overshoot_frac", Some(m.overshoot), Better::Lower);
    }
    t
}

pub fn trajectory_table(runs: &[TrajectoryRun]) -> ComparisonTable {
    let mut t = ComparisonTable::default();
    let exp = ExperimentKind::ForceTrajectory.label();
    for r in runs.iter().filter(|r| r.repetition == 0) {
        t.push(exp, r.architecture, "max_force_err_n", Some(r.max_force_err), Better::Lower);
        t.push(exp, r.architecture, "rmse_force_n", Some(r.rmse_force), Better::Lower);
        if let Some(p) = r.rmse_pos {
            t.push(exp, r.architecture, "rmse_pos_m", Some(p), Better::Lower);
        }
    }
    t
}

/// Everything a report can draw from. Empty slices simply omit the
/// corresponding files.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportInputs<'a> {
    pub table: Option<&'a ComparisonTable>,
    pub bandwidth: &'a [BandwidthRun],
    pub collisions_inside: &'a [CollisionRun],
    pub collisions_outside: &'a [CollisionRun],
    pub trajectories: &'a [TrajectoryRun],
}

/// Write the comparison CSV, per-run trace CSVs, the frequency-response CSVs
/// and the SVG figures into `out_dir`. File names are fixed, contents are
/// deterministic. Returns the written paths, sorted.
pub fn emit_report(out_dir: &Path, inputs: &ReportInputs) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let put = |written: &mut Vec<PathBuf>, name: String, contents: String| -> Result<()> {
        let path = out_dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };

    let table = inputs.table.cloned().unwrap_or_default();
    put(&mut written, "comparison.csv".into(), table.to_csv())?;

    if !inputs.bandwidth.is_empty() {
        let mut mag = Plot::new("force tracking magnitude", "f / Hz", "|F_act/F_des| / dB").logx();
        let mut phase = Plot::new("force tracking phase", "f / Hz", "arg(F_act/F_des) / deg").logx();
        for run in inputs.bandwidth {
            let mut csv = String::from("freq_hz,real,imag,mag_db,phase_deg\n");
            let mut mag_pts = Vec::with_capacity(run.freqs_hz.len());
            let mut ph_pts = Vec::with_capacity(run.freqs_hz.len());
            let mut prev_phase = 0.0;
            for (k, (&f, h)) in run.freqs_hz.iter().zip(&run.response).enumerate() {
                let m_db = 20.0 * h.norm().log10();
                let mut ph = h.arg().to_degrees();
                // Unwrap against the previous point so plots have no 360° jumps.
                if k > 0 {
                    while ph - prev_phase > 180.0 {
                        ph -= 360.0;
                    }
                    while ph - prev_phase < -180.0 {
                        ph += 360.0;
                    }
                }
                prev_phase = ph;
                csv.push_str(&format!("{f},{},{},{m_db},{ph}\n", h.re, h.im));
                mag_pts.push((f, m_db));
                ph_pts.push((f, ph));
            }
            let label = format!("{} ({:.2} Hz)", run.architecture.label(), run.cutoff_hz);
            mag = mag.curve(Curve::new(label.clone(), mag_pts));
            phase = phase.curve(Curve::new(label, ph_pts));
            put(
                &mut written,
                format!("frf_bandwidth_{}.csv", run.architecture.label()),
                csv,
            )?;
        }
        put(&mut written, "bode_bandwidth.svg".into(), stacked_svg(&[mag, phase]))?;
    }

    fn collision_view(runs: &[CollisionRun]) -> Vec<(ArchitectureKind, usize, &SimTrace)> {
        runs.iter().map(|r| (r.architecture, r.repetition, &r.trace)).collect()
    }
    let trajectory_view: Vec<(ArchitectureKind, usize, &SimTrace)> = inputs
        .trajectories
        .iter()
        .map(|r| (r.architecture, r.repetition, &r.trace))
        .collect();
    for (kind, runs) in [
        (ExperimentKind::CollisionInside, collision_view(inputs.collisions_inside)),
        (ExperimentKind::CollisionOutside, collision_view(inputs.collisions_outside)),
        (ExperimentKind::ForceTrajectory, trajectory_view),
    ] {
        if runs.is_empty() {
            continue;
        }
        let exp = kind.label();
        let mut force = Plot::new(format!("{exp}: contact force"), "t / s", "F / N");
        let mut defl = Plot::new(format!("{exp}: fine-stage deflection"), "t / s", "deflection / mm");
        if let Some((_, _, first)) = runs.first() {
            let pts: Vec<(f64, f64)> =
                first.t.iter().zip(&first.f_des).map(|(&t, &f)| (t, f)).collect();
            force = force.curve(Curve::decimated("desired", &pts, PLOT_POINTS));
        }
        for &(arch, rep, trace) in &runs {
            let suffix = if rep == 0 { String::new() } else { format!("_rep{rep}") };
            put(
                &mut written,
                format!("trace_{exp}_{}{suffix}.csv", arch.label()),
                trace.to_csv(),
            )?;
            if rep != 0 {
                continue;
            }
            let f_pts: Vec<(f64, f64)> =
                trace.t.iter().zip(&trace.f_act).map(|(&t, &f)| (t, f)).collect();
            force = force.curve(Curve::decimated(arch.label(), &f_pts, PLOT_POINTS));
            if arch != ArchitectureKind::RobotOnly {
                let d_pts: Vec<(f64, f64)> = trace
                    .t
                    .iter()
                    .zip(&trace.x_tilde_mu_p)
                    .map(|(&t, &x)| (t, 1e3 * x))
                    .collect();
                defl = defl.curve(Curve::decimated(arch.label(), &d_pts, PLOT_POINTS));
            }
        }
        put(&mut written, format!("{exp}_force.svg"), force.to_svg())?;
        if !defl.curves.is_empty() {
            put(&mut written, format!("{exp}_deflection.svg"), defl.to_svg())?;
        }
    }

    written.sort();
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Config, HingeVariant};
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn plant_x() -> AxisPlant {
        Config::default().axis_plant(Axis::X, HingeVariant::Low).unwrap()
    }

    fn record(gains: ControllerSet) -> SynthesisResult {
        SynthesisResult {
            gains,
            achieved_norm: 0.99,
            omega_co_f_final: 100.0,
            iterations: 0,
            per_channel_peaks: [0.0; 3],
            feasibility_trace: Vec::new(),
        }
    }

    /// Known-stable gain sets for the default X-axis plant, so harness tests
    /// do not have to pay for a full synthesis run.
    fn fixed_gains() -> TunedGains {
        TunedGains {
            proposed: record(ControllerSet {
                c_ctrl_f_m: 4581.7,
                c_ctrl_f_mu: 2713.8,
                k_ctrl_x: 0.172,
                c_ctrl_x: 0.00186,
                t_filter: 2e-3,
            }),
            rb: record(ControllerSet {
                c_ctrl_f_m: 16000.0,
                c_ctrl_f_mu: f64::INFINITY,
                k_ctrl_x: 0.0,
                c_ctrl_x: 0.0,
                t_filter: 2e-3,
            }),
            lf: ControllerSet {
                c_ctrl_f_m: f64::INFINITY,
                c_ctrl_f_mu: 1206.2,
                k_ctrl_x: 1.61,
                c_ctrl_x: 0.081,
                t_filter: 2e-3,
            },
        }
    }

    #[test]
    fn quintic_blend_hits_endpoints_and_midpoint() {
        assert_relative_eq!(quintic_blend(10.0, 20.0, 0.5, 0.0).unwrap(), 10.0);
        assert_relative_eq!(quintic_blend(10.0, 20.0, 0.5, 0.5).unwrap(), 20.0);
        assert_relative_eq!(quintic_blend(10.0, 20.0, 0.5, 0.25).unwrap(), 15.0);
        // Clamped outside the segment.
        assert_relative_eq!(quintic_blend(10.0, 20.0, 0.5, 0.9).unwrap(), 20.0);
    }

    #[test]
    fn quintic_blend_is_flat_at_both_ends() {
        let t_end = 0.2;
        let h = 1e-4;
        let f = |t: f64| quintic_blend(10.0, 20.0, t_end, t).unwrap();
        for t0 in [0.0, t_end] {
            let d1 = (f(t0 + h) - f(t0 - h)) / (2.0 * h);
            let d2 = (f(t0 + h) - 2.0 * f(t0) + f(t0 - h)) / (h * h);
            assert!(d1.abs() < 0.05, "first derivative {d1} at {t0}");
            assert!(d2.abs() < 10.0, "second derivative {d2} at {t0}");
        }
        // Compare with the steep middle to show the ends really are flat.
        let mid = (f(t_end / 2.0 + h) - f(t_end / 2.0 - h)) / (2.0 * h);
        assert!(mid > 50.0, "midpoint slope {mid} should dominate");
    }

    #[test]
    fn quintic_blend_rejects_bad_duration() {
        assert!(quintic_blend(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(quintic_blend(0.0, 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn schedule_sections_evaluate_to_levels() {
        let s = ForceSchedule::new(10.0, 20.0, 0.2, 2.0, 5.0).unwrap();
        assert_relative_eq!(s.cycle(), 4.4);
        assert_relative_eq!(s.eval(0.0), 10.0);
        assert_relative_eq!(s.eval(4.99), 10.0);
        assert_relative_eq!(s.eval(5.0 + 0.1), 15.0, epsilon = 1e-9); // blend midpoint
        assert_relative_eq!(s.eval(5.0 + 0.2), 20.0, epsilon = 1e-9);
        assert_relative_eq!(s.eval(5.0 + 1.0), 20.0); // holding high
        assert_relative_eq!(s.eval(5.0 + 2.3), 15.0, epsilon = 1e-9); // blend back down
        assert_relative_eq!(s.eval(5.0 + 3.0), 10.0); // holding low
        assert_relative_eq!(s.eval(5.0 + 4.4 + 0.1), 15.0, epsilon = 1e-9); // second cycle
    }

    #[test]
    fn collision_kinds_fix_the_standoff() {
        assert_relative_eq!(ExperimentKind::CollisionInside.x_dist(), 2e-3);
        assert_relative_eq!(ExperimentKind::CollisionOutside.x_dist(), 10e-3);
        assert_relative_eq!(ExperimentKind::Bandwidth.x_dist(), 0.0);
        let mut spec = ExperimentSpec::new(ExperimentKind::CollisionInside);
        spec.x_dist_override = Some(0.0);
        assert_relative_eq!(spec.x_dist(), 0.0);
    }

    #[test]
    fn spec_validation_catches_bad_inputs() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Bandwidth);
        spec.architectures.clear();
        assert!(spec.validate().is_err());

        let mut spec = ExperimentSpec::new(ExperimentKind::Bandwidth);
        spec.repetitions = 0;
        assert!(spec.validate().is_err());

        let mut spec = ExperimentSpec::new(ExperimentKind::ForceTrajectory);
        spec.blend_duration = 0.0;
        assert!(spec.validate().is_err());

        let mut spec = ExperimentSpec::new(ExperimentKind::CollisionInside);
        spec.x_dist_override = Some(-1.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn improvement_follows_sign_convention() {
        let mut t = ComparisonTable::default();
        t.push("e", ArchitectureKind::Proposed, "t_s", Some(1.0), Better::Lower);
        t.push("e", ArchitectureKind::LeaderFollower, "t_s", Some(2.0), Better::Lower);
        t.push("e", ArchitectureKind::Proposed, "cutoff_hz", Some(4.0), Better::Higher);
        t.push("e", ArchitectureKind::LeaderFollower, "cutoff_hz", Some(2.0), Better::Higher);
        // Half the time of the baseline: 50% better. Twice the cutoff: 100%.
        assert_relative_eq!(t.improvement("e", "t_s", ArchitectureKind::LeaderFollower).unwrap(), 0.5);
        assert_relative_eq!(
            t.improvement("e", "cutoff_hz", ArchitectureKind::LeaderFollower).unwrap(),
            1.0
        );
        // Missing baseline or zero baseline: no percentage.
        assert!(t.improvement("e", "t_s", ArchitectureKind::RobotOnly).is_none());
    }

    #[test]
    fn csv_improvements_recompute_from_rows() {
        let mut t = ComparisonTable::default();
        t.push("e", ArchitectureKind::Proposed, "t_s", Some(1.0), Better::Lower);
        t.push("e", ArchitectureKind::LeaderFollower, "t_s", Some(4.0), Better::Lower);
        t.push("e", ArchitectureKind::RobotOnly, "t_s", Some(10.0), Better::Lower);
        let csv = t.to_csv();
        let proposed_line = csv.lines().find(|l| l.starts_with("e,proposed")).unwrap();
        let fields: Vec<&str> = proposed_line.split(',').collect();
        let lf_pct: f64 = fields[4].parse().unwrap();
        let rb_pct: f64 = fields[5].parse().unwrap();
        assert_relative_eq!(lf_pct / 100.0, (4.0 - 1.0) / 4.0, epsilon = 1e-9);
        assert_relative_eq!(rb_pct / 100.0, (10.0 - 1.0) / 10.0, epsilon = 1e-9);
        // Baseline rows carry no improvement columns.
        let lf_line = csv.lines().find(|l| l.starts_with("e,lf")).unwrap();
        assert!(lf_line.ends_with(",,"));
    }

    #[test]
    fn zero_standoff_makes_contact_within_one_sample() {
        let plant = plant_x();
        let gains = fixed_gains();
        let mut spec = ExperimentSpec::new(ExperimentKind::CollisionInside);
        spec.x_dist_override = Some(0.0);
        let sim = SimConfig::default();
        for run in run_collision(&plant, &gains, &spec, &sim).unwrap() {
            let first_contact = run.trace.contact.iter().position(|&c| c).unwrap();
            assert!(
                first_contact <= 1,
                "{:?} first contact at sample {first_contact}",
                run.architecture
            );
        }
    }

    #[test]
    fn identical_collision_runs_are_byte_identical() {
        let plant = plant_x();
        let gains = fixed_gains();
        let mut spec = ExperimentSpec::new(ExperimentKind::CollisionInside);
        spec.architectures = vec![ArchitectureKind::Proposed];
        let sim = SimConfig::default();
        let a = run_collision(&plant, &gains, &spec, &sim).unwrap();
        let b = run_collision(&plant, &gains, &spec, &sim).unwrap();
        assert_eq!(a[0].trace.to_csv(), b[0].trace.to_csv());
    }

    #[test]
    fn rb_swept_cutoff_matches_linear_model() {
        let plant = plant_x();
        let gains = fixed_gains();
        let mut spec = ExperimentSpec::new(ExperimentKind::Bandwidth);
        spec.architectures = vec![ArchitectureKind::RobotOnly];
        let sim = SimConfig::default();
        let runs = run_bandwidth(&plant, &gains, &spec, &sim).unwrap();
        let r = &runs[0];
        assert!(r.fit.fit_percent > 80.0, "fit {}%", r.fit.fit_percent);
        assert!(
            (r.cutoff_hz - r.analytic_cutoff_hz).abs() <= 0.15 * r.analytic_cutoff_hz,
            "fitted {} Hz vs analytic {} Hz",
            r.cutoff_hz,
            r.analytic_cutoff_hz
        );
    }

    #[test]
    fn trajectory_rigid_architecture_has_no_position_metric() {
        let plant = plant_x();
        let gains = fixed_gains();
        let mut spec = ExperimentSpec::new(ExperimentKind::ForceTrajectory);
        spec.architectures = vec![ArchitectureKind::RobotOnly, ArchitectureKind::LeaderFollower];
        let sim = SimConfig::default();
        let runs = run_force_trajectory(&plant, &gains, &spec, &sim).unwrap();
        let rb = runs.iter().find(|r| r.architecture == ArchitectureKind::RobotOnly).unwrap();
        let lf = runs.iter().find(|r| r.architecture == ArchitectureKind::LeaderFollower).unwrap();
        assert!(rb.rmse_pos.is_none());
        assert!(lf.rmse_pos.is_some());
        assert!(rb.max_force_err > 0.0 && rb.rmse_force > 0.0);
        let table = trajectory_table(&runs);
        assert!(table.value("force_trajectory", ArchitectureKind::RobotOnly, "rmse_pos_m").is_none());
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = std::env::temp_dir().join(format!("mm-empty-report-{}", std::process::id()));
        let files = emit_report(&dir, &ReportInputs::default()).unwrap();
        assert_eq!(files.len(), 1);
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("experiment,architecture,metric"));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn bandwidth_report_has_a_curve_per_architecture() {
        let runs: Vec<BandwidthRun> = [
            ArchitectureKind::Proposed,
            ArchitectureKind::LeaderFollower,
            ArchitectureKind::RobotOnly,
        ]
        .into_iter()
        .map(|arch| {
            let freqs: Vec<f64> = (1..=20).map(|k| 0.2 * k as f64).collect();
            let model = crate::lti::TransferFunction::new(vec![1.0], vec![0.1, 1.0]).unwrap();
            let response = freqs
                .iter()
                .map(|&f| model.eval_jw(2.0 * std::f64::consts::PI * f))
                .collect();
            BandwidthRun {
                architecture: arch,
                freqs_hz: freqs,
                response,
                fit: FitResult {
                    model: model.clone(),
                    params: BTreeMap::new(),
                    fit_percent: 99.0,
                    mse: 0.0,
                },
                cutoff_hz: 1.59,
                analytic_cutoff_hz: 1.59,
            }
        })
        .collect();
        let dir = std::env::temp_dir().join(format!("mm-bode-report-{}", std::process::id()));
        let inputs = ReportInputs { bandwidth: &runs, ..ReportInputs::default() };
        let files = emit_report(&dir, &inputs).unwrap();
        let bode = files.iter().find(|p| p.ends_with("bode_bandwidth.svg")).unwrap();
        let svg = std::fs::read_to_string(bode).unwrap();
        // Three curves in the magnitude panel plus three in the phase panel.
        assert_eq!(svg.matches("<polyline").count(), 6);
        for label in ["proposed", "lf", "rb"] {
            assert!(svg.contains(label), "missing {label} in legend");
        }
        assert!(files.iter().any(|p| p.ends_with("frf_bandwidth_proposed.csv")));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
