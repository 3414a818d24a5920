//! Fixed-step time-domain simulation with unilateral contact switching.
//!
//! Each contact mode is a linear model; the simulator discretizes both
//! once and switches between them at sample boundaries based on the
//! penetration computed from the current state. Velocity commands are
//! saturated between the controller and the plant, which is the one place
//! the otherwise linear loop becomes nonlinear (besides the contact
//! itself and the optional stroke clamp).

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::control::{ArchitectureKind, ClosedLoop, DiscreteController};
use crate::error::{Error, Result};
use crate::plant::{coupled_plant, rigid_plant};

const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Sample time, s.
    pub ts: f64,
    /// Simulated span, s.
    pub duration: f64,
    /// Initial gap between end effector and wall, m.
    pub x_dist: f64,
    /// Force measurement noise standard deviation, N.
    pub noise_std: f64,
    /// Noise RNG seed.
    pub seed: u64,
    /// Carrier velocity command limit, m/s.
    pub v_limit_macro: f64,
    /// Clamp the active-side position state to the mechanical stroke.
    pub rom_clamp: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ts: 1e-3,
            duration: 5.0,
            x_dist: 0.0,
            noise_std: 0.0,
            seed: 0,
            v_limit_macro: 0.25,
            rom_clamp: true,
        }
    }
}

/// Recorded signals, one entry per sample.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub t: Vec<f64>,
    pub f_des: Vec<f64>,
    pub f_act: Vec<f64>,
    pub x_m: Vec<f64>,
    pub x_tilde_mu_a: Vec<f64>,
    pub x_tilde_mu_p: Vec<f64>,
    pub v_cmd_m: Vec<f64>,
    pub v_cmd_mu: Vec<f64>,
    pub contact: Vec<bool>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() > 1 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }

    /// Index of the first sample at or after time `t0`.
    pub fn index_at(&self, t0: f64) -> usize {
        self.t.partition_point(|&t| t < t0)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,f_des,f_act,x_m,x_tilde_mu_a,x_tilde_mu_p,v_cmd_m,v_cmd_mu,contact\n");
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.t[i],
                self.f_des[i],
                self.f_act[i],
                self.x_m[i],
                self.x_tilde_mu_a[i],
                self.x_tilde_mu_p[i],
                self.v_cmd_m[i],
                self.v_cmd_mu[i],
                u8::from(self.contact[i]),
            )
            .expect("writing to a string cannot fail");
        }
        out
    }
}

/// Settling thresholds for [`extract_metrics`].
#[derive(Debug, Clone)]
pub struct MetricThresholds {
    /// Force level that counts as established contact, N.
    pub contact_n: f64,
    /// Relative force band around the reference.
    pub force_band_frac: f64,
    /// Dwell time the force must stay in band, s.
    pub force_dwell: f64,
    /// Position band as a fraction of the stroke.
    pub pos_band_frac: f64,
    /// Dwell time for the position band, s.
    pub pos_dwell: f64,
    /// Half stroke used to scale the position band, m.
    pub rom: f64,
    /// Deflection reference, m.
    pub x_ref: f64,
}

impl Default for MetricThresholds {
    fn default() -> Self {
        MetricThresholds {
            contact_n: 0.5,
            force_band_frac: 0.02,
            force_dwell: 0.1,
            pos_band_frac: 0.01,
            pos_dwell: 0.1,
            rom: 2.5e-3,
            x_ref: 0.0,
        }
    }
}

/// Event times and error metrics of one run. `None` means the condition
/// was never met within the trace.
#[derive(Debug, Clone)]
pub struct MetricSet {
    pub t_contact: Option<f64>,
    pub t_force_reached: Option<f64>,
    pub t_pos_reached: Option<f64>,
    pub rmse_force: f64,
    pub rmse_pos: f64,
    pub max_force_err: f64,
    pub overshoot: f64,
}

/// Run one scenario. The trajectories give the desired force and desired
/// deflection at any time; pass closures returning constants for steps.
pub fn simulate(
    cl: &ClosedLoop,
    cfg: &SimConfig,
    f_des_traj: impl Fn(f64) -> f64,
    x_des_traj: impl Fn(f64) -> f64,
) -> Result<SimTrace> {
    if cfg.ts <= 0.0 {
        return Err(Error::InvalidParameter("sample time must be positive".into()));
    }
    if cfg.duration < cfg.ts {
        return Err(Error::InvalidParameter(
            "duration must cover at least one sample".into(),
        ));
    }
    if cfg.x_dist < 0.0 {
        return Err(Error::InvalidParameter("initial gap must be nonnegative".into()));
    }
    cl.plant.validate()?;

    let rigid = cl.kind == ArchitectureKind::RobotOnly;
    let (free, contact_model) = if rigid {
        (rigid_plant(&cl.plant, false), rigid_plant(&cl.plant, true))
    } else {
        (coupled_plant(&cl.plant, false), coupled_plant(&cl.plant, true))
    };
    let d_free = crate::lti::discretize(&free, cfg.ts)?;
    let d_contact = crate::lti::discretize(&contact_model, cfg.ts)?;

    let mut ctrl = DiscreteController::new(cl.kind, cl.gains, cfg.ts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n = (cfg.duration / cfg.ts).round() as usize;
    let n_states = free.n_states();
    let mut x = DVector::zeros(n_states);
    x[2] = -cfg.x_dist; // carrier starts x_dist short of the wall

    let k_env = cl.plant.env.k_env;
    let x_wall = cl.plant.env.x_wall;
    let v_max_mu = cl.plant.mech.v_max;
    let rom = cl.plant.mech.rom;

    let mut trace = SimTrace {
        t: Vec::with_capacity(n),
        f_des: Vec::with_capacity(n),
        f_act: Vec::with_capacity(n),
        x_m: Vec::with_capacity(n),
        x_tilde_mu_a: Vec::with_capacity(n),
        x_tilde_mu_p: Vec::with_capacity(n),
        v_cmd_m: Vec::with_capacity(n),
        v_cmd_mu: Vec::with_capacity(n),
        contact: Vec::with_capacity(n),
    };

    let mut u = DVector::zeros(if rigid { 1 } else { 2 });
    for k in 0..n {
        let t = k as f64 * cfg.ts;
        let (x_a, p) = if rigid { (0.0, 0.0) } else { (x[5], x[6]) };
        let pen = x[2] + p;
        let in_contact = pen > 0.0;
        let f_true = if in_contact { k_env * pen } else { 0.0 };
        let f_meas = if cfg.noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            f_true + cfg.noise_std * z
        } else {
            f_true
        };

        let f_des = f_des_traj(t);
        let x_des = x_des_traj(t);
        let (um_raw, umu_raw) = ctrl.step(f_des - f_meas, x_des - p);
        let um = um_raw.clamp(-cfg.v_limit_macro, cfg.v_limit_macro);
        let umu = umu_raw.clamp(-v_max_mu, v_max_mu);

        trace.t.push(t);
        trace.f_des.push(f_des);
        trace.f_act.push(f_meas);
        trace.x_m.push(x[2] + x_wall);
        trace.x_tilde_mu_a.push(x_a);
        trace.x_tilde_mu_p.push(p);
        trace.v_cmd_m.push(um);
        trace.v_cmd_mu.push(umu);
        trace.contact.push(in_contact);

        u[0] = um;
        if !rigid {
            u[1] = umu;
        }
        let model = if in_contact { &d_contact } else { &d_free };
        x = &model.a * &x + &model.b * &u;
        if cfg.rom_clamp && !rigid {
            x[5] = x[5].clamp(-rom, rom);
        }
        if x.amax() > DIVERGENCE_LIMIT {
            return Err(Error::SimulationDiverged {
                t,
                limit: DIVERGENCE_LIMIT,
            });
        }
    }
    Ok(trace)
}

/// First index from which the predicate holds over a full dwell window.
fn first_dwell(
    t: &[f64],
    dwell: f64,
    dt: f64,
    in_band: impl Fn(usize) -> bool,
) -> Option<usize> {
    let n = t.len();
    let window = if dt > 0.0 {
        (dwell / dt).round() as usize + 1
    } else {
        1
    };
    if n < window {
        return None;
    }
    let mut run = 0usize;
    for i in 0..n {
        if in_band(i) {
            run += 1;
            if run >= window {
                return Some(i + 1 - window);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Event times and error statistics against a constant force reference.
pub fn extract_metrics(trace: &SimTrace, f_ref: f64, th: &MetricThresholds) -> MetricSet {
    assert!(!trace.is_empty(), "metrics need a non-empty trace");
    let dt = trace.dt();
    let n = trace.len();

    let t_contact = trace
        .f_act
        .iter()
        .position(|&f| f >= th.contact_n)
        .map(|i| trace.t[i]);

    let force_band = th.force_band_frac * f_ref.abs();
    let t_force_reached = first_dwell(&trace.t, th.force_dwell, dt, |i| {
        (trace.f_act[i] - f_ref).abs() <= force_band
    })
    .map(|i| trace.t[i]);

    let t_pos_reached = t_force_reached.and_then(|t_f| {
        let start = trace.index_at(t_f);
        let pos_band = th.pos_band_frac * th.rom;
        let sub_t = &trace.t[start..];
        first_dwell(sub_t, th.pos_dwell, dt, |i| {
            (trace.x_tilde_mu_p[start + i] - th.x_ref).abs() <= pos_band
        })
        .map(|i| sub_t[i])
    });

    let mut sum_f = 0.0;
    let mut sum_p = 0.0;
    let mut max_err: f64 = 0.0;
    let mut peak = f64::NEG_INFINITY;
    for i in 0..n {
        let ef = trace.f_act[i] - trace.f_des[i];
        sum_f += ef * ef;
        max_err = max_err.max(ef.abs());
        let ep = trace.x_tilde_mu_p[i] - th.x_ref;
        sum_p += ep * ep;
        peak = peak.max(trace.f_act[i]);
    }
    let overshoot = if f_ref != 0.0 {
        ((peak - f_ref) / f_ref).max(0.0)
    } else {
        0.0
    };

    MetricSet {
        t_contact,
        t_force_reached,
        t_pos_reached,
        rmse_force: (sum_f / n as f64).sqrt(),
        rmse_pos: (sum_p / n as f64).sqrt(),
        max_force_err: max_err,
        overshoot,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Config, HingeVariant};
    use crate::control::{ControllerSet, Setpoints};
    use crate::plant::Axis;
    use approx::assert_relative_eq;

    fn loop_x(kind: ArchitectureKind) -> ClosedLoop {
        let plant = Config::default()
            .axis_plant(Axis::X, HingeVariant::Low)
            .unwrap();
        ClosedLoop {
            plant,
            kind,
            gains: ControllerSet {
                c_ctrl_f_m: 1e4,
                c_ctrl_f_mu: 2e3,
                k_ctrl_x: 2.0,
                c_ctrl_x: 0.1,
                t_filter: 2e-3,
            },
            setpoints: Setpoints {
                f_des: 20.0,
                x_tilde_des: 0.0,
            },
        }
    }

    #[test]
    fn zero_reference_stays_at_rest() {
        let cl = loop_x(ArchitectureKind::Proposed);
        let cfg = SimConfig {
            duration: 1.0,
            x_dist: 1e-3,
            ..SimConfig::default()
        };
        let trace = simulate(&cl, &cfg, |_| 0.0, |_| 0.0).unwrap();
        assert!(trace.contact.iter().all(|&c| !c));
        assert!(trace.f_act.iter().all(|&f| f == 0.0));
        assert!(trace.x_tilde_mu_p.iter().all(|&p| p == 0.0));
        assert_relative_eq!(trace.x_m[trace.len() - 1], -1e-3, epsilon = 1e-15);
    }

    #[test]
    fn force_step_settles_at_reference() {
        let cl = loop_x(ArchitectureKind::Proposed);
        let cfg = SimConfig {
            duration: 8.0,
            ..SimConfig::default()
        };
        let trace = simulate(&cl, &cfg, |_| 20.0, |_| 0.0).unwrap();
        let last = trace.f_act[trace.len() - 1];
        assert_relative_eq!(last, 20.0, max_relative = 0.01);
        let m = extract_metrics(&trace, 20.0, &MetricThresholds::default());
        assert!(m.t_contact.is_some());
        assert!(m.t_force_reached.is_some());
        assert!(m.t_contact.unwrap() <= m.t_force_reached.unwrap());
        // Deflection returns to centre.
        assert!(trace.x_tilde_mu_p[trace.len() - 1].abs() < 0.01 * cl.plant.mech.rom);
    }

    #[test]
    fn contact_flag_matches_recomputed_force() {
        let cl = loop_x(ArchitectureKind::LeaderFollower);
        let cfg = SimConfig {
            duration: 3.0,
            x_dist: 0.5e-3,
            ..SimConfig::default()
        };
        let trace = simulate(&cl, &cfg, |_| 10.0, |_| 0.0).unwrap();
        for i in 0..trace.len() {
            let pen = trace.x_m[i] - cl.plant.env.x_wall + trace.x_tilde_mu_p[i];
            let f_true = cl.plant.env.k_env * pen.max(0.0);
            assert_eq!(trace.contact[i], f_true > 0.0);
            assert_relative_eq!(trace.f_act[i], f_true, epsilon = 1e-9);
        }
    }

    #[test]
    fn identical_seeds_reproduce_noisy_traces() {
        let cl = loop_x(ArchitectureKind::Proposed);
        let cfg = SimConfig {
            duration: 2.0,
            noise_std: 0.05,
            seed: 7,
            ..SimConfig::default()
        };
        let a = simulate(&cl, &cfg, |_| 20.0, |_| 0.0).unwrap();
        let b = simulate(&cl, &cfg, |_| 20.0, |_| 0.0).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let cfg2 = SimConfig { seed: 8, ..cfg };
        let c = simulate(&cl, &cfg2, |_| 20.0, |_| 0.0).unwrap();
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn halving_sample_time_preserves_steady_state() {
        let cl = loop_x(ArchitectureKind::Proposed);
        let coarse = SimConfig {
            duration: 6.0,
            ..SimConfig::default()
        };
        let fine = SimConfig {
            ts: 0.5e-3,
            ..coarse.clone()
        };
        let a = simulate(&cl, &coarse, |_| 20.0, |_| 0.0).unwrap();
        let b = simulate(&cl, &fine, |_| 20.0, |_| 0.0).unwrap();
        let fa = a.f_act[a.len() - 1];
        let fb = b.f_act[b.len() - 1];
        assert!(
            ((fa - fb) / fb).abs() < 1e-3,
            "steady state moved from {fb} to {fa}"
        );
    }

    #[test]
    fn unstable_gains_reported_as_divergence() {
        let mut cl = loop_x(ArchitectureKind::LeaderFollower);
        // Aggressive carrier PD with the wrong magnitude blows the loop up.
        cl.gains.k_ctrl_x = 5e4;
        cl.gains.c_ctrl_x = 2.5e3;
        cl.gains.c_ctrl_f_mu = 50.0;
        let cfg = SimConfig {
            duration: 10.0,
            rom_clamp: false,
            v_limit_macro: 1e9,
            ..SimConfig::default()
        };
        let mut big = cl.plant.clone();
        big.mech.v_max = 1e9; // let the states actually run away
        cl.plant = big;
        let err = simulate(&cl, &cfg, |_| 20.0, |_| 0.0);
        assert!(
            matches!(err, Err(Error::SimulationDiverged { .. })),
            "expected divergence, got {err:?}"
        );
    }

    #[test]
    fn hinge_energy_dissipates_freely() {
        // Passive subsystem only: deflect the hinge and let it ring down.
        let plant = loop_x(ArchitectureKind::Proposed).plant;
        let sys = coupled_plant(&plant, false);
        let d = crate::lti::discretize(&sys, 1e-4).unwrap();
        let mut x = DVector::zeros(8);
        x[6] = 1e-3;
        let u = DVector::zeros(2);
        let m = plant.mech.total_mass();
        let k = plant.mech.k_mu;
        let mut prev = 0.5 * k * x[6] * x[6];
        for _ in 0..20_000 {
            x = &d.a * &x + &d.b * &u;
            let e = 0.5 * k * (x[6] - x[5]) * (x[6] - x[5]) + 0.5 * m * x[7] * x[7];
            assert!(e <= prev * (1.0 + 1e-9), "energy rose from {prev} to {e}");
            prev = e;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn metrics_on_synthetic_step() {
        let n = 3000;
        let dt = 1e-3;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let f_act: Vec<f64> = t.iter().map(|&ti| if ti >= 1.0 { 20.0 } else { 0.0 }).collect();
        let trace = SimTrace {
            t: t.clone(),
            f_des: vec![20.0; n],
            f_act,
            x_m: vec![0.0; n],
            x_tilde_mu_a: vec![0.0; n],
            x_tilde_mu_p: vec![0.0; n],
            v_cmd_m: vec![0.0; n],
            v_cmd_mu: vec![0.0; n],
            contact: vec![true; n],
        };
        let m = extract_metrics(&trace, 20.0, &MetricThresholds::default());
        assert_relative_eq!(m.t_contact.unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.t_force_reached.unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.overshoot, 0.0);

        // Single 10% peak above the reference.
        let mut f2 = vec![20.0; n];
        f2[500] = 22.0;
        let trace2 = SimTrace {
            f_act: f2,
            ..trace.clone()
        };
        let m2 = extract_metrics(&trace2, 20.0, &MetricThresholds::default());
        assert_relative_eq!(m2.overshoot, 0.10, epsilon = 1e-12);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cl = loop_x(ArchitectureKind::RobotOnly);
        let cfg = SimConfig {
            duration: 0.05,
            ..SimConfig::default()
        };
        let trace = simulate(&cl, &cfg, |_| 5.0, |_| 0.0).unwrap();
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,f_des,f_act,x_m,x_tilde_mu_a,x_tilde_mu_p,v_cmd_m,v_cmd_mu,contact"
        );
        assert_eq!(csv.lines().count(), trace.len() + 1);
    }
}
