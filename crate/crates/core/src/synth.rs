//! Weighted closed-loop synthesis for the fixed-structure controller.
//!
//! The four free gains are tuned by minimizing the H-infinity norm of a
//! generalized plant that stacks three normalized performance channels:
//! weighted force error, weighted passive deflection, and weighted micro
//! velocity command. A derivative-free simplex search in log-gain space
//! does the minimization; the force-weight crossover is then pushed up a
//! geometric grid until the problem stops being feasible (norm ≥ 1).

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::WeightsConfig;
use crate::control::{ArchitectureKind, ControllerSet};
use crate::error::{Error, Result};
use crate::lti::{hinf_norm, tf_to_ss, StateSpace, TransferFunction};
use crate::plant::{coupled_plant, rigid_plant, AxisPlant};

/// Shaping-weight constants and channel normalizers, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub k_lf_f: f64,
    pub k_hf_f: f64,
    /// Force-weight crossover, rad/s. This is the variable the feasibility
    /// search pushes up.
    pub omega_co_f: f64,
    pub k_lf_x: f64,
    pub k_hf_x: f64,
    pub omega_co_x: f64,
    /// Static velocity-command weight, s/m.
    pub k_vdot: f64,
    pub f_des_norm: f64,
    pub x_rom: f64,
    pub v_max: f64,
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec {
            k_lf_f: 100.0,
            k_hf_f: 10.0,
            omega_co_f: 2.0 * std::f64::consts::PI * 0.1,
            k_lf_x: 1000.0,
            k_hf_x: 1.0,
            omega_co_x: 2.0 * std::f64::consts::PI * 0.5,
            k_vdot: 10.0,
            f_des_norm: 20.0,
            x_rom: 2.5e-3,
            v_max: 0.1,
        }
    }
}

impl WeightSpec {
    pub fn from_config(cfg: &WeightsConfig) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        WeightSpec {
            k_lf_f: cfg.k_lf_f,
            k_hf_f: cfg.k_hf_f,
            omega_co_f: two_pi * cfg.omega_co_f_start_hz,
            k_lf_x: cfg.k_lf_x,
            k_hf_x: cfg.k_hf_x,
            omega_co_x: two_pi * cfg.omega_co_x_hz,
            k_vdot: cfg.k_vdot,
            f_des_norm: cfg.f_des_norm_n,
            x_rom: cfg.x_rom_mm * 1e-3,
            v_max: cfg.v_max_mm_s * 1e-3,
        }
    }

    pub fn with_omega_co_f(mut self, omega: f64) -> Self {
        self.omega_co_f = omega;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_lf_f > self.k_hf_f && self.k_hf_f > 0.0) {
            return Err(Error::InvalidParameter(
                "force weight needs K_lf > K_hf > 0".into(),
            ));
        }
        if !(self.k_lf_x > self.k_hf_x && self.k_hf_x > 0.0) {
            return Err(Error::InvalidParameter(
                "deflection weight needs K_lf > K_hf > 0".into(),
            ));
        }
        if !(self.omega_co_f > 0.0 && self.omega_co_x > 0.0) {
            return Err(Error::InvalidParameter(
                "crossover frequencies must be positive".into(),
            ));
        }
        if !(self.k_vdot > 0.0 && self.f_des_norm > 0.0 && self.x_rom > 0.0 && self.v_max > 0.0) {
            return Err(Error::InvalidParameter(
                "weight normalizers must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Force-error shaping weight: high gain below the crossover, `k_hf_f`
/// above it.
pub fn weight_wf(spec: &WeightSpec) -> TransferFunction {
    TransferFunction::new(
        vec![spec.k_hf_f, spec.omega_co_f],
        vec![1.0, spec.omega_co_f / spec.k_lf_f],
    )
    .expect("first-order weight is always well formed")
}

/// Passive-deflection shaping weight, same lag-lead structure.
pub fn weight_wx(spec: &WeightSpec) -> TransferFunction {
    TransferFunction::new(
        vec![spec.k_hf_x, spec.omega_co_x],
        vec![1.0, spec.omega_co_x / spec.k_lf_x],
    )
    .expect("first-order weight is always well formed")
}

/// Closed loop from (reference, force disturbance) to the three weighted
/// performance outputs, with the standing deflection reference held at
/// zero. The disturbance adds to the measured force where the error is
/// formed.
pub fn build_generalized_plant(
    plant: &AxisPlant,
    spec: &WeightSpec,
    gains: &ControllerSet,
) -> Result<StateSpace> {
    spec.validate()?;
    gains.validate(ArchitectureKind::Proposed)?;
    let p = coupled_plant(plant, true);
    let np = p.n_states();

    let b_m: DVector<f64> = p.b.column(0).clone_owned();
    let b_mu: DVector<f64> = p.b.column(1).clone_owned();
    let c_p: RowDVector<f64> = p.c.row(2).clone_owned();
    let c_f: RowDVector<f64> = p.c.row(3).clone_owned();

    let wf = tf_to_ss(&weight_wf(spec))?;
    let wx = tf_to_ss(&weight_wx(spec))?;
    let (af, bf, cf_w, df_w) = (wf.a[(0, 0)], wf.b[(0, 0)], wf.c[(0, 0)], wf.d[(0, 0)]);
    let (ax, bx, cx_w, dx_w) = (wx.a[(0, 0)], wx.b[(0, 0)], wx.c[(0, 0)], wx.d[(0, 0)]);

    let inv_cm = gains.c_ctrl_f_m.recip();
    let inv_cmu = gains.c_ctrl_f_mu.recip();
    let t = gains.t_filter;
    let kd = gains.k_ctrl_x + gains.c_ctrl_x / t;

    // States: plant (np), derivative filter, force weight, deflection weight.
    let n = np + 3;
    let (i_phi, i_g, i_h) = (np, np + 1, np + 2);

    let mut a = DMatrix::zeros(n, n);
    let a_fb = &p.a
        + &b_m * &c_f * (-inv_cm)
        + &b_mu * (&c_f * (-inv_cmu) + &c_p * (-kd));
    a.view_mut((0, 0), (np, np)).copy_from(&a_fb);
    let phi_col = &b_mu * (-gains.c_ctrl_x / t);
    a.view_mut((0, i_phi), (np, 1)).copy_from(&phi_col);
    let phi_row = &c_p * (-1.0 / t);
    a.view_mut((i_phi, 0), (1, np)).copy_from(&phi_row);
    a[(i_phi, i_phi)] = -1.0 / t;
    let g_row = &c_f * (-bf / spec.f_des_norm);
    a.view_mut((i_g, 0), (1, np)).copy_from(&g_row);
    a[(i_g, i_g)] = af;
    let h_row = &c_p * (-bx / spec.x_rom);
    a.view_mut((i_h, 0), (1, np)).copy_from(&h_row);
    a[(i_h, i_h)] = ax;

    let mut b = DMatrix::zeros(n, 2);
    let b_r = &b_m * inv_cm + &b_mu * inv_cmu;
    b.view_mut((0, 0), (np, 1)).copy_from(&b_r);
    b[(i_g, 0)] = bf / spec.f_des_norm;
    let neg = -b.column(0).clone_owned();
    b.view_mut((0, 1), (n, 1)).copy_from(&neg);

    let mut c = DMatrix::zeros(3, n);
    let pf_row = &c_f * (-df_w / spec.f_des_norm);
    c.view_mut((0, 0), (1, np)).copy_from(&pf_row);
    c[(0, i_g)] = cf_w;
    let px_row = &c_p * (-dx_w / spec.x_rom);
    c.view_mut((1, 0), (1, np)).copy_from(&px_row);
    c[(1, i_h)] = cx_w;
    let pv_row = (&c_f * (-inv_cmu) + &c_p * (-kd)) * spec.k_vdot;
    c.view_mut((2, 0), (1, np)).copy_from(&pv_row);
    c[(2, i_phi)] = -spec.k_vdot * gains.c_ctrl_x / t;

    let mut d = DMatrix::zeros(3, 2);
    d[(0, 0)] = df_w / spec.f_des_norm;
    d[(0, 1)] = -df_w / spec.f_des_norm;
    d[(2, 0)] = spec.k_vdot * inv_cmu;
    d[(2, 1)] = -spec.k_vdot * inv_cmu;

    StateSpace::new(a, b, c, d)
}

/// Generalized plant for the macro-only baseline: rigid carrier model,
/// admittance force law, and only the weighted force-error channel.
pub fn build_generalized_plant_rb(
    plant: &AxisPlant,
    spec: &WeightSpec,
    gains: &ControllerSet,
) -> Result<StateSpace> {
    spec.validate()?;
    gains.validate(ArchitectureKind::RobotOnly)?;
    let p = rigid_plant(plant, true);
    let np = p.n_states();
    let b_m: DVector<f64> = p.b.column(0).clone_owned();
    let c_f: RowDVector<f64> = p.c.row(1).clone_owned();

    let wf = tf_to_ss(&weight_wf(spec))?;
    let (af, bf, cf_w, df_w) = (wf.a[(0, 0)], wf.b[(0, 0)], wf.c[(0, 0)], wf.d[(0, 0)]);
    let inv_cm = gains.c_ctrl_f_m.recip();

    let n = np + 1;
    let i_g = np;
    let mut a = DMatrix::zeros(n, n);
    let a_fb = &p.a + &b_m * &c_f * (-inv_cm);
    a.view_mut((0, 0), (np, np)).copy_from(&a_fb);
    let g_row = &c_f * (-bf / spec.f_des_norm);
    a.view_mut((i_g, 0), (1, np)).copy_from(&g_row);
    a[(i_g, i_g)] = af;

    let mut b = DMatrix::zeros(n, 2);
    let b_r = &b_m * inv_cm;
    b.view_mut((0, 0), (np, 1)).copy_from(&b_r);
    b[(i_g, 0)] = bf / spec.f_des_norm;
    let neg = -b.column(0).clone_owned();
    b.view_mut((0, 1), (n, 1)).copy_from(&neg);

    let mut c = DMatrix::zeros(1, n);
    let pf_row = &c_f * (-df_w / spec.f_des_norm);
    c.view_mut((0, 0), (1, np)).copy_from(&pf_row);
    c[(0, i_g)] = cf_w;

    let mut d = DMatrix::zeros(1, 2);
    d[(0, 0)] = df_w / spec.f_des_norm;
    d[(0, 1)] = -df_w / spec.f_des_norm;

    StateSpace::new(a, b, c, d)
}

/// Optimizer budget and restart seeding.
#[derive(Debug, Clone, Copy)]
pub struct SynthOptions {
    pub seed: u64,
    pub restarts: usize,
    pub max_evals: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            seed: 0x5eed,
            restarts: 5,
            max_evals: 2000,
        }
    }
}

/// Outcome of one synthesis run (or of the whole crossover search, in
/// which case `feasibility_trace` records every crossover tried).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub gains: ControllerSet,
    pub achieved_norm: f64,
    pub omega_co_f_final: f64,
    pub iterations: usize,
    /// Weighted peaks of the individual performance channels; channels a
    /// baseline does not use report 0.
    pub per_channel_peaks: [f64; 3],
    /// (crossover rad/s, achieved norm) per attempt, in search order.
    pub feasibility_trace: Vec<(f64, f64)>,
}

const SEARCH_TOL: f64 = 1e-3;
const REPORT_TOL: f64 = 1e-6;

fn norm_or_inf(sys: &Result<StateSpace>, tol: f64) -> f64 {
    match sys {
        Ok(s) => hinf_norm(s, tol).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}

fn gains_from_log(theta: &[f64], t_filter: f64) -> ControllerSet {
    ControllerSet {
        c_ctrl_f_m: theta[0].exp(),
        c_ctrl_f_mu: theta[1].exp(),
        k_ctrl_x: theta[2].exp(),
        c_ctrl_x: theta[3].exp(),
        t_filter,
    }
}

fn log_from_gains(gains: &ControllerSet) -> Vec<f64> {
    let clamp = |g: f64| g.clamp(1e-6, 1e8).ln();
    vec![
        clamp(gains.c_ctrl_f_m),
        clamp(gains.c_ctrl_f_mu),
        clamp(gains.k_ctrl_x),
        clamp(gains.c_ctrl_x),
    ]
}

/// Standard Nelder-Mead on `cost`, returning (argmin, min, evaluations).
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    cost: F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        cost(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let c0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), c0));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        let c = eval(&v, &mut evals);
        simplex.push((v, c));
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let diam = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if worst.is_finite() && worst - best < 1e-9 * (1.0 + best.abs()) && diam < 1e-6 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[n].0)
            .map(|(c, w)| 2.0 * c - w)
            .collect();
        let fr = eval(&reflect, &mut evals);
        if fr < simplex[0].1 {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let towards = if fr < simplex[n].1 {
                &reflect
            } else {
                &simplex[n].0
            };
            let contract: Vec<f64> = centroid
                .iter()
                .zip(towards)
                .map(|(c, w)| c + 0.5 * (w - c))
                .collect();
            let fc = eval(&contract, &mut evals);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contract, fc);
            } else {
                let b = simplex[0].0.clone();
                for j in 1..=n {
                    let v: Vec<f64> = simplex[j]
                        .0
                        .iter()
                        .zip(&b)
                        .map(|(x, bb)| bb + 0.5 * (x - bb))
                        .collect();
                    let c = eval(&v, &mut evals);
                    simplex[j] = (v, c);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0.clone(), simplex[0].1, evals)
}

/// Coarse grid over the two admittance gains, looking for any stabilizing
/// point to seed the optimizer with.
fn stabilizing_init(
    plant: &AxisPlant,
    spec: &WeightSpec,
    t_filter: f64,
) -> Option<ControllerSet> {
    let mut best: Option<(f64, ControllerSet)> = None;
    for i in 0..9 {
        let c_m = 1e2 * 10f64.powf(i as f64 / 2.0);
        for j in 0..9 {
            let c_mu = 1e1 * 10f64.powf(j as f64 / 2.0);
            let gains = ControllerSet {
                c_ctrl_f_m: c_m,
                c_ctrl_f_mu: c_mu,
                k_ctrl_x: 1.0,
                c_ctrl_x: 0.01,
                t_filter,
            };
            let cost = norm_or_inf(&build_generalized_plant(plant, spec, &gains), SEARCH_TOL);
            if cost.is_finite() && best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, gains));
            }
        }
    }
    best.map(|(_, g)| g)
}

/// Minimize the weighted closed-loop norm over the four controller gains
/// with the default budget.
pub fn tune_fixed_structure(
    plant: &AxisPlant,
    spec: &WeightSpec,
    init: ControllerSet,
) -> Result<SynthesisResult> {
    tune_fixed_structure_with(plant, spec, init, &SynthOptions::default())
}

/// Same as [`tune_fixed_structure`] with an explicit budget, used by the
/// crossover search to warm-start cheaply.
pub fn tune_fixed_structure_with(
    plant: &AxisPlant,
    spec: &WeightSpec,
    init: ControllerSet,
    opts: &SynthOptions,
) -> Result<SynthesisResult> {
    spec.validate()?;
    let t_filter = init.t_filter;
    let cost = |theta: &[f64]| {
        let gains = gains_from_log(theta, t_filter);
        norm_or_inf(&build_generalized_plant(plant, spec, &gains), SEARCH_TOL)
    };

    let x_init = log_from_gains(&init);
    let start = if cost(&x_init).is_finite() {
        x_init
    } else {
        let fallback = stabilizing_init(plant, spec, t_filter).ok_or_else(|| {
            Error::SynthesisFailed("no stabilizing initial gains found on the coarse grid".into())
        })?;
        log_from_gains(&fallback)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut total_evals = 0usize;
    for r in 0..opts.restarts.max(1) {
        let x0: Vec<f64> = if r == 0 {
            start.clone()
        } else {
            // Restart around the best point seen so far.
            let base = best.as_ref().map_or(&start, |(x, _)| x);
            base.iter()
                .map(|&v| v + rng.random_range(-1.5..1.5))
                .collect()
        };
        let (x, c, used) = nelder_mead(&cost, &x0, 0.5, opts.max_evals);
        total_evals += used;
        if best.as_ref().is_none_or(|(_, bc)| c < *bc) {
            best = Some((x, c));
        }
    }
    let (x_best, coarse) = best.expect("at least one restart ran");
    if !coarse.is_finite() {
        return Err(Error::SynthesisFailed(
            "optimizer never found a stabilizing point within budget".into(),
        ));
    }

    let gains = gains_from_log(&x_best, t_filter);
    let sys = build_generalized_plant(plant, spec, &gains)?;
    let achieved = hinf_norm(&sys, REPORT_TOL)?;
    let mut peaks = [0.0f64; 3];
    for (i, peak) in peaks.iter_mut().enumerate() {
        *peak = hinf_norm(&sys.select_outputs(&[i]), REPORT_TOL)?;
    }
    Ok(SynthesisResult {
        gains,
        achieved_norm: achieved,
        omega_co_f_final: spec.omega_co_f,
        iterations: total_evals,
        per_channel_peaks: peaks,
        feasibility_trace: vec![(spec.omega_co_f, achieved)],
    })
}

/// One-parameter version for the macro-only baseline.
pub fn tune_rb(plant: &AxisPlant, spec: &WeightSpec, init: ControllerSet) -> Result<SynthesisResult> {
    tune_rb_with(plant, spec, init, &SynthOptions::default())
}

pub fn tune_rb_with(
    plant: &AxisPlant,
    spec: &WeightSpec,
    init: ControllerSet,
    opts: &SynthOptions,
) -> Result<SynthesisResult> {
    spec.validate()?;
    let t_filter = init.t_filter;
    let gains_of = |theta: &[f64]| ControllerSet {
        c_ctrl_f_m: theta[0].exp(),
        c_ctrl_f_mu: f64::INFINITY,
        k_ctrl_x: 0.0,
        c_ctrl_x: 0.0,
        t_filter,
    };
    let cost = |theta: &[f64]| {
        norm_or_inf(
            &build_generalized_plant_rb(plant, spec, &gains_of(theta)),
            SEARCH_TOL,
        )
    };

    let x_init = vec![init.c_ctrl_f_m.clamp(1e-6, 1e8).ln()];
    let start = if cost(&x_init).is_finite() {
        x_init
    } else {
        // The rigid loop is first-order-like; sweep one decade grid.
        let mut found = None;
        for i in 0..13 {
            let x = vec![(1e2f64 * 10f64.powf(i as f64 / 2.0)).ln()];
            if cost(&x).is_finite() {
                found = Some(x);
                break;
            }
        }
        found.ok_or_else(|| {
            Error::SynthesisFailed("no stabilizing admittance gain found".into())
        })?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut total_evals = 0usize;
    for r in 0..opts.restarts.max(1) {
        let x0 = if r == 0 {
            start.clone()
        } else {
            let base = best.as_ref().map_or(&start, |(x, _)| x);
            vec![base[0] + rng.random_range(-1.5..1.5)]
        };
        let (x, c, used) = nelder_mead(&cost, &x0, 0.5, opts.max_evals);
        total_evals += used;
        if best.as_ref().is_none_or(|(_, bc)| c < *bc) {
            best = Some((x, c));
        }
    }
    let (x_best, coarse) = best.expect("at least one restart ran");
    if !coarse.is_finite() {
        return Err(Error::SynthesisFailed(
            "optimizer never found a stabilizing point within budget".into(),
        ));
    }
    let gains = gains_of(&x_best);
    let sys = build_generalized_plant_rb(plant, spec, &gains)?;
    let achieved = hinf_norm(&sys, REPORT_TOL)?;
    Ok(SynthesisResult {
        gains,
        achieved_norm: achieved,
        omega_co_f_final: spec.omega_co_f,
        iterations: total_evals,
        per_channel_peaks: [achieved, 0.0, 0.0],
        feasibility_trace: vec![(spec.omega_co_f, achieved)],
    })
}

const CROSSOVER_START_HZ: f64 = 0.1;
const CROSSOVER_RATIO: f64 = 1.2;
const CROSSOVER_CAP_HZ: f64 = 400.0;

fn crossover_loop<T>(
    spec_base: &WeightSpec,
    mut tune_at: T,
) -> Result<SynthesisResult>
where
    T: FnMut(&WeightSpec, Option<&ControllerSet>) -> Result<SynthesisResult>,
{
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut last_ok: Option<SynthesisResult> = None;
    let mut total_evals = 0usize;
    let mut f_hz = CROSSOVER_START_HZ;

    loop {
        let spec = spec_base.with_omega_co_f(two_pi * f_hz);
        let warm = last_ok.as_ref().map(|r| &r.gains);
        let feasible = match tune_at(&spec, warm) {
            Ok(r) => {
                total_evals += r.iterations;
                trace.push((spec.omega_co_f, r.achieved_norm));
                let ok = r.achieved_norm < 1.0;
                if ok {
                    last_ok = Some(r);
                }
                ok
            }
            Err(e) => {
                if last_ok.is_none() {
                    return Err(e);
                }
                trace.push((spec.omega_co_f, f64::INFINITY));
                false
            }
        };
        if !feasible {
            break;
        }
        f_hz *= CROSSOVER_RATIO;
        if f_hz > CROSSOVER_CAP_HZ {
            break;
        }
    }

    let mut winner = last_ok.ok_or_else(|| {
        Error::SynthesisFailed(format!(
            "weighted norm ≥ 1 even at the lowest crossover ({CROSSOVER_START_HZ} Hz)"
        ))
    })?;

    // One refinement level between the last success and the failure.
    let f_mid = winner.omega_co_f_final / two_pi * CROSSOVER_RATIO.sqrt();
    if f_mid <= CROSSOVER_CAP_HZ {
        let spec = spec_base.with_omega_co_f(two_pi * f_mid);
        if let Ok(r) = tune_at(&spec, Some(&winner.gains)) {
            total_evals += r.iterations;
            trace.push((spec.omega_co_f, r.achieved_norm));
            if r.achieved_norm < 1.0 {
                winner = r;
            }
        }
    }

    winner.iterations = total_evals;
    winner.feasibility_trace = trace;
    Ok(winner)
}

/// Push the force-weight crossover up a ratio-1.2 grid, retuning at each
/// point, and return the last feasible synthesis (one √1.2 refinement
/// after the first failure).
pub fn crossover_search(plant: &AxisPlant, spec_base: &WeightSpec) -> Result<SynthesisResult> {
    crossover_search_with(plant, spec_base, &SynthOptions::default())
}

pub fn crossover_search_with(
    plant: &AxisPlant,
    spec_base: &WeightSpec,
    opts: &SynthOptions,
) -> Result<SynthesisResult> {
    let cold_init = ControllerSet {
        c_ctrl_f_m: 2e4,
        c_ctrl_f_mu: 1e3,
        k_ctrl_x: 1.0,
        c_ctrl_x: 0.01,
        t_filter: 2e-3,
    };
    let warm_opts = SynthOptions {
        restarts: 2,
        max_evals: (opts.max_evals / 4).max(200),
        ..*opts
    };
    crossover_loop(spec_base, |spec, warm| match warm {
        None => tune_fixed_structure_with(plant, spec, cold_init, opts),
        Some(g) => tune_fixed_structure_with(plant, spec, *g, &warm_opts),
    })
}

/// Crossover search for the macro-only baseline.
pub fn crossover_search_rb(plant: &AxisPlant, spec_base: &WeightSpec) -> Result<SynthesisResult> {
    crossover_search_rb_with(plant, spec_base, &SynthOptions::default())
}

pub fn crossover_search_rb_with(
    plant: &AxisPlant,
    spec_base: &WeightSpec,
    opts: &SynthOptions,
) -> Result<SynthesisResult> {
    let cold_init = ControllerSet {
        c_ctrl_f_m: 2e4,
        c_ctrl_f_mu: f64::INFINITY,
        k_ctrl_x: 0.0,
        c_ctrl_x: 0.0,
        t_filter: 2e-3,
    };
    let warm_opts = SynthOptions {
        restarts: 2,
        max_evals: (opts.max_evals / 4).max(200),
        ..*opts
    };
    crossover_loop(spec_base, |spec, warm| match warm {
        None => tune_rb_with(plant, spec, cold_init, opts),
        Some(g) => tune_rb_with(plant, spec, *g, &warm_opts),
    })
}
