//! Surrogate models of the two stages, the elastic suspension and the
//! contact spring, plus the coupled single-axis plant used everywhere else.
//!
//! Both stages are velocity-commanded and behave like identified
//! second-order low-passes from commanded to actual velocity. The passive
//! side of the fine stage hangs on a spring-damper hinge and is the part
//! that actually touches the environment, which is modelled as a pure
//! unilateral stiffness.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{StateSpace, TransferFunction};

/// Task axis label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Coarse-stage velocity dynamics: gain, damping ratio and cutoff (rad/s).
#[derive(Debug, Clone, Copy)]
pub struct MacroParams {
    pub gain: f64,
    pub zeta: f64,
    pub omega_c: f64,
}

/// Fine-stage active-side velocity dynamics, same shape as [`MacroParams`].
#[derive(Debug, Clone, Copy)]
pub struct MicroActiveParams {
    pub gain: f64,
    pub zeta: f64,
    pub omega_c: f64,
}

/// Passive-side mechanics: suspended mass, hinge spring/damper, stroke and
/// actuator velocity limit. All SI.
#[derive(Debug, Clone, Copy)]
pub struct MechanicalParams {
    /// Passive-side structural mass, kg (without payload).
    pub m_mu_p: f64,
    /// Payload carried by the passive side, kg.
    pub m_load: f64,
    /// Hinge damping, N·s/m.
    pub c_mu: f64,
    /// Hinge stiffness, N/m.
    pub k_mu: f64,
    /// Half range of motion of the fine stage, m.
    pub rom: f64,
    /// Fine-stage velocity limit, m/s.
    pub v_max: f64,
}

impl MechanicalParams {
    /// Total suspended mass (structure + payload), kg.
    pub fn total_mass(&self) -> f64 {
        self.m_mu_p + self.m_load
    }
}

/// Environment stiffness and wall location in the world frame.
#[derive(Debug, Clone, Copy)]
pub struct EnvironmentModel {
    /// Contact stiffness, N/m.
    pub k_env: f64,
    /// World position of the contact surface, m.
    pub x_wall: f64,
}

/// Everything needed to build the single-axis plant.
#[derive(Debug, Clone)]
pub struct AxisPlant {
    pub macro_stage: MacroParams,
    pub micro_active: MicroActiveParams,
    pub mech: MechanicalParams,
    pub env: EnvironmentModel,
    pub axis: Axis,
}

impl AxisPlant {
    pub fn validate(&self) -> Result<()> {
        let m = &self.macro_stage;
        if m.gain <= 0.0 || m.zeta <= 0.0 || m.omega_c <= 0.0 {
            return Err(Error::InvalidParameter(
                "macro stage gain, damping ratio and cutoff must be positive".into(),
            ));
        }
        let a = &self.micro_active;
        if a.gain <= 0.0 || a.zeta <= 0.0 || a.omega_c <= 0.0 {
            return Err(Error::InvalidParameter(
                "micro active-side gain, damping ratio and cutoff must be positive".into(),
            ));
        }
        let mech = &self.mech;
        if mech.m_mu_p < 0.0 || mech.m_load < 0.0 || mech.total_mass() <= 0.0 {
            return Err(Error::InvalidParameter(
                "passive-side masses must be nonnegative with positive total".into(),
            ));
        }
        if mech.c_mu < 0.0 || mech.k_mu <= 0.0 || mech.rom <= 0.0 || mech.v_max <= 0.0 {
            return Err(Error::InvalidParameter(
                "hinge damping must be nonnegative; stiffness, stroke and velocity limit positive"
                    .into(),
            ));
        }
        if self.env.k_env <= 0.0 {
            return Err(Error::InvalidParameter(
                "environment stiffness must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn second_order_lowpass(gain: f64, zeta: f64, omega_c: f64) -> TransferFunction {
    TransferFunction::new(
        vec![gain * omega_c * omega_c],
        vec![1.0, 2.0 * zeta * omega_c, omega_c * omega_c],
    )
    .expect("second-order low-pass coefficients are valid")
}

/// Commanded-to-actual velocity response of the coarse stage.
pub fn macro_tf(p: &MacroParams) -> TransferFunction {
    second_order_lowpass(p.gain, p.zeta, p.omega_c)
}

/// Commanded-to-actual velocity response of the fine-stage active side.
pub fn micro_active_tf(p: &MicroActiveParams) -> TransferFunction {
    second_order_lowpass(p.gain, p.zeta, p.omega_c)
}

/// Active-side position to passive-side position through the hinge, with
/// the carrier held still. `k_env = 0` gives the free-space response.
pub fn micro_passive_tf(mech: &MechanicalParams, k_env: f64) -> TransferFunction {
    TransferFunction::new(
        vec![mech.c_mu, mech.k_mu],
        vec![mech.total_mass(), mech.c_mu, mech.k_mu + k_env],
    )
    .expect("hinge coefficients are valid")
}

/// Full fine-stage path: velocity command through the active-side dynamics,
/// integrated to position, through the hinge to the passive side.
pub fn micro_full_tf(
    pa: &MicroActiveParams,
    mech: &MechanicalParams,
    k_env: f64,
) -> TransferFunction {
    micro_active_tf(pa)
        .series(&TransferFunction::integrator())
        .series(&micro_passive_tf(mech, k_env))
}

/// Unilateral contact force on the passive side at world position `x_p`:
/// the spring pushes only under penetration.
pub fn env_force(x_p: f64, env: &EnvironmentModel) -> f64 {
    let pen = x_p - env.x_wall;
    if pen > 0.0 {
        env.k_env * pen
    } else {
        0.0
    }
}

/// Full linear single-axis plant for one contact mode, in wall-relative
/// coordinates (the contact surface sits at 0).
///
/// Inputs: coarse velocity command, fine velocity command.
/// Outputs: carrier position `x_M`, active-side position `x̃_μa`,
/// passive-side position `x̃_μp` (both relative to the carrier), and the
/// contact force (zero row in free mode).
///
/// State layout: `[z1, z2, x_M, w1, w2, x̃_μa, x̃_μp, ẋ̃_μp]` where
/// `(z1, z2)` and `(w1, w2)` realize the two velocity low-passes with
/// actual velocities `K_M ω_M² z2` and `K_a ω_a² w2`.
pub fn coupled_plant(ap: &AxisPlant, in_contact: bool) -> StateSpace {
    let mp = &ap.macro_stage;
    let ma = &ap.micro_active;
    let mech = &ap.mech;
    let m_tot = mech.total_mass();
    let kappa = if in_contact { ap.env.k_env } else { 0.0 };

    let wm2 = mp.omega_c * mp.omega_c;
    let wa2 = ma.omega_c * ma.omega_c;
    let vm = mp.gain * wm2; // actual carrier velocity = vm * z2
    let va = ma.gain * wa2; // actual active-side velocity = va * w2

    let mut a = DMatrix::zeros(8, 8);
    // Coarse stage velocity dynamics + position integration.
    a[(0, 0)] = -2.0 * mp.zeta * mp.omega_c;
    a[(0, 1)] = -wm2;
    a[(1, 0)] = 1.0;
    a[(2, 1)] = vm;
    // Fine stage active side.
    a[(3, 3)] = -2.0 * ma.zeta * ma.omega_c;
    a[(3, 4)] = -wa2;
    a[(4, 3)] = 1.0;
    a[(5, 4)] = va;
    // Passive side: m (ẍ_M + p̈) = k_μ(x̃_μa − p) + c_μ(ẋ̃_μa − ṗ) − κ(x_M + p),
    // with ẍ_M = vm·ż2 = vm·z1.
    a[(6, 7)] = 1.0;
    a[(7, 0)] = -vm;
    a[(7, 2)] = -kappa / m_tot;
    a[(7, 4)] = mech.c_mu * va / m_tot;
    a[(7, 5)] = mech.k_mu / m_tot;
    a[(7, 6)] = -(mech.k_mu + kappa) / m_tot;
    a[(7, 7)] = -mech.c_mu / m_tot;

    let mut b = DMatrix::zeros(8, 2);
    b[(0, 0)] = 1.0;
    b[(3, 1)] = 1.0;

    let mut c = DMatrix::zeros(4, 8);
    c[(0, 2)] = 1.0;
    c[(1, 5)] = 1.0;
    c[(2, 6)] = 1.0;
    c[(3, 2)] = kappa;
    c[(3, 6)] = kappa;

    let d = DMatrix::zeros(4, 2);
    StateSpace::new(a, b, c, d).expect("coupled plant dimensions are consistent")
}

/// Reduced plant with the fine stage rigidly locked: only the coarse stage
/// moves and the end effector presses directly on the environment.
///
/// Input: coarse velocity command. Outputs: carrier position and contact
/// force. State layout `[z1, z2, x_M]`, wall-relative.
pub fn rigid_plant(ap: &AxisPlant, in_contact: bool) -> StateSpace {
    let mp = &ap.macro_stage;
    let kappa = if in_contact { ap.env.k_env } else { 0.0 };
    let wm2 = mp.omega_c * mp.omega_c;
    let vm = mp.gain * wm2;

    let mut a = DMatrix::zeros(3, 3);
    a[(0, 0)] = -2.0 * mp.zeta * mp.omega_c;
    a[(0, 1)] = -wm2;
    a[(1, 0)] = 1.0;
    a[(2, 1)] = vm;

    let mut b = DMatrix::zeros(3, 1);
    b[(0, 0)] = 1.0;

    let mut c = DMatrix::zeros(2, 3);
    c[(0, 2)] = 1.0;
    c[(1, 2)] = kappa;

    let d = DMatrix::zeros(2, 1);
    StateSpace::new(a, b, c, d).expect("rigid plant dimensions are consistent")
}
