//! Control laws and architecture wiring.
//!
//! Three architectures share one gain bundle:
//!
//! - `Proposed`: the carrier runs force admittance (velocity proportional
//!   to force error) while the fine stage runs the same admittance *plus*
//!   a filtered PD that regulates its own deflection; both fine-stage
//!   commands are summed.
//! - `LeaderFollower`: the fine stage alone does force admittance and the
//!   carrier follows the measured deflection with a filtered PD, keeping
//!   the fine stage near the middle of its stroke.
//! - `RobotOnly`: the carrier does force admittance against a rigidly
//!   attached end effector; the fine stage is locked.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{StateSpace, TransferFunction};
use crate::plant::{coupled_plant, rigid_plant, AxisPlant};

/// Gains shared by all architectures. The PD fields double as the
/// carrier-side deflection controller in the leader-follower scheme.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControllerSet {
    /// Carrier force-admittance damping, N·s/m.
    pub c_ctrl_f_m: f64,
    /// Fine-stage force-admittance damping, N·s/m.
    pub c_ctrl_f_mu: f64,
    /// Position P gain, (m/s) per m of error.
    pub k_ctrl_x: f64,
    /// Position D gain, dimensionless.
    pub c_ctrl_x: f64,
    /// Derivative filter time constant, s.
    pub t_filter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchitectureKind {
    Proposed,
    LeaderFollower,
    RobotOnly,
}

impl ArchitectureKind {
    pub fn label(self) -> &'static str {
        match self {
            ArchitectureKind::Proposed => "proposed",
            ArchitectureKind::LeaderFollower => "lf",
            ArchitectureKind::RobotOnly => "rb",
        }
    }
}

/// Constant references used when a scenario needs fixed setpoints.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Setpoints {
    /// Desired contact force, N.
    pub f_des: f64,
    /// Desired passive-side deflection, m.
    pub x_tilde_des: f64,
}

/// One architecture instance: plant, wiring choice, gains and setpoints.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub plant: AxisPlant,
    pub kind: ArchitectureKind,
    pub gains: ControllerSet,
    pub setpoints: Setpoints,
}

impl ControllerSet {
    /// Check the fields the given architecture actually uses.
    pub fn validate(&self, kind: ArchitectureKind) -> Result<()> {
        if self.t_filter <= 0.0 {
            return Err(Error::InvalidParameter(
                "derivative filter time constant must be positive".into(),
            ));
        }
        if self.k_ctrl_x < 0.0 || self.c_ctrl_x < 0.0 {
            return Err(Error::InvalidParameter(
                "position gains must be nonnegative".into(),
            ));
        }
        let needs_macro = matches!(
            kind,
            ArchitectureKind::Proposed | ArchitectureKind::RobotOnly
        );
        if needs_macro && !(self.c_ctrl_f_m > 0.0) {
            return Err(Error::InvalidParameter(
                "carrier force damping must be positive".into(),
            ));
        }
        let needs_micro = matches!(
            kind,
            ArchitectureKind::Proposed | ArchitectureKind::LeaderFollower
        );
        if needs_micro && !(self.c_ctrl_f_mu > 0.0) {
            return Err(Error::InvalidParameter(
                "fine-stage force damping must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Carrier force admittance: velocity command per force error.
pub fn macro_force_law(f_err: f64, gains: &ControllerSet) -> f64 {
    f_err / gains.c_ctrl_f_m
}

/// Fine-stage force admittance.
pub fn micro_force_law(f_err: f64, gains: &ControllerSet) -> f64 {
    f_err / gains.c_ctrl_f_mu
}

/// Filtered PD on the deflection error: `k + c·s/(T·s + 1)`.
pub fn micro_position_law_tf(gains: &ControllerSet) -> TransferFunction {
    let t = gains.t_filter;
    TransferFunction::new(
        vec![gains.k_ctrl_x * t + gains.c_ctrl_x, gains.k_ctrl_x],
        vec![t, 1.0],
    )
    .expect("PD filter coefficients are valid")
}

/// Linear closed-loop model for one contact mode.
///
/// Inputs: desired force, desired deflection. Outputs: contact force,
/// passive-side deflection, fine-stage velocity command, carrier velocity
/// command. Saturation is not part of this model; the simulator applies it.
pub fn build_closed_loop(cl: &ClosedLoop, in_contact: bool) -> Result<StateSpace> {
    cl.plant.validate()?;
    cl.gains.validate(cl.kind)?;
    match cl.kind {
        ArchitectureKind::Proposed => build_proposed(cl, in_contact),
        ArchitectureKind::LeaderFollower => build_lf(cl, in_contact),
        ArchitectureKind::RobotOnly => build_rb(cl, in_contact),
    }
}

fn build_proposed(cl: &ClosedLoop, in_contact: bool) -> Result<StateSpace> {
    let p = coupled_plant(&cl.plant, in_contact);
    let g = &cl.gains;
    let n = p.n_states();
    let c_f = p.c.row(3).clone_owned();
    let c_p = p.c.row(2).clone_owned();
    let b_m = p.b.column(0).clone_owned();
    let b_mu = p.b.column(1).clone_owned();

    let inv_cfm = 1.0 / g.c_ctrl_f_m;
    let inv_cfmu = 1.0 / g.c_ctrl_f_mu;
    let kd = g.k_ctrl_x + g.c_ctrl_x / g.t_filter; // P plus unfiltered D share
    let d_t = g.c_ctrl_x / g.t_filter;

    let nn = n + 1; // plant states + derivative filter state
    let mut a = DMatrix::zeros(nn, nn);
    a.view_mut((0, 0), (n, n)).copy_from(&p.a);
    // u_M = (F_des − C_F x)/c_FM
    // u_μ = (F_des − C_F x)/c_Fμ + kd·(x_des − C_p x) − (c_x/T)·φ
    let a_fb = &b_m * (&c_f * (-inv_cfm)) + &b_mu * (&c_f * (-inv_cfmu) - &c_p * kd);
    let mut top = a.view_mut((0, 0), (n, n));
    top += a_fb;
    a.view_mut((0, n), (n, 1)).copy_from(&(&b_mu * (-d_t)));
    let phi_row = &c_p * (-1.0 / g.t_filter);
    a.view_mut((n, 0), (1, n)).copy_from(&phi_row);
    a[(n, n)] = -1.0 / g.t_filter;

    let mut b = DMatrix::zeros(nn, 2);
    let b0 = &b_m * inv_cfm + &b_mu * inv_cfmu;
    b.view_mut((0, 0), (n, 1)).copy_from(&b0);
    b.view_mut((0, 1), (n, 1)).copy_from(&(&b_mu * kd));
    b[(n, 1)] = 1.0 / g.t_filter;

    let mut c = DMatrix::zeros(4, nn);
    c.view_mut((0, 0), (1, n)).copy_from(&c_f);
    c.view_mut((1, 0), (1, n)).copy_from(&c_p);
    let u_mu_row = &c_f * (-inv_cfmu) - &c_p * kd;
    c.view_mut((2, 0), (1, n)).copy_from(&u_mu_row);
    c[(2, n)] = -d_t;
    c.view_mut((3, 0), (1, n)).copy_from(&(&c_f * (-inv_cfm)));

    let mut d = DMatrix::zeros(4, 2);
    d[(2, 0)] = inv_cfmu;
    d[(2, 1)] = kd;
    d[(3, 0)] = inv_cfm;

    StateSpace::new(a, b, c, d)
}

fn build_lf(cl: &ClosedLoop, in_contact: bool) -> Result<StateSpace> {
    let p = coupled_plant(&cl.plant, in_contact);
    let g = &cl.gains;
    let n = p.n_states();
    let c_f = p.c.row(3).clone_owned();
    let c_p = p.c.row(2).clone_owned();
    let b_m = p.b.column(0).clone_owned();
    let b_mu = p.b.column(1).clone_owned();

    let inv_cfmu = 1.0 / g.c_ctrl_f_mu;
    let kd = g.k_ctrl_x + g.c_ctrl_x / g.t_filter;
    let d_t = g.c_ctrl_x / g.t_filter;

    // The carrier follows the deflection: its PD acts on d = x̃_μp − x_des,
    // moving the carrier toward the load so the fine stage can recenter.
    // Acting on the plain error x_des − x̃_μp would push the carrier away
    // from the contact and destabilize the loop.
    let nn = n + 1;
    let mut a = DMatrix::zeros(nn, nn);
    a.view_mut((0, 0), (n, n)).copy_from(&p.a);
    let a_fb = &b_mu * (&c_f * (-inv_cfmu)) + &b_m * (&c_p * kd);
    let mut top = a.view_mut((0, 0), (n, n));
    top += a_fb;
    a.view_mut((0, n), (n, 1)).copy_from(&(&b_m * (-d_t)));
    let phi_row = &c_p * (1.0 / g.t_filter);
    a.view_mut((n, 0), (1, n)).copy_from(&phi_row);
    a[(n, n)] = -1.0 / g.t_filter;

    let mut b = DMatrix::zeros(nn, 2);
    b.view_mut((0, 0), (n, 1)).copy_from(&(&b_mu * inv_cfmu));
    b.view_mut((0, 1), (n, 1)).copy_from(&(&b_m * (-kd)));
    b[(n, 1)] = -1.0 / g.t_filter;

    let mut c = DMatrix::zeros(4, nn);
    c.view_mut((0, 0), (1, n)).copy_from(&c_f);
    c.view_mut((1, 0), (1, n)).copy_from(&c_p);
    c.view_mut((2, 0), (1, n)).copy_from(&(&c_f * (-inv_cfmu)));
    let u_m_row = &c_p * kd;
    c.view_mut((3, 0), (1, n)).copy_from(&u_m_row);
    c[(3, n)] = -d_t;

    let mut d = DMatrix::zeros(4, 2);
    d[(2, 0)] = inv_cfmu;
    d[(3, 1)] = -kd;

    StateSpace::new(a, b, c, d)
}

fn build_rb(cl: &ClosedLoop, in_contact: bool) -> Result<StateSpace> {
    let p = rigid_plant(&cl.plant, in_contact);
    let g = &cl.gains;
    let n = p.n_states();
    let c_f = p.c.row(1).clone_owned();
    let b_m = p.b.column(0).clone_owned();
    let inv_cfm = 1.0 / g.c_ctrl_f_m;

    let mut a = p.a.clone();
    a += &b_m * (&c_f * (-inv_cfm));
    let mut b = DMatrix::zeros(n, 2);
    b.view_mut((0, 0), (n, 1)).copy_from(&(&b_m * inv_cfm));

    let mut c = DMatrix::zeros(4, n);
    c.view_mut((0, 0), (1, n)).copy_from(&c_f);
    // Deflection and fine-stage command rows stay identically zero.
    c.view_mut((3, 0), (1, n)).copy_from(&(&c_f * (-inv_cfm)));

    let mut d = DMatrix::zeros(4, 2);
    d[(3, 0)] = inv_cfm;

    StateSpace::new(a, b, c, d)
}

/// Sample-time controller used by the simulator: the static admittance laws
/// plus an exactly discretized derivative filter.
#[derive(Debug, Clone)]
pub struct DiscreteController {
    kind: ArchitectureKind,
    gains: ControllerSet,
    alpha: f64,
    phi: f64,
}

impl DiscreteController {
    pub fn new(kind: ArchitectureKind, gains: ControllerSet, ts: f64) -> Result<Self> {
        gains.validate(kind)?;
        if ts <= 0.0 {
            return Err(Error::InvalidParameter("sample time must be positive".into()));
        }
        Ok(Self {
            kind,
            gains,
            alpha: (-ts / gains.t_filter).exp(),
            phi: 0.0,
        })
    }

    pub fn reset(&mut self) {
        self.phi = 0.0;
    }

    /// One control step. `e_x` is the deflection error (desired − measured).
    /// Returns unsaturated (carrier, fine-stage) velocity commands.
    pub fn step(&mut self, f_err: f64, e_x: f64) -> (f64, f64) {
        let g = &self.gains;
        match self.kind {
            ArchitectureKind::Proposed => {
                let u_m = f_err / g.c_ctrl_f_m;
                let deriv = g.c_ctrl_x / g.t_filter * (e_x - self.phi);
                let u_mu = f_err / g.c_ctrl_f_mu + g.k_ctrl_x * e_x + deriv;
                self.phi = self.alpha * self.phi + (1.0 - self.alpha) * e_x;
                (u_m, u_mu)
            }
            ArchitectureKind::LeaderFollower => {
                let d = -e_x; // carrier follows the deflection
                let deriv = g.c_ctrl_x / g.t_filter * (d - self.phi);
                let u_m = g.k_ctrl_x * d + deriv;
                self.phi = self.alpha * self.phi + (1.0 - self.alpha) * d;
                let u_mu = f_err / g.c_ctrl_f_mu;
                (u_m, u_mu)
            }
            ArchitectureKind::RobotOnly => (f_err / g.c_ctrl_f_m, 0.0),
        }
    }
}
