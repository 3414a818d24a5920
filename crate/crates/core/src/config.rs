//! Configuration file handling.
//!
//! The file format keeps the units the parameter tables are usually quoted
//! in (Hz, N/mm, mm, kg, mm/s); everything is converted to strict SI when a
//! plant is built. Per-axis values are written as `[x, y, z]` triples.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{
    Axis, AxisPlant, EnvironmentModel, MacroParams, MechanicalParams, MicroActiveParams,
};

/// Which flexure hinge is mounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HingeVariant {
    Low,
    High,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    /// Dimensionless velocity gain per axis.
    pub gain: [f64; 3],
    /// Damping ratio per axis.
    pub damping_ratio: [f64; 3],
    /// Cutoff frequency per axis, Hz.
    pub cutoff_hz: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicalConfig {
    /// Passive-side structural mass, kg.
    pub passive_mass_kg: f64,
    /// Payload mass, kg.
    pub payload_kg: f64,
    /// Hinge damping ratio used to derive c_μ from stiffness and mass.
    pub hinge_damping_ratio: f64,
    /// Explicit hinge damping per axis, N·s/m; overrides the ratio if set.
    #[serde(default)]
    pub hinge_damping_ns_m: Option<[f64; 3]>,
    /// Soft hinge stiffness per axis, N/mm.
    pub hinge_stiffness_n_mm: [f64; 3],
    /// Stiff hinge variant per axis, N/mm.
    pub hinge_stiffness_high_n_mm: [f64; 3],
    /// Half range of motion, mm.
    pub rom_mm: f64,
    /// Fine-stage velocity limit, mm/s.
    pub v_max_mm_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// Contact stiffness per axis, N/mm.
    pub stiffness_n_mm: [f64; 3],
    /// Wall position in the world frame, mm.
    #[serde(default)]
    pub wall_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub k_lf_f: f64,
    pub k_hf_f: f64,
    pub k_lf_x: f64,
    pub k_hf_x: f64,
    pub k_vdot: f64,
    /// Force normalizer, N.
    pub f_des_norm_n: f64,
    /// Position-error normalizer, mm.
    pub x_rom_mm: f64,
    /// Velocity normalizer, mm/s.
    pub v_max_mm_s: f64,
    /// Position-weight crossover, Hz.
    pub omega_co_x_hz: f64,
    /// Starting point of the force-weight crossover search, Hz.
    pub omega_co_f_start_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Sample time, s.
    pub sample_time_s: f64,
    /// Coarse-stage velocity command limit, mm/s.
    pub macro_v_limit_mm_s: f64,
    /// Force measurement noise standard deviation, N.
    pub noise_std_n: f64,
    /// RNG seed for measurement noise.
    pub seed: u64,
    /// Clamp the active-side position state to the mechanical stroke.
    pub rom_clamp: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "macro")]
    pub macro_stage: StageConfig,
    pub micro_active: StageConfig,
    pub mechanical: MechanicalConfig,
    pub environment: EnvironmentConfig,
    pub weights: WeightsConfig,
    pub simulation: SimulationConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            macro_stage: StageConfig {
                gain: [1.25, 1.26, 1.25],
                damping_ratio: [1.0, 1.0, 1.0],
                cutoff_hz: [3.20, 3.19, 3.19],
            },
            micro_active: StageConfig {
                gain: [1.29, 1.30, 1.30],
                damping_ratio: [0.45, 0.45, 0.42],
                cutoff_hz: [26.87, 27.05, 20.71],
            },
            mechanical: MechanicalConfig {
                passive_mass_kg: 0.5,
                payload_kg: 1.5,
                hinge_damping_ratio: 0.1,
                hinge_damping_ns_m: None,
                hinge_stiffness_n_mm: [15.0, 15.0, 20.0],
                hinge_stiffness_high_n_mm: [30.0, 30.0, 40.0],
                rom_mm: 2.5,
                v_max_mm_s: 100.0,
            },
            environment: EnvironmentConfig {
                stiffness_n_mm: [40.0, 30.0, 60.0],
                wall_mm: 0.0,
            },
            weights: WeightsConfig {
                k_lf_f: 100.0,
                k_hf_f: 10.0,
                k_lf_x: 1000.0,
                k_hf_x: 1.0,
                k_vdot: 10.0,
                f_des_norm_n: 20.0,
                x_rom_mm: 2.5,
                v_max_mm_s: 100.0,
                omega_co_x_hz: 0.5,
                omega_co_f_start_hz: 0.1,
            },
            simulation: SimulationConfig {
                sample_time_s: 1e-3,
                macro_v_limit_mm_s: 250.0,
                noise_std_n: 0.0,
                seed: 42,
                rom_clamp: true,
            },
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Assemble the SI plant bundle for one axis and hinge variant.
    pub fn axis_plant(&self, axis: Axis, hinge: HingeVariant) -> Result<AxisPlant> {
        let i = axis.index();
        let macro_stage = MacroParams {
            gain: self.macro_stage.gain[i],
            zeta: self.macro_stage.damping_ratio[i],
            omega_c: 2.0 * PI * self.macro_stage.cutoff_hz[i],
        };
        let micro_active = MicroActiveParams {
            gain: self.micro_active.gain[i],
            zeta: self.micro_active.damping_ratio[i],
            omega_c: 2.0 * PI * self.micro_active.cutoff_hz[i],
        };
        let mech_cfg = &self.mechanical;
        let k_mu_n_mm = match hinge {
            HingeVariant::Low => mech_cfg.hinge_stiffness_n_mm[i],
            HingeVariant::High => mech_cfg.hinge_stiffness_high_n_mm[i],
        };
        let k_mu = k_mu_n_mm * 1e3; // N/mm -> N/m
        let m_total = mech_cfg.passive_mass_kg + mech_cfg.payload_kg;
        let c_mu = match mech_cfg.hinge_damping_ns_m {
            Some(c) => c[i],
            None => 2.0 * mech_cfg.hinge_damping_ratio * (k_mu * m_total).sqrt(),
        };
        let mech = MechanicalParams {
            m_mu_p: mech_cfg.passive_mass_kg,
            m_load: mech_cfg.payload_kg,
            c_mu,
            k_mu,
            rom: mech_cfg.rom_mm * 1e-3,
            v_max: mech_cfg.v_max_mm_s * 1e-3,
        };
        let env = EnvironmentModel {
            k_env: self.environment.stiffness_n_mm[i] * 1e3,
            x_wall: self.environment.wall_mm * 1e-3,
        };
        let plant = AxisPlant {
            macro_stage,
            micro_active,
            mech,
            env,
            axis,
        };
        plant.validate()?;
        Ok(plant)
    }
}
