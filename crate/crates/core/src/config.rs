//! TOML configuration covering every tunable, one section per module.
//! Unknown keys are rejected so typos fail loudly; every field has a
//! default and `dump` emits the fully resolved document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attention::{AttentionConfig, SkinBox, MAP_COUNT};
use crate::error::{Error, Result};
use crate::grasp::{FingerPlant, GraspConfig};
use crate::hand::{Camera, DatasetSpec, PoseLimits};
use crate::hierarchy::HierarchyConfig;
use crate::llm::TrainConfig;
use crate::psom::InvertConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Global RNG seed; per-module seeds derive from it.
    pub seed: u64,
    pub dataset: DatasetSection,
    pub hierarchy: HierarchySection,
    pub psom: PsomSection,
    pub attention: AttentionSection,
    pub grasp: GraspSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            dataset: DatasetSection::default(),
            hierarchy: HierarchySection::default(),
            psom: PsomSection::default(),
            attention: AttentionSection::default(),
            grasp: GraspSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub width: usize,
    pub height: usize,
    pub blur_sigma: f64,
    pub camera_scale: f64,
    pub camera_offset: [f64; 2],
    pub theta_max: f64,
    pub phi_max: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let spec = DatasetSpec::default();
        DatasetSection {
            width: spec.width,
            height: spec.height,
            blur_sigma: spec.blur_sigma,
            camera_scale: spec.camera.scale,
            camera_offset: spec.camera.offset,
            theta_max: spec.limits.theta_max,
            phi_max: spec.limits.phi_max,
        }
    }
}

impl DatasetSection {
    pub fn to_spec(&self) -> DatasetSpec {
        let mut spec = DatasetSpec::default();
        spec.width = self.width;
        spec.height = self.height;
        spec.blur_sigma = self.blur_sigma;
        spec.camera = Camera {
            scale: self.camera_scale,
            offset: self.camera_offset,
        };
        spec.limits = PoseLimits {
            theta_max: self.theta_max,
            phi_max: self.phi_max,
        };
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchySection {
    pub global_grid: [usize; 2],
    pub local_grid: [usize; 2],
    pub half_size: usize,
    pub global_k: usize,
    pub local_k: usize,
    pub epochs: usize,
    pub rate_start: f64,
    pub rate_end: f64,
    pub global_ridge: f64,
    pub local_ridge: f64,
    /// Fusion confidence-bump radius, pixels.
    pub sigma_conf: f64,
}

impl Default for HierarchySection {
    fn default() -> Self {
        let cfg = HierarchyConfig::default();
        HierarchySection {
            global_grid: [cfg.global_grid.0, cfg.global_grid.1],
            local_grid: [cfg.local_grid.0, cfg.local_grid.1],
            half_size: cfg.half_size,
            global_k: cfg.global_train.k,
            local_k: cfg.local_train.k,
            epochs: cfg.global_train.epochs,
            rate_start: cfg.global_train.rate_start,
            rate_end: cfg.global_train.rate_end,
            global_ridge: cfg.global_train.ridge,
            local_ridge: cfg.local_train.ridge,
            sigma_conf: 2.0,
        }
    }
}

impl HierarchySection {
    pub fn to_hierarchy_config(&self, dataset: &DatasetSection, seed: u64) -> HierarchyConfig {
        let train = |k: usize, ridge: f64, seed: u64| TrainConfig {
            k,
            epochs: self.epochs,
            rate_start: self.rate_start,
            rate_end: self.rate_end,
            ridge,
            seed,
        };
        HierarchyConfig {
            width: dataset.width,
            height: dataset.height,
            global_grid: (self.global_grid[0], self.global_grid[1]),
            local_grid: (self.local_grid[0], self.local_grid[1]),
            half_size: self.half_size,
            global_train: train(self.global_k, self.global_ridge, seed),
            local_train: train(self.local_k, self.local_ridge, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsomSection {
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for PsomSection {
    fn default() -> Self {
        let cfg = InvertConfig::default();
        PsomSection {
            max_iters: cfg.max_iters,
            grad_tol: cfg.grad_tol,
        }
    }
}

impl PsomSection {
    pub fn to_invert_config(&self) -> InvertConfig {
        InvertConfig {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttentionSection {
    pub weights: [f64; MAP_COUNT],
    pub sigma: f64,
    pub amplitude: f64,
    pub sigma_f: f64,
    pub rho: f64,
    pub lambda_decay: f64,
    pub snap_threshold: f64,
    pub skin_hue_lo: f64,
    pub skin_hue_hi: f64,
    pub skin_sat_min: f64,
    pub border_margin: usize,
}

impl Default for AttentionSection {
    fn default() -> Self {
        let cfg = AttentionConfig::default();
        AttentionSection {
            weights: cfg.weights,
            sigma: cfg.sigma,
            amplitude: cfg.amplitude,
            sigma_f: cfg.sigma_f,
            rho: cfg.rho,
            lambda_decay: cfg.lambda_decay,
            snap_threshold: cfg.snap_threshold,
            skin_hue_lo: cfg.skin.hue_lo,
            skin_hue_hi: cfg.skin.hue_hi,
            skin_sat_min: cfg.skin.sat_min,
            border_margin: cfg.border_margin,
        }
    }
}

impl AttentionSection {
    pub fn to_attention_config(&self) -> AttentionConfig {
        AttentionConfig {
            weights: self.weights,
            sigma: self.sigma,
            amplitude: self.amplitude,
            sigma_f: self.sigma_f,
            rho: self.rho,
            lambda_decay: self.lambda_decay,
            snap_threshold: self.snap_threshold,
            skin: SkinBox {
                hue_lo: self.skin_hue_lo,
                hue_hi: self.skin_hue_hi,
                sat_min: self.skin_sat_min,
            },
            border_margin: self.border_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraspSection {
    pub dt: f64,
    pub duration: f64,
    pub grasp_at: f64,
    pub release_at: Option<f64>,
    pub disturb_from: f64,
    pub disturb_to: f64,
    pub disturb_force: f64,
    pub contact_threshold: f64,
    pub comply_excess: f64,
    pub preshape_eps: f64,
    pub open_eps: f64,
    pub rest_position: f64,
    pub preshape_position: f64,
    pub close_position: f64,
    pub hold_force: f64,
    pub comply_force: f64,
    pub w_position: f64,
    pub w_force: f64,
    pub plant_contact: f64,
    pub plant_stiffness: f64,
    pub plant_damping: f64,
    pub plant_gain: f64,
    pub plant_hysteresis: f64,
}

impl Default for GraspSection {
    fn default() -> Self {
        let cfg = GraspConfig::default();
        let plant = FingerPlant::default();
        GraspSection {
            dt: cfg.dt,
            duration: cfg.duration,
            grasp_at: cfg.grasp_at,
            release_at: cfg.release_at,
            disturb_from: cfg.disturb_from,
            disturb_to: cfg.disturb_to,
            disturb_force: cfg.disturb_force,
            contact_threshold: cfg.contact_threshold,
            comply_excess: cfg.comply_excess,
            preshape_eps: cfg.preshape_eps,
            open_eps: cfg.open_eps,
            rest_position: cfg.rest_position,
            preshape_position: cfg.preshape_position,
            close_position: cfg.close_position,
            hold_force: cfg.hold_force,
            comply_force: cfg.comply_force,
            w_position: cfg.w_position,
            w_force: cfg.w_force,
            plant_contact: plant.contact,
            plant_stiffness: plant.stiffness,
            plant_damping: plant.damping,
            plant_gain: plant.gain,
            plant_hysteresis: plant.hysteresis,
        }
    }
}

impl GraspSection {
    pub fn to_grasp_config(&self) -> GraspConfig {
        GraspConfig {
            dt: self.dt,
            duration: self.duration,
            grasp_at: self.grasp_at,
            release_at: self.release_at,
            disturb_from: self.disturb_from,
            disturb_to: self.disturb_to,
            disturb_force: self.disturb_force,
            contact_threshold: self.contact_threshold,
            comply_excess: self.comply_excess,
            preshape_eps: self.preshape_eps,
            open_eps: self.open_eps,
            rest_position: self.rest_position,
            preshape_position: self.preshape_position,
            close_position: self.close_position,
            hold_force: self.hold_force,
            comply_force: self.comply_force,
            w_position: self.w_position,
            w_force: self.w_force,
        }
    }

    pub fn to_plant(&self) -> FingerPlant {
        FingerPlant {
            position: 0.0,
            velocity: 0.0,
            contact: self.plant_contact,
            stiffness: self.plant_stiffness,
            damping: self.plant_damping,
            gain: self.plant_gain,
            hysteresis: self.plant_hysteresis,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, location: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::parse(location.to_string(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_toml(&text, &path.display().to_string())
    }

    /// The fully resolved document, every default included.
    pub fn dump(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
