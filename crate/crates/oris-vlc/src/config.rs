//! JSON run configuration with physical defaults.
//!
//! Every field is optional in the document; omitted values fall back to the
//! default indoor setup: a 4x4x3 m room with four ceiling APs at
//! [1,1], [1,3], [3,1], [3,3], an 80° half-power semi-angle, a 30x5 mirror
//! grid on the upper third of each wall (reflectivity 0.95), a 0.25 m
//! diffuse wall grid (reflectivity 0.4), 1 cm² photodiodes with 0.4 A/W
//! responsivity, 20 MHz bandwidth, and 2.5e-20 W/Hz noise density.
//!
//! Angles and photodiode areas use friendly units here (degrees, cm²);
//! everything is converted to radians and m² on resolution.

use crate::allocation::SolverKind;
use crate::channel::{ChannelError, LinkBudget};
use crate::experiments::{ExperimentConfig, ResultKind, SceneSpec};
use crate::geometry::Vec3;
use crate::scenario::{RoomConfig, UserModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config key '{key}': {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomSection {
    pub width_m: f64,
    pub depth_m: f64,
    pub height_m: f64,
    pub ap_height_m: f64,
    pub ap_xy_m: Vec<[f64; 2]>,
    pub led_half_power_semi_angle_deg: f64,
}

impl Default for RoomSection {
    fn default() -> Self {
        Self {
            width_m: 4.0,
            depth_m: 4.0,
            height_m: 3.0,
            ap_height_m: 3.0,
            ap_xy_m: vec![[1.0, 1.0], [1.0, 3.0], [3.0, 1.0], [3.0, 3.0]],
            led_half_power_semi_angle_deg: 80.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrisSection {
    pub cols: usize,
    pub rows: usize,
    pub band_fraction: f64,
    pub reflectivity: f64,
}

impl Default for OrisSection {
    fn default() -> Self {
        Self {
            cols: 30,
            rows: 5,
            band_fraction: 1.0 / 3.0,
            reflectivity: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallSection {
    pub cell_size_m: f64,
    pub reflectivity: f64,
}

impl Default for WallSection {
    fn default() -> Self {
        Self {
            cell_size_m: 0.25,
            reflectivity: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSection {
    pub pd_area_cm2: f64,
    pub responsivity_a_per_w: f64,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        Self {
            pd_area_cm2: 1.0,
            responsivity_a_per_w: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserSection {
    pub body_height_m: f64,
    pub body_radius_m: f64,
    pub device_offset_m: f64,
    pub device_height_m: f64,
}

impl Default for UserSection {
    fn default() -> Self {
        Self {
            body_height_m: 1.75,
            body_radius_m: 0.15,
            device_offset_m: 0.3,
            device_height_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub total_optical_power_w: f64,
    pub subcarriers: usize,
    pub noise_psd_w_per_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            total_optical_power_w: 1.0,
            subcarriers: 64,
            noise_psd_w_per_hz: 2.5e-20,
            bandwidth_hz: 2e7,
        }
    }
}

/// Sweep controls. Everything is optional: omitted fields take
/// per-subcommand defaults, and command-line flags override file values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: Option<usize>,
    pub fov_deg: Option<Vec<f64>>,
    pub tiers: Option<Vec<u32>>,
    pub oris: Option<bool>,
    pub blockage: Option<bool>,
    pub user_counts: Option<Vec<usize>>,
    pub grid_step_m: Option<f64>,
    pub seed: Option<u64>,
    pub solver: Option<SolverKind>,
    pub jobs: Option<usize>,
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub room: RoomSection,
    pub oris: OrisSection,
    pub wall: WallSection,
    pub receiver: ReceiverSection,
    pub user: UserSection,
    pub power: PowerSection,
    pub experiment: ExperimentSection,
}

/// Parse and validate a JSON configuration document. An empty document
/// yields the full default configuration.
pub fn parse_config(document: &str) -> Result<RunConfig, ConfigError> {
    let text = document.trim();
    let config: RunConfig = if text.is_empty() {
        RunConfig::default()
    } else {
        serde_json::from_str(text)?
    };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &'static str, value: f64| -> Result<(), ConfigError> {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive, got {value}")))
            }
        };
        positive("room.width_m", self.room.width_m)?;
        positive("room.depth_m", self.room.depth_m)?;
        positive("room.height_m", self.room.height_m)?;
        positive("room.ap_height_m", self.room.ap_height_m)?;
        if self.room.ap_height_m > self.room.height_m {
            return Err(invalid("room.ap_height_m", "APs must be inside the room"));
        }
        if self.room.ap_xy_m.is_empty() {
            return Err(invalid("room.ap_xy_m", "at least one AP is required"));
        }
        for &[x, y] in &self.room.ap_xy_m {
            if !(0.0..=self.room.width_m).contains(&x) || !(0.0..=self.room.depth_m).contains(&y)
            {
                return Err(invalid(
                    "room.ap_xy_m",
                    format!("AP at ({x}, {y}) lies outside the room"),
                ));
            }
        }
        let half_angle = self.room.led_half_power_semi_angle_deg;
        if !(half_angle > 0.0 && half_angle < 90.0) {
            return Err(invalid(
                "room.led_half_power_semi_angle_deg",
                format!("must be in (0, 90), got {half_angle}"),
            ));
        }

        if self.oris.cols < 1 || self.oris.rows < 1 {
            return Err(invalid("oris.cols", "grid must be at least 1x1"));
        }
        if !(self.oris.band_fraction > 0.0 && self.oris.band_fraction < 1.0) {
            return Err(invalid(
                "oris.band_fraction",
                format!("must be in (0, 1), got {}", self.oris.band_fraction),
            ));
        }
        if !(self.oris.reflectivity > 0.0 && self.oris.reflectivity <= 1.0) {
            return Err(invalid(
                "oris.reflectivity",
                format!("must be in (0, 1], got {}", self.oris.reflectivity),
            ));
        }
        positive("wall.cell_size_m", self.wall.cell_size_m)?;
        if !(self.wall.reflectivity > 0.0 && self.wall.reflectivity <= 1.0) {
            return Err(invalid(
                "wall.reflectivity",
                format!("must be in (0, 1], got {}", self.wall.reflectivity),
            ));
        }

        positive("receiver.pd_area_cm2", self.receiver.pd_area_cm2)?;
        positive("receiver.responsivity_a_per_w", self.receiver.responsivity_a_per_w)?;
        positive("user.body_height_m", self.user.body_height_m)?;
        positive("user.body_radius_m", self.user.body_radius_m)?;
        positive("user.device_offset_m", self.user.device_offset_m)?;
        positive("user.device_height_m", self.user.device_height_m)?;
        if self.user.device_height_m >= self.room.height_m {
            return Err(invalid(
                "user.device_height_m",
                "device must sit below the ceiling",
            ));
        }
        let margin = 2.0 * (self.user.device_offset_m + self.user.body_radius_m);
        if margin >= self.room.width_m.min(self.room.depth_m) {
            return Err(invalid(
                "user.device_offset_m",
                "body clearance leaves no room for user placement",
            ));
        }

        positive("power.total_optical_power_w", self.power.total_optical_power_w)?;
        positive("power.noise_psd_w_per_hz", self.power.noise_psd_w_per_hz)?;
        positive("power.bandwidth_hz", self.power.bandwidth_hz)?;
        if self.power.subcarriers < 4 || !self.power.subcarriers.is_multiple_of(2) {
            return Err(invalid(
                "power.subcarriers",
                format!("must be even and at least 4, got {}", self.power.subcarriers),
            ));
        }

        if let Some(trials) = self.experiment.trials {
            if trials < 1 {
                return Err(invalid("experiment.trials", "must be at least 1"));
            }
        }
        if let Some(fovs) = &self.experiment.fov_deg {
            for &fov in fovs {
                if !(fov > 0.0 && fov <= 90.0) {
                    return Err(invalid(
                        "experiment.fov_deg",
                        format!("FoV must be in (0, 90] degrees, got {fov}"),
                    ));
                }
            }
        }
        if let Some(tiers) = &self.experiment.tiers {
            for &tier in tiers {
                if tier > 3 {
                    return Err(invalid(
                        "experiment.tiers",
                        format!("tier must be in 0..=3, got {tier}"),
                    ));
                }
            }
        }
        if let Some(step) = self.experiment.grid_step_m {
            positive("experiment.grid_step_m", step)?;
        }
        Ok(())
    }

    /// Build the static scene recipe (radians and m² from here on).
    pub fn scene_spec(&self) -> Result<SceneSpec, ConfigError> {
        let room = RoomConfig {
            width: self.room.width_m,
            depth: self.room.depth_m,
            height: self.room.height_m,
            ap_positions: self
                .room
                .ap_xy_m
                .iter()
                .map(|&[x, y]| Vec3::new(x, y, self.room.ap_height_m))
                .collect(),
            led_half_power_semi_angle: self.room.led_half_power_semi_angle_deg.to_radians(),
        };
        let budget = LinkBudget::new(
            self.power.total_optical_power_w,
            self.power.subcarriers,
            self.power.noise_psd_w_per_hz,
            self.power.bandwidth_hz,
        )?;
        Ok(SceneSpec {
            room,
            oris_cols: self.oris.cols,
            oris_rows: self.oris.rows,
            band_fraction: self.oris.band_fraction,
            oris_reflectivity: self.oris.reflectivity,
            wall_cell_size: self.wall.cell_size_m,
            wall_reflectivity: self.wall.reflectivity,
            user: UserModel {
                body_height: self.user.body_height_m,
                body_radius: self.user.body_radius_m,
                device_offset: self.user.device_offset_m,
                device_height: self.user.device_height_m,
                tiers: 1,
                fov: 45f64.to_radians(),
                pd_area: self.receiver.pd_area_cm2 * 1e-4,
                responsivity: self.receiver.responsivity_a_per_w,
            },
            budget,
        })
    }

    /// Resolve the experiment sweep for one subcommand, filling omitted
    /// fields from that subcommand's defaults, and record the final values
    /// back into the experiment section so the config echo is complete.
    pub fn resolve_experiment(&mut self, kind: ResultKind) -> ExperimentConfig {
        let defaults = ExperimentDefaults::for_kind(kind);
        let experiment = &mut self.experiment;
        let config = ExperimentConfig {
            trials: *experiment.trials.get_or_insert(defaults.trials),
            fov_deg: experiment
                .fov_deg
                .get_or_insert(defaults.fov_deg)
                .clone(),
            tiers: experiment.tiers.get_or_insert(defaults.tiers).clone(),
            oris_enabled: *experiment.oris.get_or_insert(defaults.oris),
            blockage_enabled: *experiment.blockage.get_or_insert(defaults.blockage),
            user_counts: experiment
                .user_counts
                .get_or_insert(defaults.user_counts)
                .clone(),
            grid_step: *experiment.grid_step_m.get_or_insert(defaults.grid_step_m),
            seed: *experiment.seed.get_or_insert(1),
            solver: *experiment.solver.get_or_insert(defaults.solver),
        };
        experiment
            .out
            .get_or_insert_with(|| format!("{}.csv", kind.as_str()));
        config
    }
}

/// Per-subcommand sweep defaults.
pub struct ExperimentDefaults {
    pub trials: usize,
    pub fov_deg: Vec<f64>,
    pub tiers: Vec<u32>,
    pub oris: bool,
    pub blockage: bool,
    pub user_counts: Vec<usize>,
    pub grid_step_m: f64,
    pub solver: SolverKind,
}

impl ExperimentDefaults {
    pub fn for_kind(kind: ResultKind) -> Self {
        match kind {
            ResultKind::Cdf => Self {
                trials: 2000,
                fov_deg: vec![15.0, 45.0, 75.0],
                tiers: vec![0, 1, 2, 3],
                oris: true,
                blockage: false,
                user_counts: vec![1],
                grid_step_m: 0.1,
                solver: SolverKind::Greedy,
            },
            ResultKind::Usage => Self {
                trials: 500,
                fov_deg: vec![15.0, 45.0, 75.0],
                tiers: vec![0, 1, 2, 3],
                oris: true,
                blockage: false,
                user_counts: vec![1],
                grid_step_m: 0.1,
                solver: SolverKind::Greedy,
            },
            ResultKind::Heatmap => Self {
                trials: 1,
                fov_deg: vec![45.0],
                tiers: vec![0, 1],
                oris: true,
                blockage: false,
                user_counts: vec![1],
                grid_step_m: 0.1,
                solver: SolverKind::Greedy,
            },
            ResultKind::SumRate => Self {
                trials: 500,
                fov_deg: vec![45.0],
                tiers: vec![0, 1],
                oris: true,
                blockage: true,
                user_counts: vec![1, 2, 3, 4],
                grid_step_m: 0.1,
                solver: SolverKind::Greedy,
            },
        }
    }
}
