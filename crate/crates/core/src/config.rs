//! Pipeline configuration. Defaults are the published parameter set:
//! vegetation threshold 0.1, Hough threshold 160, KS alpha 0.1, SLIC cluster
//! coefficient 0.005 with compactness 20 and sigma 1, 512-pixel tiles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hough::HoughParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VegetationIndex {
    Ndvi,
    Exg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceMethod {
    Cc,
    Slic,
}

/// Directory names of each channel inside a map directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelNames {
    pub red: String,
    pub green: String,
    pub blue: String,
    pub nir: Option<String>,
    pub groundtruth: String,
}

impl Default for ChannelNames {
    fn default() -> Self {
        Self {
            red: "R".into(),
            green: "G".into(),
            blue: "B".into(),
            nir: Some("NIR".into()),
            groundtruth: "groundtruth".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VegetationConfig {
    pub index: VegetationIndex,
    pub threshold: f32,
}

impl Default for VegetationConfig {
    fn default() -> Self {
        Self {
            index: VegetationIndex::Ndvi,
            threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoughConfig {
    pub threshold: u32,
    pub theta_step_deg: f64,
    pub rho_step_px: f64,
}

impl Default for HoughConfig {
    fn default() -> Self {
        Self {
            threshold: 160,
            theta_step_deg: 1.0,
            rho_step_px: 1.0,
        }
    }
}

impl HoughConfig {
    pub fn params(&self) -> HoughParams {
        HoughParams {
            theta_step: self.theta_step_deg,
            rho_step: self.rho_step_px,
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KsConfig {
    pub alpha: f64,
}

impl Default for KsConfig {
    fn default() -> Self {
        Self { alpha: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RowsConfig {
    pub thickness_px: usize,
}

impl Default for RowsConfig {
    fn default() -> Self {
        Self { thickness_px: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    pub source: InstanceMethod,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            source: InstanceMethod::Cc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlicConfig {
    /// Clusters per pixel: `n = floor(coefficient · H · W)`.
    pub cluster_coefficient: f64,
    pub compactness: f64,
    pub sigma: f64,
}

impl Default for SlicConfig {
    fn default() -> Self {
        Self {
            cluster_coefficient: 0.005,
            compactness: 20.0,
            sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignmentConfig {
    /// Fixed rotation for every tile. When absent the per-map angle from the
    /// dataset manifest is used, and failing that one is estimated per tile.
    pub angle_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub channels: ChannelNames,
    pub vegetation: VegetationConfig,
    pub hough: HoughConfig,
    pub ks: KsConfig,
    pub rows: RowsConfig,
    pub instances: InstanceConfig,
    pub slic: SlicConfig,
    pub alignment: AlignmentConfig,
    pub tile_size: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            channels: ChannelNames::default(),
            vegetation: VegetationConfig::default(),
            hough: HoughConfig::default(),
            ks: KsConfig::default(),
            rows: RowsConfig::default(),
            instances: InstanceConfig::default(),
            slic: SlicConfig::default(),
            alignment: AlignmentConfig::default(),
            tile_size: 512,
            seed: 42,
        }
    }
}

fn check(ok: bool, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(message()))
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.vegetation;
        check(v.threshold.is_finite() && (-2.0..=2.0).contains(&v.threshold), || {
            format!("vegetation.threshold must be in [-2, 2], got {}", v.threshold)
        })?;
        let h = &self.hough;
        check(h.threshold >= 1, || "hough.threshold must be at least 1".into())?;
        check(h.theta_step_deg > 0.0 && h.theta_step_deg <= 90.0, || {
            format!("hough.theta_step_deg must be in (0, 90], got {}", h.theta_step_deg)
        })?;
        check(h.rho_step_px > 0.0 && h.rho_step_px.is_finite(), || {
            format!("hough.rho_step_px must be positive, got {}", h.rho_step_px)
        })?;
        check(self.ks.alpha > 0.0 && self.ks.alpha < 1.0, || {
            format!("ks.alpha must be in (0, 1), got {}", self.ks.alpha)
        })?;
        check(self.rows.thickness_px >= 1, || "rows.thickness_px must be at least 1".into())?;
        let s = &self.slic;
        check(s.cluster_coefficient > 0.0 && s.cluster_coefficient <= 1.0, || {
            format!("slic.cluster_coefficient must be in (0, 1], got {}", s.cluster_coefficient)
        })?;
        check(s.compactness >= 0.0 && s.compactness.is_finite(), || {
            format!("slic.compactness must be non-negative, got {}", s.compactness)
        })?;
        check(s.sigma >= 0.0 && s.sigma.is_finite(), || {
            format!("slic.sigma must be non-negative, got {}", s.sigma)
        })?;
        if let Some(a) = self.alignment.angle_deg {
            check(a.is_finite() && a > -180.0 && a <= 180.0, || {
                format!("alignment.angle_deg must be in (-180, 180], got {a}")
            })?;
        }
        check(self.tile_size >= 1, || "tile_size must be at least 1".into())?;
        if self.vegetation.index == VegetationIndex::Ndvi {
            check(self.channels.nir.is_some(), || {
                "vegetation.index is ndvi but no NIR channel is configured".into()
            })?;
        }
        Ok(())
    }
}
