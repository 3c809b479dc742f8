use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use roweeder_core::config::{InstanceMethod, PipelineConfig, VegetationIndex};

#[derive(Debug, Parser)]
#[command(name = "roweeder", version, about = "Crop-row pseudo-labelling and evaluation for field imagery")]
pub struct Cli {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Worker threads for tile-level parallelism. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IndexArg {
    Ndvi,
    Exg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InstancesArg {
    Cc,
    Slic,
}

/// Pipeline configuration: a JSON file plus per-parameter overrides.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// JSON pipeline configuration; absent keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "ROWEEDER_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub vegetation_index: Option<IndexArg>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub vegetation_threshold: Option<f32>,
    #[arg(long, global = true)]
    pub hough_threshold: Option<u32>,
    #[arg(long, global = true)]
    pub ks_alpha: Option<f64>,
    #[arg(long, global = true)]
    pub row_thickness: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub instances: Option<InstancesArg>,
    /// Fixed alignment rotation in degrees for every tile.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub angle: Option<f64>,
    #[arg(long, global = true)]
    pub tile_size: Option<usize>,
}

impl PipelineArgs {
    pub fn resolve(&self) -> roweeder_core::Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(index) = self.vegetation_index {
            config.vegetation.index = match index {
                IndexArg::Ndvi => VegetationIndex::Ndvi,
                IndexArg::Exg => VegetationIndex::Exg,
            };
        }
        if let Some(t) = self.vegetation_threshold {
            config.vegetation.threshold = t;
        }
        if let Some(t) = self.hough_threshold {
            config.hough.threshold = t;
        }
        if let Some(a) = self.ks_alpha {
            config.ks.alpha = a;
        }
        if let Some(t) = self.row_thickness {
            config.rows.thickness_px = t;
        }
        if let Some(m) = self.instances {
            config.instances.source = match m {
                InstancesArg::Cc => InstanceMethod::Cc,
                InstancesArg::Slic => InstanceMethod::Slic,
            };
        }
        if let Some(a) = self.angle {
            config.alignment.angle_deg = Some(a);
        }
        if let Some(t) = self.tile_size {
            config.tile_size = t;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tile full-size channel rasters of one map into a dataset root.
    Ingest(IngestArgs),
    /// Generate synthetic field maps with exact ground truth.
    Synth(SynthArgs),
    /// Write pseudo-label and row masks for every tile of a dataset.
    PseudoLabel(PseudoLabelArgs),
    /// Score predicted masks against ground truth.
    Evaluate(EvaluateArgs),
    /// Draw labels and rows over a tile's colour composite.
    Render(RenderArgs),
    /// Print leave-one-map-out cross-validation folds.
    Folds(FoldsArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub map_id: String,
    /// Channel raster as NAME=PATH with NAME one of R, G, B, NIR. Repeatable.
    #[arg(long = "channel", required = true)]
    pub channels: Vec<String>,
    /// Ground-truth class mask for the whole map.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Rotation that makes this map's rows horizontal.
    #[arg(long = "map-angle", allow_negative_numbers = true)]
    pub map_angle: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// JSON synthetic field description; flags below override it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of maps; map k is generated from seed + k.
    #[arg(long, default_value_t = 1)]
    pub maps: usize,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub row_angle: Option<f64>,
    #[arg(long)]
    pub row_spacing: Option<f64>,
    #[arg(long)]
    pub inter_row_weeds: Option<usize>,
    #[arg(long)]
    pub intra_row_weeds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PseudoLabelArgs {
    /// Dataset root.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict to these map ids (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub maps: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions as `<pred>/<map>/<tile>_pseudo.png` or `<pred>/<map>/<tile>.png`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Dataset root holding the ground truth.
    #[arg(long)]
    pub gt: PathBuf,
    /// Row masks as `<rows>/<map>/<tile>_rows.png`; defaults to the prediction directory.
    #[arg(long)]
    pub rows: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub maps: Vec<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub map: String,
    #[arg(long)]
    pub tile: String,
    /// Class mask to draw.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Row mask to draw.
    #[arg(long)]
    pub rows: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FoldsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Include every map, not only the default cross-validation set.
    #[arg(long)]
    pub all_maps: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
