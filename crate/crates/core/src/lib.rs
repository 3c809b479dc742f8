//! Row-guided crop/weed pseudo-labelling for multispectral field imagery.

pub mod config;
pub mod dataset;
pub mod error;
pub mod hough;
pub mod instances;
pub mod io;
pub mod ks;
pub mod metrics;
pub mod pseudo;
pub mod raster;
pub mod render;
pub mod rows;
pub mod slic;
pub mod vegetation;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use hough::{hough_lines, HoughLine, HoughParams};
pub use instances::{connected_components, PlantInstance};
pub use metrics::{confusion, f1_scores, row_partitioned_f1, ConfusionMatrix, EvalReport, F1Scores};
pub use pseudo::{build_pseudo_gt, classify_instances, PseudoLabelResult, TileLabeling};
pub use raster::{BinaryMask, Class, ClassMask, Raster};
pub use rows::{filter_lines, rasterize_rows, RowDetection};
