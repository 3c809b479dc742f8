//! Field maps, tiling, cross-validation folds, on-disk layout, and the
//! synthetic field generator.

mod layout;
mod synth;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::raster::{ClassMask, Raster};

pub use layout::{write_map_tiles, Dataset, DatasetManifest, MapEntry, TileData, MANIFEST_FILE};
pub use synth::{generate_synthetic_field, SyntheticField, SyntheticFieldSpec, WeedBlob, WeedKind};

/// Maps of the Rheinbach subset, the default cross-validation set.
pub const RHEINBACH_MAPS: [&str; 5] = ["000", "001", "002", "003", "004"];
/// Maps of the Eschikon subset; ingestible but left out of default folds.
pub const ESCHIKON_MAPS: [&str; 3] = ["005", "006", "007"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "R")]
    Red,
    #[serde(rename = "G")]
    Green,
    #[serde(rename = "B")]
    Blue,
    #[serde(rename = "NIR")]
    Nir,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Red, Channel::Green, Channel::Blue, Channel::Nir];

    pub fn parse(name: &str) -> Option<Channel> {
        match name.to_ascii_uppercase().as_str() {
            "R" | "RED" => Some(Channel::Red),
            "G" | "GREEN" => Some(Channel::Green),
            "B" | "BLUE" => Some(Channel::Blue),
            "NIR" => Some(Channel::Nir),
            _ => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Channel::Red => "R",
            Channel::Green => "G",
            Channel::Blue => "B",
            Channel::Nir => "NIR",
        }
    }
}

pub type Channels = BTreeMap<Channel, Raster>;

fn common_dims(channels: &Channels) -> Result<(usize, usize)> {
    let mut iter = channels.values();
    let first = iter.next().ok_or(Error::EmptyInput)?.dims();
    for raster in iter {
        check_dims(first, raster.dims())?;
    }
    Ok(first)
}

/// One orthomosaic: co-registered channels plus optional annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub map_id: String,
    pub channels: Channels,
    pub gt: Option<ClassMask>,
    /// Rotation that makes this field's crop rows horizontal.
    pub alignment_angle: Option<f64>,
}

impl FieldMap {
    pub fn new(
        map_id: impl Into<String>,
        channels: Channels,
        gt: Option<ClassMask>,
        alignment_angle: Option<f64>,
    ) -> Result<Self> {
        let dims = common_dims(&channels)?;
        if let Some(gt) = &gt {
            check_dims(dims, gt.dims())?;
        }
        Ok(Self {
            map_id: map_id.into(),
            channels,
            gt,
            alignment_angle,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        common_dims(&self.channels).expect("validated at construction")
    }
}

/// A square window of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub map_id: String,
    /// Raster-order index within the map's tile grid; also the tile's file stem.
    pub index: usize,
    pub grid_row: usize,
    pub grid_col: usize,
    pub channels: Channels,
    pub gt: Option<ClassMask>,
    pub alignment_angle: Option<f64>,
}

impl Tile {
    pub fn id(&self) -> String {
        self.index.to_string()
    }
}

/// Cuts `map` into non-overlapping `tile_size` squares in raster order,
/// dropping trailing partial strips.
pub fn tile_map(map: &FieldMap, tile_size: usize) -> Result<Vec<Tile>> {
    if tile_size == 0 {
        return Err(Error::InvalidParam("tile_size must be at least 1".into()));
    }
    let (width, height) = map.dims();
    let (cols, rows) = (width / tile_size, height / tile_size);
    let mut tiles = Vec::with_capacity(rows * cols);
    for grid_row in 0..rows {
        for grid_col in 0..cols {
            let (r0, c0) = (grid_row * tile_size, grid_col * tile_size);
            let channels = map
                .channels
                .iter()
                .map(|(&ch, raster)| Ok((ch, raster.crop(r0, c0, tile_size, tile_size)?)))
                .collect::<Result<Channels>>()?;
            let gt = map
                .gt
                .as_ref()
                .map(|gt| gt.crop(r0, c0, tile_size, tile_size))
                .transpose()?;
            tiles.push(Tile {
                map_id: map.map_id.clone(),
                index: tiles.len(),
                grid_row,
                grid_col,
                channels,
                gt,
                alignment_angle: map.alignment_angle,
            });
        }
    }
    Ok(tiles)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TileRef {
    pub map_id: String,
    pub tile: String,
}

/// Tiles available for one map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapTiles {
    pub map_id: String,
    pub tiles: Vec<String>,
}

/// Leave-one-map-out split; the remaining maps' tiles are pooled and
/// shuffled into train and validation parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub test_map: String,
    pub train_maps: Vec<String>,
    pub val_fraction: f64,
    pub train_tiles: Vec<TileRef>,
    pub val_tiles: Vec<TileRef>,
}

/// One fold per map. The validation share is `floor(val_fraction · pooled)`.
pub fn build_folds(maps: &[MapTiles], val_fraction: f64, seed: u64) -> Result<Vec<FoldSplit>> {
    if maps.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 maps for cross-validation, got {}",
            maps.len()
        )));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "val_fraction must be in (0, 1), got {val_fraction}"
        )));
    }
    let mut ids: Vec<&str> = maps.iter().map(|m| m.map_id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParam("duplicate map ids".into()));
    }

    let mut folds = Vec::with_capacity(maps.len());
    for (k, test) in maps.iter().enumerate() {
        let train_maps: Vec<String> = maps
            .iter()
            .filter(|m| m.map_id != test.map_id)
            .map(|m| m.map_id.clone())
            .collect();
        let mut pooled: Vec<TileRef> = maps
            .iter()
            .filter(|m| m.map_id != test.map_id)
            .flat_map(|m| {
                m.tiles.iter().map(|t| TileRef {
                    map_id: m.map_id.clone(),
                    tile: t.clone(),
                })
            })
            .collect();
        pooled.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        pooled.shuffle(&mut rng);
        let n_val = (val_fraction * pooled.len() as f64).floor() as usize;
        let train_tiles = pooled.split_off(n_val);
        folds.push(FoldSplit {
            test_map: test.map_id.clone(),
            train_maps,
            val_fraction,
            train_tiles,
            val_tiles: pooled,
        });
    }
    Ok(folds)
}

/// The maps used for default folds: Rheinbach maps when any are present,
/// otherwise everything except the Eschikon maps.
pub fn default_fold_maps(maps: &[MapTiles]) -> Vec<MapTiles> {
    maps.iter()
        .filter(|m| !ESCHIKON_MAPS.contains(&m.map_id.as_str()))
        .cloned()
        .collect()
}
