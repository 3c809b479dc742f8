//! Directory layout: `<root>/<map_id>/<channel>/<tile>.png`, with class
//! masks under the ground-truth directory name and an optional
//! `<root>/manifest.json`.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{tile_map, Channel, Channels, FieldMap, MapTiles};
use crate::config::ChannelNames;
use crate::error::{Error, Result};
use crate::io::{read_classmask, read_raster, write_classmask, write_raster_png16};
use crate::raster::ClassMask;

pub const MANIFEST_FILE: &str = "manifest.json";
const EXTENSIONS: [&str; 3] = ["png", "tif", "tiff"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub map_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_angle_deg: Option<f64>,
    pub tiles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_size: Option<usize>,
    /// Overrides the configured channel directory names.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<ChannelNames>,
    pub maps: Vec<MapEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileData {
    pub map_id: String,
    pub tile: String,
    pub channels: Channels,
    pub gt: Option<ClassMask>,
    pub alignment_angle: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    names: ChannelNames,
    manifest: DatasetManifest,
}

/// Numeric stems sort by value, everything else lexicographically after.
fn tile_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

fn list_dir(path: &Path) -> Result<Vec<std::fs::DirEntry>> {
    std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|e| e.map_err(|e| Error::io(path, e)))
        .collect()
}

fn channel_dirs(names: &ChannelNames) -> Vec<(Channel, &str)> {
    let mut dirs = vec![
        (Channel::Red, names.red.as_str()),
        (Channel::Green, names.green.as_str()),
        (Channel::Blue, names.blue.as_str()),
    ];
    if let Some(nir) = &names.nir {
        dirs.push((Channel::Nir, nir.as_str()));
    }
    dirs
}

fn find_tile_file(dir: &Path, tile: &str) -> Option<PathBuf> {
    EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{tile}.{ext}")))
        .find(|p| p.is_file())
}

fn discover_tiles(map_dir: &Path, names: &ChannelNames) -> Result<Vec<String>> {
    let Some(dir) = channel_dirs(names)
        .into_iter()
        .map(|(_, name)| map_dir.join(name))
        .find(|d| d.is_dir())
    else {
        return Err(Error::format(map_dir, "no channel directory found"));
    };
    let mut tiles: Vec<String> = list_dir(&dir)?
        .into_iter()
        .filter_map(|e| {
            let path = e.path();
            let ext = path.extension()?.to_str()?.to_ascii_lowercase();
            if !EXTENSIONS.contains(&ext.as_str()) {
                return None;
            }
            Some(path.file_stem()?.to_str()?.to_owned())
        })
        .collect();
    tiles.sort_by(|a, b| tile_order(a, b));
    Ok(tiles)
}

impl Dataset {
    /// Opens a dataset root. Maps and tiles come from `manifest.json` when
    /// present, otherwise from the directory tree.
    pub fn open(root: &Path, names: &ChannelNames) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
            ));
        }
        let manifest_path = root.join(MANIFEST_FILE);
        let manifest = if manifest_path.is_file() {
            DatasetManifest::load(&manifest_path)?
        } else {
            let mut map_ids: Vec<String> = list_dir(root)?
                .into_iter()
                .filter(|e| e.path().is_dir())
                .filter_map(|e| e.file_name().to_str().map(str::to_owned))
                .collect();
            map_ids.sort_by(|a, b| tile_order(a, b));
            let maps = map_ids
                .into_iter()
                .map(|map_id| {
                    let tiles = discover_tiles(&root.join(&map_id), names)?;
                    Ok(MapEntry {
                        map_id,
                        alignment_angle_deg: None,
                        tiles,
                    })
                })
                .collect::<Result<_>>()?;
            DatasetManifest {
                tile_size: None,
                channels: None,
                maps,
            }
        };
        let names = manifest.channels.clone().unwrap_or_else(|| names.clone());
        Ok(Self {
            root: root.to_owned(),
            names,
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn names(&self) -> &ChannelNames {
        &self.names
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn maps(&self) -> &[MapEntry] {
        &self.manifest.maps
    }

    pub fn map(&self, map_id: &str) -> Option<&MapEntry> {
        self.manifest.maps.iter().find(|m| m.map_id == map_id)
    }

    pub fn map_tiles(&self) -> Vec<MapTiles> {
        self.manifest
            .maps
            .iter()
            .map(|m| MapTiles {
                map_id: m.map_id.clone(),
                tiles: m.tiles.clone(),
            })
            .collect()
    }

    pub fn groundtruth_path(&self, map_id: &str, tile: &str) -> Option<PathBuf> {
        find_tile_file(&self.root.join(map_id).join(&self.names.groundtruth), tile)
    }

    /// Loads every configured channel whose directory exists for the map,
    /// plus the class mask when one is present.
    pub fn load_tile(&self, map_id: &str, tile: &str) -> Result<TileData> {
        let entry = self
            .map(map_id)
            .ok_or_else(|| Error::InvalidParam(format!("unknown map {map_id}")))?;
        let map_dir = self.root.join(map_id);
        let mut channels = Channels::new();
        for (channel, name) in channel_dirs(&self.names) {
            let dir = map_dir.join(name);
            if !dir.is_dir() {
                continue;
            }
            let path = find_tile_file(&dir, tile).ok_or_else(|| {
                Error::io(
                    dir.join(format!("{tile}.png")),
                    std::io::Error::new(std::io::ErrorKind::NotFound, "tile file missing"),
                )
            })?;
            channels.insert(channel, read_raster(&path)?);
        }
        if channels.is_empty() {
            return Err(Error::format(&map_dir, "no channel directory found"));
        }
        let gt = self.groundtruth_path(map_id, tile).map(|p| read_classmask(&p)).transpose()?;
        // Validates that all channels and the mask agree in size.
        let map = FieldMap::new(map_id, channels, gt, entry.alignment_angle_deg)?;
        Ok(TileData {
            map_id: map.map_id,
            tile: tile.to_owned(),
            channels: map.channels,
            gt: map.gt,
            alignment_angle: map.alignment_angle,
        })
    }
}

/// Tiles `map` and writes each tile's channels (16-bit PNG) and class mask
/// under `root`. Returns the manifest entry for the map.
pub fn write_map_tiles(root: &Path, map: &FieldMap, tile_size: usize, names: &ChannelNames) -> Result<MapEntry> {
    let tiles = tile_map(map, tile_size)?;
    let map_dir = root.join(&map.map_id);
    let dirs = channel_dirs(names);
    let mut ids = Vec::with_capacity(tiles.len());
    for tile in &tiles {
        let id = tile.id();
        for (channel, raster) in &tile.channels {
            let Some((_, name)) = dirs.iter().find(|(c, _)| c == channel) else {
                continue;
            };
            write_raster_png16(&map_dir.join(name).join(format!("{id}.png")), raster)?;
        }
        if let Some(gt) = &tile.gt {
            write_classmask(&map_dir.join(&names.groundtruth).join(format!("{id}.png")), gt)?;
        }
        ids.push(id);
    }
    Ok(MapEntry {
        map_id: map.map_id.clone(),
        alignment_angle_deg: map.alignment_angle,
        tiles: ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic_field, SyntheticFieldSpec};

    #[test]
    fn tile_ordering_is_natural() {
        let mut v = vec!["10", "2", "b", "1", "a"];
        v.sort_by(|a, b| tile_order(a, b));
        assert_eq!(v, vec!["1", "2", "10", "a", "b"]);
    }

    #[test]
    fn written_maps_reload() {
        let dir = tempfile::tempdir().unwrap();
        let names = ChannelNames::default();
        let field = generate_synthetic_field(&SyntheticFieldSpec {
            width: 128,
            height: 96,
            n_rows: 2,
            row_spacing: 40.0,
            n_inter_row_weeds: 3,
            ..Default::default()
        })
        .unwrap();
        let mut map = field.map.clone();
        map.map_id = "000".into();
        let entry = write_map_tiles(dir.path(), &map, 32, &names).unwrap();
        assert_eq!(entry.tiles.len(), 12);

        // Without a manifest the tree is discovered.
        let ds = Dataset::open(dir.path(), &names).unwrap();
        assert_eq!(ds.maps().len(), 1);
        assert_eq!(ds.maps()[0].tiles, entry.tiles);
        let tile = ds.load_tile("000", "5").unwrap();
        assert_eq!(tile.channels.len(), 4);
        let expected = &tile_map(&map, 32).unwrap()[5];
        assert_eq!(tile.gt, expected.gt);
        for (ch, raster) in &tile.channels {
            for (a, b) in raster.values().iter().zip(expected.channels[ch].values()) {
                assert!((a - b).abs() < 1e-4);
            }
        }

        // The manifest carries the per-map angle.
        DatasetManifest {
            tile_size: Some(32),
            channels: None,
            maps: vec![entry],
        }
        .save(&dir.path().join(MANIFEST_FILE))
        .unwrap();
        let ds = Dataset::open(dir.path(), &names).unwrap();
        assert_eq!(ds.load_tile("000", "0").unwrap().alignment_angle, Some(0.0));
        assert!(ds.load_tile("001", "0").is_err());
        assert!(matches!(ds.load_tile("000", "99"), Err(Error::Io { .. })));
    }
}
