use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use roweeder_core::config::PipelineConfig;
use roweeder_core::dataset::{
    build_folds, default_fold_maps, generate_synthetic_field, write_map_tiles, Channel, Channels, Dataset,
    DatasetManifest, FieldMap, MapEntry, SyntheticFieldSpec, WeedBlob, MANIFEST_FILE,
};
use roweeder_core::hough::HoughLine;
use roweeder_core::io::{read_binary_mask, read_classmask, read_raster, write_binary_mask, write_classmask, write_rgb};
use roweeder_core::metrics::{row_partitioned_confusion, EvalReport, TileEval};
use roweeder_core::pseudo::{build_pseudo_gt, AngleSource};
use roweeder_core::raster::Class;
use roweeder_core::render::{composite, overlay};
use roweeder_core::Error;

use crate::args::{EvaluateArgs, FoldsArgs, IngestArgs, PseudoLabelArgs, RenderArgs, SynthArgs};

pub const PSEUDO_SUFFIX: &str = "_pseudo.png";
pub const ROWS_SUFFIX: &str = "_rows.png";
pub const RUN_FILE: &str = "run.json";
pub const TRUTH_FILE: &str = "truth.json";

pub struct Session {
    pub config: PipelineConfig,
    pub pool: rayon::ThreadPool,
}

fn emit_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn select_maps<'a>(ds: &'a Dataset, wanted: &[String]) -> Result<Vec<&'a MapEntry>> {
    if wanted.is_empty() {
        return Ok(ds.maps().iter().collect());
    }
    wanted
        .iter()
        .map(|id| {
            ds.map(id)
                .ok_or_else(|| Error::InvalidParam(format!("map {id} not found in {}", ds.root().display())).into())
        })
        .collect()
}

pub fn ingest(ctx: &Session, args: &IngestArgs) -> Result<()> {
    let config = &ctx.config;
    let mut channels = Channels::new();
    for spec in &args.channels {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidParam(format!("--channel expects NAME=PATH, got {spec}")))?;
        let channel =
            Channel::parse(name).ok_or_else(|| Error::InvalidParam(format!("unknown channel name {name}")))?;
        if channels.insert(channel, read_raster(Path::new(path))?).is_some() {
            return Err(Error::InvalidParam(format!("channel {name} given twice")).into());
        }
    }
    let gt = args.gt.as_deref().map(read_classmask).transpose()?;
    let map = FieldMap::new(args.map_id.clone(), channels, gt, args.map_angle)?;
    let entry = write_map_tiles(&args.out, &map, config.tile_size, &config.channels)?;
    if entry.tiles.is_empty() {
        return Err(Error::InvalidParam(format!(
            "map {} is smaller than one {}-pixel tile",
            args.map_id, config.tile_size
        ))
        .into());
    }

    let manifest_path = args.out.join(MANIFEST_FILE);
    let mut manifest = if manifest_path.is_file() {
        DatasetManifest::load(&manifest_path)?
    } else {
        DatasetManifest::default()
    };
    if let Some(size) = manifest.tile_size.filter(|&s| s != config.tile_size) {
        return Err(Error::Config(format!(
            "dataset was tiled at {size} px but tile_size is {}",
            config.tile_size
        ))
        .into());
    }
    manifest.tile_size = Some(config.tile_size);
    manifest.maps.retain(|m| m.map_id != entry.map_id);
    manifest.maps.push(entry.clone());
    manifest.maps.sort_by(|a, b| a.map_id.cmp(&b.map_id));
    manifest.save(&manifest_path)?;
    emit_json(&entry, None)
}

#[derive(Serialize)]
struct SynthTruth {
    map_id: String,
    rng_seed: u64,
    alignment_angle: Option<f64>,
    crop_band: f64,
    rows: Vec<HoughLine>,
    weeds: Vec<WeedBlob>,
}

#[derive(Serialize)]
struct SynthRun {
    seed: u64,
    spec: SyntheticFieldSpec,
    maps: Vec<SynthTruth>,
}

pub fn synth(ctx: &Session, args: &SynthArgs) -> Result<()> {
    let config = &ctx.config;
    let mut spec: SyntheticFieldSpec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticFieldSpec::default(),
    };
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                spec.$field = v;
            }
        };
    }
    set!(width, args.width);
    set!(height, args.height);
    set!(n_rows, args.rows);
    set!(row_angle, args.row_angle);
    set!(row_spacing, args.row_spacing);
    set!(n_inter_row_weeds, args.inter_row_weeds);
    set!(n_intra_row_weeds, args.intra_row_weeds);
    if args.maps == 0 {
        return Err(Error::InvalidParam("--maps must be at least 1".into()).into());
    }
    if spec.width < config.tile_size || spec.height < config.tile_size {
        return Err(Error::InvalidParam(format!(
            "a {}x{} field holds no {}-pixel tile",
            spec.width, spec.height, config.tile_size
        ))
        .into());
    }

    let results: Vec<roweeder_core::Result<(MapEntry, SynthTruth)>> = ctx.pool.install(|| {
        (0..args.maps)
            .into_par_iter()
            .map(|k| {
                let mut map_spec = spec.clone();
                map_spec.rng_seed = config.seed.wrapping_add(k as u64);
                let field = generate_synthetic_field(&map_spec)?;
                let mut map = field.map;
                map.map_id = format!("{k:03}");
                let entry = write_map_tiles(&args.out, &map, config.tile_size, &config.channels)?;
                Ok((
                    entry,
                    SynthTruth {
                        map_id: map.map_id,
                        rng_seed: map_spec.rng_seed,
                        alignment_angle: map.alignment_angle,
                        crop_band: field.crop_band,
                        rows: field.rows,
                        weeds: field.weeds,
                    },
                ))
            })
            .collect()
    });
    let (entries, truths): (Vec<MapEntry>, Vec<SynthTruth>) =
        results.into_iter().collect::<roweeder_core::Result<Vec<_>>>()?.into_iter().unzip();
    let manifest = DatasetManifest {
        tile_size: Some(config.tile_size),
        channels: None,
        maps: entries,
    };
    manifest.save(&args.out.join(MANIFEST_FILE))?;
    spec.rng_seed = config.seed;
    emit_json(
        &SynthRun {
            seed: config.seed,
            spec,
            maps: truths,
        },
        Some(&args.out.join(TRUTH_FILE)),
    )?;
    emit_json(&manifest, None)
}

#[derive(Serialize)]
struct TileRecord {
    map_id: String,
    tile: String,
    rows_retained: bool,
    alignment_angle: f64,
    angle_source: AngleSource,
    ks_statistic: f64,
    p_value: f64,
    lines: Vec<HoughLine>,
    n_crop_instances: usize,
    n_weed_instances: usize,
    crop_pixels: usize,
    weed_pixels: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    config: &'a PipelineConfig,
    n_tiles: usize,
    tiles: Vec<TileRecord>,
}

#[derive(Serialize)]
struct RunSummary {
    n_tiles: usize,
    rows_retained: usize,
    crop_instances: usize,
    weed_instances: usize,
}

fn output_paths(out: &Path, map_id: &str, tile: &str) -> (PathBuf, PathBuf) {
    let dir = out.join(map_id);
    (dir.join(format!("{tile}{PSEUDO_SUFFIX}")), dir.join(format!("{tile}{ROWS_SUFFIX}")))
}

pub fn pseudo_label(ctx: &Session, args: &PseudoLabelArgs) -> Result<()> {
    let config = &ctx.config;
    let ds = Dataset::open(&args.input, &config.channels)?;
    let maps = select_maps(&ds, &args.maps)?;
    let jobs: Vec<(&str, &str)> = maps
        .iter()
        .flat_map(|m| m.tiles.iter().map(move |t| (m.map_id.as_str(), t.as_str())))
        .collect();

    let results: Vec<Result<TileRecord>> = ctx.pool.install(|| {
        jobs.par_iter()
            .map(|&(map_id, tile)| -> Result<TileRecord> {
                let data = ds.load_tile(map_id, tile)?;
                let labeling = build_pseudo_gt(&data.channels, config, data.alignment_angle)
                    .with_context(|| format!("map {map_id} tile {tile}"))?;
                let (pseudo_path, rows_path) = output_paths(&args.out, map_id, tile);
                write_classmask(&pseudo_path, &labeling.result.mask)?;
                write_binary_mask(&rows_path, &labeling.row_mask)?;
                let mask = &labeling.result.mask;
                Ok(TileRecord {
                    map_id: map_id.to_owned(),
                    tile: tile.to_owned(),
                    rows_retained: labeling.detection.retained,
                    alignment_angle: labeling.alignment_angle,
                    angle_source: labeling.angle_source,
                    ks_statistic: labeling.detection.ks_statistic,
                    p_value: labeling.detection.p_value,
                    lines: labeling.detection.lines,
                    n_crop_instances: labeling.result.n_crop_instances,
                    n_weed_instances: labeling.result.n_weed_instances,
                    crop_pixels: mask.count(Class::Crop),
                    weed_pixels: mask.count(Class::Weed),
                })
            })
            .collect()
    });

    let records = match results.into_iter().collect::<Result<Vec<_>>>() {
        Ok(records) => records,
        Err(err) => {
            // Leave no partial run behind.
            for &(map_id, tile) in &jobs {
                let (a, b) = output_paths(&args.out, map_id, tile);
                let _ = std::fs::remove_file(a);
                let _ = std::fs::remove_file(b);
            }
            for m in &maps {
                let _ = std::fs::remove_dir(args.out.join(&m.map_id));
            }
            let _ = std::fs::remove_file(args.out.join(RUN_FILE));
            return Err(err);
        }
    };

    let summary = RunSummary {
        n_tiles: records.len(),
        rows_retained: records.iter().filter(|r| r.rows_retained).count(),
        crop_instances: records.iter().map(|r| r.n_crop_instances).sum(),
        weed_instances: records.iter().map(|r| r.n_weed_instances).sum(),
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    emit_json(
        &RunManifest {
            config,
            n_tiles: records.len(),
            tiles: records,
        },
        Some(&args.out.join(RUN_FILE)),
    )?;
    emit_json(&summary, None)
}

/// Prediction tiles under `pred`, keyed by (map, tile).
fn prediction_tiles(pred: &Path) -> Result<BTreeSet<(String, String)>> {
    let mut found = BTreeSet::new();
    let entries = std::fs::read_dir(pred).with_context(|| format!("reading {}", pred.display()))?;
    for entry in entries {
        let entry = entry?;
        if !entry.path().is_dir() {
            continue;
        }
        let Some(map_id) = entry.file_name().to_str().map(str::to_owned) else {
            continue;
        };
        for file in std::fs::read_dir(entry.path())? {
            let name = file?.file_name();
            let Some(name) = name.to_str() else { continue };
            if name.ends_with(ROWS_SUFFIX) {
                continue;
            }
            let stem = name
                .strip_suffix(PSEUDO_SUFFIX)
                .or_else(|| name.strip_suffix(".png"));
            if let Some(stem) = stem {
                found.insert((map_id.clone(), stem.to_owned()));
            }
        }
    }
    Ok(found)
}

fn prediction_path(pred: &Path, map_id: &str, tile: &str) -> PathBuf {
    let dir = pred.join(map_id);
    let pseudo = dir.join(format!("{tile}{PSEUDO_SUFFIX}"));
    if pseudo.is_file() {
        pseudo
    } else {
        dir.join(format!("{tile}.png"))
    }
}

fn describe(set: &[&(String, String)]) -> String {
    let shown: Vec<String> = set.iter().take(5).map(|(m, t)| format!("{m}/{t}")).collect();
    let more = set.len().saturating_sub(5);
    if more > 0 {
        format!("{} and {more} more", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

pub fn evaluate(ctx: &Session, args: &EvaluateArgs) -> Result<()> {
    let config = &ctx.config;
    let ds = Dataset::open(&args.gt, &config.channels)?;
    let maps = select_maps(&ds, &args.maps)?;
    let wanted: BTreeSet<&str> = maps.iter().map(|m| m.map_id.as_str()).collect();
    let gt_tiles: Vec<(String, String)> = maps
        .iter()
        .flat_map(|m| m.tiles.iter().map(move |t| (m.map_id.clone(), t.clone())))
        .filter(|(m, t)| ds.groundtruth_path(m, t).is_some())
        .collect();
    if gt_tiles.is_empty() {
        bail!("no ground-truth tiles under {}", args.gt.display());
    }
    let pred_tiles: BTreeSet<(String, String)> = prediction_tiles(&args.pred)?
        .into_iter()
        .filter(|(m, _)| args.maps.is_empty() || wanted.contains(m.as_str()))
        .collect();
    let gt_set: BTreeSet<(String, String)> = gt_tiles.iter().cloned().collect();
    let missing: Vec<_> = gt_set.difference(&pred_tiles).collect();
    let extra: Vec<_> = pred_tiles.difference(&gt_set).collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = String::from("prediction and ground-truth tile sets differ");
        if !missing.is_empty() {
            msg += &format!("; missing predictions: {}", describe(&missing));
        }
        if !extra.is_empty() {
            msg += &format!("; predictions without ground truth: {}", describe(&extra));
        }
        bail!(msg);
    }
    let rows_root = args.rows.as_deref().unwrap_or(&args.pred);

    let results: Vec<Result<TileEval>> = ctx.pool.install(|| {
        gt_tiles
            .par_iter()
            .map(|(map_id, tile)| -> Result<TileEval> {
                let pred = read_classmask(&prediction_path(&args.pred, map_id, tile))?;
                let gt_path = ds.groundtruth_path(map_id, tile).expect("filtered above");
                let gt = read_classmask(&gt_path)?;
                let rows_path = rows_root.join(map_id).join(format!("{tile}{ROWS_SUFFIX}"));
                if !rows_path.is_file() {
                    return Err(anyhow!("row mask missing for {map_id}/{tile}: {}", rows_path.display()));
                }
                let rows = read_binary_mask(&rows_path)?;
                let confusion = row_partitioned_confusion(&pred, &gt, &rows)
                    .with_context(|| format!("map {map_id} tile {tile}"))?;
                Ok(TileEval {
                    map_id: map_id.clone(),
                    tile: tile.clone(),
                    confusion,
                })
            })
            .collect()
    });
    let tiles = results.into_iter().collect::<Result<Vec<_>>>()?;
    emit_json(&EvalReport::from_tiles(&tiles), args.out.as_deref())
}

pub fn render(ctx: &Session, args: &RenderArgs) -> Result<()> {
    let ds = Dataset::open(&args.input, &ctx.config.channels)?;
    let data = ds.load_tile(&args.map, &args.tile)?;
    let (w, h, mut rgb) = composite(&data.channels)?;
    let mask = args.mask.as_deref().map(read_classmask).transpose()?;
    let rows = args.rows.as_deref().map(read_binary_mask).transpose()?;
    overlay(&mut rgb, (w, h), mask.as_ref(), rows.as_ref())?;
    write_rgb(&args.out, w, h, &rgb)?;
    Ok(())
}

#[derive(Serialize)]
struct FoldsOutput {
    seed: u64,
    val_fraction: f64,
    maps: Vec<String>,
    folds: Vec<roweeder_core::dataset::FoldSplit>,
}

pub fn folds(ctx: &Session, args: &FoldsArgs) -> Result<()> {
    let ds = Dataset::open(&args.input, &ctx.config.channels)?;
    let all = ds.map_tiles();
    let maps = if args.all_maps { all } else { default_fold_maps(&all) };
    let folds = build_folds(&maps, args.val_fraction, ctx.config.seed)?;
    emit_json(
        &FoldsOutput {
            seed: ctx.config.seed,
            val_fraction: args.val_fraction,
            maps: maps.into_iter().map(|m| m.map_id).collect(),
            folds,
        },
        args.out.as_deref(),
    )
}
