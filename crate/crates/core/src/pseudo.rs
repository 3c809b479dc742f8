//! Row-based crop/weed pseudo-labelling of a tile.
//!
//! Vegetation is segmented with a spectral index, crop rows are found with a
//! Hough transform on the row-aligned vegetation mask, and every plant
//! instance that touches a row becomes crop while the rest become weed.

use serde::{Deserialize, Serialize};

use crate::config::{InstanceMethod, PipelineConfig, VegetationIndex};
use crate::dataset::{Channel, Channels};
use crate::error::{check_dims, Error, Result};
use crate::hough::hough_lines;
use crate::instances::{connected_components, instances_from_superpixels, PlantInstance};
use crate::raster::{rotate_mask, BinaryMask, Class, ClassMask, Raster};
use crate::rows::{estimate_alignment_angle, filter_lines, rasterize_rows, RowDetection};
use crate::slic::{cluster_count, slic_superpixels, SlicParams};
use crate::vegetation::{compute_excess_green, compute_ndvi, threshold_vegetation};

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelResult {
    pub mask: ClassMask,
    pub n_crop_instances: usize,
    pub n_weed_instances: usize,
    pub rows_retained: bool,
}

/// Labels each instance crop when at least one of its pixels lies on the
/// row mask and weed otherwise; pixels outside every instance stay
/// background.
pub fn classify_instances(instances: &[PlantInstance], row_mask: &BinaryMask) -> Result<PseudoLabelResult> {
    let (width, height) = row_mask.dims();
    for inst in instances {
        if let Some(&(row, col)) = inst.pixels.iter().find(|&&(r, c)| r >= height || c >= width) {
            return Err(Error::OutOfBounds {
                row,
                col,
                width,
                height,
            });
        }
    }
    let mut mask = ClassMask::background(width, height);
    let (mut n_crop, mut n_weed) = (0, 0);
    for inst in instances {
        let on_row = inst.pixels.iter().any(|&(r, c)| row_mask.get(r, c));
        let class = if on_row {
            n_crop += 1;
            Class::Crop
        } else {
            n_weed += 1;
            Class::Weed
        };
        for &(r, c) in &inst.pixels {
            mask.set(r, c, class);
        }
    }
    Ok(PseudoLabelResult {
        mask,
        n_crop_instances: n_crop,
        n_weed_instances: n_weed,
        rows_retained: !row_mask.is_empty(),
    })
}

/// Where the alignment rotation for a tile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleSource {
    Config,
    Map,
    Estimated,
    /// No vegetation to estimate from; no rotation applied.
    None,
}

/// Everything the pipeline derived for one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileLabeling {
    pub result: PseudoLabelResult,
    /// Detected rows in the tile's own pixel frame.
    pub detection: RowDetection,
    /// The same rows in the rotated, row-aligned frame.
    pub aligned_detection: RowDetection,
    pub row_mask: BinaryMask,
    pub vegetation: BinaryMask,
    pub alignment_angle: f64,
    pub angle_source: AngleSource,
}

fn channel(channels: &Channels, ch: Channel) -> Result<&Raster> {
    channels
        .get(&ch)
        .ok_or_else(|| Error::MissingChannel(ch.short_name().to_owned()))
}

fn tile_dims(channels: &Channels) -> Result<(usize, usize)> {
    let mut iter = channels.values();
    let dims = iter.next().ok_or(Error::EmptyInput)?.dims();
    for r in iter {
        check_dims(dims, r.dims())?;
    }
    Ok(dims)
}

pub fn vegetation_mask(channels: &Channels, config: &PipelineConfig) -> Result<BinaryMask> {
    let index = match config.vegetation.index {
        VegetationIndex::Ndvi => compute_ndvi(channel(channels, Channel::Nir)?, channel(channels, Channel::Red)?)?,
        VegetationIndex::Exg => compute_excess_green(
            channel(channels, Channel::Red)?,
            channel(channels, Channel::Green)?,
            channel(channels, Channel::Blue)?,
        )?,
    };
    Ok(threshold_vegetation(&index, config.vegetation.threshold))
}

/// Runs the full labelling chain on one tile. `map_angle` is the per-map
/// alignment rotation, used unless the configuration fixes one; with
/// neither, the rotation is estimated from the tile's vegetation.
pub fn build_pseudo_gt(channels: &Channels, config: &PipelineConfig, map_angle: Option<f64>) -> Result<TileLabeling> {
    config.validate()?;
    let (width, height) = tile_dims(channels)?;
    let vegetation = vegetation_mask(channels, config)?;

    let (alignment_angle, angle_source) = match (config.alignment.angle_deg, map_angle) {
        (Some(a), _) => (a, AngleSource::Config),
        (None, Some(a)) => (a, AngleSource::Map),
        (None, None) if vegetation.is_empty() => (0.0, AngleSource::None),
        (None, None) => (
            estimate_alignment_angle(&vegetation, config.hough.theta_step_deg, config.hough.rho_step_px)?,
            AngleSource::Estimated,
        ),
    };

    if vegetation.is_empty() {
        let row_mask = BinaryMask::empty(width, height);
        return Ok(TileLabeling {
            result: classify_instances(&[], &row_mask)?,
            detection: RowDetection::empty(),
            aligned_detection: RowDetection::empty(),
            row_mask,
            vegetation,
            alignment_angle,
            angle_source,
        });
    }

    let aligned = rotate_mask(&vegetation, alignment_angle);
    let lines = hough_lines(&aligned, config.hough.params());
    let aligned_detection = filter_lines(lines, config.ks.alpha)?;
    let detection = aligned_detection.rotated(width, height, -alignment_angle);
    let row_mask = rasterize_rows(&detection, width, height, config.rows.thickness_px);

    let instances = match config.instances.source {
        InstanceMethod::Cc => connected_components(&vegetation),
        InstanceMethod::Slic => {
            let bands: Vec<Raster> = channels.values().cloned().collect();
            let params = SlicParams {
                n_clusters: cluster_count(config.slic.cluster_coefficient, width, height),
                compactness: config.slic.compactness,
                sigma: config.slic.sigma,
            };
            let labels = slic_superpixels(&bands, params)?;
            instances_from_superpixels(&labels, &vegetation)?
        }
    };
    let result = classify_instances(&instances, &row_mask)?;
    Ok(TileLabeling {
        result,
        detection,
        aligned_detection,
        row_mask,
        vegetation,
        alignment_angle,
        angle_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic_field, SyntheticFieldSpec};
    use crate::instances::InstanceSource;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(rng: &mut impl Rng, w: usize, h: usize, p: f64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p))
    }

    fn check_classification(veg: &BinaryMask, rows: &BinaryMask) {
        let instances = connected_components(veg);
        let out = classify_instances(&instances, rows).unwrap();
        let mask = &out.mask;
        // Coverage: labelled pixels are exactly the vegetation.
        assert_eq!(mask.vegetation(), *veg);
        for inst in &instances {
            let first = mask.get(inst.pixels[0].0, inst.pixels[0].1);
            // Homogeneity.
            assert!(inst.pixels.iter().all(|&(r, c)| mask.get(r, c) == first));
            // Crop iff witnessed by a row pixel.
            let witnessed = inst.pixels.iter().any(|&(r, c)| rows.get(r, c));
            assert_eq!(first == Class::Crop, witnessed);
        }
        assert_eq!(out.n_crop_instances + out.n_weed_instances, instances.len());
    }

    #[test]
    fn classification_properties_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
            let veg = random_mask(&mut rng, w, h, 0.35);
            let rows = random_mask(&mut rng, w, h, 0.05);
            check_classification(&veg, &rows);
        }
    }

    #[test]
    fn empty_rows_make_everything_weed() {
        let veg = BinaryMask::from_fn(10, 10, |r, c| (r / 3 + c / 3) % 2 == 0);
        let out = classify_instances(&connected_components(&veg), &BinaryMask::empty(10, 10)).unwrap();
        assert_eq!(out.n_crop_instances, 0);
        assert_eq!(out.mask.class_mask(Class::Weed), veg);
        assert!(!out.rows_retained);
    }

    #[test]
    fn out_of_bounds_instance_is_rejected() {
        let inst = PlantInstance {
            id: 1,
            pixels: vec![(0, 0), (3, 9)],
            source: InstanceSource::ConnectedComponent,
        };
        assert!(matches!(
            classify_instances(&[inst], &BinaryMask::empty(5, 5)),
            Err(Error::OutOfBounds { row: 3, col: 9, .. })
        ));
    }

    proptest! {
        #[test]
        fn superset_rows_only_add_crop(seed in any::<u64>(), w in 1usize..30, h in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let veg = random_mask(&mut rng, w, h, 0.4);
            let rows = random_mask(&mut rng, w, h, 0.05);
            let extra = random_mask(&mut rng, w, h, 0.05);
            let wider = rows.union(&extra).unwrap();
            let instances = connected_components(&veg);
            let a = classify_instances(&instances, &rows).unwrap().mask;
            let b = classify_instances(&instances, &wider).unwrap().mask;
            prop_assert!(a.class_mask(Class::Crop).is_subset_of(&b.class_mask(Class::Crop)));
            prop_assert!(b.class_mask(Class::Weed).is_subset_of(&a.class_mask(Class::Weed)));
        }
    }

    fn synthetic(angle: f64, seed: u64) -> crate::dataset::SyntheticField {
        generate_synthetic_field(&SyntheticFieldSpec {
            row_angle: angle,
            rng_seed: seed,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn synthetic_tile_is_labelled_like_ground_truth() {
        let field = synthetic(0.0, 3);
        let config = PipelineConfig::default();
        let out = build_pseudo_gt(&field.map.channels, &config, field.map.alignment_angle).unwrap();
        assert!(out.detection.retained);
        assert_eq!(out.angle_source, AngleSource::Map);
        let gt = field.map.gt.as_ref().unwrap();
        let agree = gt
            .labels()
            .iter()
            .zip(out.result.mask.labels())
            .filter(|(a, b)| a == b)
            .count();
        assert!(agree as f64 / gt.labels().len() as f64 >= 0.99);
    }

    #[test]
    fn estimated_angle_is_used_without_map_angle() {
        let field = synthetic(30.0, 4);
        let out = build_pseudo_gt(&field.map.channels, &PipelineConfig::default(), None).unwrap();
        assert_eq!(out.angle_source, AngleSource::Estimated);
        assert!((out.alignment_angle + 30.0).abs() <= 1.0, "{}", out.alignment_angle);
    }

    #[test]
    fn bare_soil_is_all_background() {
        let mut channels = Channels::new();
        channels.insert(Channel::Nir, Raster::filled(32, 32, 0.2));
        channels.insert(Channel::Red, Raster::filled(32, 32, 0.2));
        let out = build_pseudo_gt(&channels, &PipelineConfig::default(), None).unwrap();
        assert_eq!(out.result.mask, ClassMask::background(32, 32));
        assert!(!out.detection.retained);
        assert_eq!(out.angle_source, AngleSource::None);
    }

    #[test]
    fn missing_channel_is_reported() {
        let mut channels = Channels::new();
        channels.insert(Channel::Red, Raster::filled(8, 8, 0.2));
        assert!(matches!(
            build_pseudo_gt(&channels, &PipelineConfig::default(), None),
            Err(Error::MissingChannel(_))
        ));
    }

    #[test]
    fn slic_instances_cover_vegetation() {
        let field = generate_synthetic_field(&SyntheticFieldSpec {
            width: 128,
            height: 128,
            n_rows: 2,
            row_spacing: 48.0,
            n_inter_row_weeds: 4,
            rng_seed: 2,
            ..Default::default()
        })
        .unwrap();
        let mut config = PipelineConfig::default();
        config.instances.source = InstanceMethod::Slic;
        config.hough.threshold = 60;
        let out = build_pseudo_gt(&field.map.channels, &config, field.map.alignment_angle).unwrap();
        assert_eq!(out.result.mask.vegetation(), out.vegetation);
        assert!(out.result.n_crop_instances > 0);
    }
}
