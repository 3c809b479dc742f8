//! Synthetic field maps with known crop rows and weed positions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Channel, Channels, FieldMap};
use crate::error::{Error, Result};
use crate::hough::{origin, HoughLine};
use crate::raster::{normalize_angle, sin_cos_deg, Class, ClassMask, Raster};

fn default_radius_jitter() -> f64 {
    1.0
}
fn default_pitch() -> f64 {
    16.0
}
fn default_offset_jitter() -> f64 {
    1.0
}
fn default_weed_radius() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFieldSpec {
    pub width: usize,
    pub height: usize,
    pub n_rows: usize,
    /// Direction of the rows in degrees, counter-clockwise from the x axis
    /// in image coordinates (y down).
    pub row_angle: f64,
    /// Perpendicular distance between neighbouring row centerlines.
    pub row_spacing: f64,
    pub crop_blob_radius: f64,
    pub n_inter_row_weeds: usize,
    pub n_intra_row_weeds: usize,
    pub rng_seed: u64,
    #[serde(default = "default_radius_jitter")]
    pub crop_radius_jitter: f64,
    /// Distance between neighbouring plants along a row.
    #[serde(default = "default_pitch")]
    pub crop_pitch: f64,
    /// Maximum perpendicular displacement of a plant from its centerline.
    #[serde(default = "default_offset_jitter")]
    pub crop_offset_jitter: f64,
    /// Semi-major axis of the elliptical weed blobs.
    #[serde(default = "default_weed_radius")]
    pub weed_radius: f64,
}

impl Default for SyntheticFieldSpec {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            n_rows: 6,
            row_angle: 0.0,
            row_spacing: 64.0,
            crop_blob_radius: 5.0,
            n_inter_row_weeds: 30,
            n_intra_row_weeds: 0,
            rng_seed: 0,
            crop_radius_jitter: default_radius_jitter(),
            crop_pitch: default_pitch(),
            crop_offset_jitter: default_offset_jitter(),
            weed_radius: default_weed_radius(),
        }
    }
}

impl SyntheticFieldSpec {
    /// Largest distance of any crop pixel from its row centerline.
    pub fn crop_band(&self) -> f64 {
        self.crop_blob_radius + self.crop_radius_jitter + self.crop_offset_jitter
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.width == 0 || self.height == 0 {
            return bad("synthetic field must be at least 1x1".into());
        }
        if !(self.row_angle.is_finite()) {
            return bad("row_angle must be finite".into());
        }
        if !(self.crop_blob_radius > 0.0) || !(self.crop_radius_jitter >= 0.0) {
            return bad("crop radius must be positive and jitter non-negative".into());
        }
        if self.crop_radius_jitter >= self.crop_blob_radius {
            return bad("crop_radius_jitter must be smaller than crop_blob_radius".into());
        }
        if !(self.crop_pitch > 0.0) || !(self.crop_offset_jitter >= 0.0) || !(self.weed_radius > 0.0) {
            return bad("crop_pitch and weed_radius must be positive, offset jitter non-negative".into());
        }
        if self.n_rows > 0 {
            if !(self.row_spacing > 0.0) {
                return bad("row_spacing must be positive".into());
            }
            let extent = self.n_rows as f64 * self.row_spacing;
            let room = self.width.min(self.height) as f64;
            if extent > room {
                return bad(format!(
                    "{} rows at spacing {} need {extent} px but the field is only {room} px across",
                    self.n_rows, self.row_spacing
                ));
            }
        }
        if self.n_intra_row_weeds > 0 {
            if self.n_rows == 0 {
                return bad("intra-row weeds need at least one row".into());
            }
            if self.weed_radius > self.crop_band() {
                return bad(format!(
                    "weed_radius {} exceeds the crop band {}; intra-row weeds would leave the row",
                    self.weed_radius,
                    self.crop_band()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeedKind {
    InterRow,
    IntraRow,
}

/// Elliptical weed blob in pixel coordinates (x = column, y = row).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeedBlob {
    pub x: f64,
    pub y: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub orientation: f64,
    pub kind: WeedKind,
}

impl WeedBlob {
    fn contains(&self, px: f64, py: f64) -> bool {
        let (s, c) = sin_cos_deg(self.orientation);
        let (dx, dy) = (px - self.x, py - self.y);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_major).powi(2) + (v / self.semi_minor).powi(2) <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticField {
    pub map: FieldMap,
    /// Row centerlines in Hough form (votes are zero).
    pub rows: Vec<HoughLine>,
    pub weeds: Vec<WeedBlob>,
    pub crop_band: f64,
}

struct Disc {
    x: f64,
    y: f64,
    r: f64,
}

/// Renders a field with `n_rows` evenly spaced straight rows of disc-shaped
/// crops centred on the image, plus weed blobs either well between rows or
/// sitting on a row centerline. Channels are chosen so that NDVI and ExG
/// both separate plants from soil at a 0.1 threshold.
pub fn generate_synthetic_field(spec: &SyntheticFieldSpec) -> Result<SyntheticField> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let (ox, oy) = origin(w, h);

    let mut theta = (spec.row_angle + 90.0).rem_euclid(180.0);
    if (theta - theta.round()).abs() < 1e-9 {
        theta = theta.round() % 180.0;
    }
    let (sin, cos) = sin_cos_deg(theta);
    // Unit normal n = (cos, sin); the row direction is perpendicular.
    let (dx, dy) = (-sin, cos);
    let offsets: Vec<f64> = (0..spec.n_rows)
        .map(|i| (i as f64 - (spec.n_rows as f64 - 1.0) / 2.0) * spec.row_spacing)
        .collect();
    let rows: Vec<HoughLine> = offsets
        .iter()
        .map(|&rho| HoughLine { rho, theta, votes: 0 })
        .collect();
    let signed_distance = |x: f64, y: f64, rho: f64| (x - ox) * cos + (y - oy) * sin - rho;
    let inside = |x: f64, y: f64, margin: f64| {
        x >= -margin && y >= -margin && x <= w as f64 - 1.0 + margin && y <= h as f64 - 1.0 + margin
    };

    let half_span = ((w * w + h * h) as f64).sqrt() / 2.0 + spec.crop_pitch;
    let mut crops = Vec::new();
    for &rho in &offsets {
        let phase = rng.random_range(0.0..spec.crop_pitch);
        let mut t = -half_span + phase;
        while t <= half_span {
            let along = t + rng.random_range(-0.2..=0.2) * spec.crop_pitch;
            let across = rho + rng.random_range(-spec.crop_offset_jitter..=spec.crop_offset_jitter);
            let r = spec.crop_blob_radius + rng.random_range(-spec.crop_radius_jitter..=spec.crop_radius_jitter);
            let x = ox + across * cos + along * dx;
            let y = oy + across * sin + along * dy;
            if inside(x, y, r) {
                crops.push(Disc { x, y, r });
            }
            t += spec.crop_pitch;
        }
    }

    let band = spec.crop_band();
    let mut weeds = Vec::with_capacity(spec.n_inter_row_weeds + spec.n_intra_row_weeds);
    let blob = |rng: &mut ChaCha8Rng, x: f64, y: f64, kind: WeedKind| WeedBlob {
        x,
        y,
        semi_major: spec.weed_radius,
        semi_minor: spec.weed_radius * rng.random_range(0.5..=1.0),
        orientation: rng.random_range(0.0..180.0),
        kind,
    };
    const MAX_ATTEMPTS: usize = 100_000;
    for _ in 0..spec.n_inter_row_weeds {
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let x = rng.random_range(0.0..w as f64);
            let y = rng.random_range(0.0..h as f64);
            let clear = offsets
                .iter()
                .all(|&rho| signed_distance(x, y, rho).abs() - spec.weed_radius > 2.0 * band);
            if clear {
                placed = Some((x, y));
                break;
            }
        }
        let (x, y) = placed.ok_or_else(|| {
            Error::InvalidParam("no room between rows for an inter-row weed; widen row_spacing".into())
        })?;
        weeds.push(blob(&mut rng, x, y, WeedKind::InterRow));
    }
    for _ in 0..spec.n_intra_row_weeds {
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let rho = offsets[rng.random_range(0..offsets.len())];
            let t = rng.random_range(-half_span..half_span);
            let (x, y) = (ox + rho * cos + t * dx, oy + rho * sin + t * dy);
            if inside(x, y, 0.0) {
                placed = Some((x, y));
                break;
            }
        }
        let (x, y) = placed.ok_or_else(|| Error::InvalidParam("rows do not cross the field".into()))?;
        weeds.push(blob(&mut rng, x, y, WeedKind::IntraRow));
    }

    let mut gt = ClassMask::background(w, h);
    for d in &crops {
        paint(&mut gt, d.x, d.y, d.r, Class::Crop, |px, py| {
            (px - d.x).powi(2) + (py - d.y).powi(2) <= d.r * d.r
        });
    }
    for b in &weeds {
        paint(&mut gt, b.x, b.y, b.semi_major, Class::Weed, |px, py| b.contains(px, py));
    }

    let mut bands: [Vec<f32>; 4] = std::array::from_fn(|_| Vec::with_capacity(w * h));
    for &class in gt.labels() {
        // (NIR, R, G, B) means and noise amplitudes per class.
        let (means, noise): ([f64; 4], [f64; 4]) = match class {
            Class::Background => ([0.20, 0.22, 0.18, 0.15], [0.01; 4]),
            Class::Crop => ([0.60, 0.08, 0.40, 0.10], [0.05, 0.02, 0.03, 0.02]),
            Class::Weed => ([0.50, 0.08, 0.30, 0.12], [0.05, 0.02, 0.03, 0.02]),
        };
        for k in 0..4 {
            let v = means[k] + rng.random_range(-noise[k]..=noise[k]);
            bands[k].push(v as f32);
        }
    }
    let [nir, red, green, blue] = bands;
    let mut channels = Channels::new();
    channels.insert(Channel::Nir, Raster::new(w, h, nir)?);
    channels.insert(Channel::Red, Raster::new(w, h, red)?);
    channels.insert(Channel::Green, Raster::new(w, h, green)?);
    channels.insert(Channel::Blue, Raster::new(w, h, blue)?);

    let alignment = if spec.n_rows > 0 {
        Some(normalize_angle(-spec.row_angle))
    } else {
        None
    };
    let map = FieldMap::new(format!("synthetic-{}", spec.rng_seed), channels, Some(gt), alignment)?;
    Ok(SyntheticField {
        map,
        rows,
        weeds,
        crop_band: band,
    })
}

fn paint(gt: &mut ClassMask, x: f64, y: f64, extent: f64, class: Class, contains: impl Fn(f64, f64) -> bool) {
    let (w, h) = gt.dims();
    let c0 = (x - extent).floor().max(0.0) as usize;
    let r0 = (y - extent).floor().max(0.0) as usize;
    let c1 = ((x + extent).ceil() as i64).min(w as i64 - 1);
    let r1 = ((y + extent).ceil() as i64).min(h as i64 - 1);
    if c1 < 0 || r1 < 0 {
        return;
    }
    for row in r0..=r1 as usize {
        for col in c0..=c1 as usize {
            if contains(col as f64, row as f64) {
                gt.set(row, col, class);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vegetation::{compute_excess_green, compute_ndvi, threshold_vegetation};

    fn distance_to_nearest_row(field: &SyntheticField, row: usize, col: usize) -> f64 {
        let (w, h) = field.map.dims();
        let (ox, oy) = origin(w, h);
        field
            .rows
            .iter()
            .map(|l| {
                let (s, c) = sin_cos_deg(l.theta);
                ((col as f64 - ox) * c + (row as f64 - oy) * s - l.rho).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn geometric_invariants_hold() {
        for (seed, angle) in [(1, 0.0), (2, 20.0), (3, 45.0), (4, 70.0), (5, -30.0), (6, 90.0)] {
            let spec = SyntheticFieldSpec {
                row_angle: angle,
                n_intra_row_weeds: 10,
                rng_seed: seed,
                ..Default::default()
            };
            let field = generate_synthetic_field(&spec).unwrap();
            let gt = field.map.gt.as_ref().unwrap();
            let band = field.crop_band;
            assert!(gt.count(Class::Crop) > 0);
            assert!(gt.count(Class::Weed) > 0);
            for (r, c) in gt.class_mask(Class::Crop).iter_set() {
                assert!(distance_to_nearest_row(&field, r, c) <= band + 1e-9);
            }
            for b in &field.weeds {
                let (w, h) = field.map.dims();
                let r0 = (b.y - b.semi_major).floor().max(0.0) as usize;
                let c0 = (b.x - b.semi_major).floor().max(0.0) as usize;
                let r1 = ((b.y + b.semi_major).ceil() as usize).min(h - 1);
                let c1 = ((b.x + b.semi_major).ceil() as usize).min(w - 1);
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        if !b.contains(c as f64, r as f64) {
                            continue;
                        }
                        let d = distance_to_nearest_row(&field, r, c);
                        match b.kind {
                            WeedKind::InterRow => assert!(d > 2.0 * band, "inter weed pixel at {d}"),
                            WeedKind::IntraRow => assert!(d <= band + 1e-9, "intra weed pixel at {d}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rows_have_requested_direction() {
        let field = generate_synthetic_field(&SyntheticFieldSpec {
            row_angle: 30.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(field.rows.len(), 6);
        for l in &field.rows {
            assert!((l.theta - 120.0).abs() < 1e-9);
        }
        assert_eq!(field.map.alignment_angle, Some(-30.0));
        let horizontal = generate_synthetic_field(&SyntheticFieldSpec::default()).unwrap();
        assert!(horizontal.rows.iter().all(|l| l.theta == 90.0));
        let rhos: Vec<f64> = horizontal.rows.iter().map(|l| l.rho).collect();
        assert_eq!(rhos, vec![-160.0, -96.0, -32.0, 32.0, 96.0, 160.0]);
    }

    #[test]
    fn vegetation_indices_recover_ground_truth() {
        let field = generate_synthetic_field(&SyntheticFieldSpec {
            rng_seed: 9,
            n_intra_row_weeds: 5,
            ..Default::default()
        })
        .unwrap();
        let ch = &field.map.channels;
        let veg = field.map.gt.as_ref().unwrap().vegetation();
        let ndvi = compute_ndvi(&ch[&Channel::Nir], &ch[&Channel::Red]).unwrap();
        assert_eq!(threshold_vegetation(&ndvi, 0.1), veg);
        let exg = compute_excess_green(&ch[&Channel::Red], &ch[&Channel::Green], &ch[&Channel::Blue]).unwrap();
        assert_eq!(threshold_vegetation(&exg, 0.1), veg);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticFieldSpec {
            rng_seed: 77,
            row_angle: 12.5,
            ..Default::default()
        };
        assert_eq!(generate_synthetic_field(&spec).unwrap(), generate_synthetic_field(&spec).unwrap());
    }

    #[test]
    fn impossible_geometry_is_rejected() {
        let too_many_rows = SyntheticFieldSpec {
            n_rows: 20,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic_field(&too_many_rows), Err(Error::InvalidParam(_))));
        let crowded = SyntheticFieldSpec {
            width: 128,
            height: 128,
            n_rows: 4,
            row_spacing: 32.0,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic_field(&crowded), Err(Error::InvalidParam(_))));
        let fat_weeds = SyntheticFieldSpec {
            n_intra_row_weeds: 1,
            weed_radius: 20.0,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic_field(&fat_weeds), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn weeds_only_field() {
        let field = generate_synthetic_field(&SyntheticFieldSpec {
            n_rows: 0,
            n_inter_row_weeds: 50,
            ..Default::default()
        })
        .unwrap();
        let gt = field.map.gt.as_ref().unwrap();
        assert_eq!(gt.count(Class::Crop), 0);
        assert!(gt.count(Class::Weed) > 0);
        assert!(field.rows.is_empty());
        assert_eq!(field.map.alignment_angle, None);
    }
    #[test]
    fn bare_field_is_all_background() {
        let field = generate_synthetic_field(&SyntheticFieldSpec {
            n_rows: 0,
            n_inter_row_weeds: 0,
            ..Default::default()
        })
        .unwrap();
        let gt = field.map.gt.as_ref().unwrap();
        assert_eq!(gt.count(Class::Background), gt.width() * gt.height());
    }

    #[test]
    fn weed_free_rows_are_labelled_crop() {
        let field = generate_synthetic_field(&SyntheticFieldSpec {
            n_inter_row_weeds: 0,
            rng_seed: 3,
            ..Default::default()
        })
        .unwrap();
        let config = crate::PipelineConfig::default();
        let labeling = crate::build_pseudo_gt(&field.map.channels, &config, field.map.alignment_angle).unwrap();
        let mask = &labeling.result.mask;
        assert_eq!(mask.count(Class::Weed), 0);
        assert_eq!(mask.vegetation(), field.map.gt.as_ref().unwrap().vegetation());
    }
}
