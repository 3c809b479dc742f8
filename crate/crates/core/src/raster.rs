//! Raster containers and nearest-neighbour rotation.
//!
//! All grids are row-major with the origin at the top-left pixel; pixels are
//! addressed as `(row, col)`. Dimensions are reported as `(width, height)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};

/// Single-channel grid of finite reflectance or index values.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} values for a {width}x{height} raster",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster(format!(
                "non-finite value at ({}, {})",
                i / width.max(1),
                i % width.max(1)
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(value.is_finite(), "raster fill value must be finite");
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                values.push(f(row, col));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    /// Copies out the `width`x`height` window whose top-left pixel is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        let values = crop_vec(&self.values, self.dims(), row, col, width, height)?;
        Ok(Self {
            width,
            height,
            values,
        })
    }
}

/// Boolean grid used for vegetation and crop-row masks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set pixels in raster order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / width, i % width))
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn transpose(&self) -> BinaryMask {
        BinaryMask::from_fn(self.height, self.width, |row, col| self.get(col, row))
    }

    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        let bits = crop_vec(&self.bits, self.dims(), row, col, width, height)?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        check_dims(self.dims(), other.dims())?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Per-pixel semantic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Class {
    #[default]
    Background = 0,
    Crop = 1,
    Weed = 2,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Background, Class::Crop, Class::Weed];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: u8) -> Option<Class> {
        match index {
            0 => Some(Class::Background),
            1 => Some(Class::Crop),
            2 => Some(Class::Weed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Background => "background",
            Class::Crop => "crop",
            Class::Weed => "weed",
        }
    }
}

/// Label grid over {background, crop, weed}. Pseudo ground truth, annotated
/// ground truth and model predictions all share this type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassMask {
    width: usize,
    height: usize,
    labels: Vec<Class>,
}

impl ClassMask {
    pub fn new(width: usize, height: usize, labels: Vec<Class>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Builds a mask from raw label indices, rejecting anything outside {0, 1, 2}.
    pub fn from_indices(width: usize, height: usize, indices: &[u8]) -> Result<Self> {
        let labels = indices
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                Class::from_index(v).ok_or_else(|| {
                    Error::InvalidRaster(format!("label {v} at index {i} is not in {{0,1,2}}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, labels)
    }

    pub fn background(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![Class::Background; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Class) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                labels.push(f(row, col));
            }
        }
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn indices(&self) -> Vec<u8> {
        self.labels.iter().map(|&c| c as u8).collect()
    }

    pub fn get(&self, row: usize, col: usize) -> Class {
        self.labels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class: Class) {
        self.labels[row * self.width + col] = class;
    }

    pub fn count(&self, class: Class) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }

    /// Pixels labelled crop or weed.
    pub fn vegetation(&self) -> BinaryMask {
        self.select(|c| c != Class::Background)
    }

    pub fn class_mask(&self, class: Class) -> BinaryMask {
        self.select(|c| c == class)
    }

    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        let labels = crop_vec(&self.labels, self.dims(), row, col, width, height)?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    fn select(&self, f: impl Fn(Class) -> bool) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&c| f(c)).collect(),
        }
    }
}

fn crop_vec<T: Copy>(
    data: &[T],
    (src_width, src_height): (usize, usize),
    row: usize,
    col: usize,
    width: usize,
    height: usize,
) -> Result<Vec<T>> {
    if row + height > src_height || col + width > src_width {
        return Err(Error::InvalidParam(format!(
            "window {width}x{height} at ({row}, {col}) exceeds {src_width}x{src_height}"
        )));
    }
    let mut out = Vec::with_capacity(width * height);
    for r in row..row + height {
        let start = r * src_width + col;
        out.extend_from_slice(&data[start..start + width]);
    }
    Ok(out)
}

/// Normalizes an angle in degrees into (-180, 180].
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 30°.
pub fn sin_cos_deg(angle: f64) -> (f64, f64) {
    let a = angle.rem_euclid(360.0);
    if a % 30.0 == 0.0 {
        let h = 3f64.sqrt() / 2.0;
        const STEPS: usize = 12;
        let table = [0.0, 0.5, h, 1.0, h, 0.5, 0.0, -0.5, -h, -1.0, -h, -0.5];
        let k = (a / 30.0) as usize % STEPS;
        (table[k], table[(k + 3) % STEPS])
    } else {
        a.to_radians().sin_cos()
    }
}

/// Rotation about the grid center `((w-1)/2, (h-1)/2)`.
///
/// Points are `(x, y) = (col, row)`. A positive angle maps the offset
/// `(dx, dy)` to `(cos·dx − sin·dy, sin·dx + cos·dy)`, so a line whose normal
/// makes angle θ with the x axis ends up with normal angle θ + angle.
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    sin: f64,
    cos: f64,
    cx: f64,
    cy: f64,
}

impl Rotation {
    pub fn new(width: usize, height: usize, angle: f64) -> Self {
        let (sin, cos) = sin_cos_deg(normalize_angle(angle));
        Self {
            sin,
            cos,
            cx: (width as f64 - 1.0) * 0.5,
            cy: (height as f64 - 1.0) * 0.5,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    /// Where the point `(x, y)` of the source lands in the rotated grid.
    pub fn forward(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.cx;
        let dy = y - self.cy;
        (
            self.cos * dx - self.sin * dy + self.cx,
            self.sin * dx + self.cos * dy + self.cy,
        )
    }

    /// Which source point maps onto `(x, y)` of the rotated grid.
    pub fn backward(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.cx;
        let dy = y - self.cy;
        (
            self.cos * dx + self.sin * dy + self.cx,
            -self.sin * dx + self.cos * dy + self.cy,
        )
    }
}

fn round_in_bounds(x: f64, y: f64, width: usize, height: usize) -> Option<(usize, usize)> {
    let col = x.round();
    let row = y.round();
    if col >= 0.0 && row >= 0.0 && (col as usize) < width && (row as usize) < height {
        Some((row as usize, col as usize))
    } else {
        None
    }
}

fn rotate_grid<T: Copy>(data: &[T], width: usize, height: usize, angle: f64, fill: T) -> Vec<T> {
    let rot = Rotation::new(width, height, angle);
    let mut out = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let (sx, sy) = rot.backward(col as f64, row as f64);
            out.push(match round_in_bounds(sx, sy, width, height) {
                Some((r, c)) => data[r * width + c],
                None => fill,
            });
        }
    }
    out
}

/// Rotates a mask about its center with nearest-neighbour sampling. The
/// canvas keeps its size; pixels sampled from outside the source are false.
pub fn rotate_mask(mask: &BinaryMask, angle: f64) -> BinaryMask {
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: rotate_grid(&mask.bits, mask.width, mask.height, angle, false),
    }
}

pub fn rotate_classmask(mask: &ClassMask, angle: f64) -> ClassMask {
    ClassMask {
        width: mask.width,
        height: mask.height,
        labels: rotate_grid(&mask.labels, mask.width, mask.height, angle, Class::Background),
    }
}

/// Nearest-neighbour rotation of a raster; out-of-canvas samples become 0.
pub fn rotate_raster(raster: &Raster, angle: f64) -> Raster {
    Raster {
        width: raster.width,
        height: raster.height,
        values: rotate_grid(&raster.values, raster.width, raster.height, angle, 0.0),
    }
}

/// Undoes [`rotate_classmask`] with `angle`.
///
/// Every output pixel `p` takes its label from the rotated pixel that the
/// forward rotation sampled from `p` when one exists in the 3x3 neighbourhood
/// of `p`'s exact image; otherwise from the nearest rotated pixel. A
/// forward/inverse pair therefore restores every pixel the forward pass hit.
pub fn inverse_rotate_classmask(mask: &ClassMask, angle: f64) -> ClassMask {
    let (width, height) = mask.dims();
    let rot = Rotation::new(width, height, angle);
    let mut labels = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let (fx, fy) = rot.forward(col as f64, row as f64);
            let (rx, ry) = (fx.round(), fy.round());
            let mut best: Option<(f64, usize)> = None;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (qx, qy) = (rx + dc as f64, ry + dr as f64);
                    let Some((qr, qc)) = round_in_bounds(qx, qy, width, height) else {
                        continue;
                    };
                    let (sx, sy) = rot.backward(qc as f64, qr as f64);
                    if round_in_bounds(sx, sy, width, height) != Some((row, col)) {
                        continue;
                    }
                    let d = (qx - fx).powi(2) + (qy - fy).powi(2);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, qr * width + qc));
                    }
                }
            }
            let label = match best {
                Some((_, i)) => mask.labels[i],
                None => match round_in_bounds(fx, fy, width, height) {
                    Some((r, c)) => mask.get(r, c),
                    None => Class::Background,
                },
            };
            labels.push(label);
        }
    }
    ClassMask {
        width,
        height,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(rng: &mut impl Rng, width: usize, height: usize, p: f64) -> BinaryMask {
        BinaryMask::from_fn(width, height, |_, _| rng.random_bool(p))
    }

    /// Random vegetation-like mask: a union of discs.
    fn random_blobs(rng: &mut impl Rng, size: usize, count: usize) -> BinaryMask {
        let blobs: Vec<(f64, f64, f64)> = (0..count)
            .map(|_| {
                (
                    rng.random_range(0.0..size as f64),
                    rng.random_range(0.0..size as f64),
                    rng.random_range(3.0..9.0),
                )
            })
            .collect();
        BinaryMask::from_fn(size, size, |r, c| {
            blobs
                .iter()
                .any(|&(br, bc, rad)| (r as f64 - br).powi(2) + (c as f64 - bc).powi(2) <= rad * rad)
        })
    }

    #[test]
    fn rejects_bad_rasters() {
        assert!(Raster::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Raster::new(2, 1, vec![0.0, f32::NAN]).is_err());
        assert!(Raster::new(2, 1, vec![0.0, f32::INFINITY]).is_err());
        assert!(ClassMask::from_indices(2, 1, &[0, 3]).is_err());
        assert!(BinaryMask::new(3, 3, vec![true; 8]).is_err());
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(normalize_angle(180.0), 180.0);
        assert_eq!(normalize_angle(-180.0), 180.0);
        assert_eq!(normalize_angle(270.0), -90.0);
        assert_eq!(normalize_angle(-450.0), -90.0);
        assert_eq!(normalize_angle(37.0), 37.0);
    }

    #[test]
    fn zero_rotation_is_identity_for_all_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mask = random_mask(&mut rng, 17, 11, 0.4);
        assert_eq!(rotate_mask(&mask, 0.0), mask);
        let labels: Vec<u8> = (0..17 * 11).map(|_| rng.random_range(0..3)).collect();
        let cm = ClassMask::from_indices(17, 11, &labels).unwrap();
        assert_eq!(rotate_classmask(&cm, 0.0), cm);
        assert_eq!(inverse_rotate_classmask(&cm, 0.0), cm);
        let raster = Raster::from_fn(17, 11, |_, _| rng.random::<f32>()).unwrap();
        assert_eq!(rotate_raster(&raster, 0.0), raster);
        assert_eq!(rotate_mask(&mask, 360.0), mask);
    }

    #[test]
    fn center_pixel_is_fixed() {
        let mut mask = BinaryMask::empty(9, 9);
        mask.set(4, 4, true);
        for angle in [90.0, 45.0, -30.0, 180.0] {
            let rotated = rotate_mask(&mask, angle);
            assert_eq!(rotated.iter_set().collect::<Vec<_>>(), vec![(4, 4)], "angle {angle}");
        }
    }

    #[test]
    fn horizontal_line_becomes_vertical() {
        let n = 15;
        let mid = n / 2;
        let mut mask = BinaryMask::empty(n, n);
        for col in 0..n {
            mask.set(mid, col, true);
        }
        let rotated = rotate_mask(&mask, 90.0);
        // Brute force: rotating (x, y) by +90° about the center gives
        // (cx − (y − cy), cy + (x − cx)); the horizontal row maps onto column mid.
        let mut expected = BinaryMask::empty(n, n);
        for (row, col) in mask.iter_set() {
            let c = mid as f64;
            let x = c - (row as f64 - c);
            let y = c + (col as f64 - c);
            expected.set(y as usize, x as usize, true);
        }
        assert_eq!(rotated, expected);
        for row in 0..n {
            for col in 0..n {
                assert_eq!(rotated.get(row, col), col == mid, "({row}, {col})");
            }
        }
    }

    #[test]
    fn quarter_turns_round_trip_on_square_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for size in [8, 9, 32] {
            let labels: Vec<u8> = (0..size * size).map(|_| rng.random_range(0..3)).collect();
            let cm = ClassMask::from_indices(size, size, &labels).unwrap();
            for angle in [90.0, -90.0, 180.0, 270.0] {
                let rotated = rotate_classmask(&cm, angle);
                assert_eq!(inverse_rotate_classmask(&rotated, angle), cm, "size {size} angle {angle}");
            }
        }
    }

    #[test]
    fn arbitrary_angle_round_trip_keeps_vegetation_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10 {
            let size = 96;
            let veg = random_blobs(&mut rng, size, 25);
            let cm = ClassMask::from_fn(size, size, |r, c| match (veg.get(r, c), (r / 8 + c / 8) % 2) {
                (false, _) => Class::Background,
                (true, 0) => Class::Crop,
                (true, _) => Class::Weed,
            });
            let restored = inverse_rotate_classmask(&rotate_classmask(&cm, 37.0), 37.0);
            // Only pixels whose round trip stays inside the canvas are recoverable.
            let rot = Rotation::new(size, size, 37.0);
            let (mut total, mut kept) = (0usize, 0usize);
            for (r, c) in veg.iter_set() {
                let (fx, fy) = rot.forward(c as f64, r as f64);
                if round_in_bounds(fx, fy, size, size).is_none() {
                    continue;
                }
                total += 1;
                kept += usize::from(restored.get(r, c) == cm.get(r, c));
            }
            let agreement = kept as f64 / total as f64;
            assert!(agreement >= 0.98, "trial {trial}: agreement {agreement}");
        }
    }

    #[test]
    fn crop_extracts_window() {
        let raster = Raster::from_fn(4, 3, |r, c| (r * 10 + c) as f32).unwrap();
        let window = raster.crop(1, 2, 2, 2).unwrap();
        assert_eq!(window.values(), &[12.0, 13.0, 22.0, 23.0]);
        assert!(raster.crop(2, 0, 4, 2).is_err());
    }

    proptest! {
        #[test]
        fn quarter_turns_preserve_popcount(seed in any::<u64>(), size in 1usize..24, quarter in 0i32..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mask = random_mask(&mut rng, size, size, 0.3);
            let rotated = rotate_mask(&mask, 90.0 * quarter as f64);
            prop_assert_eq!(rotated.count(), mask.count());
        }

        #[test]
        fn popcount_change_is_bounded_by_perimeter(
            seed in any::<u64>(),
            size in 1usize..40,
            angle in -179.9f64..180.0,
        ) {
            // Support inside the inscribed disc, so nothing is clipped.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let centre = (size as f64 - 1.0) / 2.0;
            let radius = centre - 1.0;
            let disc = BinaryMask::from_fn(size, size, |r, c| {
                (r as f64 - centre).powi(2) + (c as f64 - centre).powi(2) <= radius * radius
            });
            let mask = random_blobs(&mut rng, size, 6).intersection(&disc).unwrap();
            let rotated = rotate_mask(&mask, angle);
            let diff = (rotated.count() as i64 - mask.count() as i64).unsigned_abs() as usize;
            prop_assert!(diff <= 8 * size, "diff {} for {}", diff, size);
        }
    }
}
