//! Vegetation indices and thresholding.

use crate::error::{check_dims, Result};
use crate::raster::{BinaryMask, Raster};

/// Normalized difference vegetation index, `(nir − red) / (nir + red)`.
///
/// Pixels where both reflectances are zero yield 0.
pub fn compute_ndvi(nir: &Raster, red: &Raster) -> Result<Raster> {
    check_dims(nir.dims(), red.dims())?;
    let values = nir
        .values()
        .iter()
        .zip(red.values())
        .map(|(&n, &r)| {
            let sum = n + r;
            if sum == 0.0 {
                0.0
            } else {
                ((n - r) / sum).clamp(-1.0, 1.0)
            }
        })
        .collect();
    Raster::new(nir.width(), nir.height(), values)
}

/// Excess green, `2g − r − b`, clamped to [−2, 2]. Used when no NIR channel
/// is available.
pub fn compute_excess_green(red: &Raster, green: &Raster, blue: &Raster) -> Result<Raster> {
    check_dims(green.dims(), red.dims())?;
    check_dims(green.dims(), blue.dims())?;
    let values = red
        .values()
        .iter()
        .zip(green.values())
        .zip(blue.values())
        .map(|((&r, &g), &b)| (2.0 * g - r - b).clamp(-2.0, 2.0))
        .collect();
    Raster::new(red.width(), red.height(), values)
}

/// `index > threshold`, strictly.
pub fn threshold_vegetation(index: &Raster, threshold: f32) -> BinaryMask {
    let bits = index.values().iter().map(|&v| v > threshold).collect();
    BinaryMask::new(index.width(), index.height(), bits).expect("same dimensions as the index")
}
