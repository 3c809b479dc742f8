//! Simple linear iterative clustering over an arbitrary stack of channels.
//!
//! Each pixel is a point `(c_1, …, c_k, x·m/S, y·m/S)` where `m` is the
//! compactness and `S` the seed grid interval. Seeds start on a regular grid
//! and are refined by a fixed number of localized k-means iterations, each
//! centre only competing for pixels within `S` of it along both axes.

use crate::error::{Error, Result};
use crate::instances::LabelGrid;
use crate::raster::Raster;

pub const ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    pub n_clusters: usize,
    pub compactness: f64,
    pub sigma: f64,
}

/// `floor(coefficient · height · width)`, at least 1.
pub fn cluster_count(coefficient: f64, width: usize, height: usize) -> usize {
    ((coefficient * (height * width) as f64).floor() as usize).max(1)
}

/// Seed grid `(columns, rows)` whose product approximates `n_clusters`.
fn seed_grid(n_clusters: usize, width: usize, height: usize) -> (usize, usize) {
    let aspect = width as f64 / height as f64;
    let nx = ((n_clusters as f64 * aspect).sqrt().ceil() as usize).clamp(1, width);
    let ny = ((n_clusters as f64 / nx as f64).round() as usize).clamp(1, height);
    (nx, ny)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// Separable Gaussian blur with symmetric boundary handling.
pub fn gaussian_blur(raster: &Raster, sigma: f64) -> Vec<f64> {
    let (w, h) = raster.dims();
    let src: Vec<f64> = raster.values().iter().map(|&v| v as f64).collect();
    if sigma <= 0.0 {
        return src;
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            tmp[r * w + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * src[r * w + reflect(c as i64 + k as i64 - radius, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            out[r * w + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * tmp[reflect(r as i64 + k as i64 - radius, h) * w + c])
                .sum();
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Center {
    color: Vec<f64>,
    x: f64,
    y: f64,
}

/// Superpixel label grid with labels in `0..k` where `k` is the number of
/// seeds actually placed (close to `n_clusters`).
pub fn slic_superpixels(channels: &[Raster], params: SlicParams) -> Result<LabelGrid> {
    let first = channels.first().ok_or(Error::EmptyInput)?;
    let (width, height) = first.dims();
    for ch in channels {
        crate::error::check_dims((width, height), ch.dims())?;
    }
    let n_pixels = width * height;
    if params.n_clusters == 0 || params.n_clusters > n_pixels {
        return Err(Error::InvalidParam(format!(
            "n_clusters must be in 1..={n_pixels}, got {}",
            params.n_clusters
        )));
    }
    if !(params.compactness >= 0.0) || !(params.sigma >= 0.0) {
        return Err(Error::InvalidParam(
            "compactness and sigma must be non-negative".into(),
        ));
    }

    let smoothed: Vec<Vec<f64>> = channels.iter().map(|c| gaussian_blur(c, params.sigma)).collect();
    let n_ch = smoothed.len();

    let (nx, ny) = seed_grid(params.n_clusters, width, height);
    let step_x = width as f64 / nx as f64;
    let step_y = height as f64 / ny as f64;
    let interval = (n_pixels as f64 / (nx * ny) as f64).sqrt();
    let spatial_weight = (params.compactness / interval).powi(2);

    let mut centers: Vec<Center> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) * step_x - 0.5;
            let y = (j as f64 + 0.5) * step_y - 0.5;
            let idx = (y.round().max(0.0) as usize).min(height - 1) * width
                + (x.round().max(0.0) as usize).min(width - 1);
            centers.push(Center {
                color: smoothed.iter().map(|ch| ch[idx]).collect(),
                x,
                y,
            });
        }
    }

    let reach_x = step_x.max(interval);
    let reach_y = step_y.max(interval);
    let mut labels = vec![u32::MAX; n_pixels];
    let mut best = vec![f64::INFINITY; n_pixels];

    let distance = |center: &Center, idx: usize, x: f64, y: f64| -> f64 {
        let dc: f64 = (0..n_ch)
            .map(|k| (smoothed[k][idx] - center.color[k]).powi(2))
            .sum();
        let ds = (x - center.x).powi(2) + (y - center.y).powi(2);
        dc + ds * spatial_weight
    };

    for _ in 0..ITERATIONS {
        labels.fill(u32::MAX);
        best.fill(f64::INFINITY);
        for (k, center) in centers.iter().enumerate() {
            let r0 = (center.y - reach_y).floor().max(0.0) as usize;
            let r1 = ((center.y + reach_y).ceil() as usize).min(height - 1);
            let c0 = (center.x - reach_x).floor().max(0.0) as usize;
            let c1 = ((center.x + reach_x).ceil() as usize).min(width - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let idx = r * width + c;
                    let d = distance(center, idx, c as f64, r as f64);
                    if d < best[idx] {
                        best[idx] = d;
                        labels[idx] = k as u32;
                    }
                }
            }
        }
        // Pixels outside every window fall back to the globally nearest centre.
        for idx in 0..n_pixels {
            if labels[idx] == u32::MAX {
                let (x, y) = ((idx % width) as f64, (idx / width) as f64);
                let (k, _) = centers
                    .iter()
                    .enumerate()
                    .map(|(k, ctr)| (k, distance(ctr, idx, x, y)))
                    .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
                labels[idx] = k as u32;
            }
        }

        let mut sums = vec![(vec![0.0; n_ch], 0.0, 0.0, 0usize); centers.len()];
        for (idx, &l) in labels.iter().enumerate() {
            let s = &mut sums[l as usize];
            for k in 0..n_ch {
                s.0[k] += smoothed[k][idx];
            }
            s.1 += (idx % width) as f64;
            s.2 += (idx / width) as f64;
            s.3 += 1;
        }
        for (center, (color, sx, sy, n)) in centers.iter_mut().zip(sums) {
            if n == 0 {
                continue;
            }
            let n = n as f64;
            center.color = color.into_iter().map(|v| v / n).collect();
            center.x = sx / n;
            center.y = sy / n;
        }
    }

    Ok(LabelGrid {
        width,
        height,
        labels,
    })
}
