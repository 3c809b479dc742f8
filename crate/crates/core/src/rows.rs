//! Crop-row selection, rasterization, and alignment-angle estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hough::{origin, rotate_line, HoughAccumulator, HoughLine};
use crate::ks::ks_uniformity_test;
use crate::raster::{sin_cos_deg, BinaryMask};

/// Lines kept for one tile, with the angle-uniformity test that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDetection {
    pub lines: Vec<HoughLine>,
    /// False when the angles looked uniform (or there were no lines) and all
    /// lines were dropped.
    pub retained: bool,
    pub ks_statistic: f64,
    pub p_value: f64,
}

impl RowDetection {
    pub fn empty() -> Self {
        Self {
            lines: Vec::new(),
            retained: false,
            ks_statistic: 0.0,
            p_value: 1.0,
        }
    }

    /// The same detection expressed in a grid rotated by `angle`.
    pub fn rotated(&self, width: usize, height: usize, angle: f64) -> Self {
        Self {
            lines: self
                .lines
                .iter()
                .map(|l| rotate_line(l, width, height, angle))
                .collect(),
            ..self.clone()
        }
    }
}

/// Keeps the lines unless their angles are uniformly spread, in which case
/// every line is discarded.
pub fn filter_lines(lines: Vec<HoughLine>, alpha: f64) -> Result<RowDetection> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if lines.is_empty() {
        return Ok(RowDetection::empty());
    }
    let thetas: Vec<f64> = lines.iter().map(|l| l.theta).collect();
    let ks = ks_uniformity_test(&thetas, alpha)?;
    let retained = !ks.uniform;
    Ok(RowDetection {
        lines: if retained { lines } else { Vec::new() },
        retained,
        ks_statistic: ks.statistic,
        p_value: ks.p_value,
    })
}

/// Draws `line` into `mask` with the given thickness.
///
/// The line is walked one pixel at a time along its major axis; at each step
/// the `thickness` pixels along the minor axis closest to the exact line
/// position are set. With thickness 1 this is the Bresenham pixel choice.
pub fn draw_line(mask: &mut BinaryMask, line: &HoughLine, thickness: usize) {
    let (width, height) = mask.dims();
    let (ox, oy) = origin(width, height);
    let (sin, cos) = sin_cos_deg(line.theta);
    let span = (thickness as f64 - 1.0) / 2.0;
    // x cos + y sin = rho, in coordinates relative to the origin.
    if sin.abs() >= cos.abs() {
        // Mostly horizontal: one or more rows per column.
        for col in 0..width {
            let x = col as f64 - ox;
            let y = (line.rho - x * cos) / sin + oy;
            let start = (y - span).round() as i64;
            for row in start..start + thickness as i64 {
                if row >= 0 && (row as usize) < height {
                    mask.set(row as usize, col, true);
                }
            }
        }
    } else {
        for row in 0..height {
            let y = row as f64 - oy;
            let x = (line.rho - y * sin) / cos + ox;
            let start = (x - span).round() as i64;
            for col in start..start + thickness as i64 {
                if col >= 0 && (col as usize) < width {
                    mask.set(row, col as usize, true);
                }
            }
        }
    }
}

/// Row mask for a detection; empty when the detection was not retained.
pub fn rasterize_rows(detection: &RowDetection, width: usize, height: usize, thickness: usize) -> BinaryMask {
    assert!(thickness >= 1, "row thickness must be at least 1");
    let mut mask = BinaryMask::empty(width, height);
    if detection.retained {
        for line in &detection.lines {
            draw_line(&mut mask, line, thickness);
        }
    }
    mask
}

/// Rotation (degrees, in (−90, 90]) that turns the dominant line direction of
/// `mask` horizontal.
///
/// The direction is the θ whose projection profile is sharpest, measured by
/// the sum of squared accumulator votes over ρ. Ties go to the smaller θ.
pub fn estimate_alignment_angle(mask: &BinaryMask, theta_step: f64, rho_step: f64) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let acc = HoughAccumulator::accumulate(mask, theta_step, rho_step);
    let mut best = (0, 0u64);
    for t in 0..acc.n_theta() {
        let energy: u64 = (0..acc.n_rho()).map(|r| u64::from(acc.votes(t, r)).pow(2)).sum();
        if energy > best.1 {
            best = (t, energy);
        }
    }
    let mut angle = 90.0 - acc.theta_of(best.0);
    if angle <= -90.0 {
        angle += 180.0;
    }
    Ok(angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(theta: f64, rho: f64) -> HoughLine {
        HoughLine { rho, theta, votes: 200 }
    }

    #[test]
    fn empty_input_is_not_retained() {
        let det = filter_lines(Vec::new(), 0.1).unwrap();
        assert!(!det.retained);
        assert!(det.lines.is_empty());
    }

    #[test]
    fn concentrated_angles_are_kept() {
        let lines: Vec<HoughLine> = (0..20).map(|i| line(89.0 + (i % 5) as f64 * 0.5, i as f64)).collect();
        let det = filter_lines(lines.clone(), 0.1).unwrap();
        assert!(det.retained);
        assert_eq!(det.lines, lines);
    }

    #[test]
    fn uniform_angles_are_discarded_at_one_minus_alpha() {
        // Under the null the test rejects (keeps lines) about alpha of the time.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws = 4000;
        let discarded = (0..draws)
            .filter(|_| {
                let lines: Vec<HoughLine> = (0..20).map(|_| line(rng.random_range(0.0..180.0), 0.0)).collect();
                !filter_lines(lines, 0.1).unwrap().retained
            })
            .count();
        let rate = discarded as f64 / draws as f64;
        assert!((rate - 0.9).abs() < 0.02, "discard rate {rate}");
    }

    #[test]
    fn discarded_detection_rasterizes_to_nothing() {
        let det = RowDetection {
            lines: vec![line(90.0, 0.0)],
            retained: false,
            ks_statistic: 0.0,
            p_value: 1.0,
        };
        assert!(rasterize_rows(&det, 16, 16, 2).is_empty());
    }

    #[test]
    fn horizontal_line_hits_exactly_one_row() {
        let (w, h) = (40, 30);
        let det = RowDetection {
            lines: vec![line(90.0, 10.0 - (h / 2) as f64)],
            retained: true,
            ks_statistic: 1.0,
            p_value: 0.0,
        };
        let mask = rasterize_rows(&det, w, h, 1);
        for r in 0..h {
            for c in 0..w {
                assert_eq!(mask.get(r, c), r == 10);
            }
        }
    }

    #[test]
    fn thick_diagonal_stays_near_analytic_line() {
        let (w, h) = (50, 50);
        let det = RowDetection {
            lines: vec![line(45.0, 3.0)],
            retained: true,
            ks_statistic: 1.0,
            p_value: 0.0,
        };
        let mask = rasterize_rows(&det, w, h, 3);
        assert!(mask.count() > 0);
        let (ox, oy) = origin(w, h);
        let (s, c) = 45f64.to_radians().sin_cos();
        for (r, col) in mask.iter_set() {
            let dist = ((col as f64 - ox) * c + (r as f64 - oy) * s - 3.0).abs();
            assert!(dist <= 1.5 + 1e-9, "({r}, {col}) at {dist}");
        }
    }

    #[test]
    fn single_line_popcount_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (w, h) = (rng.random_range(5..60), rng.random_range(5..60));
            let l = line(rng.random_range(0.0..180.0), rng.random_range(-10.0..10.0));
            let det = RowDetection {
                lines: vec![l],
                retained: true,
                ks_statistic: 1.0,
                p_value: 0.0,
            };
            let mask = rasterize_rows(&det, w, h, 1);
            assert!(mask.count() <= w.max(h));
            // Every major-axis step whose exact crossing lies inside the canvas
            // contributes a pixel.
            let (ox, oy) = origin(w, h);
            let (s, c) = crate::raster::sin_cos_deg(l.theta);
            let inside = if s.abs() >= c.abs() {
                (0..w)
                    .filter(|&col| {
                        let y = (l.rho - (col as f64 - ox) * c) / s + oy;
                        y >= 0.0 && y <= h as f64 - 1.0
                    })
                    .count()
            } else {
                (0..h)
                    .filter(|&row| {
                        let x = (l.rho - (row as f64 - oy) * s) / c + ox;
                        x >= 0.0 && x <= w as f64 - 1.0
                    })
                    .count()
            };
            assert!(mask.count() >= inside);
        }
    }

    fn stripes(size: usize, theta: f64, spacing: f64) -> BinaryMask {
        let (ox, oy) = origin(size, size);
        let (s, c) = theta.to_radians().sin_cos();
        BinaryMask::from_fn(size, size, |r, col| {
            let rho = (col as f64 - ox) * c + (r as f64 - oy) * s;
            let phase = rho.rem_euclid(spacing);
            phase < 3.0 && ((r * 7 + col * 3) % 11) != 0
        })
    }

    #[test]
    fn alignment_of_axis_aligned_rows() {
        assert_eq!(estimate_alignment_angle(&stripes(128, 90.0, 24.0), 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(estimate_alignment_angle(&stripes(128, 0.0, 24.0), 1.0, 1.0).unwrap(), 90.0);
        assert!(matches!(
            estimate_alignment_angle(&BinaryMask::empty(8, 8), 1.0, 1.0),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn alignment_of_oblique_rows() {
        let angle = estimate_alignment_angle(&stripes(256, 60.0, 32.0), 1.0, 1.0).unwrap();
        assert!((angle - 30.0).abs() <= 1.0, "{angle}");
        let angle = estimate_alignment_angle(&stripes(256, 150.0, 32.0), 1.0, 1.0).unwrap();
        assert!((angle + 60.0).abs() <= 1.0, "{angle}");
    }
}
