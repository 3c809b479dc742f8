//! Hough line accumulator over binary masks.
//!
//! Lines are parameterized as `ρ = x·cos θ + y·sin θ` with `(x, y)` measured
//! from the pixel `(h/2, w/2)` (integer division), θ in degrees in `[0, 180)`.
//! θ = 90° is a horizontal line, θ = 0° a vertical one.

use serde::{Deserialize, Serialize};

use crate::raster::{sin_cos_deg, BinaryMask, Rotation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughLine {
    /// Signed distance in pixels from the accumulator origin.
    pub rho: f64,
    /// Normal angle in degrees, `[0, 180)`.
    pub theta: f64,
    pub votes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughParams {
    pub theta_step: f64,
    pub rho_step: f64,
    pub threshold: u32,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self {
            theta_step: 1.0,
            rho_step: 1.0,
            threshold: 160,
        }
    }
}

/// Origin of the `(x, y)` frame used for ρ.
pub fn origin(width: usize, height: usize) -> (f64, f64) {
    ((width / 2) as f64, (height / 2) as f64)
}

/// Vote counts indexed by `(theta_index, rho_index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoughAccumulator {
    theta_step: f64,
    rho_step: f64,
    n_theta: usize,
    n_rho: usize,
    rho_offset: i64,
    votes: Vec<u32>,
}

impl HoughAccumulator {
    /// Every set pixel votes once for each θ bin, into the ρ bin nearest to
    /// its exact ρ.
    pub fn accumulate(mask: &BinaryMask, theta_step: f64, rho_step: f64) -> Self {
        assert!(theta_step > 0.0 && rho_step > 0.0, "Hough steps must be positive");
        let (width, height) = mask.dims();
        let n_theta = ((180.0 / theta_step).ceil() as usize).max(1);
        let max_rho = (width as f64).hypot(height as f64) / 2.0;
        let rho_offset = (max_rho / rho_step).ceil() as i64 + 1;
        let n_rho = (2 * rho_offset + 1) as usize;
        let trig: Vec<(f64, f64)> = (0..n_theta)
            .map(|t| sin_cos_deg(t as f64 * theta_step))
            .collect();
        let (ox, oy) = origin(width, height);

        let mut votes = vec![0u32; n_theta * n_rho];
        for (row, col) in mask.iter_set() {
            let x = col as f64 - ox;
            let y = row as f64 - oy;
            for (t, &(sin, cos)) in trig.iter().enumerate() {
                let bin = ((x * cos + y * sin) / rho_step).round() as i64 + rho_offset;
                votes[t * n_rho + bin as usize] += 1;
            }
        }
        Self {
            theta_step,
            rho_step,
            n_theta,
            n_rho,
            rho_offset,
            votes,
        }
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn votes(&self, theta_index: usize, rho_index: usize) -> u32 {
        self.votes[theta_index * self.n_rho + rho_index]
    }

    pub fn theta_of(&self, theta_index: usize) -> f64 {
        theta_index as f64 * self.theta_step
    }

    pub fn rho_of(&self, rho_index: usize) -> f64 {
        (rho_index as i64 - self.rho_offset) as f64 * self.rho_step
    }

    fn line(&self, t: usize, r: usize) -> HoughLine {
        HoughLine {
            rho: self.rho_of(r),
            theta: self.theta_of(t),
            votes: self.votes(t, r),
        }
    }

    /// All cells with at least `threshold` votes, before suppression, in
    /// `(theta, rho)` index order.
    pub fn cells_above(&self, threshold: u32) -> Vec<HoughLine> {
        let mut out = Vec::new();
        for t in 0..self.n_theta {
            for r in 0..self.n_rho {
                if self.votes(t, r) >= threshold {
                    out.push(self.line(t, r));
                }
            }
        }
        out
    }

    /// Cells at or above `threshold` that are maxima of their 3x3
    /// neighbourhood. Plateaus yield one cell: a neighbour earlier in index
    /// order must be strictly lower, a later one merely not higher.
    pub fn peaks(&self, threshold: u32) -> Vec<HoughLine> {
        let mut out = Vec::new();
        for t in 0..self.n_theta {
            for r in 0..self.n_rho {
                let v = self.votes(t, r);
                if v < threshold || v == 0 {
                    continue;
                }
                let mut is_peak = true;
                'nbhd: for dt in -1i64..=1 {
                    for dr in -1i64..=1 {
                        if dt == 0 && dr == 0 {
                            continue;
                        }
                        let (nt, nr) = (t as i64 + dt, r as i64 + dr);
                        if nt < 0 || nr < 0 || nt >= self.n_theta as i64 || nr >= self.n_rho as i64 {
                            continue;
                        }
                        let nv = self.votes(nt as usize, nr as usize);
                        let earlier = (dt, dr) < (0, 0);
                        if nv > v || (earlier && nv == v) {
                            is_peak = false;
                            break 'nbhd;
                        }
                    }
                }
                if is_peak {
                    out.push(self.line(t, r));
                }
            }
        }
        sort_lines(&mut out);
        out
    }
}

/// Votes descending, then θ and ρ ascending.
pub fn sort_lines(lines: &mut [HoughLine]) {
    lines.sort_by(|a, b| {
        b.votes
            .cmp(&a.votes)
            .then(a.theta.total_cmp(&b.theta))
            .then(a.rho.total_cmp(&b.rho))
    });
}

/// Detected lines after 3x3 non-maximum suppression, strongest first.
pub fn hough_lines(mask: &BinaryMask, params: HoughParams) -> Vec<HoughLine> {
    assert!(params.threshold >= 1, "Hough threshold must be at least 1");
    HoughAccumulator::accumulate(mask, params.theta_step, params.rho_step).peaks(params.threshold)
}

/// Re-expresses a line after rotating its `width`x`height` grid by `angle`
/// degrees (see [`Rotation`]). The result keeps θ in `[0, 180)`.
pub fn rotate_line(line: &HoughLine, width: usize, height: usize, angle: f64) -> HoughLine {
    let rot = Rotation::new(width, height, angle);
    let (ox, oy) = origin(width, height);
    let (sin, cos) = sin_cos_deg(line.theta);
    // Foot of the perpendicular from the origin, in pixel coordinates.
    let (px, py) = rot.forward(ox + line.rho * cos, oy + line.rho * sin);
    // Snap values that only differ from a whole number by rounding noise.
    let snap = |v: f64| if (v - v.round()).abs() < 1e-9 { v.round() } else { v };
    let mut theta = snap((line.theta + angle).rem_euclid(360.0)) % 360.0;
    let (nsin, ncos) = sin_cos_deg(theta);
    let mut rho = snap((px - ox) * ncos + (py - oy) * nsin);
    if theta >= 180.0 {
        theta -= 180.0;
        rho = -rho;
    }
    HoughLine {
        rho,
        theta,
        votes: line.votes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Nearest integer with exact half-way values rounded away from zero,
    /// tolerating trig rounding noise.
    fn round_exact(rho: f64) -> i64 {
        let r = rho.abs();
        let m = if (r - r.floor() - 0.5).abs() < 1e-9 { r.floor() + 1.0 } else { r.round() };
        (m * rho.signum()) as i64
    }

    /// Cell-major brute force: for every (θ, ρ) cell count the pixels whose
    /// ρ rounds into it.
    fn brute_force_cells(mask: &BinaryMask, threshold: u32) -> Vec<(u64, i64, u32)> {
        let (w, h) = mask.dims();
        let (ox, oy) = ((w / 2) as f64, (h / 2) as f64);
        let max_bin = ((w as f64).hypot(h as f64) / 2.0).ceil() as i64 + 1;
        let mut out = Vec::new();
        for t in 0..180u64 {
            let (s, c) = (t as f64).to_radians().sin_cos();
            for bin in -max_bin..=max_bin {
                let mut n = 0;
                for row in 0..h {
                    for col in 0..w {
                        if mask.get(row, col) {
                            let rho = (col as f64 - ox) * c + (row as f64 - oy) * s;
                            if round_exact(rho) == bin {
                                n += 1;
                            }
                        }
                    }
                }
                if n >= threshold {
                    out.push((t, bin, n));
                }
            }
        }
        out
    }

    #[test]
    fn empty_mask_yields_nothing() {
        assert!(hough_lines(&BinaryMask::empty(32, 32), HoughParams::default()).is_empty());
    }

    #[test]
    fn single_row_of_pixels() {
        let mut mask = BinaryMask::empty(256, 256);
        let row = 40;
        for col in 20..220 {
            mask.set(row, col, true);
        }
        let lines = hough_lines(&mask, HoughParams::default());
        assert_eq!(lines.len(), 1, "{lines:?}");
        assert_eq!(lines[0].theta, 90.0);
        assert_eq!(lines[0].votes, 200);
        assert_eq!(lines[0].rho, row as f64 - 128.0);

        let strict = hough_lines(&mask, HoughParams { threshold: 201, ..Default::default() });
        assert!(strict.is_empty());
    }

    #[test]
    fn accumulator_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let mask = BinaryMask::from_fn(24, 20, |_, _| rng.random_bool(0.2));
            let acc = HoughAccumulator::accumulate(&mask, 1.0, 1.0);
            let got: Vec<(u64, i64, u32)> = acc
                .cells_above(3)
                .iter()
                .map(|l| (l.theta as u64, l.rho as i64, l.votes))
                .collect();
            assert_eq!(got, brute_force_cells(&mask, 3));
        }
    }

    #[test]
    fn raising_threshold_never_adds_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mask = BinaryMask::from_fn(48, 48, |_, _| rng.random_bool(0.3));
        let acc = HoughAccumulator::accumulate(&mask, 1.0, 1.0);
        let mut prev = acc.cells_above(1);
        for t in [5, 10, 15, 20, 25] {
            let next = acc.cells_above(t);
            assert!(next.iter().all(|l| prev.contains(l)));
            prev = next;
        }
    }

    #[test]
    fn plateau_produces_single_peak() {
        // Two pixels: many (θ, ρ) cells tie at 2 votes; suppression must not
        // return duplicates from the same plateau.
        let mut mask = BinaryMask::empty(9, 9);
        mask.set(4, 2, true);
        mask.set(4, 6, true);
        let peaks = HoughAccumulator::accumulate(&mask, 1.0, 1.0).peaks(2);
        for (i, a) in peaks.iter().enumerate() {
            for b in &peaks[i + 1..] {
                let adjacent = (a.theta - b.theta).abs() <= 1.0 && (a.rho - b.rho).abs() <= 1.0;
                assert!(!adjacent, "{a:?} and {b:?} are neighbours");
            }
        }
    }

    #[test]
    fn lines_sorted_by_votes_then_theta() {
        let mut mask = BinaryMask::empty(64, 64);
        for i in 0..64 {
            mask.set(10, i, true);
            if i < 40 {
                mask.set(i, 50, true);
            }
        }
        let lines = hough_lines(&mask, HoughParams { threshold: 30, ..Default::default() });
        assert_eq!(lines[0].theta, 90.0);
        assert_eq!(lines[0].votes, 64);
        assert!(lines.windows(2).all(|w| w[0].votes >= w[1].votes));
        assert!(lines.iter().any(|l| l.theta == 0.0 && l.rho == 50.0 - 32.0));
    }

    #[test]
    fn rotate_line_follows_pixel_rotation() {
        // A horizontal row rotated by 90° becomes a vertical column; compare
        // against the Hough peak of the rotated mask.
        let size = 65;
        let mut mask = BinaryMask::empty(size, size);
        for c in 0..size {
            mask.set(20, c, true);
        }
        let line = hough_lines(&mask, HoughParams { threshold: 40, ..Default::default() })[0];
        for angle in [90.0, -90.0, 30.0, 135.0] {
            let rotated = crate::raster::rotate_mask(&mask, angle);
            let detected = hough_lines(&rotated, HoughParams { threshold: 20, ..Default::default() })[0];
            let predicted = rotate_line(&line, size, size, angle);
            assert!((detected.theta - predicted.theta).abs() <= 1.0, "{angle}: {detected:?} vs {predicted:?}");
            assert!((detected.rho - predicted.rho).abs() <= 1.0, "{angle}: {detected:?} vs {predicted:?}");
        }
        let back = rotate_line(&rotate_line(&line, size, size, 37.0), size, size, -37.0);
        assert!((back.theta - line.theta).abs() < 1e-9 && (back.rho - line.rho).abs() < 1e-9);
    }
}
