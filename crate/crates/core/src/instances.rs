//! Plant instances: connected components and superpixel pieces of the
//! vegetation mask.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Result};
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    ConnectedComponent,
    Superpixel,
}

/// One detected plant. Pixels are `(row, col)` in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantInstance {
    pub id: u32,
    pub pixels: Vec<(usize, usize)>,
    pub source: InstanceSource,
}

impl PlantInstance {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Per-pixel integer labels, e.g. a superpixel assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl LabelGrid {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Number of distinct labels present.
    pub fn distinct(&self) -> usize {
        let mut seen: Vec<u32> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // slot 0 is unused so that 0 can mean "unlabelled"
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi as usize] = lo;
        }
    }
}

/// 8-connected components of `mask`, as a label grid with 0 for unset pixels
/// and dense ids from 1 in raster order of each component's first pixel.
pub fn label_components(mask: &BinaryMask) -> LabelGrid {
    let (width, height) = mask.dims();
    let mut labels = vec![0u32; width * height];
    let mut sets = DisjointSet::new();

    for row in 0..height {
        for col in 0..width {
            if !mask.get(row, col) {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut current = 0u32;
            let neighbours = [
                (row, col.wrapping_sub(1)),
                (row.wrapping_sub(1), col.wrapping_sub(1)),
                (row.wrapping_sub(1), col),
                (row.wrapping_sub(1), col + 1),
            ];
            for (r, c) in neighbours {
                if r >= height || c >= width {
                    continue;
                }
                let l = labels[r * width + c];
                if l == 0 {
                    continue;
                }
                if current == 0 {
                    current = l;
                } else {
                    sets.union(current, l);
                }
            }
            if current == 0 {
                current = sets.make();
            }
            labels[row * width + col] = current;
        }
    }

    // Second pass: resolve roots and renumber densely in scan order. Roots are
    // always the smallest provisional label of their set, and provisional
    // labels are created in scan order, so first-seen order is preserved.
    let mut dense = vec![0u32; sets.parent.len()];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = sets.find(*l) as usize;
        if dense[root] == 0 {
            next += 1;
            dense[root] = next;
        }
        *l = dense[root];
    }

    LabelGrid {
        width,
        height,
        labels,
    }
}

/// Plant instances from the 8-connected components of the vegetation mask.
pub fn connected_components(mask: &BinaryMask) -> Vec<PlantInstance> {
    let grid = label_components(mask);
    group_pixels(&grid, |_, _| true, InstanceSource::ConnectedComponent)
}

/// One instance per superpixel that contains vegetation; its pixels are the
/// superpixel restricted to the mask. Ids are dense from 1 in raster order of
/// each instance's first pixel.
pub fn instances_from_superpixels(labels: &LabelGrid, mask: &BinaryMask) -> Result<Vec<PlantInstance>> {
    check_dims(mask.dims(), labels.dims())?;
    // Shift so that superpixel label 0 is not mistaken for "no instance".
    let shifted = LabelGrid {
        width: labels.width,
        height: labels.height,
        labels: labels.labels.iter().map(|&l| l.saturating_add(1)).collect(),
    };
    Ok(group_pixels(
        &shifted,
        |r, c| mask.get(r, c),
        InstanceSource::Superpixel,
    ))
}

fn group_pixels(
    grid: &LabelGrid,
    keep: impl Fn(usize, usize) -> bool,
    source: InstanceSource,
) -> Vec<PlantInstance> {
    let mut slot_of: std::collections::HashMap<u32, usize> = std::collections::HashMap::new();
    let mut instances: Vec<PlantInstance> = Vec::new();
    for row in 0..grid.height {
        for col in 0..grid.width {
            let l = grid.get(row, col);
            if l == 0 || !keep(row, col) {
                continue;
            }
            let slot = *slot_of.entry(l).or_insert_with(|| {
                instances.push(PlantInstance {
                    id: instances.len() as u32 + 1,
                    pixels: Vec::new(),
                    source,
                });
                instances.len() - 1
            });
            instances[slot].pixels.push((row, col));
        }
    }
    instances
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Stack-based flood fill labelling, scanning seeds in raster order.
    fn flood_fill_oracle(mask: &BinaryMask) -> Vec<u32> {
        let (w, h) = mask.dims();
        let mut labels = vec![0u32; w * h];
        let mut next = 0;
        for start in 0..w * h {
            if !mask.bits()[start] || labels[start] != 0 {
                continue;
            }
            next += 1;
            let mut stack = vec![start];
            labels[start] = next;
            while let Some(i) = stack.pop() {
                let (r, c) = ((i / w) as i64, (i % w) as i64);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                            continue;
                        }
                        let j = nr as usize * w + nc as usize;
                        if mask.bits()[j] && labels[j] == 0 {
                            labels[j] = next;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        labels
    }

    fn random_mask(seed: u64, w: usize, h: usize, p: f64) -> BinaryMask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p))
    }

    fn assert_partition(instances: &[PlantInstance], mask: &BinaryMask) {
        let mut covered = BinaryMask::empty(mask.width(), mask.height());
        for inst in instances {
            assert!(!inst.is_empty());
            for &(r, c) in &inst.pixels {
                assert!(!covered.get(r, c), "pixel ({r}, {c}) in two instances");
                covered.set(r, c, true);
            }
        }
        assert_eq!(&covered, mask);
    }

    #[test]
    fn empty_mask_has_no_components() {
        assert!(connected_components(&BinaryMask::empty(5, 5)).is_empty());
    }

    #[test]
    fn diagonal_touch_is_one_component() {
        let mut mask = BinaryMask::empty(4, 4);
        mask.set(1, 1, true);
        mask.set(2, 2, true);
        let cc = connected_components(&mask);
        assert_eq!(cc.len(), 1);
        assert_eq!(cc[0].pixels, vec![(1, 1), (2, 2)]);
        assert_eq!(cc[0].source, InstanceSource::ConnectedComponent);
    }

    #[test]
    fn u_shape_merges_late() {
        // Two arms only joined on the bottom row exercise the union step.
        let rows = ["#.#.#", "#.#.#", "#####"];
        let mask = BinaryMask::from_fn(5, 3, |r, c| rows[r].as_bytes()[c] == b'#');
        let cc = connected_components(&mask);
        assert_eq!(cc.len(), 1);
        assert_eq!(cc[0].len(), mask.count());
    }

    #[test]
    fn labelling_matches_flood_fill_on_random_masks() {
        for seed in 0..20 {
            for p in [0.2, 0.45, 0.6] {
                let mask = random_mask(seed, 64, 64, p);
                let grid = label_components(&mask);
                assert_eq!(grid.labels, flood_fill_oracle(&mask), "seed {seed} p {p}");
                let cc = connected_components(&mask);
                assert_partition(&cc, &mask);
                for (i, inst) in cc.iter().enumerate() {
                    assert_eq!(inst.id as usize, i + 1);
                }
            }
        }
    }

    #[test]
    fn superpixel_instances() {
        let mask = BinaryMask::empty(6, 6);
        let one = LabelGrid {
            width: 6,
            height: 6,
            labels: vec![0; 36],
        };
        assert!(instances_from_superpixels(&one, &mask).unwrap().is_empty());

        let veg = random_mask(3, 6, 6, 0.5);
        let inst = instances_from_superpixels(&one, &veg).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].len(), veg.count());
        assert_eq!(inst[0].source, InstanceSource::Superpixel);
    }

    #[test]
    fn superpixel_instances_partition_the_mask() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels = LabelGrid {
                width: 32,
                height: 24,
                labels: (0..32 * 24).map(|_| rng.random_range(0..12)).collect(),
            };
            let mask = random_mask(seed + 100, 32, 24, 0.4);
            let inst = instances_from_superpixels(&labels, &mask).unwrap();
            assert_partition(&inst, &mask);
            for i in &inst {
                let l = labels.get(i.pixels[0].0, i.pixels[0].1);
                assert!(i.pixels.iter().all(|&(r, c)| labels.get(r, c) == l));
            }
        }
    }

    proptest! {
        #[test]
        fn component_count_is_transpose_invariant(seed in any::<u64>(), w in 1usize..20, h in 1usize..20) {
            let mask = random_mask(seed, w, h, 0.4);
            prop_assert_eq!(
                connected_components(&mask).len(),
                connected_components(&mask.transpose()).len()
            );
        }
    }
}
