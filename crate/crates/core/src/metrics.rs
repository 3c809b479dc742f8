//! Pixel-level evaluation: confusion matrices, per-class F1, and the split
//! of a tile into intra-row and inter-row regions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Result};
use crate::instances::label_components;
use crate::raster::{BinaryMask, Class, ClassMask};

/// `counts[gt][pred]` pixel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn add(&mut self, gt: Class, pred: Class) {
        self.counts[gt.index()][pred.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for g in 0..3 {
            for p in 0..3 {
                self.counts[g][p] += other.counts[g][p];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, gt: Class, pred: Class) -> u64 {
        self.counts[gt.index()][pred.index()]
    }

    /// F1 of one class; 1 when the class is absent from both prediction and
    /// ground truth.
    pub fn f1(&self, class: Class) -> f64 {
        let k = class.index();
        let tp = self.counts[k][k];
        let fp: u64 = (0..3).filter(|&g| g != k).map(|g| self.counts[g][k]).sum();
        let fn_: u64 = (0..3).filter(|&p| p != k).map(|p| self.counts[k][p]).sum();
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct F1Scores {
    pub background: f64,
    pub crop: f64,
    pub weed: f64,
    #[serde(rename = "macro")]
    pub macro_f1: f64,
}

impl F1Scores {
    pub fn per_class(&self) -> [f64; 3] {
        [self.background, self.crop, self.weed]
    }

    fn from_array(v: [f64; 3]) -> Self {
        Self {
            background: v[0],
            crop: v[1],
            weed: v[2],
            macro_f1: (v[0] + v[1] + v[2]) / 3.0,
        }
    }
}

pub fn f1_scores(cm: &ConfusionMatrix) -> F1Scores {
    F1Scores::from_array(Class::ALL.map(|c| cm.f1(c)))
}

/// Confusion over the pixels of `region` (all pixels when `None`).
pub fn confusion(pred: &ClassMask, gt: &ClassMask, region: Option<&BinaryMask>) -> Result<ConfusionMatrix> {
    check_dims(gt.dims(), pred.dims())?;
    if let Some(region) = region {
        check_dims(gt.dims(), region.dims())?;
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&g, &p)) in gt.labels().iter().zip(pred.labels()).enumerate() {
        if region.is_none_or(|m| m.bits()[i]) {
            cm.add(g, p);
        }
    }
    Ok(cm)
}

/// Splits the tile into intra-row and inter-row pixels.
///
/// Plants are the 8-connected components of the union of ground-truth and
/// predicted vegetation. A plant touching the row mask is intra-row as a
/// whole, otherwise inter-row. Non-plant pixels are intra-row exactly when
/// they lie on the row mask. The two regions partition the tile.
pub fn row_regions(pred: &ClassMask, gt: &ClassMask, row_mask: &BinaryMask) -> Result<(BinaryMask, BinaryMask)> {
    check_dims(gt.dims(), pred.dims())?;
    check_dims(gt.dims(), row_mask.dims())?;
    let plants = gt.vegetation().union(&pred.vegetation())?;
    let labels = label_components(&plants);
    let max_label = labels.labels.iter().copied().max().unwrap_or(0) as usize;
    let mut touches = vec![false; max_label + 1];
    for (i, &l) in labels.labels.iter().enumerate() {
        if l != 0 && row_mask.bits()[i] {
            touches[l as usize] = true;
        }
    }
    let (w, h) = gt.dims();
    let intra = BinaryMask::from_fn(w, h, |r, c| match labels.get(r, c) {
        0 => row_mask.get(r, c),
        l => touches[l as usize],
    });
    let inter = intra.complement();
    Ok((intra, inter))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionConfusion {
    pub full: ConfusionMatrix,
    pub intra: ConfusionMatrix,
    pub inter: ConfusionMatrix,
}

impl RegionConfusion {
    pub fn merge(&mut self, other: &RegionConfusion) {
        self.full.merge(&other.full);
        self.intra.merge(&other.intra);
        self.inter.merge(&other.inter);
    }
}

/// Full, intra-row, and inter-row confusion matrices for one tile.
pub fn row_partitioned_confusion(pred: &ClassMask, gt: &ClassMask, row_mask: &BinaryMask) -> Result<RegionConfusion> {
    let (intra, inter) = row_regions(pred, gt, row_mask)?;
    Ok(RegionConfusion {
        full: confusion(pred, gt, None)?,
        intra: confusion(pred, gt, Some(&intra))?,
        inter: confusion(pred, gt, Some(&inter))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionF1 {
    pub full: F1Scores,
    pub intra: F1Scores,
    pub inter: F1Scores,
}

pub fn row_partitioned_f1(pred: &ClassMask, gt: &ClassMask, row_mask: &BinaryMask) -> Result<RegionF1> {
    Ok(region_f1(&row_partitioned_confusion(pred, gt, row_mask)?))
}

pub fn region_f1(rc: &RegionConfusion) -> RegionF1 {
    RegionF1 {
        full: f1_scores(&rc.full),
        intra: f1_scores(&rc.intra),
        inter: f1_scores(&rc.inter),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub f1: F1Scores,
    pub confusion: ConfusionMatrix,
    pub pixels: u64,
}

impl SectionReport {
    fn new(cm: &ConfusionMatrix) -> Self {
        Self {
            f1: f1_scores(cm),
            confusion: *cm,
            pixels: cm.total(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub full: SectionReport,
    pub intra: SectionReport,
    pub inter: SectionReport,
}

impl RegionReport {
    pub fn new(rc: &RegionConfusion) -> Self {
        Self {
            full: SectionReport::new(&rc.full),
            intra: SectionReport::new(&rc.intra),
            inter: SectionReport::new(&rc.inter),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileEval {
    pub map_id: String,
    pub tile: String,
    pub confusion: RegionConfusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub map_id: String,
    pub n_tiles: usize,
    #[serde(flatten)]
    pub report: RegionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpread {
    pub full: F1Scores,
    pub intra: F1Scores,
    pub inter: F1Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileReport {
    pub map_id: String,
    pub tile: String,
    #[serde(flatten)]
    pub report: RegionReport,
}

/// Evaluation over a set of tiles: pooled scores, per-map scores, and the
/// mean and (population) standard deviation of the per-map F1 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_tiles: usize,
    pub overall: RegionReport,
    pub maps: Vec<MapReport>,
    pub map_mean: RegionSpread,
    pub map_std: RegionSpread,
    pub tiles: Vec<TileReport>,
}

fn mean_std(values: &[F1Scores]) -> (F1Scores, F1Scores) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (F1Scores::default(), F1Scores::default());
    }
    let fields = |f: &F1Scores| [f.background, f.crop, f.weed, f.macro_f1];
    let mut mean = [0.0; 4];
    for v in values {
        for (m, x) in mean.iter_mut().zip(fields(v)) {
            *m += x / n;
        }
    }
    let mut var = [0.0; 4];
    for v in values {
        for ((s, x), m) in var.iter_mut().zip(fields(v)).zip(mean) {
            *s += (x - m).powi(2) / n;
        }
    }
    let make = |a: [f64; 4]| F1Scores {
        background: a[0],
        crop: a[1],
        weed: a[2],
        macro_f1: a[3],
    };
    (make(mean), make(var.map(f64::sqrt)))
}

impl EvalReport {
    pub fn from_tiles(tiles: &[TileEval]) -> Self {
        let mut overall = RegionConfusion::default();
        let mut per_map: BTreeMap<&str, (usize, RegionConfusion)> = BTreeMap::new();
        for t in tiles {
            overall.merge(&t.confusion);
            let entry = per_map.entry(t.map_id.as_str()).or_default();
            entry.0 += 1;
            entry.1.merge(&t.confusion);
        }
        let maps: Vec<MapReport> = per_map
            .into_iter()
            .map(|(id, (n, rc))| MapReport {
                map_id: id.to_owned(),
                n_tiles: n,
                report: RegionReport::new(&rc),
            })
            .collect();
        let spread = |pick: fn(&RegionReport) -> F1Scores| {
            mean_std(&maps.iter().map(|m| pick(&m.report)).collect::<Vec<_>>())
        };
        let (full_m, full_s) = spread(|r| r.full.f1);
        let (intra_m, intra_s) = spread(|r| r.intra.f1);
        let (inter_m, inter_s) = spread(|r| r.inter.f1);
        Self {
            n_tiles: tiles.len(),
            overall: RegionReport::new(&overall),
            maps,
            map_mean: RegionSpread {
                full: full_m,
                intra: intra_m,
                inter: inter_m,
            },
            map_std: RegionSpread {
                full: full_s,
                intra: intra_s,
                inter: inter_s,
            },
            tiles: tiles
                .iter()
                .map(|t| TileReport {
                    map_id: t.map_id.clone(),
                    tile: t.tile.clone(),
                    report: RegionReport::new(&t.confusion),
                })
                .collect(),
        }
    }
}
