//! Visibility-masked semantic occupancy scoring.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::visibility::{MaskKind, VisibilityMask};
use crate::voxel::{OccGrid, VoxelState};

/// Per-label true positive / false positive / false negative counts.
///
/// Labels `0..classes` are semantic classes; label `classes` is free space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionTable {
    pub classes: usize,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    /// Voxels that passed the mask.
    pub evaluated: u64,
}

impl ConfusionTable {
    pub fn new(classes: usize) -> Self {
        ConfusionTable {
            classes,
            tp: vec![0; classes + 1],
            fp: vec![0; classes + 1],
            fn_: vec![0; classes + 1],
            evaluated: 0,
        }
    }

    pub fn free_label(&self) -> usize {
        self.classes
    }

    /// Records one evaluated voxel.
    pub fn add(&mut self, pred: usize, gt: usize) {
        self.evaluated += 1;
        if pred == gt {
            self.tp[gt] += 1;
        } else {
            self.fp[pred] += 1;
            self.fn_[gt] += 1;
        }
    }

    fn merge(mut self, other: &ConfusionTable) -> Self {
        for l in 0..=self.classes {
            self.tp[l] += other.tp[l];
            self.fp[l] += other.fp[l];
            self.fn_[l] += other.fn_[l];
        }
        self.evaluated += other.evaluated;
        self
    }
}

fn label_of(grid: &OccGrid, i: usize, classes: usize) -> Result<usize> {
    if grid.state_at(i) != VoxelState::Occupied {
        return Ok(classes);
    }
    let c = grid.semantics()[i];
    if c as usize >= classes {
        return Err(Error::ClassOutOfRange { class: c, classes });
    }
    Ok(c as usize)
}

/// Counts TP/FP/FN over voxels where `mask` is set. Non-occupied voxels
/// (free or unobserved) carry the free label.
pub fn confusion(pred: &OccGrid, gt: &OccGrid, mask: &VisibilityMask, classes: usize) -> Result<ConfusionTable> {
    if !pred.spec().same_as(gt.spec()) || !pred.spec().same_as(mask.spec()) || mask.kind() != MaskKind::Joint {
        return Err(Error::SpecMismatch);
    }
    use rayon::prelude::*;
    let n = pred.spec().len();
    (0..n)
        .into_par_iter()
        .with_min_len(1 << 16)
        .filter(|i| mask.values()[*i] != 0)
        .try_fold(
            || ConfusionTable::new(classes),
            |mut t, i| {
                t.add(label_of(pred, i, classes)?, label_of(gt, i, classes)?);
                Ok(t)
            },
        )
        .try_reduce(|| ConfusionTable::new(classes), |a, b| Ok(a.merge(&b)))
}

/// IoU per label (`None` where TP+FP+FN = 0) and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Miou {
    pub per_class: Vec<Option<f64>>,
    /// Mean over labels with a defined IoU; `None` when no label has one.
    pub mean: Option<f64>,
}

pub fn iou(tp: u64, fp: u64, fn_: u64) -> Option<f64> {
    let denom = tp + fp + fn_;
    (denom > 0).then(|| tp as f64 / denom as f64)
}

/// Mean IoU over the semantic classes; free space is scored as an extra
/// label only when `include_free` is set.
pub fn miou(table: &ConfusionTable, include_free: bool) -> Miou {
    let labels = if include_free { table.classes + 1 } else { table.classes };
    let per_class: Vec<Option<f64>> = (0..labels)
        .map(|l| iou(table.tp[l], table.fp[l], table.fn_[l]))
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Miou { per_class, mean }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassScore {
    pub id: usize,
    pub name: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// `null` when the class is absent from both prediction and ground truth.
    pub iou: Option<f64>,
}

/// Machine-readable evaluation summary.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub evaluated_voxels: u64,
    pub include_free: bool,
    pub classes: Vec<ClassScore>,
    /// Absent classes excluded from the mean.
    pub miou: Option<f64>,
    /// Absent classes counted as IoU 0.
    pub miou_absent_as_zero: Option<f64>,
    /// Same as `miou` but without the general-object class.
    pub miou_without_general_object: Option<f64>,
}

impl EvalReport {
    pub fn new(table: &ConfusionTable, ontology: &Ontology, include_free: bool) -> Self {
        let m = miou(table, include_free);
        let classes: Vec<ClassScore> = m
            .per_class
            .iter()
            .enumerate()
            .map(|(l, iou)| ClassScore {
                id: l,
                name: ontology
                    .name(l as u8)
                    .filter(|_| l < table.classes)
                    .unwrap_or("free")
                    .to_string(),
                tp: table.tp[l],
                fp: table.fp[l],
                fn_: table.fn_[l],
                iou: *iou,
            })
            .collect();
        let mean = |it: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = it.collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let go = ontology.general_object as usize;
        EvalReport {
            evaluated_voxels: table.evaluated,
            include_free,
            miou: m.mean,
            miou_absent_as_zero: mean(&mut m.per_class.iter().map(|x| x.unwrap_or(0.0))),
            miou_without_general_object: mean(
                &mut m
                    .per_class
                    .iter()
                    .enumerate()
                    .filter(|(l, _)| *l != go)
                    .filter_map(|(_, x)| *x),
            ),
            classes,
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::voxel::GridSpec;

    fn spec() -> GridSpec {
        GridSpec::new([0.0; 3], [2.0, 2.0, 2.0], 1.0).unwrap()
    }

    fn grid(labels: &[Option<u8>]) -> OccGrid {
        let s = spec();
        let mut g = OccGrid::new(s, VoxelState::Free);
        for (i, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                g.set_occupied(s.unlinear(i), *c);
            }
        }
        g
    }

    fn joint(values: Vec<u8>) -> VisibilityMask {
        VisibilityMask::from_values(spec(), MaskKind::Joint, values).unwrap()
    }

    #[test]
    fn identical_grids_have_no_errors() {
        let g = grid(&[Some(0), Some(1), None, Some(2), None, None, Some(1), Some(0)]);
        let t = confusion(&g, &g, &joint(vec![1; 8]), 3).unwrap();
        assert!(t.fp.iter().chain(&t.fn_).all(|v| *v == 0));
        assert_eq!(t.evaluated, 8);
        let m = miou(&t, false);
        assert_eq!(m.per_class, vec![Some(1.0); 3]);
        assert_eq!(m.mean, Some(1.0));
    }

    #[test]
    fn empty_mask_counts_nothing() {
        let a = grid(&[Some(0); 8]);
        let b = grid(&[None; 8]);
        let t = confusion(&a, &b, &joint(vec![0; 8]), 3).unwrap();
        assert_eq!(t, ConfusionTable::new(3));
        assert_eq!(miou(&t, false).mean, None);
    }

    #[test]
    fn hand_enumerated_toy_grid() {
        // voxel:  0     1     2     3     4     5     6     7
        let gt = grid(&[Some(0), Some(0), Some(1), None, Some(1), None, Some(0), Some(2)]);
        let pr = grid(&[Some(0), Some(1), Some(1), Some(1), None, None, Some(0), Some(2)]);
        let mask = joint(vec![1, 1, 1, 1, 1, 1, 0, 1]);
        let t = confusion(&pr, &gt, &mask, 3).unwrap();
        // class 0: TP v0; FN v1          class 1: TP v2; FP v1,v3; FN v4
        // class 2: TP v7                 free: TP v5; FP v4; FN v3
        assert_eq!(t.tp, vec![1, 1, 1, 1]);
        assert_eq!(t.fp, vec![0, 2, 0, 1]);
        assert_eq!(t.fn_, vec![1, 1, 0, 1]);
        assert_eq!(t.evaluated, 7);
        let m = miou(&t, false);
        assert_eq!(m.per_class, vec![Some(0.5), Some(0.25), Some(1.0)]);
        assert_eq!(m.mean, Some(1.75 / 3.0));
        let with_free = miou(&t, true);
        assert_eq!(with_free.per_class[3], Some(1.0 / 3.0));
    }

    #[test]
    fn miou_examples() {
        let mut t = ConfusionTable::new(1);
        t.tp[0] = 5;
        t.fp[0] = 5;
        assert_eq!(miou(&t, false), Miou { per_class: vec![Some(0.5)], mean: Some(0.5) });

        let mut t = ConfusionTable::new(2);
        t.tp = vec![3, 1, 0];
        t.fp = vec![1, 0, 0];
        t.fn_ = vec![0, 1, 0];
        let m = miou(&t, false);
        assert_eq!(m.per_class, vec![Some(0.75), Some(0.5)]);
        assert_eq!(m.mean, Some(0.625));
    }

    #[test]
    fn absent_classes_are_excluded_not_zero() {
        let mut t = ConfusionTable::new(3);
        t.tp = vec![2, 0, 0, 0];
        let m = miou(&t, false);
        assert_eq!(m.per_class, vec![Some(1.0), None, None]);
        assert_eq!(m.mean, Some(1.0));
        let r = EvalReport::new(&t, &Ontology::new(vec!["go".into(), "a".into(), "b".into()], 0).unwrap(), false);
        assert_eq!(r.miou_absent_as_zero, Some(1.0 / 3.0));
        assert_eq!(r.miou_without_general_object, None);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["classes"][1]["iou"].is_null());
    }

    #[test]
    fn rejects_out_of_ontology_class() {
        let g = grid(&[Some(5), None, None, None, None, None, None, None]);
        assert!(matches!(
            confusion(&g, &g, &joint(vec![1; 8]), 3),
            Err(Error::ClassOutOfRange { class: 5, .. })
        ));
    }

    #[test]
    fn swap_exchanges_fp_and_fn() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rand_grid = |rng: &mut ChaCha8Rng| {
            grid(&(0..8).map(|_| if rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..3)) }).collect::<Vec<_>>())
        };
        for _ in 0..50 {
            let a = rand_grid(&mut rng);
            let b = rand_grid(&mut rng);
            let m = joint((0..8).map(|_| rng.gen_range(0..2)).collect());
            let ab = confusion(&a, &b, &m, 3).unwrap();
            let ba = confusion(&b, &a, &m, 3).unwrap();
            assert_eq!(ab.tp, ba.tp);
            assert_eq!(ab.fp, ba.fn_);
            assert_eq!(ab.fn_, ba.fp);
            assert_eq!(miou(&ab, false), miou(&ba, false));
        }
    }
}
