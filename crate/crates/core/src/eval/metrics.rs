//! mIoU and pixel accuracy between a predicted and a ground-truth mask.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pathfinding::prelude::{kuhn_munkres, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{InstanceId, InstanceMask2D, BACKGROUND};

/// How predicted IDs are paired with ground-truth IDs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Same ID in both masks.
    #[default]
    Identity,
    /// One-to-one assignment maximizing total IoU.
    Hungarian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    /// Mean IoU over nonzero ground-truth IDs. With no such IDs: 1.0 if the
    /// prediction is also empty, else 0.0, and `gt_empty` is set.
    pub miou: f64,
    /// Fraction of pixels whose (matched) IDs agree.
    pub macc: f64,
    pub per_instance_iou: BTreeMap<InstanceId, f64>,
    pub gt_empty: bool,
}

pub fn compute_metrics(pred: &InstanceMask2D, gt: &InstanceMask2D, matching: Matching) -> Result<SegMetrics> {
    if pred.dims() != gt.dims() {
        return Err(Error::Contract(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut joint: HashMap<(InstanceId, InstanceId), u64> = HashMap::new();
    for (&p, &g) in pred.ids().iter().zip(gt.ids()) {
        *joint.entry((p, g)).or_insert(0) += 1;
    }
    let mut pred_area: BTreeMap<InstanceId, u64> = BTreeMap::new();
    let mut gt_area: BTreeMap<InstanceId, u64> = BTreeMap::new();
    for (&(p, g), &c) in &joint {
        *pred_area.entry(p).or_insert(0) += c;
        *gt_area.entry(g).or_insert(0) += c;
    }
    let gt_ids: Vec<InstanceId> = gt_area.keys().copied().filter(|&i| i != BACKGROUND).collect();
    let pred_ids: Vec<InstanceId> = pred_area.keys().copied().filter(|&i| i != BACKGROUND).collect();
    let inter = |p: InstanceId, g: InstanceId| joint.get(&(p, g)).copied().unwrap_or(0);
    let iou = |p: Option<InstanceId>, g: InstanceId| -> f64 {
        let ga = gt_area[&g];
        let Some(p) = p else { return 0.0 };
        let i = inter(p, g);
        let u = pred_area.get(&p).copied().unwrap_or(0) + ga - i;
        i as f64 / u as f64
    };

    // Ground-truth ID -> predicted ID used for it.
    let assignment: BTreeMap<InstanceId, Option<InstanceId>> = match matching {
        Matching::Identity => gt_ids
            .iter()
            .map(|&g| (g, pred_area.contains_key(&g).then_some(g)))
            .collect(),
        Matching::Hungarian => hungarian(&gt_ids, &pred_ids, &iou),
    };

    let per_instance_iou: BTreeMap<InstanceId, f64> = assignment.iter().map(|(&g, &p)| (g, iou(p, g))).collect();
    let gt_empty = gt_ids.is_empty();
    let miou = if gt_empty {
        if pred_ids.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        per_instance_iou.values().sum::<f64>() / per_instance_iou.len() as f64
    };

    let total = pred.ids().len() as u64;
    let correct: u64 = match matching {
        Matching::Identity => joint.iter().filter(|((p, g), _)| p == g).map(|(_, &c)| c).sum(),
        Matching::Hungarian => {
            let matched: BTreeSet<(InstanceId, InstanceId)> =
                assignment.iter().filter_map(|(&g, &p)| p.map(|p| (p, g))).collect();
            joint
                .iter()
                .filter(|((p, g), _)| (*p == BACKGROUND && *g == BACKGROUND) || matched.contains(&(*p, *g)))
                .map(|(_, &c)| c)
                .sum()
        }
    };
    let macc = if total == 0 { 1.0 } else { correct as f64 / total as f64 };
    Ok(SegMetrics {
        miou,
        macc,
        per_instance_iou,
        gt_empty,
    })
}

fn hungarian(
    gt_ids: &[InstanceId],
    pred_ids: &[InstanceId],
    iou: &dyn Fn(Option<InstanceId>, InstanceId) -> f64,
) -> BTreeMap<InstanceId, Option<InstanceId>> {
    if gt_ids.is_empty() {
        return BTreeMap::new();
    }
    // Rows are GT IDs; columns are predicted IDs padded with "unmatched"
    // slots so every row can be assigned.
    let cols = pred_ids.len().max(gt_ids.len());
    const SCALE: f64 = 1e12;
    let weights = Matrix::from_fn(gt_ids.len(), cols, |(r, c)| match pred_ids.get(c) {
        Some(&p) => (iou(Some(p), gt_ids[r]) * SCALE).round() as i64,
        None => 0,
    });
    let (_, cols_for_rows) = kuhn_munkres(&weights);
    gt_ids
        .iter()
        .zip(cols_for_rows)
        .map(|(&g, c)| {
            let p = pred_ids.get(c).copied().filter(|&p| iou(Some(p), g) > 0.0);
            (g, p)
        })
        .collect()
}
