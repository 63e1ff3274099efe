//! Multi-view instance label aggregation.
//!
//! Every view contributes `(gaussian, instance id, count)` votes; a Gaussian's
//! label is its most-voted ID, ties broken toward the smaller ID.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::project_point;
use crate::io::ViewSet;
use crate::mask::{InstanceId, InstanceMask2D, BACKGROUND};
use crate::raster::{rasterize, render_idx_votes, RasterConfig, Vote};
use crate::scene::{GaussianScene, LabelAssignment, Provenance};

/// Relative depth slack for the centroid occlusion test.
pub const OCCLUSION_EPSILON: f64 = 0.01;

/// Sparse per-`(gaussian, id)` vote counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VoteHistogram {
    counts: HashMap<(u32, InstanceId), u64>,
    num_gaussians: usize,
    max_id_seen: InstanceId,
    total: u64,
}

impl VoteHistogram {
    pub fn new(num_gaussians: usize) -> Self {
        VoteHistogram {
            num_gaussians,
            ..Default::default()
        }
    }

    pub fn num_gaussians(&self) -> usize {
        self.num_gaussians
    }

    pub fn max_id_seen(&self) -> InstanceId {
        self.max_id_seen
    }

    /// Sum of all counts.
    pub fn total_votes(&self) -> u64 {
        self.total
    }

    pub fn count(&self, gaussian: u32, id: InstanceId) -> u64 {
        self.counts.get(&(gaussian, id)).copied().unwrap_or(0)
    }

    /// Nonzero entries, sorted by `(gaussian, id)`.
    pub fn entries(&self) -> Vec<(u32, InstanceId, u64)> {
        let mut out: Vec<_> = self.counts.iter().map(|(&(g, id), &c)| (g, id, c)).collect();
        out.sort_unstable();
        out
    }

    /// Adds one view's votes. `view` only names the view in errors.
    pub fn accumulate_view(&mut self, view: &str, votes: &[Vote]) -> Result<()> {
        if let Some(bad) = votes.iter().find(|v| v.gaussian as usize >= self.num_gaussians) {
            return Err(Error::Contract(format!(
                "view {view}: vote for gaussian {} but the scene has {}",
                bad.gaussian, self.num_gaussians
            )));
        }
        for v in votes {
            if v.count == 0 {
                continue;
            }
            *self.counts.entry((v.gaussian, v.id)).or_insert(0) += v.count as u64;
            self.total += v.count as u64;
            self.max_id_seen = self.max_id_seen.max(v.id);
        }
        Ok(())
    }

    pub fn merge(mut self, other: VoteHistogram) -> VoteHistogram {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self), other)
        } else {
            (other, self)
        };
        for (k, c) in small.counts {
            *big.counts.entry(k).or_insert(0) += c;
        }
        big.total += small.total;
        big.max_id_seen = big.max_id_seen.max(small.max_id_seen);
        big.num_gaussians = big.num_gaussians.max(small.num_gaussians);
        big
    }

    /// Total votes per Gaussian.
    pub fn totals(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.num_gaussians];
        for (&(g, _), &c) in &self.counts {
            out[g as usize] += c;
        }
        out
    }

    /// Row-wise argmax with ties toward the smaller ID; Gaussians with fewer
    /// than `min_votes` total votes get label 0.
    pub fn argmax_labels(&self, min_votes: u64) -> Vec<InstanceId> {
        let mut best: Vec<Option<(u64, InstanceId)>> = vec![None; self.num_gaussians];
        for (&(g, id), &c) in &self.counts {
            let slot = &mut best[g as usize];
            match *slot {
                Some((bc, bid)) if bc > c || (bc == c && bid < id) => {}
                _ => *slot = Some((c, id)),
            }
        }
        let totals = self.totals();
        best.into_iter()
            .zip(totals)
            .map(|(b, total)| match b {
                Some((_, id)) if total >= min_votes => id,
                _ => BACKGROUND,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Votes from the per-pixel dominant-contributor index map.
    #[default]
    Render,
    /// One vote per in-frustum, unoccluded Gaussian center.
    Centroid,
}

impl AggregationMode {
    pub fn name(self) -> &'static str {
        match self {
            AggregationMode::Render => "render",
            AggregationMode::Centroid => "centroid",
        }
    }
}

impl std::str::FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "render" => Ok(AggregationMode::Render),
            "centroid" => Ok(AggregationMode::Centroid),
            _ => Err(Error::Config(format!(
                "unknown aggregation mode `{s}` (render|centroid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationConfig {
    pub mode: AggregationMode,
    pub min_votes: u64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            mode: AggregationMode::Render,
            min_votes: 1,
        }
    }
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_votes < 1 {
            return Err(Error::Config("aggregation.min_votes must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_inputs(views: &ViewSet, masks: &[InstanceMask2D]) -> Result<()> {
    if views.is_empty() {
        return Err(Error::Contract("aggregation needs at least one view".into()));
    }
    if masks.len() != views.len() {
        return Err(Error::Contract(format!(
            "{} masks for {} views",
            masks.len(),
            views.len()
        )));
    }
    for (i, (cam, mask)) in views.cameras.iter().zip(masks).enumerate() {
        if mask.dims() != (cam.width, cam.height) {
            return Err(Error::Contract(format!(
                "view {}: mask is {}x{} but camera is {}x{}",
                views.ids[i],
                mask.width(),
                mask.height(),
                cam.width,
                cam.height
            )));
        }
    }
    Ok(())
}

/// Votes of one view under the given mode, sorted by `(gaussian, id)`.
pub fn collect_votes(
    scene: &GaussianScene,
    camera: &crate::geometry::Camera,
    mask: &InstanceMask2D,
    mode: AggregationMode,
    raster: &RasterConfig,
) -> Result<Vec<Vote>> {
    match mode {
        AggregationMode::Render => render_idx_votes(scene, camera, mask, raster),
        AggregationMode::Centroid => {
            let depth = rasterize(scene, camera, raster)?.depth;
            let mut votes = Vec::new();
            for (i, p) in scene.positions.iter().enumerate() {
                let Some(uv) = project_point(camera, p) else {
                    continue;
                };
                let (x, y) = (uv.x.floor() as usize, uv.y.floor() as usize);
                let z = camera.to_camera(p).z;
                // Pixels with no composited depth cannot occlude anything.
                let d = depth[y * camera.width + x] as f64;
                if d > 0.0 && z > d * (1.0 + OCCLUSION_EPSILON) {
                    continue;
                }
                votes.push(Vote {
                    gaussian: i as u32,
                    id: mask.get(x, y),
                    count: 1,
                });
            }
            Ok(votes)
        }
    }
}

/// Builds the vote histogram over all views, views processed in parallel.
pub fn build_histogram(
    scene: &GaussianScene,
    views: &ViewSet,
    masks: &[InstanceMask2D],
    config: &AggregationConfig,
    raster: &RasterConfig,
) -> Result<VoteHistogram> {
    config.validate()?;
    raster.validate()?;
    check_inputs(views, masks)?;
    let n = scene.len();
    (0..views.len())
        .into_par_iter()
        .try_fold(
            || VoteHistogram::new(n),
            |mut hist, t| {
                let votes = collect_votes(scene, &views.cameras[t], &masks[t], config.mode, raster)?;
                hist.accumulate_view(&views.ids[t], &votes)?;
                Ok::<_, Error>(hist)
            },
        )
        .try_reduce(|| VoteHistogram::new(n), |a, b| Ok(a.merge(b)))
}

/// Labels every Gaussian with its most-voted instance ID across the views.
pub fn aggregate_labels(
    scene: &GaussianScene,
    views: &ViewSet,
    masks: &[InstanceMask2D],
    config: &AggregationConfig,
    raster: &RasterConfig,
) -> Result<LabelAssignment> {
    let hist = build_histogram(scene, views, masks, config, raster)?;
    Ok(labels_from_histogram(&hist, views.len(), config))
}

pub fn labels_from_histogram(hist: &VoteHistogram, views: usize, config: &AggregationConfig) -> LabelAssignment {
    let provenance = Provenance {
        mode: config.mode.name().into(),
        views,
        tie_break: "smallest_id".into(),
        min_votes: config.min_votes,
        timestamp: None,
    };
    LabelAssignment::new(hist.argmax_labels(config.min_votes), provenance)
}

/// Which Gaussians `label_agreement` compares.
#[derive(Debug, Clone, Copy)]
pub enum AgreementScope<'a> {
    All,
    /// Only Gaussians with a nonzero label in the first assignment.
    NonzeroInFirst,
    Subset(&'a [bool]),
}

/// Fraction of in-scope Gaussians with identical labels; 1.0 when the scope
/// is empty.
pub fn label_agreement(a: &LabelAssignment, b: &LabelAssignment, scope: AgreementScope) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "label_agreement: lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    if let AgreementScope::Subset(s) = scope {
        if s.len() != a.len() {
            return Err(Error::Contract(format!(
                "label_agreement: subset has {} entries for {} labels",
                s.len(),
                a.len()
            )));
        }
    }
    let mut considered = 0usize;
    let mut same = 0usize;
    for (i, (x, y)) in a.labels.iter().zip(&b.labels).enumerate() {
        let keep = match scope {
            AgreementScope::All => true,
            AgreementScope::NonzeroInFirst => *x != BACKGROUND,
            AgreementScope::Subset(s) => s[i],
        };
        if keep {
            considered += 1;
            same += (x == y) as usize;
        }
    }
    Ok(if considered == 0 {
        1.0
    } else {
        same as f64 / considered as f64
    })
}
