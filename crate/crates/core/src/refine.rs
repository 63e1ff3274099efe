//! Classical densification of coarse rendered instance masks.
//!
//! IDs whose pixels fill less than `sparse_density` of their own disk closing
//! count as speckled. Stages 1 and 2 only ever write speckled IDs, so solid
//! input passes through them untouched. Each stage only writes IDs already
//! present in its input:
//!
//! 1. `passes` rounds of a fill-majority filter over a `(2r+1)^2` window.
//!    An instance pixel takes the most frequent instance ID of its window; a
//!    background pixel does the same unless background holds a strict majority.
//! 2. Per-ID closing. A pixel joins an ID if the closing with the disk of
//!    `closing_radius`, or with any of four line segments (0, 45, 90, 135
//!    degrees) of half-length `gap_span`, covers it. Only background pixels
//!    are filled; competing IDs go to the larger pre-closing area, then the
//!    smaller ID.
//! 3. 8-connected regions (of any value) smaller than `min_component_area`
//!    take the majority value among their outside neighbours. Background
//!    regions touching the image border are left alone.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::mask::{InstanceId, InstanceMask2D, BACKGROUND};
use crate::raster::{render_instance_mask, RasterConfig};
use crate::scene::{GaussianScene, LabelAssignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub majority_radius: usize,
    pub closing_radius: usize,
    pub min_component_area: usize,
    pub passes: usize,
    /// Half-length of the line segments used to bridge elongated gaps.
    pub gap_span: usize,
    /// IDs whose `instance_density` is below this are densified by the
    /// filter and closing stages; denser IDs only get component cleanup.
    pub sparse_density: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            majority_radius: 2,
            closing_radius: 3,
            min_component_area: 16,
            passes: 2,
            gap_span: 7,
            sparse_density: 0.95,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.passes < 1 {
            return Err(Error::Config("refine.passes must be at least 1".into()));
        }
        if !(self.sparse_density >= 0.0 && self.sparse_density.is_finite()) {
            return Err(Error::Config(
                "refine.sparse_density must be a non-negative number".into(),
            ));
        }
        Ok(())
    }
}

/// Densifies a coarse mask. `alpha` is accepted for interface stability and
/// ignored.
pub fn refine_mask(coarse: &InstanceMask2D, _alpha: Option<&[f32]>, config: &RefineConfig) -> InstanceMask2D {
    let (w, h) = coarse.dims();
    let mut ids = coarse.ids().to_vec();
    if ids.iter().all(|&v| v == BACKGROUND) {
        return coarse.clone();
    }
    let sparse: BTreeSet<InstanceId> = instance_density(coarse, config.closing_radius)
        .into_iter()
        .filter(|&(_, d)| d < config.sparse_density)
        .map(|(id, _)| id)
        .collect();
    if !sparse.is_empty() {
        for _ in 0..config.passes.max(1) {
            ids = fill_majority(&ids, w, h, config.majority_radius, &sparse);
        }
        ids = close_instances(&ids, w, h, config, &sparse);
    }
    if config.min_component_area > 1 {
        ids = absorb_small_components(&ids, w, h, config.min_component_area);
    }
    InstanceMask2D::from_vec(w, h, ids).expect("dimensions preserved")
}

/// Only changes a pixel to an ID in `targets`.
fn fill_majority(ids: &[InstanceId], w: usize, h: usize, r: usize, targets: &BTreeSet<InstanceId>) -> Vec<InstanceId> {
    let mut out = vec![BACKGROUND; ids.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut counts: Vec<(InstanceId, u32)> = Vec::with_capacity(8);
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(h - 1);
        for (x, dst) in row.iter_mut().enumerate() {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r).min(w - 1);
            counts.clear();
            let mut background = 0u32;
            for yy in y0..=y1 {
                for &v in &ids[yy * w + x0..=yy * w + x1] {
                    if v == BACKGROUND {
                        background += 1;
                    } else {
                        match counts.iter_mut().find(|(id, _)| *id == v) {
                            Some(e) => e.1 += 1,
                            None => counts.push((v, 1)),
                        }
                    }
                }
            }
            let n = ((y1 - y0 + 1) * (x1 - x0 + 1)) as u32;
            let best = counts
                .iter()
                .copied()
                .reduce(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
            let center = ids[y * w + x];
            let candidate = match best {
                None => BACKGROUND,
                Some((id, _)) if center != BACKGROUND => id,
                Some(_) if 2 * background > n => BACKGROUND,
                Some((id, _)) => id,
            };
            *dst = if targets.contains(&candidate) {
                candidate
            } else {
                center
            };
        }
    });
    out
}

/// Offsets of the structuring elements used for closing.
fn structuring_elements(disk_radius: usize, span: usize) -> Vec<Vec<(isize, isize)>> {
    let mut out = Vec::new();
    let r = disk_radius as isize;
    let mut disk = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                disk.push((dx, dy));
            }
        }
    }
    out.push(disk);
    if span > 0 {
        let s = span as isize;
        for (ux, uy) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
            out.push((-s..=s).map(|t| (t * ux, t * uy)).collect());
        }
    }
    out
}

struct Canvas {
    w: usize,
    h: usize,
    /// Image coordinates of canvas pixel (0, 0).
    ox: isize,
    oy: isize,
    data: Vec<bool>,
}

impl Canvas {
    fn get(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.w
            && (y as usize) < self.h
            && self.data[y as usize * self.w + x as usize]
    }

    fn dilate(&self, se: &[(isize, isize)]) -> Canvas {
        let mut data = vec![false; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                if self.data[y * self.w + x] {
                    for &(dx, dy) in se {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        if nx >= 0 && ny >= 0 && (nx as usize) < self.w && (ny as usize) < self.h {
                            data[ny as usize * self.w + nx as usize] = true;
                        }
                    }
                }
            }
        }
        Canvas { data, ..*self }
    }

    fn erode(&self, se: &[(isize, isize)]) -> Canvas {
        let mut data = vec![false; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                data[y * self.w + x] = se.iter().all(|&(dx, dy)| self.get(x as isize + dx, y as isize + dy));
            }
        }
        Canvas { data, ..*self }
    }
}

/// Per-ID ratio of its pixel count to the pixel count of its closing with
/// the disk of `radius`. Solid shapes sit near 1; speckled ones well below.
pub fn instance_density(mask: &InstanceMask2D, radius: usize) -> std::collections::BTreeMap<InstanceId, f64> {
    let (w, h) = mask.dims();
    let cfg = RefineConfig {
        closing_radius: radius,
        gap_span: 0,
        ..Default::default()
    };
    let ids = mask.ids();
    let mut area: std::collections::BTreeMap<InstanceId, usize> = Default::default();
    for &v in ids {
        if v != BACKGROUND {
            *area.entry(v).or_insert(0) += 1;
        }
    }
    let mut closed = area.clone();
    for (id, _, added) in closing_fills(ids, w, h, &cfg) {
        *closed.get_mut(&id).expect("id present") += added.len();
    }
    area.into_iter()
        .map(|(id, a)| (id, a as f64 / closed[&id] as f64))
        .collect()
}

/// Background pixels covered by each ID's closing, with the ID's area.
fn closing_fills(
    ids: &[InstanceId],
    w: usize,
    h: usize,
    config: &RefineConfig,
) -> Vec<(InstanceId, usize, Vec<usize>)> {
    let ses = structuring_elements(config.closing_radius, config.gap_span);
    let reach = config.closing_radius.max(config.gap_span) as isize;

    // Bounding box and area per ID, in ID order.
    let mut boxes: std::collections::BTreeMap<InstanceId, ([usize; 4], usize)> = Default::default();
    for (i, &v) in ids.iter().enumerate() {
        if v == BACKGROUND {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let e = boxes.entry(v).or_insert(([x, y, x, y], 0));
        e.0 = [e.0[0].min(x), e.0[1].min(y), e.0[2].max(x), e.0[3].max(y)];
        e.1 += 1;
    }
    let entries: Vec<_> = boxes.into_iter().collect();

    entries
        .par_iter()
        .map(|&(id, (b, area))| {
            // Pad far enough that the closing never sees the canvas edge.
            let pad = 2 * reach + 1;
            let ox = b[0] as isize - pad;
            let oy = b[1] as isize - pad;
            let cw = (b[2] - b[0]) + 1 + 2 * pad as usize;
            let ch = (b[3] - b[1]) + 1 + 2 * pad as usize;
            let mut data = vec![false; cw * ch];
            for y in b[1]..=b[3] {
                for x in b[0]..=b[2] {
                    if ids[y * w + x] == id {
                        data[(y as isize - oy) as usize * cw + (x as isize - ox) as usize] = true;
                    }
                }
            }
            let canvas = Canvas {
                w: cw,
                h: ch,
                ox,
                oy,
                data,
            };
            let mut covered = vec![false; cw * ch];
            for se in &ses {
                let closed = canvas.dilate(se).erode(se);
                for (c, v) in covered.iter_mut().zip(&closed.data) {
                    *c |= *v;
                }
            }
            let mut added = Vec::new();
            for cy in 0..ch {
                for cx in 0..cw {
                    if !covered[cy * cw + cx] {
                        continue;
                    }
                    let (x, y) = (cx as isize + canvas.ox, cy as isize + canvas.oy);
                    if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
                        continue;
                    }
                    let p = y as usize * w + x as usize;
                    if ids[p] == BACKGROUND {
                        added.push(p);
                    }
                }
            }
            (id, area, added)
        })
        .collect()
}

fn close_instances(
    ids: &[InstanceId],
    w: usize,
    h: usize,
    config: &RefineConfig,
    targets: &BTreeSet<InstanceId>,
) -> Vec<InstanceId> {
    let mut fills = closing_fills(ids, w, h, config);
    fills.retain(|(id, _, _)| targets.contains(id));
    let mut out = ids.to_vec();
    let mut claim: Vec<Option<(usize, InstanceId)>> = vec![None; ids.len()];
    for (id, area, added) in &fills {
        for &p in added {
            let better = match claim[p] {
                None => true,
                Some((a, i)) => *area > a || (*area == a && *id < i),
            };
            if better {
                claim[p] = Some((*area, *id));
            }
        }
    }
    for (p, c) in claim.into_iter().enumerate() {
        if let Some((_, id)) = c {
            out[p] = id;
        }
    }
    out
}

const NEIGHBORS8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// 8-connected components of equal value: per-pixel component index and
/// per-component pixel lists.
pub fn components(ids: &[InstanceId], w: usize, h: usize) -> (Vec<u32>, Vec<Vec<usize>>) {
    let mut comp = vec![u32::MAX; ids.len()];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..ids.len() {
        if comp[start] != u32::MAX {
            continue;
        }
        let c = members.len() as u32;
        let v = ids[start];
        let mut list = vec![start];
        comp[start] = c;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for (dx, dy) in NEIGHBORS8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if comp[q] == u32::MAX && ids[q] == v {
                    comp[q] = c;
                    list.push(q);
                    stack.push(q);
                }
            }
        }
        members.push(list);
    }
    (comp, members)
}

fn absorb_small_components(ids: &[InstanceId], w: usize, h: usize, min_area: usize) -> Vec<InstanceId> {
    let (comp, members) = components(ids, w, h);
    let mut out = ids.to_vec();
    for (c, list) in members.iter().enumerate() {
        if list.len() >= min_area {
            continue;
        }
        let value = ids[list[0]];
        let on_border = list.iter().any(|&p| {
            let (x, y) = (p % w, p / w);
            x == 0 || y == 0 || x == w - 1 || y == h - 1
        });
        if value == BACKGROUND && on_border {
            continue;
        }
        // Count each outside neighbour pixel once.
        let mut seen = std::collections::BTreeSet::new();
        for &p in list {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for (dx, dy) in NEIGHBORS8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if comp[q] != c as u32 {
                    seen.insert(q);
                }
            }
        }
        let mut counts: std::collections::BTreeMap<InstanceId, usize> = Default::default();
        for q in seen {
            *counts.entry(ids[q]).or_insert(0) += 1;
        }
        // BTreeMap iterates IDs ascending, so `>` keeps the smaller ID on ties.
        let mut best: Option<(InstanceId, usize)> = None;
        for (id, n) in counts {
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((id, n));
            }
        }
        if let Some((id, _)) = best {
            for &p in list {
                out[p] = id;
            }
        }
    }
    out
}

/// Renders the coarse label mask for a camera and its refined counterpart.
pub fn refine_assignment_outputs(
    scene: &GaussianScene,
    labels: &LabelAssignment,
    camera: &Camera,
    raster: &RasterConfig,
    refine: &RefineConfig,
) -> Result<(InstanceMask2D, InstanceMask2D)> {
    refine.validate()?;
    let coarse = render_instance_mask(scene, labels, camera, raster)?;
    let refined = refine_mask(&coarse, None, refine);
    Ok((coarse, refined))
}
