//! Seeded synthetic scenes with ground-truth labels, orbit cameras and
//! rendered ground-truth masks.
//!
//! Draw order for `generate_scene` (all from one `FixtureRng`):
//! cluster centers by rejection (three `range` calls each), then per instance
//! a color (three `range`) and a primitive count (`below`), then per primitive
//! position offset (three `normal`), scales (three `range`), rotation (four
//! `normal`, normalized) and opacity (one `range`).

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::io::ViewSet;
use crate::mask::{InstanceId, InstanceMask2D, BACKGROUND};
use crate::raster::{render_instance_mask, RasterConfig};
use crate::rng::FixtureRng;
use crate::scene::{logit, GaussianParams, GaussianScene, LabelAssignment, Provenance, SH_C0};

const STANDARD_SPEC: &str = include_str!("../fixtures/standard.json");

/// Half-width of the box holding cluster centers.
pub const BOX_HALF_EXTENT: f64 = 0.5;
const MAX_CENTER_DRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_instances: usize,
    /// Inclusive `[min, max]`.
    pub primitives_per_instance: [usize; 2],
    pub cluster_spread: f64,
    pub opacity_range: [f64; 2],
    pub scale_range: [f64; 2],
    pub camera_count: usize,
    pub orbit_radius: f64,
    pub orbit_height: f64,
    /// `[width, height]`.
    pub resolution: [usize; 2],
    pub fov_deg: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// The repository's anchor fixture.
    pub fn standard() -> Self {
        serde_json::from_str(STANDARD_SPEC).expect("bundled fixture spec parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text).map_err(|e| Error::Config(format!("synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth spec: {m}")));
        if self.num_instances < 1 || self.num_instances > InstanceId::MAX as usize {
            return bad("num_instances must be in 1..=65535");
        }
        if self.camera_count < 1 {
            return bad("camera_count must be at least 1");
        }
        let [pmin, pmax] = self.primitives_per_instance;
        if pmin < 1 || pmin > pmax {
            return bad("primitives_per_instance must be a nonempty positive range");
        }
        let positive_range = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite();
        if !positive_range(self.scale_range) {
            return bad("scale_range must be a nonempty positive range");
        }
        if !positive_range(self.opacity_range) || self.opacity_range[1] >= 1.0 {
            return bad("opacity_range must lie inside (0,1)");
        }
        if !(self.cluster_spread > 0.0) || !(self.orbit_radius > 0.0) || !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad("cluster_spread, orbit_radius and fov_deg must be positive (fov below 180)");
        }
        if self.resolution[0] < 1 || self.resolution[1] < 1 {
            return bad("resolution must be positive");
        }
        Ok(())
    }
}

/// Cluster centers at least `4 * cluster_spread` apart inside the unit box.
pub fn cluster_centers(spec: &SynthSpec, rng: &mut FixtureRng) -> Result<Vec<Vector3<f64>>> {
    let min_sep = 4.0 * spec.cluster_spread;
    let mut centers: Vec<Vector3<f64>> = Vec::with_capacity(spec.num_instances);
    let mut draws = 0;
    while centers.len() < spec.num_instances {
        if draws == MAX_CENTER_DRAWS {
            return Err(Error::Config(format!(
                "cannot place {} clusters {min_sep} apart in the unit box; use fewer instances or a smaller cluster_spread",
                spec.num_instances
            )));
        }
        draws += 1;
        let c = Vector3::new(
            rng.range(-BOX_HALF_EXTENT, BOX_HALF_EXTENT),
            rng.range(-BOX_HALF_EXTENT, BOX_HALF_EXTENT),
            rng.range(-BOX_HALF_EXTENT, BOX_HALF_EXTENT),
        );
        if centers.iter().all(|o| (o - c).norm() >= min_sep) {
            centers.push(c);
        }
    }
    Ok(centers)
}

/// Builds the clustered scene; instance `k` (1-based) owns cluster `k`.
pub fn generate_scene(spec: &SynthSpec) -> Result<(GaussianScene, LabelAssignment)> {
    spec.validate()?;
    let mut rng = FixtureRng::new(spec.seed);
    let centers = cluster_centers(spec, &mut rng)?;
    let [pmin, pmax] = spec.primitives_per_instance;
    let mut params = Vec::new();
    let mut labels = Vec::new();
    for (k, center) in centers.iter().enumerate() {
        let color = [rng.range(0.15, 0.85), rng.range(0.15, 0.85), rng.range(0.15, 0.85)];
        let count = pmin + rng.below((pmax - pmin + 1) as u64) as usize;
        for _ in 0..count {
            let offset = Vector3::new(rng.normal(), rng.normal(), rng.normal()) * spec.cluster_spread;
            let p = center + offset;
            let scale = [0; 3].map(|_| rng.range(spec.scale_range[0], spec.scale_range[1]));
            let q = [0; 4].map(|_| rng.normal());
            let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let opacity = rng.range(spec.opacity_range[0], spec.opacity_range[1]);
            params.push(GaussianParams {
                position: [p.x as f32, p.y as f32, p.z as f32],
                log_scale: scale.map(|s| s.ln() as f32),
                rotation: q.map(|v| (v / norm) as f32),
                opacity_logit: logit(opacity) as f32,
                sh_dc: color.map(|c| ((c - 0.5) / SH_C0) as f32),
            });
            labels.push((k + 1) as InstanceId);
        }
    }
    let provenance = Provenance {
        mode: "ground_truth".into(),
        ..Provenance::default()
    };
    Ok((
        GaussianScene::from_params(&params),
        LabelAssignment::new(labels, provenance),
    ))
}

/// `camera_count` cameras evenly spaced in azimuth (starting at +x, counter-
/// clockwise about +z) at `orbit_height`, all looking at the box center.
pub fn generate_orbit(spec: &SynthSpec) -> Result<ViewSet> {
    spec.validate()?;
    let t = spec.camera_count;
    let cameras = (0..t)
        .map(|k| {
            let azimuth = (k as f64 * 360.0 / t as f64).to_radians();
            let eye = Vector3::new(
                spec.orbit_radius * azimuth.cos(),
                spec.orbit_radius * azimuth.sin(),
                spec.orbit_height,
            );
            Camera::look_at(
                spec.resolution[0],
                spec.resolution[1],
                spec.fov_deg,
                eye,
                Vector3::zeros(),
                Vector3::z(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ViewSet::new(cameras)
}

/// Renders ground-truth labels into every view.
pub fn generate_gt_masks(
    scene: &GaussianScene,
    labels: &LabelAssignment,
    views: &ViewSet,
    raster: &RasterConfig,
) -> Result<Vec<InstanceMask2D>> {
    views
        .cameras
        .par_iter()
        .map(|cam| render_instance_mask(scene, labels, cam, raster))
        .collect()
}

/// Seeded mask corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Corruption {
    /// Each instance pixel becomes background with probability `p`
    /// (one `uniform` draw per instance pixel, row-major, mask by mask).
    Dropout { p: f64 },
    /// Instance pixels within Chebyshev distance `radius` of a pixel with a
    /// different value become background. Draws nothing.
    Erosion { radius: usize },
    /// Per mask and per present instance ID (ascending), with probability `q`
    /// every pixel of that ID is relabeled to a uniformly drawn different ID
    /// from `1..=K`, `K` the largest ID over all masks.
    IdFlip { q: f64 },
}

impl Corruption {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Corruption::Dropout { p } => (0.0..=1.0).contains(&p),
            Corruption::IdFlip { q } => (0.0..=1.0).contains(&q),
            Corruption::Erosion { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("corruption parameter out of [0,1]: {self:?}")))
        }
    }
}

pub fn corrupt_masks(masks: &[InstanceMask2D], model: Corruption, seed: u64) -> Result<Vec<InstanceMask2D>> {
    model.validate()?;
    let mut rng = FixtureRng::new(seed);
    let k_max = masks.iter().map(|m| m.max_id()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(masks.len());
    for mask in masks {
        let mut m = mask.clone();
        match model {
            Corruption::Dropout { p } => {
                for v in m.ids_mut() {
                    if *v != BACKGROUND && rng.uniform() < p {
                        *v = BACKGROUND;
                    }
                }
            }
            Corruption::Erosion { radius } => erode_boundaries(mask, &mut m, radius),
            Corruption::IdFlip { q } => {
                for id in mask.instance_ids() {
                    if k_max < 2 || rng.uniform() >= q {
                        continue;
                    }
                    // Uniform over 1..=K without `id`.
                    let mut new_id = 1 + rng.below(k_max as u64 - 1) as InstanceId;
                    if new_id >= id {
                        new_id += 1;
                    }
                    for (dst, &src) in m.ids_mut().iter_mut().zip(mask.ids()) {
                        if src == id {
                            *dst = new_id;
                        }
                    }
                }
            }
        }
        out.push(m);
    }
    Ok(out)
}

fn erode_boundaries(src: &InstanceMask2D, dst: &mut InstanceMask2D, radius: usize) {
    let (w, h) = src.dims();
    for y in 0..h {
        for x in 0..w {
            let v = src.get(x, y);
            if v == BACKGROUND {
                continue;
            }
            let boundary = (y.saturating_sub(radius)..=(y + radius).min(h - 1))
                .any(|yy| (x.saturating_sub(radius)..=(x + radius).min(w - 1)).any(|xx| src.get(xx, yy) != v));
            if boundary {
                dst.set(x, y, BACKGROUND);
            }
        }
    }
}

/// Keeps `ceil(fraction * N)` primitives chosen with the seeded sampler, in
/// their original order.
pub fn sparsify_scene(
    scene: &GaussianScene,
    labels: &LabelAssignment,
    fraction: f64,
    seed: u64,
) -> Result<(GaussianScene, LabelAssignment)> {
    labels.check_against(scene)?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("sparsify fraction {fraction} outside [0,1]")));
    }
    let keep = (fraction * scene.len() as f64).ceil() as usize;
    let mut rows = FixtureRng::new(seed).sample_indices(scene.len(), keep);
    rows.sort_unstable();
    let sub = scene.select(&rows);
    let sub_labels = LabelAssignment {
        labels: rows.iter().map(|&i| labels.labels[i]).collect(),
        num_instances: labels.num_instances,
        provenance: labels.provenance.clone(),
    };
    Ok((sub, sub_labels))
}

/// Scene, labels, cameras and ground-truth masks generated from one spec.
#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub spec: SynthSpec,
    pub scene: GaussianScene,
    pub gt: LabelAssignment,
    pub views: ViewSet,
    pub masks: Vec<InstanceMask2D>,
}

pub fn generate_bundle(spec: &SynthSpec, raster: &RasterConfig) -> Result<SynthBundle> {
    let (scene, gt) = generate_scene(spec)?;
    let views = generate_orbit(spec)?;
    let masks = generate_gt_masks(&scene, &gt, &views, raster)?;
    Ok(SynthBundle {
        spec: spec.clone(),
        scene,
        gt,
        views,
        masks,
    })
}
