//! Tile-based software splatting.
//!
//! Primitives are culled, projected, sorted globally front-to-back by the key
//! `(depth, index)` and binned into square tiles by their footprint bounding
//! box. Every pixel then walks its tile list in that order, so output is
//! identical for any tile size and any thread count.
//!
//! Per pixel, each splat contributes `alpha_i = min(max_alpha, opacity_i *
//! exp(-d^T cov2d^-1 d / 2))` if the pixel center lies within its footprint
//! (`footprint_sigma` standard deviations) and `alpha_i >= alpha_cutoff`. The
//! blending weight is `w_i = alpha_i * T_i` with `T` the transmittance before
//! the splat; compositing stops once `T < transmittance_stop`.

use std::time::Instant;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_covariance_with, world_covariance, Camera, Projected2DGaussian};
use crate::mask::{InstanceId, InstanceMask2D, BACKGROUND};
use crate::scene::{GaussianScene, LabelAssignment};

/// Which contributor a pixel's index map entry names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    /// Largest blending weight `alpha_i * T_i`; ties go to the nearer splat.
    #[default]
    MaxWeight,
    /// First splat that passes the alpha cutoff.
    FirstHit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterConfig {
    pub tile_size: usize,
    pub alpha_cutoff: f64,
    pub transmittance_stop: f64,
    /// Accumulated alpha below which a pixel counts as unoccupied.
    pub contribution_floor: f64,
    pub footprint_sigma: f64,
    pub max_alpha: f64,
    pub cov2d_regularization: f64,
    pub index_mode: IndexMode,
    pub background: [f64; 3],
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            tile_size: 16,
            alpha_cutoff: 1.0 / 255.0,
            transmittance_stop: 1e-4,
            contribution_floor: 0.5,
            footprint_sigma: 3.0,
            max_alpha: 0.99,
            cov2d_regularization: crate::geometry::COV2D_REGULARIZATION,
            index_mode: IndexMode::MaxWeight,
            background: [0.0; 3],
        }
    }
}

impl RasterConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("raster.{name} must lie in (0,1), got {v}")))
            }
        };
        unit("alpha_cutoff", self.alpha_cutoff)?;
        unit("transmittance_stop", self.transmittance_stop)?;
        unit("contribution_floor", self.contribution_floor)?;
        if !(self.max_alpha > 0.0 && self.max_alpha <= 1.0) {
            return Err(Error::Config(format!(
                "raster.max_alpha must lie in (0,1], got {}",
                self.max_alpha
            )));
        }
        if self.tile_size < 4 {
            return Err(Error::Config(format!(
                "raster.tile_size must be at least 4, got {}",
                self.tile_size
            )));
        }
        if !(self.footprint_sigma > 0.0) || !(self.cov2d_regularization >= 0.0) {
            return Err(Error::Config(
                "raster.footprint_sigma must be positive and cov2d_regularization non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderStats {
    /// Primitives dropped by near-plane, frustum or opacity culling.
    pub culled: usize,
    /// Primitives whose regularized covariance was not positive definite.
    pub skipped_non_psd: usize,
    pub visible: usize,
    pub ms: f64,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[f32; 3]>,
    pub alpha: Vec<f32>,
    pub depth: Vec<f32>,
    /// Dominant contributing primitive, or `-1` where `alpha < contribution_floor`.
    pub idx_image: Vec<i32>,
    pub stats: RenderStats,
}

/// A projected splat ready for compositing.
#[derive(Debug, Clone, Copy)]
pub struct Splat {
    pub mean: Vector2<f64>,
    pub conic: [f64; 3],
    pub depth: f64,
    pub opacity: f64,
    pub index: u32,
    /// Inclusive pixel bounds `[x0, y0, x1, y1]`.
    pub bounds: [usize; 4],
}

impl Splat {
    /// Squared Mahalanobis distance of a point from the splat center.
    #[inline]
    pub fn mahalanobis2(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.mean.x;
        let dy = py - self.mean.y;
        let [a, b, c] = self.conic;
        a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    }
}

/// Culled, projected and depth-sorted splats for one camera.
#[derive(Debug, Clone)]
pub struct SplatList {
    pub splats: Vec<Splat>,
    pub stats: RenderStats,
}

pub fn project_splats(scene: &GaussianScene, camera: &Camera, config: &RasterConfig) -> SplatList {
    let (w, h) = (camera.width as f64, camera.height as f64);
    let results: Vec<std::result::Result<Splat, bool>> = (0..scene.len())
        .into_par_iter()
        .map(|i| {
            let opacity = scene.opacities[i];
            if opacity < config.alpha_cutoff {
                return Err(false);
            }
            let pos = &scene.positions[i];
            let t = camera.to_camera(pos);
            if !(t.z > camera.near_plane) {
                return Err(false);
            }
            let cov3 = world_covariance(&scene.scales[i], &scene.rotations[i]);
            let cov2 = project_covariance_with(camera, pos, &cov3, config.cov2d_regularization).map_err(|_| false)?;
            let projected = Projected2DGaussian {
                mean: camera.project_camera_space(&t),
                cov2d: cov2,
                depth: t.z,
                source_index: i,
            };
            let conic = projected.conic().ok_or(true)?;
            let mean = projected.mean;
            if !mean.x.is_finite() || !mean.y.is_finite() {
                return Err(true);
            }
            // Tight box of the footprint ellipse around pixel centers (x + 0.5),
            // padded by one pixel against rounding.
            let ex = config.footprint_sigma * cov2[(0, 0)].sqrt();
            let ey = config.footprint_sigma * cov2[(1, 1)].sqrt();
            let x0 = (mean.x - ex - 0.5).floor() - 1.0;
            let x1 = (mean.x + ex - 0.5).ceil() + 1.0;
            let y0 = (mean.y - ey - 0.5).floor() - 1.0;
            let y1 = (mean.y + ey - 0.5).ceil() + 1.0;
            if x1 < 0.0 || y1 < 0.0 || x0 > w - 1.0 || y0 > h - 1.0 {
                return Err(false);
            }
            let clamp = |v: f64, hi: f64| v.clamp(0.0, hi) as usize;
            Ok(Splat {
                mean,
                conic,
                depth: t.z,
                opacity,
                index: i as u32,
                bounds: [
                    clamp(x0, w - 1.0),
                    clamp(y0, h - 1.0),
                    clamp(x1, w - 1.0),
                    clamp(y1, h - 1.0),
                ],
            })
        })
        .collect();

    let mut stats = RenderStats::default();
    let mut splats = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(s) => splats.push(s),
            Err(true) => stats.skipped_non_psd += 1,
            Err(false) => stats.culled += 1,
        }
    }
    splats.par_sort_unstable_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    stats.visible = splats.len();
    SplatList { splats, stats }
}

struct TileGrid {
    size: usize,
    cols: usize,
    rows: usize,
    /// Positions into the sorted splat list, per tile, in depth order.
    lists: Vec<Vec<u32>>,
}

impl TileGrid {
    fn build(list: &SplatList, width: usize, height: usize, size: usize) -> Self {
        let cols = width.div_ceil(size);
        let rows = height.div_ceil(size);
        let mut lists = vec![Vec::new(); cols * rows];
        for (k, s) in list.splats.iter().enumerate() {
            let [x0, y0, x1, y1] = s.bounds;
            for ty in y0 / size..=y1 / size {
                for tx in x0 / size..=x1 / size {
                    lists[ty * cols + tx].push(k as u32);
                }
            }
        }
        TileGrid {
            size,
            cols,
            rows,
            lists,
        }
    }

    fn pixel_ranges(
        &self,
        tile: usize,
        width: usize,
        height: usize,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let tx = tile % self.cols;
        let ty = tile / self.cols;
        let xs = tx * self.size..((tx + 1) * self.size).min(width);
        let ys = ty * self.size..((ty + 1) * self.size).min(height);
        (xs, ys)
    }
}

/// Walks the splats covering pixel `(x, y)` front to back, calling
/// `visit(splat, alpha, weight, transmittance_before)` per contribution. Returns final transmittance.
#[inline]
fn composite_pixel<F: FnMut(&Splat, f64, f64, f64)>(
    splats: &[Splat],
    order: &[u32],
    x: usize,
    y: usize,
    config: &RasterConfig,
    mut visit: F,
) -> f64 {
    let px = x as f64 + 0.5;
    let py = y as f64 + 0.5;
    let cutoff = config.footprint_sigma * config.footprint_sigma;
    let mut transmittance = 1.0;
    for &k in order {
        let s = &splats[k as usize];
        let [x0, y0, x1, y1] = s.bounds;
        if x < x0 || x > x1 || y < y0 || y > y1 {
            continue;
        }
        let m2 = s.mahalanobis2(px, py);
        if !(m2 <= cutoff) {
            continue;
        }
        let alpha = (s.opacity * (-0.5 * m2).exp()).min(config.max_alpha);
        if alpha < config.alpha_cutoff {
            continue;
        }
        visit(s, alpha, alpha * transmittance, transmittance);
        transmittance *= 1.0 - alpha;
        if transmittance < config.transmittance_stop {
            break;
        }
    }
    transmittance
}

/// Runs `shade` over every tile in parallel and scatters the per-pixel
/// results into a row-major image.
fn shade_tiles<T, F>(list: &SplatList, camera: &Camera, config: &RasterConfig, fill: T, shade: F) -> Vec<T>
where
    T: Copy + Send + Sync,
    F: Fn(&[u32], usize, usize) -> T + Sync,
{
    let (width, height) = (camera.width, camera.height);
    let grid = TileGrid::build(list, width, height, config.tile_size);
    let tiles: Vec<Vec<T>> = (0..grid.cols * grid.rows)
        .into_par_iter()
        .map(|t| {
            let (xs, ys) = grid.pixel_ranges(t, width, height);
            let order = &grid.lists[t];
            let mut out = Vec::with_capacity(xs.len() * ys.len());
            for y in ys {
                for x in xs.clone() {
                    out.push(shade(order, x, y));
                }
            }
            out
        })
        .collect();
    let mut image = vec![fill; width * height];
    for (t, values) in tiles.into_iter().enumerate() {
        let (xs, ys) = grid.pixel_ranges(t, width, height);
        let tw = xs.len();
        for (row, y) in ys.enumerate() {
            let dst = y * width + xs.start;
            image[dst..dst + tw].copy_from_slice(&values[row * tw..(row + 1) * tw]);
        }
    }
    image
}

#[derive(Clone, Copy)]
struct PixelSample {
    color: [f32; 3],
    alpha: f32,
    depth: f32,
    idx: i32,
}

/// One composited contribution at a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub index: u32,
    pub alpha: f64,
    pub weight: f64,
    /// Transmittance before this splat.
    pub transmittance: f64,
}

/// Every contribution at pixel `(x, y)` in compositing order.
pub fn trace_pixel(
    scene: &GaussianScene,
    camera: &Camera,
    config: &RasterConfig,
    x: usize,
    y: usize,
) -> Result<Vec<Contribution>> {
    config.validate()?;
    let list = project_splats(scene, camera, config);
    let order: Vec<u32> = (0..list.splats.len() as u32).collect();
    let mut out = Vec::new();
    composite_pixel(&list.splats, &order, x, y, config, |s, alpha, weight, transmittance| {
        out.push(Contribution {
            index: s.index,
            alpha,
            weight,
            transmittance,
        })
    });
    Ok(out)
}

pub fn rasterize(scene: &GaussianScene, camera: &Camera, config: &RasterConfig) -> Result<RenderOutput> {
    config.validate()?;
    let start = Instant::now();
    let list = project_splats(scene, camera, config);
    let splats = &list.splats;
    let fill = PixelSample {
        color: config.background.map(|c| c as f32),
        alpha: 0.0,
        depth: 0.0,
        idx: -1,
    };
    let pixels = shade_tiles(&list, camera, config, fill, |order, x, y| {
        let mut color = [0.0f64; 3];
        let mut depth = 0.0;
        let mut weight_sum = 0.0;
        let mut best: Option<(f64, u32)> = None;
        let t_final = composite_pixel(splats, order, x, y, config, |s, _alpha, w, _t| {
            let c = &scene.colors[s.index as usize];
            for k in 0..3 {
                color[k] += w * c[k];
            }
            depth += w * s.depth;
            weight_sum += w;
            match (config.index_mode, best) {
                (_, None) => best = Some((w, s.index)),
                (IndexMode::MaxWeight, Some((bw, _))) if w > bw => best = Some((w, s.index)),
                _ => {}
            }
        });
        let alpha = 1.0 - t_final;
        for (c, b) in color.iter_mut().zip(config.background) {
            *c += t_final * b;
        }
        PixelSample {
            color: color.map(|c| c as f32),
            alpha: alpha as f32,
            depth: if weight_sum > 0.0 {
                (depth / weight_sum) as f32
            } else {
                0.0
            },
            idx: match best {
                Some((_, i)) if alpha >= config.contribution_floor => i as i32,
                _ => -1,
            },
        }
    });

    let mut stats = list.stats;
    stats.ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(RenderOutput {
        width: camera.width,
        height: camera.height,
        color: pixels.iter().map(|p| p.color).collect(),
        alpha: pixels.iter().map(|p| p.alpha).collect(),
        depth: pixels.iter().map(|p| p.depth).collect(),
        idx_image: pixels.iter().map(|p| p.idx).collect(),
        stats,
    })
}

/// Renders labels directly: per pixel, blending weight is accumulated per
/// instance ID (label-0 primitives feed the background bucket). The heaviest
/// bucket wins if it holds more than `contribution_floor` of the total weight;
/// ties go to the smaller ID.
pub fn render_instance_mask(
    scene: &GaussianScene,
    labels: &LabelAssignment,
    camera: &Camera,
    config: &RasterConfig,
) -> Result<InstanceMask2D> {
    config.validate()?;
    labels.check_against(scene)?;
    let list = project_splats(scene, camera, config);
    let splats = &list.splats;
    let ids = shade_tiles(&list, camera, config, BACKGROUND, |order, x, y| {
        let mut buckets: smallbuckets::Buckets = Default::default();
        composite_pixel(splats, order, x, y, config, |s, _alpha, w, _t| {
            buckets.add(labels.labels[s.index as usize], w);
        });
        buckets.winner(config.contribution_floor)
    });
    InstanceMask2D::from_vec(camera.width, camera.height, ids)
}

mod smallbuckets {
    use super::InstanceId;

    /// Per-pixel weight per ID; linear scan, pixels rarely see many IDs.
    #[derive(Default)]
    pub(super) struct Buckets {
        entries: Vec<(InstanceId, f64)>,
        total: f64,
    }

    impl Buckets {
        #[inline]
        pub(super) fn add(&mut self, id: InstanceId, w: f64) {
            self.total += w;
            match self.entries.iter_mut().find(|(i, _)| *i == id) {
                Some(e) => e.1 += w,
                None => self.entries.push((id, w)),
            }
        }

        pub(super) fn winner(&self, share: f64) -> InstanceId {
            let mut best: Option<(InstanceId, f64)> = None;
            for &(id, w) in &self.entries {
                best = match best {
                    Some((bid, bw)) if bw > w || (bw == w && bid < id) => Some((bid, bw)),
                    _ => Some((id, w)),
                };
            }
            match best {
                Some((id, w)) if self.total > 0.0 && w > share * self.total => id,
                _ => 0,
            }
        }
    }
}

/// One `(gaussian, instance id)` pair and how many pixels carried it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Vote {
    pub gaussian: u32,
    pub id: InstanceId,
    pub count: u32,
}

/// Index-map rendering fused with the per-view pair histogram: every pixel
/// with a valid index contributes one vote `(idx, mask id)`. Sorted by
/// `(gaussian, id)`.
pub fn render_idx_votes(
    scene: &GaussianScene,
    camera: &Camera,
    mask: &InstanceMask2D,
    config: &RasterConfig,
) -> Result<Vec<Vote>> {
    config.validate()?;
    if mask.dims() != (camera.width, camera.height) {
        return Err(Error::Contract(format!(
            "mask is {}x{} but camera renders {}x{}",
            mask.width(),
            mask.height(),
            camera.width,
            camera.height
        )));
    }
    let list = project_splats(scene, camera, config);
    let splats = &list.splats;
    let idx = shade_tiles(&list, camera, config, -1i32, |order, x, y| {
        dominant_index(splats, order, x, y, config)
    });
    Ok(group_votes(&idx, mask.ids()))
}

fn dominant_index(splats: &[Splat], order: &[u32], x: usize, y: usize, config: &RasterConfig) -> i32 {
    let mut best: Option<(f64, u32)> = None;
    let t = composite_pixel(splats, order, x, y, config, |s, _alpha, w, _t| {
        match (config.index_mode, best) {
            (_, None) => best = Some((w, s.index)),
            (IndexMode::MaxWeight, Some((bw, _))) if w > bw => best = Some((w, s.index)),
            _ => {}
        }
    });
    match best {
        Some((_, i)) if 1.0 - t >= config.contribution_floor => i as i32,
        _ => -1,
    }
}

/// Group-by-count of `(idx, id)` pairs over pixels with `idx >= 0`.
pub fn group_votes(idx_image: &[i32], ids: &[InstanceId]) -> Vec<Vote> {
    let mut keys: Vec<u64> = idx_image
        .iter()
        .zip(ids)
        .filter(|(&i, _)| i >= 0)
        .map(|(&i, &id)| ((i as u64) << 16) | id as u64)
        .collect();
    keys.par_sort_unstable();
    let mut votes: Vec<Vote> = Vec::new();
    for key in keys {
        let gaussian = (key >> 16) as u32;
        let id = (key & 0xffff) as InstanceId;
        match votes.last_mut() {
            Some(v) if v.gaussian == gaussian && v.id == id => v.count += 1,
            _ => votes.push(Vote { gaussian, id, count: 1 }),
        }
    }
    votes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{logit, GaussianParams, Provenance};
    use nalgebra::{Matrix3, Vector3};

    fn camera(w: usize, h: usize) -> Camera {
        Camera::new(
            w,
            h,
            64.0,
            64.0,
            w as f64 / 2.0,
            h as f64 / 2.0,
            Matrix3::identity(),
            Vector3::zeros(),
        )
        .unwrap()
    }

    fn blob(x: f32, y: f32, z: f32, scale: f32, opacity: f64, dc: f32) -> GaussianParams {
        GaussianParams {
            position: [x, y, z],
            log_scale: [scale.ln(); 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity_logit: logit(opacity) as f32,
            sh_dc: [dc; 3],
        }
    }

    #[test]
    fn empty_scene_renders_background() {
        let out = rasterize(&GaussianScene::empty(), &camera(32, 24), &RasterConfig::default()).unwrap();
        assert!(out.alpha.iter().all(|&a| a == 0.0));
        assert!(out.idx_image.iter().all(|&i| i == -1));
        assert!(out.color.iter().all(|c| *c == [0.0; 3]));
        let votes = render_idx_votes(
            &GaussianScene::empty(),
            &camera(32, 24),
            &InstanceMask2D::new(32, 24),
            &RasterConfig::default(),
        )
        .unwrap();
        assert!(votes.is_empty());
    }

    #[test]
    fn single_opaque_gaussian_owns_center() {
        let scene = GaussianScene::from_params(&[blob(0.0, 0.0, 2.0, 0.1, 0.999, 1.0)]);
        let cam = camera(32, 32);
        let out = rasterize(&scene, &cam, &RasterConfig::default()).unwrap();
        let center = 16 * 32 + 16;
        assert_eq!(out.idx_image[center], 0);
        // Pixel center sits half a pixel off the mean on both axes.
        let var = (64.0 * 0.1 / 2.0f64).powi(2) + 0.3;
        let alpha = (0.999 * (-0.5 * (0.5 / var)).exp()).min(0.99);
        let expected = (alpha * scene.colors[0][0]) as f32;
        assert!((out.color[center][0] - expected).abs() < 1e-5);
        assert!((out.alpha[center] - alpha as f32).abs() < 1e-5);
        assert!((out.depth[center] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_opacity_leaves_image_empty() {
        let scene = GaussianScene::from_params(&[blob(0.0, 0.0, 2.0, 0.1, 1e-9, 0.0)]);
        let out = rasterize(&scene, &camera(16, 16), &RasterConfig::default()).unwrap();
        assert!(out.alpha.iter().all(|&a| a == 0.0));
        assert!(out.idx_image.iter().all(|&i| i == -1));
        assert_eq!(out.stats.culled, 1);
    }

    #[test]
    fn nearer_opaque_gaussian_wins_overlap() {
        let scene =
            GaussianScene::from_params(&[blob(0.0, 0.0, 3.0, 0.3, 0.9, 0.0), blob(0.0, 0.0, 2.0, 0.1, 0.99, 0.0)]);
        let out = rasterize(&scene, &camera(32, 32), &RasterConfig::default()).unwrap();
        assert_eq!(out.idx_image[16 * 32 + 16], 1);
    }

    #[test]
    fn first_hit_mode_takes_front_splat() {
        // A faint front splat over a strong back splat.
        let scene =
            GaussianScene::from_params(&[blob(0.0, 0.0, 3.0, 0.3, 0.99, 0.0), blob(0.0, 0.0, 2.0, 0.3, 0.1, 0.0)]);
        let cam = camera(32, 32);
        let mut cfg = RasterConfig::default();
        let c = 16 * 32 + 16;
        assert_eq!(rasterize(&scene, &cam, &cfg).unwrap().idx_image[c], 0);
        cfg.index_mode = IndexMode::FirstHit;
        assert_eq!(rasterize(&scene, &cam, &cfg).unwrap().idx_image[c], 1);
    }

    #[test]
    fn instance_mask_cases() {
        let scene =
            GaussianScene::from_params(&[blob(0.0, 0.0, 3.0, 0.4, 0.95, 0.0), blob(0.0, 0.0, 2.0, 0.1, 0.99, 0.0)]);
        let cam = camera(32, 32);
        let cfg = RasterConfig::default();
        let bg = render_instance_mask(&scene, &LabelAssignment::background(2), &cam, &cfg).unwrap();
        assert!(bg.ids().iter().all(|&v| v == 0));
        let labels = LabelAssignment::new(vec![2, 1], Provenance::default());
        let m = render_instance_mask(&scene, &labels, &cam, &cfg).unwrap();
        assert_eq!(m.get(16, 16), 1);
        assert_eq!(m.get(16, 16 + 10), 2);
        let five = LabelAssignment::new(vec![0, 5], Provenance::default());
        let single = GaussianScene::from_params(&[blob(0.0, 0.0, 2.0, 0.1, 0.99, 0.0)]);
        let m = render_instance_mask(
            &single,
            &LabelAssignment::new(vec![5], Provenance::default()),
            &cam,
            &cfg,
        )
        .unwrap();
        assert_eq!(m.get(16, 16), 5);
        assert!(render_instance_mask(&single, &five, &cam, &cfg).is_err());
    }

    #[test]
    fn background_mask_still_votes() {
        let scene = GaussianScene::from_params(&[blob(0.0, 0.0, 2.0, 0.1, 0.99, 0.0)]);
        let cam = camera(32, 32);
        let votes = render_idx_votes(&scene, &cam, &InstanceMask2D::new(32, 32), &RasterConfig::default()).unwrap();
        assert_eq!(votes.len(), 1);
        assert_eq!(votes[0].id, 0);
        assert!(votes[0].count > 0);
    }

    #[test]
    fn mask_resolution_mismatch_is_contract_error() {
        let r = render_idx_votes(
            &GaussianScene::empty(),
            &camera(32, 32),
            &InstanceMask2D::new(16, 32),
            &RasterConfig::default(),
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn config_validation() {
        let mut cfg = RasterConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.tile_size = 2;
        assert!(cfg.validate().is_err());
        cfg = RasterConfig {
            contribution_floor: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn group_votes_counts_pairs() {
        let idx = [0, 0, -1, 2, 0, 2];
        let ids = [3, 3, 9, 1, 4, 1];
        let v = group_votes(&idx, &ids);
        assert_eq!(
            v,
            vec![
                Vote {
                    gaussian: 0,
                    id: 3,
                    count: 2
                },
                Vote {
                    gaussian: 0,
                    id: 4,
                    count: 1
                },
                Vote {
                    gaussian: 2,
                    id: 1,
                    count: 2
                },
            ]
        );
    }
}
