#![allow(dead_code)]

use nalgebra::Vector3;
use splatseg::io::ViewSet;
use splatseg::rng::FixtureRng;
use splatseg::scene::logit;
use splatseg::{Camera, GaussianParams, GaussianScene, InstanceId, InstanceMask2D};

/// `n` random Gaussians around the origin within a cube of half-width `extent`.
pub fn random_scene(rng: &mut FixtureRng, n: usize, extent: f64) -> GaussianScene {
    let params: Vec<GaussianParams> = (0..n)
        .map(|_| GaussianParams {
            position: [0; 3].map(|_| rng.range(-extent, extent) as f32),
            log_scale: [0; 3].map(|_| rng.range(0.01, 0.12).ln() as f32),
            rotation: [0; 4].map(|_| rng.normal() as f32),
            opacity_logit: logit(rng.range(0.02, 0.995)) as f32,
            sh_dc: [0; 3].map(|_| rng.range(-1.5, 1.5) as f32),
        })
        .collect();
    GaussianScene::from_params(&params)
}

/// A camera on a sphere around the origin looking roughly at it.
pub fn random_camera(rng: &mut FixtureRng, w: usize, h: usize) -> Camera {
    loop {
        let dir = Vector3::new(rng.normal(), rng.normal(), rng.normal());
        let Some(dir) = dir.try_normalize(1e-6) else { continue };
        if dir.z.abs() > 0.95 {
            continue;
        }
        let eye = dir * rng.range(1.5, 3.0);
        let target = Vector3::new(rng.range(-0.2, 0.2), rng.range(-0.2, 0.2), rng.range(-0.2, 0.2));
        return Camera::look_at(w, h, rng.range(35.0, 75.0), eye, target, Vector3::z()).unwrap();
    }
}

pub fn random_views(rng: &mut FixtureRng, t: usize, w: usize, h: usize) -> ViewSet {
    ViewSet::new((0..t).map(|_| random_camera(rng, w, h)).collect()).unwrap()
}

/// Blocky random mask: `block`-sized cells, each a random ID in `0..=k`.
pub fn blocky_mask(rng: &mut FixtureRng, w: usize, h: usize, k: InstanceId, block: usize) -> InstanceMask2D {
    let cols = w.div_ceil(block);
    let rows = h.div_ceil(block);
    let cells: Vec<InstanceId> = (0..cols * rows)
        .map(|_| rng.below(k as u64 + 1) as InstanceId)
        .collect();
    let mut m = InstanceMask2D::new(w, h);
    for y in 0..h {
        for x in 0..w {
            m.set(x, y, cells[(y / block) * cols + x / block]);
        }
    }
    m
}

pub fn square_mask(size: usize, lo: usize, hi: usize, id: InstanceId) -> InstanceMask2D {
    let mut m = InstanceMask2D::new(size, size);
    for y in lo..hi {
        for x in lo..hi {
            m.set(x, y, id);
        }
    }
    m
}

/// Dense `N x (K+1)` count matrix built from full index-map renders, then a
/// row argmax with ties toward the smaller ID.
pub fn dense_oracle_labels(
    scene: &GaussianScene,
    views: &ViewSet,
    masks: &[InstanceMask2D],
    raster: &splatseg::raster::RasterConfig,
    min_votes: u64,
) -> (Vec<InstanceId>, u64) {
    let k = masks.iter().map(|m| m.max_id()).max().unwrap_or(0) as usize;
    let n = scene.len();
    let mut c = vec![0u64; n * (k + 1)];
    let mut total = 0;
    for (cam, mask) in views.cameras.iter().zip(masks) {
        let idx = splatseg::raster::rasterize(scene, cam, raster).unwrap().idx_image;
        for (p, &i) in idx.iter().enumerate() {
            if i >= 0 {
                c[i as usize * (k + 1) + mask.ids()[p] as usize] += 1;
                total += 1;
            }
        }
    }
    let labels = (0..n)
        .map(|i| {
            let row = &c[i * (k + 1)..(i + 1) * (k + 1)];
            if row.iter().sum::<u64>() < min_votes {
                return 0;
            }
            let mut best = 0;
            for id in 1..=k {
                if row[id] > row[best] {
                    best = id;
                }
            }
            best as InstanceId
        })
        .collect();
    (labels, total)
}

pub struct MetricCase {
    pub name: &'static str,
    pub pred: InstanceMask2D,
    pub gt: InstanceMask2D,
    pub matching: splatseg::eval::Matching,
    pub miou: f64,
    pub macc: f64,
}

fn rows(r: &[&[InstanceId]]) -> InstanceMask2D {
    InstanceMask2D::from_rows(r).unwrap()
}

/// Mask pairs with metrics worked out by hand.
pub fn crafted_metric_cases() -> Vec<MetricCase> {
    use splatseg::eval::Matching::{Hungarian, Identity};
    let case = |name, pred, gt, matching, miou, macc| MetricCase {
        name,
        pred,
        gt,
        matching,
        miou,
        macc,
    };
    vec![
        case(
            "identical",
            rows(&[&[1, 1], &[2, 0]]),
            rows(&[&[1, 1], &[2, 0]]),
            Identity,
            1.0,
            1.0,
        ),
        case(
            "third_iou",
            rows(&[&[0, 1, 1, 0]]),
            rows(&[&[1, 1, 0, 0]]),
            Identity,
            1.0 / 3.0,
            0.5,
        ),
        case(
            "disjoint",
            rows(&[&[0, 0, 1, 1]]),
            rows(&[&[1, 1, 0, 0]]),
            Identity,
            0.0,
            0.0,
        ),
        case(
            "both_empty",
            rows(&[&[0, 0, 0, 0]]),
            rows(&[&[0, 0, 0, 0]]),
            Identity,
            1.0,
            1.0,
        ),
        case(
            "empty_gt",
            rows(&[&[0, 3, 0, 0]]),
            rows(&[&[0, 0, 0, 0]]),
            Identity,
            0.0,
            0.75,
        ),
        case(
            "empty_pred",
            rows(&[&[0, 0, 0, 0]]),
            rows(&[&[1, 1, 2, 0]]),
            Identity,
            0.0,
            0.25,
        ),
        case(
            "two_partial",
            rows(&[&[1, 2, 2], &[1, 2, 2]]),
            rows(&[&[1, 1, 2], &[1, 2, 2]]),
            Identity,
            (2.0 / 3.0 + 0.75) / 2.0,
            5.0 / 6.0,
        ),
        case(
            "swapped_identity",
            rows(&[&[2, 2, 1, 1]]),
            rows(&[&[1, 1, 2, 2]]),
            Identity,
            0.0,
            0.0,
        ),
        case(
            "swapped_hungarian",
            rows(&[&[2, 2, 1, 1]]),
            rows(&[&[1, 1, 2, 2]]),
            Hungarian,
            1.0,
            1.0,
        ),
        case(
            "extra_pred_hungarian",
            rows(&[&[5, 5, 0, 7, 7, 0]]),
            rows(&[&[1, 1, 1, 0, 0, 0]]),
            Hungarian,
            2.0 / 3.0,
            0.5,
        ),
    ]
}

/// Transmittance monotonicity, alpha range, footprint membership of every
/// `idx_image` entry and identical output across tile sizes and the given
/// thread pools.
pub fn check_raster_invariants(scene: &GaussianScene, cam: &Camera, pools: &[rayon::ThreadPool]) -> Result<(), String> {
    use splatseg::geometry::{project_covariance, world_covariance};
    use splatseg::raster::{rasterize, trace_pixel, RasterConfig};

    let base = RasterConfig::default();
    let out = rasterize(scene, cam, &base).map_err(|e| e.to_string())?;
    let (w, h) = (cam.width, cam.height);
    if !out.alpha.iter().all(|a| (0.0..=1.0).contains(a)) {
        return Err("alpha outside [0,1]".into());
    }
    for y in (0..h).step_by(5) {
        for x in (0..w).step_by(5) {
            let trace = trace_pixel(scene, cam, &base, x, y).map_err(|e| e.to_string())?;
            let mut t = 1.0;
            for c in &trace {
                if c.transmittance > t + 1e-15 || !(0.0..=1.0).contains(&c.alpha) {
                    return Err(format!("pixel ({x},{y}): transmittance rose or alpha out of range"));
                }
                t = c.transmittance * (1.0 - c.alpha);
            }
            if ((1.0 - t) as f32 - out.alpha[y * w + x]).abs() >= 1e-6 {
                return Err(format!("pixel ({x},{y}): trace disagrees with rendered alpha"));
            }
        }
    }
    for (p, &i) in out.idx_image.iter().enumerate() {
        if i < 0 {
            if out.alpha[p] >= base.contribution_floor as f32 + 1e-6 {
                return Err(format!("pixel {p}: opaque but unindexed"));
            }
            continue;
        }
        let i = i as usize;
        let (x, y) = ((p % w) as f64 + 0.5, (p / w) as f64 + 0.5);
        let pos = scene.positions[i];
        let cov = project_covariance(cam, &pos, &world_covariance(&scene.scales[i], &scene.rotations[i]))
            .map_err(|e| e.to_string())?;
        let t = cam.to_camera(&pos);
        let d = nalgebra::Vector2::new(x - (cam.fx * t.x / t.z + cam.cx), y - (cam.fy * t.y / t.z + cam.cy));
        let inv = cov.try_inverse().ok_or("singular footprint")?;
        let m2 = (d.transpose() * inv * d)[(0, 0)];
        if m2 > base.footprint_sigma * base.footprint_sigma + 1e-9 {
            return Err(format!("pixel {p} outside the footprint of {i}"));
        }
    }
    for tile in [4, 8, 32] {
        let cfg = RasterConfig {
            tile_size: tile,
            ..base.clone()
        };
        let other = rasterize(scene, cam, &cfg).map_err(|e| e.to_string())?;
        if other.idx_image != out.idx_image || other.alpha != out.alpha || other.color != out.color {
            return Err(format!("tile size {tile} changed the output"));
        }
    }
    for pool in pools {
        let other = pool
            .install(|| rasterize(scene, cam, &base))
            .map_err(|e| e.to_string())?;
        if other.idx_image != out.idx_image || other.depth != out.depth {
            return Err(format!("{} threads changed the output", pool.current_num_threads()));
        }
    }
    Ok(())
}

pub fn thread_pools(sizes: &[usize]) -> Vec<rayon::ThreadPool> {
    sizes
        .iter()
        .map(|&n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap())
        .collect()
}
