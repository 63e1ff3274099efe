mod common;

use common::{random_camera, random_scene};
use nalgebra::{Matrix2, Matrix3, Vector3};
use splatseg::geometry::{project_covariance, world_covariance};
use splatseg::raster::{rasterize, render_idx_votes, render_instance_mask, RasterConfig, Vote};
use splatseg::rng::FixtureRng;
use splatseg::scene::{logit, Provenance};
use splatseg::{Camera, GaussianParams, GaussianScene, InstanceMask2D, LabelAssignment};

/// Straightforward per-pixel compositor over every primitive.
struct Reference {
    alpha: Vec<f64>,
    idx: Vec<i32>,
    /// Per pixel: (primitive, blending weight) in compositing order.
    weights: Vec<Vec<(usize, f64)>>,
}

fn reference_render(scene: &GaussianScene, cam: &Camera, cfg: &RasterConfig) -> Reference {
    struct P {
        i: usize,
        z: f64,
        mx: f64,
        my: f64,
        inv: Matrix2<f64>,
        op: f64,
    }
    let mut prims = Vec::new();
    for i in 0..scene.len() {
        let op = scene.opacities[i];
        let t = cam.rotation * scene.positions[i] + cam.translation;
        if op < cfg.alpha_cutoff || t.z <= cam.near_plane {
            continue;
        }
        let cov = project_covariance(
            cam,
            &scene.positions[i],
            &world_covariance(&scene.scales[i], &scene.rotations[i]),
        )
        .unwrap();
        let Some(inv) = cov.try_inverse() else { continue };
        prims.push(P {
            i,
            z: t.z,
            mx: cam.fx * t.x / t.z + cam.cx,
            my: cam.fy * t.y / t.z + cam.cy,
            inv,
            op,
        });
    }
    prims.sort_by(|a, b| a.z.partial_cmp(&b.z).unwrap().then(a.i.cmp(&b.i)));
    let n = cam.width * cam.height;
    let mut out = Reference {
        alpha: vec![0.0; n],
        idx: vec![-1; n],
        weights: vec![Vec::new(); n],
    };
    for y in 0..cam.height {
        for x in 0..cam.width {
            let p = y * cam.width + x;
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 1.0;
            let mut best: Option<(f64, usize)> = None;
            for g in &prims {
                let d = nalgebra::Vector2::new(px - g.mx, py - g.my);
                let m2 = (d.transpose() * g.inv * d)[(0, 0)];
                if m2 > cfg.footprint_sigma * cfg.footprint_sigma {
                    continue;
                }
                let a = (g.op * (-0.5 * m2).exp()).min(cfg.max_alpha);
                if a < cfg.alpha_cutoff {
                    continue;
                }
                let w = a * t;
                out.weights[p].push((g.i, w));
                if best.is_none_or(|(bw, _)| w > bw) {
                    best = Some((w, g.i));
                }
                t *= 1.0 - a;
                if t < cfg.transmittance_stop {
                    break;
                }
            }
            out.alpha[p] = 1.0 - t;
            if let Some((_, i)) = best {
                if 1.0 - t >= cfg.contribution_floor {
                    out.idx[p] = i as i32;
                }
            }
        }
    }
    out
}

fn blob(pos: [f32; 3], scale: f32, opacity: f64) -> GaussianParams {
    GaussianParams {
        position: pos,
        log_scale: [scale.ln(); 3],
        rotation: [1.0, 0.0, 0.0, 0.0],
        opacity_logit: logit(opacity) as f32,
        sh_dc: [0.5, -0.5, 0.0],
    }
}

fn front_camera(w: usize, h: usize) -> Camera {
    Camera::new(
        w,
        h,
        60.0,
        60.0,
        w as f64 / 2.0,
        h as f64 / 2.0,
        Matrix3::identity(),
        Vector3::zeros(),
    )
    .unwrap()
}

#[test]
fn matches_reference_compositor_on_random_scenes() {
    let mut rng = FixtureRng::new(11);
    let cfg = RasterConfig::default();
    for _ in 0..12 {
        let scene = random_scene(&mut rng, 60, 0.5);
        let cam = random_camera(&mut rng, 48, 40);
        let out = rasterize(&scene, &cam, &cfg).unwrap();
        let r = reference_render(&scene, &cam, &cfg);
        assert_eq!(out.idx_image, r.idx);
        for (a, b) in out.alpha.iter().zip(&r.alpha) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }
}

#[test]
fn nearer_opaque_splat_indexes_overlap() {
    let scene = GaussianScene::from_params(&[blob([0.02, 0.0, 2.0], 0.15, 0.99), blob([0.0, 0.0, 1.5], 0.1, 0.99)]);
    let cam = front_camera(40, 40);
    let cfg = RasterConfig::default();
    let out = rasterize(&scene, &cam, &cfg).unwrap();
    let r = reference_render(&scene, &cam, &cfg);
    assert_eq!(r.idx[20 * 40 + 20], 1);
    assert_eq!(out.idx_image[20 * 40 + 20], 1);
}

#[test]
fn centered_near_opaque_color_matches() {
    let scene = GaussianScene::from_params(&[blob([0.0, 0.0, 2.0], 0.4, 0.999)]);
    let out = rasterize(&scene, &front_camera(32, 32), &RasterConfig::default()).unwrap();
    let c = out.color[16 * 32 + 16];
    for (got, want) in c.iter().zip(scene.colors[0]) {
        assert!((*got as f64 - want).abs() < 1e-2);
    }
}

#[test]
fn idx_votes_equal_group_by_of_index_map() {
    let mut rng = FixtureRng::new(5);
    let cfg = RasterConfig::default();
    for case in 0..10 {
        let scene = random_scene(&mut rng, 20 + 18 * case, 0.5);
        let cam = random_camera(&mut rng, 64, 64);
        let mask = common::blocky_mask(&mut rng, 64, 64, 5, 7);
        let out = rasterize(&scene, &cam, &cfg).unwrap();
        let mut dense = std::collections::BTreeMap::new();
        for (p, &i) in out.idx_image.iter().enumerate() {
            if i >= 0 {
                *dense.entry((i as u32, mask.ids()[p])).or_insert(0u32) += 1;
            }
        }
        let expected: Vec<Vote> = dense
            .into_iter()
            .map(|((gaussian, id), count)| Vote { gaussian, id, count })
            .collect();
        assert_eq!(render_idx_votes(&scene, &cam, &mask, &cfg).unwrap(), expected);
    }
}

#[test]
fn single_gaussian_votes_once_per_covered_pixel() {
    let scene = GaussianScene::from_params(&[blob([0.0, 0.0, 3.0], 0.04, 0.95)]);
    let cam = front_camera(32, 32);
    let cfg = RasterConfig::default();
    let covered = rasterize(&scene, &cam, &cfg)
        .unwrap()
        .idx_image
        .iter()
        .filter(|&&i| i == 0)
        .count() as u32;
    assert!(covered > 0);
    let mut mask = InstanceMask2D::new(32, 32);
    mask.ids_mut().fill(3);
    let votes = render_idx_votes(&scene, &cam, &mask, &cfg).unwrap();
    assert_eq!(
        votes,
        vec![Vote {
            gaussian: 0,
            id: 3,
            count: covered
        }]
    );
}

#[test]
fn occluder_label_wins_overlap() {
    let scene = GaussianScene::from_params(&[blob([0.0, 0.0, 1.5], 0.12, 0.97), blob([0.0, 0.0, 2.5], 0.6, 0.97)]);
    let labels = LabelAssignment::new(vec![1, 2], Provenance::default());
    let cam = front_camera(40, 40);
    let cfg = RasterConfig::default();
    let mask = render_instance_mask(&scene, &labels, &cam, &cfg).unwrap();
    let r = reference_render(&scene, &cam, &cfg);
    for p in 0..40 * 40 {
        // Per-ID weight sums from the reference traversal.
        let mut per = [0.0f64; 3];
        for &(i, w) in &r.weights[p] {
            per[labels.labels[i] as usize] += w;
        }
        let total: f64 = per.iter().sum();
        let (best, bw) = (0..3)
            .map(|k| (k, per[k]))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let expected = if total > 0.0 && bw > 0.5 * total {
            best as u16
        } else {
            0
        };
        assert_eq!(mask.ids()[p], expected, "pixel {p}");
    }
    assert_eq!(mask.get(20, 20), 1);
}

#[test]
fn invariants_on_fuzzed_primitives() {
    let mut rng = FixtureRng::new(23);
    let pools = common::thread_pools(&[1, 3]);
    let mut primitives = 0;
    while primitives < 1000 {
        let scene = random_scene(&mut rng, 50, 0.6);
        primitives += scene.len();
        let cam = random_camera(&mut rng, 40, 36);
        common::check_raster_invariants(&scene, &cam, &pools).unwrap();
    }
}

#[test]
fn zero_opacity_scene_is_empty() {
    let mut rng = FixtureRng::new(2);
    let params: Vec<GaussianParams> = (0..30)
        .map(|_| GaussianParams {
            opacity_logit: -40.0,
            ..blob(
                [rng.range(-0.3, 0.3) as f32, rng.range(-0.3, 0.3) as f32, 2.0],
                0.1,
                0.5,
            )
        })
        .collect();
    let out = rasterize(
        &GaussianScene::from_params(&params),
        &front_camera(24, 24),
        &RasterConfig::default(),
    )
    .unwrap();
    assert!(out.alpha.iter().all(|&a| a == 0.0));
    assert!(out.idx_image.iter().all(|&i| i == -1));
}

#[test]
fn behind_camera_primitives_are_culled() {
    let scene = GaussianScene::from_params(&[blob([0.0, 0.0, -2.0], 0.1, 0.9), blob([0.0, 0.0, 0.005], 0.1, 0.9)]);
    let out = rasterize(&scene, &front_camera(16, 16), &RasterConfig::default()).unwrap();
    assert_eq!(out.stats.culled, 2);
    assert!(out.idx_image.iter().all(|&i| i == -1));
}
