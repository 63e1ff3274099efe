mod common;

use common::{blocky_mask, random_scene, random_views};
use proptest::prelude::*;
use splatseg::io::{
    decode_labeled_scene, encode_labeled_scene, load_cameras, load_labeled_scene, load_labels_txt, load_mask,
    load_scene, save_cameras, save_labels, save_labels_txt, save_mask, save_scene,
};
use splatseg::rng::FixtureRng;
use splatseg::scene::Provenance;
use splatseg::{Error, GaussianParams, GaussianScene, InstanceMask2D, LabelAssignment};

fn params_of(scene: &GaussianScene) -> Vec<GaussianParams> {
    (0..scene.len()).map(|i| scene.params(i)).collect()
}

#[test]
fn labeled_scene_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = FixtureRng::new(4);
    let scene = random_scene(&mut rng, 37, 1.0);
    let labels: Vec<u16> = (0..37).map(|_| rng.below(6) as u16).collect();
    let prov = Provenance {
        mode: "render".into(),
        views: 12,
        min_votes: 2,
        timestamp: Some(1_700_000_000),
        ..Provenance::default()
    };
    let assignment = LabelAssignment::new(labels.clone(), prov.clone());
    let path = dir.path().join("labeled.ply");
    save_labels(&assignment, &scene, &path).unwrap();

    let (back, got) = load_labeled_scene(&path).unwrap();
    let got = got.expect("labels present");
    assert_eq!(got.labels, labels);
    assert_eq!(got.provenance, prov);
    assert_eq!(params_of(&back), params_of(&scene));
    assert_eq!(load_scene(&path).unwrap().positions, scene.positions);

    // Saving the reloaded pair reproduces the file byte for byte.
    let again = dir.path().join("again.ply");
    save_labels(&got, &back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn unlabeled_scene_has_no_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let scene = random_scene(&mut FixtureRng::new(1), 5, 1.0);
    let path = dir.path().join("plain.ply");
    save_scene(&scene, &path).unwrap();
    let (back, labels) = load_labeled_scene(&path).unwrap();
    assert!(labels.is_none());
    assert_eq!(params_of(&back), params_of(&scene));
}

#[test]
fn empty_and_all_background_scenes() {
    let empty = GaussianScene::empty();
    let bytes = encode_labeled_scene(&LabelAssignment::background(0), &empty).unwrap();
    let (scene, labels) = decode_labeled_scene(&bytes).unwrap();
    assert_eq!(scene.len(), 0);
    assert_eq!(labels.unwrap().labels, Vec::<u16>::new());

    let scene = random_scene(&mut FixtureRng::new(2), 9, 1.0);
    let bytes = encode_labeled_scene(&LabelAssignment::background(9), &scene).unwrap();
    let labels = decode_labeled_scene(&bytes).unwrap().1.unwrap();
    assert_eq!(labels.labels, vec![0; 9]);
    assert_eq!(labels.num_instances, 0);
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_scene(dir.path().join("nope.ply")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
    assert!(err.to_string().contains("nope.ply"));
}

#[test]
fn truncated_ply_is_format_error() {
    let scene = random_scene(&mut FixtureRng::new(3), 4, 1.0);
    let bytes = encode_labeled_scene(&LabelAssignment::background(4), &scene).unwrap();
    let err = decode_labeled_scene(&bytes[..bytes.len() - 3]).unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err}");
}

#[test]
fn masks_round_trip_through_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = FixtureRng::new(6);
    let mut mask = blocky_mask(&mut rng, 23, 17, 9, 3);
    mask.set(0, 0, 40_000);
    for ext in ["pgm", "png"] {
        let path = dir.path().join(format!("m.{ext}"));
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }
    assert!(matches!(
        save_mask(&mask, dir.path().join("m.bmp")),
        Err(Error::Format(_))
    ));
}

#[test]
fn cameras_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let views = random_views(&mut FixtureRng::new(7), 5, 64, 48);
    let path = dir.path().join("cameras.json");
    save_cameras(&views, &path).unwrap();
    let back = load_cameras(&path).unwrap();
    assert_eq!(back.ids, views.ids);
    for (a, b) in back.cameras.iter().zip(&views.cameras) {
        assert_eq!(a.world_to_camera(), b.world_to_camera());
        assert_eq!((a.fx, a.fy, a.cx, a.cy), (b.fx, b.fy, b.cx, b.cy));
    }
}

#[test]
fn label_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = LabelAssignment::new(vec![0, 3, 65535, 1], Provenance::default());
    let path = dir.path().join("labels.txt");
    save_labels_txt(&a, &path).unwrap();
    assert_eq!(load_labels_txt(&path).unwrap(), a.labels);
}

fn finite() -> impl Strategy<Value = f32> {
    prop::num::f32::NORMAL | prop::num::f32::ZERO | prop::num::f32::SUBNORMAL
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn label_round_trip_is_bit_exact(
        rows in prop::collection::vec(
            (prop::array::uniform3(finite()), prop::array::uniform3(-8.0f32..2.0),
             prop::array::uniform4(0.1f32..1.0), finite(), prop::array::uniform3(finite()), any::<u16>()),
            0..40,
        )
    ) {
        let params: Vec<GaussianParams> = rows.iter().map(|(p, s, q, o, c, _)| GaussianParams {
            position: *p,
            log_scale: *s,
            rotation: *q,
            opacity_logit: *o,
            sh_dc: *c,
        }).collect();
        let labels: Vec<u16> = rows.iter().map(|r| r.5).collect();
        let scene = GaussianScene::from_params(&params);
        let bytes = encode_labeled_scene(&LabelAssignment::new(labels.clone(), Provenance::default()), &scene).unwrap();
        let (back, got) = decode_labeled_scene(&bytes).unwrap();
        prop_assert_eq!(got.unwrap().labels, labels);
        for (i, p) in params.iter().enumerate() {
            let q = back.params(i);
            prop_assert_eq!(q.position.map(f32::to_bits), p.position.map(f32::to_bits));
            prop_assert_eq!(q.log_scale.map(f32::to_bits), p.log_scale.map(f32::to_bits));
            prop_assert_eq!(q.rotation.map(f32::to_bits), p.rotation.map(f32::to_bits));
            prop_assert_eq!(q.opacity_logit.to_bits(), p.opacity_logit.to_bits());
            prop_assert_eq!(q.sh_dc.map(f32::to_bits), p.sh_dc.map(f32::to_bits));
        }
    }

    #[test]
    fn pgm_round_trip(w in 1usize..30, h in 1usize..30, seed in any::<u64>()) {
        let mut rng = FixtureRng::new(seed);
        let ids = (0..w * h).map(|_| rng.below(65536) as u16).collect();
        let m = InstanceMask2D::from_vec(w, h, ids).unwrap();
        prop_assert_eq!(splatseg::io::decode_pgm(&splatseg::io::encode_pgm(&m)).unwrap(), m);
    }
}
