//! Camera list JSON.
//!
//! ```json
//! [{"id": 0, "width": 128, "height": 128, "fx": 137.2, "fy": 137.2,
//!   "cx": 64.0, "cy": 64.0, "world_to_camera": [16 row-major floats]}]
//! ```
//!
//! `id` may be a string or an integer; masks pair with cameras by it.

use std::path::{Path, PathBuf};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, DEFAULT_NEAR_PLANE};
use crate::io::{read_file, write_file};

/// Ordered cameras sharing one resolution, with optional paired masks.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub ids: Vec<String>,
    pub cameras: Vec<Camera>,
    pub mask_paths: Option<Vec<PathBuf>>,
}

impl ViewSet {
    /// Validates `T >= 1` and a uniform resolution; ids default to `0..T`.
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        let ids = (0..cameras.len()).map(|i| i.to_string()).collect();
        Self::with_ids(ids, cameras)
    }

    pub fn with_ids(ids: Vec<String>, cameras: Vec<Camera>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::Config("T ≥ 1 required: camera list is empty".into()));
        }
        if ids.len() != cameras.len() {
            return Err(Error::Contract("camera ids and cameras differ in length".into()));
        }
        let (w, h) = (cameras[0].width, cameras[0].height);
        if let Some((i, c)) = cameras.iter().enumerate().find(|(_, c)| (c.width, c.height) != (w, h)) {
            return Err(Error::Config(format!(
                "camera {} is {}x{} but camera {} is {w}x{h}; all views must share one resolution",
                ids[i], c.width, c.height, ids[0]
            )));
        }
        Ok(ViewSet {
            ids,
            cameras,
            mask_paths: None,
        })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.cameras[0].width, self.cameras[0].height)
    }

    /// Views at the given positions, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<ViewSet> {
        let mut vs = Self::with_ids(
            indices.iter().map(|&i| self.ids[i].clone()).collect(),
            indices.iter().map(|&i| self.cameras[i].clone()).collect(),
        )?;
        vs.mask_paths = self
            .mask_paths
            .as_ref()
            .map(|p| indices.iter().map(|&i| p[i].clone()).collect());
        Ok(vs)
    }

    /// Pairs each view with `dir/mask_{id}.pgm`.
    pub fn attach_masks(&mut self, dir: &Path) {
        self.mask_paths = Some(self.ids.iter().map(|id| dir.join(format!("mask_{id}.pgm"))).collect());
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum CameraId {
    Int(u64),
    Str(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRecord {
    id: CameraId,
    width: usize,
    height: usize,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    world_to_camera: [f64; 16],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    near_plane: Option<f64>,
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<ViewSet> {
    let path = path.as_ref();
    let text =
        String::from_utf8(read_file(path)?).map_err(|_| Error::Format(format!("{}: not UTF-8", path.display())))?;
    parse_cameras(&text)
}

pub fn parse_cameras(json: &str) -> Result<ViewSet> {
    let records: Vec<CameraRecord> =
        serde_json::from_str(json).map_err(|e| Error::Config(format!("camera JSON: {e}")))?;
    let mut ids = Vec::with_capacity(records.len());
    let mut cameras = Vec::with_capacity(records.len());
    for r in records {
        let id = match r.id {
            CameraId::Int(i) => i.to_string(),
            CameraId::Str(s) => s,
        };
        let m = Matrix4::from_row_slice(&r.world_to_camera);
        let mut cam = Camera::from_world_to_camera(r.width, r.height, [r.fx, r.fy, r.cx, r.cy], &m)
            .map_err(|e| Error::Config(format!("camera {id}: {e}")))?;
        if let Some(near) = r.near_plane {
            cam.near_plane = near;
            cam.validate().map_err(|e| Error::Config(format!("camera {id}: {e}")))?;
        }
        ids.push(id);
        cameras.push(cam);
    }
    ViewSet::with_ids(ids, cameras)
}

pub fn cameras_to_json(views: &ViewSet) -> String {
    let records: Vec<CameraRecord> = views
        .ids
        .iter()
        .zip(&views.cameras)
        .map(|(id, c)| {
            let m = c.world_to_camera();
            let mut rows = [0.0; 16];
            for r in 0..4 {
                for k in 0..4 {
                    rows[r * 4 + k] = m[(r, k)];
                }
            }
            CameraRecord {
                id: id
                    .parse::<u64>()
                    .ok()
                    .filter(|v| v.to_string() == *id)
                    .map_or_else(|| CameraId::Str(id.clone()), CameraId::Int),
                width: c.width,
                height: c.height,
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                world_to_camera: rows,
                near_plane: (c.near_plane != DEFAULT_NEAR_PLANE).then_some(c.near_plane),
            }
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("camera records serialize")
}

pub fn save_cameras(views: &ViewSet, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), cameras_to_json(views).as_bytes())
}
