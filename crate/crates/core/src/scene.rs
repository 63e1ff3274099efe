//! Gaussian scenes and per-Gaussian instance labels.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ply::{ScalarType, VertexTable};
use crate::mask::InstanceId;

/// Zeroth-order real spherical-harmonic coefficient.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

const ROTATION_TOLERANCE: f64 = 1e-6;

/// Stored (pre-activation) parameters of one primitive, as found in a 3DGS PLY.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub position: [f32; 3],
    pub log_scale: [f32; 3],
    /// `(w, x, y, z)`, not necessarily normalized.
    pub rotation: [f32; 4],
    pub opacity_logit: f32,
    pub sh_dc: [f32; 3],
}

const CANONICAL_LAYOUT: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
    "rot_3",
];

/// An explicit 3D Gaussian scene with activations applied.
///
/// The stored vertex records are kept alongside the activated arrays, so the
/// scene can be written back unchanged with labels appended.
#[derive(Debug, Clone)]
pub struct GaussianScene {
    pub positions: Vec<Vector3<f64>>,
    pub scales: Vec<Vector3<f64>>,
    pub rotations: Vec<UnitQuaternion<f64>>,
    pub opacities: Vec<f64>,
    pub colors: Vec<[f64; 3]>,
    table: VertexTable,
}

impl GaussianScene {
    pub fn empty() -> Self {
        Self::from_params(&[])
    }

    pub fn from_params(params: &[GaussianParams]) -> Self {
        let layout: Vec<(&str, ScalarType)> = CANONICAL_LAYOUT.iter().map(|n| (*n, ScalarType::F32)).collect();
        let mut table = VertexTable::new(&layout);
        let mut rec = Vec::with_capacity(4 * CANONICAL_LAYOUT.len());
        for p in params {
            rec.clear();
            let values = p
                .position
                .iter()
                .chain(&p.sh_dc)
                .chain(std::iter::once(&p.opacity_logit))
                .chain(&p.log_scale)
                .chain(&p.rotation);
            for v in values {
                rec.extend_from_slice(&v.to_le_bytes());
            }
            table.push_raw(&rec);
        }
        Self::from_table(table).expect("canonical parameters must decode")
    }

    /// Applies activations to a vertex table. `instance_id`, if present, is
    /// left in the table; callers strip it first.
    pub(crate) fn from_table(table: VertexTable) -> Result<Self> {
        let col = |name: &str| table.column(name);
        let xyz = [col("x")?, col("y")?, col("z")?];
        let scale = [col("scale_0")?, col("scale_1")?, col("scale_2")?];
        let rot = [col("rot_0")?, col("rot_1")?, col("rot_2")?, col("rot_3")?];
        let opacity = col("opacity")?;
        let dc = [col("f_dc_0")?, col("f_dc_1")?, col("f_dc_2")?];

        let n = table.len();
        let mut scene = GaussianScene {
            positions: Vec::with_capacity(n),
            scales: Vec::with_capacity(n),
            rotations: Vec::with_capacity(n),
            opacities: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            table: VertexTable::new(&[]),
        };
        for i in 0..n {
            let raw = [
                xyz[0][i],
                xyz[1][i],
                xyz[2][i],
                scale[0][i],
                scale[1][i],
                scale[2][i],
                rot[0][i],
                rot[1][i],
                rot[2][i],
                rot[3][i],
                opacity[i],
                dc[0][i],
                dc[1][i],
                dc[2][i],
            ];
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite value in primitive {i}")));
            }
            let s = Vector3::new(scale[0][i].exp(), scale[1][i].exp(), scale[2][i].exp());
            if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::Data(format!("scale of primitive {i} is not positive")));
            }
            let q = Quaternion::new(rot[0][i], rot[1][i], rot[2][i], rot[3][i]);
            let norm = q.norm();
            if !(norm > 0.0) {
                return Err(Error::Data(format!("zero rotation quaternion in primitive {i}")));
            }
            let rotation = if (norm - 1.0).abs() <= ROTATION_TOLERANCE {
                UnitQuaternion::new_unchecked(q)
            } else {
                UnitQuaternion::from_quaternion(q)
            };
            scene.positions.push(Vector3::new(xyz[0][i], xyz[1][i], xyz[2][i]));
            scene.scales.push(s);
            scene.rotations.push(rotation);
            scene.opacities.push(sigmoid(opacity[i]));
            scene
                .colors
                .push([0, 1, 2].map(|k| (0.5 + SH_C0 * dc[k][i]).clamp(0.0, 1.0)));
        }
        scene.table = table;
        Ok(scene)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub(crate) fn table(&self) -> &VertexTable {
        &self.table
    }

    /// Stored parameters of primitive `i`, narrowed to `f32`.
    pub fn params(&self, i: usize) -> GaussianParams {
        let v = |name: &str| self.table.value(i, name).unwrap_or(0.0) as f32;
        GaussianParams {
            position: [v("x"), v("y"), v("z")],
            log_scale: [v("scale_0"), v("scale_1"), v("scale_2")],
            rotation: [v("rot_0"), v("rot_1"), v("rot_2"), v("rot_3")],
            opacity_logit: v("opacity"),
            sh_dc: [v("f_dc_0"), v("f_dc_1"), v("f_dc_2")],
        }
    }

    /// Sub-scene holding the listed primitives, keeping their stored records.
    pub fn select(&self, rows: &[usize]) -> GaussianScene {
        Self::from_table(self.table.select(rows)).expect("rows of a valid scene decode")
    }

    /// Centroid of primitive positions (origin for an empty scene).
    pub fn centroid(&self) -> Vector3<f64> {
        if self.is_empty() {
            return Vector3::zeros();
        }
        self.positions.iter().sum::<Vector3<f64>>() / self.len() as f64
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// How a label assignment was produced; serialized into PLY header comments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// `render`, `centroid`, `ground_truth` or `unknown`.
    pub mode: String,
    pub views: usize,
    pub tie_break: String,
    pub min_votes: u64,
    pub timestamp: Option<u64>,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            mode: "unknown".into(),
            views: 0,
            tie_break: "smallest_id".into(),
            min_votes: 1,
            timestamp: None,
        }
    }
}

const PROVENANCE_PREFIX: &str = "splatseg_";

impl Provenance {
    pub(crate) fn to_comments(&self) -> Vec<String> {
        let mut out = vec![
            format!("{PROVENANCE_PREFIX}mode {}", self.mode),
            format!("{PROVENANCE_PREFIX}views {}", self.views),
            format!("{PROVENANCE_PREFIX}tie_break {}", self.tie_break),
            format!("{PROVENANCE_PREFIX}min_votes {}", self.min_votes),
        ];
        if let Some(ts) = self.timestamp {
            out.push(format!("{PROVENANCE_PREFIX}timestamp {ts}"));
        }
        out
    }

    /// Splits provenance comments out of a comment list.
    pub(crate) fn from_comments(comments: &[String]) -> (Option<Provenance>, Vec<String>) {
        let mut prov = Provenance::default();
        let mut found = false;
        let mut rest = Vec::new();
        for c in comments {
            let Some(body) = c.strip_prefix(PROVENANCE_PREFIX) else {
                rest.push(c.clone());
                continue;
            };
            found = true;
            let (key, value) = body.split_once(' ').unwrap_or((body, ""));
            match key {
                "mode" => prov.mode = value.to_string(),
                "views" => prov.views = value.parse().unwrap_or(0),
                "tie_break" => prov.tie_break = value.to_string(),
                "min_votes" => prov.min_votes = value.parse().unwrap_or(1),
                "timestamp" => prov.timestamp = value.parse().ok(),
                _ => {}
            }
        }
        (found.then_some(prov), rest)
    }
}

/// One instance ID per Gaussian; `0` means no votes / background.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub labels: Vec<InstanceId>,
    pub num_instances: InstanceId,
    pub provenance: Provenance,
}

impl LabelAssignment {
    /// Builds an assignment with `num_instances` set to the largest label.
    pub fn new(labels: Vec<InstanceId>, provenance: Provenance) -> Self {
        let num_instances = labels.iter().copied().max().unwrap_or(0);
        LabelAssignment {
            labels,
            num_instances,
            provenance,
        }
    }

    pub fn background(n: usize) -> Self {
        Self::new(vec![0; n], Provenance::default())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn check_against(&self, scene: &GaussianScene) -> Result<()> {
        if self.labels.len() != scene.len() {
            return Err(Error::Contract(format!(
                "label count {} does not match scene size {}",
                self.labels.len(),
                scene.len()
            )));
        }
        Ok(())
    }
}
