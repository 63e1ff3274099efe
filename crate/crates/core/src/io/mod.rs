//! File formats: labeled 3DGS PLY scenes, 16-bit mask rasters and camera JSON.

pub mod cameras;
pub mod masks;
pub mod ply;

use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{GaussianScene, LabelAssignment, Provenance};

pub use cameras::{load_cameras, parse_cameras, save_cameras, ViewSet};
pub use masks::{decode_pgm, encode_pgm, load_mask, save_mask};

pub const INSTANCE_ID_PROPERTY: &str = "instance_id";

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a 3DGS PLY scene; an `instance_id` column, if present, is ignored.
pub fn load_scene(path: impl AsRef<Path>) -> Result<GaussianScene> {
    Ok(load_labeled_scene(path)?.0)
}

/// Loads a scene together with its `instance_id` labels, when present.
pub fn load_labeled_scene(path: impl AsRef<Path>) -> Result<(GaussianScene, Option<LabelAssignment>)> {
    decode_labeled_scene(&read_file(path.as_ref())?)
}

pub fn decode_labeled_scene(bytes: &[u8]) -> Result<(GaussianScene, Option<LabelAssignment>)> {
    let mut table = ply::VertexTable::from_bytes(bytes)?;
    let (prov, comments) = Provenance::from_comments(&table.comments);
    table.comments = comments;

    let labels = if table.has(INSTANCE_ID_PROPERTY) {
        let raw = table.column(INSTANCE_ID_PROPERTY)?;
        let mut labels = Vec::with_capacity(raw.len());
        for (i, v) in raw.into_iter().enumerate() {
            if !(0.0..=u16::MAX as f64).contains(&v) || v.fract() != 0.0 {
                return Err(Error::Data(format!(
                    "instance_id {v} of primitive {i} is not a valid 16-bit ID"
                )));
            }
            labels.push(v as u16);
        }
        table = table.without(INSTANCE_ID_PROPERTY);
        Some(LabelAssignment::new(labels, prov.unwrap_or_default()))
    } else {
        None
    };
    Ok((GaussianScene::from_table(table)?, labels))
}

/// PLY bytes of `scene` with labels appended as `property uint instance_id`.
pub fn encode_labeled_scene(assignment: &LabelAssignment, scene: &GaussianScene) -> Result<Vec<u8>> {
    assignment.check_against(scene)?;
    let mut table = scene.table().clone();
    table.comments.extend(assignment.provenance.to_comments());
    let ids: Vec<u32> = assignment.labels.iter().map(|&l| l as u32).collect();
    table.to_bytes(Some((INSTANCE_ID_PROPERTY, &ids)))
}

pub fn save_labels(assignment: &LabelAssignment, scene: &GaussianScene, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_labeled_scene(assignment, scene)?)
}

/// Writes the scene without labels.
pub fn save_scene(scene: &GaussianScene, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &scene.table().to_bytes(None)?)
}

/// Plain-text sidecar: one ID per line, in primitive order.
pub fn save_labels_txt(assignment: &LabelAssignment, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::with_capacity(assignment.len() * 3);
    for l in &assignment.labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    write_file(path.as_ref(), s.as_bytes())
}

pub fn load_labels_txt(path: impl AsRef<Path>) -> Result<Vec<u16>> {
    let text =
        String::from_utf8(read_file(path.as_ref())?).map_err(|_| Error::Format("label sidecar is not UTF-8".into()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {}: `{l}` is not a 16-bit ID", i + 1)))
        })
        .collect()
}
