use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Instance identifier carried by masks and labels; `0` is background.
pub type InstanceId = u16;

pub const BACKGROUND: InstanceId = 0;

/// Row-major raster of instance IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask2D {
    width: usize,
    height: usize,
    ids: Vec<InstanceId>,
}

impl InstanceMask2D {
    pub fn new(width: usize, height: usize) -> Self {
        InstanceMask2D {
            width,
            height,
            ids: vec![BACKGROUND; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, ids: Vec<InstanceId>) -> Result<Self> {
        if ids.len() != width * height {
            return Err(Error::Contract(format!(
                "mask raster has {} values, expected {}x{}",
                ids.len(),
                width,
                height
            )));
        }
        Ok(InstanceMask2D { width, height, ids })
    }

    pub fn from_rows(rows: &[&[InstanceId]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Contract("ragged mask rows".into()));
        }
        Self::from_vec(width, height, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ids(&self) -> &[InstanceId] {
        &self.ids
    }

    pub fn ids_mut(&mut self) -> &mut [InstanceId] {
        &mut self.ids
    }

    pub fn into_vec(self) -> Vec<InstanceId> {
        self.ids
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> InstanceId {
        self.ids[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, id: InstanceId) {
        self.ids[y * self.width + x] = id;
    }

    /// Nonzero IDs present in the raster, ascending.
    pub fn instance_ids(&self) -> BTreeSet<InstanceId> {
        self.ids.iter().copied().filter(|&id| id != BACKGROUND).collect()
    }

    pub fn count(&self, id: InstanceId) -> usize {
        self.ids.iter().filter(|&&v| v == id).count()
    }

    pub fn max_id(&self) -> InstanceId {
        self.ids.iter().copied().max().unwrap_or(BACKGROUND)
    }
}
