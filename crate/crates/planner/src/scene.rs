//! Scene descriptions: axis-aligned boxes plus a voxel resolution.
//!
//! A scene is the serializable source from which a [`VoxelMap`] is built.
//! Three named presets cover the evaluation tasks:
//!
//! - `open`: no obstacles; pure goal tracking.
//! - `narrow_passage`: two walls forming a corridor 0.45 m wide (torso
//!   width 0.35 m plus 0.10 m total clearance) and 3 m long.  The walls are
//!   aligned to the 0.075 m voxel grid so the rasterized gap is exactly the
//!   geometric gap.
//! - `clutter`: three knee-height (0.15 m tall) boxes that the torso clears
//!   but the legs do not, so limb-level collision checking matters.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use psr_core::dataset::atomic_write;

use crate::voxel::VoxelMap;
use crate::{PlannerError, Result};

/// An axis-aligned box given by two opposite corners \[m\].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    /// Minimum corner (x, y, z).
    pub min: [f64; 3],
    /// Maximum corner (x, y, z); must exceed `min` on every axis.
    pub max: [f64; 3],
}

/// A serializable scene: obstacle boxes and the voxel resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Voxel side length \[m\].
    pub resolution: f64,
    /// Obstacle boxes.
    pub boxes: Vec<BoxSpec>,
}

impl SceneSpec {
    /// The named presets accepted by [`SceneSpec::preset`].
    pub const PRESETS: [&'static str; 3] = ["open", "narrow_passage", "clutter"];

    /// Builds one of the named preset scenes.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "open" => Ok(SceneSpec {
                resolution: 0.1,
                boxes: Vec::new(),
            }),
            "narrow_passage" => Ok(SceneSpec {
                resolution: 0.075,
                boxes: vec![
                    // Corridor along +x between x = 1 and x = 4; free gap
                    // y in (-0.225, 0.225).
                    BoxSpec {
                        min: [1.0, 0.225, 0.0],
                        max: [4.0, 0.975, 0.6],
                    },
                    BoxSpec {
                        min: [1.0, -0.975, 0.0],
                        max: [4.0, -0.225, 0.6],
                    },
                ],
            }),
            "clutter" => Ok(SceneSpec {
                resolution: 0.1,
                boxes: vec![
                    BoxSpec {
                        min: [1.3, 0.1, 0.0],
                        max: [1.7, 0.5, 0.15],
                    },
                    BoxSpec {
                        min: [2.4, -0.55, 0.0],
                        max: [2.8, -0.15, 0.15],
                    },
                    BoxSpec {
                        min: [3.4, 0.05, 0.0],
                        max: [3.8, 0.45, 0.15],
                    },
                ],
            }),
            other => Err(PlannerError::UnknownPreset {
                name: other.to_string(),
            }),
        }
    }

    /// Rasterizes the boxes into a voxel map.
    pub fn voxel_map(&self) -> Result<VoxelMap> {
        let mut map = VoxelMap::new(self.resolution)?;
        for b in &self.boxes {
            map.insert_box(Vector3::from(b.min), Vector3::from(b.max))?;
        }
        Ok(map)
    }

    /// Parses a scene from its JSON representation.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PlannerError::MalformedScene(e.to_string()))
    }

    /// Serializes the scene to pretty-printed JSON.
    pub fn to_json(&self) -> String {
        // Serialization of plain floats and arrays cannot fail.
        serde_json::to_string_pretty(self).expect("scene serialization")
    }

    /// Loads a scene from a JSON file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Writes the scene as JSON, atomically (temp file + rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_json().as_bytes())?;
        Ok(())
    }
}
