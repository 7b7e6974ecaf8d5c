//! Augmentation plans.
//!
//! A plan is a TOML document:
//!
//! ```toml
//! schema_version = 1
//! master_seed = 42
//! include_originals = true
//! composition = "single"
//!
//! [[entry]]
//! stage = "rotate_flip"
//! count = 6
//! transform = "rotate"
//! angle = { uniform = [0.0, 360.0] }
//! ```
//!
//! The plan hash is SHA-256 over the canonical JSON rendering of the parsed
//! plan, so whitespace, comments and key order in the file do not affect it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::affine::FlipAxis;
use crate::error::{Error, Result};
use crate::transform::{Real, TransformSpec, Pick};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 42;

/// How entries combine into outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// Each output applies exactly one entry's transform.
    #[default]
    Single,
    /// Output `(entry i, replicate r)` applies entries `0..=i` in order.
    Chained,
}

/// Which image channels are kept when sources are loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPolicy {
    #[default]
    Rgb,
    Green,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Map<String, Value>", into = "Map<String, Value>")]
pub struct PlanEntry {
    /// Free-form label grouping entries into stages.
    pub stage: Option<String>,
    pub count: u32,
    pub transform: TransformSpec,
}

impl TryFrom<Map<String, Value>> for PlanEntry {
    type Error = String;

    fn try_from(mut map: Map<String, Value>) -> std::result::Result<Self, String> {
        let count = match map.remove("count") {
            None => 1,
            Some(v) => v
                .as_u64()
                .and_then(|c| u32::try_from(c).ok())
                .ok_or_else(|| format!("count must be a positive integer, got {v}"))?,
        };
        let stage = match map.remove("stage") {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(v) => return Err(format!("stage must be a string, got {v}")),
        };
        let transform = serde_json::from_value(Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(PlanEntry {
            stage,
            count,
            transform,
        })
    }
}

impl From<PlanEntry> for Map<String, Value> {
    fn from(e: PlanEntry) -> Self {
        let mut map = Map::new();
        if let Some(stage) = e.stage {
            map.insert("stage".into(), Value::String(stage));
        }
        map.insert("count".into(), Value::from(e.count));
        if let Ok(Value::Object(t)) = serde_json::to_value(&e.transform) {
            map.extend(t);
        }
        map
    }
}

impl PlanEntry {
    pub fn new(stage: &str, count: u32, transform: TransformSpec) -> Self {
        Self {
            stage: Some(stage.to_string()),
            count,
            transform,
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationPlan {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_true")]
    pub include_originals: bool,
    #[serde(default)]
    pub composition: Composition,
    #[serde(default)]
    pub channels: ChannelPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, rename = "entry")]
    pub entries: Vec<PlanEntry>,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: DEFAULT_SEED,
            include_originals: true,
            composition: Composition::Single,
            channels: ChannelPolicy::Rgb,
            description: None,
            entries: Vec::new(),
        }
    }
}

impl AugmentationPlan {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Plan(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Plan(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.count < 1 {
                return Err(Error::Plan(format!("entry {i}: count must be >= 1")));
            }
            e.transform
                .validate()
                .map_err(|err| Error::Plan(format!("entry {i} ({}): {err}", e.transform.name())))?;
        }
        Ok(())
    }

    /// Canonical JSON rendering used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }

    /// Hex SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn replicates_per_source(&self) -> usize {
        self.entries.iter().map(|e| e.count as usize).sum()
    }

    /// Outputs per source: originals plus one per (entry, replicate).
    pub fn outputs_per_source(&self) -> usize {
        usize::from(self.include_originals) + self.replicates_per_source()
    }

    pub fn output_count(&self, sources: usize) -> usize {
        sources * self.outputs_per_source()
    }
}

/// Stage labels of [`default_plan`], in order.
pub const DEFAULT_STAGES: [&str; 5] = ["rotate_flip", "shift_zoom_crop", "noise_elastic", "gamma", "remainder"];

/// The staged plan: rotations and flips first, then shifts, zoom-outs and
/// crops, then noise and elastic warps, then gamma, then the remaining
/// transforms. All 16 transforms appear; 63 outputs per source plus the
/// original. Parameter values are engineering defaults.
pub fn default_plan() -> AugmentationPlan {
    let d = |name: &str| TransformSpec::with_defaults(name).expect("known transform");
    let [s1, s2, s3, s4, s5] = DEFAULT_STAGES;
    let quarter = |angle: f64| TransformSpec::Rotate {
        angle: Real::Fixed(angle),
    };
    let entries = vec![
        PlanEntry::new(s1, 6, d("rotate")),
        PlanEntry::new(s1, 1, quarter(90.0)),
        PlanEntry::new(s1, 1, quarter(180.0)),
        PlanEntry::new(s1, 1, quarter(270.0)),
        PlanEntry::new(
            s1,
            3,
            TransformSpec::Flip {
                axis: Pick::Choice {
                    choice: vec![FlipAxis::Horizontal, FlipAxis::Vertical, FlipAxis::Both],
                },
            },
        ),
        PlanEntry::new(s2, 5, d("shift")),
        PlanEntry::new(s2, 4, d("zoom_out")),
        PlanEntry::new(s2, 5, d("crop")),
        PlanEntry::new(s3, 6, d("noise")),
        PlanEntry::new(s3, 6, d("elastic")),
        PlanEntry::new(s4, 6, d("gamma")),
        PlanEntry::new(s5, 3, d("blur")),
        PlanEntry::new(s5, 3, d("dropout")),
        PlanEntry::new(s5, 1, d("equalize")),
        PlanEntry::new(s5, 3, d("grid")),
        PlanEntry::new(s5, 2, d("optical")),
        PlanEntry::new(s5, 3, d("shear")),
        PlanEntry::new(s5, 2, d("sharpen")),
        PlanEntry::new(s5, 2, d("contrast")),
    ];
    AugmentationPlan {
        description: Some(
            "staged default: rotate/flip, shift/zoom/crop, noise/elastic, gamma, remainder; \
             parameter values are engineering defaults"
                .into(),
        ),
        entries,
        ..AugmentationPlan::default()
    }
}
