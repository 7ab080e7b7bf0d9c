//! Request manifests: a JSON description of one multimodal input mix plus
//! the pipeline settings to plan it under.
//!
//! A manifest lists media entries (images, videos, audio, text) and global
//! settings (temporal fusion, pruning rate, per-frame patch budget, context
//! stage, overhead model). [`Manifest::media_items`] runs every entry
//! through the planning modules and yields budgeted items ready for
//! timeline construction.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "settings": { "conv3d": true, "evs_q": 0.5, "stage": "256k" },
//!   "entries": [
//!     { "kind": "video", "id": "clip", "width": 512, "height": 512,
//!       "duration_s": 60.0, "fps": 30.0 },
//!     { "kind": "audio", "id": "mic", "duration_s": 60.0 }
//!   ]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio;
use crate::error::{Error, Result};
use crate::evs;
use crate::sequence::{MediaItem, MediaKind, Stage};
use crate::video::{self, TokenOverheadModel, FRAME_PATCH_CHOICES};
use crate::vision::{self, PatchBudget};

pub const MANIFEST_SCHEMA: u32 = 1;

fn default_schema() -> u32 {
    MANIFEST_SCHEMA
}

/// One parsed manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(default)]
    pub settings: PipelineSettings,
    pub entries: Vec<ManifestEntry>,
}

/// Global planning knobs applied to every entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSettings {
    /// Fuse consecutive frame pairs before projection (halves video tokens).
    #[serde(default)]
    pub conv3d: bool,
    /// Video pruning rate in [0, 1); absent means no pruning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evs_q: Option<f64>,
    /// Per-frame patch target for video entries (256 | 512 | 768 | 1024).
    /// Images always plan against the full dynamic budget.
    #[serde(default = "default_patch_budget")]
    pub patch_budget: u64,
    /// Context stage label ("16k" | "48k" | "256k"); sets the frame cap for
    /// video sampling and the default fit check.
    #[serde(default = "default_stage")]
    pub stage: String,
    /// Structural token overhead; all three fields required when present.
    #[serde(default)]
    pub overhead: TokenOverheadModel,
}

fn default_patch_budget() -> u64 {
    1024
}

fn default_stage() -> String {
    "256k".to_string()
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            conv3d: false,
            evs_q: None,
            patch_budget: default_patch_budget(),
            stage: default_stage(),
            overhead: TokenOverheadModel::default(),
        }
    }
}

/// One media entry. The JSON `kind` field selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ManifestEntry {
    Image {
        id: String,
        width: u64,
        height: u64,
    },
    Video {
        id: String,
        width: u64,
        height: u64,
        duration_s: f64,
        fps: f64,
        #[serde(default)]
        start_s: f64,
    },
    Audio {
        id: String,
        duration_s: f64,
        #[serde(default)]
        start_s: f64,
    },
    Text {
        id: String,
        tokens: u64,
    },
}

impl ManifestEntry {
    pub fn id(&self) -> &str {
        match self {
            ManifestEntry::Image { id, .. }
            | ManifestEntry::Video { id, .. }
            | ManifestEntry::Audio { id, .. }
            | ManifestEntry::Text { id, .. } => id,
        }
    }

    pub fn kind(&self) -> MediaKind {
        match self {
            ManifestEntry::Image { .. } => MediaKind::Image,
            ManifestEntry::Video { .. } => MediaKind::Video,
            ManifestEntry::Audio { .. } => MediaKind::Audio,
            ManifestEntry::Text { .. } => MediaKind::Text,
        }
    }
}

fn field_err(path: String, problem: String) -> Error {
    Error::Manifest(format!("{path}: {problem}"))
}

impl Manifest {
    /// Check ranges and cross-entry rules; parsing alone does not validate.
    pub fn validate(&self) -> Result<()> {
        if self.schema != MANIFEST_SCHEMA {
            return Err(field_err(
                "schema".into(),
                format!("unsupported version {}, expected {MANIFEST_SCHEMA}", self.schema),
            ));
        }
        if let Some(q) = self.settings.evs_q {
            if !(q.is_finite() && (0.0..1.0).contains(&q)) {
                return Err(field_err(
                    "settings.evs_q".into(),
                    format!("must be within [0, 1), got {q}"),
                ));
            }
        }
        if !FRAME_PATCH_CHOICES.contains(&self.settings.patch_budget) {
            return Err(field_err(
                "settings.patch_budget".into(),
                format!(
                    "must be one of {FRAME_PATCH_CHOICES:?}, got {}",
                    self.settings.patch_budget
                ),
            ));
        }
        Stage::parse(&self.settings.stage)
            .map_err(|_| field_err("settings.stage".into(), format!("unknown stage '{}'", self.settings.stage)))?;

        let mut seen_ids = std::collections::HashSet::new();
        for (i, entry) in self.entries.iter().enumerate() {
            let at = |field: &str| format!("entries[{i}].{field}");
            if entry.id().is_empty() {
                return Err(field_err(at("id"), "must not be empty".into()));
            }
            if !seen_ids.insert(entry.id().to_string()) {
                return Err(field_err(
                    at("id"),
                    format!("duplicate id '{}'", entry.id()),
                ));
            }
            let check_dim = |field: &str, v: u64| {
                if v == 0 {
                    Err(field_err(at(field), "must be at least 1 pixel".into()))
                } else {
                    Ok(())
                }
            };
            let check_pos = |field: &str, v: f64| {
                if v.is_finite() && v > 0.0 {
                    Ok(())
                } else {
                    Err(field_err(at(field), format!("must be positive and finite, got {v}")))
                }
            };
            let check_start = |field: &str, v: f64| {
                if v.is_finite() && v >= 0.0 {
                    Ok(())
                } else {
                    Err(field_err(at(field), format!("must be ≥ 0 and finite, got {v}")))
                }
            };
            match entry {
                ManifestEntry::Image { width, height, .. } => {
                    check_dim("width", *width)?;
                    check_dim("height", *height)?;
                }
                ManifestEntry::Video {
                    width,
                    height,
                    duration_s,
                    fps,
                    start_s,
                    ..
                } => {
                    check_dim("width", *width)?;
                    check_dim("height", *height)?;
                    check_pos("duration_s", *duration_s)?;
                    check_pos("fps", *fps)?;
                    check_start("start_s", *start_s)?;
                }
                ManifestEntry::Audio {
                    duration_s, start_s, ..
                } => {
                    check_pos("duration_s", *duration_s)?;
                    check_start("start_s", *start_s)?;
                }
                ManifestEntry::Text { .. } => {}
            }
        }
        Ok(())
    }

    /// The validated stage named by the settings.
    pub fn stage(&self) -> Result<Stage> {
        Stage::parse(&self.settings.stage)
    }

    /// Plan every entry into a budgeted [`MediaItem`], in manifest order.
    ///
    /// Item budgets cover the content plus its per-item overhead; the single
    /// per-sequence overhead is added later by interleaving.
    pub fn media_items(&self) -> Result<Vec<MediaItem>> {
        self.validate()?;
        let settings = &self.settings;
        let overhead = &settings.overhead;
        let stage = self.stage()?;
        let mut items = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let item = match entry {
                ManifestEntry::Image { id, width, height } => {
                    let plan =
                        vision::plan_image_resolution(*width, *height, PatchBudget::default())?;
                    MediaItem {
                        id: id.clone(),
                        kind: MediaKind::Image,
                        start_s: 0.0,
                        duration_s: 0.0,
                        token_budget: vision::image_llm_tokens(&plan, overhead),
                    }
                }
                ManifestEntry::Video {
                    id,
                    width,
                    height,
                    duration_s,
                    fps,
                    start_s,
                } => {
                    let sampling = video::sample_frames(*duration_s, *fps, stage.max_frames())?;
                    let frame_plan =
                        video::plan_frame_resolution(*width, *height, settings.patch_budget)?;
                    let budget = video::video_token_budget(
                        sampling.frame_count(),
                        frame_plan.vit_tokens,
                        settings.conv3d,
                        overhead,
                    )?;
                    let visual = match settings.evs_q {
                        Some(q) => evs::retained_visual_tokens(&budget, q)?,
                        None => budget.visual_tokens,
                    };
                    // Per-item cost excludes the once-per-sequence wrapper.
                    let per_item_overhead = budget.overhead_tokens - overhead.per_sequence_fixed;
                    MediaItem {
                        id: id.clone(),
                        kind: MediaKind::Video,
                        start_s: *start_s,
                        duration_s: *duration_s,
                        token_budget: visual + per_item_overhead,
                    }
                }
                ManifestEntry::Audio {
                    id,
                    duration_s,
                    start_s,
                } => MediaItem {
                    id: id.clone(),
                    kind: MediaKind::Audio,
                    start_s: *start_s,
                    duration_s: *duration_s,
                    token_budget: audio::segment_clips(*duration_s)?.total_tokens,
                },
                ManifestEntry::Text { id, tokens } => MediaItem {
                    id: id.clone(),
                    kind: MediaKind::Text,
                    start_s: 0.0,
                    duration_s: 0.0,
                    token_budget: *tokens,
                },
            };
            items.push(item);
        }
        Ok(items)
    }

    /// Canonical JSON rendering (pretty, trailing newline).
    pub fn to_json(&self) -> String {
        let mut out =
            serde_json::to_string_pretty(self).expect("manifest serialization is infallible");
        out.push('\n');
        out
    }
}

/// Parse a manifest from JSON text and validate it. Syntax errors carry the
/// line and column from the parser; range errors name the field.
pub fn parse_manifest_str(text: &str) -> Result<Manifest> {
    let manifest: Manifest =
        serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
    manifest.validate()?;
    Ok(manifest)
}

/// Read and parse a manifest file.
pub fn parse_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)?;
    parse_manifest_str(&text)
}
