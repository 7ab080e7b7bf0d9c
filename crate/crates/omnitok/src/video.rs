//! Frame sampling and whole-video token budgets.
//!
//! Videos are budgeted in three steps: pick frame timestamps (up to a cap),
//! plan a per-frame patch count, then account for Conv3D temporal fusion —
//! the patch embedder compresses every two consecutive frames into one
//! tubelet, halving visual tokens. Wrapper overhead (timestamps, separators)
//! is modeled per frame plus per sequence and is deliberately *not* halved by
//! Conv3D: fusion merges patch features, not the per-frame framing text.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::snap_floor;
use crate::vision::{plan_image_resolution, PatchBudget, ResolutionPlan};

/// Per-frame patch targets used by training-time augmentation.
pub const FRAME_PATCH_CHOICES: [u64; 4] = [256, 512, 768, 1024];

/// Non-visual tokens wrapped around media content.
///
/// Defaults are fitted to reproduce observed whole-video totals (a 512-frame
/// budget of ~141k tokens, and its Conv3D/EVS reductions) and should be read
/// as a calibrated model, not ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOverheadModel {
    pub per_frame: u64,
    pub per_image_fixed: u64,
    pub per_sequence_fixed: u64,
}

impl Default for TokenOverheadModel {
    fn default() -> Self {
        TokenOverheadModel {
            per_frame: 19,
            per_image_fixed: 2,
            per_sequence_fixed: 50,
        }
    }
}

/// Frame timestamps chosen for one video.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSamplingPlan {
    pub duration_s: f64,
    pub native_fps: f64,
    pub max_frames: u64,
    pub timestamps_s: Vec<f64>,
}

impl FrameSamplingPlan {
    pub fn frame_count(&self) -> u64 {
        self.timestamps_s.len() as u64
    }
}

/// Choose frame timestamps: every native frame when the video fits under
/// `max_frames`, otherwise `max_frames` bin-center timestamps
/// `(i + 0.5)·duration/max_frames` spread uniformly over the clip.
pub fn sample_frames(duration_s: f64, native_fps: f64, max_frames: u64) -> Result<FrameSamplingPlan> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!(
            "duration must be positive seconds, got {duration_s}"
        )));
    }
    if !(native_fps.is_finite() && native_fps > 0.0) {
        return Err(Error::invalid(format!(
            "native fps must be positive, got {native_fps}"
        )));
    }
    if max_frames == 0 {
        return Err(Error::invalid("max_frames must be ≥ 1".to_string()));
    }

    let native_frames = snap_floor(duration_s * native_fps);
    let timestamps_s = if native_frames <= max_frames {
        (0..native_frames).map(|i| i as f64 / native_fps).collect()
    } else {
        (0..max_frames)
            .map(|i| (i as f64 + 0.5) * duration_s / max_frames as f64)
            .collect()
    };

    Ok(FrameSamplingPlan {
        duration_s,
        native_fps,
        max_frames,
        timestamps_s,
    })
}

/// Plan one frame's resolution against a per-frame patch target from
/// [`FRAME_PATCH_CHOICES`]. The budget floor is the minimal 2×2 grid.
pub fn plan_frame_resolution(width: u64, height: u64, target_patches: u64) -> Result<ResolutionPlan> {
    if !FRAME_PATCH_CHOICES.contains(&target_patches) {
        return Err(Error::invalid(format!(
            "per-frame patch target must be one of {FRAME_PATCH_CHOICES:?}, got {target_patches}"
        )));
    }
    plan_image_resolution(width, height, PatchBudget::new(4, target_patches)?)
}

/// Token budget for one video input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VideoTokenBudget {
    pub frames: u64,
    pub patches_per_frame: u64,
    pub conv3d: bool,
    /// Temporal units after fusion: `ceil(frames/2)` with Conv3D on (an odd
    /// trailing frame still forms its own tubelet), `frames` otherwise.
    pub tubelets: u64,
    pub visual_tokens: u64,
    pub overhead_tokens: u64,
    pub total_tokens: u64,
}

/// Account a whole video: visual tokens are `tubelets · patches_per_frame/4`
/// (the 4 is the pixel-shuffle grouping), overhead is
/// `frames · per_frame + per_sequence_fixed`.
pub fn video_token_budget(
    frames: u64,
    patches_per_frame: u64,
    conv3d: bool,
    overhead: &TokenOverheadModel,
) -> Result<VideoTokenBudget> {
    if frames == 0 {
        return Err(Error::invalid("frame count must be ≥ 1".to_string()));
    }
    if patches_per_frame == 0 || patches_per_frame % 4 != 0 {
        return Err(Error::invalid(format!(
            "patches_per_frame must be a positive multiple of 4, got {patches_per_frame}"
        )));
    }

    let tubelets = if conv3d { frames.div_ceil(2) } else { frames };
    let spatial = patches_per_frame / 4;
    let visual_tokens = tubelets
        .checked_mul(spatial)
        .ok_or_else(|| Error::invalid("visual token count overflows u64".to_string()))?;
    let overhead_tokens = frames
        .checked_mul(overhead.per_frame)
        .and_then(|v| v.checked_add(overhead.per_sequence_fixed))
        .ok_or_else(|| Error::invalid("overhead token count overflows u64".to_string()))?;
    let total_tokens = visual_tokens
        .checked_add(overhead_tokens)
        .ok_or_else(|| Error::invalid("total token count overflows u64".to_string()))?;

    Ok(VideoTokenBudget {
        frames,
        patches_per_frame,
        conv3d,
        tubelets,
        visual_tokens,
        overhead_tokens,
        total_tokens,
    })
}
