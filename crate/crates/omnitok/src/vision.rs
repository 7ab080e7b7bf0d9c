//! Dynamic-resolution planning for single images.
//!
//! An image is carved into 16×16 pixel patches for the vision encoder, then a
//! 2×2 pixel-shuffle groups every four patches into one LLM token. The
//! planner picks target dimensions that preserve the native aspect ratio
//! while keeping the patch count inside a [`PatchBudget`], with both grid
//! dimensions forced even so the 2×2 grouping stays integral (target
//! dimensions are therefore multiples of 32).
//!
//! The whole plan is a closed-form deterministic rule — no search, no
//! randomness — so identical inputs give identical plans on every platform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::TokenOverheadModel;

/// Edge length of one vision-encoder patch, in pixels.
pub const PATCH_EDGE: u64 = 16;

/// ViT patches folded into one LLM token by the 2×2 pixel shuffle.
pub const TOKENS_PER_SHUFFLE_GROUP: u64 = 4;

/// Inclusive bounds on the ViT patch count for one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchBudget {
    pub min_patches: u64,
    pub max_patches: u64,
}

impl PatchBudget {
    pub const DEFAULT_MIN: u64 = 1024;
    pub const DEFAULT_MAX: u64 = 13312;

    /// Largest supported `max_patches`. Keeps every grid product comfortably
    /// inside u64 and bounds the budget-walk loops; 2^24 patches is a
    /// 65k×65k-pixel image, far past any real input.
    pub const SUPPORTED_MAX: u64 = 1 << 24;

    pub fn new(min_patches: u64, max_patches: u64) -> Result<Self> {
        if min_patches == 0 || min_patches > max_patches {
            return Err(Error::invalid(format!(
                "patch budget requires 0 < min ≤ max, got [{min_patches}, {max_patches}]"
            )));
        }
        if max_patches > Self::SUPPORTED_MAX {
            return Err(Error::invalid(format!(
                "max_patches {max_patches} above supported limit {}",
                Self::SUPPORTED_MAX
            )));
        }
        Ok(PatchBudget {
            min_patches,
            max_patches,
        })
    }
}

impl Default for PatchBudget {
    fn default() -> Self {
        PatchBudget {
            min_patches: Self::DEFAULT_MIN,
            max_patches: Self::DEFAULT_MAX,
        }
    }
}

/// Resize decision for one image or frame: target pixel dimensions, the
/// patch grid they induce, and the resulting token counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResolutionPlan {
    pub source_width: u64,
    pub source_height: u64,
    pub target_width: u64,
    pub target_height: u64,
    pub grid_w: u64,
    pub grid_h: u64,
    /// `grid_w · grid_h`, the pre-shuffle patch count.
    pub vit_tokens: u64,
    /// `vit_tokens / 4`, the post-shuffle count the LLM actually ingests.
    pub llm_tokens: u64,
}

/// Nearest even integer to `x`, ties resolved downward, floor of 2.
///
/// Ties-down matters: a native grid of 115 (a 1840-pixel edge) must become
/// 114, keeping a square 114×114 plan inside the default budget instead of
/// overshooting to 116×116 and losing the square aspect to the shrink walk.
fn nearest_even_dim(x: f64) -> u64 {
    let half = (x / 2.0 - 0.5).ceil();
    if half < 1.0 {
        2
    } else {
        2 * (half as u64)
    }
}

/// Plan target dimensions and token counts for one image.
///
/// The rule: scale the native patch grid `(w/16, h/16)` uniformly so its
/// product hits `clamp(native, min, max)`, round each dimension to the
/// nearest even integer (minimum 2), then walk even steps — shrinking the
/// larger dimension while over budget (ties shrink `grid_w`), growing
/// whichever dimension distorts the aspect ratio least while under budget
/// (ties grow `grid_h`).
pub fn plan_image_resolution(
    width: u64,
    height: u64,
    budget: PatchBudget,
) -> Result<ResolutionPlan> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be ≥ 1, got {width}x{height}"
        )));
    }
    // Re-validate: PatchBudget is a plain struct, so literals can bypass new().
    let budget = PatchBudget::new(budget.min_patches, budget.max_patches)?;
    if budget.max_patches < 4 {
        // A grid can never go below 2×2.
        return Err(Error::BudgetInfeasible {
            min_patches: budget.min_patches,
            max_patches: budget.max_patches,
        });
    }

    let gw0 = width as f64 / PATCH_EDGE as f64;
    let gh0 = height as f64 / PATCH_EDGE as f64;
    let native = gw0 * gh0;
    let target = native.clamp(budget.min_patches as f64, budget.max_patches as f64);
    let scale = (target / native).sqrt();

    let mut grid_w = nearest_even_dim(gw0 * scale);
    let mut grid_h = nearest_even_dim(gh0 * scale);

    while grid_w * grid_h > budget.max_patches {
        if grid_w >= grid_h {
            grid_w -= 2;
        } else {
            grid_h -= 2;
        }
        debug_assert!(grid_w >= 2 && grid_h >= 2);
    }

    let aspect = height as f64 / width as f64;
    let distortion = |gw: u64, gh: u64| (gw as f64 / gh as f64 * aspect).ln().abs();
    while grid_w * grid_h < budget.min_patches {
        if distortion(grid_w + 2, grid_h) < distortion(grid_w, grid_h + 2) {
            grid_w += 2;
        } else {
            grid_h += 2;
        }
    }

    // The grow walk can overshoot a band narrower than one even step; such a
    // budget has no reachable plan.
    if grid_w * grid_h > budget.max_patches {
        return Err(Error::BudgetInfeasible {
            min_patches: budget.min_patches,
            max_patches: budget.max_patches,
        });
    }

    let vit_tokens = grid_w * grid_h;
    Ok(ResolutionPlan {
        source_width: width,
        source_height: height,
        target_width: grid_w * PATCH_EDGE,
        target_height: grid_h * PATCH_EDGE,
        grid_w,
        grid_h,
        vit_tokens,
        llm_tokens: vit_tokens / TOKENS_PER_SHUFFLE_GROUP,
    })
}

/// LLM tokens for one image including its fixed wrapper overhead.
pub fn image_llm_tokens(plan: &ResolutionPlan, overhead: &TokenOverheadModel) -> u64 {
    plan.llm_tokens + overhead.per_image_fixed
}
