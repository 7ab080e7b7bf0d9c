//! Mixed-precision weight footprint and inference-cache arithmetic.
//!
//! A deployment stores different parameter groups at different precisions:
//! the bulk of a sparse MoE decoder can drop to a block-scaled 4-bit format
//! while embeddings, encoders, and normalization stay at 16 bits. This
//! module computes the resulting storage cost — effective bits per weight
//! (the parameter-weighted mean of per-group bits) and total bytes — plus
//! the per-request cache cost of a hybrid attention/SSM stack.
//!
//! Sizes use decimal units throughout: 1 GB = 1e9 bytes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plain 16-bit brain float.
pub const BITS_BF16: f64 = 16.0;
/// 8-bit float, one byte per weight.
pub const BITS_FP8: f64 = 8.0;
/// Block-scaled 4-bit float: 4 bits per weight plus one 8-bit scale shared
/// by each group of 16 weights (4 + 8/16 = 4.5). The additional per-tensor
/// scale amortizes to nothing at these parameter counts.
pub const BITS_NVFP4: f64 = 4.5;

/// One named parameter group held at a single storage precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub params: u64,
    pub bits_per_weight: f64,
    /// Marks modality encoder weights (vision/audio towers and projectors),
    /// which some bits-per-weight conventions exclude; see [`BpwScope`].
    #[serde(default)]
    pub encoder: bool,
}

/// A validated set of parameter groups describing one model build.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamGroupInventory {
    groups: Vec<ParamGroup>,
}

impl ParamGroupInventory {
    pub fn new(groups: Vec<ParamGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("inventory must contain at least one group"));
        }
        for g in &groups {
            if g.params == 0 {
                return Err(Error::invalid(format!(
                    "group '{}' has zero parameters",
                    g.name
                )));
            }
            if !(g.bits_per_weight.is_finite() && g.bits_per_weight > 0.0) {
                return Err(Error::invalid(format!(
                    "group '{}' has invalid bits per weight {}",
                    g.name, g.bits_per_weight
                )));
            }
        }
        Ok(ParamGroupInventory { groups })
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn total_params(&self) -> u64 {
        self.groups.iter().map(|g| g.params).sum()
    }
}

/// Which parameters the bits-per-weight denominator counts.
///
/// Published bpw figures are ambiguous about encoder weights: a 4-bit
/// decoder figure often ignores the BF16 vision/audio towers even though
/// their bytes still ship. Byte totals always include every group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BpwScope {
    WholeModel,
    /// Exclude groups flagged `encoder` from the bpw numerator and
    /// denominator.
    DecoderOnly,
}

/// Storage cost of an inventory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FootprintSummary {
    /// Parameter-weighted mean bits over the selected scope.
    pub bits_per_weight: f64,
    /// Whole-model storage, regardless of scope.
    pub total_bytes: f64,
    /// `total_bytes / 1e9`.
    pub gigabytes: f64,
    /// Parameters inside the bpw denominator.
    pub scope_params: u64,
    pub total_params: u64,
}

/// Weighted-mean bits per weight and total storage bytes.
///
/// `scope` narrows only the bpw average; bytes always cover the whole
/// inventory. Errors if the scope selects no parameters.
pub fn effective_bpw(inventory: &ParamGroupInventory, scope: BpwScope) -> Result<FootprintSummary> {
    let mut scope_bits = 0.0f64;
    let mut scope_params = 0u64;
    let mut total_bits = 0.0f64;
    for g in &inventory.groups {
        let bits = g.params as f64 * g.bits_per_weight;
        total_bits += bits;
        if scope == BpwScope::WholeModel || !g.encoder {
            scope_bits += bits;
            scope_params += g.params;
        }
    }
    if scope_params == 0 {
        return Err(Error::invalid(
            "bits-per-weight scope selects no parameters",
        ));
    }
    let total_bytes = total_bits / 8.0;
    Ok(FootprintSummary {
        bits_per_weight: scope_bits / scope_params as f64,
        total_bytes,
        gigabytes: total_bytes / 1e9,
        scope_params,
        total_params: inventory.total_params(),
    })
}

/// Quantization recipes for the reference inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightRecipe {
    /// Everything at 16 bits.
    Bf16,
    /// Every decoder linear (attention, SSM projections, all experts) at
    /// 8 bits; embeddings, head, norms, and encoders stay at 16.
    Fp8,
    /// Routed experts at block-scaled 4.5 bits; shared experts, attention
    /// output projection, and SSM projections at 8; the rest at 16.
    Nvfp4,
}

/// Reference 30.75e9-parameter inventory for a hybrid Mamba/attention MoE
/// decoder with vision and audio encoders, under the given recipe.
///
/// The per-group parameter counts are engineering estimates for capacity
/// planning — plausible splits consistent with the model's published total,
/// not measurements of any released checkpoint.
pub fn reference_inventory(recipe: WeightRecipe) -> ParamGroupInventory {
    use WeightRecipe::*;
    // (name, params, encoder, fp8 recipe bits, nvfp4 recipe bits)
    const GROUPS: &[(&str, u64, bool, f64, f64)] = &[
        ("vision_encoder", 660_000_000, true, BITS_BF16, BITS_BF16),
        ("audio_encoder", 600_000_000, true, BITS_BF16, BITS_BF16),
        ("modality_projectors", 90_000_000, true, BITS_BF16, BITS_BF16),
        ("token_embeddings", 350_000_000, false, BITS_BF16, BITS_BF16),
        ("lm_head", 350_000_000, false, BITS_BF16, BITS_BF16),
        ("moe_router", 10_000_000, false, BITS_BF16, BITS_BF16),
        ("norms_and_small", 40_000_000, false, BITS_BF16, BITS_BF16),
        ("attention_qkv", 250_000_000, false, BITS_FP8, BITS_BF16),
        ("attention_o_proj", 100_000_000, false, BITS_FP8, BITS_FP8),
        ("mamba_in_out_proj", 750_000_000, false, BITS_FP8, BITS_FP8),
        ("shared_experts", 350_000_000, false, BITS_FP8, BITS_FP8),
        ("routed_experts", 27_200_000_000, false, BITS_FP8, BITS_NVFP4),
    ];
    let groups = GROUPS
        .iter()
        .map(|&(name, params, encoder, fp8_bits, nvfp4_bits)| ParamGroup {
            name: name.to_string(),
            params,
            bits_per_weight: match recipe {
                Bf16 => BITS_BF16,
                Fp8 => fp8_bits,
                Nvfp4 => nvfp4_bits,
            },
            encoder,
        })
        .collect();
    ParamGroupInventory::new(groups).expect("reference inventory is valid by construction")
}

/// Per-request cache shape of a hybrid attention/SSM decoder.
///
/// Attention layers grow a KV cache linearly with context; SSM layers hold a
/// fixed-size recurrent state per layer regardless of context length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub layers_attention: u64,
    pub layers_ssm: u64,
    /// KV bytes per token per attention layer (both K and V, all heads).
    pub kv_bytes_per_token_per_layer: u64,
    /// Recurrent state bytes per SSM layer.
    pub ssm_state_bytes_per_layer: u64,
    /// Storage precision of KV entries; only 8-bit is supported.
    pub kv_precision_bits: u32,
    /// Storage precision of SSM state; only 32-bit is supported.
    pub ssm_precision_bits: u32,
}

impl CacheConfig {
    pub fn new(
        layers_attention: u64,
        layers_ssm: u64,
        kv_bytes_per_token_per_layer: u64,
        ssm_state_bytes_per_layer: u64,
    ) -> Result<Self> {
        Self::with_precisions(
            layers_attention,
            layers_ssm,
            kv_bytes_per_token_per_layer,
            ssm_state_bytes_per_layer,
            8,
            32,
        )
    }

    pub fn with_precisions(
        layers_attention: u64,
        layers_ssm: u64,
        kv_bytes_per_token_per_layer: u64,
        ssm_state_bytes_per_layer: u64,
        kv_precision_bits: u32,
        ssm_precision_bits: u32,
    ) -> Result<Self> {
        if kv_precision_bits != 8 {
            return Err(Error::invalid(format!(
                "kv cache precision must be 8 bits, got {kv_precision_bits}"
            )));
        }
        if ssm_precision_bits != 32 {
            return Err(Error::invalid(format!(
                "ssm state precision must be 32 bits, got {ssm_precision_bits}"
            )));
        }
        Ok(CacheConfig {
            layers_attention,
            layers_ssm,
            kv_bytes_per_token_per_layer,
            ssm_state_bytes_per_layer,
            kv_precision_bits,
            ssm_precision_bits,
        })
    }
}

/// Total cache bytes for `concurrency` parallel requests at `tokens` context:
/// `concurrency · (tokens · layers_attention · kv_bytes + layers_ssm · ssm_bytes)`.
pub fn cache_bytes(config: &CacheConfig, tokens: u64, concurrency: u64) -> Result<u64> {
    let overflow = || Error::invalid("cache size overflows a 64-bit byte count");
    let kv = tokens
        .checked_mul(config.layers_attention)
        .and_then(|v| v.checked_mul(config.kv_bytes_per_token_per_layer))
        .ok_or_else(overflow)?;
    let ssm = config
        .layers_ssm
        .checked_mul(config.ssm_state_bytes_per_layer)
        .ok_or_else(overflow)?;
    kv.checked_add(ssm)
        .and_then(|per_request| per_request.checked_mul(concurrency))
        .ok_or_else(overflow)
}
