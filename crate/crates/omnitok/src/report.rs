//! Machine-readable reports emitted by the command-line front end.
//!
//! Every report is a plain struct serialized as pretty JSON with a trailing
//! newline. Field order follows struct declaration order and floats print
//! in their shortest round-trip form, so identical inputs produce identical
//! bytes on every platform — reports are safe to diff and to golden-test.
//! The mandatory `schema` field versions the layout.

use serde::Serialize;

use crate::audio::AudioClipPlan;
use crate::budget::{BudgetConfig, ReplayOutcome};
use crate::footprint::{CacheConfig, FootprintSummary, ParamGroup};
use crate::pack::{PackedBin, UtilizationStats};
use crate::sequence::{FitReport, MediaItem, WindowSpan};
use crate::video::{FrameSamplingPlan, VideoTokenBudget};
use crate::vision::ResolutionPlan;

/// Version stamp carried by every report.
pub const REPORT_SCHEMA: u32 = 1;

/// Render a report as its canonical byte form.
pub fn render<T: Serialize>(report: &T) -> String {
    let mut out =
        serde_json::to_string_pretty(report).expect("report serialization is infallible");
    out.push('\n');
    out
}

#[derive(Debug, Serialize)]
pub struct PlanImageReport {
    pub schema: u32,
    pub command: &'static str,
    pub plan: ResolutionPlan,
    pub image_overhead_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Serialize)]
pub struct PlanVideoReport {
    pub schema: u32,
    pub command: &'static str,
    /// Present when frames were sampled from `--duration`/`--fps`.
    pub sampling: Option<FrameSamplingPlan>,
    pub frame_plan: ResolutionPlan,
    pub budget: VideoTokenBudget,
    pub evs_q: Option<f64>,
    pub retained_visual_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Serialize)]
pub struct PlanAudioReport {
    pub schema: u32,
    pub command: &'static str,
    pub plan: AudioClipPlan,
    pub tokens_per_second: f64,
}

#[derive(Debug, Serialize)]
pub struct SequenceReport {
    pub schema: u32,
    pub command: &'static str,
    pub stage: String,
    pub items: Vec<MediaItem>,
    pub spans: Vec<WindowSpan>,
    pub overhead_tokens: u64,
    pub total_tokens: u64,
    pub fit: FitReport,
}

#[derive(Debug, Serialize)]
pub struct PackReport {
    pub schema: u32,
    pub command: &'static str,
    pub capacity: u64,
    pub buffer_size: usize,
    pub sequence_count: usize,
    pub utilization: f64,
    pub stats: UtilizationStats,
    pub bins: Vec<PackedBin>,
}

#[derive(Debug, Serialize)]
pub struct EvsPruneReport {
    pub schema: u32,
    pub command: &'static str,
    /// Where the tensor came from: a file path or `synthetic(seed=N)`.
    pub source: String,
    pub tubelets: u32,
    pub spatial: u32,
    pub dim: u32,
    pub evs_q: f64,
    pub total_tokens: u64,
    pub retained_tokens: u64,
    pub dropped_tokens: u64,
    pub mask_file: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct BudgetReplayReport {
    pub schema: u32,
    pub command: &'static str,
    pub config: BudgetConfig,
    pub outcome: ReplayOutcome,
}

#[derive(Debug, Serialize)]
pub struct CacheReport {
    pub config: CacheConfig,
    pub context_tokens: u64,
    pub concurrency: u64,
    pub bytes: u64,
    pub gigabytes: f64,
}

#[derive(Debug, Serialize)]
pub struct FootprintReport {
    pub schema: u32,
    pub command: &'static str,
    pub recipe: String,
    pub total_params: u64,
    pub whole_model: FootprintSummary,
    pub decoder_only: FootprintSummary,
    pub groups: Vec<ParamGroup>,
    pub cache: CacheReport,
}
