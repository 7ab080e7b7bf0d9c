//! Deterministic token accounting for an omni-modal LLM serving pipeline.
//!
//! Everything in this crate is integer-or-IEEE-exact arithmetic over plans,
//! budgets, and masks — no tensors, no inference. The goal is that two runs on
//! two machines produce byte-identical answers, so token budgets can be
//! planned, replayed, and diffed offline.
//!
//! The pipeline stages map onto modules:
//!
//! * [`vision`] — dynamic-resolution planning for single images (16×16 patch
//!   grids, even-dimension pixel-shuffle grouping, patch budgets).
//! * [`video`] — frame sampling, per-frame patch budgets, Conv3D tubelet
//!   fusion accounting, and whole-video token budgets.
//! * [`evs`] — dissimilarity-based video token pruning: per-position cosine
//!   dissimilarity maps, budgeted top-k retention masks, and the `.evst` /
//!   `.evsm` interchange formats.
//! * [`audio`] — mel-frame and token arithmetic for streaming audio clips.
//! * [`sequence`] — temporal interleaving of media items into 30-second
//!   windows and context-limit checks per training stage.
//! * [`pack`] — buffered balanced-knapsack sequence packing.
//! * [`budget`] — streaming reasoning-budget enforcement (think-block budget,
//!   grace period, hard sequence cap).
//! * [`footprint`] — mixed-precision weight and cache memory arithmetic.
//!
//! Each capability has a runnable demo under `examples/`:
//!
//! ```text
//! cargo run --example plan_image
//! cargo run --example video_budget
//! cargo run --example evs_pruning
//! cargo run --example audio_clips
//! cargo run --example sequence_interleave
//! cargo run --example pack_bins
//! cargo run --example budget_control
//! cargo run --example footprint_report
//! ```
//!
//! The same operations are exposed as the `omnitok` binary (one subcommand
//! per stage) for shell pipelines; see [`cli`].

pub mod audio;
pub mod budget;
pub mod cli;
pub mod error;
pub mod evs;
pub mod footprint;
pub mod manifest;
pub mod pack;
pub mod report;
pub mod sequence;
pub mod vision;
pub mod video;

mod numeric;

pub use error::{Error, Result};
