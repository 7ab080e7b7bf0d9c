//! Whole-video token budgets: sampling, fusion, and overhead.
//!
//! Walks one 17-minute clip through frame sampling, then compares the token
//! bill for a 512-frame video with and without Conv3D temporal fusion, and
//! with pruning stacked on top.
//!
//! Run with: `cargo run --example video_budget`

use omnitok::evs::retained_visual_tokens;
use omnitok::sequence::Stage;
use omnitok::video::{plan_frame_resolution, sample_frames, video_token_budget, TokenOverheadModel};

fn main() -> omnitok::Result<()> {
    let overhead = TokenOverheadModel::default();

    // A 17-minute 30 fps clip holds ~30,600 native frames; each stage's
    // frame cap decides how many survive sampling.
    println!("Sampling a 1020 s clip at 30 fps:");
    for stage in Stage::ALL {
        let plan = sample_frames(1020.0, 30.0, stage.max_frames())?;
        println!(
            "  stage {:>4}: cap {:>3} -> {:>3} frames, first at t={:.3}s, last at t={:.3}s",
            stage.label(),
            stage.max_frames(),
            plan.frame_count(),
            plan.timestamps_s.first().unwrap(),
            plan.timestamps_s.last().unwrap(),
        );
    }

    // Each sampled frame is planned like an image, but against a fixed
    // per-frame patch target instead of the full dynamic range.
    let frame = plan_frame_resolution(512, 512, 1024)?;
    println!();
    println!(
        "Frame plan for 512x512 @ 1024-patch target: {}x{} grid, {} patches",
        frame.grid_w, frame.grid_h, frame.vit_tokens
    );

    // The headline comparison: 512 frames, three encoder configurations.
    println!();
    println!("512-frame budget at {} patches/frame:", frame.vit_tokens);
    let plain = video_token_budget(512, frame.vit_tokens, false, &overhead)?;
    let fused = video_token_budget(512, frame.vit_tokens, true, &overhead)?;
    let pruned_visual = retained_visual_tokens(&fused, 0.5)?;

    println!(
        "  {:<26} {:>7} visual + {:>5} overhead = {:>7} total",
        "per-frame encoding", plain.visual_tokens, plain.overhead_tokens, plain.total_tokens
    );
    println!(
        "  {:<26} {:>7} visual + {:>5} overhead = {:>7} total",
        "conv3d fusion (2 frames)", fused.visual_tokens, fused.overhead_tokens, fused.total_tokens
    );
    println!(
        "  {:<26} {:>7} visual + {:>5} overhead = {:>7} total",
        "fusion + pruning (q=0.5)",
        pruned_visual,
        fused.overhead_tokens,
        pruned_visual + fused.overhead_tokens
    );

    // Fusion halves the visual bill exactly on even frame counts; the
    // per-frame overhead is charged on raw frames either way.
    assert_eq!(fused.visual_tokens * 2, plain.visual_tokens);
    assert_eq!(fused.overhead_tokens, plain.overhead_tokens);

    Ok(())
}
