//! Dynamic-resolution planning for single images.
//!
//! Shows how source resolutions of wildly different sizes and aspect ratios
//! are snapped to 16×16-patch grids inside a patch budget, and what each
//! plan costs in language-model tokens after 2×2 pixel-shuffle grouping.
//!
//! Run with: `cargo run --example plan_image`

use omnitok::video::TokenOverheadModel;
use omnitok::vision::{plan_image_resolution, image_llm_tokens, PatchBudget};

fn main() -> omnitok::Result<()> {
    let overhead = TokenOverheadModel::default();

    println!("Default budget ({} – {} patches):", PatchBudget::DEFAULT_MIN, PatchBudget::DEFAULT_MAX);
    println!();
    println!("{:>12}  {:>11}  {:>9}  {:>8}  {:>8}", "source", "target", "grid", "patches", "tokens");
    for (w, h) in [
        (512, 512),     // already grid-aligned, lands exactly on the floor
        (1920, 1080),   // HD frame, fits untouched
        (4032, 3024),   // phone photo, shrunk to the budget ceiling
        (100, 4000),    // extreme aspect ratio, grown to the floor
        (20, 20),       // tiny icon, grown hard
    ] {
        let plan = plan_image_resolution(w, h, PatchBudget::default())?;
        let total = image_llm_tokens(&plan, &overhead);
        println!(
            "{:>12}  {:>11}  {:>9}  {:>8}  {:>8}",
            format!("{w}x{h}"),
            format!("{}x{}", plan.target_width, plan.target_height),
            format!("{}x{}", plan.grid_w, plan.grid_h),
            plan.vit_tokens,
            total,
        );
    }

    // Video frames reuse the same planner with a small per-frame cap.
    println!();
    println!("Same 4032x3024 photo under tightening caps:");
    for max in [13312, 1024, 512, 256] {
        let plan = plan_image_resolution(4032, 3024, PatchBudget::new(4, max)?)?;
        println!(
            "  cap {:>5} -> {:>9} grid, {:>5} patches, {:>4} LLM tokens",
            max,
            format!("{}x{}", plan.grid_w, plan.grid_h),
            plan.vit_tokens,
            plan.llm_tokens,
        );
    }

    Ok(())
}
