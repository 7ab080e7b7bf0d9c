//! Interleaving a mixed-media scene into one model input sequence.
//!
//! A system prompt, a video, its soundtrack, and a reference image are cut
//! into 30-second windows and emitted in timeline order; every stage's
//! context limit is then checked against the total.
//!
//! Run with: `cargo run --example sequence_interleave`

use omnitok::sequence::{
    build_timeline, check_context, interleave, MediaItem, MediaKind, Stage, WINDOW_SECONDS,
};
use omnitok::video::TokenOverheadModel;

fn item(id: &str, kind: MediaKind, start_s: f64, duration_s: f64, tokens: u64) -> MediaItem {
    MediaItem {
        id: id.to_string(),
        kind,
        start_s,
        duration_s,
        token_budget: tokens,
    }
}

fn main() -> omnitok::Result<()> {
    // Budgets here would normally come from the vision/video/audio planners;
    // the interleaver only cares about placement.
    let items = vec![
        item("system_prompt", MediaKind::Text, 0.0, 0.0, 220),
        item("whiteboard_photo", MediaKind::Image, 0.0, 0.0, 1038),
        item("lecture_video", MediaKind::Video, 0.0, 75.0, 9150),
        item("lecture_audio", MediaKind::Audio, 0.0, 75.0, 938),
        item("followup_clip", MediaKind::Video, 60.0, 30.0, 3660),
    ];

    let windows = build_timeline(&items, WINDOW_SECONDS)?;
    println!("Timeline ({} windows):", windows.len());
    for w in &windows {
        if w.index < 0 {
            println!("  [untimed lead-in]");
        } else {
            println!("  [{:>5.0}s .. {:>5.0}s]", w.start_s, w.end_s);
        }
        for span in &w.spans {
            println!("    {:<18} {:>6} tokens", span.id, span.tokens);
        }
    }

    // Largest-remainder apportioning: spans always add back up exactly.
    let layout = interleave(&windows, &TokenOverheadModel::default());
    let span_sum: u64 = layout.spans.iter().map(|s| s.tokens).sum();
    println!();
    println!(
        "Sequence: {} spans, {} media tokens + {} wrapper = {} total",
        layout.spans.len(),
        span_sum,
        layout.overhead_tokens,
        layout.total_tokens
    );

    println!();
    for stage in Stage::ALL {
        let fit = check_context(&layout, stage);
        println!(
            "  stage {:>4} ({:>6}-token context): {}",
            stage.label(),
            fit.context_limit,
            if fit.fits {
                format!("fits with {} to spare", fit.context_limit - fit.total_tokens)
            } else {
                format!("over by {} tokens", fit.excess_tokens)
            }
        );
    }

    Ok(())
}
