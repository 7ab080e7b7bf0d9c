//! Audio tokenization arithmetic: mel frames, tokens, 30-second clips.
//!
//! Shows the fixed frames-to-tokens pipeline on a few durations and how
//! longer streams are cut into clips for the encoder.
//!
//! Run with: `cargo run --example audio_clips`

use omnitok::audio::segment_clips;

fn main() -> omnitok::Result<()> {
    println!("{:>10}  {:>6}  {:>7}  {:>9}  {:>8}", "duration", "clips", "tokens", "tokens/s", "short?");
    for seconds in [0.4, 5.0, 29.9, 30.0, 95.0, 3600.0] {
        let plan = segment_clips(seconds)?;
        println!(
            "{:>9}s  {:>6}  {:>7}  {:>9.3}  {:>8}",
            seconds,
            plan.clips.len(),
            plan.total_tokens,
            plan.total_tokens as f64 / seconds,
            if plan.below_expected_minimum { "yes" } else { "" },
        );
    }

    // One encoder pass covers 30 s: 3000 mel frames, 8 frames per token.
    let half_minute = segment_clips(30.0)?;
    assert_eq!(half_minute.total_tokens, 375);

    // A 95 s stream: three full clips plus a 5 s remainder, each tokenized
    // on its own actual length (no padding charged).
    println!();
    println!("95 s stream clip by clip:");
    let plan = segment_clips(95.0)?;
    for clip in &plan.clips {
        println!(
            "  [{:>5.1}s .. {:>5.1}s]  {:>4} mel frames  {:>3} tokens",
            clip.start_s,
            clip.start_s + clip.duration_s,
            clip.mel_frames,
            clip.tokens,
        );
    }

    // The long-form rate settles at 12.5 tokens/s, so an hour of audio
    // costs 45,000 tokens before any interleaving overhead.
    let hour = segment_clips(3600.0)?;
    println!();
    println!(
        "One hour = {} tokens ({} tokens/s)",
        hour.total_tokens,
        hour.total_tokens as f64 / 3600.0
    );

    Ok(())
}
