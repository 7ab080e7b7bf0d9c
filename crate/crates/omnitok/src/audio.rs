//! Audio clip segmentation and token arithmetic.
//!
//! The audio front end computes log-mel features on a 10 ms hop (100 frames
//! per second) and then subsamples 8× in time, which works out to ~12.5
//! tokens per second of audio. Long streams are cut into 30-second clips;
//! the final clip keeps the remainder unpadded. Both conversions round up so
//! even the shortest legal input produces at least one token.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{snap_ceil, snap_floor};

/// Mel-spectrogram frames per second (10 ms hop).
pub const MEL_FRAMES_PER_SECOND: f64 = 100.0;

/// Temporal subsampling factor between mel frames and encoder tokens.
pub const FRAMES_PER_TOKEN: u64 = 8;

/// Clip length used for long-form segmentation, in seconds.
pub const CLIP_SECONDS: f64 = 30.0;

/// Shortest input the encoder is specified for; shorter inputs still work
/// but are flagged on the plan.
pub const MIN_EXPECTED_DURATION_S: f64 = 0.5;

fn check_duration(duration_s: f64) -> Result<()> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!(
            "audio duration must be positive seconds, got {duration_s}"
        )));
    }
    Ok(())
}

/// Mel frames for a clip: `ceil(duration · 100)`.
pub fn mel_frame_count(duration_s: f64) -> Result<u64> {
    check_duration(duration_s)?;
    Ok(snap_ceil(duration_s * MEL_FRAMES_PER_SECOND))
}

/// Encoder tokens for a clip: `ceil(mel_frames / 8)`.
pub fn audio_token_count(duration_s: f64) -> Result<u64> {
    Ok(mel_frame_count(duration_s)?.div_ceil(FRAMES_PER_TOKEN))
}

/// One segment of a longer stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AudioClip {
    pub start_s: f64,
    pub duration_s: f64,
    pub mel_frames: u64,
    pub tokens: u64,
}

/// Segmentation of one audio stream into 30-second clips.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AudioClipPlan {
    pub total_duration_s: f64,
    /// Set when the input is shorter than [`MIN_EXPECTED_DURATION_S`]; the
    /// plan is still produced.
    pub below_expected_minimum: bool,
    pub clips: Vec<AudioClip>,
    pub total_tokens: u64,
}

/// Split a stream into full 30 s clips plus an unpadded remainder clip.
pub fn segment_clips(duration_s: f64) -> Result<AudioClipPlan> {
    check_duration(duration_s)?;

    let full_clips = snap_floor(duration_s / CLIP_SECONDS);
    let remainder_s = (duration_s - full_clips as f64 * CLIP_SECONDS).max(0.0);
    // Snap drops a remainder that exists only as float residue (e.g. a
    // "90 s" input computed as 89.999999999999986).
    let remainder_s = if remainder_s * MEL_FRAMES_PER_SECOND < 0.5
        && snap_ceil(remainder_s * MEL_FRAMES_PER_SECOND) == 0
    {
        0.0
    } else {
        remainder_s
    };

    let mut clips = Vec::with_capacity(full_clips as usize + 1);
    for i in 0..full_clips {
        clips.push(AudioClip {
            start_s: i as f64 * CLIP_SECONDS,
            duration_s: CLIP_SECONDS,
            mel_frames: mel_frame_count(CLIP_SECONDS)?,
            tokens: audio_token_count(CLIP_SECONDS)?,
        });
    }
    if remainder_s > 0.0 {
        clips.push(AudioClip {
            start_s: full_clips as f64 * CLIP_SECONDS,
            duration_s: remainder_s,
            mel_frames: mel_frame_count(remainder_s)?,
            tokens: audio_token_count(remainder_s)?,
        });
    }

    let total_tokens = clips.iter().map(|c| c.tokens).sum();
    Ok(AudioClipPlan {
        total_duration_s: duration_s,
        below_expected_minimum: duration_s < MIN_EXPECTED_DURATION_S,
        clips,
        total_tokens,
    })
}
