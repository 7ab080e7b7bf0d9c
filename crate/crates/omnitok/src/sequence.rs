//! Temporal interleaving of media items into one model input sequence.
//!
//! Timed items (video, audio) are cut into 30-second windows anchored at
//! t = 0 — the same boundaries the audio clipper uses — and each item's token
//! budget is apportioned across the windows it overlaps. Untimed items
//! (images, text) come first, in input order. Within a window, video spans
//! precede audio spans so visual context lands before its soundtrack.
//!
//! Window token counts use largest-remainder rounding, so every item's spans
//! sum to exactly its budget no matter how awkward the overlap fractions are.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::TokenOverheadModel;

/// Default interleaving window, chosen to line up with audio clip bounds.
pub const WINDOW_SECONDS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Video,
    Audio,
    Image,
    Text,
}

impl MediaKind {
    /// Only video and audio occupy timeline windows.
    pub fn is_timed(self) -> bool {
        matches!(self, MediaKind::Video | MediaKind::Audio)
    }

    fn window_rank(self) -> u8 {
        match self {
            MediaKind::Video => 0,
            MediaKind::Audio => 1,
            MediaKind::Image => 2,
            MediaKind::Text => 3,
        }
    }
}

/// One media input with its already-computed token budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediaItem {
    pub id: String,
    pub kind: MediaKind,
    /// Timeline position in seconds; ignored for untimed kinds.
    pub start_s: f64,
    /// Zero for images and text.
    pub duration_s: f64,
    pub token_budget: u64,
}

/// A slice of one item's budget landing in one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowSpan {
    pub id: String,
    pub kind: MediaKind,
    /// Window index on the 30 s grid; −1 holds all untimed content.
    pub window: i64,
    pub tokens: u64,
}

/// All spans that land in one window, already in emission order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineWindow {
    pub index: i64,
    pub start_s: f64,
    pub end_s: f64,
    pub spans: Vec<WindowSpan>,
}

/// Apportion `budget` across windows proportionally to `weights`, rounding
/// with the largest-remainder method (remainder ties go to the earlier
/// window). The returned counts sum to exactly `budget`.
fn apportion(budget: u64, weights: &[f64]) -> Vec<u64> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return vec![budget];
    }
    let quotas: Vec<f64> = weights
        .iter()
        .map(|w| budget as f64 * (w / total))
        .collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut leftover = budget - assigned;
    let mut i = 0;
    while leftover > 0 {
        counts[order[i % order.len()]] += 1;
        leftover -= 1;
        i += 1;
    }
    counts
}

/// Cut timed items into consecutive `window_s` windows on the t = 0 grid and
/// split their budgets by temporal overlap. Untimed items land in a single
/// leading window with index −1, kept in input order.
pub fn build_timeline(items: &[MediaItem], window_s: f64) -> Result<Vec<TimelineWindow>> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::invalid(format!(
            "window length must be positive seconds, got {window_s}"
        )));
    }
    for item in items {
        if !(item.start_s.is_finite() && item.start_s >= 0.0) {
            return Err(Error::invalid(format!(
                "item {:?} has invalid start {}",
                item.id, item.start_s
            )));
        }
        if !(item.duration_s.is_finite() && item.duration_s >= 0.0) {
            return Err(Error::invalid(format!(
                "item {:?} has invalid duration {}",
                item.id, item.duration_s
            )));
        }
    }

    let untimed: Vec<WindowSpan> = items
        .iter()
        .filter(|it| !it.kind.is_timed())
        .map(|it| WindowSpan {
            id: it.id.clone(),
            kind: it.kind,
            window: -1,
            tokens: it.token_budget,
        })
        .collect();

    let mut timed: Vec<WindowSpan> = Vec::new();
    for item in items.iter().filter(|it| it.kind.is_timed()) {
        let first = (item.start_s / window_s).floor() as i64;
        let end = item.start_s + item.duration_s;

        let mut windows = Vec::new();
        let mut overlaps = Vec::new();
        let mut k = first;
        loop {
            let lo = k as f64 * window_s;
            let hi = lo + window_s;
            let overlap = (end.min(hi) - item.start_s.max(lo)).max(0.0);
            // Skip slivers that exist only as float residue of the window
            // arithmetic (an item ending exactly on a boundary).
            if overlap > 1e-9 * window_s {
                windows.push(k);
                overlaps.push(overlap);
            }
            k += 1;
            if k as f64 * window_s >= end {
                break;
            }
        }
        if windows.is_empty() {
            // Zero-duration timed item: whole budget at its start window.
            windows.push(first);
            overlaps.push(1.0);
        }

        let counts = apportion(item.token_budget, &overlaps);
        for (k, tokens) in windows.into_iter().zip(counts) {
            if tokens > 0 {
                timed.push(WindowSpan {
                    id: item.id.clone(),
                    kind: item.kind,
                    window: k,
                    tokens,
                });
            }
        }
    }

    timed.sort_by(|a, b| {
        a.window
            .cmp(&b.window)
            .then(a.kind.window_rank().cmp(&b.kind.window_rank()))
            .then(a.id.cmp(&b.id))
    });

    let mut out = Vec::new();
    if !untimed.is_empty() {
        out.push(TimelineWindow {
            index: -1,
            start_s: 0.0,
            end_s: 0.0,
            spans: untimed,
        });
    }
    let mut it = timed.into_iter().peekable();
    while let Some(span) = it.next() {
        let index = span.window;
        let mut spans = vec![span];
        while it.peek().is_some_and(|s| s.window == index) {
            spans.push(it.next().unwrap());
        }
        out.push(TimelineWindow {
            index,
            start_s: index as f64 * window_s,
            end_s: (index + 1) as f64 * window_s,
            spans,
        });
    }
    Ok(out)
}

/// One fully ordered input sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceLayout {
    pub spans: Vec<WindowSpan>,
    /// Fixed per-sequence wrapper tokens, counted once.
    pub overhead_tokens: u64,
    /// Sum of span tokens plus `overhead_tokens`.
    pub total_tokens: u64,
}

/// Flatten windows into the final span order and add sequence overhead.
pub fn interleave(windows: &[TimelineWindow], overhead: &TokenOverheadModel) -> SequenceLayout {
    let spans: Vec<WindowSpan> = windows.iter().flat_map(|w| w.spans.iter().cloned()).collect();
    let span_total: u64 = spans.iter().map(|s| s.tokens).sum();
    SequenceLayout {
        spans,
        overhead_tokens: overhead.per_sequence_fixed,
        total_tokens: span_total + overhead.per_sequence_fixed,
    }
}

/// Training/serving stage, named by its context length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stage {
    Ctx16k,
    Ctx48k,
    Ctx256k,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Ctx16k, Stage::Ctx48k, Stage::Ctx256k];

    pub fn parse(label: &str) -> Result<Stage> {
        match label {
            "16k" => Ok(Stage::Ctx16k),
            "48k" => Ok(Stage::Ctx48k),
            "256k" => Ok(Stage::Ctx256k),
            other => Err(Error::UnknownStage(other.to_string())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::Ctx16k => "16k",
            Stage::Ctx48k => "48k",
            Stage::Ctx256k => "256k",
        }
    }

    pub fn context_limit(self) -> u64 {
        match self {
            Stage::Ctx16k => 16_384,
            Stage::Ctx48k => 49_152,
            Stage::Ctx256k => 262_144,
        }
    }

    /// Frame cap used when deriving video budgets for this stage.
    pub fn max_frames(self) -> u64 {
        match self {
            Stage::Ctx16k => 64,
            Stage::Ctx48k | Stage::Ctx256k => 256,
        }
    }
}

/// Verdict of a layout against one stage's context limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FitReport {
    pub context_limit: u64,
    pub total_tokens: u64,
    pub fits: bool,
    pub excess_tokens: u64,
}

pub fn check_context(layout: &SequenceLayout, stage: Stage) -> FitReport {
    let limit = stage.context_limit();
    FitReport {
        context_limit: limit,
        total_tokens: layout.total_tokens,
        fits: layout.total_tokens <= limit,
        excess_tokens: layout.total_tokens.saturating_sub(limit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::segment_clips;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn item(id: &str, kind: MediaKind, start: f64, duration: f64, budget: u64) -> MediaItem {
        MediaItem {
            id: id.to_string(),
            kind,
            start_s: start,
            duration_s: duration,
            token_budget: budget,
        }
    }

    #[test]
    fn av_pair_interleaves_window_by_window() {
        let video_budget = 300;
        let audio_budget = segment_clips(90.0).unwrap().total_tokens; // 1125
        let items = vec![
            item("clip.mp4", MediaKind::Video, 0.0, 90.0, video_budget),
            item("clip.wav", MediaKind::Audio, 0.0, 90.0, audio_budget),
        ];
        let windows = build_timeline(&items, WINDOW_SECONDS).unwrap();
        assert_eq!(windows.len(), 3);
        for w in &windows {
            assert_eq!(w.spans.len(), 2);
            assert_eq!(w.spans[0].kind, MediaKind::Video);
            assert_eq!(w.spans[1].kind, MediaKind::Audio);
            assert_eq!(w.spans[0].tokens, 100);
            assert_eq!(w.spans[1].tokens, 375);
        }

        let layout = interleave(&windows, &TokenOverheadModel::default());
        let order: Vec<(i64, MediaKind)> =
            layout.spans.iter().map(|s| (s.window, s.kind)).collect();
        assert_eq!(
            order,
            vec![
                (0, MediaKind::Video),
                (0, MediaKind::Audio),
                (1, MediaKind::Video),
                (1, MediaKind::Audio),
                (2, MediaKind::Video),
                (2, MediaKind::Audio),
            ]
        );
        assert_eq!(layout.total_tokens, video_budget + audio_budget + 50);
    }

    #[test]
    fn lone_image_is_a_single_untimed_span() {
        let windows =
            build_timeline(&[item("a.png", MediaKind::Image, 0.0, 0.0, 258)], 30.0).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].index, -1);
        assert_eq!(windows[0].spans[0].tokens, 258);
    }

    #[test]
    fn forty_five_second_audio_splits_375_188() {
        let budget = segment_clips(45.0).unwrap().total_tokens;
        assert_eq!(budget, 563);
        let windows =
            build_timeline(&[item("a.wav", MediaKind::Audio, 0.0, 45.0, budget)], 30.0).unwrap();
        let tokens: Vec<u64> = windows.iter().map(|w| w.spans[0].tokens).collect();
        assert_eq!(tokens, vec![375, 188]);
    }

    #[test]
    fn untimed_spans_precede_timed_in_input_order() {
        let items = vec![
            item("v.mp4", MediaKind::Video, 0.0, 30.0, 100),
            item("b.png", MediaKind::Image, 0.0, 0.0, 258),
            item("note", MediaKind::Text, 0.0, 0.0, 12),
        ];
        let layout = interleave(
            &build_timeline(&items, 30.0).unwrap(),
            &TokenOverheadModel::default(),
        );
        let ids: Vec<&str> = layout.spans.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["b.png", "note", "v.mp4"]);
    }

    #[test]
    fn empty_input_is_overhead_only() {
        let layout = interleave(
            &build_timeline(&[], 30.0).unwrap(),
            &TokenOverheadModel::default(),
        );
        assert!(layout.spans.is_empty());
        assert_eq!(layout.total_tokens, 50);
        let fit = check_context(&layout, Stage::Ctx16k);
        assert!(fit.fits);
    }

    #[test]
    fn stage_limits_are_exact() {
        assert_eq!(Stage::Ctx16k.context_limit(), 16_384);
        assert_eq!(Stage::Ctx48k.context_limit(), 49_152);
        assert_eq!(Stage::Ctx256k.context_limit(), 262_144);
        assert_eq!(Stage::parse("48k").unwrap(), Stage::Ctx48k);
        assert!(matches!(Stage::parse("32k"), Err(Error::UnknownStage(_))));
    }

    #[test]
    fn five_hours_fit_six_hours_overflow() {
        let five = segment_clips(18_000.0).unwrap().total_tokens;
        let six = segment_clips(21_600.0).unwrap().total_tokens;
        assert_eq!((five, six), (225_000, 270_000));

        let zero = TokenOverheadModel {
            per_frame: 0,
            per_image_fixed: 0,
            per_sequence_fixed: 0,
        };
        let fit = |budget: u64| {
            let items = [item("a.wav", MediaKind::Audio, 0.0, 1.0, budget)];
            check_context(
                &interleave(&build_timeline(&items, 30.0).unwrap(), &zero),
                Stage::Ctx256k,
            )
        };
        assert!(fit(five).fits);
        assert_eq!(fit(five).excess_tokens, 0);
        let over = fit(six);
        assert!(!over.fits);
        assert_eq!(over.excess_tokens, 7_856);
    }

    #[test]
    fn items_starting_on_boundaries_stay_in_their_window() {
        let items = [item("v.mp4", MediaKind::Video, 30.0, 30.0, 99)];
        let windows = build_timeline(&items, 30.0).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].index, 1);
        assert_eq!(windows[0].spans[0].tokens, 99);
    }

    #[test]
    fn largest_remainder_prefers_bigger_fractions() {
        // Budget 10 over overlaps 30 s / 15 s: quotas 6.67 / 3.33 → 7 / 3.
        let counts = apportion(10, &[30.0, 15.0]);
        assert_eq!(counts, vec![7, 3]);
        // Equal remainders: the earlier window wins the leftover token.
        let counts = apportion(5, &[30.0, 30.0]);
        assert_eq!(counts, vec![3, 2]);
    }

    #[test]
    fn span_sums_conserve_every_item_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..400 {
            let mut items = Vec::new();
            for i in 0..rng.gen_range(1..12) {
                let kind = match rng.gen_range(0..4) {
                    0 => MediaKind::Video,
                    1 => MediaKind::Audio,
                    2 => MediaKind::Image,
                    _ => MediaKind::Text,
                };
                let timed = kind.is_timed();
                items.push(MediaItem {
                    id: format!("m{i}"),
                    kind,
                    start_s: if timed { rng.gen_range(0.0..300.0) } else { 0.0 },
                    duration_s: if timed { rng.gen_range(0.0..200.0) } else { 0.0 },
                    token_budget: rng.gen_range(0..5000),
                });
            }
            let windows = build_timeline(&items, 30.0).unwrap();
            for item in &items {
                let sum: u64 = windows
                    .iter()
                    .flat_map(|w| &w.spans)
                    .filter(|s| s.id == item.id)
                    .map(|s| s.tokens)
                    .sum();
                assert_eq!(sum, item.token_budget, "item {}", item.id);
            }

            let layout = interleave(&windows, &TokenOverheadModel::default());
            let budget_sum: u64 = items.iter().map(|i| i.token_budget).sum();
            assert_eq!(layout.total_tokens, budget_sum + 50);

            // Determinism: rebuilding yields the identical layout.
            let again = interleave(
                &build_timeline(&items, 30.0).unwrap(),
                &TokenOverheadModel::default(),
            );
            assert_eq!(layout, again);

            // Spans are ordered by window, then kind rank, then id.
            let timed: Vec<_> = layout.spans.iter().filter(|s| s.window >= 0).collect();
            for pair in timed.windows(2) {
                let key = |s: &WindowSpan| (s.window, s.kind.window_rank() as i64);
                assert!(key(pair[0]) <= key(pair[1]));
            }
        }
    }
}
