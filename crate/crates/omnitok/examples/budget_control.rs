//! Streaming reasoning-budget enforcement.
//!
//! Drives the stream controller event by event through the three ways a
//! generation can end: a model that closes its own think block, one that
//! overruns the reasoning budget and gets a close injected, and one that
//! hits the hard sequence cap. Then replays a text trace end to end.
//!
//! Run with: `cargo run --example budget_control`

use omnitok::budget::{replay_trace, Action, BudgetConfig, StreamEvent, StreamState};

fn drive(label: &str, config: BudgetConfig, events: &[StreamEvent]) -> omnitok::Result<()> {
    let mut state = StreamState::new(config)?;
    let mut injected_at = None;
    let mut stopped_at = None;
    for (i, event) in events.iter().enumerate() {
        match state.on_token(*event)? {
            Action::Pass => {}
            Action::InjectThinkClose => injected_at = Some(i),
            Action::Stop => {
                stopped_at = Some(i);
                break;
            }
        }
    }
    if stopped_at.is_none() {
        state.on_token(StreamEvent::End)?;
    }
    let stats = state.finalize()?;
    println!(
        "  {:<22} reasoning {:>2}/{:<2}  total {:>2}/{:<2}  injected: {}  capped: {}",
        label,
        stats.reasoning_tokens,
        config.reasoning_budget + config.grace,
        stats.total_tokens,
        config.max_sequence,
        match injected_at {
            Some(i) => format!("at event {i}"),
            None => "no".to_string(),
        },
        stats.stopped_at_cap,
    );
    Ok(())
}

fn main() -> omnitok::Result<()> {
    use StreamEvent::{ThinkClose, ThinkOpen, Token};

    // Tiny limits so every transition is visible: 5 reasoning tokens,
    // 2 grace tokens, 20-position cap.
    let config = BudgetConfig::new(5, 2, 20)?;
    println!(
        "Budget {} + grace {}, sequence cap {}:",
        config.reasoning_budget, config.grace, config.max_sequence
    );

    // Well-behaved: closes after 3 reasoning tokens, then answers.
    let polite = [ThinkOpen, Token, Token, Token, ThinkClose, Token, Token];
    drive("self-closing", config, &polite)?;

    // Overrun: never closes. The sixth reasoning token lands in the grace
    // window; the eighth offer exceeds budget+grace and a close is injected
    // in its place, flipping the stream into the answer phase.
    let overrun = [
        ThinkOpen, Token, Token, Token, Token, Token, Token, Token, Token, Token, Token,
    ];
    drive("forced closure", config, &overrun)?;

    // Cap: the wrapper stops emission once the sequence is full, whatever
    // phase the stream is in.
    let chatty: Vec<StreamEvent> = std::iter::once(ThinkOpen)
        .chain(std::iter::repeat(Token).take(4))
        .chain(std::iter::once(ThinkClose))
        .chain(std::iter::repeat(Token).take(40))
        .collect();
    drive("hard cap", config, &chatty)?;

    // The same machine replays recorded traces: one OPEN/CLOSE/TOK/END
    // word per line, as a serving log would dump them.
    let trace = "OPEN\nTOK\nTOK\nTOK\nTOK\nTOK\nTOK\nTOK\nTOK\nTOK\nEND\n";
    let outcome = replay_trace(trace.as_bytes(), config)?;
    println!();
    println!(
        "Replayed trace: {} events consumed, {} ignored, {} forced closure(s), {} reasoning tokens",
        outcome.events_consumed,
        outcome.events_ignored,
        outcome.stats.forced_closures,
        outcome.stats.reasoning_tokens,
    );

    Ok(())
}
