//! Streaming reasoning-budget enforcement.
//!
//! Generation is a stream of token events with at most one think block:
//! `ThinkOpen`, reasoning tokens, `ThinkClose`, answer tokens, `End`. The
//! controller watches the stream and enforces two limits:
//!
//! * a **reasoning budget** with a **grace period** — once reasoning tokens
//!   cross the budget, the model gets `grace` more tokens to close the think
//!   block on its own; if it does not, the controller injects the close
//!   itself and the stream continues as answer text;
//! * a hard **sequence cap** — any event that would push the emitted total
//!   past `max_sequence` is refused with [`Action::Stop`].
//!
//! Every structural event (`ThinkOpen`, `ThinkClose`, `Token`) occupies one
//! position in the emitted sequence; `End` emits nothing. One controller
//! instance drives one stream.

use serde::Serialize;

use crate::error::{Error, Result};

/// Limits for one generation stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BudgetConfig {
    pub reasoning_budget: u64,
    pub grace: u64,
    pub max_sequence: u64,
}

impl BudgetConfig {
    pub const DEFAULT_REASONING_BUDGET: u64 = 13_000;
    pub const DEFAULT_GRACE: u64 = 1_024;
    pub const DEFAULT_MAX_SEQUENCE: u64 = 16_384;

    pub fn new(reasoning_budget: u64, grace: u64, max_sequence: u64) -> Result<Self> {
        if reasoning_budget == 0 || grace == 0 || max_sequence == 0 {
            return Err(Error::invalid(
                "reasoning budget, grace, and max sequence must all be positive",
            ));
        }
        let ceiling = reasoning_budget.checked_add(grace).ok_or_else(|| {
            Error::invalid("reasoning budget + grace overflows".to_string())
        })?;
        if ceiling > max_sequence {
            return Err(Error::invalid(format!(
                "reasoning budget {reasoning_budget} + grace {grace} exceeds max sequence {max_sequence}"
            )));
        }
        Ok(BudgetConfig {
            reasoning_budget,
            grace,
            max_sequence,
        })
    }
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            reasoning_budget: Self::DEFAULT_REASONING_BUDGET,
            grace: Self::DEFAULT_GRACE,
            max_sequence: Self::DEFAULT_MAX_SEQUENCE,
        }
    }
}

/// One event offered by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamEvent {
    ThinkOpen,
    ThinkClose,
    Token,
    End,
}

/// Controller verdict for one offered event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Emit the event unchanged.
    Pass,
    /// Grace exhausted: emit a think-close in place of the offered token,
    /// which is discarded. The stream continues in the answer phase.
    InjectThinkClose,
    /// Sequence cap reached: the event is refused and the stream is over.
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    BeforeThink,
    Reasoning,
    Grace,
    Answer,
    Closed,
}

/// Final counters for a finished stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BudgetStats {
    pub reasoning_tokens: u64,
    pub total_tokens: u64,
    pub forced_closures: u64,
    pub stopped_at_cap: bool,
}

/// State machine driving one stream against a [`BudgetConfig`].
#[derive(Debug, Clone)]
pub struct StreamState {
    config: BudgetConfig,
    phase: Phase,
    reasoning_tokens: u64,
    total_tokens: u64,
    forced_closures: u64,
    stopped_at_cap: bool,
    events_seen: usize,
}

impl StreamState {
    pub fn new(config: BudgetConfig) -> Result<Self> {
        // Configs built by hand (public fields) get re-checked here.
        let config = BudgetConfig::new(config.reasoning_budget, config.grace, config.max_sequence)?;
        Ok(StreamState {
            config,
            phase: Phase::BeforeThink,
            reasoning_tokens: 0,
            total_tokens: 0,
            forced_closures: 0,
            stopped_at_cap: false,
            events_seen: 0,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn reasoning_tokens(&self) -> u64 {
        self.reasoning_tokens
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    fn malformed(&self, event_index: usize, detail: impl Into<String>) -> Error {
        Error::MalformedStream {
            event_index,
            detail: detail.into(),
        }
    }

    /// Judge one offered event. The cap is checked before anything else, so
    /// a refused event changes no counters; malformed structure is an error.
    pub fn on_token(&mut self, event: StreamEvent) -> Result<Action> {
        let index = self.events_seen;
        self.events_seen += 1;

        if self.phase == Phase::Closed {
            self.events_seen = index; // not part of the stream
            return Err(self.malformed(index, "event offered after the stream closed"));
        }

        if event == StreamEvent::End {
            self.phase = Phase::Closed;
            return Ok(Action::Pass);
        }

        // Hard cap first: every remaining event kind occupies one position.
        if self.total_tokens + 1 > self.config.max_sequence {
            self.phase = Phase::Closed;
            self.stopped_at_cap = true;
            return Ok(Action::Stop);
        }

        match (self.phase, event) {
            (Phase::BeforeThink, StreamEvent::ThinkOpen) => {
                self.phase = Phase::Reasoning;
                self.total_tokens += 1;
                Ok(Action::Pass)
            }
            (Phase::BeforeThink, StreamEvent::Token) | (Phase::Answer, StreamEvent::Token) => {
                self.total_tokens += 1;
                Ok(Action::Pass)
            }
            (Phase::BeforeThink, StreamEvent::ThinkClose) => {
                Err(self.malformed(index, "think-close without a preceding think-open"))
            }
            (Phase::Reasoning | Phase::Grace, StreamEvent::ThinkOpen) => {
                Err(self.malformed(index, "nested think-open inside an open think block"))
            }
            (Phase::Reasoning | Phase::Grace, StreamEvent::ThinkClose) => {
                self.phase = Phase::Answer;
                self.total_tokens += 1;
                Ok(Action::Pass)
            }
            (Phase::Reasoning, StreamEvent::Token) => {
                self.reasoning_tokens += 1;
                self.total_tokens += 1;
                if self.reasoning_tokens >= self.config.reasoning_budget {
                    self.phase = Phase::Grace;
                }
                Ok(Action::Pass)
            }
            (Phase::Grace, StreamEvent::Token) => {
                if self.reasoning_tokens + 1 > self.config.reasoning_budget + self.config.grace {
                    // The offered token is dropped; the injected close takes
                    // the sequence position it would have used.
                    self.phase = Phase::Answer;
                    self.total_tokens += 1;
                    self.forced_closures += 1;
                    Ok(Action::InjectThinkClose)
                } else {
                    self.reasoning_tokens += 1;
                    self.total_tokens += 1;
                    Ok(Action::Pass)
                }
            }
            (Phase::Answer, StreamEvent::ThinkOpen) => {
                Err(self.malformed(index, "second think block in one stream"))
            }
            (Phase::Answer, StreamEvent::ThinkClose) => {
                Err(self.malformed(index, "think-close after the think block already closed"))
            }
            (Phase::Closed, _) | (_, StreamEvent::End) => unreachable!("handled above"),
        }
    }

    /// Final counters; only a closed stream has them. Idempotent.
    pub fn finalize(&self) -> Result<BudgetStats> {
        if self.phase != Phase::Closed {
            return Err(Error::InvalidState(
                "finalize called before the stream ended",
            ));
        }
        Ok(BudgetStats {
            reasoning_tokens: self.reasoning_tokens,
            total_tokens: self.total_tokens,
            forced_closures: self.forced_closures,
            stopped_at_cap: self.stopped_at_cap,
        })
    }
}

/// Result of replaying a recorded event trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplayOutcome {
    pub stats: BudgetStats,
    /// Events judged by the controller (including the one refused at the cap).
    pub events_consumed: usize,
    /// Trailing trace lines ignored because the stream stopped at the cap.
    pub events_ignored: usize,
}

/// Replay a trace: one event per line — `OPEN`, `CLOSE`, `TOK`, or `END`
/// (blank lines skipped). After a cap stop the rest of the trace is counted
/// but not judged. A trace that ends without `END` (and was not stopped) is
/// malformed.
pub fn replay_trace<R: std::io::BufRead>(reader: R, config: BudgetConfig) -> Result<ReplayOutcome> {
    let mut state = StreamState::new(config)?;
    let mut consumed = 0usize;
    let mut ignored = 0usize;
    let mut line_count = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let word = line.trim();
        line_count = lineno + 1;
        if word.is_empty() {
            continue;
        }
        if state.phase() == Phase::Closed && state.stopped_at_cap {
            ignored += 1;
            continue;
        }
        let event = match word {
            "OPEN" => StreamEvent::ThinkOpen,
            "CLOSE" => StreamEvent::ThinkClose,
            "TOK" => StreamEvent::Token,
            "END" => StreamEvent::End,
            other => {
                return Err(Error::MalformedStream {
                    event_index: line_count,
                    detail: format!("unknown event '{other}'"),
                })
            }
        };
        state.on_token(event)?;
        consumed += 1;
    }

    if state.phase() != Phase::Closed {
        return Err(Error::MalformedStream {
            event_index: line_count,
            detail: "trace ended without END".to_string(),
        });
    }
    Ok(ReplayOutcome {
        stats: state.finalize()?,
        events_consumed: consumed,
        events_ignored: ignored,
    })
}
