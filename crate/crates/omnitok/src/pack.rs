//! Online sequence packing into fixed-capacity context bins.
//!
//! Training dataloaders stream variable-length sequences; packing several
//! into one context window raises accelerator utilization. This packer is a
//! buffered, balanced greedy knapsack: it collects up to `buffer_size`
//! arrivals, sorts the batch longest-first, and drops each sequence into the
//! open bin with the *most* remaining room (worst-fit, which keeps bin fills
//! even), opening a new bin when nothing fits. Bins stay open across
//! batches, so a later short sequence can still plug an early gap.
//!
//! Everything is deterministic: batch sorting is stable on input index and
//! placement ties go to the lowest bin index.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default arrivals collected per batch.
pub const DEFAULT_BUFFER_SIZE: usize = 512;

/// One packed sequence: its position in the input and its length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PackedEntry {
    pub index: usize,
    pub length: u64,
}

/// One context bin; `fill` is the sum of entry lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackedBin {
    pub entries: Vec<PackedEntry>,
    pub fill: u64,
}

impl PackedBin {
    pub fn remaining(&self, capacity: u64) -> u64 {
        capacity - self.fill
    }
}

/// Result of packing a whole input stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackedBins {
    pub capacity: u64,
    pub bins: Vec<PackedBin>,
}

impl PackedBins {
    /// Total fill over total capacity; an empty packing is vacuously 1.0.
    pub fn utilization(&self) -> f64 {
        if self.bins.is_empty() {
            return 1.0;
        }
        let total: u64 = self.bins.iter().map(|b| b.fill).sum();
        total as f64 / (self.bins.len() as f64 * self.capacity as f64)
    }
}

/// Aggregate fill statistics for a packing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilizationStats {
    pub bin_count: usize,
    pub min_fill: f64,
    pub mean_fill: f64,
    pub max_fill: f64,
    pub total_waste_tokens: u64,
}

/// Pack `lengths` into bins of `capacity` tokens, buffering `buffer_size`
/// arrivals per batch. Any single length above `capacity` is unpackable and
/// reported by its input index (the first such index in input order).
pub fn pack(lengths: &[u64], capacity: u64, buffer_size: usize) -> Result<PackedBins> {
    if capacity == 0 {
        return Err(Error::invalid("bin capacity must be at least 1 token"));
    }
    if buffer_size == 0 {
        return Err(Error::invalid("buffer size must be at least 1"));
    }
    for (index, &length) in lengths.iter().enumerate() {
        if length > capacity {
            return Err(Error::OversizedSequence {
                index,
                length,
                capacity,
            });
        }
    }

    let mut bins: Vec<PackedBin> = Vec::new();
    // One live entry per bin: (remaining, Reverse(bin index)). The max-heap
    // surfaces the emptiest bin, and Reverse breaks remaining-space ties
    // toward the lowest index.
    let mut open: BinaryHeap<(u64, Reverse<usize>)> = BinaryHeap::new();

    for batch_start in (0..lengths.len()).step_by(buffer_size) {
        let batch_end = (batch_start + buffer_size).min(lengths.len());
        let mut batch: Vec<(usize, u64)> = (batch_start..batch_end)
            .map(|i| (i, lengths[i]))
            .collect();
        batch.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        for (index, length) in batch {
            // The emptiest bin is the only candidate worst-fit can choose;
            // if even it cannot take the sequence, nothing can.
            let placed = match open.peek().copied() {
                Some((remaining, Reverse(bin))) if remaining >= length => {
                    open.pop();
                    bins[bin].entries.push(PackedEntry { index, length });
                    bins[bin].fill += length;
                    open.push((remaining - length, Reverse(bin)));
                    true
                }
                _ => false,
            };
            if !placed {
                let bin = bins.len();
                bins.push(PackedBin {
                    entries: vec![PackedEntry { index, length }],
                    fill: length,
                });
                open.push((capacity - length, Reverse(bin)));
            }
        }
    }

    Ok(PackedBins { capacity, bins })
}

/// Summarize fill fractions and waste; empty packings report 1.0 fills.
pub fn utilization_stats(packed: &PackedBins) -> UtilizationStats {
    if packed.bins.is_empty() {
        return UtilizationStats {
            bin_count: 0,
            min_fill: 1.0,
            mean_fill: 1.0,
            max_fill: 1.0,
            total_waste_tokens: 0,
        };
    }
    let cap = packed.capacity as f64;
    let mut min_fill = f64::INFINITY;
    let mut max_fill = f64::NEG_INFINITY;
    let mut waste = 0u64;
    for bin in &packed.bins {
        let frac = bin.fill as f64 / cap;
        min_fill = min_fill.min(frac);
        max_fill = max_fill.max(frac);
        waste += packed.capacity - bin.fill;
    }
    UtilizationStats {
        bin_count: packed.bins.len(),
        min_fill,
        mean_fill: packed.utilization(),
        max_fill,
        total_waste_tokens: waste,
    }
}
