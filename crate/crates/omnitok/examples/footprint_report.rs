//! Mixed-precision weight and cache memory arithmetic.
//!
//! Prices the reference parameter inventory under three precision recipes,
//! shows why whole-model and decoder-only bits-per-weight differ, and sizes
//! the runtime cache for a hybrid attention/SSM stack.
//!
//! Run with: `cargo run --example footprint_report`

use omnitok::footprint::{
    cache_bytes, effective_bpw, reference_inventory, BpwScope, CacheConfig, WeightRecipe,
};

fn main() -> omnitok::Result<()> {
    println!(
        "{:<8} {:>10} {:>12} {:>14}",
        "recipe", "weights", "bpw (whole)", "bpw (decoder)"
    );
    for (name, recipe) in [
        ("bf16", WeightRecipe::Bf16),
        ("fp8", WeightRecipe::Fp8),
        ("nvfp4", WeightRecipe::Nvfp4),
    ] {
        let inventory = reference_inventory(recipe);
        let whole = effective_bpw(&inventory, BpwScope::WholeModel)?;
        let decoder = effective_bpw(&inventory, BpwScope::DecoderOnly)?;
        println!(
            "{:<8} {:>8.2}GB {:>12.3} {:>14.3}",
            name, whole.gigabytes, whole.bits_per_weight, decoder.bits_per_weight
        );
    }

    // The decoder-only scope drops the encoder towers (kept at BF16 in
    // every recipe) from the average; the byte total always ships them.
    let inventory = reference_inventory(WeightRecipe::Nvfp4);
    let whole = effective_bpw(&inventory, BpwScope::WholeModel)?;
    let decoder = effective_bpw(&inventory, BpwScope::DecoderOnly)?;
    println!();
    println!(
        "nvfp4 averages {:.3} bits over all {:.2}B params, {:.3} bits over the {:.2}B decoder params",
        whole.bits_per_weight,
        whole.scope_params as f64 / 1e9,
        decoder.bits_per_weight,
        decoder.scope_params as f64 / 1e9,
    );

    // Largest groups dominate the byte bill.
    println!();
    println!("Heaviest groups under nvfp4:");
    let mut groups = inventory.groups().to_vec();
    groups.sort_by(|a, b| {
        let (ab, bb) = (a.params as f64 * a.bits_per_weight, b.params as f64 * b.bits_per_weight);
        bb.partial_cmp(&ab).unwrap()
    });
    for g in groups.iter().take(4) {
        println!(
            "  {:<22} {:>6.2}B params @ {:>4.1} bits = {:>6.2} GB",
            g.name,
            g.params as f64 / 1e9,
            g.bits_per_weight,
            g.params as f64 * g.bits_per_weight / 8.0 / 1e9,
        );
    }

    // Runtime state: a handful of attention layers grow a KV cache with
    // context; the SSM layers pay a fixed per-request state.
    let cache = CacheConfig::new(6, 56, 2048, 4_194_304)?;
    println!();
    println!("Cache for 6 attention + 56 SSM layers:");
    println!("{:>10} {:>12} {:>14} {:>14}", "context", "1 request", "8 requests", "64 requests");
    for tokens in [16_384u64, 49_152, 262_144] {
        let row: Vec<f64> = [1u64, 8, 64]
            .iter()
            .map(|&c| cache_bytes(&cache, tokens, c).map(|b| b as f64 / 1e9))
            .collect::<omnitok::Result<_>>()?;
        println!(
            "{:>10} {:>10.3}GB {:>12.3}GB {:>12.3}GB",
            tokens, row[0], row[1], row[2]
        );
    }

    Ok(())
}
