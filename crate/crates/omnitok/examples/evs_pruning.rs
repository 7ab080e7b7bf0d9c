//! Dissimilarity-based video token pruning.
//!
//! Builds a synthetic feature tensor, scores every token position against
//! the same position one tubelet earlier, prunes at several rates, and
//! round-trips tensor and mask through their binary interchange formats.
//!
//! Run with: `cargo run --example evs_pruning`

use omnitok::evs::{
    evs_dissimilarity, evs_prune, read_feature_tensor, read_retention_mask, synth_feature_tensor,
    write_feature_tensor, write_retention_mask, Dissimilarity,
};

fn main() -> omnitok::Result<()> {
    // 8 tubelets x 16 spatial positions x 8 feature dims = 128 tokens.
    let tensor = synth_feature_tensor(42, 8, 16, 8)?;
    println!(
        "Synthetic tensor: {} tubelets x {} positions x {} dims ({} tokens)",
        tensor.tubelets(),
        tensor.spatial(),
        tensor.dim(),
        tensor.token_count()
    );

    // Every position in the first tubelet is pinned: with no predecessor
    // there is nothing to compare against, so it always survives pruning.
    let map = evs_dissimilarity(&tensor);
    let scores: Vec<f64> = map
        .values()
        .iter()
        .filter_map(|d| match d {
            Dissimilarity::Pinned => None,
            Dissimilarity::Score(s) => Some(*s),
        })
        .collect();
    let pinned = map.values().len() - scores.len();
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("Dissimilarity: {pinned} pinned anchors, scored range [{lo:.4}, {hi:.4}]");

    println!();
    println!("{:>6}  {:>8}  {:>8}", "q", "retained", "dropped");
    for q in [0.0, 0.5, 0.7, 0.9, 0.95] {
        let mask = evs_prune(&tensor, q)?;
        println!(
            "{:>6}  {:>8}  {:>8}",
            q,
            mask.retained(),
            tensor.token_count() - mask.retained()
        );
    }

    // Even q = 0.99 cannot cut below one tubelet's worth of positions: the
    // retention budget is floored at the spatial size.
    let floor = evs_prune(&tensor, 0.99)?;
    println!();
    println!(
        "q=0.99 keeps {} tokens (floor = {} spatial positions)",
        floor.retained(),
        tensor.spatial()
    );
    assert!(floor.keep()[..tensor.spatial() as usize].iter().all(|&k| k));

    // Both artifacts serialize to compact little-endian formats so a scorer
    // and a pruner can live in different processes.
    let mut tensor_bytes = Vec::new();
    write_feature_tensor(&mut tensor_bytes, &tensor)?;
    let restored = read_feature_tensor(&mut tensor_bytes.as_slice())?;
    assert_eq!(restored.data(), tensor.data());

    let mask = evs_prune(&tensor, 0.7)?;
    let mut mask_bytes = Vec::new();
    write_retention_mask(&mut mask_bytes, &mask)?;
    let reloaded = read_retention_mask(&mut mask_bytes.as_slice())?;
    assert_eq!(reloaded.keep(), mask.keep());

    println!();
    println!(
        "Round-trip: tensor file {} bytes, mask file {} bytes, both bit-exact",
        tensor_bytes.len(),
        mask_bytes.len()
    );

    Ok(())
}
