//! Command-line front end.
//!
//! Eight subcommands expose the planning modules; each prints one JSON
//! report (see [`crate::report`]) to standard output. Exit status is `0` on
//! success, `1` for any input problem (bad flags, malformed files,
//! out-of-range values), and `2` if an emitted report would have
//! contradicted an independent recomputation — the internal self-check that
//! guards report integrity.
//!
//! Every handler recomputes its headline totals from first principles
//! before rendering, so a report that reaches stdout is internally
//! consistent by construction.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::audio;
use crate::budget::{self, BudgetConfig};
use crate::error::{Error, Result};
use crate::evs;
use crate::footprint::{self, BpwScope, CacheConfig, ParamGroup, ParamGroupInventory, WeightRecipe};
use crate::manifest;
use crate::pack;
use crate::report::{
    render, BudgetReplayReport, CacheReport, EvsPruneReport, FootprintReport, PackReport,
    PlanAudioReport, PlanImageReport, PlanVideoReport, SequenceReport, REPORT_SCHEMA,
};
use crate::sequence::{self, Stage, WINDOW_SECONDS};
use crate::video::{self, TokenOverheadModel, FRAME_PATCH_CHOICES};
use crate::vision::{self, PatchBudget, TOKENS_PER_SHUFFLE_GROUP};

#[derive(Debug, Parser)]
#[command(
    name = "omnitok",
    version,
    about = "Deterministic token accounting for multimodal model inputs",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan one image: dynamic-resolution grid and token counts.
    PlanImage(PlanImageArgs),
    /// Plan one video: frame sampling, per-frame grid, fusion, pruning.
    PlanVideo(PlanVideoArgs),
    /// Plan one audio stream: 30 s clips and token counts.
    PlanAudio(PlanAudioArgs),
    /// Plan a whole manifest into an interleaved sequence and check fit.
    Sequence(SequenceArgs),
    /// Pack sequence lengths into fixed-capacity context bins.
    Pack(PackArgs),
    /// Prune a video feature tensor and report (or save) the keep mask.
    EvsPrune(EvsPruneArgs),
    /// Replay a token-event trace through the reasoning-budget controller.
    BudgetReplay(BudgetReplayArgs),
    /// Weight storage and cache footprint for a precision recipe.
    Footprint(FootprintArgs),
}

/// Shared token-overhead flags; defaults mirror the fitted serving model.
#[derive(Debug, Args)]
struct OverheadArgs {
    /// Overhead tokens charged per video frame.
    #[arg(long, value_name = "N", default_value_t = TokenOverheadModel::default().per_frame)]
    overhead_per_frame: u64,
    /// Fixed overhead tokens charged per image.
    #[arg(long, value_name = "N", default_value_t = TokenOverheadModel::default().per_image_fixed)]
    overhead_per_image: u64,
    /// Fixed overhead tokens charged once per sequence.
    #[arg(long, value_name = "N", default_value_t = TokenOverheadModel::default().per_sequence_fixed)]
    overhead_per_sequence: u64,
}

impl OverheadArgs {
    fn model(&self) -> TokenOverheadModel {
        TokenOverheadModel {
            per_frame: self.overhead_per_frame,
            per_image_fixed: self.overhead_per_image,
            per_sequence_fixed: self.overhead_per_sequence,
        }
    }
}

#[derive(Debug, Args)]
struct PlanImageArgs {
    /// Source resolution as WIDTHxHEIGHT (pixels), e.g. 1920x1080.
    #[arg(long, value_parser = parse_resolution)]
    res: (u64, u64),
    /// Patch budget: 256 | 512 | 768 | 1024 caps the grid; "default" uses
    /// the full dynamic range.
    #[arg(long, value_name = "BUDGET", default_value = "default")]
    patch_budget: String,
    /// Override the lower patch bound.
    #[arg(long, value_name = "N")]
    min_patches: Option<u64>,
    /// Override the upper patch bound.
    #[arg(long, value_name = "N")]
    max_patches: Option<u64>,
    #[command(flatten)]
    overhead: OverheadArgs,
}

#[derive(Debug, Args)]
struct PlanVideoArgs {
    /// Exact frame count (alternative to --duration/--fps).
    #[arg(long, value_name = "N", conflicts_with_all = ["duration", "fps"])]
    frames: Option<u64>,
    /// Clip duration in seconds; sampled against the stage frame cap.
    #[arg(long, value_name = "SECONDS", requires = "fps")]
    duration: Option<f64>,
    /// Native frame rate of the clip.
    #[arg(long, value_name = "FPS", requires = "duration")]
    fps: Option<f64>,
    /// Frame resolution as WIDTHxHEIGHT (pixels).
    #[arg(long, value_parser = parse_resolution)]
    res: (u64, u64),
    /// Per-frame patch budget: 256 | 512 | 768 | 1024 | default (=1024).
    #[arg(long, value_name = "BUDGET", default_value = "default")]
    patch_budget: String,
    /// Fuse consecutive frame pairs before projection.
    #[arg(long)]
    conv3d: bool,
    /// Prune visual tokens at rate Q in [0, 1) after encoding.
    #[arg(long, value_name = "Q")]
    evs: Option<f64>,
    /// Stage whose frame cap applies when sampling: 16k | 48k | 256k.
    #[arg(long, value_name = "STAGE", default_value = "256k")]
    stage: String,
    #[command(flatten)]
    overhead: OverheadArgs,
}

#[derive(Debug, Args)]
struct PlanAudioArgs {
    /// Stream duration in seconds.
    #[arg(long, value_name = "SECONDS")]
    duration: f64,
}

#[derive(Debug, Args)]
struct SequenceArgs {
    /// Manifest file describing entries and settings.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Override the manifest's stage: 16k | 48k | 256k.
    #[arg(long, value_name = "STAGE")]
    stage: Option<String>,
}

#[derive(Debug, Args)]
struct PackArgs {
    /// Bin capacity in tokens.
    #[arg(long, value_name = "N")]
    capacity: u64,
    /// Arrivals buffered per batch.
    #[arg(long, value_name = "N", default_value_t = pack::DEFAULT_BUFFER_SIZE)]
    buffer: usize,
    /// Whitespace-separated lengths; read from stdin when omitted.
    #[arg(long, value_name = "LIST")]
    lengths: Option<String>,
}

#[derive(Debug, Args)]
struct EvsPruneArgs {
    /// Feature tensor file to prune (see the tensor interchange format).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["seed", "tubelets", "spatial", "dim"])]
    tensor: Option<PathBuf>,
    /// Generate a synthetic tensor from this seed instead of a file.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Synthetic tensor: tubelet count.
    #[arg(long, value_name = "T", default_value_t = 8)]
    tubelets: u32,
    /// Synthetic tensor: spatial positions per tubelet.
    #[arg(long, value_name = "S", default_value_t = 16)]
    spatial: u32,
    /// Synthetic tensor: feature dimension.
    #[arg(long, value_name = "D", default_value_t = 8)]
    dim: u32,
    /// Pruning rate Q in [0, 1).
    #[arg(long, value_name = "Q")]
    evs: f64,
    /// Write the retention mask to this file.
    #[arg(long, value_name = "FILE")]
    mask_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BudgetReplayArgs {
    /// Event trace file (one of OPEN/CLOSE/TOK/END per line); stdin when
    /// omitted.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Reasoning-token budget.
    #[arg(long, value_name = "N", default_value_t = BudgetConfig::DEFAULT_REASONING_BUDGET)]
    budget: u64,
    /// Grace tokens allowed past the budget before forced closure.
    #[arg(long, value_name = "N", default_value_t = BudgetConfig::DEFAULT_GRACE)]
    grace: u64,
    /// Hard cap on emitted sequence length.
    #[arg(long, value_name = "N", default_value_t = BudgetConfig::DEFAULT_MAX_SEQUENCE)]
    max_sequence: u64,
}

#[derive(Debug, Args)]
struct FootprintArgs {
    /// Precision recipe for the reference inventory: bf16 | fp8 | nvfp4.
    #[arg(long, value_name = "RECIPE", default_value = "nvfp4")]
    recipe: String,
    /// Custom inventory file (JSON list of named parameter groups),
    /// replacing the reference inventory.
    #[arg(long, value_name = "FILE", conflicts_with = "recipe")]
    inventory: Option<PathBuf>,
    /// Context length for the cache estimate.
    #[arg(long, value_name = "N", default_value_t = 16_384)]
    context_tokens: u64,
    /// Concurrent requests for the cache estimate.
    #[arg(long, value_name = "N", default_value_t = 1)]
    concurrency: u64,
}

/// Representative hybrid-stack cache shape used by the footprint report:
/// a few attention layers with an 8-bit KV cache (2 KiB per token per
/// layer) and a majority of SSM layers holding 4 MiB of 32-bit state each.
const DEFAULT_CACHE: (u64, u64, u64, u64) = (6, 56, 2048, 4_194_304);

fn parse_resolution(s: &str) -> std::result::Result<(u64, u64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got '{s}'"))?;
    let width = w.trim().parse::<u64>().map_err(|_| format!("bad width in '{s}'"))?;
    let height = h.trim().parse::<u64>().map_err(|_| format!("bad height in '{s}'"))?;
    Ok((width, height))
}

/// Resolve the image patch budget from `--patch-budget` and bound overrides.
fn image_budget(setting: &str, min: Option<u64>, max: Option<u64>) -> Result<PatchBudget> {
    let base = match setting {
        "default" => PatchBudget::default(),
        other => PatchBudget::new(4, frame_patch_target(other)?)?,
    };
    PatchBudget::new(
        min.unwrap_or(base.min_patches),
        max.unwrap_or(base.max_patches),
    )
}

/// Resolve the per-frame patch target; "default" means 1024.
fn frame_patch_target(setting: &str) -> Result<u64> {
    if setting == "default" {
        return Ok(1024);
    }
    let parsed: u64 = setting.parse().map_err(|_| {
        Error::invalid(format!(
            "patch budget must be one of {FRAME_PATCH_CHOICES:?} or 'default', got '{setting}'"
        ))
    })?;
    if !FRAME_PATCH_CHOICES.contains(&parsed) {
        return Err(Error::invalid(format!(
            "patch budget must be one of {FRAME_PATCH_CHOICES:?} or 'default', got {parsed}"
        )));
    }
    Ok(parsed)
}

fn self_check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Internal(format!("report self-check failed: {what}")))
    }
}

fn plan_image(args: PlanImageArgs) -> Result<String> {
    let budget = image_budget(&args.patch_budget, args.min_patches, args.max_patches)?;
    let overhead = args.overhead.model();
    let plan = vision::plan_image_resolution(args.res.0, args.res.1, budget)?;
    let total = vision::image_llm_tokens(&plan, &overhead);

    self_check(plan.vit_tokens == plan.grid_w * plan.grid_h, "patch grid product")?;
    self_check(
        total == plan.vit_tokens / TOKENS_PER_SHUFFLE_GROUP + overhead.per_image_fixed,
        "image token total",
    )?;

    Ok(render(&PlanImageReport {
        schema: REPORT_SCHEMA,
        command: "plan-image",
        plan,
        image_overhead_tokens: overhead.per_image_fixed,
        total_tokens: total,
    }))
}

fn plan_video(args: PlanVideoArgs) -> Result<String> {
    let overhead = args.overhead.model();
    let stage = Stage::parse(&args.stage)?;
    let (sampling, frames) = match (args.frames, args.duration, args.fps) {
        (Some(frames), None, None) => (None, frames),
        (None, Some(duration), Some(fps)) => {
            let plan = video::sample_frames(duration, fps, stage.max_frames())?;
            let frames = plan.frame_count();
            (Some(plan), frames)
        }
        _ => {
            return Err(Error::invalid(
                "provide either --frames or both --duration and --fps",
            ))
        }
    };
    let frame_plan = video::plan_frame_resolution(
        args.res.0,
        args.res.1,
        frame_patch_target(&args.patch_budget)?,
    )?;
    let budget = video::video_token_budget(frames, frame_plan.vit_tokens, args.conv3d, &overhead)?;
    let retained = match args.evs {
        Some(q) => evs::retained_visual_tokens(&budget, q)?,
        None => budget.visual_tokens,
    };
    let total = retained + budget.overhead_tokens;

    // Recompute the chain from first principles before emitting.
    let tubelets = if args.conv3d { frames.div_ceil(2) } else { frames };
    let visual = tubelets * (frame_plan.vit_tokens / TOKENS_PER_SHUFFLE_GROUP);
    self_check(budget.visual_tokens == visual, "visual token count")?;
    self_check(
        budget.overhead_tokens == frames * overhead.per_frame + overhead.per_sequence_fixed,
        "video overhead",
    )?;
    let expect_retained = match args.evs {
        Some(q) => {
            let floor = frame_plan.vit_tokens / TOKENS_PER_SHUFFLE_GROUP;
            floor.max(((1.0 - q) * visual as f64).ceil() as u64)
        }
        None => visual,
    };
    self_check(retained == expect_retained, "retained visual tokens")?;
    self_check(total == retained + budget.overhead_tokens, "video token total")?;

    Ok(render(&PlanVideoReport {
        schema: REPORT_SCHEMA,
        command: "plan-video",
        sampling,
        frame_plan,
        budget,
        evs_q: args.evs,
        retained_visual_tokens: retained,
        total_tokens: total,
    }))
}

fn plan_audio(args: PlanAudioArgs) -> Result<String> {
    let plan = audio::segment_clips(args.duration)?;
    let clip_sum: u64 = plan.clips.iter().map(|c| c.tokens).sum();
    self_check(clip_sum == plan.total_tokens, "audio clip token sum")?;
    let rate = plan.total_tokens as f64 / args.duration;

    Ok(render(&PlanAudioReport {
        schema: REPORT_SCHEMA,
        command: "plan-audio",
        plan,
        tokens_per_second: rate,
    }))
}

fn sequence_cmd(args: SequenceArgs) -> Result<String> {
    let mut parsed = manifest::parse_manifest(&args.manifest)?;
    if let Some(stage) = args.stage {
        Stage::parse(&stage)?;
        parsed.settings.stage = stage;
    }
    let stage = parsed.stage()?;
    let items = parsed.media_items()?;
    let windows = sequence::build_timeline(&items, WINDOW_SECONDS)?;
    let layout = sequence::interleave(&windows, &parsed.settings.overhead);
    let fit = sequence::check_context(&layout, stage);

    // Conservation: every item's spans must sum back to its budget.
    for item in &items {
        let spanned: u64 = layout
            .spans
            .iter()
            .filter(|s| s.id == item.id)
            .map(|s| s.tokens)
            .sum();
        self_check(
            spanned == item.token_budget,
            "per-item span conservation",
        )?;
    }
    let span_sum: u64 = layout.spans.iter().map(|s| s.tokens).sum();
    self_check(
        layout.total_tokens == span_sum + layout.overhead_tokens,
        "sequence token total",
    )?;
    self_check(fit.total_tokens == layout.total_tokens, "fit report total")?;

    Ok(render(&SequenceReport {
        schema: REPORT_SCHEMA,
        command: "sequence",
        stage: stage.label().to_string(),
        items,
        spans: layout.spans.clone(),
        overhead_tokens: layout.overhead_tokens,
        total_tokens: layout.total_tokens,
        fit,
    }))
}

fn parse_lengths(text: &str) -> Result<Vec<u64>> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, word)| {
            word.parse::<u64>().map_err(|_| {
                Error::invalid(format!(
                    "length #{} ('{word}') is not a non-negative integer",
                    i + 1
                ))
            })
        })
        .collect()
}

fn pack_cmd(args: PackArgs) -> Result<String> {
    let text = match args.lengths {
        Some(list) => list,
        None => std::io::read_to_string(std::io::stdin())?,
    };
    let lengths = parse_lengths(&text)?;
    let packed = pack::pack(&lengths, args.capacity, args.buffer)?;
    let stats = pack::utilization_stats(&packed);

    let mut seen: Vec<(usize, u64)> = packed
        .bins
        .iter()
        .flat_map(|b| b.entries.iter().map(|e| (e.index, e.length)))
        .collect();
    seen.sort_unstable();
    let expected: Vec<(usize, u64)> = lengths.iter().copied().enumerate().collect();
    self_check(seen == expected, "packed multiset conservation")?;
    self_check(
        packed.bins.iter().all(|b| b.fill <= packed.capacity),
        "bin capacity",
    )?;

    Ok(render(&PackReport {
        schema: REPORT_SCHEMA,
        command: "pack",
        capacity: packed.capacity,
        buffer_size: args.buffer,
        sequence_count: lengths.len(),
        utilization: packed.utilization(),
        stats,
        bins: packed.bins,
    }))
}

fn evs_prune_cmd(args: EvsPruneArgs) -> Result<String> {
    let (tensor, source) = match (&args.tensor, args.seed) {
        (Some(path), _) => {
            let file = std::fs::File::open(path)?;
            let tensor = evs::read_feature_tensor(&mut std::io::BufReader::new(file))?;
            (tensor, path.display().to_string())
        }
        (None, Some(seed)) => (
            evs::synth_feature_tensor(seed, args.tubelets, args.spatial, args.dim)?,
            format!("synthetic(seed={seed})"),
        ),
        (None, None) => {
            return Err(Error::invalid(
                "provide --tensor FILE or --seed N for a synthetic tensor",
            ))
        }
    };
    let mask = evs::evs_prune(&tensor, args.evs)?;
    let total = tensor.token_count();

    let expected = (total as f64 * (1.0 - args.evs)).ceil() as u64;
    self_check(
        mask.retained() == expected.max(tensor.spatial() as u64).min(total),
        "retention budget",
    )?;
    self_check(
        mask.keep()[..tensor.spatial() as usize].iter().all(|&k| k),
        "anchor tubelet retention",
    )?;

    let mask_file = match &args.mask_out {
        Some(path) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            evs::write_retention_mask(&mut file, &mask)?;
            file.flush()?;
            Some(path.display().to_string())
        }
        None => None,
    };

    Ok(render(&EvsPruneReport {
        schema: REPORT_SCHEMA,
        command: "evs-prune",
        source,
        tubelets: tensor.tubelets(),
        spatial: tensor.spatial(),
        dim: tensor.dim(),
        evs_q: args.evs,
        total_tokens: total,
        retained_tokens: mask.retained(),
        dropped_tokens: total - mask.retained(),
        mask_file,
    }))
}

fn budget_replay(args: BudgetReplayArgs) -> Result<String> {
    let config = BudgetConfig::new(args.budget, args.grace, args.max_sequence)?;
    let outcome = match &args.trace {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            budget::replay_trace(std::io::BufReader::new(file), config)?
        }
        None => {
            let text = std::io::read_to_string(std::io::stdin())?;
            budget::replay_trace(text.as_bytes(), config)?
        }
    };

    self_check(
        outcome.stats.reasoning_tokens <= config.reasoning_budget + config.grace,
        "reasoning ceiling",
    )?;
    self_check(
        outcome.stats.total_tokens <= config.max_sequence,
        "sequence cap",
    )?;

    Ok(render(&BudgetReplayReport {
        schema: REPORT_SCHEMA,
        command: "budget-replay",
        config,
        outcome,
    }))
}

fn parse_recipe(name: &str) -> Result<WeightRecipe> {
    match name {
        "bf16" => Ok(WeightRecipe::Bf16),
        "fp8" => Ok(WeightRecipe::Fp8),
        "nvfp4" => Ok(WeightRecipe::Nvfp4),
        other => Err(Error::invalid(format!(
            "recipe must be bf16, fp8, or nvfp4, got '{other}'"
        ))),
    }
}

fn footprint_cmd(args: FootprintArgs) -> Result<String> {
    let (recipe_name, inventory) = match &args.inventory {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let groups: Vec<ParamGroup> = serde_json::from_str(&text)
                .map_err(|e| Error::invalid(format!("inventory file: {e}")))?;
            ("custom".to_string(), ParamGroupInventory::new(groups)?)
        }
        None => (
            args.recipe.clone(),
            footprint::reference_inventory(parse_recipe(&args.recipe)?),
        ),
    };

    let whole = footprint::effective_bpw(&inventory, BpwScope::WholeModel)?;
    let decoder = footprint::effective_bpw(&inventory, BpwScope::DecoderOnly)?;

    // Independent byte recount, group by group.
    let recount: f64 = inventory
        .groups()
        .iter()
        .map(|g| g.params as f64 * g.bits_per_weight / 8.0)
        .sum();
    self_check(
        (recount - whole.total_bytes).abs() <= 1e-9 * recount.max(1.0),
        "byte total recount",
    )?;

    let (attn, ssm, kv_bytes, ssm_bytes) = DEFAULT_CACHE;
    let cache_config = CacheConfig::new(attn, ssm, kv_bytes, ssm_bytes)?;
    let bytes = footprint::cache_bytes(&cache_config, args.context_tokens, args.concurrency)?;
    let expect = args.concurrency as u128
        * (args.context_tokens as u128 * attn as u128 * kv_bytes as u128
            + ssm as u128 * ssm_bytes as u128);
    self_check(bytes as u128 == expect, "cache byte recount")?;

    Ok(render(&FootprintReport {
        schema: REPORT_SCHEMA,
        command: "footprint",
        recipe: recipe_name,
        total_params: inventory.total_params(),
        whole_model: whole,
        decoder_only: decoder,
        groups: inventory.groups().to_vec(),
        cache: CacheReport {
            config: cache_config,
            context_tokens: args.context_tokens,
            concurrency: args.concurrency,
            bytes,
            gigabytes: bytes as f64 / 1e9,
        },
    }))
}

fn execute(command: Command) -> Result<String> {
    match command {
        Command::PlanImage(args) => plan_image(args),
        Command::PlanVideo(args) => plan_video(args),
        Command::PlanAudio(args) => plan_audio(args),
        Command::Sequence(args) => sequence_cmd(args),
        Command::Pack(args) => pack_cmd(args),
        Command::EvsPrune(args) => evs_prune_cmd(args),
        Command::BudgetReplay(args) => budget_replay(args),
        Command::Footprint(args) => footprint_cmd(args),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Internal(_) => 2,
        _ => 1,
    }
}

/// Parse arguments, run the subcommand, print its report, and return the
/// process exit status (0 success, 1 input error, 2 broken invariant).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is a
            // usage error. clap routes the text to the right stream.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return 1;
            }
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
