//! Command-line pipeline: synthesize datasets, generate occlusion ground
//! truth, train, infer, evaluate, and emit PR curves.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags/subcommands),
//! 2 on runtime failures (missing files, malformed data, shape errors).
//! Every command prints its fully resolved configuration so that a run is
//! reproducible from its own output plus the seed.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use symmnet::data::pfm::{read_pfm_path, write_pfm_path};
use symmnet::data::{load_mask, save_mask, synth_scene, ColorImage, Manifest, SceneSpec};
use symmnet::data::manifest::MANIFEST_FILE;
use symmnet::data::Checkpoint;
use symmnet::grid::View;
use symmnet::lrc::{crop_with_gt, occlusion_pair, GtConfig, OcclusionMap};
use symmnet::metrics::{
    aggregate, max_f_point, oracle_global_f, pr_curve, write_metrics_kv, write_pr_csv, Metrics,
};
use symmnet::net::Variant;
use symmnet::trainer::{center_crop_rect, train, TrainConfig};
use symmnet::{Error, Grid32, Network32, Result, StereoSample32};

/// Environment variable naming the default dataset directory.
pub const DATA_ROOT_ENV: &str = "SYMMNET_DATA_ROOT";

#[derive(Parser, Debug)]
#[command(
    name = "symmnet",
    version,
    about = "Binocular occlusion detection: data synthesis, training, inference, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic stereo dataset with dense disparities.
    Synth(SynthArgs),
    /// Label occlusions from a left/right disparity pair.
    GenGt(GenGtArgs),
    /// Train a network and write a checkpoint plus a log.
    Train(TrainArgs),
    /// Run a checkpoint on one stereo pair.
    Infer(InferArgs),
    /// Score predicted masks against ground truth; optionally paint overlays.
    Eval(EvalArgs),
    /// Sweep detection thresholds and write a precision/recall CSV.
    PrCurve(PrCurveArgs),
}

/// Ground-truth labeling knobs shared by every command that derives
/// occlusions from disparities.
#[derive(Args, Debug, Clone, Copy)]
struct GtArgs {
    /// Disparity consistency threshold (strictly-greater test).
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Label pixels whose correspondence leaves the frame as visible
    /// instead of occluded.
    #[arg(long)]
    oob_visible: bool,
}

impl GtArgs {
    fn config(&self) -> GtConfig<f32> {
        GtConfig {
            delta: self.delta as f32,
            oob_is_occluded: !self.oob_visible,
        }
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("delta", self.delta.to_string()),
            ("oob_visible", self.oob_visible.to_string()),
        ]
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output dataset directory (created if absent).
    #[arg(long)]
    out: PathBuf,
    /// Number of scenes.
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 384)]
    width: usize,
    #[arg(long, default_value_t = 320)]
    height: usize,
    /// Scene seed; scene i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip writing occlusion masks (they can be regenerated with gen-gt).
    #[arg(long)]
    no_masks: bool,
    #[command(flatten)]
    gt: GtArgs,
}

#[derive(Args, Debug)]
struct GenGtArgs {
    /// Left-view disparity (PFM).
    #[arg(long)]
    left: PathBuf,
    /// Right-view disparity (PFM).
    #[arg(long)]
    right: PathBuf,
    /// Left mask output; default: left input renamed to *_occ.png.
    #[arg(long)]
    out_left: Option<PathBuf>,
    /// Right mask output; default: right input renamed to *_occ.png.
    #[arg(long)]
    out_right: Option<PathBuf>,
    #[command(flatten)]
    gt: GtArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset directory; falls back to $SYMMNET_DATA_ROOT.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Optional held-out dataset directory scored after every epoch.
    #[arg(long)]
    holdout: Option<PathBuf>,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV log output path.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = Variant::SymmNet)]
    variant: Variant,
    /// Width multiplier on every interior channel count.
    #[arg(long, default_value_t = 1.0)]
    channel_scale: f64,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.99)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    adam_eps: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Optional cap on total optimizer steps.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, default_value_t = 256)]
    crop_height: usize,
    #[arg(long, default_value_t = 768)]
    crop_width: usize,
    /// Seeds initialization, shuffling, and crop placement.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epsilon of the bounded class weights (must exceed 1).
    #[arg(long, default_value_t = 1.5)]
    class_epsilon: f64,
    /// Average loss terms over pixels instead of summing.
    #[arg(long)]
    normalize: bool,
    /// Alternating-input variant: supervise swapped steps on the mirrored
    /// problem instead of the right-view target as-is.
    #[arg(long)]
    mirror_swapped: bool,
    #[command(flatten)]
    gt: GtArgs,
}

#[derive(Args, Debug)]
struct InferArgs {
    /// Checkpoint path.
    #[arg(long)]
    ckpt: PathBuf,
    /// Left image (PNG, dimensions divisible by 64).
    #[arg(long)]
    left: PathBuf,
    /// Right image (PNG, same size).
    #[arg(long)]
    right: PathBuf,
    /// Detection threshold (strict P > tau).
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Output path prefix for probability maps and masks.
    #[arg(long, default_value = "pred")]
    out_prefix: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Predicted mask (PNG) or a directory of them.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mask (PNG) or a directory; directories are matched by
    /// file name.
    #[arg(long)]
    gt: PathBuf,
    /// Overlay image output (single-file mode): true positives cyan, false
    /// negatives magenta, false positives yellow.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Overlay output directory (directory mode), one image per mask.
    #[arg(long)]
    overlay_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PrCurveArgs {
    /// Checkpoint path.
    #[arg(long)]
    ckpt: PathBuf,
    /// Dataset directory; falls back to $SYMMNET_DATA_ROOT.
    #[arg(long)]
    data: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    gt: GtArgs,
}

/// Parses and executes `argv`; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; those are successes.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::GenGt(args) => cmd_gen_gt(args),
        Command::Train(args) => cmd_train(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Eval(args) => cmd_eval(args),
        Command::PrCurve(args) => cmd_pr_curve(args),
    }
}

fn print_config(command: &str, entries: &[(&str, String)]) {
    println!("resolved config ({command})");
    for (k, v) in entries {
        println!("  {k} = {v}");
    }
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".into(), T::to_string)
}

/// The dataset directory: the flag if given, else the environment default.
fn data_root(flag: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(dir) = flag {
        return Ok(dir);
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir)),
        _ => Err(Error::config(format!(
            "no --data directory given and {DATA_ROOT_ENV} is unset"
        ))),
    }
}

/// Loads every sample in a dataset directory, preferring its manifest.
fn load_dataset(root: &Path) -> Result<Vec<StereoSample32>> {
    let manifest = if root.join(MANIFEST_FILE).exists() {
        Manifest::load(root)?
    } else {
        Manifest::scan(root)?
    };
    if manifest.entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    manifest
        .entries
        .iter()
        .map(|e| manifest.load_sample(e))
        .collect()
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    print_config(
        "synth",
        &[
            ("out", show(&args.out)),
            ("count", args.count.to_string()),
            ("width", args.width.to_string()),
            ("height", args.height.to_string()),
            ("seed", args.seed.to_string()),
            ("no_masks", args.no_masks.to_string()),
        ]
        .into_iter()
        .chain(args.gt.entries())
        .collect::<Vec<_>>(),
    );
    if args.count == 0 {
        return Err(Error::config("count must be at least 1"));
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::IoAt {
        path: args.out.clone(),
        source: e,
    })?;
    let gt = args.gt.config();
    let mut entries = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let spec = SceneSpec::random(args.seed.wrapping_add(i as u64), args.width, args.height);
        let mut sample = synth_scene::<f32>(&spec)?.sample;
        if !args.no_masks {
            sample.generate_gt(&gt)?;
        }
        let id = format!("scene{i:04}");
        entries.push(Manifest::write_sample(&args.out, &id, &sample)?);
    }
    Manifest {
        root: args.out.clone(),
        entries,
    }
    .save()?;
    println!(
        "wrote {} samples and {} to {}",
        args.count,
        MANIFEST_FILE,
        show(&args.out)
    );
    Ok(())
}

/// `x/d_l.pfm` -> `x/d_l_occ.png`.
fn derived_mask_path(p: &Path) -> PathBuf {
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    p.with_file_name(format!("{stem}_occ.png"))
}

fn cmd_gen_gt(args: GenGtArgs) -> Result<()> {
    let out_left = args
        .out_left
        .clone()
        .unwrap_or_else(|| derived_mask_path(&args.left));
    let out_right = args
        .out_right
        .clone()
        .unwrap_or_else(|| derived_mask_path(&args.right));
    print_config(
        "gen-gt",
        &[
            ("left", show(&args.left)),
            ("right", show(&args.right)),
            ("out_left", show(&out_left)),
            ("out_right", show(&out_right)),
        ]
        .into_iter()
        .chain(args.gt.entries())
        .collect::<Vec<_>>(),
    );
    let left = read_pfm_path::<f32>(&args.left, View::Left)?;
    let right = read_pfm_path::<f32>(&args.right, View::Right)?;
    let (occ_left, occ_right) = occlusion_pair(&left, &right, &args.gt.config())?;
    save_mask(&occ_left, &out_left)?;
    save_mask(&occ_right, &out_right)?;
    println!(
        "wrote {} ({} occluded px) and {} ({} occluded px)",
        show(&out_left),
        occ_left.occluded_count(),
        show(&out_right),
        occ_right.occluded_count()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let data = data_root(args.data.clone())?;
    let cfg = TrainConfig {
        variant: args.variant,
        channel_scale: args.channel_scale,
        lr: args.lr,
        beta1: args.beta1,
        beta2: args.beta2,
        adam_eps: args.adam_eps,
        batch_size: args.batch_size,
        epochs: args.epochs,
        max_steps: args.max_steps,
        crop_h: args.crop_height,
        crop_w: args.crop_width,
        seed: args.seed,
        class_epsilon: args.class_epsilon,
        normalize: args.normalize,
        mirror_swapped: args.mirror_swapped,
        gt_delta: args.gt.delta,
        gt_oob_is_occluded: !args.gt.oob_visible,
    };
    print_config(
        "train",
        &[
            ("data", show(&data)),
            ("holdout", opt(&args.holdout.as_ref().map(|p| show(p)))),
            ("out", show(&args.out)),
            ("log", opt(&args.log.as_ref().map(|p| show(p)))),
            ("variant", cfg.variant.to_string()),
            ("channel_scale", cfg.channel_scale.to_string()),
            ("lr", cfg.lr.to_string()),
            ("beta1", cfg.beta1.to_string()),
            ("beta2", cfg.beta2.to_string()),
            ("adam_eps", cfg.adam_eps.to_string()),
            ("batch_size", cfg.batch_size.to_string()),
            ("epochs", cfg.epochs.to_string()),
            ("max_steps", opt(&cfg.max_steps)),
            ("crop_height", cfg.crop_h.to_string()),
            ("crop_width", cfg.crop_w.to_string()),
            ("seed", cfg.seed.to_string()),
            ("class_epsilon", cfg.class_epsilon.to_string()),
            ("normalize", cfg.normalize.to_string()),
            ("mirror_swapped", cfg.mirror_swapped.to_string()),
        ]
        .into_iter()
        .chain(args.gt.entries())
        .collect::<Vec<_>>(),
    );
    let samples = load_dataset(&data)?;
    let holdout = match &args.holdout {
        Some(dir) => load_dataset(dir)?,
        None => Vec::new(),
    };
    println!(
        "training on {} samples ({} held out)",
        samples.len(),
        holdout.len()
    );
    let outcome = train(&samples, &holdout, &cfg)?;
    for log in &outcome.epochs {
        match &log.holdout {
            Some(h) => println!(
                "epoch {}: loss {:.6}, holdout precision {:.4} recall {:.4} fscore {:.4}",
                log.epoch, log.mean_loss, h.precision, h.recall, h.fscore
            ),
            None => println!("epoch {}: loss {:.6}", log.epoch, log.mean_loss),
        }
    }
    if let (Some(first), Some(last)) = (outcome.step_losses.first(), outcome.step_losses.last()) {
        println!(
            "{} steps, first loss {:.6}, last loss {:.6}",
            outcome.step_losses.len(),
            first,
            last
        );
    }
    if let Some(log_path) = &args.log {
        let mut csv = String::from("epoch,mean_loss,precision,recall,fscore\n");
        for log in &outcome.epochs {
            let (p, r, f) = log.holdout.map_or((String::new(), String::new(), String::new()), |h| {
                (h.precision.to_string(), h.recall.to_string(), h.fscore.to_string())
            });
            csv.push_str(&format!("{},{},{},{},{}\n", log.epoch, log.mean_loss, p, r, f));
        }
        fs::write(log_path, csv).map_err(|e| Error::IoAt {
            path: log_path.clone(),
            source: e,
        })?;
        println!("wrote {}", show(log_path));
    }
    let ckpt = outcome.net.to_checkpoint(Some(outcome.adam.snapshot()));
    ckpt.save(&args.out)?;
    println!("wrote {}", show(&args.out));
    Ok(())
}

fn cmd_infer(args: InferArgs) -> Result<()> {
    print_config(
        "infer",
        &[
            ("ckpt", show(&args.ckpt)),
            ("left", show(&args.left)),
            ("right", show(&args.right)),
            ("tau", args.tau.to_string()),
            ("out_prefix", show(&args.out_prefix)),
        ],
    );
    let (net, _) = Network32::from_checkpoint(&Checkpoint::load(&args.ckpt)?)?;
    println!(
        "loaded {} (variant {}, channel scale {})",
        show(&args.ckpt),
        net.variant(),
        net.channel_scale()
    );
    let left = ColorImage::load_png(&args.left)?;
    let right = ColorImage::load_png(&args.right)?;
    let pred = net.forward(&left, &right)?;
    let (occ_left, occ_right) = pred.occlusion(args.tau as f32);

    let out = |suffix: &str| -> PathBuf {
        let mut s = args.out_prefix.as_os_str().to_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    let write_prob = |grid: &Grid32, view: View, path: &Path| -> Result<()> {
        write_pfm_path(&symmnet::lrc::DisparityMap::new(view, grid.clone())?, path)?;
        println!("wrote {}", show(path));
        Ok(())
    };
    write_prob(&pred.p_left, View::Left, &out("_left_prob.pfm"))?;
    save_mask(&occ_left, &out("_left_occ.png"))?;
    println!(
        "wrote {} ({} occluded px)",
        show(&out("_left_occ.png")),
        occ_left.occluded_count()
    );
    if let Some(p_right) = &pred.p_right {
        write_prob(p_right, View::Right, &out("_right_prob.pfm"))?;
        let occ_right = occ_right.expect("right mask accompanies right probabilities");
        save_mask(&occ_right, &out("_right_occ.png"))?;
        println!(
            "wrote {} ({} occluded px)",
            show(&out("_right_occ.png")),
            occ_right.occluded_count()
        );
    }
    if let Some((disp_left, disp_right)) = &pred.disparity {
        write_pfm_path(disp_left, &out("_left_disp.pfm"))?;
        write_pfm_path(disp_right, &out("_right_disp.pfm"))?;
        println!(
            "wrote {} and {}",
            show(&out("_left_disp.pfm")),
            show(&out("_right_disp.pfm"))
        );
    }
    Ok(())
}

/// Paints the confusion overlay: cyan = true positive, magenta = false
/// negative, yellow = false positive, black = true negative. The colored
/// pixel counts equal the metric counts by construction.
fn overlay_image(pred: &OcclusionMap, gt: &OcclusionMap) -> ColorImage {
    ColorImage::from_fn(gt.width(), gt.height(), |x, y| {
        match (pred.grid.get(x, y), gt.grid.get(x, y)) {
            (true, true) => [0, 255, 255],
            (false, true) => [255, 0, 255],
            (true, false) => [255, 255, 0],
            (false, false) => [0, 0, 0],
        }
    })
}

fn print_metrics_row(label: &str, m: &Metrics) {
    println!(
        "{label:<28} tp {:>8} fp {:>8} fn {:>8} precision {:.4} recall {:.4} fscore {:.4}",
        m.counts.tp, m.counts.fp, m.counts.fn_, m.precision, m.recall, m.fscore
    );
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    print_config(
        "eval",
        &[
            ("pred", show(&args.pred)),
            ("gt", show(&args.gt)),
            ("overlay", opt(&args.overlay.as_ref().map(|p| show(p)))),
            ("overlay_dir", opt(&args.overlay_dir.as_ref().map(|p| show(p)))),
        ],
    );
    // Pair up mask files: two files directly, or two directories matched by
    // file name.
    let pairs: Vec<(String, PathBuf, PathBuf)> = if args.pred.is_dir() && args.gt.is_dir() {
        let mut names: Vec<String> = fs::read_dir(&args.gt)
            .map_err(|e| Error::IoAt {
                path: args.gt.clone(),
                source: e,
            })?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.ends_with(".png") && args.pred.join(n).is_file())
            .collect();
        names.sort();
        names
            .into_iter()
            .map(|n| (n.clone(), args.pred.join(&n), args.gt.join(&n)))
            .collect()
    } else {
        let name = args
            .gt
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "mask".into());
        vec![(name, args.pred.clone(), args.gt.clone())]
    };
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut maps = Vec::with_capacity(pairs.len());
    for (name, pred_path, gt_path) in &pairs {
        let pred = load_mask(pred_path, View::Left)?;
        let gt = load_mask(gt_path, View::Left)?;
        maps.push((name.clone(), pred, gt));
    }
    let refs: Vec<(&OcclusionMap, &OcclusionMap)> =
        maps.iter().map(|(_, p, g)| (p, g)).collect();
    let agg = aggregate(&refs)?;

    for ((name, _, _), m) in maps.iter().zip(&agg.per_map) {
        print_metrics_row(name, m);
    }
    print_metrics_row("micro", &agg.micro);
    println!(
        "{:<28} precision {:.4} recall {:.4} fscore {:.4}",
        "macro", agg.macro_precision, agg.macro_recall, agg.macro_fscore
    );
    let mut stdout = std::io::stdout();
    write_metrics_kv("micro", &agg.micro, &mut stdout)?;
    writeln!(stdout, "macro.precision={}", agg.macro_precision)?;
    writeln!(stdout, "macro.recall={}", agg.macro_recall)?;
    writeln!(stdout, "macro.fscore={}", agg.macro_fscore)?;

    if let Some(dir) = &args.overlay_dir {
        fs::create_dir_all(dir).map_err(|e| Error::IoAt {
            path: dir.clone(),
            source: e,
        })?;
        for (name, pred, gt) in &maps {
            let path = dir.join(name);
            overlay_image(pred, gt).save_png(&path)?;
            println!("wrote {}", show(&path));
        }
    }
    if let Some(path) = &args.overlay {
        if maps.len() != 1 {
            return Err(Error::config(
                "--overlay expects a single mask pair; use --overlay-dir for directories",
            ));
        }
        overlay_image(&maps[0].1, &maps[0].2).save_png(path)?;
        println!("wrote {}", show(path));
    }
    Ok(())
}

fn cmd_pr_curve(args: PrCurveArgs) -> Result<()> {
    let data = data_root(args.data.clone())?;
    print_config(
        "pr-curve",
        &[
            ("ckpt", show(&args.ckpt)),
            ("data", show(&data)),
            ("out", show(&args.out)),
        ]
        .into_iter()
        .chain(args.gt.entries())
        .collect::<Vec<_>>(),
    );
    let (net, _) = Network32::from_checkpoint(&Checkpoint::load(&args.ckpt)?)?;
    let samples = load_dataset(&data)?;
    let gt_cfg = args.gt.config();

    // Per sample: center-crop to a network-compatible window, regenerate
    // ground truth, and collect (probability, truth) for every predicted view.
    let mut per_sample: Vec<Vec<(Grid32, OcclusionMap)>> = Vec::new();
    for s in &samples {
        let cropped = crop_with_gt(s, center_crop_rect(s.width(), s.height())?, &gt_cfg)?;
        let pred = net.forward(&cropped.left_image, &cropped.right_image)?;
        let mut frames = vec![(
            pred.p_left.clone(),
            cropped.occ(View::Left)?.clone(),
        )];
        if let Some(p_right) = &pred.p_right {
            frames.push((p_right.clone(), cropped.occ(View::Right)?.clone()));
        }
        per_sample.push(frames);
    }
    let pooled: Vec<(&Grid32, &OcclusionMap)> = per_sample
        .iter()
        .flatten()
        .map(|(p, g)| (p, g))
        .collect();
    let taus = symmnet::metrics::default_tau_grid::<f32>();
    let curve = pr_curve(&pooled, &taus)?;

    let mut buf = Vec::new();
    write_pr_csv(&curve, &mut buf)?;
    fs::write(&args.out, buf).map_err(|e| Error::IoAt {
        path: args.out.clone(),
        source: e,
    })?;
    println!("wrote {} ({} thresholds)", show(&args.out), curve.len());

    if let Some(best) = max_f_point(&curve) {
        println!(
            "max fscore {:.4} at tau {:.2} (precision {:.4}, recall {:.4})",
            best.fscore, best.tau, best.precision, best.recall
        );
    }
    // Oracle/global protocol with each sample as its own sequence.
    let seq_refs: Vec<Vec<(&Grid32, &OcclusionMap)>> = per_sample
        .iter()
        .map(|frames| frames.iter().map(|(p, g)| (p, g)).collect())
        .collect();
    let seqs: Vec<&[(&Grid32, &OcclusionMap)]> = seq_refs.iter().map(|v| v.as_slice()).collect();
    let (oracle, global) = oracle_global_f(&seqs)?;
    println!("oracle_f={oracle}");
    println!("global_f={global}");
    Ok(())
}
