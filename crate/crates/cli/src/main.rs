mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use textdet::cemser::ce_mser_detect;
use textdet::eval::{
    evaluate_records, read_records, read_truth_dir, recall_counts, report, write_box_file, write_records,
    DetectionRecord, GroundTruth, Metrics, WordRecord, MATCH_IOU,
};
use textdet::pipeline::{detect_full, DetectConfig};
use textdet::raster::{draw_overlay, BoundingBox, RasterImage};
use textdet::synth::{
    binary_dataset, generate_dataset, load_samples, save_samples, scene_set, SceneConfig, SceneKind, MANIFEST_NAME,
};
use textdet::textcnn::{train_staged, ModelConfig, TextCnnModel};

use config::RunConfig;

const MODEL_FILE: &str = "model.tcnn";
const CURVE_FILE: &str = "curve.tsv";
const DETECTIONS_FILE: &str = "detections.jsonl";
const REPORT_FILE: &str = "report.txt";

#[derive(Parser)]
#[command(
    name = "textdet",
    version,
    about = "Scene text detection with CE-MSER candidates and a multi-task CNN"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "TEXTDET_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render character patches, and optionally binary patches and scenes.
    Synth(SynthArgs),
    /// Train the text CNN with the two-stage schedule.
    Train(TrainArgs),
    /// Detect words in images.
    Detect(DetectArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Easy,
    LowContrast,
    Clutter,
}

impl From<Kind> for SceneKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Easy => SceneKind::Easy,
            Kind::LowContrast => SceneKind::LowContrast,
            Kind::Clutter => SceneKind::Clutter,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Character patches, written to `<out>/chars`.
    #[arg(long)]
    count: Option<usize>,
    /// Text/non-text patches, written to `<out>/binary`.
    #[arg(long)]
    binary_count: Option<usize>,
    /// Test scenes with truth files, written to `<out>/scenes`.
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long, value_enum, default_value = "easy")]
    scene_kind: Kind,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory produced by `synth` with `chars` and `binary` sets.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stage1_iters: Option<usize>,
    #[arg(long)]
    stage2_iters: Option<usize>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Images or directories of images.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Worker threads for image-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write every CE-MSER candidate to `<out>/components/<image>.tsv`.
    #[arg(long)]
    dump_components: bool,
    /// Skip the overlay PNGs.
    #[arg(long)]
    no_overlays: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Truth directory with `gt_<image>.txt` (and optional `chars_<image>.txt`) files.
    #[arg(long)]
    truth: PathBuf,
    /// Detection records, or a truth-style directory to score as predictions.
    #[arg(long, required_unless_present = "ablate")]
    detections: Option<PathBuf>,
    /// Detect with plain MSER and with CE-MSER candidates and report both.
    #[arg(long, requires_all = ["model", "images"])]
    ablate: bool,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cfg.seed(cli.seed);
    match cli.command {
        Command::Synth(a) => synth(&cfg, seed, a),
        Command::Train(a) => train(&cfg, seed, a),
        Command::Detect(a) => detect(&cfg, seed, a),
        Command::Eval(a) => eval(&cfg, seed, a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn synth(cfg: &RunConfig, seed: u64, a: SynthArgs) -> Result<()> {
    create_dir(&a.out)?;
    let mut synth_cfg = cfg.synth(seed);
    if let Some(n) = a.count {
        synth_cfg.count = n;
    }
    let manifest = generate_dataset(&synth_cfg, &a.out.join("chars"))
        .with_context(|| format!("writing characters under {}", a.out.display()))?;
    log::info!("{} character patches -> {}", synth_cfg.count, manifest.display());

    let binary = a.binary_count.or(cfg.synth.binary_count).unwrap_or(0);
    if binary > 0 {
        let manifest = save_samples(&binary_dataset(binary, seed), &a.out.join("binary"))?;
        log::info!("{binary} binary patches -> {}", manifest.display());
    }

    let scenes = a.scenes.or(cfg.synth.scenes).unwrap_or(0);
    if scenes > 0 {
        let dir = a.out.join("scenes");
        let gt = dir.join("gt");
        create_dir(&gt)?;
        for (i, s) in scene_set(&SceneConfig::new(a.scene_kind.into()), scenes, seed)
            .iter()
            .enumerate()
        {
            let id = format!("scene_{i:04}");
            s.image.save_png(dir.join(format!("{id}.png")))?;
            let labels: Vec<String> = s.words.iter().map(|w| w.text.clone()).collect();
            write_box_file(&gt.join(format!("gt_{id}.txt")), &s.word_boxes(), Some(&labels))?;
            write_box_file(&gt.join(format!("chars_{id}.txt")), &s.char_boxes(), None)?;
        }
        log::info!("{scenes} scenes -> {}", dir.display());
    }
    Ok(())
}

fn train(cfg: &RunConfig, seed: u64, a: TrainArgs) -> Result<()> {
    let mut schedule = cfg.schedule();
    if let Some(n) = a.stage1_iters {
        schedule.stage1_iters = n;
    }
    if let Some(n) = a.stage2_iters {
        schedule.stage2_iters = n;
    }
    schedule.validate()?;
    let chars = load_samples(&a.data.join("chars").join(MANIFEST_NAME))
        .with_context(|| format!("loading characters from {}", a.data.display()))?;
    let binary = load_samples(&a.data.join("binary").join(MANIFEST_NAME))
        .with_context(|| format!("loading binary patches from {}", a.data.display()))?;
    create_dir(&a.out)?;

    let mut model = TextCnnModel::new(ModelConfig::default(), seed);
    let report = train_staged(&mut model, &chars, &binary, &schedule, &cfg.train(seed))?;
    let model_path = a.out.join(MODEL_FILE);
    model.save(&model_path)?;
    let curve: String = report.curve.iter().map(|r| format!("{r}\n")).collect();
    let curve_path = a.out.join(CURVE_FILE);
    fs::write(&curve_path, curve).with_context(|| format!("writing {}", curve_path.display()))?;
    log::info!("model -> {}", model_path.display());
    Ok(())
}

fn image_id(path: &Path) -> Result<String> {
    Ok(path
        .file_stem()
        .with_context(|| format!("{} has no file name", path.display()))?
        .to_string_lossy()
        .into_owned())
}

/// Expands directories to their PNG/JPEG files, sorted by name.
fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    ensure!(jobs >= 1, "--jobs must be at least 1");
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

struct ImageResult {
    record: DetectionRecord,
    overlay: RasterImage,
    components: Vec<String>,
}

fn run_detect(
    images: &[PathBuf],
    model: &TextCnnModel,
    dcfg: &DetectConfig,
    jobs: usize,
    dump: bool,
) -> Result<Vec<ImageResult>> {
    pool(jobs)?.install(|| {
        images
            .par_iter()
            .map(|path| {
                let img = RasterImage::load(path)?;
                let found =
                    detect_full(&img, model, dcfg).with_context(|| format!("detecting in {}", path.display()))?;
                let components = if dump {
                    ce_mser_detect(&img, &dcfg.cemser)?
                        .iter()
                        .map(|c| c.dump_line())
                        .collect()
                } else {
                    Vec::new()
                };
                let boxes: Vec<BoundingBox> = found.words.iter().map(|w| w.bbox).collect();
                let scores: Vec<f32> = found.words.iter().map(|w| w.score).collect();
                Ok(ImageResult {
                    record: DetectionRecord::new(image_id(path)?, &found.words),
                    overlay: draw_overlay(&img, &boxes, &scores),
                    components,
                })
            })
            .collect()
    })
}

fn load_model(path: &Path) -> Result<TextCnnModel> {
    TextCnnModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn detect(cfg: &RunConfig, seed: u64, a: DetectArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let images = collect_images(&a.inputs)?;
    ensure!(!images.is_empty(), "no images found");
    let dcfg = cfg.detect(seed);
    let results = run_detect(&images, &model, &dcfg, a.jobs, a.dump_components)?;
    create_dir(&a.out)?;
    if !a.no_overlays {
        create_dir(&a.out.join("overlays"))?;
    }
    if a.dump_components {
        create_dir(&a.out.join("components"))?;
    }
    for r in &results {
        if !a.no_overlays {
            r.overlay
                .save_png(a.out.join("overlays").join(format!("{}.png", r.record.image)))?;
        }
        if a.dump_components {
            let path = a.out.join("components").join(format!("{}.tsv", r.record.image));
            let text: String = r.components.iter().map(|l| format!("{l}\n")).collect();
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    let records: Vec<DetectionRecord> = results.into_iter().map(|r| r.record).collect();
    let path = a.out.join(DETECTIONS_FILE);
    write_records(&path, &records)?;
    log::info!("{} images -> {}", records.len(), path.display());
    Ok(())
}

fn records_from_truth(truth: &GroundTruth) -> Vec<DetectionRecord> {
    truth
        .iter()
        .map(|(id, t)| DetectionRecord {
            image: id.clone(),
            words: t
                .words
                .iter()
                .map(|b| WordRecord {
                    x: b.x,
                    y: b.y,
                    w: b.w,
                    h: b.h,
                    score: 1.0,
                })
                .collect(),
        })
        .collect()
}

fn eval(cfg: &RunConfig, seed: u64, a: EvalArgs) -> Result<()> {
    let truth = read_truth_dir(&a.truth).with_context(|| format!("reading truth from {}", a.truth.display()))?;
    let mut rows: Vec<(String, Metrics)> = Vec::new();
    let mut extra = String::new();

    if let Some(det) = &a.detections {
        let records = if det.is_dir() {
            records_from_truth(&read_truth_dir(det)?)
        } else {
            read_records(det).with_context(|| format!("reading detections {}", det.display()))?
        };
        let counts = evaluate_records(&records, &truth, MATCH_IOU)?;
        rows.push((row_name(det), counts.metrics()));
    }

    if a.ablate {
        let model = load_model(a.model.as_deref().expect("clap enforces --model"))?;
        let images = collect_images(&[a.images.clone().expect("clap enforces --images")])?;
        let ids: Vec<String> = images.iter().map(|p| image_id(p)).collect::<Result<_>>()?;
        let missing: Vec<&String> = ids.iter().filter(|id| !truth.contains_key(*id)).collect();
        if !missing.is_empty() {
            bail!(
                "images without truth: {}",
                missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            );
        }
        for (name, maps) in [("MSERs", false), ("CE-MSERs", true)] {
            let mut dcfg = cfg.detect(seed);
            dcfg.cemser.contrast_maps = maps;
            let results = run_detect(&images, &model, &dcfg, a.jobs, false)?;
            let records: Vec<DetectionRecord> = results.into_iter().map(|r| r.record).collect();
            let subset: GroundTruth = ids.iter().map(|id| (id.clone(), truth[id].clone())).collect();
            rows.push((
                name.to_string(),
                evaluate_records(&records, &subset, MATCH_IOU)?.metrics(),
            ));

            let (mut hit, mut total) = (0, 0);
            for (path, id) in images.iter().zip(&ids) {
                if let Some(chars) = &truth[id].chars {
                    let img = RasterImage::load(path)?;
                    let comps: Vec<BoundingBox> = ce_mser_detect(&img, &dcfg.cemser)?.iter().map(|c| c.bbox).collect();
                    let (h, t) = recall_counts(&comps, chars);
                    hit += h;
                    total += t;
                }
            }
            if total > 0 {
                extra.push_str(&format!(
                    "{name} character recall: {:.3} ({hit}/{total})\n",
                    hit as f64 / total as f64
                ));
            }
        }
    }

    let table = report(&rows) + &extra;
    print!("{table}");
    if let Some(out) = &a.out {
        create_dir(out)?;
        let path = out.join(REPORT_FILE);
        fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn row_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "detections".into(), |s| s.to_string_lossy().into_owned())
}
