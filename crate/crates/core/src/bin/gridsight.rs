use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridsight::augment::{self, AugmentPlan, HueSpec, RotationSpec};
use gridsight::census::{self, Detector};
use gridsight::eval;
use gridsight::geotile::{
    self, DirectoryProvider, FetchParams, HttpProvider, SiteColumns, TileCache, TileIndex, TileProvider,
};
use gridsight::harness::{self, AdapterCommand, RunConfig, StopPolicy, TrainRunResult};
use gridsight::model::{self, ClassList, DatasetManifest, ImageRecord, SplitRatios};
use gridsight::preprocess;
use gridsight::{raster, Error, ExitCode};
use log::{info, warn};

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "tif", "tiff", "bmp"];

#[derive(Parser, Debug)]
#[command(name = "gridsight", version, about = "Substation component mapping toolkit")]
struct Cli {
    /// TOML file whose `[<subcommand>]` table supplies default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assign images to train/val/test and write a manifest.
    Split(SplitArgs),
    /// Auto-orient and letterbox images, reprojecting labels.
    Preprocess(PreprocessArgs),
    /// Expand the training split with rotated and hue-shifted copies.
    Augment(AugmentArgs),
    /// Score prediction files against ground truth.
    Evaluate(EvaluateArgs),
    /// Supervise a trainer adapter with early stopping.
    Train(TrainArgs),
    /// Download one square tile per site through the cache.
    FetchTiles(FetchArgs),
    /// Count detected components per site and nationally.
    Census(CensusArgs),
    /// Compare training results across models and components.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args, Debug)]
struct Common {
    /// Output directory. Nothing is written outside it.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SplitArgs {
    #[command(flatten)]
    common: Common,
    /// Directory of images to split.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.2, 0.1])]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = model::DEFAULT_SEED)]
    seed: u64,
    /// Class names in id order.
    #[arg(long, value_delimiter = ',', default_values_t = default_classes())]
    classes: Vec<String>,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct PreprocessArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: PathBuf,
    /// Label directory, `<stem>.txt` per image, in the displayed orientation.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = preprocess::DEFAULT_TARGET)]
    target: u32,
    #[arg(long, default_value_t = 3)]
    classes_count: usize,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct AugmentArgs {
    #[command(flatten)]
    common: Common,
    /// Manifest produced by `split`.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory the manifest's image paths are relative to.
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Rotation angles in degrees, clockwise positive.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = augment::DEFAULT_ROTATIONS)]
    rotations: Vec<f64>,
    #[arg(long, default_value_t = augment::DEFAULT_MAX_TINT)]
    hue_max: f64,
    #[arg(long, default_value_t = augment::DEFAULT_HUE_COPIES)]
    hue_copies: usize,
    #[arg(long, default_value_t = model::DEFAULT_SEED)]
    seed: u64,
    /// Only write the expanded manifest.
    #[arg(long)]
    manifest_only: bool,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = eval::DEFAULT_IOU_THRESHOLD)]
    iou: f64,
    /// Minimum confidence for the confusion matrix.
    #[arg(long, default_value_t = eval::DEFAULT_CONFUSION_CONF)]
    conf: f64,
    #[arg(long, value_delimiter = ',', default_values_t = default_classes())]
    classes: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Adapter command line. Placeholders: {run_dir} {stop_file} {max_epochs} {model} {component}.
    #[arg(long, required_unless_present = "replay")]
    adapter: Option<String>,
    /// Re-apply the stop policy to a recorded history instead of training.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    model: String,
    #[arg(long)]
    component: String,
    #[arg(long, default_value_t = harness::DEFAULT_MAX_EPOCHS)]
    max_epochs: u32,
    #[arg(long, default_value_t = harness::DEFAULT_PATIENCE)]
    patience: u32,
    #[arg(long, default_value_t = 0.0)]
    min_delta: f64,
    /// Seconds to wait for each epoch record.
    #[arg(long)]
    epoch_timeout: Option<f64>,
    #[arg(long, default_value_t = 600.0)]
    stop_grace: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct FetchArgs {
    #[command(flatten)]
    common: Common,
    /// CSV with site_id, lat and lon columns.
    #[arg(long)]
    sites: PathBuf,
    /// Serve tiles from `<dir>/<site_id>.<ext>`.
    #[arg(long, conflicts_with = "provider_url", required_unless_present = "provider_url")]
    provider_dir: Option<PathBuf>,
    /// Largest edge the directory provider accepts.
    #[arg(long, requires = "provider_dir")]
    provider_max_px: Option<u32>,
    /// URL template with {lat_min} {lat_max} {lon_min} {lon_max} {px} {site_id}.
    #[arg(long)]
    provider_url: Option<String>,
    #[arg(long, default_value = "http")]
    provider_name: String,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    #[arg(long, default_value_t = geotile::DEFAULT_SIDE_M)]
    side: f64,
    #[arg(long, value_delimiter = ',', default_values_t = geotile::DEFAULT_CANDIDATES)]
    candidates: Vec<u32>,
    #[arg(long, default_value = "site_id")]
    id_column: String,
    #[arg(long, default_value = "lat")]
    lat_column: String,
    #[arg(long, default_value = "lon")]
    lon_column: String,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct CensusArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    sites: PathBuf,
    /// Directory of `<site_id>.txt` prediction files.
    #[arg(long, conflicts_with = "detector", required_unless_present = "detector")]
    predictions: Option<PathBuf>,
    /// Detector command line. Placeholders: {image} {output} {site_id}.
    #[arg(long, requires = "tiles")]
    detector: Option<String>,
    /// Output directory of `fetch-tiles`.
    #[arg(long)]
    tiles: Option<PathBuf>,
    #[arg(long, default_value_t = census::DEFAULT_CONF_THRESH)]
    conf: f64,
    #[arg(long, value_delimiter = ',', default_values_t = default_classes())]
    classes: Vec<String>,
    #[arg(long, default_value = "site_id")]
    id_column: String,
    #[arg(long, default_value = "lat")]
    lat_column: String,
    #[arg(long, default_value = "lon")]
    lon_column: String,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Result files or run directories.
    #[arg(long, required = true, num_args = 1..)]
    results: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn default_classes() -> Vec<String> {
    model::CANONICAL_CLASSES.iter().map(|s| s.to_string()).collect()
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match apply_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(ExitCode::Usage as i32);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { ExitCode::Usage } else { ExitCode::Success };
            std::process::exit(code as i32);
        }
    };
    let code = match run(cli.command) {
        Ok(()) => ExitCode::Success,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code as i32);
}

/// Inserts `--key=value` pairs from the config file's table for the chosen
/// subcommand right after the subcommand name. Flags given explicitly on
/// the command line win.
fn apply_config(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut config = None;
    let mut sub_pos = None;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else if sub_pos.is_none() && !a.starts_with('-') {
            sub_pos = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(pos)) = (config, sub_pos) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let table: toml::Table = text.parse().map_err(|e| format!("{}: {e}", path.display()))?;
    let sub = argv[pos].to_string_lossy().into_owned();
    let Some(section) = table.get(&sub) else {
        return Ok(argv);
    };
    let section = section.as_table().ok_or_else(|| format!("{}: `{sub}` must be a table", path.display()))?;
    let explicit = |flag: &str| {
        argv[pos + 1..].iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        })
    };
    let mut extra = Vec::new();
    for (key, value) in section {
        let flag = format!("--{}", key.replace('_', "-"));
        if explicit(&flag) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => extra.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts: Result<Vec<String>, String> = items.iter().map(|v| scalar(key, v)).collect();
                extra.push(format!("{flag}={}", parts?.join(",")));
            }
            v => extra.push(format!("{flag}={}", scalar(key, v)?)),
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend(argv[pos + 1..].iter().cloned());
    Ok(out)
}

fn scalar(key: &str, v: &toml::Value) -> Result<String, String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(n) => Ok(n.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(format!("config key `{key}` has an unsupported value")),
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Split(a) => split(a),
        Command::Preprocess(a) => run_preprocess(a),
        Command::Augment(a) => run_augment(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Train(a) => train(a),
        Command::FetchTiles(a) => fetch_tiles(a),
        Command::Census(a) => run_census(a),
        Command::Report(a) => report(a),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Data(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(io(path))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(io(path))
}

fn class_list(names: &[String]) -> Result<ClassList, Error> {
    Ok(ClassList::from_names(names)?)
}

/// Image files directly under `dir`, sorted by name.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn split(a: SplitArgs) -> Result<(), Error> {
    if a.ratios.len() != 3 {
        return Err(Error::Usage(format!("--ratios takes train,val,test; got {} values", a.ratios.len())));
    }
    let ratios = SplitRatios::new(a.ratios[0], a.ratios[1], a.ratios[2])?;
    let classes = class_list(&a.classes)?;
    let mut records = Vec::new();
    for path in list_images(&a.input)? {
        let (w, h) = image::image_dimensions(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let name = path.file_name().expect("listed file has a name");
        records.push(ImageRecord::new(stem(&path), PathBuf::from(name), w, h));
    }
    let manifest = model::split_dataset(records, classes, ratios, a.seed)?;
    create_dir(&a.common.output)?;
    let out = a.common.output.join("manifest.json");
    manifest.save(&out)?;
    println!(
        "train {}\tval {}\ttest {}\t-> {}",
        manifest.count(model::Split::Train),
        manifest.count(model::Split::Val),
        manifest.count(model::Split::Test),
        out.display()
    );
    Ok(())
}

fn run_preprocess(a: PreprocessArgs) -> Result<(), Error> {
    use rayon::prelude::*;
    let img_out = a.common.output.join("images");
    let lbl_out = a.common.output.join("labels");
    create_dir(&img_out)?;
    if a.labels.is_some() {
        create_dir(&lbl_out)?;
    }
    let images = list_images(&a.input)?;
    let transforms = with_pool(a.jobs, || {
        images
            .par_iter()
            .map(|path| -> Result<(String, preprocess::LetterboxTransform), Error> {
                let (img, code) =
                    raster::load_with_orientation(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
                let oriented = preprocess::auto_orient(&img, preprocess::OrientationTag::new(code)?);
                let (boxed, t) = preprocess::letterbox(&oriented, a.target)?;
                let name = stem(path);
                let dst = img_out.join(format!("{name}.png"));
                boxed.save(&dst).map_err(|e| Error::Data(format!("{}: {e}", dst.display())))?;
                if let Some(dir) = &a.labels {
                    let src = dir.join(format!("{name}.txt"));
                    let ann = if src.exists() { model::read_label_file(&src, a.classes_count)? } else { Vec::new() };
                    let projected = preprocess::project_annotations(&ann, oriented.width(), oriented.height(), &t);
                    let dst = lbl_out.join(format!("{name}.txt"));
                    model::write_label_file(&dst, &projected).map_err(io(&dst))?;
                }
                Ok((name, t))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let map: std::collections::BTreeMap<_, _> = transforms.into_iter().collect();
    let out = a.common.output.join("transforms.json");
    write(&out, &(serde_json::to_string_pretty(&map).expect("transforms serialize") + "\n"))?;
    println!("preprocessed {} images -> {}", map.len(), a.common.output.display());
    Ok(())
}

fn run_augment(a: AugmentArgs) -> Result<(), Error> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let rotations = a.rotations.iter().map(|&d| RotationSpec::new(d)).collect::<Result<Vec<_>, _>>()?;
    let plan =
        AugmentPlan { rotations, hue: HueSpec::new(a.hue_max, a.hue_copies, a.seed)?, applies_to: model::Split::Train };
    let expanded = augment::expand_dataset(&manifest, &plan)?;
    create_dir(&a.common.output)?;
    let out = a.common.output.join("manifest.json");
    expanded.save(&out)?;
    let written = if a.manifest_only {
        0
    } else {
        with_pool(a.jobs, || augment::materialize(&expanded, &a.images, &a.labels, &a.common.output))?
    };
    println!(
        "train {} (was {})\ttotal {}\twritten {written} -> {}",
        expanded.count(model::Split::Train),
        manifest.count(model::Split::Train),
        expanded.records.len(),
        out.display()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let classes = class_list(&a.classes)?;
    let report = eval::evaluate_dirs(&a.gt, &a.pred, &classes, a.iou, a.conf)?;
    create_dir(&a.common.output)?;
    let json = report.to_json();
    let table = report.render_table();
    write(&a.common.output.join("metrics.json"), &json)?;
    write(&a.common.output.join("report.txt"), &table)?;
    match a.format {
        Format::Table => print!("{table}"),
        Format::Json => print!("{json}"),
    }
    Ok(())
}

fn print_result(result: &TrainRunResult, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(result).expect("result serializes")),
        Format::Table => println!(
            "model\tcomponent\tbest_map50\tbest_epoch\tlast_epoch\ttotal_seconds\tstop_reason\n{}\t{}\t{:.4}\t{}\t{}\t{:.2}\t{:?}",
            result.model_name,
            result.component_name,
            result.best_map50,
            result.best_epoch,
            result.last_epoch,
            result.total_seconds,
            result.stop_reason
        ),
    }
}

fn train(a: TrainArgs) -> Result<(), Error> {
    let mut config = RunConfig::new(&a.model, &a.component, &a.common.output);
    config.policy = StopPolicy { max_epochs: a.max_epochs, patience: a.patience, min_delta: a.min_delta };
    config.policy.validate().map_err(Error::Usage)?;
    config.epoch_timeout_secs = a.epoch_timeout;
    config.stop_grace_secs = a.stop_grace;

    let result = if let Some(path) = &a.replay {
        let history = harness::read_history(path)?;
        let result = harness::replay(&history, &config)?;
        create_dir(&a.common.output)?;
        let out = a.common.output.join(harness::RESULT_FILE);
        write(&out, &(serde_json::to_string_pretty(&result).expect("result serializes") + "\n"))?;
        result
    } else {
        let line = a.adapter.as_deref().unwrap_or_default();
        let cmd = AdapterCommand::parse(line).ok_or_else(|| Error::Usage("--adapter is empty".into()))?;
        harness::run_training(&cmd, &config)?
    };
    print_result(&result, a.format);
    Ok(())
}

fn site_columns(id: &str, lat: &str, lon: &str) -> SiteColumns {
    SiteColumns { id: id.into(), lat: lat.into(), lon: lon.into() }
}

fn fetch_tiles(a: FetchArgs) -> Result<(), Error> {
    let load = geotile::load_sites(&a.sites, &site_columns(&a.id_column, &a.lat_column, &a.lon_column))?;
    for r in &load.rejected {
        warn!("sites line {}: {}", r.line, r.reason);
    }
    let provider: Box<dyn TileProvider> = match (&a.provider_dir, &a.provider_url) {
        (Some(dir), _) => {
            let p = DirectoryProvider::new(dir);
            Box::new(match a.provider_max_px {
                Some(n) => p.with_max_px(n),
                None => p,
            })
        }
        (None, Some(url)) => Box::new(
            HttpProvider::new(&a.provider_name, url)
                .and_then(|p| p.with_timeout(Duration::from_secs(a.timeout_secs)))
                .map_err(|e| Error::ExternalService(e.to_string()))?
                .with_env_token(),
        ),
        (None, None) => return Err(Error::Usage("one of --provider-dir or --provider-url is required".into())),
    };
    let params = FetchParams { side_m: a.side, candidates: a.candidates.clone() };
    create_dir(&a.common.output)?;
    let cache = TileCache::new(a.common.output.join("cache"));
    let fetches = geotile::fetch_all(provider.as_ref(), &cache, &load.sites, &params, a.jobs);
    let index = TileIndex::from_fetches(provider.name(), &cache, &a.common.output, &params, &fetches, load.rejected);
    index.save(&a.common.output)?;
    let failed: Vec<_> = fetches.iter().filter(|f| f.outcome.is_err()).collect();
    for f in &failed {
        if let Err(e) = &f.outcome {
            warn!("site `{}`: {e}", f.site_id);
        }
    }
    println!(
        "fetched {} of {} sites -> {}",
        fetches.len() - failed.len(),
        fetches.len(),
        a.common.output.join(TileIndex::FILE_NAME).display()
    );
    if !fetches.is_empty() && failed.len() == fetches.len() {
        return Err(Error::ExternalService("every site failed to fetch".into()));
    }
    Ok(())
}

fn run_census(a: CensusArgs) -> Result<(), Error> {
    let classes = class_list(&a.classes)?;
    let load = geotile::load_sites(&a.sites, &site_columns(&a.id_column, &a.lat_column, &a.lon_column))?;
    for r in &load.rejected {
        warn!("sites line {}: {}", r.line, r.reason);
    }
    let detector = match (&a.predictions, &a.detector) {
        (Some(dir), _) => Detector::Precomputed { dir: dir.clone() },
        (None, Some(line)) => {
            let cmd = AdapterCommand::parse(line).ok_or_else(|| Error::Usage("--detector is empty".into()))?;
            Detector::Command { program: cmd.program, args: cmd.args, work_dir: a.common.output.join("detections") }
        }
        (None, None) => return Err(Error::Usage("one of --predictions or --detector is required".into())),
    };
    let tiles: std::collections::HashMap<String, (PathBuf, u32)> = match &a.tiles {
        Some(dir) => TileIndex::load(dir)?
            .tiles
            .into_iter()
            .filter_map(|t| Some((t.site_id, (dir.join(t.image?), t.px?))))
            .collect(),
        None => Default::default(),
    };
    let result =
        census::run_census(&detector, &load.sites, |s| tiles.get(&s.site_id).cloned(), &classes, a.conf, a.jobs)?;
    let files = census::emit_reports(&result, &load.sites, &a.common.output)?;
    info!("census reports in {}", files.summary.display());
    match a.format {
        Format::Table => print!("{}", result.render_summary()),
        Format::Json => println!("{}", serde_json::to_string_pretty(&result).expect("census serializes")),
    }
    if !load.sites.is_empty() && result.sites_processed == 0 {
        return Err(Error::Census(census::CensusError::AdapterFailed {
            site_id: result.failed_site_ids.first().cloned().unwrap_or_default(),
            reason: "no site produced detections".into(),
        }));
    }
    Ok(())
}

fn load_result(path: &Path) -> Result<TrainRunResult, Error> {
    let file = if path.is_dir() { path.join(harness::RESULT_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(io(&file))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", file.display())))
}

fn report(a: ReportArgs) -> Result<(), Error> {
    let results = a.results.iter().map(|p| load_result(p)).collect::<Result<Vec<_>, _>>()?;
    let report = harness::compare(&results)?;
    create_dir(&a.common.output)?;
    let table = report.render_all();
    let json = report.to_json();
    write(&a.common.output.join("report.txt"), &table)?;
    write(&a.common.output.join("report.json"), &json)?;
    match a.format {
        Format::Table => print!("{table}"),
        Format::Json => print!("{json}"),
    }
    Ok(())
}
