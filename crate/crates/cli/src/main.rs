mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use oddforge::ingestion::{
    format_real, parse_csv, parse_openlabel, read_csv_header, read_labeled_csv, write_table, write_table_to,
    ColumnMapping, Strictness,
};
use oddforge::model::{band_index, validate_bands};
use oddforge::validation::{default_grid, pr_sweep, run_monte_carlo, McConfig, Reference, SUMMARY_COLUMNS};
use oddforge::geometry::GroundTruthSpec;
use oddforge::{derive, Dataset, DerivationConfig, DistanceMode, KernelConfig, KernelOdd};

use config::{FileConfig, InputFormat, List, MapSetting};

const QUERY_COLUMNS: [&str; 3] = ["affinity", "inside", "band"];
const PR_COLUMNS: [&str; 4] = ["threshold", "precision", "recall", "degenerate"];

/// Derive, query and validate kernel-based operational design domains.
#[derive(Parser)]
#[command(name = "oddforge", version, about)]
struct Cli {
    /// JSON file with defaults for any flag (keys use underscores).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model from labeled samples.
    Derive(DeriveArgs),
    /// Score points against a model.
    Query(QueryArgs),
    /// Monte-Carlo comparison against a ground-truth ODD and its hull.
    ValidateMc(ValidateArgs),
    /// Precision-recall sweep of a model against labeled data.
    PrCurve(PrArgs),
    /// Print model metadata.
    Info(InfoArgs),
}

#[derive(Args)]
struct KernelArgs {
    /// Upper sigma bound.
    #[arg(long)]
    kappa: Option<f64>,
    /// Decay rate of sigma with nearest-neighbour distance.
    #[arg(long)]
    eta: Option<f64>,
    /// Lower sigma bound.
    #[arg(long)]
    lambda: Option<f64>,
    /// Maximum affinity allowed at OOD samples. Required.
    #[arg(long)]
    xi: Option<f64>,
    /// Membership threshold.
    #[arg(long)]
    zeta: Option<f64>,
    /// Standardize dimensions before computing distances.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    normalize: Option<bool>,
    /// global or per_dimension.
    #[arg(long)]
    distance_mode: Option<DistanceMode>,
    #[arg(long)]
    shrink_factor: Option<f64>,
    #[arg(long)]
    shrink_floor: Option<f64>,
    #[arg(long)]
    max_shrink_iters: Option<usize>,
    #[arg(long)]
    max_passes: Option<usize>,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Mapping JSON file, or comma-separated dimension columns.
    #[arg(long)]
    map: Option<MapSetting>,
    /// Skip OpenLABEL frames that lack a mapped value instead of failing.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    lenient: Option<bool>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// One point, comma-separated.
    #[arg(long, conflicts_with = "input")]
    point: Option<List<f64>>,
    /// CSV of points to score.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    map: Option<MapSetting>,
    /// Increasing band boundaries in [0, 1]; defaults to zeta.
    #[arg(long)]
    bands: Option<List<f64>>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Anchor counts, comma-separated.
    #[arg(long)]
    anchors: Option<List<usize>>,
    /// Number of validation probes.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PrArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// CSV with the model's dimension columns and a label column.
    #[arg(long)]
    labeled_data: Option<PathBuf>,
    #[arg(long)]
    map: Option<MapSetting>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Check the stored dataset digest against this CSV or OpenLABEL file.
    #[arg(long)]
    verify_data: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    #[arg(long)]
    map: Option<MapSetting>,
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing required --{flag} (flag or config key)"))
}

fn derivation_config(k: KernelArgs, file: &FileConfig) -> Result<DerivationConfig> {
    let mut kernel = KernelConfig::new(
        k.kappa.or(file.kappa).unwrap_or(1.0),
        k.eta.or(file.eta).unwrap_or(0.5),
        k.lambda.or(file.lambda).unwrap_or(0.05),
    );
    kernel.normalize = k.normalize.or(file.normalize).unwrap_or(false);
    kernel.distance_mode = k.distance_mode.or(file.distance_mode).unwrap_or_default();
    let mut cfg = DerivationConfig::new(
        kernel,
        k.zeta.or(file.zeta).unwrap_or(0.5),
        required(k.xi.or(file.xi), "xi")?,
    );
    if let Some(v) = k.shrink_factor.or(file.shrink_factor) {
        cfg.shrink_factor = v;
    }
    if let Some(v) = k.shrink_floor.or(file.shrink_floor) {
        cfg.shrink_floor = v;
    }
    if let Some(v) = k.max_shrink_iters.or(file.max_shrink_iters) {
        cfg.max_shrink_iters = v;
    }
    if let Some(v) = k.max_passes.or(file.max_passes) {
        cfg.max_passes = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Explicit mapping, else the model's dimension names, else every non-label CSV column.
fn csv_mapping(map: Option<MapSetting>, model: Option<&KernelOdd>, csv: &Path) -> Result<ColumnMapping> {
    if let Some(m) = map {
        return m.resolve();
    }
    if let Some(names) = model.and_then(|m| m.metadata().dimension_names.clone()) {
        return Ok(ColumnMapping::new(names));
    }
    let header = read_csv_header(csv).with_context(|| format!("reading {}", csv.display()))?;
    let mapping = ColumnMapping::infer(&header);
    mapping.validate()?;
    Ok(mapping)
}

fn load_dataset(path: &Path, format: InputFormat, map: Option<MapSetting>, lenient: bool) -> Result<Dataset> {
    let ctx = || format!("reading {}", path.display());
    match format {
        InputFormat::Csv => {
            let mapping = csv_mapping(map, None, path)?;
            Ok(parse_csv(path, &mapping).with_context(ctx)?)
        }
        InputFormat::Openlabel => {
            let mapping = required(map, "map")?.resolve()?;
            let strictness = if lenient { Strictness::Lenient } else { Strictness::Strict };
            let import = parse_openlabel(path, &mapping, strictness).with_context(ctx)?;
            for frame in &import.skipped_frames {
                eprintln!("warning: skipped frame {frame}");
            }
            Ok(import.dataset)
        }
    }
}

fn load_model(path: &Path) -> Result<KernelOdd> {
    KernelOdd::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn emit(rows: &[Vec<String>], columns: &[&str], output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => write_table(rows, columns, p).with_context(|| format!("writing {}", p.display()))?,
        None => write_table_to(rows, columns, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_derive(a: DeriveArgs, file: FileConfig) -> Result<()> {
    let input = required(a.input.or(file.input.clone()), "input")?;
    let output = required(a.output.or(file.output.clone()), "output")?;
    let format = a.format.or(file.format).unwrap_or(InputFormat::Csv);
    let lenient = a.lenient.or(file.lenient).unwrap_or(false);
    let cfg = derivation_config(a.kernel, &file)?;
    let ds = load_dataset(&input, format, a.map.or(file.map), lenient)?;
    let (model, report) = derive(&ds, &cfg)?;
    model.save(&output).with_context(|| format!("writing {}", output.display()))?;
    println!("anchors: {}", report.n_anchors);
    println!("ood samples: {}", report.n_ood);
    println!("adjustments: {}", report.adjustments.len());
    println!("passes: {}", report.passes_used);
    println!("model: {}", output.display());
    Ok(())
}

fn cmd_query(a: QueryArgs, file: FileConfig) -> Result<()> {
    let model = load_model(&required(a.model.or(file.model), "model")?)?;
    let bands = a.bands.or(file.bands).map_or_else(|| vec![model.zeta()], |b| b.0);
    validate_bands(&bands)?;
    let points = match (a.point.or(file.point), a.input.or(file.input)) {
        (Some(p), None) => vec![p.0],
        (None, Some(path)) => {
            let mapping = csv_mapping(a.map.or(file.map), Some(&model), &path)?;
            oddforge::ingestion::read_points_csv(&path, &mapping.dimension_columns)
                .with_context(|| format!("reading {}", path.display()))?
        }
        (Some(_), Some(_)) => bail!("give either --point or --input, not both"),
        (None, None) => bail!("missing required --point or --input"),
    };
    let rows = model
        .score_batch(&points)?
        .into_iter()
        .map(|m| {
            vec![
                format_real(m.affinity),
                m.inside.to_string(),
                band_index(m.affinity, &bands).to_string(),
            ]
        })
        .collect::<Vec<_>>();
    emit(&rows, &QUERY_COLUMNS, a.output.or(file.output).as_deref())
}

fn cmd_validate(a: ValidateArgs, file: FileConfig) -> Result<()> {
    let spec_path = required(a.spec.or(file.spec.clone()), "spec")?;
    let out_dir = required(a.output_dir.or(file.output_dir.clone()), "output-dir")?;
    let spec = GroundTruthSpec::load(&spec_path).with_context(|| format!("loading spec {}", spec_path.display()))?;
    let anchors = a.anchors.or(file.anchors.clone()).map_or_else(|| vec![10, 100, 1000], |l| l.0);
    let samples = a.samples.or(file.samples).unwrap_or(20_000);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let cfg = McConfig::from_spec(&spec, anchors, samples, seed, derivation_config(a.kernel, &file)?)?;
    let result = run_monte_carlo(&cfg)?;
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    result.write_csv(&out_dir).with_context(|| format!("writing into {}", out_dir.display()))?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "{:>12}  {:>12}  {:>12}", SUMMARY_COLUMNS[0], SUMMARY_COLUMNS[1], SUMMARY_COLUMNS[2])?;
    for row in result.summary_rows() {
        let cell = |s: &str| s.parse::<f64>().map_or_else(|_| "undefined".to_string(), |v| format!("{v:.4}"));
        writeln!(out, "{:>12}  {:>12}  {:>12}", row[0], cell(&row[1]), cell(&row[2]))?;
    }
    writeln!(out, "ground-truth rate: {:.4}", result.truth_rate)?;
    Ok(())
}

fn cmd_pr_curve(a: PrArgs, file: FileConfig) -> Result<()> {
    let model = load_model(&required(a.model.or(file.model), "model")?)?;
    let data = required(a.labeled_data.or(file.labeled_data), "labeled-data")?;
    let mapping = csv_mapping(a.map.or(file.map), Some(&model), &data)?;
    let source = data.display().to_string();
    let reader = std::fs::File::open(&data).with_context(|| format!("reading {source}"))?;
    let rows = read_labeled_csv(reader, &mapping, &source)?;
    let points: Vec<Vec<f64>> = rows.iter().map(|r| r.point.clone()).collect();
    let truth: Vec<bool> = rows.iter().map(|r| !r.ood).collect();
    let curve = pr_sweep(&model.affinities(&points)?, &truth, &default_grid(), Reference::Labels)?;
    let single_class = truth.iter().all(|&t| t) || curve.degenerate_truth;
    if single_class {
        eprintln!("warning: {source} holds a single class; the curve is degenerate");
    }
    let out = curve
        .thresholds
        .iter()
        .zip(&curve.precision)
        .zip(&curve.recall)
        .map(|((t, p), r)| {
            vec![
                format_real(*t),
                p.map(format_real).unwrap_or_default(),
                format_real(*r),
                single_class.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    emit(&out, &PR_COLUMNS, a.output.or(file.output).as_deref())
}

fn cmd_info(a: InfoArgs, file: FileConfig) -> Result<()> {
    let model = load_model(&required(a.model.or(file.model), "model")?)?;
    let meta = model.metadata();
    let c = &meta.config;
    let mut out = std::io::stdout().lock();
    writeln!(out, "format version: {}", meta.format_version)?;
    writeln!(out, "kernel type: {}", meta.kernel_type)?;
    writeln!(out, "dimension: {}", meta.dimension)?;
    if let Some(names) = &meta.dimension_names {
        writeln!(out, "dimension names: {}", names.join(", "))?;
    }
    writeln!(out, "anchors: {}", model.kernels().len())?;
    writeln!(out, "zeta: {}", format_real(model.zeta()))?;
    writeln!(out, "xi: {}", format_real(model.xi()))?;
    writeln!(out, "kappa: {}", format_real(c.kappa))?;
    writeln!(out, "eta: {}", format_real(c.eta))?;
    writeln!(out, "lambda: {}", format_real(c.lambda))?;
    writeln!(out, "distance mode: {}", c.distance_mode)?;
    writeln!(out, "normalized: {}", model.normalizer().is_some())?;
    writeln!(out, "shrink factor: {}", format_real(c.shrink_factor))?;
    writeln!(out, "shrink floor: {}", format_real(c.shrink_floor))?;
    writeln!(out, "max shrink iterations: {}", c.max_shrink_iters)?;
    writeln!(out, "max passes: {}", c.max_passes)?;
    writeln!(out, "dataset digest: {}", meta.dataset_digest)?;
    drop(out);

    if let Some(path) = a.verify_data.or(file.verify_data) {
        let format = a.format.or(file.format).unwrap_or(InputFormat::Csv);
        let map = a.map.or(file.map).or_else(|| meta.dimension_names.clone().map(MapSetting::Columns));
        let ds = load_dataset(&path, format, map, file.lenient.unwrap_or(false))?;
        if model.verify_digest(&ds) {
            println!("digest check: ok");
        } else {
            println!("digest check: MISMATCH");
            eprintln!("warning: {} does not match the model's dataset digest", path.display());
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ODDFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("ODDFORGE_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Derive(a) => cmd_derive(a, file),
        Command::Query(a) => cmd_query(a, file),
        Command::ValidateMc(a) => cmd_validate(a, file),
        Command::PrCurve(a) => cmd_pr_curve(a, file),
        Command::Info(a) => cmd_info(a, file),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let constraint = err
        .chain()
        .filter_map(|e| e.downcast_ref::<oddforge::Error>())
        .any(oddforge::Error::is_constraint_failure);
    if constraint {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
