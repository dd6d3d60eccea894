use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use blockmind::checkpoint::{self, CheckpointError};
use blockmind::config::RunConfig;
use blockmind::datagen::{generate_dataset, load_split, GenError, Manifest};
use blockmind::engine::{decompose, train, EngineError, CONFIG_FILE};
use blockmind::geom::{load_shape, RectilinearPolygon};
use blockmind::io_util::write_atomic;
use blockmind::mesh::{self, BlockComplex, ExportFormat, Exportable, MeshError};
use blockmind::report;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "blockmind", version, about = "Learned block decomposition of rectilinear shapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON overrides applied to the defaults: a file path or an inline object.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a train/test corpus of random rectilinear shapes.
    Generate {
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train an agent on a generated corpus.
    Train {
        #[arg(long, default_value = "data")]
        data: PathBuf,
        /// Run directory.
        #[arg(long, default_value = "run")]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        eval_every: Option<usize>,
        /// Continue the run in `--out` from its last checkpoint.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Decompose shapes with a trained checkpoint, optionally meshing them.
    Decompose {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Shape files to decompose.
        #[arg(long = "shape")]
        shapes: Vec<PathBuf>,
        /// Dataset directory whose test split is decomposed when no shape is given.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "decompositions")]
        out: PathBuf,
        /// Mapped-mesh size; without a value, a fraction of each model's
        /// bounding-box diagonal.
        #[arg(long, num_args = 0..=1, default_missing_value = "auto")]
        mesh: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Moving-average reward curves of a run.
    Report {
        /// Run directory.
        #[arg(long, default_value = "run")]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = report::DEFAULT_WINDOW)]
        window: usize,
    },
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(src) = &args.config {
        let text = if src.trim_start().starts_with('{') {
            src.clone()
        } else {
            fs::read_to_string(src).with_context(|| format!("reading config {src}"))?
        };
        let overrides: Value = serde_json::from_str(&text).context("parsing config overrides")?;
        cfg = cfg.with_overrides(&overrides).context("applying config overrides")?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.gen.seed = seed;
    }
    Ok(cfg)
}

fn announce(cfg: &impl serde::Serialize) {
    eprintln!(
        "configuration: {}",
        serde_json::to_string(cfg).expect("configuration serializes")
    );
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(out: &Path, train: Option<usize>, test: Option<usize>, args: &ConfigArgs) -> Result<()> {
    let mut cfg = load_config(args)?;
    if let Some(n) = train {
        cfg.gen.train_count = n;
    }
    if let Some(n) = test {
        cfg.gen.test_count = n;
    }
    announce(&cfg.gen);
    let manifest = generate_dataset(&cfg.gen, out)?;
    println!(
        "{} ({} train, {} test)",
        out.join(Manifest::FILE_NAME).display(),
        manifest.train.len(),
        manifest.test.len()
    );
    Ok(())
}

fn cmd_train(
    data: &Path,
    out: &Path,
    episodes: Option<usize>,
    eval_every: Option<usize>,
    resume: bool,
    args: &ConfigArgs,
) -> Result<()> {
    let mut cfg = load_config(args)?;
    if let Some(n) = episodes {
        cfg.episodes = n;
    }
    if let Some(n) = eval_every {
        cfg.eval_every = n;
    }
    if !resume && out.join(CONFIG_FILE).exists() {
        bail!("{} already holds a run; pass --resume or choose another --out", out.display());
    }
    announce(&cfg);
    let summary = train(data, out, &cfg, resume)?;
    println!("{}", summary.checkpoint.display());
    if let Some(row) = summary.last_eval {
        println!(
            "episode {}: eval mean reward {:.4}, complete {:.1}%",
            row.episode,
            row.mean_reward,
            100.0 * row.complete_fraction
        );
    }
    Ok(())
}

fn mesh_size(arg: &str, model: &RectilinearPolygon, cfg: &RunConfig) -> Result<f64> {
    if arg == "auto" {
        return Ok(cfg.mesh_size_factor * model.bbox().diagonal());
    }
    arg.parse::<f64>().with_context(|| format!("invalid mesh size {arg:?}"))
}

fn cmd_decompose(
    checkpoint_path: &Path,
    shapes: &[PathBuf],
    data: Option<&Path>,
    out: &Path,
    mesh_arg: Option<&str>,
    args: &ConfigArgs,
) -> Result<()> {
    let mut cfg = load_config(args)?;
    let (header, agent) = checkpoint::load(checkpoint_path)?;
    cfg.sac = header.config.clone();
    let ep_cfg = cfg.episode_config();
    announce(&ep_cfg);

    let models: Vec<RectilinearPolygon> = if !shapes.is_empty() {
        shapes.iter().map(|p| load_shape(p).map_err(anyhow::Error::from)).collect::<Result<_>>()?
    } else if let Some(dir) = data {
        load_split(dir, &Manifest::load(dir)?.test)?
    } else {
        bail!("nothing to decompose: pass --shape or --data");
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    for model in &models {
        let ep = decompose(model, &agent, &ep_cfg)?;
        let file = |suffix: &str| out.join(format!("{}.{suffix}", model.id()));
        let record = serde_json::to_string_pretty(&ep.record())? + "\n";
        write_text(&file("decomposition.json"), &record)?;
        println!(
            "{}: {:?}, {} cuts, {} blocks, reward {:.4}",
            model.id(),
            ep.status,
            ep.cut_log.len(),
            ep.finished_quads.len(),
            ep.total_reward()
        );
        if !ep.is_complete() {
            continue;
        }
        let complex = mesh::imprint_and_merge(&ep)?;
        mesh::write_export(
            &file("decomposition.svg"),
            Exportable::Decomposition(&complex),
            ExportFormat::Svg,
        )?;
        if let Some(arg) = mesh_arg {
            mesh_model(model, &complex, mesh_size(arg, model, &cfg)?, out)?;
        }
    }
    Ok(())
}

fn mesh_model(model: &RectilinearPolygon, complex: &BlockComplex, h: f64, out: &Path) -> Result<()> {
    let quad_mesh = mesh::mapped_mesh(complex, h)?;
    let audit = quad_mesh.audit(model);
    if !audit.is_conforming() {
        return Err(MeshError::Incidence(format!("mesh of {} is not conforming: {audit:?}", model.id())).into());
    }
    for (ext, fmt) in [("mesh.vtk", ExportFormat::Vtk), ("mesh.svg", ExportFormat::Svg), ("mesh.json", ExportFormat::Json)] {
        mesh::write_export(&out.join(format!("{}.{ext}", model.id())), Exportable::Mesh(&quad_mesh), fmt)?;
    }
    println!(
        "{}: mesh h={h:.4}, {} nodes, {} quads",
        model.id(),
        quad_mesh.nodes.len(),
        quad_mesh.quads.len()
    );
    Ok(())
}

fn cmd_report(run: &Path, out: Option<&Path>, window: usize) -> Result<()> {
    if window == 0 {
        bail!("window must be positive");
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| run.join("report"));
    let curves = report::load_curves(run, window)?;
    report::write_report(&curves, &out)?;
    println!("{}", out.join("report.svg").display());
    Ok(())
}

/// Short machine-readable category of a failure.
fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CheckpointError>() {
            return match e {
                CheckpointError::VersionMismatch { .. } => "checkpoint_version_mismatch",
                CheckpointError::Io { .. } => "io",
                _ => "checkpoint",
            };
        }
        if cause.is::<MeshError>() {
            return "mesh";
        }
        if let Some(e) = cause.downcast_ref::<EngineError>() {
            return match e {
                EngineError::Io { .. } => "io",
                EngineError::Config(_) => "config",
                EngineError::Data(_) => "data",
                EngineError::Invariant(_) => "invariant",
                _ => "engine",
            };
        }
        if cause.is::<GenError>() {
            return "data";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<serde_json::Error>() {
            return "config";
        }
    }
    "error"
}

/// The cause chain joined by `: `, skipping causes already quoted by their
/// parent's message.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.is_empty() {
            out = text;
        } else if !out.contains(&text) {
            out = format!("{out}: {text}");
        }
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { out, train, test, cfg } => cmd_generate(&out, train, test, &cfg),
        Command::Train {
            data,
            out,
            episodes,
            eval_every,
            resume,
            cfg,
        } => cmd_train(&data, &out, episodes, eval_every, resume, &cfg),
        Command::Decompose {
            checkpoint,
            shapes,
            data,
            out,
            mesh,
            cfg,
        } => cmd_decompose(&checkpoint, &shapes, data.as_deref(), &out, mesh.as_deref(), &cfg),
        Command::Report { run, out, window } => cmd_report(&run, out.as_deref(), window),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BLOCKMIND_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = json!({"error": error_kind(&err), "message": message(&err)});
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
