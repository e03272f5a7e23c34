//! `clickadapt` command-line entry points.
//!
//! Exit codes: 0 on success, 2 on usage, configuration, input or I/O
//! errors, 1 on internal errors.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use clickadapt::adapt::{AdaptationConfig, ClickAdaptation, ResultMaskMode};
use clickadapt::data::{load_manifest_at, synth_dataset, Family};
use clickadapt::neuro::Checkpoint;
use clickadapt::pretrain::{pretrain_with_progress, PretrainOptions};
use clickadapt::seeds::sub_seed;
use clickadapt::session::{run_benchmark, BenchmarkOptions, ResultCorruption};
use clickadapt::Error;
use clickadapt_service::{parse_resolution, ServiceConfig};

#[derive(Parser, Debug)]
#[command(name = "clickadapt", version, about = "Interactive segmentation with online decoder adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the simulated-user benchmark over a manifest.
    Bench(BenchArgs),
    /// Pretrain a decoder on a synthetic family and write a checkpoint.
    Pretrain(PretrainArgs),
    /// Write a synthetic dataset and its manifest to disk.
    Synth(SynthArgs),
    /// Serve the annotation API.
    Serve(ServeArgs),
    /// Print checkpoint metadata.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Adaptation config file; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ca: Option<ClickAdaptation>,
    #[arg(long)]
    rm: Option<ResultMaskMode>,
    /// Click-mask labels at the end of each image: on or off.
    #[arg(long, value_parser = parse_toggle)]
    cm: Option<bool>,
    /// Erosion iterations applied to result masks.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Report path (JSON).
    #[arg(long)]
    output: PathBuf,
    /// Click budget n.
    #[arg(long, default_value_t = 20)]
    budget: usize,
    /// IoU threshold T.
    #[arg(long, default_value_t = 0.85)]
    threshold: f64,
    /// Resample every image to HxW instead of the manifest resolution.
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<(usize, usize)>,
    /// Master seed the checkpoint was produced with; recorded with its
    /// sub-seeds and checked against the checkpoint.
    #[arg(long)]
    seed: Option<u64>,
    /// Dilate result masks by this many iterations before adaptation.
    #[arg(long)]
    dilate_results: Option<usize>,
    /// Write every final decoder as `<name>.ckpt` into this directory.
    #[arg(long)]
    save_decoders: Option<PathBuf>,
    /// Disable the parallel path for non-adapting configs.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    #[arg(long, default_value = "a")]
    family: Family,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_resolution, default_value = "128x128")]
    resolution: (usize, usize),
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    pool: Option<usize>,
    /// Decoder hidden width.
    #[arg(long)]
    hidden: Option<usize>,
    /// Random convolution channels in the image encoder.
    #[arg(long)]
    kernels: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_resolution, default_value = "128x128")]
    resolution: (usize, usize),
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_resolution, default_value = "128x128")]
    working_resolution: (usize, usize),
    /// Idle seconds before a session is rejected and dropped.
    #[arg(long, default_value_t = 900)]
    idle_timeout: u64,
}

#[derive(Args, Debug)]
struct InspectArgs {
    checkpoint: PathBuf,
    #[arg(long)]
    json: bool,
}

fn parse_toggle(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

enum Failure {
    Usage(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::StaleCache
            | Error::ShapeMismatch { .. }
            | Error::NoSnapshot
            | Error::NoMisclassifiedPixels
            | Error::EmptyLabel
            | Error::MixedBudgets
            | Error::InvalidGrid(_)
            | Error::DimensionMismatch { .. } => Failure::Internal(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(a) => bench(a),
        Command::Pretrain(a) => pretrain(a),
        Command::Synth(a) => synth(a),
        Command::Serve(a) => serve(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(1)
        }
    }
}

fn read_config(path: &Path) -> Result<AdaptationConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    AdaptationConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CmdResult {
    std::fs::write(path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn bench(a: BenchArgs) -> CmdResult {
    let mut config = match &a.config {
        Some(p) => read_config(p)?,
        None => AdaptationConfig::baseline(),
    };
    if let Some(ca) = a.ca {
        config.click_adaptation = ca;
    }
    if let Some(rm) = a.rm {
        config.result_mask = rm;
    }
    if let Some(cm) = a.cm {
        config.click_mask = cm;
    }
    if let Some(k) = a.k {
        config.erosion_iters = k;
    }
    if let Some(lr) = a.lr {
        config.learning_rate = lr;
    }
    config.validate()?;
    if !(a.threshold > 0.0 && a.threshold <= 1.0) || a.budget == 0 {
        return Err(Failure::Usage("budget must be positive and threshold in (0, 1]".into()));
    }

    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let mut seeds = BTreeMap::new();
    if let Some(master) = a.seed {
        let feature = sub_seed(master, "feature");
        if feature != checkpoint.surrogate.features.seed {
            return Err(Failure::Usage(format!(
                "{} was not produced with seed {master}",
                a.checkpoint.display()
            )));
        }
        seeds.insert("master".to_string(), master);
        for name in ["init", "synth", "train"] {
            seeds.insert(name.to_string(), sub_seed(master, name));
        }
    }
    let (_, dataset) = load_manifest_at(&a.manifest, a.resolution)?;
    let options = BenchmarkOptions {
        budget: a.budget,
        threshold: a.threshold,
        result_corruption: a.dilate_results.map_or(ResultCorruption::None, ResultCorruption::Dilate),
        seeds,
        parallel: !a.sequential,
    };
    let (report, registry) = run_benchmark(&dataset, &config, &checkpoint, &options)?;
    write_file(&a.output, report.to_json())?;
    if let Some(dir) = &a.save_decoders {
        std::fs::create_dir_all(dir).map_err(Error::Io)?;
        for name in registry.names() {
            let ck = Checkpoint {
                surrogate: checkpoint.surrogate,
                decoder: registry.get(name)?.clone(),
            };
            ck.save(dir.join(format!("{name}.ckpt")))?;
        }
    }
    println!("{}", report.summary_line());
    Ok(())
}

fn pretrain(a: PretrainArgs) -> CmdResult {
    let d = PretrainOptions::default();
    let options = PretrainOptions {
        family: a.family,
        steps: a.steps,
        seed: a.seed,
        resolution: a.resolution,
        pool: a.pool.unwrap_or(d.pool),
        batch: a.batch.unwrap_or(d.batch),
        learning_rate: a.lr.unwrap_or(d.learning_rate),
        max_clicks: d.max_clicks,
        hidden: a.hidden.unwrap_or(d.hidden),
        random_kernels: a.kernels.unwrap_or(d.random_kernels),
        sigma: d.sigma,
    };
    options.validate()?;
    if !a.quiet {
        eprintln!(
            "seeds: master {} feature {} init {} synth {} train {}",
            options.seed,
            options.feature_seed(),
            options.init_seed(),
            options.synth_seed(),
            options.train_seed()
        );
    }
    let every = (options.steps / 10).max(1);
    let quiet = a.quiet;
    let ck = pretrain_with_progress(&options, |step, loss| {
        if !quiet && (step + 1) % every == 0 {
            eprintln!("step {:>6}  loss {loss:.5}", step + 1);
        }
    })?;
    write_file(&a.output, ck.to_bytes())?;
    println!("wrote {} (steps {}, crc32 {:08x})", a.output.display(), ck.decoder.step_count(), ck.digest());
    Ok(())
}

fn synth(a: SynthArgs) -> CmdResult {
    if a.count == 0 {
        return Err(Failure::Usage("count must be positive".into()));
    }
    let dataset = synth_dataset(a.family, a.count, a.seed, a.resolution);
    let manifest = dataset.write_to(&a.output)?;
    println!("wrote {} samples, manifest {}", dataset.len(), manifest.display());
    Ok(())
}

fn serve(a: ServeArgs) -> CmdResult {
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let adaptation = match &a.config {
        Some(p) => read_config(p)?,
        None => AdaptationConfig::baseline(),
    };
    let config = ServiceConfig {
        checkpoint,
        checkpoint_path: Some(a.checkpoint),
        adaptation,
        resolution: Some(a.working_resolution),
        idle_timeout: Duration::from_secs(a.idle_timeout),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(e.to_string()))?;
    runtime
        .block_on(async move {
            let listener = tokio::net::TcpListener::bind(a.listen).await?;
            eprintln!("listening on {}", listener.local_addr()?);
            clickadapt_service::serve(listener, config).await
        })
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn inspect(a: InspectArgs) -> CmdResult {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let d = &ck.decoder;
    let f = &ck.surrogate.features;
    if a.json {
        let v = serde_json::json!({
            "path": a.checkpoint,
            "feature_channels": d.feature_channels(),
            "hidden": d.hidden(),
            "random_kernels": f.random_kernels,
            "feature_seed": f.seed,
            "sigma": ck.surrogate.prompt.sigma,
            "parameters": d.parameter_count(),
            "step_count": d.step_count(),
            "crc32": format!("{:08x}", ck.digest()),
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
    } else {
        println!("path            {}", a.checkpoint.display());
        println!("shape           F={} C_h={}", d.feature_channels(), d.hidden());
        println!("random kernels  {}", f.random_kernels);
        println!("feature seed    {}", f.seed);
        println!("sigma           {}", ck.surrogate.prompt.sigma);
        println!("parameters      {}", d.parameter_count());
        println!("step count      {}", d.step_count());
        println!("crc32           {:08x}", ck.digest());
    }
    Ok(())
}
