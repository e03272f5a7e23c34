use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use clickadapt::adapt::AdaptationConfig;
use clickadapt::neuro::Checkpoint;
use clickadapt_service::{parse_resolution, serve, ServiceConfig};

/// Live annotation server with online decoder adaptation.
#[derive(Parser, Debug)]
#[command(name = "clickadapt-server", version)]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Decoder checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Default adaptation config (key = value file).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Working resolution, HxW.
    #[arg(long, value_parser = parse_resolution, default_value = "128x128")]
    working_resolution: (usize, usize),
    /// Idle seconds before a session is rejected and dropped.
    #[arg(long, default_value_t = 900)]
    idle_timeout: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let checkpoint = match Checkpoint::load(&args.checkpoint) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let adaptation = match &args.config {
        None => AdaptationConfig::baseline(),
        Some(path) => match std::fs::read_to_string(path)
            .map_err(clickadapt::Error::from)
            .and_then(|t| AdaptationConfig::parse(&t))
        {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
    };
    let config = ServiceConfig {
        checkpoint,
        checkpoint_path: Some(args.checkpoint),
        adaptation,
        resolution: Some(args.working_resolution),
        idle_timeout: Duration::from_secs(args.idle_timeout),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.listen).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        serve(listener, config).await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
