use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqtrial_core::exec::with_workers;
use seqtrial_service::api::{router, ApiConfig, AppState};
use seqtrial_service::cli::{self, CliError, RegionArg, SimulateArgs};
use seqtrial_service::store::Store;

#[derive(Parser)]
#[command(name = "seqtrial", version, about = "Sequential two-arm Bayesian trial tools")]
struct Args {
    /// Worker threads for replicate fan-out (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trials over a sampling region and write report and tables.
    Simulate {
        #[arg(long)]
        design: PathBuf,
        /// a, b, c, all, unconditional or fixed:θ0,θ1
        #[arg(long, default_value = "all")]
        region: RegionArg,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        no_early_stop: bool,
    },
    /// Estimate false discovery and false futility probabilities.
    Fdp {
        #[arg(long)]
        design: PathBuf,
        #[arg(long, default_value_t = 4000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Predictive value of continuing from the given counts.
    Whatif {
        #[arg(long)]
        design: PathBuf,
        /// n0,s0,n1,s1
        #[arg(long, default_value = "0,0,0,0", value_parser = cli::parse_counts)]
        counts: seqtrial_core::trial_engine::Counts,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        reps: Option<u32>,
    },
    /// Run the monitoring HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory for session logs; memory only if omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Static bearer token required on every request.
        #[arg(long, env = "SEQTRIAL_TOKEN")]
        token: Option<String>,
        #[arg(long, default_value_t = 1000)]
        whatif_cap: u32,
    },
}

fn serve(addr: String, data_dir: Option<PathBuf>, token: Option<String>, whatif_cap: u32) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    let store = match data_dir {
        Some(d) => Store::at(d).map_err(io)?,
        None => Store::memory(),
    };
    let state = AppState::new(
        store,
        ApiConfig {
            token,
            whatif_cap,
            ..ApiConfig::default()
        },
    )
    .map_err(io)?;
    let rt = tokio::runtime::Runtime::new().map_err(io)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(io)?;
        log::info!("listening on {addr}");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(io)
    })
}

fn run(args: Args) -> Result<(), CliError> {
    let workers = args.workers;
    match args.command {
        Command::Simulate {
            design,
            region,
            reps,
            seed,
            out,
            no_early_stop,
        } => {
            let a = SimulateArgs {
                design,
                region,
                reps,
                seed,
                out,
                early_stop: !no_early_stop,
            };
            for p in with_workers(workers, || cli::simulate(&a))? {
                println!("{}", p.display());
            }
        }
        Command::Fdp { design, reps, seed } => {
            print!("{}", with_workers(workers, || cli::fdp(&design, reps, seed))?);
        }
        Command::Whatif {
            design,
            counts,
            seed,
            horizon,
            reps,
        } => {
            print!("{}", with_workers(workers, || cli::whatif(&design, counts, seed, horizon, reps))?);
        }
        Command::Serve {
            addr,
            data_dir,
            token,
            whatif_cap,
        } => serve(addr, data_dir, token, whatif_cap)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
