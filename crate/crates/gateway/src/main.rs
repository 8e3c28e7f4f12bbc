use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use worldgrid::grid::Grid;
use worldgrid_gateway::client::{Backend, Local, Remote};
use worldgrid_gateway::commands::Command;
use worldgrid_gateway::server::{self, GatewayConfig, Mode};
use worldgrid_gateway::{script, ApiError};

#[derive(Debug, Parser)]
#[command(name = "worldgrid", version, about = "Simulated transatlantic grid testbed")]
struct Cli {
    /// Send commands to a running gateway instead of a fresh local simulation.
    #[arg(long, global = true, env = "WORLDGRID_URL")]
    remote: Option<String>,
    #[arg(long, global = true, default_value = "scenarios/worldgrid.scenario")]
    scenario: PathBuf,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    cmd: Top,
}

#[derive(Debug, Subcommand)]
enum Top {
    /// Serve the /v1 HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: std::net::SocketAddr,
        /// Advance the clock by this many virtual seconds per wall second.
        #[arg(long)]
        interactive: Option<f64>,
        /// Brokers offered to clients, default first. Repeatable.
        #[arg(long = "rb")]
        brokers: Vec<String>,
    },
    /// Run a command script against a fresh simulation and write its logs.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Directory for lb.log and events.log.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    #[command(flatten)]
    Cmd(Command),
}

/// `p` as given, else under `dir`.
fn locate(p: &Path, dir: &Path) -> PathBuf {
    if p.exists() || p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn fail(e: &ApiError) -> ExitCode {
    eprintln!("error[{}]: {}", e.code, e.message);
    ExitCode::from(e.exit_code().clamp(1, 255) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Top::Serve { listen, interactive, brokers } => {
            let cfg = GatewayConfig {
                listen,
                scenario: cli.scenario,
                seed: cli.seed,
                mode: interactive.map_or(Mode::Batch, |scale| Mode::Interactive { scale }),
                brokers,
            };
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(server::serve(cfg)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Top::Run { scenario, script: script_path, out } => {
            let scenario = locate(&scenario, Path::new("scenarios"));
            let script_path = locate(&script_path, scenario.parent().unwrap_or(Path::new(".")));
            let res = match script::run(&scenario, cli.seed, &script_path) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            print!("{}", res.outcome.transcript);
            let write = |name: &str, text: &str| {
                std::fs::write(out.join(name), text).map_err(|e| ApiError::new("ScriptError", format!("cannot write {name}: {e}")))
            };
            if let Err(e) = write("lb.log", &res.lb_log).and_then(|_| write("events.log", &res.event_log)) {
                return fail(&e);
            }
            match res.outcome.failed {
                None => ExitCode::SUCCESS,
                Some((line, e)) => {
                    eprintln!("{}:{line}: script stopped", script_path.display());
                    fail(&e)
                }
            }
        }
        Top::Cmd(cmd) => {
            let prepared = match cmd.prepare(Path::new(".")) {
                Ok(p) => p,
                Err(e) => return fail(&e),
            };
            let mut backend: Box<dyn Backend> = match &cli.remote {
                Some(url) => match Remote::new(url) {
                    Ok(r) => Box::new(r),
                    Err(e) => return fail(&e),
                },
                None => match Grid::load(&cli.scenario, cli.seed) {
                    Ok(g) => Box::new(Local::new(g)),
                    Err(e) => return fail(&e.into()),
                },
            };
            match backend.call(prepared.req) {
                Ok(reply) => {
                    print!("{}", reply.body);
                    if let Some(path) = prepared.save_to {
                        if let Err(e) = std::fs::write(&path, &reply.body) {
                            return fail(&ApiError::new("ScriptError", format!("cannot write {}: {e}", path.display())));
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
