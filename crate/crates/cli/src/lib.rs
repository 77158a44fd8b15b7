//! The `dalia` command line: discover, plan, run, and the two servers.

pub mod config;
pub mod render;
pub mod session;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dalia_core::{DiscoveryError, Goal, Intent, Outcome, PlanError, SlotName};
use dalia_wire::{
    serve_stdio, serve_tcp, CapabilityServer, DirectoryService, ServeError, ServerConfig,
};
use serde_json::Value;

use crate::config::{OrchestratorConfig, OutputFormat};
use crate::session::Session;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DISCOVERY: i32 = 2;
pub const EXIT_PLANNING: i32 = 3;
pub const EXIT_EXECUTION: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "dalia",
    version,
    about = "Discover capabilities, plan task graphs, and run them"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Query every endpoint and print the sealed context.
    Discover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 0.., value_name = "SLOT=VALUE")]
        inputs: Vec<String>,
    },
    /// Discover, then print the task graph for an intent.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        intent: String,
        #[arg(long, num_args = 0.., value_name = "SLOT=VALUE")]
        inputs: Vec<String>,
        #[arg(long)]
        dot: bool,
    },
    /// Discover, plan, and execute; print the trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        intent: String,
        #[arg(long, num_args = 0.., value_name = "SLOT=VALUE")]
        inputs: Vec<String>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Capability server.
    Server {
        #[command(subcommand)]
        action: ServerAction,
    },
    /// Agent directory server.
    Directory {
        #[command(subcommand)]
        action: DirectoryAction,
    },
}

#[derive(Debug, Subcommand)]
enum ServerAction {
    /// Serve on stdio, or on TCP with --tcp.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_name = "ADDR")]
        tcp: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum DirectoryAction {
    /// Serve on stdio, or on TCP with --tcp.
    Serve {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long, value_name = "ADDR")]
        tcp: Option<String>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Discovery(#[from] DiscoveryError),
    #[error("{0}")]
    Bind(#[from] ServeError),
    #[error("{0}")]
    Plan(#[from] PlanError),
    #[error("{0}")]
    Execution(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Discovery(_) | CliError::Bind(_) => EXIT_DISCOVERY,
            CliError::Plan(_) => EXIT_PLANNING,
            CliError::Execution(_) => EXIT_EXECUTION,
        }
    }
}

/// Run the command line and return the process exit code.
///
/// Serve commands talk to the process's real stdin/stdout and block.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

/// Parse `slot=value` pairs into goal bindings; values are opaque strings.
pub fn parse_inputs(pairs: &[String]) -> Result<BTreeMap<SlotName, Value>, CliError> {
    let mut bindings = BTreeMap::new();
    for pair in pairs {
        let (slot, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected slot=value, got {pair:?}")))?;
        let slot: SlotName = slot
            .parse()
            .map_err(|e| CliError::Usage(format!("bad slot name {slot:?}: {e}")))?;
        if bindings
            .insert(slot.clone(), Value::String(value.to_string()))
            .is_some()
        {
            return Err(CliError::Usage(format!("slot {slot} bound twice")));
        }
    }
    Ok(bindings)
}

fn goal(intent: &str, inputs: &[String]) -> Result<Goal, CliError> {
    let intent: Intent = intent
        .parse()
        .map_err(|e| CliError::Usage(format!("bad intent {intent:?}: {e}")))?;
    let mut goal = Goal::new(intent);
    goal.bindings = parse_inputs(inputs)?;
    Ok(goal)
}

fn load(config: &std::path::Path) -> Result<OrchestratorConfig, CliError> {
    OrchestratorConfig::load(config).map_err(CliError::Config)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Execution(format!("cannot write output: {e}")))
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Discover { config, inputs } => {
            let cfg = load(&config)?;
            let provided = parse_inputs(&inputs)?.into_keys().collect();
            let ctx = Session::open(&cfg)?.discover(provided)?;
            emit(out, &render::context(&ctx, cfg.output_format))?;
            Ok(0)
        }
        Command::Plan {
            config,
            intent,
            inputs,
            dot,
        } => {
            let cfg = load(&config)?;
            let goal = goal(&intent, &inputs)?;
            let ctx = Session::open(&cfg)?.discover(goal.bound_slots())?;
            let graph = dalia_core::plan(&goal, &ctx)?;
            let format = if dot {
                OutputFormat::Dot
            } else {
                cfg.output_format
            };
            emit(out, &render::graph(&graph, format))?;
            Ok(0)
        }
        Command::Run {
            config,
            intent,
            inputs,
            trace,
        } => {
            let cfg = load(&config)?;
            let goal = goal(&intent, &inputs)?;
            let mut session = Session::open(&cfg)?;
            let ctx = session.discover(goal.bound_slots())?;
            let (_, result) = session.plan_and_run(&goal, &ctx)?;
            let t = result.map_err(|e| CliError::Execution(e.to_string()))?;
            match &trace {
                Some(path) => std::fs::write(path, t.canonical_json()).map_err(|e| {
                    CliError::Execution(format!("cannot write {}: {e}", path.display()))
                })?,
                None => emit(out, &render::trace(&t, cfg.output_format))?,
            }
            let _ = writeln!(err, "outcome: {}", render::outcome_name(&t));
            Ok(if t.outcome == Outcome::Completed {
                0
            } else {
                EXIT_EXECUTION
            })
        }
        Command::Server {
            action: ServerAction::Serve { config, tcp },
        } => {
            let cfg =
                ServerConfig::from_path(&config).map_err(|e| CliError::Config(e.to_string()))?;
            let server = CapabilityServer::new(cfg).map_err(|e| CliError::Config(e.to_string()))?;
            serve(server.into_router(), tcp, err)
        }
        Command::Directory {
            action: DirectoryAction::Serve { snapshot, tcp },
        } => {
            let service = match &snapshot {
                Some(path) => {
                    DirectoryService::open(path).map_err(|e| CliError::Config(e.to_string()))?
                }
                None => DirectoryService::new(dalia_core::DirectorySnapshot::new("local")),
            };
            serve(service.into_router(), tcp, err)
        }
    }
}

fn serve(
    router: dalia_wire::Router,
    tcp: Option<String>,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    match tcp {
        Some(addr) => {
            let handle = serve_tcp(router, &addr)?;
            let _ = writeln!(err, "listening on {}", handle.local_addr());
            let _ = err.flush();
            handle.wait();
            Ok(0)
        }
        None => {
            serve_stdio(&router).map_err(|e| CliError::Execution(format!("stdio: {e}")))?;
            Ok(0)
        }
    }
}
