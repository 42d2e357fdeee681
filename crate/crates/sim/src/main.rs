use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use macromicro_core::Module;
use macromicro_sim::live::serve_live;
use macromicro_sim::{evaluate, export, run, InitialState, Replay, Scenario, SimConfig, SimError, Trace};

#[derive(Parser)]
#[command(name = "macromicro", version, about = "Macro-micro teleoperation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scripted scenario and write an NDJSON trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Defaults to the built-in configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a trace and print its frames.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Only print the frame count.
        #[arg(long)]
        quiet: bool,
    },
    /// Tracking error of one module over its engaged intervals.
    Evaluate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum)]
        module: ModuleArg,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Flatten a trace into t,source,x,y,z,qw,qx,qy,qz rows.
    Export {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Live mode: servo emulator, engine and WebSocket telemetry.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Use a running emulator instead of starting one.
        #[arg(long)]
        actuator: Option<SocketAddr>,
        /// Take the initial robot state from a scenario file.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModuleArg {
    Macro,
    Micro,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, SimError> {
    path.map_or_else(|| Ok(SimConfig::default()), SimConfig::load)
}

fn load_trace(path: &Path) -> Result<Trace, SimError> {
    Trace::load(path)?.ok_or_else(|| SimError::Report(format!("{} is an empty trace", path.display())))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, SimError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn execute(command: Command) -> Result<(), SimError> {
    match command {
        Command::Run {
            scenario,
            config,
            out,
            seed,
        } => {
            let cfg = load_config(config.as_deref())?;
            let scenario = Scenario::load(&scenario)?;
            let trace = run(&scenario, &cfg, seed)?;
            trace.save(&out)?;
            if let Some(s) = trace.summary {
                eprintln!(
                    "{} ticks, {} frames, {} events -> {}",
                    s.ticks,
                    s.frames,
                    s.events,
                    out.display()
                );
            }
        }
        Command::Replay { trace, quiet } => {
            let file = std::fs::File::open(&trace).map_err(|source| SimError::Io {
                path: trace.display().to_string(),
                source,
            })?;
            let replay = Replay::new(std::io::BufReader::new(file))?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let mut count = 0u64;
            for frame in replay {
                let frame = frame?;
                count += 1;
                if !quiet {
                    let line = serde_json::to_string(&frame).map_err(|e| SimError::Report(e.to_string()))?;
                    let _ = writeln!(out, "{line}");
                }
            }
            eprintln!("{count} frames");
        }
        Command::Evaluate { trace, module, format } => {
            let trace = load_trace(&trace)?;
            let module = match module {
                ModuleArg::Macro => Module::Macro,
                ModuleArg::Micro => Module::Micro,
            };
            let report = evaluate(&trace, module)?;
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&report).map_err(|e| SimError::Report(e.to_string()))?
                ),
                Format::Csv => print!("{}", report.to_csv()),
            }
        }
        Command::Export { trace, csv, json } => {
            if csv.is_none() && json.is_none() {
                return Err(SimError::Report("nothing to export: pass --csv and/or --json".into()));
            }
            let rows = export::rows(&load_trace(&trace)?)?;
            if let Some(path) = csv {
                export::write_csv(&rows, create(&path)?)?;
            }
            if let Some(path) = json {
                let mut w = create(&path)?;
                export::write_json(&rows, &mut w)?;
                w.flush().map_err(|source| SimError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
        Command::Serve {
            config,
            port,
            host,
            actuator,
            scenario,
        } => {
            let cfg = load_config(config.as_deref())?;
            let initial = match scenario {
                Some(p) => Scenario::load(&p)?.initial,
                None => InitialState::default(),
            };
            let handle = serve_live(cfg, initial, (host.as_str(), port), actuator)?;
            eprintln!(
                "telemetry ws://{}  actuators {}",
                handle.telemetry_addr(),
                handle.actuator_addr()
            );
            handle.wait();
            return Err(SimError::Link("engine stopped".into()));
        }
    }
    Ok(())
}
