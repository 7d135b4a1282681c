use clap::{Args, Parser, Subcommand, ValueEnum};
use rotorqc_cli::config::{OutputFormat, Scenario, ScenarioConfig};
use rotorqc_cli::output::write_record;
use rotorqc_cli::presets::{preset_names, preset_text, resolve, PRESET_DIR_ENV};
use rotorqc_cli::record::ResultRecord;
use rotorqc_cli::runner::run_scenario;
use rotorqc_cli::sweep::{run_sweep, SweepOptions};
use rotorqc_cli::{exit, exit_code, preset_exit_code};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rotorqc", version, about = "Simulate rotational-state qubits of trapped molecular ions")]
struct Cli {
    /// Worker threads for Monte Carlo and gate inputs (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a config file or preset name
    Run {
        config: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a sweep, resuming from completion markers
    Sweep {
        config: String,
        #[command(flatten)]
        out: OutArgs,
        /// Recompute points that already have markers
        #[arg(long)]
        fresh: bool,
    },
    /// List presets, or print or export them
    Presets {
        /// Print one preset's JSON
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
        /// Write every preset into a directory
        #[arg(long, value_name = "DIR")]
        export: Option<PathBuf>,
    },
    /// Parse and validate a config without running it
    Validate { config: String },
}

#[derive(Args)]
struct OutArgs {
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

struct Failure(i32, String);

fn load(spec: &str) -> Result<ScenarioConfig, Failure> {
    resolve(spec).map_err(|e| Failure(preset_exit_code(&e), e.to_string()))
}

fn apply(config: &mut ScenarioConfig, args: &OutArgs) -> PathBuf {
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(f) = args.format {
        config.output.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }
    if let Some(dir) = &args.out {
        config.output.dir = dir.to_string_lossy().into_owned();
    }
    PathBuf::from(&config.output.dir)
}

fn finish(mut record: ResultRecord, dir: &Path) -> Result<(), Failure> {
    record.stamp_now();
    let paths = write_record(&record, dir, record.config.output.format)
        .map_err(|e| Failure(exit::IO, format!("cannot write results: {e}")))?;
    for (name, s) in &record.scalars {
        match s.uncertainty {
            Some(u) => println!("{name:<40} {:.9e} ± {u:.2e} {}", s.value, s.unit),
            None => println!("{name:<40} {:.9e} {}", s.value, s.unit),
        }
    }
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure(exit::CONFIG, "--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure(exit::CONFIG, e.to_string()))?;
    }
    match cli.command {
        Command::Run { config, out } => {
            let mut c = load(&config)?;
            let dir = apply(&mut c, &out);
            if let Scenario::Sweep(_) = c.scenario {
                let record = run_sweep(&c, &dir, SweepOptions::default()).map_err(|e| Failure(exit_code(&e), e.to_string()))?;
                return finish(record, &dir);
            }
            let record = run_scenario(&c).map_err(|e| Failure(exit_code(&e), e.to_string()))?;
            finish(record, &dir)
        }
        Command::Sweep { config, out, fresh } => {
            let mut c = load(&config)?;
            let dir = apply(&mut c, &out);
            if !matches!(c.scenario, Scenario::Sweep(_)) {
                return Err(Failure(exit::CONFIG, format!("{config} is a {} scenario, not a sweep", c.scenario.kind())));
            }
            let record = run_sweep(&c, &dir, SweepOptions { fresh }).map_err(|e| Failure(exit_code(&e), e.to_string()))?;
            finish(record, &dir)
        }
        Command::Presets { show, export } => {
            if let Some(name) = show {
                let text = preset_text(&name).map_err(|e| Failure(preset_exit_code(&e), e.to_string()))?;
                print!("{text}");
                return Ok(());
            }
            if let Some(dir) = export {
                for name in preset_names() {
                    let text = preset_text(&name).map_err(|e| Failure(preset_exit_code(&e), e.to_string()))?;
                    let path = dir.join(format!("{name}.json"));
                    rotorqc_cli::output::write_atomic(&path, text.as_bytes())
                        .map_err(|e| Failure(exit::IO, format!("{}: {e}", path.display())))?;
                    println!("wrote {}", path.display());
                }
                return Ok(());
            }
            for name in preset_names() {
                let summary = match resolve_preset_summary(&name) {
                    Ok(s) => s,
                    Err(e) => format!("(invalid: {e})"),
                };
                println!("{name:<24} {summary}");
            }
            if std::env::var_os(PRESET_DIR_ENV).is_none() {
                println!("\nset {PRESET_DIR_ENV} to add or override presets");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let c = load(&config)?;
            println!("ok: {} ({})", c.name, c.scenario.kind());
            Ok(())
        }
    }
}

fn resolve_preset_summary(name: &str) -> Result<String, String> {
    let c = resolve(name).map_err(|e| e.to_string())?;
    Ok(format!("[{}] {}", c.scenario.kind(), c.description))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
