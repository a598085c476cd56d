//! `uvsdma`: run photon-counting uplink experiments from JSON configs.
//!
//! Exit status: 0 on success, 1 on a compute or contract error, 2 on an I/O
//! or configuration error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uvsdma_core::sim::{self, ExperimentConfig, ExperimentReport};

#[derive(Parser)]
#[command(name = "uvsdma", version, about = "Photon-counting multiuser uplink experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distribution of the weighted count sum against its Gaussian surrogate
    Gaussfit(RunArgs),
    /// Pilot-based channel estimation error per pattern and pilot length
    Estimate(RunArgs),
    /// Rank balanced pilot patterns by closed-form estimation MSE
    PilotSearch(RunArgs),
    /// Two-user separation error rates
    Detect2(RunArgs),
    /// Desired-user detection under on/off interference
    Multiuser(RunArgs),
    /// ML against successive elimination, wall clock
    Timing(RunArgs),
    /// Check a config without running anything
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON)
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Config path, as an alternative to --config
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    path: Option<PathBuf>,
    /// Directory for report files; created if missing
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    path: Option<PathBuf>,
}

enum Failure {
    Compute(String),
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Compute(_) => 1,
            Failure::Input(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Compute(m) | Failure::Input(m) => m,
        }
    }
}

fn config_path(config: Option<PathBuf>, path: Option<PathBuf>) -> Result<PathBuf, Failure> {
    config.or(path).ok_or_else(|| Failure::Input("no config given (use -c FILE)".into()))
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn expected_kind(cmd: &Command) -> &'static str {
    match cmd {
        Command::Gaussfit(_) => "gaussfit",
        Command::Estimate(_) => "estimate",
        Command::PilotSearch(_) => "pilot_search",
        Command::Detect2(_) => "detect2",
        Command::Multiuser(_) => "multiuser",
        Command::Timing(_) => "timing",
        Command::Validate(_) => "",
    }
}

/// Write every artifact, or none: files already written are removed on failure.
fn write_outputs(dir: &Path, report: &ExperimentReport, format: Format) -> Result<Vec<PathBuf>, Failure> {
    let io = |p: &Path, e: std::io::Error| Failure::Input(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files = vec![
        ("report.json".to_string(), report.deterministic_json() + "\n"),
        ("timing.json".to_string(), serde_json::to_string_pretty(&report.timing).expect("timing serializes") + "\n"),
    ];
    if format == Format::Csv {
        files.extend(report.csv_files());
        files.push(("timing.csv".to_string(), report.timing.to_csv()));
    }
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(io(&path, e));
        }
        written.push(path);
    }
    Ok(written)
}

fn summary(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for t in &report.tables {
        // Histograms are long; they go to files only.
        if t.name == "histogram" {
            continue;
        }
        out.push_str(&format!("# {}\n", t.name));
        out.push_str(&t.to_csv());
    }
    for e in &report.events {
        out.push_str(&format!("# event: {e}\n"));
    }
    out
}

fn run(cli: Cli) -> Result<(), Failure> {
    let kind = expected_kind(&cli.command);
    let args = match cli.command {
        Command::Validate(v) => {
            let path = config_path(v.config, v.path)?;
            let cfg = load(&path)?;
            println!("{}: valid {} config (schema {})", path.display(), cfg.experiment.kind(), cfg.schema_version);
            return Ok(());
        }
        Command::Gaussfit(a)
        | Command::Estimate(a)
        | Command::PilotSearch(a)
        | Command::Detect2(a)
        | Command::Multiuser(a)
        | Command::Timing(a) => a,
    };
    let path = config_path(args.config, args.path)?;
    let mut cfg = load(&path)?;
    if cfg.experiment.kind() != kind {
        return Err(Failure::Input(format!(
            "{}: config is a {} experiment, not {kind}",
            path.display(),
            cfg.experiment.kind()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Failure::Input("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    }
    let mut report = sim::run(&cfg).map_err(|e| Failure::Compute(e.to_string()))?;
    if args.seed.is_some() {
        report.metadata.insert("seed_source".into(), "command line".into());
    }
    if let Some(dir) = &args.out {
        let files = write_outputs(dir, &report, args.format)?;
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let text = match args.format {
        Format::Csv => summary(&report),
        Format::Json => report.to_json_pretty() + "\n",
    };
    lock.write_all(text.as_bytes()).map_err(|e| Failure::Input(format!("stdout: {e}")))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("uvsdma: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
