use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use vtol_ftc::detector::{evaluate_detections, run_offline, FaultWindow};
use vtol_ftc::exec::Execution;
use vtol_ftc::harness::{
    battery_scenarios, run_report, run_suite, telemetry_charts, AllocRequest, DetectorFloors, HarnessError, OutputFormat,
    ReportOptions, DEFAULT_BAND,
};
use vtol_ftc::sim::{DetectorSettings, Scenario, SimError};
use vtol_ftc::telemetry::Telemetry;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_SUITE_FAILED: u8 = 4;

/// Fault detection and failure-tolerant allocation for tiltrotor VTOL.
#[derive(Debug, Parser)]
#[command(name = "vtolftc", version)]
struct Cli {
    /// Directory for written artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the noise seed of every scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batch work; 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Table format for telemetry and traces.
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run scenario files; writes telemetry and a summary per scenario.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        scoring: Scoring,
    },
    /// Replay the detector over a telemetry CSV.
    Detect {
        log: PathBuf,
        /// JSON with optional `config` and `channels`; attitude channels
        /// with default tuning when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Time of a known fault, to score the events against.
        #[arg(long)]
        fault_at: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        tolerance: f64,
    },
    /// Solve a one-shot allocation problem and print the result.
    Alloc { problem: PathBuf },
    /// Run a scenario battery and write a consolidated report.
    Suite {
        /// Run the bundled failure battery.
        #[arg(long, conflicts_with = "scenarios")]
        all: bool,
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        scoring: Scoring,
        /// Fail when pooled detector accuracy is below this.
        #[arg(long)]
        min_accuracy: Option<f64>,
        /// Fail when pooled detector precision is below this.
        #[arg(long)]
        min_precision: Option<f64>,
        /// Fail when pooled detector recall is below this.
        #[arg(long)]
        min_recall: Option<f64>,
    },
    /// Render SVG charts from a telemetry CSV.
    Plot { log: PathBuf },
}

#[derive(Debug, Args)]
struct Scoring {
    /// Convergence band as a fraction of the final command.
    #[arg(long, default_value_t = DEFAULT_BAND)]
    band: f64,
    /// Seconds after a failure within which a detection counts.
    #[arg(long, default_value_t = 2.0)]
    tolerance: f64,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    Runtime(String),
    Suite,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        HarnessError::from(e).into()
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Print to stdout, ignoring a closed pipe.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_json<T: serde::Serialize + ?Sized>(value: &T) {
    emit(&serde_json::to_string_pretty(value).expect("serializable"));
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "log".into())
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn load_scenarios(paths: &[PathBuf], seed: Option<u64>) -> Result<Vec<Scenario>, Failure> {
    paths
        .iter()
        .map(|p| {
            let mut s = Scenario::from_json(&read_input(p)?)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            Ok(s)
        })
        .collect()
}

fn execution(jobs: Option<usize>) -> Result<Execution, Failure> {
    match jobs {
        Some(0) => Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(_n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(_n)
                .build_global()
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            Ok(Execution::Parallel)
        }
        None => Ok(Execution::Parallel),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let exec = execution(cli.jobs)?;
    let options = |scoring: &Scoring| ReportOptions {
        out_dir: cli.out.clone(),
        format: cli.format,
        band: scoring.band,
        detection_tolerance: scoring.tolerance,
    };
    match &cli.command {
        Command::Simulate { scenarios, scoring } => {
            let scenarios = load_scenarios(scenarios, cli.seed)?;
            let opts = options(scoring);
            let reports = vtol_ftc::exec::map(exec, &scenarios, |s| run_report(s, &opts));
            let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
            print_json(&reports);
        }
        Command::Detect { log, config, fault_at, tolerance } => {
            let table = Telemetry::read_csv(read_input(log)?.as_bytes()).map_err(HarnessError::from)?;
            let settings: DetectorSettings = match config {
                Some(p) => serde_json::from_str(&read_input(p)?)
                    .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
                None => DetectorSettings::default(),
            };
            let result = run_offline(&table, &settings.channels, &settings.config, exec).map_err(HarnessError::from)?;
            create_out(&cli.out)?;
            let stem = file_stem(log);
            for trace in &result.traces {
                let path = cli.out.join(format!("{stem}_trace_{}.{}", trace.channel, cli.format.extension()));
                cli.format.write_table(&trace.to_telemetry(), &path)?;
                info!("wrote {}", path.display());
            }
            let metrics = match fault_at {
                Some(t) => Some(evaluate_detections(&result.events, &[FaultWindow::from(*t)], *tolerance).map_err(HarnessError::from)?),
                None => None,
            };
            let doc = serde_json::json!({ "events": result.events, "metrics": metrics });
            let path = cli.out.join(format!("{stem}_events.json"));
            fs::write(&path, serde_json::to_string_pretty(&doc).expect("serializable"))
                .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            print_json(&doc);
        }
        Command::Alloc { problem } => {
            let request = AllocRequest::from_json(&read_input(problem)?)?;
            print_json(&request.solve()?);
        }
        Command::Suite { all, scenarios, scoring, min_accuracy, min_precision, min_recall } => {
            let mut batch = if *all {
                battery_scenarios()
            } else if scenarios.is_empty() {
                return Err(Failure::Usage("suite needs --all or scenario files".into()));
            } else {
                load_scenarios(scenarios, None)?
            };
            if let Some(seed) = cli.seed {
                batch.iter_mut().for_each(|s| s.seed = seed);
            }
            let floors = DetectorFloors { accuracy: *min_accuracy, precision: *min_precision, recall: *min_recall };
            let suite = run_suite(&batch, &options(scoring), exec, floors)?;
            for r in &suite.reports {
                eprintln!(
                    "{:<30} crashed={:<5} max_att_err={:>7.2} deg  convergence={}",
                    r.scenario,
                    r.crashed,
                    r.max_attitude_error_deg,
                    r.convergence_time.map_or("-".into(), |t| format!("{t:.2} s"))
                );
            }
            for p in &suite.problems {
                eprintln!("FAIL: {p}");
            }
            print_json(&suite);
            if !suite.passed {
                return Err(Failure::Suite);
            }
        }
        Command::Plot { log } => {
            let table = Telemetry::read_csv(read_input(log)?.as_bytes()).map_err(HarnessError::from)?;
            let charts = telemetry_charts(&table);
            if charts.is_empty() {
                return Err(Failure::Input(format!("{}: no plottable columns", log.display())));
            }
            create_out(&cli.out)?;
            let stem = file_stem(log);
            for (name, chart) in charts {
                let path = cli.out.join(format!("{stem}_{name}.svg"));
                fs::write(&path, chart.to_svg()).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
                emit(&path.display().to_string());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Suite) => ExitCode::from(EXIT_SUITE_FAILED),
    }
}
