use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use soliton_cli::suite::{self, run_suite};
use soliton_cli::sweep::{self, Metric, Param};
use soliton_cli::{execute, CliError, CliResult, Scenario};

#[derive(Parser)]
#[command(name = "soliton", version, about = "Simulate soliton pulses on segmented neural paths")]
struct Cli {
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a bundled scenario by name.
    Run { scenario: String },
    /// Run the bundled figure scenarios and check every criterion.
    PaperSuite {
        /// Override a membrane constant, e.g. `--set v_trigger=-30`.
        #[arg(long = "set", value_parser = parse_override)]
        overrides: Vec<(String, f64)>,
    },
    /// Sweep one parameter of a scenario and tabulate a metric.
    Sweep {
        scenario: String,
        /// junction_c_scale, amplitude, dt, taper_ratio or skew.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        /// Number of evenly spaced points, ends included.
        #[arg(long)]
        steps: usize,
        /// output, dispersion, max_discrepancy, pulses:<label>, onset:<label> or truth:<row>.
        #[arg(long)]
        metric: String,
    },
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{v:?}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// A path on disk wins; otherwise a bundled scenario name.
fn load(arg: &str) -> CliResult<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::load(path);
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(arg);
    if suite::BUNDLED.iter().any(|(n, _)| *n == stem) {
        return suite::bundled(stem);
    }
    Err(CliError::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)))
}

fn real_main(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { scenario } => {
            let out = execute(&load(&scenario)?)?;
            let (csv, json) = out.write(&cli.out_dir)?;
            println!("{}\n{}", csv.display(), json.display());
        }
        Command::PaperSuite { overrides } => {
            let report = run_suite(&overrides)?;
            for (name, run) in &report.context.runs {
                match run {
                    Ok(r) => {
                        r.write(&cli.out_dir)?;
                    }
                    Err(e) => eprintln!("{name}: {e}"),
                }
            }
            for c in &report.criteria {
                println!("{c}");
            }
            let failed = report.criteria.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Failed(format!(
                    "{failed} of {} criteria failed",
                    report.criteria.len()
                )));
            }
        }
        Command::Sweep {
            scenario,
            param,
            from,
            to,
            steps,
            metric,
        } => {
            let param: Param = param.parse()?;
            let metric: Metric = metric.parse()?;
            let base = load(&scenario)?;
            let rows = sweep::sweep(&base, param, &sweep::points(from, to, steps)?, &metric)?;
            let mut table = Vec::new();
            sweep::write_table(&mut table, param, &metric, &rows).expect("writing to memory");
            std::fs::create_dir_all(&cli.out_dir).map_err(|e| CliError::io(&cli.out_dir, e))?;
            let path = cli.out_dir.join(format!("{}.sweep.{param}.csv", base.name));
            std::fs::write(&path, &table).map_err(|e| CliError::io(&path, e))?;
            print!("{}", String::from_utf8_lossy(&table));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
