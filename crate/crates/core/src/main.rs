use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use echolab::experiment::output::{read_series_csv, tau_csv, TauRow};
use echolab::experiment::run::preset_from_manifest;
use echolab::experiment::{collapse_scan, delta_scan, extract_tau, run_preset, Measure, Overrides, PresetName, RegimePreset};
use echolab::oracle::run_oracle;
use echolab::response::FitWindows;
use echolab::EchoError;

#[derive(Parser)]
#[command(name = "echolab", version, about = "Echo and decoherence experiments on coupled kicked tops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset and write series.csv, ledger.csv and manifest.txt
    Run {
        preset: PresetName,
        #[arg(long = "J")]
        j: Option<u32>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        tmax: Option<usize>,
        /// Horizon of the correlation sums
        #[arg(long)]
        ledger_tmax: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Repeat a run from its manifest
    Rerun {
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Level-crossing times of a series file
    Tau {
        series: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.37")]
        level: Vec<f64>,
    },
    /// Decay times over a list of coupling strengths
    ScanDelta {
        preset: PresetName,
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.37")]
        level: Vec<f64>,
        /// Defaults to 100, the size used for the scans
        #[arg(long = "J", default_value_t = 100)]
        j: u32,
        #[arg(long)]
        tmax: Option<usize>,
        #[arg(long)]
        ledger_tmax: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Purity against delta*t for several spin sizes
    Collapse {
        #[arg(long = "Js", value_delimiter = ',', required = true)]
        js: Vec<u32>,
        #[arg(long, default_value = "regular")]
        preset: PresetName,
        #[arg(long)]
        delta: Option<f64>,
        /// Largest delta*t compared
        #[arg(long, default_value_t = 2.5)]
        x_max: f64,
        /// Comparison stops once a curve drops below this multiple of 2/(2J+1)
        #[arg(long, default_value_t = 10.0)]
        floor: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force equivalence checks at small J
    Oracle {
        #[arg(long = "J", default_value_t = 3)]
        j: u32,
        #[arg(long, default_value_t = 20)]
        configs: usize,
        #[arg(long, default_value_t = 20)]
        tmax: usize,
    },
}

enum Failure {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl From<EchoError> for Failure {
    fn from(e: EchoError) -> Self {
        match e {
            EchoError::InvalidArgument(_) => Failure::Usage(e.to_string()),
            EchoError::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), |v| format!("{v:.4}"))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run_and_write(preset: &RegimePreset, windows: FitWindows, out: &Path) -> Result<(), Failure> {
    let r = run_preset(preset, windows)?;
    r.write_to(out)?;
    println!("preset {} ({}), hash {}", preset.name, preset.expected_law, r.series.config_hash);
    for (k, v) in r.coefficients.entries() {
        println!("  {k} = {v:.6e}");
    }
    for (k, v) in &r.closed_forms {
        println!("  {k} = {v:.6e}");
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            preset,
            j,
            delta,
            tmax,
            ledger_tmax,
            out,
        } => {
            let mut p = RegimePreset::get(preset).with_overrides(Overrides { j, delta, tmax })?;
            if let Some(l) = ledger_tmax {
                p.ledger_tmax = l;
            }
            run_and_write(&p, FitWindows::default(), &out)
        }
        Command::Rerun { manifest, out } => {
            let text = fs::read_to_string(&manifest)?;
            let (p, windows) = preset_from_manifest(&text)?;
            run_and_write(&p, windows, &out)
        }
        Command::Tau { series, level } => {
            let s = read_series_csv(&fs::read_to_string(&series)?)?;
            let rows = level
                .iter()
                .map(|&l| {
                    Ok(TauRow {
                        measured: extract_tau(&s, l, f64::NAN, f64::NAN)?,
                        predicted: None,
                    })
                })
                .collect::<Result<Vec<_>, EchoError>>()?;
            println!("level,tau_F,tau_FR,tau_I");
            for r in rows {
                let m = r.measured;
                println!("{},{},{},{}", m.level, fmt_opt(m.tau_f), fmt_opt(m.tau_fr), fmt_opt(m.tau_i));
            }
            Ok(())
        }
        Command::ScanDelta {
            preset,
            deltas,
            level,
            j,
            tmax,
            ledger_tmax,
            out,
        } => {
            let mut p = RegimePreset::get(preset).with_overrides(Overrides {
                j: Some(j),
                ..Default::default()
            })?;
            if let Some(l) = ledger_tmax {
                p.ledger_tmax = l;
            }
            let scan = delta_scan(&p, &deltas, &level, tmax, FitWindows::default())?;
            emit(out.as_deref(), &tau_csv(&scan.rows))?;
            for &l in &level {
                for m in Measure::ALL {
                    let s = scan.slope(l, m);
                    let sp = scan.predicted_slope(l, m);
                    eprintln!(
                        "level {l}: slope tau_{} = {} over {} points (predicted {})",
                        m.name(),
                        fmt_opt(s.map(|s| s.value)),
                        s.map_or(0, |s| s.points),
                        fmt_opt(sp.map(|s| s.value)),
                    );
                }
            }
            Ok(())
        }
        Command::Collapse {
            js,
            preset,
            delta,
            x_max,
            floor,
            out,
        } => {
            let p = RegimePreset::get(preset).with_overrides(Overrides {
                delta,
                ..Default::default()
            })?;
            let r = collapse_scan(&p, &js, x_max, floor)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            emit(out.as_deref(), &r.csv())?;
            eprintln!("max pairwise difference {:.4e} for delta*t <= {:.4}", r.sup_norm, r.x_cut);
            Ok(())
        }
        Command::Oracle { j, configs, tmax } => {
            let r = run_oracle(j, configs, tmax)?;
            println!("configs          {}", r.configs);
            println!("C/D/E deviation  {:.3e}", r.sums_error);
            println!("state deviation  {:.3e}", r.state_error);
            println!("measure deviation {:.3e}", r.measure_error);
            println!("chain violation  {:.3e}", r.chain_violation);
            if r.passed() {
                println!("ok");
                Ok(())
            } else {
                Err(Failure::Numeric("brute-force comparison exceeded tolerance".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
