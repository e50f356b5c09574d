use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use sar_refocus::io::{self, GridFile, GridFileError};
use sar_refocus::metrics::focus_metrics;
use sar_refocus::pfa::PfaOptions;
use sar_refocus::refocus::{extract_subimage, refocus_pipeline, Estimator, RefocusConfig, RegionOfInterest};
use sar_refocus::scenario::{Scenario, ScenarioConfig};
use sar_refocus::{Error, Exec};

/// Polar-format SAR imaging and moving-target refocusing.
#[derive(Parser, Debug)]
#[command(name = "sarfocus", version)]
struct Cli {
    /// Run every kernel on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a raw phase history from a scenario.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Ignore the configured SNR.
        #[arg(long)]
        noiseless: bool,
    },
    /// Form an image from a raw phase history.
    Pfa {
        #[arg(long)]
        input: PathBuf,
        /// Scenario the phase history was collected under.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write every intermediate phase history into this directory.
        #[arg(long, value_name = "DIR")]
        emit_stages: Option<PathBuf>,
    },
    /// Refocus one moving target inside a region of the image.
    Refocus {
        #[arg(long)]
        input: PathBuf,
        /// `az_offset,rg_offset,az_extent,rg_extent` in pixels.
        #[arg(long)]
        roi: RegionOfInterest,
        #[arg(long, value_enum, default_value = "pga")]
        estimator: EstimatorArg,
        #[arg(long)]
        out: PathBuf,
        /// Write the key=value report here as well as to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Skip the refinement pass.
        #[arg(long)]
        single_pass: bool,
    },
    /// Focus metrics of an image or a region of it.
    Metrics {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        roi: Option<RegionOfInterest>,
        #[arg(long)]
        json: bool,
    },
    /// Export the dB magnitude of any grid as a grayscale PNG.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40.0)]
        dynamic_range: f64,
    },
    /// Ground-truth phase error of one scenario target.
    Oracle(OracleArgs),
    /// Print the header of a grid file.
    Inspect {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    target: usize,
    /// Receives `ape.grid` and `surface.grid`.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    Pga,
    Minentropy,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Pga => Estimator::Pga,
            EstimatorArg::Minentropy => Estimator::MinEntropy,
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Lib(Error::Grid(g)) => match g {
                GridFileError::Io(_) => 3,
                GridFileError::CorruptHeader(_) | GridFileError::KindMismatch { .. } => 4,
                GridFileError::Truncated { .. } => 5,
                GridFileError::UnsupportedVersion(_) => 6,
            },
            CliError::Lib(_) => 7,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn require(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("no such file: {}", path.display())))
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> CliResult<Scenario> {
    require(path)?;
    let mut config = ScenarioConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let sc = Scenario::from_config(&config)?;
    for w in &sc.warnings {
        warn!("{w}");
    }
    Ok(sc)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    io::write_atomic(path, text.as_bytes()).map_err(Error::from)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.command {
        Command::Simulate { scenario, out, seed, noiseless } => {
            let sc = load_scenario(&scenario, seed)?;
            let raw = if noiseless { sc.simulate_noiseless(exec)? } else { sc.simulate(exec)? };
            io::write_phase_history(&raw, &out)?;
            info!("wrote {} x {} phase history to {}", raw.num_pulses(), raw.num_freqs(), out.display());
        }
        Command::Pfa { input, scenario, out, emit_stages } => {
            require(&input)?;
            let sc = load_scenario(&scenario, None)?;
            let raw = io::read_phase_history(&input)?;
            let products = sc.form_image(&raw, &PfaOptions { keep_stages: emit_stages.is_some(), exec })?;
            if let Some(dir) = emit_stages {
                fs::create_dir_all(&dir).map_err(|source| CliError::Io { context: dir.display().to_string(), source })?;
                for (i, stage) in products.stages.iter().enumerate() {
                    let path = dir.join(format!("{i}_{}.grid", stage.stage));
                    io::write_phase_history(stage, &path)?;
                }
            }
            io::write_image(&products.image, &out)?;
        }
        Command::Refocus { input, roi, estimator, out, report, json, single_pass } => {
            require(&input)?;
            let image = io::read_image(&input)?;
            roi.validate(image.dim())?;
            let config = RefocusConfig { estimator: estimator.into(), refine: !single_pass, exec, ..Default::default() };
            let outcome = refocus_pipeline(&image, &roi, &config)?;
            let text = outcome.report.to_key_value();
            io::write_image(&outcome.image, &out)?;
            if let Some(path) = report {
                write_text(&path, &text)?;
            }
            if let Some(path) = json {
                write_text(&path, &outcome.report.to_json())?;
            }
            print!("{text}");
            if !outcome.report.success {
                warn!("refocus flagged: {}", outcome.report.flags.join(","));
            }
        }
        Command::Metrics { input, roi, json } => {
            require(&input)?;
            let mut image = io::read_image(&input)?;
            if let Some(roi) = roi {
                image = extract_subimage(&image, &roi)?;
            }
            let m = focus_metrics(&image)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&m).expect("metrics serialise"));
            } else {
                println!("entropy={:.6}", m.entropy);
                println!("contrast={:.6}", m.contrast);
                println!("azimuth_width_3db={:.6}", m.azimuth_width_3db);
                println!("residual_rcm={}", m.residual_rcm.map_or_else(|| "none".into(), |v| format!("{v:.6}")));
                println!("peak={},{}", m.peak_row, m.peak_col);
            }
        }
        Command::Export { input, out, dynamic_range } => {
            require(&input)?;
            let file = GridFile::read(&input).map_err(Error::from)?;
            io::export_magnitude(&file.data, &out, dynamic_range)?;
        }
        Command::Oracle(args) => {
            let sc = load_scenario(&args.scenario, None)?;
            let oracle = sc.oracle(args.target)?;
            fs::create_dir_all(&args.out_dir)
                .map_err(|source| CliError::Io { context: args.out_dir.display().to_string(), source })?;
            let consts = (Some(sc.params.carrier_frequency), Some(sc.geometry.phi_ref));
            GridFile::from_profile(&oracle.ape, oracle.grid.y0)
                .with_constants(consts.0, consts.1)
                .write(&args.out_dir.join("ape.grid"))
                .map_err(Error::from)?;
            GridFile::from_surface(&oracle.surface)
                .with_constants(consts.0, consts.1)
                .write(&args.out_dir.join("surface.grid"))
                .map_err(Error::from)?;
        }
        Command::Inspect { input } => {
            require(&input)?;
            let header = io::read_header(&input).map_err(Error::from)?;
            print!("{}", header.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sarfocus: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
