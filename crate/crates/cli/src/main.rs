//! `xecav`: simulate, scan and fit cavity-enhanced saturated absorption of
//! metastable xenon.
//!
//! Exit codes: 0 success, 1 validation or configuration error, 2 solver or
//! fit non-convergence, 3 I/O error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use xenon_cavity::cavity::{figures, solve_at_offset, SteadyState};
use xenon_cavity::protocol::run_scan;
use xenon_cavity::toolkit::{
    absorption_spectrum, estimate_saturation_power, fit_trace, fit_traces, initial_guess, read_trace, write_spectrum,
    write_trace, FitResult, RunConfig, SaturationEstimate,
};
use xenon_cavity::{Error, LineCatalog, PreparedMedium};

#[derive(Parser)]
#[command(name = "xecav", version, about = "Cavity-enhanced saturated absorption of metastable xenon at 823 nm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file. Every section is optional.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set scan.seed=7`. Values are read as JSON,
    /// or as a string when they are not valid JSON. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Unsaturated (or fixed-intensity) absorption α(ν) over `spectrum`.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Output file, `-` for stdout. Defaults to output.directory/output.spectrum_file.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Full lock-and-probe scan; one trace CSV per probe power.
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// Steady-state transmission at one operating point.
    Transmission {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the traces listed in `fit.traces` and write a JSON report.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Report file, `-` for stdout. Defaults to output.directory/output.fit_report.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Load and check a line catalog (`catalog.path`, or the shipped one).
    CatalogValidate {
        #[command(flatten)]
        common: Common,
        /// Catalog file; overrides `catalog.path`.
        path: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Selfcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_convergence() {
        2
    } else if matches!(e, Error::Io(_)) {
        3
    } else {
        1
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    RunConfig::load(common.config.as_deref(), &common.overrides)
}

/// Opens `path` for writing, `-` meaning stdout.
fn sink(path: &Path) -> Result<Box<dyn Write>, Error> {
    if path == Path::new("-") {
        Ok(Box::new(std::io::stdout().lock()))
    } else {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn spectrum(common: &Common, output: Option<PathBuf>) -> Result<u8, Error> {
    let config = load(common)?;
    let catalog = config.catalog()?;
    let r = config.spectrum;
    let samples = absorption_spectrum(r.start_thz, r.stop_thz, r.step_mhz, r.intensity_w_cm2, &config.medium, &catalog)?;
    let path = output.unwrap_or_else(|| config.output.directory.join(&config.output.spectrum_file));
    write_spectrum(&samples, sink(&path)?)?;
    if path != Path::new("-") {
        eprintln!("wrote {} ({} points)", path.display(), samples.len());
    }
    Ok(0)
}

fn scan(common: &Common) -> Result<u8, Error> {
    let config = load(common)?;
    let catalog = config.catalog()?;
    let traces = run_scan(&config.scan, &config.cavity, &config.medium, &catalog)?;
    std::fs::create_dir_all(&config.output.directory)?;
    for trace in &traces {
        let path = config.output.trace_path(trace.probe_power_w());
        let mut out = sink(&path)?;
        write_trace(trace, &mut out)?;
        println!("{}", path.display());
    }
    if let Some(hash) = traces.first().and_then(|t| t.metadata.config_hash.as_deref()) {
        eprintln!("{} traces of {} points, configuration {hash}", traces.len(), config.scan.point_count());
    }
    Ok(0)
}

#[derive(Serialize)]
struct TransmissionReport {
    input_power_w: f64,
    laser_thz: f64,
    resonance_thz: f64,
    laser_offset_mhz: f64,
    cavity_detuning_mhz: f64,
    #[serde(flatten)]
    state: SteadyState,
}

fn transmission(common: &Common) -> Result<u8, Error> {
    let config = load(common)?;
    let catalog = config.catalog()?;
    let medium = PreparedMedium::new(&config.medium, &catalog)?;
    let q = config.transmission;
    let laser_offset_mhz = medium.offset_mhz(q.laser_thz);
    let cavity_detuning_mhz = (q.laser_thz - q.resonance_thz) * 1e6;
    let state = solve_at_offset(q.input_power_w, laser_offset_mhz, cavity_detuning_mhz, &config.cavity, &medium)?;
    print_json(&TransmissionReport {
        input_power_w: q.input_power_w,
        laser_thz: q.laser_thz,
        resonance_thz: q.resonance_thz,
        laser_offset_mhz,
        cavity_detuning_mhz,
        state,
    })?;
    Ok(0)
}

#[derive(Serialize)]
struct FitReport<'a> {
    traces: &'a [PathBuf],
    joint: bool,
    #[serde(flatten)]
    result: FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    saturation_estimate: Option<SaturationEstimate>,
}

fn fit(common: &Common, output: Option<PathBuf>) -> Result<u8, Error> {
    let config = load(common)?;
    let section = &config.fit;
    if section.traces.is_empty() {
        return Err(Error::Validation {
            location: "fit.traces".into(),
            message: "no trace files given".into(),
        });
    }
    let traces = section
        .traces
        .iter()
        .map(|p| read_trace(File::open(p)?))
        .collect::<Result<Vec<_>, Error>>()?;
    let initial = match &section.initial {
        Some(m) => m.clone(),
        None => initial_guess(&traces[0], section.max_dips.unwrap_or(3))?,
    };
    let joint = traces.len() > 1;
    let result = if joint {
        fit_traces(&traces, &initial, &section.options)?
    } else {
        fit_trace(&traces[0], &initial, &section.options)?
    };
    let saturation_estimate = match section.saturation_frequency_thz {
        Some(f) => Some(estimate_saturation_power(&traces, f)?),
        None => None,
    };
    let converged = result.converged;
    let report = FitReport {
        traces: &section.traces,
        joint,
        result,
        saturation_estimate,
    };
    let path = output.unwrap_or_else(|| config.output.directory.join(&config.output.fit_report));
    let mut out = sink(&path)?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(std::io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    if converged {
        Ok(0)
    } else {
        eprintln!("fit did not converge within {} iterations", section.options.max_iterations);
        Ok(2)
    }
}

#[derive(Serialize)]
struct CatalogSummary {
    reference_frequency_thz: f64,
    lines: usize,
    species: Vec<SpeciesSummary>,
    total_weight: f64,
}

#[derive(Serialize)]
struct SpeciesSummary {
    mass_number: u32,
    abundance: f64,
    lines: usize,
}

fn catalog_validate(common: &Common, path: Option<PathBuf>) -> Result<u8, Error> {
    let config = load(common)?;
    let catalog = match path {
        Some(p) => xenon_cavity::catalog::load_catalog(File::open(p)?)?,
        None => config.catalog()?,
    };
    print_json(&summarize(&catalog))?;
    Ok(0)
}

fn summarize(catalog: &LineCatalog) -> CatalogSummary {
    CatalogSummary {
        reference_frequency_thz: catalog.reference_frequency_thz,
        lines: catalog.lines.len(),
        species: catalog
            .species
            .iter()
            .map(|s| SpeciesSummary {
                mass_number: s.mass_number,
                abundance: s.abundance,
                lines: catalog.lines.iter().filter(|l| l.isotope == s.mass_number).count(),
            })
            .collect(),
        total_weight: catalog.weights().iter().sum(),
    }
}

fn selfcheck(common: &Common) -> Result<u8, Error> {
    let config = load(common)?;
    let f = figures(&config.cavity, 364.1);
    eprintln!(
        "configured cavity: FSR {:.4} GHz, finesse {:.1}, linewidth {:.4} MHz",
        f.fsr_ghz, f.finesse, f.linewidth_mhz
    );
    let reports = xenon_cavity_validation::run_all();
    for r in &reports {
        println!("{r}");
    }
    let unexpected = reports.iter().filter(|r| !r.passed && !r.is_known_failure()).count();
    Ok(if unexpected == 0 { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Spectrum { common, output } => spectrum(&common, output),
        Command::Scan { common } => scan(&common),
        Command::Transmission { common } => transmission(&common),
        Command::Fit { common, output } => fit(&common, output),
        Command::CatalogValidate { common, path } => catalog_validate(&common, path),
        Command::Selfcheck { common } => selfcheck(&common),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
