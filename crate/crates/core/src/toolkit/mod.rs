//! Analysis and plumbing: trace files, run configuration, fitting and
//! synthetic data.

pub mod config;
pub mod fit;
pub mod synth;
pub mod trace_io;

pub use config::RunConfig;
pub use fit::{
    estimate_saturation_power, fit_trace, fit_traces, initial_guess, Dip, FitModel, FitOptions, FitResult, FitScale,
    SaturationEstimate,
};
pub use synth::synthesize_traces;
pub use trace_io::{read_trace, write_trace, TRACE_HEADER};

use crate::catalog::LineCatalog;
use crate::medium::{AbsorptionSample, MediumParams, PreparedMedium};
use crate::Result;

/// α(ν) at a fixed intensity on an evenly spaced grid.
pub fn absorption_spectrum(
    start_thz: f64,
    stop_thz: f64,
    step_mhz: f64,
    intensity_w_cm2: f64,
    medium: &MediumParams,
    catalog: &LineCatalog,
) -> Result<Vec<AbsorptionSample>> {
    catalog.check_coverage(start_thz)?;
    catalog.check_coverage(stop_thz)?;
    let prepared = PreparedMedium::new(medium, catalog)?;
    let n = ((stop_thz - start_thz) * 1e6 / step_mhz + 1e-6).floor() as usize + 1;
    (0..n)
        .map(|i| prepared.sample(start_thz + i as f64 * step_mhz * 1e-6, intensity_w_cm2))
        .collect()
}

/// Writes an absorption spectrum as CSV.
pub fn write_spectrum<W: std::io::Write>(samples: &[AbsorptionSample], mut out: W) -> Result<()> {
    writeln!(out, "frequency_thz,intensity_w_cm2,alpha_cm,single_pass_od")?;
    for s in samples {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            s.frequency_thz, s.intensity_w_cm2, s.alpha_cm, s.single_pass_od
        )?;
    }
    Ok(())
}
