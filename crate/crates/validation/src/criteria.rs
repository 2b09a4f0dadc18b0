//! The ten acceptance criteria. Each returns a [`Report`] rather than
//! panicking so that a run always reports every criterion.

use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xenon_cavity::cavity::{airy_transmission, figures, solve_at_offset, LinearAbsorber, SteadyStateSolver};
use xenon_cavity::lineshape::voigt;
use xenon_cavity::protocol::{apparent_dip_width, run_scan_with, Execution};
use xenon_cavity::toolkit::synth::frequency_grid;
use xenon_cavity::toolkit::{fit_traces, synthesize_traces, write_trace, Dip, FitModel, FitOptions};
use xenon_cavity::{CavitySpec, LineCatalog, LineshapeQuery, MediumParams, PreparedMedium, ScanPlan, SpectrumTrace};

use crate::oracles::{enumerate_components, gaussian, lorentzian, scan_fixed_points, voigt_by_convolution, ClosedFormAbsorber};

/// Criteria that the model cannot meet simultaneously with the others.
///
/// The calibration that places the 364.097 THz ratio at 0.10 and 0.50 also
/// saturates weak lines slightly at 0.05 nW, because the cavity builds up far
/// more power where absorption is small. Every calibration that brings that
/// deviation under 1% either lowers the 19 nW ratio below 0.40 or lifts the
/// even-isotope minimum above 0.05.
pub const KNOWN_UNATTAINABLE: &[u32] = &[5];

/// Frequency of the ¹²⁹Xe 5/2 → 5/2 component, THz.
pub const ANCHOR_THZ: f64 = 364.097;

#[derive(Debug, Clone)]
pub struct Report {
    pub number: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Report {
    /// Failed, and listed in [`KNOWN_UNATTAINABLE`].
    pub fn is_known_failure(&self) -> bool {
        !self.passed && KNOWN_UNATTAINABLE.contains(&self.number)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} criterion {:>2}: {}: {}", self.number, self.title, self.detail)?;
        if self.is_known_failure() {
            write!(f, " (known: not attainable together with criteria 3 and 6)")?;
        }
        Ok(())
    }
}

fn report(number: u32, title: &'static str, passed: bool, detail: String) -> Report {
    Report {
        number,
        title,
        passed,
        detail,
    }
}

fn failed(number: u32, title: &'static str, e: impl fmt::Display) -> Report {
    report(number, title, false, format!("error: {e}"))
}

pub fn run_all() -> Vec<Report> {
    vec![
        cavity_figures(),
        catalog_multiplicity(),
        saturation_trend(),
        high_power_flatness(),
        linear_regime(),
        central_dip_narrowing(),
        voigt_oracle(),
        solver_oracle(),
        fit_round_trips(),
        determinism(),
    ]
}

pub fn cavity_figures() -> Report {
    const T: &str = "cavity figures of merit";
    let spec = CavitySpec {
        length_cm: 2.4983,
        mirror_transmission: 7.5e-4,
        mirror_loss: std::f64::consts::PI / 4000.0 - 7.5e-4,
        ..Default::default()
    };
    let f = figures(&spec, 364.1);
    let ok = (f.fsr_ghz - 6.0).abs() <= 0.001
        && (f.finesse - 4000.0).abs() <= 1.0
        && (f.linewidth_mhz - 1.5).abs() <= 0.002
        && (f.quality_factor - 2.4e8).abs() <= 0.1e8;
    let detail = format!(
        "FSR {:.5} GHz, finesse {:.2}, linewidth {:.5} MHz, Q {:.4e}",
        f.fsr_ghz, f.finesse, f.linewidth_mhz, f.quality_factor
    );
    report(1, T, ok, detail)
}

pub fn catalog_multiplicity() -> Report {
    const T: &str = "catalog multiplicity";
    let catalog = LineCatalog::natural_xenon();
    let count = |m: u32| catalog.lines.iter().filter(|l| l.isotope == m).count();
    let even = catalog.lines.len() - count(129) - count(131);
    let mut shipped: Vec<(u32, u32, u32)> = catalog
        .lines
        .iter()
        .map(|l| (l.isotope, (2.0 * l.f_lower.value()) as u32, (2.0 * l.f_upper.value()) as u32))
        .collect();
    let mut oracle = enumerate_components(4, 4);
    shipped.sort_unstable();
    oracle.sort_unstable();
    let ok = catalog.lines.len() == 21 && count(129) == 4 && count(131) == 10 && even == 7 && shipped == oracle;
    let detail = format!(
        "{} lines = {} (129) + {} (131) + {} (even); enumeration {} the selection-rule oracle",
        catalog.lines.len(),
        count(129),
        count(131),
        even,
        if shipped == oracle { "matches" } else { "differs from" }
    );
    report(2, T, ok, detail)
}

/// Traces of the default scan at the calibrated defaults, noise off.
fn default_scan() -> &'static Result<Vec<SpectrumTrace>, String> {
    static SCAN: OnceLock<Result<Vec<SpectrumTrace>, String>> = OnceLock::new();
    SCAN.get_or_init(|| scan_at(&ScanPlan::default().probe_powers_w))
}

fn low_power_scan() -> &'static Result<Vec<SpectrumTrace>, String> {
    static SCAN: OnceLock<Result<Vec<SpectrumTrace>, String>> = OnceLock::new();
    SCAN.get_or_init(|| scan_at(&[0.005e-9, 0.05e-9, 2e-9]))
}

fn scan_at(powers: &[f64]) -> Result<Vec<SpectrumTrace>, String> {
    let plan = ScanPlan {
        probe_powers_w: powers.to_vec(),
        ..Default::default()
    };
    run_scan_with(&plan, &CavitySpec::default(), &MediumParams::default(), &LineCatalog::natural_xenon(), Execution::default())
        .map_err(|e| e.to_string())
}

pub fn saturation_trend() -> Report {
    const T: &str = "saturation trend at 364.097 THz";
    let traces = match default_scan() {
        Ok(t) => t,
        Err(e) => return failed(3, T, e),
    };
    let at = |k: usize| {
        let t = &traces[k];
        t.samples[t.nearest(ANCHOR_THZ)].ratio
    };
    let (r05, r2, r19) = (at(0), at(1), at(2));
    let n = traces[0].len();
    let monotone = (0..n).all(|i| traces[0].samples[i].ratio <= traces[1].samples[i].ratio && traces[1].samples[i].ratio <= traces[2].samples[i].ratio);
    let ok = (r05 - 0.10).abs() <= 0.05 && (r19 - 0.50).abs() <= 0.10 && r05 < r2 && r2 < r19 && monotone;
    let detail = format!(
        "ratio {r05:.4} at 0.5 nW, {r2:.4} at 2 nW, {r19:.4} at 19 nW; monotone in power at {} of {n} points",
        if monotone { "all" } else { "not all" }
    );
    report(3, T, ok, detail)
}

pub fn high_power_flatness() -> Report {
    const T: &str = "high-power flatness";
    let plan = ScanPlan::default();
    let spec = CavitySpec::default();
    let prepared = match PreparedMedium::new(&MediumParams::default(), &LineCatalog::natural_xenon()) {
        Ok(p) => p,
        Err(e) => return failed(4, T, e),
    };
    let mut worst = f64::INFINITY;
    for i in 0..plan.point_count() {
        let offset = (plan.resonance_thz(i) - ANCHOR_THZ) * 1e6;
        match solve_at_offset(plan.lock_power_w, offset, 0.0, &spec, &prepared) {
            Ok(s) => worst = worst.min(s.transmission_ratio),
            Err(e) => return failed(4, T, e),
        }
    }
    let detail = format!("minimum transmission ratio {worst:.5} at {:.0} uW over {} points", plan.lock_power_w * 1e6, plan.point_count());
    report(4, T, worst >= 0.98, detail)
}

pub fn linear_regime() -> Report {
    const T: &str = "linear regime";
    let traces = match low_power_scan() {
        Ok(t) => t,
        Err(e) => return failed(5, T, e),
    };
    let od = |k: usize, i: usize| traces[k].samples[i].optical_depth;
    let n = traces[0].len();
    let rel = |k: usize, i: usize| (od(k, i) / od(0, i) - 1.0).abs();
    let worst = |k: usize| (0..n).map(|i| (rel(k, i), i)).fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let ((plateau, at), (departure, _)) = (worst(1), worst(2));
    let anchor = rel(1, traces[0].nearest(ANCHOR_THZ));
    let ok = plateau <= 0.01 && departure > 0.05;
    let detail = format!(
        "max |OD(0.05 nW)/OD(0.005 nW) - 1| = {plateau:.2e} at {:.4} THz ({anchor:.1e} at 364.097 THz); max deviation at 2 nW = {departure:.3}",
        traces[0].samples[at].resonance_thz
    );
    report(5, T, ok, detail)
}

/// Abundance-weighted mean frequency of the even-isotope lines.
fn even_center_thz(catalog: &LineCatalog) -> f64 {
    let (mut sum, mut weight) = (0.0, 0.0);
    for line in catalog.lines.iter().filter(|l| l.isotope % 2 == 0) {
        let w = catalog.species.iter().find(|s| s.mass_number == line.isotope).map_or(0.0, |s| s.abundance);
        sum += w * line.offset_mhz;
        weight += w;
    }
    catalog.reference_frequency_thz + sum / weight * 1e-6
}

pub fn central_dip_narrowing() -> Report {
    const T: &str = "central-dip narrowing";
    let traces = match default_scan() {
        Ok(t) => t,
        Err(e) => return failed(6, T, e),
    };
    let center = even_center_thz(&LineCatalog::natural_xenon());
    let mut widths = Vec::new();
    let mut minima = Vec::new();
    for t in traces {
        match apparent_dip_width(t, center) {
            Ok(w) => widths.push(w),
            Err(e) => return failed(6, T, e),
        }
        let i = t.nearest(center);
        let lo = i.saturating_sub(20);
        let hi = (i + 20).min(t.len() - 1);
        minima.push(t.samples[lo..=hi].iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min));
    }
    let narrowing = widths.windows(2).all(|w| w[1] < w[0]);
    let deep = minima.iter().all(|&m| m < 0.05);
    let detail = format!(
        "widths {:.1} / {:.1} / {:.1} MHz at 0.5 / 2 / 19 nW; minimum ratios {:.4} / {:.4} / {:.4}",
        widths[0], widths[1], widths[2], minima[0], minima[1], minima[2]
    );
    report(6, T, narrowing && deep, detail)
}

pub fn voigt_oracle() -> Report {
    const T: &str = "Voigt oracle";
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = |x: f64, g: f64, l: f64| voigt(&LineshapeQuery::new(x, g, l)).unwrap_or(f64::NAN);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g = 10f64.powf(rng.random_range(0.0..3.0));
        let l = 10f64.powf(rng.random_range(-1.0..3.0));
        let d = rng.random_range(-3.0..3.0) * (g + l);
        let oracle = voigt_by_convolution(d, g, l);
        worst = worst.max((v(d, g, l) / oracle - 1.0).abs());
    }
    let mut limits: f64 = 0.0;
    for (g, l) in [(1.0, 0.0), (300.0, 0.0), (0.0, 1.0), (0.0, 335.0)] {
        for k in -12..=12 {
            let w = g + l;
            let x = 0.25 * k as f64 * w;
            let exact = if l == 0.0 { gaussian(x, g) } else { lorentzian(x, l) };
            limits = limits.max((v(x, g, l) / exact - 1.0).abs());
        }
    }
    let ok = worst <= 1e-6 && limits <= 1e-9;
    report(7, T, ok, format!("max relative error {worst:.2e} over 100 triples; {limits:.2e} in the pure limits"))
}

pub fn solver_oracle() -> Report {
    const T: &str = "steady-state solver oracle";
    let spec = CavitySpec::default();
    let solver = SteadyStateSolver::new(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for n in 0..100 {
        let absorber = ClosedFormAbsorber {
            alpha0: 10f64.powf(rng.random_range(-6.0..-2.0)),
            saturation_intensity: 10f64.powf(rng.random_range(-6.0..2.0)),
            exponent: if n % 2 == 0 { 1.0 } else { 0.5 },
            path_length_cm: spec.length_cm,
        };
        let power = 10f64.powf(rng.random_range(-12.0..-4.0));
        let detuning = rng.random_range(-2.0..2.0);
        let solved = match solver.solve(&absorber, power, detuning) {
            Ok(s) => s,
            Err(e) => return failed(8, T, format!("instance {n}: {e}")),
        };
        let (lo, hi) = solver.bracket(&absorber, power, detuning);
        let map = |i: f64| solver.intensity_for_alpha(power, detuning, xenon_cavity::cavity::Absorber::alpha(&absorber, i), spec.length_cm);
        let roots = scan_fixed_points(&map, lo, hi, 1_000_000);
        let err = roots
            .iter()
            .map(|r| (solved.intensity_w_cm2 / r - 1.0).abs())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(err);
    }
    let mut linear: f64 = 0.0;
    for k in 0..50 {
        let alpha = 1e-3 * k as f64 / 49.0;
        let detuning = -2.0 + 4.0 * ((k * 37) % 50) as f64 / 49.0;
        let absorber = LinearAbsorber {
            alpha_cm: alpha,
            path_length_cm: spec.length_cm,
        };
        match solver.solve(&absorber, 1e-9, detuning) {
            Ok(s) => {
                let exact = airy_transmission(detuning, &spec, 2.0 * alpha * spec.length_cm);
                linear = linear.max((s.absolute_transmission / exact - 1.0).abs());
            }
            Err(e) => return failed(8, T, e),
        }
    }
    let ok = worst <= 1e-6 && linear <= solver.tolerance;
    report(
        8,
        T,
        ok,
        format!("max relative deviation from the residual scan {worst:.2e}; linear case vs Airy {linear:.2e}"),
    )
}

fn fit_truth() -> FitModel {
    FitModel {
        baseline: 1.0,
        dips: vec![
            Dip {
                center_thz: 364.095_46,
                gaussian_fwhm_mhz: 380.0,
                lorentzian_fwhm_mhz: 335.0,
                depth: 0.9,
                saturation_power_w: 1.5e-9,
            },
            Dip {
                center_thz: ANCHOR_THZ,
                gaussian_fwhm_mhz: 380.0,
                lorentzian_fwhm_mhz: 335.0,
                depth: 0.6,
                saturation_power_w: 4e-9,
            },
        ],
        probe_power_w: 0.5e-9,
    }
}

fn fit_start(truth: &FitModel) -> FitModel {
    let mut m = truth.clone();
    m.baseline = 0.98;
    for (k, d) in m.dips.iter_mut().enumerate() {
        d.center_thz += if k % 2 == 0 { 4e-6 } else { -4e-6 };
        d.gaussian_fwhm_mhz *= 1.15;
        d.lorentzian_fwhm_mhz *= 0.85;
        d.depth *= 0.8;
        d.saturation_power_w *= 1.6;
    }
    m
}

/// Worst center error (MHz) and worst relative P_sat error of a joint fit.
fn round_trip(noise: f64) -> Result<(f64, f64), String> {
    let truth = fit_truth();
    let grid = frequency_grid(364.0935, 10.0, 501);
    let traces = synthesize_traces(&truth, &grid, &ScanPlan::default().probe_powers_w, noise, 2024).map_err(|e| e.to_string())?;
    let fit = fit_traces(&traces, &fit_start(&truth), &FitOptions::default()).map_err(|e| e.to_string())?;
    let mut center: f64 = 0.0;
    let mut psat: f64 = 0.0;
    for (a, b) in fit.model.dips.iter().zip(&truth.dips) {
        center = center.max((a.center_thz - b.center_thz).abs() * 1e6);
        psat = psat.max((a.saturation_power_w / b.saturation_power_w - 1.0).abs());
    }
    Ok((center, psat))
}

pub fn fit_round_trips() -> Report {
    const T: &str = "fit round trips";
    let (clean, noisy) = match (round_trip(0.0), round_trip(0.01)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return failed(9, T, e),
    };
    let ok = clean.0 <= 1.0 && clean.1 <= 0.10 && noisy.0 <= 5.0 && noisy.1 <= 0.25;
    let detail = format!(
        "noiseless: center {:.2e} MHz, P_sat {:.2e}; 1% noise: center {:.3} MHz, P_sat {:.3}",
        clean.0, clean.1, noisy.0, noisy.1
    );
    report(9, T, ok, detail)
}

fn csv_bytes(execution: Execution, plan: &ScanPlan) -> Result<Vec<Vec<u8>>, String> {
    let traces = run_scan_with(plan, &CavitySpec::default(), &MediumParams::default(), &LineCatalog::natural_xenon(), execution)
        .map_err(|e| e.to_string())?;
    traces
        .iter()
        .map(|t| {
            let mut buf = Vec::new();
            write_trace(t, &mut buf).map_err(|e| e.to_string())?;
            Ok(buf)
        })
        .collect()
}

pub fn determinism() -> Report {
    const T: &str = "determinism";
    let mut plan = ScanPlan {
        seed: 20,
        laser_jitter_mhz: 0.1,
        ..Default::default()
    };
    plan.noise.enabled = true;
    plan.noise.relative_intensity_noise = 1e-3;
    plan.noise.readout_noise_w = 1e-12;
    let runs = [Execution::Serial, Execution::Serial, Execution::Parallel].map(|e| csv_bytes(e, &plan));
    let runs: Result<Vec<_>, _> = runs.into_iter().collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return failed(10, T, e),
    };
    let same = runs[0] == runs[1] && runs[0] == runs[2];
    let bytes: usize = runs[0].iter().map(Vec::len).sum();
    report(10, T, same, format!("{} traces, {bytes} bytes; serial, serial and parallel runs {}", runs[0].len(), if same { "identical" } else { "differ" }))
}
