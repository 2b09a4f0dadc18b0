//! Damped Gauss–Newton (Levenberg–Marquardt) fitting of saturable Voigt dips.
//!
//! Model on the ratio scale, for probe power P:
//!
//! ```text
//! r(ν) = baseline − Σ_d depth_d · U_d(ν − center_d) / (1 + P/P_sat,d)
//! ```
//!
//! where U is the Voigt profile scaled to unit peak. On the optical-depth
//! scale the same dips add to −ln(baseline).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::MHZ_PER_THZ;
use crate::lineshape::{faddeeva, faddeeva_derivative, FWHM_TO_SIGMA};
use crate::protocol::SpectrumTrace;
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 500;
pub const STEP_TOLERANCE: f64 = 1e-10;
pub const COST_TOLERANCE: f64 = 1e-12;
pub const INITIAL_DAMPING: f64 = 1e-3;
const DAMPING_UP: f64 = 10.0;
const DAMPING_DOWN: f64 = 3.0;
/// Consecutive rejected steps that count as divergence.
pub const DIVERGENCE_STEPS: usize = 20;
/// Condition number of the column-scaled Jacobian above which the fit is
/// considered rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dip {
    pub center_thz: f64,
    pub gaussian_fwhm_mhz: f64,
    pub lorentzian_fwhm_mhz: f64,
    pub depth: f64,
    pub saturation_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitModel {
    pub baseline: f64,
    pub dips: Vec<Dip>,
    pub probe_power_w: f64,
}

impl FitModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.baseline) {
            return Err(Error::validation("model.baseline", format!("{} is outside [0, 1]", self.baseline)));
        }
        if !(self.probe_power_w > 0.0 && self.probe_power_w.is_finite()) {
            return Err(Error::validation("model.probe_power_w", format!("{} must be positive", self.probe_power_w)));
        }
        for (i, d) in self.dips.iter().enumerate() {
            let at = |f: &str| format!("model.dips[{i}].{f}");
            if !d.center_thz.is_finite() {
                return Err(Error::validation(at("center_thz"), "not finite"));
            }
            if !(d.gaussian_fwhm_mhz > 0.0 && d.lorentzian_fwhm_mhz > 0.0) {
                return Err(Error::validation(at("gaussian_fwhm_mhz"), "widths must be positive"));
            }
            if !(d.depth >= 0.0) {
                return Err(Error::validation(at("depth"), format!("{} must be non-negative", d.depth)));
            }
            if !(d.saturation_power_w > 0.0) {
                return Err(Error::validation(at("saturation_power_w"), "must be positive"));
            }
        }
        Ok(())
    }

    /// Model ratio at `frequency_thz` for the model's probe power.
    pub fn ratio(&self, frequency_thz: f64) -> f64 {
        self.ratio_at_power(frequency_thz, self.probe_power_w)
    }

    pub fn ratio_at_power(&self, frequency_thz: f64, power_w: f64) -> f64 {
        self.baseline - self.absorption(frequency_thz, power_w)
    }

    /// Σ depth·U/(1 + P/P_sat).
    fn absorption(&self, frequency_thz: f64, power_w: f64) -> f64 {
        self.dips
            .iter()
            .map(|d| {
                let x = (frequency_thz - d.center_thz) * MHZ_PER_THZ;
                d.depth * unit_voigt(x, d.gaussian_fwhm_mhz, d.lorentzian_fwhm_mhz).value / (1.0 + power_w / d.saturation_power_w)
            })
            .sum()
    }
}

/// Voigt scaled to unit peak, with its partial derivatives.
#[derive(Debug, Clone, Copy)]
pub struct UnitVoigt {
    pub value: f64,
    pub d_detuning: f64,
    pub d_gaussian: f64,
    pub d_lorentzian: f64,
}

/// U(x; G, L) = Re w(z)/Re w(i·y₀) with z = (x + iL/2)/(σ√2) and y₀ = Im z.
pub fn unit_voigt(x: f64, g: f64, l: f64) -> UnitVoigt {
    let sigma = g * FWHM_TO_SIGMA;
    let s = sigma * std::f64::consts::SQRT_2;
    let z = Complex64::new(x / s, 0.5 * l / s);
    let w = faddeeva(z);
    let dw = faddeeva_derivative(z, w);
    let z0 = Complex64::new(0.0, z.im);
    let w0 = faddeeva(z0);
    let dw0 = faddeeva_derivative(z0, w0);
    let (num, den) = (w.re, w0.re);
    // ∂z/∂x = 1/s, ∂z/∂σ = −z/σ, ∂z/∂L = i/(2s); the same for z0 with x = 0.
    let i = Complex64::new(0.0, 1.0);
    let quotient = |dn: f64, dd: f64| (dn * den - num * dd) / (den * den);
    let d_x = (dw / s).re / den;
    let d_sigma = quotient((-dw * z / sigma).re, (-dw0 * z0 / sigma).re);
    let d_l = quotient((dw * i / (2.0 * s)).re, (dw0 * i / (2.0 * s)).re);
    UnitVoigt {
        value: num / den,
        d_detuning: d_x,
        d_gaussian: d_sigma * FWHM_TO_SIGMA,
        d_lorentzian: d_l,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScale {
    /// Residuals on the transmission ratio.
    #[default]
    Ratio,
    /// Residuals on −ln(ratio); samples with ratio ≤ 0 are skipped.
    OpticalDepth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub scale: FitScale,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            scale: FitScale::Ratio,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Names of the free parameters, in the order of `covariance_diagonal`.
    pub parameters: Vec<String>,
    pub covariance_diagonal: Vec<f64>,
    /// Residual rms at the start and after every accepted step.
    pub residual_history: Vec<f64>,
}

/// Parameter layout: baseline, then per dip center (MHz from `anchor_thz`),
/// G, L, depth and, when free, P_sat in nW.
#[derive(Debug, Clone)]
struct Layout {
    dips: usize,
    free_psat: bool,
    anchor_thz: f64,
}

impl Layout {
    fn per_dip(&self) -> usize {
        if self.free_psat {
            5
        } else {
            4
        }
    }

    fn len(&self) -> usize {
        1 + self.dips * self.per_dip()
    }

    fn names(&self) -> Vec<String> {
        let mut names = vec!["baseline".to_string()];
        for d in 0..self.dips {
            for f in ["center_mhz", "gaussian_fwhm_mhz", "lorentzian_fwhm_mhz", "depth", "saturation_power_nw"]
                .iter()
                .take(self.per_dip())
            {
                names.push(format!("dips[{d}].{f}"));
            }
        }
        names
    }

    fn pack(&self, m: &FitModel) -> DVector<f64> {
        let mut p = Vec::with_capacity(self.len());
        p.push(m.baseline);
        for d in &m.dips {
            p.push((d.center_thz - self.anchor_thz) * MHZ_PER_THZ);
            p.push(d.gaussian_fwhm_mhz);
            p.push(d.lorentzian_fwhm_mhz);
            p.push(d.depth);
            if self.free_psat {
                p.push(d.saturation_power_w * 1e9);
            }
        }
        DVector::from_vec(p)
    }

    fn unpack(&self, p: &DVector<f64>, template: &FitModel) -> FitModel {
        let k = self.per_dip();
        let dips = template
            .dips
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let q = &p.as_slice()[1 + i * k..1 + (i + 1) * k];
                Dip {
                    center_thz: self.anchor_thz + q[0] / MHZ_PER_THZ,
                    gaussian_fwhm_mhz: q[1],
                    lorentzian_fwhm_mhz: q[2],
                    depth: q[3],
                    saturation_power_w: if self.free_psat { q[4] * 1e-9 } else { d.saturation_power_w },
                }
            })
            .collect();
        FitModel {
            baseline: p[0],
            dips,
            probe_power_w: template.probe_power_w,
        }
    }

    fn feasible(&self, p: &DVector<f64>) -> bool {
        let k = self.per_dip();
        p.iter().all(|v| v.is_finite())
            && p[0] > 0.0
            && p[0] <= 1.0
            && (0..self.dips).all(|i| {
                let q = &p.as_slice()[1 + i * k..1 + (i + 1) * k];
                q[1] > 0.0 && q[2] > 0.0 && q[3] >= 0.0 && (!self.free_psat || q[4] > 0.0)
            })
    }
}

/// One observation: frequency offset from the anchor (MHz), probe power, target.
#[derive(Debug, Clone, Copy)]
struct Point {
    x_mhz: f64,
    power_w: f64,
    y: f64,
}

struct Problem<'a> {
    layout: Layout,
    template: &'a FitModel,
    points: Vec<Point>,
    scale: FitScale,
}

impl Problem<'_> {
    /// Residuals and analytic Jacobian at `p`.
    fn evaluate(&self, p: &DVector<f64>, with_jacobian: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let n = self.points.len();
        let k = self.layout.per_dip();
        let mut r = DVector::zeros(n);
        let mut jac = with_jacobian.then(|| DMatrix::zeros(n, self.layout.len()));
        let baseline = p[0];
        for (row, pt) in self.points.iter().enumerate() {
            let mut absorption = 0.0;
            for d in 0..self.layout.dips {
                let q = &p.as_slice()[1 + d * k..1 + (d + 1) * k];
                let psat_w = if self.layout.free_psat {
                    q[4] * 1e-9
                } else {
                    self.template.dips[d].saturation_power_w
                };
                let g = 1.0 / (1.0 + pt.power_w / psat_w);
                let u = unit_voigt(pt.x_mhz - q[0], q[1], q[2]);
                absorption += q[3] * u.value * g;
                if let Some(j) = jac.as_mut() {
                    let c = 1 + d * k;
                    // Derivatives of +absorption; signs are fixed below.
                    j[(row, c)] = -q[3] * g * u.d_detuning;
                    j[(row, c + 1)] = q[3] * g * u.d_gaussian;
                    j[(row, c + 2)] = q[3] * g * u.d_lorentzian;
                    j[(row, c + 3)] = u.value * g;
                    if self.layout.free_psat {
                        // ∂g/∂P_sat[nW] = g²·P/P_sat² · 1e-9
                        j[(row, c + 4)] = q[3] * u.value * g * g * pt.power_w / (psat_w * psat_w) * 1e-9;
                    }
                }
            }
            let (model, sign, d_baseline) = match self.scale {
                FitScale::Ratio => (baseline - absorption, -1.0, 1.0),
                FitScale::OpticalDepth => (-baseline.ln() + absorption, 1.0, -1.0 / baseline),
            };
            r[row] = model - pt.y;
            if let Some(j) = jac.as_mut() {
                for col in 1..self.layout.len() {
                    j[(row, col)] *= sign;
                }
                j[(row, 0)] = d_baseline;
            }
        }
        (r, jac)
    }
}

fn condition_number(j: &DMatrix<f64>) -> f64 {
    let mut scaled = j.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn run(problem: Problem<'_>, options: &FitOptions) -> Result<FitResult> {
    let layout = &problem.layout;
    let n_params = layout.len();
    let n = problem.points.len();
    if n < 3 * n_params {
        return Err(Error::FitPrecondition(format!(
            "{n} samples for {n_params} free parameters; at least {} are required",
            3 * n_params
        )));
    }
    let mut p = layout.pack(problem.template);
    if !layout.feasible(&p) {
        return Err(Error::FitPrecondition("initial model violates parameter bounds".into()));
    }
    let (mut r, j) = problem.evaluate(&p, true);
    let mut j = j.expect("jacobian requested");
    let condition = condition_number(&j);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let mut cost = r.norm_squared();
    let rms = |c: f64| (c / n as f64).sqrt();
    let mut residual_history = vec![rms(cost)];
    let mut lambda = INITIAL_DAMPING;
    let mut rejected = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut a = jtj.clone();
        for i in 0..n_params {
            a[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
        }
        let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
            lambda *= DAMPING_UP;
            rejected += 1;
            if rejected >= DIVERGENCE_STEPS {
                return Err(Error::Divergence { steps: rejected });
            }
            continue;
        };
        let rel_step = step
            .iter()
            .zip(p.iter())
            .map(|(d, v)| d.abs() / v.abs().max(1e-12))
            .fold(0.0, f64::max);
        let trial = &p + &step;
        let trial_cost = if layout.feasible(&trial) {
            problem.evaluate(&trial, false).0.norm_squared()
        } else {
            f64::INFINITY
        };
        if trial_cost < cost {
            let change = (cost - trial_cost) / cost;
            p = trial;
            let (nr, nj) = problem.evaluate(&p, true);
            r = nr;
            j = nj.expect("jacobian requested");
            cost = trial_cost;
            residual_history.push(rms(cost));
            lambda /= DAMPING_DOWN;
            rejected = 0;
            if rel_step < STEP_TOLERANCE || change < COST_TOLERANCE {
                converged = true;
                break;
            }
        } else {
            if rel_step < STEP_TOLERANCE || cost == 0.0 || (trial_cost.is_finite() && (trial_cost - cost) <= COST_TOLERANCE * cost) {
                converged = true;
                break;
            }
            lambda *= DAMPING_UP;
            rejected += 1;
            if rejected >= DIVERGENCE_STEPS {
                return Err(Error::Divergence { steps: rejected });
            }
        }
    }

    let dof = (n - n_params).max(1) as f64;
    let jtj = j.transpose() * &j;
    let covariance_diagonal = match jtj.try_inverse() {
        Some(inv) => (0..n_params).map(|i| inv[(i, i)] * cost / dof).collect(),
        None => vec![f64::INFINITY; n_params],
    };
    Ok(FitResult {
        model: layout.unpack(&p, problem.template),
        residual_rms: rms(cost),
        iterations,
        converged,
        parameters: layout.names(),
        covariance_diagonal,
        residual_history,
    })
}

fn target(scale: FitScale, ratio: f64, od: f64) -> Option<f64> {
    match scale {
        FitScale::Ratio => Some(ratio),
        FitScale::OpticalDepth => od.is_finite().then_some(od),
    }
}

/// Fits one trace. P_sat is held at its initial value because only
/// depth/(1 + P/P_sat) is identifiable from a single probe power.
pub fn fit_trace(trace: &SpectrumTrace, initial: &FitModel, options: &FitOptions) -> Result<FitResult> {
    initial.validate()?;
    trace.validate()?;
    let anchor = trace.samples[0].resonance_thz;
    let mut template = initial.clone();
    template.probe_power_w = trace.probe_power_w();
    let points = trace
        .samples
        .iter()
        .filter_map(|s| {
            target(options.scale, s.ratio, s.optical_depth).map(|y| Point {
                x_mhz: (s.resonance_thz - anchor) * MHZ_PER_THZ,
                power_w: template.probe_power_w,
                y,
            })
        })
        .collect();
    let problem = Problem {
        layout: Layout {
            dips: initial.dips.len(),
            free_psat: false,
            anchor_thz: anchor,
        },
        template: &template,
        points,
        scale: options.scale,
    };
    run(problem, options)
}

/// Joint fit of traces taken at different probe powers, sharing every dip
/// parameter; P_sat is free. The returned model carries the first trace's power.
pub fn fit_traces(traces: &[SpectrumTrace], initial: &FitModel, options: &FitOptions) -> Result<FitResult> {
    initial.validate()?;
    let Some(first) = traces.first() else {
        return Err(Error::FitPrecondition("no traces".into()));
    };
    let mut powers: Vec<f64> = traces.iter().map(|t| t.probe_power_w()).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    if powers.len() < 2 {
        return Err(Error::FitPrecondition("a joint fit needs at least two distinct probe powers".into()));
    }
    let anchor = first.samples[0].resonance_thz;
    let mut template = initial.clone();
    template.probe_power_w = first.probe_power_w();
    let mut points = Vec::new();
    for t in traces {
        t.validate()?;
        for s in &t.samples {
            if let Some(y) = target(options.scale, s.ratio, s.optical_depth) {
                points.push(Point {
                    x_mhz: (s.resonance_thz - anchor) * MHZ_PER_THZ,
                    power_w: s.probe_power_w(),
                    y,
                });
            }
        }
    }
    let problem = Problem {
        layout: Layout {
            dips: initial.dips.len(),
            free_psat: true,
            anchor_thz: anchor,
        },
        template: &template,
        points,
        scale: options.scale,
    };
    run(problem, options)
}

/// Greedy starting model: repeatedly place a dip at the largest remaining
/// absorption, sized from its half-depth width, until `max_dips` dips are
/// placed or the remainder is below a tenth of the first depth.
pub fn initial_guess(trace: &SpectrumTrace, max_dips: usize) -> Result<FitModel> {
    trace.validate()?;
    let s = &trace.samples;
    let mut sorted = trace.ratios();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[(sorted.len() * 95 / 100).min(sorted.len() - 1)].clamp(1e-6, 1.0);
    let mut remainder: Vec<f64> = s.iter().map(|x| baseline - x.ratio).collect();
    let mut dips = Vec::new();
    let mut first_depth = None;
    while dips.len() < max_dips {
        let (m, &depth) = remainder
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("trace is non-empty");
        if depth <= 0.0 || first_depth.is_some_and(|f: f64| depth < 0.1 * f) {
            break;
        }
        first_depth.get_or_insert(depth);
        let half = 0.5 * depth;
        let l = (0..m).rev().find(|&i| remainder[i] < half).unwrap_or(0);
        let r = (m + 1..s.len()).find(|&i| remainder[i] < half).unwrap_or(s.len() - 1);
        let width = ((s[r].resonance_thz - s[l].resonance_thz) * MHZ_PER_THZ).max(1e-3);
        let dip = Dip {
            center_thz: s[m].resonance_thz,
            gaussian_fwhm_mhz: 0.8 * width,
            lorentzian_fwhm_mhz: 0.25 * width,
            depth,
            saturation_power_w: trace.probe_power_w(),
        };
        // Depth in the model is divided by 1 + P/P_sat = 2 here.
        let placed = Dip { depth: 2.0 * depth, ..dip };
        for (i, x) in s.iter().enumerate() {
            let off = (x.resonance_thz - dip.center_thz) * MHZ_PER_THZ;
            remainder[i] -= depth * unit_voigt(off, dip.gaussian_fwhm_mhz, dip.lorentzian_fwhm_mhz).value;
        }
        dips.push(placed);
    }
    Ok(FitModel {
        baseline,
        dips,
        probe_power_w: trace.probe_power_w(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationEstimate {
    /// Saturation power, W. `f64::INFINITY` when the ratio shows no power
    /// dependence (the best fit sits at the upper end of the search range).
    pub p_sat_w: f64,
    /// Depth d of the fitted curve r(P) = 1 − d/(1 + P/P_sat).
    pub depth: f64,
    /// (probe power W, ratio) at the sample nearest the requested frequency.
    pub curve: Vec<(f64, f64)>,
}

/// Fits r(P) = 1 − d/(1 + P/P_sat) to the ratio nearest `frequency_thz` in
/// each trace. d is solved in closed form for each trial P_sat, leaving a
/// one-dimensional minimization over log P_sat.
pub fn estimate_saturation_power(traces: &[SpectrumTrace], frequency_thz: f64) -> Result<SaturationEstimate> {
    let mut curve = Vec::with_capacity(traces.len());
    for (i, t) in traces.iter().enumerate() {
        t.validate()?;
        let (lo, hi) = (t.samples[0].resonance_thz, t.samples[t.len() - 1].resonance_thz);
        if !(lo..=hi).contains(&frequency_thz) {
            return Err(Error::validation(
                format!("traces[{i}]"),
                format!("{frequency_thz} THz is outside the trace range [{lo}, {hi}]"),
            ));
        }
        let s = &t.samples[t.nearest(frequency_thz)];
        curve.push((s.probe_power_w(), s.ratio));
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut distinct: Vec<f64> = curve.iter().map(|c| c.0).collect();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::FitPrecondition(format!(
            "{} distinct probe powers; at least 3 are required",
            distinct.len()
        )));
    }
    let profile = |log_psat: f64| {
        let psat = log_psat.exp();
        let (mut sgy, mut sgg) = (0.0, 0.0);
        for &(p, r) in &curve {
            let g = 1.0 / (1.0 + p / psat);
            sgy += g * (1.0 - r);
            sgg += g * g;
        }
        let d = sgy / sgg;
        let cost: f64 = curve.iter().map(|&(p, r)| (1.0 - d / (1.0 + p / psat) - r).powi(2)).sum();
        (cost, d)
    };
    let (pmin, pmax) = (distinct[0], distinct[distinct.len() - 1]);
    let (a, b) = ((pmin * 1e-4).ln(), (pmax * 1e4).ln());
    // Coarse grid, then golden section around the best grid point.
    let grid = 400;
    let h = (b - a) / grid as f64;
    let best = (0..=grid)
        .map(|k| a + k as f64 * h)
        .min_by(|x, y| profile(*x).0.total_cmp(&profile(*y).0))
        .expect("non-empty grid");
    if best >= b - 0.5 * h {
        return Ok(SaturationEstimate {
            p_sat_w: f64::INFINITY,
            depth: profile(b).1,
            curve,
        });
    }
    let (mut lo, mut hi) = ((best - h).max(a), (best + h).min(b));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-10 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if profile(x1).0 <= profile(x2).0 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(SaturationEstimate {
        p_sat_w: x.exp(),
        depth: profile(x).1,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ScanSample;
    use approx::assert_relative_eq;

    fn model() -> FitModel {
        FitModel {
            baseline: 0.98,
            dips: vec![
                Dip {
                    center_thz: 364.0955,
                    gaussian_fwhm_mhz: 390.0,
                    lorentzian_fwhm_mhz: 120.0,
                    depth: 0.6,
                    saturation_power_w: 4e-9,
                },
                Dip {
                    center_thz: 364.097,
                    gaussian_fwhm_mhz: 380.0,
                    lorentzian_fwhm_mhz: 90.0,
                    depth: 0.4,
                    saturation_power_w: 10e-9,
                },
            ],
            probe_power_w: 0.5e-9,
        }
    }

    fn trace_of(m: &FitModel, power: f64) -> SpectrumTrace {
        let samples = (0..241)
            .map(|i| {
                let f = 364.0935 + i as f64 * 25e-6;
                ScanSample::new(f, power * 1e9, 1.0, m.ratio_at_power(f, power))
            })
            .collect();
        SpectrumTrace::new(samples).unwrap()
    }

    #[test]
    fn unit_voigt_gradient_matches_finite_differences() {
        for &(x, g, l) in &[(0.0, 300.0, 50.0), (120.0, 394.0, 23.0), (-700.0, 50.0, 300.0), (5.0, 10.0, 1.0)] {
            let u = unit_voigt(x, g, l);
            let h = |v: f64| 1e-6 * v.abs().max(1.0);
            let fd = |f: &dyn Fn(f64) -> f64, v: f64| (f(v + h(v)) - f(v - h(v))) / (2.0 * h(v));
            let dx = fd(&|v| unit_voigt(v, g, l).value, x);
            let dg = fd(&|v| unit_voigt(x, v, l).value, g);
            let dl = fd(&|v| unit_voigt(x, g, v).value, l);
            for (a, b) in [(u.d_detuning, dx), (u.d_gaussian, dg), (u.d_lorentzian, dl)] {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1e-8), "{a} vs {b} at {x},{g},{l}");
            }
        }
        assert_relative_eq!(unit_voigt(0.0, 300.0, 40.0).value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn model_jacobian_matches_finite_differences() {
        let m = model();
        let traces = [trace_of(&m, 0.5e-9), trace_of(&m, 19e-9)];
        for scale in [FitScale::Ratio, FitScale::OpticalDepth] {
            let layout = Layout { dips: 2, free_psat: true, anchor_thz: 364.0935 };
            let points = traces
                .iter()
                .flat_map(|t| t.samples.iter())
                .step_by(7)
                .map(|s| Point { x_mhz: (s.resonance_thz - 364.0935) * 1e6, power_w: s.probe_power_w(), y: s.ratio })
                .collect();
            let problem = Problem { layout: layout.clone(), template: &m, points, scale };
            let p = layout.pack(&m);
            let (_, j) = problem.evaluate(&p, true);
            let j = j.unwrap();
            for col in 0..layout.len() {
                let h = 1e-6 * p[col].abs().max(1e-3);
                let mut pp = p.clone();
                pp[col] += h;
                let mut pm = p.clone();
                pm[col] -= h;
                let fd = (problem.evaluate(&pp, false).0 - problem.evaluate(&pm, false).0) / (2.0 * h);
                let scale_ = j.column(col).amax().max(1e-12);
                for row in 0..fd.len() {
                    assert!((fd[row] - j[(row, col)]).abs() <= 1e-5 * scale_, "{scale:?} col {col} row {row}: {} vs {}", fd[row], j[(row, col)]);
                }
            }
        }
    }

    #[test]
    fn exact_initializer_is_a_fixed_point() {
        let m = model();
        let t = trace_of(&m, m.probe_power_w);
        let r = fit_trace(&t, &m, &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 3, "{}", r.iterations);
        assert_relative_eq!(r.model.baseline, m.baseline, max_relative = 1e-6);
        for (a, b) in r.model.dips.iter().zip(&m.dips) {
            assert_relative_eq!(a.center_thz, b.center_thz, max_relative = 1e-6);
            assert_relative_eq!(a.depth, b.depth, max_relative = 1e-6);
            assert_relative_eq!(a.gaussian_fwhm_mhz, b.gaussian_fwhm_mhz, max_relative = 1e-6);
        }
    }

    #[test]
    fn perturbed_initializer_recovers_truth() {
        let m = model();
        let t = trace_of(&m, m.probe_power_w);
        let mut init = m.clone();
        init.baseline *= 1.01;
        for (k, d) in init.dips.iter_mut().enumerate() {
            let f = if k == 0 { 1.2 } else { 0.8 };
            d.gaussian_fwhm_mhz *= f;
            d.lorentzian_fwhm_mhz /= f;
            d.depth *= f;
            d.center_thz += 40e-6 * f;
        }
        let r = fit_trace(&t, &init, &FitOptions::default()).unwrap();
        assert!(r.converged);
        for (a, b) in r.model.dips.iter().zip(&m.dips) {
            assert!((a.center_thz - b.center_thz).abs() * 1e6 < 1e-4 * 1e3, "center");
            assert_relative_eq!(a.gaussian_fwhm_mhz, b.gaussian_fwhm_mhz, max_relative = 1e-4);
            assert_relative_eq!(a.lorentzian_fwhm_mhz, b.lorentzian_fwhm_mhz, max_relative = 1e-4);
            assert_relative_eq!(a.depth, b.depth, max_relative = 1e-4);
        }
        assert!(r.residual_rms < 1e-9);
    }

    #[test]
    fn joint_fit_recovers_saturation_power() {
        let m = model();
        let traces: Vec<_> = [0.5e-9, 2e-9, 19e-9].iter().map(|&p| trace_of(&m, p)).collect();
        let mut init = m.clone();
        for d in &mut init.dips {
            d.saturation_power_w *= 1.5;
            d.depth *= 0.9;
        }
        let r = fit_traces(&traces, &init, &FitOptions::default()).unwrap();
        for (a, b) in r.model.dips.iter().zip(&m.dips) {
            assert_relative_eq!(a.saturation_power_w, b.saturation_power_w, max_relative = 1e-5);
        }
        assert_eq!(r.parameters.len(), r.covariance_diagonal.len());
    }

    #[test]
    fn optical_depth_scale() {
        let mut m = model();
        m.baseline = 1.0;
        let od_trace = {
            let samples = (0..241)
                .map(|i| {
                    let f = 364.0935 + i as f64 * 25e-6;
                    let od = m.absorption(f, m.probe_power_w);
                    ScanSample::new(f, m.probe_power_w * 1e9, 1.0, (-od).exp())
                })
                .collect();
            SpectrumTrace::new(samples).unwrap()
        };
        let mut init = m.clone();
        init.baseline = 0.99;
        init.dips[0].depth *= 1.1;
        let opts = FitOptions { scale: FitScale::OpticalDepth, ..Default::default() };
        let r = fit_trace(&od_trace, &init, &opts).unwrap();
        assert_relative_eq!(r.model.dips[0].depth, m.dips[0].depth, max_relative = 1e-6);
    }

    #[test]
    fn greedy_guess_finds_dips() {
        let m = model();
        let t = trace_of(&m, m.probe_power_w);
        let g = initial_guess(&t, 4).unwrap();
        assert!(!g.dips.is_empty() && g.dips.len() <= 4);
        assert!((g.dips[0].center_thz - 364.0955).abs() < 100e-6);
        let r = fit_trace(&t, &FitModel { dips: g.dips[..2.min(g.dips.len())].to_vec(), ..g }, &FitOptions::default()).unwrap();
        assert!(r.residual_rms < 1e-3, "{}", r.residual_rms);
    }

    #[test]
    fn too_few_samples() {
        let m = model();
        let t = trace_of(&m, 1e-9);
        let short = SpectrumTrace::new(t.samples[..20].to_vec()).unwrap();
        assert!(matches!(fit_trace(&short, &m, &FitOptions::default()), Err(Error::FitPrecondition(_))));
    }

    #[test]
    fn duplicate_dips_are_rank_deficient() {
        let mut m = model();
        m.dips[1] = m.dips[0];
        let t = trace_of(&model(), 1e-9);
        assert!(matches!(fit_trace(&t, &m, &FitOptions::default()), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn saturation_estimate() {
        let mut m = model();
        m.baseline = 1.0;
        m.dips.truncate(1);
        let traces: Vec<_> = [0.5e-9, 2e-9, 5e-9, 19e-9].iter().map(|&p| trace_of(&m, p)).collect();
        let est = estimate_saturation_power(&traces, 364.0955).unwrap();
        assert_relative_eq!(est.p_sat_w, 4e-9, max_relative = 1e-6);
        assert_eq!(est.curve.len(), 4);

        let flat: Vec<_> = [0.5e-9, 2e-9, 19e-9]
            .iter()
            .map(|&p| SpectrumTrace::new((0..5).map(|i| ScanSample::new(364.0 + i as f64 * 1e-5, p * 1e9, 1.0, 0.7)).collect()).unwrap())
            .collect();
        assert_eq!(estimate_saturation_power(&flat, 364.00002).unwrap().p_sat_w, f64::INFINITY);
        assert!(estimate_saturation_power(&flat[..2], 364.00002).is_err());
        assert!(estimate_saturation_power(&flat, 365.0).is_err());
    }
}
