use std::f64::consts::PI;

/// Adaptive Simpson quadrature of `f` on [a, b], split into `panels`
/// uniform pieces first so narrow features are not stepped over.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let m = 0.5 * (lo + hi);
            let (fa, fm, fb) = (f(lo), f(m), f(hi));
            simpson(f, lo, hi, fa, fm, fb, (hi - lo) / 6.0 * (fa + 4.0 * fm + fb), tol / panels as f64, 40)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Area-normalized Gaussian with full width at half maximum `g`.
pub fn gaussian(x: f64, g: f64) -> f64 {
    let ln2 = 2f64.ln();
    2.0 * (ln2 / PI).sqrt() / g * (-4.0 * ln2 * x * x / (g * g)).exp()
}

/// Area-normalized Lorentzian with full width at half maximum `l`.
pub fn lorentzian(x: f64, l: f64) -> f64 {
    let h = 0.5 * l;
    h / PI / (x * x + h * h)
}

/// Voigt profile by direct quadrature of ∫ G(x) L(δ − x) dx.
///
/// The integral runs over the Gaussian variable, ±12σ, with breakpoints
/// clustered geometrically around the Lorentzian peak so the adaptive rule
/// resolves it however narrow it is.
pub fn voigt_by_convolution(delta: f64, g: f64, l: f64) -> f64 {
    let sigma = g / (8.0 * 2f64.ln()).sqrt();
    let f = |u: f64| (-0.5 * u * u).exp() / (2.0 * PI).sqrt() * lorentzian(delta - sigma * u, l);
    let (lo, hi) = (-12.0, 12.0);
    let peak = delta / sigma;
    let half = 0.5 * l / sigma;
    let mut breaks = vec![lo, hi, peak];
    for k in 0..6 {
        let r = half * 10f64.powi(k);
        breaks.extend([peak - r, peak + r]);
    }
    let mut breaks: Vec<f64> = breaks.into_iter().filter(|b| (lo..=hi).contains(b)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let estimate = gaussian(delta, g + l).max(lorentzian(delta, g + l));
    let tol = 1e-13 * estimate;
    breaks.windows(2).map(|w| integrate(&f, w[0], w[1], 16, tol)).sum()
}

/// Nuclear spin (doubled) of the stable xenon isotopes.
pub const XENON_SPINS: [(u32, u32); 9] = [(124, 0), (126, 0), (128, 0), (129, 1), (130, 0), (131, 3), (132, 0), (134, 0), (136, 0)];

/// Every hyperfine component of a J → J' transition allowed by ΔF ∈ {0, ±1}
/// (excluding 0 → 0), as (mass, 2F, 2F'). Angular momenta are doubled.
pub fn enumerate_components(j2_lower: u32, j2_upper: u32) -> Vec<(u32, u32, u32)> {
    let levels = |j2: u32, i2: u32| -> Vec<u32> { (j2.abs_diff(i2)..=j2 + i2).step_by(2).collect() };
    let mut out = Vec::new();
    for &(mass, i2) in &XENON_SPINS {
        for f in levels(j2_lower, i2) {
            for fp in levels(j2_upper, i2) {
                if f.abs_diff(fp) <= 2 && !(f == 0 && fp == 0) {
                    out.push((mass, f, fp));
                }
            }
        }
    }
    out
}

/// A saturable absorber given in closed form, α(I) = α₀/(1 + I/I_s)^p.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormAbsorber {
    pub alpha0: f64,
    pub saturation_intensity: f64,
    pub exponent: f64,
    pub path_length_cm: f64,
}

impl xenon_cavity::cavity::Absorber for ClosedFormAbsorber {
    fn unsaturated(&self) -> f64 {
        self.alpha0
    }
    fn alpha(&self, intensity: f64) -> f64 {
        self.alpha0 / (1.0 + intensity / self.saturation_intensity).powf(self.exponent)
    }
    fn path_length_cm(&self) -> f64 {
        self.path_length_cm
    }
}

/// Every fixed point of `map` in [lo, hi], located by sign changes of
/// ln map(I) − ln I on `points` log-spaced samples and refined by linear
/// interpolation between the bracketing samples.
pub fn scan_fixed_points(map: &dyn Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    if b - a < 1e-15 {
        return vec![lo];
    }
    let h = |u: f64| map(u.exp()).ln() - u;
    let step = (b - a) / (points - 1) as f64;
    let mut roots = Vec::new();
    let mut prev = (a, h(a));
    if prev.1 == 0.0 {
        roots.push(lo);
    }
    for k in 1..points {
        let u = a + k as f64 * step;
        let v = h(u);
        if v == 0.0 {
            roots.push(u.exp());
        } else if prev.1 * v < 0.0 {
            let t = prev.1 / (prev.1 - v);
            roots.push((prev.0 + t * (u - prev.0)).exp());
        }
        prev = (u, v);
    }
    roots
}
