//! Faddeeva function w(z) = exp(−z²)·erfc(−iz) for Im z ≥ 0.
//!
//! Weideman's rational expansion covers the central region; the Laplace
//! continued fraction takes over for large |z|. Close to the real axis at
//! moderate |x|, Re w is tiny and is evaluated from a Taylor series in y
//! around the real axis so that it keeps full relative precision.

// Coefficient tables are kept at the precision they were generated with.
#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;
use std::sync::LazyLock;

use num_complex::Complex64;

const WEIDEMAN_N: usize = 40;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

struct Weideman {
    l: f64,
    /// Polynomial coefficients, highest degree first.
    coeffs: Vec<f64>,
}

static WEIDEMAN: LazyLock<Weideman> = LazyLock::new(|| {
    let n = WEIDEMAN_N;
    let m = 2 * n;
    let l = (n as f64 / 2f64.sqrt()).sqrt();
    let mi = m as i64;
    let samples: Vec<(f64, f64)> = (-mi + 1..mi)
        .map(|k| {
            let theta = k as f64 * PI / m as f64;
            let t = l * (theta / 2.0).tan();
            (k as f64, (-t * t).exp() * (l * l + t * t))
        })
        .collect();
    let mut coeffs: Vec<f64> = (1..=n)
        .map(|order| {
            samples
                .iter()
                .map(|&(k, f)| f * (PI * order as f64 * k / m as f64).cos())
                .sum::<f64>()
                / (2 * m) as f64
        })
        .collect();
    coeffs.reverse();
    Weideman { l, coeffs }
});

fn weideman(z: Complex64) -> Complex64 {
    let w = &*WEIDEMAN;
    let iz = Complex64::i() * z;
    let denom = w.l - iz;
    let zz = (w.l + iz) / denom;
    let p = w
        .coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * zz + a);
    2.0 * p / (denom * denom) + FRAC_1_SQRT_PI / denom
}

fn continued_fraction(z: Complex64) -> Complex64 {
    let r = z.norm();
    let depth = if r > 40.0 { 8 } else if r > 20.0 { 16 } else { 40 };
    let mut tail = Complex64::new(0.0, 0.0);
    for k in (1..=depth).rev() {
        tail = (k as f64 / 2.0) / (z - tail);
    }
    Complex64::i() * FRAC_1_SQRT_PI / (z - tail)
}

/// Taylor expansion in y about the real axis: w(x+iy) = Σ (iy)ⁿ w⁽ⁿ⁾(x)/n!.
/// Re w(x) = exp(−x²) exactly; Im w(x) from the rational expansion.
fn near_real_axis(x: f64, y: f64) -> Complex64 {
    let w0 = Complex64::new((-x * x).exp(), weideman(Complex64::new(x, 0.0)).im);
    let two_i_over_sqrt_pi = Complex64::new(0.0, 2.0 * FRAC_1_SQRT_PI);
    let mut prev = w0;
    let mut cur = -2.0 * x * w0 + two_i_over_sqrt_pi;
    let iy = Complex64::new(0.0, y);
    let mut power = iy;
    let mut sum = w0 + power * cur;
    let mut fact = 1.0;
    for n in 1..30 {
        let next = -2.0 * x * cur - 2.0 * n as f64 * prev;
        prev = cur;
        cur = next;
        power *= iy;
        fact *= (n + 1) as f64;
        let term = power * cur / fact;
        sum += term;
        if term.norm() <= 1e-17 * sum.re.abs().max(1e-300) && term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

/// Faddeeva function for Im z ≥ 0.
pub fn faddeeva(z: Complex64) -> Complex64 {
    debug_assert!(z.im >= 0.0, "faddeeva is evaluated in the upper half plane only");
    let (x, y) = (z.re, z.im);
    if y == 0.0 && x.abs() < 26.0 {
        return Complex64::new((-x * x).exp(), weideman(z).im);
    }
    if x.abs() + y > 12.0 {
        return continued_fraction(z);
    }
    if y < 0.15 && x.abs() > 2.5 {
        return near_real_axis(x, y);
    }
    weideman(z)
}

/// dw/dz = −2z·w(z) + 2i/√π.
pub fn faddeeva_derivative(z: Complex64, w: Complex64) -> Complex64 {
    -2.0 * z * w + Complex64::new(0.0, 2.0 * FRAC_1_SQRT_PI)
}
