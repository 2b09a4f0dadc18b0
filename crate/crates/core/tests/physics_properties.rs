use std::f64::consts::PI;

use proptest::prelude::*;
use xenon_cavity::cavity::{airy_transmission, circulating_power, solve_at_offset, LinearAbsorber, SteadyStateSolver};
use xenon_cavity::lineshape::voigt;
use xenon_cavity::{CavitySpec, LineCatalog, LineshapeQuery, MediumParams, PreparedMedium, SaturationKind, SaturationModel};

/// Adaptive Simpson on [a, b].
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn voigt_area(g: f64, l: f64) -> f64 {
    let s = g.max(l);
    let f = |t: f64| {
        let c = t.cos();
        if c <= 0.0 {
            return 0.0;
        }
        voigt(&LineshapeQuery::new(s * t.tan(), g, l)).unwrap() * s / (c * c)
    };
    let h = 0.5 * PI;
    // Split at the core so the adaptive rule sees the peak.
    let core = (4.0 * (g + l) / s).atan().min(h);
    simpson(&f, -h, -core, 1e-11) + simpson(&f, -core, core, 1e-11) + simpson(&f, core, h, 1e-11)
}

fn medium(kind: SaturationKind, density: f64) -> PreparedMedium {
    let params = MediumParams {
        metastable_density_cm3: density,
        model: SaturationModel::of_kind(kind),
        ..Default::default()
    };
    PreparedMedium::new(&params, &LineCatalog::natural_xenon()).unwrap()
}

const KINDS: [SaturationKind; 3] = [SaturationKind::Homogeneous, SaturationKind::Inhomogeneous, SaturationKind::VelocitySelective];

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn voigt_has_unit_area(g in 1.0f64..800.0, l in 0.5f64..400.0) {
        let area = voigt_area(g, l);
        prop_assert!((area - 1.0).abs() < 1e-6, "G={} L={} area={}", g, l, area);
    }

    #[test]
    fn voigt_even_positive_monotone(g in 0.0f64..800.0, l in 0.1f64..400.0, d in 0.0f64..3000.0, step in 0.0f64..200.0) {
        let v = |x: f64| voigt(&LineshapeQuery::new(x, g, l)).unwrap();
        prop_assert_eq!(v(d), v(-d));
        prop_assert!(v(d) > 0.0);
        prop_assert!(v(d + step) <= v(d));
        prop_assert!(v(d) <= v(0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn alpha_bounded_and_decreasing(kind_ix in 0usize..3, offset in -7000.0f64..4000.0, i1 in -6.0f64..2.0, di in 0.1f64..3.0) {
        let m = medium(KINDS[kind_ix], 1.84e6);
        let (lo, hi) = (10f64.powf(i1), 10f64.powf(i1 + di));
        let a0 = m.alpha_at(offset, 0.0).unwrap();
        let a1 = m.alpha_at(offset, lo).unwrap();
        let a2 = m.alpha_at(offset, hi).unwrap();
        prop_assert!(a0 >= a1 && a1 > a2 && a2 >= 0.0, "{} {} {}", a0, a1, a2);
    }

    #[test]
    fn alpha_linear_in_density(kind_ix in 0usize..3, offset in -7000.0f64..4000.0, i in -5.0f64..1.0, k in 0.1f64..10.0) {
        let a = medium(KINDS[kind_ix], 1e6).alpha_at(offset, 10f64.powf(i)).unwrap();
        let b = medium(KINDS[kind_ix], 1e6 * k).alpha_at(offset, 10f64.powf(i)).unwrap();
        prop_assert!((b - k * a).abs() <= 1e-12 * b.abs().max(1e-300), "{} vs {}", b, k * a);
    }

    #[test]
    fn transmission_ratio_monotone_in_power(offset in -7000.0f64..4000.0, p1 in -12.0f64..-5.0, dp in 0.05f64..2.0, cav in -1.0f64..1.0) {
        let m = medium(SaturationKind::VelocitySelective, 1.84e6);
        let spec = CavitySpec::default();
        let lo = solve_at_offset(10f64.powf(p1), offset, cav, &spec, &m).unwrap();
        let hi = solve_at_offset(10f64.powf(p1 + dp), offset, cav, &spec, &m).unwrap();
        prop_assert!(hi.transmission_ratio >= lo.transmission_ratio - 1e-12);
        prop_assert!(hi.transmission_ratio <= 1.0 + 1e-9 && lo.transmission_ratio >= 0.0);
        prop_assert!(lo.residual <= 1e-8 && hi.residual <= 1e-8);
    }

    #[test]
    fn linear_absorber_reproduces_airy(alpha in 0.0f64..0.05, det in -10.0f64..10.0, p in 1e-12f64..1e-3) {
        let spec = CavitySpec::default();
        let abs = LinearAbsorber { alpha_cm: alpha, path_length_cm: spec.length_cm };
        let s = SteadyStateSolver::new(&spec).solve(&abs, p, det).unwrap();
        let a = 2.0 * alpha * spec.length_cm;
        prop_assert!((s.absolute_transmission - airy_transmission(det, &spec, a)).abs() <= 1e-14);
        prop_assert!(s.absolute_transmission <= 1.0);
    }
}

#[test]
fn ratio_tends_to_one() {
    let spec = CavitySpec::default();
    let mut prev = 0.0;
    for k in 0..6 {
        let density = 1.84e6 * 10f64.powi(-2 * k);
        let r = solve_at_offset(0.5e-9, 0.0, 0.0, &spec, &medium(SaturationKind::VelocitySelective, density))
            .unwrap()
            .transmission_ratio;
        assert!(r >= prev);
        prev = r;
    }
    assert!(prev > 0.999_99);
    let m = medium(SaturationKind::VelocitySelective, 1.84e6);
    let r = solve_at_offset(1e-2, -1538.0, 0.0, &spec, &m).unwrap().transmission_ratio;
    assert!(r > 0.999, "{r}");
}

#[test]
fn linear_energy_balance_with_negligible_mirror_loss() {
    // With lossless mirrors input = reflected + transmitted + absorbed.
    let spec = CavitySpec { mirror_loss: 1e-15, ..Default::default() };
    let r = 1.0 - spec.mirror_transmission - spec.mirror_loss;
    for (alpha, det) in [(0.0, 0.0), (1e-4, 0.0), (1e-4, 0.4), (3e-3, -1.0)] {
        let a = 2.0 * alpha * spec.length_cm;
        let half = (-0.5 * a).exp();
        let p_in = 1.0;
        let circ = circulating_power(p_in, det, &spec, a);
        let transmitted = airy_transmission(det, &spec, a) * p_in;
        let absorbed = circ * (1.0 - half) + circ * half * r * (1.0 - half);
        // Field reflection: −r₁ + t₁²·r₂·a·e^{iφ}/(1 − r₁r₂a·e^{iφ}).
        let phi = 2.0 * PI * det / spec.fsr_mhz();
        let rt = r.sqrt().powi(2) * half;
        let (c, s) = (phi.cos(), phi.sin());
        let den = (1.0 - rt * c, -rt * s);
        let num = (spec.mirror_transmission * r.sqrt() * half * c, spec.mirror_transmission * r.sqrt() * half * s);
        let d2 = den.0 * den.0 + den.1 * den.1;
        let q = ((num.0 * den.0 + num.1 * den.1) / d2, (num.1 * den.0 - num.0 * den.1) / d2);
        let refl = (q.0 - r.sqrt()).powi(2) + q.1 * q.1;
        let total = refl + transmitted + absorbed;
        assert!((total - p_in).abs() < 1e-9, "alpha {alpha} det {det}: {total}");
    }
}

#[test]
fn velocity_selective_narrowing() {
    // Width of the region where e^{-od} < 1/2 around the even-isotope group.
    let m = medium(SaturationKind::VelocitySelective, 2e10);
    let width = |intensity: f64| {
        let below: Vec<f64> = (0..=400)
            .map(|k| -2600.0 + 5.0 * k as f64)
            .filter(|&x| (-m.alpha_at(x, intensity).unwrap() * m.path_length_cm()).exp() < 0.5)
            .collect();
        match (below.first(), below.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    };
    let i_sat = m.saturation_intensity();
    let widths: Vec<f64> = [0.0, 1.0, 10.0, 100.0].iter().map(|s| width(s * i_sat)).collect();
    assert!(widths[0] > 0.0 && widths[1] > 0.0, "{widths:?}");
    assert!(widths.windows(2).all(|w| w[1] <= w[0]) && widths[3] < widths[0], "{widths:?}");
}
