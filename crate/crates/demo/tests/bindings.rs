use xenon_cavity::medium::{CALIBRATED_DENSITY_CM3, CALIBRATED_NATURAL_FWHM_MHZ};
use xenon_cavity_demo::{airy_values, ratio_spectrum_values, saturation_curve_values};

#[test]
fn ratio_spectrum_pairs() {
    let v = ratio_spectrum_values(CALIBRATED_DENSITY_CM3, CALIBRATED_NATURAL_FWHM_MHZ, 0.5, 364.0968, 364.0972, 100.0).unwrap();
    assert_eq!(v.len(), 10);
    let at_anchor = v[5];
    assert!((at_anchor - 0.10).abs() < 0.01, "{at_anchor}");
    assert!(ratio_spectrum_values(1e6, 300.0, 0.5, 364.1, 364.0, 10.0).is_err());
}

#[test]
fn saturation_curve_rises() {
    let v = saturation_curve_values(CALIBRATED_DENSITY_CM3, CALIBRATED_NATURAL_FWHM_MHZ, 364.097, 0.1, 100.0, 7).unwrap();
    let ratios: Vec<f64> = v.chunks(2).map(|p| p[1]).collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    assert!((v[0] - 0.1).abs() < 1e-12 && (v[12] - 100.0).abs() < 1e-9);
}

#[test]
fn airy_peak_and_errors() {
    let t = 7.5e-4;
    let l = std::f64::consts::PI / 4000.0 - t;
    let v = airy_values(t, l, 0.0, 3.0, 61).unwrap();
    let peak = v[61];
    assert!((v[60]).abs() < 1e-12);
    assert!((peak - (t / (t + l)).powi(2)).abs() < 1e-12);
    assert!(airy_values(0.02, 0.0, 0.0, 3.0, 61).is_err());
}
