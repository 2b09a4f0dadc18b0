use proptest::prelude::*;
use xenon_cavity::catalog::{allowed_transitions, expected_nuclear_spin, load_catalog};
use xenon_cavity::{HalfInt, HyperfineLine, IsotopeSpecies, LineCatalog};

const MASSES: [u32; 9] = [124, 126, 128, 129, 130, 131, 132, 134, 136];

/// Pairs counted directly from the angular-momentum ranges.
fn brute_force_count(spin_x2: u32) -> usize {
    let levels: Vec<i64> = {
        let lo = (4i64 - spin_x2 as i64).abs();
        let hi = 4 + spin_x2 as i64;
        (lo..=hi).filter(|f| (f - lo) % 2 == 0).collect()
    };
    let mut n = 0;
    for &a in &levels {
        for &b in &levels {
            if (a - b).abs() <= 2 && !(a == 0 && b == 0) {
                n += 1;
            }
        }
    }
    n
}

fn arb_catalog() -> impl Strategy<Value = LineCatalog> {
    (
        proptest::sample::subsequence(MASSES.to_vec(), 1..=9),
        proptest::collection::vec(0.01f64..1.0, 9),
        proptest::collection::vec((0.0f64..1.0, -8000.0f64..8000.0, any::<bool>()), 90),
        364.0f64..364.2,
    )
        .prop_map(|(masses, raw_abundance, raw_lines, reference)| {
            let total: f64 = raw_abundance[..masses.len()].iter().sum();
            let species: Vec<IsotopeSpecies> = masses
                .iter()
                .zip(&raw_abundance)
                .map(|(&m, &a)| IsotopeSpecies {
                    mass_number: m,
                    abundance: a / total,
                    nuclear_spin: expected_nuclear_spin(m).unwrap(),
                })
                .collect();
            let mut lines = Vec::new();
            let mut draw = raw_lines.into_iter();
            for s in &species {
                let pairs = allowed_transitions(s.nuclear_spin);
                let mut chosen: Vec<(HalfInt, HalfInt, f64, f64)> = Vec::new();
                for (k, (fl, fu)) in pairs.iter().enumerate() {
                    let (w, off, keep) = draw.next().unwrap();
                    if keep || k == 0 {
                        chosen.push((*fl, *fu, w + 0.01, off));
                    }
                }
                let sum: f64 = chosen.iter().map(|c| c.2).sum();
                for (fl, fu, w, off) in chosen {
                    lines.push(HyperfineLine {
                        isotope: s.mass_number,
                        f_lower: fl,
                        f_upper: fu,
                        offset_mhz: off,
                        relative_strength: w / sum,
                        provenance: "generated".into(),
                    });
                }
            }
            LineCatalog {
                reference_frequency_thz: reference,
                wavelength_nm: 823.16,
                species,
                lines,
            }
        })
}

proptest! {
    #[test]
    fn transition_count_matches_enumeration(spin_x2 in 0u32..12) {
        let pairs = allowed_transitions(HalfInt::from_doubled(spin_x2));
        prop_assert_eq!(pairs.len(), brute_force_count(spin_x2));
        let mut sorted = pairs.clone();
        sorted.sort();
        prop_assert_eq!(sorted, pairs);
    }

    #[test]
    fn serialize_then_load_is_identity(cat in arb_catalog()) {
        cat.validate().unwrap();
        let back = load_catalog(cat.to_json().as_bytes()).unwrap();
        prop_assert_eq!(back, cat);
    }

    #[test]
    fn total_weight_is_one(cat in arb_catalog()) {
        let total: f64 = cat.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{}", total);
    }
}

#[test]
fn shipped_catalog_partition() {
    let cat = LineCatalog::natural_xenon();
    let count = |m: u32| cat.lines.iter().filter(|l| l.isotope == m).count();
    assert_eq!(cat.lines.len(), 21);
    assert_eq!(cat.species.len(), 9);
    assert_eq!(count(129), 4);
    assert_eq!(count(131), 10);
    assert_eq!(cat.lines.iter().filter(|l| l.isotope % 2 == 0).count(), 7);
    assert_eq!(brute_force_count(1) + brute_force_count(3) + 7 * brute_force_count(0), 21);
}

#[test]
fn even_weights_equal_even_abundance() {
    let cat = LineCatalog::natural_xenon();
    let even_weight: f64 = cat
        .lines
        .iter()
        .filter(|l| l.isotope % 2 == 0)
        .map(|l| cat.line_weight(l).unwrap())
        .sum();
    let even_abundance: f64 = cat.species.iter().filter(|s| s.mass_number % 2 == 0).map(|s| s.abundance).sum();
    assert!((even_weight - even_abundance).abs() < 1e-12);
}

#[test]
fn anchor_line_sits_at_reference() {
    let cat = LineCatalog::natural_xenon();
    let anchor = cat
        .lines
        .iter()
        .find(|l| l.isotope == 129 && l.f_lower.doubled() == 5 && l.f_upper.doubled() == 5)
        .unwrap();
    assert_eq!(cat.line_frequency_thz(anchor), 364.097);
    assert!(cat.lines.iter().filter(|l| !std::ptr::eq(*l, anchor)).all(|l| l.provenance.starts_with("external")));
}

#[test]
fn load_errors_name_their_field() {
    let single = r#"{"reference_frequency_thz": 364.0, "wavelength_nm": 823.0,
        "species": [{"mass": 132, "abundance": 1.0, "spin_x2": 0}],
        "lines": [{"mass": 132, "f_lower_x2": 4, "f_upper_x2": 4, "offset_mhz": 0.0, "strength": 1.0, "provenance": "x"}]}"#;
    let cat = load_catalog(single.as_bytes()).unwrap();
    assert_eq!(cat.lines.len(), 1);

    let short = single.replace("\"abundance\": 1.0", "\"abundance\": 0.9");
    let err = load_catalog(short.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("abundance"), "{err}");

    let bad_rule = single.replace("\"f_upper_x2\": 4", "\"f_upper_x2\": 2");
    let err = load_catalog(bad_rule.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("lines[0]"), "{err}");

    let unknown = single.replace("\"mass\": 132, \"f_lower_x2\"", "\"mass\": 133, \"f_lower_x2\"");
    let err = load_catalog(unknown.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("unknown isotope"), "{err}");

    let extra = single.replace("\"wavelength_nm\"", "\"colour\": 1, \"wavelength_nm\"");
    let err = load_catalog(extra.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("line"), "{err}");
}
