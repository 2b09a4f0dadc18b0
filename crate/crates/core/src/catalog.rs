//! Isotope and hyperfine line catalog for the 6s[3/2]₂ → 6p[3/2]₂ transition.
//!
//! Numeric offsets and strengths are data, not code: they come from a JSON
//! catalog file (see [`load_catalog`]). The natural-xenon catalog shipped with
//! the crate is available through [`LineCatalog::natural_xenon`].

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::constants::MHZ_PER_THZ;
use crate::{Error, Result};

/// Electronic angular momentum of both levels, doubled.
const J_X2: u32 = 4;

/// Abundance and per-isotope strength normalisation tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Frequencies further than this from every line are outside the catalog
/// coverage window.
pub const COVERAGE_PADDING_MHZ: f64 = 50_000.0;

/// Non-negative half-integer stored as its double.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfInt(u32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub const fn from_doubled(doubled: u32) -> Self {
        HalfInt(doubled)
    }

    pub const fn doubled(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Accepts 0, 1/2, 1, 3/2, ...; rejects negative and non-half-integer values.
    pub fn try_from_f64(value: f64) -> Result<Self> {
        let doubled = 2.0 * value;
        if !value.is_finite() || value < 0.0 || doubled.fract() != 0.0 || doubled > f64::from(u32::MAX)
        {
            return Err(Error::validation(
                "nuclear_spin",
                format!("{value} is not a non-negative half-integer"),
            ));
        }
        Ok(HalfInt(doubled as u32))
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotopeSpecies {
    pub mass_number: u32,
    pub abundance: f64,
    pub nuclear_spin: HalfInt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperfineLine {
    pub isotope: u32,
    pub f_lower: HalfInt,
    pub f_upper: HalfInt,
    /// Offset from the catalog reference frequency, MHz.
    pub offset_mhz: f64,
    /// Share of the isotope's total line strength.
    pub relative_strength: f64,
    pub provenance: String,
}

impl HyperfineLine {
    pub fn label(&self) -> String {
        format!("{}Xe F={}→{}", self.isotope, self.f_lower, self.f_upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineCatalog {
    pub reference_frequency_thz: f64,
    pub wavelength_nm: f64,
    pub species: Vec<IsotopeSpecies>,
    pub lines: Vec<HyperfineLine>,
}

/// Nuclear spin of a xenon isotope, or `None` for an unknown odd isotope.
pub fn expected_nuclear_spin(mass_number: u32) -> Option<HalfInt> {
    match mass_number {
        m if m % 2 == 0 => Some(HalfInt::ZERO),
        129 => Some(HalfInt::from_doubled(1)),
        131 => Some(HalfInt::from_doubled(3)),
        _ => None,
    }
}

fn f_levels(spin: HalfInt) -> impl Iterator<Item = u32> {
    let lo = J_X2.abs_diff(spin.doubled());
    let hi = J_X2 + spin.doubled();
    (lo..=hi).step_by(2)
}

/// All (F_lower, F_upper) pairs of the J=2 → J=2 transition for a nuclear
/// spin, with ΔF ∈ {−1, 0, +1} and 0 → 0 excluded, in ascending order.
pub fn allowed_transitions(nuclear_spin: HalfInt) -> Vec<(HalfInt, HalfInt)> {
    let mut pairs = Vec::new();
    for fl in f_levels(nuclear_spin) {
        for fu in f_levels(nuclear_spin) {
            if fl.abs_diff(fu) <= 2 && !(fl == 0 && fu == 0) {
                pairs.push((HalfInt(fl), HalfInt(fu)));
            }
        }
    }
    pairs
}

impl LineCatalog {
    /// The shipped natural-xenon catalog (9 species, 21 lines).
    pub fn natural_xenon() -> Self {
        load_catalog(NATURAL_XENON_JSON.as_bytes()).expect("shipped catalog is valid")
    }

    pub fn species(&self, mass_number: u32) -> Option<&IsotopeSpecies> {
        self.species.iter().find(|s| s.mass_number == mass_number)
    }

    pub fn line_frequency_thz(&self, line: &HyperfineLine) -> f64 {
        self.reference_frequency_thz + line.offset_mhz / MHZ_PER_THZ
    }

    /// Offset of an absolute frequency from the reference, MHz.
    pub fn offset_mhz(&self, frequency_thz: f64) -> f64 {
        (frequency_thz - self.reference_frequency_thz) * MHZ_PER_THZ
    }

    pub fn coverage_mhz(&self) -> (f64, f64) {
        let (lo, hi) = self
            .lines
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
                (lo.min(l.offset_mhz), hi.max(l.offset_mhz))
            });
        (lo - COVERAGE_PADDING_MHZ, hi + COVERAGE_PADDING_MHZ)
    }

    pub fn check_coverage(&self, frequency_thz: f64) -> Result<()> {
        let offset = self.offset_mhz(frequency_thz);
        let (lo, hi) = self.coverage_mhz();
        if !(lo..=hi).contains(&offset) {
            return Err(Error::validation(
                "frequency",
                format!("{frequency_thz} THz is outside the catalog window"),
            ));
        }
        Ok(())
    }

    /// abundance × relative strength; the weights of one isotope sum to its
    /// abundance and the weights of a valid catalog sum to 1.
    pub fn line_weight(&self, line: &HyperfineLine) -> Result<f64> {
        if !self.lines.contains(line) {
            return Err(Error::validation(
                "line",
                format!("{} is not in the catalog", line.label()),
            ));
        }
        let species = self.species(line.isotope).ok_or_else(|| {
            Error::validation("line.isotope", format!("unknown isotope {}", line.isotope))
        })?;
        Ok(species.abundance * line.relative_strength)
    }

    /// Weights in catalog line order.
    pub fn weights(&self) -> Vec<f64> {
        self.lines
            .iter()
            .map(|l| {
                self.species(l.isotope)
                    .map_or(0.0, |s| s.abundance * l.relative_strength)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CatalogFile::from(self)).expect("catalog serializes")
    }

    /// Checks every catalog invariant.
    pub fn validate(&self) -> Result<()> {
        positive(self.reference_frequency_thz, "reference_frequency_thz")?;
        positive(self.wavelength_nm, "wavelength_nm")?;
        if self.species.is_empty() {
            return Err(Error::validation("species", "catalog has no species"));
        }
        let mut total = 0.0;
        for (i, s) in self.species.iter().enumerate() {
            let loc = format!("species[{i}]");
            if !(0.0..=1.0).contains(&s.abundance) {
                return Err(Error::validation(
                    format!("{loc}.abundance"),
                    format!("{} is not a fraction", s.abundance),
                ));
            }
            match expected_nuclear_spin(s.mass_number) {
                None => {
                    return Err(Error::validation(
                        format!("{loc}.mass"),
                        format!("unknown isotope {}", s.mass_number),
                    ))
                }
                Some(spin) if spin != s.nuclear_spin => {
                    return Err(Error::validation(
                        format!("{loc}.spin_x2"),
                        format!(
                            "{}Xe has nuclear spin {spin}, not {}",
                            s.mass_number, s.nuclear_spin
                        ),
                    ))
                }
                Some(_) => {}
            }
            if self.species[..i].iter().any(|o| o.mass_number == s.mass_number) {
                return Err(Error::validation(
                    format!("{loc}.mass"),
                    format!("duplicate isotope {}", s.mass_number),
                ));
            }
            total += s.abundance;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::validation(
                "species[].abundance",
                format!("abundances sum to {total}, expected 1"),
            ));
        }

        for (i, l) in self.lines.iter().enumerate() {
            let loc = format!("lines[{i}]");
            let species = self.species(l.isotope).ok_or_else(|| {
                Error::validation(format!("{loc}.mass"), format!("unknown isotope {}", l.isotope))
            })?;
            if !allowed_transitions(species.nuclear_spin).contains(&(l.f_lower, l.f_upper)) {
                return Err(Error::validation(
                    format!("{loc}.f_lower_x2/f_upper_x2"),
                    format!(
                        "F={}→{} violates the selection rules for {}Xe (I={})",
                        l.f_lower, l.f_upper, l.isotope, species.nuclear_spin
                    ),
                ));
            }
            if !l.offset_mhz.is_finite() {
                return Err(Error::validation(format!("{loc}.offset_mhz"), "not finite"));
            }
            if !(l.relative_strength >= 0.0 && l.relative_strength.is_finite()) {
                return Err(Error::validation(
                    format!("{loc}.strength"),
                    format!("{} is negative or not finite", l.relative_strength),
                ));
            }
        }
        for s in &self.species {
            let lines: Vec<_> = self.lines.iter().filter(|l| l.isotope == s.mass_number).collect();
            if lines.is_empty() {
                return Err(Error::validation(
                    "lines[].mass",
                    format!("{}Xe has no lines", s.mass_number),
                ));
            }
            let sum: f64 = lines.iter().map(|l| l.relative_strength).sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::validation(
                    "lines[].strength",
                    format!("strengths of {}Xe sum to {sum}, expected 1", s.mass_number),
                ));
            }
        }
        Ok(())
    }
}

fn positive(value: f64, location: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(location, format!("{value} must be positive")))
    }
}

pub const NATURAL_XENON_JSON: &str = include_str!("../data/natural_xenon.json");

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    reference_frequency_thz: f64,
    wavelength_nm: f64,
    species: Vec<SpeciesRecord>,
    lines: Vec<LineRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesRecord {
    mass: u32,
    abundance: f64,
    spin_x2: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRecord {
    mass: u32,
    f_lower_x2: u32,
    f_upper_x2: u32,
    offset_mhz: f64,
    strength: f64,
    provenance: String,
}

impl From<&LineCatalog> for CatalogFile {
    fn from(c: &LineCatalog) -> Self {
        CatalogFile {
            reference_frequency_thz: c.reference_frequency_thz,
            wavelength_nm: c.wavelength_nm,
            species: c
                .species
                .iter()
                .map(|s| SpeciesRecord {
                    mass: s.mass_number,
                    abundance: s.abundance,
                    spin_x2: s.nuclear_spin.doubled(),
                })
                .collect(),
            lines: c
                .lines
                .iter()
                .map(|l| LineRecord {
                    mass: l.isotope,
                    f_lower_x2: l.f_lower.doubled(),
                    f_upper_x2: l.f_upper.doubled(),
                    offset_mhz: l.offset_mhz,
                    strength: l.relative_strength,
                    provenance: l.provenance.clone(),
                })
                .collect(),
        }
    }
}

impl From<CatalogFile> for LineCatalog {
    fn from(f: CatalogFile) -> Self {
        LineCatalog {
            reference_frequency_thz: f.reference_frequency_thz,
            wavelength_nm: f.wavelength_nm,
            species: f
                .species
                .into_iter()
                .map(|s| IsotopeSpecies {
                    mass_number: s.mass,
                    abundance: s.abundance,
                    nuclear_spin: HalfInt(s.spin_x2),
                })
                .collect(),
            lines: f
                .lines
                .into_iter()
                .map(|l| HyperfineLine {
                    isotope: l.mass,
                    f_lower: HalfInt(l.f_lower_x2),
                    f_upper: HalfInt(l.f_upper_x2),
                    offset_mhz: l.offset_mhz,
                    relative_strength: l.strength,
                    provenance: l.provenance,
                })
                .collect(),
        }
    }
}

/// Parses and validates a catalog in the JSON catalog format.
pub fn load_catalog<R: Read>(mut source: R) -> Result<LineCatalog> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let file: CatalogFile = serde_json::from_str(&text).map_err(|e| {
        Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    let catalog = LineCatalog::from(file);
    catalog.validate()?;
    Ok(catalog)
}
