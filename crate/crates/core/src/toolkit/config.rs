//! Run configuration: a JSON document with one section per concern.
//!
//! Every section is optional and falls back to its defaults. Unknown keys
//! are rejected at any depth. Overrides of the form `section.key=value` are
//! applied to the raw document before it is typed, so they are checked by
//! the same rules as the file itself.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{load_catalog, LineCatalog};
use crate::cavity::CavitySpec;
use crate::medium::MediumParams;
use crate::protocol::ScanPlan;
use crate::toolkit::fit::{FitModel, FitOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogSource {
    /// Catalog file; the shipped natural-xenon catalog when absent.
    pub path: Option<PathBuf>,
}

/// Frequency grid for the `spectrum` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumRange {
    pub start_thz: f64,
    pub stop_thz: f64,
    pub step_mhz: f64,
    /// Intensity at which α is evaluated, W/cm². Zero gives α₀.
    pub intensity_w_cm2: f64,
}

impl Default for SpectrumRange {
    fn default() -> Self {
        SpectrumRange {
            start_thz: 364.089,
            stop_thz: 364.102,
            step_mhz: 10.0,
            intensity_w_cm2: 0.0,
        }
    }
}

/// Operating point for the `transmission` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransmissionQuery {
    pub input_power_w: f64,
    pub laser_thz: f64,
    pub resonance_thz: f64,
}

impl Default for TransmissionQuery {
    fn default() -> Self {
        TransmissionQuery {
            input_power_w: 0.5e-9,
            laser_thz: 364.097,
            resonance_thz: 364.097,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Trace files to fit. One file gives a single-trace fit; several give a
    /// joint fit with free saturation powers.
    pub traces: Vec<PathBuf>,
    /// Starting model; estimated from the data when absent.
    pub initial: Option<FitModel>,
    /// Maximum number of dips in an estimated starting model.
    pub max_dips: Option<usize>,
    pub options: FitOptions,
    /// Frequency for the saturation-power estimate, THz.
    pub saturation_frequency_thz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    pub directory: PathBuf,
    /// Trace files are named `<prefix>_<power>nW.csv`.
    pub trace_prefix: String,
    pub spectrum_file: String,
    pub fit_report: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            directory: PathBuf::from("."),
            trace_prefix: "trace".into(),
            spectrum_file: "spectrum.csv".into(),
            fit_report: "fit_report.json".into(),
        }
    }
}

impl OutputPaths {
    pub fn trace_path(&self, probe_power_w: f64) -> PathBuf {
        let nw = format!("{}", (probe_power_w * 1e15).round() / 1e6).replace('.', "p");
        self.directory.join(format!("{}_{nw}nW.csv", self.trace_prefix))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub catalog: CatalogSource,
    pub cavity: CavitySpec,
    pub medium: MediumParams,
    pub scan: ScanPlan,
    pub spectrum: SpectrumRange,
    pub transmission: TransmissionQuery,
    pub fit: FitSection,
    pub output: OutputPaths,
}

/// Applies `dotted.path=value` to a JSON document. The value is read as JSON
/// when it parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::validation("--set", format!("`{assignment}` is not of the form section.key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) || keys.len() < 2 {
        return Err(Error::validation("--set", format!("`{path}` is not of the form section.key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for (depth, key) in keys.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(Error::validation(
                format!("--set {path}"),
                format!("`{}` is not a section", keys[..depth].join(".")),
            ));
        };
        if depth + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("keys is non-empty")
}

impl RunConfig {
    /// Builds a configuration from an optional JSON text and overrides.
    pub fn from_sources(text: Option<&str>, overrides: &[String], origin: &str) -> Result<Self> {
        let mut doc: Value = match text {
            Some(t) => serde_json::from_str(t).map_err(|e| json_error(origin, &e))?,
            None => Value::Object(Default::default()),
        };
        if !doc.is_object() {
            return Err(Error::parse(origin, "the configuration must be a JSON object"));
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let explicit_path = doc
            .get("medium")
            .and_then(|m| m.get("path_length_cm"))
            .is_some();
        let mut config: RunConfig = serde_json::from_value(doc).map_err(|e| json_error(origin, &e))?;
        if !explicit_path {
            config.medium.path_length_cm = config.cavity.length_cm;
        }
        config.validate()?;
        Ok(config)
    }

    /// Loads `path` (if any) and applies overrides. A missing file is an I/O
    /// error.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Self::from_sources(Some(&text), overrides, &p.display().to_string())
            }
            None => Self::from_sources(None, overrides, "defaults with --set overrides"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.medium.validate()?;
        self.scan.validate()?;
        if let Some(p) = &self.catalog.path {
            if !p.is_file() {
                return Err(Error::validation("catalog.path", format!("{} does not exist", p.display())));
            }
        }
        for (i, p) in self.fit.traces.iter().enumerate() {
            if !p.is_file() {
                return Err(Error::validation(format!("fit.traces[{i}]"), format!("{} does not exist", p.display())));
            }
        }
        if let Some(m) = &self.fit.initial {
            m.validate()?;
        }
        let r = &self.spectrum;
        if !(r.start_thz < r.stop_thz && r.step_mhz > 0.0 && r.intensity_w_cm2 >= 0.0) {
            return Err(Error::validation("spectrum", "need start_thz < stop_thz, step_mhz > 0, intensity_w_cm2 ≥ 0"));
        }
        let q = &self.transmission;
        if !(q.input_power_w >= 0.0 && q.laser_thz.is_finite() && q.resonance_thz.is_finite()) {
            return Err(Error::validation("transmission", "need input_power_w ≥ 0 and finite frequencies"));
        }
        Ok(())
    }

    pub fn catalog(&self) -> Result<LineCatalog> {
        match &self.catalog.path {
            Some(p) => load_catalog(std::fs::File::open(p)?),
            None => Ok(LineCatalog::natural_xenon()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn json_error(origin: &str, e: &serde_json::Error) -> Error {
    // Errors raised while typing an in-memory document carry no position.
    let location = if e.line() == 0 {
        origin.to_string()
    } else {
        format!("{origin}: line {} column {}", e.line(), e.column())
    };
    Error::parse(location, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default_with_cavity_path() {
        let c = RunConfig::from_sources(Some("{}"), &[], "test").unwrap();
        assert_eq!(c.medium.path_length_cm, c.cavity.length_cm);
        assert_eq!(c.scan, ScanPlan::default());
    }

    #[test]
    fn path_length_follows_cavity_unless_set() {
        let c = RunConfig::from_sources(Some(r#"{"cavity": {"length_cm": 3.0}}"#), &[], "t").unwrap();
        assert_eq!(c.medium.path_length_cm, 3.0);
        let c = RunConfig::from_sources(Some(r#"{"cavity": {"length_cm": 3.0}, "medium": {"path_length_cm": 1.0}}"#), &[], "t").unwrap();
        assert_eq!(c.medium.path_length_cm, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [r#"{"bogus": 1}"#, r#"{"cavity": {"finesse": 4000}}"#, r#"{"medium": {"broadening": {"x": 1}}}"#] {
            let err = RunConfig::from_sources(Some(text), &[], "t").unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{text}: {err:?}");
        }
        let err = RunConfig::from_sources(None, &["scan.nonsense=3".into()], "t").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn overrides() {
        let c = RunConfig::from_sources(
            Some(r#"{"scan": {"seed": 1}}"#),
            &[
                "scan.seed=42".into(),
                "medium.broadening.natural_fwhm_mhz=100".into(),
                "medium.model.kind=homogeneous".into(),
                "scan.probe_powers_w=[1e-9,2e-9]".into(),
            ],
            "t",
        )
        .unwrap();
        assert_eq!(c.scan.seed, 42);
        assert_eq!(c.medium.broadening.natural_fwhm_mhz, 100.0);
        assert_eq!(c.medium.model.kind, crate::SaturationKind::Homogeneous);
        assert_eq!(c.scan.probe_powers_w, vec![1e-9, 2e-9]);
        assert!(RunConfig::from_sources(None, &["seed=1".into()], "t").is_err());
        assert!(RunConfig::from_sources(None, &["scan.seed".into()], "t").is_err());
        assert!(RunConfig::from_sources(None, &["scan.seed.x=1".into()], "t").is_err());
    }

    #[test]
    fn invariant_violations_are_validation_errors() {
        let err = RunConfig::from_sources(None, &["cavity.mirror_loss=0.02".into()], "t").unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
        let err = RunConfig::from_sources(None, &["catalog.path=/nonexistent/catalog.json".into()], "t").unwrap_err();
        assert!(matches!(err, Error::Validation { location, .. } if location == "catalog.path"));
    }

    #[test]
    fn round_trips_through_json() {
        let c = RunConfig::default();
        let back = RunConfig::from_sources(Some(&c.to_json()), &[], "t").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn trace_names() {
        let o = OutputPaths::default();
        assert_eq!(o.trace_path(0.5e-9), PathBuf::from("./trace_0p5nW.csv"));
        assert_eq!(o.trace_path(19e-9), PathBuf::from("./trace_19nW.csv"));
    }
}
