//! Trace CSV format.
//!
//! One header line, then one row per sample. Floats are written with 17
//! significant digits, which round-trips every `f64` exactly.

use std::io::{Read, Write};

use crate::protocol::{optical_depth, ScanSample, SpectrumTrace};
use crate::{Error, Result};

pub const TRACE_HEADER: [&str; 6] = ["resonance_thz", "probe_power_nw", "t_high", "t_low", "ratio", "optical_depth"];

/// Relative tolerance for the derived columns (ratio, optical depth).
const DERIVED_TOLERANCE: f64 = 1e-12;

fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x > 0.0 {
        "inf".to_string()
    } else if x < 0.0 {
        "-inf".to_string()
    } else {
        "nan".to_string()
    }
}

/// Writes the trace and returns the number of bytes written.
pub fn write_trace<W: Write>(trace: &SpectrumTrace, mut destination: W) -> Result<usize> {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(&TRACE_HEADER.join(","));
    out.push('\n');
    for s in &trace.samples {
        let row = [s.resonance_thz, s.probe_power_nw, s.t_high, s.t_low, s.ratio, s.optical_depth];
        let row: Vec<String> = row.iter().map(|&x| fmt17(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    destination.write_all(out.as_bytes())?;
    destination.flush()?;
    Ok(out.len())
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= DERIVED_TOLERANCE * a.abs().max(b.abs())
}

/// Reads and validates a trace. Rows are numbered from 1 for the header.
pub fn read_trace<R: Read>(source: R) -> Result<SpectrumTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::parse(
            "row 1",
            format!("expected header `{}`, found `{}`", TRACE_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(csv_error)?;
        let mut v = [0.0; 6];
        for (col, slot) in v.iter_mut().enumerate() {
            let field = record.get(col).unwrap_or_default();
            *slot = field.parse::<f64>().map_err(|e| {
                Error::parse(
                    format!("row {row}, column {} ({})", col + 1, TRACE_HEADER[col]),
                    format!("`{field}`: {e}"),
                )
            })?;
        }
        let [resonance_thz, probe_power_nw, t_high, t_low, ratio, od] = v;
        let at = |col: &str| format!("row {row}, column {col}");
        if !(t_high > 0.0 && t_high.is_finite()) {
            return Err(Error::validation(at("t_high"), format!("{t_high} must be positive")));
        }
        if !t_low.is_finite() {
            return Err(Error::validation(at("t_low"), format!("{t_low} is not finite")));
        }
        if !(probe_power_nw > 0.0 && probe_power_nw.is_finite()) {
            return Err(Error::validation(at("probe_power_nw"), format!("{probe_power_nw} must be positive")));
        }
        if !close(ratio, t_low / t_high) {
            return Err(Error::validation(at("ratio"), format!("{ratio} differs from t_low/t_high = {}", t_low / t_high)));
        }
        let expected_od = optical_depth(ratio);
        if !(close(od, expected_od) || (od.is_infinite() && expected_od.is_infinite())) {
            return Err(Error::validation(at("optical_depth"), format!("{od} differs from -ln(ratio) = {expected_od}")));
        }
        samples.push(ScanSample {
            resonance_thz,
            block_temperature_c: None,
            t_high,
            t_low,
            ratio,
            optical_depth: od,
            probe_power_nw,
        });
    }
    SpectrumTrace::new(samples)
}

fn csv_error(e: csv::Error) -> Error {
    let location = match e.position() {
        Some(p) => format!("row {}", p.line()),
        None => "trace".to_string(),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::parse(location, format!("{kind:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::excessive_precision)]
    fn three() -> SpectrumTrace {
        SpectrumTrace::new(vec![
            ScanSample::new(364.096_9, 0.5, 0.912_345_678_901_234_5, 0.1),
            ScanSample::new(364.097, 0.5, 0.9, 0.09),
            ScanSample::new(364.097_100_000_000_01, 0.5, 0.9, 1.0 / 3.0),
        ])
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let t = three();
        let mut buf = Vec::new();
        let n = write_trace(&t, &mut buf).unwrap();
        assert_eq!(n, buf.len());
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("resonance_thz,probe_power_nw,t_high,t_low,ratio,optical_depth\n"));
        assert!(!text.contains('\r'));
        let back = read_trace(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn header_mismatch_names_expected() {
        let err = read_trace("freq,p,a,b,c,d\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("resonance_thz,probe_power_nw")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_monotone_rejected() {
        let text = "resonance_thz,probe_power_nw,t_high,t_low,ratio,optical_depth\n\
                    2,1,1,0.5,0.5,0.69314718055994529\n\
                    1,1,1,0.5,0.5,0.69314718055994529\n";
        assert!(matches!(read_trace(text.as_bytes()), Err(Error::Validation { .. })));
    }

    #[test]
    fn bad_cell_location() {
        let text = "resonance_thz,probe_power_nw,t_high,t_low,ratio,optical_depth\n1,1,x,0.5,0.5,0.7\n";
        match read_trace(text.as_bytes()).unwrap_err() {
            Error::Parse { location, .. } => assert_eq!(location, "row 2, column 3 (t_high)"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_ratio_rejected() {
        let text = "resonance_thz,probe_power_nw,t_high,t_low,ratio,optical_depth\n1,1,1,0.5,0.6,0.5108256237659907\n";
        assert!(read_trace(text.as_bytes()).is_err());
    }
}
