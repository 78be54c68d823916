//! Bit-stable report serialization: CSV and JSON emission with fixed
//! float formatting, plus CSV re-reading for exponent refits.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::probe::{ProbeReport, Row};

/// Output format of `emit_report`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_label(s: &str) -> Result<Format> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParameter {
                key: "format".into(),
                message: format!("unknown format {other:?} (expected csv or json)"),
            }),
        }
    }
}

/// The one float formatter every serialized number goes through:
/// scientific notation with 17 significant digits, enough to round-trip
/// any f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

const CSV_HEADER: &str = "delta,T,p,lhs,rhs,ratio";

/// CSV body: fixed header, one row per parameter point, rows already
/// sorted by (delta, T) by the sweep.
pub fn report_csv(report: &ProbeReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.delta,
            format_float(r.t),
            format_float(r.p),
            format_float(r.lhs),
            format_float(r.rhs),
            format_float(r.ratio),
        ));
    }
    out
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

fn json_string_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| json_string(s)).collect();
    format!("[{}]", quoted.join(","))
}

/// JSON body mirroring every report field, written by hand so numbers go
/// through `format_float` and the byte stream is deterministic.
pub fn report_json(report: &ProbeReport) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!(
        "  \"regime\": {},\n",
        json_string(report.regime.label())
    ));
    out.push_str(&format!("  \"resolution\": {},\n", report.resolution));
    out.push_str(&format!(
        "  \"separation\": {},\n",
        format_float(report.separation)
    ));
    out.push_str(&format!("  \"seed\": {},\n", report.seed));
    out.push_str(&format!("  \"overridden\": {},\n", report.overridden));
    out.push_str(&format!("  \"notes\": {},\n", json_string_list(&report.notes)));
    out.push_str(&format!(
        "  \"errors\": {},\n",
        json_string_list(&report.errors)
    ));
    match &report.fitted {
        Some(fit) => out.push_str(&format!(
            "  \"fitted\": {{\"exponent\": {}, \"constant\": {}, \"max_residual\": {}, \"expected_exponent\": {}}},\n",
            format_float(fit.exponent),
            format_float(fit.constant),
            format_float(fit.max_residual),
            format_float(fit.expected_exponent),
        )),
        None => out.push_str("  \"fitted\": null,\n"),
    }
    out.push_str("  \"rows\": [\n");
    for (i, r) in report.rows.iter().enumerate() {
        let comma = if i + 1 < report.rows.len() { "," } else { "" };
        out.push_str(&format!(
            "    {{\"delta\": {}, \"T\": {}, \"p\": {}, \"lhs\": {}, \"rhs\": {}, \"ratio\": {}}}{}\n",
            r.delta,
            format_float(r.t),
            format_float(r.p),
            format_float(r.lhs),
            format_float(r.rhs),
            format_float(r.ratio),
            comma,
        ));
    }
    out.push_str("  ]\n}\n");
    out
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the report to `path` in the requested format. Identical reports
/// produce byte-identical files.
pub fn emit_report(report: &ProbeReport, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Csv => report_csv(report),
        Format::Json => report_json(report),
    };
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(body.as_bytes()).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Re-reads rows from a CSV previously written by `emit_report`.
pub fn read_csv_rows(path: &Path) -> Result<Vec<Row>> {
    let body = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = body.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "{}: expected header {CSV_HEADER:?}, found {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Config(format!(
                "{}: row {} has {} fields, expected 6",
                path.display(),
                k + 2,
                fields.len()
            )));
        }
        let bad = |name: &str| {
            Error::Config(format!(
                "{}: row {} has unparsable {name}",
                path.display(),
                k + 2
            ))
        };
        rows.push(Row {
            delta: fields[0].parse().map_err(|_| bad("delta"))?,
            t: fields[1].parse().map_err(|_| bad("T"))?,
            p: fields[2].parse().map_err(|_| bad("p"))?,
            lhs: fields[3].parse().map_err(|_| bad("lhs"))?,
            rhs: fields[4].parse().map_err(|_| bad("rhs"))?,
            ratio: fields[5].parse().map_err(|_| bad("ratio"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::Regime;

    fn sample_report(rows: Vec<Row>) -> ProbeReport {
        ProbeReport {
            regime: Regime::Theorem,
            rows,
            fitted: None,
            resolution: 8,
            separation: 10.0,
            seed: 7,
            overridden: false,
            notes: vec!["note \"quoted\"".to_string()],
            errors: vec![],
        }
    }

    fn one_row() -> Row {
        Row {
            delta: 4,
            t: 0.03125,
            p: 12.0 / 7.0,
            lhs: 1.25,
            rhs: 2.5,
            ratio: 0.5,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let csv = report_csv(&sample_report(vec![]));
        assert_eq!(csv, "delta,T,p,lhs,rhs,ratio\n");
    }

    #[test]
    fn csv_round_trips_exactly() {
        let report = sample_report(vec![one_row(), {
            let mut r = one_row();
            r.delta = 8;
            r.lhs = 1.0 / 3.0;
            r.ratio = r.lhs / r.rhs;
            r
        }]);
        let dir = std::env::temp_dir().join("waveguide-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round-trip.csv");
        emit_report(&report, Format::Csv, &path).unwrap();
        let rows = read_csv_rows(&path).unwrap();
        assert_eq!(rows, report.rows);
        // determinism: emitting twice gives identical bytes
        let first = std::fs::read(&path).unwrap();
        emit_report(&report, Format::Csv, &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn json_parses_back_exactly() {
        let mut report = sample_report(vec![one_row()]);
        report.fitted = Some(crate::expsum::DecayFit {
            exponent: -0.5,
            constant: 1.0 / 7.0,
            max_residual: 1e-3,
            expected_exponent: -0.5,
        });
        let body = report_json(&report);
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["regime"], "theorem");
        assert_eq!(v["resolution"], 8);
        assert_eq!(v["seed"], 7);
        assert_eq!(v["overridden"], false);
        assert_eq!(v["notes"][0], "note \"quoted\"");
        assert_eq!(v["rows"][0]["delta"], 4);
        assert_eq!(v["rows"][0]["lhs"].as_f64().unwrap(), 1.25);
        assert_eq!(
            v["fitted"]["constant"].as_f64().unwrap(),
            1.0 / 7.0 // 17 significant digits round-trip f64 exactly
        );
    }

    #[test]
    fn float_formatting_is_17_digits() {
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
        let x = 1.0 / 3.0;
        let back: f64 = format_float(x).parse().unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn read_rejects_malformed_csv() {
        let dir = std::env::temp_dir().join("waveguide-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "wrong,header\n").unwrap();
        assert!(read_csv_rows(&path).is_err());
        std::fs::write(&path, "delta,T,p,lhs,rhs,ratio\n4,1.0,1.7\n").unwrap();
        assert!(read_csv_rows(&path).is_err());
        assert!(read_csv_rows(Path::new("/nonexistent/report.csv")).is_err());
    }
}
