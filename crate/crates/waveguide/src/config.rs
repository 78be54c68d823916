//! Sweep configuration: a flat TOML file, command-line flag overlay, and
//! the precedence rule flags > file > regime defaults.

use std::path::{Path, PathBuf};

use toml::Value;

use crate::error::{Error, Result};
use crate::probe::{ProbeConfig, Profile, Regime};
use crate::report::Format;

/// Values taken from command-line flags. Any field present here wins over
/// the file and the defaults.
#[derive(Debug, Clone, Default)]
pub struct Overlay {
    pub regime: Option<String>,
    pub p: Option<f64>,
    pub deltas: Option<Vec<u32>>,
    pub t: Option<Vec<f64>>,
    pub t_rule: Option<String>,
    pub separation: Option<f64>,
    pub resolution: Option<u32>,
    pub profile: Option<String>,
    pub c: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub override_regime: bool,
}

/// A fully resolved run: the sweep parameters plus output destination.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub probe: ProbeConfig,
    pub output: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Default)]
struct FileConfig {
    regime: Option<String>,
    p: Option<f64>,
    deltas: Option<Vec<u32>>,
    t: Option<Vec<f64>>,
    t_rule: Option<String>,
    separation: Option<f64>,
    resolution: Option<u32>,
    profile: Option<String>,
    c: Option<f64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    format: Option<String>,
}

fn key_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config(format!("key {key:?}: {}", message.into()))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(n) => Ok(*n as f64),
        // allow exact fractions like "12/7" for exponents
        Value::String(s) => {
            if let Some((num, den)) = s.split_once('/') {
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| key_err(key, format!("cannot parse {s:?} as a number")))
                };
                Ok(parse(num)? / parse(den)?)
            } else {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| key_err(key, format!("cannot parse {s:?} as a number")))
            }
        }
        other => Err(key_err(key, format!("expected a number, found {other}"))),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(n) if *n >= 0 => Ok(*n as u64),
        other => Err(key_err(
            key,
            format!("expected a non-negative integer, found {other}"),
        )),
    }
}

fn as_string(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        other => Err(key_err(key, format!("expected a string, found {other}"))),
    }
}

fn as_f64_list(key: &str, v: &Value) -> Result<Vec<f64>> {
    match v {
        Value::Array(items) => items.iter().map(|x| as_f64(key, x)).collect(),
        scalar => Ok(vec![as_f64(key, scalar)?]),
    }
}

fn parse_file(path: &Path) -> Result<FileConfig> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let table: toml::Table = body
        .parse()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = FileConfig::default();
    for (key, value) in &table {
        match key.as_str() {
            "regime" => out.regime = Some(as_string(key, value)?),
            "p" => out.p = Some(as_f64(key, value)?),
            "deltas" => {
                let raw = as_f64_list(key, value)?;
                let mut ds = Vec::with_capacity(raw.len());
                for x in raw {
                    if x < 1.0 || x.fract() != 0.0 {
                        return Err(key_err(key, format!("{x} is not a positive integer")));
                    }
                    ds.push(x as u32);
                }
                out.deltas = Some(ds);
            }
            "T" => out.t = Some(as_f64_list(key, value)?),
            "T_rule" => out.t_rule = Some(as_string(key, value)?),
            "separation" => out.separation = Some(as_f64(key, value)?),
            "resolution" => {
                let x = as_u64(key, value)?;
                out.resolution = Some(u32::try_from(x).map_err(|_| {
                    key_err(key, format!("{x} is out of range"))
                })?);
            }
            "profile" => out.profile = Some(as_string(key, value)?),
            "c" => out.c = Some(as_f64(key, value)?),
            "seed" => out.seed = Some(as_u64(key, value)?),
            "output" => out.output = Some(PathBuf::from(as_string(key, value)?)),
            "format" => out.format = Some(as_string(key, value)?),
            other => {
                return Err(Error::Config(format!(
                    "unknown key {other:?} in {}",
                    path.display()
                )))
            }
        }
    }
    Ok(out)
}

/// Builds the final configuration from an optional file and the flag
/// overlay. Flags override file values; anything still missing falls back
/// to the regime defaults.
pub fn resolve(path: Option<&Path>, overlay: &Overlay) -> Result<ResolvedConfig> {
    let file = match path {
        Some(p) => parse_file(p)?,
        None => FileConfig::default(),
    };
    let regime_label = overlay
        .regime
        .clone()
        .or(file.regime)
        .ok_or_else(|| key_err("regime", "missing (set it in the file or with --regime)"))?;
    let regime = Regime::from_label(&regime_label)?;
    let p = overlay.p.or(file.p).unwrap_or(12.0 / 7.0);
    let deltas = overlay
        .deltas
        .clone()
        .or(file.deltas)
        .unwrap_or_else(|| match regime {
            Regime::Counterexample => vec![8],
            _ => vec![4, 8, 16, 32],
        });
    let mut config = ProbeConfig::new(regime, p, deltas);
    if let Some(sep) = overlay.separation.or(file.separation) {
        config.separation = sep;
    }
    if let Some(res) = overlay.resolution.or(file.resolution) {
        config.resolution = res;
    } else if regime == Regime::Counterexample {
        // indicator endpoints must land on lattice nodes at every swept T
        config.resolution = 1024;
    }
    if let Some(profile) = overlay.profile.clone().or(file.profile) {
        config.profile = Profile::from_label(&profile)?;
    }
    if let Some(c) = overlay.c.or(file.c) {
        config.c = c;
    }
    if let Some(seed) = overlay.seed.or(file.seed) {
        config.seed = seed;
    }
    config.override_regime = overlay.override_regime;

    let t = overlay.t.clone().or(file.t);
    let t_rule = overlay.t_rule.clone().or(file.t_rule);
    match t_rule.as_deref() {
        None | Some("default") => {}
        Some("fixed") => {
            if t.is_none() {
                return Err(key_err("T_rule", "\"fixed\" requires the key T"));
            }
        }
        Some(other) => {
            return Err(key_err(
                "T_rule",
                format!("unknown rule {other:?} (expected default or fixed)"),
            ))
        }
    }
    if let Some(ts) = t {
        if t_rule.as_deref() == Some("default") {
            return Err(key_err(
                "T",
                "explicit T conflicts with T_rule = \"default\"",
            ));
        }
        match (regime, ts.len()) {
            (_, 0) => return Err(key_err("T", "empty list")),
            (Regime::Counterexample, _) => config.t_values = ts,
            (_, 1) => config.t_fixed = Some(ts[0]),
            (_, n) => {
                return Err(key_err(
                    "T",
                    format!("{n} values given, but only the counterexample regime sweeps T"),
                ))
            }
        }
    }

    config.validate()?;
    let format = match overlay.format.clone().or(file.format) {
        Some(label) => Format::from_label(&label)?,
        None => Format::Csv,
    };
    Ok(ResolvedConfig {
        probe: config,
        output: overlay.output.clone().or(file.output),
        format,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(name: &str, body: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("waveguide-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn minimal_config_gets_theorem_defaults() {
        let path = write_temp("minimal.toml", "regime = \"theorem\"\np = \"12/7\"\ndeltas = [4, 8]\n");
        let resolved = resolve(Some(&path), &Overlay::default()).unwrap();
        assert_eq!(resolved.probe.deltas, vec![4, 8]);
        let pairs = resolved.probe.pairs();
        assert!((pairs[0].1 - 1.0 / 32.0).abs() < 1e-15);
        assert!((pairs[1].1 - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(resolved.format, Format::Csv);
    }

    #[test]
    fn strong_time_guard_fires() {
        let path = write_temp("strong.toml", "regime = \"appendixA\"\ndeltas = [4]\nT = 1\n");
        let err = resolve(Some(&path), &Overlay::default()).unwrap_err();
        assert!(matches!(err, Error::RegimeViolation(_)), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let path = write_temp("sep.toml", "regime = \"theorem\"\nseparation = 10\n");
        let overlay = Overlay {
            separation: Some(20.0),
            ..Overlay::default()
        };
        let resolved = resolve(Some(&path), &overlay).unwrap();
        assert_eq!(resolved.probe.separation, 20.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let path = write_temp("unknown.toml", "regime = \"theorem\"\nwibble = 3\n");
        let err = resolve(Some(&path), &Overlay::default()).unwrap_err();
        assert!(err.to_string().contains("wibble"), "{err}");
    }

    #[test]
    fn t_list_outside_counterexample_is_rejected() {
        let path = write_temp("tlist.toml", "regime = \"theorem\"\nT = [1.0, 2.0]\n");
        let err = resolve(Some(&path), &Overlay::default()).unwrap_err();
        assert!(err.to_string().contains('T'), "{err}");
    }

    #[test]
    fn counterexample_defaults() {
        let path = write_temp("ce.toml", "regime = \"counterexample\"\n");
        let resolved = resolve(Some(&path), &Overlay::default()).unwrap();
        assert_eq!(resolved.probe.deltas, vec![8]);
        assert_eq!(resolved.probe.resolution, 1024);
        assert_eq!(resolved.probe.t_values, vec![1.0, 4.0, 16.0, 64.0]);
        assert_eq!(resolved.probe.c, 0.25);
    }

    #[test]
    fn t_rule_consistency() {
        let path = write_temp("rule1.toml", "regime = \"theorem\"\nT_rule = \"fixed\"\n");
        assert!(resolve(Some(&path), &Overlay::default()).is_err());
        let path = write_temp(
            "rule2.toml",
            "regime = \"theorem\"\nT_rule = \"default\"\nT = 0.01\n",
        );
        assert!(resolve(Some(&path), &Overlay::default()).is_err());
        let path = write_temp(
            "rule3.toml",
            "regime = \"theorem\"\ndeltas = [4]\nT_rule = \"fixed\"\nT = 0.03125\n",
        );
        let resolved = resolve(Some(&path), &Overlay::default()).unwrap();
        assert_eq!(resolved.probe.t_fixed, Some(0.03125));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = resolve(Some(Path::new("/nonexistent/config.toml")), &Overlay::default())
            .unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
