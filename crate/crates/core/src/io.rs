//! On-disk formats: spectrum-trace CSV, CSV tables, TOML records, atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::spectra::{FrequencyGrid, SpectrumTrace, TraceMeta, Units};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(path: &Path, message: impl ToString) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::io(path, e))?;
    // Temporary files are created owner-only; outputs should be ordinary files.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(fs::Permissions::from_mode(0o644))
            .map_err(|e| IoError::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

/// Serializes a trace: one `#` header line, a column line, then `frequency_hz,psd` rows.
pub fn format_trace(trace: &SpectrumTrace) -> String {
    let meta = &trace.meta;
    let mut out = String::with_capacity(48 * trace.psd.len() + 160);
    let averages = meta
        .averages
        .map_or_else(|| "inf".to_string(), |n| n.to_string());
    let seed = meta
        .seed
        .map_or_else(|| "none".to_string(), |s| s.to_string());
    let _ = write!(
        out,
        "# units={} detuning_hz={:e} averages={} seed={} carrier={:e}",
        meta.units, meta.detuning_hz, averages, seed, trace.carrier_power
    );
    if let Some(laser) = meta.laser_hz {
        let _ = write!(out, " laser_hz={laser:e}");
    }
    out.push_str("\nfrequency_hz,psd\n");
    for (f, p) in trace.grid.frequencies().zip(&trace.psd) {
        let _ = writeln!(out, "{f:e},{p:e}");
    }
    out
}

/// Parses the output of [`format_trace`]. `path` is only used in error messages.
pub fn parse_trace(text: &str, path: &Path) -> Result<SpectrumTrace, IoError> {
    let err = |line: usize, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| err(1, "expected `# units=... detuning_hz=...` header".into()))?;

    let mut units = None;
    let mut detuning_hz = None;
    let mut averages = None;
    let mut seed = None;
    let mut carrier = None;
    let mut laser_hz = None;
    for token in header.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| err(1, format!("header token `{token}` is not key=value")))?;
        let number = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| err(1, format!("`{key}` value `{v}` is not a number")))
        };
        match key {
            "units" => units = Some(value.parse::<Units>().map_err(|e| err(1, e.to_string()))?),
            "detuning_hz" => detuning_hz = Some(number(value)?),
            "carrier" => carrier = Some(number(value)?),
            "laser_hz" => laser_hz = Some(number(value)?),
            "averages" => {
                averages = Some(match value {
                    "inf" => None,
                    v => Some(v.parse::<u32>().map_err(|_| {
                        err(
                            1,
                            format!("`averages` value `{v}` is not an integer or `inf`"),
                        )
                    })?),
                })
            }
            "seed" => {
                seed = Some(match value {
                    "none" => None,
                    v => Some(v.parse::<u64>().map_err(|_| {
                        err(1, format!("`seed` value `{v}` is not an integer or `none`"))
                    })?),
                })
            }
            other => log::debug!("ignoring trace header key `{other}`"),
        }
    }
    let missing = |k: &str| err(1, format!("header lacks `{k}`"));
    let meta = TraceMeta {
        units: units.ok_or_else(|| missing("units"))?,
        detuning_hz: detuning_hz.ok_or_else(|| missing("detuning_hz"))?,
        averages: averages.ok_or_else(|| missing("averages"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        laser_hz,
    };
    let carrier = carrier.ok_or_else(|| missing("carrier"))?;

    let mut freqs = Vec::new();
    let mut psd = Vec::new();
    let mut rows = Vec::new();
    for (line, raw) in lines {
        let raw = raw.trim();
        if raw.is_empty() || raw == "frequency_hz,psd" {
            continue;
        }
        let (f, p) = raw.split_once(',').ok_or_else(|| {
            err(
                line,
                format!("expected two comma-separated values, got `{raw}`"),
            )
        })?;
        let f: f64 = f
            .trim()
            .parse()
            .map_err(|_| err(line, format!("frequency `{f}` is not a number")))?;
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| err(line, format!("psd `{p}` is not a number")))?;
        if !f.is_finite() || !p.is_finite() {
            return Err(err(line, "non-finite value".into()));
        }
        if let Some(&last) = freqs.last() {
            if f <= last {
                return Err(err(line, format!("frequency {f} is not ascending")));
            }
        }
        freqs.push(f);
        psd.push(p);
        rows.push(line);
    }
    if freqs.len() < 2 {
        return Err(err(
            rows.last().copied().unwrap_or(1),
            "fewer than two data rows".into(),
        ));
    }
    let grid = FrequencyGrid::new(freqs[0], freqs[freqs.len() - 1], freqs.len())
        .map_err(|e| err(rows[0], e.to_string()))?;
    let tol = 1e-6 * grid.step();
    for (i, &f) in freqs.iter().enumerate() {
        if (f - grid.frequency(i)).abs() > tol {
            return Err(err(
                rows[i],
                format!("frequency {f} breaks the uniform grid"),
            ));
        }
    }
    SpectrumTrace::new(grid, psd, carrier, meta).map_err(|e| IoError::format(path, e))
}

pub fn write_trace(path: &Path, trace: &SpectrumTrace) -> Result<(), IoError> {
    atomic_write(path, format_trace(trace).as_bytes())
}

pub fn read_trace(path: &Path) -> Result<SpectrumTrace, IoError> {
    parse_trace(&read_text(path)?, path)
}

/// CSV table with a header row taken from the field names of `T`.
pub fn format_csv<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let text = format_csv(rows).map_err(|e| IoError::format(path, e))?;
    atomic_write(path, text.as_bytes())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                IoError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                }
            })
        })
        .collect()
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = toml::to_string(value).map_err(|e| IoError::format(path, e))?;
    atomic_write(path, text.as_bytes())
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    toml::from_str(&read_text(path)?).map_err(|e| IoError::format(path, e))
}
