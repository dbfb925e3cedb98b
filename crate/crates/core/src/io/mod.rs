//! File formats: WAV audio, `key = value` text, unit sidecars, duration
//! profiles, breakpoint lists and CSV tables.

pub mod config;
pub mod wav;

use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;

use crate::analysis::{duration_of_circular, unwrap_phase, AudioBuffer, TimeOrigin};
use crate::error::{FvnError, Result};
use crate::ffvn::DurationProfile;
use crate::fvn::{FvnParams, FvnUnit, PhaseSpec};
use crate::spectrum::{fft, center_rotate};

pub use config::RunConfig;
pub use wav::{read_wav, write_wav, SampleFormat};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FvnError + '_ {
    move |source| FvnError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl ToString) -> FvnError {
    FvnError::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Text sidecar stored next to a unit's WAV file.
pub fn sidecar_path(wav: &Path) -> PathBuf {
    wav.with_extension("txt")
}

/// Describe a unit as `key = value` text.
pub fn unit_sidecar(unit: &FvnUnit, kind: &str, key_id: Option<&str>) -> Result<RunConfig> {
    let mut c = RunConfig::new();
    c.push("kind", kind)?;
    if let Some(id) = key_id {
        c.push("key_id", id)?;
    }
    c.push("sample_rate", unit.sample_rate())?;
    c.push("fft_length", unit.len())?;
    c.push("center_index", unit.center_index())?;
    c.push("duration_s", unit.duration_s)?;
    if let Some(p) = &unit.params {
        c.push("bandwidth_hz", p.bandwidth_hz)?;
        c.push("segment_hz", p.segment_hz)?;
        c.push("phi_max", p.phi_max)?;
        c.push("seed", p.seed)?;
    }
    Ok(c)
}

/// Write the centred response as 64-bit float WAV plus its sidecar.
pub fn write_unit(path: &Path, unit: &FvnUnit, kind: &str, key_id: Option<&str>) -> Result<()> {
    let x = AudioBuffer::new(unit.centered(), unit.sample_rate())?;
    write_wav(path, &x, SampleFormat::Float64)?;
    unit_sidecar(unit, kind, key_id)?.save(&sidecar_path(path))
}

/// Read a unit written by [`write_unit`]. The phase is recovered by
/// unwrapping the response spectrum, which is exact for the smooth phases
/// produced here. A missing sidecar is allowed; a present one is checked.
pub fn read_unit(path: &Path) -> Result<(FvnUnit, Option<RunConfig>)> {
    let x = read_wav(path)?;
    let k = x.len();
    if k < 2 || k % 2 != 0 {
        return Err(format_err(path, format!("unit length {k} is not even")));
    }
    let side = sidecar_path(path);
    let meta = if side.exists() { Some(RunConfig::load(&side)?) } else { None };
    if let Some(m) = &meta {
        if let Some(len) = m.parsed::<usize>("fft_length")? {
            if len != k {
                return Err(format_err(&side, format!("fft_length {len} but WAV holds {k} samples")));
            }
        }
    }
    // undo the centring rotation (rotate right by K/2 is its own inverse)
    let h = center_rotate(&x.samples);
    let mut spec: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut spec);
    let dev = spec.iter().map(|c| (c.norm() - 1.0).abs()).fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(format_err(path, format!("response is not all-pass (magnitude error {dev:.3e})")));
    }
    let wrapped: Vec<f64> = spec[..=k / 2].iter().map(|c| c.arg()).collect();
    let mut half = unwrap_phase(&wrapped);
    half[k / 2] = 0.0;
    let phase = PhaseSpec::from_half(&half, x.sample_rate)
        .map_err(|e| format_err(path, format!("phase is not recoverable: {e}")))?;
    let params = match &meta {
        Some(m) if m.get("bandwidth_hz").is_some() => Some(FvnParams {
            bandwidth_hz: m.require("bandwidth_hz")?,
            segment_hz: m.require("segment_hz")?,
            phi_max: m.require("phi_max")?,
            fft_length: k,
            sample_rate: x.sample_rate,
            seed: m.require("seed")?,
        }),
        _ => None,
    };
    let duration_s = duration_of_circular(&h, x.sample_rate, TimeOrigin::Centroid)?;
    Ok((
        FvnUnit {
            impulse_response: h,
            phase,
            params,
            duration_s,
        },
        meta,
    ))
}

/// Duration profile from `key = value` text, with band rows written
/// `band <lo> <hi> <ms>`. Durations are in ms; a band edge may be written
/// `nyquist`.
pub fn parse_profile(text: &str, sample_rate: f64) -> Result<DurationProfile> {
    let normalized: String = text
        .lines()
        .map(|line| match line.trim().strip_prefix("band") {
            Some(rest) if rest.starts_with(char::is_whitespace) && !rest.contains('=') => {
                format!("band = {}\n", rest.trim())
            }
            _ => format!("{line}\n"),
        })
        .collect();
    let c = RunConfig::parse(&normalized)?;
    let form: String = c.require("form")?;
    let profile = match form.as_str() {
        "sigmoid" => DurationProfile::Sigmoid {
            corner_hz: c.require("corner_hz")?,
            transition_hz: c.require("transition_hz")?,
            max_s: c.require::<f64>("max_ms")? * 1e-3,
            min_s: c.require::<f64>("min_ms")? * 1e-3,
        },
        "band" => {
            let mut boundaries = vec![0.0];
            let mut durations = Vec::new();
            for (i, line) in c.get_all("band").enumerate() {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(FvnError::param("band", format!("band {}: expected `lo hi ms`", i + 1)));
                }
                let edge = |s: &str| -> Result<f64> {
                    if s == "nyquist" {
                        Ok(sample_rate / 2.0)
                    } else {
                        s.parse().map_err(|_| FvnError::param("band", format!("bad frequency `{s}`")))
                    }
                };
                let (lo, hi) = (edge(f[0])?, edge(f[1])?);
                let ms: f64 = f[2]
                    .parse()
                    .map_err(|_| FvnError::param("band", format!("bad duration `{}`", f[2])))?;
                if lo != *boundaries.last().unwrap() {
                    return Err(FvnError::param(
                        "band",
                        format!("band {} starts at {lo} Hz, expected {}", i + 1, boundaries.last().unwrap()),
                    ));
                }
                boundaries.push(hi);
                durations.push(ms * 1e-3);
            }
            if (boundaries.last().unwrap() - sample_rate / 2.0).abs() > 1e-9 {
                return Err(FvnError::param("band", "last band must end at Nyquist"));
            }
            DurationProfile::Band {
                boundaries,
                durations,
                smoother_hz: c.parsed("smoother_hz")?.unwrap_or(0.0),
            }
        }
        other => return Err(FvnError::param("form", format!("unknown profile form `{other}`"))),
    };
    profile.validate()?;
    Ok(profile)
}

pub fn profile_text(profile: &DurationProfile) -> Result<String> {
    let mut c = RunConfig::new();
    match profile {
        DurationProfile::Sigmoid {
            corner_hz,
            transition_hz,
            max_s,
            min_s,
        } => {
            c.push("form", "sigmoid")?;
            c.push("corner_hz", corner_hz)?;
            c.push("transition_hz", transition_hz)?;
            c.push("max_ms", max_s * 1e3)?;
            c.push("min_ms", min_s * 1e3)?;
        }
        DurationProfile::Band {
            boundaries,
            durations,
            smoother_hz,
        } => {
            c.push("form", "band")?;
            c.push("smoother_hz", smoother_hz)?;
            for (i, d) in durations.iter().enumerate() {
                c.push("band", format!("{} {} {}", boundaries[i], boundaries[i + 1], d * 1e3))?;
            }
        }
    }
    // band rows are written without `=`
    Ok(c.to_string().replace("band = ", "band "))
}

pub fn read_profile(path: &Path, sample_rate: f64) -> Result<DurationProfile> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_profile(&text, sample_rate).map_err(|e| format_err(path, e))
}

/// `time value` pairs, one per line, `#` comments allowed. Times must
/// increase.
pub fn parse_breakpoints(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| FvnError::param("breakpoints", format!("line {}: not numeric", i + 1)))?;
        if f.len() != 2 || !f.iter().all(|v| v.is_finite()) {
            return Err(FvnError::param("breakpoints", format!("line {}: expected `time value`", i + 1)));
        }
        if out.last().map_or(false, |p| f[0] <= p.0) {
            return Err(FvnError::param("breakpoints", format!("line {}: times must increase", i + 1)));
        }
        out.push((f[0], f[1]));
    }
    if out.is_empty() {
        return Err(FvnError::param("breakpoints", "no breakpoints"));
    }
    Ok(out)
}

pub fn read_breakpoints(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_breakpoints(&text).map_err(|e| format_err(path, e))
}

/// Write a CSV table with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(io_err(path))
}

/// Rows of a numeric CSV file, skipping the header.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| format_err(path, "empty CSV"))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format_err(path, format!("row {}: not numeric", i + 2)))?;
        if row.len() != header.len() {
            return Err(format_err(path, format!("row {} has {} cells, header has {}", i + 2, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffvn::generate_ffvn_unit;
    use crate::fvn::generate_unit;

    #[test]
    fn unit_round_trip_keeps_response_and_phase() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.wav");
        let p = FvnParams::new(8000.0, 200.0, 40.0, 4).with_fft_length(1024);
        let u = generate_unit(&p).unwrap();
        write_unit(&path, &u, "fvn", Some("k4")).unwrap();
        let (back, meta) = read_unit(&path).unwrap();
        assert_eq!(back.impulse_response, u.impulse_response);
        assert_eq!(back.params, u.params);
        assert_eq!(meta.unwrap().get("key_id"), Some("k4"));
        for (a, b) in back.phase.phase.iter().zip(&u.phase.phase) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn ffvn_phase_is_recovered_without_params() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let prof = DurationProfile::hts_band_table(16000.0, 400.0);
        let p = FvnParams::new(16000.0, 200.0, 40.0, 2).with_fft_length(16384);
        let mut u = generate_ffvn_unit(&prof, &p).unwrap();
        u.params = None;
        write_unit(&path, &u, "ffvn", None).unwrap();
        let (back, _) = read_unit(&path).unwrap();
        let err = back
            .phase
            .phase
            .iter()
            .zip(&u.phase.phase)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn profile_text_round_trip() {
        let b = DurationProfile::hts_band_table(16000.0, 400.0);
        let text = profile_text(&b).unwrap();
        assert!(text.lines().any(|l| l.starts_with("band 0 1000 ")), "{text}");
        let back = parse_profile(&text, 16000.0).unwrap();
        assert_eq!(back, b);
        let s = DurationProfile::Sigmoid {
            corner_hz: 2000.0,
            transition_hz: 200.0,
            max_s: 3e-3,
            min_s: 0.0037e-3,
        };
        let back = parse_profile(&profile_text(&s).unwrap(), 22050.0).unwrap();
        match back {
            DurationProfile::Sigmoid { max_s, min_s, .. } => {
                assert!((max_s - 3e-3).abs() < 1e-15 && (min_s - 0.0037e-3).abs() < 1e-18)
            }
            _ => panic!(),
        }
        let text = "form = band\nband 0 1000 0.1\nband = 1000 nyquist 5\n";
        assert!(parse_profile(text, 16000.0).is_ok());
        let gap = "form = band\nband = 0 1000 0.1\nband = 1200 nyquist 5\n";
        assert!(parse_profile(gap, 16000.0).is_err());
    }

    #[test]
    fn breakpoints_and_csv() {
        let b = parse_breakpoints("# eta\n0 -40\n10 40\n").unwrap();
        assert_eq!(b, vec![(0.0, -40.0), (10.0, 40.0)]);
        assert!(parse_breakpoints("1 0\n0 1\n").is_err());
        assert!(parse_breakpoints("1 x\n").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &["a", "b"], vec![vec![1.0, 0.1], vec![2.0, 1e-20]]).unwrap();
        let (h, rows) = read_csv(&path).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows[1][1], 1e-20);
    }
}
