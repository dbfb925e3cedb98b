//! All-pass filtering with FVN keys, key-based recovery and kurtosis-based
//! tamper detection.
//!
//! The key response is used in its centred form (time zero at `K/2`), so
//! filtering adds a latency of `K/2` samples and recovery with the
//! time-reversed key brings the total to `K - 1`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::analysis::{running_kurtosis, AudioBuffer, KurtosisConfig};
use crate::error::{FvnError, Result};
use crate::fvn::{generate_unit_for_duration, FvnParams, FvnUnit};
use crate::spectrum::{circular_convolve, circular_reverse, fft, ifft};

/// Tolerance on `h (*) reverse(h) = delta`.
pub const TSP_TOL: f64 = 1e-9;

/// Target duration of the short post-processing key, seconds.
pub const DEPUZZ_DURATION_S: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct HidingKey {
    pub unit: FvnUnit,
    pub key_id: String,
}

impl HidingKey {
    /// Wrap a unit, checking that it is a time-stretched pulse.
    pub fn new(unit: FvnUnit, key_id: impl Into<String>) -> Result<Self> {
        let h = &unit.impulse_response;
        if h.is_empty() {
            return Err(FvnError::param("key", "empty impulse response"));
        }
        let auto = circular_convolve(h, &circular_reverse(h))?;
        let err = auto
            .iter()
            .enumerate()
            .map(|(i, v)| (v - if i == 0 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if err > TSP_TOL {
            return Err(FvnError::Contract(format!(
                "key is not a time-stretched pulse (max deviation {err:.3e})"
            )));
        }
        Ok(Self {
            unit,
            key_id: key_id.into(),
        })
    }

    /// Short key for softening pulse-excited audio: about 1 ms duration.
    pub fn depuzz(sample_rate: f64, seed: u64) -> Result<Self> {
        let params = FvnParams::new(sample_rate, 200.0, 40.0, seed);
        let unit = generate_unit_for_duration(&params, DEPUZZ_DURATION_S, 0.02)?;
        Self::new(unit, format!("depuzz-{seed}"))
    }

    pub fn len(&self) -> usize {
        self.unit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit.is_empty()
    }

    /// Samples of delay introduced by [`apply_allpass`].
    pub fn latency(&self) -> usize {
        self.unit.center_index()
    }
}

/// Linear convolution by overlap-add with blocks at least eight times the
/// key length. Blocks are transformed in parallel and summed in order.
pub fn overlap_add(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() || h.is_empty() {
        return Err(FvnError::param("x", "empty input"));
    }
    let m = h.len();
    let nfft = (9 * m).next_power_of_two();
    let block = nfft - m + 1;
    let mut hs: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    hs.resize(nfft, Complex64::new(0.0, 0.0));
    fft(&mut hs);
    let pieces: Vec<Vec<f64>> = x
        .par_chunks(block)
        .map(|chunk| {
            let mut buf: Vec<Complex64> = chunk.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            buf.resize(nfft, Complex64::new(0.0, 0.0));
            fft(&mut buf);
            for (b, k) in buf.iter_mut().zip(&hs) {
                *b *= k;
            }
            ifft(&mut buf);
            buf[..chunk.len() + m - 1].iter().map(|c| c.re).collect()
        })
        .collect();
    let mut out = vec![0.0; x.len() + m - 1];
    for (i, piece) in pieces.iter().enumerate() {
        for (o, v) in out[i * block..].iter_mut().zip(piece) {
            *o += v;
        }
    }
    Ok(out)
}

/// Filter `x` with the key. The output has `len(x) + K - 1` samples and
/// `x[n]` maps to `y[n + latency]`.
pub fn apply_allpass(x: &AudioBuffer, key: &HidingKey) -> Result<AudioBuffer> {
    if x.is_empty() {
        return Err(FvnError::param("x", "empty input"));
    }
    check_rate(x, key)?;
    AudioBuffer::new(overlap_add(&x.samples, &key.unit.centered())?, x.sample_rate)
}

/// Undo [`apply_allpass`]: convolve with the time-reversed key and remove
/// the combined latency. Returns `len(y) - K + 1` samples.
pub fn recover(y: &AudioBuffer, key: &HidingKey) -> Result<AudioBuffer> {
    check_rate(y, key)?;
    let k = key.len();
    if y.len() < k {
        return Err(FvnError::Alignment(format!(
            "signal has {} samples, fewer than the {k}-sample key; it was not produced by filtering with this key",
            y.len()
        )));
    }
    let mut reversed = key.unit.centered();
    reversed.reverse();
    let z = overlap_add(&y.samples, &reversed)?;
    let n = y.len() - k + 1;
    AudioBuffer::new(z[k - 1..k - 1 + n].to_vec(), y.sample_rate)
}

fn check_rate(x: &AudioBuffer, key: &HidingKey) -> Result<()> {
    if (x.sample_rate - key.unit.sample_rate()).abs() > 1e-9 * x.sample_rate {
        return Err(FvnError::param(
            "sample_rate",
            format!(
                "signal at {} Hz, key at {} Hz",
                x.sample_rate,
                key.unit.sample_rate()
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Intact,
    Suspect,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Intact => "intact",
            Verdict::Suspect => "suspect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TamperReport {
    pub exceedance_fraction: f64,
    pub verdict: Verdict,
}

impl std::fmt::Display for TamperReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "verdict={} exceedance={}",
            self.verdict.as_str(),
            self.exceedance_fraction
        )
    }
}

/// Recover with `key`, then judge by how often running kurtosis exceeds
/// the configured threshold. Genuine high-kurtosis content survives only
/// the matching key.
pub fn detect_tamper(x: &AudioBuffer, key: &HidingKey, config: &KurtosisConfig) -> Result<TamperReport> {
    let restored = recover(x, key)?;
    let kurt = running_kurtosis(&restored, config)?;
    let exceedance_fraction = kurt.exceedance_fraction(config.threshold);
    let verdict = if exceedance_fraction >= config.decision_level {
        Verdict::Intact
    } else {
        Verdict::Suspect
    };
    Ok(TamperReport {
        exceedance_fraction,
        verdict,
    })
}
