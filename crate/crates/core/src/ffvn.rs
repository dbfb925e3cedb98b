//! Frequency-dependent duration control by frequency-axis warping.
//!
//! A target duration profile `D(f)` defines the weighting
//! `g(f) = D(f) / D_max` and the warped axis `nu(f) = alpha * int_0^f g`.
//! A constant-duration FVN phase designed on the `nu` axis and read back
//! through `nu(f)` yields a phase whose local slope, and so the local
//! duration, scales with `g(f)`.

use std::f64::consts::PI;

use crate::error::{FvnError, Result};
use crate::fvn::{bandwidth_for_duration, design_phase, synthesize_unit, FvnParams, FvnUnit, PhaseSpec};

/// Minimum ratio of FFT length to the longest target duration (in samples).
pub const BUFFER_DURATION_RATIO: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum DurationProfile {
    /// Logistic rise from `min_s` to `max_s` centred on `corner_hz`.
    Sigmoid {
        corner_hz: f64,
        transition_hz: f64,
        max_s: f64,
        min_s: f64,
    },
    /// Piecewise-constant durations smoothed by a raised cosine of width
    /// `smoother_hz`. `boundaries` has one more entry than `durations`,
    /// starting at 0 and ending at Nyquist.
    Band {
        boundaries: Vec<f64>,
        durations: Vec<f64>,
        smoother_hz: f64,
    },
}

impl DurationProfile {
    /// Durations for 0-1k, 1k-2k, 2k-4k, 4k-6k and 6k-Nyquist.
    pub fn hts_band_table(sample_rate: f64, smoother_hz: f64) -> Self {
        DurationProfile::Band {
            boundaries: vec![0.0, 1000.0, 2000.0, 4000.0, 6000.0, sample_rate / 2.0],
            durations: vec![0.1e-3, 0.4e-3, 3e-3, 2e-3, 5e-3],
            smoother_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DurationProfile::Sigmoid {
                transition_hz,
                max_s,
                min_s,
                corner_hz,
            } => {
                if !(*min_s > 0.0 && min_s <= max_s) {
                    return Err(FvnError::param("min_s", "need 0 < min_s <= max_s"));
                }
                if !(*transition_hz > 0.0) {
                    return Err(FvnError::param("transition_hz", "must be positive"));
                }
                if !corner_hz.is_finite() {
                    return Err(FvnError::param("corner_hz", "must be finite"));
                }
            }
            DurationProfile::Band {
                boundaries,
                durations,
                smoother_hz,
            } => {
                if durations.is_empty() || boundaries.len() != durations.len() + 1 {
                    return Err(FvnError::param(
                        "boundaries",
                        "need one more boundary than band durations",
                    ));
                }
                if boundaries[0] != 0.0 {
                    return Err(FvnError::param("boundaries", "first boundary must be 0 Hz"));
                }
                if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(FvnError::param("boundaries", "must be strictly increasing"));
                }
                if durations.iter().any(|d| !(*d > 0.0)) {
                    return Err(FvnError::param("durations", "must all be positive"));
                }
                if !(*smoother_hz >= 0.0) {
                    return Err(FvnError::param("smoother_hz", "must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// Largest target duration, seconds.
    pub fn max_duration(&self) -> f64 {
        match self {
            DurationProfile::Sigmoid { max_s, .. } => *max_s,
            DurationProfile::Band { durations, .. } => {
                durations.iter().copied().fold(0.0, f64::max)
            }
        }
    }

    /// Profile value without range checks.
    pub fn value(&self, f: f64) -> f64 {
        match self {
            DurationProfile::Sigmoid {
                corner_hz,
                transition_hz,
                max_s,
                min_s,
            } => {
                let floor = min_s / max_s;
                ((1.0 - floor) / (1.0 + (-(f - corner_hz) / transition_hz).exp()) + floor) * max_s
            }
            DurationProfile::Band {
                boundaries,
                durations,
                smoother_hz,
            } => {
                let last = durations.len() - 1;
                durations
                    .iter()
                    .enumerate()
                    .map(|(k, d)| {
                        // first and last bands extend beyond 0 and Nyquist
                        let lower = if k == 0 {
                            1.0
                        } else {
                            smoothed_step(f - boundaries[k], *smoother_hz)
                        };
                        let upper = if k == last {
                            0.0
                        } else {
                            smoothed_step(f - boundaries[k + 1], *smoother_hz)
                        };
                        d * (lower - upper)
                    })
                    .sum()
            }
        }
    }
}

/// Unit step convolved with the unit-area raised cosine
/// `(1 + cos(2 pi x / w)) / w` on `[-w/2, w/2]`.
fn smoothed_step(x: f64, width: f64) -> f64 {
    if width == 0.0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    if x <= -width / 2.0 {
        0.0
    } else if x >= width / 2.0 {
        1.0
    } else {
        (x + width / 2.0) / width + (2.0 * PI * x / width).sin() / (2.0 * PI)
    }
}

/// Target duration (seconds) at frequency `f` in `[0, sample_rate / 2]`.
pub fn evaluate_profile(profile: &DurationProfile, f: f64, sample_rate: f64) -> Result<f64> {
    profile.validate()?;
    if !(0.0..=sample_rate / 2.0).contains(&f) {
        return Err(FvnError::param(
            "frequency",
            format!("{f} Hz lies outside [0, {}]", sample_rate / 2.0),
        ));
    }
    Ok(profile.value(f))
}

/// Warped frequency axis sampled on a uniform grid over `[0, fs/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpMap {
    pub grid: Vec<f64>,
    pub nu: Vec<f64>,
    /// Normalised weighting `g(f)` on the grid.
    pub weight: Vec<f64>,
    pub alpha: f64,
}

impl WarpMap {
    /// `nu(f)` by linear interpolation on the grid.
    pub fn nu_at(&self, f: f64) -> f64 {
        let step = self.grid[1] - self.grid[0];
        let last = self.grid.len() - 1;
        let pos = (f / step).clamp(0.0, last as f64);
        let i = (pos.floor() as usize).min(last - 1);
        let frac = pos - i as f64;
        self.nu[i] * (1.0 - frac) + self.nu[i + 1] * frac
    }

    /// Slope `d nu / d f` at grid index `i`.
    pub fn slope(&self, i: usize) -> f64 {
        self.alpha * self.weight[i]
    }
}

pub fn build_warp_map(profile: &DurationProfile, sample_rate: f64, grid_resolution: f64) -> Result<WarpMap> {
    profile.validate()?;
    if !(grid_resolution > 0.0) {
        return Err(FvnError::param("grid_resolution", "must be positive"));
    }
    let nyquist = sample_rate / 2.0;
    let intervals = ((nyquist / grid_resolution).round() as usize).max(1);
    let step = nyquist / intervals as f64;
    let grid: Vec<f64> = (0..=intervals).map(|i| i as f64 * step).collect();
    let max_d = profile.max_duration();
    let weight: Vec<f64> = grid.iter().map(|&f| profile.value(f) / max_d).collect();
    let mut integral = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    integral.push(0.0);
    for w in weight.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * step;
        integral.push(acc);
    }
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(FvnError::Degenerate(
            "duration profile integrates to zero".into(),
        ));
    }
    let alpha = nyquist / acc;
    let mut nu: Vec<f64> = integral.iter().map(|v| v * alpha).collect();
    *nu.last_mut().unwrap() = nyquist;
    Ok(WarpMap {
        grid,
        nu,
        weight,
        alpha,
    })
}

/// Constant duration the FVN must have on the warped axis: the target at
/// the grid point of largest weight divided by the warp slope there.
pub fn warped_axis_duration(profile: &DurationProfile, warp: &WarpMap) -> f64 {
    let (i_max, _) = warp
        .weight
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |b, (i, w)| if *w > b.1 { (i, *w) } else { b });
    profile.value(warp.grid[i_max]) / warp.slope(i_max)
}

/// FVN parameters for the warped axis: bandwidth from the warped-axis
/// duration, with the segment-to-bandwidth ratio of `params`.
pub fn warped_axis_params(profile: &DurationProfile, params: &FvnParams) -> Result<(WarpMap, FvnParams)> {
    let fs = params.sample_rate;
    let k = params.fft_length as f64;
    let needed = BUFFER_DURATION_RATIO * profile.max_duration() * fs;
    if k < needed {
        return Err(FvnError::Contract(format!(
            "FFT length {} is below {BUFFER_DURATION_RATIO} times the longest target duration ({:.0} samples); use a buffer five to ten times longer than the maximum duration",
            params.fft_length,
            needed.ceil()
        )));
    }
    let warp = build_warp_map(profile, fs, fs / k)?;
    let duration = warped_axis_duration(profile, &warp);
    let bandwidth = bandwidth_for_duration(duration)?;
    let ratio = params.segment_hz / params.bandwidth_hz;
    let warped = FvnParams {
        bandwidth_hz: bandwidth,
        segment_hz: (bandwidth * ratio).max(1.0),
        ..*params
    };
    Ok((warp, warped))
}

/// FFVN phase: the warped-axis FVN phase read through `nu(f)`.
pub fn design_ffvn_phase(profile: &DurationProfile, params: &FvnParams) -> Result<PhaseSpec> {
    let (warp, warped) = warped_axis_params(profile, params)?;
    let base = design_phase(&warped)?;
    Ok(warp_phase(&base, &warp))
}

/// Read `phase` at `nu(f_k)` for every bin `k` up to Nyquist.
pub fn warp_phase(phase: &PhaseSpec, warp: &WarpMap) -> PhaseSpec {
    let k = phase.fft_length();
    let bin = phase.bin_hz();
    let mut out = vec![0.0; k];
    for i in 1..k / 2 {
        let v = phase.interpolate(warp.nu_at(i as f64 * bin) / bin);
        out[i] = v;
        out[k - i] = -v;
    }
    PhaseSpec {
        phase: out,
        sample_rate: phase.sample_rate,
    }
}

pub fn synthesize_ffvn_unit(phase: &PhaseSpec) -> Result<FvnUnit> {
    synthesize_unit(phase)
}

/// Design and synthesise one FFVN unit.
pub fn generate_ffvn_unit(profile: &DurationProfile, params: &FvnParams) -> Result<FvnUnit> {
    let phase = design_ffvn_phase(profile, params)?;
    let mut unit = synthesize_unit(&phase)?;
    unit.params = Some(*params);
    Ok(unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigmoid() -> DurationProfile {
        DurationProfile::Sigmoid {
            corner_hz: 2000.0,
            transition_hz: 200.0,
            max_s: 3e-3,
            min_s: 0.0037e-3,
        }
    }

    #[test]
    fn sigmoid_midpoint_and_limit() {
        let p = sigmoid();
        let floor = 0.0037 / 3.0;
        let mid = evaluate_profile(&p, 2000.0, 22050.0).unwrap();
        assert!((mid - (1.0 + floor) / 2.0 * 3e-3).abs() < 1e-15);
        let high = evaluate_profile(&p, 11025.0, 22050.0).unwrap();
        assert!((high - 3e-3).abs() < 1e-12);
        assert!((p.value(1e9) - 3e-3).abs() < 1e-15);
        assert!(evaluate_profile(&p, 12000.0, 22050.0).is_err());
        assert!(evaluate_profile(&p, -1.0, 22050.0).is_err());
    }

    #[test]
    fn equal_bands_give_constant_profile() {
        let p = DurationProfile::Band {
            boundaries: vec![0.0, 1000.0, 3000.0, 8000.0],
            durations: vec![2e-3; 3],
            smoother_hz: 400.0,
        };
        for i in 0..=800 {
            let f = i as f64 * 10.0;
            assert!((p.value(f) - 2e-3).abs() < 1e-15);
        }
    }

    #[test]
    fn band_smoothing_is_centred_on_boundary() {
        let p = DurationProfile::Band {
            boundaries: vec![0.0, 1000.0, 8000.0],
            durations: vec![1e-3, 3e-3],
            smoother_hz: 400.0,
        };
        assert!((p.value(1000.0) - 2e-3).abs() < 1e-15);
        assert_eq!(p.value(790.0), 1e-3);
        assert_eq!(p.value(1210.0), 3e-3);
        // matches direct numerical convolution with the raised cosine
        let w = 400.0;
        let f = 1100.0;
        let n = 40_000;
        let mut acc = 0.0;
        let mut area = 0.0;
        for i in 0..n {
            let u = -w / 2.0 + (i as f64 + 0.5) * w / n as f64;
            let s = (1.0 + (2.0 * PI * u / w).cos()) / 2.0;
            let step = if f - u < 1000.0 { 1e-3 } else { 3e-3 };
            acc += s * step;
            area += s;
        }
        assert!((p.value(f) - acc / area).abs() < 1e-9);
    }

    #[test]
    fn band_validation() {
        let bad = DurationProfile::Band {
            boundaries: vec![0.0, 2000.0, 1000.0],
            durations: vec![1e-3, 1e-3],
            smoother_hz: 0.0,
        };
        assert!(bad.validate().is_err());
        let bad = DurationProfile::Band {
            boundaries: vec![0.0, 1000.0],
            durations: vec![0.0],
            smoother_hz: 0.0,
        };
        assert!(bad.validate().is_err());
        let bad = DurationProfile::Sigmoid {
            corner_hz: 1.0,
            transition_hz: 1.0,
            max_s: 1e-3,
            min_s: 2e-3,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_profile_is_identity_warp() {
        let p = DurationProfile::Band {
            boundaries: vec![0.0, 8000.0],
            durations: vec![1e-3],
            smoother_hz: 0.0,
        };
        let w = build_warp_map(&p, 16000.0, 1.0).unwrap();
        assert!((w.alpha - 1.0).abs() < 1e-12);
        for (f, nu) in w.grid.iter().zip(&w.nu) {
            assert!((f - nu).abs() < 1e-9);
        }
    }

    #[test]
    fn step_weight_gives_two_slopes() {
        // g = 0.5 below 4 kHz, 1 above: nu = alpha * (0.5 f) then alpha * (2000 + f - 4000)
        let p = DurationProfile::Band {
            boundaries: vec![0.0, 4000.0, 8000.0],
            durations: vec![1e-3, 2e-3],
            smoother_hz: 0.0,
        };
        let w = build_warp_map(&p, 16000.0, 1.0).unwrap();
        let alpha = 8000.0 / 6000.0;
        assert!((w.alpha - alpha).abs() < 1e-3);
        assert!((w.nu_at(2000.0) - alpha * 1000.0).abs() < 1.0);
        assert!((w.nu_at(6000.0) - alpha * 4000.0).abs() < 1.0);
        let s1 = (w.nu_at(3000.0) - w.nu_at(1000.0)) / 2000.0;
        let s2 = (w.nu_at(7000.0) - w.nu_at(5000.0)) / 2000.0;
        assert!((s2 / s1 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn warp_endpoints_and_monotone() {
        let w = build_warp_map(&sigmoid(), 22050.0, 22050.0 / 32768.0).unwrap();
        assert_eq!(w.nu[0], 0.0);
        assert!((w.nu.last().unwrap() - 11025.0).abs() <= 1e-9 * 11025.0);
        assert!(w.nu.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn identity_warp_reproduces_fvn_phase() {
        let d = 2e-3;
        let p = DurationProfile::Band {
            boundaries: vec![0.0, 8000.0],
            durations: vec![d],
            smoother_hz: 0.0,
        };
        let params = FvnParams::new(16000.0, 200.0, 40.0, 5).with_fft_length(8192);
        let warped = design_ffvn_phase(&p, &params).unwrap();
        let b = bandwidth_for_duration(d).unwrap();
        let plain = design_phase(&FvnParams {
            bandwidth_hz: b,
            segment_hz: b * 0.2,
            ..params
        })
        .unwrap();
        for (a, c) in warped.phase.iter().zip(&plain.phase) {
            assert!((a - c).abs() < 1e-9);
        }
    }

    #[test]
    fn short_buffer_rejected() {
        let params = FvnParams::new(22050.0, 200.0, 40.0, 1).with_fft_length(256);
        let err = design_ffvn_phase(&sigmoid(), &params).unwrap_err();
        assert!(matches!(err, FvnError::Contract(ref m) if m.contains("five to ten times")));
    }

    #[test]
    fn ffvn_unit_is_allpass() {
        let params = FvnParams::new(22050.0, 200.0, 40.0, 3).with_fft_length(32768);
        let u = generate_ffvn_unit(&sigmoid(), &params).unwrap();
        let e: f64 = u.impulse_response.iter().map(|v| v * v).sum();
        assert!((e - 1.0).abs() < 1e-10);
        assert!(u.phase.symmetry_error() < 1e-10);
        let z = synthesize_ffvn_unit(&PhaseSpec::zero(64, 8000.0)).unwrap();
        assert!((z.impulse_response[0] - 1.0).abs() < 1e-12);
    }
}
