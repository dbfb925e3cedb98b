//! Frequency-domain velvet noise (FVN).
//!
//! Phase windows are placed on the circular DFT axis by the velvet-noise
//! rule, each paired with a negated image so the phase stays odd about 0 Hz
//! and about Nyquist. The inverse DFT of `exp(j phase)` is an all-pass
//! impulse response stored centred on circular index 0.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::analysis::{duration_of_circular, TimeOrigin};
use crate::cosine::CosineSeries;
use crate::error::{FvnError, Result};
use crate::rng::{round_half_away, seeded, UniformSource};
use crate::spectrum::SpectrumBuffer;

/// Product of smoother support (Hz) and duration (s) fitted from simulation.
pub const DURATION_BANDWIDTH_PRODUCT: f64 = 0.522;

const SYMMETRY_TOL: f64 = 1e-10;
const REALNESS_TOL: f64 = 1e-10;

/// Generation parameters for one FVN unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvnParams {
    /// Support half-width `B` of each phase window, Hz.
    pub bandwidth_hz: f64,
    /// Average frequency segment length `F_d`, Hz.
    pub segment_hz: f64,
    /// Phase magnitude of each window, radians.
    pub phi_max: f64,
    pub fft_length: usize,
    pub sample_rate: f64,
    pub seed: u64,
}

impl FvnParams {
    /// Parameters with `phi_max = pi/2` and an FFT length from
    /// [`suggested_fft_length`].
    pub fn new(sample_rate: f64, bandwidth_hz: f64, segment_hz: f64, seed: u64) -> Self {
        Self {
            bandwidth_hz,
            segment_hz,
            phi_max: FRAC_PI_2,
            fft_length: suggested_fft_length(bandwidth_hz, sample_rate),
            sample_rate,
            seed,
        }
    }

    pub fn with_fft_length(mut self, fft_length: usize) -> Self {
        self.fft_length = fft_length;
        self
    }

    pub fn with_phi_max(mut self, phi_max: f64) -> Self {
        self.phi_max = phi_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Nominal duration from the bandwidth-duration law, seconds.
    pub fn target_duration(&self) -> f64 {
        duration_for_bandwidth(self.bandwidth_hz)
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate / self.fft_length as f64
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate / 2.0;
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(FvnError::param("sample_rate", "must be positive"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz < nyquist) {
            return Err(FvnError::param(
                "bandwidth_hz",
                format!("must lie in (0, {nyquist}), got {}", self.bandwidth_hz),
            ));
        }
        if !(self.segment_hz >= 1.0 && self.segment_hz <= self.bandwidth_hz) {
            return Err(FvnError::param(
                "segment_hz",
                format!(
                    "must lie in [1, bandwidth_hz = {}], got {}",
                    self.bandwidth_hz, self.segment_hz
                ),
            ));
        }
        if !(self.phi_max > 0.0) || !self.phi_max.is_finite() {
            return Err(FvnError::param("phi_max", "must be positive"));
        }
        if self.fft_length < 2 || self.fft_length % 2 != 0 {
            return Err(FvnError::param(
                "fft_length",
                format!("must be even and at least 2, got {}", self.fft_length),
            ));
        }
        let min_len = 10.0 * self.target_duration() * self.sample_rate;
        if (self.fft_length as f64) < min_len {
            return Err(FvnError::param(
                "fft_length",
                format!(
                    "{} is shorter than ten nominal durations ({:.0} samples)",
                    self.fft_length,
                    min_len.ceil()
                ),
            ));
        }
        Ok(())
    }
}

/// Power of two covering forty nominal durations, at least 256.
pub fn suggested_fft_length(bandwidth_hz: f64, sample_rate: f64) -> usize {
    let samples = 40.0 * duration_for_bandwidth(bandwidth_hz) * sample_rate;
    (samples.ceil() as usize).max(256).next_power_of_two()
}

/// Smoother support `B` (Hz) giving a duration of `duration_s`.
pub fn bandwidth_for_duration(duration_s: f64) -> Result<f64> {
    if !(duration_s > 0.0) {
        return Err(FvnError::param("duration", "must be positive"));
    }
    Ok(DURATION_BANDWIDTH_PRODUCT / duration_s)
}

pub fn duration_for_bandwidth(bandwidth_hz: f64) -> f64 {
    DURATION_BANDWIDTH_PRODUCT / bandwidth_hz
}

/// One phase window placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    /// Centre frequency, Hz.
    pub center_hz: f64,
    /// Signed phase amplitude, `+-phi_max`.
    pub amplitude: f64,
}

/// Odd-symmetric phase over `K` circular bins.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpec {
    pub phase: Vec<f64>,
    pub sample_rate: f64,
}

impl PhaseSpec {
    pub fn new(phase: Vec<f64>, sample_rate: f64) -> Result<Self> {
        let spec = Self { phase, sample_rate };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero(fft_length: usize, sample_rate: f64) -> Self {
        Self {
            phase: vec![0.0; fft_length],
            sample_rate,
        }
    }

    pub fn fft_length(&self) -> usize {
        self.phase.len()
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate / self.phase.len() as f64
    }

    /// Largest violation of `phase(K-k) = -phase(k)`, including the
    /// requirement that bins 0 and K/2 vanish.
    pub fn symmetry_error(&self) -> f64 {
        let k = self.phase.len();
        let mut err = self.phase[0].abs().max(self.phase[k / 2].abs());
        for i in 1..k / 2 {
            err = err.max((self.phase[k - i] + self.phase[i]).abs());
        }
        err
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.phase.len();
        if k < 2 || k % 2 != 0 {
            return Err(FvnError::param(
                "fft_length",
                format!("phase length must be even and at least 2, got {k}"),
            ));
        }
        if !(self.sample_rate > 0.0) {
            return Err(FvnError::param("sample_rate", "must be positive"));
        }
        if self.phase.iter().any(|p| !p.is_finite()) {
            return Err(FvnError::Contract("phase contains non-finite values".into()));
        }
        let err = self.symmetry_error();
        if err > SYMMETRY_TOL {
            return Err(FvnError::Contract(format!(
                "phase is not odd-symmetric (max error {err:.3e})"
            )));
        }
        Ok(())
    }

    /// Phase at fractional bin position `k` in `[0, K/2]`, by linear
    /// interpolation.
    pub fn interpolate(&self, k: f64) -> f64 {
        let half = self.phase.len() / 2;
        let k = k.clamp(0.0, half as f64);
        let i = k.floor() as usize;
        if i >= half {
            return self.phase[half];
        }
        let frac = k - i as f64;
        self.phase[i] * (1.0 - frac) + self.phase[i + 1] * frac
    }

    /// Rebuild a full circular phase from its values on bins `0..=K/2`.
    pub fn from_half(half: &[f64], sample_rate: f64) -> Result<Self> {
        if half.len() < 2 {
            return Err(FvnError::param("phase", "half spectrum needs two or more bins"));
        }
        let k = 2 * (half.len() - 1);
        let mut phase = vec![0.0; k];
        for i in 1..k / 2 {
            phase[i] = half[i];
            phase[k - i] = -half[i];
        }
        Self::new(phase, sample_rate)
    }
}

/// An FVN unit: all-pass impulse response centred on circular index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FvnUnit {
    pub impulse_response: Vec<f64>,
    pub phase: PhaseSpec,
    pub params: Option<FvnParams>,
    /// Duration about the energy centroid, seconds.
    pub duration_s: f64,
}

impl FvnUnit {
    pub fn sample_rate(&self) -> f64 {
        self.phase.sample_rate
    }

    pub fn len(&self) -> usize {
        self.impulse_response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impulse_response.is_empty()
    }

    /// Response rotated so circular index 0 sits at `len / 2`.
    pub fn centered(&self) -> Vec<f64> {
        crate::spectrum::center_rotate(&self.impulse_response)
    }

    /// Index of circular time zero within [`FvnUnit::centered`].
    pub fn center_index(&self) -> usize {
        self.impulse_response.len() / 2
    }
}

/// Draw one `(r1, r2)` pair per segment and place the windows.
pub fn allocate_with<S: UniformSource + ?Sized>(
    params: &FvnParams,
    source: &mut S,
) -> Result<Vec<Allocation>> {
    params.validate()?;
    let nyquist = params.sample_rate / 2.0;
    let fd = params.segment_hz;
    let segments = (nyquist / fd).floor() as usize;
    let mut out = Vec::with_capacity(segments);
    for m in 0..segments {
        let r1 = source.next_open01();
        let r2 = source.next_open01();
        let center = round_half_away(m as f64 * fd + r1 * (fd - 1.0));
        // segment 0 can round onto DC, where the window pair cancels
        let center = center.clamp(1.0, (nyquist - 1.0).max(1.0));
        out.push(Allocation {
            center_hz: center,
            amplitude: (2.0 * round_half_away(r2) - 1.0) * params.phi_max,
        });
    }
    Ok(out)
}

/// Centre frequencies in bins for the seed in `params`.
pub fn allocate_centers(params: &FvnParams) -> Result<Vec<f64>> {
    let mut rng = seeded(params.seed);
    let bin = params.bin_hz();
    Ok(allocate_with(params, &mut rng)?
        .into_iter()
        .map(|a| a.center_hz / bin)
        .collect())
}

/// Sum the window pairs for explicit allocations.
pub fn phase_from_allocations(params: &FvnParams, allocations: &[Allocation]) -> Result<PhaseSpec> {
    params.validate()?;
    let k_len = params.fft_length;
    let bin = params.bin_hz();
    let half_width = params.bandwidth_hz / bin;
    let series = CosineSeries::SIX_TERM;
    let mut phase = vec![0.0; k_len];
    let modulo = |j: i64| j.rem_euclid(k_len as i64) as usize;
    for a in allocations {
        let c = a.center_hz / bin;
        let lo = (c - half_width).ceil() as i64;
        let hi = (c + half_width).floor() as i64;
        for j in lo..=hi {
            let v = a.amplitude * series.eval(j as f64 - c, half_width);
            phase[modulo(j)] += v;
            phase[modulo(-j)] -= v;
        }
    }
    Ok(PhaseSpec {
        phase,
        sample_rate: params.sample_rate,
    })
}

pub fn design_phase_with<S: UniformSource + ?Sized>(
    params: &FvnParams,
    source: &mut S,
) -> Result<PhaseSpec> {
    let alloc = allocate_with(params, source)?;
    phase_from_allocations(params, &alloc)
}

/// FVN phase for the seed in `params`.
pub fn design_phase(params: &FvnParams) -> Result<PhaseSpec> {
    design_phase_with(params, &mut seeded(params.seed))
}

/// Inverse DFT of `exp(j phase)`.
pub fn synthesize_unit(phase: &PhaseSpec) -> Result<FvnUnit> {
    phase.validate()?;
    let spectrum = SpectrumBuffer::from_phase(&phase.phase, phase.sample_rate)?;
    let (h, residue) = spectrum.to_real();
    if residue > REALNESS_TOL {
        return Err(FvnError::Contract(format!(
            "inverse transform is not real (imaginary residue {residue:.3e})"
        )));
    }
    let duration_s = duration_of_circular(&h, phase.sample_rate, TimeOrigin::Centroid)?;
    Ok(FvnUnit {
        impulse_response: h,
        phase: phase.clone(),
        params: None,
        duration_s,
    })
}

/// Design and synthesise the unit for `params`.
pub fn generate_unit(params: &FvnParams) -> Result<FvnUnit> {
    let phase = design_phase(params)?;
    let mut unit = synthesize_unit(&phase)?;
    unit.params = Some(*params);
    Ok(unit)
}

/// Unit whose measured duration is within `tolerance` (relative) of
/// `target_s`, found by rescaling the bandwidth of `params` (and the
/// segment width with it). Duration falls as the reciprocal of bandwidth,
/// so a few fixed-point steps converge.
pub fn generate_unit_for_duration(params: &FvnParams, target_s: f64, tolerance: f64) -> Result<FvnUnit> {
    if !(target_s > 0.0) {
        return Err(FvnError::param("target_s", "must be positive"));
    }
    let ratio = params.segment_hz / params.bandwidth_hz;
    let mut bandwidth = bandwidth_for_duration(target_s)?;
    let mut best: Option<FvnUnit> = None;
    for _ in 0..8 {
        let p = FvnParams {
            bandwidth_hz: bandwidth,
            segment_hz: (bandwidth * ratio).max(1.0),
            fft_length: params
                .fft_length
                .max(suggested_fft_length(bandwidth, params.sample_rate)),
            ..*params
        };
        let unit = generate_unit(&p)?;
        let scale = unit.duration_s / target_s;
        let done = (scale - 1.0).abs() <= tolerance;
        let better = best
            .as_ref()
            .map_or(true, |b| (b.duration_s / target_s - 1.0).abs() > (scale - 1.0).abs());
        if better {
            best = Some(unit);
        }
        if done {
            break;
        }
        bandwidth = (bandwidth * scale).min(params.sample_rate / 2.0 - 1.0);
    }
    Ok(best.expect("at least one iteration"))
}

/// Durations (seconds) of units for each seed, computed in parallel.
pub fn duration_samples(params: &FvnParams, seeds: impl IntoParallelIterator<Item = u64>) -> Result<Vec<f64>> {
    seeds
        .into_par_iter()
        .map(|s| generate_unit(&params.with_seed(s)).map(|u| u.duration_s))
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
