//! Measurement machinery: duration, ERL, group delay, the power-centroid
//! identity, running kurtosis, spectrograms and level distributions.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;

use crate::error::{FvnError, Result};
use crate::fvn::PhaseSpec;
use crate::spectrum::{fft, real_fft};

/// Mono samples with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(FvnError::param("sample_rate", "must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(FvnError::param("samples", format!("non-finite value at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn energy(&self) -> f64 {
        crate::spectrum::energy(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeOrigin {
    /// Energy centroid of the signal.
    Centroid,
    /// Fixed time in seconds, measured from sample 0.
    Explicit(f64),
}

fn second_moment(samples: &[f64], sample_rate: f64, offset: f64, origin: TimeOrigin) -> Result<f64> {
    let total: f64 = samples.iter().map(|v| v * v).sum();
    if !(total > 0.0) {
        return Err(FvnError::Degenerate("signal has zero energy".into()));
    }
    let t = |n: usize| (n as f64 + offset) / sample_rate;
    let t0 = match origin {
        TimeOrigin::Centroid => {
            samples
                .iter()
                .enumerate()
                .map(|(n, v)| t(n) * v * v)
                .sum::<f64>()
                / total
        }
        TimeOrigin::Explicit(t0) => t0,
    };
    let m2 = samples
        .iter()
        .enumerate()
        .map(|(n, v)| (t(n) - t0).powi(2) * v * v)
        .sum::<f64>()
        / total;
    Ok(m2.max(0.0).sqrt())
}

/// Duration `sigma_t`: square root of the normalised second moment of
/// `|x|^2` about `origin`, seconds.
pub fn duration(x: &AudioBuffer, origin: TimeOrigin) -> Result<f64> {
    second_moment(&x.samples, x.sample_rate, 0.0, origin)
}

/// Duration of a circular sequence whose index `n` stands for the signed time
/// `n` for `n < K/2` and `n - K` otherwise. An explicit origin is measured on
/// that signed axis.
pub fn duration_of_circular(h: &[f64], sample_rate: f64, origin: TimeOrigin) -> Result<f64> {
    let centered = crate::spectrum::center_rotate(h);
    let shift = -((h.len() / 2) as f64);
    second_moment(&centered, sample_rate, shift, origin)
}

/// Effective rectangular length: duration relative to that of a unit-length
/// rectangle, `sigma_t / sqrt(1/12)`.
pub fn erl(duration_s: f64) -> Result<f64> {
    if !(duration_s >= 0.0) {
        return Err(FvnError::param("duration", "must be non-negative"));
    }
    Ok(duration_s * 12f64.sqrt())
}

/// Group delay on the open interval (0, fs/2).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDelayCurve {
    pub frequencies: Vec<f64>,
    /// Seconds.
    pub tau_g: Vec<f64>,
}

impl GroupDelayCurve {
    /// Mean and RMS spread of the group delay over bins whose frequency lies
    /// in `[f_lo, f_hi)`. For an all-pass response the spread is the
    /// phase-driven duration of that band.
    pub fn band_spread(&self, f_lo: f64, f_hi: f64) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self
            .frequencies
            .iter()
            .zip(&self.tau_g)
            .filter(|(f, _)| **f >= f_lo && **f < f_hi)
            .map(|(_, t)| *t)
            .collect();
        if vals.is_empty() {
            return None;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        Some((mean, var.sqrt()))
    }
}

/// Unwrap a phase sequence by removing 2pi jumps between neighbours.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let d = p - phase[i - 1];
            offset -= 2.0 * PI * ((d / (2.0 * PI)).round());
        }
        out.push(p + offset);
    }
    out
}

/// Central finite-difference group delay `-d theta / d omega` of the half
/// spectrum.
pub fn group_delay(phase: &PhaseSpec) -> GroupDelayCurve {
    let k = phase.fft_length();
    let half = k / 2;
    let unwrapped = unwrap_phase(&phase.phase[..=half]);
    let d_omega = 2.0 * PI * phase.bin_hz();
    let mut frequencies = Vec::with_capacity(half.saturating_sub(1));
    let mut tau_g = Vec::with_capacity(half.saturating_sub(1));
    for i in 1..half {
        frequencies.push(i as f64 * phase.bin_hz());
        tau_g.push(-(unwrapped[i + 1] - unwrapped[i - 1]) / (2.0 * d_omega));
    }
    GroupDelayCurve { frequencies, tau_g }
}

/// Group delay as an analysis window of samples `window` sees it: the
/// delay of each bin averaged with the window's power response centred on
/// `f`. For an all-pass response this equals the time centroid of the
/// corresponding spectrogram row.
pub fn windowed_group_delay(phase: &PhaseSpec, window: &[f64], frequencies: &[f64]) -> Result<Vec<f64>> {
    let k = phase.fft_length();
    if window.is_empty() || window.len() > k {
        return Err(FvnError::param("window", "length must lie in [1, K]"));
    }
    let gd = group_delay(phase);
    let wp: Vec<f64> = real_fft(window, k).iter().map(|c| c.norm_sqr()).collect();
    let bin = phase.bin_hz();
    frequencies
        .iter()
        .map(|&f| {
            if !(f > 0.0 && f < phase.sample_rate / 2.0) {
                return Err(FvnError::param("frequency", format!("{f} Hz lies outside (0, fs/2)")));
            }
            let c = (f / bin).round() as i64;
            let (mut num, mut den) = (0.0, 0.0);
            for (i, tau) in gd.tau_g.iter().enumerate() {
                let w = wp[(i as i64 + 1 - c).rem_euclid(k as i64) as usize];
                num += w * tau;
                den += w;
            }
            Ok(num / den)
        })
        .collect()
}

/// Duration of the part of a circular response that falls in
/// `[f_lo, f_hi)`. The band is cut out with a raised-cosine spectral window
/// so the band edges add only a short, bandwidth-limited spread.
pub fn band_duration(h: &[f64], sample_rate: f64, f_lo: f64, f_hi: f64) -> Result<f64> {
    if !(f_hi > f_lo) || f_lo < 0.0 || f_hi > sample_rate / 2.0 {
        return Err(FvnError::param(
            "band",
            format!("need 0 <= f_lo < f_hi <= fs/2, got [{f_lo}, {f_hi})"),
        ));
    }
    let k = h.len();
    let bin = sample_rate / k as f64;
    let mut spec = real_fft(h, k);
    for (i, c) in spec.iter_mut().enumerate() {
        let f = bin * i.min(k - i) as f64;
        let w = if f >= f_lo && f < f_hi {
            let u = (f - f_lo) / (f_hi - f_lo);
            (PI * u).sin().powi(2)
        } else {
            0.0
        };
        *c *= w;
    }
    crate::spectrum::ifft(&mut spec);
    let band: Vec<f64> = spec.iter().map(|c| c.re).collect();
    duration_of_circular(&band, sample_rate, TimeOrigin::Centroid)
}

/// Two sides of the identity "power-weighted mean time equals
/// power-spectrum-weighted mean group delay".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidCheck {
    /// Power-weighted mean time, seconds from sample 0.
    pub lhs: f64,
    /// Power-spectrum-weighted mean group delay, seconds.
    pub rhs: f64,
}

impl CentroidCheck {
    pub fn difference(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn centroid_identity_check(x: &AudioBuffer) -> Result<CentroidCheck> {
    let total = x.energy();
    if !(total > 0.0) {
        return Err(FvnError::Degenerate("signal has zero energy".into()));
    }
    let fs = x.sample_rate;
    let lhs = x
        .samples
        .iter()
        .enumerate()
        .map(|(n, v)| n as f64 * v * v)
        .sum::<f64>()
        / total
        / fs;

    // Group delay from the DFT of n x[n]: tau(k) = Re(Y X*) / |X|^2.
    let len = (2 * x.len()).next_power_of_two();
    let spec = real_fft(&x.samples, len);
    let ramp: Vec<f64> = x
        .samples
        .iter()
        .enumerate()
        .map(|(n, v)| n as f64 * v)
        .collect();
    let ramp_spec = real_fft(&ramp, len);
    let peak_power = spec.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (xk, yk) in spec.iter().zip(&ramp_spec) {
        let p = xk.norm_sqr();
        if p <= peak_power * 1e-300 {
            continue;
        }
        let tau = (yk * xk.conj()).re / p;
        num += tau * p;
        den += p;
    }
    Ok(CentroidCheck {
        lhs,
        rhs: num / den / fs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowShape {
    Hann,
    Rectangular,
    /// Four-term Nuttall (continuous first derivative).
    Nuttall,
}

impl WindowShape {
    /// Symmetric window of `len` samples.
    pub fn samples(&self, len: usize) -> Vec<f64> {
        if len == 1 {
            return vec![1.0];
        }
        let d = (len - 1) as f64;
        (0..len)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / d;
                match self {
                    WindowShape::Hann => 0.5 - 0.5 * x.cos(),
                    WindowShape::Rectangular => 1.0,
                    WindowShape::Nuttall => {
                        0.3635819 - 0.4891775 * x.cos() + 0.1365995 * (2.0 * x).cos()
                            - 0.0106411 * (3.0 * x).cos()
                    }
                }
            })
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            WindowShape::Hann => "hann",
            WindowShape::Rectangular => "rectangular",
            WindowShape::Nuttall => "nuttall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hann" => Some(WindowShape::Hann),
            "rectangular" | "rect" => Some(WindowShape::Rectangular),
            "nuttall" => Some(WindowShape::Nuttall),
            _ => None,
        }
    }
}

/// Running kurtosis settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KurtosisConfig {
    pub window: WindowShape,
    pub window_s: f64,
    pub hop_s: f64,
    /// Frames whose second moment is below `floor * mean square` are undefined.
    pub relative_floor: f64,
    /// Exceedance level for kurtosis.
    pub threshold: f64,
    /// Minimum exceedance fraction for an "intact" verdict.
    pub decision_level: f64,
}

impl Default for KurtosisConfig {
    fn default() -> Self {
        Self {
            window: WindowShape::Hann,
            window_s: 0.025,
            hop_s: 0.005,
            relative_floor: 1e-12,
            threshold: 10.0,
            decision_level: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningKurtosis {
    /// Frame centre times, seconds.
    pub times: Vec<f64>,
    /// `None` marks frames whose moments are degenerate.
    pub kappa: Vec<Option<f64>>,
}

impl RunningKurtosis {
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.kappa.iter().flatten().copied()
    }

    /// Fraction of defined frames with kurtosis above `threshold`.
    pub fn exceedance_fraction(&self, threshold: f64) -> f64 {
        let (mut n, mut hit) = (0usize, 0usize);
        for k in self.defined() {
            n += 1;
            if k > threshold {
                hit += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            hit as f64 / n as f64
        }
    }

    pub fn mean(&self) -> f64 {
        let v: Vec<f64> = self.defined().collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Running kurtosis `mu4 / mu2^2` with moments weighted by the normalised
/// square and fourth power of the window. Moments are raw (about zero); a
/// frame is left undefined when its second moment falls below the floor or
/// when the frame is constant.
pub fn running_kurtosis(x: &AudioBuffer, config: &KurtosisConfig) -> Result<RunningKurtosis> {
    let fs = x.sample_rate;
    let len = (config.window_s * fs).round() as usize;
    if !(config.window_s > 0.0) || len < 4 {
        return Err(FvnError::param(
            "window_s",
            format!("window must span at least 4 samples, got {len}"),
        ));
    }
    let hop = (config.hop_s * fs).round() as usize;
    if hop == 0 {
        return Err(FvnError::param("hop_s", "hop must be at least one sample"));
    }
    if x.len() < len {
        return Err(FvnError::param("x", "signal shorter than one window"));
    }
    let w = config.window.samples(len);
    if w.iter().any(|v| *v < 0.0) {
        return Err(FvnError::param("window", "window must be nonnegative"));
    }
    let w2: Vec<f64> = w.iter().map(|v| v * v).collect();
    let w4: Vec<f64> = w2.iter().map(|v| v * v).collect();
    let s2: f64 = w2.iter().sum();
    let s4: f64 = w4.iter().sum();
    let mean_square = x.energy() / x.len() as f64;
    let floor = config.relative_floor * mean_square;

    let mut times = Vec::new();
    let mut kappa = Vec::new();
    let mut start = 0;
    while start + len <= x.len() {
        let seg = &x.samples[start..start + len];
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        let mut m4 = 0.0;
        for i in 0..len {
            let s = seg[i];
            let sq = s * s;
            m1 += w2[i] * s;
            m2 += w2[i] * sq;
            m4 += w4[i] * sq * sq;
        }
        m1 /= s2;
        m2 /= s2;
        m4 /= s4;
        let spread = m2 - m1 * m1;
        let k = if m2 <= floor || m2 == 0.0 || spread <= 1e-12 * m2 {
            None
        } else {
            Some(m4 / (m2 * m2))
        };
        times.push((start as f64 + (len - 1) as f64 / 2.0) / fs);
        kappa.push(k);
        start += hop;
    }
    Ok(RunningKurtosis { times, kappa })
}

/// Short-time power spectrum, one row per frame over bins `0..=nfft/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub times: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub power: Vec<Vec<f64>>,
    pub nfft: usize,
}

impl Spectrogram {
    /// Energy of each frame recovered from its one-sided power (Parseval).
    pub fn frame_energy(&self, frame: usize) -> f64 {
        let row = &self.power[frame];
        let last = row.len() - 1;
        let mut e = row[0] + row[last];
        for v in &row[1..last] {
            e += 2.0 * v;
        }
        e / self.nfft as f64
    }

    pub fn total_energy(&self) -> f64 {
        (0..self.power.len()).map(|i| self.frame_energy(i)).sum()
    }

    /// Add another spectrogram of identical shape.
    pub fn accumulate(&mut self, other: &Spectrogram) -> Result<()> {
        if self.power.len() != other.power.len() || self.nfft != other.nfft {
            return Err(FvnError::param("spectrogram", "shape mismatch"));
        }
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for row in &mut self.power {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// Frame index of the largest power in frequency bin `bin`.
    pub fn peak_frame(&self, bin: usize) -> usize {
        let mut best = 0;
        for (i, row) in self.power.iter().enumerate() {
            if row[bin] > self.power[best][bin] {
                best = i;
            }
        }
        best
    }

    /// Long-form CSV: `time_s,freq_hz,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,freq_hz,value")?;
        for (t, row) in self.times.iter().zip(&self.power) {
            for (f, v) in self.frequencies.iter().zip(row) {
                writeln!(out, "{t:.6},{f:.3},{v:.9e}")?;
            }
        }
        Ok(())
    }
}

/// Nuttall-windowed spectrogram. Frames lie wholly inside the signal; time
/// stamps are frame centres.
pub fn spectrogram(x: &AudioBuffer, window_s: f64, hop_s: f64) -> Result<Spectrogram> {
    if !(hop_s > 0.0) || !(window_s > hop_s) {
        return Err(FvnError::param(
            "window_s",
            "window length must exceed a positive hop",
        ));
    }
    let fs = x.sample_rate;
    let len = (window_s * fs).round() as usize;
    let hop = ((hop_s * fs).round() as usize).max(1);
    if len < 2 || x.len() < len {
        return Err(FvnError::param("x", "signal shorter than one window"));
    }
    let nfft = len.next_power_of_two();
    let w = WindowShape::Nuttall.samples(len);
    let mut times = Vec::new();
    let mut power = Vec::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + len <= x.len() {
        for v in buf.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        for i in 0..len {
            buf[i] = Complex64::new(x.samples[start + i] * w[i], 0.0);
        }
        fft(&mut buf);
        power.push(buf[..=nfft / 2].iter().map(|c| c.norm_sqr()).collect());
        times.push((start as f64 + (len - 1) as f64 / 2.0) / fs);
        start += hop;
    }
    let frequencies = (0..=nfft / 2).map(|k| k as f64 * fs / nfft as f64).collect();
    Ok(Spectrogram {
        times,
        frequencies,
        power,
        nfft,
    })
}

/// Energy the spectrogram frames should carry: sum over frames of the
/// windowed signal energy.
pub fn windowed_energy(x: &AudioBuffer, window_s: f64, hop_s: f64) -> f64 {
    let fs = x.sample_rate;
    let len = (window_s * fs).round() as usize;
    let hop = ((hop_s * fs).round() as usize).max(1);
    let w = WindowShape::Nuttall.samples(len);
    let mut total = 0.0;
    let mut start = 0;
    while start + len <= x.len() {
        total += (0..len)
            .map(|i| (x.samples[start + i] * w[i]).powi(2))
            .sum::<f64>();
        start += hop;
    }
    total
}

/// Averaged periodogram with a Hann window and 50% overlap; one-sided power
/// per bin `0..=frame_len/2`, normalised by window energy.
pub fn averaged_power_spectrum(x: &[f64], frame_len: usize) -> Result<Vec<f64>> {
    if frame_len < 4 || x.len() < frame_len {
        return Err(FvnError::param("frame_len", "signal shorter than one frame"));
    }
    let w = WindowShape::Hann.samples(frame_len);
    let norm: f64 = w.iter().map(|v| v * v).sum();
    let hop = frame_len / 2;
    let mut acc = vec![0.0; frame_len / 2 + 1];
    let mut frames = 0usize;
    let mut start = 0;
    while start + frame_len <= x.len() {
        let seg: Vec<f64> = (0..frame_len).map(|i| x[start + i] * w[i]).collect();
        let s = real_fft(&seg, frame_len);
        for (a, c) in acc.iter_mut().zip(&s) {
            *a += c.norm_sqr() / norm;
        }
        frames += 1;
        start += hop;
    }
    for a in acc.iter_mut() {
        *a /= frames as f64;
    }
    Ok(acc)
}

/// Normalised autocorrelation at `lag` over the overlapping part.
pub fn normalized_autocorrelation(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let a = &x[..x.len() - lag];
    let b = &x[lag..];
    let num: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    let ea: f64 = a.iter().map(|v| v * v).sum();
    let eb: f64 = b.iter().map(|v| v * v).sum();
    if ea == 0.0 || eb == 0.0 {
        0.0
    } else {
        num / (ea * eb).sqrt()
    }
}

/// Empirical distribution of instantaneous level, standardised to zero mean
/// and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDistribution {
    /// Sorted standardised samples.
    pub levels: Vec<f64>,
}

impl LevelDistribution {
    /// Empirical CDF at `v`.
    pub fn cdf(&self, v: f64) -> f64 {
        let idx = self.levels.partition_point(|x| *x <= v);
        idx as f64 / self.levels.len() as f64
    }

    /// Kolmogorov-Smirnov distance to the standard normal CDF.
    pub fn ks_distance_to_normal(&self) -> f64 {
        let n = self.levels.len() as f64;
        self.levels
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = standard_normal_cdf(v);
                let lo = i as f64 / n;
                let hi = (i + 1) as f64 / n;
                (f - lo).abs().max((hi - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `(level, cumulative probability)` pairs, thinned to at most `points`.
    pub fn curve(&self, points: usize) -> Vec<(f64, f64)> {
        let n = self.levels.len();
        let step = (n / points.max(1)).max(1);
        (0..n)
            .step_by(step)
            .map(|i| (self.levels[i], (i + 1) as f64 / n as f64))
            .collect()
    }
}

pub fn standard_normal_cdf(v: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-v / std::f64::consts::SQRT_2)
}

pub fn level_distribution(x: &AudioBuffer) -> Result<LevelDistribution> {
    if x.is_empty() {
        return Err(FvnError::param("x", "empty input"));
    }
    let n = x.len() as f64;
    let mean = x.samples.iter().sum::<f64>() / n;
    let var = x.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(FvnError::Degenerate("signal has zero variance".into()));
    }
    let sd = var.sqrt();
    let mut levels: Vec<f64> = x.samples.iter().map(|v| (v - mean) / sd).collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    Ok(LevelDistribution { levels })
}
