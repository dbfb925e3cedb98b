//! Six-term cosine series phase-manipulation window and the single-centre
//! all-pass diagnostic built on it.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{FvnError, Result};
use crate::spectrum::{fft, ifft};

/// Coefficients `a0..a5` of a cosine series `sum a(m) cos(pi k m / B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineSeries {
    pub coefficients: [f64; 6],
}

impl CosineSeries {
    /// The optimised six-term series: lowest sidelobes with derivatives up to
    /// third order vanishing at the support edges.
    pub const SIX_TERM: CosineSeries = CosineSeries {
        coefficients: [
            0.2624710164,
            0.4265335164,
            0.2250165621,
            0.0726831633,
            0.0125124215,
            0.0007833203,
        ],
    };

    pub const RECTANGULAR: CosineSeries = CosineSeries {
        coefficients: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    };

    pub const HANN: CosineSeries = CosineSeries {
        coefficients: [0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
    };

    pub fn new(coefficients: [f64; 6]) -> Self {
        Self { coefficients }
    }

    pub fn sum(&self) -> f64 {
        self.coefficients.iter().sum()
    }

    pub fn alternating_sum(&self) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(m, a)| if m % 2 == 0 { *a } else { -*a })
            .sum()
    }

    /// Highest order with a nonzero coefficient.
    pub fn order(&self) -> usize {
        self.coefficients
            .iter()
            .rposition(|&a| a != 0.0)
            .unwrap_or(0)
    }

    /// Window value at offset `k` for support half-width `half_width`,
    /// without parameter validation. Zero outside `[-half_width, half_width]`.
    #[inline]
    pub fn eval(&self, k: f64, half_width: f64) -> f64 {
        if k.abs() > half_width {
            return 0.0;
        }
        // cos(m x) by the Chebyshev recurrence: one trig call per sample
        let c1 = (PI * k / half_width).cos();
        let a = &self.coefficients;
        let (mut prev, mut cur) = (1.0, c1);
        let mut acc = a[0] + a[1] * c1;
        for &am in &a[2..] {
            let next = 2.0 * c1 * cur - prev;
            acc += am * next;
            prev = cur;
            cur = next;
        }
        acc
    }
}

impl Default for CosineSeries {
    fn default() -> Self {
        Self::SIX_TERM
    }
}

/// Phase-manipulation window `w_p(k, B)` evaluated at a (possibly fractional)
/// bin offset `k`.
pub fn phase_window(k: f64, half_width: f64, series: &CosineSeries) -> Result<f64> {
    if !(half_width > 0.0) {
        return Err(FvnError::param(
            "half_width",
            format!("support half-width must be positive, got {half_width}"),
        ));
    }
    Ok(series.eval(k, half_width))
}

/// Complex impulse response of the all-pass filter whose phase is a single
/// window centred on bin `center` of a `fft_length`-point circular axis.
pub fn unit_allpass_response(
    center: f64,
    half_width: f64,
    fft_length: usize,
    phi_scale: f64,
    series: &CosineSeries,
) -> Result<Vec<Complex64>> {
    if fft_length == 0 {
        return Err(FvnError::param("fft_length", "must be positive"));
    }
    let k_len = fft_length as f64;
    if !(0.0..k_len).contains(&center) {
        return Err(FvnError::param(
            "center",
            format!("must lie in [0, {fft_length}), got {center}"),
        ));
    }
    if !(half_width >= 1.0) {
        return Err(FvnError::param("half_width", "must be at least one bin"));
    }
    let mut buf: Vec<Complex64> = (0..fft_length)
        .map(|k| {
            let mut d = k as f64 - center;
            // nearest circular image
            d -= k_len * (d / k_len).round();
            Complex64::from_polar(1.0, phi_scale * series.eval(d, half_width))
        })
        .collect();
    ifft(&mut buf);
    Ok(buf)
}

/// Peak sidelobe level and asymptotic decay of a cosine-series window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidelobeMetrics {
    pub peak_sidelobe_db: f64,
    pub decay_rate_db_per_octave: f64,
}

/// Samples across the window support. The transform is examined up to the
/// Nyquist frequency of this sampling, `SUPPORT_SAMPLES / 2` cycles per
/// support, and the decay rate is fitted over the top three octaves of that
/// range.
const SUPPORT_SAMPLES: usize = 64;

pub fn sidelobe_metrics(series: &CosineSeries, oversampling: usize) -> Result<SidelobeMetrics> {
    if oversampling < 16 {
        return Err(FvnError::param(
            "oversampling",
            format!("must be at least 16, got {oversampling}"),
        ));
    }
    let n = SUPPORT_SAMPLES;
    let len = ((n + 1) * oversampling).next_power_of_two();
    let half = n as f64 / 2.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for i in 0..=n {
        let k = i as f64 - half;
        buf[i] = Complex64::new(series.eval(k, half), 0.0);
    }
    fft(&mut buf);

    // u: frequency in cycles per support length
    let du = n as f64 / len as f64;
    let last = len / 2;
    let mag: Vec<f64> = buf[..=last].iter().map(|c| c.norm()).collect();
    let peak = mag[0];
    if !(peak > 0.0) {
        return Err(FvnError::Degenerate("window has zero area".into()));
    }
    let db = |v: f64| 20.0 * (v / peak).max(1e-300).log10();

    let mut i = 1;
    while i < last && mag[i] <= mag[i - 1] {
        i += 1;
    }
    let main_lobe_end = i - 1;

    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for j in (main_lobe_end + 1)..last {
        if mag[j] >= mag[j - 1] && mag[j] > mag[j + 1] {
            peaks.push((j as f64 * du, db(mag[j])));
        }
    }
    let peak_sidelobe_db = peaks
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);

    let nyquist = last as f64 * du;
    let fit: Vec<(f64, f64)> = peaks
        .iter()
        .filter(|(u, _)| *u >= nyquist / 8.0)
        .map(|&(u, d)| (u.log2(), d))
        .collect();
    if fit.len() < 2 {
        return Err(FvnError::Degenerate(
            "too few sidelobes to estimate a decay rate".into(),
        ));
    }
    let m = fit.len() as f64;
    let mx = fit.iter().map(|p| p.0).sum::<f64>() / m;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();

    Ok(SidelobeMetrics {
        peak_sidelobe_db,
        decay_rate_db_per_octave: sxy / sxx,
    })
}
