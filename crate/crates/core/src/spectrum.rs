//! DFT and FFT convolution primitives shared by every module.
//!
//! Convention: forward transform `X[k] = sum_n x[n] exp(-2 pi j k n / K)`,
//! inverse carries the `1/K` factor.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{FvnError, Result};

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// In-place forward DFT.
pub fn fft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), false).process(buf);
}

/// In-place inverse DFT including the `1/K` normalisation.
pub fn ifft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), true).process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Forward DFT of a real sequence zero-padded (or truncated) to `len`.
pub fn real_fft(x: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x
        .iter()
        .take(len)
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    fft(&mut buf);
    buf
}

/// Complex spectrum over `K` circular bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBuffer {
    pub bins: Vec<Complex64>,
    pub sample_rate: f64,
}

impl SpectrumBuffer {
    pub fn new(bins: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if bins.is_empty() || bins.len() % 2 != 0 {
            return Err(FvnError::param(
                "fft_length",
                format!("must be a positive even integer, got {}", bins.len()),
            ));
        }
        if !(sample_rate > 0.0) {
            return Err(FvnError::param("sample_rate", "must be positive"));
        }
        Ok(Self { bins, sample_rate })
    }

    pub fn from_real(x: &[f64], fft_length: usize, sample_rate: f64) -> Result<Self> {
        Self::new(real_fft(x, fft_length), sample_rate)
    }

    /// Unit-magnitude spectrum `exp(j phase[k])`.
    pub fn from_phase(phase: &[f64], sample_rate: f64) -> Result<Self> {
        Self::new(
            phase.iter().map(|&p| Complex64::from_polar(1.0, p)).collect(),
            sample_rate,
        )
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate / self.bins.len() as f64
    }

    /// Largest `|X[k] - conj(X[K-k])|` over all bins.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let k = self.bins.len();
        (0..k)
            .map(|i| (self.bins[i] - self.bins[(k - i) % k].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Inverse transform, returning the real part and the max-norm of the
    /// discarded imaginary residue.
    pub fn to_real(&self) -> (Vec<f64>, f64) {
        let mut buf = self.bins.clone();
        ifft(&mut buf);
        let residue = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        (buf.into_iter().map(|c| c.re).collect(), residue)
    }
}

fn check_nonempty(x: &[f64], h: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(FvnError::param("x", "empty input"));
    }
    if h.is_empty() {
        return Err(FvnError::param("h", "empty input"));
    }
    Ok(())
}

/// Linear convolution via a zero-padded power-of-two transform.
/// Output length is `x.len() + h.len() - 1`.
pub fn convolve(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    check_nonempty(x, h)?;
    let out_len = x.len() + h.len() - 1;
    let n = out_len.next_power_of_two();
    let mut xs = real_fft(x, n);
    let hs = real_fft(h, n);
    for (a, b) in xs.iter_mut().zip(hs.iter()) {
        *a *= *b;
    }
    ifft(&mut xs);
    Ok(xs.into_iter().take(out_len).map(|c| c.re).collect())
}

/// Circular convolution of two sequences of the same length `N`.
pub fn circular_convolve(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    check_nonempty(x, h)?;
    if x.len() != h.len() {
        return Err(FvnError::param(
            "h",
            format!("length {} differs from x length {}", h.len(), x.len()),
        ));
    }
    let n = x.len();
    let mut xs = real_fft(x, n);
    let hs = real_fft(h, n);
    for (a, b) in xs.iter_mut().zip(hs.iter()) {
        *a *= *b;
    }
    ifft(&mut xs);
    Ok(xs.into_iter().map(|c| c.re).collect())
}

/// Circular time reversal: `y[n] = x[-n mod N]`.
pub fn circular_reverse(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| x[(n - i) % n]).collect()
}

/// Rotate a circularly centred sequence so index 0 lands at `len / 2`.
pub fn center_rotate(x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    y.rotate_right(x.len() / 2);
    y
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
