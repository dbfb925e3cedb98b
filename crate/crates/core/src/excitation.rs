//! Pulse-train excitation built from FVN units.
//!
//! Units are placed at pitch epochs taken from the cumulative phase of an
//! f0 trajectory. A frozen train repeats one unit, a random train designs a
//! fresh unit per epoch, and a morphed train interpolates the two phases.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::analysis::AudioBuffer;
use crate::error::{FvnError, Result};
use crate::fvn::{design_phase, design_phase_with, FvnParams, FvnUnit, PhaseSpec};
use crate::rng::{derive_seed, substream};
use crate::spectrum::ifft;

/// f0 with sinusoidal vibrato in the log-frequency domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Trajectory {
    pub base_hz: f64,
    pub vibrato_rate_hz: f64,
    pub vibrato_depth_cents: f64,
    pub duration_s: f64,
    pub sample_rate: f64,
}

impl F0Trajectory {
    pub fn new(
        base_hz: f64,
        vibrato_rate_hz: f64,
        vibrato_depth_cents: f64,
        duration_s: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let t = Self {
            base_hz,
            vibrato_rate_hz,
            vibrato_depth_cents,
            duration_s,
            sample_rate,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn constant(f0_hz: f64, duration_s: f64, sample_rate: f64) -> Result<Self> {
        Self::new(f0_hz, 0.0, 0.0, duration_s, sample_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_hz > 0.0 && self.base_hz.is_finite()) {
            return Err(FvnError::param("base_hz", "must be positive"));
        }
        if !(self.vibrato_depth_cents >= 0.0 && self.vibrato_depth_cents.is_finite()) {
            return Err(FvnError::param("vibrato_depth_cents", "must be nonnegative"));
        }
        if !(self.vibrato_rate_hz >= 0.0 && self.vibrato_rate_hz.is_finite()) {
            return Err(FvnError::param("vibrato_rate_hz", "must be nonnegative"));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(FvnError::param("duration_s", "must be positive"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(FvnError::param("sample_rate", "must be positive"));
        }
        Ok(())
    }

    /// Instantaneous f0 at time `t` seconds.
    pub fn f0_at(&self, t: f64) -> f64 {
        let depth = self.vibrato_depth_cents / 1200.0;
        self.base_hz * (depth * (2.0 * PI * self.vibrato_rate_hz * t).sin()).exp2()
    }

    pub fn peak_f0(&self) -> f64 {
        self.base_hz * (self.vibrato_depth_cents / 1200.0).exp2()
    }

    pub fn len_samples(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }
}

/// Instantaneous f0 at every sample of the trajectory.
pub fn f0_with_vibrato(traj: &F0Trajectory) -> Vec<f64> {
    (0..traj.len_samples())
        .map(|n| traj.f0_at(n as f64 / traj.sample_rate))
        .collect()
}

/// Fractional sample positions where the cumulative phase of f0 passes an
/// integer number of cycles, over `[0, len)`. The first epoch is at 0.
pub fn epochs(traj: &F0Trajectory, len: usize) -> Result<Vec<f64>> {
    traj.validate()?;
    if traj.sample_rate / traj.peak_f0() < 2.0 {
        return Err(FvnError::param(
            "base_hz",
            format!(
                "epoch spacing {:.3} samples is below 2",
                traj.sample_rate / traj.peak_f0()
            ),
        ));
    }
    let fs = traj.sample_rate;
    let mut out = vec![0.0];
    let mut cycles = 0.0;
    let mut next = 1.0;
    let mut f_prev = traj.f0_at(0.0);
    for n in 1..len {
        let f = traj.f0_at(n as f64 / fs);
        let step = 0.5 * (f + f_prev) / fs;
        let after = cycles + step;
        while after >= next {
            out.push((n - 1) as f64 + (next - cycles) / step);
            next += 1.0;
        }
        cycles = after;
        f_prev = f;
    }
    Ok(out)
}

/// Circularly centred response of `phase` delayed by `frac` samples.
pub fn shifted_response(phase: &PhaseSpec, frac: f64) -> Vec<f64> {
    let k = phase.fft_length();
    let half = k / 2;
    let mut buf: Vec<Complex64> = phase
        .phase
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let signed = if i < half { i as f64 } else { i as f64 - k as f64 };
            if i == half {
                // keep the Nyquist bin real
                Complex64::new((PI * frac).cos() * p.cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, p - 2.0 * PI * signed * frac / k as f64)
            }
        })
        .collect();
    ifft(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Add a circularly centred response at integer offset `at`, truncating at
/// the buffer edges.
fn add_centered(out: &mut [f64], response: &[f64], at: i64, gain: f64) {
    let k = response.len() as i64;
    let n = out.len() as i64;
    for j in -k / 2..k - k / 2 {
        let i = at + j;
        if i >= 0 && i < n {
            out[i as usize] += gain * response[j.rem_euclid(k) as usize];
        }
    }
}

/// Sum one unit per epoch. `phase_for(e)` gives the unit phase for epoch `e`.
pub fn render_train<F>(epochs: &[f64], len: usize, phase_for: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<PhaseSpec> + Sync,
{
    let units: Vec<(i64, Vec<f64>)> = epochs
        .par_iter()
        .enumerate()
        .map(|(e, &pos)| {
            // epochs that land within rounding error of a sample stay integral
            let near = pos.round();
            let (whole, frac) = if (pos - near).abs() < 1e-9 {
                (near, 0.0)
            } else {
                (pos.floor(), pos - pos.floor())
            };
            let phase = phase_for(e)?;
            Ok((whole as i64, shifted_response(&phase, frac)))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; len];
    for (at, r) in &units {
        add_centered(&mut out, r, *at, 1.0);
    }
    Ok(out)
}

fn output_len(length_s: f64, fs: f64) -> Result<usize> {
    let n = (length_s * fs).round();
    if !(n >= 1.0) {
        return Err(FvnError::param("length", "must cover at least one sample"));
    }
    Ok(n as usize)
}

fn check_rate(phase_fs: f64, f0: &F0Trajectory) -> Result<()> {
    if (phase_fs - f0.sample_rate).abs() > 1e-9 * phase_fs {
        return Err(FvnError::param(
            "sample_rate",
            format!("unit at {phase_fs} Hz, trajectory at {} Hz", f0.sample_rate),
        ));
    }
    Ok(())
}

/// The same unit at every epoch.
pub fn frozen_ifvn(unit_phase: &PhaseSpec, f0: &F0Trajectory, length_s: f64) -> Result<AudioBuffer> {
    unit_phase.validate()?;
    check_rate(unit_phase.sample_rate, f0)?;
    let len = output_len(length_s, f0.sample_rate)?;
    let ep = epochs(f0, len)?;
    let x = render_train(&ep, len, |_| Ok(unit_phase.clone()))?;
    AudioBuffer::new(x, f0.sample_rate)
}

/// Random unit phase for epoch `epoch` under master seed `params.seed`.
pub fn epoch_phase(params: &FvnParams, epoch: usize) -> Result<PhaseSpec> {
    design_phase_with(params, &mut substream(params.seed, epoch as u64))
}

/// A freshly designed unit at every epoch.
pub fn random_ifvn(params: &FvnParams, f0: &F0Trajectory, length_s: f64) -> Result<AudioBuffer> {
    params.validate()?;
    check_rate(params.sample_rate, f0)?;
    let len = output_len(length_s, f0.sample_rate)?;
    let ep = epochs(f0, len)?;
    let x = render_train(&ep, len, |e| epoch_phase(params, e))?;
    AudioBuffer::new(x, f0.sample_rate)
}

/// Bin-wise `r * random + (1 - r) * frozen`. Endpoints return the inputs.
pub fn morph_unit(theta_frozen: &PhaseSpec, theta_random: &PhaseSpec, r: f64) -> Result<PhaseSpec> {
    if theta_frozen.fft_length() != theta_random.fft_length() {
        return Err(FvnError::param(
            "fft_length",
            format!(
                "frozen phase has {} bins, random phase {}",
                theta_frozen.fft_length(),
                theta_random.fft_length()
            ),
        ));
    }
    if theta_frozen.sample_rate != theta_random.sample_rate {
        return Err(FvnError::param("sample_rate", "phases differ in sample rate"));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(FvnError::param("r", format!("must lie in [0, 1], got {r}")));
    }
    if r == 0.0 {
        return Ok(theta_frozen.clone());
    }
    if r == 1.0 {
        return Ok(theta_random.clone());
    }
    let phase = theta_frozen
        .phase
        .iter()
        .zip(&theta_random.phase)
        .map(|(f, q)| r * q + (1.0 - r) * f)
        .collect();
    Ok(PhaseSpec {
        phase,
        sample_rate: theta_frozen.sample_rate,
    })
}

/// Mixing coefficient over time.
#[derive(Debug, Clone, PartialEq)]
pub enum MorphSchedule {
    Constant(f64),
    /// `(time_s, r)` breakpoints, linearly interpolated and held at the ends.
    Breakpoints(Vec<(f64, f64)>),
}

impl MorphSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            MorphSchedule::Constant(r) => {
                if !(0.0..=1.0).contains(r) {
                    return Err(FvnError::param("r", format!("must lie in [0, 1], got {r}")));
                }
            }
            MorphSchedule::Breakpoints(points) => {
                if points.is_empty() {
                    return Err(FvnError::param("schedule", "no breakpoints"));
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(FvnError::param("schedule", "times must increase"));
                }
                if let Some((t, r)) = points.iter().find(|(_, r)| !(0.0..=1.0).contains(r)) {
                    return Err(FvnError::param(
                        "schedule",
                        format!("r = {r} at {t} s lies outside [0, 1]"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn r_at(&self, t: f64) -> f64 {
        match self {
            MorphSchedule::Constant(r) => *r,
            MorphSchedule::Breakpoints(p) => interpolate_breakpoints(p, t),
        }
    }

    /// Schedule realising periodic-to-random ratios `(time_s, eta_db)`.
    pub fn from_ratio_db(points: &[(f64, f64)], calibration: &PrCalibration) -> Self {
        MorphSchedule::Breakpoints(
            points
                .iter()
                .map(|&(t, eta)| (t, calibration.ratio_for(eta)))
                .collect(),
        )
    }
}

/// Linear interpolation over sorted `(x, y)` points, held at the ends.
pub fn interpolate_breakpoints(points: &[(f64, f64)], x: f64) -> f64 {
    let i = points.partition_point(|p| p.0 <= x);
    if i == 0 {
        return points[0].1;
    }
    if i == points.len() {
        return points[i - 1].1;
    }
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// One morphed unit per epoch with `r` taken from `schedule` at the epoch
/// time. The random phases follow `params.seed`.
pub fn morphed_ifvn(
    frozen: &PhaseSpec,
    params: &FvnParams,
    f0: &F0Trajectory,
    length_s: f64,
    schedule: &MorphSchedule,
) -> Result<AudioBuffer> {
    schedule.validate()?;
    params.validate()?;
    check_rate(frozen.sample_rate, f0)?;
    check_rate(params.sample_rate, f0)?;
    let len = output_len(length_s, f0.sample_rate)?;
    let ep = epochs(f0, len)?;
    let fs = f0.sample_rate;
    let x = render_train(&ep, len, |e| {
        let r = schedule.r_at(ep[e] / fs);
        if r == 0.0 {
            return Ok(frozen.clone());
        }
        morph_unit(frozen, &epoch_phase(params, e)?, r)
    })?;
    AudioBuffer::new(x, fs)
}

/// Periodic and random power of morphed trains at one mixing coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentPower {
    pub r: f64,
    pub periodic: f64,
    pub random: f64,
}

impl ComponentPower {
    /// Periodic-to-random ratio in dB, limited to `+-cap_db`.
    pub fn ratio_db(&self, cap_db: f64) -> f64 {
        let floor = 10f64.powf(-cap_db / 10.0);
        let total = self.periodic.max(0.0) + self.random;
        if self.random <= floor * total {
            return cap_db;
        }
        if self.periodic <= floor * total {
            return -cap_db;
        }
        (10.0 * (self.periodic / self.random).log10()).clamp(-cap_db, cap_db)
    }
}

/// Split morphed trains into periodic and random parts for each `r`.
///
/// The frozen phase is fixed. Each realisation uses an independent random
/// master seed; the periodic part is the across-realisation mean waveform
/// and the random part is the residual. Both powers are bias-corrected for
/// the finite number of realisations.
pub fn measure_components(
    frozen: &PhaseSpec,
    params: &FvnParams,
    f0: &F0Trajectory,
    ratios: &[f64],
    seeds: &[u64],
) -> Result<Vec<ComponentPower>> {
    if seeds.len() < 2 {
        return Err(FvnError::param("n_seeds", "need at least two realisations"));
    }
    if let Some(r) = ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(FvnError::param("r", format!("{r} lies outside [0, 1]")));
    }
    check_rate(frozen.sample_rate, f0)?;
    let len = f0.len_samples();
    let ep = epochs(f0, len)?;
    let mut sums = vec![vec![0.0; len]; ratios.len()];
    let mut energies = vec![0.0; ratios.len()];
    for &seed in seeds {
        let p = params.with_seed(seed);
        let random: Vec<PhaseSpec> = (0..ep.len())
            .into_par_iter()
            .map(|e| epoch_phase(&p, e))
            .collect::<Result<_>>()?;
        let trains: Vec<Vec<f64>> = ratios
            .par_iter()
            .map(|&r| render_train(&ep, len, |e| morph_unit(frozen, &random[e], r)))
            .collect::<Result<_>>()?;
        for ((sum, energy), x) in sums.iter_mut().zip(energies.iter_mut()).zip(&trains) {
            for (s, v) in sum.iter_mut().zip(x) {
                *s += v;
            }
            *energy += x.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let n = seeds.len() as f64;
    Ok(ratios
        .iter()
        .zip(sums.iter().zip(&energies))
        .map(|(&r, (sum, &energy))| {
            let mean_power: f64 = sum.iter().map(|s| (s / n).powi(2)).sum::<f64>() / len as f64;
            let average_power = energy / n / len as f64;
            let random = ((average_power - mean_power) * n / (n - 1.0)).max(0.0);
            ComponentPower {
                r,
                periodic: mean_power - random / n,
                random,
            }
        })
        .collect())
}

/// Default limit on reported ratios, dB.
pub const RATIO_CAP_DB: f64 = 120.0;

/// Tabulated periodic-to-random ratio against mixing coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCalibration {
    /// Increasing mixing coefficients.
    pub ratios: Vec<f64>,
    /// Strictly decreasing ratio in dB at each coefficient.
    pub gain_db: Vec<f64>,
    pub components: Vec<ComponentPower>,
}

impl PrCalibration {
    /// Build from measurements, failing when the ratio does not decrease
    /// strictly with `r`.
    pub fn from_components(components: Vec<ComponentPower>, cap_db: f64) -> Result<Self> {
        let ratios: Vec<f64> = components.iter().map(|c| c.r).collect();
        let gain_db: Vec<f64> = components.iter().map(|c| c.ratio_db(cap_db)).collect();
        if gain_db.windows(2).any(|w| !(w[1] < w[0])) {
            let table: Vec<String> = ratios
                .iter()
                .zip(&gain_db)
                .map(|(r, g)| format!("r={r:.3}: {g:.2} dB"))
                .collect();
            return Err(FvnError::Calibration(format!(
                "measured ratio is not strictly decreasing in r; more realisations needed ({})",
                table.join(", ")
            )));
        }
        Ok(Self {
            ratios,
            gain_db,
            components,
        })
    }

    /// Ratio in dB at mixing coefficient `r`, interpolated over `20 log10 r`.
    pub fn gain_at(&self, r: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .log_axis()
            .into_iter()
            .zip(self.gain_db.iter().copied())
            .collect();
        interpolate_breakpoints(&pts, level_db(r, &self.log_axis()))
    }

    /// Mixing coefficient that realises `eta_db`; held at the grid ends.
    pub fn ratio_for(&self, eta_db: f64) -> f64 {
        let x = self.log_axis();
        let first = self.gain_db[0];
        let last = *self.gain_db.last().unwrap();
        if eta_db >= first {
            return self.ratios[0];
        }
        if eta_db <= last {
            return *self.ratios.last().unwrap();
        }
        // gain decreases, so walk it reversed as an increasing table
        let pts: Vec<(f64, f64)> = self
            .gain_db
            .iter()
            .rev()
            .copied()
            .zip(x.iter().rev().copied())
            .collect();
        let level = interpolate_breakpoints(&pts, eta_db);
        10f64.powf(level / 20.0).min(1.0)
    }

    /// `20 log10 r` for each grid point. A zero coefficient is placed one
    /// dB of level per dB of ratio below its neighbour, the small-`r` slope.
    fn log_axis(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.ratios.iter().map(|r| 20.0 * r.log10()).collect();
        if self.ratios.len() > 1 && self.ratios[0] == 0.0 {
            x[0] = x[1] - (self.gain_db[0] - self.gain_db[1]);
        }
        x
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,level_db,periodic,random,ratio_db")?;
        for (c, g) in self.components.iter().zip(&self.gain_db) {
            writeln!(
                out,
                "{},{},{},{},{}",
                c.r,
                20.0 * c.r.log10(),
                c.periodic,
                c.random,
                g
            )?;
        }
        Ok(())
    }
}

fn level_db(r: f64, axis: &[f64]) -> f64 {
    if r > 0.0 {
        20.0 * r.log10()
    } else {
        axis[0]
    }
}

/// Measure the periodic-to-random ratio over `grid` with `n_seeds`
/// realisations of length `f0.duration_s`. The frozen unit uses
/// `params.seed`; random realisations use seeds derived from it.
pub fn calibrate_pr_ratio(
    params: &FvnParams,
    f0: &F0Trajectory,
    grid: &[f64],
    n_seeds: usize,
) -> Result<PrCalibration> {
    if grid.len() < 9 {
        return Err(FvnError::param("grid", "need at least 9 mixing coefficients"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FvnError::param("grid", "mixing coefficients must increase"));
    }
    if n_seeds < 50 {
        return Err(FvnError::param("n_seeds", "need at least 50 realisations"));
    }
    let frozen = design_phase(params)?;
    let seeds: Vec<u64> = (0..n_seeds as u64)
        .map(|i| derive_seed(params.seed, i + 1))
        .collect();
    let comps = measure_components(&frozen, params, f0, grid, &seeds)?;
    PrCalibration::from_components(comps, RATIO_CAP_DB)
}

/// Sample positions of one burst per pitch period, `phase_in_period` of
/// the way into each period, rounded to the nearest sample.
pub fn burst_positions(f0: &F0Trajectory, len: usize, phase_in_period: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&phase_in_period) {
        return Err(FvnError::param(
            "phase_in_period",
            format!("must lie in [0, 1), got {phase_in_period}"),
        ));
    }
    let ep = epochs(f0, len)?;
    let fs = f0.sample_rate;
    Ok(ep
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let period = match ep.get(i + 1) {
                Some(q) => q - p,
                None => fs / f0.f0_at(p / fs),
            };
            (p + phase_in_period * period).round()
        })
        .filter(|&p| p < len as f64)
        .map(|p| p as usize)
        .collect())
}

/// Add `gain` times the burst unit once per pitch period of `carrier`.
///
/// Bursts are placed on whole samples so every burst carries the same
/// energy regardless of `phase_in_period`.
pub fn place_bursts(
    carrier: &AudioBuffer,
    f0: &F0Trajectory,
    burst: &FvnUnit,
    phase_in_period: f64,
    gain: f64,
) -> Result<AudioBuffer> {
    if carrier.is_empty() {
        return Err(FvnError::param("carrier", "empty input"));
    }
    check_rate(carrier.sample_rate, f0)?;
    check_rate(burst.sample_rate(), f0)?;
    let mut out = carrier.samples.clone();
    for p in burst_positions(f0, carrier.len(), phase_in_period)? {
        add_centered(&mut out, &burst.impulse_response, p as i64, gain);
    }
    AudioBuffer::new(out, carrier.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::normalized_autocorrelation;

    fn small_params(seed: u64) -> FvnParams {
        FvnParams::new(8000.0, 100.0, 20.0, seed).with_fft_length(2048)
    }

    #[test]
    fn constant_f0_epochs() {
        let t = F0Trajectory::constant(100.0, 1.0, 44100.0).unwrap();
        let e = epochs(&t, 44100).unwrap();
        assert_eq!(e.len(), 100);
        for (i, p) in e.iter().enumerate() {
            assert!((p - 441.0 * i as f64).abs() <= 0.5);
        }
    }

    #[test]
    fn epochs_reject_tight_spacing() {
        let t = F0Trajectory::constant(5000.0, 0.1, 8000.0).unwrap();
        assert!(matches!(epochs(&t, 800), Err(FvnError::Parameter { .. })));
    }

    #[test]
    fn vibrato_values() {
        let t = F0Trajectory::new(82.41, 5.2, 10.0, 1.0, 44100.0).unwrap();
        assert!((t.peak_f0() - 82.41 * 2f64.powf(10.0 / 1200.0)).abs() < 1e-12);
        let flat = F0Trajectory::new(82.41, 5.2, 0.0, 0.1, 44100.0).unwrap();
        assert!(f0_with_vibrato(&flat).iter().all(|&f| f == 82.41));
        // integer number of vibrato cycles: 5 Hz over 1 s at 1 kHz
        let t = F0Trajectory::new(100.0, 5.0, 50.0, 1.0, 1000.0).unwrap();
        let f = f0_with_vibrato(&t);
        let mean = f.iter().map(|v| v.log2()).sum::<f64>() / f.len() as f64;
        assert!((mean - 100f64.log2()).abs() < 1e-9);
        assert!(F0Trajectory::new(0.0, 0.0, 0.0, 1.0, 8000.0).is_err());
        assert!(F0Trajectory::new(100.0, 1.0, -1.0, 1.0, 8000.0).is_err());
    }

    #[test]
    fn zero_phase_unit_gives_pulse_train() {
        let t = F0Trajectory::constant(100.0, 0.1, 8000.0).unwrap();
        let x = frozen_ifvn(&PhaseSpec::zero(256, 8000.0), &t, 0.1).unwrap();
        for (n, v) in x.samples.iter().enumerate() {
            let want = if n % 80 == 0 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "sample {n}: {v}");
        }
    }

    #[test]
    fn fractional_shift_matches_band_limited_delay() {
        // a half-sample delay of a delta is the periodic sinc
        let k = 64;
        let r = shifted_response(&PhaseSpec::zero(k, 1000.0), 0.5);
        let r0 = shifted_response(&PhaseSpec::zero(k, 1000.0), 0.0);
        assert!((r0[0] - 1.0).abs() < 1e-12);
        assert!((r[0] - r[1]).abs() < 1e-12);
        assert!(r[0] > 0.6 && r[0] < 0.65);
    }

    #[test]
    fn single_epoch_random_train_is_one_unit() {
        let p = small_params(3);
        let t = F0Trajectory::constant(10.0, 0.05, 8000.0).unwrap();
        let x = random_ifvn(&p, &t, 0.05).unwrap();
        let unit = crate::fvn::synthesize_unit(&epoch_phase(&p, 0).unwrap()).unwrap();
        for n in 0..x.len().min(1024) {
            assert!((x.samples[n] - unit.impulse_response[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_train_is_periodic() {
        let p = small_params(1);
        let t = F0Trajectory::constant(100.0, 0.5, 8000.0).unwrap();
        let x = frozen_ifvn(&design_phase(&p).unwrap(), &t, 0.5).unwrap();
        let inner = &x.samples[1024..x.len() - 1024];
        assert!(normalized_autocorrelation(inner, 80) > 0.99);
    }

    #[test]
    fn morph_endpoints_and_midpoint() {
        let a = design_phase(&small_params(1)).unwrap();
        let b = design_phase(&small_params(2)).unwrap();
        assert_eq!(morph_unit(&a, &b, 0.0).unwrap(), a);
        assert_eq!(morph_unit(&a, &b, 1.0).unwrap(), b);
        let m = morph_unit(&a, &b, 0.5).unwrap();
        for i in 0..a.phase.len() {
            assert!((m.phase[i] - 0.5 * (a.phase[i] + b.phase[i])).abs() < 1e-15);
        }
        assert!(m.symmetry_error() < 1e-12);
        let c = PhaseSpec::zero(1024, 8000.0);
        assert!(morph_unit(&a, &c, 0.5).is_err());
        assert!(morph_unit(&a, &b, 1.5).is_err());
    }

    #[test]
    fn schedule_interpolation() {
        let s = MorphSchedule::Breakpoints(vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(s.r_at(-1.0), 0.0);
        assert_eq!(s.r_at(0.25), 0.25);
        assert_eq!(s.r_at(3.0), 1.0);
        assert!(MorphSchedule::Breakpoints(vec![(1.0, 0.0), (0.0, 1.0)])
            .validate()
            .is_err());
        assert!(MorphSchedule::Constant(1.2).validate().is_err());
    }

    #[test]
    fn ratio_db_caps() {
        let c = ComponentPower {
            r: 0.0,
            periodic: 1.0,
            random: 0.0,
        };
        assert_eq!(c.ratio_db(RATIO_CAP_DB), RATIO_CAP_DB);
        let c = ComponentPower {
            r: 0.5,
            periodic: 1.0,
            random: 0.1,
        };
        assert!((c.ratio_db(RATIO_CAP_DB) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_inverse_is_monotone() {
        let comps: Vec<ComponentPower> = (0..=10)
            .map(|i| {
                let r = i as f64 / 10.0;
                ComponentPower {
                    r,
                    periodic: 1.0,
                    random: r * r,
                }
            })
            .collect();
        let cal = PrCalibration::from_components(comps, RATIO_CAP_DB).unwrap();
        assert!((cal.ratio_for(0.0) - 1.0).abs() < 1e-12);
        assert!((cal.ratio_for(10.0) - 10f64.powf(-0.5)).abs() < 1e-9);
        assert_eq!(cal.ratio_for(200.0), 0.0);
        assert_eq!(cal.ratio_for(-5.0), 1.0);
        let mut prev = 2.0;
        for eta in (-10..130).map(|v| v as f64) {
            let r = cal.ratio_for(eta);
            assert!(r <= prev);
            prev = r;
        }
        assert!((cal.gain_at(cal.ratio_for(12.0)) - 12.0).abs() < 1e-9);
    }

    #[test]
    fn non_monotone_calibration_fails() {
        let comps = vec![
            ComponentPower { r: 0.0, periodic: 1.0, random: 0.0 },
            ComponentPower { r: 0.5, periodic: 1.0, random: 0.1 },
            ComponentPower { r: 1.0, periodic: 1.0, random: 0.05 },
        ];
        let err = PrCalibration::from_components(comps, RATIO_CAP_DB).unwrap_err();
        assert!(matches!(err, FvnError::Calibration(ref m) if m.contains("r=1.000")));
    }

    #[test]
    fn measured_components_are_consistent() {
        let p = small_params(5);
        let t = F0Trajectory::constant(100.0, 0.2, 8000.0).unwrap();
        let frozen = design_phase(&p).unwrap();
        let seeds: Vec<u64> = (0..8).map(|i| derive_seed(5, i)).collect();
        let c = measure_components(&frozen, &p, &t, &[0.0, 0.5, 1.0], &seeds).unwrap();
        assert!(c[0].random < 1e-12 * c[0].periodic);
        assert!(c[1].random > c[0].random && c[2].random > c[1].random);
        assert!(c[0].ratio_db(RATIO_CAP_DB) > c[1].ratio_db(RATIO_CAP_DB));
    }

    #[test]
    fn burst_gain_zero_and_equal_energy() {
        let fs = 8000.0;
        let t = F0Trajectory::new(82.41, 5.2, 10.0, 0.5, fs).unwrap();
        let carrier = AudioBuffer::new((0..4000).map(|n| (n as f64 * 0.01).sin()).collect(), fs).unwrap();
        let burst = crate::fvn::generate_unit(
            &FvnParams::new(fs, 2000.0, 400.0, 9).with_fft_length(64),
        )
        .unwrap();
        let same = place_bursts(&carrier, &t, &burst, 0.3, 0.0).unwrap();
        assert_eq!(same.samples, carrier.samples);
        let energy_per_burst = |phase: f64| {
            let y = place_bursts(&carrier, &t, &burst, phase, 0.1).unwrap();
            let pos = burst_positions(&t, carrier.len(), phase).unwrap();
            let inner: Vec<usize> = pos
                .into_iter()
                .filter(|&p| p >= 32 && p + 32 <= carrier.len())
                .collect();
            let e: f64 = inner
                .iter()
                .map(|&p| {
                    (p - 32..p + 32)
                        .map(|i| (y.samples[i] - carrier.samples[i]).powi(2))
                        .sum::<f64>()
                })
                .sum();
            e / inner.len() as f64
        };
        let a = energy_per_burst(0.0);
        let b = energy_per_burst(0.66);
        assert!((a - 0.01).abs() < 1e-12);
        assert!((a - b).abs() < 1e-9 * a);
        assert!(place_bursts(&AudioBuffer { samples: vec![], sample_rate: fs }, &t, &burst, 0.0, 1.0).is_err());
    }
}
