//! Original velvet noise: one randomly signed unit pulse at a random
//! position inside every segment of `T_d` samples.

use crate::error::{FvnError, Result};
use crate::rng::{round_half_away, seeded, UniformSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub position: usize,
    /// +1 or -1
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelvetNoise {
    pub length: usize,
    pub pulse_interval: f64,
    pub seed: Option<u64>,
    pub pulses: Vec<Pulse>,
}

impl VelvetNoise {
    pub fn to_samples(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.length];
        for p in &self.pulses {
            out[p.position] = p.sign as f64;
        }
        out
    }

    pub fn pulse_count(&self) -> usize {
        self.pulses.len()
    }
}

/// Generate velvet noise from a seeded ChaCha8 stream.
pub fn generate_ovn(length: usize, pulse_interval: f64, seed: u64) -> Result<VelvetNoise> {
    let mut rng = seeded(seed);
    let mut ovn = generate_ovn_with(length, pulse_interval, &mut rng)?;
    ovn.seed = Some(seed);
    Ok(ovn)
}

/// Generate velvet noise drawing `r1(m)` then `r2(m)` for each segment `m`
/// from `source`. Only complete segments receive a pulse.
pub fn generate_ovn_with<S: UniformSource + ?Sized>(
    length: usize,
    pulse_interval: f64,
    source: &mut S,
) -> Result<VelvetNoise> {
    if !(pulse_interval >= 1.0) {
        return Err(FvnError::param(
            "pulse_interval",
            format!("must be at least 1 sample, got {pulse_interval}"),
        ));
    }
    if (length as f64) < pulse_interval {
        return Err(FvnError::param(
            "length",
            format!("{length} is shorter than one pulse interval"),
        ));
    }
    let segments = (length as f64 / pulse_interval).floor() as usize;
    let mut pulses = Vec::with_capacity(segments);
    for m in 0..segments {
        let r1 = source.next_open01();
        let r2 = source.next_open01();
        let pos = round_half_away(m as f64 * pulse_interval + r1 * (pulse_interval - 1.0));
        let pos = (pos.max(0.0) as usize).min(length - 1);
        let sign = (2.0 * round_half_away(r2) - 1.0) as i8;
        pulses.push(Pulse {
            position: pos,
            sign,
        });
    }
    Ok(VelvetNoise {
        length,
        pulse_interval,
        seed: None,
        pulses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CycleSource;

    #[test]
    fn one_pulse_per_segment() {
        let v = generate_ovn(100, 5.0, 1).unwrap();
        let s = v.to_samples();
        assert_eq!(s.iter().filter(|x| **x != 0.0).count(), 20);
        for seg in s.chunks(5) {
            assert_eq!(seg.iter().filter(|x| **x != 0.0).count(), 1);
        }
        assert!(s.iter().all(|x| [-1.0, 0.0, 1.0].contains(x)));
    }

    #[test]
    fn injected_variates() {
        let mut src = CycleSource::new(vec![0.5, 0.9]);
        let v = generate_ovn_with(100, 5.0, &mut src).unwrap();
        for (m, p) in v.pulses.iter().enumerate() {
            assert_eq!(p.position, 5 * m + 2);
            assert_eq!(p.sign, 1);
        }
    }

    #[test]
    fn trailing_partial_segment_is_empty() {
        let v = generate_ovn(103, 5.0, 4).unwrap();
        assert_eq!(v.pulse_count(), 20);
        assert!(v.pulses.iter().all(|p| p.position < 100));
    }

    #[test]
    fn bad_parameters() {
        assert!(generate_ovn(100, 0.5, 1).is_err());
        assert!(generate_ovn(3, 5.0, 1).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_ovn(10_000, 7.0, 99).unwrap();
        let b = generate_ovn(10_000, 7.0, 99).unwrap();
        let c = generate_ovn(10_000, 7.0, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.pulses, c.pulses);
    }
}
