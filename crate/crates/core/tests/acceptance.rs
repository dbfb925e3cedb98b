//! End-to-end acceptance checks. Each test writes one `criterion N: PASS|FAIL`
//! line straight to stderr so the summary shows even when output is captured.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use fvnkit::analysis::{
    averaged_power_spectrum, band_duration, centroid_identity_check, level_distribution, AudioBuffer,
    KurtosisConfig,
};
use fvnkit::cosine::{sidelobe_metrics, CosineSeries};
use fvnkit::excitation::{
    calibrate_pr_ratio, epoch_phase, frozen_ifvn, measure_components, morph_unit, morphed_ifvn, random_ifvn,
    F0Trajectory, MorphSchedule, RATIO_CAP_DB,
};
use fvnkit::ffvn::{generate_ffvn_unit, DurationProfile};
use fvnkit::fvn::{design_phase, duration_samples, generate_unit, median, FvnParams};
use fvnkit::hiding::{apply_allpass, detect_tamper, recover, HidingKey};
use fvnkit::rng::derive_seed;
use fvnkit::spectrum::{circular_convolve, circular_reverse, fft};
use fvnkit::velvet::generate_ovn;

fn report(n: u32, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {verdict} {detail}");
}

fn finish(n: u32, ok: bool, detail: String, start: Instant, limit: Duration) {
    let elapsed = start.elapsed();
    let pass = ok && elapsed < limit;
    report(n, pass, format!("{detail} runtime={:.2}s limit={}s", elapsed.as_secs_f64(), limit.as_secs()));
    assert!(ok, "criterion {n}: {detail}");
    assert!(elapsed < limit, "criterion {n}: took {elapsed:?}");
}

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[test]
fn criterion_01_window_sidelobes() {
    let start = Instant::now();
    let m = sidelobe_metrics(&CosineSeries::SIX_TERM, 16).unwrap();
    let ok = m.peak_sidelobe_db <= -114.0 && (m.decay_rate_db_per_octave + 54.0).abs() <= 3.0;
    finish(
        1,
        ok,
        format!(
            "peak={:.2}dB decay={:.2}dB/oct",
            m.peak_sidelobe_db, m.decay_rate_db_per_octave
        ),
        start,
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_02_coefficient_identities() {
    let start = Instant::now();
    let s = CosineSeries::SIX_TERM;
    let ok = (s.sum() - 1.0).abs() < 1e-10 && s.alternating_sum().abs() < 1e-10;
    finish(
        2,
        ok,
        format!("sum-1={:.2e} alt={:.2e}", s.sum() - 1.0, s.alternating_sum()),
        start,
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_03_allpass_and_tsp() {
    let start = Instant::now();
    let mut worst_mag = 0.0f64;
    let mut worst_tsp = 0.0f64;
    for (i, b) in [100.0, 200.0, 400.0, 2000.0].iter().enumerate() {
        for j in 0..25u64 {
            let seed = derive_seed(3, (i as u64) * 100 + j);
            let unit = generate_unit(&FvnParams::new(44100.0, *b, b / 5.0, seed)).unwrap();
            let h = &unit.impulse_response;
            let mut spec: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft(&mut spec);
            for c in &spec {
                worst_mag = worst_mag.max((c.norm() - 1.0).abs());
            }
            let auto = circular_convolve(h, &circular_reverse(h)).unwrap();
            for (n, v) in auto.iter().enumerate() {
                let target = if n == 0 { 1.0 } else { 0.0 };
                worst_tsp = worst_tsp.max((v - target).abs());
            }
        }
    }
    let ok = worst_mag < 1e-10 && worst_tsp < 1e-9;
    finish(
        3,
        ok,
        format!("max||H|-1|={worst_mag:.2e} max|h*rev(h)-delta|={worst_tsp:.2e}"),
        start,
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_04_duration_law() {
    let start = Instant::now();
    let mut products = Vec::new();
    for b in [100.0, 200.0, 400.0] {
        let params = FvnParams::new(44100.0, b, b / 3.0, 0);
        let d = duration_samples(&params, 0..1000u64).unwrap();
        products.push((b, b * median(&d)));
    }
    let ok = products.iter().all(|(_, p)| (0.47..=0.58).contains(p));
    let detail = products
        .iter()
        .map(|(b, p)| format!("B={b}:B*median={p:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    finish(4, ok, detail, start, Duration::from_secs(300));
}

#[test]
fn criterion_05_hiding() {
    let start = Instant::now();
    let fs = 44100.0;
    let n = 10 * fs as usize;
    let config = KurtosisConfig::default();

    let broadband = AudioBuffer::new(gaussian(n, 500), fs).unwrap();
    let key0 = HidingKey::new(generate_unit(&FvnParams::new(fs, 100.0, 20.0, 0)).unwrap(), "k0").unwrap();
    let back = recover(&apply_allpass(&broadband, &key0).unwrap(), &key0).unwrap();
    let round_trip = back
        .samples
        .iter()
        .zip(&broadband.samples)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / broadband.peak();

    let mut correct = Vec::new();
    let mut wrong = Vec::new();
    for t in 0..50u64 {
        let pulses = generate_ovn(n, fs, derive_seed(t, 1)).unwrap().to_samples();
        let source: Vec<f64> = gaussian(n, derive_seed(t, 2))
            .iter()
            .zip(&pulses)
            .map(|(g, p)| g + 12.0 * p)
            .collect();
        let x = AudioBuffer::new(source, fs).unwrap();
        let key = HidingKey::new(generate_unit(&FvnParams::new(fs, 100.0, 20.0, t)).unwrap(), "k").unwrap();
        let other =
            HidingKey::new(generate_unit(&FvnParams::new(fs, 100.0, 20.0, t + 1000)).unwrap(), "w").unwrap();
        let hidden = apply_allpass(&x, &key).unwrap();
        correct.push(detect_tamper(&hidden, &key, &config).unwrap().exceedance_fraction);
        wrong.push(detect_tamper(&hidden, &other, &config).unwrap().exceedance_fraction);
    }
    let lo = correct.iter().cloned().fold(f64::MAX, f64::min);
    let hi = correct.iter().cloned().fold(f64::MIN, f64::max);
    let mean = correct.iter().sum::<f64>() / correct.len() as f64;
    let wrong_max = wrong.iter().cloned().fold(0.0, f64::max);
    let ok = round_trip < 1e-6 && lo >= 0.005 && hi <= 0.015 && wrong_max < 0.001;
    finish(
        5,
        ok,
        format!(
            "round_trip={round_trip:.2e} correct_mean={:.3}% range=[{:.3}%,{:.3}%] wrong_max={:.3}%",
            100.0 * mean,
            100.0 * lo,
            100.0 * hi,
            100.0 * wrong_max
        ),
        start,
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_06_centroid_identity() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for s in 0..100u64 {
        let x = AudioBuffer::new(gaussian(256, 600 + s), 8000.0).unwrap();
        let c = centroid_identity_check(&x).unwrap();
        worst = worst.max(c.difference().abs() / c.lhs.abs());
    }
    finish(6, worst < 1e-6, format!("max_rel_diff={worst:.2e}"), start, Duration::from_secs(5));
}

fn ranks(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut r = vec![0; v.len()];
    for (rank, i) in idx.into_iter().enumerate() {
        r[i] = rank;
    }
    r
}

#[test]
fn criterion_07_ffvn_profiles() {
    let start = Instant::now();
    let fs = 16000.0;
    let table = DurationProfile::hts_band_table(fs, 400.0);
    let (edges, targets) = match &table {
        DurationProfile::Band { boundaries, durations, .. } => (boundaries.clone(), durations.clone()),
        _ => unreachable!(),
    };
    let params = FvnParams::new(fs, 200.0, 40.0, 0).with_fft_length(8192);
    let mut per_band = vec![Vec::new(); targets.len()];
    for seed in 0..200u64 {
        let unit = generate_ffvn_unit(&table, &params.with_seed(seed)).unwrap();
        for (b, w) in edges.windows(2).enumerate() {
            per_band[b].push(band_duration(&unit.impulse_response, fs, w[0], w[1]).unwrap());
        }
    }
    let medians: Vec<f64> = per_band.iter().map(|d| median(d)).collect();
    let table_ok = ranks(&medians) == ranks(&targets);

    let fs = 22050.0;
    let sigmoid = DurationProfile::Sigmoid {
        corner_hz: 2000.0,
        transition_hz: 200.0,
        max_s: 3e-3,
        min_s: 0.0037e-3,
    };
    let params = FvnParams::new(fs, 200.0, 40.0, 0).with_fft_length(32768);
    let mut below = Vec::new();
    let mut above = Vec::new();
    for seed in 0..200u64 {
        let unit = generate_ffvn_unit(&sigmoid, &params.with_seed(seed)).unwrap();
        below.push(band_duration(&unit.impulse_response, fs, 0.0, 2000.0).unwrap());
        above.push(band_duration(&unit.impulse_response, fs, 2000.0, fs / 2.0).unwrap());
    }
    let (mb, ma) = (median(&below), median(&above));
    let ok = table_ok && mb < ma;
    let ms: Vec<String> = medians.iter().map(|m| format!("{:.3}", m * 1e3)).collect();
    finish(
        7,
        ok,
        format!(
            "band_medians_ms=[{}] sigmoid_below={:.3}ms above={:.3}ms ratio={:.1}",
            ms.join(","),
            mb * 1e3,
            ma * 1e3,
            ma / mb
        ),
        start,
        Duration::from_secs(300),
    );
}

fn morph_setting() -> (FvnParams, F0Trajectory) {
    let params = FvnParams::new(44100.0, 100.0, 20.0, 11).with_fft_length(16384);
    let f0 = F0Trajectory::constant(100.0, 0.5, 44100.0).unwrap();
    (params, f0)
}

#[test]
fn criterion_08_morph_calibration() {
    let start = Instant::now();
    let (params, f0) = morph_setting();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let cal = calibrate_pr_ratio(&params, &f0, &grid, 50).unwrap();
    let monotone = cal.gain_db.windows(2).all(|w| w[1] < w[0]);

    let frozen = design_phase(&params).unwrap();
    let random = epoch_phase(&params, 3).unwrap();
    let unit_ends = morph_unit(&frozen, &random, 0.0).unwrap() == frozen
        && morph_unit(&frozen, &random, 1.0).unwrap() == random;
    let rp = params.with_seed(derive_seed(params.seed, 0));
    let train_ends = morphed_ifvn(&frozen, &rp, &f0, 0.5, &MorphSchedule::Constant(0.0)).unwrap()
        == frozen_ifvn(&frozen, &f0, 0.5).unwrap()
        && morphed_ifvn(&frozen, &rp, &f0, 0.5, &MorphSchedule::Constant(1.0)).unwrap()
            == random_ifvn(&rp, &f0, 0.5).unwrap();

    let r = cal.ratio_for(0.0);
    let fresh: Vec<u64> = (0..50u64).map(|i| derive_seed(params.seed, 10_000 + i)).collect();
    let realized = measure_components(&frozen, &params, &f0, &[r], &fresh).unwrap()[0].ratio_db(RATIO_CAP_DB);

    let ok = monotone && unit_ends && train_ends && realized.abs() <= 1.5;
    let g: Vec<String> = cal.gain_db.iter().map(|v| format!("{v:.2}")).collect();
    finish(
        8,
        ok,
        format!(
            "G_dB=[{}] monotone={monotone} endpoints_exact={} r(0dB)={r:.4} realized={realized:.2}dB",
            g.join(","),
            unit_ends && train_ends
        ),
        start,
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_09_statistics() {
    let start = Instant::now();
    let fs = 44100.0;
    let params = FvnParams::new(fs, 100.0, 20.0, 0).with_fft_length(16384);
    let f0 = F0Trajectory::constant(100.0, 3.0, fs).unwrap();

    let frame = 1024;
    let mut avg = vec![0.0; frame / 2 + 1];
    for seed in 0..200u64 {
        let x = random_ifvn(&params.with_seed(seed), &f0, 0.25).unwrap();
        let p = averaged_power_spectrum(&x.samples, frame).unwrap();
        for (a, v) in avg.iter_mut().zip(&p) {
            *a += v;
        }
    }
    let level = avg.iter().sum::<f64>() / avg.len() as f64;
    let db: Vec<f64> = avg.iter().map(|v| 10.0 * (v / level).log10()).collect();
    // DC and Nyquist carry zero phase in every unit, so they add coherently;
    // bins inside the Hann main lobe of either are excluded from flatness.
    let half = avg.len() - 1;
    let flat = db[2..half - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let full = db.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let long = random_ifvn(&params.with_seed(7), &f0, 3.0).unwrap();
    let ks_random = level_distribution(&long).unwrap().ks_distance_to_normal();

    // A frozen train repeats one period, so each unit contributes one period
    // of steady-state samples and the pool spans many frozen units.
    let short = F0Trajectory::constant(100.0, 0.2, fs).unwrap();
    let period = 441;
    let skip = 4410;
    let mut pooled = Vec::new();
    for seed in 0..250u64 {
        let phase = design_phase(&params.with_seed(1000 + seed)).unwrap();
        let x = frozen_ifvn(&phase, &short, 0.2).unwrap();
        pooled.extend_from_slice(&x.samples[skip..skip + period]);
    }
    let n_frozen = pooled.len();
    let ks_frozen = level_distribution(&AudioBuffer::new(pooled, fs).unwrap())
        .unwrap()
        .ks_distance_to_normal();

    let ok = flat <= 1.5 && ks_random < 0.02 && ks_frozen < 0.02 && long.len() >= 100_000 && n_frozen >= 100_000;
    finish(
        9,
        ok,
        format!(
            "spectrum_max_dev={flat:.2}dB (with DC/Nyquist {full:.2}dB) ks_random={ks_random:.4} (n={}) ks_frozen={ks_frozen:.4} (n={n_frozen})",
            long.len()
        ),
        start,
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_10_vibrato_and_burst() {
    let start = Instant::now();
    let traj = F0Trajectory::new(82.41, 5.2, 10.0, 1.0, 44100.0).unwrap();
    let expected = 82.41 * 2f64.powf(1.0 / 120.0);
    let peak_err = (traj.peak_f0() - expected).abs() / expected;

    let params = FvnParams::new(44100.0, 2000.0, 400.0, 0);
    let d = median(&duration_samples(&params, 0..200u64).unwrap());
    let ok = peak_err < 1e-9 && (d - 0.78e-3).abs() <= 0.2 * 0.78e-3;
    finish(
        10,
        ok,
        format!("peak_f0_rel_err={peak_err:.2e} burst_median={:.3}ms", d * 1e3),
        start,
        Duration::from_secs(60),
    );
}
