//! Command-line front end.
//!
//! Exit status: 0 on success, 2 for usage errors (bad flags, missing input
//! files, invalid parameters), 3 for data errors. Every command that writes
//! files also writes `<output>.provenance`, a `key = value` record of the
//! tool version and all settings, with no timestamps so reruns are
//! byte-identical.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    centroid_identity_check, duration, erl, group_delay, level_distribution, running_kurtosis,
    spectrogram, AudioBuffer, KurtosisConfig, TimeOrigin, WindowShape,
};
use crate::error::{FvnError, Result};
use crate::excitation::{
    calibrate_pr_ratio, frozen_ifvn, morphed_ifvn, place_bursts, random_ifvn, ComponentPower,
    F0Trajectory, MorphSchedule, PrCalibration, RATIO_CAP_DB,
};
use crate::ffvn::{generate_ffvn_unit, DurationProfile, BUFFER_DURATION_RATIO};
use crate::fvn::{design_phase, duration_samples, generate_unit, FvnParams};
use crate::hiding::{apply_allpass, detect_tamper, recover, HidingKey};
use crate::io::{
    read_breakpoints, read_csv, read_profile, read_unit, read_wav, write_csv, write_unit,
    write_wav, RunConfig, SampleFormat,
};
use crate::velvet::generate_ovn;

const EXIT_USAGE: i32 = 2;
const EXIT_DATA: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "fvnkit", version, about = "Velvet noise and FVN all-pass tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Original velvet noise.
    Ovn(OvnArgs),
    /// One FVN unit (WAV plus text sidecar).
    Fvn(FvnArgs),
    /// One FVN unit with frequency-dependent duration.
    Ffvn(FfvnArgs),
    /// All-pass filter a signal with a key.
    Filter(KeyedArgs),
    /// Undo `filter` with the same key.
    Recover(KeyedArgs),
    /// Recover with a key and report a kurtosis-based verdict.
    Detect(DetectArgs),
    /// Morph between frozen and random unit trains.
    Morph(MorphArgs),
    /// Frozen or random unit trains, or bursts added to a carrier.
    Excite(ExciteArgs),
    /// Signal measurements written as CSV.
    Analyze(AnalyzeArgs),
    /// Tabulate periodic-to-random ratio against mixing coefficient.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug, Clone)]
struct UnitOpts {
    /// Smoother support half-width, Hz.
    #[arg(long = "b-hz", default_value_t = 200.0)]
    b_hz: f64,
    /// Average segment width, Hz.
    #[arg(long = "fd-hz", default_value_t = 40.0)]
    fd_hz: f64,
    #[arg(long = "phi-max", default_value_t = std::f64::consts::FRAC_PI_2)]
    phi_max: f64,
    #[arg(long, default_value_t = 44100.0)]
    fs: f64,
    /// Transform length; chosen from the bandwidth when omitted.
    #[arg(long = "fft-length")]
    fft_length: Option<usize>,
}

impl UnitOpts {
    fn params(&self, seed: u64) -> FvnParams {
        let mut p = FvnParams::new(self.fs, self.b_hz, self.fd_hz, seed).with_phi_max(self.phi_max);
        if let Some(k) = self.fft_length {
            p = p.with_fft_length(k);
        }
        p
    }

    fn record(&self, c: &mut RunConfig, seed: u64) -> Result<()> {
        let p = self.params(seed);
        c.push("b_hz", p.bandwidth_hz)?;
        c.push("fd_hz", p.segment_hz)?;
        c.push("phi_max", p.phi_max)?;
        c.push("fs", p.sample_rate)?;
        c.push("fft_length", p.fft_length)?;
        c.push("seed", seed)
    }
}

#[derive(Args, Debug, Clone)]
struct F0Opts {
    /// Base f0, Hz.
    #[arg(long, default_value_t = 100.0)]
    f0: f64,
    #[arg(long = "vibrato-rate", default_value_t = 0.0)]
    vibrato_rate: f64,
    #[arg(long = "vibrato-cents", default_value_t = 0.0)]
    vibrato_cents: f64,
    /// Output length, seconds.
    #[arg(long, default_value_t = 1.0)]
    length: f64,
}

impl F0Opts {
    fn trajectory(&self, fs: f64) -> Result<F0Trajectory> {
        F0Trajectory::new(self.f0, self.vibrato_rate, self.vibrato_cents, self.length, fs)
    }

    fn record(&self, c: &mut RunConfig) -> Result<()> {
        c.push("f0", self.f0)?;
        c.push("vibrato_rate", self.vibrato_rate)?;
        c.push("vibrato_cents", self.vibrato_cents)?;
        c.push("length", self.length)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WavFormat {
    Pcm16,
    Pcm24,
    Float32,
    Float64,
}

impl From<WavFormat> for SampleFormat {
    fn from(f: WavFormat) -> Self {
        match f {
            WavFormat::Pcm16 => SampleFormat::Pcm16,
            WavFormat::Pcm24 => SampleFormat::Pcm24,
            WavFormat::Float32 => SampleFormat::Float32,
            WavFormat::Float64 => SampleFormat::Float64,
        }
    }
}

#[derive(Args, Debug)]
struct OvnArgs {
    /// Length in samples.
    #[arg(long)]
    length: usize,
    /// Average pulse interval in samples.
    #[arg(long)]
    interval: f64,
    #[arg(long, default_value_t = 44100.0)]
    fs: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = WavFormat::Float32)]
    format: WavFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FvnArgs {
    #[command(flatten)]
    unit: UnitOpts,
    #[arg(long)]
    seed: u64,
    #[arg(long = "key-id")]
    key_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfilePreset {
    /// Five-band table: 0.1, 0.4, 3, 2, 5 ms.
    HtsBands,
    /// Logistic rise from 0.0037 ms to 3 ms around 2 kHz.
    Sigmoid,
}

#[derive(Args, Debug)]
struct FfvnArgs {
    #[command(flatten)]
    unit: UnitOpts,
    /// Profile file (`form = sigmoid|band`, ...).
    #[arg(long, conflicts_with = "preset")]
    profile: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<ProfilePreset>,
    /// Band smoother width for the band preset, Hz.
    #[arg(long = "smoother-hz", default_value_t = 400.0)]
    smoother_hz: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KeyPreset {
    /// About 1 ms duration.
    Depuzz,
}

#[derive(Args, Debug, Clone)]
struct KeyOpts {
    /// Key WAV written by `fvn` or `ffvn`.
    #[arg(long, required_unless_present = "preset")]
    key: Option<PathBuf>,
    #[arg(long, value_enum, requires = "seed")]
    preset: Option<KeyPreset>,
    /// Seed for a preset key.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct KeyedArgs {
    #[command(flatten)]
    key: KeyOpts,
    /// Drop the latency and filter tail so output length matches input.
    /// The result can no longer be recovered exactly.
    #[arg(long)]
    trim: bool,
    #[arg(long, value_enum, default_value_t = WavFormat::Float64)]
    format: WavFormat,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct KurtosisOpts {
    #[arg(long, default_value_t = 10.0)]
    threshold: f64,
    #[arg(long = "decision-level", default_value_t = 0.005)]
    decision_level: f64,
    #[arg(long = "window-ms", default_value_t = 25.0)]
    window_ms: f64,
    #[arg(long = "hop-ms", default_value_t = 5.0)]
    hop_ms: f64,
    /// hann, rectangular or nuttall.
    #[arg(long, default_value = "hann")]
    window: String,
}

impl KurtosisOpts {
    fn config(&self) -> Result<KurtosisConfig> {
        let window = WindowShape::parse(&self.window)
            .ok_or_else(|| FvnError::param("window", format!("unknown window `{}`", self.window)))?;
        Ok(KurtosisConfig {
            window,
            window_s: self.window_ms * 1e-3,
            hop_s: self.hop_ms * 1e-3,
            threshold: self.threshold,
            decision_level: self.decision_level,
            ..KurtosisConfig::default()
        })
    }
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[command(flatten)]
    key: KeyOpts,
    #[command(flatten)]
    kurtosis: KurtosisOpts,
    input: PathBuf,
}

#[derive(Args, Debug)]
struct MorphArgs {
    #[command(flatten)]
    unit: UnitOpts,
    #[command(flatten)]
    f0: F0Opts,
    /// Constant mixing coefficient in [0, 1].
    #[arg(long, conflicts_with = "eta", required_unless_present = "eta")]
    r: Option<f64>,
    /// Breakpoint file of `time_s ratio_db` lines.
    #[arg(long)]
    eta: Option<PathBuf>,
    /// Calibration CSV from `calibrate`; measured on the fly when absent.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long = "cal-seeds", default_value_t = 50)]
    cal_seeds: usize,
    #[arg(long = "cal-length", default_value_t = 0.5)]
    cal_length: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = WavFormat::Float32)]
    format: WavFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExciteMode {
    Frozen,
    Random,
    Burst,
}

#[derive(Args, Debug)]
struct ExciteArgs {
    #[arg(long, value_enum)]
    mode: ExciteMode,
    #[command(flatten)]
    unit: UnitOpts,
    #[command(flatten)]
    f0: F0Opts,
    /// Carrier WAV for burst mode.
    #[arg(long, required_if_eq("mode", "burst"))]
    carrier: Option<PathBuf>,
    /// Burst position within each pitch period, [0, 1).
    #[arg(long, default_value_t = 0.0)]
    phase: f64,
    #[arg(long, default_value_t = 0.1)]
    gain: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = WavFormat::Float32)]
    format: WavFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AnalysisKind {
    /// Duration and effective rectangular length of a signal.
    Duration,
    /// Durations of units over a range of seeds.
    DurationLaw,
    Kurtosis,
    Spectrogram,
    Levels,
    /// Group delay of a unit WAV.
    GroupDelay,
    /// Both sides of the temporal centroid identity.
    Centroid,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    kind: AnalysisKind,
    input: Option<PathBuf>,
    #[command(flatten)]
    unit: UnitOpts,
    #[command(flatten)]
    kurtosis: KurtosisOpts,
    /// First seed for `duration-law`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    seeds: u64,
    /// Spectrogram window and hop, ms.
    #[arg(long = "frame-ms", default_value_t = 20.0)]
    frame_ms: f64,
    #[arg(long = "shift-ms", default_value_t = 0.5)]
    shift_ms: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    unit: UnitOpts,
    #[arg(long, default_value_t = 100.0)]
    f0: f64,
    /// Realisation length, seconds.
    #[arg(long, default_value_t = 0.5)]
    length: f64,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    /// Number of evenly spaced mixing coefficients over [0, 1].
    #[arg(long, default_value_t = 11)]
    grid: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Parse `args` (including the program name) and run. Messages go to
/// `out` and `err`; the return value is the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                FvnError::Parameter { .. } => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}

fn require_input(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(FvnError::param("input", format!("{} does not exist", path.display())))
    }
}

fn provenance(command: &str) -> Result<RunConfig> {
    let mut c = RunConfig::new();
    c.push("tool", "fvnkit")?;
    c.push("version", env!("CARGO_PKG_VERSION"))?;
    c.push("command", command)?;
    Ok(c)
}

fn save_provenance(output: &Path, c: &RunConfig) -> Result<()> {
    let mut name = output.as_os_str().to_owned();
    name.push(".provenance");
    c.save(Path::new(&name))
}

fn load_key(opts: &KeyOpts, fs: f64, c: &mut RunConfig) -> Result<HidingKey> {
    match (&opts.key, opts.preset) {
        (Some(path), _) => {
            require_input(path)?;
            let (unit, meta) = read_unit(path)?;
            let id = meta
                .and_then(|m| m.get("key_id").map(str::to_string))
                .unwrap_or_else(|| path.display().to_string());
            c.push("key", path.display())?;
            HidingKey::new(unit, id)
        }
        (None, Some(KeyPreset::Depuzz)) => {
            let seed = opts
                .seed
                .ok_or_else(|| FvnError::param("seed", "a preset key needs --seed"))?;
            c.push("preset", "depuzz")?;
            c.push("seed", seed)?;
            HidingKey::depuzz(fs, seed)
        }
        (None, None) => Err(FvnError::param("key", "give --key or --preset")),
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Ovn(a) => {
            let mut c = provenance("ovn")?;
            c.push("length", a.length)?;
            c.push("interval", a.interval)?;
            c.push("fs", a.fs)?;
            c.push("seed", a.seed)?;
            let v = generate_ovn(a.length, a.interval, a.seed)?;
            write_wav(&a.out, &AudioBuffer::new(v.to_samples(), a.fs)?, a.format.into())?;
            save_provenance(&a.out, &c)
        }
        Command::Fvn(a) => {
            let mut c = provenance("fvn")?;
            a.unit.record(&mut c, a.seed)?;
            let unit = generate_unit(&a.unit.params(a.seed))?;
            write_unit(&a.out, &unit, "fvn", a.key_id.as_deref())?;
            writeln!(out, "duration_s={}", unit.duration_s).ok();
            save_provenance(&a.out, &c)
        }
        Command::Ffvn(a) => {
            let mut c = provenance("ffvn")?;
            let fs = a.unit.fs;
            let profile = match (&a.profile, a.preset) {
                (Some(p), _) => {
                    require_input(p)?;
                    c.push("profile", p.display())?;
                    read_profile(p, fs)?
                }
                (None, Some(ProfilePreset::HtsBands)) => {
                    c.push("preset", "hts-bands")?;
                    c.push("smoother_hz", a.smoother_hz)?;
                    DurationProfile::hts_band_table(fs, a.smoother_hz)
                }
                (None, Some(ProfilePreset::Sigmoid)) => {
                    c.push("preset", "sigmoid")?;
                    DurationProfile::Sigmoid {
                        corner_hz: 2000.0,
                        transition_hz: 200.0,
                        max_s: 3e-3,
                        min_s: 0.0037e-3,
                    }
                }
                (None, None) => return Err(FvnError::param("profile", "give --profile or --preset")),
            };
            let mut params = a.unit.params(a.seed);
            if a.unit.fft_length.is_none() {
                let need = 2.0 * BUFFER_DURATION_RATIO * profile.max_duration() * fs;
                params = params.with_fft_length((need.ceil() as usize).next_power_of_two().max(params.fft_length));
            }
            let mut unit_opts = a.unit.clone();
            unit_opts.fft_length = Some(params.fft_length);
            unit_opts.record(&mut c, a.seed)?;
            let unit = generate_ffvn_unit(&profile, &params)?;
            write_unit(&a.out, &unit, "ffvn", None)?;
            save_provenance(&a.out, &c)
        }
        Command::Filter(a) => keyed(a, true),
        Command::Recover(a) => keyed(a, false),
        Command::Detect(a) => {
            require_input(&a.input)?;
            let x = read_wav(&a.input)?;
            let mut c = provenance("detect")?;
            let key = load_key(&a.key, x.sample_rate, &mut c)?;
            let report = detect_tamper(&x, &key, &a.kurtosis.config()?)?;
            writeln!(out, "{report}").ok();
            Ok(())
        }
        Command::Morph(a) => {
            let mut c = provenance("morph")?;
            a.unit.record(&mut c, a.seed)?;
            a.f0.record(&mut c)?;
            let params = a.unit.params(a.seed);
            let f0 = a.f0.trajectory(params.sample_rate)?;
            let schedule = match (a.r, &a.eta) {
                (Some(r), _) => {
                    c.push("r", r)?;
                    MorphSchedule::Constant(r)
                }
                (None, Some(eta)) => {
                    require_input(eta)?;
                    c.push("eta", eta.display())?;
                    let points = read_breakpoints(eta)?;
                    let cal = match &a.calibration {
                        Some(p) => {
                            require_input(p)?;
                            c.push("calibration", p.display())?;
                            read_calibration(p)?
                        }
                        None => {
                            c.push("cal_seeds", a.cal_seeds)?;
                            c.push("cal_length", a.cal_length)?;
                            let cf0 = F0Trajectory { duration_s: a.cal_length, ..f0 };
                            calibrate_pr_ratio(&params, &cf0, &even_grid(11), a.cal_seeds)?
                        }
                    };
                    MorphSchedule::from_ratio_db(&points, &cal)
                }
                (None, None) => return Err(FvnError::param("r", "give --r or --eta")),
            };
            let frozen = design_phase(&params)?;
            let random = params.with_seed(crate::rng::derive_seed(a.seed, 0));
            let x = morphed_ifvn(&frozen, &random, &f0, a.f0.length, &schedule)?;
            write_wav(&a.out, &x, a.format.into())?;
            save_provenance(&a.out, &c)
        }
        Command::Excite(a) => {
            let mut c = provenance("excite")?;
            a.unit.record(&mut c, a.seed)?;
            a.f0.record(&mut c)?;
            let params = a.unit.params(a.seed);
            let f0 = a.f0.trajectory(params.sample_rate)?;
            let x = match a.mode {
                ExciteMode::Frozen => {
                    c.push("mode", "frozen")?;
                    frozen_ifvn(&design_phase(&params)?, &f0, a.f0.length)?
                }
                ExciteMode::Random => {
                    c.push("mode", "random")?;
                    random_ifvn(&params, &f0, a.f0.length)?
                }
                ExciteMode::Burst => {
                    c.push("mode", "burst")?;
                    let path = a.carrier.as_ref().expect("clap enforces --carrier");
                    require_input(path)?;
                    c.push("carrier", path.display())?;
                    c.push("phase", a.phase)?;
                    c.push("gain", a.gain)?;
                    let carrier = read_wav(path)?;
                    let burst = generate_unit(&params)?;
                    let traj = F0Trajectory {
                        duration_s: carrier.duration_s(),
                        ..f0
                    };
                    if burst.duration_s * traj.peak_f0() > 1.0 {
                        writeln!(
                            err,
                            "warning: burst duration {:.3} ms exceeds the shortest pitch period",
                            burst.duration_s * 1e3
                        )
                        .ok();
                    }
                    place_bursts(&carrier, &traj, &burst, a.phase, a.gain)?
                }
            };
            write_wav(&a.out, &x, a.format.into())?;
            save_provenance(&a.out, &c)
        }
        Command::Analyze(a) => analyze(a, out),
        Command::Calibrate(a) => {
            let mut c = provenance("calibrate")?;
            a.unit.record(&mut c, a.seed)?;
            c.push("f0", a.f0)?;
            c.push("length", a.length)?;
            c.push("seeds", a.seeds)?;
            c.push("grid", a.grid)?;
            let params = a.unit.params(a.seed);
            let f0 = F0Trajectory::constant(a.f0, a.length, params.sample_rate)?;
            let cal = calibrate_pr_ratio(&params, &f0, &even_grid(a.grid), a.seeds)?;
            let mut buf = Vec::new();
            cal.write_csv(&mut buf).map_err(|source| FvnError::Io {
                path: a.out.clone(),
                source,
            })?;
            std::fs::write(&a.out, buf).map_err(|source| FvnError::Io {
                path: a.out.clone(),
                source,
            })?;
            save_provenance(&a.out, &c)
        }
    }
}

fn keyed(a: KeyedArgs, forward: bool) -> Result<()> {
    require_input(&a.input)?;
    let x = read_wav(&a.input)?;
    let mut c = provenance(if forward { "filter" } else { "recover" })?;
    c.push("input", a.input.display())?;
    c.push("trim", a.trim)?;
    let key = load_key(&a.key, x.sample_rate, &mut c)?;
    let y = if forward {
        let y = apply_allpass(&x, &key)?;
        if a.trim {
            let lat = key.latency();
            AudioBuffer::new(y.samples[lat..lat + x.len()].to_vec(), y.sample_rate)?
        } else {
            y
        }
    } else {
        recover(&x, &key)?
    };
    write_wav(&a.output, &y, a.format.into())?;
    save_provenance(&a.output, &c)
}

fn even_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn read_calibration(path: &Path) -> Result<PrCalibration> {
    let (header, rows) = read_csv(path)?;
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| FvnError::Format {
            path: path.to_path_buf(),
            reason: format!("missing column `{name}`"),
        })
    };
    let (ir, ip, iq) = (col("r")?, col("periodic")?, col("random")?);
    let comps = rows
        .iter()
        .map(|row| ComponentPower {
            r: row[ir],
            periodic: row[ip],
            random: row[iq],
        })
        .collect();
    PrCalibration::from_components(comps, RATIO_CAP_DB)
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let mut c = provenance("analyze")?;
    let input = || -> Result<&PathBuf> {
        let p = a
            .input
            .as_ref()
            .ok_or_else(|| FvnError::param("input", "this analysis needs an input WAV"))?;
        require_input(p)?;
        Ok(p)
    };
    match a.kind {
        AnalysisKind::Duration => {
            let p = input()?;
            c.push("kind", "duration")?;
            c.push("input", p.display())?;
            let x = read_wav(p)?;
            let d = duration(&x, TimeOrigin::Centroid)?;
            writeln!(out, "duration_s={d} erl={}", erl(d)?).ok();
            write_csv(&a.out, &["duration_s", "erl"], vec![vec![d, erl(d)?]])?;
        }
        AnalysisKind::DurationLaw => {
            let first = a
                .seed
                .ok_or_else(|| FvnError::param("seed", "duration-law needs --seed"))?;
            c.push("kind", "duration-law")?;
            a.unit.record(&mut c, first)?;
            c.push("seeds", a.seeds)?;
            let params = a.unit.params(first);
            let seeds: Vec<u64> = (first..first + a.seeds).collect();
            let d = duration_samples(&params, seeds.clone())?;
            write_csv(
                &a.out,
                &["seed", "duration_s"],
                seeds.iter().zip(&d).map(|(s, v)| vec![*s as f64, *v]),
            )?;
            let med = crate::fvn::median(&d);
            writeln!(out, "median_duration_s={med} bandwidth_product={}", med * params.bandwidth_hz).ok();
        }
        AnalysisKind::Kurtosis => {
            let p = input()?;
            c.push("kind", "kurtosis")?;
            c.push("input", p.display())?;
            let cfg = a.kurtosis.config()?;
            let k = running_kurtosis(&read_wav(p)?, &cfg)?;
            write_csv(
                &a.out,
                &["time_s", "kappa"],
                k.times
                    .iter()
                    .zip(&k.kappa)
                    .map(|(t, v)| vec![*t, v.unwrap_or(f64::NAN)]),
            )?;
            writeln!(out, "exceedance={}", k.exceedance_fraction(cfg.threshold)).ok();
        }
        AnalysisKind::Spectrogram => {
            let p = input()?;
            c.push("kind", "spectrogram")?;
            c.push("input", p.display())?;
            c.push("frame_ms", a.frame_ms)?;
            c.push("shift_ms", a.shift_ms)?;
            let s = spectrogram(&read_wav(p)?, a.frame_ms * 1e-3, a.shift_ms * 1e-3)?;
            let file = std::fs::File::create(&a.out).map_err(|source| FvnError::Io {
                path: a.out.clone(),
                source,
            })?;
            s.write_csv(std::io::BufWriter::new(file)).map_err(|source| FvnError::Io {
                path: a.out.clone(),
                source,
            })?;
        }
        AnalysisKind::Levels => {
            let p = input()?;
            c.push("kind", "levels")?;
            c.push("input", p.display())?;
            let d = level_distribution(&read_wav(p)?)?;
            write_csv(&a.out, &["level", "cdf"], d.curve(2000).into_iter().map(|(l, f)| vec![l, f]))?;
            writeln!(out, "ks_distance={}", d.ks_distance_to_normal()).ok();
        }
        AnalysisKind::GroupDelay => {
            let p = input()?;
            c.push("kind", "group-delay")?;
            c.push("input", p.display())?;
            let (unit, _) = read_unit(p)?;
            let g = group_delay(&unit.phase);
            write_csv(
                &a.out,
                &["freq_hz", "tau_s"],
                g.frequencies.iter().zip(&g.tau_g).map(|(f, t)| vec![*f, *t]),
            )?;
        }
        AnalysisKind::Centroid => {
            let p = input()?;
            c.push("kind", "centroid")?;
            c.push("input", p.display())?;
            let r = centroid_identity_check(&read_wav(p)?)?;
            write_csv(&a.out, &["lhs", "rhs"], vec![vec![r.lhs, r.rhs]])?;
        }
    }
    save_provenance(&a.out, &c)
}
