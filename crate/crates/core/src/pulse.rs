//! Excitation pulses and the receive-side signal conditioning chain.
//!
//! The canonical processing order, fixed across the whole pipeline, is
//!
//! ```text
//! matched filter -> IQ demodulation -> decode -> beamform
//! ```
//!
//! The matched filter is a group-delay compensated cross-correlation: a trace
//! containing an exact pulse replica starting at time `t0` peaks at `t0` in
//! the output, so beamforming delays computed from geometry land on the
//! compressed peak. Demodulation mixes the trace down by the carrier,
//! low-passes with a Hann windowed-sinc FIR (group delay compensated) and
//! decimates; the removed carrier is recorded so the beamformer can rotate
//! interpolated baseband samples back into phase.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{FftNum, FftPlanner};

use crate::encoding::{DecodedAperture, EventChannelData};
use crate::error::{Error, Result};
use crate::num::Real;

// ---------------------------------------------------------------------------
// Pulse specification and synthesis
// ---------------------------------------------------------------------------

/// Window applied to a tone burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurstWindow {
    Rectangular,
    Hann,
}

/// Window applied to a linear chirp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChirpWindow<S> {
    Rectangular,
    /// Tapered cosine; `alpha` is the fraction of the duration spent inside
    /// the two cosine ramps (0 = rectangular, 1 = Hann).
    Tukey { alpha: S },
}

/// Transmit excitation description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseSpec<S> {
    /// `cycles` periods of a sine at `frequency`, windowed.
    ToneBurst {
        frequency: S,
        cycles: u32,
        window: BurstWindow,
    },
    /// Linear frequency sweep from `f_low` to `f_high` over `duration`.
    Chirp {
        f_low: S,
        f_high: S,
        duration: S,
        window: ChirpWindow<S>,
    },
}

/// A pulse sampled on a uniform grid, peak-normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform<S> {
    pub samples: Vec<S>,
    pub sample_rate: S,
}

impl<S: Real> PulseSpec<S> {
    /// Total duration of the excitation in seconds.
    pub fn duration(&self) -> S {
        match *self {
            PulseSpec::ToneBurst {
                frequency, cycles, ..
            } => S::of(cycles as f64) / frequency,
            PulseSpec::Chirp { duration, .. } => duration,
        }
    }

    /// Nominal spectral center: the tone frequency, or the arithmetic middle
    /// of the sweep.
    pub fn center_frequency(&self) -> S {
        match *self {
            PulseSpec::ToneBurst { frequency, .. } => frequency,
            PulseSpec::Chirp { f_low, f_high, .. } => (f_low + f_high) * S::of(0.5),
        }
    }

    /// Highest frequency present (nominally); used for Nyquist checks.
    pub fn max_frequency(&self) -> S {
        match *self {
            PulseSpec::ToneBurst { frequency, .. } => frequency,
            PulseSpec::Chirp { f_high, .. } => f_high,
        }
    }

    /// Rough two-sided bandwidth of the excitation, used to pick safe
    /// demodulation decimation factors: `2f/cycles` for a tone burst, the
    /// sweep width plus the inverse duration for a chirp.
    pub fn nominal_bandwidth(&self) -> S {
        match *self {
            PulseSpec::ToneBurst {
                frequency, cycles, ..
            } => S::of(2.0) * frequency / S::of(cycles as f64),
            PulseSpec::Chirp {
                f_low,
                f_high,
                duration,
                ..
            } => (f_high - f_low) + S::of(2.0) / duration,
        }
    }

    /// Checks the parameter domain (positive frequencies, increasing sweep,
    /// at least one cycle, sane Tukey fraction).
    pub fn validate(&self) -> Result<()> {
        match *self {
            PulseSpec::ToneBurst {
                frequency, cycles, ..
            } => {
                if !(frequency > S::zero()) {
                    return Err(Error::InvalidSpec("burst frequency must be positive".into()));
                }
                if cycles == 0 {
                    return Err(Error::InvalidSpec("burst needs at least one cycle".into()));
                }
            }
            PulseSpec::Chirp {
                f_low,
                f_high,
                duration,
                window,
            } => {
                if !(f_low > S::zero()) || !(f_high > f_low) {
                    return Err(Error::InvalidSpec(
                        "chirp needs 0 < f_low < f_high".into(),
                    ));
                }
                if !(duration > S::zero()) {
                    return Err(Error::InvalidSpec("chirp duration must be positive".into()));
                }
                if let ChirpWindow::Tukey { alpha } = window {
                    if alpha < S::zero() || alpha > S::one() {
                        return Err(Error::InvalidSpec(
                            "Tukey fraction must lie in [0, 1]".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn tukey_weight<S: Real>(u: S, alpha: S) -> S {
    // u in [0, 1]; cosine ramps over the first and last alpha/2.
    if alpha <= S::zero() {
        return S::one();
    }
    let half = alpha * S::of(0.5);
    let ramp = |v: S| S::of(0.5) * (S::one() - (S::PI() * (v / half - S::one())).cos());
    if u < half {
        ramp(u)
    } else if u > S::one() - half {
        ramp(S::one() - u)
    } else {
        S::one()
    }
}

/// Samples the excitation at `sample_rate` and peak-normalizes it.
///
/// Errors when the rate does not resolve the highest frequency present
/// (strictly more than two samples per period are required).
pub fn synthesize<S: Real>(spec: &PulseSpec<S>, sample_rate: S) -> Result<SampledWaveform<S>> {
    spec.validate()?;
    if !(sample_rate > S::of(2.0) * spec.max_frequency()) {
        return Err(Error::Undersampled(format!(
            "sample rate {} cannot represent content at {}",
            sample_rate,
            spec.max_frequency()
        )));
    }
    let duration = spec.duration();
    let n = (duration * sample_rate)
        .round()
        .to_usize()
        .ok_or_else(|| Error::InvalidSpec("pulse length overflows".into()))?;
    if n < 2 {
        return Err(Error::Undersampled(
            "pulse shorter than two samples".into(),
        ));
    }
    let mut samples = Vec::with_capacity(n);
    match *spec {
        PulseSpec::ToneBurst {
            frequency, window, ..
        } => {
            for k in 0..n {
                let t = S::of(k as f64) / sample_rate;
                let u = S::of(k as f64) / S::of(n as f64);
                let w = match window {
                    BurstWindow::Rectangular => S::one(),
                    BurstWindow::Hann => {
                        S::of(0.5) * (S::one() - (S::of(2.0) * S::PI() * u).cos())
                    }
                };
                samples.push(w * (S::of(2.0) * S::PI() * frequency * t).sin());
            }
        }
        PulseSpec::Chirp {
            f_low,
            f_high,
            duration,
            window,
        } => {
            let rate = (f_high - f_low) / duration;
            for k in 0..n {
                let t = S::of(k as f64) / sample_rate;
                let u = S::of(k as f64) / S::of(n as f64);
                let w = match window {
                    ChirpWindow::Rectangular => S::one(),
                    ChirpWindow::Tukey { alpha } => tukey_weight(u, alpha),
                };
                let phase = S::of(2.0) * S::PI() * (f_low * t + rate * t * t * S::of(0.5));
                samples.push(w * phase.sin());
            }
        }
    }
    let peak = samples
        .iter()
        .fold(S::zero(), |m, &x| if x.abs() > m { x.abs() } else { m });
    if !(peak > S::zero()) {
        return Err(Error::InvalidSpec("synthesized pulse is identically zero".into()));
    }
    for x in samples.iter_mut() {
        *x = *x / peak;
    }
    Ok(SampledWaveform {
        samples,
        sample_rate,
    })
}

// ---------------------------------------------------------------------------
// Matched filter
// ---------------------------------------------------------------------------

/// Group-delay compensated cross-correlation of a trace with the pulse.
///
/// Output sample `n` is `Σ_m trace[n+m] · pulse[m]` (zero beyond the ends):
/// a replica starting at sample `n0` therefore peaks exactly at `n0` with the
/// pulse energy as peak value. Output length equals input length. No
/// amplitude normalization is applied.
pub fn matched_filter<S: Real>(
    trace: &[S],
    trace_rate: S,
    pulse: &SampledWaveform<S>,
) -> Result<Vec<S>> {
    let rel = ((trace_rate - pulse.sample_rate) / pulse.sample_rate).abs();
    if !(rel < S::of(1e-9)) {
        return Err(Error::SampleRateMismatch(format!(
            "trace at {} vs pulse at {}",
            trace_rate, pulse.sample_rate
        )));
    }
    if pulse.samples.is_empty() {
        return Err(Error::EmptyInput("matched filter needs a pulse".into()));
    }
    if pulse.samples.len() > trace.len() {
        return Err(Error::DimensionMismatch(format!(
            "pulse ({} samples) longer than trace ({})",
            pulse.samples.len(),
            trace.len()
        )));
    }
    let n = trace.len();
    let p = pulse.samples.len();
    let mut out = vec![S::zero(); n];
    for (i, o) in out.iter_mut().enumerate() {
        let take = p.min(n - i);
        let mut acc = S::zero();
        for m in 0..take {
            acc += trace[i + m] * pulse.samples[m];
        }
        *o = acc;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// IQ demodulation
// ---------------------------------------------------------------------------

/// Complex baseband result of [`demodulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated<S> {
    pub samples: Vec<Complex<S>>,
    /// Sample rate after decimation.
    pub sample_rate: S,
    /// Carrier that was removed; needed for phase-correct interpolation.
    pub carrier: S,
}

/// Hann windowed-sinc low-pass taps: length `8·fs/f0` rounded up to odd,
/// unit DC gain. The cutoff is the post-decimation Nyquist or the carrier,
/// whichever is lower — capping at the carrier keeps the double-frequency
/// mixing image (at `2·f0` after downmixing) in the stopband even when the
/// decimated band would admit it.
fn lowpass_taps<S: Real>(f0: S, fs: S, decimation: usize) -> Vec<S> {
    let len_f = (S::of(8.0) * fs / f0).round();
    let mut len = len_f.to_usize().unwrap_or(9).max(3);
    if len % 2 == 0 {
        len += 1;
    }
    let mid = (len / 2) as isize;
    let cutoff = (fs / (S::of(2.0) * S::of(decimation as f64))).min(f0);
    let two = S::of(2.0);
    let mut taps = Vec::with_capacity(len);
    for k in 0..len as isize {
        let d = S::of((k - mid) as f64);
        // sinc(2 fc d / fs), with the removable singularity at d = 0.
        let arg = two * cutoff * d / fs;
        let sinc = if d == S::zero() {
            S::one()
        } else {
            (S::PI() * arg).sin() / (S::PI() * arg)
        };
        let u = S::of(k as f64) / S::of((len - 1) as f64);
        let hann = S::of(0.5) * (S::one() - (two * S::PI() * u).cos());
        taps.push(sinc * hann);
    }
    let sum: S = taps.iter().fold(S::zero(), |a, &b| a + b);
    for t in taps.iter_mut() {
        *t = *t / sum;
    }
    taps
}

/// Mixes a real trace down by `f0`, low-passes and decimates.
///
/// The phase reference is the trace's first sample (time 0); callers whose
/// traces start at a non-zero time must rotate the result by
/// `exp(-i 2π f0 t0)` themselves (the container-level helpers do).
/// The low-pass is a linear-phase FIR applied center-aligned, so no group
/// delay is introduced, and decimation keeps samples `0, D, 2D, …` so the
/// time of sample 0 is unchanged.
///
/// `fs/decimation` must strictly exceed `f0`; that guards carrier-scale
/// bandwidth against aliasing. Callers with known narrower signals may
/// decimate up to that limit; the pipeline additionally checks the pulse's
/// nominal bandwidth before choosing a decimation.
pub fn demodulate<S: Real>(
    trace: &[S],
    f0: S,
    fs: S,
    decimation: usize,
) -> Result<Demodulated<S>> {
    if decimation == 0 {
        return Err(Error::InvalidSpec("decimation must be at least 1".into()));
    }
    if !(f0 > S::zero()) || !(fs > S::of(2.0) * f0) {
        return Err(Error::Undersampled(format!(
            "carrier {} not below Nyquist of {}",
            f0, fs
        )));
    }
    if fs / S::of(decimation as f64) <= f0 {
        return Err(Error::Undersampled(format!(
            "decimation by {} would alias carrier-scale bandwidth",
            decimation
        )));
    }
    if trace.is_empty() {
        return Err(Error::EmptyInput("demodulation needs samples".into()));
    }
    let two_pi = S::of(2.0) * S::PI();
    let mixed: Vec<Complex<S>> = trace
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let (sin, cos) = (-two_pi * f0 * S::of(k as f64) / fs).sin_cos();
            Complex::new(x * cos, x * sin)
        })
        .collect();
    let taps = lowpass_taps(f0, fs, decimation);
    let mid = taps.len() / 2;
    let n = trace.len();
    let kept = (n + decimation - 1) / decimation;
    let mut samples = Vec::with_capacity(kept);
    for out_idx in 0..kept {
        let center = out_idx * decimation;
        let mut acc = Complex::new(S::zero(), S::zero());
        for (j, &w) in taps.iter().enumerate() {
            // Center-aligned convolution with zero padding at the edges.
            let k = center as isize + j as isize - mid as isize;
            if k >= 0 && (k as usize) < n {
                acc = acc + mixed[k as usize].scale(w);
            }
        }
        samples.push(acc);
    }
    Ok(Demodulated {
        samples,
        sample_rate: fs / S::of(decimation as f64),
        carrier: f0,
    })
}

// ---------------------------------------------------------------------------
// Analytic envelope
// ---------------------------------------------------------------------------

/// Envelope of a real trace via the analytic signal (FFT, one-sided spectrum
/// doubled, inverse FFT, modulus).
pub fn analytic_envelope<S: Real + FftNum>(trace: &[S]) -> Vec<S> {
    let n = trace.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<S>> = trace.iter().map(|&x| Complex::new(x, S::zero())).collect();
    fft.process(&mut buf);
    let two = S::of(2.0);
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            // DC (and Nyquist for even lengths) stay as they are.
        } else if k < (n + 1) / 2 {
            *v = v.scale(two);
        } else {
            *v = Complex::new(S::zero(), S::zero());
        }
    }
    ifft.process(&mut buf);
    let inv_n = S::one() / S::of(n as f64);
    buf.iter().map(|v| v.norm() * inv_n).collect()
}

// ---------------------------------------------------------------------------
// Batch conditioning of trace containers
// ---------------------------------------------------------------------------

/// Knobs for the canonical receive chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessingOptions {
    /// Apply the matched filter before demodulation.
    pub matched_filter: bool,
    /// Decimation factor of the IQ stage (1 keeps the original rate).
    pub decimation: usize,
}

impl Default for ProcessingOptions {
    fn default() -> Self {
        ProcessingOptions {
            matched_filter: true,
            decimation: 1,
        }
    }
}

fn condition_traces<S: Real>(
    data: &[S],
    samples: usize,
    sample_rate: S,
    t0: S,
    pulse: &SampledWaveform<S>,
    f0: S,
    opts: ProcessingOptions,
) -> Result<(Vec<Complex<S>>, usize, S)> {
    // Work out the post-decimation trace length from a probe of the first
    // trace, then run every trace in parallel; traces are independent.
    let two_pi = S::of(2.0) * S::PI();
    let (phase_sin, phase_cos) = (-two_pi * f0 * t0).sin_cos();
    let t0_rot = Complex::new(phase_cos, phase_sin);
    let run_one = |trace: &[S]| -> Result<Vec<Complex<S>>> {
        let filtered;
        let stage: &[S] = if opts.matched_filter {
            filtered = matched_filter(trace, sample_rate, pulse)?;
            &filtered
        } else {
            trace
        };
        let demod = demodulate(stage, f0, sample_rate, opts.decimation)?;
        Ok(demod.samples.iter().map(|&z| z * t0_rot).collect())
    };
    let first = run_one(&data[..samples])?;
    let out_len = first.len();
    let traces = data.len() / samples;
    let mut out = vec![Complex::new(S::zero(), S::zero()); traces * out_len];
    out[..out_len].copy_from_slice(&first);
    let results: Result<Vec<()>> = out[out_len..]
        .par_chunks_mut(out_len)
        .zip(data[samples..].par_chunks(samples))
        .map(|(dst, src)| {
            let v = run_one(src)?;
            dst.copy_from_slice(&v);
            Ok(())
        })
        .collect();
    results?;
    let new_rate = sample_rate / S::of(opts.decimation as f64);
    Ok((out, out_len, new_rate))
}

/// Runs matched filtering and demodulation over every trace of an
/// event-domain container. The result carries the carrier for the
/// beamformer's phase rotation.
pub fn process_events<S: Real>(
    data: &EventChannelData<S>,
    pulse: &SampledWaveform<S>,
    f0: S,
    opts: ProcessingOptions,
) -> Result<EventChannelData<Complex<S>>> {
    data.validate()?;
    let (out, out_len, rate) = condition_traces(
        &data.data,
        data.samples,
        data.sample_rate,
        data.t0,
        pulse,
        f0,
        opts,
    )?;
    Ok(EventChannelData {
        events: data.events,
        channels: data.channels,
        samples: out_len,
        sample_rate: rate,
        t0: data.t0,
        carrier: Some(f0),
        data: out,
    })
}

/// Same conditioning for per-crossing containers (used when processing
/// directly simulated patch signals for reference reconstructions).
pub fn process_aperture<S: Real>(
    data: &DecodedAperture<S>,
    pulse: &SampledWaveform<S>,
    f0: S,
    opts: ProcessingOptions,
) -> Result<DecodedAperture<Complex<S>>> {
    data.validate()?;
    let (out, out_len, rate) = condition_traces(
        &data.data,
        data.samples,
        data.sample_rate,
        data.t0,
        pulse,
        f0,
        opts,
    )?;
    Ok(DecodedAperture {
        rows: data.rows,
        cols: data.cols,
        samples: out_len,
        sample_rate: rate,
        t0: data.t0,
        carrier: Some(f0),
        data: out,
    })
}
