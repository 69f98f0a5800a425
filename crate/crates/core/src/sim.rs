//! Linear point-scatterer wavefield model for row-column acquisitions.
//!
//! [`simulate_patch_signals`] produces the pre-encoding per-crossing traces
//! `s_rc(t)`: every transmitting row is discretized into one point
//! sub-element per crossing, and every (scatterer, transmit sub-element,
//! receive crossing) triple contributes
//!
//! ```text
//! polarity[r'] · a_k · D_tx · D_rx / (d_tx · d_rx) · pulse(t − arrival)
//! arrival = row_delay[r'] + (d_tx + d_rx) / c
//! ```
//!
//! The triple sum is evaluated in two algebraically exact stages: per
//! scatterer, all transmit legs are condensed into one incident waveform
//! `τ_k(t)`; per receive crossing, every `τ_k` is delayed, weighted and
//! accumulated. This turns `O(K·(RC)²)` work into `O(K·RC)` passes. Fractional
//! delays are resolved by linear interpolation of the waveform, once per
//! stage.
//!
//! Bias is *not* part of the wavefield: [`measure_event`] mixes patch traces
//! into physical column measurements with the event's bias vector, and
//! [`run_acquisition`] drives whole event sequences while caching wavefield
//! simulations across events whose effective transmit (delay profile and
//! polarity·bias pattern) is identical — a Hadamard receive set then costs a
//! single simulation.
//!
//! Parallelism is over scatterers (incident waveforms) and over receive rows
//! (output traces); every output trace accumulates its scatterer
//! contributions in a fixed order, so results are bit-identical for any
//! thread count.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::encoding::{DecodedAperture, EventChannelData};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, MediumSpec};
use crate::num::{distance, Real};
use crate::pulse::{synthesize, PulseSpec};

// ---------------------------------------------------------------------------
// Scatterer fields
// ---------------------------------------------------------------------------

/// A set of point scatterers in front of the aperture plane.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScattererField<S> {
    /// Positions in meters; the aperture lies in the z = 0 plane.
    pub positions: Vec<[S; 3]>,
    /// Reflectivity per scatterer, arbitrary linear units.
    pub amplitudes: Vec<S>,
}

impl<S: Real> ScattererField<S> {
    pub fn new() -> Self {
        ScattererField {
            positions: Vec::new(),
            amplitudes: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        ScattererField {
            positions: Vec::with_capacity(n),
            amplitudes: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, position: [S; 3], amplitude: S) {
        self.positions.push(position);
        self.amplitudes.push(amplitude);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks the container invariants: matching lengths, finite values and
    /// strictly positive depth for every scatterer.
    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions vs {} amplitudes",
                self.positions.len(),
                self.amplitudes.len()
            )));
        }
        for (i, p) in self.positions.iter().enumerate() {
            if !(p[2] > S::zero()) {
                return Err(Error::InvalidSpec(format!(
                    "scatterer {} has depth {} but must lie at z > 0",
                    i, p[2]
                )));
            }
            if !(p[0].is_finite() && p[1].is_finite() && p[2].is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "scatterer {} has a non-finite coordinate",
                    i
                )));
            }
        }
        if self.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidSpec(
                "scatterer amplitudes must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Serializes to the plain-text exchange format: one `x y z amplitude`
    /// line per scatterer, SI units.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# point scatterers: x y z amplitude (meters, linear reflectivity)\n");
        for (p, a) in self.positions.iter().zip(self.amplitudes.iter()) {
            let _ = writeln!(out, "{} {} {} {}", p[0], p[1], p[2], a);
        }
        out
    }

    /// Parses the plain-text format; `#` starts a comment, blank lines are
    /// skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut field = ScattererField::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse(format!(
                    "line {}: expected 4 fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let mut vals = [S::zero(); 4];
            for (v, f) in vals.iter_mut().zip(fields.iter()) {
                let x: f64 = f.parse().map_err(|_| {
                    Error::Parse(format!("line {}: invalid number {:?}", lineno + 1, f))
                })?;
                *v = S::of(x);
            }
            field.push([vals[0], vals[1], vals[2]], vals[3]);
        }
        field.validate()?;
        Ok(field)
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

// ---------------------------------------------------------------------------
// Transmit events and directivity
// ---------------------------------------------------------------------------

/// One transmit-receive event: per-row drive polarity and delay, the shared
/// excitation, and the bias pattern under which the columns are read out.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitEvent<S> {
    /// Drive sign per row: +1, -1, or 0 for an idle row.
    pub row_polarity: Vec<i8>,
    /// Transmit delay per row, seconds, all ≥ 0.
    pub row_delay: Vec<S>,
    pub pulse: PulseSpec<S>,
    /// Bias sign per row applied during receive: +1, -1, or 0.
    pub bias: Vec<i8>,
}

impl<S: Real> TransmitEvent<S> {
    /// All rows driven with +1, zero delay, all-ones bias: the unencoded
    /// broadside reference event.
    pub fn broadside(rows: usize, pulse: PulseSpec<S>) -> Self {
        TransmitEvent {
            row_polarity: vec![1; rows],
            row_delay: vec![S::zero(); rows],
            pulse,
            bias: vec![1; rows],
        }
    }

    /// Checks vector lengths against the row count, sign domains, delay
    /// positivity, and that at least one row transmits.
    pub fn validate(&self, rows: usize) -> Result<()> {
        if self.row_polarity.len() != rows
            || self.row_delay.len() != rows
            || self.bias.len() != rows
        {
            return Err(Error::DimensionMismatch(format!(
                "event vectors ({}, {}, {}) must all have row count {}",
                self.row_polarity.len(),
                self.row_delay.len(),
                self.bias.len(),
                rows
            )));
        }
        if self
            .row_polarity
            .iter()
            .chain(self.bias.iter())
            .any(|&v| v < -1 || v > 1)
        {
            return Err(Error::InvalidSpec(
                "polarity and bias entries must be -1, 0 or +1".into(),
            ));
        }
        if self.row_polarity.iter().all(|&v| v == 0) {
            return Err(Error::InvalidSpec(
                "at least one row must transmit".into(),
            ));
        }
        if self.row_delay.iter().any(|d| !(*d >= S::zero()) || !d.is_finite()) {
            return Err(Error::InvalidSpec(
                "row delays must be finite and non-negative".into(),
            ));
        }
        self.pulse.validate()
    }

    /// The physically radiated sign per row: drive polarity times bias,
    /// since the bias also flips the element's transmit sensitivity.
    pub fn effective_polarity(&self) -> Vec<i8> {
        self.row_polarity
            .iter()
            .zip(self.bias.iter())
            .map(|(&p, &b)| p * b)
            .collect()
    }
}

/// Angular response of a single sub-element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directivity {
    /// Unit response in every direction; keeps algebraic cross-checks exact.
    Omni,
    /// Far-field factor of a square element of side `pitch − kerf` in a hard
    /// baffle: `sinc(w·sinφ/λ)·cosφ`, with φ measured from the surface
    /// normal and λ taken at the excitation's center frequency.
    BaffledRect,
}

impl Directivity {
    /// Response for a ray with transverse offset² `rho2`, depth `z`, and
    /// length `d` (all meters); `w_over_lambda` is the element width in
    /// wavelengths.
    #[inline]
    fn weight<S: Real>(self, rho2: S, z: S, d: S, w_over_lambda: S) -> S {
        match self {
            Directivity::Omni => S::one(),
            Directivity::BaffledRect => {
                let sin_phi = rho2.sqrt() / d;
                let cos_phi = z / d;
                let x = w_over_lambda * sin_phi;
                let sinc = if x == S::zero() {
                    S::one()
                } else {
                    let px = S::PI() * x;
                    px.sin() / px
                };
                sinc * cos_phi
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Time-span accounting
// ---------------------------------------------------------------------------

/// Largest distance from a point to the crossing grid; attained at one of
/// the four corner crossings.
fn max_distance_to_aperture<S: Real>(geom: &ArrayGeometry<S>, p: [S; 3]) -> S {
    let mut worst = S::zero();
    for &r in &[0, geom.rows - 1] {
        for &c in &[0, geom.cols - 1] {
            let corner = geom
                .crossing_position(r, c)
                .expect("corner indices are in range");
            let d = distance(p, corner);
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Shortest trace duration that captures every echo of every event without
/// truncation: worst-case transmit delay plus two-way travel to the farthest
/// scatterer plus the excitation length.
pub fn required_t_span<S: Real>(
    geom: &ArrayGeometry<S>,
    events: &[TransmitEvent<S>],
    field: &ScattererField<S>,
    medium: &MediumSpec<S>,
) -> Result<S> {
    geom.validate()?;
    medium.validate()?;
    field.validate()?;
    if events.is_empty() {
        return Err(Error::EmptyInput("no transmit events".into()));
    }
    let mut worst = S::zero();
    for event in events {
        event.validate(geom.rows)?;
        let max_delay = event
            .row_delay
            .iter()
            .zip(event.row_polarity.iter())
            .filter(|(_, &p)| p != 0)
            .map(|(d, _)| *d)
            .fold(S::zero(), |a, b| if b > a { b } else { a });
        let dur = event.pulse.duration();
        for p in &field.positions {
            let d = max_distance_to_aperture(geom, *p);
            let t = max_delay + (d + d) / medium.speed_of_sound + dur;
            if t > worst {
                worst = t;
            }
        }
        // With no scatterers the trace only needs the excitation itself.
        let t = max_delay + dur;
        if t > worst {
            worst = t;
        }
    }
    Ok(worst)
}

/// [`required_t_span`] plus a few samples of headroom; convenient for
/// callers that do not want to pick a span manually.
pub fn auto_t_span<S: Real>(
    geom: &ArrayGeometry<S>,
    events: &[TransmitEvent<S>],
    field: &ScattererField<S>,
    medium: &MediumSpec<S>,
) -> Result<S> {
    let req = required_t_span(geom, events, field, medium)?;
    Ok(req + S::of(8.0) / medium.sampling_frequency)
}

// ---------------------------------------------------------------------------
// Patch-signal simulation
// ---------------------------------------------------------------------------

/// Incident waveform at one scatterer, stored compactly: sample `i` of
/// `samples` lives at global time `(start + i) / fs`.
struct IncidentWave<S> {
    start: usize,
    samples: Vec<S>,
}

/// Adds `g·((1−f)·tau[i] + f·tau[i−1])` into `trace[base + i]` for
/// `i = 0..=tau.len()`: a linearly interpolated, delayed copy of `tau`.
/// Writes past the trace end are dropped; the span check makes any nonzero
/// sample there unreachable, so only guard-band zeros are ever clipped.
#[inline]
fn accumulate_delayed<S: Real>(trace: &mut [S], base: usize, tau: &[S], g: S, f: S) {
    if base >= trace.len() || tau.is_empty() {
        return;
    }
    let w0 = g * (S::one() - f);
    let w1 = g * f;
    let dst = &mut trace[base..];
    dst[0] += w0 * tau[0];
    let mid_end = tau.len().min(dst.len());
    for i in 1..mid_end {
        dst[i] += w0 * tau[i] + w1 * tau[i - 1];
    }
    if tau.len() < dst.len() {
        dst[tau.len()] += w1 * tau[tau.len() - 1];
    }
}

/// Simulates the pre-encoding patch dataset `s_rc(t)` for one transmit event.
///
/// Traces start at t = 0 (the transmit trigger) and are sampled at the
/// medium's sampling frequency; `t_span` sets their duration and must cover
/// the farthest echo ([`required_t_span`]), otherwise
/// [`Error::TimeSpanTooShort`] is returned rather than silently clipping.
///
/// The event's bias vector plays no role here: patch signals are the
/// quantity the encoding model mixes, not the physical measurement.
pub fn simulate_patch_signals<S: Real>(
    geom: &ArrayGeometry<S>,
    event: &TransmitEvent<S>,
    field: &ScattererField<S>,
    medium: &MediumSpec<S>,
    t_span: S,
    directivity: Directivity,
) -> Result<DecodedAperture<S>> {
    geom.validate()?;
    medium.validate()?;
    field.validate()?;
    event.validate(geom.rows)?;
    if !(t_span > S::zero()) || !t_span.is_finite() {
        return Err(Error::InvalidSpec("t_span must be positive".into()));
    }
    let required = required_t_span(geom, std::slice::from_ref(event), field, medium)?;
    if t_span < required {
        return Err(Error::TimeSpanTooShort(format!(
            "t_span {:.3e} s truncates echoes; at least {:.3e} s required",
            t_span.to_f64().unwrap_or(f64::NAN),
            required.to_f64().unwrap_or(f64::NAN)
        )));
    }

    let fs = medium.sampling_frequency;
    let c = medium.speed_of_sound;
    // A few guard samples absorb floor/ceil rounding of the window bounds.
    let samples = (t_span * fs)
        .ceil()
        .to_usize()
        .ok_or_else(|| Error::InvalidSpec("t_span overflows the sample index range".into()))?
        + 4;
    let mut out = DecodedAperture::<S>::zeroed(geom.rows, geom.cols, samples, fs);
    if field.is_empty() {
        return Ok(out);
    }

    let pulse = synthesize(&event.pulse, fs)?;
    let xs: Vec<S> = (0..geom.cols)
        .map(|col| geom.column_x(col))
        .collect::<Result<_>>()?;
    let ys: Vec<S> = (0..geom.rows)
        .map(|row| geom.row_y(row))
        .collect::<Result<_>>()?;
    let w_over_lambda =
        geom.element_width() * event.pulse.center_frequency() / medium.speed_of_sound;
    let active: Vec<usize> = (0..geom.rows)
        .filter(|&r| event.row_polarity[r] != 0)
        .collect();
    let min_delay = active
        .iter()
        .map(|&r| event.row_delay[r])
        .fold(S::infinity(), |a, b| if b < a { b } else { a });
    let max_delay = active
        .iter()
        .map(|&r| event.row_delay[r])
        .fold(S::zero(), |a, b| if b > a { b } else { a });

    // Stage 1: incident waveform at every scatterer, parallel over
    // scatterers. τ_k(t) = Σ_{r',c'} polarity · D/d · pulse(t − delay − d/c).
    let waves: Vec<IncidentWave<S>> = field
        .positions
        .par_iter()
        .map(|&p| {
            let pz = p[2];
            let pz2 = pz * pz;
            let d_far = max_distance_to_aperture(geom, p);
            // Earliest arrival ≥ min_delay + depth/c; latest ≤ max_delay +
            // d_far/c plus the pulse itself.
            let t_lo = min_delay + pz / c;
            let t_hi = max_delay + d_far / c;
            let start = (t_lo * fs).floor().to_usize().unwrap_or(0);
            let end = (t_hi * fs).ceil().to_usize().unwrap_or(start) + pulse.samples.len() + 2;
            let mut buf = vec![S::zero(); end - start + 1];
            let start_f = S::of(start as f64);
            for &r in &active {
                let pol = S::of(event.row_polarity[r] as f64);
                let delay = event.row_delay[r];
                let dy = p[1] - ys[r];
                let dy2 = dy * dy;
                for &x in &xs {
                    let dx = p[0] - x;
                    let rho2 = dx * dx + dy2;
                    let d = (rho2 + pz2).sqrt();
                    let dir = directivity.weight(rho2, pz, d, w_over_lambda);
                    let g = pol * dir / d;
                    let u = (delay + d / c) * fs - start_f;
                    let i0 = u.floor();
                    let f = u - i0;
                    let i0 = i0.to_usize().unwrap_or(0);
                    let w0 = g * (S::one() - f);
                    let w1 = g * f;
                    let n_p = pulse.samples.len();
                    let dst = &mut buf[i0..i0 + n_p + 1];
                    for (b, &pm) in dst[..n_p].iter_mut().zip(pulse.samples.iter()) {
                        *b += w0 * pm;
                    }
                    for (b, &pm) in dst[1..].iter_mut().zip(pulse.samples.iter()) {
                        *b += w1 * pm;
                    }
                }
            }
            IncidentWave {
                start,
                samples: buf,
            }
        })
        .collect();

    // Stage 2: delay, weight and accumulate every incident waveform into
    // every receive crossing, parallel over rows. Each trace sums its
    // scatterer contributions in index order, so the result does not depend
    // on the thread count.
    let row_block = geom.cols * samples;
    let fs_over_c = fs / c;
    out.data
        .par_chunks_mut(row_block)
        .enumerate()
        .for_each(|(r, row)| {
            let yr = ys[r];
            for (k, wave) in waves.iter().enumerate() {
                let p = field.positions[k];
                let amp = field.amplitudes[k];
                let dy = p[1] - yr;
                let dy2 = dy * dy;
                let pz2 = p[2] * p[2];
                for (ci, &x) in xs.iter().enumerate() {
                    let dx = p[0] - x;
                    let rho2 = dx * dx + dy2;
                    let d = (rho2 + pz2).sqrt();
                    let dir = directivity.weight(rho2, p[2], d, w_over_lambda);
                    let g = amp * dir / d;
                    let u = d * fs_over_c;
                    let j0 = u.floor();
                    let f = u - j0;
                    let base = wave.start + j0.to_usize().unwrap_or(0);
                    let trace = &mut row[ci * samples..(ci + 1) * samples];
                    accumulate_delayed(trace, base, &wave.samples, g, f);
                }
            }
        });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Measurement and acquisition
// ---------------------------------------------------------------------------

/// Mixes patch signals into the physical column readout of one event:
/// `g_c(t) = Σ_r bias[r] · s_rc(t)`, summed in row order.
pub fn measure_event<S: Real>(
    patch: &DecodedAperture<S>,
    event: &TransmitEvent<S>,
) -> Result<EventChannelData<S>> {
    patch.validate()?;
    if event.bias.len() != patch.rows {
        return Err(Error::DimensionMismatch(format!(
            "bias vector length {} vs {} rows",
            event.bias.len(),
            patch.rows
        )));
    }
    let mut out = EventChannelData::<S>::zeroed(1, patch.cols, patch.samples, patch.sample_rate);
    out.t0 = patch.t0;
    out.carrier = patch.carrier;
    let block = patch.cols * patch.samples;
    for r in 0..patch.rows {
        let src = &patch.data[r * block..(r + 1) * block];
        match event.bias[r] {
            1 => {
                for (d, s) in out.data.iter_mut().zip(src.iter()) {
                    *d += *s;
                }
            }
            -1 => {
                for (d, s) in out.data.iter_mut().zip(src.iter()) {
                    *d -= *s;
                }
            }
            0 => {}
            other => {
                return Err(Error::InvalidSpec(format!(
                    "bias entry {} is not -1, 0 or +1",
                    other
                )))
            }
        }
    }
    Ok(out)
}

/// Result of driving a full event sequence.
#[derive(Debug, Clone)]
pub struct Acquisition<S: Real> {
    /// Concatenated column measurements, one event slice per sequence entry.
    pub data: EventChannelData<S>,
    /// Number of distinct wavefield simulations that were actually run;
    /// encoded sets re-use one simulation for all their events.
    pub patch_sim_count: usize,
}

fn cache_key<S: Real>(event: &TransmitEvent<S>) -> (Vec<u64>, Vec<i8>) {
    let delays = event
        .row_delay
        .iter()
        .map(|d| d.to_f64().unwrap_or(f64::NAN).to_bits())
        .collect();
    (delays, event.effective_polarity())
}

/// Runs every event of a sequence against one scatterer field.
///
/// Wavefield simulations are cached by effective transmit — the delay
/// profile together with the elementwise polarity·bias product, which is the
/// sign pattern the elements physically radiate. All events of a Hadamard
/// receive set share an all-ones effective transmit per angle, so an E-event
/// set costs exactly one simulation.
pub fn run_acquisition<S: Real>(
    geom: &ArrayGeometry<S>,
    events: &[TransmitEvent<S>],
    field: &ScattererField<S>,
    medium: &MediumSpec<S>,
    t_span: S,
    directivity: Directivity,
) -> Result<Acquisition<S>> {
    if events.is_empty() {
        return Err(Error::EmptyInput("no transmit events".into()));
    }
    for event in events {
        event.validate(geom.rows)?;
        if event.pulse != events[0].pulse {
            return Err(Error::InvalidSpec(
                "all events of a sequence must share one excitation".into(),
            ));
        }
    }
    // Patches are large (rows x cols x samples); count how often each
    // effective transmit recurs so single-use patches are never retained and
    // shared ones are dropped right after their last event.
    let mut remaining: HashMap<(Vec<u64>, Vec<i8>), usize> = HashMap::new();
    for event in events {
        *remaining.entry(cache_key(event)).or_insert(0) += 1;
    }
    let mut cache: HashMap<(Vec<u64>, Vec<i8>), DecodedAperture<S>> = HashMap::new();
    let mut out: Option<EventChannelData<S>> = None;
    let mut sim_count = 0usize;
    for (e, event) in events.iter().enumerate() {
        let key = cache_key(event);
        let uses_left = remaining
            .get_mut(&key)
            .expect("every event key was counted");
        *uses_left -= 1;
        let fresh;
        let patch = match cache.get(&key) {
            Some(cached) => cached,
            None => {
                let effective = TransmitEvent {
                    row_polarity: event.effective_polarity(),
                    row_delay: event.row_delay.clone(),
                    pulse: event.pulse,
                    bias: event.bias.clone(),
                };
                let patch =
                    simulate_patch_signals(geom, &effective, field, medium, t_span, directivity)?;
                sim_count += 1;
                if *uses_left > 0 {
                    cache.entry(key.clone()).or_insert(patch)
                } else {
                    fresh = patch;
                    &fresh
                }
            }
        };
        let slice = measure_event(patch, event)?;
        if *uses_left == 0 {
            cache.remove(&key);
        }
        let dst = out.get_or_insert_with(|| {
            EventChannelData::zeroed(
                events.len(),
                slice.channels,
                slice.samples,
                slice.sample_rate,
            )
        });
        let block = dst.channels * dst.samples;
        dst.data[e * block..(e + 1) * block].copy_from_slice(&slice.data);
    }
    Ok(Acquisition {
        data: out.expect("at least one event"),
        patch_sim_count: sim_count,
    })
}
