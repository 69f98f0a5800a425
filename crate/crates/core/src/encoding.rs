//! Receive-aperture encoding: Hadamard bias schedules, the event-domain
//! mixing model and its inverse.
//!
//! With every column receiving while the row biases follow a ±1 code, event
//! `e` measures on column `c`
//!
//! ```text
//! g[e][c](t) = Σ_r H[r][e] · s[r][c](t)
//! ```
//!
//! where `s[r][c]` is the signal the single crossing `(r, c)` would have
//! received on its own. For a Hadamard `H` the inverse is `Hᵀ / E`, applied
//! here as a fast Walsh-Hadamard transform along the event axis, so a full
//! decode costs `O(E log E)` per `(channel, sample)` pair instead of `O(E²)`.
//!
//! Containers for both sides of the transform live here as well; they are
//! generic over [`Sample`] because decode is applied elementwise over time
//! and works identically on raw RF (real) and demodulated baseband (complex).

use crate::error::{Error, Result};
use crate::num::{Real, Sample};

// ---------------------------------------------------------------------------
// Trace containers
// ---------------------------------------------------------------------------

/// Per-event, per-column receive traces: the quantity actually digitized.
///
/// Layout is `[event][channel][sample]`, row-major and contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct EventChannelData<X: Sample> {
    pub events: usize,
    pub channels: usize,
    pub samples: usize,
    /// Samples per second of the time axis.
    pub sample_rate: X::Scalar,
    /// Time of sample 0, in seconds from the transmit trigger.
    pub t0: X::Scalar,
    /// Carrier removed by demodulation, if this is baseband data.
    pub carrier: Option<X::Scalar>,
    pub data: Vec<X>,
}

/// Per-crossing traces: one trace per `(row, column)` virtual element.
///
/// This is both the output of decoding and the natural container for
/// directly simulated patch signals (the pre-encoding ground truth).
/// Layout is `[row][column][sample]`, row-major and contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedAperture<X: Sample> {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub sample_rate: X::Scalar,
    pub t0: X::Scalar,
    pub carrier: Option<X::Scalar>,
    pub data: Vec<X>,
}

macro_rules! impl_trace_container {
    ($name:ident, $d0:ident, $d1:ident) => {
        impl<X: Sample> $name<X> {
            /// All-zero container with the given shape and time base.
            pub fn zeroed(
                $d0: usize,
                $d1: usize,
                samples: usize,
                sample_rate: X::Scalar,
            ) -> Self {
                Self {
                    $d0,
                    $d1,
                    samples,
                    sample_rate,
                    t0: <X::Scalar as num_traits::Zero>::zero(),
                    carrier: None,
                    data: vec![X::zero(); $d0 * $d1 * samples],
                }
            }

            /// Checks that the flat buffer matches the declared shape.
            pub fn validate(&self) -> Result<()> {
                let want = self.$d0 * self.$d1 * self.samples;
                if self.data.len() != want {
                    return Err(Error::DimensionMismatch(format!(
                        "buffer holds {} samples, shape needs {}",
                        self.data.len(),
                        want
                    )));
                }
                if !(self.sample_rate > <X::Scalar as num_traits::Zero>::zero()) {
                    return Err(Error::InvalidSpec("sample rate must be positive".into()));
                }
                Ok(())
            }

            /// Flat offset of trace `($d0, $d1)`.
            #[inline]
            pub fn trace_offset(&self, a: usize, b: usize) -> usize {
                (a * self.$d1 + b) * self.samples
            }

            /// Immutable view of one trace.
            #[inline]
            pub fn trace(&self, a: usize, b: usize) -> &[X] {
                let o = self.trace_offset(a, b);
                &self.data[o..o + self.samples]
            }

            /// Mutable view of one trace.
            #[inline]
            pub fn trace_mut(&mut self, a: usize, b: usize) -> &mut [X] {
                let o = self.trace_offset(a, b);
                &mut self.data[o..o + self.samples]
            }

            /// Largest sample magnitude in the container (0 when empty).
            pub fn peak_magnitude(&self) -> X::Scalar {
                self.data
                    .iter()
                    .map(|x| x.magnitude())
                    .fold(<X::Scalar as num_traits::Zero>::zero(), |a, b| {
                        if b > a {
                            b
                        } else {
                            a
                        }
                    })
            }
        }
    };
}

impl_trace_container!(EventChannelData, events, channels);
impl_trace_container!(DecodedAperture, rows, cols);

impl<X: Sample> EventChannelData<X> {
    /// Copies a contiguous run of events into a standalone container,
    /// keeping the time base. Used to split an acquisition into the
    /// per-dataset groups that decode and beamform independently.
    pub fn slice_events(&self, range: core::ops::Range<usize>) -> Result<Self> {
        self.validate()?;
        if range.start >= range.end || range.end > self.events {
            return Err(Error::IndexOutOfRange(format!(
                "event range {}..{} out of {} events",
                range.start, range.end, self.events
            )));
        }
        let block = self.channels * self.samples;
        Ok(Self {
            events: range.end - range.start,
            channels: self.channels,
            samples: self.samples,
            sample_rate: self.sample_rate,
            t0: self.t0,
            carrier: self.carrier,
            data: self.data[range.start * block..range.end * block].to_vec(),
        })
    }
}

// ---------------------------------------------------------------------------
// Encoding matrix
// ---------------------------------------------------------------------------

/// Square ±1 encoding matrix; entry `[r][e]` is the bias of row `r` during
/// event `e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingMatrix {
    order: usize,
    /// Row-major entries, each +1 or -1.
    entries: Vec<i8>,
    /// True when built by the Sylvester recursion, which permits the fast
    /// butterfly transform (the matrix is then also symmetric).
    sylvester: bool,
}

/// Sylvester-construction Hadamard matrix of the given order.
///
/// Only powers of two are constructible this way; other orders are rejected.
pub fn hadamard(order: usize) -> Result<EncodingMatrix> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::UnsupportedOrder(order));
    }
    let mut entries = vec![1i8; order * order];
    // H_{2n} = [[H_n, H_n], [H_n, -H_n]] grown in place from H_1 = [1].
    let mut n = 1;
    while n < order {
        for r in 0..n {
            for e in 0..n {
                let v = entries[r * order + e];
                entries[r * order + (e + n)] = v;
                entries[(r + n) * order + e] = v;
                entries[(r + n) * order + (e + n)] = -v;
            }
        }
        n *= 2;
    }
    Ok(EncodingMatrix {
        order,
        entries,
        sylvester: true,
    })
}

impl EncodingMatrix {
    /// Builds a matrix from raw ±1 entries, verifying `H·Hᵀ = order·I`.
    pub fn from_entries(order: usize, entries: Vec<i8>) -> Result<Self> {
        if entries.len() != order * order {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for order {}",
                entries.len(),
                order
            )));
        }
        if entries.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::NotHadamard("entries must be +1 or -1".into()));
        }
        let m = EncodingMatrix {
            order,
            entries,
            sylvester: false,
        };
        m.verify()?;
        Ok(m)
    }

    /// Exact integer check of the Hadamard property `H·Hᵀ = order·I`.
    pub fn verify(&self) -> Result<()> {
        for a in 0..self.order {
            for b in a..self.order {
                let dot: i64 = (0..self.order)
                    .map(|e| {
                        self.entries[a * self.order + e] as i64
                            * self.entries[b * self.order + e] as i64
                    })
                    .sum();
                let want = if a == b { self.order as i64 } else { 0 };
                if dot != want {
                    return Err(Error::NotHadamard(format!(
                        "rows {} and {} have dot product {}, expected {}",
                        a, b, dot, want
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    /// Entry `[r][e]` as a signed integer.
    #[inline]
    pub fn entry(&self, r: usize, e: usize) -> i8 {
        self.entries[r * self.order + e]
    }

    /// Row-bias vector to apply during event `e` (column `e` of the matrix).
    pub fn bias_schedule(&self, e: usize) -> Result<Vec<i8>> {
        if e >= self.order {
            return Err(Error::IndexOutOfRange(format!(
                "event {} of {}",
                e, self.order
            )));
        }
        Ok((0..self.order).map(|r| self.entry(r, e)).collect())
    }

    fn require_square_for(&self, rows: usize) -> Result<()> {
        if self.order != rows {
            return Err(Error::DimensionMismatch(format!(
                "encoding order {} does not match {} rows",
                self.order, rows
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Fast Walsh-Hadamard transform and the encode/decode pair
// ---------------------------------------------------------------------------

/// In-place Walsh-Hadamard butterfly over `n` equally sized blocks.
///
/// Block `i` is combined with block `i + h` as `(a, b) -> (a + b, a - b)`;
/// after `log2 n` rounds the blocks hold `H_n` applied along the block axis.
/// Operating on whole blocks keeps the inner loop contiguous, so transforming
/// an `[event][channel][sample]` buffer along events streams through memory.
fn fwht_blocks<X: Sample>(data: &mut [X], block: usize, n: usize) {
    debug_assert!(n.is_power_of_two());
    debug_assert_eq!(data.len(), block * n);
    let mut h = 1;
    while h < n {
        let mut i = 0;
        while i < n {
            for j in i..i + h {
                let (lo, hi) = data.split_at_mut((j + h) * block);
                let a = &mut lo[j * block..j * block + block];
                let b = &mut hi[..block];
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    let s = *x + *y;
                    let d = *x - *y;
                    *x = s;
                    *y = d;
                }
            }
            i += 2 * h;
        }
        h *= 2;
    }
}

/// Applies a general ±1 matrix along the leading axis: out-block `e` is
/// `Σ_r M[r][e] · in-block r`. Used for non-Sylvester matrices and as the
/// slow but obviously correct path.
fn apply_matrix_blocks<X: Sample>(
    data: &[X],
    block: usize,
    m: &EncodingMatrix,
    transpose: bool,
) -> Vec<X> {
    let n = m.order;
    let mut out = vec![X::zero(); data.len()];
    for e in 0..n {
        let dst = &mut out[e * block..(e + 1) * block];
        for r in 0..n {
            let sign = if transpose { m.entry(e, r) } else { m.entry(r, e) };
            let src = &data[r * block..(r + 1) * block];
            if sign > 0 {
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d = *d + *s;
                }
            } else {
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d = *d - *s;
                }
            }
        }
    }
    out
}

/// Mixes per-crossing signals into encoded event traces: `g = H s`, applied
/// per channel and per time sample.
///
/// This is simultaneously the acquisition model of the encoded schemes and
/// the reference mixing used to cross-check the wavefield simulator.
pub fn hero_encode<X: Sample>(
    s: &DecodedAperture<X>,
    h: &EncodingMatrix,
) -> Result<EventChannelData<X>> {
    s.validate()?;
    h.require_square_for(s.rows)?;
    let block = s.cols * s.samples;
    let data = if h.sylvester {
        // Sylvester matrices are symmetric, so H applied along the row axis
        // is exactly the Walsh-Hadamard butterfly.
        let mut buf = s.data.clone();
        fwht_blocks(&mut buf, block, h.order);
        buf
    } else {
        // g[e] = Σ_r H[r][e] s[r]  (i.e. Hᵀ along blocks).
        apply_matrix_blocks(&s.data, block, h, true)
    };
    Ok(EventChannelData {
        events: s.rows,
        channels: s.cols,
        samples: s.samples,
        sample_rate: s.sample_rate,
        t0: s.t0,
        carrier: s.carrier,
        data,
    })
}

/// Inverts the mixing: `ŝ = H⁻¹ g = (1/E) Hᵀ g`, per channel and time sample.
pub fn hero_decode<X: Sample>(
    g: &EventChannelData<X>,
    h: &EncodingMatrix,
) -> Result<DecodedAperture<X>> {
    g.validate()?;
    h.require_square_for(g.events)?;
    if !h.sylvester {
        h.verify()?;
    }
    let block = g.channels * g.samples;
    let inv_e = <X::Scalar as Real>::of(1.0) / <X::Scalar as Real>::of(h.order as f64);
    let mut data = if h.sylvester {
        let mut buf = g.data.clone();
        fwht_blocks(&mut buf, block, h.order);
        buf
    } else {
        // ŝ[r] = (1/E) Σ_e H[r][e] g[e]  (H along blocks).
        apply_matrix_blocks(&g.data, block, h, false)
    };
    for x in data.iter_mut() {
        *x = x.scale(inv_e);
    }
    Ok(DecodedAperture {
        rows: g.events,
        cols: g.channels,
        samples: g.samples,
        sample_rate: g.sample_rate,
        t0: g.t0,
        carrier: g.carrier,
        data,
    })
}
