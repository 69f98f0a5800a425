//! Acquisition schemes: event lists, steering fans and transmit-delay
//! profiles for the supported imaging sequences.
//!
//! Four schemes are modeled, all on a bias-switchable row-column array:
//!
//! * `optimus` — Hadamard receive-aperture encoding repeated over a fan of
//!   tilted plane-wave transmits; one encoded set of `rows` events per angle.
//! * `hercules` — a single broadside (0°) Hadamard-encoded set.
//! * `vls` — unencoded diverging transmits from virtual line sources behind
//!   the aperture, one event per source.
//! * `tpw` — unencoded tilted plane-wave compounding, one event per angle.
//!
//! Per-row transmit delays are normalized to start at zero; the minimum that
//! was subtracted rides along in the dataset's [`TxDelayModel`] so the
//! beamformer can reconstruct absolute wavefront timing.

use std::ops::Range;

use crate::beamform::TxDelayModel;
use crate::encoding::{hadamard, EncodingMatrix};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, MediumSpec};
use crate::num::Real;
use crate::pulse::PulseSpec;
use crate::sim::TransmitEvent;

// ---------------------------------------------------------------------------
// Scheme specification
// ---------------------------------------------------------------------------

/// Which sequence to build, with its steering parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSpec<S> {
    /// Hadamard-encoded receive over `angle_count` plane waves fanned to
    /// `± max_angle` radians about broadside.
    Optimus { angle_count: usize, max_angle: S },
    /// Hadamard-encoded receive on a single broadside plane wave.
    Hercules,
    /// Virtual line sources: `source_count` lines spread across the row
    /// aperture at `source_depth` meters behind it (a positive distance).
    Vls { source_count: usize, source_depth: S },
    /// Unencoded tilted plane waves.
    Tpw { angle_count: usize, max_angle: S },
}

impl<S: Real> SchemeSpec<S> {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeSpec::Optimus { .. } => "optimus",
            SchemeSpec::Hercules => "hercules",
            SchemeSpec::Vls { .. } => "vls",
            SchemeSpec::Tpw { .. } => "tpw",
        }
    }

    /// True for schemes whose receive data needs Hadamard decoding.
    pub fn is_encoded(&self) -> bool {
        matches!(self, SchemeSpec::Optimus { .. } | SchemeSpec::Hercules)
    }
}

/// A contiguous run of events that compound into one beamforming dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetGroup<S> {
    pub events: Range<usize>,
    pub model: TxDelayModel<S>,
}

/// A complete acquisition: ordered transmit events, their grouping into
/// datasets, and the receive encoding shared by every group (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<S: Real> {
    pub scheme: &'static str,
    pub events: Vec<TransmitEvent<S>>,
    pub groups: Vec<DatasetGroup<S>>,
    pub encoding: Option<EncodingMatrix>,
}

impl<S: Real> Sequence<S> {
    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Volumes per second at pulse-repetition frequency `prf`: one volume
    /// needs every event once.
    pub fn acquisition_rate(&self, prf: S) -> Result<S> {
        if !(prf > S::zero()) || !prf.is_finite() {
            return Err(Error::InvalidSpec("prf must be positive and finite".into()));
        }
        if self.events.is_empty() {
            return Err(Error::EmptyInput("sequence has no events".into()));
        }
        Ok(prf / S::of(self.events.len() as f64))
    }
}

// ---------------------------------------------------------------------------
// Steering geometry
// ---------------------------------------------------------------------------

/// Per-row transmit delays normalized to start at zero, plus the subtracted
/// minimum in seconds (signed; negative when the raw minimum was negative).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProfile<S> {
    pub delays: Vec<S>,
    pub min_delay: S,
}

/// Evenly spaced steering angles `±max_angle` about broadside:
/// `θ_i = (2i − (count−1)) · max_angle / (count − 1)`. A single angle is
/// broadside. Odd counts contain an exact zero, and angle pairs negate
/// exactly.
pub fn steering_angles<S: Real>(count: usize, max_angle: S) -> Result<Vec<S>> {
    if count == 0 {
        return Err(Error::InvalidSpec("angle count must be positive".into()));
    }
    if !(max_angle >= S::zero()) || !(max_angle < S::FRAC_PI_2()) {
        return Err(Error::InvalidSpec(
            "max steering angle must lie in [0, π/2)".into(),
        ));
    }
    if count == 1 {
        return Ok(vec![S::zero()]);
    }
    let step = max_angle / S::of((count - 1) as f64);
    Ok((0..count)
        .map(|i| S::of((2 * i) as f64 - (count - 1) as f64) * step)
        .collect())
}

/// Row delays steering a plane wave to `angle` radians about the x axis.
/// Rows at larger `y · sin(angle)` fire later; the profile starts at zero.
pub fn plane_wave_delays<S: Real>(
    geom: &ArrayGeometry<S>,
    speed_of_sound: S,
    angle: S,
) -> Result<DelayProfile<S>> {
    geom.validate()?;
    if !(speed_of_sound > S::zero()) {
        return Err(Error::InvalidSpec("speed of sound must be positive".into()));
    }
    if !(angle.abs() < S::FRAC_PI_2()) {
        return Err(Error::InvalidSpec(
            "plane-wave steering must stay below ±π/2".into(),
        ));
    }
    let sin = angle.sin();
    let raw: Vec<S> = (0..geom.rows)
        .map(|r| Ok(geom.row_y(r)? * sin / speed_of_sound))
        .collect::<Result<_>>()?;
    let min = raw.iter().copied().fold(S::infinity(), S::min);
    Ok(DelayProfile {
        delays: raw.iter().map(|&t| t - min).collect(),
        min_delay: min,
    })
}

/// Row delays for a cylindrical wave diverging from a virtual line source at
/// height `source_y` and depth `source_z` (nonzero, normally negative — the
/// source sits behind the aperture). The row nearest the source fires first.
pub fn vls_delays<S: Real>(
    geom: &ArrayGeometry<S>,
    speed_of_sound: S,
    source_y: S,
    source_z: S,
) -> Result<DelayProfile<S>> {
    geom.validate()?;
    if !(speed_of_sound > S::zero()) {
        return Err(Error::InvalidSpec("speed of sound must be positive".into()));
    }
    if source_z == S::zero() || !source_z.is_finite() || !source_y.is_finite() {
        return Err(Error::InvalidSpec(
            "virtual line source must sit off the aperture plane".into(),
        ));
    }
    let raw: Vec<S> = (0..geom.rows)
        .map(|r| {
            let dy = geom.row_y(r)? - source_y;
            Ok((dy * dy + source_z * source_z).sqrt() / speed_of_sound)
        })
        .collect::<Result<_>>()?;
    let min = raw.iter().copied().fold(S::infinity(), S::min);
    Ok(DelayProfile {
        delays: raw.iter().map(|&t| t - min).collect(),
        min_delay: min,
    })
}

/// Virtual-source heights: `count` lines evenly spread over the row
/// aperture, centered like the rows themselves (they fall on the row
/// positions when `count` equals the row count).
pub fn vls_source_heights<S: Real>(geom: &ArrayGeometry<S>, count: usize) -> Result<Vec<S>> {
    geom.validate()?;
    if count == 0 {
        return Err(Error::InvalidSpec("source count must be positive".into()));
    }
    let spacing = geom.aperture_y() / S::of(count as f64);
    let half = S::of((count - 1) as f64) * S::of(0.5);
    Ok((0..count)
        .map(|i| (S::of(i as f64) - half) * spacing)
        .collect())
}

// ---------------------------------------------------------------------------
// Sequence assembly
// ---------------------------------------------------------------------------

fn all_ones(rows: usize) -> Vec<i8> {
    vec![1i8; rows]
}

/// Builds the full event list and dataset grouping for `spec`.
///
/// Encoded schemes pair each dataset group with a complete Hadamard set:
/// event `e` of a group drives row polarities and bias states both equal to
/// column `e` of the matrix, so the physically radiated polarity is all-ones
/// while receive weights realize the code. These schemes require a
/// power-of-two row count. Unencoded schemes use all-ones polarity and bias
/// with one event per dataset.
pub fn build_sequence<S: Real>(
    spec: &SchemeSpec<S>,
    geom: &ArrayGeometry<S>,
    medium: &MediumSpec<S>,
    pulse: &PulseSpec<S>,
) -> Result<Sequence<S>> {
    geom.validate()?;
    medium.validate()?;
    pulse.validate()?;
    let c = medium.speed_of_sound;
    let rows = geom.rows;
    match *spec {
        SchemeSpec::Optimus {
            angle_count,
            max_angle,
        } => {
            let angles = steering_angles(angle_count, max_angle)?;
            let matrix = hadamard(rows)?;
            let mut events = Vec::with_capacity(angle_count * rows);
            let mut groups = Vec::with_capacity(angle_count);
            for (m, &angle) in angles.iter().enumerate() {
                let profile = plane_wave_delays(geom, c, angle)?;
                for e in 0..rows {
                    let code = matrix.bias_schedule(e)?;
                    events.push(TransmitEvent {
                        row_polarity: code.clone(),
                        row_delay: profile.delays.clone(),
                        pulse: pulse.clone(),
                        bias: code,
                    });
                }
                groups.push(DatasetGroup {
                    events: m * rows..(m + 1) * rows,
                    model: TxDelayModel::PlaneWave {
                        angle,
                        min_delay: profile.min_delay,
                    },
                });
            }
            Ok(Sequence {
                scheme: spec.name(),
                events,
                groups,
                encoding: Some(matrix),
            })
        }
        SchemeSpec::Hercules => {
            let matrix = hadamard(rows)?;
            let profile = plane_wave_delays(geom, c, S::zero())?;
            let mut events = Vec::with_capacity(rows);
            for e in 0..rows {
                let code = matrix.bias_schedule(e)?;
                events.push(TransmitEvent {
                    row_polarity: code.clone(),
                    row_delay: profile.delays.clone(),
                    pulse: pulse.clone(),
                    bias: code,
                });
            }
            Ok(Sequence {
                scheme: spec.name(),
                events,
                groups: vec![DatasetGroup {
                    events: 0..rows,
                    model: TxDelayModel::PlaneWave {
                        angle: S::zero(),
                        min_delay: profile.min_delay,
                    },
                }],
                encoding: Some(matrix),
            })
        }
        SchemeSpec::Vls {
            source_count,
            source_depth,
        } => {
            if !(source_depth > S::zero()) || !source_depth.is_finite() {
                return Err(Error::InvalidSpec(
                    "virtual-source depth must be positive".into(),
                ));
            }
            let heights = vls_source_heights(geom, source_count)?;
            let z = -source_depth;
            let mut events = Vec::with_capacity(source_count);
            let mut groups = Vec::with_capacity(source_count);
            for (i, &y) in heights.iter().enumerate() {
                let profile = vls_delays(geom, c, y, z)?;
                events.push(TransmitEvent {
                    row_polarity: all_ones(rows),
                    row_delay: profile.delays,
                    pulse: pulse.clone(),
                    bias: all_ones(rows),
                });
                groups.push(DatasetGroup {
                    events: i..i + 1,
                    model: TxDelayModel::VirtualLine {
                        y,
                        z,
                        min_delay: profile.min_delay,
                    },
                });
            }
            Ok(Sequence {
                scheme: spec.name(),
                events,
                groups,
                encoding: None,
            })
        }
        SchemeSpec::Tpw {
            angle_count,
            max_angle,
        } => {
            let angles = steering_angles(angle_count, max_angle)?;
            let mut events = Vec::with_capacity(angle_count);
            let mut groups = Vec::with_capacity(angle_count);
            for (i, &angle) in angles.iter().enumerate() {
                let profile = plane_wave_delays(geom, c, angle)?;
                events.push(TransmitEvent {
                    row_polarity: all_ones(rows),
                    row_delay: profile.delays,
                    pulse: pulse.clone(),
                    bias: all_ones(rows),
                });
                groups.push(DatasetGroup {
                    events: i..i + 1,
                    model: TxDelayModel::PlaneWave {
                        angle,
                        min_delay: profile.min_delay,
                    },
                });
            }
            Ok(Sequence {
                scheme: spec.name(),
                events,
                groups,
                encoding: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::BurstWindow;

    const C: f64 = 1540.0;

    fn geom(rows: usize, cols: usize) -> ArrayGeometry<f64> {
        ArrayGeometry {
            rows,
            cols,
            pitch: 250e-6,
            kerf: 25e-6,
            center_frequency: 7.8125e6,
        }
    }

    fn medium() -> MediumSpec<f64> {
        MediumSpec {
            speed_of_sound: C,
            sampling_frequency: 62.5e6,
        }
    }

    fn pulse() -> PulseSpec<f64> {
        PulseSpec::ToneBurst {
            frequency: 7.8125e6,
            cycles: 3,
            window: BurstWindow::Rectangular,
        }
    }

    #[test]
    fn full_fan_on_128_rows_runs_1152_events() {
        let spec = SchemeSpec::Optimus {
            angle_count: 9,
            max_angle: 10f64.to_radians(),
        };
        let seq = build_sequence(&spec, &geom(128, 128), &medium(), &pulse()).unwrap();
        assert_eq!(seq.event_count(), 1152);
        assert_eq!(seq.groups.len(), 9);
        assert_eq!(seq.encoding.as_ref().unwrap().order(), 128);
        for (m, g) in seq.groups.iter().enumerate() {
            assert_eq!(g.events, m * 128..(m + 1) * 128);
        }
        let rate = seq.acquisition_rate(10e3).unwrap();
        assert!((rate - 10e3 / 1152.0).abs() < 1e-12);
        assert!((rate - 8.68).abs() < 0.005, "rate {rate}");
    }

    #[test]
    fn single_encoded_set_rate_is_prf_over_rows() {
        let seq =
            build_sequence(&SchemeSpec::Hercules, &geom(128, 128), &medium(), &pulse()).unwrap();
        assert_eq!(seq.event_count(), 128);
        assert_eq!(seq.groups.len(), 1);
        assert_eq!(seq.acquisition_rate(10e3).unwrap(), 78.125);
        // Broadside: all delays are exactly zero.
        for ev in &seq.events {
            assert!(ev.row_delay.iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn encoded_events_radiate_all_ones_effective_polarity() {
        let spec = SchemeSpec::Optimus {
            angle_count: 3,
            max_angle: 0.1,
        };
        let seq = build_sequence(&spec, &geom(16, 16), &medium(), &pulse()).unwrap();
        let h = seq.encoding.as_ref().unwrap();
        for (i, ev) in seq.events.iter().enumerate() {
            let e = i % 16;
            for r in 0..16 {
                assert_eq!(ev.row_polarity[r], h.entry(r, e));
                assert_eq!(ev.bias[r], h.entry(r, e));
                assert_eq!(ev.row_polarity[r] * ev.bias[r], 1);
            }
        }
    }

    #[test]
    fn unencoded_schemes_use_all_ones_polarity_and_bias() {
        let tpw = build_sequence(
            &SchemeSpec::Tpw {
                angle_count: 5,
                max_angle: 0.15,
            },
            &geom(12, 12), // unencoded schemes accept non-power-of-two rows
            &medium(),
            &pulse(),
        )
        .unwrap();
        assert_eq!(tpw.event_count(), 5);
        assert!(tpw.encoding.is_none());
        let vls = build_sequence(
            &SchemeSpec::Vls {
                source_count: 7,
                source_depth: 1.5e-3,
            },
            &geom(12, 12),
            &medium(),
            &pulse(),
        )
        .unwrap();
        assert_eq!(vls.event_count(), 7);
        assert!(vls.encoding.is_none());
        for ev in tpw.events.iter().chain(vls.events.iter()) {
            assert!(ev.row_polarity.iter().all(|&p| p == 1));
            assert!(ev.bias.iter().all(|&b| b == 1));
        }
        // One event per dataset group.
        for (i, g) in tpw.groups.iter().enumerate() {
            assert_eq!(g.events, i..i + 1);
        }
    }

    #[test]
    fn steering_fan_is_symmetric_with_an_exact_zero() {
        let max = 10f64.to_radians();
        let a = steering_angles(9, max).unwrap();
        assert_eq!(a.len(), 9);
        assert_eq!(a[4], 0.0);
        assert_eq!(a[0], -max);
        assert_eq!(a[8], max);
        for i in 0..9 {
            assert_eq!(a[i], -a[8 - i]);
        }
        assert_eq!(steering_angles(1, max).unwrap(), vec![0.0]);
    }

    #[test]
    fn plane_wave_delay_span_at_ten_degrees() {
        // 128 rows at 250 µm: span = 127 · 250 µm · sin 10° / c ≈ 3.58 µs.
        let p = plane_wave_delays(&geom(128, 8), C, 10f64.to_radians()).unwrap();
        let max = p.delays.iter().cloned().fold(0.0, f64::max);
        let expect = 127.0 * 250e-6 * 10f64.to_radians().sin() / C;
        assert!((max - expect).abs() < 1e-12);
        assert!((max - 3.58e-6).abs() < 0.01e-6, "span {max}");
        // Normalized: the minimum delay is zero and the subtracted raw
        // minimum is negative (rows at negative y lead).
        assert_eq!(p.delays.iter().cloned().fold(f64::MAX, f64::min), 0.0);
        assert!(p.min_delay < 0.0);
    }

    #[test]
    fn opposite_angles_reverse_the_delay_profile_exactly() {
        for rows in [8usize, 9, 32] {
            let g = geom(rows, 4);
            let plus = plane_wave_delays(&g, C, 0.12).unwrap();
            let minus = plane_wave_delays(&g, C, -0.12).unwrap();
            for r in 0..rows {
                assert_eq!(plus.delays[r], minus.delays[rows - 1 - r]);
            }
            assert_eq!(plus.min_delay, minus.min_delay);
        }
    }

    #[test]
    fn vls_profile_is_symmetric_and_leads_nearest_the_source() {
        let g = geom(32, 4);
        // Centered source: symmetric profile, exactly.
        let p = vls_delays(&g, C, 0.0, -4e-3).unwrap();
        for r in 0..32 {
            assert_eq!(p.delays[r], p.delays[31 - r]);
        }
        // Off-center source: the minimum sits at the row nearest source_y.
        let y_src = g.row_y(9).unwrap() + 30e-6;
        let p = vls_delays(&g, C, y_src, -4e-3).unwrap();
        let argmin = p
            .delays
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmin, 9);
        assert_eq!(p.delays[9], 0.0);
        // min_delay holds the raw source-to-row travel time.
        let d9 = {
            let dy = g.row_y(9).unwrap() - y_src;
            (dy * dy + 16e-6f64).sqrt() / C
        };
        assert!((p.min_delay - d9).abs() < 1e-18);
    }

    #[test]
    fn distant_source_approaches_a_plane_wave() {
        // 32 rows spanning ±3.875 mm against a source 12 m back: residual
        // curvature delay stays under a nanosecond.
        let p = vls_delays(&geom(32, 4), C, 0.0, -12.0).unwrap();
        let max = p.delays.iter().cloned().fold(0.0, f64::max);
        assert!(max < 1e-9, "max delay {max}");
    }

    #[test]
    fn two_row_vls_delay_matches_hand_geometry() {
        let g = geom(2, 2);
        let h = 0.25e-3;
        let y_src = g.row_y(0).unwrap(); // directly behind row 0
        let p = vls_delays(&g, C, y_src, -h).unwrap();
        assert_eq!(p.delays[0], 0.0);
        let dy = g.row_y(1).unwrap() - y_src;
        let expect = ((dy * dy + h * h).sqrt() - h) / C;
        assert!((p.delays[1] - expect).abs() < 1e-18);
    }

    #[test]
    fn source_heights_match_row_positions_when_counts_agree() {
        let g = geom(32, 4);
        let h = vls_source_heights(&g, 32).unwrap();
        for (i, y) in h.iter().enumerate() {
            assert!((y - g.row_y(i).unwrap()).abs() < 1e-15);
        }
        // And they are symmetric in general.
        let h = vls_source_heights(&g, 5).unwrap();
        for i in 0..5 {
            assert_eq!(h[i], -h[4 - i]);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let g = geom(12, 12); // 12 is not a power of two
        let m = medium();
        let p = pulse();
        let r = build_sequence(
            &SchemeSpec::Optimus {
                angle_count: 3,
                max_angle: 0.1,
            },
            &g,
            &m,
            &p,
        );
        assert!(matches!(r, Err(Error::UnsupportedOrder(12))));
        assert!(matches!(
            build_sequence(&SchemeSpec::Hercules, &g, &m, &p),
            Err(Error::UnsupportedOrder(12))
        ));
        let g16 = geom(16, 16);
        assert!(build_sequence(
            &SchemeSpec::Tpw {
                angle_count: 0,
                max_angle: 0.1
            },
            &g16,
            &m,
            &p
        )
        .is_err());
        assert!(build_sequence(
            &SchemeSpec::Optimus {
                angle_count: 3,
                max_angle: std::f64::consts::FRAC_PI_2
            },
            &g16,
            &m,
            &p
        )
        .is_err());
        assert!(build_sequence(
            &SchemeSpec::Vls {
                source_count: 0,
                source_depth: 1e-3
            },
            &g16,
            &m,
            &p
        )
        .is_err());
        assert!(build_sequence(
            &SchemeSpec::Vls {
                source_count: 4,
                source_depth: 0.0
            },
            &g16,
            &m,
            &p
        )
        .is_err());
        assert!(steering_angles(3, -0.1).is_err());
    }

    #[test]
    fn groups_partition_the_event_list() {
        let specs: Vec<SchemeSpec<f64>> = vec![
            SchemeSpec::Optimus {
                angle_count: 4,
                max_angle: 0.1,
            },
            SchemeSpec::Hercules,
            SchemeSpec::Vls {
                source_count: 6,
                source_depth: 2e-3,
            },
            SchemeSpec::Tpw {
                angle_count: 7,
                max_angle: 0.12,
            },
        ];
        for spec in &specs {
            let seq = build_sequence(spec, &geom(16, 16), &medium(), &pulse()).unwrap();
            let mut next = 0usize;
            for g in &seq.groups {
                assert_eq!(g.events.start, next);
                assert!(g.events.end > g.events.start);
                next = g.events.end;
            }
            assert_eq!(next, seq.event_count());
            // Every event passes its own validation.
            for ev in &seq.events {
                ev.validate(16).unwrap();
            }
        }
    }

    #[test]
    fn single_angle_fan_is_broadside() {
        let spec = SchemeSpec::Optimus {
            angle_count: 1,
            max_angle: 0.2,
        };
        let seq = build_sequence(&spec, &geom(16, 16), &medium(), &pulse()).unwrap();
        assert_eq!(seq.event_count(), 16);
        match seq.groups[0].model {
            TxDelayModel::PlaneWave { angle, min_delay } => {
                assert_eq!(angle, 0.0);
                assert_eq!(min_delay, 0.0);
            }
            _ => panic!("expected a plane-wave model"),
        }
        for ev in &seq.events {
            assert!(ev.row_delay.iter().all(|&d| d == 0.0));
        }
    }
}
