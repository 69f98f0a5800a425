//! Binary dataset container: a fixed 128-byte little-endian header followed
//! by a packed f32 payload.
//!
//! Header layout (byte offsets, all little-endian):
//!
//! | offset | size | field                                              |
//! |-------:|-----:|----------------------------------------------------|
//! |      0 |    8 | magic `RCAUSND1`                                   |
//! |      8 |    4 | version, u32 (currently 1)                         |
//! |     12 |    4 | kind, u32: 1 event-channel, 2 decoded aperture, 3 volume |
//! |     16 |   24 | dims, 3 × u64                                      |
//! |     40 |    8 | sample rate, f64 hertz (0 for volumes)             |
//! |     48 |    8 | t0, f64 seconds (0 for volumes)                    |
//! |     56 |   24 | voxel spacing, 3 × f64 meters (0 for trace data)   |
//! |     80 |   24 | grid origin, 3 × f64 meters (0 for trace data)     |
//! |    104 |    8 | carrier, f64 hertz (0 = not demodulated)           |
//! |    112 |    4 | sample format, u32: 1 f32 real, 2 f32 complex pairs |
//! |    116 |   12 | zero padding                                       |
//!
//! The payload holds `dims[0]·dims[1]·dims[2]` samples (4 bytes real, 8
//! bytes for an interleaved complex pair). Metadata stays f64 so time bases
//! and grids survive the f32 payload quantization.

use std::fs;
use std::path::Path;

use num_complex::Complex;
use rcaus::beamform::{Volume, VolumeGrid};
use rcaus::encoding::{DecodedAperture, EventChannelData};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"RCAUSND1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 128;

/// What the payload represents; decides which loader may accept the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    /// Per-event, per-column receive traces (`dims = [events, channels, samples]`).
    EventChannel,
    /// Per-crossing traces (`dims = [rows, cols, samples]`).
    DecodedAperture,
    /// Reconstructed voxel lattice (`dims = [nx, ny, nz]`).
    Volume,
}

impl DataKind {
    fn code(self) -> u32 {
        match self {
            DataKind::EventChannel => 1,
            DataKind::DecodedAperture => 2,
            DataKind::Volume => 3,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(DataKind::EventChannel),
            2 => Some(DataKind::DecodedAperture),
            3 => Some(DataKind::Volume),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DataKind::EventChannel => "event-channel",
            DataKind::DecodedAperture => "decoded-aperture",
            DataKind::Volume => "volume",
        }
    }
}

/// Sample encoding of the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Real,
    ComplexInterleaved,
}

impl SampleFormat {
    fn code(self) -> u32 {
        match self {
            SampleFormat::Real => 1,
            SampleFormat::ComplexInterleaved => 2,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(SampleFormat::Real),
            2 => Some(SampleFormat::ComplexInterleaved),
            _ => None,
        }
    }

    /// f32 words per sample.
    fn words(self) -> usize {
        match self {
            SampleFormat::Real => 1,
            SampleFormat::ComplexInterleaved => 2,
        }
    }
}

/// Parsed 128-byte header.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub kind: DataKind,
    pub dims: [u64; 3],
    pub sample_rate: f64,
    pub t0: f64,
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    /// 0.0 encodes "no carrier" (data not demodulated).
    pub carrier: f64,
    pub format: SampleFormat,
}

impl DatasetHeader {
    /// Serializes to the fixed 128-byte layout; padding is zero, so
    /// write → read → write is byte-identical.
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..8].copy_from_slice(MAGIC);
        b[8..12].copy_from_slice(&VERSION.to_le_bytes());
        b[12..16].copy_from_slice(&self.kind.code().to_le_bytes());
        for (a, d) in self.dims.iter().enumerate() {
            b[16 + 8 * a..24 + 8 * a].copy_from_slice(&d.to_le_bytes());
        }
        b[40..48].copy_from_slice(&self.sample_rate.to_le_bytes());
        b[48..56].copy_from_slice(&self.t0.to_le_bytes());
        for (a, s) in self.spacing.iter().enumerate() {
            b[56 + 8 * a..64 + 8 * a].copy_from_slice(&s.to_le_bytes());
        }
        for (a, o) in self.origin.iter().enumerate() {
            b[80 + 8 * a..88 + 8 * a].copy_from_slice(&o.to_le_bytes());
        }
        b[104..112].copy_from_slice(&self.carrier.to_le_bytes());
        b[112..116].copy_from_slice(&self.format.code().to_le_bytes());
        b
    }

    /// Parses and sanity-checks the fixed header.
    pub fn from_bytes(b: &[u8]) -> std::result::Result<Self, String> {
        if b.len() < HEADER_LEN {
            return Err(format!("file too short for a {HEADER_LEN}-byte header"));
        }
        if &b[0..8] != MAGIC {
            return Err("bad magic; not a dataset file".into());
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(format!("unsupported version {version} (expected {VERSION})"));
        }
        let kind = DataKind::from_code(u32_at(12))
            .ok_or_else(|| format!("unknown dataset kind code {}", u32_at(12)))?;
        let format = SampleFormat::from_code(u32_at(112))
            .ok_or_else(|| format!("unknown sample format code {}", u32_at(112)))?;
        Ok(DatasetHeader {
            kind,
            dims: [u64_at(16), u64_at(24), u64_at(32)],
            sample_rate: f64_at(40),
            t0: f64_at(48),
            spacing: [f64_at(56), f64_at(64), f64_at(72)],
            origin: [f64_at(80), f64_at(88), f64_at(96)],
            carrier: f64_at(104),
            format,
        })
    }

    /// Payload length in f32 words implied by dims and format.
    pub fn payload_words(&self) -> usize {
        (self.dims[0] * self.dims[1] * self.dims[2]) as usize * self.format.words()
    }
}

// ---------------------------------------------------------------------------
// Raw read/write
// ---------------------------------------------------------------------------

/// Writes header + payload in one shot.
pub fn write_dataset(path: &Path, header: &DatasetHeader, payload: &[f32]) -> Result<()> {
    if payload.len() != header.payload_words() {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: format!(
                "payload holds {} f32 words, header implies {}",
                payload.len(),
                header.payload_words()
            ),
        });
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN + payload.len() * 4);
    bytes.extend_from_slice(&header.to_bytes());
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Reads and validates header + payload.
pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let header = DatasetHeader::from_bytes(&bytes).map_err(|reason| CliError::Format {
        path: path.to_path_buf(),
        reason,
    })?;
    let want = header.payload_words();
    let body = &bytes[HEADER_LEN..];
    if body.len() != want * 4 {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: format!("payload is {} bytes, header implies {}", body.len(), want * 4),
        });
    }
    let payload = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}

/// Reads just the header, for kind checks and `describe`-style inspection.
pub fn read_header(path: &Path) -> Result<DatasetHeader> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    DatasetHeader::from_bytes(&bytes).map_err(|reason| CliError::Format {
        path: path.to_path_buf(),
        reason,
    })
}

fn kind_check(path: &Path, header: &DatasetHeader, want: DataKind) -> Result<()> {
    if header.kind != want {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: format!(
                "dataset kind is {}, expected {}",
                header.kind.label(),
                want.label()
            ),
        });
    }
    Ok(())
}

fn complex_payload(data: &[Complex<f64>]) -> Vec<f32> {
    let mut out = Vec::with_capacity(data.len() * 2);
    for z in data {
        out.push(z.re as f32);
        out.push(z.im as f32);
    }
    out
}

fn complex_from_payload(payload: &[f32]) -> Vec<Complex<f64>> {
    payload
        .chunks_exact(2)
        .map(|p| Complex::new(p[0] as f64, p[1] as f64))
        .collect()
}

fn carrier_field(c: Option<f64>) -> f64 {
    c.unwrap_or(0.0)
}

fn carrier_option(c: f64) -> Option<f64> {
    if c > 0.0 {
        Some(c)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Typed containers
// ---------------------------------------------------------------------------

/// Saves demodulated event-domain traces (kind 1, complex payload).
pub fn save_iq_events(path: &Path, data: &EventChannelData<Complex<f64>>) -> Result<()> {
    let header = DatasetHeader {
        kind: DataKind::EventChannel,
        dims: [data.events as u64, data.channels as u64, data.samples as u64],
        sample_rate: data.sample_rate,
        t0: data.t0,
        spacing: [0.0; 3],
        origin: [0.0; 3],
        carrier: carrier_field(data.carrier),
        format: SampleFormat::ComplexInterleaved,
    };
    write_dataset(path, &header, &complex_payload(&data.data))
}

pub fn load_iq_events(path: &Path) -> Result<EventChannelData<Complex<f64>>> {
    let (header, payload) = read_dataset(path)?;
    kind_check(path, &header, DataKind::EventChannel)?;
    if header.format != SampleFormat::ComplexInterleaved {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: "expected a complex-interleaved payload".into(),
        });
    }
    Ok(EventChannelData {
        events: header.dims[0] as usize,
        channels: header.dims[1] as usize,
        samples: header.dims[2] as usize,
        sample_rate: header.sample_rate,
        t0: header.t0,
        carrier: carrier_option(header.carrier),
        data: complex_from_payload(&payload),
    })
}

/// Saves decoded per-crossing traces (kind 2, complex payload).
pub fn save_iq_aperture(path: &Path, data: &DecodedAperture<Complex<f64>>) -> Result<()> {
    let header = DatasetHeader {
        kind: DataKind::DecodedAperture,
        dims: [data.rows as u64, data.cols as u64, data.samples as u64],
        sample_rate: data.sample_rate,
        t0: data.t0,
        spacing: [0.0; 3],
        origin: [0.0; 3],
        carrier: carrier_field(data.carrier),
        format: SampleFormat::ComplexInterleaved,
    };
    write_dataset(path, &header, &complex_payload(&data.data))
}

pub fn load_iq_aperture(path: &Path) -> Result<DecodedAperture<Complex<f64>>> {
    let (header, payload) = read_dataset(path)?;
    kind_check(path, &header, DataKind::DecodedAperture)?;
    if header.format != SampleFormat::ComplexInterleaved {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: "expected a complex-interleaved payload".into(),
        });
    }
    Ok(DecodedAperture {
        rows: header.dims[0] as usize,
        cols: header.dims[1] as usize,
        samples: header.dims[2] as usize,
        sample_rate: header.sample_rate,
        t0: header.t0,
        carrier: carrier_option(header.carrier),
        data: complex_from_payload(&payload),
    })
}

/// Saves a reconstructed volume (kind 3, complex payload; spacing and origin
/// carry the voxel lattice).
pub fn save_volume(path: &Path, volume: &Volume<f64>) -> Result<()> {
    let g = &volume.grid;
    let header = DatasetHeader {
        kind: DataKind::Volume,
        dims: [g.counts[0] as u64, g.counts[1] as u64, g.counts[2] as u64],
        sample_rate: 0.0,
        t0: 0.0,
        spacing: g.spacing,
        origin: g.origin,
        carrier: 0.0,
        format: SampleFormat::ComplexInterleaved,
    };
    write_dataset(path, &header, &complex_payload(&volume.voxels))
}

pub fn load_volume(path: &Path) -> Result<Volume<f64>> {
    let (header, payload) = read_dataset(path)?;
    kind_check(path, &header, DataKind::Volume)?;
    if header.format != SampleFormat::ComplexInterleaved {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: "expected a complex-interleaved payload".into(),
        });
    }
    Ok(Volume {
        grid: VolumeGrid {
            origin: header.origin,
            spacing: header.spacing,
            counts: [
                header.dims[0] as usize,
                header.dims[1] as usize,
                header.dims[2] as usize,
            ],
        },
        voxels: complex_from_payload(&payload),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_header() -> DatasetHeader {
        DatasetHeader {
            kind: DataKind::DecodedAperture,
            dims: [4, 3, 16],
            sample_rate: 25e6,
            t0: 1.25e-6,
            spacing: [0.0; 3],
            origin: [0.0; 3],
            carrier: 6.25e6,
            format: SampleFormat::ComplexInterleaved,
        }
    }

    #[test]
    fn header_round_trip_is_byte_identical() {
        let h = sample_header();
        let bytes = h.to_bytes();
        let parsed = DatasetHeader::from_bytes(&bytes).unwrap();
        assert_eq!(parsed, h);
        assert_eq!(parsed.to_bytes(), bytes);
    }

    #[test]
    fn header_rejects_bad_magic_version_kind_and_format() {
        let good = sample_header().to_bytes();

        let mut bad = good;
        bad[0] = b'X';
        assert!(DatasetHeader::from_bytes(&bad).is_err());

        let mut bad = good;
        bad[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(DatasetHeader::from_bytes(&bad).is_err());

        let mut bad = good;
        bad[12..16].copy_from_slice(&9u32.to_le_bytes());
        assert!(DatasetHeader::from_bytes(&bad).is_err());

        let mut bad = good;
        bad[112..116].copy_from_slice(&0u32.to_le_bytes());
        assert!(DatasetHeader::from_bytes(&bad).is_err());

        assert!(DatasetHeader::from_bytes(&good[..64]).is_err());
    }

    #[test]
    fn event_container_round_trips_through_disk() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("events.rcab");
        let mut data = EventChannelData::<Complex<f64>>::zeroed(3, 2, 8, 12.5e6);
        data.t0 = 2e-6;
        data.carrier = Some(3.0e6);
        for (i, z) in data.data.iter_mut().enumerate() {
            // Values exactly representable in f32 survive the payload cast.
            *z = Complex::new(i as f64, -0.5 * i as f64);
        }
        save_iq_events(&path, &data).unwrap();
        let back = load_iq_events(&path).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn aperture_and_volume_round_trip_through_disk() {
        let dir = tempdir().unwrap();

        let path = dir.path().join("decoded.rcab");
        let mut ap = DecodedAperture::<Complex<f64>>::zeroed(2, 2, 4, 50e6);
        ap.carrier = Some(6.25e6);
        ap.data[5] = Complex::new(0.25, -3.0);
        save_iq_aperture(&path, &ap).unwrap();
        assert_eq!(load_iq_aperture(&path).unwrap(), ap);

        let path = dir.path().join("volume.rcab");
        let mut vol = Volume::zeroed(VolumeGrid {
            origin: [-1e-3, -1e-3, 4e-3],
            spacing: [1e-4, 1e-4, 5e-5],
            counts: [3, 4, 5],
        });
        vol.voxels[17] = Complex::new(1.5, 2.5);
        save_volume(&path, &vol).unwrap();
        assert_eq!(load_volume(&path).unwrap(), vol);
    }

    #[test]
    fn loaders_reject_kind_mismatches() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("volume.rcab");
        let vol = Volume::zeroed(VolumeGrid {
            origin: [0.0; 3],
            spacing: [1e-4; 3],
            counts: [2, 2, 2],
        });
        save_volume(&path, &vol).unwrap();
        // Feeding a volume where traces are expected must fail loudly.
        let err = load_iq_events(&path).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("volume"));
        assert!(load_iq_aperture(&path).is_err());
    }

    #[test]
    fn truncated_payload_is_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.rcab");
        let mut h = sample_header();
        h.dims = [1, 1, 4];
        let mut bytes = h.to_bytes().to_vec();
        bytes.extend_from_slice(&[0u8; 12]); // 3 of the 8 words
        std::fs::write(&path, bytes).unwrap();
        assert!(read_dataset(&path).is_err());
    }
}
