//! Volume rendering: maximum-intensity projections and mid-plane slices as
//! 8-bit PGM images plus raw-envelope CSV grids.
//!
//! Rendering is a viewing aid, not a pipeline stage: it reads a volume file
//! wherever it lives and does not touch the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rcaus::beamform::Volume;

use crate::error::{CliError, Result};
use crate::format::load_volume;

/// Default slab thickness for projections, meters.
pub const DEFAULT_SLAB_M: f64 = 5e-3;
/// Default dynamic range of the dB display map.
pub const DEFAULT_DB_RANGE: f64 = 40.0;

/// Axis a projection collapses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjAxis {
    X,
    Y,
    Z,
}

impl ProjAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "x" | "X" => Some(ProjAxis::X),
            "y" | "Y" => Some(ProjAxis::Y),
            "z" | "Z" => Some(ProjAxis::Z),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ProjAxis::X => "x",
            ProjAxis::Y => "y",
            ProjAxis::Z => "z",
        }
    }

    fn index(self) -> usize {
        match self {
            ProjAxis::X => 0,
            ProjAxis::Y => 1,
            ProjAxis::Z => 2,
        }
    }

    /// The two kept axes as (column, row) of the output image. Depth ends up
    /// on the image rows wherever it survives the projection.
    fn kept(self) -> (usize, usize) {
        match self {
            ProjAxis::X => (1, 2),
            ProjAxis::Y => (0, 2),
            ProjAxis::Z => (0, 1),
        }
    }
}

/// How to collapse the projection axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenderMode {
    /// Maximum envelope over a slab of the given thickness (meters),
    /// centered on the grid's midpoint along the projection axis.
    Mip { slab: f64 },
    /// The single mid-plane layer.
    Slice,
}

impl RenderMode {
    fn tag(self) -> &'static str {
        match self {
            RenderMode::Mip { .. } => "mip",
            RenderMode::Slice => "slice",
        }
    }
}

/// A rendered 2D envelope map with its image dimensions.
#[derive(Debug, Clone)]
pub struct EnvelopeMap {
    pub width: usize,
    pub height: usize,
    /// Linear envelope values, row-major, `height · width` long.
    pub values: Vec<f64>,
}

/// Layers (indices along `axis`) a render mode keeps. A slab that is thinner
/// than the voxel spacing still keeps the layer nearest the grid midpoint.
fn kept_layers(volume: &Volume<f64>, axis: ProjAxis, mode: RenderMode) -> Vec<usize> {
    let a = axis.index();
    let n = volume.grid.counts[a];
    let mid = (n - 1) / 2;
    match mode {
        RenderMode::Slice => vec![mid],
        RenderMode::Mip { slab } => {
            let origin = volume.grid.origin[a];
            let spacing = volume.grid.spacing[a];
            let center = origin + 0.5 * (n - 1) as f64 * spacing;
            let half = 0.5 * slab.max(0.0);
            let layers: Vec<usize> = (0..n)
                .filter(|&i| (origin + i as f64 * spacing - center).abs() <= half)
                .collect();
            if layers.is_empty() {
                vec![mid]
            } else {
                layers
            }
        }
    }
}

/// Collapses the volume's envelope along `axis`.
pub fn project(volume: &Volume<f64>, axis: ProjAxis, mode: RenderMode) -> EnvelopeMap {
    let (ca, ra) = axis.kept();
    let width = volume.grid.counts[ca];
    let height = volume.grid.counts[ra];
    let layers = kept_layers(volume, axis, mode);
    let mut values = vec![0.0_f64; width * height];
    let mut idx = [0usize; 3];
    for r in 0..height {
        for c in 0..width {
            idx[ca] = c;
            idx[ra] = r;
            let mut best = 0.0_f64;
            for &l in &layers {
                idx[axis.index()] = l;
                let e = volume.envelope_at(idx[0], idx[1], idx[2]);
                if e > best {
                    best = e;
                }
            }
            values[r * width + c] = best;
        }
    }
    EnvelopeMap {
        width,
        height,
        values,
    }
}

/// Maps linear envelopes to 8-bit dB pixels: the map peak is 255 and values
/// `db_range` dB below it (or an all-zero map) are 0.
pub fn to_db_pixels(map: &EnvelopeMap, db_range: f64) -> Vec<u8> {
    let peak = map.values.iter().cloned().fold(0.0_f64, f64::max);
    map.values
        .iter()
        .map(|&v| {
            if peak <= 0.0 || v <= 0.0 {
                return 0;
            }
            let db = 20.0 * (v / peak).log10();
            let unit = (1.0 + db / db_range).clamp(0.0, 1.0);
            (unit * 255.0).round() as u8
        })
        .collect()
}

fn pgm_bytes(map: &EnvelopeMap, db_range: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    out.extend(to_db_pixels(map, db_range));
    out
}

fn csv_text(map: &EnvelopeMap) -> String {
    let mut s = String::new();
    for r in 0..map.height {
        let row = &map.values[r * map.width..(r + 1) * map.width];
        let line: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Renders `volume_file` and writes `<stem>_<mode>_<axis>.pgm` and `.csv`
/// next to it (or into `output_dir`). Returns the written paths.
pub fn render_volume(
    volume_file: &Path,
    axis: ProjAxis,
    mode: RenderMode,
    db_range: f64,
    output_dir: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let volume = load_volume(volume_file)?;
    let map = project(&volume, axis, mode);

    let stem = volume_file
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("volume");
    let dir = match output_dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
            d.to_path_buf()
        }
        None => volume_file
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let base = format!("{stem}_{}_{}", mode.tag(), axis.label());
    let pgm_path = dir.join(format!("{base}.pgm"));
    let csv_path = dir.join(format!("{base}.csv"));
    fs::write(&pgm_path, pgm_bytes(&map, db_range)).map_err(|e| CliError::io(&pgm_path, e))?;
    fs::write(&csv_path, csv_text(&map)).map_err(|e| CliError::io(&csv_path, e))?;
    Ok(vec![pgm_path, csv_path])
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use rcaus::beamform::VolumeGrid;

    fn volume(counts: [usize; 3], spacing: f64) -> Volume<f64> {
        let grid = VolumeGrid {
            origin: [0.0; 3],
            spacing: [spacing; 3],
            counts,
        };
        let voxels = vec![Complex::new(0.0, 0.0); grid.len()];
        Volume { grid, voxels }
    }

    #[test]
    fn mip_z_has_lateral_dims_and_takes_the_in_slab_max() {
        let mut v = volume([4, 3, 5], 1e-3);
        // Grid z coords: 0..4 mm, center 2 mm; a 2 mm slab keeps layers 1..=3.
        let at = |i: usize, j: usize, k: usize| k * 3 * 4 + j * 4 + i;
        v.voxels[at(1, 2, 2)] = Complex::new(3.0, 4.0); // envelope 5, in slab
        v.voxels[at(1, 2, 0)] = Complex::new(9.0, 0.0); // envelope 9, out of slab
        let map = project(&v, ProjAxis::Z, RenderMode::Mip { slab: 2e-3 });
        assert_eq!((map.width, map.height), (4, 3));
        assert_eq!(map.values[2 * 4 + 1], 5.0);
        assert_eq!(map.values[0], 0.0);
    }

    #[test]
    fn slice_takes_exactly_the_middle_layer() {
        let mut v = volume([3, 3, 7], 1e-3);
        let at = |i: usize, j: usize, k: usize| k * 9 + j * 3 + i;
        v.voxels[at(0, 0, 3)] = Complex::new(2.0, 0.0); // mid layer of 7
        v.voxels[at(0, 0, 4)] = Complex::new(8.0, 0.0); // adjacent layer
        let map = project(&v, ProjAxis::Z, RenderMode::Slice);
        assert_eq!(map.values[0], 2.0);
    }

    #[test]
    fn thin_slab_still_keeps_the_nearest_layer() {
        let mut v = volume([2, 2, 4], 1e-3);
        let at = |i: usize, j: usize, k: usize| k * 4 + j * 2 + i;
        v.voxels[at(0, 0, 1)] = Complex::new(1.0, 0.0);
        // Even count: no layer sits exactly at the 1.5 mm center, but the
        // fallback keeps layer (n-1)/2 = 1.
        let map = project(&v, ProjAxis::Z, RenderMode::Mip { slab: 1e-9 });
        assert_eq!(map.values[0], 1.0);
    }

    #[test]
    fn db_pixels_clamp_to_the_dynamic_range() {
        let map = EnvelopeMap {
            width: 3,
            height: 1,
            values: vec![1.0, 0.1, 1e-6],
        };
        let px = to_db_pixels(&map, 40.0);
        assert_eq!(px[0], 255);
        assert_eq!(px[1], 128); // -20 dB of a 40 dB range
        assert_eq!(px[2], 0); // below the floor
    }

    #[test]
    fn zero_map_renders_black() {
        let map = EnvelopeMap {
            width: 2,
            height: 1,
            values: vec![0.0, 0.0],
        };
        assert_eq!(to_db_pixels(&map, 40.0), vec![0, 0]);
    }

    #[test]
    fn pgm_header_matches_dimensions() {
        let map = EnvelopeMap {
            width: 5,
            height: 2,
            values: vec![0.0; 10],
        };
        let bytes = pgm_bytes(&map, 40.0);
        assert!(bytes.starts_with(b"P5\n5 2\n255\n"));
        assert_eq!(bytes.len(), b"P5\n5 2\n255\n".len() + 10);
    }
}
